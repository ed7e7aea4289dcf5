pub mod asymptotics;
pub mod error;
pub mod height_field;
pub mod kernel_exact;
pub mod lattice;
pub mod par;
pub mod quadrature;
pub mod sine_gordon;
pub mod special_functions;

pub use error::{Error, Result};
