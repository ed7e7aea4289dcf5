//! Vertices, parity classes and Kasteleyn entries of the two-periodic
//! square-lattice dimer model.
//!
//! Two pictures are used. In the axis-aligned picture ("tilde") vertices are
//! the integer points of Z² and an a-face is a unit face centred at
//! (2m+½, 2n+½). In the rotated picture vertices are integer points (x, y)
//! with x + y odd and edges are the diagonal steps ±e1, ±e2 with e1 = (1,1),
//! e2 = (−1,1). The two pictures are related by
//! `tilde = M(g − (1,0)) + (1,0)`, `M = ½[[1,−1],[1,1]]`.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// e1 in the rotated picture.
pub const E1: (i64, i64) = (1, 1);
/// e2 in the rotated picture.
pub const E2: (i64, i64) = (-1, 1);

/// Maps an axis-aligned point to the rotated picture.
pub fn tilde_to_g(p: (f64, f64)) -> (f64, f64) {
    (p.0 + p.1, p.1 - p.0 + 1.0)
}

/// Maps a rotated-picture point back to the axis-aligned picture.
pub fn g_to_tilde(g: (f64, f64)) -> (f64, f64) {
    (0.5 * (g.0 - g.1 + 1.0), 0.5 * (g.0 + g.1 - 1.0))
}

/// Exact integer version of [`tilde_to_g`] for lattice vertices.
pub fn tilde_vertex_to_g(p: (i64, i64)) -> (i64, i64) {
    (p.0 + p.1, p.1 - p.0 + 1)
}

/// Exact inverse of [`tilde_vertex_to_g`]; fails if the point is not a vertex.
pub fn g_vertex_to_tilde(g: (i64, i64)) -> Result<(i64, i64)> {
    let s = g.0 - g.1 + 1;
    let t = g.0 + g.1 - 1;
    if s.rem_euclid(2) != 0 {
        return Err(Error::Parity(format!("({}, {}) is not a vertex", g.0, g.1)));
    }
    Ok((s / 2, t / 2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParityClass {
    W0,
    W1,
    B0,
    B1,
}

impl ParityClass {
    pub fn is_black(self) -> bool {
        matches!(self, ParityClass::B0 | ParityClass::B1)
    }

    /// Sub-index i in B_i / W_i.
    pub fn index(self) -> u8 {
        match self {
            ParityClass::W0 | ParityClass::B0 => 0,
            ParityClass::W1 | ParityClass::B1 => 1,
        }
    }
}

impl fmt::Display for ParityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ParityClass::W0 => "W0",
            ParityClass::W1 => "W1",
            ParityClass::B0 => "B0",
            ParityClass::B1 => "B1",
        };
        f.write_str(s)
    }
}

/// Class of the rotated-picture vertex (x, y).
pub fn classify_vertex(x: i64, y: i64) -> Result<ParityClass> {
    if (x + y).rem_euclid(2) == 0 {
        return Err(Error::Parity(format!("({x}, {y}) has even coordinate sum")));
    }
    let sub = ((x + y).rem_euclid(4) - 1) / 2;
    Ok(match (x.rem_euclid(2) == 0, sub) {
        (true, 0) => ParityClass::B0,
        (true, _) => ParityClass::B1,
        (false, 0) => ParityClass::W0,
        (false, _) => ParityClass::W1,
    })
}

/// A vertex of the rotated graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexG {
    pub x: i64,
    pub y: i64,
    class: ParityClass,
}

impl VertexG {
    pub fn new(x: i64, y: i64) -> Result<Self> {
        Ok(Self {
            x,
            y,
            class: classify_vertex(x, y)?,
        })
    }

    /// Vertex at an axis-aligned integer point.
    pub fn from_tilde(p: (i64, i64)) -> Self {
        let g = tilde_vertex_to_g(p);
        Self::new(g.0, g.1).expect("image of an integer point is a vertex")
    }

    pub fn class(&self) -> ParityClass {
        self.class
    }

    pub fn is_black(&self) -> bool {
        self.class.is_black()
    }

    pub fn offset(&self, d: (i64, i64)) -> Result<Self> {
        Self::new(self.x + d.0, self.y + d.1)
    }

    pub fn to_tilde(&self) -> (i64, i64) {
        g_vertex_to_tilde((self.x, self.y)).expect("vertex")
    }
}

impl fmt::Display for VertexG {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}){}", self.x, self.y, self.class)
    }
}

/// Kasteleyn entry K_a(b, w); zero for non-adjacent pairs.
pub fn kasteleyn_entry(b: &VertexG, w: &VertexG, a: f64) -> Complex64 {
    if !b.is_black() || w.is_black() {
        return Complex64::new(0.0, 0.0);
    }
    let j = b.class.index() as f64;
    let i = Complex64::i();
    match (w.x - b.x, w.y - b.y) {
        E1 => Complex64::new(a * (1.0 - j) + j, 0.0),
        E2 => i * (a * j + (1.0 - j)),
        (-1, -1) => Complex64::new(a * j + (1.0 - j), 0.0),
        (1, -1) => i * (a * (1.0 - j) + j),
        _ => Complex64::new(0.0, 0.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WeightClass {
    A,
    One,
}

/// A dimer, stored as an ordered (black, white) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeDimer {
    pub black: VertexG,
    pub white: VertexG,
}

impl EdgeDimer {
    pub fn new(black: VertexG, white: VertexG) -> Result<Self> {
        if !black.is_black() || white.is_black() {
            return Err(Error::Parity(format!("edge needs (black, white), got ({black}, {white})")));
        }
        let d = (black.x - white.x, black.y - white.y);
        if d.0.abs() != 1 || d.1.abs() != 1 {
            return Err(Error::Parity(format!("{black} and {white} are not adjacent")));
        }
        Ok(Self { black, white })
    }

    /// The adjacent face whose centre has two odd coordinates. Every edge
    /// borders exactly one such face.
    pub fn odd_face(&self) -> (i64, i64) {
        let (b, w) = (self.black, self.white);
        let d = (w.x - b.x, w.y - b.y);
        let sx = b.x + w.x;
        let sy = b.y + w.y;
        let c1 = ((sx + d.1) / 2, (sy - d.0) / 2);
        if c1.0.rem_euclid(2) == 1 {
            c1
        } else {
            ((sx - d.1) / 2, (sy + d.0) / 2)
        }
    }

    /// a-edge iff the odd-centred adjacent face (i, j) has i + j ≡ 2 (mod 4).
    pub fn weight_class(&self) -> WeightClass {
        let (i, j) = self.odd_face();
        if (i + j).rem_euclid(4) == 2 {
            WeightClass::A
        } else {
            WeightClass::One
        }
    }

    pub fn kasteleyn(&self, a: f64) -> Complex64 {
        kasteleyn_entry(&self.black, &self.white, a)
    }
}

impl fmt::Display for EdgeDimer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{} - {}]", self.black, self.white)
    }
}

/// h(ε1, ε2) = ε1(1−ε2) + ε2(1−ε1).
pub fn parity_h(eps1: u8, eps2: u8) -> i64 {
    let (e1, e2) = (eps1 as i64, eps2 as i64);
    e1 * (1 - e2) + e2 * (1 - e1)
}

/// The four integer indices feeding K⁻¹ through two I_a values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IndexQuad {
    pub k1: i64,
    pub l1: i64,
    pub k2: i64,
    pub l2: i64,
    pub h: i64,
}

/// Index quadruple for a white `x` ∈ W_{ε1} and a black `y` ∈ B_{ε2}.
pub fn kl_indices(x: &VertexG, y: &VertexG) -> Result<IndexQuad> {
    if x.is_black() || !y.is_black() {
        return Err(Error::Parity(format!("kl_indices needs (white, black), got ({x}, {y})")));
    }
    let h = parity_h(x.class.index(), y.class.index());
    let num_k = x.y - y.y - 1;
    let num_l = y.x - x.x - 1;
    if num_k.rem_euclid(2) != 0 || num_l.rem_euclid(2) != 0 {
        return Err(Error::Parity(format!("non-integer k/l for ({x}, {y})")));
    }
    let k1 = num_k / 2 + h;
    let l1 = num_l / 2;
    Ok(IndexQuad {
        k1,
        l1,
        k2: k1 + 1 - 2 * h,
        l2: l1 + 1,
        h,
    })
}

/// Displacement u(2e1) + v(2e2) between fundamental domains.
pub fn domain_translation(u: i64, v: i64) -> (i64, i64) {
    (2 * u - 2 * v, 2 * u + 2 * v)
}
