//! Command-line definitions and TOML config merging.
//!
//! Every command's parameters live in one struct that is both a clap `Args`
//! and a serde type. A config file holds one table per command (named like the
//! command) plus optional top-level `out`, `threads` and `sequential` keys.
//! Flags given on the command line win over the file.

use crate::error::{CliError, CliResult};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "dimer-sg", version, about = "Exact dimer kernels, scaling limits and sine-Gordon covariances")]
pub struct Cli {
    /// TOML config with one table per command
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output file; stdout when absent or "-"
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads for the data-parallel core
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Run every parallel loop on the calling thread
    #[arg(long, global = true)]
    pub sequential: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bessel integral identities over an (r1, r2) grid, as a pass/fail table
    BesselCheck(BesselCheckArgs),
    /// Single contour integrals I_a(k, l)
    Ia(IaArgs),
    /// Inverse Kasteleyn entry for a white/black pair
    Kinv(KinvArgs),
    /// Single and joint edge probabilities
    EdgeProb(EdgeProbArgs),
    /// Rescaled inverse Kasteleyn against its Bessel limit along an eps schedule
    Converge(ConvergeArgs),
    /// Derivative height correlations against their Bessel limits
    DerivCorr(DerivCorrArgs),
    /// a-height second moment between two a-faces
    HeightCov(HeightCovArgs),
    /// Smeared two-point function of a height field
    Smeared(SmearedArgs),
    /// Sine-Gordon and free-fermion closed forms
    Sg(SgArgs),
    /// Dimer a-height pairing against the sine-Gordon target, per eps
    Compare(CompareArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::BesselCheck(_) => "bessel-check",
            Command::Ia(_) => "ia",
            Command::Kinv(_) => "kinv",
            Command::EdgeProb(_) => "edge-prob",
            Command::Converge(_) => "converge",
            Command::DerivCorr(_) => "deriv-corr",
            Command::HeightCov(_) => "height-cov",
            Command::Smeared(_) => "smeared",
            Command::Sg(_) => "sg",
            Command::Compare(_) => "compare",
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BesselCheckArgs {
    /// Grid points per axis
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub r_min: Option<f64>,
    #[arg(long)]
    pub r_max: Option<f64>,
    /// Relative tolerance for a pass
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IaArgs {
    /// Edge weight a in (0, 1)
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub k_max: Option<u32>,
    #[arg(long)]
    pub l_max: Option<u32>,
    /// Add the torus double-integral oracle column
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub oracle: Option<bool>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KinvArgs {
    #[arg(long)]
    pub a: Option<f64>,
    /// White vertex "x,y" in rotated coordinates
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub white: Option<Vec<i64>>,
    /// Black vertex "x,y" in rotated coordinates
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub black: Option<Vec<i64>>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub oracle: Option<bool>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeProbArgs {
    #[arg(long)]
    pub a: Option<f64>,
    /// Edge "bx,by,wx,wy" (black then white); repeat for joint probabilities
    #[arg(long, allow_hyphen_values = true)]
    pub edge: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeArgs {
    /// Parity case "e1e2", one of 00, 01, 10, 11
    #[arg(long)]
    pub case: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Explicit eps values; overrides --m
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    /// Schedule divisors: eps = scale / (4 m)
    #[arg(long, value_delimiter = ',')]
    pub m: Option<Vec<u32>>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivCorrArgs {
    /// Horizontal separation
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<f64>,
    /// Vertical separation
    #[arg(long, allow_hyphen_values = true)]
    pub y: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    /// Derivative axis at the first point (0 horizontal, 1 vertical); all pairs when absent
    #[arg(long)]
    pub i: Option<u8>,
    #[arg(long)]
    pub j: Option<u8>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeightCovArgs {
    #[arg(long)]
    pub a: Option<f64>,
    /// a-face "m,n" (both even)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x1: Option<Vec<i64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x2: Option<Vec<i64>>,
}

/// Test function fields shared by the pairing commands. A function with
/// c0 or c1 set is the directional derivative c0 ∂0 b + c1 ∂1 b of its bump.
macro_rules! pair_args {
    ($(#[$meta:meta])* $name:ident { $($(#[$fm:meta])* $field:ident : $ty:ty,)* }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct $name {
            $($(#[$fm])* pub $field: $ty,)*
            /// Centre "x,y" of the first test function
            #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
            pub f1_centre: Option<Vec<f64>>,
            #[arg(long)]
            pub f1_radius: Option<f64>,
            #[arg(long, allow_hyphen_values = true)]
            pub f1_amplitude: Option<f64>,
            #[arg(long, allow_hyphen_values = true)]
            pub f1_c0: Option<f64>,
            #[arg(long, allow_hyphen_values = true)]
            pub f1_c1: Option<f64>,
            #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
            pub f2_centre: Option<Vec<f64>>,
            #[arg(long)]
            pub f2_radius: Option<f64>,
            #[arg(long, allow_hyphen_values = true)]
            pub f2_amplitude: Option<f64>,
            #[arg(long, allow_hyphen_values = true)]
            pub f2_c0: Option<f64>,
            #[arg(long, allow_hyphen_values = true)]
            pub f2_c1: Option<f64>,
        }

        impl $name {
            pub fn pair_spec(&self) -> PairSpec {
                PairSpec {
                    f1: FunctionSpec {
                        centre: self.f1_centre.clone(),
                        radius: self.f1_radius,
                        amplitude: self.f1_amplitude,
                        c0: self.f1_c0,
                        c1: self.f1_c1,
                    },
                    f2: FunctionSpec {
                        centre: self.f2_centre.clone(),
                        radius: self.f2_radius,
                        amplitude: self.f2_amplitude,
                        c0: self.f2_c0,
                        c1: self.f2_c1,
                    },
                }
            }
        }
    };
}

#[derive(Debug, Clone, Default)]
pub struct FunctionSpec {
    pub centre: Option<Vec<f64>>,
    pub radius: Option<f64>,
    pub amplitude: Option<f64>,
    pub c0: Option<f64>,
    pub c1: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct PairSpec {
    pub f1: FunctionSpec,
    pub f2: FunctionSpec,
}

pair_args!(SmearedArgs {
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long)]
    lambda: Option<f64>,
    /// a-height, full-height, or a derivative field d0d0, d0d1, d1d0, d1d1
    #[arg(long)]
    field: Option<String>,
});

pair_args!(CompareArgs {
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long)]
    lambda: Option<f64>,
});

pair_args!(SgArgs {
    /// One of F, cmu, two-point, deriv, fermion
    #[arg(long)]
    op: Option<String>,
    /// Output format: json (default) or csv
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Coupling z; overrides lambda
    #[arg(long, allow_hyphen_values = true)]
    z: Option<f64>,
    /// Mass; overrides z and lambda for cmu and fermion
    #[arg(long)]
    mu: Option<f64>,
    /// Argument of F
    #[arg(long, allow_hyphen_values = true)]
    x: Option<f64>,
    /// Momentum "p0,p1" for cmu
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    p: Option<Vec<f64>>,
    /// Derivative kind for deriv: dd, ddbar, d0d0, d0d1, d1d0, d1d1
    #[arg(long)]
    kind: Option<String>,
    /// Relative tolerance of the deriv quadrature
    #[arg(long)]
    tol: Option<f64>,
    /// Fermion insertion points "x0,x1"
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    point1: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    point2: Option<Vec<f64>>,
    /// Component indices "alpha,beta" of each insertion
    #[arg(long, value_delimiter = ',')]
    index1: Option<Vec<u8>>,
    #[arg(long, value_delimiter = ',')]
    index2: Option<Vec<u8>>,
});

/// Top-level keys allowed in a config file besides the command tables.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GlobalKeys {
    out: Option<PathBuf>,
    threads: Option<usize>,
    sequential: Option<bool>,
}

/// Global settings after merging flags and file.
#[derive(Debug, Default)]
pub struct Globals {
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub sequential: bool,
}

/// Parsed config file: top-level keys and the table for the chosen command.
pub struct ConfigFile {
    globals: GlobalKeys,
    section: Map<String, Value>,
}

impl ConfigFile {
    pub fn load(path: Option<&PathBuf>, command: &str) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self {
                globals: GlobalKeys::default(),
                section: Map::new(),
            });
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let table: toml::Table =
            toml::from_str(&text).map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        let mut root = Map::new();
        let mut section = Map::new();
        for (key, value) in table {
            let json = serde_json::to_value(&value).map_err(|e| CliError::usage(e.to_string()))?;
            match value {
                toml::Value::Table(_) if key == command => {
                    if let Value::Object(m) = json {
                        section = m;
                    }
                }
                // tables for other commands are ignored so one file can drive several
                toml::Value::Table(_) => {}
                _ => {
                    root.insert(key, json);
                }
            }
        }
        let globals = serde_json::from_value(Value::Object(root)).map_err(|e| CliError::usage(format!("config: {e}")))?;
        Ok(Self { globals, section })
    }

    pub fn globals(&self, cli: &Cli) -> Globals {
        Globals {
            out: cli.out.clone().or_else(|| self.globals.out.clone()),
            threads: cli.threads.or(self.globals.threads),
            sequential: cli.sequential || self.globals.sequential.unwrap_or(false),
        }
    }

    /// Overlays the flags given on the command line onto the file table and
    /// returns the typed result together with its JSON form.
    pub fn resolve<T: Serialize + DeserializeOwned>(&self, cli: &T) -> CliResult<(T, Value)> {
        let mut merged = self.section.clone();
        if let Value::Object(flags) = serde_json::to_value(cli).map_err(|e| CliError::usage(e.to_string()))? {
            for (k, v) in flags {
                if !v.is_null() {
                    merged.insert(k, v);
                }
            }
        }
        merged.retain(|_, v| !v.is_null());
        let value = Value::Object(merged);
        let typed = serde_json::from_value(value.clone()).map_err(|e| CliError::usage(format!("parameters: {e}")))?;
        Ok((typed, value))
    }
}

/// Unwraps a required parameter or reports it by name.
pub fn required<T: Clone>(value: &Option<T>, key: &str) -> CliResult<T> {
    value.clone().ok_or_else(|| CliError::usage(format!("missing required parameter `{key}`")))
}
