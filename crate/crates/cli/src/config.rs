//! TOML schemas for `solve` and `bench`.
//!
//! ```toml
//! seed = 0
//! eps = 0.01            # certified run; omit to run `max_iters` steps
//! max_iters = 1000
//! schedule = "harmonic" # or "line_search"
//!
//! [objective]
//! kind = "quadratic"    # ||x||^2, or ||X||_F^2 on the spectahedron
//!
//! [domain]
//! kind = "simplex"      # simplex | l1 | cube | spectahedron
//! n = 50
//!
//! [output]
//! trace = "trace.csv"
//! summary = "summary.json"
//! ```
//!
//! Other objectives: `least_squares` and `lasso` take `a` (rows) and `b`
//! inline or a `path` to a text file with one row `a_1 .. a_n b` per line;
//! `lasso` also takes the radius `t` and runs on the l1 ball.
//! `quadratic_file` reads `n`, then `n` rows of `Q`, then `c` for
//! `1/2 x^T Q x + c^T x`.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    #[default]
    Harmonic,
    LineSearch,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveSpec {
    Quadratic,
    LeastSquares {
        a: Option<Vec<Vec<f64>>>,
        b: Option<Vec<f64>>,
        path: Option<PathBuf>,
    },
    Lasso {
        a: Option<Vec<Vec<f64>>>,
        b: Option<Vec<f64>>,
        path: Option<PathBuf>,
        t: f64,
    },
    QuadraticFile {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Simplex { n: Option<usize> },
    L1 { n: Option<usize>, t: Option<f64> },
    Cube { n: Option<usize> },
    Spectahedron { n: usize, t: Option<f64> },
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub trace: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub eps: Option<f64>,
    pub max_iters: Option<usize>,
    #[serde(default)]
    pub schedule: Schedule,
    #[serde(default)]
    pub timing: bool,
    pub objective: ObjectiveSpec,
    pub domain: DomainSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(eps) = self.eps {
            if !(eps > 0.0) || !eps.is_finite() {
                return Err(CliError::config(format!("eps must be positive, got {eps}")));
            }
        }
        if self.eps.is_none() && self.max_iters.is_none() {
            return Err(CliError::config("set `eps` or `max_iters`"));
        }
        match &self.objective {
            ObjectiveSpec::LeastSquares { a, b, path } | ObjectiveSpec::Lasso { a, b, path, .. } => {
                match (a, b, path) {
                    (Some(_), Some(_), None) | (None, None, Some(_)) => {}
                    _ => return Err(CliError::config("give either `a` and `b`, or `path`")),
                }
            }
            _ => {}
        }
        if let ObjectiveSpec::Lasso { t, .. } = self.objective {
            if !(t > 0.0) {
                return Err(CliError::config(format!("lasso radius must be positive, got {t}")));
            }
        }
        Ok(())
    }
}

pub fn load_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// `bench` sweep file. Every point is an independent run with the same
/// seed; rows come out in the order of `values`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub output: PathBuf,
    pub sweep: Sweep,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Sweep {
    /// Matrix completion at each value of `param` (`t` or `steps`).
    Completion {
        data: PathBuf,
        #[serde(default = "default_format")]
        format: String,
        #[serde(default = "default_split")]
        split: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_preset")]
        preset: String,
        t: Option<f64>,
        steps: Option<usize>,
        param: String,
        values: Vec<f64>,
    },
    /// A `solve` run at each value of `param` (`n`, `t`, `max_iters`, `eps`).
    Solve { run: RunConfig, param: String, values: Vec<f64> },
    /// One `solve` run, one row per iterate with `f - f_star` next to the
    /// bound `8 C_f / (k + 2)`.
    Envelope { run: RunConfig, f_star: Option<f64> },
}

fn default_format() -> String {
    "tab_100k".into()
}

fn default_split() -> f64 {
    0.5
}

fn default_preset() -> String {
    "table1".into()
}
