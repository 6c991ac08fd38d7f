//! Model configuration files.
//!
//! ```toml
//! n_rows = 4
//! n_cols = 4
//! alpha = 9.0                   # or a path to an n_rows × n_cols CSV
//! boundary_cov = "identity:1.0" # or a path to a dense CSV
//! beta.n = 1.0                  # any of n ne e se s sw w nw; missing ones are 0
//! beta.s = 1.0
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::io::read_matrix_csv;
use crate::lattice::{build_precision, LatticeSpec, NeighborhoodCoefficients, Offset, PrecisionSystem};

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawAlpha {
    Scalar(f64),
    Path(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    n_rows: usize,
    n_cols: usize,
    alpha: RawAlpha,
    #[serde(default)]
    beta: BTreeMap<String, f64>,
    boundary_cov: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AlphaSource {
    Scalar(f64),
    Field(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundarySource {
    /// `σ² I`.
    ScaledIdentity(f64),
    Dense(PathBuf),
}

/// A parsed config with paths already resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub spec: LatticeSpec,
    pub alpha: AlphaSource,
    /// Indexed in [`Offset::ALL`] order.
    pub beta: [f64; 8],
    pub boundary: BoundarySource,
}

impl ModelConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::parse(origin, e.message().to_owned()))?;
        let spec = LatticeSpec::new(raw.n_rows, raw.n_cols)?;
        let base = origin.parent().unwrap_or_else(|| Path::new("."));
        let alpha = match raw.alpha {
            RawAlpha::Scalar(a) => AlphaSource::Scalar(a),
            RawAlpha::Path(p) => AlphaSource::Field(base.join(p)),
        };
        let mut beta = [0.0; 8];
        for (key, value) in raw.beta {
            let offset = Offset::from_name(&key)
                .ok_or_else(|| Error::parse(origin, format!("unknown neighbour offset `beta.{key}`")))?;
            beta[offset.index()] = value;
        }
        let boundary = match raw.boundary_cov.strip_prefix("identity:") {
            Some(v) => {
                let var: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(origin, format!("bad identity scale `{v}`")))?;
                if !(var >= 0.0) || !var.is_finite() {
                    return Err(Error::parse(origin, format!("identity scale must be finite and ≥ 0, got {var}")));
                }
                BoundarySource::ScaledIdentity(var)
            }
            None => BoundarySource::Dense(base.join(raw.boundary_cov)),
        };
        Ok(Self { spec, alpha, beta, boundary })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn coefficients(&self) -> Result<NeighborhoodCoefficients> {
        match &self.alpha {
            AlphaSource::Scalar(a) => NeighborhoodCoefficients::homogeneous(self.spec, *a, self.beta),
            AlphaSource::Field(path) => {
                let grid = read_matrix_csv(path)?;
                let (n, m) = (self.spec.n_rows(), self.spec.n_cols());
                if grid.shape() != (n, m) {
                    return Err(Error::Dimension(format!(
                        "{}: alpha field is {}×{}, expected {n}×{m}",
                        path.display(),
                        grid.nrows(),
                        grid.ncols()
                    )));
                }
                let alpha = (0..n * m).map(|p| grid[(p / m, p % m)]).collect();
                NeighborhoodCoefficients::with_alpha_field(self.spec, alpha, self.beta)
            }
        }
    }

    pub fn boundary_cov(&self) -> Result<DMatrix<f64>> {
        let b = self.spec.boundary_len();
        match &self.boundary {
            BoundarySource::ScaledIdentity(v) => Ok(DMatrix::identity(b, b) * *v),
            BoundarySource::Dense(path) => read_matrix_csv(path),
        }
    }

    pub fn build(&self) -> Result<PrecisionSystem> {
        build_precision(self.spec, &self.coefficients()?, self.boundary_cov()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    #[test]
    fn scalar_model() {
        let text = "n_rows = 3\nn_cols = 2\nalpha = 9\nboundary_cov = \"identity:0.5\"\nbeta.e = 1.0\nbeta.w = 1.0\n";
        let cfg = ModelConfig::parse(text, Path::new("/tmp/model.toml")).unwrap();
        assert_eq!(cfg.spec, LatticeSpec::new(3, 2).unwrap());
        assert_eq!(cfg.alpha, AlphaSource::Scalar(9.0));
        assert_eq!(cfg.beta[Offset::E.index()], 1.0);
        assert_eq!(cfg.beta[Offset::N.index()], 0.0);
        let sys = cfg.build().unwrap();
        assert_eq!(sys.boundary_cov[(0, 0)], 0.5);
        assert_eq!(sys.a[(0, 1)], -1.0);
    }

    #[test]
    fn files_resolve_next_to_config() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("alpha.csv"), "5,6\n7,8\n").unwrap();
        let mut sigma = String::new();
        for i in 0..12 {
            let row: Vec<&str> = (0..12).map(|j| if i == j { "2" } else { "0" }).collect();
            sigma.push_str(&row.join(","));
            sigma.push('\n');
        }
        fs::write(dir.path().join("sigma.csv"), sigma).unwrap();
        let path = dir.path().join("m.toml");
        let mut f = fs::File::create(&path).unwrap();
        writeln!(f, "n_rows = 2\nn_cols = 2\nalpha = \"alpha.csv\"\nboundary_cov = \"sigma.csv\"").unwrap();
        let sys = ModelConfig::load(&path).unwrap().build().unwrap();
        assert_eq!(sys.a[(3, 3)], 8.0);
        assert_eq!(sys.boundary_cov[(11, 11)], 2.0);
    }

    #[test]
    fn malformed_configs() {
        let origin = Path::new("x.toml");
        let base = "n_rows = 2\nn_cols = 2\nalpha = 1.0\n";
        assert!(ModelConfig::parse(&format!("{base}boundary_cov = \"identity:-1\"\n"), origin).is_err());
        assert!(ModelConfig::parse(&format!("{base}boundary_cov = \"identity:1\"\nbeta.up = 1\n"), origin).is_err());
        assert!(ModelConfig::parse(&format!("{base}boundary_cov = \"identity:1\"\ngamma = 1\n"), origin).is_err());
        assert!(ModelConfig::parse("n_rows = 0\nn_cols = 2\nalpha = 1\nboundary_cov = \"identity:1\"\n", origin).is_err());
        let asym = format!("{base}boundary_cov = \"identity:1\"\nbeta.e = 1\n");
        assert!(ModelConfig::parse(&asym, origin).unwrap().build().is_err());
    }
}
