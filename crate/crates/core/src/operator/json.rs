use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{OperatorSpec, DEFAULT_ETA_FLOOR};
use crate::error::{Error, Result};
use crate::fields::{read_field_csv, ExponentField, Grid, ScalarField};

/// JSON description of `p(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum ExponentDoc {
    Constant {
        #[serde(alias = "p0", alias = "p")]
        value: f64,
    },
    /// `p0 + gradient · x`, clipped to `[p_minus, p_plus]`.
    Affine {
        #[serde(alias = "value")]
        p0: f64,
        gradient: Vec<f64>,
        #[serde(alias = "lower")]
        p_minus: f64,
        #[serde(alias = "upper")]
        p_plus: f64,
    },
    Csv {
        path: PathBuf,
    },
    /// Inline nodal values on the run grid.
    Nodal {
        values: Vec<f64>,
    },
}

/// JSON description of `M(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum CoefficientDoc {
    Constant {
        #[serde(alias = "m0", alias = "m")]
        value: f64,
    },
    /// `m0 + gradient · x`, clipped to `[lower, upper]`.
    Affine {
        #[serde(alias = "value")]
        m0: f64,
        gradient: Vec<f64>,
        #[serde(alias = "m_lo")]
        lower: f64,
        #[serde(alias = "m_hi")]
        upper: f64,
    },
    Csv {
        path: PathBuf,
    },
    Nodal {
        values: Vec<f64>,
    },
}

impl Default for CoefficientDoc {
    fn default() -> Self {
        CoefficientDoc::Constant { value: 1.0 }
    }
}

fn default_floor() -> f64 {
    DEFAULT_ETA_FLOOR
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorDoc {
    #[serde(default)]
    pub kappa: f64,
    #[serde(default = "default_floor")]
    pub eta_floor: f64,
    pub p: ExponentDoc,
    #[serde(rename = "M", alias = "m", default)]
    pub m: CoefficientDoc,
}

fn gradient2(g: &[f64], grid: &Grid, what: &str) -> Result<[f64; 2]> {
    if g.len() != grid.dim() {
        return Err(Error::Config(format!(
            "{what}.gradient: expected {} entries, got {}",
            grid.dim(),
            g.len()
        )));
    }
    Ok([g[0], g.get(1).copied().unwrap_or(0.0)])
}

fn load_csv(path: &Path, base: &Path, grid: Grid) -> Result<Vec<f64>> {
    let full = if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    };
    let f = read_field_csv(&full)?;
    if f.grid().dim() != grid.dim() {
        return Err(Error::GridMismatch(format!(
            "{} is {}D, run grid is {}D",
            full.display(),
            f.grid().dim(),
            grid.dim()
        )));
    }
    Ok(f.resample(grid).into_values())
}

impl OperatorDoc {
    /// Builds the operator on `grid`; relative CSV paths resolve against `base`.
    pub fn build(&self, grid: Grid, base: &Path) -> Result<OperatorSpec> {
        let p = match &self.p {
            ExponentDoc::Constant { value } => ExponentField::constant(grid, *value)?,
            ExponentDoc::Affine {
                p0,
                gradient,
                p_minus,
                p_plus,
            } => ExponentField::affine(grid, *p0, gradient2(gradient, &grid, "p")?, *p_minus, *p_plus)?,
            ExponentDoc::Csv { path } => ExponentField::from_values(grid, load_csv(path, base, grid)?)?,
            ExponentDoc::Nodal { values } => ExponentField::from_values(grid, values.clone())?,
        };
        let m = match &self.m {
            CoefficientDoc::Constant { value } => ScalarField::constant(grid, *value),
            CoefficientDoc::Affine {
                m0,
                gradient,
                lower,
                upper,
            } => {
                let gr = gradient2(gradient, &grid, "M")?;
                if !(*lower > 0.0 && lower <= upper) {
                    return Err(Error::Config(format!(
                        "M: need 0 < lower <= upper, got [{lower}, {upper}]"
                    )));
                }
                ScalarField::from_fn(grid, |x| {
                    let mut v = m0 + gr[0] * x[0];
                    if grid.dim() == 2 {
                        v += gr[1] * x[1];
                    }
                    v.clamp(*lower, *upper)
                })?
            }
            CoefficientDoc::Csv { path } => ScalarField::new(grid, load_csv(path, base, grid)?)?,
            CoefficientDoc::Nodal { values } => ScalarField::new(grid, values.clone())?,
        };
        OperatorSpec::new(p, m, self.kappa, self.eta_floor)
    }

    /// A document reproducing `spec` exactly on its own grid.
    pub fn from_spec(spec: &OperatorSpec) -> Self {
        let p = if spec.p().is_constant() {
            ExponentDoc::Constant {
                value: spec.p().get(0),
            }
        } else {
            ExponentDoc::Nodal {
                values: spec.p().values().to_vec(),
            }
        };
        let mv = spec.m().values();
        let m = if mv.iter().all(|&v| v == mv[0]) {
            CoefficientDoc::Constant { value: mv[0] }
        } else {
            CoefficientDoc::Nodal { values: mv.to_vec() }
        };
        OperatorDoc {
            kappa: spec.kappa(),
            eta_floor: spec.eta_floor(),
            p,
            m,
        }
    }
}

impl OperatorSpec {
    pub fn from_json(text: &str, grid: Grid, base: &Path) -> Result<Self> {
        let doc: OperatorDoc = serde_json::from_str(text)?;
        doc.build(grid, base)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&OperatorDoc::from_spec(self))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_aliases() {
        let g = Grid::unit(2, 8).unwrap();
        let text = r#"{"kappa":0.1,"p":{"mode":"affine","value":1.5,"gradient":[1.5,0],"lower":1.5,"upper":3},
                       "M":{"mode":"constant","m0":2.0}}"#;
        let s = OperatorSpec::from_json(text, g, Path::new(".")).unwrap();
        assert_eq!(s.kappa(), 0.1);
        assert_eq!(s.eta_floor(), DEFAULT_ETA_FLOOR);
        assert_eq!(s.p().get(g.node_index(8, 0)), 3.0);
        assert_eq!(s.m().get(3), 2.0);
    }

    #[test]
    fn json_round_trip() {
        let g = Grid::unit(2, 6).unwrap();
        let doc = OperatorDoc {
            kappa: 0.5,
            eta_floor: 1e-9,
            p: ExponentDoc::Affine {
                p0: 1.5,
                gradient: vec![0.5, 1.0],
                p_minus: 1.5,
                p_plus: 3.0,
            },
            m: CoefficientDoc::Affine {
                m0: 0.5,
                gradient: vec![1.5, 0.0],
                lower: 0.5,
                upper: 2.0,
            },
        };
        let s = doc.build(g, Path::new(".")).unwrap();
        let back = OperatorSpec::from_json(&s.to_json().unwrap(), g, Path::new(".")).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn csv_mode_reads_exponent() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::unit(1, 8).unwrap();
        let pf = ScalarField::from_fn(g, |x| 2.0 + x[0]).unwrap();
        crate::fields::write_field_csv(&pf, dir.path().join("p.csv")).unwrap();
        let text = r#"{"p":{"mode":"csv","path":"p.csv"}}"#;
        let s = OperatorSpec::from_json(text, g, dir.path()).unwrap();
        assert_eq!(s.p().values(), pf.values());
    }

    #[test]
    fn bad_kappa_rejected() {
        let g = Grid::unit(1, 8).unwrap();
        let text = r#"{"kappa":2.0,"p":{"mode":"constant","value":2}}"#;
        assert!(OperatorSpec::from_json(text, g, Path::new(".")).is_err());
    }
}
