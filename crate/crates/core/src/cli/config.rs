//! JSON run configuration and the built-in presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{read_field_csv, Grid, Point, ScalarField};
use crate::operator::{OperatorDoc, OperatorSpec};
use crate::oracles::{Exact1DObstacle, ExactRadial};
use crate::solver::SolveConfig;

fn one() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn unit() -> f64 {
    1.0
}
fn two() -> usize {
    2
}
fn half() -> f64 {
    0.5
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}
fn default_growth_rmax() -> f64 {
    0.15
}
fn default_nondeg_rmax() -> f64 {
    0.1
}
fn default_rmin_cells() -> f64 {
    8.0
}
fn default_deltas() -> Vec<f64> {
    vec![0.02, 0.05, 0.1, 0.2, 0.3, 0.5]
}
fn default_multiples() -> Vec<u32> {
    vec![8, 4, 2, 1]
}
fn default_samples() -> usize {
    10_000
}

/// Scalar data `f` or `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum FieldDoc {
    Constant { value: f64 },
    /// `value + gradient · x`.
    Affine { value: f64, gradient: Vec<f64> },
    Csv { path: PathBuf },
}

impl FieldDoc {
    pub fn build(&self, grid: Grid, base: &Path, what: &str) -> Result<ScalarField> {
        match self {
            FieldDoc::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::Config(format!("{what}.value must be finite")));
                }
                Ok(ScalarField::constant(grid, *value))
            }
            FieldDoc::Affine { value, gradient } => {
                let gr = to_point(gradient, grid.dim(), &format!("{what}.gradient"))?;
                ScalarField::from_fn(grid, |x| value + gr[0] * x[0] + gr[1] * x[1])
            }
            FieldDoc::Csv { path } => {
                let full = if path.is_absolute() { path.clone() } else { base.join(path) };
                let f = read_field_csv(&full)?;
                if f.grid().dim() != grid.dim() {
                    return Err(Error::Config(format!("{what}: {} has the wrong dimension", full.display())));
                }
                Ok(f.resample(grid))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemDoc {
    /// Closed-form 1D problem on `[0, 1]`.
    #[serde(rename = "oracle_1d")]
    Oracle1d { p: f64, lam: f64, g0: f64, g1: f64 },
    /// Closed-form radial problem on `[-1/2, 1/2]^dim`.
    OracleRadial {
        p: f64,
        #[serde(default = "unit")]
        c: f64,
        #[serde(default = "two")]
        dim: usize,
    },
    Custom {
        operator: OperatorDoc,
        f: FieldDoc,
        g: FieldDoc,
    },
    /// `χ_{x < x0}` on the unit square; no solve.
    HalfPlane {
        #[serde(default = "half")]
        x0: f64,
    },
    /// `χ` of a disc on the unit square; no solve.
    Disc { center: Vec<f64>, radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDoc {
    #[serde(default)]
    pub dim: Option<usize>,
    /// Cells per axis at refinement level 0.
    #[serde(alias = "n_cells")]
    pub n: usize,
    #[serde(default)]
    pub lo: Option<Vec<f64>>,
    #[serde(default)]
    pub hi: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BvTarget {
    /// The solution field itself (fixtures carry `χ` here).
    Solution,
    /// `Au`.
    Operator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnalysisDoc {
    Growth {
        /// Target points; free-boundary points when absent.
        #[serde(default)]
        points: Option<Vec<Vec<f64>>>,
        /// Replace each target by the nearest free-boundary point.
        #[serde(default = "yes")]
        snap: bool,
        /// Explicit radii; otherwise `r_min_cells · h · 1.5^k` up to `r_max`.
        #[serde(default)]
        radii: Option<Vec<f64>>,
        #[serde(default = "default_rmin_cells")]
        r_min_cells: f64,
        #[serde(default = "default_growth_rmax")]
        r_max: f64,
    },
    Nondegeneracy {
        #[serde(default)]
        points: Option<Vec<Vec<f64>>>,
        #[serde(default = "yes")]
        snap: bool,
        #[serde(default)]
        radii: Option<Vec<f64>>,
        #[serde(default = "default_rmin_cells")]
        r_min_cells: f64,
        #[serde(default = "default_nondeg_rmax")]
        r_max: f64,
    },
    Porosity {
        radii: Vec<f64>,
    },
    ODelta {
        #[serde(default)]
        point: Option<Vec<f64>>,
        #[serde(default = "yes")]
        snap: bool,
        r: f64,
        #[serde(default = "default_deltas")]
        deltas: Vec<f64>,
    },
    EEps {
        #[serde(default)]
        center: Option<Vec<f64>>,
        #[serde(default = "half")]
        r: f64,
    },
    Hausdorff {
        #[serde(default)]
        center: Option<Vec<f64>>,
        #[serde(default)]
        r: Option<f64>,
    },
    W22 {
        #[serde(default)]
        center: Option<Vec<f64>>,
        radius: f64,
        #[serde(default = "default_multiples")]
        multiples: Vec<u32>,
    },
    Bv {
        /// `[lo, hi]` corners.
        #[serde(default)]
        region: Option<[Vec<f64>; 2]>,
        #[serde(default)]
        of: Option<BvTarget>,
    },
    Complementarity,
    Structural {
        #[serde(default = "default_samples")]
        samples: usize,
    },
}

impl AnalysisDoc {
    pub fn name(&self) -> &'static str {
        match self {
            AnalysisDoc::Growth { .. } => "growth",
            AnalysisDoc::Nondegeneracy { .. } => "nondegeneracy",
            AnalysisDoc::Porosity { .. } => "porosity",
            AnalysisDoc::ODelta { .. } => "o_delta",
            AnalysisDoc::EEps { .. } => "e_eps",
            AnalysisDoc::Hausdorff { .. } => "hausdorff",
            AnalysisDoc::W22 { .. } => "w22",
            AnalysisDoc::Bv { .. } => "bv",
            AnalysisDoc::Complementarity => "complementarity",
            AnalysisDoc::Structural { .. } => "structural",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemDoc,
    #[serde(default)]
    pub grid: Option<GridDoc>,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default)]
    pub analyses: Vec<AnalysisDoc>,
    #[serde(default = "one")]
    pub refinement_levels: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Precomputed solution (field CSV) used by `analyze` instead of solving.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution: Option<PathBuf>,
}

/// Closed-form reference solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Oracle {
    OneD(Exact1DObstacle),
    Radial(ExactRadial),
}

impl Oracle {
    pub fn sample(&self, grid: Grid) -> Result<ScalarField> {
        match self {
            Oracle::OneD(o) => o.sample(grid),
            Oracle::Radial(o) => o.sample(grid),
        }
    }
}

/// A problem instantiated on one grid.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: OperatorSpec,
    pub f: ScalarField,
    pub g: ScalarField,
    pub oracle: Option<Oracle>,
    /// Fixtures are analysed as given and never solved.
    pub fixture: Option<ScalarField>,
}

pub(crate) fn to_point(v: &[f64], dim: usize, what: &str) -> Result<Point> {
    if v.len() != dim {
        return Err(Error::Config(format!("{what}: expected {dim} coordinates, got {}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config(format!("{what}: coordinates must be finite")));
    }
    Ok([v[0], v.get(1).copied().unwrap_or(0.0)])
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn preset(name: &str) -> Result<Self> {
        let text = PRESETS
            .iter()
            .find(|p| p.name == name)
            .map(|p| p.json)
            .ok_or_else(|| Error::Config(format!("unknown preset '{name}'")))?;
        Self::from_json(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn grid_doc(&self) -> Result<&GridDoc> {
        self.grid.as_ref().ok_or_else(|| Error::Config("grid: required".into()))
    }

    pub fn dim(&self) -> Result<usize> {
        let implied = match &self.problem {
            ProblemDoc::Oracle1d { .. } => Some(1),
            ProblemDoc::OracleRadial { dim, .. } => Some(*dim),
            ProblemDoc::HalfPlane { .. } | ProblemDoc::Disc { .. } => Some(2),
            ProblemDoc::Custom { .. } => None,
        };
        let given = self.grid_doc()?.dim;
        match (implied, given) {
            (Some(a), Some(b)) if a != b => Err(Error::Config(format!(
                "grid.dim: problem is {a}-dimensional, grid.dim is {b}"
            ))),
            (Some(a), _) => Ok(a),
            (None, Some(b)) => Ok(b),
            (None, None) => Ok(2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let gd = self.grid_doc()?;
        let dim = self.dim()?;
        if !(dim == 1 || dim == 2) {
            return Err(Error::Config(format!("grid.dim must be 1 or 2, got {dim}")));
        }
        if gd.n < Grid::MIN_CELLS {
            return Err(Error::Config(format!("grid.n must be >= {}", Grid::MIN_CELLS)));
        }
        if self.refinement_levels == 0 {
            return Err(Error::Config("refinement_levels must be >= 1".into()));
        }
        if self.refinement_levels > 8 {
            return Err(Error::Config("refinement_levels must be <= 8".into()));
        }
        self.solve.validate()?;
        let kappa = match &self.problem {
            ProblemDoc::Custom { operator, .. } => operator.kappa,
            _ => 0.0,
        };
        for a in &self.analyses {
            match a {
                AnalysisDoc::W22 { multiples, .. } => {
                    if !(kappa > 0.0) {
                        return Err(Error::Config("analyses.w22: requires kappa > 0".into()));
                    }
                    if multiples.is_empty() || multiples.contains(&0) {
                        return Err(Error::Config("analyses.w22.multiples must be positive".into()));
                    }
                }
                AnalysisDoc::Porosity { radii } if radii.is_empty() => {
                    return Err(Error::Config("analyses.porosity.radii must be non-empty".into()));
                }
                AnalysisDoc::Structural { samples } if *samples == 0 => {
                    return Err(Error::Config("analyses.structural.samples must be >= 1".into()));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Copy with grid extents, dimension and coincidence threshold made explicit.
    pub fn resolved(&self) -> Result<RunConfig> {
        let mut out = self.clone();
        let g = self.grid_at(0)?;
        let dim = g.dim();
        let gd = out.grid.as_mut().expect("validated config has a grid");
        gd.dim = Some(dim);
        gd.lo = Some((0..dim).map(|a| g.lo(a)).collect());
        gd.hi = Some((0..dim).map(|a| g.hi(a)).collect());
        out.solve.tol_u_zero = Some(self.solve.tol_u_zero());
        Ok(out)
    }

    /// Grid at refinement `level` (`n · 2^level` cells per axis).
    pub fn grid_at(&self, level: usize) -> Result<Grid> {
        let gd = self.grid_doc()?;
        let dim = self.dim()?;
        let (dlo, dhi) = match &self.problem {
            ProblemDoc::OracleRadial { .. } => (-0.5, 0.5),
            _ => (0.0, 1.0),
        };
        let lo = match &gd.lo {
            Some(v) => v.clone(),
            None => vec![dlo; dim],
        };
        let hi = match &gd.hi {
            Some(v) => v.clone(),
            None => vec![dhi; dim],
        };
        if lo.len() != dim || hi.len() != dim {
            return Err(Error::Config(format!("grid.lo/grid.hi need {dim} entries")));
        }
        let n = gd.n << level;
        Grid::new(dim, &lo, &hi, &vec![n; dim]).map_err(|e| Error::Config(format!("grid: {e}")))
    }

    /// Instantiates the problem on `grid`; relative paths resolve against `base`.
    pub fn problem(&self, grid: Grid, base: &Path) -> Result<Problem> {
        let config = |e: Error| match e {
            Error::Config(_) | Error::Io(_) => e,
            other => Error::Config(format!("problem: {other}")),
        };
        match &self.problem {
            ProblemDoc::Oracle1d { p, lam, g0, g1 } => {
                let o = Exact1DObstacle::new(*p, *lam, *g0, *g1).map_err(config)?;
                let (spec, f, g) = o.problem(grid)?;
                Ok(Problem { spec, f, g, oracle: Some(Oracle::OneD(o)), fixture: None })
            }
            ProblemDoc::OracleRadial { p, c, dim } => {
                let o = ExactRadial::new(*p, *c, *dim).map_err(config)?;
                let (spec, f, g) = o.problem(grid)?;
                Ok(Problem { spec, f, g, oracle: Some(Oracle::Radial(o)), fixture: None })
            }
            ProblemDoc::Custom { operator, f, g } => {
                let spec = operator.build(grid, base).map_err(config)?;
                let f = f.build(grid, base, "problem.f")?;
                let g = g.build(grid, base, "problem.g")?;
                Ok(Problem { spec, f, g, oracle: None, fixture: None })
            }
            ProblemDoc::HalfPlane { x0 } => {
                let x0 = *x0;
                fixture(grid, move |x| x[0] < x0)
            }
            ProblemDoc::Disc { center, radius } => {
                let c = to_point(center, 2, "problem.center")?;
                let r = *radius;
                if !(r > 0.0) {
                    return Err(Error::Config("problem.radius must be > 0".into()));
                }
                fixture(grid, move |x| (x[0] - c[0]).hypot(x[1] - c[1]) < r)
            }
        }
    }
}

fn fixture(grid: Grid, inside: impl Fn(Point) -> bool) -> Result<Problem> {
    let chi = ScalarField::from_fn(grid, |x| if inside(x) { 1.0 } else { 0.0 })?;
    Ok(Problem {
        spec: OperatorSpec::laplacian(grid)?,
        f: ScalarField::constant(grid, 1.0),
        g: ScalarField::zeros(grid),
        oracle: None,
        fixture: Some(chi),
    })
}

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub json: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "oracle-1d",
        description: "1D, p = 2, f = 1, g = 0.02; exact free boundary at 0.2 and 0.8",
        json: include_str!("../../presets/oracle-1d.json"),
    },
    Preset {
        name: "oracle-radial",
        description: "2D radial u = |x|^q with point free boundary at the origin",
        json: include_str!("../../presets/oracle-radial.json"),
    },
    Preset {
        name: "variable-p-demo",
        description: "2D, p(x) affine from 1.5 to 3 across the square, f = 1, g = 0.01",
        json: include_str!("../../presets/variable-p-demo.json"),
    },
    Preset {
        name: "plateau-2d",
        description: "2D, constant p = 1.8, f = 8, g = 0.25; curved free boundary",
        json: include_str!("../../presets/plateau-2d.json"),
    },
    Preset {
        name: "kappa-demo",
        description: "2D, p = 2.5 with kappa = 0.1, f = 8, g = 0.25",
        json: include_str!("../../presets/kappa-demo.json"),
    },
    Preset {
        name: "half-plane",
        description: "indicator of {x < 1/2} on the unit square",
        json: include_str!("../../presets/half-plane.json"),
    },
    Preset {
        name: "disc",
        description: "indicator of a disc of radius 0.25, h = radius/128",
        json: include_str!("../../presets/disc.json"),
    },
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_build() {
        for p in PRESETS {
            let cfg = RunConfig::preset(p.name).unwrap_or_else(|e| panic!("{}: {e}", p.name));
            let grid = cfg.grid_at(0).unwrap();
            cfg.problem(grid, Path::new(".")).unwrap();
        }
    }

    #[test]
    fn missing_grid_is_named() {
        let e = RunConfig::from_json(r#"{"problem":{"kind":"half_plane"}}"#).unwrap_err();
        assert_eq!(e.to_string(), "config: grid: required");
    }

    #[test]
    fn unknown_field_is_named() {
        let e = RunConfig::from_json(r#"{"problem":{"kind":"half_plane"},"grid":{"n":8},"bogus":1}"#).unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
    }

    #[test]
    fn w22_needs_kappa() {
        let text = r#"{"problem":{"kind":"oracle_1d","p":2,"lam":1,"g0":0.02,"g1":0.02},
                       "grid":{"n":16},"analyses":[{"kind":"w22","radius":0.1}]}"#;
        let e = RunConfig::from_json(text).unwrap_err();
        assert!(e.to_string().contains("requires kappa > 0"));
    }

    #[test]
    fn refinement_doubles_cells() {
        let cfg = RunConfig::preset("oracle-1d").unwrap();
        assert_eq!(cfg.grid_at(0).unwrap().n_cells(0), 64);
        assert_eq!(cfg.grid_at(3).unwrap().n_cells(0), 512);
        let r = RunConfig::preset("oracle-radial").unwrap().grid_at(0).unwrap();
        assert_eq!(r.lo(0), -0.5);
    }

    #[test]
    fn round_trip() {
        let cfg = RunConfig::preset("variable-p-demo").unwrap();
        assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }
}
