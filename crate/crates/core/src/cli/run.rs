//! Solving and measuring one refinement level of a [`RunConfig`].

use std::path::Path;

use serde::Serialize;

use super::config::{to_point, AnalysisDoc, BvTarget, Problem, RunConfig};
use crate::error::{Error, Result};
use crate::fields::{Grid, Point};
use crate::freeboundary::{
    bv_norm, energy_e_eps, extract_free_boundary, growth_exponent_fit, hausdorff_box_count, nondegeneracy_check,
    o_delta_measure, perimeter_of_positivity, porosity_estimate, w22_quotient_energy, FreeBoundaryReport,
    FreeBoundarySet, PerimeterReport, Region,
};
use crate::operator::{divergence_of_flux, verify_structural, StructuralConstants, StructuralReport, VerifyOptions};
use crate::solver::{
    complementarity_report, solve, solve_penalized_path, ComplementarityReport, Diagnostics, Method, Solution,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Most points used when growth or nondegeneracy points default to the free boundary.
const MAX_AUTO_POINTS: usize = 8;

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisFailure {
    pub analysis: String,
    pub message: String,
}

/// Solve diagnostics plus the resolved configuration, written as `diagnostics.json`.
#[derive(Debug, Clone, Serialize)]
pub struct SolveRecord {
    pub version: &'static str,
    pub config: RunConfig,
    pub level: usize,
    pub h: f64,
    /// Absent for fixtures and loaded solutions.
    pub diagnostics: Option<Diagnostics>,
    /// `‖u - u*‖_∞` when the problem has a closed-form solution.
    pub u_error_inf: Option<f64>,
}

/// Everything `analyze` measured on one level, written as `report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    #[serde(flatten)]
    pub solve: SolveRecord,
    pub boundary_cells: usize,
    pub free_boundary: FreeBoundaryReport,
    pub complementarity: Option<ComplementarityReport>,
    pub structural: Option<StructuralReport>,
    pub errors: Vec<AnalysisFailure>,
    /// Per-analysis CSV tables, keyed by analysis name.
    #[serde(skip)]
    pub tables: Vec<(String, String)>,
}

/// A problem and its solution on one grid.
pub struct Level {
    pub index: usize,
    pub problem: Problem,
    pub solution: Solution,
    pub record: SolveRecord,
}

impl Level {
    pub fn grid(&self) -> &Grid {
        self.solution.grid()
    }
}

/// Builds level `index` and obtains its solution: the fixture, a loaded CSV when
/// `load` is set and the config names one, or a fresh solve.
pub fn prepare(cfg: &RunConfig, index: usize, base: &Path, load: bool) -> Result<Level> {
    let grid = cfg.grid_at(index)?;
    let problem = cfg.problem(grid, base)?;
    let tol = cfg.solve.tol_u_zero();
    let (solution, diagnostics) = if let Some(chi) = &problem.fixture {
        (Solution::from_field(chi.clone(), tol), None)
    } else if let (true, Some(path)) = (load, &cfg.solution) {
        let full = if path.is_absolute() { path.clone() } else { base.join(path) };
        let u = crate::fields::read_field_csv(&full)?;
        if u.grid() != &grid {
            return Err(Error::Config(format!(
                "solution: {} does not match the level-{index} grid",
                full.display()
            )));
        }
        (Solution::from_field(u, tol), None)
    } else {
        let s = solve(&problem.spec, &problem.f, &problem.g, &cfg.solve)?;
        let d = s.diagnostics();
        (s, Some(d))
    };
    let u_error_inf = match &problem.oracle {
        Some(o) => Some(solution.u.max_abs_diff(&o.sample(grid)?)?),
        None => None,
    };
    let record = SolveRecord {
        version: VERSION,
        config: cfg.resolved()?,
        level: index,
        h: grid.h_mean(),
        diagnostics,
        u_error_inf,
    };
    Ok(Level {
        index,
        problem,
        solution,
        record,
    })
}

fn box_center(grid: &Grid) -> Point {
    let mut c = [0.0; 2];
    for a in 0..grid.dim() {
        c[a] = 0.5 * (grid.lo(a) + grid.hi(a));
    }
    c
}

fn box_radius(grid: &Grid) -> f64 {
    0.5 * (0..grid.dim())
        .map(|a| (grid.hi(a) - grid.lo(a)).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn default_radii(h: f64, r_min_cells: f64, r_max: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut r = r_min_cells * h;
    while r <= r_max * (1.0 + 1e-12) {
        out.push(r);
        r *= 1.5;
    }
    out
}

fn resolve_points(
    fb: &FreeBoundarySet,
    points: &Option<Vec<Vec<f64>>>,
    snap: bool,
    what: &str,
) -> Result<Vec<Point>> {
    let dim = fb.grid().dim();
    match points {
        None => {
            let all = fb.points();
            if all.is_empty() {
                return Err(Error::Analysis(format!("{what}: free boundary is empty")));
            }
            let step = all.len().div_ceil(MAX_AUTO_POINTS);
            Ok(all.into_iter().step_by(step).collect())
        }
        Some(list) => list
            .iter()
            .map(|v| {
                let x = to_point(v, dim, &format!("{what}.points"))?;
                if !snap {
                    return Ok(x);
                }
                fb.nearest_point(x)
                    .ok_or_else(|| Error::Analysis(format!("{what}: free boundary is empty")))
            })
            .collect(),
    }
}

fn optional_point(v: &Option<Vec<f64>>, grid: &Grid, what: &str) -> Result<Point> {
    match v {
        Some(v) => to_point(v, grid.dim(), what),
        None => Ok(box_center(grid)),
    }
}

fn require_solved(level: &Level, what: &str) -> Result<()> {
    if level.problem.fixture.is_some() {
        return Err(Error::Analysis(format!("{what}: needs a solved problem, not a fixture")));
    }
    Ok(())
}

struct Extras {
    complementarity: Option<ComplementarityReport>,
    structural: Option<StructuralReport>,
}

fn run_one(
    a: &AnalysisDoc,
    cfg: &RunConfig,
    level: &Level,
    fb: &FreeBoundarySet,
    out: &mut FreeBoundaryReport,
    extras: &mut Extras,
) -> Result<()> {
    let grid = *level.grid();
    let h = grid.h_mean();
    let sol = &level.solution;
    let u = &sol.u;
    let spec = &level.problem.spec;
    let tol = sol.tol_u_zero;
    match a {
        AnalysisDoc::Growth {
            points,
            snap,
            radii,
            r_min_cells,
            r_max,
        } => {
            let pts = resolve_points(fb, points, *snap, "growth")?;
            let radii = radii.clone().unwrap_or_else(|| default_radii(h, *r_min_cells, *r_max));
            let mut failures = Vec::new();
            for x in pts {
                match growth_exponent_fit(u, x, &radii) {
                    Ok(fit) => out.growth_fits.push(fit),
                    Err(Error::Analysis(m)) => failures.push(m),
                    Err(e) => failures.push(e.to_string()),
                }
            }
            if out.growth_fits.is_empty() {
                return Err(Error::Analysis(failures.join("; ")));
            }
        }
        AnalysisDoc::Nondegeneracy {
            points,
            snap,
            radii,
            r_min_cells,
            r_max,
        } => {
            require_solved(level, "nondegeneracy")?;
            let pts = resolve_points(fb, points, *snap, "nondegeneracy")?;
            let radii = radii.clone().unwrap_or_else(|| default_radii(h, *r_min_cells, *r_max));
            if radii.is_empty() {
                return Err(Error::Analysis(format!(
                    "nondegeneracy: no radius between {r_min_cells}h and {r_max}"
                )));
            }
            out.nondegeneracy = Some(nondegeneracy_check(u, spec, &level.problem.f, &pts, &radii)?);
        }
        AnalysisDoc::Porosity { radii } => {
            out.porosity = Some(porosity_estimate(fb, radii)?);
        }
        AnalysisDoc::ODelta { point, snap, r, deltas } => {
            let pts = resolve_points(fb, &point.as_ref().map(|p| vec![p.clone()]), *snap, "o_delta")?;
            out.o_delta_slopes.push(o_delta_measure(u, spec, pts[0], *r, deltas, tol)?);
        }
        AnalysisDoc::EEps { center, r } => {
            require_solved(level, "e_eps")?;
            let c = optional_point(center, &grid, "e_eps.center")?;
            let mut pcfg = cfg.solve.clone();
            pcfg.method = Method::Penalized;
            let constants = StructuralConstants::for_model(spec);
            let path = solve_penalized_path(spec, &constants, &level.problem.f, &level.problem.g, &pcfg)?;
            for s in &path {
                let eps = s.eps_final.expect("penalized solutions record eps");
                out.e_eps.push((eps, energy_e_eps(&s.u, spec, c, *r, eps)?));
            }
        }
        AnalysisDoc::Hausdorff { center, r } => {
            let c = optional_point(center, &grid, "hausdorff.center")?;
            let r = r.unwrap_or_else(|| box_radius(&grid));
            out.hausdorff = Some(hausdorff_box_count(fb, c, r));
        }
        AnalysisDoc::W22 {
            center,
            radius,
            multiples,
        } => {
            let c = optional_point(center, &grid, "w22.center")?;
            let taus: Vec<f64> = multiples.iter().map(|&m| m as f64 * h).collect();
            out.w22_energy = w22_quotient_energy(u, spec, c, *radius, &taus)?;
        }
        AnalysisDoc::Bv { region, of } => {
            let region: Option<Region> = match region {
                Some([lo, hi]) => Some((
                    to_point(lo, grid.dim(), "bv.region")?,
                    to_point(hi, grid.dim(), "bv.region")?,
                )),
                None => None,
            };
            let target = of.unwrap_or(if level.problem.fixture.is_some() {
                BvTarget::Solution
            } else {
                BvTarget::Operator
            });
            let bv = match target {
                BvTarget::Solution => bv_norm(u, region.as_ref()),
                BvTarget::Operator => bv_norm(&divergence_of_flux(spec, u, None)?, region.as_ref()),
            };
            let inside = |x: Point| match &region {
                None => true,
                Some((lo, hi)) => (0..grid.dim()).all(|a| x[a] >= lo[a] && x[a] <= hi[a]),
            };
            let count = fb
                .boundary_cells
                .iter()
                .filter(|&&c| inside(grid.cell_center(c)))
                .count();
            let box_estimate = if grid.dim() == 1 { count as f64 } else { count as f64 * h };
            out.perimeter = Some(PerimeterReport {
                bv_norm: bv,
                perimeter: perimeter_of_positivity(u, tol, region.as_ref()),
                box_count_sum: count,
                box_estimate,
                level: tol,
            });
        }
        AnalysisDoc::Complementarity => {
            require_solved(level, "complementarity")?;
            let rep = complementarity_report(spec, sol, &level.problem.f)?;
            out.complementarity = Some(rep.r2);
            extras.complementarity = Some(rep);
        }
        AnalysisDoc::Structural { samples } => {
            let constants = StructuralConstants::for_model(spec);
            let opts = VerifyOptions {
                samples: *samples,
                seed: cfg.seed,
                ..Default::default()
            };
            extras.structural = Some(verify_structural(spec, &constants, &opts)?);
        }
    }
    Ok(())
}

fn merge(into: &mut FreeBoundaryReport, part: FreeBoundaryReport) {
    into.growth_fits.extend(part.growth_fits);
    into.o_delta_slopes.extend(part.o_delta_slopes);
    into.e_eps.extend(part.e_eps);
    into.w22_energy.extend(part.w22_energy);
    into.nondegeneracy = part.nondegeneracy.or(into.nondegeneracy.take());
    into.porosity = part.porosity.or(into.porosity.take());
    into.hausdorff = part.hausdorff.or(into.hausdorff.take());
    into.perimeter = part.perimeter.or(into.perimeter.take());
    into.complementarity = part.complementarity.or(into.complementarity.take());
}

/// Runs every configured analysis; failures are recorded without aborting the rest.
pub fn analyze(cfg: &RunConfig, level: &Level) -> RunReport {
    let fb = extract_free_boundary(&level.solution);
    let mut total = FreeBoundaryReport::default();
    let mut extras = Extras {
        complementarity: None,
        structural: None,
    };
    let mut errors = Vec::new();
    let mut tables = Vec::new();
    for a in &cfg.analyses {
        let mut part = FreeBoundaryReport::default();
        match run_one(a, cfg, level, &fb, &mut part, &mut extras) {
            Ok(()) => {
                tables.push((a.name().to_string(), part.table()));
                merge(&mut total, part);
            }
            Err(e) => errors.push(AnalysisFailure {
                analysis: a.name().into(),
                message: e.to_string(),
            }),
        }
    }
    RunReport {
        solve: level.record.clone(),
        boundary_cells: fb.boundary_cells.len(),
        free_boundary: total,
        complementarity: extras.complementarity,
        structural: extras.structural,
        errors,
        tables,
    }
}

impl RunReport {
    /// True when analyses were requested and none succeeded.
    pub fn all_failed(&self) -> bool {
        !self.solve.config.analyses.is_empty() && self.errors.len() == self.solve.config.analyses.len()
    }

    /// Scalar summaries tracked across refinement levels, in a fixed order.
    pub fn quantities(&self) -> Vec<(String, f64)> {
        let mut q = Vec::new();
        if let Some(e) = self.solve.u_error_inf {
            q.push(("u_error_inf".to_string(), e));
        }
        if let Some(d) = &self.solve.diagnostics {
            q.push(("final_residual".into(), d.final_residual));
        }
        q.push(("boundary_cells".into(), self.boundary_cells as f64));
        let fbr = &self.free_boundary;
        for (k, g) in fbr.growth_fits.iter().enumerate() {
            q.push((format!("growth_exponent[{k}]"), g.exponent));
        }
        if let Some(n) = &fbr.nondegeneracy {
            q.push(("nondegeneracy_infimum".into(), n.infimum));
        }
        if let Some(p) = &fbr.porosity {
            q.push(("porosity_delta_hat".into(), p.delta_hat));
        }
        for (k, o) in fbr.o_delta_slopes.iter().enumerate() {
            q.push((format!("o_delta_slope[{k}]"), o.slope));
            q.push((format!("o_delta_intercept[{k}]"), o.intercept));
        }
        for (eps, e) in &fbr.e_eps {
            q.push((format!("e_eps[eps={eps:e}]"), *e));
        }
        if let Some(b) = &fbr.hausdorff {
            q.push(("box_estimate".into(), b.estimate));
            q.push(("box_estimate_isotropic".into(), b.isotropic_estimate));
        }
        if let Some(p) = &fbr.perimeter {
            q.push(("bv_norm".into(), p.bv_norm));
            q.push(("perimeter".into(), p.perimeter));
        }
        let h = self.solve.h;
        for (tau, e) in &fbr.w22_energy {
            q.push((format!("w22[tau={}h]", (tau / h).round()), *e));
        }
        if let Some(r2) = fbr.complementarity {
            q.push(("complementarity_r2".into(), r2));
        }
        q
    }
}

const ROUNDOFF: f64 = 1e-12;

/// Quantities expected to vanish under refinement, for which an order is reported.
pub fn has_order(quantity: &str) -> bool {
    matches!(quantity, "u_error_inf" | "complementarity_r2")
}

/// `convergence.csv` rows from per-level reports.
pub fn convergence_table(reports: &[RunReport]) -> String {
    let mut out = String::from("level,h,quantity,value,observed_order\n");
    let per_level: Vec<Vec<(String, f64)>> = reports.iter().map(|r| r.quantities()).collect();
    for (k, r) in reports.iter().enumerate() {
        for (name, v) in &per_level[k] {
            let mut order = String::new();
            if k > 0 && has_order(name) {
                let prev = per_level[k - 1].iter().find(|(n, _)| n == name).map(|x| x.1);
                if let Some(pv) = prev {
                    let ratio = reports[k - 1].solve.h / r.solve.h;
                    // differences at round-off level carry no rate
                    if pv > ROUNDOFF && *v > ROUNDOFF && ratio > 1.0 {
                        order = format!("{:?}", (pv / v).ln() / ratio.ln());
                    }
                }
            }
            out.push_str(&format!("{},{:?},{},{:?},{}\n", r.solve.level, r.solve.h, name, v, order));
        }
    }
    out
}
