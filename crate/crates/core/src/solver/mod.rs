//! Discrete obstacle problem: find `u ≥ 0` with `u = g` on the boundary,
//! `Au = f` where `u > 0` and `Au ≤ f` everywhere.
//!
//! Two routes are provided: projected nonlinear relaxation on the variational
//! inequality (optionally preceded by a projected Newton stage and a coarse-grid
//! warm start), and Newton continuation on the penalized equation
//! `div a_ε(x, ∇u) = f H_ε(u)`.

mod newton;
mod penalized;
mod relaxation;
mod report;

pub use penalized::heaviside_eps;
pub use report::{complementarity_report, ComplementarityReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{ensure_same_grid, Grid, ScalarField};
use crate::operator::{OperatorSpec, Stencil, StructuralConstants};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ProjectedRelaxation,
    Penalized,
}

fn default_tol() -> f64 {
    1e-8
}
fn default_max_iters() -> usize {
    20_000
}
fn default_schedule() -> Vec<f64> {
    vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5]
}
fn default_omega() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default = "default_tol")]
    pub tol_residual: f64,
    /// Budget of relaxation sweeps plus Newton steps.
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_schedule")]
    pub eps_schedule: Vec<f64>,
    #[serde(default = "default_omega")]
    pub relaxation_omega: f64,
    /// Coincidence threshold; `10 · tol_residual` when absent.
    #[serde(default)]
    pub tol_u_zero: Option<f64>,
    /// Run a projected Newton stage before the relaxation sweeps.
    #[serde(default = "yes")]
    pub accelerate: bool,
    /// Warm-start from successively coarser grids.
    #[serde(default = "yes")]
    pub cascade: bool,
    /// Penalization constant `c0`; the model operator's value when absent.
    #[serde(default)]
    pub penalty_c0: Option<f64>,
}

fn default_method() -> Method {
    Method::ProjectedRelaxation
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            method: Method::ProjectedRelaxation,
            tol_residual: default_tol(),
            max_iters: default_max_iters(),
            eps_schedule: default_schedule(),
            relaxation_omega: default_omega(),
            tol_u_zero: None,
            accelerate: true,
            cascade: true,
            penalty_c0: None,
        }
    }
}

impl SolveConfig {
    pub fn penalized() -> Self {
        SolveConfig {
            method: Method::Penalized,
            ..Default::default()
        }
    }

    pub fn tol_u_zero(&self) -> f64 {
        self.tol_u_zero.unwrap_or(10.0 * self.tol_residual)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol_residual > 0.0) {
            return Err(Error::Config("solve.tol_residual must be > 0".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("solve.max_iters must be >= 1".into()));
        }
        if !(self.relaxation_omega > 0.0 && self.relaxation_omega < 2.0) {
            return Err(Error::Config("solve.relaxation_omega must lie in (0, 2)".into()));
        }
        if let Some(t) = self.tol_u_zero {
            if !(t >= 0.0) {
                return Err(Error::Config("solve.tol_u_zero must be >= 0".into()));
            }
        }
        if self.method == Method::Penalized && self.eps_schedule.is_empty() {
            return Err(Error::Config("solve.eps_schedule must be non-empty".into()));
        }
        for (k, e) in self.eps_schedule.iter().enumerate() {
            if !(*e > 0.0 && *e < 1.0) {
                return Err(Error::Config(format!("solve.eps_schedule[{k}] must lie in (0, 1)")));
            }
            if k > 0 && *e >= self.eps_schedule[k - 1] {
                return Err(Error::Config("solve.eps_schedule must be strictly decreasing".into()));
            }
        }
        if let Some(c) = self.penalty_c0 {
            if !(c > 0.0) {
                return Err(Error::Config("solve.penalty_c0 must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// A converged discrete solution with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub u: ScalarField,
    pub active_mask: Vec<bool>,
    pub residual_history: Vec<f64>,
    pub iterations: usize,
    pub eps_final: Option<f64>,
    pub tol_u_zero: f64,
    pub method: Method,
    pub newton_steps: usize,
    pub sweeps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub method: Method,
    pub iterations: usize,
    pub newton_steps: usize,
    pub sweeps: usize,
    pub final_residual: f64,
    pub residual_history: Vec<f64>,
    pub eps_final: Option<f64>,
    pub tol_u_zero: f64,
    pub coincidence_nodes: usize,
}

impl Solution {
    pub fn from_field(u: ScalarField, tol_u_zero: f64) -> Self {
        let active_mask = u.values().iter().map(|&v| v <= tol_u_zero).collect();
        Solution {
            u,
            active_mask,
            residual_history: Vec::new(),
            iterations: 0,
            eps_final: None,
            tol_u_zero,
            method: Method::ProjectedRelaxation,
            newton_steps: 0,
            sweeps: 0,
        }
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::NAN)
    }

    pub fn diagnostics(&self) -> Diagnostics {
        Diagnostics {
            method: self.method,
            iterations: self.iterations,
            newton_steps: self.newton_steps,
            sweeps: self.sweeps,
            final_residual: self.final_residual(),
            residual_history: self.residual_history.clone(),
            eps_final: self.eps_final,
            tol_u_zero: self.tol_u_zero,
            coincidence_nodes: self.active_mask.iter().filter(|&&a| a).count(),
        }
    }
}

pub(crate) struct Stats {
    pub history: Vec<f64>,
    pub newton_steps: usize,
    pub sweeps: usize,
}

impl Stats {
    fn new() -> Self {
        Stats {
            history: Vec::new(),
            newton_steps: 0,
            sweeps: 0,
        }
    }

    fn iterations(&self) -> usize {
        self.newton_steps + self.sweeps
    }
}

fn check_inputs(spec: &OperatorSpec, f: &ScalarField, g: &ScalarField) -> Result<()> {
    ensure_same_grid(spec.grid(), f.grid())?;
    ensure_same_grid(spec.grid(), g.grid())?;
    let grid = spec.grid();
    for n in 0..grid.node_count() {
        if grid.is_boundary_node(n) && g.get(n) < 0.0 {
            return Err(Error::Precondition(format!(
                "boundary data must be >= 0, got {} at node {n}",
                g.get(n)
            )));
        }
    }
    Ok(())
}

/// Boundary values from `g`, interior from `init` clamped at zero.
fn initial_state(grid: &Grid, init: &[f64], g: &ScalarField) -> Vec<f64> {
    (0..grid.node_count())
        .map(|n| {
            if grid.is_boundary_node(n) {
                g.get(n)
            } else {
                init[n].max(0.0)
            }
        })
        .collect()
}

fn finish(
    grid: Grid,
    u: Vec<f64>,
    stats: Stats,
    cfg: &SolveConfig,
    method: Method,
    eps_final: Option<f64>,
) -> Result<Solution> {
    let tol = cfg.tol_u_zero();
    let u = ScalarField::new(grid, u)?;
    let active_mask = u.values().iter().map(|&v| v <= tol).collect();
    Ok(Solution {
        u,
        active_mask,
        iterations: stats.iterations(),
        residual_history: stats.history,
        eps_final,
        tol_u_zero: tol,
        method,
        newton_steps: stats.newton_steps,
        sweeps: stats.sweeps,
    })
}

/// Smallest grid reached by the coarse-grid warm start.
const CASCADE_MIN_CELLS: usize = 16;

fn coarse_chain(grid: Grid) -> Vec<Grid> {
    let mut chain = vec![grid];
    while let Some(c) = chain.last().unwrap().coarsened() {
        if (0..c.dim()).any(|a| c.n_cells(a) < CASCADE_MIN_CELLS) {
            break;
        }
        chain.push(c);
    }
    chain.reverse();
    chain
}

/// Solves the variational inequality; dispatches on `cfg.method`.
pub fn solve(
    spec: &OperatorSpec,
    f: &ScalarField,
    g: &ScalarField,
    cfg: &SolveConfig,
) -> Result<Solution> {
    match cfg.method {
        Method::ProjectedRelaxation => solve_vi(spec, f, g, cfg),
        Method::Penalized => {
            let c = StructuralConstants::for_model(spec);
            solve_penalized(spec, &c, f, g, cfg)
        }
    }
}

/// Projected relaxation for the variational inequality, warm-started from coarser
/// grids when `cfg.cascade` is set.
pub fn solve_vi(
    spec: &OperatorSpec,
    f: &ScalarField,
    g: &ScalarField,
    cfg: &SolveConfig,
) -> Result<Solution> {
    cfg.validate()?;
    check_inputs(spec, f, g)?;
    let grid = *spec.grid();
    let chain = if cfg.cascade { coarse_chain(grid) } else { vec![grid] };
    let mut guess: Option<ScalarField> = None;
    let mut total = Stats::new();
    for (level, &lg) in chain.iter().enumerate() {
        let last = level + 1 == chain.len();
        let (ls, lf, lgd) = if last {
            (spec.clone(), f.clone(), g.clone())
        } else {
            (spec.resampled(lg)?, f.resample(lg), g.resample(lg))
        };
        let init = match &guess {
            Some(c) => c.resample(lg).into_values(),
            None => vec![0.0; lg.node_count()],
        };
        let mut u = initial_state(&lg, &init, &lgd);
        let mut stats = Stats::new();
        let outcome = run_vi(&ls, lf.values(), &mut u, cfg, &mut stats);
        total.newton_steps += stats.newton_steps;
        total.sweeps += stats.sweeps;
        if last {
            outcome?;
            total.history = stats.history;
        }
        // a coarse level that misses the tolerance is still a usable warm start
        guess = Some(ScalarField::new(lg, u)?);
    }
    let u = guess.expect("cascade has at least one level").into_values();
    finish(grid, u, total, cfg, Method::ProjectedRelaxation, None)
}

/// Projected relaxation from a caller-supplied initial guess (no cascade).
pub fn solve_vi_from(
    spec: &OperatorSpec,
    f: &ScalarField,
    g: &ScalarField,
    cfg: &SolveConfig,
    initial: &ScalarField,
) -> Result<Solution> {
    cfg.validate()?;
    check_inputs(spec, f, g)?;
    ensure_same_grid(spec.grid(), initial.grid())?;
    let grid = *spec.grid();
    let mut u = initial_state(&grid, initial.values(), g);
    let mut stats = Stats::new();
    run_vi(spec, f.values(), &mut u, cfg, &mut stats)?;
    finish(grid, u, stats, cfg, Method::ProjectedRelaxation, None)
}

fn run_vi(
    spec: &OperatorSpec,
    f: &[f64],
    u: &mut [f64],
    cfg: &SolveConfig,
    stats: &mut Stats,
) -> Result<()> {
    let st = Stencil::new(spec, None);
    if cfg.accelerate {
        newton::projected_newton(&st, f, u, cfg, stats);
    }
    relaxation::relax_until_converged(&st, f, u, cfg, stats)
}

/// Newton continuation on the penalized equation along `cfg.eps_schedule`.
pub fn solve_penalized(
    spec: &OperatorSpec,
    constants: &StructuralConstants,
    f: &ScalarField,
    g: &ScalarField,
    cfg: &SolveConfig,
) -> Result<Solution> {
    cfg.validate()?;
    if cfg.eps_schedule.is_empty() {
        return Err(Error::Config("solve.eps_schedule must be non-empty".into()));
    }
    check_inputs(spec, f, g)?;
    let grid = *spec.grid();
    let c0 = cfg.penalty_c0.unwrap_or(constants.c0);
    let mut u = initial_state(&grid, &vec![0.0; grid.node_count()], g);
    let mut stats = Stats::new();
    let mut st = Stencil::new(spec, None);
    for &eps in &cfg.eps_schedule {
        penalized::solve_one(&mut st, f.values(), &mut u, eps, c0, cfg, &mut stats)?;
    }
    let eps_final = cfg.eps_schedule.last().copied();
    finish(grid, u, stats, cfg, Method::Penalized, eps_final)
}

/// Penalized solutions at every `ε` of the schedule, warm-started in order.
pub fn solve_penalized_path(
    spec: &OperatorSpec,
    constants: &StructuralConstants,
    f: &ScalarField,
    g: &ScalarField,
    cfg: &SolveConfig,
) -> Result<Vec<Solution>> {
    cfg.validate()?;
    check_inputs(spec, f, g)?;
    let grid = *spec.grid();
    let c0 = cfg.penalty_c0.unwrap_or(constants.c0);
    let mut u = initial_state(&grid, &vec![0.0; grid.node_count()], g);
    let mut st = Stencil::new(spec, None);
    let mut out = Vec::new();
    for &eps in &cfg.eps_schedule {
        let mut stats = Stats::new();
        penalized::solve_one(&mut st, f.values(), &mut u, eps, c0, cfg, &mut stats)?;
        out.push(finish(grid, u.clone(), stats, cfg, Method::Penalized, Some(eps))?);
    }
    Ok(out)
}

/// `‖min(u, f - Au)‖_∞` over interior nodes.
pub fn natural_residual(spec: &OperatorSpec, u: &ScalarField, f: &ScalarField) -> Result<f64> {
    ensure_same_grid(spec.grid(), u.grid())?;
    ensure_same_grid(spec.grid(), f.grid())?;
    let st = Stencil::new(spec, None);
    let mut au = vec![0.0; u.values().len()];
    st.apply(u.values(), &mut au);
    Ok(relaxation::natural_residual(spec.grid(), u.values(), f.values(), &au))
}

#[cfg(test)]
mod tests;
