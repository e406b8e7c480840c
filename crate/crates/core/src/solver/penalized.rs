use super::newton::{linearize, solve_free};
use super::relaxation::{monotone_root, red_black};
use super::{SolveConfig, Stats};
use crate::error::{Error, Result};
use crate::operator::{Penalty, Stencil};

const MAX_NEWTON_STEPS: usize = 100;
const ARMIJO_SIGMA: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;
/// Gauss-Seidel sweeps between Newton attempts once Newton has stalled.
const GS_BLOCK: usize = 50;

/// `H_ε(v) = min(1, v⁺/ε)`.
pub fn heaviside_eps(v: f64, eps: f64) -> f64 {
    (v.max(0.0) / eps).min(1.0)
}

fn heaviside_slope(v: f64, eps: f64) -> f64 {
    if v > 0.0 && v < eps {
        1.0 / eps
    } else {
        0.0
    }
}

/// Primitive of `H_ε` vanishing on `v ≤ 0`.
fn heaviside_primitive(v: f64, eps: f64) -> f64 {
    if v <= 0.0 {
        0.0
    } else if v < eps {
        v * v / (2.0 * eps)
    } else {
        v - 0.5 * eps
    }
}

/// `‖f H_ε(u) - A_ε u‖_∞` over interior nodes.
fn residual(st: &Stencil, f: &[f64], u: &[f64], eps: f64, au: &mut [f64]) -> f64 {
    st.apply(u, au);
    let mut r: f64 = 0.0;
    for n in st.grid().interior_nodes() {
        let v = (f[n] * heaviside_eps(u[n], eps) - au[n]).abs();
        if v.is_nan() {
            return f64::NAN;
        }
        r = r.max(v);
    }
    r
}

fn merit(st: &Stencil, f: &[f64], u: &[f64], eps: f64) -> f64 {
    let grid = st.grid();
    let pen: f64 = grid
        .interior_nodes()
        .map(|n| f[n] * heaviside_primitive(u[n], eps))
        .sum();
    st.energy(u) / grid.cell_volume() + pen
}

fn gs_sweep(st: &Stencil, f: &[f64], u: &mut [f64], order: &[usize], eps: f64) {
    for &n in order {
        let fi = f[n];
        u[n] = monotone_root(
            |t| {
                let (au, d) = st.node_eval(u, n, t);
                (
                    fi * heaviside_eps(t, eps) - au,
                    fi * heaviside_slope(t, eps) + d,
                )
            },
            u[n],
            None,
        );
    }
}

/// Newton with an Armijo line search on the penalized energy, falling back to
/// nonlinear Gauss-Seidel when the line search fails.
fn newton_step(st: &Stencil, f: &[f64], u: &mut [f64], eps: f64, res: f64, au: &mut [f64]) -> Option<f64> {
    let grid = *st.grid();
    let zero = vec![0.0; u.len()];
    let mut lin = linearize(st, u, &zero);
    let mut extra = vec![0.0; u.len()];
    for n in grid.interior_nodes() {
        lin.grad[n] += f[n] * heaviside_eps(u[n], eps);
        extra[n] = (f[n] * heaviside_slope(u[n], eps)).max(0.0);
    }
    let free: Vec<usize> = grid.interior_nodes().collect();
    let rhs: Vec<f64> = free.iter().map(|&n| -lin.grad[n]).collect();
    let x = solve_free(&grid, &lin.coef, Some(&extra), &free, &rhs)?;
    let slope: f64 = free.iter().zip(&x).map(|(&n, d)| lin.grad[n] * d).sum();
    let j0 = merit(st, f, u, eps);
    let mut alpha = 1.0;
    let mut trial = u.to_vec();
    for _ in 0..MAX_BACKTRACKS {
        for (k, &n) in free.iter().enumerate() {
            trial[n] = u[n] + alpha * x[k];
        }
        let j1 = merit(st, f, &trial, eps);
        let armijo = slope < 0.0 && j1.is_finite() && j1 - j0 <= ARMIJO_SIGMA * alpha * slope;
        let take = armijo || {
            alpha == 1.0 && {
                let r1 = residual(st, f, &trial, eps, au);
                r1 < res
            }
        };
        if take {
            u.copy_from_slice(&trial);
            return Some(residual(st, f, u, eps, au));
        }
        alpha *= 0.5;
    }
    None
}

/// Solves `f H_ε(u) = A_ε u` in the interior for one `ε`, warm-started from `u`.
pub(super) fn solve_one(
    st: &mut Stencil,
    f: &[f64],
    u: &mut [f64],
    eps: f64,
    c0: f64,
    cfg: &SolveConfig,
    stats: &mut Stats,
) -> Result<()> {
    st.set_penalty(Some(Penalty::new(eps, c0)?));
    let st = &*st;
    let order = red_black(st.grid());
    let mut au = vec![0.0; u.len()];
    let mut res = residual(st, f, u, eps, &mut au);
    let mut newton_left = MAX_NEWTON_STEPS;
    loop {
        stats.history.push(res);
        if res <= cfg.tol_residual {
            return Ok(());
        }
        if !res.is_finite() {
            return Err(Error::Stagnation {
                eps,
                detail: "residual is not finite".into(),
            });
        }
        if stats.iterations() >= cfg.max_iters {
            return Err(Error::NonConvergence {
                iterations: stats.iterations(),
                last_residual: res,
                residual_history: stats.history.clone(),
            });
        }
        if newton_left > 0 {
            newton_left -= 1;
            stats.newton_steps += 1;
            if let Some(r) = newton_step(st, f, u, eps, res, &mut au) {
                res = r;
                continue;
            }
        }
        let before = res;
        for _ in 0..GS_BLOCK {
            gs_sweep(st, f, u, &order, eps);
            stats.sweeps += 1;
            if stats.iterations() >= cfg.max_iters {
                break;
            }
        }
        res = residual(st, f, u, eps, &mut au);
        if !(res < before) && newton_left == 0 {
            return Err(Error::Stagnation {
                eps,
                detail: format!("residual stuck at {res:.3e}"),
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heaviside_values() {
        assert_eq!(heaviside_eps(-1.0, 0.1), 0.0);
        assert_eq!(heaviside_eps(0.0, 0.1), 0.0);
        assert_eq!(heaviside_eps(0.05, 0.1), 0.5);
        assert_eq!(heaviside_eps(0.1, 0.1), 1.0);
        assert_eq!(heaviside_eps(3.0, 0.1), 1.0);
    }

    #[test]
    fn primitive_derivative_is_heaviside() {
        let eps = 0.1;
        for &v in &[-0.3, 0.01, 0.05, 0.09, 0.2, 1.0] {
            let d = 1e-7;
            let fd = (heaviside_primitive(v + d, eps) - heaviside_primitive(v - d, eps)) / (2.0 * d);
            assert!((fd - heaviside_eps(v, eps)).abs() < 1e-6);
        }
    }
}
