use super::{SolveConfig, Stats};
use crate::error::{Error, Result};
use crate::fields::Grid;
use crate::operator::Stencil;

const MAX_ROOT_ITERS: usize = 200;

/// Root of an increasing scalar map by safeguarded Newton with a bisection fallback.
///
/// With `floor = Some(a)` the result is projected onto `[a, ∞)`: if `φ(a) ≥ 0` then `a` is returned.
pub(crate) fn monotone_root(
    mut phi: impl FnMut(f64) -> (f64, f64),
    t0: f64,
    floor: Option<f64>,
) -> f64 {
    let t0 = floor.map_or(t0, |a| t0.max(a));
    let (v0, d0) = phi(t0);
    if v0 == 0.0 || !v0.is_finite() {
        return t0;
    }
    let mut step = if d0 > 0.0 && d0.is_finite() {
        v0.abs() / d0
    } else {
        1e-3 * (1.0 + t0.abs())
    };
    step = step.max(1e-14 * (1.0 + t0.abs()));
    let (mut a, mut b);
    if v0 < 0.0 {
        a = t0;
        b = t0 + step;
        let mut k = 0;
        while phi(b).0 < 0.0 {
            a = b;
            step *= 2.0;
            b = t0 + step;
            k += 1;
            if k > 200 {
                return b;
            }
        }
    } else {
        b = t0;
        if let Some(fl) = floor {
            if phi(fl).0 >= 0.0 {
                return fl;
            }
        }
        a = t0 - step;
        if let Some(fl) = floor {
            a = a.max(fl);
        }
        let mut k = 0;
        while phi(a).0 > 0.0 {
            b = a;
            step *= 2.0;
            a = t0 - step;
            if let Some(fl) = floor {
                a = a.max(fl);
            }
            k += 1;
            if k > 200 {
                return a;
            }
        }
    }
    // a: φ ≤ 0, b: φ ≥ 0
    let mut t = if v0 < 0.0 { a } else { b };
    for _ in 0..MAX_ROOT_ITERS {
        let (v, d) = phi(t);
        if v == 0.0 {
            return t;
        }
        if v < 0.0 {
            a = t;
        } else {
            b = t;
        }
        let mut tn = if d > 0.0 { t - v / d } else { f64::NAN };
        if !(tn > a && tn < b) {
            tn = 0.5 * (a + b);
        }
        let done = (tn - t).abs() <= 4.0 * f64::EPSILON * t.abs().max(f64::MIN_POSITIVE)
            || (b - a) <= 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        t = tn;
        if done {
            break;
        }
    }
    t
}

/// `‖min(u, f - Au)‖_∞` over interior nodes.
pub(crate) fn natural_residual(grid: &Grid, u: &[f64], f: &[f64], au: &[f64]) -> f64 {
    let mut r: f64 = 0.0;
    for n in grid.interior_nodes() {
        let g = f[n] - au[n];
        let v = u[n].min(g).abs();
        if v.is_nan() {
            return f64::NAN;
        }
        r = r.max(v);
    }
    r
}

/// Interior nodes in red-black order.
pub(crate) fn red_black(grid: &Grid) -> Vec<usize> {
    let mut order: Vec<usize> = Vec::with_capacity(grid.node_count());
    for colour in 0..2 {
        order.extend(grid.interior_nodes().filter(|&n| {
            let (i, j) = grid.node_ij(n);
            (i + j) % 2 == colour
        }));
    }
    order
}

/// One projected nonlinear Gauss-Seidel sweep with over-relaxation `omega`.
pub(crate) fn sweep(st: &Stencil, f: &[f64], u: &mut [f64], order: &[usize], omega: f64) {
    for &n in order {
        let fi = f[n];
        let t = monotone_root(
            |t| {
                let (au, d) = st.node_eval(u, n, t);
                (fi - au, d)
            },
            u[n],
            Some(0.0),
        );
        u[n] = (u[n] + omega * (t - u[n])).max(0.0);
    }
}

pub(crate) fn relax_until_converged(
    st: &Stencil,
    f: &[f64],
    u: &mut [f64],
    cfg: &SolveConfig,
    stats: &mut Stats,
) -> Result<()> {
    let grid = *st.grid();
    let order = red_black(&grid);
    let mut au = vec![0.0; u.len()];
    loop {
        st.apply(u, &mut au);
        let res = natural_residual(&grid, u, f, &au);
        stats.history.push(res);
        if res <= cfg.tol_residual {
            return Ok(());
        }
        if !res.is_finite() || stats.iterations() >= cfg.max_iters {
            return Err(Error::NonConvergence {
                iterations: stats.iterations(),
                last_residual: res,
                residual_history: stats.history.clone(),
            });
        }
        sweep(st, f, u, &order, cfg.relaxation_omega);
        stats.sweeps += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn root_of_cubic() {
        let t = monotone_root(|t| (t * t * t - 8.0, 3.0 * t * t), 0.1, None);
        assert!((t - 2.0).abs() < 1e-14);
        let t = monotone_root(|t| (t * t * t - 8.0, 3.0 * t * t), 100.0, None);
        assert!((t - 2.0).abs() < 1e-14);
    }

    #[test]
    fn projection_onto_floor() {
        let t = monotone_root(|t| (t + 1.0, 1.0), 3.0, Some(0.0));
        assert_eq!(t, 0.0);
        let t = monotone_root(|t| (t - 1.0, 1.0), 3.0, Some(0.0));
        assert!((t - 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_smooth_root() {
        // derivative blows up at the root
        let phi = |t: f64| {
            let s = t - 0.3;
            (s.signum() * s.abs().sqrt(), 0.5 / s.abs().sqrt().max(1e-300))
        };
        let t = monotone_root(phi, 0.9, Some(0.0));
        assert!((t - 0.3).abs() < 1e-12);
    }
}
