//! Projected Newton stage for the variational inequality and the sparse
//! linear algebra shared with the penalized solver.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use faer::Side;

use super::relaxation::natural_residual;
use super::{SolveConfig, Stats};
use crate::fields::Grid;
use crate::operator::Stencil;

const MAX_NEWTON_STEPS: usize = 60;
const ARMIJO_SIGMA: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;
/// Upper bound on the active-set threshold.
const ACTIVE_EPS_MAX: f64 = 1e-2;

const NONE: usize = usize::MAX;

/// Gradient `∂J/∂u` of `J = E/|cell| + Σ f·u` and the assembled Hessian, 9-point
/// (3-point in 1D) per node.
pub(super) struct Linearization {
    pub grad: Vec<f64>,
    pub coef: Vec<[f64; 9]>,
}

#[inline]
fn slot(grid: &Grid, from: usize, to: usize) -> usize {
    let (i0, j0) = grid.node_ij(from);
    let (i1, j1) = grid.node_ij(to);
    let di = (i1 as isize - i0 as isize + 1) as usize;
    let dj = (j1 as isize - j0 as isize + 1) as usize;
    di + 3 * dj
}

#[inline]
fn neighbour(grid: &Grid, n: usize, s: usize) -> Option<usize> {
    let (i, j) = grid.node_ij(n);
    let (di, dj) = (s % 3, s / 3);
    let i = (i + di).checked_sub(1)?;
    let j = (j + dj).checked_sub(1)?;
    if i > grid.n_cells(0) {
        return None;
    }
    if grid.dim() == 1 {
        return (j == 0).then_some(i);
    }
    if j > grid.n_cells(1) {
        return None;
    }
    Some(grid.node_index(i, j))
}

pub(super) fn linearize(st: &Stencil, u: &[f64], f: &[f64]) -> Linearization {
    let grid = *st.grid();
    let k = grid.nodes_per_cell();
    let cells = st.cell_hessians(u);
    let mut grad = vec![0.0; u.len()];
    let mut coef = vec![[0.0; 9]; u.len()];
    for (c, (g, h)) in cells.iter().enumerate() {
        let nodes = grid.cell_nodes(c);
        for a in 0..k {
            grad[nodes[a]] += g[a];
            for b in 0..k {
                coef[nodes[a]][slot(&grid, nodes[a], nodes[b])] += h[a][b];
            }
        }
    }
    for n in 0..u.len() {
        if grid.is_boundary_node(n) {
            grad[n] = 0.0;
        } else {
            grad[n] += f[n];
        }
    }
    Linearization { grad, coef }
}

/// Solves `(H_FF + diag(extra)) x = rhs` on the free nodes, shifting the diagonal
/// when the factorization fails.
pub(super) fn solve_free(
    grid: &Grid,
    coef: &[[f64; 9]],
    extra: Option<&[f64]>,
    free: &[usize],
    rhs: &[f64],
) -> Option<Vec<f64>> {
    let nf = free.len();
    if nf == 0 {
        return Some(Vec::new());
    }
    let mut index = vec![NONE; coef.len()];
    for (k, &n) in free.iter().enumerate() {
        index[n] = k;
    }
    let mut base: Vec<Triplet<usize, usize, f64>> = Vec::with_capacity(nf * 9);
    let mut dmax: f64 = 0.0;
    let mut diag = Vec::with_capacity(nf);
    for (k, &n) in free.iter().enumerate() {
        let mut d = 0.0;
        for s in 0..9 {
            let v = coef[n][s];
            if v == 0.0 && s != 4 {
                continue;
            }
            if s == 4 {
                d = v + extra.map_or(0.0, |e| e[n]);
                continue;
            }
            if let Some(m) = neighbour(grid, n, s) {
                let col = index[m];
                if col != NONE {
                    base.push(Triplet::new(k, col, v));
                }
            }
        }
        dmax = dmax.max(d.abs());
        diag.push(d);
    }
    let dmax = if dmax > 0.0 { dmax } else { 1.0 };
    let mut shift = 0.0;
    for _ in 0..12 {
        let mut t = base.clone();
        t.extend(diag.iter().enumerate().map(|(k, &d)| Triplet::new(k, k, d + shift)));
        let Ok(mat) = SparseColMat::<usize, f64>::try_new_from_triplets(nf, nf, &t) else {
            return None;
        };
        if let Ok(llt) = mat.sp_cholesky(Side::Lower) {
            let mut b = Col::<f64>::from_fn(nf, |k| rhs[k]);
            llt.solve_in_place(b.as_mat_mut());
            let x: Vec<f64> = (0..nf).map(|k| b[k]).collect();
            if x.iter().all(|v| v.is_finite()) {
                return Some(x);
            }
        }
        shift = if shift == 0.0 { 1e-12 * dmax } else { shift * 100.0 };
    }
    None
}

/// `J(u) = E(u)/|cell| + Σ_interior f·u`.
fn merit(st: &Stencil, u: &[f64], f: &[f64]) -> f64 {
    let grid = st.grid();
    let lin: f64 = grid.interior_nodes().map(|n| f[n] * u[n]).sum();
    st.energy(u) / grid.cell_volume() + lin
}

/// Bertsekas-style projected Newton on `min J(u)` subject to `u ≥ 0`.
///
/// Stops at the residual tolerance, after a failed line search or after a fixed
/// step budget; the caller finishes with relaxation sweeps.
pub(super) fn projected_newton(
    st: &Stencil,
    f: &[f64],
    u: &mut [f64],
    cfg: &SolveConfig,
    stats: &mut Stats,
) {
    let grid = *st.grid();
    let mut au = vec![0.0; u.len()];
    st.apply(u, &mut au);
    let mut res = natural_residual(&grid, u, f, &au);
    let mut j0 = merit(st, u, f);
    let interior: Vec<usize> = grid.interior_nodes().collect();
    let budget = MAX_NEWTON_STEPS.min(cfg.max_iters / 2);
    for _ in 0..budget {
        if !(res > cfg.tol_residual) || !j0.is_finite() {
            return;
        }
        stats.history.push(res);
        let lin = linearize(st, u, f);
        let dscale = |n: usize| {
            let d = lin.coef[n][4];
            if d > 0.0 {
                d
            } else {
                1.0
            }
        };
        let eps_k = interior
            .iter()
            .map(|&n| (u[n] - (u[n] - lin.grad[n] / dscale(n)).max(0.0)).abs())
            .fold(0.0, f64::max)
            .min(ACTIVE_EPS_MAX);
        let mut active = vec![false; u.len()];
        let mut free = Vec::with_capacity(interior.len());
        for &n in &interior {
            if u[n] <= eps_k && lin.grad[n] > 0.0 {
                active[n] = true;
            } else {
                free.push(n);
            }
        }
        let rhs: Vec<f64> = free.iter().map(|&n| -lin.grad[n]).collect();
        let Some(x) = solve_free(&grid, &lin.coef, None, &free, &rhs) else {
            return;
        };
        let mut d = vec![0.0; u.len()];
        for (k, &n) in free.iter().enumerate() {
            d[n] = x[k];
        }
        for &n in &interior {
            if active[n] {
                d[n] = -lin.grad[n] / dscale(n);
            }
        }
        let free_slope: f64 = free.iter().map(|&n| lin.grad[n] * d[n]).sum();
        if !(free_slope <= 0.0) {
            return;
        }
        let mut alpha = 1.0;
        let mut trial = u.to_vec();
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            for &n in &interior {
                trial[n] = (u[n] + alpha * d[n]).max(0.0);
            }
            let j1 = merit(st, &trial, f);
            let pred: f64 = -alpha * free_slope
                + interior
                    .iter()
                    .filter(|&&n| active[n])
                    .map(|&n| lin.grad[n] * (u[n] - trial[n]))
                    .sum::<f64>();
            let armijo = j1.is_finite() && j0 - j1 >= ARMIJO_SIGMA * pred;
            let mut take = armijo;
            let mut r1 = f64::NAN;
            if !take && alpha == 1.0 && j1.is_finite() {
                st.apply(&trial, &mut au);
                r1 = natural_residual(&grid, &trial, f, &au);
                take = r1 < res;
            }
            if take {
                u.copy_from_slice(&trial);
                j0 = j1;
                if r1.is_nan() {
                    st.apply(u, &mut au);
                    r1 = natural_residual(&grid, u, f, &au);
                }
                res = r1;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        stats.newton_steps += 1;
        if !accepted {
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::OperatorSpec;

    #[test]
    fn sparse_solve_matches_dense_laplacian() {
        // 1D Dirichlet Laplacian on 4 interior nodes
        let grid = Grid::unit(1, 5).unwrap();
        let spec = OperatorSpec::laplacian(grid).unwrap();
        let st = Stencil::new(&spec, None);
        let u = vec![0.0; 6];
        let f = vec![0.0; 6];
        let lin = linearize(&st, &u, &f);
        let free: Vec<usize> = grid.interior_nodes().collect();
        let rhs = vec![1.0; 4];
        let x = solve_free(&grid, &lin.coef, None, &free, &rhs).unwrap();
        // (1/h²)·tridiag(-1, 2, -1) x = 1 with h = 1/5: x_i = h² i(5-i)/2
        let h2 = 1.0 / 25.0;
        for (k, v) in x.iter().enumerate() {
            let i = (k + 1) as f64;
            assert!((v - h2 * i * (5.0 - i) / 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn linearization_gradient_is_f_minus_au() {
        let grid = Grid::unit(2, 6).unwrap();
        let spec = OperatorSpec::p_laplacian(grid, 2.7, 0.1).unwrap();
        let st = Stencil::new(&spec, None);
        let u: Vec<f64> = (0..grid.node_count()).map(|n| (n as f64 * 0.37).sin()).collect();
        let f = vec![0.3; u.len()];
        let lin = linearize(&st, &u, &f);
        let mut au = vec![0.0; u.len()];
        st.apply(&u, &mut au);
        for n in grid.interior_nodes() {
            assert!((lin.grad[n] - (f[n] - au[n])).abs() < 1e-10 * (1.0 + au[n].abs()));
        }
    }

    #[test]
    fn assembled_hessian_is_symmetric() {
        let grid = Grid::unit(2, 5).unwrap();
        let spec = OperatorSpec::p_laplacian(grid, 1.6, 0.0).unwrap();
        let st = Stencil::new(&spec, None);
        let u: Vec<f64> = (0..grid.node_count()).map(|n| (n as f64 * 0.7).cos()).collect();
        let lin = linearize(&st, &u, &vec![0.0; u.len()]);
        for n in 0..u.len() {
            for s in 0..9 {
                if let Some(m) = neighbour(&grid, n, s) {
                    let back = lin.coef[m][8 - s];
                    assert!((lin.coef[n][s] - back).abs() < 1e-9 * (1.0 + back.abs()));
                }
            }
        }
    }
}
