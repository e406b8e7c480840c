use serde::{Deserialize, Serialize};

use super::{cells_in_ball, fit_line, nodes_in_ball, snap};
use crate::error::{Error, Result};
use crate::fields::{Grid, Point, ScalarField};
use crate::operator::OperatorSpec;

/// Gradient at the cell center (mean of the corner gradients in 2D).
fn cell_gradient(grid: &Grid, v: &[f64], c: usize) -> Point {
    let n = grid.cell_nodes(c);
    if grid.dim() == 1 {
        return [(v[n[1]] - v[n[0]]) / grid.h(0), 0.0];
    }
    let gx = 0.5 * ((v[n[1]] - v[n[0]]) + (v[n[3]] - v[n[2]])) / grid.h(0);
    let gy = 0.5 * ((v[n[2]] - v[n[0]]) + (v[n[3]] - v[n[1]])) / grid.h(1);
    [gx, gy]
}

fn under_resolved(grid: &Grid, r: f64, what: &str) -> Result<()> {
    if r < 3.0 * grid.h_mean() * (1.0 - 1e-12) {
        return Err(Error::Analysis(format!("{what}: radius under-resolved ({r} < 3h)")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ODeltaReport {
    pub point: Point,
    pub r: f64,
    /// `(δ, |{|∇u| < δ^{1/(p-1)}} ∩ B_r ∩ {u > tol}|)`.
    pub measures: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
}

/// Measure of the small-gradient region near a free-boundary point and its
/// linear fit in `δ`. Requires a constant exponent.
pub fn o_delta_measure(
    u: &ScalarField,
    spec: &OperatorSpec,
    x0: Point,
    r: f64,
    deltas: &[f64],
    tol: f64,
) -> Result<ODeltaReport> {
    if !spec.p().is_constant() {
        return Err(Error::Analysis("o_delta: requires constant exponent".into()));
    }
    if deltas.len() < 2 {
        return Err(Error::Analysis("o_delta: need at least two values of delta".into()));
    }
    if let Some(d) = deltas.iter().find(|d| !(**d > 0.0 && **d < 1.0)) {
        return Err(Error::Analysis(format!("o_delta: delta = {d} outside (0, 1)")));
    }
    let grid = *u.grid();
    under_resolved(&grid, r, "o_delta")?;
    let p = spec.p().get(0);
    let y = snap(&grid, x0);
    let v = u.values();
    let k = grid.nodes_per_cell();
    let cells: Vec<(f64, bool)> = cells_in_ball(&grid, y, r)
        .into_iter()
        .map(|c| {
            let nodes = grid.cell_nodes(c);
            let mean = nodes[..k].iter().map(|&n| v[n]).sum::<f64>() / k as f64;
            let g = cell_gradient(&grid, v, c);
            (g[0].hypot(g[1]), mean > tol)
        })
        .collect();
    let vol = grid.cell_volume();
    let measures: Vec<(f64, f64)> = deltas
        .iter()
        .map(|&d| {
            let thr = d.powf(1.0 / (p - 1.0));
            let count = cells.iter().filter(|(g, pos)| *pos && *g < thr).count();
            (d, count as f64 * vol)
        })
        .collect();
    let xs: Vec<f64> = measures.iter().map(|m| m.0).collect();
    let ys: Vec<f64> = measures.iter().map(|m| m.1).collect();
    let (slope, intercept) = fit_line(&xs, &ys);
    Ok(ODeltaReport {
        point: y,
        r,
        measures,
        slope,
        intercept,
    })
}

/// Volume average over `B_r(center)` of `[(ε + |∇v|²)^{(p-2)/2} |D²v|]²`, with
/// central differences at interior nodes and the Frobenius norm of `D²v`.
pub fn energy_e_eps(u: &ScalarField, spec: &OperatorSpec, center: Point, r: f64, eps: f64) -> Result<f64> {
    let grid = *u.grid();
    under_resolved(&grid, r, "e_eps")?;
    if !(eps > 0.0) {
        return Err(Error::Analysis("e_eps: eps must be > 0".into()));
    }
    let v = u.values();
    let hx = grid.h(0);
    let mut total = 0.0;
    let mut count = 0usize;
    for n in nodes_in_ball(&grid, center, r) {
        if grid.is_boundary_node(n) {
            continue;
        }
        let (i, j) = grid.node_ij(n);
        let (grad2, hess2) = if grid.dim() == 1 {
            let (a, b, c) = (v[n - 1], v[n], v[n + 1]);
            let ux = (c - a) / (2.0 * hx);
            let uxx = (c - 2.0 * b + a) / (hx * hx);
            (ux * ux, uxx * uxx)
        } else {
            let hy = grid.h(1);
            let at = |di: isize, dj: isize| {
                v[grid.node_index((i as isize + di) as usize, (j as isize + dj) as usize)]
            };
            let ux = (at(1, 0) - at(-1, 0)) / (2.0 * hx);
            let uy = (at(0, 1) - at(0, -1)) / (2.0 * hy);
            let uxx = (at(1, 0) - 2.0 * at(0, 0) + at(-1, 0)) / (hx * hx);
            let uyy = (at(0, 1) - 2.0 * at(0, 0) + at(0, -1)) / (hy * hy);
            let uxy = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * hx * hy);
            (ux * ux + uy * uy, uxx * uxx + 2.0 * uxy * uxy + uyy * uyy)
        };
        let p = spec.p().get(n);
        let w = (eps + grad2).powf(0.5 * (p - 2.0));
        total += w * w * hess2;
        count += 1;
    }
    if count == 0 {
        return Err(Error::Analysis("e_eps: no interior nodes in the ball".into()));
    }
    Ok(total / count as f64)
}

/// Piecewise-linear radial cutoff: 1 on `B_R`, 0 outside `B_{2R}`.
fn cutoff(d: f64, radius: f64) -> f64 {
    if d <= radius {
        1.0
    } else if d < 2.0 * radius {
        (2.0 * radius - d) / radius
    } else {
        0.0
    }
}

/// `Σ_s ∫ ζ² |∇(Δ_{s,τ} u)|²` for each quotient step `τ`, with `ζ` the cutoff
/// around `center` of inner radius `radius`. Requires `κ > 0`.
pub fn w22_quotient_energy(
    u: &ScalarField,
    spec: &OperatorSpec,
    center: Point,
    radius: f64,
    taus: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if !(spec.kappa() > 0.0) {
        return Err(Error::Analysis("w22: requires kappa > 0".into()));
    }
    let grid = *u.grid();
    under_resolved(&grid, radius, "w22")?;
    let dim = grid.dim();
    let mut steps = Vec::with_capacity(taus.len());
    for &tau in taus {
        let m: Vec<usize> = (0..dim)
            .map(|a| {
                let k = tau / grid.h(a);
                if k < 0.5 || (k - k.round()).abs() > 1e-9 * k.max(1.0) {
                    Err(Error::Analysis(format!("w22: step {tau} is not a positive multiple of h")))
                } else {
                    Ok(k.round() as usize)
                }
            })
            .collect::<Result<_>>()?;
        steps.push(m);
    }
    let tmax = taus.iter().cloned().fold(0.0, f64::max);
    if grid.distance_to_box_boundary(center) < 2.0 * radius + tmax {
        return Err(Error::Analysis("w22: cutoff support plus step leaves the domain".into()));
    }
    let v = u.values();
    let nodes_along: Vec<usize> = (0..dim).map(|a| grid.n_cells(a)).collect();
    let cells = cells_in_ball(&grid, center, 2.0 * radius);
    let vol = grid.cell_volume();
    let mut out = Vec::with_capacity(taus.len());
    for (&tau, m) in taus.iter().zip(&steps) {
        let mut energy = 0.0;
        for s in 0..dim {
            let shift = |n: usize| -> Option<usize> {
                let (i, j) = grid.node_ij(n);
                if s == 0 {
                    (i + m[0] <= nodes_along[0]).then(|| if dim == 1 { i + m[0] } else { grid.node_index(i + m[0], j) })
                } else {
                    (j + m[1] <= nodes_along[1]).then(|| grid.node_index(i, j + m[1]))
                }
            };
            let q: Vec<f64> = (0..grid.node_count())
                .map(|n| shift(n).map_or(0.0, |t| (v[t] - v[n]) / tau))
                .collect();
            for &c in &cells {
                let z = cutoff(grid.distance(grid.cell_center(c), center), radius);
                if z == 0.0 {
                    continue;
                }
                let g = cell_gradient(&grid, &q, c);
                energy += z * z * (g[0] * g[0] + g[1] * g[1]) * vol;
            }
        }
        out.push((tau, energy));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn o_delta_needs_constant_p() {
        let g = Grid::unit(2, 16).unwrap();
        let p = crate::fields::ExponentField::affine(g, 1.5, [1.0, 0.0], 1.5, 3.0).unwrap();
        let s = OperatorSpec::new(p, ScalarField::constant(g, 1.0), 0.0, 1e-10).unwrap();
        let u = ScalarField::zeros(g);
        let e = o_delta_measure(&u, &s, [0.5, 0.5], 0.3, &[0.1, 0.2], 0.0).unwrap_err();
        assert!(e.to_string().contains("requires constant exponent"));
    }

    #[test]
    fn o_delta_steep_field_is_empty() {
        let g = Grid::unit(2, 32).unwrap();
        let s = OperatorSpec::p_laplacian(g, 2.0, 0.0).unwrap();
        let u = ScalarField::from_fn(g, |x| 2.0 * x[0] + 0.1).unwrap();
        let r = o_delta_measure(&u, &s, [0.5, 0.5], 0.3, &[0.1, 0.5, 0.9], 0.0).unwrap();
        assert!(r.measures.iter().all(|m| m.1 == 0.0));
    }

    #[test]
    fn o_delta_of_one_dimensional_quadratic() {
        let g = Grid::unit(1, 1000).unwrap();
        let s = OperatorSpec::laplacian(g).unwrap();
        let u = ScalarField::from_fn(g, |x| 0.5 * (0.3 - x[0]).max(0.0).powi(2)).unwrap();
        let r = o_delta_measure(&u, &s, [0.3, 0.0], 0.25, &[0.02, 0.05, 0.1, 0.15], 1e-12).unwrap();
        assert!((r.slope - 1.0).abs() < 0.02, "{r:?}");
        assert!(r.intercept.abs() < 2e-3);
    }

    #[test]
    fn e_eps_of_linear_and_quadratic() {
        let g = Grid::unit(1, 64).unwrap();
        let s = OperatorSpec::laplacian(g).unwrap();
        let lin = ScalarField::from_fn(g, |x| 3.0 * x[0] - 1.0).unwrap();
        assert!(energy_e_eps(&lin, &s, [0.5, 0.0], 0.5, 1e-3).unwrap().abs() < 1e-16);
        let quad = ScalarField::from_fn(g, |x| 0.5 * x[0] * x[0]).unwrap();
        for eps in [1e-1, 1e-5] {
            let e = energy_e_eps(&quad, &s, [0.5, 0.0], 0.5, eps).unwrap();
            assert!((e - 1.0).abs() < 1e-9, "{e}");
        }
        assert!(energy_e_eps(&quad, &s, [0.5, 0.0], 0.02, 1e-3).is_err());
    }

    #[test]
    fn w22_of_linear_and_quadratic() {
        let g = Grid::unit(1, 200).unwrap();
        let s = OperatorSpec::p_laplacian(g, 2.0, 0.1).unwrap();
        let h = g.h(0);
        let taus = [8.0 * h, 4.0 * h, 2.0 * h, h];
        let lin = ScalarField::from_fn(g, |x| 2.0 * x[0]).unwrap();
        for (_, e) in w22_quotient_energy(&lin, &s, [0.5, 0.0], 0.15, &taus).unwrap() {
            assert!(e.abs() < 1e-18);
        }
        let quad = ScalarField::from_fn(g, |x| 0.5 * x[0] * x[0]).unwrap();
        // ∫ ζ² = 2R + 2R/3 for the linear ramp
        let exact = 2.0 * 0.15 * (1.0 + 1.0 / 3.0);
        for (_, e) in w22_quotient_energy(&quad, &s, [0.5, 0.0], 0.15, &taus).unwrap() {
            assert!((e - exact).abs() < 1e-3 * exact, "{e} vs {exact}");
        }
    }

    #[test]
    fn w22_contract_errors() {
        let g = Grid::unit(1, 100).unwrap();
        let u = ScalarField::zeros(g);
        let s0 = OperatorSpec::p_laplacian(g, 2.0, 0.0).unwrap();
        let e = w22_quotient_energy(&u, &s0, [0.5, 0.0], 0.1, &[0.01]).unwrap_err();
        assert!(e.to_string().contains("requires kappa > 0"));
        let s = OperatorSpec::p_laplacian(g, 2.0, 0.1).unwrap();
        assert!(w22_quotient_energy(&u, &s, [0.5, 0.0], 0.1, &[0.015]).is_err());
    }
}
