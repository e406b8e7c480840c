use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{nodes_in_ball, FreeBoundarySet};
use crate::error::{Error, Result};
use crate::fields::{Grid, Point, ScalarField};

/// Exact squared distance transform of a sampled function along one line
/// (lower envelope of parabolas), with sample spacing `w`.
fn edt_1d(f: &[f64], w: f64, out: &mut [f64]) {
    let n = f.len();
    let w2 = w * w;
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    let mut first = None;
    for q in 0..n {
        if f[q].is_finite() {
            first = Some(q);
            break;
        }
    }
    let Some(q0) = first else {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    };
    v[0] = q0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in q0 + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        let cross = |p: usize| {
            ((f[q] + w2 * (q * q) as f64) - (f[p] + w2 * (p * p) as f64)) / (2.0 * w2 * (q as f64 - p as f64))
        };
        let mut s = cross(v[k]);
        while s <= z[k] {
            k -= 1;
            s = cross(v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let d = q as f64 - p as f64;
        *o = w2 * d * d + f[p];
    }
}

/// Distance from every node to the nearest boundary-cell center.
fn distance_to_boundary_points(fb: &FreeBoundarySet) -> Vec<f64> {
    let grid = fb.grid();
    // half-step lattice holding both nodes (even, even) and cell centers (odd, odd)
    let nx = 2 * grid.n_cells(0) + 1;
    let ny = if grid.dim() == 2 { 2 * grid.n_cells(1) + 1 } else { 1 };
    let mut f = vec![f64::INFINITY; nx * ny];
    for &c in &fb.boundary_cells {
        let (i, j) = grid.cell_ij(c);
        let (li, lj) = if grid.dim() == 2 { (2 * i + 1, 2 * j + 1) } else { (2 * i + 1, 0) };
        f[li + nx * lj] = 0.0;
    }
    let mut row = vec![0.0; nx];
    for lj in 0..ny {
        let line = &f[lj * nx..(lj + 1) * nx];
        edt_1d(line, 0.5 * grid.h(0), &mut row);
        f[lj * nx..(lj + 1) * nx].copy_from_slice(&row);
    }
    if grid.dim() == 2 {
        let mut col = vec![0.0; ny];
        let mut out = vec![0.0; ny];
        for li in 0..nx {
            for lj in 0..ny {
                col[lj] = f[li + nx * lj];
            }
            edt_1d(&col, 0.5 * grid.h(1), &mut out);
            for lj in 0..ny {
                f[li + nx * lj] = out[lj];
            }
        }
    }
    (0..grid.node_count())
        .map(|n| {
            let (i, j) = grid.node_ij(n);
            f[2 * i + nx * (2 * j)].sqrt()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PorosityReport {
    pub delta_hat: f64,
    pub r_range: (f64, f64),
    /// Minimum of `ρ/r` over boundary points, per radius.
    pub per_radius: Vec<(f64, f64)>,
    /// Set when some ball had no boundary-free sub-ball at resolution `h`.
    pub resolution_limited: bool,
    pub points_used: usize,
}

/// Largest relative radius `ρ/r` of a boundary-free ball `B_ρ(y) ⊆ B_r(x)`,
/// minimized over boundary points `x` whose ball `B_r(x)` lies inside the box.
pub fn porosity_estimate(fb: &FreeBoundarySet, r_list: &[f64]) -> Result<PorosityReport> {
    let grid = *fb.grid();
    if fb.is_empty() {
        return Err(Error::Analysis("porosity: empty free boundary".into()));
    }
    if r_list.is_empty() {
        return Err(Error::Analysis("porosity: no radii".into()));
    }
    let h = grid.h_mean();
    for &r in r_list {
        if r < 3.0 * h * (1.0 - 1e-12) {
            return Err(Error::Analysis(format!("porosity: radius under-resolved ({r} < 3h)")));
        }
    }
    let dist = distance_to_boundary_points(fb);
    let points = fb.points();
    let mut per_radius = Vec::new();
    let mut limited = false;
    let mut used_any = 0;
    for &r in r_list {
        let results: Vec<(f64, bool)> = points
            .par_iter()
            .filter(|x| grid.distance_to_box_boundary(**x) >= r)
            .map(|&x| {
                let best = nodes_in_ball(&grid, x, r)
                    .into_iter()
                    .map(|n| {
                        let y = grid.node_position(n);
                        (r - grid.distance(x, y)).min(dist[n])
                    })
                    .fold(0.0, f64::max);
                if best < h {
                    (h / r, true)
                } else {
                    (best / r, false)
                }
            })
            .collect();
        if results.is_empty() {
            continue;
        }
        used_any = used_any.max(results.len());
        limited |= results.iter().any(|x| x.1);
        let m = results.iter().map(|x| x.0).fold(f64::INFINITY, f64::min);
        per_radius.push((r, m));
    }
    if per_radius.is_empty() {
        return Err(Error::Analysis(
            "porosity: no boundary point has its ball inside the domain".into(),
        ));
    }
    let delta_hat = per_radius.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    let rmin = r_list.iter().cloned().fold(f64::INFINITY, f64::min);
    let rmax = r_list.iter().cloned().fold(0.0, f64::max);
    Ok(PorosityReport {
        delta_hat,
        r_range: (rmin, rmax),
        per_radius,
        resolution_limited: limited,
        points_used: used_any,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxCount {
    pub center: Point,
    pub r: f64,
    pub count: usize,
    /// `count · h^{n-1}`.
    pub estimate: f64,
    /// `estimate · π/4` in 2D, correcting the taxicab bias of cell counts.
    pub isotropic_estimate: f64,
}

/// Boundary cells with center in `B_r(x0)`.
pub fn hausdorff_box_count(fb: &FreeBoundarySet, x0: Point, r: f64) -> BoxCount {
    let grid = fb.grid();
    let count = fb
        .boundary_cells
        .iter()
        .filter(|&&c| grid.distance(grid.cell_center(c), x0) <= r * (1.0 + 1e-12))
        .count();
    let (estimate, isotropic_estimate) = if grid.dim() == 1 {
        (count as f64, count as f64)
    } else {
        let e = count as f64 * grid.h_mean();
        (e, e * std::f64::consts::FRAC_PI_4)
    };
    BoxCount {
        center: x0,
        r,
        count,
        estimate,
        isotropic_estimate,
    }
}

/// Axis-aligned box `[lo, hi]`.
pub type Region = (Point, Point);

fn in_region(grid: &Grid, n: usize, region: Option<&Region>) -> bool {
    match region {
        None => true,
        Some((lo, hi)) => {
            let x = grid.node_position(n);
            (0..grid.dim()).all(|a| x[a] >= lo[a] - 1e-12 && x[a] <= hi[a] + 1e-12)
        }
    }
}

/// Anisotropic discrete total variation of a nodal field: jumps between
/// axis-adjacent nodes weighted by the length of the dual face between them
/// (halved on the box boundary).
pub fn bv_norm(field: &ScalarField, region: Option<&Region>) -> f64 {
    let grid = *field.grid();
    let v = field.values();
    if grid.dim() == 1 {
        return (0..grid.n_cells(0))
            .filter(|&i| in_region(&grid, i, region) && in_region(&grid, i + 1, region))
            .map(|i| (v[i + 1] - v[i]).abs())
            .sum();
    }
    let (nx, ny) = (grid.n_cells(0), grid.n_cells(1));
    let dual = |k: usize, n: usize, h: f64| if k == 0 || k == n { 0.5 * h } else { h };
    let mut tv = 0.0;
    for j in 0..=ny {
        for i in 0..=nx {
            let a = grid.node_index(i, j);
            if !in_region(&grid, a, region) {
                continue;
            }
            if i < nx {
                let b = grid.node_index(i + 1, j);
                if in_region(&grid, b, region) {
                    tv += (v[b] - v[a]).abs() * dual(j, ny, grid.h(1));
                }
            }
            if j < ny {
                let b = grid.node_index(i, j + 1);
                if in_region(&grid, b, region) {
                    tv += (v[b] - v[a]).abs() * dual(i, nx, grid.h(0));
                }
            }
        }
    }
    tv
}

/// Total variation of `χ_{u > tol}`.
pub fn perimeter_of_positivity(u: &ScalarField, tol: f64, region: Option<&Region>) -> f64 {
    let chi = ScalarField::new(
        *u.grid(),
        u.values().iter().map(|&v| if v > tol { 1.0 } else { 0.0 }).collect(),
    )
    .expect("indicator is finite");
    bv_norm(&chi, region)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_distance(fb: &FreeBoundarySet) -> Vec<f64> {
        let g = fb.grid();
        let pts = fb.points();
        (0..g.node_count())
            .map(|n| {
                let x = g.node_position(n);
                pts.iter().map(|p| g.distance(*p, x)).fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    #[test]
    fn distance_transform_matches_brute_force() {
        let g = Grid::new(2, &[0.0, 0.0], &[1.0, 0.5], &[20, 14]).unwrap();
        let u = ScalarField::from_fn(g, |x| ((x[0] - 0.4).hypot(x[1] - 0.2) - 0.15).max(0.0)).unwrap();
        let fb = FreeBoundarySet::from_field(&u, 0.0);
        let a = distance_to_boundary_points(&fb);
        let b = brute_distance(&fb);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12, "{x} {y}");
        }
    }

    fn half_plane(n: usize) -> FreeBoundarySet {
        let g = Grid::unit(2, n).unwrap();
        let mask = (0..g.node_count()).map(|k| g.node_position(k)[0] < 0.5).collect();
        FreeBoundarySet::from_mask(g, mask, 0.0).unwrap()
    }

    #[test]
    fn hyperplane_porosity_is_one_half() {
        let fb = half_plane(128);
        let rep = porosity_estimate(&fb, &[0.1, 0.2]).unwrap();
        assert!(rep.delta_hat > 0.45 && rep.delta_hat <= 0.5 + 1e-12, "{rep:?}");
        assert!(!rep.resolution_limited);
    }

    #[test]
    fn porosity_rejects_small_radius() {
        let fb = half_plane(32);
        assert!(porosity_estimate(&fb, &[0.05]).is_err());
    }

    #[test]
    fn point_porosity_in_one_dimension() {
        let g = Grid::unit(1, 200).unwrap();
        let mask = (0..g.node_count()).map(|k| g.node_position(k)[0] > 0.5).collect();
        let fb = FreeBoundarySet::from_mask(g, mask, 0.0).unwrap();
        let rep = porosity_estimate(&fb, &[0.1, 0.2]).unwrap();
        assert!((rep.delta_hat - 0.5).abs() < 0.03, "{rep:?}");
    }

    #[test]
    fn porosity_is_scale_invariant() {
        let g = Grid::unit(2, 160).unwrap();
        let disc = |rho: f64| {
            let mask = (0..g.node_count())
                .map(|k| g.distance(g.node_position(k), [0.5, 0.5]) < rho)
                .collect();
            FreeBoundarySet::from_mask(g, mask, 0.0).unwrap()
        };
        let a = porosity_estimate(&disc(0.1), &[0.05]).unwrap().delta_hat;
        let b = porosity_estimate(&disc(0.2), &[0.1]).unwrap().delta_hat;
        assert!((a - b).abs() < 0.05, "{a} {b}");
    }

    #[test]
    fn half_plane_perimeter_is_exact() {
        for n in [7, 8, 33] {
            let g = Grid::unit(2, n).unwrap();
            let chi = ScalarField::from_fn(g, |x| if x[0] < 0.5 { 1.0 } else { 0.0 }).unwrap();
            assert!((bv_norm(&chi, None) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn polyomino_perimeter_is_face_count() {
        let g = Grid::unit(2, 10).unwrap();
        // an L-shaped set of interior nodes
        let inside = |i: usize, j: usize| (2..=6).contains(&i) && (2..=4).contains(&j) || (2..=3).contains(&i) && (5..=7).contains(&j);
        let mut vals = vec![0.0; g.node_count()];
        let mut faces = 0;
        for j in 0..=10 {
            for i in 0..=10 {
                if inside(i, j) {
                    vals[g.node_index(i, j)] = 1.0;
                    for (a, b) in [(i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)] {
                        if !inside(a, b) {
                            faces += 1;
                        }
                    }
                }
            }
        }
        let chi = ScalarField::new(g, vals).unwrap();
        assert!((bv_norm(&chi, None) - faces as f64 * 0.1).abs() < 1e-12);
    }

    #[test]
    fn square_perimeter() {
        let g = Grid::unit(2, 20).unwrap();
        // 6 x 6 nodes: dual square of side 0.3
        let chi = ScalarField::from_fn(g, |x| if x[0] > 0.22 && x[0] < 0.53 && x[1] > 0.22 && x[1] < 0.53 { 1.0 } else { 0.0 }).unwrap();
        assert!((bv_norm(&chi, None) - 4.0 * 0.3).abs() < 1e-12);
    }

    #[test]
    fn circle_box_count() {
        let rho = 0.25;
        let n = 512;
        let g = Grid::unit(2, n).unwrap();
        let mask = (0..g.node_count())
            .map(|k| g.distance(g.node_position(k), [0.5, 0.5]) < rho)
            .collect();
        let fb = FreeBoundarySet::from_mask(g, mask, 0.0).unwrap();
        let b = hausdorff_box_count(&fb, [0.5, 0.5], 0.4);
        let exact = 2.0 * std::f64::consts::PI * rho;
        assert!((b.isotropic_estimate - exact).abs() < 0.1 * exact, "{b:?}");
        let chi = ScalarField::new(g, fb.coincidence_mask.iter().map(|&m| m as u8 as f64).collect()).unwrap();
        let tv = bv_norm(&chi, None) * std::f64::consts::FRAC_PI_4;
        assert!((tv - exact).abs() < 0.1 * exact);
    }

    #[test]
    fn one_dimensional_count_is_point_count() {
        let g = Grid::unit(1, 50).unwrap();
        let u = ScalarField::from_fn(g, |x| (0.3 - x[0]).max(0.0) + (x[0] - 0.7).max(0.0)).unwrap();
        let fb = FreeBoundarySet::from_field(&u, 0.0);
        let b = hausdorff_box_count(&fb, [0.5, 0.0], 0.5);
        assert_eq!(b.count, 2);
        assert_eq!(b.estimate, 2.0);
    }
}
