use rayon::prelude::*;

use super::{Law, OperatorSpec, Penalty};
use crate::error::Result;
use crate::fields::{Grid, Point, VectorField};

/// Per-cell laws of a discrete operator, ready for repeated evaluation.
///
/// `grad` and `hess` below refer to the reduced energy `J(u) = E(u) / |cell|`,
/// so `Au = -∂J/∂u` at interior nodes.
#[derive(Debug, Clone)]
pub struct Stencil {
    grid: Grid,
    hx: f64,
    hy: f64,
    main: Vec<Law>,
    pen: Option<Vec<Law>>,
    penalty: Option<Penalty>,
}

const PAR_CHUNK: usize = 4096;

impl Stencil {
    pub fn new(spec: &OperatorSpec, penalty: Option<Penalty>) -> Self {
        let grid = *spec.grid();
        let k = grid.nodes_per_cell();
        let p = spec.p().values();
        let m = spec.m().values();
        let main: Vec<Law> = (0..grid.cell_count())
            .map(|c| {
                let nodes = grid.cell_nodes(c);
                let pc = nodes[..k].iter().map(|&n| p[n]).sum::<f64>() / k as f64;
                let mc = nodes[..k].iter().map(|&n| m[n]).sum::<f64>() / k as f64;
                Law::new(mc, pc, spec.kappa(), spec.eta_floor())
            })
            .collect();
        let mut st = Stencil {
            grid,
            hx: grid.h(0),
            hy: if grid.dim() == 2 { grid.h(1) } else { 1.0 },
            main,
            pen: None,
            penalty: None,
        };
        st.set_penalty(penalty);
        st
    }

    /// Replaces the penalization term, keeping the main laws.
    pub fn set_penalty(&mut self, penalty: Option<Penalty>) {
        let dim = self.grid.dim();
        self.penalty = penalty;
        self.pen = penalty.map(|pen| self.main.iter().map(|l| pen.law(l.p, dim)).collect());
    }

    pub fn penalty(&self) -> Option<Penalty> {
        self.penalty
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    fn corner_flux(&self, cell: usize, eta: Point) -> Point {
        let mut f = self.main[cell].flux(eta);
        if let Some(pen) = &self.pen {
            let g = pen[cell].flux(eta);
            f[0] += g[0];
            f[1] += g[1];
        }
        f
    }

    #[inline]
    fn corner_flux_jac(&self, cell: usize, eta: Point) -> (Point, [[f64; 2]; 2]) {
        let (mut f, mut j) = self.main[cell].flux_and_jacobian(eta);
        if let Some(pen) = &self.pen {
            let (g, k) = pen[cell].flux_and_jacobian(eta);
            f[0] += g[0];
            f[1] += g[1];
            for a in 0..2 {
                for b in 0..2 {
                    j[a][b] += k[a][b];
                }
            }
        }
        (f, j)
    }

    #[inline]
    fn corner_energy(&self, cell: usize, eta: Point) -> f64 {
        let mut e = self.main[cell].energy(eta);
        if let Some(pen) = &self.pen {
            e += pen[cell].energy(eta);
        }
        e
    }

    #[inline]
    fn local(&self, u: &[f64], nodes: &[usize; 4]) -> [f64; 4] {
        if self.grid.dim() == 1 {
            [u[nodes[0]], u[nodes[1]], 0.0, 0.0]
        } else {
            [u[nodes[0]], u[nodes[1]], u[nodes[2]], u[nodes[3]]]
        }
    }

    /// Corner gradients `[bl, br, tl, tr]` of a 2D cell.
    #[inline]
    fn corners(&self, v: &[f64; 4]) -> [Point; 4] {
        let dxb = (v[1] - v[0]) / self.hx;
        let dxt = (v[3] - v[2]) / self.hx;
        let dyl = (v[2] - v[0]) / self.hy;
        let dyr = (v[3] - v[1]) / self.hy;
        [[dxb, dyl], [dxb, dyr], [dxt, dyl], [dxt, dyr]]
    }

    /// Cell contribution to `∂J/∂u` on its local nodes.
    #[inline]
    pub fn cell_grad(&self, cell: usize, v: &[f64; 4]) -> [f64; 4] {
        if self.grid.dim() == 1 {
            let f = self.corner_flux(cell, [(v[1] - v[0]) / self.hx, 0.0])[0] / self.hx;
            return [-f, f, 0.0, 0.0];
        }
        let g = self.corners(v);
        let f: [Point; 4] = std::array::from_fn(|c| self.corner_flux(cell, g[c]));
        let sxb = 0.25 * (f[0][0] + f[1][0]) / self.hx;
        let sxt = 0.25 * (f[2][0] + f[3][0]) / self.hx;
        let syl = 0.25 * (f[0][1] + f[2][1]) / self.hy;
        let syr = 0.25 * (f[1][1] + f[3][1]) / self.hy;
        [-sxb - syl, sxb - syr, -sxt + syl, sxt + syr]
    }

    /// Cell contribution to `∂J/∂u` and `∂²J/∂u²` on its local nodes.
    #[inline]
    pub fn cell_grad_hess(&self, cell: usize, v: &[f64; 4]) -> ([f64; 4], [[f64; 4]; 4]) {
        let mut h = [[0.0; 4]; 4];
        if self.grid.dim() == 1 {
            let (f, j) = self.corner_flux_jac(cell, [(v[1] - v[0]) / self.hx, 0.0]);
            let fl = f[0] / self.hx;
            let k = j[0][0] / (self.hx * self.hx);
            h[0][0] = k;
            h[1][1] = k;
            h[0][1] = -k;
            h[1][0] = -k;
            return ([-fl, fl, 0.0, 0.0], h);
        }
        let (ix, iy) = (1.0 / self.hx, 1.0 / self.hy);
        let bx_b = [-ix, ix, 0.0, 0.0];
        let bx_t = [0.0, 0.0, -ix, ix];
        let by_l = [-iy, 0.0, iy, 0.0];
        let by_r = [0.0, -iy, 0.0, iy];
        let rows = [(bx_b, by_l), (bx_b, by_r), (bx_t, by_l), (bx_t, by_r)];
        let g = self.corners(v);
        let mut grad = [0.0; 4];
        for (c, (bx, by)) in rows.iter().enumerate() {
            let (f, k) = self.corner_flux_jac(cell, g[c]);
            for a in 0..4 {
                grad[a] += 0.25 * (bx[a] * f[0] + by[a] * f[1]);
                let ra = [bx[a] * k[0][0] + by[a] * k[1][0], bx[a] * k[0][1] + by[a] * k[1][1]];
                for b in 0..4 {
                    h[a][b] += 0.25 * (ra[0] * bx[b] + ra[1] * by[b]);
                }
            }
        }
        (grad, h)
    }

    fn cell_energy(&self, cell: usize, v: &[f64; 4]) -> f64 {
        if self.grid.dim() == 1 {
            return self.corner_energy(cell, [(v[1] - v[0]) / self.hx, 0.0]);
        }
        let g = self.corners(v);
        0.25 * g.iter().map(|&e| self.corner_energy(cell, e)).sum::<f64>()
    }

    /// `Au` at every interior node; boundary entries are zero.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let grid = self.grid;
        let k = grid.nodes_per_cell();
        let grads: Vec<[f64; 4]> = (0..grid.cell_count())
            .into_par_iter()
            .with_min_len(PAR_CHUNK)
            .map(|c| self.cell_grad(c, &self.local(u, &grid.cell_nodes(c))))
            .collect();
        out.iter_mut().for_each(|o| *o = 0.0);
        for (c, g) in grads.iter().enumerate() {
            let nodes = grid.cell_nodes(c);
            for l in 0..k {
                out[nodes[l]] -= g[l];
            }
        }
        for (n, o) in out.iter_mut().enumerate() {
            if grid.is_boundary_node(n) {
                *o = 0.0;
            }
        }
    }

    /// Discrete energy `E(u)` (a true integral, not divided by the cell volume).
    pub fn energy(&self, u: &[f64]) -> f64 {
        let grid = self.grid;
        let per_cell: Vec<f64> = (0..grid.cell_count())
            .into_par_iter()
            .with_min_len(PAR_CHUNK)
            .map(|c| self.cell_energy(c, &self.local(u, &grid.cell_nodes(c))))
            .collect();
        per_cell.iter().sum::<f64>() * grid.cell_volume()
    }

    /// `(Au)_node` and `-∂(Au)_node/∂u_node` with `u_node` replaced by `value`.
    pub fn node_eval(&self, u: &[f64], node: usize, value: f64) -> (f64, f64) {
        let grid = &self.grid;
        let (cells, k) = grid.cells_of_node(node);
        let (mut au, mut d) = (0.0, 0.0);
        for &c in &cells[..k] {
            let nodes = grid.cell_nodes(c);
            let mut v = self.local(u, &nodes);
            let l = nodes.iter().position(|&n| n == node).unwrap_or(0);
            v[l] = value;
            let (g, h) = self.cell_grad_hess(c, &v);
            au -= g[l];
            d += h[l][l];
        }
        (au, d)
    }

    /// `(Au)_node` only.
    pub fn node_value(&self, u: &[f64], node: usize) -> f64 {
        let grid = &self.grid;
        let (cells, k) = grid.cells_of_node(node);
        let mut au = 0.0;
        for &c in &cells[..k] {
            let nodes = grid.cell_nodes(c);
            let l = nodes.iter().position(|&n| n == node).unwrap_or(0);
            au -= self.cell_grad(c, &self.local(u, &nodes))[l];
        }
        au
    }

    /// Local gradients and Hessians of every cell, computed in parallel.
    pub fn cell_hessians(&self, u: &[f64]) -> Vec<([f64; 4], [[f64; 4]; 4])> {
        let grid = self.grid;
        (0..grid.cell_count())
            .into_par_iter()
            .with_min_len(PAR_CHUNK)
            .map(|c| self.cell_grad_hess(c, &self.local(u, &grid.cell_nodes(c))))
            .collect()
    }

    pub fn face_flux(&self, u: &[f64]) -> Result<VectorField> {
        let grid = self.grid;
        if grid.dim() == 1 {
            let f = (0..grid.cell_count())
                .map(|c| {
                    let v = self.local(u, &grid.cell_nodes(c));
                    self.corner_flux(c, [(v[1] - v[0]) / self.hx, 0.0])[0]
                })
                .collect();
            return VectorField::new(grid, vec![f]);
        }
        let corner: Vec<[Point; 4]> = (0..grid.cell_count())
            .map(|c| {
                let g = self.corners(&self.local(u, &grid.cell_nodes(c)));
                std::array::from_fn(|k| self.corner_flux(c, g[k]))
            })
            .collect();
        let (nx, ny) = (grid.n_cells(0), grid.n_cells(1));
        let mut fx = vec![0.0; grid.face_count(0)];
        for j in 0..=ny {
            for i in 0..nx {
                let (mut s, mut k) = (0.0, 0.0);
                if j < ny {
                    let f = &corner[i + nx * j];
                    s += f[0][0] + f[1][0];
                    k += 2.0;
                }
                if j > 0 {
                    let f = &corner[i + nx * (j - 1)];
                    s += f[2][0] + f[3][0];
                    k += 2.0;
                }
                fx[i + nx * j] = s / k;
            }
        }
        let mut fy = vec![0.0; grid.face_count(1)];
        for j in 0..ny {
            for i in 0..=nx {
                let (mut s, mut k) = (0.0, 0.0);
                if i < nx {
                    let f = &corner[i + nx * j];
                    s += f[0][1] + f[2][1];
                    k += 2.0;
                }
                if i > 0 {
                    let f = &corner[i - 1 + nx * j];
                    s += f[1][1] + f[3][1];
                    k += 2.0;
                }
                fy[i + (nx + 1) * j] = s / k;
            }
        }
        VectorField::new(grid, vec![fx, fy])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{ExponentField, ScalarField};
    use crate::operator::DEFAULT_ETA_FLOOR;

    fn spec() -> OperatorSpec {
        let g = Grid::new(2, &[0.0, 0.0], &[1.0, 1.0], &[5, 4]).unwrap();
        let p = ExponentField::affine(g, 1.7, [0.9, 0.4], 1.5, 3.0).unwrap();
        let m = ScalarField::from_fn(g, |x| 1.0 + 0.3 * x[0]).unwrap();
        OperatorSpec::new(p, m, 0.2, DEFAULT_ETA_FLOOR).unwrap()
    }

    #[test]
    fn node_eval_agrees_with_apply() {
        let s = spec();
        let g = *s.grid();
        let u = ScalarField::from_fn(g, |x| x[0] * x[0] + (x[1] * 3.0).cos()).unwrap();
        let st = Stencil::new(&s, Some(Penalty::new(0.1, 0.5).unwrap()));
        let mut out = vec![0.0; g.node_count()];
        st.apply(u.values(), &mut out);
        for n in g.interior_nodes() {
            let (au, _) = st.node_eval(u.values(), n, u.get(n));
            assert!((au - out[n]).abs() < 1e-12 * (1.0 + au.abs()));
            assert!((st.node_value(u.values(), n) - out[n]).abs() < 1e-12 * (1.0 + au.abs()));
        }
    }

    #[test]
    fn hessian_matches_gradient_difference() {
        let s = spec();
        let st = Stencil::new(&s, None);
        let v = [0.1, 0.5, -0.2, 0.3];
        let (g0, h) = st.cell_grad_hess(3, &v);
        for (a, b) in g0.iter().zip(st.cell_grad(3, &v)) {
            assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
        }
        for b in 0..4 {
            let d = 1e-6;
            let mut vp = v;
            let mut vm = v;
            vp[b] += d;
            vm[b] -= d;
            let (gp, gm) = (st.cell_grad(3, &vp), st.cell_grad(3, &vm));
            for a in 0..4 {
                let fd = (gp[a] - gm[a]) / (2.0 * d);
                assert!((fd - h[a][b]).abs() < 1e-5 * (1.0 + h[a][b].abs()));
            }
        }
    }

    #[test]
    fn face_flux_of_linear_field_is_uniform() {
        let g = Grid::unit(2, 6).unwrap();
        let s = OperatorSpec::p_laplacian(g, 3.0, 0.0).unwrap();
        let u = ScalarField::from_fn(g, |x| 3.0 * x[0] + 4.0 * x[1]).unwrap();
        let f = Stencil::new(&s, None).face_flux(u.values()).unwrap();
        for v in f.component(0) {
            assert!((v - 15.0).abs() < 1e-12);
        }
        for v in f.component(1) {
            assert!((v - 20.0).abs() < 1e-12);
        }
    }
}
