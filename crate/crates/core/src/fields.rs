//! Structured grids, nodal fields, staggered vector fields and the field CSV format.
//!
//! Nodes are stored row-major with the x index fastest: node `(i, j)` lives at
//! `i + (nx + 1) * j`. Cells are indexed the same way over `nx × ny`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;

/// A point in the computational box. The second coordinate is ignored in 1D.
pub type Point = [f64; 2];

/// Uniform structured mesh of a box in dimension 1 or 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    lo: [f64; 2],
    hi: [f64; 2],
    n_cells: [usize; 2],
}

impl Grid {
    pub const MIN_CELLS: usize = 4;

    pub fn new(dim: usize, lo: &[f64], hi: &[f64], n_cells: &[usize]) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dim must be 1 or 2, got {dim}")));
        }
        if lo.len() != dim || hi.len() != dim || n_cells.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "expected {dim} entries in lo, hi and n_cells"
            )));
        }
        let mut g = Grid {
            dim,
            lo: [0.0; 2],
            hi: [0.0; 2],
            n_cells: [0; 2],
        };
        for a in 0..dim {
            if !(lo[a].is_finite() && hi[a].is_finite()) || hi[a] <= lo[a] {
                return Err(Error::InvalidGrid(format!(
                    "axis {a}: need finite lo < hi, got [{}, {}]",
                    lo[a], hi[a]
                )));
            }
            if n_cells[a] < Self::MIN_CELLS {
                return Err(Error::InvalidGrid(format!(
                    "axis {a}: need at least {} cells, got {}",
                    Self::MIN_CELLS,
                    n_cells[a]
                )));
            }
            g.lo[a] = lo[a];
            g.hi[a] = hi[a];
            g.n_cells[a] = n_cells[a];
        }
        Ok(g)
    }

    /// The unit interval or unit square with `n` cells per axis.
    pub fn unit(dim: usize, n: usize) -> Result<Self> {
        Self::new(dim, &vec![0.0; dim], &vec![1.0; dim], &vec![n; dim])
    }

    /// A box `[lo, hi]^dim` with `n` cells per axis.
    pub fn cube(dim: usize, lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new(dim, &vec![lo; dim], &vec![hi; dim], &vec![n; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lo(&self, axis: usize) -> f64 {
        self.lo[axis]
    }

    pub fn hi(&self, axis: usize) -> f64 {
        self.hi[axis]
    }

    pub fn n_cells(&self, axis: usize) -> usize {
        if axis < self.dim {
            self.n_cells[axis]
        } else {
            0
        }
    }

    pub fn h(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / self.n_cells[axis] as f64
    }

    /// Smallest spacing over the axes.
    pub fn h_min(&self) -> f64 {
        (0..self.dim).map(|a| self.h(a)).fold(f64::INFINITY, f64::min)
    }

    /// Geometric mean spacing, used where a single length scale is needed.
    pub fn h_mean(&self) -> f64 {
        (0..self.dim)
            .map(|a| self.h(a))
            .product::<f64>()
            .powf(1.0 / self.dim as f64)
    }

    /// Volume of one cell (length in 1D, area in 2D).
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.h(a)).product()
    }

    pub fn box_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.hi[a] - self.lo[a]).product()
    }

    pub fn nodes_along(&self, axis: usize) -> usize {
        self.n_cells(axis) + 1
    }

    pub fn node_count(&self) -> usize {
        match self.dim {
            1 => self.n_cells[0] + 1,
            _ => (self.n_cells[0] + 1) * (self.n_cells[1] + 1),
        }
    }

    pub fn cell_count(&self) -> usize {
        match self.dim {
            1 => self.n_cells[0],
            _ => self.n_cells[0] * self.n_cells[1],
        }
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        i + (self.n_cells[0] + 1) * j
    }

    pub fn node_ij(&self, node: usize) -> (usize, usize) {
        let w = self.n_cells[0] + 1;
        (node % w, node / w)
    }

    pub fn coord(&self, axis: usize, k: usize) -> f64 {
        if k == self.n_cells[axis] {
            self.hi[axis]
        } else {
            self.lo[axis] + k as f64 * self.h(axis)
        }
    }

    pub fn node_position(&self, node: usize) -> Point {
        let (i, j) = self.node_ij(node);
        match self.dim {
            1 => [self.coord(0, i), 0.0],
            _ => [self.coord(0, i), self.coord(1, j)],
        }
    }

    pub fn is_boundary_node(&self, node: usize) -> bool {
        let (i, j) = self.node_ij(node);
        let nx = self.n_cells[0];
        match self.dim {
            1 => i == 0 || i == nx,
            _ => i == 0 || i == nx || j == 0 || j == self.n_cells[1],
        }
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_count()).filter(move |&n| !self.is_boundary_node(n))
    }

    pub fn cell_ij(&self, cell: usize) -> (usize, usize) {
        (cell % self.n_cells[0], cell / self.n_cells[0])
    }

    /// Corner nodes of a cell: `[bl, br, tl, tr]` in 2D, `[left, right, _, _]` in 1D.
    pub fn cell_nodes(&self, cell: usize) -> [usize; 4] {
        let (ci, cj) = self.cell_ij(cell);
        match self.dim {
            1 => [ci, ci + 1, usize::MAX, usize::MAX],
            _ => [
                self.node_index(ci, cj),
                self.node_index(ci + 1, cj),
                self.node_index(ci, cj + 1),
                self.node_index(ci + 1, cj + 1),
            ],
        }
    }

    pub fn nodes_per_cell(&self) -> usize {
        if self.dim == 1 {
            2
        } else {
            4
        }
    }

    pub fn cell_center(&self, cell: usize) -> Point {
        let (ci, cj) = self.cell_ij(cell);
        let x = self.lo[0] + (ci as f64 + 0.5) * self.h(0);
        match self.dim {
            1 => [x, 0.0],
            _ => [x, self.lo[1] + (cj as f64 + 0.5) * self.h(1)],
        }
    }

    /// Cells touching a node (up to 2 in 1D, 4 in 2D) and how many there are.
    pub fn cells_of_node(&self, node: usize) -> ([usize; 4], usize) {
        let mut out = [0; 4];
        let mut k = 0;
        let (i, j) = self.node_ij(node);
        let nx = self.n_cells[0];
        let ny = if self.dim == 1 { 1 } else { self.n_cells[1] };
        let rows: &[usize] = if self.dim == 1 { &[0] } else { &[j.wrapping_sub(1), j] };
        for &cj in rows {
            if cj >= ny {
                continue;
            }
            for ci in [i.wrapping_sub(1), i] {
                if ci >= nx {
                    continue;
                }
                out[k] = ci + nx * cj;
                k += 1;
            }
        }
        (out, k)
    }

    /// Node nearest to `x`, clamped into the grid.
    pub fn nearest_node(&self, x: Point) -> usize {
        let snap = |a: usize| -> usize {
            let t = ((x[a] - self.lo[a]) / self.h(a)).round();
            t.clamp(0.0, self.n_cells[a] as f64) as usize
        };
        match self.dim {
            1 => snap(0),
            _ => self.node_index(snap(0), snap(1)),
        }
    }

    pub fn contains(&self, x: Point) -> bool {
        (0..self.dim).all(|a| x[a] >= self.lo[a] && x[a] <= self.hi[a])
    }

    /// Distance from `x` to the nearest face of the box (negative outside).
    pub fn distance_to_box_boundary(&self, x: Point) -> f64 {
        (0..self.dim)
            .map(|a| (x[a] - self.lo[a]).min(self.hi[a] - x[a]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn distance(&self, a: Point, b: Point) -> f64 {
        let mut s = (a[0] - b[0]).powi(2);
        if self.dim == 2 {
            s += (a[1] - b[1]).powi(2);
        }
        s.sqrt()
    }

    /// Same box with every spacing halved.
    pub fn refined(&self) -> Grid {
        let mut g = *self;
        for a in 0..self.dim {
            g.n_cells[a] *= 2;
        }
        g
    }

    /// Same box with every spacing doubled, when the cell counts allow it.
    pub fn coarsened(&self) -> Option<Grid> {
        let mut g = *self;
        for a in 0..self.dim {
            if self.n_cells[a] & 1 == 1 || self.n_cells[a] / 2 < Self::MIN_CELLS {
                return None;
            }
            g.n_cells[a] /= 2;
        }
        Some(g)
    }

    /// Number of faces normal to `axis` (staggered component length).
    pub fn face_count(&self, axis: usize) -> usize {
        match (self.dim, axis) {
            (1, 0) => self.n_cells[0],
            (2, 0) => self.n_cells[0] * (self.n_cells[1] + 1),
            (2, 1) => (self.n_cells[0] + 1) * self.n_cells[1],
            _ => 0,
        }
    }

    /// The two nodes joined by face `face` normal to `axis`.
    pub fn face_nodes(&self, axis: usize, face: usize) -> (usize, usize) {
        let nx = self.n_cells[0];
        match axis {
            0 => {
                let (i, j) = (face % nx, face / nx);
                let a = self.node_index(i, j);
                (a, a + 1)
            }
            _ => {
                let (i, j) = (face % (nx + 1), face / (nx + 1));
                (self.node_index(i, j), self.node_index(i, j + 1))
            }
        }
    }

    /// Continuous cell coordinates of `x` for bilinear interpolation, clamped into the box.
    fn locate(&self, x: Point, axis: usize) -> (usize, f64) {
        let n = self.n_cells[axis];
        let t = ((x[axis] - self.lo[axis]) / self.h(axis)).clamp(0.0, n as f64);
        let k = (t.floor() as usize).min(n - 1);
        (k, t - k as f64)
    }
}

/// Nodal values on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::InvalidField(format!(
                "expected {} values, got {}",
                grid.node_count(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("non-finite value at node {k}")));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        ScalarField {
            grid,
            values: vec![value; grid.node_count()],
        }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(Point) -> f64) -> Result<Self> {
        let values = (0..grid.node_count())
            .map(|n| f(grid.node_position(n)))
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, node: usize) -> f64 {
        self.values[node]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Bilinear (linear in 1D) interpolation, clamped to the box.
    pub fn interpolate(&self, x: Point) -> f64 {
        interpolate_values(&self.grid, &self.values, x)
    }

    /// Linear combination `alpha * self + beta * other` on the same grid.
    pub fn axpby(&self, alpha: f64, other: &ScalarField, beta: f64) -> Result<ScalarField> {
        ensure_same_grid(&self.grid, &other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        ScalarField::new(self.grid, values)
    }

    /// Values at nodes of `target`, bilinearly interpolated from `self`.
    pub fn resample(&self, target: Grid) -> ScalarField {
        let values = (0..target.node_count())
            .map(|n| self.interpolate(target.node_position(n)))
            .collect();
        ScalarField {
            grid: target,
            values,
        }
    }

    /// Sup-norm distance to another field on the same grid.
    pub fn max_abs_diff(&self, other: &ScalarField) -> Result<f64> {
        ensure_same_grid(&self.grid, &other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }
}

pub(crate) fn ensure_same_grid(a: &Grid, b: &Grid) -> Result<()> {
    if a != b {
        return Err(Error::GridMismatch(format!("{a:?} vs {b:?}")));
    }
    Ok(())
}

/// Face-centered (staggered) vector field: one array per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid,
    components: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn new(grid: Grid, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() != grid.dim() {
            return Err(Error::InvalidField(format!(
                "expected {} components, got {}",
                grid.dim(),
                components.len()
            )));
        }
        for (a, c) in components.iter().enumerate() {
            if c.len() != grid.face_count(a) {
                return Err(Error::InvalidField(format!(
                    "component {a}: expected {} face values, got {}",
                    grid.face_count(a),
                    c.len()
                )));
            }
        }
        Ok(VectorField { grid, components })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn component(&self, axis: usize) -> &[f64] {
        &self.components[axis]
    }
}

/// Face-centered first differences of `u`.
pub fn gradient(u: &ScalarField) -> VectorField {
    let g = *u.grid();
    let components = (0..g.dim())
        .map(|axis| {
            let h = g.h(axis);
            (0..g.face_count(axis))
                .map(|f| {
                    let (a, b) = g.face_nodes(axis, f);
                    (u.values[b] - u.values[a]) / h
                })
                .collect()
        })
        .collect();
    VectorField {
        grid: g,
        components,
    }
}

/// Nodal variable exponent `p(x)` with its bounds and sampled Lipschitz constant.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentField {
    grid: Grid,
    p_values: Vec<f64>,
    p_minus: f64,
    p_plus: f64,
    lipschitz_l: f64,
}

impl ExponentField {
    /// Validates `values` against the declared bounds and Lipschitz constant.
    pub fn with_bounds(
        grid: Grid,
        values: Vec<f64>,
        p_minus: f64,
        p_plus: f64,
        lipschitz_l: f64,
    ) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::InvalidField(format!(
                "exponent: expected {} values, got {}",
                grid.node_count(),
                values.len()
            )));
        }
        if !(p_minus > 1.0 && p_minus <= p_plus && p_plus.is_finite()) {
            return Err(Error::InvalidField(format!(
                "exponent bounds must satisfy 1 < p_minus <= p_plus < inf, got [{p_minus}, {p_plus}]"
            )));
        }
        if !(lipschitz_l >= 0.0) {
            return Err(Error::InvalidField("lipschitz constant must be >= 0".into()));
        }
        if let Some(k) = values
            .iter()
            .position(|&p| !(p.is_finite() && p >= p_minus && p <= p_plus))
        {
            return Err(Error::InvalidField(format!(
                "exponent {} at node {k} outside [{p_minus}, {p_plus}]",
                values[k]
            )));
        }
        let sampled = sampled_lipschitz(&grid, &values);
        if sampled > lipschitz_l * (1.0 + 1e-12) + 1e-14 {
            return Err(Error::InvalidField(format!(
                "sampled Lipschitz constant {sampled} exceeds declared {lipschitz_l}"
            )));
        }
        Ok(ExponentField {
            grid,
            p_values: values,
            p_minus,
            p_plus,
            lipschitz_l,
        })
    }

    /// Bounds and Lipschitz constant taken from the samples themselves.
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let l = if values.len() == grid.node_count() {
            sampled_lipschitz(&grid, &values)
        } else {
            0.0
        };
        Self::with_bounds(grid, values, lo, hi, l)
    }

    pub fn constant(grid: Grid, p: f64) -> Result<Self> {
        Self::with_bounds(grid, vec![p; grid.node_count()], p, p, 0.0)
    }

    /// `p(x) = p0 + gradient · x`, clipped to `[p_minus, p_plus]`.
    pub fn affine(grid: Grid, p0: f64, gradient: Point, p_minus: f64, p_plus: f64) -> Result<Self> {
        let values: Vec<f64> = (0..grid.node_count())
            .map(|n| {
                let x = grid.node_position(n);
                let mut p = p0 + gradient[0] * x[0];
                if grid.dim() == 2 {
                    p += gradient[1] * x[1];
                }
                p.clamp(p_minus, p_plus)
            })
            .collect();
        let l = sampled_lipschitz(&grid, &values);
        Self::with_bounds(grid, values, p_minus, p_plus, l)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.p_values
    }

    pub fn get(&self, node: usize) -> f64 {
        self.p_values[node]
    }

    pub fn p_minus(&self) -> f64 {
        self.p_minus
    }

    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz_l
    }

    pub fn is_constant(&self) -> bool {
        let first = self.p_values[0];
        self.p_values.iter().all(|&p| p == first)
    }

    pub fn eval(&self, x: Point) -> f64 {
        interpolate_values(&self.grid, &self.p_values, x)
    }

    pub fn as_scalar_field(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.p_values.clone(),
        }
    }
}

// Equal corner values are returned as-is so constant data interpolates exactly.
pub(crate) fn interpolate_values(grid: &Grid, values: &[f64], x: Point) -> f64 {
    let (i, tx) = grid.locate(x, 0);
    match grid.dim() {
        1 => {
            let (a, b) = (values[i], values[i + 1]);
            if a == b {
                a
            } else {
                a * (1.0 - tx) + b * tx
            }
        }
        _ => {
            let (j, ty) = grid.locate(x, 1);
            let v00 = values[grid.node_index(i, j)];
            let v10 = values[grid.node_index(i + 1, j)];
            let v01 = values[grid.node_index(i, j + 1)];
            let v11 = values[grid.node_index(i + 1, j + 1)];
            if v00 == v10 && v00 == v01 && v00 == v11 {
                return v00;
            }
            (1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11)
        }
    }
}

/// Largest `|v(a) - v(b)| / |a - b|` over axis-adjacent node pairs.
pub fn sampled_lipschitz(grid: &Grid, values: &[f64]) -> f64 {
    let mut l: f64 = 0.0;
    for axis in 0..grid.dim() {
        let h = grid.h(axis);
        for f in 0..grid.face_count(axis) {
            let (a, b) = grid.face_nodes(axis, f);
            l = l.max((values[b] - values[a]).abs() / h);
        }
    }
    l
}

/// Largest Euclidean gradient norm of the bilinear interpolant of `values`.
pub fn interpolant_lipschitz(grid: &Grid, values: &[f64]) -> f64 {
    if grid.dim() == 1 {
        return sampled_lipschitz(grid, values);
    }
    let (hx, hy) = (grid.h(0), grid.h(1));
    let mut l: f64 = 0.0;
    for c in 0..grid.cell_count() {
        let [bl, br, tl, tr] = grid.cell_nodes(c);
        let dxb = (values[br] - values[bl]) / hx;
        let dxt = (values[tr] - values[tl]) / hx;
        let dyl = (values[tl] - values[bl]) / hy;
        let dyr = (values[tr] - values[br]) / hy;
        for (gx, gy) in [(dxb, dyl), (dxb, dyr), (dxt, dyl), (dxt, dyr)] {
            l = l.max(gx.hypot(gy));
        }
    }
    l
}

const CSV_HEADER_1D: &str = "i,x,value";
const CSV_HEADER_2D: &str = "i,j,x,y,value";

/// Serializes a field in the `i,j,x,y,value` format (1D: `i,x,value`).
pub fn field_to_csv(field: &ScalarField) -> String {
    let g = field.grid();
    let mut out = String::with_capacity(field.values.len() * 40);
    out.push_str(if g.dim() == 1 {
        CSV_HEADER_1D
    } else {
        CSV_HEADER_2D
    });
    out.push('\n');
    for (n, v) in field.values.iter().enumerate() {
        let (i, j) = g.node_ij(n);
        let x = g.node_position(n);
        // `{}` on f64 is the shortest representation that round-trips.
        if g.dim() == 1 {
            let _ = writeln!(out, "{i},{},{v}", x[0]);
        } else {
            let _ = writeln!(out, "{i},{j},{},{},{v}", x[0], x[1]);
        }
    }
    out
}

pub fn field_from_csv(text: &str) -> Result<ScalarField> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Csv("missing header".into()))?;
    let dim = match header.trim() {
        CSV_HEADER_1D => 1,
        CSV_HEADER_2D => 2,
        other => return Err(Error::Csv(format!("malformed header {other:?}"))),
    };
    let cols = if dim == 1 { 3 } else { 5 };
    let mut idx: Vec<(usize, usize)> = Vec::new();
    let mut pos: Vec<Point> = Vec::new();
    let mut values = Vec::new();
    for (k, line) in lines.enumerate() {
        let row = k + 1;
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != cols {
            return Err(Error::Csv(format!(
                "row {row}: expected {cols} columns, got {}",
                parts.len()
            )));
        }
        let int = |s: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| Error::Csv(format!("row {row}: bad index {s:?}")))
        };
        let real = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Csv(format!("row {row}: bad number {s:?}")))
        };
        let value = real(parts[cols - 1])?;
        if !value.is_finite() {
            return Err(Error::Csv(format!("non-finite value at row {row}")));
        }
        if dim == 1 {
            idx.push((int(parts[0])?, 0));
            pos.push([real(parts[1])?, 0.0]);
        } else {
            idx.push((int(parts[0])?, int(parts[1])?));
            pos.push([real(parts[2])?, real(parts[3])?]);
        }
        values.push(value);
    }
    if values.is_empty() {
        return Err(Error::Csv("no data rows".into()));
    }
    let nx = idx.iter().map(|p| p.0).max().unwrap_or(0);
    let ny = idx.iter().map(|p| p.1).max().unwrap_or(0);
    let expected = if dim == 1 { nx + 1 } else { (nx + 1) * (ny + 1) };
    if values.len() != expected {
        return Err(Error::Csv(format!(
            "row count mismatch: expected {expected} rows for a {}-node grid, got {}",
            expected,
            values.len()
        )));
    }
    let w = nx + 1;
    for (k, &(i, j)) in idx.iter().enumerate() {
        if i + w * j != k {
            return Err(Error::Csv(format!(
                "row {}: node ({i},{j}) out of row-major order",
                k + 1
            )));
        }
    }
    let grid = if dim == 1 {
        Grid::new(1, &[pos[0][0]], &[pos[nx][0]], &[nx])?
    } else {
        let last = w * ny + nx;
        Grid::new(2, &[pos[0][0], pos[0][1]], &[pos[last][0], pos[last][1]], &[nx, ny])?
    };
    ScalarField::new(grid, values)
}

pub fn write_field_csv(field: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), field_to_csv(field).as_bytes())
}

pub fn read_field_csv(path: impl AsRef<Path>) -> Result<ScalarField> {
    let text = std::fs::read_to_string(path)?;
    field_from_csv(&text)
}
