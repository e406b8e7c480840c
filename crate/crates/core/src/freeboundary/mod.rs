//! Discrete coincidence set, free boundary and the quantitative measurements
//! made on them.
//!
//! Balls are discrete Euclidean balls of nodes (or cell centers) around a center
//! snapped to the nearest node.

mod geometry;
mod growth;
mod regularity;

pub use geometry::{
    bv_norm, hausdorff_box_count, perimeter_of_positivity, porosity_estimate, BoxCount,
    PorosityReport, Region,
};
pub use growth::{growth_exponent_fit, nondegeneracy_check, GrowthFit, NondegeneracyEntry, NondegeneracyReport};
pub use regularity::{energy_e_eps, o_delta_measure, w22_quotient_energy, ODeltaReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Grid, Point, ScalarField};
use crate::solver::Solution;

/// Coincidence mask `u ≤ tol` and the cells across which it changes.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeBoundarySet {
    grid: Grid,
    pub boundary_cells: Vec<usize>,
    pub coincidence_mask: Vec<bool>,
    pub tol_u_zero: f64,
}

impl FreeBoundarySet {
    pub fn from_mask(grid: Grid, mask: Vec<bool>, tol_u_zero: f64) -> Result<Self> {
        if mask.len() != grid.node_count() {
            return Err(Error::GridMismatch(format!(
                "mask has {} entries, grid has {} nodes",
                mask.len(),
                grid.node_count()
            )));
        }
        let k = grid.nodes_per_cell();
        let boundary_cells = (0..grid.cell_count())
            .filter(|&c| {
                let nodes = grid.cell_nodes(c);
                let first = mask[nodes[0]];
                nodes[1..k].iter().any(|&n| mask[n] != first)
            })
            .collect();
        Ok(FreeBoundarySet {
            grid,
            boundary_cells,
            coincidence_mask: mask,
            tol_u_zero,
        })
    }

    pub fn from_field(u: &ScalarField, tol_u_zero: f64) -> Self {
        let mask = u.values().iter().map(|&v| v <= tol_u_zero).collect();
        Self::from_mask(*u.grid(), mask, tol_u_zero).expect("mask built on the field's grid")
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn is_empty(&self) -> bool {
        self.boundary_cells.is_empty()
    }

    /// Centers of the boundary cells.
    pub fn points(&self) -> Vec<Point> {
        self.boundary_cells.iter().map(|&c| self.grid.cell_center(c)).collect()
    }

    /// The boundary point closest to `x`.
    pub fn nearest_point(&self, x: Point) -> Option<Point> {
        self.points().into_iter().min_by(|a, b| {
            self.grid
                .distance(*a, x)
                .total_cmp(&self.grid.distance(*b, x))
        })
    }
}

pub fn extract_free_boundary(sol: &Solution) -> FreeBoundarySet {
    FreeBoundarySet::from_mask(*sol.grid(), sol.active_mask.clone(), sol.tol_u_zero)
        .expect("solution mask matches its grid")
}

/// Nodes within distance `r` of `center`.
pub(crate) fn nodes_in_ball(grid: &Grid, center: Point, r: f64) -> Vec<usize> {
    let range = |a: usize| -> (usize, usize) {
        let h = grid.h(a);
        let lo = ((center[a] - r - grid.lo(a)) / h).floor().max(0.0) as usize;
        let hi = (((center[a] + r - grid.lo(a)) / h).ceil().max(0.0) as usize).min(grid.n_cells(a));
        (lo, hi)
    };
    let (i0, i1) = range(0);
    let (j0, j1) = if grid.dim() == 2 { range(1) } else { (0, 0) };
    let mut out = Vec::new();
    for j in j0..=j1 {
        for i in i0..=i1 {
            let n = if grid.dim() == 1 { i } else { grid.node_index(i, j) };
            if grid.distance(grid.node_position(n), center) <= r * (1.0 + 1e-12) {
                out.push(n);
            }
        }
    }
    out
}

/// Cells whose center lies within distance `r` of `center`.
pub(crate) fn cells_in_ball(grid: &Grid, center: Point, r: f64) -> Vec<usize> {
    (0..grid.cell_count())
        .filter(|&c| grid.distance(grid.cell_center(c), center) <= r * (1.0 + 1e-12))
        .collect()
}

pub(crate) fn snap(grid: &Grid, x: Point) -> Point {
    grid.node_position(grid.nearest_node(x))
}

/// Least-squares line `y = slope·x + intercept`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// Free-boundary perimeter measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerimeterReport {
    /// Discrete total variation of `Au` over the analysis region.
    pub bv_norm: f64,
    /// Total variation of `χ_{u > level}`.
    pub perimeter: f64,
    pub box_count_sum: usize,
    pub box_estimate: f64,
    pub level: f64,
}

/// Everything measured on one solution; absent entries were not requested or failed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FreeBoundaryReport {
    pub growth_fits: Vec<GrowthFit>,
    pub nondegeneracy: Option<NondegeneracyReport>,
    pub porosity: Option<PorosityReport>,
    pub o_delta_slopes: Vec<ODeltaReport>,
    pub e_eps: Vec<(f64, f64)>,
    pub hausdorff: Option<BoxCount>,
    pub perimeter: Option<PerimeterReport>,
    pub w22_energy: Vec<(f64, f64)>,
    pub complementarity: Option<f64>,
}

pub const TABLE_HEADER: &str = "quantity,point_x,point_y,r,value";

impl FreeBoundaryReport {
    /// Per-radius table with header [`TABLE_HEADER`].
    pub fn table(&self) -> String {
        let mut out = String::from(TABLE_HEADER);
        out.push('\n');
        let mut row = |q: &str, p: Point, r: f64, v: f64| {
            out.push_str(&format!("{q},{:?},{:?},{:?},{:?}\n", p[0], p[1], r, v));
        };
        let nan = f64::NAN;
        for g in &self.growth_fits {
            row("growth_exponent", g.point, nan, g.exponent);
            row("growth_constant", g.point, nan, g.constant);
            for (r, s) in g.radii_used.iter().zip(&g.sup_values) {
                row("growth_sup", g.point, *r, *s);
            }
        }
        if let Some(nd) = &self.nondegeneracy {
            for e in &nd.entries {
                row("nondegeneracy_ratio", e.point, e.r, e.ratio);
            }
        }
        if let Some(p) = &self.porosity {
            for (r, d) in &p.per_radius {
                row("porosity", [nan, nan], *r, *d);
            }
        }
        for o in &self.o_delta_slopes {
            for (d, m) in &o.measures {
                row(&format!("o_delta_measure[delta={d:?}]"), o.point, o.r, *m);
            }
            row("o_delta_slope", o.point, o.r, o.slope);
            row("o_delta_intercept", o.point, o.r, o.intercept);
        }
        for (eps, e) in &self.e_eps {
            row(&format!("e_eps[eps={eps:?}]"), [nan, nan], nan, *e);
        }
        if let Some(b) = &self.hausdorff {
            row("box_count", b.center, b.r, b.count as f64);
            row("box_estimate", b.center, b.r, b.estimate);
        }
        if let Some(p) = &self.perimeter {
            row("bv_norm", [nan, nan], nan, p.bv_norm);
            row("perimeter", [nan, nan], nan, p.perimeter);
        }
        for (tau, e) in &self.w22_energy {
            row("w22_energy", [nan, nan], *tau, *e);
        }
        if let Some(r2) = self.complementarity {
            row("complementarity_r2", [nan, nan], nan, r2);
        }
        out
    }
}
