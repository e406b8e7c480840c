use serde::{Deserialize, Serialize};

use super::Solution;
use crate::error::Result;
use crate::fields::{ensure_same_grid, ScalarField};
use crate::operator::{OperatorSpec, Stencil};

/// Discrete complementarity diagnostics, normalized by `‖f‖_∞` (or 1 when `f ≡ 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplementarityReport {
    /// `max |Au - f|` over interior nodes with `u > tol_u_zero`.
    pub r1: f64,
    /// Discrete `L¹` norm of `Au - f χ_{u > tol}` over the interior.
    pub r2: f64,
    /// `r2` before normalization.
    pub r2_raw: f64,
    /// Largest violation of `f χ_{u > tol} ≤ Au ≤ f`.
    pub r3: f64,
    pub f_scale: f64,
    pub tol_u_zero: f64,
}

pub fn complementarity_report(
    spec: &OperatorSpec,
    sol: &Solution,
    f: &ScalarField,
) -> Result<ComplementarityReport> {
    ensure_same_grid(spec.grid(), sol.grid())?;
    ensure_same_grid(spec.grid(), f.grid())?;
    let grid = *spec.grid();
    let st = Stencil::new(spec, None);
    let u = sol.u.values();
    let mut au = vec![0.0; u.len()];
    st.apply(u, &mut au);
    let tol = sol.tol_u_zero;
    let f_sup = f.sup_norm();
    let scale = if f_sup > 0.0 { f_sup } else { 1.0 };
    let (mut r1, mut l1, mut r3) = (0.0f64, 0.0, 0.0f64);
    for n in grid.interior_nodes() {
        let fi = f.get(n);
        let positive = u[n] > tol;
        if positive {
            r1 = r1.max((au[n] - fi).abs());
        }
        let chi = if positive { fi } else { 0.0 };
        l1 += (au[n] - chi).abs();
        r3 = r3.max(au[n] - fi).max(chi - au[n]);
    }
    let r2_raw = l1 * grid.cell_volume();
    Ok(ComplementarityReport {
        r1: r1 / scale,
        r2: r2_raw / scale,
        r2_raw,
        r3: r3 / scale,
        f_scale: f_sup,
        tol_u_zero: tol,
    })
}
