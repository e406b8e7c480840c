//! The quasilinear flux `a(x, η) = M(x) (κ + |η|²)^{(p(x)-2)/2} η`, its penalized
//! variant, the discrete divergence and a sampled verifier of the structural bounds.
//!
//! The discrete operator is the negative gradient of a corner-quadrature energy:
//! every cell carries the mean of its nodal `p` and `M`, and the integrand is
//! averaged over the four corner gradients of the cell (1D: the edge gradient).
//! For `p ≡ 2, M ≡ 1` this reproduces the standard 3- and 5-point Laplacians.

mod json;
mod stencil;
mod structural;

pub use json::{CoefficientDoc, ExponentDoc, OperatorDoc};
pub use stencil::Stencil;
pub use structural::{
    verify_structural, CallbackFlux, Flux, InequalityCheck, PenalizedFlux, StructuralConstants,
    StructuralReport, VerifyOptions,
};

use crate::error::{Error, Result};
use crate::fields::{ensure_same_grid, ExponentField, Grid, Point, ScalarField, VectorField};

pub const DEFAULT_ETA_FLOOR: f64 = 1e-10;

/// The model operator on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    p: ExponentField,
    m: ScalarField,
    kappa: f64,
    eta_floor: f64,
    m_lo: f64,
    m_hi: f64,
}

impl OperatorSpec {
    pub fn new(p: ExponentField, m: ScalarField, kappa: f64, eta_floor: f64) -> Result<Self> {
        ensure_same_grid(p.grid(), m.grid())?;
        if !(0.0..=1.0).contains(&kappa) {
            return Err(Error::InvalidOperator(format!(
                "kappa must lie in [0, 1], got {kappa}"
            )));
        }
        if !(eta_floor > 0.0 && eta_floor.is_finite()) {
            return Err(Error::InvalidOperator(format!(
                "eta_floor must be > 0, got {eta_floor}"
            )));
        }
        let (m_lo, m_hi) = (m.min(), m.max());
        if !(m_lo > 0.0) {
            return Err(Error::InvalidOperator(format!(
                "coefficient M must be positive, min is {m_lo}"
            )));
        }
        Ok(OperatorSpec {
            p,
            m,
            kappa,
            eta_floor,
            m_lo,
            m_hi,
        })
    }

    /// Constant exponent `p`, `M ≡ 1`.
    pub fn p_laplacian(grid: Grid, p: f64, kappa: f64) -> Result<Self> {
        Self::new(
            ExponentField::constant(grid, p)?,
            ScalarField::constant(grid, 1.0),
            kappa,
            DEFAULT_ETA_FLOOR,
        )
    }

    pub fn laplacian(grid: Grid) -> Result<Self> {
        Self::p_laplacian(grid, 2.0, 0.0)
    }

    pub fn grid(&self) -> &Grid {
        self.p.grid()
    }

    pub fn p(&self) -> &ExponentField {
        &self.p
    }

    pub fn m(&self) -> &ScalarField {
        &self.m
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn eta_floor(&self) -> f64 {
        self.eta_floor
    }

    pub fn m_bounds(&self) -> (f64, f64) {
        (self.m_lo, self.m_hi)
    }

    pub fn exponent_at(&self, x: Point) -> f64 {
        self.p.eval(x)
    }

    pub fn coefficient_at(&self, x: Point) -> f64 {
        self.m.interpolate(x)
    }

    /// Pointwise law at `x`.
    pub fn law_at(&self, x: Point) -> Law {
        Law::new(
            self.coefficient_at(x),
            self.exponent_at(x),
            self.kappa,
            self.eta_floor,
        )
    }

    /// The same operator resampled onto another grid.
    pub fn resampled(&self, grid: Grid) -> Result<Self> {
        if grid == *self.grid() {
            return Ok(self.clone());
        }
        let p = self.p.as_scalar_field().resample(grid).into_values();
        let p = ExponentField::from_values(grid, p)?;
        Self::new(p, self.m.resample(grid), self.kappa, self.eta_floor)
    }
}

/// Penalization parameters for `a_ε = a + (ε c0 / n)(ε + |η|²)^{(p-2)/2} η`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalty {
    pub eps: f64,
    pub c0: f64,
}

impl Penalty {
    pub fn new(eps: f64, c0: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidOperator(format!(
                "eps must lie in (0, 1), got {eps}"
            )));
        }
        if !(c0 > 0.0) {
            return Err(Error::InvalidOperator(format!("c0 must be > 0, got {c0}")));
        }
        Ok(Penalty { eps, c0 })
    }

    /// The added term as a law of the same family with `κ = ε`.
    pub fn law(&self, p: f64, dim: usize) -> Law {
        Law::new(self.eps * self.c0 / dim as f64, p, self.eps, 0.0)
    }
}

/// `η ↦ m (κ + |η|²)^{(p-2)/2} η` with the weight frozen at `floor^{p-2}`
/// when `κ + |η|² < floor²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Law {
    pub m: f64,
    pub p: f64,
    pub kappa: f64,
    floor2: f64,
    w_floor: f64,
}

impl Law {
    pub fn new(m: f64, p: f64, kappa: f64, floor: f64) -> Self {
        let floor2 = floor * floor;
        let w_floor = if floor2 > 0.0 {
            floor2.powf(0.5 * (p - 2.0))
        } else {
            0.0
        };
        Law {
            m,
            p,
            kappa,
            floor2,
            w_floor,
        }
    }

    #[inline]
    fn floored(&self, s: f64) -> bool {
        s < self.floor2
    }

    /// Scalar weight `(κ + t)^{(p-2)/2}` at `t = |η|²`.
    #[inline]
    pub fn weight(&self, t: f64) -> f64 {
        if self.p == 2.0 {
            return 1.0;
        }
        let s = self.kappa + t;
        if self.floored(s) {
            self.w_floor
        } else {
            s.powf(0.5 * (self.p - 2.0))
        }
    }

    #[inline]
    pub fn flux(&self, eta: Point) -> Point {
        let w = self.m * self.weight(eta[0] * eta[0] + eta[1] * eta[1]);
        [w * eta[0], w * eta[1]]
    }

    /// Flux and its η-Jacobian.
    #[inline]
    pub fn flux_and_jacobian(&self, eta: Point) -> (Point, [[f64; 2]; 2]) {
        let t = eta[0] * eta[0] + eta[1] * eta[1];
        if self.p == 2.0 {
            let m = self.m;
            return ([m * eta[0], m * eta[1]], [[m, 0.0], [0.0, m]]);
        }
        let s = self.kappa + t;
        if self.floored(s) {
            let w = self.m * self.w_floor;
            return ([w * eta[0], w * eta[1]], [[w, 0.0], [0.0, w]]);
        }
        let w = self.m * s.powf(0.5 * (self.p - 2.0));
        let c = w * (self.p - 2.0) / s;
        let j = [
            [w + c * eta[0] * eta[0], c * eta[0] * eta[1]],
            [c * eta[1] * eta[0], w + c * eta[1] * eta[1]],
        ];
        ([w * eta[0], w * eta[1]], j)
    }

    /// Potential `Φ(η)` with `∇Φ = flux` and `Φ(0) = 0`.
    pub fn energy(&self, eta: Point) -> f64 {
        let t = eta[0] * eta[0] + eta[1] * eta[1];
        if self.p == 2.0 {
            return 0.5 * self.m * t;
        }
        let p = self.p;
        let prim = |s: f64| s.powf(0.5 * p) / p;
        if self.kappa >= self.floor2 {
            return self.m * (prim(self.kappa + t) - prim(self.kappa));
        }
        let t_star = self.floor2 - self.kappa;
        if t <= t_star {
            0.5 * self.m * self.w_floor * t
        } else {
            self.m * (0.5 * self.w_floor * t_star + prim(self.kappa + t) - prim(self.floor2))
        }
    }
}

/// `a(x, η)` for the model operator.
pub fn flux(spec: &OperatorSpec, x: Point, eta: Point) -> Point {
    spec.law_at(x).flux(eta)
}

/// `a_ε(x, η)` with the penalization constant `c0` taken from `constants`.
pub fn flux_penalized(
    spec: &OperatorSpec,
    constants: &StructuralConstants,
    eps: f64,
    x: Point,
    eta: Point,
) -> Point {
    let a = flux(spec, x, eta);
    let pen = Law::new(
        eps * constants.c0 / spec.grid().dim() as f64,
        spec.exponent_at(x),
        eps,
        0.0,
    )
    .flux(eta);
    [a[0] + pen[0], a[1] + pen[1]]
}

/// Discrete `Au` at interior nodes; boundary nodes are set to zero.
pub fn divergence_of_flux(
    spec: &OperatorSpec,
    u: &ScalarField,
    penalty: Option<Penalty>,
) -> Result<ScalarField> {
    ensure_same_grid(spec.grid(), u.grid())?;
    let st = Stencil::new(spec, penalty);
    let mut out = vec![0.0; u.values().len()];
    st.apply(u.values(), &mut out);
    ScalarField::new(*u.grid(), out)
}

/// Discrete energy `∫ Φ(x, ∇u)` whose negative gradient (per unit cell volume) is `Au`.
pub fn discrete_energy(spec: &OperatorSpec, u: &ScalarField, penalty: Option<Penalty>) -> Result<f64> {
    ensure_same_grid(spec.grid(), u.grid())?;
    Ok(Stencil::new(spec, penalty).energy(u.values()))
}

/// Face-centered flux: each face value averages the corner fluxes that use that face's difference.
pub fn face_flux(spec: &OperatorSpec, u: &ScalarField, penalty: Option<Penalty>) -> Result<VectorField> {
    ensure_same_grid(spec.grid(), u.grid())?;
    Stencil::new(spec, penalty).face_flux(u.values())
}
