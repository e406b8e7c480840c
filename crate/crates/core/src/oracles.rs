//! Closed-form solutions and the rescaling maps used as ground truth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{ExponentField, Grid, Point, ScalarField};
use crate::operator::{divergence_of_flux, OperatorSpec};

/// 1D obstacle problem on `[0, 1]` with constant `p`, `f ≡ λ`, `M ≡ 1`, `κ = 0`.
///
/// The solution vanishes on `[x_l, x_r]` and equals `c_p · dist(x, [x_l, x_r])^q` outside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exact1DObstacle {
    pub p: f64,
    pub lam: f64,
    pub g0: f64,
    pub g1: f64,
}

impl Exact1DObstacle {
    pub fn new(p: f64, lam: f64, g0: f64, g1: f64) -> Result<Self> {
        let o = Exact1DObstacle { p, lam, g0, g1 };
        o.validate()?;
        Ok(o)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(Error::Precondition(format!("p must be > 1, got {}", self.p)));
        }
        if !(self.lam > 0.0) {
            return Err(Error::Precondition(format!("lam must be > 0, got {}", self.lam)));
        }
        if !(self.g0 >= 0.0 && self.g1 >= 0.0) {
            return Err(Error::Precondition("boundary values must be >= 0".into()));
        }
        let (xl, xr) = self.free_boundary();
        if xl >= xr {
            return Err(Error::Precondition(format!(
                "no coincidence interval: x_l = {xl} >= x_r = {xr}"
            )));
        }
        Ok(())
    }

    pub fn q(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub fn c_p(&self) -> f64 {
        self.lam.powf(1.0 / (self.p - 1.0)) * (self.p - 1.0) / self.p
    }

    /// `(x_l, x_r)` from `c_p x_l^q = g0` and `c_p (1 - x_r)^q = g1`.
    pub fn free_boundary(&self) -> (f64, f64) {
        let (c, q) = (self.c_p(), self.q());
        ((self.g0 / c).powf(1.0 / q), 1.0 - (self.g1 / c).powf(1.0 / q))
    }

    pub fn f_value(&self) -> f64 {
        self.lam
    }

    /// Signed distance outside the coincidence interval (0 inside).
    fn dist(&self, x: f64) -> f64 {
        let (xl, xr) = self.free_boundary();
        if x < xl {
            xl - x
        } else if x > xr {
            x - xr
        } else {
            0.0
        }
    }

    pub fn u(&self, x: f64) -> f64 {
        self.c_p() * self.dist(x).powf(self.q())
    }

    pub fn du(&self, x: f64) -> f64 {
        let (xl, _) = self.free_boundary();
        let d = self.dist(x);
        let s = if x < xl { -1.0 } else { 1.0 };
        s * self.c_p() * self.q() * d.powf(self.q() - 1.0)
    }

    /// `(c_p q)^{p-1}`, which equals `λ`.
    pub fn flux_identity(&self) -> f64 {
        (self.c_p() * self.q()).powf(self.p - 1.0)
    }

    pub fn grid(n: usize) -> Result<Grid> {
        Grid::unit(1, n)
    }

    pub fn sample(&self, grid: Grid) -> Result<ScalarField> {
        ScalarField::from_fn(grid, |x| self.u(x[0]))
    }

    /// Operator, right-hand side and boundary data on `grid`.
    pub fn problem(&self, grid: Grid) -> Result<(OperatorSpec, ScalarField, ScalarField)> {
        let spec = OperatorSpec::p_laplacian(grid, self.p, 0.0)?;
        Ok((spec, ScalarField::constant(grid, self.lam), self.sample(grid)?))
    }
}

/// `u*(x) = c |x - center|^q` on `[-1/2, 1/2]^dim`, solving the obstacle problem
/// with constant `f = dim (c q)^{p-1}` and free boundary `{center}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactRadial {
    pub p: f64,
    pub c: f64,
    pub dim: usize,
    #[serde(default)]
    pub center: Point,
}

impl ExactRadial {
    pub fn new(p: f64, c: f64, dim: usize) -> Result<Self> {
        let o = ExactRadial {
            p,
            c,
            dim,
            center: [0.0, 0.0],
        };
        o.validate()?;
        Ok(o)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(Error::Precondition(format!("p must be > 1, got {}", self.p)));
        }
        if !(self.c > 0.0) {
            return Err(Error::Precondition(format!("c must be > 0, got {}", self.c)));
        }
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::Precondition(format!("dim must be 1 or 2, got {}", self.dim)));
        }
        Ok(())
    }

    pub fn q(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub fn f_value(&self) -> f64 {
        self.dim as f64 * (self.c * self.q()).powf(self.p - 1.0)
    }

    fn radius(&self, x: Point) -> f64 {
        let mut r2 = (x[0] - self.center[0]).powi(2);
        if self.dim == 2 {
            r2 += (x[1] - self.center[1]).powi(2);
        }
        r2.sqrt()
    }

    pub fn u(&self, x: Point) -> f64 {
        self.c * self.radius(x).powf(self.q())
    }

    pub fn grad(&self, x: Point) -> Point {
        let r = self.radius(x);
        if r == 0.0 {
            return [0.0, 0.0];
        }
        let k = self.c * self.q() * r.powf(self.q() - 2.0);
        let gy = if self.dim == 2 { k * (x[1] - self.center[1]) } else { 0.0 };
        [k * (x[0] - self.center[0]), gy]
    }

    pub fn grid(&self, n: usize) -> Result<Grid> {
        Grid::cube(self.dim, -0.5, 0.5, n)
    }

    pub fn sample(&self, grid: Grid) -> Result<ScalarField> {
        ScalarField::from_fn(grid, |x| self.u(x))
    }

    pub fn problem(&self, grid: Grid) -> Result<(OperatorSpec, ScalarField, ScalarField)> {
        let spec = OperatorSpec::p_laplacian(grid, self.p, 0.0)?;
        Ok((
            spec,
            ScalarField::constant(grid, self.f_value()),
            self.sample(grid)?,
        ))
    }
}

/// Numerical check of the membership conditions of the normalized class on the unit ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub u_at_center: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub operator_sup: f64,
    pub passed: bool,
}

/// Result of [`rescale_to_unit`].
#[derive(Debug, Clone)]
pub struct Rescaled {
    pub spec: OperatorSpec,
    pub u: ScalarField,
    pub y0: Point,
    pub r: f64,
    pub m: f64,
    pub membership: Membership,
}

impl Rescaled {
    /// Maps back: `u(y) = M R ū((y - y0) / R)`.
    pub fn unscale_at(&self, y: Point) -> f64 {
        let z = [(y[0] - self.y0[0]) / self.r, (y[1] - self.y0[1]) / self.r];
        self.m * self.r * self.u.interpolate(z)
    }
}

/// Blows `u` up around a coincidence point: `ū(z) = u(y0 + R z) / (M R)` with the
/// operator `ā(z, ξ) = a(y0 + R z, M ξ)`, then checks membership numerically.
///
/// `y0` is snapped to the nearest node and `R` to a multiple of the spacing, so the
/// rescaled grid nodes coincide with original nodes.
pub fn rescale_to_unit(
    spec: &OperatorSpec,
    u: &ScalarField,
    f: &ScalarField,
    y0: Point,
    r: f64,
    m: f64,
    tol: f64,
) -> Result<Rescaled> {
    let g = *spec.grid();
    crate::fields::ensure_same_grid(&g, u.grid())?;
    let h = g.h(0);
    if (0..g.dim()).any(|a| (g.h(a) - h).abs() > 1e-12 * h) {
        return Err(Error::Precondition("rescaling needs equal spacing on all axes".into()));
    }
    let k = (r / h).round() as usize;
    if k < 2 {
        return Err(Error::Precondition(format!("R = {r} is below two cells")));
    }
    let r = k as f64 * h;
    let node = g.nearest_node(y0);
    let y0 = g.node_position(node);
    let (i0, j0) = g.node_ij(node);
    for a in 0..g.dim() {
        let c = if a == 0 { i0 } else { j0 };
        if c < k || c + k > g.n_cells(a) {
            return Err(Error::Precondition(
                "ball hypothesis failed: B_R(y0) must lie inside the domain".into(),
            ));
        }
    }
    if u.get(node) > tol {
        return Err(Error::Precondition(format!(
            "free-boundary hypothesis failed: u(y0) = {} exceeds tol {tol}",
            u.get(node)
        )));
    }
    let g_sup = (0..g.node_count())
        .filter(|&n| g.is_boundary_node(n))
        .map(|n| u.get(n))
        .fold(0.0, f64::max);
    if m < g_sup / r * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!(
            "scale hypothesis failed: M = {m} < ||g||_inf / R = {}",
            g_sup / r
        )));
    }
    let lam_sup = f.sup_norm();
    if lam_sup > 0.0 && r > (1.0 / lam_sup) * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "radius hypothesis failed: R = {r} > 1 / ||f||_inf = {}",
            1.0 / lam_sup
        )));
    }

    let zg = Grid::cube(g.dim(), -1.0, 1.0, 2 * k)?;
    let src = |zn: usize| {
        let (zi, zj) = zg.node_ij(zn);
        if g.dim() == 1 {
            i0 + zi - k
        } else {
            g.node_index(i0 + zi - k, j0 + zj - k)
        }
    };
    let pv: Vec<f64> = (0..zg.node_count()).map(|n| spec.p().get(src(n))).collect();
    let mv: Vec<f64> = (0..zg.node_count())
        .map(|n| spec.m().get(src(n)) * m.powf(pv[n] - 1.0))
        .collect();
    let uv: Vec<f64> = (0..zg.node_count()).map(|n| u.get(src(n)) / (m * r)).collect();
    let kappa = spec.kappa() / (m * m);
    if kappa > 1.0 {
        return Err(Error::Precondition(format!(
            "scale hypothesis failed: rescaled kappa {kappa} exceeds 1"
        )));
    }
    let p_bar = ExponentField::from_values(zg, pv)?;
    let spec_bar = OperatorSpec::new(p_bar, ScalarField::new(zg, mv)?, kappa, spec.eta_floor() / m)?;
    let u_bar = ScalarField::new(zg, uv)?;
    let au = divergence_of_flux(&spec_bar, &u_bar, None)?;
    let centre = zg.nearest_node([0.0, 0.0]);
    let membership = {
        let u0 = u_bar.get(centre);
        let (lo, hi) = (u_bar.min(), u_bar.max());
        let sup = au.sup_norm();
        let slack = 1e-9;
        Membership {
            u_at_center: u0,
            u_min: lo,
            u_max: hi,
            operator_sup: sup,
            passed: u0 <= tol / (m * r) && lo >= -slack && hi <= 1.0 + slack && sup <= 1.0 + tol.max(slack),
        }
    };
    Ok(Rescaled {
        spec: spec_bar,
        u: u_bar,
        y0,
        r,
        m,
        membership,
    })
}

/// `a^k(x, ξ) = s^{p_k(x)-1} a(c + 2^{-j} x, ξ / s)` on `[-1, 1]^dim`, centred at the box centre.
pub fn blowup_operator(spec: &OperatorSpec, j: u32, s: f64) -> Result<OperatorSpec> {
    let g = spec.grid();
    let mut c = [0.5 * (g.lo(0) + g.hi(0)), 0.0];
    if g.dim() == 2 {
        c[1] = 0.5 * (g.lo(1) + g.hi(1));
    }
    blowup_operator_at(spec, j, s, c)
}

/// Within the model family the blow-up is again a model operator with
/// `κ_k = κ s²`, `p_k(x) = p(c + 2^{-j} x)` and `M_k(x) = M(c + 2^{-j} x)`.
pub fn blowup_operator_at(spec: &OperatorSpec, j: u32, s: f64, center: Point) -> Result<OperatorSpec> {
    if !(s > 0.0) {
        return Err(Error::Precondition(format!("scale_s must be > 0, got {s}")));
    }
    let g = *spec.grid();
    if j == 0 && s == 1.0 {
        let at_center = (0..g.dim()).all(|a| center[a] == 0.0);
        let unit_box = (0..g.dim()).all(|a| g.lo(a) == -1.0 && g.hi(a) == 1.0);
        if at_center && unit_box {
            return Ok(spec.clone());
        }
    }
    let ns: Vec<usize> = (0..g.dim()).map(|a| g.n_cells(a)).collect();
    let kg = Grid::new(g.dim(), &vec![-1.0; g.dim()], &vec![1.0; g.dim()], &ns)?;
    let t = 0.5f64.powi(j as i32);
    let map = |x: Point| [center[0] + t * x[0], center[1] + t * x[1]];
    let pv: Vec<f64> = (0..kg.node_count())
        .map(|n| spec.exponent_at(map(kg.node_position(n))))
        .collect();
    let p = ExponentField::from_values(kg, pv)?;
    let m = ScalarField::from_fn(kg, |x| spec.coefficient_at(map(x)))?;
    OperatorSpec::new(p, m, spec.kappa() * s * s, spec.eta_floor() * s)
}
