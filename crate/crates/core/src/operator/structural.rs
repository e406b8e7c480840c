use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Law, OperatorSpec};
use crate::error::{Error, Result};
use crate::fields::{interpolant_lipschitz, Point};

/// Floor keeping derived constants strictly positive for x-independent operators.
const POSITIVE_FLOOR: f64 = 1e-12;
/// Relative and absolute slack absorbing finite-difference noise in the comparisons.
const REL_SLACK: f64 = 1e-6;
const ABS_SLACK: f64 = 1e-6;

/// A flux `a(x, η)` over a box, as seen by the structural verifier.
pub trait Flux: Sync {
    fn dim(&self) -> usize;
    /// Lower and upper corners of the box.
    fn bounds(&self) -> (Point, Point);
    fn flux(&self, x: Point, eta: Point) -> Point;
    fn exponent(&self, x: Point) -> f64;
    fn kappa(&self) -> f64;
    fn constant_exponent(&self) -> bool;
}

impl Flux for OperatorSpec {
    fn dim(&self) -> usize {
        self.grid().dim()
    }

    fn bounds(&self) -> (Point, Point) {
        let g = self.grid();
        let hi1 = if g.dim() == 2 { g.hi(1) } else { 0.0 };
        let lo1 = if g.dim() == 2 { g.lo(1) } else { 0.0 };
        ([g.lo(0), lo1], [g.hi(0), hi1])
    }

    fn flux(&self, x: Point, eta: Point) -> Point {
        super::flux(self, x, eta)
    }

    fn exponent(&self, x: Point) -> f64 {
        self.exponent_at(x)
    }

    fn kappa(&self) -> f64 {
        OperatorSpec::kappa(self)
    }

    fn constant_exponent(&self) -> bool {
        self.p().is_constant()
    }
}

/// `a_ε`, checked against the structural bounds with `κ = ε`.
pub struct PenalizedFlux<'a> {
    pub spec: &'a OperatorSpec,
    pub c0: f64,
    pub eps: f64,
}

impl Flux for PenalizedFlux<'_> {
    fn dim(&self) -> usize {
        self.spec.grid().dim()
    }

    fn bounds(&self) -> (Point, Point) {
        Flux::bounds(self.spec)
    }

    fn flux(&self, x: Point, eta: Point) -> Point {
        let a = super::flux(self.spec, x, eta);
        let p = self.spec.exponent_at(x);
        let b = Law::new(self.eps * self.c0 / self.dim() as f64, p, self.eps, 0.0).flux(eta);
        [a[0] + b[0], a[1] + b[1]]
    }

    fn exponent(&self, x: Point) -> f64 {
        self.spec.exponent_at(x)
    }

    fn kappa(&self) -> f64 {
        self.eps
    }

    fn constant_exponent(&self) -> bool {
        self.spec.p().is_constant()
    }
}

type FluxFn = dyn Fn(Point, Point) -> Point + Send + Sync;
type ExponentFn = dyn Fn(Point) -> f64 + Send + Sync;

/// A user-supplied flux for the verifier.
pub struct CallbackFlux {
    pub dim: usize,
    pub lo: Point,
    pub hi: Point,
    pub kappa: f64,
    pub constant_exponent: bool,
    pub flux: Box<FluxFn>,
    pub exponent: Box<ExponentFn>,
}

impl Flux for CallbackFlux {
    fn dim(&self) -> usize {
        self.dim
    }

    fn bounds(&self) -> (Point, Point) {
        (self.lo, self.hi)
    }

    fn flux(&self, x: Point, eta: Point) -> Point {
        (self.flux)(x, eta)
    }

    fn exponent(&self, x: Point) -> f64 {
        (self.exponent)(x)
    }

    fn kappa(&self) -> f64 {
        self.kappa
    }

    fn constant_exponent(&self) -> bool {
        self.constant_exponent
    }
}

/// Constants of the ellipticity, boundedness, spatial and second-order bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuralConstants {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

impl StructuralConstants {
    pub const MARGIN: f64 = 1.05;

    pub fn new(c0: f64, c1: f64, c2: f64, c3: f64, c4: f64) -> Result<Self> {
        if [c0, c1, c2, c3, c4].iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(Error::InvalidOperator(
                "structural constants must be finite and > 0".into(),
            ));
        }
        Ok(StructuralConstants { c0, c1, c2, c3, c4 })
    }

    /// Computable constants for the model operator.
    ///
    /// `c2`, `c3`, `c4` come from the Lipschitz and mixed second derivative of the
    /// bilinear interpolants of `p` and `M`; `c3` and `c4` are only meaningful for
    /// constant `p`.
    pub fn for_model(spec: &OperatorSpec) -> Self {
        let g = spec.grid();
        let n = g.dim() as f64;
        let (m_lo, m_hi) = spec.m_bounds();
        let p_lo = spec.p().p_minus();
        let p_hi = spec.p().p_plus();
        let l_m = interpolant_lipschitz(g, spec.m().values());
        let l_p = interpolant_lipschitz(g, spec.p().values());
        let mut h_m: f64 = 0.0;
        if g.dim() == 2 {
            let m = spec.m().values();
            for c in 0..g.cell_count() {
                let [bl, br, tl, tr] = g.cell_nodes(c);
                h_m = h_m.max((m[tr] - m[tl] - m[br] + m[bl]).abs() / g.cell_volume());
            }
        }
        let pos = |v: f64| v.max(POSITIVE_FLOOR);
        StructuralConstants {
            c0: m_lo * (p_lo - 1.0).min(1.0),
            c1: m_hi * (p_hi - 1.0).max(1.0) * n * Self::MARGIN,
            c2: pos(l_m.max(m_hi * l_p) * Self::MARGIN),
            c3: pos((n - 1.0) * n * h_m * Self::MARGIN),
            c4: pos(n.powf(1.5) * l_m * (p_hi - 1.0).max(1.0) * Self::MARGIN),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub samples: usize,
    pub seed: u64,
    /// `|η|` is drawn log-uniformly from this range.
    pub eta_range: (f64, f64),
    /// Maximum distance of the paired point in the spatial check, as a fraction of the box diameter.
    pub pair_radius: f64,
    pub second_order: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            samples: 10_000,
            seed: 0,
            eta_range: (1e-3, 1e2),
            pair_radius: 0.05,
            second_order: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub name: String,
    pub constant: f64,
    /// Smallest sampled ratio for lower bounds, largest for upper bounds.
    pub worst_ratio: f64,
    pub lower_bound: bool,
    pub passed: bool,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralReport {
    pub checks: Vec<InequalityCheck>,
}

impl StructuralReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&InequalityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Tracker {
    name: &'static str,
    constant: f64,
    lower: bool,
    worst: f64,
    n: usize,
}

impl Tracker {
    fn new(name: &'static str, constant: f64, lower: bool) -> Self {
        let worst = if lower { f64::INFINITY } else { 0.0 };
        Tracker {
            name,
            constant,
            lower,
            worst,
            n: 0,
        }
    }

    fn push(&mut self, r: f64) {
        if !r.is_finite() {
            return;
        }
        self.n += 1;
        self.worst = if self.lower {
            self.worst.min(r)
        } else {
            self.worst.max(r)
        };
    }

    fn finish(self) -> InequalityCheck {
        let passed = if self.lower {
            self.worst >= self.constant * (1.0 - REL_SLACK)
        } else {
            self.worst <= self.constant * (1.0 + REL_SLACK) + ABS_SLACK
        };
        InequalityCheck {
            name: self.name.into(),
            constant: self.constant,
            worst_ratio: self.worst,
            lower_bound: self.lower,
            passed,
            samples: self.n,
        }
    }
}

fn jacobian_eta<F: Flux + ?Sized>(a: &F, x: Point, eta: Point) -> [[f64; 2]; 2] {
    let d = 1e-6 * eta[0].hypot(eta[1]).max(1.0);
    let mut j = [[0.0; 2]; 2];
    for k in 0..a.dim() {
        let mut ep = eta;
        let mut em = eta;
        ep[k] += d;
        em[k] -= d;
        let (fp, fm) = (a.flux(x, ep), a.flux(x, em));
        for i in 0..a.dim() {
            j[i][k] = (fp[i] - fm[i]) / (2.0 * d);
        }
    }
    j
}

/// Samples `(x, η, ξ)` and reports the worst ratio of each structural inequality.
pub fn verify_structural<F: Flux + ?Sized>(
    a: &F,
    constants: &StructuralConstants,
    opts: &VerifyOptions,
) -> Result<StructuralReport> {
    if opts.samples == 0 {
        return Err(Error::Precondition("sample_count must be >= 1".into()));
    }
    let (e_lo, e_hi) = opts.eta_range;
    if !(e_lo > 0.0 && e_hi >= e_lo) {
        return Err(Error::Precondition("eta_range must satisfy 0 < lo <= hi".into()));
    }
    let n = a.dim();
    let (lo, hi) = a.bounds();
    let diam = (0..n).map(|k| (hi[k] - lo[k]).powi(2)).sum::<f64>().sqrt();
    let kappa = a.kappa();
    let const_p = a.constant_exponent();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut ell = Tracker::new("ellipticity", constants.c0, true);
    let mut bnd = Tracker::new("boundedness", constants.c1, false);
    let mut spa = Tracker::new("spatial_lipschitz", constants.c2, false);
    let mut xx = Tracker::new("second_order_xx", constants.c3, false);
    let mut ex = Tracker::new("second_order_eta_x", constants.c4, false);

    let unit = |rng: &mut ChaCha8Rng| -> Point {
        if n == 1 {
            return [if rng.random::<bool>() { 1.0 } else { -1.0 }, 0.0];
        }
        let t = rng.random_range(0.0..std::f64::consts::TAU);
        [t.cos(), t.sin()]
    };
    let clamp = |x: Point, margin: f64| -> Point {
        let mut y = x;
        for k in 0..n {
            y[k] = y[k].clamp(lo[k] + margin, hi[k] - margin);
        }
        y
    };

    for _ in 0..opts.samples {
        let mut x = [0.0; 2];
        for k in 0..n {
            x[k] = rng.random_range(lo[k]..=hi[k]);
        }
        let mag = (e_lo.ln() + rng.random::<f64>() * (e_hi / e_lo).ln()).exp();
        let dir = unit(&mut rng);
        let eta = [mag * dir[0], mag * dir[1]];
        let xi = unit(&mut rng);
        let p = a.exponent(x);
        let s = kappa + mag * mag;
        let w = s.powf(0.5 * (p - 2.0));

        let j = jacobian_eta(a, x, eta);
        let mut quad = 0.0;
        let mut abs_sum = 0.0;
        for i in 0..n {
            for k in 0..n {
                quad += j[i][k] * xi[i] * xi[k];
                abs_sum += j[i][k].abs();
            }
        }
        ell.push(quad / w);
        bnd.push(abs_sum / w);

        let r = rng.random_range(0.0..=opts.pair_radius) * diam;
        let d2 = unit(&mut rng);
        let x2 = clamp([x[0] + r * d2[0], x[1] + r * d2[1]], 0.0);
        let dist = ((x2[0] - x[0]).powi(2) + (x2[1] - x[1]).powi(2)).sqrt();
        if dist > 0.0 {
            let (f1, f2) = (a.flux(x, eta), a.flux(x2, eta));
            let num = (f1[0] - f2[0]).hypot(f1[1] - f2[1]);
            let den = if const_p {
                dist * s.powf(0.5 * (p - 1.0))
            } else {
                let p2 = a.exponent(x2);
                dist * (s.powf(0.5 * (p - 1.0)) + s.powf(0.5 * (p2 - 1.0)))
                    * (1.0 + (0.5 * s.ln()).abs())
            };
            spa.push(num / den);
        }

        if opts.second_order {
            let hx = 1e-3 * diam;
            let xc = clamp(x, 2.0 * hx);
            let shift = |x: Point, k: usize, d: f64| {
                let mut y = x;
                y[k] += d;
                y
            };
            let mut sum_xx = 0.0;
            for i in 0..n {
                for jx in 0..n {
                    let v = |di: f64, dj: f64| a.flux(shift(shift(xc, i, di), jx, dj), eta)[i];
                    let d2 = (v(hx, hx) - v(hx, -hx) - v(-hx, hx) + v(-hx, -hx)) / (4.0 * hx * hx);
                    sum_xx += d2.abs();
                }
            }
            let pc = a.exponent(xc);
            xx.push(sum_xx / s.powf(0.5 * (pc - 1.0)));
            let mut sum_ex = 0.0;
            for i in 0..n {
                let jp = jacobian_eta(a, shift(xc, i, hx), eta);
                let jm = jacobian_eta(a, shift(xc, i, -hx), eta);
                for k in 0..n {
                    for jj in 0..n {
                        sum_ex += ((jp[k][jj] - jm[k][jj]) / (2.0 * hx)).abs();
                    }
                }
            }
            ex.push(sum_ex / s.powf(0.5 * (pc - 2.0)));
        }
    }

    let mut checks = vec![ell.finish(), bnd.finish(), spa.finish()];
    if opts.second_order {
        checks.push(xx.finish());
        checks.push(ex.finish());
    }
    Ok(StructuralReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{ExponentField, Grid, ScalarField};
    use crate::operator::DEFAULT_ETA_FLOOR;

    fn opts(samples: usize) -> VerifyOptions {
        VerifyOptions {
            samples,
            seed: 7,
            ..Default::default()
        }
    }

    #[test]
    fn laplacian_has_unit_ellipticity() {
        let s = OperatorSpec::laplacian(Grid::unit(2, 8).unwrap()).unwrap();
        let c = StructuralConstants::for_model(&s);
        assert_eq!(c.c0, 1.0);
        let r = verify_structural(&s, &c, &opts(500)).unwrap();
        let e = r.check("ellipticity").unwrap();
        assert!((e.worst_ratio - 1.0).abs() < 1e-8);
        assert!(r.all_passed());
        assert_eq!(r.check("spatial_lipschitz").unwrap().worst_ratio, 0.0);
    }

    #[test]
    fn p3_ellipticity_holds_with_unit_constant() {
        let s = OperatorSpec::p_laplacian(Grid::unit(2, 8).unwrap(), 3.0, 0.0).unwrap();
        let c = StructuralConstants::new(1.0, 2.0 * 2.0 * 1.05, 1e-12, 1e-12, 1e-12).unwrap();
        let r = verify_structural(&s, &c, &opts(2000)).unwrap();
        let e = r.check("ellipticity").unwrap();
        assert!(e.passed && e.worst_ratio >= 1.0 - 1e-6, "{e:?}");
        // the larger eigenvalue is (p - 1)|η|^{p-2}
        assert!(r.check("boundedness").unwrap().worst_ratio <= 4.0 * (1.0 + 1e-6));
    }

    #[test]
    fn zero_samples_rejected() {
        let s = OperatorSpec::laplacian(Grid::unit(1, 8).unwrap()).unwrap();
        let c = StructuralConstants::for_model(&s);
        assert!(verify_structural(&s, &c, &opts(0)).is_err());
    }

    #[test]
    fn variable_model_passes_with_computed_constants() {
        let g = Grid::unit(2, 16).unwrap();
        let p = ExponentField::affine(g, 1.5, [1.5, 0.0], 1.5, 3.0).unwrap();
        let m = ScalarField::from_fn(g, |x| 0.5 + 1.5 * x[1]).unwrap();
        for kappa in [0.0, 0.5] {
            let s = OperatorSpec::new(p.clone(), m.clone(), kappa, DEFAULT_ETA_FLOOR).unwrap();
            let c = StructuralConstants::for_model(&s);
            let r = verify_structural(&s, &c, &opts(4000)).unwrap();
            assert!(r.all_passed(), "{r:?}");
        }
    }

    #[test]
    fn callback_flux_is_accepted() {
        let cb = CallbackFlux {
            dim: 2,
            lo: [0.0, 0.0],
            hi: [1.0, 1.0],
            kappa: 0.0,
            constant_exponent: true,
            flux: Box::new(|_, e| [2.0 * e[0], 2.0 * e[1]]),
            exponent: Box::new(|_| 2.0),
        };
        let c = StructuralConstants::new(2.0, 4.0, 1.0, 1.0, 1.0).unwrap();
        let r = verify_structural(&cb, &c, &opts(100)).unwrap();
        assert!(r.all_passed());
        let c = StructuralConstants::new(2.5, 4.0, 1.0, 1.0, 1.0).unwrap();
        assert!(!verify_structural(&cb, &c, &opts(100)).unwrap().all_passed());
    }

    #[test]
    fn second_order_checks_on_affine_coefficient() {
        let g = Grid::unit(2, 8).unwrap();
        let p = ExponentField::constant(g, 2.5).unwrap();
        let m = ScalarField::from_fn(g, |x| 1.0 + 0.5 * x[0] + 0.25 * x[1]).unwrap();
        let s = OperatorSpec::new(p, m, 0.1, DEFAULT_ETA_FLOOR).unwrap();
        let c = StructuralConstants::for_model(&s);
        let o = VerifyOptions {
            second_order: true,
            ..opts(500)
        };
        let r = verify_structural(&s, &c, &o).unwrap();
        assert_eq!(r.checks.len(), 5);
        assert!(r.all_passed(), "{r:?}");
    }
}
