use serde::{Deserialize, Serialize};

use super::{fit_line, nodes_in_ball, snap};
use crate::error::{Error, Result};
use crate::fields::{Point, ScalarField};
use crate::operator::OperatorSpec;

const MIN_RADII: usize = 4;
/// Largest admissible max/min ratio of the per-radius nondegeneracy minima.
const NONDEGENERACY_SPREAD: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub point: Point,
    pub exponent: f64,
    pub constant: f64,
    pub radii_used: Vec<f64>,
    pub sup_values: Vec<f64>,
}

/// Fits `sup_{B_r(x0)} u ≈ C r^α` by least squares in log-log coordinates.
///
/// Radii whose ball leaves the box or on which the supremum vanishes are skipped.
pub fn growth_exponent_fit(u: &ScalarField, x0: Point, radii: &[f64]) -> Result<GrowthFit> {
    let grid = u.grid();
    let y = snap(grid, x0);
    let reach = grid.distance_to_box_boundary(y);
    let mut used = Vec::new();
    let mut sups = Vec::new();
    let mut any_positive = false;
    for &r in radii {
        if !(r > 0.0) || r > reach * (1.0 + 1e-12) {
            continue;
        }
        let s = nodes_in_ball(grid, y, r)
            .into_iter()
            .map(|n| u.get(n))
            .fold(f64::NEG_INFINITY, f64::max);
        if s > 0.0 && s.is_finite() {
            any_positive = true;
            used.push(r);
            sups.push(s);
        }
    }
    if !any_positive && !radii.is_empty() {
        return Err(Error::Analysis(format!(
            "growth fit at ({:.4}, {:.4}): sup u vanishes on every ball",
            y[0], y[1]
        )));
    }
    if used.len() < MIN_RADII {
        return Err(Error::Analysis(format!(
            "growth fit needs at least {MIN_RADII} usable radii, got {}",
            used.len()
        )));
    }
    let lx: Vec<f64> = used.iter().map(|r| r.ln()).collect();
    let ly: Vec<f64> = sups.iter().map(|s| s.ln()).collect();
    let (slope, intercept) = fit_line(&lx, &ly);
    Ok(GrowthFit {
        point: y,
        exponent: slope,
        constant: intercept.exp(),
        radii_used: used,
        sup_values: sups,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NondegeneracyEntry {
    pub point: Point,
    pub r: f64,
    /// Maximum of `u` over the discrete sphere of radius `r`.
    pub m: f64,
    /// `m / r^{q(y)}` with `q = p/(p-1)`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NondegeneracyReport {
    pub entries: Vec<NondegeneracyEntry>,
    pub infimum: f64,
    /// Minimum ratio over points, per radius.
    pub per_radius_min: Vec<(f64, f64)>,
    pub passed: bool,
}

/// Lower growth `sup_{∂B_r(y)} u ≳ r^{q(y)}` at each point and radius.
pub fn nondegeneracy_check(
    u: &ScalarField,
    spec: &OperatorSpec,
    f: &ScalarField,
    points: &[Point],
    radii: &[f64],
) -> Result<NondegeneracyReport> {
    let grid = *u.grid();
    if points.is_empty() || radii.is_empty() {
        return Err(Error::Analysis("nondegeneracy: need points and radii".into()));
    }
    let h = grid.h_mean();
    let tol = 0.0;
    let mut entries = Vec::new();
    for &x in points {
        let y = snap(&grid, x);
        let reach = grid.distance_to_box_boundary(y);
        let rmax = radii.iter().cloned().fold(0.0, f64::max);
        if rmax > reach * (1.0 + 1e-12) {
            return Err(Error::Analysis(format!(
                "nondegeneracy: radius {rmax} exceeds distance {reach:.4} to the domain boundary"
            )));
        }
        let near = nodes_in_ball(&grid, y, h * (grid.dim() as f64).sqrt() * (1.0 + 1e-9));
        if !near.iter().any(|&n| u.get(n) > tol) {
            return Err(Error::Analysis(format!(
                "nondegeneracy: ({:.4}, {:.4}) is not in the closure of the positivity set",
                y[0], y[1]
            )));
        }
        let fmin = nodes_in_ball(&grid, y, rmax)
            .into_iter()
            .map(|n| f.get(n))
            .fold(f64::INFINITY, f64::min);
        if !(fmin > 0.0) {
            return Err(Error::Analysis("nondegeneracy: f must be bounded below by a positive constant".into()));
        }
        let p = spec.exponent_at(y);
        let q = p / (p - 1.0);
        for &r in radii {
            let m = nodes_in_ball(&grid, y, r + 0.5 * h)
                .into_iter()
                .filter(|&n| grid.distance(grid.node_position(n), y) > r - 0.5 * h)
                .map(|n| u.get(n))
                .fold(f64::NEG_INFINITY, f64::max);
            entries.push(NondegeneracyEntry {
                point: y,
                r,
                m,
                ratio: m / r.powf(q),
            });
        }
    }
    let infimum = entries.iter().map(|e| e.ratio).fold(f64::INFINITY, f64::min);
    let per_radius_min: Vec<(f64, f64)> = radii
        .iter()
        .map(|&r| {
            let v = entries
                .iter()
                .filter(|e| e.r == r)
                .map(|e| e.ratio)
                .fold(f64::INFINITY, f64::min);
            (r, v)
        })
        .collect();
    let hi = per_radius_min.iter().map(|x| x.1).fold(0.0, f64::max);
    let passed = infimum > 0.0 && hi / infimum <= NONDEGENERACY_SPREAD;
    Ok(NondegeneracyReport {
        entries,
        infimum,
        per_radius_min,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid;

    #[test]
    fn exact_power_is_recovered() {
        let g = Grid::unit(2, 256).unwrap();
        let x0 = [0.5, 0.5];
        let radii = [0.05, 0.08, 0.12, 0.2, 0.3];
        for q in [1.5, 2.0, 3.0] {
            let u = ScalarField::from_fn(g, |x| 0.7 * g.distance(x, x0).powf(q)).unwrap();
            let fit = growth_exponent_fit(&u, x0, &radii).unwrap();
            assert!((fit.exponent - q).abs() < 0.02 * q, "{q}: {}", fit.exponent);
            assert!((fit.constant - 0.7).abs() < 0.05);
        }
    }

    #[test]
    fn too_few_radii() {
        let g = Grid::unit(1, 64).unwrap();
        let u = ScalarField::from_fn(g, |x| x[0] * x[0]).unwrap();
        assert!(growth_exponent_fit(&u, [0.5, 0.0], &[0.1, 0.2, 0.3]).is_err());
        let z = ScalarField::zeros(g);
        assert!(growth_exponent_fit(&z, [0.5, 0.0], &[0.1, 0.2, 0.3, 0.4]).is_err());
    }

    #[test]
    fn nondegeneracy_of_quadratic() {
        let g = Grid::unit(1, 400).unwrap();
        let spec = OperatorSpec::laplacian(g).unwrap();
        let f = ScalarField::constant(g, 1.0);
        let u = ScalarField::from_fn(g, |x| 0.5 * (0.3 - x[0]).max(0.0).powi(2)).unwrap();
        let rep = nondegeneracy_check(&u, &spec, &f, &[[0.3, 0.0]], &[0.02, 0.05, 0.1]).unwrap();
        assert!((rep.infimum - 0.5).abs() < 1e-9, "{rep:?}");
        assert!(rep.passed);
        assert!(nondegeneracy_check(&u, &spec, &f, &[[0.3, 0.0]], &[0.5]).is_err());
        assert!(nondegeneracy_check(&u, &spec, &f, &[[0.6, 0.0]], &[0.1]).is_err());
    }
}
