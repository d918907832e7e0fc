//! Pointwise evaluation of G and K off the support, Stieltjes-Perron density
//! recovery, and the semicircle reference density.
//!
//! K is evaluated by inverting the exact rational G of an atomic measure
//! with a bracketed Newton iteration, which is valid on all of (0, inf)
//! rather than only inside the K-series radius. The solve runs in the
//! shifted coordinate y = K(w) - 1/w so that tiny measures at large 1/w do
//! not lose the significant digits of y.

use num_complex::Complex64;
use thiserror::Error;

use crate::measure::AtomicMeasure;

/// Default relative tolerance on |G(x) - w| for K evaluation.
pub const K_EVAL_REL_TOL: f64 = 1e-13;

/// Estimated point mass above which a grid point is flagged as sitting on
/// an atom (quality becomes infinite).
pub const ATOM_MASS_TOL: f64 = 1e-3;

/// True when the raw Stieltjes values behave like an atom under the
/// epsilon sequence: the mass estimate pi*eps*phi stays large instead of
/// shrinking with eps.
pub(crate) fn atom_suspected(eps: &[f64], raw: &[f64]) -> bool {
    let m_first = std::f64::consts::PI * eps[0] * raw[0].abs();
    let m_last = std::f64::consts::PI * eps[eps.len() - 1] * raw[raw.len() - 1].abs();
    m_last > ATOM_MASS_TOL && m_last > 0.6 * m_first
}

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("Cauchy transform evaluated at an atom of the measure")]
    PoleAtAtom,
    #[error("K(w) requires w > 0, got {0}")]
    NonPositiveW(f64),
    #[error("left-edge K requires w < 0, got {0}")]
    NonNegativeW(f64),
    #[error("epsilon sequence must have at least two strictly decreasing positive entries")]
    BadEpsSequence,
    #[error("bracketed Newton failed to converge; this indicates a bug")]
    BracketFailure,
}

/// G(z) = sum_i w_i / (z - t_i); maps the upper half plane into the lower.
pub fn cauchy_eval(mu: &AtomicMeasure, z: Complex64) -> Result<Complex64, TransformError> {
    let mut acc = Complex64::new(0.0, 0.0);
    for (&t, &w) in mu.atoms().iter().zip(mu.weights()) {
        let d = z - t;
        if d.re == 0.0 && d.im == 0.0 {
            return Err(TransformError::PoleAtAtom);
        }
        acc += w / d;
    }
    Ok(acc)
}

/// G'(z) = -sum_i w_i / (z - t_i)^2.
pub fn cauchy_prime(mu: &AtomicMeasure, z: Complex64) -> Complex64 {
    mu.atoms()
        .iter()
        .zip(mu.weights())
        .map(|(&t, &w)| {
            let d = z - t;
            -w / (d * d)
        })
        .sum()
}

/// The combination G(z)^2 + G'(z) as a single cancellation-free sum:
///
/// G^2 + G' = -sum_{i<j} w_i w_j (t_i - t_j)^2 / ((z-t_i)^2 (z-t_j)^2).
///
/// Needed because K'(w) + 1/w^2 extracted by subtraction loses all digits
/// for narrow measures, while every term here has the same sign.
pub fn g_squared_plus_prime(mu: &AtomicMeasure, z: Complex64) -> Complex64 {
    let atoms = mu.atoms();
    let weights = mu.weights();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..atoms.len() {
        let di = z - atoms[i];
        let di2 = di * di;
        for j in i + 1..atoms.len() {
            let dj = z - atoms[j];
            let dt = atoms[i] - atoms[j];
            acc -= weights[i] * weights[j] * (dt * dt) / (di2 * dj * dj);
        }
    }
    acc
}

/// Numerically evaluable K-function of a single atomic measure on the
/// positive real ray, with a configurable residual tolerance.
#[derive(Debug, Clone)]
pub struct KEvaluator {
    measure: AtomicMeasure,
    rel_tol: f64,
}

impl KEvaluator {
    pub fn new(measure: AtomicMeasure) -> Self {
        Self {
            measure,
            rel_tol: K_EVAL_REL_TOL,
        }
    }

    pub fn with_tolerance(measure: AtomicMeasure, rel_tol: f64) -> Self {
        Self { measure, rel_tol }
    }

    pub fn measure(&self) -> &AtomicMeasure {
        &self.measure
    }

    /// K(w) for w > 0: the unique x above the support with G(x) = w.
    pub fn eval(&self, w: f64) -> Result<f64, TransformError> {
        Ok(1.0 / w + self.shifted(w)?)
    }

    /// K(w) - 1/w for w > 0, solved directly in the shifted coordinate.
    pub fn shifted(&self, w: f64) -> Result<f64, TransformError> {
        if !(w > 0.0) || !w.is_finite() {
            return Err(TransformError::NonPositiveW(w));
        }
        let mu = &self.measure;
        let t_max = mu.max_atom();
        let l = mu.norm_bound();
        let inv_w = 1.0 / w;

        // Per-atom offsets: x - t_i = shift_i + y.
        let shifts: Vec<f64> = mu.atoms().iter().map(|t| inv_w - t).collect();
        let g_at = |y: f64| -> f64 {
            shifts
                .iter()
                .zip(mu.weights())
                .map(|(s, w)| w / (s + y))
                .sum()
        };
        let gp_at = |y: f64| -> f64 {
            -shifts
                .iter()
                .zip(mu.weights())
                .map(|(s, w)| {
                    let d = s + y;
                    w / (d * d)
                })
                .sum::<f64>()
        };

        // Bracket: G(x) > w just above the top atom, G(x) < w at
        // x = 1.5/w + t_max + L.
        let delta = (1e-14 * (1.0 + t_max.abs())).min(0.5 * mu.max_atom_weight() * inv_w);
        let lo0 = t_max - inv_w + delta;
        let hi0 = t_max + l + 0.5 * inv_w;
        let (mut lo, mut hi) = (lo0, hi0);

        // Seed from the small-w expansion K(w) = 1/w + m1 + var*w + ...
        let mut y = mu.mean() + mu.variance() * w;
        if !(y > lo && y < hi) {
            y = 0.5 * (lo + hi);
        }

        for _ in 0..200 {
            let g = g_at(y);
            let resid = g - w;
            if g > w {
                lo = y;
            } else {
                hi = y;
            }
            if resid.abs() <= self.rel_tol * w {
                // One polishing step; quadratic convergence lands at the
                // evaluation noise floor.
                let step = resid / gp_at(y);
                let polished = y - step;
                if polished > lo0 && polished < hi0 {
                    return Ok(polished);
                }
                return Ok(y);
            }
            let gp = gp_at(y);
            let mut next = y - resid / gp;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if next == y || (hi - lo) <= f64::EPSILON * (lo.abs().max(hi.abs()) + 1e-300) {
                return Ok(y);
            }
            y = next;
        }
        Err(TransformError::BracketFailure)
    }

    /// K(w) for w < 0 via reflection: -K_{reflected}(-w).
    pub fn eval_left(&self, w: f64) -> Result<f64, TransformError> {
        if !(w < 0.0) || !w.is_finite() {
            return Err(TransformError::NonNegativeW(w));
        }
        let refl = Self::with_tolerance(self.measure.reflect(), self.rel_tol);
        Ok(-refl.eval(-w)?)
    }

    /// K'(w) = 1/G'(K(w)).
    pub fn derivative(&self, w: f64) -> Result<f64, TransformError> {
        let x = self.eval(w)?;
        Ok(1.0 / cauchy_prime(&self.measure, Complex64::new(x, 0.0)).re)
    }

    /// K'(w) + 1/w^2, evaluated without catastrophic cancellation via
    /// (G^2 + G') / (G' G^2) at x = K(w).
    pub fn r_prime(&self, w: f64) -> Result<f64, TransformError> {
        let x = Complex64::new(1.0 / w + self.shifted(w)?, 0.0);
        let g = cauchy_eval(&self.measure, x)?;
        let gp = cauchy_prime(&self.measure, x);
        let num = g_squared_plus_prime(&self.measure, x);
        Ok((num / (gp * g * g)).re)
    }
}

/// K(w) for w > 0 at the default tolerance.
pub fn k_eval(mu: &AtomicMeasure, w: f64) -> Result<f64, TransformError> {
    KEvaluator::new(mu.clone()).eval(w)
}

/// K(w) for w < 0 via reflection.
pub fn k_eval_left(mu: &AtomicMeasure, w: f64) -> Result<f64, TransformError> {
    KEvaluator::new(mu.clone()).eval_left(w)
}

/// Recovered density values on a grid, with per-point quality estimates.
///
/// `quality` is the estimated absolute extrapolation error; an infinite
/// value flags a point that appears to sit on an atom of the measure.
#[derive(Debug, Clone)]
pub struct DensityGrid {
    pub xs: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub values: Vec<f64>,
    pub quality: Vec<f64>,
}

impl DensityGrid {
    /// Trapezoid mass over the grid.
    pub fn mass(&self) -> f64 {
        let mut acc = 0.0;
        for i in 1..self.xs.len() {
            acc += 0.5 * (self.values[i] + self.values[i - 1]) * (self.xs[i] - self.xs[i - 1]);
        }
        acc
    }

    /// CSV with header `x,phi,quality`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,phi,quality\n");
        for i in 0..self.xs.len() {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e}\n",
                self.xs[i], self.values[i], self.quality[i]
            ));
        }
        out
    }

    /// Parses the CSV produced by [`DensityGrid::to_csv`].
    pub fn from_csv(text: &str) -> Option<Self> {
        let mut xs = Vec::new();
        let mut values = Vec::new();
        let mut quality = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 {
                if line.trim() != "x,phi,quality" {
                    return None;
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            xs.push(parts.next()?.trim().parse().ok()?);
            values.push(parts.next()?.trim().parse().ok()?);
            quality.push(parts.next()?.trim().parse().ok()?);
        }
        Some(Self {
            xs,
            epsilons: Vec::new(),
            values,
            quality,
        })
    }
}

/// Linear-in-epsilon extrapolation to 0 over successive pairs.
/// Returns (value, estimated error).
pub(crate) fn extrapolate_to_zero(eps: &[f64], vals: &[f64]) -> (f64, f64) {
    debug_assert!(eps.len() >= 2 && eps.len() == vals.len());
    let lin = |i: usize, j: usize| -> f64 {
        (eps[i] * vals[j] - eps[j] * vals[i]) / (eps[i] - eps[j])
    };
    let mut extraps = Vec::with_capacity(eps.len() - 1);
    for j in 1..eps.len() {
        extraps.push(lin(j - 1, j));
    }
    let value = *extraps.last().unwrap();
    let quality = if extraps.len() >= 2 {
        (value - extraps[extraps.len() - 2]).abs()
    } else {
        (value - vals[vals.len() - 1]).abs()
    };
    (value, quality)
}

/// Stieltjes-Perron density recovery: phi(x) = -(1/pi) Im g(x + i eps),
/// Richardson-extrapolated to eps -> 0 and clamped at zero from below.
pub fn stieltjes_density<F>(
    g_eval: F,
    xs: &[f64],
    eps: &[f64],
) -> Result<DensityGrid, TransformError>
where
    F: Fn(Complex64) -> Complex64,
{
    check_eps(eps)?;
    let mut values = Vec::with_capacity(xs.len());
    let mut quality = Vec::with_capacity(xs.len());
    for &x in xs {
        let raw: Vec<f64> = eps
            .iter()
            .map(|&e| -g_eval(Complex64::new(x, e)).im / std::f64::consts::PI)
            .collect();
        let (val, mut q) = extrapolate_to_zero(eps, &raw);
        // A point mass makes Im G blow up like 1/eps; such points get
        // flagged rather than interpreted.
        if atom_suspected(eps, &raw) {
            q = f64::INFINITY;
        }
        values.push(val.max(0.0));
        quality.push(q);
    }
    Ok(DensityGrid {
        xs: xs.to_vec(),
        epsilons: eps.to_vec(),
        values,
        quality,
    })
}

pub(crate) fn check_eps(eps: &[f64]) -> Result<(), TransformError> {
    if eps.len() < 2
        || eps.iter().any(|&e| !(e > 0.0) || !e.is_finite())
        || eps.windows(2).any(|p| p[1] >= p[0])
    {
        return Err(TransformError::BadEpsSequence);
    }
    Ok(())
}

/// Density of the semicircle law with second moment a2:
/// sqrt(4 a2 - x^2) / (2 pi a2) on [-2 sqrt(a2), 2 sqrt(a2)], zero outside.
pub fn semicircle_density(a2: f64, x: f64) -> f64 {
    assert!(a2 > 0.0);
    let disc = 4.0 * a2 - x * x;
    if disc <= 0.0 {
        0.0
    } else {
        disc.sqrt() / (2.0 * std::f64::consts::PI * a2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn coin() -> AtomicMeasure {
        AtomicMeasure::symmetric_coin(1.0)
    }

    #[test]
    fn cauchy_at_real_point() {
        let g = cauchy_eval(&coin(), Complex64::new(2.0, 0.0)).unwrap();
        assert!((g.re - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(g.im, 0.0);
    }

    #[test]
    fn cauchy_of_point_mass_at_i() {
        let g = cauchy_eval(&AtomicMeasure::point_mass(0.0), Complex64::new(0.0, 1.0)).unwrap();
        assert!((g - Complex64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn cauchy_pole_detected() {
        assert!(matches!(
            cauchy_eval(&coin(), Complex64::new(1.0, 0.0)),
            Err(TransformError::PoleAtAtom)
        ));
    }

    #[test]
    fn cauchy_lower_bound_on_circle() {
        // |G| >= 1/(4L) on |z| = 2L; for the coin L = 1 and the true
        // minimum is 0.4 at z = +-2i.
        let mut min = f64::INFINITY;
        for j in 0..720 {
            let theta = 2.0 * PI * (j as f64) / 720.0;
            let z = Complex64::from_polar(2.0, theta);
            min = min.min(cauchy_eval(&coin(), z).unwrap().norm());
        }
        assert!(min >= 0.25);
        assert!((min - 0.4).abs() < 1e-3);
    }

    #[test]
    fn upper_half_plane_maps_down() {
        let mu = AtomicMeasure::new(vec![-1.0, 0.3, 2.0], vec![0.2, 0.5, 0.3]).unwrap();
        for &(re, im) in &[(0.0, 0.1), (1.5, 1.0), (-3.0, 0.01)] {
            let g = cauchy_eval(&mu, Complex64::new(re, im)).unwrap();
            assert!(g.im < 0.0);
        }
    }

    #[test]
    fn k_eval_inverts_cauchy_example() {
        // G(2) = 2/3 for the coin, so K(2/3) = 2.
        let x = k_eval(&coin(), 2.0 / 3.0).unwrap();
        assert!((x - 2.0).abs() < 1e-12);
    }

    #[test]
    fn k_eval_closed_form_coin() {
        // K(w) = (1 + sqrt(1+4w^2))/(2w); at w = 1/2 this is 1 + sqrt(2).
        let x = k_eval(&coin(), 0.5).unwrap();
        assert!((x - (1.0 + 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn k_eval_point_mass() {
        let x = k_eval(&AtomicMeasure::point_mass(0.0), 0.25).unwrap();
        assert!((x - 4.0).abs() < 1e-12);
    }

    #[test]
    fn k_eval_left_examples() {
        let x = k_eval_left(&coin(), -0.5).unwrap();
        assert!((x + (1.0 + 2f64.sqrt())).abs() < 1e-12);

        // K_{delta_1}(w) = 1 + 1/w vanishes at w = -1.
        let x = k_eval_left(&AtomicMeasure::point_mass(1.0), -1.0).unwrap();
        assert!(x.abs() < 1e-12);

        let x = k_eval_left(&AtomicMeasure::point_mass(0.0), -2.0).unwrap();
        assert!((x + 0.5).abs() < 1e-12);
    }

    #[test]
    fn k_eval_rejects_bad_domain() {
        assert!(k_eval(&coin(), 0.0).is_err());
        assert!(k_eval(&coin(), -1.0).is_err());
        assert!(k_eval_left(&coin(), 1.0).is_err());
    }

    #[test]
    fn r_prime_matches_series_near_zero() {
        // R'(w) = kappa_2 + 2 kappa_3 w + 3 kappa_4 w^2 + ...; coin has
        // kappa = (0,1,0,-1,...) so R'(w) ~ 1 - 3w^2.
        let ev = KEvaluator::new(coin());
        let w = 1e-3;
        let r = ev.r_prime(w).unwrap();
        assert!((r - (1.0 - 3.0 * w * w)).abs() < 1e-9, "r = {r}");
    }

    /// Principal-branch Cauchy transform of the unit semicircle law,
    /// G(z) = (z - sqrt(z-2) sqrt(z+2)) / 2.
    fn semicircle_g(z: Complex64) -> Complex64 {
        (z - (z - 2.0).sqrt() * (z + 2.0).sqrt()) / 2.0
    }

    #[test]
    fn stieltjes_recovers_semicircle_density() {
        let eps = [1e-2, 5e-3, 2.5e-3];
        let grid = stieltjes_density(semicircle_g, &[0.0, 2.5, -2.5], &eps).unwrap();
        assert!((grid.values[0] - 1.0 / PI).abs() < 1e-4);
        assert!(grid.values[1].abs() < 1e-6);
        assert!(grid.values[2].abs() < 1e-6);
    }

    #[test]
    fn stieltjes_semicircle_mass() {
        let eps = [1e-2, 5e-3, 2.5e-3];
        let xs: Vec<f64> = (0..=600).map(|i| -3.0 + (i as f64) * 0.01).collect();
        let grid = stieltjes_density(semicircle_g, &xs, &eps).unwrap();
        assert!((grid.mass() - 1.0).abs() < 2e-3, "mass = {}", grid.mass());
    }

    #[test]
    fn stieltjes_flags_atoms() {
        let mu = AtomicMeasure::point_mass(0.0);
        let g = move |z: Complex64| cauchy_eval(&mu, z).unwrap();
        let grid = stieltjes_density(g, &[0.0, 1.0], &[1e-2, 5e-3]).unwrap();
        assert!(grid.quality[0].is_infinite());
        // Off the atom the density is zero and unflagged.
        assert!(grid.values[1].abs() < 1e-6);
        assert!(grid.quality[1].is_finite());
    }

    #[test]
    fn semicircle_density_examples() {
        assert!((semicircle_density(1.0, 0.0) - 1.0 / PI).abs() < 1e-15);
        assert_eq!(semicircle_density(1.0, 2.0), 0.0);
        assert!((semicircle_density(4.0, 0.0) - 1.0 / (2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn density_csv_round_trip() {
        let grid = DensityGrid {
            xs: vec![-1.0, 0.0, 1.0 / 3.0],
            epsilons: vec![1e-2, 5e-3],
            values: vec![0.1234567890123456, 0.0, 0.3183098861837907],
            quality: vec![1e-12, f64::INFINITY, 2e-9],
        };
        let parsed = DensityGrid::from_csv(&grid.to_csv()).unwrap();
        assert_eq!(parsed.xs, grid.xs);
        assert_eq!(parsed.values, grid.values);
        assert_eq!(parsed.quality[0], grid.quality[0]);
        assert!(parsed.quality[1].is_infinite());
    }
}
