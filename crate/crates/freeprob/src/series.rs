//! Truncated power-series arithmetic, G-series/K-series conversion, and the
//! non-crossing-partition moment/cumulant oracle.
//!
//! Three independent routes produce the same K-series coefficients (free
//! cumulants): formal reversion of the G-series, contour-integral Lagrange
//! coefficients, and explicit enumeration of non-crossing partitions. The
//! test suites hold them against each other.

use num_complex::Complex64;
use thiserror::Error;

use crate::measure::{AtomicMeasure, MomentVector};

/// Largest order accepted by the partition-enumeration oracle.
pub const NC_MAX_ORDER: usize = 12;

/// Default node count for the contour quadrature; doubled until the
/// coefficients settle.
pub const QUAD_NODES_START: usize = 512;
pub const QUAD_NODES_CAP: usize = 8192;
pub const QUAD_SETTLE_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("order {0} exceeds the partition-enumeration cap {NC_MAX_ORDER}")]
    OrderTooLarge(usize),
    #[error("contour radius {radius} is not below 1/L = {limit}")]
    RadiusTooLarge { radius: f64, limit: f64 },
    #[error("contour quadrature did not settle below {QUAD_SETTLE_TOL}; residual {residual:.3e}")]
    QuadratureNotConverged { residual: f64 },
    #[error("series orders differ: {0} vs {1}")]
    OrderMismatch(usize, usize),
    #[error("order must be at least 1")]
    ZeroOrder,
}

/// Real coefficients c_0..c_N of a power series truncated at order N.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSeries {
    coeffs: Vec<f64>,
}

impl TruncatedSeries {
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty());
        Self { coeffs }
    }

    pub fn zero(order: usize) -> Self {
        Self {
            coeffs: vec![0.0; order + 1],
        }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> f64 {
        self.coeffs.get(i).copied().unwrap_or(0.0)
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.order(), rhs.order());
        Self {
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Product truncated at the common order.
    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.order(), rhs.order());
        let n = self.order();
        let mut out = vec![0.0; n + 1];
        for i in 0..=n {
            if self.coeffs[i] == 0.0 {
                continue;
            }
            for j in 0..=(n - i) {
                out[i + j] += self.coeffs[i] * rhs.coeffs[j];
            }
        }
        Self { coeffs: out }
    }

    /// Composition self(rhs); rhs must have zero constant term.
    pub fn compose(&self, rhs: &Self) -> Self {
        assert_eq!(self.order(), rhs.order());
        assert_eq!(rhs.coeffs[0], 0.0, "inner series needs zero constant term");
        let n = self.order();
        // Horner in the series ring.
        let mut acc = Self::zero(n);
        for i in (0..=n).rev() {
            acc = acc.mul(rhs);
            acc.coeffs[0] += self.coeffs[i];
        }
        acc
    }

    /// Multiplicative inverse; requires a nonzero constant term.
    pub fn recip(&self) -> Self {
        let c0 = self.coeffs[0];
        assert!(c0 != 0.0, "reciprocal needs nonzero constant term");
        let n = self.order();
        let mut out = vec![0.0; n + 1];
        out[0] = 1.0 / c0;
        for k in 1..=n {
            let mut s = 0.0;
            for j in 1..=k {
                s += self.coeffs[j] * out[k - j];
            }
            out[k] = -s / c0;
        }
        Self { coeffs: out }
    }
}

/// Laurent expansion of a Cauchy transform at infinity,
/// G(z) = 1/z + m_1/z^2 + ... + m_N/z^{N+1}.
///
/// Only the moments are stored; the leading coefficient is pinned at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct GSeries {
    moments: Vec<f64>,
}

impl GSeries {
    pub fn from_moments(m: &MomentVector) -> Self {
        assert!(m.order() >= 1);
        Self {
            moments: m.values().to_vec(),
        }
    }

    pub fn from_measure(mu: &AtomicMeasure, order: usize) -> Self {
        Self::from_moments(&mu.moments(order))
    }

    pub fn order(&self) -> usize {
        self.moments.len()
    }

    /// m_k, 1-based.
    pub fn moment(&self, k: usize) -> f64 {
        assert!(k >= 1);
        self.moments.get(k - 1).copied().unwrap_or(0.0)
    }

    /// Coefficient list (1, m_1, ..., m_N).
    pub fn coeffs(&self) -> Vec<f64> {
        let mut c = Vec::with_capacity(self.order() + 1);
        c.push(1.0);
        c.extend_from_slice(&self.moments);
        c
    }
}

/// Principal part 1/z plus Taylor coefficients kappa_1..kappa_N
/// (the free cumulants). Compositional inverse of the G-series.
#[derive(Debug, Clone, PartialEq)]
pub struct KSeries {
    taylor: Vec<f64>,
}

impl KSeries {
    pub fn new(taylor: Vec<f64>) -> Self {
        assert!(!taylor.is_empty());
        Self { taylor }
    }

    pub fn order(&self) -> usize {
        self.taylor.len()
    }

    /// kappa_1..kappa_N.
    pub fn taylor(&self) -> &[f64] {
        &self.taylor
    }

    /// kappa_k, 1-based.
    pub fn cumulant(&self, k: usize) -> f64 {
        assert!(k >= 1);
        self.taylor.get(k - 1).copied().unwrap_or(0.0)
    }

    /// Evaluates the truncated series 1/w + sum_j kappa_j w^{j-1}.
    pub fn eval(&self, w: f64) -> f64 {
        let mut tail = 0.0;
        for &k in self.taylor.iter().rev() {
            tail = tail * w + k;
        }
        1.0 / w + tail
    }

    /// The series y(w) = 1/K(w) = w + ..., truncated at order N+1.
    /// Substituting it into the G-series polynomial must give the identity.
    pub fn reciprocal_series(&self) -> TruncatedSeries {
        let n = self.order();
        // u = w*K(w) = 1 + kappa_1 w + ... ; y = w / u.
        let mut u = Vec::with_capacity(n + 1);
        u.push(1.0);
        u.extend_from_slice(&self.taylor);
        let r = TruncatedSeries::new(u).recip();
        let mut y = vec![0.0; n + 2];
        y[1..].copy_from_slice(r.coeffs());
        TruncatedSeries::new(y)
    }
}

/// Builds the G-series from moments: coefficient list (1, m_1, ..., m_N).
pub fn g_from_moments(m: &MomentVector) -> GSeries {
    GSeries::from_moments(m)
}

/// Formal compositional inverse of the G-series.
///
/// Works in the coordinate g(z) = G(1/z) = z + m_1 z^2 + ...: the series
/// y with g(y(w)) = w is built order by order from the fixed-point identity
/// y = w - sum_k m_k y^{k+1}, then K(w) = 1/y(w) is read off through the
/// reciprocal of y/w. No composition operator is involved.
pub fn k_from_g_formal(g: &GSeries) -> KSeries {
    let n = g.order();
    let top = n + 1; // y needs one extra order to expose kappa_N
    let mut y = vec![0.0; top + 1];
    y[1] = 1.0;
    for ord in 2..=top {
        // [w^ord] of sum_k m_k y^{k+1}; independent of y[ord] since every
        // product there carries order at least ord+k.
        let mut pw = y.clone(); // y^1
        let mut acc = 0.0;
        for k in 1..ord {
            pw = mul_trunc(&pw, &y, ord);
            acc += g.moment(k) * pw[ord];
        }
        y[ord] = -acc;
    }
    // u = y/w has unit constant term; K = 1/y = (1/w) * 1/u.
    let u = TruncatedSeries::new(y[1..].to_vec());
    let r = u.recip();
    KSeries::new(r.coeffs()[1..].to_vec())
}

fn mul_trunc(a: &[f64], b: &[f64], order: usize) -> Vec<f64> {
    let mut out = vec![0.0; order + 1];
    for i in 0..=order.min(a.len() - 1) {
        if a[i] == 0.0 {
            continue;
        }
        for j in 0..=(order - i).min(b.len() - 1) {
            out[i + j] += a[i] * b[j];
        }
    }
    out
}

/// K-series coefficients by contour integration.
///
/// The inverse of G has Laurent coefficients 1/w + a_1 - sum_k b_k w^k with
/// b_k = (2 pi i k)^{-1} closed-integral dz / (z^2 g(z)^k) over a circle
/// around 0 in the g coordinate. The linear coefficient a_1 is taken
/// directly as m_1 rather than through the quadrature, whose integrand has
/// a double pole there.
pub fn lagrange_coeffs(mu: &AtomicMeasure, order: usize) -> Result<KSeries, SeriesError> {
    let l = mu.norm_bound();
    let radius = if l == 0.0 { 1.0 } else { 0.5 / l };
    lagrange_coeffs_with_radius(mu, order, radius)
}

/// As [`lagrange_coeffs`] with an explicit contour radius (must stay below
/// 1/L so the contour encloses no pole of g).
pub fn lagrange_coeffs_with_radius(
    mu: &AtomicMeasure,
    order: usize,
    radius: f64,
) -> Result<KSeries, SeriesError> {
    if order == 0 {
        return Err(SeriesError::ZeroOrder);
    }
    let l = mu.norm_bound();
    if l > 0.0 && radius >= 1.0 / l {
        return Err(SeriesError::RadiusTooLarge {
            radius,
            limit: 1.0 / l,
        });
    }

    let m1 = mu.mean();
    if order == 1 {
        return Ok(KSeries::new(vec![m1]));
    }

    let mut nodes = QUAD_NODES_START;
    let mut prev = contour_b_coeffs(mu, order - 1, radius, nodes);
    loop {
        nodes *= 2;
        let next = contour_b_coeffs(mu, order - 1, radius, nodes);
        let residual = prev
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        if residual < QUAD_SETTLE_TOL {
            let mut taylor = Vec::with_capacity(order);
            taylor.push(m1);
            taylor.extend(next.iter().map(|b| -b));
            return Ok(KSeries::new(taylor));
        }
        if nodes >= QUAD_NODES_CAP {
            return Err(SeriesError::QuadratureNotConverged { residual });
        }
        prev = next;
    }
}

/// b_1..b_kmax by the uniform trapezoid rule on |z| = radius.
fn contour_b_coeffs(mu: &AtomicMeasure, kmax: usize, radius: f64, nodes: usize) -> Vec<f64> {
    let mut sums = vec![Complex64::new(0.0, 0.0); kmax];
    for j in 0..nodes {
        let theta = 2.0 * std::f64::consts::PI * (j as f64) / (nodes as f64);
        let z = Complex64::from_polar(radius, theta);
        let g = g_small(mu, z);
        // 1/(z g^k), accumulated over k.
        let mut zgk = z * g;
        for s in sums.iter_mut() {
            *s += zgk.inv();
            zgk *= g;
        }
    }
    sums.iter()
        .enumerate()
        .map(|(i, s)| s.re / ((i + 1) as f64 * nodes as f64))
        .collect()
}

/// g(z) = G(1/z) = sum_i w_i z / (1 - t_i z), the Cauchy transform pulled to
/// a neighborhood of the origin.
pub fn g_small(mu: &AtomicMeasure, z: Complex64) -> Complex64 {
    mu.atoms()
        .iter()
        .zip(mu.weights())
        .map(|(&t, &w)| w * z / (Complex64::new(1.0, 0.0) - t * z))
        .sum()
}

/// g'(z) = sum_i w_i / (1 - t_i z)^2.
pub fn g_small_prime(mu: &AtomicMeasure, z: Complex64) -> Complex64 {
    mu.atoms()
        .iter()
        .zip(mu.weights())
        .map(|(&t, &w)| {
            let d = Complex64::new(1.0, 0.0) - t * z;
            w / (d * d)
        })
        .sum()
}

/// Free cumulants from moments by explicit enumeration of non-crossing
/// partitions: m_n = sum over NC(n) of the product of kappa_{|V|}.
pub fn cumulants_from_moments_nc(m: &MomentVector) -> Result<Vec<f64>, SeriesError> {
    let order = m.order();
    if order > NC_MAX_ORDER {
        return Err(SeriesError::OrderTooLarge(order));
    }
    let mut kappa = vec![0.0; order + 1]; // 1-based
    for n in 1..=order {
        // With kappa[n] still 0 the single-block partition contributes
        // nothing, so the sum covers exactly the proper partitions.
        let mut s = 0.0;
        for_each_nc_partition(n, &mut |blocks| {
            let mut prod = 1.0;
            for b in blocks {
                prod *= kappa[b.len()];
            }
            s += prod;
        });
        kappa[n] = m.get(n) - s;
    }
    Ok(kappa[1..].to_vec())
}

/// Moments from free cumulants; exact inverse of
/// [`cumulants_from_moments_nc`] on its domain.
pub fn moments_from_cumulants_nc(kappa: &[f64]) -> Result<MomentVector, SeriesError> {
    let order = kappa.len();
    if order > NC_MAX_ORDER {
        return Err(SeriesError::OrderTooLarge(order));
    }
    let mut table = vec![0.0; order + 1];
    table[1..].copy_from_slice(kappa);
    let mut values = Vec::with_capacity(order);
    for n in 1..=order {
        let mut s = 0.0;
        for_each_nc_partition(n, &mut |blocks| {
            let mut prod = 1.0;
            for b in blocks {
                prod *= table[b.len()];
            }
            s += prod;
        });
        values.push(s);
    }
    Ok(MomentVector::new(values))
}

/// Calls `visit` once per non-crossing partition of {0, .., n-1}.
///
/// Decomposition: the block containing the first element of a segment splits
/// the rest into independent gap segments, each partitioned recursively.
pub fn for_each_nc_partition(n: usize, visit: &mut impl FnMut(&[Vec<usize>])) {
    if n == 0 {
        return;
    }
    let mut segments = vec![(0usize, n)];
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    rec_segments(&mut segments, &mut blocks, visit);
}

fn rec_segments(
    segments: &mut Vec<(usize, usize)>,
    blocks: &mut Vec<Vec<usize>>,
    visit: &mut impl FnMut(&[Vec<usize>]),
) {
    let Some((s, e)) = segments.pop() else {
        visit(blocks);
        return;
    };
    if s >= e {
        rec_segments(segments, blocks, visit);
        segments.push((s, e));
        return;
    }
    blocks.push(vec![s]);
    grow_block(s, e, segments, blocks, visit);
    blocks.pop();
    segments.push((s, e));
}

fn grow_block(
    prev: usize,
    end: usize,
    segments: &mut Vec<(usize, usize)>,
    blocks: &mut Vec<Vec<usize>>,
    visit: &mut impl FnMut(&[Vec<usize>]),
) {
    // Close the block at `prev`; everything after is one independent segment.
    segments.push((prev + 1, end));
    rec_segments(segments, blocks, visit);
    segments.pop();
    // Or extend with j; the gap (prev, j) becomes an independent segment.
    for j in prev + 1..end {
        blocks.last_mut().unwrap().push(j);
        segments.push((prev + 1, j));
        grow_block(j, end, segments, blocks, visit);
        segments.pop();
        blocks.last_mut().unwrap().pop();
    }
}
