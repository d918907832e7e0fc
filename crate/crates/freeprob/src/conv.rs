//! Free additive convolution of a row of measures: K-addition, composite
//! K evaluation, support-edge location, and density of the sum.
//!
//! The support edge is defined operationally as inf_{w>0} K_n(w). For a
//! single atomic measure this equals the top atom exactly, and for sums the
//! infimum sits either at a finite critical point of K_n (soft edge) or at
//! w -> infinity (hard edge, density diverging at the endpoint).
//!
//! Rows store members grouped by equality with multiplicities, so a row of
//! 2^26 identical summands costs O(1) per K evaluation. When the row is a
//! common base measure dilated by a known factor, K and K' are evaluated
//! through the base measure at the base scale; this both matches the
//! dilation identity K_{aX}(w) = a K_X(a w) and avoids the loss of
//! significance that per-member evaluation hits for very large rows.

use num_complex::Complex64;
use thiserror::Error;

use crate::measure::{AtomicMeasure, MeasureError};
use crate::series::KSeries;
use crate::transform::{
    atom_suspected, cauchy_eval, cauchy_prime, check_eps, extrapolate_to_zero,
    g_squared_plus_prime, DensityGrid, KEvaluator, TransformError,
};

/// Relative tolerance on the first moment for the centering check.
pub const CENTER_TOL: f64 = 1e-10;

/// |K_n'(w*)| must fall below this multiple of v_n at a reported critical
/// point.
pub const KPRIME_TOL_FACTOR: f64 = 1e-9;

/// Log-grid scan range for the edge search.
pub const SCAN_LO: f64 = 1e-6;
pub const SCAN_HI: f64 = 1e6;
/// Derivative-sign samples used to screen for unimodality.
pub const SCAN_SAMPLES: usize = 64;

#[derive(Debug, Error)]
pub enum ConvError {
    #[error("row must contain at least one member")]
    EmptyRow,
    #[error("member {index} has first moment {mean:.3e}; rows must be centered")]
    Uncentered { index: usize, mean: f64 },
    #[error("K-series orders differ: {0} vs {1}")]
    OrderMismatch(usize, usize),
    #[error("empty list of K-series")]
    EmptySum,
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("edge search could not certify a minimum (derivative stuck at {0:.3e})")]
    EdgeNotCertified(f64),
}

/// One group of identical members inside a row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowGroup {
    pub measure: AtomicMeasure,
    pub count: u64,
}

/// Common-base decomposition of a row of identical members: every member is
/// `base` dilated by `alpha`.
#[derive(Debug, Clone)]
struct Shortcut {
    base: AtomicMeasure,
    alpha: f64,
}

/// A row X_1, .., X_{k_n} of freely independent centered measures, grouped
/// by equality.
#[derive(Debug, Clone)]
pub struct RowSpec {
    name: String,
    groups: Vec<RowGroup>,
    shortcut: Option<Shortcut>,
}

impl RowSpec {
    /// Groups an explicit member list by canonical equality.
    pub fn new(name: impl Into<String>, members: Vec<AtomicMeasure>) -> Result<Self, ConvError> {
        if members.is_empty() {
            return Err(ConvError::EmptyRow);
        }
        let mut groups: Vec<RowGroup> = Vec::new();
        for m in members {
            match groups.iter_mut().find(|g| g.measure == m) {
                Some(g) => g.count += 1,
                None => groups.push(RowGroup {
                    measure: m,
                    count: 1,
                }),
            }
        }
        Self::from_groups(name, groups)
    }

    /// Builds a row from (measure, multiplicity) groups.
    pub fn from_groups(name: impl Into<String>, groups: Vec<RowGroup>) -> Result<Self, ConvError> {
        let groups: Vec<RowGroup> = groups.into_iter().filter(|g| g.count > 0).collect();
        if groups.is_empty() {
            return Err(ConvError::EmptyRow);
        }
        for (index, g) in groups.iter().enumerate() {
            let mean = g.measure.mean();
            if mean.abs() > CENTER_TOL * (1.0 + g.measure.norm_bound()) {
                return Err(ConvError::Uncentered { index, mean });
            }
        }
        // All members equal: remember the trivial common-base decomposition.
        let shortcut = if groups.len() == 1 {
            Some(Shortcut {
                base: groups[0].measure.clone(),
                alpha: 1.0,
            })
        } else {
            None
        };
        Ok(Self {
            name: name.into(),
            groups,
            shortcut,
        })
    }

    /// `count` copies of `base` each dilated by `alpha`; the normalized-sum
    /// construction (xi_1 + .. + xi_k)/sqrt(k) with alpha = 1/sqrt(k).
    pub fn scaled_copies(
        name: impl Into<String>,
        base: &AtomicMeasure,
        count: u64,
        alpha: f64,
    ) -> Result<Self, ConvError> {
        if count == 0 {
            return Err(ConvError::EmptyRow);
        }
        let member = base.dilate(alpha)?;
        let mut row = Self::from_groups(
            name,
            vec![RowGroup {
                measure: member,
                count,
            }],
        )?;
        row.shortcut = Some(Shortcut {
            base: base.clone(),
            alpha,
        });
        Ok(row)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn groups(&self) -> &[RowGroup] {
        &self.groups
    }

    /// Number of members k_n (with multiplicity).
    pub fn k_n(&self) -> u64 {
        self.groups.iter().map(|g| g.count).sum()
    }

    /// v_n: sum of member second moments.
    pub fn v_n(&self) -> f64 {
        self.groups
            .iter()
            .map(|g| g.count as f64 * g.measure.moments(2).get(2))
            .sum()
    }

    /// T_n: sum of cubed member norm bounds.
    pub fn t_n(&self) -> f64 {
        self.groups
            .iter()
            .map(|g| g.count as f64 * g.measure.norm_bound().powi(3))
            .sum()
    }

    /// L_n: largest member norm bound.
    pub fn l_max(&self) -> f64 {
        self.groups
            .iter()
            .map(|g| g.measure.norm_bound())
            .fold(0.0, f64::max)
    }

    /// Mirror image of every member.
    pub fn reflected(&self) -> Self {
        Self {
            name: self.name.clone(),
            groups: self
                .groups
                .iter()
                .map(|g| RowGroup {
                    measure: g.measure.reflect(),
                    count: g.count,
                })
                .collect(),
            shortcut: self.shortcut.as_ref().map(|s| Shortcut {
                base: s.base.reflect(),
                alpha: s.alpha,
            }),
        }
    }

    /// Every member dilated by `alpha > 0` (used for equivariance checks).
    pub fn dilated(&self, alpha: f64) -> Result<Self, ConvError> {
        let groups = self
            .groups
            .iter()
            .map(|g| {
                Ok(RowGroup {
                    measure: g.measure.dilate(alpha)?,
                    count: g.count,
                })
            })
            .collect::<Result<Vec<_>, ConvError>>()?;
        let mut row = Self::from_groups(self.name.clone(), groups)?;
        row.shortcut = self.shortcut.as_ref().map(|s| Shortcut {
            base: s.base.clone(),
            alpha: s.alpha * alpha,
        });
        Ok(row)
    }
}

/// Sums K-series: the pole coefficient stays 1 and free cumulants add.
pub fn k_add(ks: &[KSeries]) -> Result<KSeries, ConvError> {
    let first = ks.first().ok_or(ConvError::EmptySum)?;
    let order = first.order();
    let mut taylor = vec![0.0; order];
    for k in ks {
        if k.order() != order {
            return Err(ConvError::OrderMismatch(order, k.order()));
        }
        for (acc, c) in taylor.iter_mut().zip(k.taylor()) {
            *acc += c;
        }
    }
    Ok(KSeries::new(taylor))
}

/// Numerically evaluable K-function of a whole row:
/// K_n(w) = sum_i K_i(w) - (k_n - 1)/w.
#[derive(Debug, Clone)]
pub struct CompositeK {
    groups: Vec<(KEvaluator, f64)>,
    k_total: f64,
    shortcut: Option<(KEvaluator, f64, f64)>, // (base evaluator, count, alpha)
}

impl CompositeK {
    pub fn new(row: &RowSpec) -> Self {
        let groups = row
            .groups
            .iter()
            .map(|g| (KEvaluator::new(g.measure.clone()), g.count as f64))
            .collect();
        let k_total = row.k_n() as f64;
        let shortcut = row
            .shortcut
            .as_ref()
            .map(|s| (KEvaluator::new(s.base.clone()), k_total, s.alpha));
        Self {
            groups,
            k_total,
            shortcut,
        }
    }

    pub fn k_total(&self) -> f64 {
        self.k_total
    }

    /// K_n(w) for w > 0, through the common-base path when available.
    pub fn eval(&self, w: f64) -> Result<f64, TransformError> {
        Ok(1.0 / w + self.shifted(w)?)
    }

    /// K_n(w) - 1/w as a direct sum of member shifts; no large-term
    /// cancellation even for huge rows.
    pub fn shifted(&self, w: f64) -> Result<f64, TransformError> {
        if let Some((base, count, alpha)) = &self.shortcut {
            return Ok(count * alpha * base.shifted(alpha * w)?);
        }
        let mut acc = 0.0;
        for (ev, count) in &self.groups {
            acc += count * ev.shifted(w)?;
        }
        Ok(acc)
    }

    /// K_n(w) by summing per-group K evaluations, bypassing the common-base
    /// path; reference for the shortcut consistency contract.
    pub fn eval_generic(&self, w: f64) -> Result<f64, TransformError> {
        let mut acc = 1.0 / w;
        for (ev, count) in &self.groups {
            acc += count * ev.shifted(w)?;
        }
        Ok(acc)
    }

    /// K_n'(w) = -1/w^2 + sum_i (K_i'(w) + 1/w^2), each bracket taken from
    /// the cancellation-free r' form.
    pub fn derivative(&self, w: f64) -> Result<f64, TransformError> {
        if let Some((base, count, alpha)) = &self.shortcut {
            return Ok(-1.0 / (w * w) + count * alpha * alpha * base.r_prime(alpha * w)?);
        }
        let mut acc = -1.0 / (w * w);
        for (ev, count) in &self.groups {
            acc += count * ev.r_prime(w)?;
        }
        Ok(acc)
    }
}

/// K_n(w) of the row at real w != 0; negative w goes through reflection.
pub fn composite_k_eval(row: &RowSpec, w: f64) -> Result<f64, ConvError> {
    if w > 0.0 {
        Ok(CompositeK::new(row).eval(w)?)
    } else if w < 0.0 {
        Ok(-CompositeK::new(&row.reflected()).eval(-w)?)
    } else {
        Err(TransformError::NonPositiveW(w).into())
    }
}

/// Which support endpoint to locate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Right,
    Left,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Right => write!(f, "right"),
            Side::Left => write!(f, "left"),
        }
    }
}

/// How the edge estimate was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeMode {
    /// Finite critical point of K_n with |K_n'| below tolerance.
    CriticalPoint,
    /// K_n decreasing through the whole scan; limit value reported.
    HardEdge,
    /// Non-unimodal derivative profile; dense scan minimum reported.
    GridFallback,
}

impl std::fmt::Display for EdgeMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EdgeMode::CriticalPoint => write!(f, "critical_point"),
            EdgeMode::HardEdge => write!(f, "hard_edge"),
            EdgeMode::GridFallback => write!(f, "grid_fallback"),
        }
    }
}

/// Support-edge estimate with an error bound.
#[derive(Debug, Clone)]
pub struct EdgeReport {
    pub side: Side,
    pub edge: f64,
    pub error_bound: f64,
    pub mode: EdgeMode,
    pub w_star: Option<f64>,
}

/// Tunables for the edge search.
#[derive(Debug, Clone)]
pub struct EdgeOptions {
    /// |K_n'(w*)| tolerance as a multiple of v_n.
    pub kprime_tol_factor: f64,
}

impl Default for EdgeOptions {
    fn default() -> Self {
        Self {
            kprime_tol_factor: KPRIME_TOL_FACTOR,
        }
    }
}

/// Locates one support edge of the free convolution of the row.
pub fn support_edge(row: &RowSpec, side: Side) -> Result<EdgeReport, ConvError> {
    support_edge_with(row, side, &EdgeOptions::default())
}

pub fn support_edge_with(
    row: &RowSpec,
    side: Side,
    opts: &EdgeOptions,
) -> Result<EdgeReport, ConvError> {
    match side {
        Side::Right => right_edge(row, opts),
        Side::Left => {
            let mut report = right_edge(&row.reflected(), opts)?;
            report.side = Side::Left;
            report.edge = -report.edge;
            report.w_star = report.w_star.map(|w| -w);
            Ok(report)
        }
    }
}

fn right_edge(row: &RowSpec, opts: &EdgeOptions) -> Result<EdgeReport, ConvError> {
    // A single measure is its own convolution: the edge is the top atom.
    if row.k_n() == 1 {
        return Ok(EdgeReport {
            side: Side::Right,
            edge: row.groups()[0].measure.max_atom(),
            error_bound: 0.0,
            mode: EdgeMode::HardEdge,
            w_star: None,
        });
    }
    let v = row.v_n();
    if v == 0.0 {
        // Centered point masses only; the convolution is a point mass at 0.
        return Ok(EdgeReport {
            side: Side::Right,
            edge: 0.0,
            error_bound: 0.0,
            mode: EdgeMode::HardEdge,
            w_star: None,
        });
    }

    let ck = CompositeK::new(row);
    let kprime_tol = opts.kprime_tol_factor * v;

    // When the critical-point exclusion radius leaves room, no critical
    // point lies below w0 = 1/sqrt(v) - r_n, so the scan starts there.
    let t = row.t_n();
    let d = 32.0 * t;
    let r_n = 4.0 * d / (v * v);
    let inv_sqrt_v = 1.0 / v.sqrt();
    let m_n = 1.0 / (4.0 * row.l_max());
    let certified_start = m_n * v.sqrt() > 4.0 && r_n < inv_sqrt_v;
    let mut w_lo = if certified_start {
        inv_sqrt_v - r_n
    } else {
        SCAN_LO
    };

    // The derivative is negative next to the pole; back off if the start
    // landed past the first critical point.
    let mut guard = 0;
    while ck.derivative(w_lo)? >= 0.0 && guard < 60 {
        w_lo *= 0.25;
        guard += 1;
    }
    if ck.derivative(w_lo)? >= 0.0 {
        return grid_fallback(&ck, opts);
    }

    // Derivative sign profile on a log grid.
    let ratio = (SCAN_HI / w_lo).powf(1.0 / (SCAN_SAMPLES as f64 - 1.0));
    let mut transitions: Vec<(f64, f64)> = Vec::new();
    let mut prev_w = w_lo;
    let mut prev_sign_pos = false;
    for i in 1..SCAN_SAMPLES {
        let w = w_lo * ratio.powi(i as i32);
        let pos = ck.derivative(w)? > 0.0;
        if pos && !prev_sign_pos {
            transitions.push((prev_w, w));
        }
        prev_sign_pos = pos;
        prev_w = w;
    }

    match transitions.len() {
        0 => {
            // Decreasing throughout: hard edge, report the limit estimate.
            let top = ck.eval(SCAN_HI)?;
            let half = ck.eval(SCAN_HI / 2.0)?;
            Ok(EdgeReport {
                side: Side::Right,
                edge: top,
                error_bound: (top - half).abs(),
                mode: EdgeMode::HardEdge,
                w_star: None,
            })
        }
        1 => {
            let (mut a, mut b) = transitions[0];
            // Bisection on the derivative sign down to machine width.
            for _ in 0..100 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if ck.derivative(mid)? > 0.0 {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            let w_star = 0.5 * (a + b);
            let kp = ck.derivative(w_star)?;
            if kp.abs() > kprime_tol {
                return grid_fallback(&ck, opts);
            }
            let edge = ck.eval(w_star)?;
            // Curvature over the final bracket plus the evaluation noise
            // floor of a k_n-term sum.
            let curv = (ck.eval(a)? - edge).abs().max((ck.eval(b)? - edge).abs());
            let noise = ck.k_total() * f64::EPSILON * (1.0 / w_star + edge.abs());
            Ok(EdgeReport {
                side: Side::Right,
                edge,
                error_bound: curv + noise,
                mode: EdgeMode::CriticalPoint,
                w_star: Some(w_star),
            })
        }
        _ => grid_fallback(&ck, opts),
    }
}

/// Dense log-grid minimum for non-unimodal derivative profiles; reports a
/// degraded error bound.
fn grid_fallback(ck: &CompositeK, _opts: &EdgeOptions) -> Result<EdgeReport, ConvError> {
    const POINTS: usize = 4096;
    let ratio = (SCAN_HI / SCAN_LO).powf(1.0 / (POINTS as f64 - 1.0));
    let mut best_w = SCAN_LO;
    let mut best = f64::INFINITY;
    let mut prev_k = f64::INFINITY;
    let mut tail_decreasing = true;
    for i in 0..POINTS {
        let w = SCAN_LO * ratio.powi(i as i32);
        let k = ck.eval(w)?;
        if k < best {
            best = k;
            best_w = w;
        }
        tail_decreasing = k < prev_k;
        prev_k = k;
    }
    if tail_decreasing && best_w >= SCAN_HI / ratio {
        let half = ck.eval(SCAN_HI / 2.0)?;
        return Ok(EdgeReport {
            side: Side::Right,
            edge: best,
            error_bound: (best - half).abs(),
            mode: EdgeMode::HardEdge,
            w_star: None,
        });
    }
    // Golden-section refinement inside the bracketing grid cells.
    let (mut a, mut b) = (best_w / ratio, best_w * ratio);
    let phi = 0.5 * (3.0 - 5.0f64.sqrt());
    let (mut x1, mut x2) = (a + phi * (b - a), b - phi * (b - a));
    let (mut f1, mut f2) = (ck.eval(x1)?, ck.eval(x2)?);
    for _ in 0..200 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = a + phi * (b - a);
            f1 = ck.eval(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = b - phi * (b - a);
            f2 = ck.eval(x2)?;
        }
        if (b - a) <= 1e-13 * b {
            break;
        }
    }
    let w_star = 0.5 * (a + b);
    let edge = ck.eval(w_star)?.min(best);
    let err = (ck.eval(best_w / ratio)? - edge)
        .abs()
        .max((ck.eval(best_w * ratio)? - edge).abs());
    Ok(EdgeReport {
        side: Side::Right,
        edge,
        error_bound: err,
        mode: EdgeMode::GridFallback,
        w_star: Some(w_star),
    })
}

/// Options for the density solver.
#[derive(Debug, Clone)]
pub struct DensityOptions {
    /// Seed each grid point from the previous solution (default) instead of
    /// the independent 1/(x + i eps) seed.
    pub continuation: bool,
    /// Residual tolerance for the outer Newton solve of K_n(omega) = z.
    pub newton_tol: f64,
    pub max_iter: usize,
}

impl Default for DensityOptions {
    fn default() -> Self {
        Self {
            continuation: true,
            newton_tol: 1e-11,
            max_iter: 60,
        }
    }
}

/// Density of the free convolution on a grid: solves K_n(omega) = x + i eps
/// for omega = G_n(x + i eps) and extrapolates -Im(omega)/pi to eps -> 0.
pub fn convolution_density(
    row: &RowSpec,
    xs: &[f64],
    eps: &[f64],
    opts: &DensityOptions,
) -> Result<DensityGrid, ConvError> {
    check_eps(eps)?;
    let mut solver = OmegaSolver::new(row, opts.clone());
    let n = xs.len();
    let mut raw = vec![vec![0.0f64; n]; eps.len()];
    let mut failed = vec![false; n];
    for (ei, &e) in eps.iter().enumerate() {
        solver.reset();
        for (xi, &x) in xs.iter().enumerate() {
            let z = Complex64::new(x, e);
            match solver.solve(z) {
                Some(omega) => raw[ei][xi] = -omega.im / std::f64::consts::PI,
                None => {
                    failed[xi] = true;
                    raw[ei][xi] = 0.0;
                }
            }
        }
    }

    let mut values = Vec::with_capacity(n);
    let mut quality = Vec::with_capacity(n);
    let mut atom_xs: Vec<f64> = Vec::new();
    for xi in 0..n {
        if failed[xi] {
            values.push(0.0);
            quality.push(f64::INFINITY);
            continue;
        }
        let col: Vec<f64> = (0..eps.len()).map(|ei| raw[ei][xi]).collect();
        let (val, mut q) = extrapolate_to_zero(eps, &col);
        if atom_suspected(eps, &col) {
            q = f64::INFINITY;
            atom_xs.push(xs[xi]);
        }
        values.push(val.max(0.0));
        quality.push(q);
    }
    // Neighbors of a detected atom are not meaningful either.
    if !atom_xs.is_empty() {
        for (xi, &x) in xs.iter().enumerate() {
            if atom_xs.iter().any(|&a| (x - a).abs() <= 1e-6) {
                quality[xi] = f64::INFINITY;
            }
        }
    }
    Ok(DensityGrid {
        xs: xs.to_vec(),
        epsilons: eps.to_vec(),
        values,
        quality,
    })
}

/// Damped-Newton solver for K_n(omega) = z with per-group subordination
/// state carried along the grid.
struct OmegaSolver {
    groups: Vec<(AtomicMeasure, f64)>,
    shortcut: Option<(AtomicMeasure, f64, f64)>,
    opts: DensityOptions,
    prev_omega: Option<Complex64>,
    states: Vec<Option<Complex64>>, // per-group zeta seeds
}

impl OmegaSolver {
    fn new(row: &RowSpec, opts: DensityOptions) -> Self {
        let groups: Vec<(AtomicMeasure, f64)> = row
            .groups
            .iter()
            .map(|g| (g.measure.clone(), g.count as f64))
            .collect();
        let k_total = row.k_n() as f64;
        let shortcut = row
            .shortcut
            .as_ref()
            .map(|s| (s.base.clone(), k_total, s.alpha));
        let n_states = if shortcut.is_some() { 1 } else { groups.len() };
        Self {
            groups,
            shortcut,
            opts,
            prev_omega: None,
            states: vec![None; n_states],
        }
    }

    fn reset(&mut self) {
        self.prev_omega = None;
        for s in &mut self.states {
            *s = None;
        }
    }

    /// Returns omega = G_n(z) or None on divergence (already retried from
    /// the independent seed).
    fn solve(&mut self, z: Complex64) -> Option<Complex64> {
        if self.opts.continuation {
            if let Some(prev) = self.prev_omega {
                if let Some(omega) = self.newton(z, prev) {
                    if omega.im <= 0.0 {
                        self.prev_omega = Some(omega);
                        return Some(omega);
                    }
                }
            }
        }
        // Fresh point (or retry): 1/z only seeds reliably far from the
        // support, so start high in the upper half plane where it does and
        // walk the imaginary part down to the target.
        self.reset();
        let mut height = 10.0 * (1.0 + z.norm());
        let mut omega: Option<Complex64> = None;
        loop {
            let zh = Complex64::new(z.re, height);
            let seed = omega.unwrap_or_else(|| zh.inv());
            omega = match self.newton(zh, seed) {
                Some(o) => Some(o),
                None => {
                    for s in &mut self.states {
                        *s = None;
                    }
                    Some(self.newton(zh, zh.inv())?)
                }
            };
            if height <= z.im {
                break;
            }
            height = (height / 4.0).max(z.im);
        }
        let omega = omega?;
        if omega.im > 0.0 {
            return None;
        }
        self.prev_omega = Some(omega);
        Some(omega)
    }

    fn newton(&mut self, z: Complex64, seed: Complex64) -> Option<Complex64> {
        let mut omega = seed;
        let scale = 1.0 + z.norm();
        let mut f = self.residual(omega, z)?;
        for _ in 0..self.opts.max_iter {
            if f.0.norm() <= self.opts.newton_tol * scale {
                return Some(omega);
            }
            let step = f.0 / f.1;
            let mut damp = 1.0;
            let mut advanced = false;
            for _ in 0..12 {
                let cand = omega - damp * step;
                if let Some(fc) = self.residual(cand, z) {
                    if fc.0.norm() < f.0.norm() {
                        omega = cand;
                        f = fc;
                        advanced = true;
                        break;
                    }
                }
                damp *= 0.5;
            }
            if !advanced {
                return None;
            }
        }
        if f.0.norm() <= self.opts.newton_tol * scale * 100.0 {
            Some(omega)
        } else {
            None
        }
    }

    /// (K_n(omega) - z, K_n'(omega)).
    fn residual(&mut self, omega: Complex64, z: Complex64) -> Option<(Complex64, Complex64)> {
        if omega.norm() == 0.0 {
            return None;
        }
        let inv = omega.inv();
        let inv2 = inv * inv;
        if let Some((base, count, alpha)) = self.shortcut.clone() {
            let u = alpha * omega;
            let (s, rp) = self.member_shift(0, &base, u)?;
            let value = inv - z + count * alpha * s;
            let deriv = -inv2 + count * alpha * alpha * rp;
            return Some((value, deriv));
        }
        let mut value = inv - z;
        let mut deriv = -inv2;
        let groups = std::mem::take(&mut self.groups);
        for (gi, (measure, count)) in groups.iter().enumerate() {
            let Some((s, rp)) = self.member_shift(gi, measure, omega) else {
                self.groups = groups;
                return None;
            };
            value += count * s;
            deriv += count * rp;
        }
        self.groups = groups;
        Some((value, deriv))
    }

    /// Solves G(1/u + s) = u for the shifted subordination coordinate s and
    /// returns (s, K'(u) + 1/u^2) for one member measure.
    fn member_shift(
        &mut self,
        state_idx: usize,
        mu: &AtomicMeasure,
        u: Complex64,
    ) -> Option<(Complex64, Complex64)> {
        let inv_u = u.inv();
        let default_seed = Complex64::new(mu.mean() + mu.variance() * u.re, 0.0)
            + Complex64::new(0.0, mu.variance() * u.im);
        let mut s = match self.states[state_idx] {
            Some(zeta) => zeta - inv_u,
            None => default_seed,
        };
        let shifts: Vec<Complex64> = mu.atoms().iter().map(|&t| inv_u - t).collect();
        let tol = 1e-13 * u.norm();
        let mut converged = false;
        for _ in 0..80 {
            let mut g = Complex64::new(0.0, 0.0);
            let mut gp = Complex64::new(0.0, 0.0);
            for (sh, &w) in shifts.iter().zip(mu.weights()) {
                let d = sh + s;
                let dinv = d.inv();
                g += w * dinv;
                gp -= w * dinv * dinv;
            }
            let resid = g - u;
            if resid.norm() <= tol {
                converged = true;
                break;
            }
            let step = resid / gp;
            if !step.re.is_finite() || !step.im.is_finite() {
                break;
            }
            s -= step;
        }
        if !converged {
            // Retry once from the series seed.
            if self.states[state_idx].is_some() {
                self.states[state_idx] = None;
                return self.member_shift(state_idx, mu, u);
            }
            return None;
        }
        let zeta = inv_u + s;
        self.states[state_idx] = Some(zeta);
        let g = cauchy_eval(mu, zeta).ok()?;
        let gp = cauchy_prime(mu, zeta);
        let rp = g_squared_plus_prime(mu, zeta) / (gp * g * g);
        Some((s, rp))
    }
}
