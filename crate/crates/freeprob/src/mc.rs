//! Monte Carlo cross-validation: sums of independently Haar-rotated
//! symmetric matrices approximate the free convolution, and their spectra
//! are compared against the predicted density and edges.
//!
//! This is a soft oracle. Finite-N spectra fluctuate at the edge, so no
//! hard acceptance criterion rests on fluctuation behavior; the reports
//! carry exceedance fractions and gap quantiles instead.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::certificate::Certificate;
use crate::conv::RowSpec;
use crate::measure::AtomicMeasure;

/// Off-diagonal Frobenius norm at which the eigensolver stops.
pub const JACOBI_TOL: f64 = 1e-10;
/// Sweep cap; hitting it drops the trial.
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Largest row (with multiplicity) that is realized as matrices.
pub const MAX_MC_MEMBERS: u64 = 10_000;

#[derive(Debug, Error)]
pub enum McError {
    #[error("matrix dimension {0} is below the minimum of 8")]
    DimensionTooSmall(usize),
    #[error("at least one trial required")]
    NoTrials,
    #[error("row has {0} members; at most {MAX_MC_MEMBERS} can be realized as matrices")]
    RowTooLarge(u64),
    #[error("all {0} trials failed eigensolver convergence")]
    AllTrialsDropped(usize),
}

/// Configuration of one Monte Carlo run.
#[derive(Debug, Clone)]
pub struct McConfig {
    pub n_dim: usize,
    pub trials: usize,
    pub seed: u64,
    pub row: RowSpec,
}

/// Sorted per-trial eigenvalue sequences.
#[derive(Debug, Clone)]
pub struct SpectraSet {
    pub n_dim: usize,
    pub eigenvalues: Vec<Vec<f64>>,
    /// Trials dropped for eigensolver non-convergence.
    pub dropped: usize,
}

impl SpectraSet {
    /// All eigenvalues across trials, sorted ascending.
    pub fn pooled(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.eigenvalues.iter().flatten().copied().collect();
        all.sort_by(f64::total_cmp);
        all
    }

    /// CSV with header `trial,index,eigenvalue`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,index,eigenvalue\n");
        for (t, evs) in self.eigenvalues.iter().enumerate() {
            for (i, ev) in evs.iter().enumerate() {
                out.push_str(&format!("{t},{i},{ev:.16e}\n"));
            }
        }
        out
    }
}

/// Diagonal quantile matrix of a measure: atom t with weight w occupies its
/// largest-remainder share of the n slots, ties resolved by atom order.
pub fn quantile_diagonal(mu: &AtomicMeasure, n: usize) -> Vec<f64> {
    let len = mu.len();
    let mut counts: Vec<usize> = Vec::with_capacity(len);
    let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(len);
    let mut assigned = 0usize;
    for (i, &w) in mu.weights().iter().enumerate() {
        let exact = w * n as f64;
        let base = exact.floor() as usize;
        counts.push(base);
        assigned += base;
        remainders.push((i, exact - base as f64));
    }
    remainders.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    for k in 0..(n - assigned) {
        counts[remainders[k % len].0] += 1;
    }
    let mut diag = Vec::with_capacity(n);
    for (i, &t) in mu.atoms().iter().enumerate() {
        diag.extend(std::iter::repeat(t).take(counts[i]));
    }
    diag
}

/// Haar-distributed orthogonal matrix, column-major, via modified
/// Gram-Schmidt on a standard Gaussian matrix. The R factor's diagonal is
/// positive by construction, which fixes the sign ambiguity.
pub fn haar_orthogonal(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let mut q: Vec<f64> = (0..n * n).map(|_| rng.sample(StandardNormal)).collect();
    for j in 0..n {
        for i in 0..j {
            let (head, tail) = q.split_at_mut(j * n);
            let qi = &head[i * n..i * n + n];
            let vj = &mut tail[..n];
            let r: f64 = qi.iter().zip(vj.iter()).map(|(a, b)| a * b).sum();
            for (v, a) in vj.iter_mut().zip(qi) {
                *v -= r * a;
            }
        }
        let col = &mut q[j * n..j * n + n];
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in col {
            *v /= norm;
        }
    }
    q
}

/// A += Q diag(d) Q^T for column-major orthogonal Q; A is full symmetric
/// row-major.
fn add_conjugated(a: &mut [f64], q: &[f64], d: &[f64], n: usize) {
    for k in 0..n {
        let dk = d[k];
        if dk == 0.0 {
            continue;
        }
        let col = &q[k * n..k * n + n];
        for i in 0..n {
            let s = dk * col[i];
            let row = &mut a[i * n..i * n + n];
            for j in i..n {
                row[j] += s * col[j];
            }
        }
    }
    // Mirror the accumulated upper triangle.
    for i in 0..n {
        for j in (i + 1)..n {
            a[j * n + i] = a[i * n + j];
        }
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations with the
/// classic threshold schedule; converges when the off-diagonal Frobenius
/// norm falls below [`JACOBI_TOL`]. Returns None if the sweep cap is hit.
///
/// Only the upper triangle (and diagonal) is referenced or maintained.
pub fn jacobi_eigenvalues(a: &mut [f64], n: usize) -> Option<Vec<f64>> {
    #[inline(always)]
    fn rotate(a: &mut [f64], n: usize, i: usize, j: usize, k: usize, l: usize, s: f64, tau: f64) {
        let g = a[i * n + j];
        let h = a[k * n + l];
        a[i * n + j] = g - s * (h + g * tau);
        a[k * n + l] = h + s * (g - h * tau);
    }
    let off_norm = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                let v = a[p * n + q];
                s += v * v;
            }
        }
        (2.0 * s).sqrt()
    };
    for sweep in 0..JACOBI_MAX_SWEEPS {
        let off = off_norm(a);
        if off < JACOBI_TOL {
            let mut evs: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
            evs.sort_by(f64::total_cmp);
            return Some(evs);
        }
        // Skip small elements early on; sweep everything once the
        // off-diagonal mass is concentrated.
        let thresh = if sweep < 3 {
            0.2 * off / (n as f64 * n as f64)
        } else {
            0.0
        };
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                let scale = 100.0 * apq.abs();
                if sweep > 3
                    && a[p * n + p].abs() + scale == a[p * n + p].abs()
                    && a[q * n + q].abs() + scale == a[q * n + q].abs()
                {
                    a[p * n + q] = 0.0;
                    continue;
                }
                if apq.abs() <= thresh {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                for i in 0..p {
                    rotate(a, n, i, p, i, q, s, tau);
                }
                for i in p + 1..q {
                    rotate(a, n, p, i, i, q, s, tau);
                }
                for i in q + 1..n {
                    rotate(a, n, p, i, q, i, s, tau);
                }
            }
        }
    }
    None
}

fn derive_trial_seed(seed: u64, trial: u64) -> u64 {
    // SplitMix64 step over (seed, trial counter).
    let mut z = seed ^ trial.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per trial: independently Haar-rotate each member's quantile matrix, sum,
/// and return all eigenvalues. Trials run in parallel but are reproducible:
/// each draws from its own counter-derived stream.
pub fn sample_sum_spectrum(cfg: &McConfig) -> Result<SpectraSet, McError> {
    if cfg.n_dim < 8 {
        return Err(McError::DimensionTooSmall(cfg.n_dim));
    }
    if cfg.trials == 0 {
        return Err(McError::NoTrials);
    }
    let k_n = cfg.row.k_n();
    if k_n > MAX_MC_MEMBERS {
        return Err(McError::RowTooLarge(k_n));
    }
    let n = cfg.n_dim;
    let diags: Vec<(Vec<f64>, u64)> = cfg
        .row
        .groups()
        .iter()
        .map(|g| (quantile_diagonal(&g.measure, n), g.count))
        .collect();

    let results: Vec<Option<Vec<f64>>> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_trial_seed(cfg.seed, trial));
            let mut a = vec![0.0f64; n * n];
            for (diag, count) in &diags {
                for _ in 0..*count {
                    let q = haar_orthogonal(&mut rng, n);
                    add_conjugated(&mut a, &q, diag, n);
                }
            }
            jacobi_eigenvalues(&mut a, n)
        })
        .collect();

    let dropped = results.iter().filter(|r| r.is_none()).count();
    let eigenvalues: Vec<Vec<f64>> = results.into_iter().flatten().collect();
    if eigenvalues.is_empty() {
        return Err(McError::AllTrialsDropped(cfg.trials));
    }
    Ok(SpectraSet {
        n_dim: n,
        eigenvalues,
        dropped,
    })
}

/// Comparison of sampled extreme eigenvalues against a certificate.
#[derive(Debug, Clone)]
pub struct EdgeGapReport {
    pub trials: usize,
    pub dropped: usize,
    /// Fraction of trials whose largest eigenvalue exceeds the certificate
    /// interval.
    pub exceed_fraction: f64,
    /// Quantiles (0, 1/4, 1/2, 3/4, 1) of max eigenvalue minus the
    /// predicted right edge.
    pub gap_quantiles: [f64; 5],
}

impl EdgeGapReport {
    pub fn to_record(&self) -> String {
        format!(
            "trials: {}\ndropped: {}\nexceed_fraction: {}\ngap_min: {:.6e}\ngap_q25: {:.6e}\ngap_median: {:.6e}\ngap_q75: {:.6e}\ngap_max: {:.6e}\n",
            self.trials,
            self.dropped,
            self.exceed_fraction,
            self.gap_quantiles[0],
            self.gap_quantiles[1],
            self.gap_quantiles[2],
            self.gap_quantiles[3],
            self.gap_quantiles[4],
        )
    }
}

/// Summarizes per-trial max eigenvalues against the certificate interval
/// and predicted right edge.
pub fn edge_gap_report(spectra: &SpectraSet, cert: &Certificate) -> EdgeGapReport {
    let edge = cert
        .edge_right
        .as_ref()
        .map(|e| e.edge)
        .unwrap_or(f64::NAN);
    let hi = cert.interval.1;
    let mut gaps: Vec<f64> = spectra
        .eigenvalues
        .iter()
        .map(|evs| evs.last().unwrap() - edge)
        .collect();
    gaps.sort_by(f64::total_cmp);
    let trials = spectra.eigenvalues.len();
    let exceed = spectra
        .eigenvalues
        .iter()
        .filter(|evs| *evs.last().unwrap() > hi)
        .count();
    let q = |f: f64| -> f64 {
        let idx = ((trials - 1) as f64 * f).round() as usize;
        gaps[idx]
    };
    EdgeGapReport {
        trials,
        dropped: spectra.dropped,
        exceed_fraction: exceed as f64 / trials as f64,
        gap_quantiles: [q(0.0), q(0.25), q(0.5), q(0.75), q(1.0)],
    }
}

/// Kolmogorov distance between sorted samples and a reference CDF.
pub fn ks_distance(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max((f - (i as f64 + 1.0) / n).abs());
    }
    d
}
