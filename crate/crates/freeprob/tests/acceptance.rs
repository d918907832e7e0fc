//! Acceptance suite: one test per shipped guarantee, each printing a
//! PASS line with its runtime (visible with `--nocapture`).
//!
//! Heavy tests serialize behind a mutex so runtime budgets are measured
//! with the machine to themselves.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use freeprob::certificate::{certificate_params, certify, k_estimate_check, row_stats};
use freeprob::conv::{
    convolution_density, k_add, support_edge, DensityOptions, RowSpec, Side,
};
use freeprob::measure::AtomicMeasure;
use freeprob::mc::{ks_distance, sample_sum_spectrum, McConfig};
use freeprob::series::{
    cumulants_from_moments_nc, k_from_g_formal, lagrange_coeffs, moments_from_cumulants_nc,
    GSeries,
};

static HEAVY: Mutex<()> = Mutex::new(());

fn coin() -> AtomicMeasure {
    AtomicMeasure::symmetric_coin(1.0)
}

fn normalized_row(base: &AtomicMeasure, n: u64) -> RowSpec {
    RowSpec::scaled_copies("row", base, n, 1.0 / (n as f64).sqrt()).unwrap()
}

fn pass(name: &str, start: Instant, budget: Duration) {
    let elapsed = start.elapsed();
    println!("criterion {name}: PASS ({elapsed:.2?})");
    assert!(
        elapsed <= budget,
        "criterion {name} exceeded its runtime budget: {elapsed:.2?} > {budget:.2?}"
    );
}

/// Uniform random 2-4 atom centered measure with unit-order variance.
fn random_centered_measure(rng: &mut impl Rng) -> AtomicMeasure {
    loop {
        let n_atoms = rng.random_range(2..=4usize);
        let mut atoms: Vec<f64> = (0..n_atoms).map(|_| rng.random_range(-1.5..1.5)).collect();
        atoms.sort_by(f64::total_cmp);
        if atoms.windows(2).any(|w| w[1] - w[0] < 0.1) {
            continue;
        }
        let raw: Vec<f64> = (0..n_atoms).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu = AtomicMeasure::new(atoms, weights).unwrap().center();
        if mu.variance() > 0.05 {
            return mu;
        }
    }
}

/// Normalized-sum row of identical copies with the member count chosen so
/// that both certificate hypotheses hold at this n.
fn thm2_passing_row(base: &AtomicMeasure) -> RowSpec {
    let ratio = base.norm_bound() / base.variance().sqrt();
    let min_sqrt_k = 256.0 * ratio.powi(3);
    let mut k: u64 = 1;
    while ((k as f64).sqrt()) < 2.0 * min_sqrt_k {
        k *= 2;
    }
    normalized_row(base, k)
}

#[test]
fn criterion_1_binomial_closed_form_edges() {
    let start = Instant::now();
    for &p in &[0.5, 0.75, 0.9] {
        let q = 1.0 - p;
        let base = AtomicMeasure::standardized_two_point(p).unwrap();
        for &n in &[4u64, 16, 64, 256] {
            let row = normalized_row(&base, n);
            let nf = n as f64;
            let skew = (q - p) / (p * q).sqrt() / nf.sqrt();
            let x2 = 2.0 * (1.0 - 1.0 / nf).sqrt() + skew;
            let x1 = -2.0 * (1.0 - 1.0 / nf).sqrt() + skew;
            let right = support_edge(&row, Side::Right).unwrap();
            let left = support_edge(&row, Side::Left).unwrap();
            if nf * p > nf - 1.0 {
                // When the top atom's weight satisfies n p > n - 1, the
                // convolution keeps an atom of mass n p - (n - 1) at the
                // classical maximum sqrt(n) sqrt(q/p) (verified against
                // Haar-rotation Monte Carlo), so the interval formula
                // describes only the absolutely continuous part. The true
                // support edge is the atom, reported as a hard edge whose
                // limit estimate carries O(mass / w_top) error.
                let atom = nf.sqrt() * (q / p).sqrt();
                assert!(
                    (right.edge - atom).abs() < 1e-6,
                    "p={p} n={n}: right {} vs atom {atom}",
                    right.edge
                );
            } else {
                assert!(
                    (right.edge - x2).abs() < 1e-8,
                    "p={p} n={n}: right {} vs {x2}",
                    right.edge
                );
            }
            assert!(
                (left.edge - x1).abs() < 1e-8,
                "p={p} n={n}: left {} vs {x1}",
                left.edge
            );
        }
    }
    pass("1 (binomial closed-form edges)", start, Duration::from_secs(5));
}

#[test]
fn criterion_2_clt_edge_rate() {
    let start = Instant::now();
    let mut prev_gap = f64::INFINITY;
    for &n in &[4u64, 16, 64, 256] {
        let row = normalized_row(&coin(), n);
        let edge = support_edge(&row, Side::Right).unwrap().edge;
        let gap = 2.0 - edge;
        let nf = n as f64;
        assert!(gap > 0.0, "n={n}: gap {gap}");
        assert!(gap < prev_gap, "n={n}: gap not decreasing");
        // Envelope C n^{-1/2} with C = 5 L^3 / sigma^2 = 5 for the coin.
        assert!(gap <= 5.0 / nf.sqrt(), "n={n}: gap {gap} above envelope");
        // The n^{-1/2} rate class is not beaten into blow-up:
        // gap * sqrt(n) stays bounded.
        assert!(gap * nf.sqrt() <= 5.0, "n={n}: gap*sqrt(n) = {}", gap * nf.sqrt());
        prev_gap = gap;
    }
    pass("2 (CLT edge rate)", start, Duration::from_secs(5));
}

#[test]
fn criterion_3_certificate_arithmetic_2pow26() {
    let start = Instant::now();
    let row = normalized_row(&coin(), 1 << 26);
    let cert = certify(&row).unwrap();
    assert_eq!(cert.thm1_ratio, 2f64.powi(-13));
    assert!(cert.thm1_pass);
    assert_eq!(cert.params.d_n, 2f64.powi(-8));
    assert_eq!(cert.interval, (-2.01953125, 2.01953125));
    assert_eq!(cert.contained, Some(true));
    pass("3 (certificate arithmetic at n=2^26)", start, Duration::from_secs(1));
}

#[test]
fn criterion_4_k_estimates_on_random_rows() {
    let _guard = HEAVY.lock().unwrap();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x4b45);
    for trial in 0..100 {
        let base = random_centered_measure(&mut rng);
        let row = thm2_passing_row(&base);
        let stats = row_stats(&row);
        let params = certificate_params(&row, &stats, None).unwrap();
        // Hypotheses must really hold for the generated row.
        assert!(params.m_n * stats.v_n.sqrt() > 4.0, "trial {trial}");
        assert!(params.d_n / stats.v_n.powf(1.5) <= 0.125, "trial {trial}");
        // Zero violations allowed; the check errors on any.
        let report = k_estimate_check(&row, &params, 64)
            .unwrap_or_else(|e| panic!("trial {trial}: {e}"));
        assert!(report.value_margin >= 0.0);
        assert!(report.derivative_margin >= 0.0);
    }
    pass("4 (K estimates on 100 random rows)", start, Duration::from_secs(30));
}

#[test]
fn criterion_5_lagrange_contour_coefficients() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x4c41);
    for trial in 0..20 {
        let mu = random_centered_measure(&mut rng);
        let order = 9; // exposes b^{(1)}..b^{(8)}
        let contour = lagrange_coeffs(&mu, order).unwrap();
        let formal = k_from_g_formal(&GSeries::from_measure(&mu, order));
        let l = mu.norm_bound();
        for k in 1..order {
            let b = -contour.cumulant(k + 1);
            let f = -formal.cumulant(k + 1);
            assert!(
                (b - f).abs() < 1e-8,
                "trial {trial} k={k}: contour {b} vs formal {f}"
            );
            // |b_k| <= (R/k) m^{-k} with R = 2L, m = 1/(4L).
            let bound = 2.0 * l / (k as f64) * (4.0 * l).powi(k as i32);
            assert!(b.abs() <= bound, "trial {trial} k={k}: |{b}| > {bound}");
        }
    }
    pass("5 (Lagrange contour coefficients)", start, Duration::from_secs(10));
}

#[test]
fn criterion_6_nc_oracle_equivalence_and_additivity() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x4e43);
    let mut measures = Vec::new();
    for trial in 0..50 {
        let mu = random_centered_measure(&mut rng);
        let m = mu.moments(10);
        let formal = k_from_g_formal(&GSeries::from_moments(&m));
        let oracle = cumulants_from_moments_nc(&m).unwrap();
        for k in 1..=10 {
            assert!(
                (formal.cumulant(k) - oracle[k - 1]).abs() < 1e-10,
                "trial {trial} kappa_{k}: {} vs {}",
                formal.cumulant(k),
                oracle[k - 1]
            );
        }
        measures.push(mu);
    }
    // Additivity of free cumulants under K-addition, cross-checked through
    // the partition oracle in both directions.
    for pair in measures.chunks(2).take(25) {
        let (a, b) = (&pair[0], &pair[1]);
        let ka = k_from_g_formal(&GSeries::from_measure(a, 8));
        let kb = k_from_g_formal(&GSeries::from_measure(b, 8));
        let sum = k_add(&[ka, kb]).unwrap();
        let m_sum = moments_from_cumulants_nc(sum.taylor()).unwrap();
        let back = cumulants_from_moments_nc(&m_sum).unwrap();
        for k in 2..=8 {
            assert!(
                (sum.cumulant(k) - back[k - 1]).abs() < 1e-9,
                "kappa_{k}: {} vs {}",
                sum.cumulant(k),
                back[k - 1]
            );
        }
    }
    pass("6 (NC oracle equivalence + additivity)", start, Duration::from_secs(20));
}

#[test]
fn criterion_7_density_recovery() {
    let _guard = HEAVY.lock().unwrap();
    let start = Instant::now();
    let eps = [1e-2, 5e-3, 2.5e-3];

    // 64-fold normalized coin: the density at 0 approaches the semicircle
    // value 1/pi and the grid carries unit mass.
    let row = normalized_row(&coin(), 64);
    let xs: Vec<f64> = (0..=250).map(|i| -2.5 + 0.02 * i as f64).collect();
    let grid = convolution_density(&row, &xs, &eps, &DensityOptions::default()).unwrap();
    let phi0 = grid.values[125];
    assert!(
        (phi0 - 1.0 / std::f64::consts::PI).abs() < 2e-2,
        "phi(0) = {phi0}"
    );
    let mass = grid.mass();
    assert!((mass - 1.0).abs() < 2e-2, "mass = {mass}");

    // Arcsine pair: phi(0) = 1/(2 pi).
    let arcsine = RowSpec::new("arcsine", vec![coin(), coin()]).unwrap();
    let grid =
        convolution_density(&arcsine, &[0.0], &eps, &DensityOptions::default()).unwrap();
    assert!(
        (grid.values[0] - 0.1591549).abs() < 1e-3,
        "arcsine phi(0) = {}",
        grid.values[0]
    );

    // Far outside the certified interval the density vanishes.
    let grid =
        convolution_density(&row, &[5.0, -7.5], &eps, &DensityOptions::default()).unwrap();
    assert!(grid.values[0].abs() < 1e-8);
    assert!(grid.values[1].abs() < 1e-8);

    pass("7 (density recovery)", start, Duration::from_secs(60));
}

#[test]
fn criterion_8_free_poisson_edges() {
    let _guard = HEAVY.lock().unwrap();
    let start = Instant::now();
    let mut right_gaps = Vec::new();
    let mut left_gaps = Vec::new();
    for &n in &[256u64, 1024] {
        let member = AtomicMeasure::bernoulli_centered(1.0 / n as f64).unwrap();
        let row = RowSpec::scaled_copies("poisson", &member, n, 1.0).unwrap();
        let cert = certify(&row).unwrap();
        assert!(!cert.thm1_pass, "n={n}");
        assert!(!cert.thm2_pass, "n={n}");
        let right = cert.edge_right.as_ref().unwrap().edge;
        let left = cert.edge_left.as_ref().unwrap().edge;
        assert!(right.is_finite() && left.is_finite());
        right_gaps.push((right - 3.0).abs());
        left_gaps.push((left - (-1.0)).abs());
    }
    // The right edge approaches the centered Marchenko-Pastur edge 3
    // strictly; the left edge sits at -1 (hard edge) for every n, so its
    // gap can only be required not to grow beyond the numerical floor.
    assert!(
        right_gaps[1] < right_gaps[0],
        "right gaps {right_gaps:?} do not shrink"
    );
    assert!(left_gaps.iter().all(|g| *g < 1e-6), "left gaps {left_gaps:?}");
    assert!(left_gaps[1] <= left_gaps[0] + 1e-9);
    pass("8 (free Poisson edges)", start, Duration::from_secs(30));
}

#[test]
fn criterion_9_monte_carlo_arcsine() {
    let _guard = HEAVY.lock().unwrap();
    let start = Instant::now();
    let row = RowSpec::new("arcsine", vec![coin(), coin()]).unwrap();

    // Predicted CDF from the density machinery.
    let eps = [1e-2, 5e-3, 2.5e-3];
    let xs: Vec<f64> = (0..=420).map(|i| -2.1 + 0.01 * i as f64).collect();
    let grid = convolution_density(&row, &xs, &eps, &DensityOptions::default()).unwrap();
    let mut cum = vec![0.0f64];
    for i in 1..xs.len() {
        let inc = 0.5 * (grid.values[i] + grid.values[i - 1]) * (xs[i] - xs[i - 1]);
        cum.push(cum[i - 1] + inc);
    }
    let total = *cum.last().unwrap();
    let cdf = move |x: f64| -> f64 {
        if x <= xs[0] {
            return 0.0;
        }
        if x >= *xs.last().unwrap() {
            return 1.0;
        }
        let idx = ((x - xs[0]) / 0.01).floor() as usize;
        let frac = (x - xs[idx]) / 0.01;
        ((cum[idx] + frac * (cum[idx + 1] - cum[idx])) / total).clamp(0.0, 1.0)
    };

    let cfg = McConfig {
        n_dim: 512,
        trials: 32,
        seed: 20260811,
        row,
    };
    let spectra = sample_sum_spectrum(&cfg).unwrap();
    assert_eq!(spectra.dropped, 0);

    let pooled = spectra.pooled();
    let d = ks_distance(&pooled, cdf);
    assert!(d <= 0.08, "Kolmogorov distance {d}");

    let inside = spectra
        .eigenvalues
        .iter()
        .filter(|evs| evs.iter().all(|x| x.abs() <= 2.3))
        .count();
    assert!(
        inside as f64 >= 0.95 * spectra.eigenvalues.len() as f64,
        "only {inside} trials inside |x| <= 2.3"
    );
    pass("9 (Monte Carlo arcsine cross-check)", start, Duration::from_secs(120));
}
