//! Monte Carlo cross-check at small scale: spectra of sums of Haar-rotated
//! quantile matrices against the predicted arcsine law and edge.
//!
//! Run with `cargo run --example matrix_crosscheck`.

use freeprob::certificate::certify;
use freeprob::conv::{convolution_density, DensityOptions, RowSpec};
use freeprob::measure::AtomicMeasure;
use freeprob::mc::{edge_gap_report, ks_distance, sample_sum_spectrum, McConfig};

fn main() {
    let coin = AtomicMeasure::symmetric_coin(1.0);
    let row = RowSpec::new("arcsine", vec![coin.clone(), coin]).unwrap();
    let cert = certify(&row).expect("certificate");

    let cfg = McConfig {
        n_dim: 128,
        trials: 8,
        seed: 7,
        row: row.clone(),
    };
    let spectra = sample_sum_spectrum(&cfg).expect("spectra");
    print!("{}", edge_gap_report(&spectra, &cert).to_record());

    // Kolmogorov distance between the pooled spectrum and the CDF obtained
    // by integrating the predicted density.
    let eps = [1e-2, 5e-3, 2.5e-3];
    let xs: Vec<f64> = (0..=420).map(|i| -2.1 + 0.01 * i as f64).collect();
    let grid = convolution_density(&row, &xs, &eps, &DensityOptions::default()).unwrap();
    let mut cum = vec![0.0f64];
    for i in 1..xs.len() {
        cum.push(cum[i - 1] + 0.005 * (grid.values[i] + grid.values[i - 1]));
    }
    let total = *cum.last().unwrap();
    let cdf = |x: f64| -> f64 {
        if x <= xs[0] {
            0.0
        } else if x >= *xs.last().unwrap() {
            1.0
        } else {
            let idx = ((x - xs[0]) / 0.01).floor() as usize;
            let frac = (x - xs[idx]) / 0.01;
            ((cum[idx] + frac * (cum[idx + 1] - cum[idx])) / total).clamp(0.0, 1.0)
        }
    };
    let d = ks_distance(&spectra.pooled(), cdf);
    println!("kolmogorov_distance: {d:.4}");
}
