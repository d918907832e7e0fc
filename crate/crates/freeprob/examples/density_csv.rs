//! Density recovery for two free convolutions: the arcsine law (two coins)
//! and a 64-fold normalized coin sum approaching the semicircle. Emits the
//! CSV produced by the `density` command.
//!
//! Run with `cargo run --example density_csv`.

use freeprob::conv::{convolution_density, DensityOptions, RowSpec};
use freeprob::measure::AtomicMeasure;

fn main() {
    let coin = AtomicMeasure::symmetric_coin(1.0);
    let eps = [1e-2, 5e-3, 2.5e-3];

    let arcsine = RowSpec::new("arcsine", vec![coin.clone(), coin.clone()]).unwrap();
    let xs: Vec<f64> = (0..=20).map(|i| -2.5 + 0.25 * i as f64).collect();
    let grid = convolution_density(&arcsine, &xs, &eps, &DensityOptions::default()).unwrap();
    println!("# arcsine pair (coin + coin); 1/(pi sqrt(4-x^2)) on [-2,2]");
    print!("{}", grid.to_csv());

    let clt = RowSpec::scaled_copies("clt64", &coin, 64, 1.0 / 8.0).unwrap();
    let grid = convolution_density(&clt, &xs, &eps, &DensityOptions::default()).unwrap();
    println!("# 64-fold normalized coin; phi(0) -> 1/pi = {}", 1.0 / std::f64::consts::PI);
    print!("{}", grid.to_csv());
    println!("# trapezoid mass: {}", grid.mass());
}
