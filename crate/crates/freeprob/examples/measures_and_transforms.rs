//! Build atomic measures, take moments, and evaluate the Cauchy and K
//! transforms pointwise.
//!
//! Run with `cargo run --example measures_and_transforms`.

use freeprob::measure::AtomicMeasure;
use freeprob::transform::{cauchy_eval, k_eval, semicircle_density};
use num_complex::Complex64;

fn main() {
    let coin = AtomicMeasure::symmetric_coin(1.0);
    println!("coin atoms   : {:?}", coin.atoms());
    println!("coin moments : {:?}", coin.moments(6).values());

    let skew = AtomicMeasure::standardized_two_point(0.75).unwrap();
    println!(
        "standardized two-point (p = 3/4): atoms {:?}, weights {:?}",
        skew.atoms(),
        skew.weights()
    );
    println!(
        "  mean {:+.3e}, variance {:.6}",
        skew.mean(),
        skew.variance()
    );

    // G maps the upper half plane down; K inverts it on the real ray.
    let z = Complex64::new(2.0, 0.0);
    let g = cauchy_eval(&coin, z).unwrap();
    println!("G_coin(2)    = {}", g.re);
    let w = g.re;
    let x = k_eval(&coin, w).unwrap();
    println!("K_coin(G(2)) = {x}  (round trip)");
    println!(
        "K_coin(1/2)  = {}  (closed form 1 + sqrt(2) = {})",
        k_eval(&coin, 0.5).unwrap(),
        1.0 + 2f64.sqrt()
    );

    println!(
        "semicircle density at 0 (a2 = 1): {}  (1/pi = {})",
        semicircle_density(1.0, 0.0),
        1.0 / std::f64::consts::PI
    );
}
