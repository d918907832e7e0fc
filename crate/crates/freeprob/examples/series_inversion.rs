//! Three independent routes to the free cumulants of a measure: formal
//! series reversion, contour-integral coefficients, and explicit
//! enumeration of non-crossing partitions.
//!
//! Run with `cargo run --example series_inversion`.

use freeprob::measure::AtomicMeasure;
use freeprob::series::{
    cumulants_from_moments_nc, k_from_g_formal, lagrange_coeffs, GSeries,
};

fn main() {
    let mu = AtomicMeasure::new(vec![-1.0, 0.5, 1.5], vec![0.5, 0.3, 0.2])
        .unwrap()
        .center();
    println!("measure: atoms {:?}", mu.atoms());

    let order = 8;
    let formal = k_from_g_formal(&GSeries::from_measure(&mu, order));
    let contour = lagrange_coeffs(&mu, order).unwrap();
    let oracle = cumulants_from_moments_nc(&mu.moments(order)).unwrap();

    println!("{:>3} {:>22} {:>22} {:>22}", "k", "formal", "contour", "partitions");
    for k in 1..=order {
        println!(
            "{k:>3} {:>22.15e} {:>22.15e} {:>22.15e}",
            formal.cumulant(k),
            contour.cumulant(k),
            oracle[k - 1]
        );
    }

    let worst = (1..=order)
        .map(|k| {
            (formal.cumulant(k) - contour.cumulant(k))
                .abs()
                .max((formal.cumulant(k) - oracle[k - 1]).abs())
        })
        .fold(0.0f64, f64::max);
    println!("largest disagreement across routes: {worst:.3e}");
}
