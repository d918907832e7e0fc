//! Support edges of normalized sums of standardized two-point measures
//! against the closed form 2 sqrt(1 - 1/n) + (q - p)/sqrt(pq) n^{-1/2}.
//!
//! Run with `cargo run --example binomial_edge`.

use freeprob::conv::{support_edge, RowSpec, Side};
use freeprob::measure::AtomicMeasure;

fn main() {
    println!(
        "{:>5} {:>5} {:>22} {:>22} {:>10}",
        "p", "n", "computed edge", "closed form", "diff"
    );
    for &p in &[0.5, 0.75, 0.9] {
        let q = 1.0 - p;
        let base = AtomicMeasure::standardized_two_point(p).unwrap();
        for &n in &[4u64, 16, 64, 256] {
            let nf = n as f64;
            let row = RowSpec::scaled_copies("binomial", &base, n, 1.0 / nf.sqrt()).unwrap();
            let report = support_edge(&row, Side::Right).unwrap();
            let formula = 2.0 * (1.0 - 1.0 / nf).sqrt() + (q - p) / (p * q).sqrt() / nf.sqrt();
            let note = if nf * p > nf - 1.0 {
                // The convolution keeps an atom of mass np-(n-1) at the
                // classical maximum; the closed form describes only the
                // continuous part there.
                "  <- atom at sqrt(n) sqrt(q/p)"
            } else {
                ""
            };
            println!(
                "{p:>5} {n:>5} {:>22.15} {formula:>22.15} {:>10.2e}{note}",
                report.edge,
                (report.edge - formula).abs()
            );
        }
    }
}
