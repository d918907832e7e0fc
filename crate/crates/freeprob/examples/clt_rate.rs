//! Rate at which the support edge of a normalized coin sum approaches the
//! semicircle edge 2: the gap decays like 1/n, inside the 5 n^{-1/2}
//! envelope.
//!
//! Run with `cargo run --example clt_rate`.

use freeprob::conv::{support_edge, RowSpec, Side};
use freeprob::measure::AtomicMeasure;

fn main() {
    let coin = AtomicMeasure::symmetric_coin(1.0);
    println!(
        "{:>6} {:>22} {:>14} {:>14} {:>14}",
        "n", "edge", "gap = 2-edge", "gap*sqrt(n)", "5/sqrt(n)"
    );
    for &n in &[4u64, 16, 64, 256, 1024, 4096] {
        let nf = n as f64;
        let row = RowSpec::scaled_copies("clt", &coin, n, 1.0 / nf.sqrt()).unwrap();
        let edge = support_edge(&row, Side::Right).unwrap().edge;
        let gap = 2.0 - edge;
        println!(
            "{n:>6} {edge:>22.15} {gap:>14.6e} {:>14.6e} {:>14.6e}",
            gap * nf.sqrt(),
            5.0 / nf.sqrt()
        );
    }
}
