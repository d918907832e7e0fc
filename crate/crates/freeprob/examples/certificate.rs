//! Full support certificate for a row of 2^26 normalized coins: row
//! statistics, hypothesis checks, K-estimate margins, the certified
//! interval, and edge containment.
//!
//! Run with `cargo run --example certificate`.

use freeprob::certificate::certify;
use freeprob::conv::RowSpec;
use freeprob::measure::AtomicMeasure;

fn main() {
    let n: u64 = 1 << 26;
    let coin = AtomicMeasure::symmetric_coin(1.0);
    let row = RowSpec::scaled_copies("coins", &coin, n, 1.0 / (n as f64).sqrt()).unwrap();
    let cert = certify(&row).expect("certificate");
    print!("{}", cert.to_record());

    // Also show a row that fails both hypotheses yet still has finite,
    // computable edges: the free Poisson construction at lambda = 1.
    let m: u64 = 1024;
    let member = AtomicMeasure::bernoulli_centered(1.0 / m as f64).unwrap();
    let poisson = RowSpec::scaled_copies("poisson", &member, m, 1.0).unwrap();
    let cert = certify(&poisson).expect("certificate");
    println!("--");
    println!("poisson thm1_pass: {}", cert.thm1_pass);
    println!("poisson thm2_pass: {}", cert.thm2_pass);
    println!(
        "poisson edges: [{}, {}]  (limiting supports -1 and 3)",
        cert.edge_left.as_ref().unwrap().edge,
        cert.edge_right.as_ref().unwrap().edge
    );
}
