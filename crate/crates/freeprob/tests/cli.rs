//! End-to-end tests of the command-line binary: outputs, exit codes, and
//! CSV round trips.

use std::path::PathBuf;
use std::process::{Command, Output};

use freeprob::transform::DensityGrid;

fn write_temp(name: &str, content: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("freeprob-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freeprob"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

const BINOM4: &str = "\
measure coin: atoms=[-1, 1] weights=[0.5, 0.5]
row: members=[coin x 4] scale=1/sqrt(k)
";

#[test]
fn edge_command_reports_critical_point() {
    let file = write_temp("binom4.row", BINOM4);
    let out = run(&["edge", file.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("side: right"));
    assert!(text.contains("mode: critical_point"));
    let edge: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("edge: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((edge - 3f64.sqrt()).abs() < 1e-8);

    let out = run(&["edge", file.to_str().unwrap(), "--side", "left"]);
    let text = stdout(&out);
    let edge: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("edge: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((edge + 3f64.sqrt()).abs() < 1e-8);
}

#[test]
fn edge_of_point_mass_row_is_zero() {
    let file = write_temp(
        "delta.row",
        "measure d: atoms=[0] weights=[1]\nrow: members=[d x 3]\n",
    );
    let out = run(&["edge", file.to_str().unwrap()]);
    assert!(out.status.success());
    let edge: f64 = stdout(&out)
        .lines()
        .find_map(|l| l.strip_prefix("edge: "))
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(edge, 0.0);
}

#[test]
fn parse_error_exits_2_with_position() {
    let file = write_temp("broken.row", "measure coin atoms=[1] weights=[1]\n");
    let out = run(&["edge", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 1"), "stderr: {err}");

    let missing = run(&["edge", "/definitely/not/here.row"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn numeric_failure_exits_3() {
    let file = write_temp("arcsine.row", "measure c: atoms=[-1, 1] weights=[0.5, 0.5]\nrow: members=[c x 2]\n");
    // Matrix dimension below the minimum is a numeric-domain failure.
    let out = run(&["mc", file.to_str().unwrap(), "--N", "4", "--trials", "1"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn certify_strict_exit_codes() {
    let example1 = write_temp(
        "example1.row",
        "measure coin: atoms=[-1, 1] weights=[0.5, 0.5]\nrow: members=[coin x 67108864] scale=1/sqrt(k)\n",
    );
    let out = run(&["certify", example1.to_str().unwrap(), "--strict"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("thm1_pass: true"));
    assert!(text.contains("interval_hi: 2.01953125"));
    assert!(text.contains("contained: true"));

    // Four members violate the hypotheses; --strict turns that into exit 4.
    let small = write_temp("binom4b.row", BINOM4);
    let out = run(&["certify", small.to_str().unwrap(), "--strict"]);
    assert_eq!(out.status.code(), Some(4));
    // Without --strict the same row certifies fine (hypotheses reported).
    let out = run(&["certify", small.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("thm2_pass: false"));
}

#[test]
fn certify_json_like_output() {
    let file = write_temp("binom4c.row", BINOM4);
    let out = run(&["certify", file.to_str().unwrap(), "--json-like"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let trimmed = text.trim();
    assert!(trimmed.starts_with('{') && trimmed.ends_with('}'));
    assert!(trimmed.contains("\"thm1_pass\": false"));
    assert!(trimmed.contains("\"edge_right_mode\": \"critical_point\""));
}

#[test]
fn density_csv_round_trips_losslessly() {
    let file = write_temp("arcsine2.row", "measure c: atoms=[-1, 1] weights=[0.5, 0.5]\nrow: members=[c x 2]\n");
    let out_path = write_temp("density.csv", "");
    let out = run(&[
        "density",
        file.to_str().unwrap(),
        "--xmin",
        "-2.5",
        "--xmax",
        "2.5",
        "--points",
        "21",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(&out_path).unwrap();
    let grid = DensityGrid::from_csv(&csv).expect("parses back");
    assert_eq!(grid.xs.len(), 21);
    // Re-serializing the parsed values reproduces the bytes exactly.
    assert_eq!(grid.to_csv(), csv);
    // phi(0) is the arcsine central value.
    let phi0 = grid.values[10];
    assert!((phi0 - 0.1591549).abs() < 1e-3, "phi(0) = {phi0}");
}

#[test]
fn clt_table_matches_closed_form() {
    let measure_file = write_temp(
        "coin.measure",
        "measure coin: atoms=[-1, 1] weights=[0.5, 0.5]\n",
    );
    let out = run(&[
        "clt",
        "--measure-file",
        measure_file.to_str().unwrap(),
        "--n-list",
        "4,16,64",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "n,edge,gap");
    for (line, n) in lines.zip([4u64, 16, 64]) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[0].parse::<u64>().unwrap(), n);
        let edge: f64 = fields[1].parse().unwrap();
        let gap: f64 = fields[2].parse().unwrap();
        let expect = 2.0 * (1.0 - 1.0 / n as f64).sqrt();
        assert!((edge - expect).abs() < 1e-8, "n={n}: {edge}");
        assert!((gap - (2.0 - expect)).abs() < 1e-8);
    }
}

#[test]
fn clt_skewed_coin_offsets() {
    // Two-point measure with weights (0.25, 0.75): the edge picks up the
    // (q - p)/sqrt(pq) n^{-1/2} offset on top of 2 sqrt(1 - 1/n).
    let p = 0.75;
    let q = 0.25;
    let lo = -(p / q * 1f64).sqrt();
    let hi = (q / p * 1f64).sqrt();
    let measure_file = write_temp(
        "skew.measure",
        &format!("measure skew: atoms=[{lo}, {hi}] weights=[{q}, {p}]\n"),
    );
    let out = run(&[
        "clt",
        "--measure-file",
        measure_file.to_str().unwrap(),
        "--n-list",
        "4,16,64",
    ]);
    assert!(out.status.success());
    for (line, n) in stdout(&out).lines().skip(1).zip([4u64, 16, 64]) {
        let fields: Vec<&str> = line.split(',').collect();
        let edge: f64 = fields[1].parse().unwrap();
        let nf = n as f64;
        let expect = 2.0 * (1.0 - 1.0 / nf).sqrt() + (q - p) / (p * q).sqrt() / nf.sqrt();
        assert!((edge - expect).abs() < 1e-8, "n={n}: {edge} vs {expect}");
    }
}

#[test]
fn mc_is_deterministic_given_seed() {
    let file = write_temp("arcsine3.row", "measure c: atoms=[-1, 1] weights=[0.5, 0.5]\nrow: members=[c x 2]\n");
    let out1 = write_temp("spectra1.csv", "");
    let out2 = write_temp("spectra2.csv", "");
    for out_path in [&out1, &out2] {
        let out = run(&[
            "mc",
            file.to_str().unwrap(),
            "--N",
            "32",
            "--trials",
            "3",
            "--seed",
            "99",
            "--out",
            out_path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        assert!(stdout(&out).contains("exceed_fraction"));
    }
    let a = std::fs::read(&out1).unwrap();
    let b = std::fs::read(&out2).unwrap();
    assert_eq!(a, b);
}
