//! End-to-end checks of the binary: identical config + seed must give
//! byte-identical data rows regardless of worker count, config errors
//! must exit 2, and output files must carry the documented header.

use std::path::PathBuf;
use std::process::{Command, Output};

fn run(args: &[&str], out: &PathBuf) -> Output {
    Command::new(env!("CARGO_BIN_EXE_corrdet"))
        .args(args)
        .arg("--output")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("corrdet-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

/// Data rows: everything after the '#' comment block.
fn data_rows(path: &PathBuf) -> Vec<u8> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .flat_map(|l| l.bytes().chain(std::iter::once(b'\n')))
        .collect()
}

fn assert_deterministic(label: &str, args: &[&str]) {
    let mut outputs = Vec::new();
    for (i, workers) in ["1", "4", "4"].iter().enumerate() {
        let out = tmp(&format!("{label}-{i}.csv"));
        let mut full: Vec<&str> = args.to_vec();
        full.extend(["--workers", workers]);
        let res = run(&full, &out);
        assert!(
            res.status.success(),
            "{label} run {i} failed: {}",
            String::from_utf8_lossy(&res.stderr)
        );
        outputs.push(data_rows(&out));
    }
    assert_eq!(outputs[0], outputs[1], "{label}: workers 1 vs 4 differ");
    assert_eq!(outputs[1], outputs[2], "{label}: repeat run differs");
}

#[test]
fn simulate_rows_are_byte_identical_across_workers() {
    assert_deterministic(
        "simulate",
        &[
            "simulate", "--class", "clique", "--n", "30", "--m", "8", "--k", "3", "--rho", "0.4",
            "--detector", "squared-sum", "--threshold", "calibrated", "--level", "0.1",
            "--calibration-trials", "1000", "--trials", "400", "--seed", "11",
        ],
    );
}

#[test]
fn sweep_rows_are_byte_identical_across_workers() {
    assert_deterministic(
        "sweep",
        &[
            "sweep", "--class", "block", "--n", "20", "--m", "6", "--k", "4", "--rho", "0.1",
            "--detector", "localized-squared-sum", "--axis", "rho", "--grid", "0.2,0.5,0.8",
            "--trials", "300", "--seed", "5",
        ],
    );
}

#[test]
fn oracle_rows_are_byte_identical_across_workers() {
    assert_deterministic(
        "oracle",
        &[
            "oracle", "--class", "matching", "--k", "2", "--m", "4", "--rho", "0.6", "--trials",
            "500", "--seed", "23",
        ],
    );
}

#[test]
fn lower_bound_rows_are_byte_identical_across_workers() {
    assert_deterministic(
        "lower-bound",
        &[
            "lower-bound", "--class", "clique", "--n", "100", "--m", "10", "--k", "5",
            "--rho-grid", "0.1,0.3,0.5,0.7",
        ],
    );
}

#[test]
fn rgg_rows_are_byte_identical_across_workers() {
    assert_deterministic(
        "rgg",
        &["rgg", "--n", "24", "--d", "6", "--replicates", "9", "--seed", "3"],
    );
}

#[test]
fn calibrate_rows_are_byte_identical_across_workers() {
    assert_deterministic(
        "calibrate",
        &[
            "calibrate", "--class", "clique", "--n", "15", "--m", "5", "--k", "2", "--rho", "0.0",
            "--detector", "max-correlation", "--level", "0.2", "--trials", "2000", "--seed", "7",
        ],
    );
}

#[test]
fn missing_required_flag_exits_2() {
    let out = tmp("missing.csv");
    let res = run(&["simulate", "--class", "clique", "--n", "10", "--m", "4", "--k", "2"], &out);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("--rho"), "stderr: {err}");
}

#[test]
fn rho_out_of_theorem_range_exits_2_with_range() {
    let out = tmp("range.csv");
    let res = run(
        &["lower-bound", "--class", "clique", "--n", "10", "--m", "4", "--k", "2", "--rho", "0.9"],
        &out,
    );
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("0.9"), "stderr: {err}");
}

#[test]
fn minimal_run_writes_header_and_one_row() {
    let out = tmp("minimal.csv");
    let res = run(
        &[
            "simulate", "--class", "clique", "--n", "10", "--m", "4", "--k", "2", "--rho", "0.5",
            "--detector", "max-correlation", "--trials", "50",
        ],
        &out,
    );
    assert!(res.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# tool: corrdet"));
    assert!(lines.next().unwrap().starts_with("# config:"));
    assert!(lines.next().unwrap().starts_with("# master_seed:"));
    let header = lines.next().unwrap();
    assert!(header.starts_with("class,n,m,k,rho,detector"));
    assert_eq!(lines.count(), 1); // exactly one data row
    assert!(!text.contains('\r'), "LF line endings only");
}

#[test]
fn json_and_csv_agree_on_values() {
    let args = [
        "oracle", "--class", "clique", "--n", "6", "--m", "3", "--k", "2", "--rho", "0.5",
        "--trials", "300", "--seed", "2",
    ];
    let csv_path = tmp("agree.csv");
    let mut a = args.to_vec();
    a.extend(["--format", "csv"]);
    assert!(run(&a, &csv_path).status.success());
    let json_path = tmp("agree.json");
    let mut b = args.to_vec();
    b.extend(["--format", "json"]);
    assert!(run(&b, &json_path).status.success());

    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    let row = &doc["rows"][0];
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let data = csv.lines().last().unwrap();
    let cells: Vec<&str> = data.split(',').collect();
    let cols: Vec<&str> = csv
        .lines()
        .find(|l| !l.starts_with('#'))
        .unwrap()
        .split(',')
        .collect();
    let risk_idx = cols.iter().position(|c| *c == "risk").unwrap();
    let risk_csv: f64 = cells[risk_idx].parse().unwrap();
    assert_eq!(risk_csv, row["risk"].as_f64().unwrap(), "CSV float reload is bit-faithful");
}
