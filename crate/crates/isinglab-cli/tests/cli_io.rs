//! End-to-end checks of the `isinglab` binary: config parsing, experiment
//! runs, byte-identical reruns, and report merging.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn isinglab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isinglab"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).expect("config written");
    path.to_string_lossy().into_owned()
}

fn estimate_config(out: &str, seed: u64) -> String {
    format!(
        "[experiment]\nkind = estimate\n\n[model]\nfamily = bernoulli\np = 0.6\n\n\
         [event]\nkind = crossing\nsizes = 4 8\n\n\
         [plan]\nsamples = 2000\nseed = {seed}\n\n[output]\ndir = {out}\n"
    )
}

#[test]
fn run_writes_one_row_per_size() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), "exp.cfg", &estimate_config("run1", 9));
    let output = isinglab(&["run", &config], tmp.path());
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));

    let csv = fs::read_to_string(tmp.path().join("run1/results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "quantity,n,mean,stderr,n_samples,seed");
    assert_eq!(lines.len(), 3, "one row per requested size:\n{csv}");
    assert!(lines[1].starts_with("crossing,4,"));
    assert!(lines[2].starts_with("crossing,8,"));

    let summary = fs::read_to_string(tmp.path().join("run1/summary.json")).unwrap();
    assert!(summary.contains("\"kind\": \"estimate\""));
    assert!(summary.contains("config_sha256"));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let config_a = write_config(tmp.path(), "a.cfg", &estimate_config("out-a", 11));
    let config_b = write_config(tmp.path(), "b.cfg", &estimate_config("out-b", 11));
    assert!(isinglab(&["run", &config_a], tmp.path()).status.success());
    assert!(isinglab(&["run", &config_b], tmp.path()).status.success());
    let csv_a = fs::read(tmp.path().join("out-a/results.csv")).unwrap();
    let csv_b = fs::read(tmp.path().join("out-b/results.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
}

#[test]
fn parse_errors_name_the_line_and_column_and_exit_2() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(
        tmp.path(),
        "bad.cfg",
        "[experiment]\nkind = estimate\n\n[model]\nfamily = bernoulli\np = not-a-number\n",
    );
    let output = isinglab(&["run", &config], tmp.path());
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("line 6"), "stderr: {stderr}");
    assert!(stderr.contains("column"), "stderr: {stderr}");
}

#[test]
fn unknown_keys_are_parse_errors() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(
        tmp.path(),
        "unknown.cfg",
        &format!("{}wall_clock = yes\n", estimate_config("out", 3)),
    );
    let output = isinglab(&["run", &config], tmp.path());
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("wall_clock"));
}

#[test]
fn missing_config_file_fails() {
    let tmp = TempDir::new().unwrap();
    let output = isinglab(&["run", "no-such-file.cfg"], tmp.path());
    assert_eq!(output.status.code(), Some(1));
}

fn arm_config(out: &str, event: &str, sizes: &str) -> String {
    format!(
        "[experiment]\nkind = arm-exponent\n\n[model]\nfamily = bernoulli\np = 0.5927\n\n\
         [event]\nkind = {event}\nsizes = {sizes}\n\n\
         [plan]\nsamples = 4000\nseed = 21\n\n[output]\ndir = {out}\n"
    )
}

#[test]
fn report_merges_arm_fits_into_a_scaling_table() {
    let tmp = TempDir::new().unwrap();
    let one = write_config(tmp.path(), "one.cfg", &arm_config("one", "one-arm", "2 4 8"));
    let four = write_config(tmp.path(), "four.cfg", &arm_config("four", "four-arm", "2 4 8"));
    assert!(isinglab(&["run", &one], tmp.path()).status.success());
    assert!(isinglab(&["run", &four], tmp.path()).status.success());
    let output = isinglab(
        &["report", "one/summary.json", "four/summary.json"],
        tmp.path(),
    );
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let table = String::from_utf8_lossy(&output.stdout);
    for quantity in ["delta_r", "nu", "delta", "eta", "beta", "gamma", "gap"] {
        assert!(table.contains(quantity), "missing {quantity} in:\n{table}");
    }
}

#[test]
fn report_without_the_needed_fits_exits_2() {
    let tmp = TempDir::new().unwrap();
    let one = write_config(tmp.path(), "one.cfg", &arm_config("only-one", "one-arm", "2 4"));
    assert!(isinglab(&["run", &one], tmp.path()).status.success());
    let output = isinglab(&["report", "only-one/summary.json"], tmp.path());
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("four-arm"));
}

#[test]
fn report_on_missing_files_exits_2() {
    let tmp = TempDir::new().unwrap();
    let output = isinglab(&["report", "absent.json"], tmp.path());
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn corrlen_run_records_length_and_status() {
    let tmp = TempDir::new().unwrap();
    let text = format!(
        "[experiment]\nkind = corrlen\n\n[model]\nfamily = bernoulli\np = 0.75\n\n\
         [search]\nepsilon = 0.05\nn_max = 64\n\n\
         [plan]\nsamples = 2000\nseed = 5\n\n[output]\ndir = len\n"
    );
    let config = write_config(tmp.path(), "len.cfg", &text);
    let output = isinglab(&["run", &config], tmp.path());
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let csv = fs::read_to_string(tmp.path().join("len/results.csv")).unwrap();
    assert!(csv.contains("correlation-length"), "{csv}");
    let summary = fs::read_to_string(tmp.path().join("len/summary.json")).unwrap();
    assert!(summary.contains("resolved"), "{summary}");
    assert!(summary.contains("supercritical"), "{summary}");
}
