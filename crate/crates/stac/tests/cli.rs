//! Exercises the installed binary end to end: exit-code contract, JSON and
//! CSV shapes, and the generate/count round trip.

use std::path::Path;
use std::process::{Command, Output};

use stac::formula::parse_dimacs;
use stac::oracle::count_exact;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stac"))
        .args(args)
        .output()
        .expect("binary must launch")
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("stdout is UTF-8")
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).expect("stderr is UTF-8")
}

#[test]
fn help_and_version_exit_zero() {
    let help = run(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    let text = stdout_of(&help);
    assert!(text.contains("count"), "help must list subcommands: {text}");
    assert!(text.contains("bench"));

    let version = run(&["--version"]);
    assert_eq!(version.status.code(), Some(0));
    assert!(stdout_of(&version).contains("stac"));
}

#[test]
fn usage_mistakes_exit_one() {
    assert_eq!(run(&["--bogus-flag"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["count"]).status.code(), Some(1));

    let empty_bench = run(&["bench"]);
    assert_eq!(empty_bench.status.code(), Some(1));
    assert!(stderr_of(&empty_bench).contains("provide at least one"));
}

#[test]
fn runtime_failures_exit_two() {
    let missing = run(&["count", "/nonexistent/never-there.cnf"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(stderr_of(&missing).contains("failed to read"));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.cnf");
    std::fs::write(&path, "p cnf x y\n").unwrap();
    let malformed = run(&["count", path.to_str().unwrap()]);
    assert_eq!(malformed.status.code(), Some(2));
    assert!(stderr_of(&malformed).contains("error:"));
}

#[test]
fn generated_instances_round_trip_through_count() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("random.cnf");
    let gen = run(&[
        "gen",
        "--n",
        "6",
        "--m",
        "7",
        "--seed",
        "3",
        "-o",
        path.to_str().unwrap(),
    ]);
    assert_eq!(gen.status.code(), Some(0));

    let text = std::fs::read_to_string(&path).unwrap();
    let formula = parse_dimacs(&text).expect("generated file must parse");
    assert_eq!(formula.num_vars(), 6);
    assert_eq!(formula.clauses().len(), 7);
    let truth = count_exact(&formula).unwrap();

    let counted = run(&["count", path.to_str().unwrap(), "--algorithm", "exact"]);
    assert_eq!(counted.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&stdout_of(&counted)).unwrap();
    assert_eq!(json["algorithm"], "exact");
    assert_eq!(json["count"], truth.to_string().as_str());
}

fn write_three_model_instance(dir: &Path) -> std::path::PathBuf {
    // Two variables, one clause: three models.
    let path = dir.join("three.cnf");
    std::fs::write(&path, "p cnf 2 1\n1 2 0\n").unwrap();
    path
}

#[test]
fn count_emits_one_json_object_with_run_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_three_model_instance(dir.path());
    let output = run(&[
        "count",
        path.to_str().unwrap(),
        "--algorithm",
        "stac",
        "--runs",
        "10",
        "--seed",
        "1",
    ]);
    assert_eq!(output.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    assert_eq!(json["algorithm"], "stac");
    assert_eq!(json["num_vars"], 2);
    assert_eq!(json["runs_used"], 10);
    assert_eq!(json["epsilon"], 0.8);
    assert_eq!(json["delta"], 0.2);
    assert!(json["estimate"].as_f64().unwrap() > 0.0);
    assert!(json["chosen_depth"].as_u64().is_some());
    assert!(json["sat_queries"].as_u64().unwrap() >= 10);
    assert!(json["stopped_early"].as_bool().is_some());
}

#[test]
fn enumeration_baseline_is_exact_below_its_pivot() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_three_model_instance(dir.path());
    let output = run(&[
        "count",
        path.to_str().unwrap(),
        "--algorithm",
        "approxmc",
        "--runs",
        "5",
        "--pivot",
        "20",
        "--seed",
        "7",
    ]);
    assert_eq!(output.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    assert_eq!(json["count"], "3");
    assert_eq!(json["estimate"], 3.0);
}

#[test]
fn static_run_table_contains_the_default_setting() {
    let output = run(&["table-t"]);
    assert_eq!(output.status.code(), Some(0));
    let text = stdout_of(&output);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("epsilon,delta,runs"));
    assert_eq!(lines.next(), Some("0.8,0.2,22"));

    let grid = run(&["table-t", "--grid"]);
    assert_eq!(grid.status.code(), Some(0));
    assert!(stdout_of(&grid).contains("0.8,0.2,22"));
}

#[test]
fn convergence_table_is_csv_with_one_row_per_width() {
    let output = run(&["validate", "--grid", "2,4,8", "--count", "2", "--depth", "1"]);
    assert_eq!(output.status.code(), Some(0));
    let text = stdout_of(&output);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "num_vars,exact,limit,gap");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("2,"));
    assert!(lines[3].starts_with("8,"));
}

#[test]
fn bench_reports_in_both_formats() {
    let csv = run(&[
        "bench",
        "--generate",
        "6",
        "7",
        "3",
        "--reps",
        "3",
        "--algorithm",
        "stac",
        "--runs",
        "4",
        "--format",
        "csv",
    ]);
    assert_eq!(csv.status.code(), Some(0));
    let text = stdout_of(&csv);
    assert!(text.starts_with("instance,num_vars,exact_count,"));
    assert!(text.contains("random-6v-7c-3"));

    let dir = tempfile::tempdir().unwrap();
    let report_path = dir.path().join("report.json");
    let json_run = run(&[
        "bench",
        "--generate",
        "6",
        "7",
        "3",
        "--reps",
        "3",
        "--algorithm",
        "stac",
        "--runs",
        "4",
        "-o",
        report_path.to_str().unwrap(),
    ]);
    assert_eq!(json_run.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["rows"][0]["instance"], "random-6v-7c-3");
    assert_eq!(report["rows"][0]["estimates"].as_array().unwrap().len(), 3);
    assert_eq!(report["config"]["repetitions"], 3);
}
