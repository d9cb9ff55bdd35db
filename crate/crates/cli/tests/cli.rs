use std::io::Write;
use std::process::{Command, Output};

use serde_json::Value;

fn zdiv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zdiv")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json_lines(o: &Output) -> Vec<Value> {
    String::from_utf8(o.stdout.clone())
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap_or_else(|e| panic!("not JSON: {l}: {e}")))
        .collect()
}

#[test]
fn mul_examples() {
    let o = zdiv(&["--group", "cyclic:3", "mul", "1 - a", "1 + a + a^2"]);
    assert_eq!(code(&o), 0);
    let v = &json_lines(&o)[0];
    assert_eq!(v["product"], "0");
    assert_eq!(v["support_size"], 0);

    let o = zdiv(&["--group", "free:2", "mul", "1 + a", "1 + b"]);
    assert_eq!(json_lines(&o)[0]["support_size"], 4);
}

#[test]
fn malformed_expression_reports_column() {
    let o = zdiv(&["mul", "1 + & a", "1"]);
    assert_eq!(code(&o), 2);
    assert!(o.stdout.is_empty());
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("column 5"), "{err}");
}

#[test]
fn extract_canonical_instance() {
    let o = zdiv(&["--group", "cyclic:3", "extract", "1 + a + a^2", "1 - a"]);
    assert_eq!(code(&o), 0);
    let v = &json_lines(&o)[0];
    assert_eq!(v["relation_b"]["reduced"], "X1·X2");
    assert_eq!(v["relation_b"]["raw"], "g1·g2");
    assert_eq!(v["relation_b"]["verified"], true);
    assert_eq!(v["relation_m"]["reduced"], "X2^-2·X1");
    assert_eq!(v["relation_m"]["verified"], true);
    assert_eq!(v["structure"]["k_c"], 1);
    assert_eq!(v["structure"]["k_p"], 0);

    let traced = zdiv(&["--group", "cyclic:3", "extract", "1 + a + a^2", "1 - a", "--trace"]);
    assert!(json_lines(&traced)[0]["trace"]["cycles_b"].is_array());
}

#[test]
fn extract_cycle_case() {
    let o = zdiv(&["--group", "cyclic:4", "extract", "1 + a - 2*a^2", "1 + a + a^2 + a^3"]);
    assert_eq!(code(&o), 0);
    let v = &json_lines(&o)[0];
    assert_eq!(v["kind"], "cycle");
    assert_eq!(v["relation_cycle"]["reduced"], "X1^4");
}

#[test]
fn extract_failures() {
    let o = zdiv(&["--group", "cyclic:4", "extract", "1 + a + a^2", "1 + a + a^2 + a^3"]);
    assert_eq!(code(&o), 3);
    let o = zdiv(&["--group", "cyclic:3", "extract", "1 + a + a^2", "0"]);
    assert_eq!(code(&o), 4);
    let o = zdiv(&["--group", "cyclic:3", "extract", "a + a^2", "1 - a"]);
    assert_eq!(code(&o), 4);
    let o = zdiv(&["--group", "free:2", "extract", "a + a^2 + b", "1"]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8(o.stderr).unwrap().contains("left-translate"));
}

#[test]
fn scan_exit_codes() {
    let o = zdiv(&["scan", "--a", "1 + a + b", "--n-max", "5"]);
    assert_eq!(code(&o), 0);
    let lines = json_lines(&o);
    assert_eq!(lines.len(), 4);
    for l in &lines {
        assert_eq!(l["feasible_count"], 0);
    }

    let o = zdiv(&["--group", "cyclic:3", "scan", "--a", "1 + a + a^2", "--n-max", "2"]);
    assert_eq!(code(&o), 10);
    let v = &json_lines(&o)[0];
    assert_eq!(v["witness"]["verdict"]["verdict"], "feasible");

    let o = zdiv(&["scan", "--a", "1 + a + b", "--n-max", "1"]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
}

#[test]
fn scan_alpha_list_and_verbose() {
    let o = zdiv(&["scan", "--a", "1 + a + b", "--n-max", "3", "--alpha-list", "1,1;1,-1", "--verbose"]);
    assert_eq!(code(&o), 0);
    let lines = json_lines(&o);
    let summaries: Vec<_> = lines.iter().filter(|l| l.get("structures_valid").is_some()).collect();
    assert_eq!(summaries.len(), 4);
    assert_eq!(summaries[2]["a"], "1 + a - b");
    assert!(lines.iter().any(|l| l["verdict"]["verdict"] == "word"));
}

#[test]
fn scan_output_is_worker_independent() {
    let args = |w: &'static str| ["scan", "--a", "1 + a + b", "--n-max", "4", "--verbose", "--workers", w];
    let one = zdiv(&args("1"));
    let eight = zdiv(&args("8"));
    assert_eq!(code(&one), 0);
    assert_eq!(one.stdout, eight.stdout);
}

#[test]
fn config_file_and_overrides() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, "# instance\ngroup = cyclic:3\nfield = Q\noutput = text").unwrap();
    let path = file.path().to_str().unwrap();
    let o = zdiv(&["--config", path, "mul", "1 - a", "1 + a + a^2"]);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "0\nsupp 0\n");

    let o = zdiv(&["--config", path, "--output", "json", "--group", "free:2", "mul", "a", "a"]);
    assert_eq!(json_lines(&o)[0]["product"], "a^2");

    let mut bad = tempfile::NamedTempFile::new().unwrap();
    writeln!(bad, "group = cyclic:3\nthreads = 4").unwrap();
    let o = zdiv(&["--config", bad.path().to_str().unwrap(), "mul", "1", "1"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8(o.stderr).unwrap().contains("unknown key"));
}

#[test]
fn bad_config_values() {
    assert_eq!(code(&zdiv(&["--group", "cyclic:0", "mul", "1", "1"])), 2);
    assert_eq!(code(&zdiv(&["--field", "GF:4", "mul", "1", "1"])), 2);
    assert_eq!(code(&zdiv(&["--workers", "0", "mul", "1", "1"])), 2);
    assert_eq!(code(&zdiv(&["--alphas", "1", "mul", "1", "1"])), 2);
}

#[test]
fn enumerate_counts() {
    let fixed = zdiv(&["enumerate", "--n", "4", "--count"]);
    let full = zdiv(&["enumerate", "--n", "4", "--count", "--full"]);
    let f = json_lines(&fixed)[0]["count"].as_u64().unwrap();
    let g = json_lines(&full)[0]["count"].as_u64().unwrap();
    assert_eq!(g, 24 * f);
    let listed = zdiv(&["enumerate", "--n", "4"]);
    assert_eq!(json_lines(&listed).len() as u64, f);
}

#[test]
fn search_direct_and_make_instance() {
    let o = zdiv(&["--group", "cyclic:3", "search-direct", "--a", "1 + a + a^2", "--n-max", "2"]);
    assert_eq!(code(&o), 10);
    let o = zdiv(&["search-direct", "--a", "1 + a + b", "--n-max", "3", "--radius", "1"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json_lines(&o)[0]["found"], false);

    let o = zdiv(&["--group", "sym:3", "make-instance", "--c", "1 + a"]);
    assert_eq!(code(&o), 0);
    let v = &json_lines(&o)[0];
    assert_eq!(v["n"], 4);
    let (a, b) = (v["a"].as_str().unwrap(), v["b"].as_str().unwrap());
    let check = zdiv(&["--group", "sym:3", "annihilate-check", a, b]);
    assert_eq!(code(&check), 0);

    let o = zdiv(&["--group", "free:2", "make-instance"]);
    assert_eq!(code(&o), 4);
}

#[test]
fn selftest_is_deterministic() {
    let one = zdiv(&["selftest", "--seed", "5", "--workers", "1"]);
    let eight = zdiv(&["selftest", "--seed", "5", "--workers", "8"]);
    assert_eq!(code(&one), 0);
    assert_eq!(one.stdout, eight.stdout);
    assert!(json_lines(&one).iter().all(|l| l["passed"] == true));
}
