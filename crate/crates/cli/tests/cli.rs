use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_intbvp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_on(cmd: &str, config: &str, extra: &[&str]) -> Output {
    let path = fixture(config);
    let mut args = vec![cmd, path.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn table(o: &Output) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = stdout(o);
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn solve_t1() {
    let o = run_on("solve", "t1.json", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = table(&o);
    assert_eq!(header, ["x", "u0", "u1"]);
    assert_eq!(rows.len(), 201);
    let row = rows.iter().find(|r| r[0] == 0.5).unwrap();
    assert!((row[1] - 0.5).abs() <= 1e-10);
    assert!((row[2] - 1.0).abs() <= 1e-10);
    assert_eq!(rows[0][0], 0.0);
    assert_eq!(rows[200][0], 2.5);
}

#[test]
fn floats_carry_seventeen_digits() {
    let o = run_on("solve", "t2.json", &["--grid", "3"]);
    let text = stdout(&o);
    let field = text.lines().nth(2).unwrap().split(',').nth(1).unwrap();
    let mantissa = field.split('e').next().unwrap().replace(['-', '.'], "");
    assert_eq!(mantissa.len(), 17, "{field}");
}

#[test]
fn solve_grid_and_guess_flags() {
    let o = run_on("solve", "t2.json", &["--grid", "11", "--guess", "0.4", "--tol", "1e-9", "--quad-nodes", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(table(&o).1.len(), 11);
    let o = run_on("solve", "t2.json", &["--guess", "0.4,0.1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn config_errors_exit_1() {
    let o = run_on("solve", "malformed.json", &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let o = run_on("solve", "unordered.json", &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("x_k < c"), "{}", stderr(&o));

    let o = run_on("solve", "missing.json", &[]);
    assert_eq!(o.status.code(), Some(1));

    let o = run(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn solver_failure_exits_2() {
    let o = run_on("solve", "t2.json", &["--max-iter", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("MaxIterations"));

    let o = run_on("solve", "t1_singular.json", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("SingularJacobian"));
}

#[test]
fn singular_sens_exits_3() {
    let o = run_on("sens", "t1_singular.json", &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("DisconjugacyViolation"));
    let o = run_on("verify", "t1_singular.json", &[]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn sens_columns() {
    let o = run_on("sens", "t1.json", &["--datum", "y:0:2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = table(&o);
    assert_eq!(header, ["x", "y:0:2"]);
    assert!(rows.iter().all(|r| (r[1] - r[0] / 3.0).abs() <= 1e-8));

    let (header, rows) = table(&run_on("sens", "t1.json", &["--datum", "p"]));
    assert_eq!(header, ["x", "p"]);
    assert!(rows.iter().all(|r| (r[1] + 2.0 * r[0] / 3.0).abs() <= 1e-8));

    let (header, rows) = table(&run_on("sens", "t1.json", &[]));
    assert_eq!(header, ["x", "y:0:1", "y:0:2", "x:1", "x:2", "c", "d", "p"]);
    assert_eq!(rows.len(), 201);

    let (header, _) = table(&run_on("sens", "third_order.json", &["--grid", "5"]));
    assert_eq!(header, ["x", "y:0:1", "y:0:2", "y:1:2", "x:1", "x:2", "c", "d", "p"]);
}

#[test]
fn sens_rejects_unknown_datum() {
    assert_eq!(run_on("sens", "t1.json", &["--datum", "q"]).status.code(), Some(1));
    assert_eq!(run_on("sens", "t1.json", &["--datum", "y:1:1"]).status.code(), Some(1));
    assert_eq!(run_on("sens", "t1.json", &["--datum", "x:3"]).status.code(), Some(1));
}

#[test]
fn verify_reports() {
    let o = run_on("verify", "t1.json", &[]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["pass"], true);
    for d in report["data"].as_array().unwrap() {
        assert!(d["sup_rel"].as_f64().unwrap() <= 1e-6, "{d}");
    }

    let o = run_on("verify", "t1.json", &["--paper-signs"]);
    assert_eq!(o.status.code(), Some(4));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let failing: Vec<_> = report["data"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|d| d["pass"] == false)
        .map(|d| d["datum"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(failing, ["c", "d"]);

    let o = run_on("verify", "t2.json", &["--h0", "1e-3", "--tol-rel", "1e-5"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn sweep_t1() {
    let o = run_on("sweep", "t1.json", &["--deltas", "1e-2,1e-3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("datum,delta,sup_deviation,ratio_to_prev"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 14);
    for pair in rows.chunks(2) {
        assert_eq!(pair[0][3], "");
        let r: f64 = pair[1][3].parse().unwrap();
        assert!((r - 10.0).abs() <= 0.1, "{}: {r}", pair[1][0]);
    }
}

#[test]
fn sweep_infeasible_cells_warn() {
    let o = run_on("sweep", "t1.json", &["--deltas", "0.6,1e-3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("x:2,5.9999999999999998e-1,NaN,"));
    assert!(stderr(&o).contains("warning: x:2"));
}

#[test]
fn sweep_argument_errors() {
    assert_eq!(run_on("sweep", "t1.json", &["--deltas", ""]).status.code(), Some(1));
    assert_eq!(run_on("sweep", "t1.json", &["--deltas", "1e-3,1e-2"]).status.code(), Some(1));
    assert_eq!(run_on("sweep", "t1.json", &["--deltas", "abc"]).status.code(), Some(1));
}

#[test]
fn help_and_version_exit_0() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}
