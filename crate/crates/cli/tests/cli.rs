use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use zslq_cli::{ProblemFile, Report};

fn problem(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("problems").join(name)
}

fn scratch(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name)
}

fn zslq(args: &[&str], file: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zslq"))
        .args(args.iter().take(1))
        .arg(file)
        .args(args.iter().skip(1))
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "{e}\nstdout: {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn write_variant(name: &str, base: &str, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(problem(base)).unwrap()).unwrap();
    edit(&mut v);
    let path = scratch(name);
    std::fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    path
}

#[test]
fn nonstabilizing_exits_with_no_stabilizing_solution() {
    let out = zslq(&["solve", "--output", "json"], &problem("nonstabilizing.json"));
    assert_eq!(out.status.code(), Some(3));
    let r = json(&out);
    assert_eq!(r["status"]["label"], "no-stabilizing-solution");
    assert_eq!(r["are_solutions"][0]["p"], serde_json::json!([[1.0]]));
    assert_eq!(r["are_solutions"][0]["base_gain"], serde_json::json!([[-2.0]]));
    assert_eq!(r["are_solutions"][0]["stabilizing"], false);
    assert_eq!(r["stability"]["stabilizer_interval"], serde_json::json!([-2.0, 0.0]));
    assert!(r["saddle"].is_null());
}

#[test]
fn singular_and_two_player_solve() {
    let out = zslq(&["solve", "--output", "json"], &problem("singular.json"));
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["saddle"]["p"], serde_json::json!([[-1.0]]));
    assert_eq!(r["saddle"]["value"]["at_x0"], -1.0);
    let th = r["saddle"]["theta1"][0][0].as_f64().unwrap();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    assert!(1.0 - h < th && th < 1.0 + h);

    let out = zslq(&["solve", "--output", "json"], &problem("two_player.json"));
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["saddle"]["p"], serde_json::json!([[0.5]]));
    assert_eq!(r["saddle"]["theta1"], serde_json::json!([[-0.5]]));
    assert_eq!(r["saddle"]["theta2"], serde_json::json!([[0.5]]));
}

#[test]
fn forced_value_polynomial() {
    let r = json(&zslq(&["solve", "--output", "json"], &problem("two_player_forced.json")));
    assert_eq!(r["saddle"]["eta"][0]["coeff"], serde_json::json!([0.25]));
    assert_eq!(r["saddle"]["eta"][0]["rate"], 1.0);
    assert!((r["saddle"]["value"]["at_x0"].as_f64().unwrap() - 1.25).abs() < 1e-12);
}

#[test]
fn check_stability_examples() {
    let nonstab = problem("nonstabilizing.json");
    let yes = zslq(&["check-stability", "--theta", "[[-1]]"], &nonstab);
    assert_eq!(yes.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&yes.stdout).contains("stabilizer: yes"));
    let no = zslq(&["check-stability", "--theta", "[[-2]]"], &nonstab);
    assert!(String::from_utf8_lossy(&no.stdout).contains("stabilizer: no"));

    let r = json(&zslq(&["check-stability", "--output", "json"], &problem("singular.json")));
    let th = r["stability"]["synthesized"][0][0].as_f64().unwrap();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    assert!(1.0 - h < th && th < 1.0 + h, "{th}");
    assert_eq!(r["stability"]["uncontrolled"]["stable"], false);

    let bad = zslq(&["check-stability", "--theta", "[[1, 2]]"], &nonstab);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn eta_not_solvable_exit_status() {
    // A + BΘ* is unstable in the drift of the backward equation.
    let path = write_variant("eta.json", "nonstabilizing.json", |v| {
        v["system"] = serde_json::json!({ "A": [[0.25]], "B1": [[-3]], "C": [[1]], "D1": [[1]] });
        v["cost"] = serde_json::json!({ "Q": [[1.5]], "S1": [[-2]], "R11": [[1]] });
        v["forcing"] = serde_json::json!({ "b": [{ "coeff": [1], "power": 0, "rate": 1 }] });
    });
    let out = zslq(&["solve"], &path);
    assert_eq!(out.status.code(), Some(6), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn parse_errors_report_locations() {
    let path = scratch("broken.json");
    std::fs::write(&path, "{\n  \"system\": {\n    \"A\": [[1]\n  }\n}").unwrap();
    let out = zslq(&["solve"], &path);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("broken.json:4:"), "{err}");

    let path = write_variant("dims.json", "nonstabilizing.json", |v| {
        v["system"]["C"] = serde_json::json!([[1, 2]]);
    });
    let out = zslq(&["solve"], &path);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("C is 1x2, expected 1x1"), "{err}");
}

#[test]
fn problem_files_round_trip() {
    for name in ["nonstabilizing.json", "singular.json", "two_player.json", "two_player_forced.json"] {
        let p = ProblemFile::parse(&std::fs::read_to_string(problem(name)).unwrap()).unwrap();
        let back = ProblemFile::from_spec(&p.to_spec().unwrap(), &p.x0, p.sim);
        assert_eq!(back, p, "{name}");
    }
}

#[test]
fn reports_are_deterministic() {
    let args = ["report", "--output", "json", "--paths", "200", "--horizon", "5", "--dt", "0.01"];
    let a = zslq(&args, &problem("two_player_forced.json"));
    let b = zslq(&args, &problem("two_player_forced.json"));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let r: Report = Report::from_json(std::str::from_utf8(&a.stdout).unwrap()).unwrap();
    assert_eq!(r.tool.version, env!("CARGO_PKG_VERSION"));
    assert_eq!((r.config.paths, r.config.horizon, r.config.dt), (200, 5.0, 0.01));
    let csv = &r.verification.unwrap().csv;
    assert!(csv.starts_with("t,second_moment,std_error,moment_ode\n"));
    assert!(csv.lines().count() > 100);
}

#[test]
fn verify_two_player_confirms_both_inequalities() {
    let file = problem("two_player.json");
    let solved = zslq(&["solve", "--output", "json"], &file);
    let report = scratch("two_player_report.json");
    std::fs::write(&report, &solved.stdout).unwrap();
    let out = zslq(
        &["verify", "--output", "json", "--paths", "500", "--horizon", "20", "--report", report.to_str().unwrap()],
        &file,
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&out);
    let v = &r["verification"];
    assert_eq!(v["saddle_holds"], true);
    assert_eq!(v["value_confirmed"], true);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    for row in rows {
        assert_eq!(row["verdict"], "pass", "{row}");
    }
}

#[test]
fn verify_singular_confirms_value() {
    let file = problem("singular.json");
    let solved = zslq(&["solve", "--output", "json"], &file);
    let report = scratch("singular_report.json");
    std::fs::write(&report, &solved.stdout).unwrap();
    let out = zslq(&["verify", "--output", "json", "--report", report.to_str().unwrap()], &file);
    let r = json(&out);
    let row = &r["verification"]["rows"][0];
    eprintln!("J* = {} ± {} vs {}", row["estimate"], row["std_error"], row["oracle"]);
    assert_eq!(r["verification"]["value_confirmed"], true);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn verify_from_the_origin_is_zero() {
    let file = write_variant("origin.json", "two_player.json", |v| {
        v["x0"] = serde_json::json!([0.0]);
    });
    let solved = zslq(&["solve", "--output", "json"], &file);
    let report = scratch("origin_report.json");
    std::fs::write(&report, &solved.stdout).unwrap();
    let out = zslq(
        &["verify", "--output", "json", "--paths", "100", "--horizon", "2", "--report", report.to_str().unwrap()],
        &file,
    );
    assert_eq!(out.status.code(), Some(0));
    for row in json(&out)["verification"]["rows"].as_array().unwrap() {
        assert_eq!(row["estimate"], 0.0);
        assert_eq!(row["std_error"], 0.0);
    }
}

#[test]
fn verify_rejects_mismatched_report() {
    let solved = zslq(&["solve", "--output", "json"], &problem("two_player.json"));
    let report = scratch("mismatch_report.json");
    std::fs::write(&report, &solved.stdout).unwrap();
    let out = zslq(&["verify", "--report", report.to_str().unwrap()], &problem("singular.json"));
    assert_eq!(out.status.code(), Some(2));
}
