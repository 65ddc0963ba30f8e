use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn spec(name: &str) -> String {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "specs", name].iter().collect();
    path.to_string_lossy().into_owned()
}

fn bdchain(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bdchain")).args(args).output().expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("bad json ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn analyze_example1() {
    let out = bdchain(&["analyze", "--chain", &spec("example1.json")]);
    assert_eq!(code(&out), 0);
    let r = &json_of(&out)["results"];
    assert_eq!(r["tail_class"]["class"], "zero");
    assert_eq!(r["extinction_probability"]["value"]["exact"], "1");
    assert_eq!(r["limit_expectation"]["value"]["exact"], "+inf");
    assert_eq!(r["ratio_table"]["t"][3]["exact"], "1/4");
    assert_eq!(r["occupation"]["values"][0]["expected_visits"]["exact"], "3");
    assert_eq!(r["limit_expectation"]["provenance"], "analytic");
    assert_eq!(r["limit_expectation"]["error_bound"], "exact");
}

#[test]
fn analyze_limits() {
    for (file, limit) in [("srw.json", "5"), ("ec_example2.json", "3/2"), ("example1_mirrored.json", "0")] {
        let out = bdchain(&["analyze", "--chain", &spec(file)]);
        assert_eq!(code(&out), 0, "{file}");
        assert_eq!(json_of(&out)["results"]["limit_expectation"]["value"]["exact"], limit, "{file}");
    }
}

#[test]
fn analyze_transient_table() {
    let out = bdchain(&["analyze", "--chain", &spec("table_transient.json")]);
    assert_eq!(code(&out), 0);
    let r = &json_of(&out)["results"];
    assert_eq!(r["extinction_probability"]["value"]["exact"], "1/3");
    assert!(r["occupation"]["refused"].as_str().unwrap().contains("transient"));
}

#[test]
fn verify_example1_is_exact() {
    let out = bdchain(&["verify", "--chain", &spec("example1.json")]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = json_of(&out);
    let checks = report["results"]["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 4);
    assert!(checks.iter().all(|c| c["passed"] == true));
    let exit = &checks[0];
    assert_eq!(exit["mode"], "exact");
    assert_eq!(exit["max_abs_discrepancy"], 0.0);
    let identity = checks.iter().find(|c| c["name"] == "stopping-identity").unwrap();
    for part in identity["parts"].as_array().unwrap().iter().filter(|p| p["mode"] == "exact") {
        assert_eq!(part["max_abs_discrepancy"], 0.0);
    }
}

#[test]
fn verify_srw_identity_is_tight() {
    let out = bdchain(&["verify", "--chain", &spec("srw.json")]);
    assert_eq!(code(&out), 0);
    let report = json_of(&out);
    let identity = report["results"]["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "stopping-identity")
        .unwrap()
        .clone();
    assert!(identity["max_abs_discrepancy"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn verify_transient_skips_occupation_only() {
    let out = bdchain(&["verify", "--chain", &spec("table_transient.json")]);
    assert_eq!(code(&out), 0);
    let report = json_of(&out);
    let checks = report["results"]["checks"].as_array().unwrap();
    let occupation = checks.iter().find(|c| c["name"] == "occupation-convergence").unwrap();
    assert!(occupation["passed"].is_null());
    assert!(occupation["detail"].as_str().unwrap().contains("transient"));
    assert_eq!(checks[0]["passed"], true);
}

#[test]
fn verify_tolerance_breach_exits_2() {
    let chain = r#"{"family": "constant", "k": 1, "p": 0.6}"#;
    let out = bdchain(&["verify", "--chain", chain, "--tol", "1e-300"]);
    assert_eq!(code(&out), 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("check failed"), "{stderr}");
}

#[test]
fn simulate_srw_stays_at_k() {
    let out = bdchain(&["simulate", "--chain", &spec("srw.json"), "--m-grid", "1,10,100,1000", "--paths", "20000"]);
    assert_eq!(code(&out), 0);
    let report = json_of(&out);
    for row in report["results"]["sweep"]["rows"].as_array().unwrap() {
        let mean = row["mean"].as_f64().unwrap();
        let sigma = row["ci_half_width"].as_f64().unwrap() / 1.96;
        assert!((mean - 5.0).abs() <= 3.0 * sigma + 1e-12, "{row}");
    }
    assert_eq!(report["results"]["sweep"]["provenance"], "monte-carlo");
}

#[test]
fn simulate_example1_grows() {
    let out = bdchain(&[
        "simulate",
        "--chain",
        &spec("example1.json"),
        "--m-grid",
        "100,1000,10000",
        "--paths",
        "20000",
        "--format",
        "csv",
    ]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("m,mean,ci_half_width,analytic_limit"));
    let means: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(means.len(), 3);
    assert!(means.windows(2).all(|w| w[0] < w[1]), "{means:?}");
    assert!(text.contains(",inf\n"));
}

#[test]
fn simulate_interval_exit_and_out_file() {
    let dir = std::env::temp_dir().join(format!("bdchain-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("sweep.json");
    let out = bdchain(&[
        "simulate",
        "--chain",
        &spec("ec_example2.json"),
        "--stopping",
        "interval-exit",
        "--m-grid",
        "3,10,50",
        "--paths",
        "5000",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report["config"]["stopping"], "interval-exit");
    assert_eq!(report["results"]["sweep"]["rows"][0]["rule"], "interval-exit(b=3)");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn criterion_verdicts() {
    for (file, verdict, limit) in [
        ("ec_example2.json", "satisfied", Some("3/2")),
        ("srw.json", "satisfied", Some("5")),
        ("example1.json", "violated", None),
    ] {
        let out = bdchain(&["criterion", "--chain", &spec(file)]);
        assert_eq!(code(&out), 0, "{file}");
        let r = &json_of(&out)["results"];
        assert_eq!(r["criterion"]["verdict"], verdict, "{file}");
        match limit {
            Some(l) => assert_eq!(r["limit_expectation"]["value"]["exact"], l),
            None => assert!(r.get("limit_expectation").is_none()),
        }
    }
}

#[test]
fn inconclusive_criterion_exits_3() {
    let out = bdchain(&["criterion", "--chain", &spec("rational_slow.json"), "--horizon", "100000"]);
    assert_eq!(code(&out), 3);
    assert_eq!(json_of(&out)["status"], "inconclusive");
}

#[test]
fn config_errors_exit_1() {
    assert_eq!(code(&bdchain(&["analyze", "--chain", "/no/such/file.json"])), 1);
    assert_eq!(code(&bdchain(&["analyze", "--chain", r#"{"family": "nope", "k": 1}"#])), 1);
    assert_eq!(code(&bdchain(&["analyze", "--chain", r#"{"family": "constant", "k": 1}"#])), 1);
    assert_eq!(code(&bdchain(&["simulate", "--chain", &spec("srw.json"), "--m-grid", "10,5"])), 1);
    assert_eq!(code(&bdchain(&["verify", "--chain", &spec("srw.json"), "--tol", "-1"])), 1);
    assert_eq!(code(&bdchain(&["bogus"])), 1);
    let out = bdchain(&["analyze", "--chain", r#"{"family": "constant", "k": 1, "p": "3/2"}"#]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("p out of range"));
}

#[test]
fn reports_are_deterministic() {
    let args = ["analyze", "--chain", &spec("ec_example2.json"), "--format", "csv"];
    assert_eq!(bdchain(&args).stdout, bdchain(&args).stdout);
    let sim = ["simulate", "--chain", &spec("example1.json"), "--m-grid", "10,100", "--paths", "3000", "--seed", "7"];
    let many: Vec<&str> = sim.iter().copied().chain(["--workers", "8"]).collect();
    assert_eq!(bdchain(&sim).stdout, bdchain(&many).stdout);
}
