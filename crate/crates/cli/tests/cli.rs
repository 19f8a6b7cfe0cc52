use std::path::Path;
use std::process::{Command, Output};

fn proxcert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_proxcert"))
        .args(args)
        .env_remove("PROXCERT_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn accelerated_lasso_run_passes_and_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let report = dir.path().join("report.json");
    let o = proxcert(&[
        "run",
        "--problem",
        "lasso-20",
        "--algorithm",
        "accel_prox_grad",
        "--theta",
        "fista",
        "--step",
        "fixed:auto",
        "--iters",
        "1000",
        "--check",
        "thm1,rates",
        "--trace",
        trace.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let csv = std::fs::read_to_string(&trace).unwrap();
    assert!(csv.starts_with("k,t_k,theta_k,f_x,f_y,norm_g,norm_gphi,norm_gpsi,lhs,rhs_conj,rhs_dist,S_k,R_k\n"));
    assert_eq!(csv.lines().count(), 1001);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["satisfied"], true);
    assert_eq!(json["config"]["step"], "fixed:auto");
    let names: Vec<&str> = json["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"thm1.lhs_le_conj") && names.contains(&"rates.accel"), "{names:?}");
    assert!(json["rate_fit"]["slope"].as_f64().unwrap() <= -1.5);
}

#[test]
fn thm2_with_non_monotone_steps_is_a_config_error() {
    let o = proxcert(&[
        "run",
        "--problem",
        "lasso-2",
        "--algorithm",
        "accel_prox_grad",
        "--step",
        "backtrack:1:0.5",
        "--check",
        "thm2",
    ]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("non-increasing steps"), "{}", stdout(&o));
}

#[test]
fn zero_iterations_and_bad_flags_exit_one() {
    assert_eq!(code(&proxcert(&["run", "--problem", "ls-2", "--iters", "0"])), 1);
    assert_eq!(code(&proxcert(&["run", "--problem", "ls-2", "--algorithm", "newton"])), 1);
    assert_eq!(code(&proxcert(&["run", "--problem", "ls-2", "--check", "thm9"])), 1);
    assert_eq!(code(&proxcert(&["run"])), 1);
    assert_eq!(code(&proxcert(&["frobnicate"])), 1);
    assert_eq!(code(&proxcert(&["--help"])), 0);
}

#[test]
fn corrupted_theta_fails_with_exit_two() {
    let mut theta = vec![1.0f64];
    for _ in 0..80 {
        let t = *theta.last().unwrap();
        theta.push(0.5 * (-(t * t) + (t.powi(4) + 4.0 * t * t).sqrt()));
    }
    theta[40] /= 4.0;
    let list: Vec<String> = theta.iter().map(|t| format!("{t:e}")).collect();
    let custom = format!("custom:{}", list.join(","));
    let o = proxcert(&[
        "run",
        "--problem",
        "lasso-2",
        "--algorithm",
        "accel_prox_grad",
        "--theta",
        &custom,
        "--iters",
        "80",
        "--check",
        "thm2",
    ]);
    assert_eq!(code(&o), 2, "{}", stdout(&o));
    assert!(stdout(&o).contains("validate_theta_pair"), "{}", stdout(&o));
}

#[test]
fn diverging_step_reports_unmet_first_theorem() {
    // A step of 3/L breaks the decrease condition.
    let o = proxcert(&["run", "--problem", "ls-2", "--step", "fixed:3/L", "--iters", "50", "--check", "thm1"]);
    assert_eq!(code(&o), 2, "{}", stdout(&o));
    assert!(stdout(&o).contains("FAILED: thm1"), "{}", stdout(&o));
}

#[test]
fn rates_table_and_fits() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rates.csv");
    let o = proxcert(&["rates", "--problem", "lasso-20", "--iters", "300", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 601);
    assert!(stdout(&o).contains("tail exponent"), "{}", stdout(&o));
}

#[test]
fn verify_subset_text_and_json() {
    let o = proxcert(&["verify-all", "--only", "3,9,11"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("[PASS]")).count(), 3);

    let o = proxcert(&["verify-all", "--only", "8", "--json"]);
    assert_eq!(code(&o), 0);
    let json: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(json["passed"], true);
    assert_eq!(json["criteria"][0]["id"], 8);
}

#[test]
fn verify_with_injected_fault_exits_two() {
    let o = proxcert(&["verify-all", "--only", "6", "--inject-fault", "corrupt-theta"]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("validate_theta_pair"), "{}", stdout(&o));
}

#[test]
fn seed_override_from_environment() {
    let run = |seed: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_proxcert"));
        c.args(["run", "--problem", "lasso-2", "--iters", "20"]);
        match seed {
            Some(s) => c.env("PROXCERT_SEED", s),
            None => c.env_remove("PROXCERT_SEED"),
        };
        c.output().unwrap()
    };
    let default = run(None);
    let seeded = run(Some("99"));
    assert_eq!(code(&default), 0);
    assert_eq!(code(&seeded), 0);
    assert!(stdout(&seeded).contains("lasso-2@seed=99"), "{}", stdout(&seeded));
    assert!(stdout(&default).contains("lasso-2@seed=3"), "{}", stdout(&default));
    assert_eq!(code(&run(Some("abc"))), 1);
}

#[test]
fn problem_files_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    let spec = r#"{"name":"tiny","kind":"least_squares","matrix":{"rows":2,"cols":2,"data":[2.0,0.0,0.0,1.0]},"b":[1.0,1.0],"x0":[0.0,0.0]}"#;
    std::fs::write(&path, spec).unwrap();
    let o = proxcert(&["run", "--problem", path.to_str().unwrap(), "--iters", "100"]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
    assert!(Path::new(&path).exists());
}
