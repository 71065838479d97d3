use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_noma-sec"))
}

#[test]
fn run_writes_summary_and_detail() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.cfg");
    std::fs::write(&cfg, "# mild QoS so the lower case is solvable\nqos_threshold = 0.5\nphi = 0.99\nphi_threshold = 0.9\n").unwrap();
    let exp = dir.path().join("sweep.txt");
    std::fs::write(&exp, "sweep = sop_threshold\nvalues = 0.01\n").unwrap();
    let out = dir.path().join("result.csv");
    let status = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--experiment")
        .arg(&exp)
        .args(["--seed", "5", "--detail", "--cases", "lower,oma", "--metrics", "mmsr", "--realizations", "2", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "sweep_var,sweep_value,case,metric,mean_rate_bps_hz,mean_actual_sop,infeasible_frac,mean_iters,n_realizations,master_seed"
    );
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("sop_threshold,0.01,lower,mmsr,"));
    assert!(rows[1].ends_with(",2,5"));
    let detail = std::fs::read_to_string(dir.path().join("result_detail.csv")).unwrap();
    assert_eq!(detail.lines().count(), 1 + 4);
}

#[test]
fn unknown_experiment_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let output = bin()
        .args(["run", "--experiment", "no-such-sweep", "--seed", "1", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("neither a built-in experiment"));
}

#[test]
fn bad_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "N = 6\nwhatever = 3\n").unwrap();
    let output = bin()
        .args(["run", "--experiment", "sop", "--seed", "1", "--out"])
        .arg(dir.path().join("x.csv"))
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("line 2"));
}

#[test]
fn presets_are_listed() {
    let output = bin().arg("presets").output().unwrap();
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(text.contains("correlation") && text.contains("epsilon0"));
}
