use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use measim::dynamics::evolve_exact;
use measim::model::prepare_initial;
use measim_cli::{cmd_evolve, cmd_measure, load_scenario, sweep_config};

fn measim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_measim")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 output")
}

#[test]
fn check_exit_codes() {
    let qnd = measim(&["check", "qubit-qnd"]);
    assert_eq!(code(&qnd), 0);
    assert!(stdout(&qnd).contains("holds"));
    assert_eq!(code(&measim(&["check", "qubit-violating"])), 1);
    assert_eq!(code(&measim(&["check", "qutrit-system"])), 1);
}

#[test]
fn truncated_file_is_an_input_error_with_a_line() {
    let dir = tempfile::tempdir().unwrap();
    let full = measim::scenario::bundled_sources()[0].1;
    let cut = &full[..full.find("[preparation]").unwrap()];
    let path = dir.path().join("cut.toml");
    fs::write(&path, cut).unwrap();
    let out = measim(&["check", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line "), "{:?}", out);

    fs::write(&path, "schema = 1\nname = \"x\"\n[model\n").unwrap();
    let out = measim(&["check", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn missing_file_and_bad_flags_are_input_errors() {
    assert_eq!(code(&measim(&["check", "/nonexistent/scenario.toml"])), 2);
    assert_eq!(code(&measim(&["evolve", "qubit-qnd", "--t-end", "-1"])), 2);
    assert_eq!(code(&measim(&["measure", "qubit-qnd", "--repeats", "1"])), 2);
    assert_eq!(code(&measim(&["sweep", "--seeds", ""])), 2);
    assert_eq!(code(&measim(&["sweep", "--dims", "2"])), 2);
    assert_eq!(code(&measim(&["sweep", "--eta-grid", "2.0", "--seeds", "1"])), 2);
    assert_eq!(code(&measim(&["frobnicate"])), 2);
}

#[test]
fn evolve_at_zero_writes_the_initial_state() {
    let s = load_scenario("qubit-violating").unwrap();
    let traj = cmd_evolve(&s, 0.0, 1e-3, false).unwrap();
    assert_eq!(traj.len(), 1);
    let w0 = prepare_initial(&s.model, &s.preparation, s.pointer.basis()).unwrap();
    assert!(traj.last().matrix().approx_eq(w0.matrix(), 0.0));

    let out = measim(&["evolve", "qubit-violating", "--t-end", "0", "--out", "-"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).lines().count(), 2);
}

#[test]
fn qnd_trajectory_is_constant() {
    let s = load_scenario("qubit-qnd").unwrap();
    let traj = cmd_evolve(&s, 2.0, 0.01, false).unwrap();
    let w0 = traj.states()[0].matrix().clone();
    assert!(traj.states().iter().all(|w| w.matrix().frobenius_distance(&w0) <= 1e-8));
}

#[test]
fn exact_and_stepped_agree() {
    for name in ["qubit-qnd", "qubit-violating", "qutrit-system"] {
        let s = load_scenario(name).unwrap();
        let exact = cmd_evolve(&s, 1.0, 1e-3, false).unwrap();
        let stepped = cmd_evolve(&s, 1.0, 1e-3, true).unwrap();
        assert_eq!(exact.times(), stepped.times());
        let reference = evolve_exact(&s.model, &exact.states()[0], 1.0).unwrap();
        assert!(exact.last().matrix().approx_eq(reference.matrix(), 1e-12));
        let d = exact.last().matrix().frobenius_distance(stepped.last().matrix());
        assert!(d <= 1e-8, "{name}: {d:e}");
    }
}

#[test]
fn evolve_summary_reports_conservation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let out = measim(&["evolve", "qubit-violating", "--t-end", "1", "--dt", "0.01", "--stepped", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("terminal_trace_deviation:") && text.contains("purity_drift:"));
    let csv = fs::read_to_string(&path).unwrap();
    assert!(csv.starts_with("time,re_0_0,im_0_0,"));
    assert_eq!(csv.lines().count(), 102);
    assert!(!csv.contains('\r'));
}

#[test]
fn measure_summaries() {
    let mut s = load_scenario("qubit-qnd").unwrap();
    s.schedule.trials = 1000;
    s.schedule.repeats = 5;
    let qnd = cmd_measure(&s).unwrap();
    assert_eq!((qnd.repeat_changes, qnd.reading_variance), (0, 0.0));
    assert_eq!(qnd.sigma_analytic, qnd.sigma_empirical);
    assert_eq!(qnd.csv.lines().count(), 1 + 5000);

    let mut v = load_scenario("qubit-violating").unwrap();
    v.schedule.trials = 1000;
    assert!(cmd_measure(&v).unwrap().reading_variance > 0.0);

    let out = measim(&["measure", "qubit-violating", "--trials", "1"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("degenerate"));
}

#[test]
fn seed_flag_changes_samples_deterministically() {
    let run = |seed: &str| stdout(&measim(&["measure", "qubit-violating", "--trials", "50", "--seed", seed, "--quiet", "--out", "-"]));
    assert_eq!(run("3"), run("3"));
    assert_ne!(run("3"), run("4"));
}

#[test]
fn quiet_suppresses_the_summary() {
    let out = measim(&["check", "qubit-qnd", "--quiet"]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
}

#[test]
fn sweep_at_qnd_endpoint_is_sharp() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    let seeds = "1,2,3,4,5,6,7,8,9,10";
    let out = measim(&["sweep", "--eta-grid", "0", "--seeds", seeds, "--out", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let csv = fs::read_to_string(&path).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| r.split(',').nth(6) == Some("0")), "{csv}");
}

#[test]
fn default_sweep_matches_the_published_reference() {
    let reference = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/reference_sweep.csv");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    assert_eq!(code(&measim(&["sweep", "--quiet", "--out", path.to_str().unwrap()])), 0);
    assert_eq!(fs::read(&path).unwrap(), fs::read(reference).unwrap());
}

#[test]
fn sweep_flag_parsing() {
    let cfg = sweep_config("3, 2", Some("0,0.5"), Some("7"), Some(10)).unwrap();
    assert_eq!((cfg.d_s, cfg.d_m, cfg.eta_grid, cfg.seeds, cfg.schedule.trials), (3, 2, vec![0.0, 0.5], vec![7], 10));
    assert_eq!(sweep_config("2,2", None, Some(" "), None).unwrap_err().code, 2);
    assert_eq!(sweep_config("2,x", None, None, None).unwrap_err().code, 2);
}
