use std::path::{Path, PathBuf};
use std::process::Command;

use stlbo::{eval_boolean, robustness, synthesize, ControlSequence, SynthesisProblem, UcbConfig};
use stlbo_synth::check::{check_trace, read_trace};
use stlbo_synth::output::{ITERATIONS_FILE, ITERATION_COLUMNS, RESULT_FILE, TRAJECTORY_FILE};
use stlbo_synth::sweep::{read_sweep, SUMMARY_FILE, SWEEP_FILE};
use stlbo_synth::{run_case_study, run_sweep, Pipeline, ProblemConfig, SweepSpec};

fn shipped_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/case_study.json")
}

fn shipped() -> ProblemConfig {
    ProblemConfig::load(&shipped_path()).unwrap()
}

/// The shipped config with a small budget.
fn quick() -> ProblemConfig {
    let mut cfg = shipped();
    cfg.de.population = 8;
    cfg.de.generations = 2;
    cfg.de.k_best = 3;
    cfg.bo.max_iters = 3;
    cfg.bo.candidates = 32;
    cfg.bo.steps = 5;
    cfg.bo.random_init = 2;
    cfg
}

/// Enters the lower-right waypoint at t = 6 and the goal at t = 10.
fn hand_crafted() -> Vec<Vec<f64>> {
    let ux = [0.85, 0.56, 0.27, -0.02, -0.31, -0.6, -0.45, -0.3, -0.15, 0.0, 0.0];
    let uy = [0.06, 0.11, 0.17, 0.23, 0.29, 0.34, 0.26, 0.17, 0.09, 0.0, 0.0];
    ux.iter().zip(uy).map(|(&a, b)| vec![a, b]).collect()
}

#[test]
fn shipped_config_builds_the_case_study_spec() {
    let cfg = shipped();
    assert_eq!(cfg.horizon, 10);
    let f = cfg.formula(10).unwrap();
    assert_eq!(f.horizon(), 10);
    assert_eq!(f.predicate_count(), 20);
    assert_eq!(cfg.model().unwrap().output_labels(), &["x1", "x3", "u1", "u2"]);
}

#[test]
fn hand_crafted_trajectory_satisfies_the_spec() {
    let cfg = shipped();
    let model = cfg.model().unwrap();
    let f = cfg.formula(10).unwrap();
    let u = ControlSequence::from_steps(hand_crafted(), model.input_bounds()).unwrap();
    let tr = model.rollout(&u).unwrap();
    assert!(eval_boolean(&f, &tr, 0).unwrap());
    let rho = robustness(&f, &tr, 0).unwrap().value();
    assert!(rho > 0.5, "rho = {rho}");
}

#[test]
fn standing_still_never_reaches_the_goal() {
    let cfg = shipped();
    let problem = SynthesisProblem::new(cfg.model().unwrap(), cfg.formula(10).unwrap()).unwrap();
    let zero = problem.control(&vec![0.0; problem.dim()]).unwrap();
    let ev = problem.evaluate(zero.as_flat()).unwrap();
    assert!(ev.robustness < 0.0);
    let ucb = UcbConfig {
        max_iters: 1,
        ..cfg.ucb_config(0, problem.dim()).unwrap()
    };
    let r = synthesize(&problem, &ucb, &[zero]).unwrap();
    assert!(!r.is_satisfied());
    assert_eq!(r.status.as_str(), "infeasible_budget");
}

#[test]
fn config_validation_errors() {
    let text = std::fs::read_to_string(shipped_path()).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["rho_min"] = serde_json::json!(0.0);
    assert!(ProblemConfig::from_json(&v.to_string()).is_err());

    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["spec"]["goal"] = serde_json::json!({ "x": [9.0, 7.0], "y": [7.0, 9.0] });
    assert!(ProblemConfig::from_json(&v.to_string()).is_err());

    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["bogus"] = serde_json::json!(1);
    assert!(ProblemConfig::from_json(&v.to_string()).is_err());

    let formula = r#"{
        "system": { "kind": "lti", "a": [[1.0]], "b": [[1.0]], "output_selector": [0],
                    "input_lower": [-1.0], "input_upper": [1.0] },
        "spec": { "kind": "formula", "text": "F[0,{T}](y0 > 2" },
        "horizon": 4, "rho_min": 0.1 }"#;
    assert!(ProblemConfig::from_json(formula).is_err());
    assert!(ProblemConfig::from_json(&formula.replace("> 2\"", "> 2)\"")).is_ok());
}

#[test]
fn run_writes_trajectory_iterations_and_result() {
    let cfg = quick();
    let dir = tempfile::tempdir().unwrap();
    let run = run_case_study(&cfg, 10, Pipeline::DeBo, 3).unwrap();
    assert!(!run.soundness_violation());
    let labels = cfg.model().unwrap().output_labels().to_vec();
    stlbo_synth::output::write_run(dir.path(), &labels, &run).unwrap();

    let (cols, tr) = read_trace(&dir.path().join(TRAJECTORY_FILE)).unwrap();
    assert_eq!(cols, labels);
    assert_eq!(tr.len(), 11);
    assert_eq!(&tr, &run.trace);

    let mut r = csv::Reader::from_path(dir.path().join(ITERATIONS_FILE)).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ITERATION_COLUMNS);
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), run.result.log.len());
    assert_eq!(rows[0][1].split(';').count(), 22);
    assert_eq!(&rows[0][4], "");

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(RESULT_FILE)).unwrap())
            .unwrap();
    assert_eq!(json["pipeline"], "de_bo");
    assert_eq!(json["control"].as_array().unwrap().len(), 11);
    assert_eq!(json["status"], run.result.status.as_str());

    let rep = check_trace(&cfg.formula(10).unwrap().to_string(), &dir.path().join(TRAJECTORY_FILE))
        .unwrap();
    assert_eq!(rep.satisfied, run.revalidated);
    assert!((rep.robustness - run.result.best_robustness).abs() < 1e-9);
}

#[test]
fn runs_are_deterministic() {
    let cfg = quick();
    for p in Pipeline::ALL {
        let a = run_case_study(&cfg, 10, p, 8).unwrap();
        let b = run_case_study(&cfg, 10, p, 8).unwrap();
        assert_eq!(a.result.best_control, b.result.best_control, "{p}");
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.total_evaluations, b.total_evaluations);
    }
}

#[test]
fn sweep_writes_fixed_schema_and_medians() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SweepSpec {
        config: quick(),
        pipelines: Pipeline::ALL.to_vec(),
        seeds: vec![0, 1],
        horizons: vec![10, 12],
        out: dir.path().to_path_buf(),
    };
    let rows = run_sweep(&spec).unwrap();
    assert_eq!(rows.len(), 12);
    let text = std::fs::read_to_string(dir.path().join(SWEEP_FILE)).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "T,pipeline,seed,status,rho,cost,evaluations,wall_ms,revalidated,error"
    );
    assert_eq!(read_sweep(&dir.path().join(SWEEP_FILE)).unwrap(), rows);
    for r in &rows {
        assert!(!r.is_error());
        if r.status == "satisfied" {
            assert_eq!(r.revalidated, Some(true));
        }
        let cell = dir
            .path()
            .join(format!("T{}", r.horizon))
            .join(r.pipeline.as_str())
            .join(format!("seed{}", r.seed));
        assert!(cell.join(TRAJECTORY_FILE).is_file());
    }
    let summary = std::fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap();
    assert_eq!(
        summary.lines().next().unwrap(),
        "T,pipeline,runs,satisfied,errors,median_rho,median_wall_ms"
    );
    assert_eq!(summary.lines().count(), 7);
}

#[test]
fn sweep_rejects_bad_specs() {
    let dir = tempfile::tempdir().unwrap();
    let base = SweepSpec {
        config: quick(),
        pipelines: vec![Pipeline::DeOnly],
        seeds: vec![],
        horizons: vec![10],
        out: dir.path().to_path_buf(),
    };
    assert!(run_sweep(&base).is_err());

    let text = r#"{
        "system": { "kind": "lti", "a": [[1.0]], "b": [[1.0]], "output_selector": [0, 1],
                    "input_lower": [-1.0], "input_upper": [1.0] },
        "spec": { "kind": "formula", "text": "F[3,{T}](y0 > 0.5)" },
        "horizon": 5, "rho_min": 0.1 }"#;
    let cfg = ProblemConfig::from_json(text).unwrap();
    let spec = SweepSpec {
        config: cfg,
        seeds: vec![0],
        horizons: vec![2],
        ..base
    };
    assert!(run_sweep(&spec).is_err());
}

#[test]
fn sweep_records_failed_cells_and_continues() {
    // the state overflows to infinity, so BO sees a non-finite cost
    let text = r#"{
        "system": { "kind": "lti", "a": [[1e300]], "b": [[0.0]], "output_selector": [0],
                    "input_lower": [-1.0], "input_upper": [1.0] },
        "x0": [1.0],
        "spec": { "kind": "formula", "text": "G[0,{T}](y0 < 0)" },
        "horizon": 3, "rho_min": 0.1,
        "de": { "population": 6, "generations": 1, "k_best": 2 },
        "bo": { "max_iters": 2, "random_init": 2 } }"#;
    let dir = tempfile::tempdir().unwrap();
    let spec = SweepSpec {
        config: ProblemConfig::from_json(text).unwrap(),
        pipelines: Pipeline::ALL.to_vec(),
        seeds: vec![0],
        horizons: vec![],
        out: dir.path().to_path_buf(),
    };
    let rows = run_sweep(&spec).unwrap();
    assert_eq!(rows.len(), 3);
    let by = |p: Pipeline| rows.iter().find(|r| r.pipeline == p).unwrap();
    assert!(!by(Pipeline::DeOnly).is_error());
    assert!(by(Pipeline::DeBo).is_error());
    assert!(by(Pipeline::BoOnly).is_error());
    assert_eq!(by(Pipeline::DeBo).status, "error");
    let summary = std::fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap();
    assert!(summary.contains("de_bo,1,0,1,,"));
}

fn synth() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_synth"));
    c.env("RUST_LOG", "error");
    c
}

#[test]
fn cli_check_reports_satisfaction() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    std::fs::write(&path, "t,y0\n0,4\n1,4\n2,5\n3,5\n4,7\n").unwrap();
    let phi = "G[0,3]((y0 > 3) and not (y0 > 6))";
    let out = synth()
        .args(["check", "--formula", phi, "--trace"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "satisfied=true robustness=1");

    std::fs::write(&path, "y0\n4\n5\n6\n7\n7\n").unwrap();
    let out = synth()
        .args(["check", "--formula", phi, "--trace"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "satisfied=false robustness=-1");

    let out = synth()
        .args(["check", "--formula", "G[0,9](y0 > 3)", "--trace"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cli_run_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("quick.json");
    std::fs::write(&cfg_path, serde_json::to_string(&quick()).unwrap()).unwrap();

    let out_dir = dir.path().join("run");
    let out = synth()
        .args(["run", "--pipeline", "de_only", "--seed", "4", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(matches!(out.status.code(), Some(0 | 1)), "{out:?}");
    assert!(out_dir.join(TRAJECTORY_FILE).is_file());
    assert!(out_dir.join(RESULT_FILE).is_file());

    let sweep_dir = dir.path().join("sweep");
    let out = synth()
        .args(["sweep", "--horizons", "10,11", "--seeds", "0..1", "--pipelines", "de_only", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&sweep_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    assert_eq!(read_sweep(&sweep_dir.join(SWEEP_FILE)).unwrap().len(), 4);

    let out = synth()
        .args(["run", "--pipeline", "milp", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(!out.status.success());
}
