mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

use common::fixture;
use fpr_core::lp::{self, LinearProgram, LpStatus};

fn fpr(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fpr"))
        .current_dir(dir)
        .env("RUST_LOG", "info")
        .args(args)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn abs(name: &str) -> String {
    fixture(name).to_string_lossy().into_owned()
}

/// The shipped pipeline config with absolute fixture paths, written to `dir`.
fn pipeline_config(dir: &Path, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let text = std::fs::read_to_string(fixture("pipeline.json")).unwrap();
    let mut cfg: Value = serde_json::from_str(&text).unwrap();
    cfg["catalog"] = json!(abs("catalog_lv.json"));
    for g in cfg["grids"].as_array_mut().unwrap() {
        let path = g["path"].as_str().unwrap().to_string();
        g["path"] = json!(abs(&path));
        if let Some(c) = g.get("catalog").and_then(Value::as_str).map(str::to_string) {
            g["catalog"] = json!(abs(&c));
        }
    }
    cfg["study"]["model"] = json!(abs("study.json"));
    edit(&mut cfg);
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn lv_only(cfg: &mut Value, scales: Value) {
    cfg["grids"] = json!([{ "id": "lv_rural", "path": abs("lv_feeder.json") }]);
    cfg["scenarios"]["scale_factors"] = scales;
    cfg.as_object_mut().unwrap().remove("study");
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

#[test]
fn single_base_scenario_gives_one_zero_cost_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = pipeline_config(dir.path(), |c| {
        lv_only(c, json!([1.0]));
        c["scenarios"]["n_random_draws"] = json!(1);
    });
    let o = fpr(dir.path(), &["--config", cfg.to_str().unwrap(), "variate"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stages: Vec<_> = std::fs::read_dir(dir.path().join("out/lv_rural/stages"))
        .unwrap()
        .collect();
    assert_eq!(stages.len(), 1);
    let stage: Value = serde_json::from_slice(
        &std::fs::read(dir.path().join("out/lv_rural/stages/stage_0000.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(stage["total_cost"].as_f64(), Some(0.0));
}

#[test]
fn missing_grid_file_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = pipeline_config(dir.path(), |c| {
        lv_only(c, json!([1.0]));
        c["grids"][0]["path"] = json!("nowhere/grid.json");
    });
    let o = fpr(dir.path(), &["--config", cfg.to_str().unwrap(), "variate"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(
        err.contains("error[io]") && err.contains("nowhere/grid.json"),
        "{err}"
    );
}

#[test]
fn missing_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = fpr(dir.path(), &["--config", "absent.json", "pipeline"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("absent.json"));
}

#[test]
fn pipeline_is_reproducible_and_runs_children_first() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = pipeline_config(dir.path(), |_| {});
    let cfg = cfg.to_str().unwrap();
    let mut trees = Vec::new();
    for (jobs, out) in [("1", "run1"), ("3", "run2")] {
        let o = fpr(
            dir.path(),
            &[
                "--config",
                cfg,
                "--seed",
                "11",
                "--jobs",
                jobs,
                "--out",
                out,
                "pipeline",
                "--export-lp",
            ],
        );
        assert!(o.status.success(), "{}", stderr(&o));
        let log = stderr(&o);
        let lv = log.find("grid lv_rural: start").expect("lv start logged");
        let mv = log.find("grid mv_rural: start").expect("mv start logged");
        assert!(lv < mv, "LV must be planned before MV");
        trees.push(tree(&dir.path().join(out)));
    }
    assert!(!trees[0].is_empty());
    assert_eq!(trees[0], trees[1]);

    // every operating region CSV has one row per direction
    let root = dir.path().join("run1");
    for (path, bytes) in &trees[0] {
        if path.extension().is_some_and(|e| e == "csv") && path.parent().unwrap().ends_with("for") {
            let text = String::from_utf8(bytes.clone()).unwrap();
            assert_eq!(text.lines().count(), 37, "{}", path.display());
        }
    }

    // exported LPs parse and re-solve to the reported objectives
    let summary = std::fs::read_to_string(root.join("study/summary.csv")).unwrap();
    let objective = summary
        .lines()
        .find(|l| l.starts_with("objective,"))
        .unwrap();
    let vals: Vec<f64> = objective
        .split(',')
        .skip(1)
        .take(2)
        .map(|v| v.parse().unwrap())
        .collect();
    for (tag, expected) in ["a", "b"].iter().zip(vals) {
        let text = std::fs::read_to_string(root.join(format!("study/scenario_{tag}.lp"))).unwrap();
        let prog = LinearProgram::from_lp_text(&text).unwrap();
        let sol = lp::solve(&prog).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(
            (sol.objective - expected).abs() <= 1e-9 * expected.abs().max(1.0),
            "{tag}: {} vs {expected}",
            sol.objective
        );
    }
}

#[test]
fn different_seeds_give_different_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = pipeline_config(dir.path(), |c| lv_only(c, json!([1.0, 2.0])));
    let cfg = cfg.to_str().unwrap();
    for (seed, out) in [("1", "s1"), ("2", "s2")] {
        assert!(fpr(
            dir.path(),
            &["--config", cfg, "--seed", seed, "--out", out, "variate"]
        )
        .status
        .success());
    }
    let read =
        |out: &str| std::fs::read(dir.path().join(out).join("lv_rural/scenarios.json")).unwrap();
    assert_ne!(read("s1"), read("s2"));
}

#[test]
fn unplannable_scenario_fails_unless_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = pipeline_config(dir.path(), |c| {
        lv_only(c, json!([1.0, 60.0]));
        c["scenarios"]["n_random_draws"] = json!(1);
    });
    let cfg = cfg.to_str().unwrap();
    let o = fpr(dir.path(), &["--config", cfg, "variate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error[unplannable]"), "{}", stderr(&o));

    let o = fpr(dir.path(), &["--config", cfg, "--skip-failed", "variate"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("skipped"));
    let n = std::fs::read_dir(dir.path().join("out/lv_rural/stages"))
        .unwrap()
        .count();
    assert_eq!(n, 1);
}

#[test]
fn standalone_study_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = fpr(
        dir.path(),
        &[
            "--out",
            "res",
            "cep",
            "--model",
            &abs("study.json"),
            "--export-lp",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for f in [
        "summary.csv",
        "technologies.csv",
        "scenario_a.csv",
        "scenario_b.csv",
        "scenario_a.lp",
        "scenario_b.lp",
    ] {
        assert!(dir.path().join("res").join(f).is_file(), "{f} missing");
    }
}

#[test]
fn relinearize_with_other_metric() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = pipeline_config(dir.path(), |c| lv_only(c, json!([1.0, 2.0])));
    let cfg = cfg.to_str().unwrap();
    for cmd in [
        &["variate"][..],
        &["for"],
        &["fpr"],
        &["linearize", "--metric", "max-apparent", "--opex", "3"],
    ] {
        let mut args = vec!["--config", cfg];
        args.extend_from_slice(cmd);
        let o = fpr(dir.path(), &args);
        assert!(o.status.success(), "{cmd:?}: {}", stderr(&o));
    }
    let model: Value = serde_json::from_slice(
        &std::fs::read(dir.path().join("out/lv_rural/linear_model.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(model["metric"], json!("max_apparent"));
    assert_eq!(model["opex_per_mwh"].as_f64(), Some(3.0));
}
