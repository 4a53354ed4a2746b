use std::path::Path;
use std::process::{Command, Output};

fn open3d(args: &[&str], threads: Option<&str>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_open3d"));
    c.args(args).env_remove("OPEN3D_THREADS");
    if let Some(t) = threads {
        c.env("OPEN3D_THREADS", t);
    }
    c.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL: &str = r#""generate": {"name": "c", "macros": 4, "macro_types": 2, "cells": 300, "ports": 16, "macro_area_fraction": 0.3, "seed": 3}"#;

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&open3d(&[], None)), 1);
    assert_eq!(code(&open3d(&["place", "sideways"], None)), 1);
    assert_eq!(code(&open3d(&["--help"], None)), 0);
    assert_eq!(code(&open3d(&["gen", "--preset", "small", "--out", "/nonexistent/x"], Some("0"))), 1);
    assert_eq!(code(&open3d(&["gen", "--out", "x"], Some("many"))), 1);
}

#[test]
fn parse_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.lef");
    std::fs::write(&bad, "LAYER metal1\n  TYPE ROUTING ;\n  WIDTH oops ;\nEND metal1\n").unwrap();
    let o = open3d(&["pdk3d", "--tech", s(&bad), "--lib", s(&bad), "--out", s(dir.path())], None);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    let cfg = config(dir.path(), "broken.json", "{ \"flow\": ");
    assert_eq!(code(&open3d(&["flow", "run", &cfg], None)), 2);
}

#[test]
fn infeasible_and_diverging_runs() {
    let dir = tempfile::tempdir().unwrap();
    let full = config(
        dir.path(),
        "full.json",
        r#"{"generate": {"name": "f", "macros": 0, "cells": 300, "ports": 8, "seed": 1}, "flow": "FLOW_3D_TILING", "utilization": 1.0}"#,
    );
    assert_eq!(code(&open3d(&["flow", "run", &full], None)), 3);
    let wild = config(dir.path(), "wild.json", &format!(r#"{{{SMALL}, "flow": "FLOW_2D", "placer": {{"lambda0": 1e300, "lambda_growth": 1e300}}}}"#));
    assert_eq!(code(&open3d(&["flow", "run", &wild], None)), 4);
}

#[test]
fn staged_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let run = |args: &[&str]| {
        let o = open3d(args, None);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        o
    };
    let (gen, pdk, part, placed, ev, th) = (d.join("gen"), d.join("pdk"), d.join("part"), d.join("placed"), d.join("eval.json"), d.join("th"));
    run(&["gen", "--preset", "small", "--seed", "2", "--out", s(&gen)]);
    let (tech, cells) = (gen.join("tech.lef"), gen.join("cells.lef"));
    run(&["pdk3d", "--tech-lef", s(&tech), "--cells-lef", s(&cells), "--hbt-size", "0.5", "--hbt-pitch", "1.0", "--out", s(&pdk)]);
    assert!(pdk.join("tech3d.lef").exists() && pdk.join("cells3d.lef").exists());
    let lefs = ["--tech", s(&tech), "--lib", s(&cells)];
    run(&[&["partition"][..], &lefs, &["--def", s(&gen.join("design.def")), "--iters", "300", "--out", s(&part)]].concat());
    assert!(part.join("partition.json").exists() && part.join("design_top.def").exists());
    run(&[&["place", "tiling"][..], &lefs, &["--def", s(&part.join("design.def")), "--out", s(&placed)]].concat());
    let def = placed.join("design.def");
    run(&[&["eval"][..], &lefs, &["--def", s(&def), "--out", s(&ev)]].concat());
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&ev).unwrap()).unwrap();
    assert_eq!(report["flow"], "3D");
    assert!(report["hpwl_um"].as_f64().unwrap() > 0.0);
    let o = run(&[&["thermal"][..], &lefs, &["--def", s(&def), "--grid", "8", "--scale", "2", "--out", s(&th)]].concat());
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("t_max_c "));
    let t: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(th.join("thermal.json")).unwrap()).unwrap();
    assert_eq!(t["grid_n"], 8);
    assert!(th.join("thermal.svg").exists());
}

#[test]
fn flow_output_defaults_next_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "run.json", &format!(r#"{{{SMALL}, "flow": "FLOW_3D_TILING"}}"#));
    assert_eq!(code(&open3d(&["flow", "run", &cfg], None)), 0);
    for f in ["report.json", "design.def", "design_top.def", "design_bottom.def", "layout.svg", "thermal.svg", "timing.json"] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }
}

/// Every deterministic output of `flow run`: all but the timing file.
fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(p) = stack.pop() {
        for e in std::fs::read_dir(&p).unwrap() {
            let e = e.unwrap().path();
            if e.is_dir() {
                stack.push(e);
            } else if e.file_name().unwrap() != "timing.json" {
                v.push((e.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&e).unwrap()));
            }
        }
    }
    v.sort();
    v
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    for flow in ["FLOW_2D", "FLOW_3D_TILING", "FLOW_3D_DMP"] {
        let cfg = config(dir.path(), &format!("{flow}.json"), &format!(r#"{{{SMALL}, "flow": "{flow}", "seed": 7}}"#));
        let mut runs = Vec::new();
        for threads in [None, Some("1"), Some("2"), Some("8")] {
            let out = dir.path().join(format!("{flow}-{}", threads.unwrap_or("default")));
            assert_eq!(code(&open3d(&["flow", "run", &cfg, "--out", s(&out)], threads)), 0);
            runs.push(outputs(&out));
        }
        assert!(runs[0].iter().any(|(n, _)| n == "report.json"));
        assert!(runs.windows(2).all(|w| w[0] == w[1]), "{flow}");
    }
}
