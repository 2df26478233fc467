use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn randmesh(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_randmesh"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = randmesh(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_config(dir: &Path, json: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, json).unwrap();
    p.to_string_lossy().into_owned()
}

fn read_snr(path: &Path) -> Vec<(usize, String, f64)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].to_string(), f[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn oracle_pipeline_beats_direct_tv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"train_count": 1, "test_count": 50, "panels": 2}"#);
    for stage in [
        vec!["gen-data"],
        vec!["gen-mesh"],
        vec!["forward"],
        vec!["corrupt"],
        vec!["estimate", "--backend", "oracle"],
        vec!["reconstruct", "--backend", "oracle"],
        vec!["reconstruct", "--backend", "direct"],
        vec!["evaluate"],
    ] {
        let mut args = vec!["--config", cfg.as_str()];
        args.extend(stage);
        ok(dir.path(), &args);
    }
    let rows = read_snr(&dir.path().join("out/eval/snr.csv"));
    assert_eq!(rows.len(), 100);
    let snr = |i: usize, m: &str| rows.iter().find(|r| r.0 == i && r.1 == m).unwrap().2;
    let wins = (0..50).filter(|&i| snr(i, "oracle") > snr(i, "direct")).count();
    assert!(wins >= 40, "oracle beat direct on {wins}/50");
    assert!(dir.path().join("out/eval/panel_00001.pgm").exists());
    assert!(!dir.path().join("out/eval/panel_00002.pgm").exists());
    let run: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/recon/oracle/run.json")).unwrap()).unwrap();
    assert_eq!(run["command"], "reconstruct --backend oracle");
    assert_eq!(run["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(run["seed"], 0);
}

#[test]
fn kernel_mc_writes_mean_and_profile() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["kernel-mc", "--triangles", "20", "--subspaces", "5", "--grid-side", "16", "--seed", "3"],
    );
    let k = dir.path().join("out/kernel");
    let mean = randmesh::io::load_image(k.join("mean.f32raw")).unwrap();
    assert_eq!(mean.grid().side(), 16);
    let radial = fs::read_to_string(k.join("radial.csv")).unwrap();
    let mut lines = radial.lines();
    assert_eq!(lines.next(), Some("radius,mean,std,n"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "0.0");
    assert_eq!(first[3], "1");
    assert!(k.join("run.json").exists());
}

#[test]
fn rerun_is_byte_identical() {
    let runs: Vec<_> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let cfg = write_config(
                dir.path(),
                r#"{"grid_side": 16, "sensors": 10, "triangles": 20, "subspaces": 3,
                    "train_count": 20, "test_count": 3, "snr_db": 20.0, "erasure_p": 0.1,
                    "max_iters": 50, "warm_iters": 30, "kernel_trials": 4,
                    "train": {"epochs": 3, "batch_size": 8}}"#,
            );
            for stage in [
                vec!["gen-data"],
                vec!["gen-mesh"],
                vec!["forward"],
                vec!["corrupt"],
                vec!["nnls"],
                vec!["train"],
                vec!["estimate", "--backend", "learned"],
                vec!["estimate", "--backend", "oblique"],
                vec!["reconstruct", "--backend", "learned"],
                vec!["reconstruct", "--backend", "oblique"],
                vec!["kernel-mc"],
                vec!["evaluate"],
            ] {
                let mut args = vec!["--config", cfg.as_str()];
                args.extend(stage);
                ok(dir.path(), &args);
            }
            dir
        })
        .collect();
    let mut files = Vec::new();
    collect(&runs[0].path().join("out"), &mut files);
    assert!(files.len() > 50);
    for f in &files {
        let rel = f.strip_prefix(runs[0].path()).unwrap();
        let other = runs[1].path().join(rel);
        assert_eq!(fs::read(f).unwrap(), fs::read(&other).unwrap(), "{}", rel.display());
    }
    let snr = read_snr(&runs[0].path().join("out/eval/snr.csv"));
    assert!(snr.iter().any(|r| r.1 == "learned") && snr.iter().any(|r| r.1 == "oblique"));
}

fn collect(dir: &Path, out: &mut Vec<std::path::PathBuf>) {
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            collect(&p, out);
        } else {
            out.push(p);
        }
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), r#"{"grid_sid": 16}"#);
    let out = randmesh(dir.path(), &["--config", &bad, "gen-data"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid_sid"));

    let out = randmesh(dir.path(), &["gen-data", "--erasure-p", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("erasure_p"));

    let out = randmesh(dir.path(), &["forward"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("manifest.json"));

    let out = randmesh(dir.path(), &["--config", "nope.json", "gen-mesh"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.json"));

    let out = randmesh(dir.path(), &["gen-data", "--snr-db", "loud"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn diverging_training_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"grid_side": 8, "sensors": 6, "triangles": 6, "subspaces": 2,
            "train_count": 16, "test_count": 1, "warm_iters": 20,
            "train": {"epochs": 20, "batch_size": 4, "learning_rate": 1e6, "optimizer": "sgd"}}"#,
    );
    for stage in ["gen-data", "gen-mesh", "forward", "corrupt", "nnls"] {
        ok(dir.path(), &["--config", &cfg, stage]);
    }
    let out = randmesh(dir.path(), &["--config", &cfg, "train"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}
