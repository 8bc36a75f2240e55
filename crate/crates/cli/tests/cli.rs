use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_platelat"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> i32 {
    let out = bin().args(args).output().unwrap();
    out.status.code().unwrap_or(-1)
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn zero_sweeps_gives_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"model": {"k": 8, "alpha": 0.8}, "box": {"L": 40, "mode": "periodic"},
            "run": {"z": 0.001, "sweeps": 0}}"#,
    );
    let out = dir.path().join("out");
    assert_eq!(run(&["simulate", "--config", s(&cfg), "--out", s(&out)]), 0);
    let csv = fs::read_to_string(out.join("observables.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
    assert!(csv.starts_with("replica,sweep,N,N_1a"));
    let summary = json(out.join("summary.json"));
    assert_eq!(summary["format_version"], 1);
    assert_eq!(summary["samples"], 0);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"model": {"k": 8, "alpha": 0.8}, "box": {"L": 40, "mode": "periodic"},
            "run": {"z": 0.002, "sweeps": 60, "seed": 11, "snapshot_stride": 10, "replicas": 2},
            "analysis": {"pair_correlation": true}}"#,
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run(&["simulate", "--config", s(&cfg), "--out", s(&a)]), 0);
    assert_eq!(run(&["simulate", "--config", s(&cfg), "--out", s(&b)]), 0);
    let mut names: Vec<_> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() >= 6, "{names:?}");
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n:?}");
    }
    // A different seed changes the stream.
    let c = dir.path().join("c");
    assert_eq!(run(&["simulate", "--config", s(&cfg), "--out", s(&c), "--seed", "12"]), 0);
    assert_ne!(
        fs::read(a.join("observables.csv")).unwrap(),
        fs::read(c.join("observables.csv")).unwrap()
    );
}

#[test]
fn boundary_condition_selects_majority_type() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"model": {"k": 16, "alpha": 0.8}, "box": {"L": 80, "mode": "open"},
            "run": {"z": 0.003, "sweeps": 400, "seed": 1, "boundary_q": 3, "boundary_depth": 2}}"#,
    );
    let out = dir.path().join("out");
    assert_eq!(run(&["simulate", "--config", s(&cfg), "--out", s(&out)]), 0);
    let summary = json(out.join("summary.json"));
    let f3 = summary["type_fractions"]["3"]["mean"].as_f64().unwrap();
    assert!(f3 > 0.9, "type-3 fraction {f3}");
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let unknown = write(
        dir.path(),
        "u.json",
        r#"{"model": {"k": 8, "alpha": 0.8}, "box": {"L": 40, "mode": "open"}, "colour": 1}"#,
    );
    assert_eq!(run(&["simulate", "--config", s(&unknown), "--out", s(&out)]), 2);
    let bad_q = write(
        dir.path(),
        "q.json",
        r#"{"model": {"k": 8, "alpha": 0.8}, "box": {"L": 56, "mode": "open"},
            "run": {"boundary_q": 0}}"#,
    );
    assert_eq!(run(&["simulate", "--config", s(&bad_q), "--out", s(&out)]), 2);
    assert_eq!(run(&["virial", "--out", s(&out)]), 2);
}

#[test]
fn virial_reports_table_and_ordering() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"model": {"k": 32, "alpha": 0.8}, "expansion": {"z": 1e-6}}"#,
    );
    let out = dir.path().join("out");
    assert_eq!(run(&["virial", "--config", s(&cfg), "--out", s(&out)]), 0);
    let v = json(out.join("virial.json"));
    let m = &v["excluded_volume"];
    // Orientation order 1a 1b 2a 2b 3a 3b.
    assert!((m[4][4].as_f64().unwrap() - 4096.0).abs() < 1e-9);
    assert_eq!(v["symmetric"], true);
    assert_eq!(v["ordering_holds"], true);
    let labels: Vec<&str> = v["classes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["label"].as_str().unwrap())
        .collect();
    assert_eq!(labels, ["k^(1+alpha)", "k^2", "k^(1+2alpha)", "k^(2+alpha)"]);
    assert_eq!(v["cross_checks"][0]["agree"], true);
}

const HEADER: &str = r#"{"record":"header","format_version":1,"k":8.0,"alpha":0.8,"L":56.0,"mode":"open","seed":0}"#;

fn snapshot_file(dir: &Path, name: &str, snapshots: &[&[(f64, f64, f64, &str)]]) -> PathBuf {
    let mut text = format!("{HEADER}\n");
    for (i, plates) in snapshots.iter().enumerate() {
        text += &format!(
            "{{\"record\":\"snapshot\",\"index\":{i},\"sweep\":{i},\"count\":{}}}\n",
            plates.len()
        );
        for (x, y, z, o) in plates.iter() {
            text += &format!("{{\"record\":\"plate\",\"x\":{x},\"y\":{y},\"z\":{z},\"o\":\"{o}\"}}\n");
        }
    }
    write(dir, name, &text)
}

#[test]
fn contours_of_crafted_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    // 14 blocks of side 4 per axis, all within 8 blocks of the surface.
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"model": {"k": 8, "alpha": 0.8}, "run": {"boundary_q": 3, "boundary_depth": 8}}"#,
    );
    // Two non-overlapping plates of different types in block (2, 2, 2).
    let mixed: &[(f64, f64, f64, &str)] = &[(9.0, 8.1, 10.0, "3a"), (9.0, 11.9, 10.0, "2a")];
    let snaps = snapshot_file(dir.path(), "s.jsonl", &[&[], mixed]);
    let out = dir.path().join("out");
    assert_eq!(
        run(&["contours", "--config", s(&cfg), "--input", s(&snaps), "--out", s(&out)]),
        0
    );
    let r = json(out.join("contours.json"));
    let passes = r["files"][0]["snapshots"].as_array().unwrap();
    assert_eq!(passes[0]["contours"].as_array().unwrap().len(), 0);
    let cs = passes[1]["contours"].as_array().unwrap();
    assert_eq!(cs.len(), 1);
    assert_eq!(cs[0]["holes"], 0);
    assert_eq!(cs[0]["m_ext"], 3);
    assert_eq!(cs[0]["plate_count"], 2);

    // A shallow boundary leaves the empty bulk bad up to the surface.
    let shallow = write(
        dir.path(),
        "d.json",
        r#"{"model": {"k": 8, "alpha": 0.8}, "run": {"boundary_q": 3, "boundary_depth": 2}}"#,
    );
    let out2 = dir.path().join("out2");
    assert_eq!(
        run(&["contours", "--config", s(&shallow), "--input", s(&snaps), "--out", s(&out2)]),
        3
    );
    assert!(out2.join("contours.json").exists());
}

#[test]
fn contours_reject_periodic_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let text = HEADER.replace("open", "periodic") + "\n";
    let snaps = write(dir.path(), "s.jsonl", &text);
    let out = dir.path().join("out");
    assert_eq!(run(&["contours", "--input", s(&snaps), "--out", s(&out)]), 2);
}

#[test]
fn pebbles_of_a_mixed_block() {
    let dir = tempfile::tempdir().unwrap();
    // k = 32: blocks of side 16 holding 2 × 2 × 2 pebbles of side 8.
    let header = r#"{"record":"header","format_version":1,"k":32.0,"alpha":0.8,"L":96.0,"mode":"open","seed":0}"#;
    let text = format!(
        "{header}\n{}\n{}\n{}\n",
        r#"{"record":"snapshot","index":0,"sweep":0,"count":2}"#,
        r#"{"record":"plate","x":20.0,"y":20.0,"z":17.0,"o":"3a"}"#,
        r#"{"record":"plate","x":20.0,"y":20.0,"z":30.0,"o":"1a"}"#
    );
    let snaps = write(dir.path(), "s.jsonl", &text);
    let out = dir.path().join("out");
    let code = run(&["pebbles", "--input", s(&snaps), "--out", s(&out)]);
    let r = json(out.join("pebbles.json"));
    assert!((r["threshold"].as_f64().unwrap() - 2.0).abs() < 1e-9);
    let blocks = r["files"][0]["snapshots"][0]["blocks"].as_array().unwrap();
    if blocks.is_empty() {
        panic!("plates overlap or sit in different blocks");
    }
    let atypical = blocks[0]["atypical"].as_u64().unwrap();
    assert!(atypical >= 2, "{atypical}");
    assert_eq!(code, if blocks[0]["tile_violations"] == 0 { 0 } else { 3 });
}

#[test]
fn polymer_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"model": {"k": 8, "alpha": 0.8}, "expansion": {"polymer_models": 10}}"#,
    );
    let out = dir.path().join("out");
    assert_eq!(run(&["polymer-check", "--config", s(&cfg), "--out", s(&out)]), 0);
    let r = json(out.join("polymer_check.json"));
    assert_eq!(r["passed"], 10);
}

#[test]
fn fit_decay_synthetic_and_noise() {
    let dir = tempfile::tempdir().unwrap();
    let k = 8.0;
    let xi0 = 2.0 * k;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut text = String::from("r,value,error\n");
    for i in 0..20 {
        let r = 1.0 + 2.0 * i as f64;
        let v = 0.2 * (-r / xi0).exp();
        // Uniform noise with 5% relative standard deviation.
        let noise = (rng.gen::<f64>() - 0.5) * 0.05 * 12f64.sqrt();
        text += &format!("{r},{},{}\n", v * (1.0 + noise), 0.05 * v);
    }
    let input = write(dir.path(), "c.csv", &text);
    let out = dir.path().join("out");
    assert_eq!(run(&["fit-decay", "--input", s(&input), "--out", s(&out)]), 0);
    let f = json(out.join("fit.json"));
    assert_eq!(f["fits"][0]["status"], "ok");
    let xi = f["fits"][0]["xi"].as_f64().unwrap();
    assert!((xi - xi0).abs() < 0.1 * xi0, "xi = {xi}");

    let mut noise = String::from("o1,o2,r,value,error\n");
    for i in 0..20 {
        let v = (rng.gen::<f64>() - 0.5) * 0.01;
        noise += &format!("3a,3a,{},{v},0.01\n", i as f64);
    }
    let input = write(dir.path(), "n.csv", &noise);
    assert_eq!(run(&["fit-decay", "--input", s(&input), "--out", s(&out)]), 0);
    let f = json(out.join("fit.json"));
    assert_eq!(f["fits"][0]["status"], "no_decay_measurable");
    assert_eq!(f["fits"][0]["o1"], "3a");

    let empty = write(dir.path(), "e.csv", "r,value,error\n");
    assert_ne!(run(&["fit-decay", "--input", s(&empty), "--out", s(&out)]), 0);
}
