use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use crossview_core::assets::procedural::random_blocks;
use crossview_core::assets::{normalize_mesh, save_mesh, save_png};
use crossview_core::metrics::{write_embeddings, write_sidecar, SidecarRow};
use crossview_core::render::{render, silhouette};
use crossview_core::{DatasetManifest, Matrix, OrbitCamera, RasterImage, SampleRecord};
use serde_json::Value;

fn crossview(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crossview"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Three self-rendered rows (one per identity) plus background plates.
/// With `blank_row`, a fourth row points at an all-black mask.
fn write_fixture(root: &Path, blank_row: bool) -> PathBuf {
    let (w, h) = (256, 512);
    fs::create_dir_all(root.join("data")).unwrap();
    let mut records = Vec::new();
    for i in 0..3 {
        let mesh = normalize_mesh(&random_blocks(40 + i)).unwrap();
        save_mesh(&mesh, root.join(format!("data/m{i}.obj"))).unwrap();
        let view = render(&mesh, &OrbitCamera::new(70.0 * i as f64 + 10.0, 12.0, 2.0, w, h)).unwrap();
        save_png(&view.color().to_rgb(), root.join(format!("data/p{i}.png"))).unwrap();
        save_png(&silhouette(&view), root.join(format!("data/p{i}_mask.png"))).unwrap();
        let mut rec = SampleRecord::real(format!("id{i}"), format!("data/p{i}.png"));
        rec.mask = Some(format!("data/p{i}_mask.png"));
        rec.mesh = Some(format!("data/m{i}.obj"));
        records.push(rec);
    }
    if blank_row {
        save_png(&RasterImage::filled(w, h, &[0]), root.join("data/blank_mask.png")).unwrap();
        fs::copy(root.join("data/p0.png"), root.join("data/p0_again.png")).unwrap();
        let mut rec = SampleRecord::real("id0", "data/p0_again.png");
        rec.mask = Some("data/blank_mask.png".into());
        rec.mesh = Some("data/m0.obj".into());
        records.push(rec);
    }
    fs::create_dir_all(root.join("bg")).unwrap();
    for b in 0..2u8 {
        let plate = RasterImage::filled(80, 60, &[40 + 60 * b, 90, 160 - 50 * b]);
        save_png(&plate, root.join(format!("bg/plate{b}.png"))).unwrap();
    }
    let path = root.join("manifest.jsonl");
    DatasetManifest::new(records, 30.0).unwrap().save(&path).unwrap();
    path
}

fn jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn dir_bytes(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn empty_manifest_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = tmp.path().join("empty.jsonl");
    fs::write(&manifest, "").unwrap();
    let out = crossview(&["calibrate", "--manifest", arg(&manifest), "--out", arg(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn calibrate_then_synthesize_self_rendered_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write_fixture(tmp.path(), true);
    let bg = tmp.path().join("bg");
    let mut trees = Vec::new();
    for run in 0..2 {
        let out_dir = tmp.path().join(format!("out{run}"));
        let out = crossview(&["calibrate", "--manifest", arg(&manifest), "--out", arg(&out_dir), "--seed", "5"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let rows = jsonl(&out_dir.join("calibration.jsonl"));
        assert_eq!(rows.len(), 4);
        let accepted = rows.iter().filter(|r| r["accepted"] == true).count();
        assert_eq!(accepted, 3, "{rows:?}");
        for r in &rows[..3] {
            assert!(r["iou"].as_f64().unwrap() >= 0.95, "{r}");
        }
        assert!(rows[3]["error"].is_string(), "{}", rows[3]);

        let out = crossview(&[
            "synthesize",
            "--manifest",
            arg(&manifest),
            "--out",
            arg(&out_dir),
            "--seed",
            "5",
            "--views",
            "4",
            "--direction",
            "g2a",
            "--backgrounds",
            arg(&bg),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let syn = jsonl(&out_dir.join("synthetic.jsonl"));
        assert_eq!(syn.len(), 12, "{}", String::from_utf8_lossy(&out.stderr));
        assert!(syn.iter().all(|r| r["delta_theta"].as_f64().unwrap() >= 0.0));
        assert!(syn.iter().all(|r| r["domain"] == "synthetic"));
        let pngs: Vec<_> = fs::read_dir(out_dir.join("synthetic"))
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .filter(|n| n.ends_with(".png") && !n.ends_with("_mask.png"))
            .collect();
        assert_eq!(pngs.len(), 12);
        trees.push(dir_bytes(&out_dir));
    }
    assert_eq!(trees[0], trees[1]);
}

fn plan_manifest(root: &Path) -> PathBuf {
    let mut rows = Vec::new();
    for i in 0..4 {
        for j in 0..4 {
            rows.push(SampleRecord::real(format!("id{i}"), format!("real/{i}_{j}.png")));
        }
        for j in 0..8 {
            let dt = 4.0 * j as f64;
            rows.push(SampleRecord::synthetic(format!("id{i}"), format!("syn/{i}_{j}.png"), dt, 0.0));
        }
    }
    let path = root.join("plan_manifest.jsonl");
    DatasetManifest::new(rows, 30.0).unwrap().save(&path).unwrap();
    path
}

fn write_config(root: &Path) -> PathBuf {
    let path = root.join("config.toml");
    fs::write(&path, "[sampler]\nidentities_per_batch = 2\n").unwrap();
    path
}

fn run_plan(cfg: &Path, manifest: &Path, out: &Path, seed: u64, epoch: u32) -> String {
    let seed = seed.to_string();
    let epoch_arg = epoch.to_string();
    let status = crossview(&[
        "plan",
        "--config",
        arg(cfg),
        "--plan-manifest",
        arg(manifest),
        "--out",
        arg(out),
        "--seed",
        &seed,
        "--epoch",
        &epoch_arg,
    ]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    fs::read_to_string(out.join(format!("plan_epoch_{epoch}.jsonl"))).unwrap()
}

#[test]
fn plan_shapes_and_reruns() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let manifest = plan_manifest(tmp.path());
    let a = run_plan(&cfg, &manifest, &tmp.path().join("a"), 1, 20);
    let b = run_plan(&cfg, &manifest, &tmp.path().join("b"), 1, 20);
    assert_eq!(a, b);
    let batches: Vec<Value> = a.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(batches.len(), 4);
    assert!(batches.iter().all(|b| b["entries"].as_array().unwrap().len() == 8));
    assert!(tmp.path().join("a/pool_state_epoch_20.json").exists());
}

#[test]
fn early_epochs_defer_large_elevation_shifts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let manifest = plan_manifest(tmp.path());
    let large = |text: &str| {
        text.lines()
            .flat_map(|l| {
                let v: Value = serde_json::from_str(l).unwrap();
                v["entries"].as_array().unwrap().clone()
            })
            .filter(|e| e["domain"] == "synthetic" && e["delta_theta"].as_f64().unwrap().abs() >= 20.0)
            .map(|e| e["record"].as_str().unwrap().to_owned())
            .collect::<std::collections::BTreeSet<_>>()
            .len()
    };
    let (mut early, mut late) = (0, 0);
    for seed in 0..20 {
        let dir = tmp.path().join(format!("s{seed}"));
        early += large(&run_plan(&cfg, &manifest, &dir.join("e0"), seed, 0));
        late += large(&run_plan(&cfg, &manifest, &dir.join("e25"), seed, 25));
    }
    assert!(early < late, "epoch 0: {early}, epoch 25: {late}");
}

fn write_probe(dir: &Path, name: &str, rows: &[Vec<f64>], ids: &[&str], cams: &[&str]) -> (PathBuf, PathBuf) {
    let emb = dir.join(format!("{name}.embf"));
    let side = dir.join(format!("{name}.jsonl"));
    write_embeddings(&emb, &Matrix::from_rows(rows).unwrap()).unwrap();
    let labels: Vec<SidecarRow> = ids
        .iter()
        .zip(cams)
        .map(|(i, c)| SidecarRow {
            identity: i.to_string(),
            camera: c.to_string(),
        })
        .collect();
    write_sidecar(&side, &labels).unwrap();
    (emb, side)
}

fn evaluate(q: &(PathBuf, PathBuf), g: &(PathBuf, PathBuf)) -> Output {
    crossview(&[
        "evaluate",
        "--query",
        arg(&q.0),
        "--query-labels",
        arg(&q.1),
        "--gallery",
        arg(&g.0),
        "--gallery-labels",
        arg(&g.1),
    ])
}

#[test]
fn evaluate_hand_cases_and_corrupt_input() {
    let tmp = tempfile::tempdir().unwrap();
    let q = write_probe(tmp.path(), "q", &[vec![1.0, 0.0]], &["a"], &["c0"]);
    let g1 = write_probe(tmp.path(), "g1", &[vec![1.0, 0.1], vec![0.0, 1.0]], &["a", "b"], &["c1", "c1"]);
    let out = evaluate(&q, &g1);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["mAP"], 1.0);
    assert_eq!(v["rank1"], 1.0);

    let g2 = write_probe(
        tmp.path(),
        "g2",
        &[vec![1.0, 0.0], vec![1.0, 0.5], vec![1.0, 1.0], vec![0.0, 1.0]],
        &["a", "b", "a", "b"],
        &["c1", "c1", "c1", "c1"],
    );
    let v: Value = serde_json::from_slice(&evaluate(&q, &g2).stdout).unwrap();
    assert_eq!(v["mAP"].as_f64().unwrap(), (1.0 + 2.0 / 3.0) / 2.0);

    let mut bytes = fs::read(&g2.0).unwrap();
    bytes[0] = b'X';
    fs::write(&g2.0, bytes).unwrap();
    let out = evaluate(&q, &g2);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn losses_check_reports_weighted_total() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("losses.txt");
    fs::write(&input, "[logits]\n0 0\n[labels]\n1\n[domain_logits]\n3 3\n[domains]\nreal\n").unwrap();
    let out = crossview(&["losses-check", arg(&input)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let ln2 = std::f64::consts::LN_2;
    assert!((v["id"].as_f64().unwrap() - ln2).abs() <= 1e-12);
    assert!((v["total"].as_f64().unwrap() - 1.5 * ln2).abs() <= 1e-12);
    assert!(v.get("triplet").is_none());

    fs::write(&input, "[labels]\n1\n").unwrap();
    assert_eq!(crossview(&["losses-check", arg(&input)]).status.code(), Some(1));
}

#[test]
fn bad_flags_exit_with_one() {
    assert_eq!(crossview(&["plan"]).status.code(), Some(1));
    assert_eq!(crossview(&["--help"]).status.code(), Some(0));
}
