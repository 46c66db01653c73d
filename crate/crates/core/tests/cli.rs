use std::path::Path;
use std::process::{Command, Output};

use gpd::cli::{GraspList, RunConfig};
use gpd::cloud::load_cloud_with_sidecar;
use gpd::eval::EvalReport;
use gpd::oracle::{stereo_render, Intrinsics, StereoRig, TriangleMesh};

fn gpd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpd")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn error_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text
        .lines()
        .rev()
        .find(|l| l.starts_with('{'))
        .expect("json error line");
    serde_json::from_str(line).unwrap()
}

#[test]
fn rendered_cloud_reloads_without_loss() {
    let dir = tempfile::tempdir().unwrap();
    let out = gpd(&[
        "--out",
        path(dir.path()),
        "render",
        "--mesh",
        "cylinder:0.03,0.12",
        "--angle",
        "53",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cloud = load_cloud_with_sidecar(&dir.path().join("cylinder_0.03x0.12.ply")).unwrap();
    let direct = stereo_render(
        &TriangleMesh::make_cylinder(0.03, 0.12, 32),
        &StereoRig {
            baseline_deg: 53.0,
            ..StereoRig::default()
        },
        Intrinsics::default(),
    )
    .unwrap();
    assert_eq!(cloud.viewpoints().len(), 2);
    assert_eq!(cloud.len(), direct.len());
    for (a, b) in cloud.points().iter().zip(direct.points()) {
        assert!((a - b).norm() < 1e-6);
    }
    assert_eq!(cloud.view_sets(), direct.view_sets());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "render");
}

#[test]
fn zero_angle_warns_but_renders() {
    let dir = tempfile::tempdir().unwrap();
    let out = gpd(&[
        "--out",
        path(dir.path()),
        "render",
        "--mesh",
        "sphere:0.03",
        "--angle",
        "0",
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let cloud = load_cloud_with_sidecar(&dir.path().join("sphere_0.03.ply")).unwrap();
    assert_eq!(cloud.viewpoints().len(), 2);
}

#[test]
fn missing_model_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope").join("model.bin");
    let cloud = dir.path().join("c.ply");
    let out = gpd(&[
        "--out",
        path(dir.path()),
        "detect",
        "--cloud",
        path(&cloud),
        "--model",
        path(&missing),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = error_json(&out);
    assert_eq!(err["error"]["command"], "detect");
    assert_eq!(err["error"]["kind"], "missing_input");
    assert_eq!(err["error"]["path"], path(&missing));
}

#[test]
fn unknown_config_key_is_a_machine_readable_failure() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "seed = 1\n[solver]\nlearnign_rate = 0.1\n").unwrap();
    let out = gpd(&[
        "--config",
        path(&config),
        "--out",
        path(dir.path()),
        "render",
        "--mesh",
        "sphere:0.03",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"]["kind"], "parse");
}

#[test]
fn printed_config_reproduces_the_run() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["dataset", "--mesh", "sphere:0.025", "--candidates", "40"];
    let first = gpd(&[&["--seed", "9", "--out", path(a.path())][..], &args[..]].concat());
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let printed = String::from_utf8(first.stdout).unwrap();
    let config: RunConfig = RunConfig::parse(&printed).unwrap();
    assert_eq!(config.seed, 9);
    assert_eq!(config.dataset.per_mesh_candidates, 40);
    // defaults are printed too
    assert!(printed.contains("finger_width"));
    assert!(printed.contains("learning_rate"));

    let saved = a.path().join("config.toml");
    assert_eq!(std::fs::read_to_string(&saved).unwrap(), printed);
    let second = gpd(&[
        "--config",
        path(&saved),
        "--out",
        path(b.path()),
        "dataset",
        "--mesh",
        "sphere:0.025",
    ]);
    assert!(second.status.success());
    for f in ["dataset/data.bin", "dataset/manifest.json", "diagnostics.jsonl"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn pipeline_on_bundled_primitives() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let config = d.join("run.toml");
    std::fs::write(
        &config,
        "seed = 4\n[dataset]\nper_mesh_candidates = 60\nview_pairs = 2\n\
         [solver]\nlearning_rate = 0.01\nbatch_size = 8\nmax_iterations = 150\ntest_interval = 50\n\
         [sampler]\nn_samples = 20\n",
    )
    .unwrap();
    let run = |args: &[&str]| {
        let out = gpd(&[&["--config", path(&config), "--out", path(d)][..], args].concat());
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    };
    run(&["render", "--mesh", "cylinder:0.025,0.1"]);
    run(&[
        "dataset",
        "--mesh",
        "cylinder:0.025,0.1",
        "--mesh",
        "sphere:0.025",
        "--mesh",
        "box:0.03,0.05,0.1",
    ]);
    let data = d.join("dataset");
    run(&["train", "--dataset", path(&data)]);
    let model = d.join("model.bin");
    run(&[
        "eval",
        "--dataset",
        path(&data),
        "--model",
        path(&model),
        "--split",
        path(&d.join("split.json")),
    ]);
    let report: EvalReport = serde_json::from_str(&std::fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    assert!(report.rahp > 0.0, "rahp {}", report.rahp);
    assert!(std::fs::read_to_string(d.join("pr_curve.csv"))
        .unwrap()
        .starts_with("threshold,precision,recall"));

    run(&[
        "detect",
        "--cloud",
        path(&d.join("cylinder_0.025x0.1.ply")),
        "--model",
        path(&model),
        "--threshold",
        "0",
    ]);
    let grasps: GraspList = serde_json::from_str(&std::fs::read_to_string(d.join("grasps.json")).unwrap()).unwrap();
    assert!(!grasps.grasps.is_empty());
    let scores: Vec<f64> = grasps.grasps.iter().map(|g| g.score.unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));

    // keep a grasp inside the selection width limits
    let mut list = grasps.clone();
    list.grasps.truncate(1);
    list.grasps[0].object_width = 0.05;
    let picked = d.join("picked.json");
    std::fs::write(&picked, serde_json::to_string(&list).unwrap()).unwrap();
    run(&["select", "--grasps", path(&picked)]);
    assert!(d.join("selected.json").exists());
}
