use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{require, Cli, Command, RunConfig};
use crate::candgen::CandidateRecord;
use crate::cloud::RegionOfInterest;
use crate::cloud::{load_cloud_with_sidecar, save_cloud, sidecar_path};
use crate::dataset::{Dataset, SplitSpec};
use crate::error::{Error, Result};
use crate::eval::{
    detect, evaluate_model, leave_one_object_out, operating_threshold, select_grasp, split_by_view, EvalReport,
    ScoredGrasp,
};
use crate::formats::ply::PlyEncoding;
use crate::learn::{load_model, save_model, train, Init};
use crate::oracle::dataset::write_diagnostics;
use crate::oracle::mesh::load_mesh;
use crate::oracle::{build_dataset, stereo_render, NamedMesh, TriangleMesh};

/// Files a command produced, relative to the run directory.
#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    outputs: Vec<String>,
}

/// Detection output.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraspList {
    pub threshold: f64,
    pub grasps: Vec<CandidateRecord>,
}

pub(super) fn execute(cli: Cli) -> Result<()> {
    if let Some(n) = cli.common.threads {
        // a second initialization in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let mut config = match &cli.common.config {
        Some(path) => {
            require(path)?;
            RunConfig::load(path)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.common.seed {
        config.seed = seed;
    }
    apply_flags(&mut config, &cli.command);
    let text = config.to_toml();
    print!("{text}");

    let out = &cli.common.out;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let outputs = match &cli.command {
        Command::Render { meshes, .. } => render(&config, meshes, out)?,
        Command::Dataset { meshes, .. } => dataset(&config, meshes, out)?,
        Command::Train {
            dataset, warm_start, ..
        } => train_cmd(&config, dataset, warm_start.as_deref(), out)?,
        Command::Eval { dataset, model, split } => eval_cmd(&config, dataset, model, split.as_deref(), out)?,
        Command::Detect {
            cloud, model, report, ..
        } => detect_cmd(&config, cloud, model, report.as_deref(), out)?,
        Command::Select { grasps } => select_cmd(&config, grasps, out)?,
    };
    write_text(&out.join("config.toml"), &text)?;
    let manifest = RunManifest {
        command: cli.command.name(),
        outputs,
    };
    write_text(
        &out.join("run.json"),
        &serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )
}

fn apply_flags(config: &mut RunConfig, command: &Command) {
    match command {
        Command::Render {
            angle,
            distance,
            azimuth,
            ..
        } => {
            if let Some(a) = angle {
                config.render.rig.baseline_deg = *a;
            }
            if let Some(d) = distance {
                config.render.rig.distance = *d;
            }
            if let Some(a) = azimuth {
                config.render.rig.azimuth_deg = *a;
            }
        }
        Command::Dataset {
            candidates: Some(n), ..
        } => config.dataset.per_mesh_candidates = *n,
        Command::Train {
            iterations: Some(n), ..
        } => config.solver.max_iterations = *n,
        Command::Detect { threshold: Some(t), .. } => config.detect.threshold = Some(*t),
        _ => {}
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &serde_json::to_string_pretty(value).expect("output serializes"))
}

fn parse_numbers(spec: &str, args: &str, count: usize) -> Result<Vec<f64>> {
    let values: Vec<f64> = args
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::InvalidArgument(format!("bad primitive {spec:?}")))?;
    if values.len() != count || values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "primitive {spec:?} needs {count} positive numbers"
        )));
    }
    Ok(values)
}

/// Resolves a mesh argument: a primitive spec or a mesh file.
pub fn resolve_mesh(spec: &str) -> Result<NamedMesh> {
    if let Some((kind, args)) = spec.split_once(':') {
        let mesh = match kind {
            "box" => {
                let v = parse_numbers(spec, args, 3)?;
                Some(TriangleMesh::make_box(v[0], v[1], v[2]))
            }
            "cylinder" => {
                let v = parse_numbers(spec, args, 2)?;
                Some(TriangleMesh::make_cylinder(v[0], v[1], 32))
            }
            "sphere" => {
                let v = parse_numbers(spec, args, 1)?;
                Some(TriangleMesh::make_sphere(v[0], 16, 24))
            }
            _ => None,
        };
        if let Some(mesh) = mesh {
            let name = format!("{kind}_{}", args.replace(',', "x"));
            return Ok(NamedMesh::new(name, mesh));
        }
    }
    let path = Path::new(spec);
    require(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "mesh".into());
    Ok(NamedMesh::new(name, load_mesh(path)?))
}

/// The bundled object set: three boxes, three cylinders, three spheres.
pub fn default_primitives() -> Vec<String> {
    [
        "box:0.04,0.06,0.12",
        "box:0.03,0.05,0.1",
        "box:0.05,0.05,0.08",
        "cylinder:0.02,0.12",
        "cylinder:0.025,0.1",
        "cylinder:0.03,0.12",
        "sphere:0.025",
        "sphere:0.03",
        "sphere:0.035",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn resolve_all(specs: &[String]) -> Result<Vec<NamedMesh>> {
    let specs = if specs.is_empty() {
        default_primitives()
    } else {
        specs.to_vec()
    };
    specs.iter().map(|s| resolve_mesh(s)).collect()
}

fn render(config: &RunConfig, meshes: &[String], out: &Path) -> Result<Vec<String>> {
    if config.render.rig.baseline_deg == 0.0 {
        log::warn!("sensor angle is 0: both views coincide");
        eprintln!("warning: sensor angle is 0, both views coincide");
    }
    let mut outputs = Vec::new();
    for named in resolve_all(meshes)? {
        let cloud = stereo_render(&named.mesh, &config.render.rig, config.render.intrinsics)?;
        let path = out.join(format!("{}.ply", named.name));
        save_cloud(&path, &cloud, PlyEncoding::BinaryLittleEndian)?;
        outputs.push(relative(out, &path));
        outputs.push(relative(out, &sidecar_path(&path)));
    }
    Ok(outputs)
}

fn relative(out: &Path, path: &Path) -> String {
    path.strip_prefix(out).unwrap_or(path).display().to_string()
}

fn dataset(config: &RunConfig, meshes: &[String], out: &Path) -> Result<Vec<String>> {
    let meshes = resolve_all(meshes)?;
    let (data, diagnostics) = build_dataset(&meshes, &config.hand, &config.dataset_config(), config.seed)?;
    let dir = out.join("dataset");
    data.save(&dir)?;
    let diag = out.join("diagnostics.jsonl");
    write_diagnostics(&diag, &diagnostics)?;
    for d in diagnostics.iter().filter(|d| d.skipped) {
        eprintln!("warning: mesh {} yielded no usable candidates", d.object);
    }
    Ok(vec![
        "dataset/manifest.json".into(),
        "dataset/data.bin".into(),
        relative(out, &diag),
    ])
}

fn load_dataset(dir: &Path) -> Result<Dataset> {
    require(&dir.join(crate::dataset::MANIFEST_FILE))?;
    Dataset::load(dir)
}

fn make_split(config: &RunConfig, data: &Dataset) -> Result<SplitSpec> {
    match &config.split.leave_out_object {
        Some(object) => leave_one_object_out(data, object),
        None => split_by_view(data, config.split.test_fraction, config.seed),
    }
}

fn train_cmd(config: &RunConfig, dataset: &Path, warm_start: Option<&Path>, out: &Path) -> Result<Vec<String>> {
    let data = load_dataset(dataset)?;
    let split = make_split(config, &data)?;
    let init = match warm_start {
        Some(p) => {
            require(p)?;
            Init::WarmStart(p.to_path_buf())
        }
        None => Init::Random,
    };
    let (model, log) = train(&data, &split, &config.solver(), init)?;
    save_model(&model, &out.join("model.bin"))?;
    log.write_csv(&out.join("train_log.csv"))?;
    write_json(&out.join("split.json"), &split)?;
    Ok(vec!["model.bin".into(), "train_log.csv".into(), "split.json".into()])
}

fn eval_cmd(config: &RunConfig, dataset: &Path, model: &Path, split: Option<&Path>, out: &Path) -> Result<Vec<String>> {
    require(model)?;
    let data = load_dataset(dataset)?;
    let split: SplitSpec = match split {
        Some(p) => {
            require(p)?;
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| Error::parse(p, e.to_string()))?
        }
        None => make_split(config, &data)?,
    };
    let model = load_model(model)?;
    let report = evaluate_model(&model, &data, &split)?;
    report.write(&out.join("report.json"), &out.join("pr_curve.csv"))?;
    println!("accuracy {:.4} rahp {:.4}", report.accuracy, report.rahp);
    Ok(vec!["report.json".into(), "pr_curve.csv".into()])
}

fn detect_cmd(
    config: &RunConfig,
    cloud: &Path,
    model: &Path,
    report: Option<&Path>,
    out: &Path,
) -> Result<Vec<String>> {
    require(model)?;
    require(cloud)?;
    let threshold = match (config.detect.threshold, report) {
        (Some(t), _) => t,
        (None, Some(p)) => {
            require(p)?;
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            let r: EvalReport = serde_json::from_str(&text).map_err(|e| Error::parse(p, e.to_string()))?;
            operating_threshold(&r.curve, config.detect.min_precision)
        }
        (None, None) => crate::eval::FALLBACK_THRESHOLD,
    };
    let model = load_model(model)?;
    let cloud = load_cloud_with_sidecar(cloud)?;
    let roi = RegionOfInterest::all(&cloud);
    let grasps = detect(
        &cloud,
        &roi,
        &config.hand,
        &model,
        config.variant,
        threshold,
        &config.detect_config(),
    )?;
    let list = GraspList {
        threshold,
        grasps: grasps.iter().map(scored_record).collect(),
    };
    write_json(&out.join("grasps.json"), &list)?;
    println!("{} grasps at threshold {threshold}", list.grasps.len());
    Ok(vec!["grasps.json".into()])
}

fn scored_record(g: &ScoredGrasp) -> CandidateRecord {
    let mut r = CandidateRecord::from(&g.candidate);
    r.score = Some(g.score);
    r
}

fn select_cmd(config: &RunConfig, grasps: &Path, out: &Path) -> Result<Vec<String>> {
    require(grasps)?;
    let text = std::fs::read_to_string(grasps).map_err(|e| Error::io(grasps, e))?;
    let list: GraspList = serde_json::from_str(&text).map_err(|e| Error::parse(grasps, e.to_string()))?;
    let scored: Vec<ScoredGrasp> = list
        .grasps
        .iter()
        .enumerate()
        .map(|(index, r)| ScoredGrasp {
            candidate: r.to_candidate(),
            score: r.score.unwrap_or(0.0),
            index,
        })
        .collect();
    let chosen = select_grasp(&scored, &config.selection)?;
    write_json(&out.join("selected.json"), &scored_record(&chosen))?;
    Ok(vec!["selected.json".into()])
}
