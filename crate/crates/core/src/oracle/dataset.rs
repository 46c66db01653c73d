//! Simulated dataset construction: render, sample, label, balance, encode.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::antipodal::{AntipodalLabeler, AntipodalParams};
use super::mesh::TriangleMesh;
use super::render::{stereo_render, Intrinsics, StereoRig};
use crate::candgen::{CandidateSampler, GraspCandidate, HandGeometry, SamplerConfig};
use crate::cloud::{CloudWithViewpoints, RegionOfInterest};
use crate::dataset::{Dataset, RecordMeta};
use crate::encode::{CloudEncoder, EncodeConfig, Variant};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NamedMesh {
    pub name: String,
    pub mesh: TriangleMesh,
}

impl NamedMesh {
    pub fn new(name: impl Into<String>, mesh: TriangleMesh) -> Self {
        NamedMesh {
            name: name.into(),
            mesh,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Candidates labeled per mesh, spread evenly over the view pairs.
    pub per_mesh_candidates: usize,
    /// Stereo placements per mesh, evenly spaced in azimuth.
    pub view_pairs: usize,
    pub variant: Variant,
    pub balance: bool,
    pub rig: StereoRig,
    pub intrinsics: Intrinsics,
    pub sampler: SamplerConfig,
    pub encode: EncodeConfig,
    pub antipodal: AntipodalParams,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            per_mesh_candidates: 400,
            view_pairs: 4,
            variant: Variant::Fifteen,
            balance: true,
            rig: StereoRig::default(),
            intrinsics: Intrinsics::default(),
            sampler: SamplerConfig::default(),
            encode: EncodeConfig::default(),
            antipodal: AntipodalParams::default(),
        }
    }
}

/// Per-mesh counts, written one JSON object per line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshDiagnostics {
    pub object: String,
    pub candidates: usize,
    pub positives: usize,
    pub negatives: usize,
    pub collisions: usize,
    pub kept: usize,
    pub empty_views: usize,
    pub skipped: bool,
}

/// A labeled candidate with its source scene.
#[derive(Debug, Clone)]
pub struct LabeledCandidate {
    pub view_pair: usize,
    pub candidate: GraspCandidate,
    pub positive: bool,
    pub collision: bool,
}

/// Independent stream for (mesh, view, purpose).
pub fn derive_seed(seed: u64, mesh: usize, view: usize, purpose: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((mesh as u64) << 32) ^ ((view as u64) << 8) ^ purpose);
    rng.gen()
}

/// Rig for view pair `v`: azimuth offset by `360·v / view_pairs` degrees.
pub fn rig_for_view(config: &DatasetConfig, v: usize) -> StereoRig {
    StereoRig {
        azimuth_deg: config.rig.azimuth_deg + 360.0 * v as f64 / config.view_pairs as f64,
        ..config.rig
    }
}

/// Renders view pair `v` of `mesh`; `None` when nothing was visible.
pub fn render_pair(mesh: &TriangleMesh, config: &DatasetConfig, v: usize) -> Result<Option<CloudWithViewpoints>> {
    match stereo_render(mesh, &rig_for_view(config, v), config.intrinsics) {
        Ok(c) => Ok(Some(c)),
        Err(Error::EmptyRender) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Samples, subsamples to `quota` and labels candidates on one rendered scene.
pub fn label_scene(
    cloud: &CloudWithViewpoints,
    labeler: &AntipodalLabeler,
    hand: &HandGeometry,
    sampler: SamplerConfig,
    quota: usize,
    seed: u64,
) -> Result<Vec<(GraspCandidate, bool, bool)>> {
    let sampler = CandidateSampler::new(cloud, *hand, sampler)?;
    let mut candidates = sampler.sample(&RegionOfInterest::all(cloud), seed)?;
    if candidates.len() > quota {
        let mut order: Vec<usize> = (0..candidates.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed));
        order.truncate(quota);
        order.sort_unstable();
        candidates = order.into_iter().map(|i| candidates[i].clone()).collect();
    }
    Ok(candidates
        .into_par_iter()
        .map(|c| {
            let out = labeler.label(&c);
            (c, out.label.is_positive(), out.collision)
        })
        .collect())
}

struct MeshResult {
    diagnostics: MeshDiagnostics,
    records: Vec<(RecordMeta, Vec<f32>)>,
}

/// Builds a labeled dataset from meshes. Records are ordered by mesh, then
/// view pair, then candidate, independent of thread count.
pub fn build_dataset(
    meshes: &[NamedMesh],
    hand: &HandGeometry,
    config: &DatasetConfig,
    seed: u64,
) -> Result<(Dataset, Vec<MeshDiagnostics>)> {
    hand.validate()?;
    if config.view_pairs == 0 {
        return Err(Error::InvalidArgument("view_pairs must be positive".into()));
    }
    let results: Vec<MeshResult> = meshes
        .par_iter()
        .enumerate()
        .map(|(m, named)| build_mesh(m, named, hand, config, seed))
        .collect::<Result<_>>()?;
    let mut dataset = Dataset::new(config.variant);
    let mut diagnostics = Vec::new();
    for r in results {
        if r.diagnostics.skipped {
            log::warn!("mesh {} yielded no usable candidates", r.diagnostics.object);
        }
        for (meta, image) in &r.records {
            dataset.push(meta.clone(), image)?;
        }
        diagnostics.push(r.diagnostics);
    }
    Ok((dataset, diagnostics))
}

fn build_mesh(
    m: usize,
    named: &NamedMesh,
    hand: &HandGeometry,
    config: &DatasetConfig,
    seed: u64,
) -> Result<MeshResult> {
    let labeler = AntipodalLabeler::new(&named.mesh, *hand, config.antipodal)?;
    let views = config.view_pairs;
    let mut clouds = Vec::with_capacity(views);
    let mut labeled = Vec::new();
    let mut empty_views = 0;
    for v in 0..views {
        let quota = config.per_mesh_candidates / views + usize::from(v < config.per_mesh_candidates % views);
        let Some(cloud) = render_pair(&named.mesh, config, v)? else {
            empty_views += 1;
            clouds.push(None);
            continue;
        };
        let scene = label_scene(
            &cloud,
            &labeler,
            hand,
            config.sampler,
            quota,
            derive_seed(seed, m, v, 1),
        )?;
        labeled.extend(
            scene
                .into_iter()
                .map(|(candidate, positive, collision)| LabeledCandidate {
                    view_pair: v,
                    candidate,
                    positive,
                    collision,
                }),
        );
        clouds.push(Some(cloud));
    }
    let positives = labeled.iter().filter(|c| c.positive).count();
    let mut diagnostics = MeshDiagnostics {
        object: named.name.clone(),
        candidates: labeled.len(),
        positives,
        negatives: labeled.len() - positives,
        collisions: labeled.iter().filter(|c| c.collision).count(),
        kept: 0,
        empty_views,
        skipped: false,
    };
    let keep = if config.balance {
        balanced_subset(&labeled, derive_seed(seed, m, 0, 2))
    } else {
        (0..labeled.len()).collect()
    };
    diagnostics.kept = keep.len();
    diagnostics.skipped = keep.is_empty();

    let mut records = Vec::with_capacity(keep.len());
    for (v, cloud) in clouds.iter().enumerate() {
        let Some(cloud) = cloud else { continue };
        let here: Vec<&LabeledCandidate> = keep.iter().map(|&i| &labeled[i]).filter(|c| c.view_pair == v).collect();
        if here.is_empty() {
            continue;
        }
        let encoder = CloudEncoder::new(cloud, config.encode)?;
        let candidates: Vec<GraspCandidate> = here.iter().map(|c| c.candidate.clone()).collect();
        let images = encoder.encode_all(&candidates, config.variant)?;
        for (c, img) in here.iter().zip(images) {
            let meta = RecordMeta {
                object: named.name.clone(),
                view_ids: vec![2 * v as u32, 2 * v as u32 + 1],
                label: c.positive as u8,
            };
            records.push((meta, img.data));
        }
    }
    Ok(MeshResult { diagnostics, records })
}

/// Indices keeping every minority-class record and an equal-size seeded
/// sample of the majority class, in original order.
pub fn balanced_subset(labeled: &[LabeledCandidate], seed: u64) -> Vec<usize> {
    let pos: Vec<usize> = (0..labeled.len()).filter(|&i| labeled[i].positive).collect();
    let neg: Vec<usize> = (0..labeled.len()).filter(|&i| !labeled[i].positive).collect();
    let n = pos.len().min(neg.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick = |mut v: Vec<usize>| {
        if v.len() > n {
            v.shuffle(&mut rng);
            v.truncate(n);
        }
        v
    };
    let mut keep = pick(pos);
    keep.extend(pick(neg));
    keep.sort_unstable();
    keep
}

/// Writes diagnostics as JSON lines.
pub fn write_diagnostics(path: &Path, diagnostics: &[MeshDiagnostics]) -> Result<()> {
    let mut out = Vec::new();
    for d in diagnostics {
        serde_json::to_writer(&mut out, d).expect("diagnostics serialize");
        out.push(b'\n');
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> DatasetConfig {
        DatasetConfig {
            per_mesh_candidates: 40,
            view_pairs: 2,
            variant: Variant::ThreeCurvature,
            intrinsics: Intrinsics {
                width: 160,
                height: 120,
                hfov_deg: 40.0,
            },
            sampler: SamplerConfig {
                n_samples: 20,
                ..SamplerConfig::default()
            },
            ..DatasetConfig::default()
        }
    }

    #[test]
    fn balanced_and_deterministic() {
        let meshes = vec![
            NamedMesh::new("box", TriangleMesh::make_box(0.05, 0.06, 0.1)),
            NamedMesh::new("cyl", TriangleMesh::make_cylinder(0.025, 0.1, 24)),
        ];
        let hand = HandGeometry::default();
        let cfg = small_config();
        let (a, diag) = build_dataset(&meshes, &hand, &cfg, 3).unwrap();
        let (b, _) = build_dataset(&meshes, &hand, &cfg, 3).unwrap();
        assert_eq!(a, b);
        let pos = a.records().iter().filter(|r| r.label == 1).count();
        assert_eq!(2 * pos, a.len());
        assert_eq!(a.len(), diag.iter().map(|d| d.kept).sum::<usize>());
        for r in a.records() {
            assert!(r.view_ids == vec![0, 1] || r.view_ids == vec![2, 3]);
        }
    }

    #[test]
    fn balance_keeps_minority() {
        let c = GraspCandidate {
            pose: crate::geom::Pose::identity(),
            frame: crate::localgeom::LocalFrame {
                origin: Default::default(),
                normal: crate::geom::Vec3::x(),
                curvature_axis: crate::geom::Vec3::y(),
                binormal: crate::geom::Vec3::z(),
                neighborhood_count: 0,
            },
            closing_region: crate::geom::OrientedBox {
                center: Default::default(),
                axes: nalgebra::Matrix3::identity(),
                half_extents: crate::geom::Vec3::repeat(0.01),
            },
            aperture: 0.08,
            object_width: 0.0,
            sample_index: 0,
            orientation_index: 0,
            point_index: 0,
        };
        let labeled: Vec<LabeledCandidate> = (0..10)
            .map(|i| LabeledCandidate {
                view_pair: 0,
                candidate: c.clone(),
                positive: i % 5 == 0,
                collision: false,
            })
            .collect();
        let keep = balanced_subset(&labeled, 1);
        assert_eq!(keep.len(), 4);
        assert!(keep.contains(&0) && keep.contains(&5));
        assert!(keep.windows(2).all(|w| w[0] < w[1]));
    }
}
