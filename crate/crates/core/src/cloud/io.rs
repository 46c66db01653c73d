use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CloudWithViewpoints, Viewpoint};
use crate::error::{Error, Result};
use crate::formats::{self, pcd, ply};
use crate::geom::Vec3;

pub use crate::formats::ply::PlyEncoding;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SidecarViewpoint {
    id: u32,
    position: [f64; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    viewpoints: Vec<SidecarViewpoint>,
    view_of: Vec<Vec<u32>>,
}

/// `cloud.ply` -> `cloud.views.json`.
pub fn sidecar_path(cloud_path: &Path) -> PathBuf {
    cloud_path.with_extension("views.json")
}

fn read_points(path: &Path) -> Result<Vec<[f64; 3]>> {
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        ));
    }
    match formats::extension(path).as_deref() {
        Some("ply") => Ok(ply::read_ply(path)?.vertices),
        Some("pcd") => pcd::read_pcd(path),
        other => Err(Error::UnsupportedFormat(format!(
            "{}: unknown cloud extension {:?}",
            path.display(),
            other
        ))),
    }
}

/// Loads a PLY or ASCII PCD cloud, tagging every point with `viewpoint`.
/// Records with non-finite coordinates are dropped.
pub fn load_cloud(path: &Path, viewpoint: Viewpoint) -> Result<CloudWithViewpoints> {
    let points: Vec<Vec3> = read_points(path)?
        .into_iter()
        .map(Vec3::from)
        .filter(|p| p.iter().all(|c| c.is_finite()))
        .collect();
    if points.is_empty() {
        return Err(Error::ZeroValidPoints);
    }
    CloudWithViewpoints::from_single_view(points, viewpoint)
}

/// Loads a cloud together with its viewpoint sidecar.
pub fn load_cloud_with_sidecar(path: &Path) -> Result<CloudWithViewpoints> {
    let side_path = sidecar_path(path);
    let text = std::fs::read_to_string(&side_path).map_err(|e| Error::io(&side_path, e))?;
    let sidecar: Sidecar = serde_json::from_str(&text).map_err(|e| Error::parse(&side_path, e.to_string()))?;
    let raw = read_points(path)?;
    if raw.len() != sidecar.view_of.len() {
        return Err(Error::parse(
            &side_path,
            format!("{} view sets for {} points", sidecar.view_of.len(), raw.len()),
        ));
    }
    let (points, view_of): (Vec<Vec3>, Vec<Vec<u32>>) = raw
        .into_iter()
        .zip(sidecar.view_of)
        .map(|(p, v)| (Vec3::from(p), v))
        .filter(|(p, _)| p.iter().all(|c| c.is_finite()))
        .unzip();
    if points.is_empty() {
        return Err(Error::ZeroValidPoints);
    }
    let viewpoints = sidecar
        .viewpoints
        .into_iter()
        .map(|v| Viewpoint::new(v.id, Vec3::from(v.position)))
        .collect();
    CloudWithViewpoints::new(points, view_of, viewpoints)
}

pub fn write_ply(path: &Path, cloud: &CloudWithViewpoints, encoding: PlyEncoding) -> Result<()> {
    let pts: Vec<[f64; 3]> = cloud.points().iter().map(|p| [p.x, p.y, p.z]).collect();
    ply::write_vertices(path, &pts, encoding)
}

/// Writes the cloud as PLY plus its viewpoint sidecar next to it.
pub fn save_cloud(path: &Path, cloud: &CloudWithViewpoints, encoding: PlyEncoding) -> Result<()> {
    write_ply(path, cloud, encoding)?;
    let sidecar = Sidecar {
        viewpoints: cloud
            .viewpoints()
            .iter()
            .map(|v| SidecarViewpoint {
                id: v.id,
                position: [v.position.x, v.position.y, v.position.z],
            })
            .collect(),
        view_of: cloud.view_sets().to_vec(),
    };
    let side_path = sidecar_path(path);
    let text = serde_json::to_string(&sidecar).expect("sidecar serializes");
    std::fs::write(&side_path, text).map_err(|e| Error::io(&side_path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vp() -> Viewpoint {
        Viewpoint::new(0, Vec3::new(0.0, 0.0, 1.0))
    }

    #[test]
    fn nan_records_are_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ply");
        std::fs::write(
            &path,
            "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\n\
             end_header\n0 0 0\nnan 1 1\n1 2 3\n",
        )
        .unwrap();
        let cloud = load_cloud(&path, vp()).unwrap();
        assert_eq!(cloud.len(), 2);
        assert!(cloud.view_sets().iter().all(|v| v == &[0]));
    }

    #[test]
    fn empty_ply_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.ply");
        std::fs::write(
            &path,
            "ply\nformat ascii 1.0\nelement vertex 0\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
        )
        .unwrap();
        assert!(matches!(load_cloud(&path, vp()), Err(Error::ZeroValidPoints)));
    }

    #[test]
    fn missing_and_unknown_files() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_cloud(&dir.path().join("none.ply"), vp()),
            Err(Error::Io { .. })
        ));
        let txt = dir.path().join("c.xyz");
        std::fs::write(&txt, "0 0 0\n").unwrap();
        assert!(matches!(load_cloud(&txt, vp()), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn sidecar_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.ply");
        let cloud = CloudWithViewpoints::new(
            vec![Vec3::new(0.1, 0.2, 0.3), Vec3::new(-0.1, 0.0, 0.5)],
            vec![vec![0], vec![0, 4]],
            vec![
                Viewpoint::new(0, Vec3::new(1.0, 0.0, 0.0)),
                Viewpoint::new(4, Vec3::new(0.0, 1.0, 0.0)),
            ],
        )
        .unwrap();
        save_cloud(&path, &cloud, PlyEncoding::Ascii).unwrap();
        let back = load_cloud_with_sidecar(&path).unwrap();
        assert_eq!(back.view_sets(), cloud.view_sets());
        assert_eq!(back.viewpoints(), cloud.viewpoints());
        for (a, b) in back.points().iter().zip(cloud.points()) {
            assert!((a - b).norm() < 1e-6);
        }
    }
}
