//! Labeled grasp-image datasets: a JSON manifest plus a flat tensor blob.
//!
//! `manifest.json` lists one record per image with its object and view
//! provenance; `data.bin` holds the images back to back as little-endian
//! `f32`, channel-major within each record.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::encode::{Variant, GRID_SIZE, IMAGE_PIXELS};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DATA_FILE: &str = "data.bin";

/// Provenance and label of one exemplar.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordMeta {
    pub object: String,
    pub view_ids: Vec<u32>,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub count: usize,
    pub channels: usize,
    pub width: usize,
    pub height: usize,
    pub variant: Variant,
    pub records: Vec<RecordMeta>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    variant: Variant,
    records: Vec<RecordMeta>,
    data: Vec<f32>,
}

impl Dataset {
    pub fn new(variant: Variant) -> Self {
        Dataset {
            variant,
            records: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn channels(&self) -> usize {
        self.variant.channels()
    }

    /// Floats per record.
    pub fn record_len(&self) -> usize {
        self.channels() * IMAGE_PIXELS
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[RecordMeta] {
        &self.records
    }

    pub fn labels(&self) -> Vec<u8> {
        self.records.iter().map(|r| r.label).collect()
    }

    pub fn image(&self, i: usize) -> &[f32] {
        let n = self.record_len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn push(&mut self, meta: RecordMeta, image: &[f32]) -> Result<()> {
        if image.len() != self.record_len() {
            return Err(Error::ShapeMismatch(format!(
                "image has {} values, dataset expects {}",
                image.len(),
                self.record_len()
            )));
        }
        if meta.label > 1 {
            return Err(Error::InvalidArgument(format!("label {} is not binary", meta.label)));
        }
        self.records.push(meta);
        self.data.extend_from_slice(image);
        Ok(())
    }

    pub fn extend(&mut self, other: &Dataset) -> Result<()> {
        if other.variant != self.variant {
            return Err(Error::ShapeMismatch(format!(
                "cannot merge {} into {}",
                other.variant, self.variant
            )));
        }
        self.records.extend_from_slice(&other.records);
        self.data.extend_from_slice(&other.data);
        Ok(())
    }

    /// New dataset holding `indices` in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut out = Dataset::new(self.variant);
        for &i in indices {
            out.records.push(self.records[i].clone());
            out.data.extend_from_slice(self.image(i));
        }
        out
    }

    /// Same records re-expressed as `target`, when `target`'s channels are a
    /// subset of this dataset's `Fifteen` channels.
    pub fn select_variant(&self, target: Variant) -> Result<Dataset> {
        if target == self.variant {
            return Ok(self.clone());
        }
        let picks = match (self.variant, target.fifteen_subset()) {
            (Variant::Fifteen, Some(p)) => p,
            _ => {
                return Err(Error::ShapeMismatch(format!(
                    "{target} cannot be derived from {}",
                    self.variant
                )))
            }
        };
        let mut data = Vec::with_capacity(self.len() * picks.len() * IMAGE_PIXELS);
        for i in 0..self.len() {
            let img = self.image(i);
            for &c in &picks {
                data.extend_from_slice(&img[c * IMAGE_PIXELS..(c + 1) * IMAGE_PIXELS]);
            }
        }
        Ok(Dataset {
            variant: target,
            records: self.records.clone(),
            data,
        })
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            count: self.records.len(),
            channels: self.channels(),
            width: GRID_SIZE,
            height: GRID_SIZE,
            variant: self.variant,
            records: self.records.clone(),
        }
    }

    /// Writes `manifest.json` and `data.bin` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&self.manifest()).expect("manifest serializes");
        fs::write(&manifest, text).map_err(|e| Error::io(&manifest, e))?;
        let blob: Vec<u8> = self.data.iter().flat_map(|v| v.to_le_bytes()).collect();
        let data = dir.join(DATA_FILE);
        fs::write(&data, blob).map_err(|e| Error::io(&data, e))
    }

    pub fn load(dir: &Path) -> Result<Dataset> {
        let (manifest_path, data_path) = paths(dir);
        let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| Error::parse(&manifest_path, e.to_string()))?;
        if manifest.count != manifest.records.len() {
            return Err(Error::parse(&manifest_path, "count differs from record list"));
        }
        if manifest.channels != manifest.variant.channels()
            || manifest.width != GRID_SIZE
            || manifest.height != GRID_SIZE
        {
            return Err(Error::parse(&manifest_path, "image shape does not match variant"));
        }
        if let Some(r) = manifest.records.iter().find(|r| r.label > 1) {
            return Err(Error::parse(&manifest_path, format!("label {} is not binary", r.label)));
        }
        let bytes = fs::read(&data_path).map_err(|e| Error::io(&data_path, e))?;
        let expected = manifest.count * manifest.channels * IMAGE_PIXELS * 4;
        if bytes.len() != expected {
            return Err(Error::parse(
                &data_path,
                format!("expected {expected} bytes, found {}", bytes.len()),
            ));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(Dataset {
            variant: manifest.variant,
            records: manifest.records,
            data,
        })
    }
}

/// Record indices for the two sides of an experiment.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Manifest and blob locations for a dataset directory.
pub fn paths(dir: &Path) -> (PathBuf, PathBuf) {
    (dir.join(MANIFEST_FILE), dir.join(DATA_FILE))
}
