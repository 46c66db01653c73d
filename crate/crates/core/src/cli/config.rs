//! Run configuration: every module's knobs in one TOML document.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::candgen::{HandGeometry, SamplerConfig};
use crate::encode::{EncodeConfig, Variant};
use crate::error::{Error, Result};
use crate::eval::{DetectConfig, SelectionConfig, HIGH_PRECISION};
use crate::learn::SolverConfig;
use crate::oracle::{AntipodalParams, DatasetConfig, Intrinsics, StereoRig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds every stochastic stage.
    pub seed: u64,
    pub variant: Variant,
    pub hand: HandGeometry,
    pub sampler: SamplerConfig,
    pub encode: EncodeConfig,
    pub antipodal: AntipodalParams,
    pub render: RenderSection,
    pub dataset: DatasetSection,
    pub solver: SolverConfig,
    pub split: SplitSection,
    pub detect: DetectSection,
    pub selection: SelectionConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            variant: Variant::Fifteen,
            hand: HandGeometry::default(),
            sampler: SamplerConfig::default(),
            encode: EncodeConfig::default(),
            antipodal: AntipodalParams::default(),
            render: RenderSection::default(),
            dataset: DatasetSection::default(),
            solver: SolverConfig::default(),
            split: SplitSection::default(),
            detect: DetectSection::default(),
            selection: SelectionConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderSection {
    pub rig: StereoRig,
    pub intrinsics: Intrinsics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub per_mesh_candidates: usize,
    pub view_pairs: usize,
    pub balance: bool,
}

impl Default for DatasetSection {
    fn default() -> Self {
        let d = DatasetConfig::default();
        DatasetSection {
            per_mesh_candidates: d.per_mesh_candidates,
            view_pairs: d.view_pairs,
            balance: d.balance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub test_fraction: f64,
    /// Hold out this object instead of splitting by view.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leave_out_object: Option<String>,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            test_fraction: 0.25,
            leave_out_object: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectSection {
    /// Fixed score threshold; when absent it comes from a validation report.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub min_precision: f64,
}

impl Default for DetectSection {
    fn default() -> Self {
        DetectSection {
            threshold: None,
            min_precision: HIGH_PRECISION,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::parse(path, m),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn dataset_config(&self) -> DatasetConfig {
        DatasetConfig {
            per_mesh_candidates: self.dataset.per_mesh_candidates,
            view_pairs: self.dataset.view_pairs,
            variant: self.variant,
            balance: self.dataset.balance,
            rig: self.render.rig,
            intrinsics: self.render.intrinsics,
            sampler: self.sampler,
            encode: self.encode,
            antipodal: self.antipodal,
        }
    }

    pub fn detect_config(&self) -> DetectConfig {
        DetectConfig {
            sampler: self.sampler,
            encode: self.encode,
            seed: self.seed,
        }
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            seed: self.seed,
            ..self.solver
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn printed_config_round_trips() {
        let mut c = RunConfig::default();
        c.seed = 17;
        c.split.leave_out_object = Some("box".into());
        c.detect.threshold = Some(0.7);
        let text = c.to_toml();
        assert_eq!(RunConfig::parse(&text).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("seed = 1\nbogus = 2\n").is_err());
        assert!(RunConfig::parse("[hand]\nfinger_widht = 0.01\n").is_err());
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c = RunConfig::parse("[solver]\nbatch_size = 8\n").unwrap();
        assert_eq!(c.solver.batch_size, 8);
        assert_eq!(c.solver.learning_rate, SolverConfig::default().learning_rate);
        assert_eq!(c.hand, HandGeometry::default());
    }
}
