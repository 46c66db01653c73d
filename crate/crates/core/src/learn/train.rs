//! Training loop, training log and inference helpers.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::io::load_model;
use super::network::{Architecture, CnnModel};
use super::solver::{backward_step, Sgd, SolverConfig};
use crate::dataset::{Dataset, SplitSpec};
use crate::encode::GraspImage;
use crate::error::{Error, Result};

/// Inference chunk size; bounds memory without affecting results.
const EVAL_CHUNK: usize = 64;

#[derive(Debug, Clone)]
pub enum Init {
    /// Seeded LeNet sized for the dataset's channel count.
    Random,
    /// Seeded random weights with a custom architecture.
    RandomWith(Architecture),
    WarmStart(PathBuf),
    Model(CnnModel),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogEntry {
    pub iteration: usize,
    pub loss: f64,
    pub test_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub entries: Vec<LogEntry>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,loss,test_accuracy\n");
        for e in &self.entries {
            let acc = e.test_accuracy.map(|a| a.to_string()).unwrap_or_default();
            writeln!(s, "{},{},{}", e.iteration, e.loss, acc).unwrap();
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// `(iteration, accuracy)` for every evaluated iteration.
    pub fn accuracies(&self) -> Vec<(usize, f64)> {
        self.entries
            .iter()
            .filter_map(|e| e.test_accuracy.map(|a| (e.iteration, a)))
            .collect()
    }

    /// First evaluated iteration whose test accuracy reaches `target`.
    pub fn first_reaching(&self, target: f64) -> Option<usize> {
        self.accuracies()
            .into_iter()
            .find(|&(_, a)| a >= target)
            .map(|(i, _)| i)
    }
}

fn initial_model(init: &Init, channels: usize, seed: u64) -> Result<CnnModel> {
    let model = match init {
        Init::Random => CnnModel::init(Architecture::lenet(channels), seed)?,
        Init::RandomWith(arch) => CnnModel::init(*arch, seed)?,
        Init::WarmStart(path) => load_model(path)?,
        Init::Model(m) => m.clone(),
    };
    if model.arch().channels != channels {
        return Err(Error::ShapeMismatch(format!(
            "model expects {} channels, data has {}",
            model.arch().channels,
            channels
        )));
    }
    Ok(model)
}

fn check_split(dataset: &Dataset, split: &SplitSpec) -> Result<()> {
    if split.train.is_empty() {
        return Err(Error::EmptySplit("train side is empty".into()));
    }
    if split.test.is_empty() {
        return Err(Error::EmptySplit("test side is empty".into()));
    }
    if let Some(&i) = split.train.iter().chain(&split.test).find(|&&i| i >= dataset.len()) {
        return Err(Error::InvalidArgument(format!("split index {i} out of range")));
    }
    let positives = split.train.iter().filter(|&&i| dataset.records()[i].label == 1).count();
    if positives == 0 || positives == split.train.len() {
        return Err(Error::EmptySplit("train side lacks one of the classes".into()));
    }
    Ok(())
}

/// Trains for `solver.max_iterations` steps on `split.train`, logging the
/// batch loss every step and test accuracy every `solver.test_interval`
/// steps and at the end.
pub fn train(dataset: &Dataset, split: &SplitSpec, solver: &SolverConfig, init: Init) -> Result<(CnnModel, TrainLog)> {
    solver.validate()?;
    check_split(dataset, split)?;
    let mut model = initial_model(&init, dataset.channels(), solver.seed)?;
    if model.arch().input_size != crate::encode::GRID_SIZE {
        return Err(Error::ShapeMismatch(
            "model input size differs from the image size".into(),
        ));
    }
    let mut sgd = Sgd::new(model.params().len());
    let mut log = TrainLog::default();
    let test_labels: Vec<u8> = split.test.iter().map(|&i| dataset.records()[i].label).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(solver.seed ^ 0x7a11);
    let mut order = split.train.clone();
    order.shuffle(&mut rng);
    let mut cursor = 0;
    let batch_size = solver.batch_size.min(order.len());
    let mut batch = Vec::with_capacity(batch_size * dataset.record_len());
    let mut labels = Vec::with_capacity(batch_size);

    for iter in 0..solver.max_iterations {
        batch.clear();
        labels.clear();
        for _ in 0..batch_size {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let i = order[cursor];
            cursor += 1;
            batch.extend_from_slice(dataset.image(i));
            labels.push(dataset.records()[i].label);
        }
        let loss = backward_step(&mut model, &mut sgd, &batch, &labels, solver, iter)?;
        let done = iter + 1;
        let evaluate = done == solver.max_iterations || (solver.test_interval > 0 && done % solver.test_interval == 0);
        let test_accuracy = if evaluate {
            let scores = predict_indices(&model, dataset, &split.test)?;
            Some(accuracy(&scores, &test_labels))
        } else {
            None
        };
        log.entries.push(LogEntry {
            iteration: done,
            loss,
            test_accuracy,
        });
    }
    Ok((model, log))
}

/// Positive-class probabilities for dataset records, in `indices` order.
pub fn predict_indices(model: &CnnModel, dataset: &Dataset, indices: &[usize]) -> Result<Vec<f64>> {
    if model.arch().channels != dataset.channels() {
        return Err(Error::ShapeMismatch(format!(
            "model expects {} channels, data has {}",
            model.arch().channels,
            dataset.channels()
        )));
    }
    let mut out = Vec::with_capacity(indices.len());
    let mut buf = Vec::new();
    for chunk in indices.chunks(EVAL_CHUNK) {
        buf.clear();
        for &i in chunk {
            buf.extend_from_slice(dataset.image(i));
        }
        out.extend(model.positive_scores(&buf)?.into_iter().map(f64::from));
    }
    Ok(out)
}

/// Positive-class probability per image, order-preserving.
pub fn predict_scores(model: &CnnModel, images: &[GraspImage]) -> Result<Vec<f64>> {
    let expected = model.arch().channels;
    if let Some(img) = images
        .iter()
        .find(|i| i.channels() != expected || i.data.len() != model.arch().input_len())
    {
        return Err(Error::ShapeMismatch(format!(
            "model expects {expected} channels, image has {}",
            img.channels()
        )));
    }
    let mut out = Vec::with_capacity(images.len());
    let mut buf = Vec::new();
    for chunk in images.chunks(EVAL_CHUNK) {
        buf.clear();
        for img in chunk {
            buf.extend_from_slice(&img.data);
        }
        out.extend(model.positive_scores(&buf)?.into_iter().map(f64::from));
    }
    Ok(out)
}

/// Fraction of examples where `score > 0.5` matches `label == 1`.
pub fn accuracy(scores: &[f64], labels: &[u8]) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    let correct = scores
        .iter()
        .zip(labels)
        .filter(|(s, l)| (**s > 0.5) == (**l == 1))
        .count();
    correct as f64 / scores.len() as f64
}
