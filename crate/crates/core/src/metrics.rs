//! Losses and scores: Chamfer MSE for unordered sets, aligned set MSE,
//! cross-entropy and accuracy, plus dataset-level scoring of prediction files.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::store::{DatasetReader, StoreError};
use crate::tasks::TaskKind;
use crate::tensor::{numel, DType, Tensor};

/// Identifier of the Chamfer variant, recorded in every report.
pub const CHAMFER_DEFINITION: &str = "sym-mean-v1";

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("row width mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("shape mismatch: {0:?} vs {1:?}")]
    Shape(Vec<usize>, Vec<usize>),
    #[error("empty set")]
    Empty,
    #[error("label {label} outside [0, {classes})")]
    Label { label: usize, classes: usize },
    #[error("{0}")]
    Predictions(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// A fixed-size set of `n` rows of width `dim`, padding rows included.
#[derive(Debug, Clone, Copy)]
pub struct SetBatch<'a> {
    data: &'a [f32],
    dim: usize,
}

impl<'a> SetBatch<'a> {
    pub fn new(data: &'a [f32], dim: usize) -> Result<Self, MetricError> {
        if dim == 0 || data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(MetricError::Empty);
        }
        Ok(Self { data, dim })
    }

    pub fn from_tensor(t: &'a Tensor) -> Result<Self, MetricError> {
        let data = t
            .as_f32()
            .ok_or_else(|| MetricError::Predictions("set must be f32".into()))?;
        match t.shape.as_slice() {
            [_, dim] => Self::new(data, *dim),
            other => Err(MetricError::Predictions(format!(
                "set must be rank 2, got {other:?}"
            ))),
        }
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'a, f32> {
        self.data.chunks_exact(self.dim)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = *x as f64 - *y as f64;
            d * d
        })
        .sum()
}

/// Mean over `from` of the squared distance to the nearest row of `to`.
fn directed(from: SetBatch<'_>, to: SetBatch<'_>) -> f64 {
    let total: f64 = from
        .rows()
        .map(|a| {
            to.rows()
                .map(|b| squared_distance(a, b))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    total / from.len() as f64
}

/// `mean_t min_p ‖t − p‖² + mean_p min_t ‖t − p‖²` over full rows.
pub fn chamfer_mse(pred: SetBatch<'_>, target: SetBatch<'_>) -> Result<f64, MetricError> {
    if pred.dim != target.dim {
        return Err(MetricError::Dimension(pred.dim, target.dim));
    }
    Ok(directed(target, pred) + directed(pred, target))
}

/// Mean squared error over all entries of two equally shaped sets.
pub fn aligned_set_mse(pred: &[f32], target: &[f32]) -> Result<f64, MetricError> {
    if pred.len() != target.len() {
        return Err(MetricError::Shape(vec![pred.len()], vec![target.len()]));
    }
    if pred.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(squared_distance(pred, target) / pred.len() as f64)
}

/// Negative log-softmax of `logits` at `label`.
pub fn cross_entropy(logits: &[f32], label: usize) -> Result<f64, MetricError> {
    if label >= logits.len() {
        return Err(MetricError::Label {
            label,
            classes: logits.len(),
        });
    }
    let max = logits
        .iter()
        .map(|v| *v as f64)
        .fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits
        .iter()
        .map(|v| (*v as f64 - max).exp())
        .sum::<f64>()
        .ln()
        + max;
    Ok(log_sum - logits[label] as f64)
}

/// Fraction of exact label matches.
pub fn accuracy(pred: &[u32], truth: &[u32]) -> Result<f64, MetricError> {
    if pred.len() != truth.len() {
        return Err(MetricError::Shape(vec![pred.len()], vec![truth.len()]));
    }
    if pred.is_empty() {
        return Err(MetricError::Empty);
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Index of the largest logit (first on ties).
pub fn argmax(logits: &[f32]) -> usize {
    logits
        .iter()
        .enumerate()
        .fold((0, f32::NEG_INFINITY), |best, (i, v)| {
            if *v > best.1 {
                (i, *v)
            } else {
                best
            }
        })
        .0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    /// Mean and population standard deviation, summed in index order.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                mean: 0.0,
                std: 0.0,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub task: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub count: u64,
    pub chamfer_definition: String,
    /// Present for classification predictions given as logits.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cross_entropy: Option<Summary>,
}

impl Report {
    fn new(task: TaskKind, metric: &str, values: &[f64], count: u64) -> Self {
        let s = Summary::of(values);
        Self {
            task: task.name().to_owned(),
            metric: metric.to_owned(),
            mean: s.mean,
            std: s.std,
            count,
            chamfer_definition: CHAMFER_DEFINITION.to_owned(),
            cross_entropy: None,
        }
    }
}

/// Metric applied to a task's targets.
pub fn metric_name(task: TaskKind) -> &'static str {
    match task {
        TaskKind::ImToParts | TaskKind::ImToChars | TaskKind::Words => "chamfer_mse",
        TaskKind::PartsToChars => "aligned_set_mse",
        _ => "accuracy",
    }
}

/// Scores a prediction file against a dataset.
///
/// The prediction file is either a container with task tag `predictions`
/// whose inputs hold one prediction per sample, or a dataset of the same task
/// whose targets are taken as predictions. Classification predictions are
/// `u32` labels (shape `[]`) or `f32` logits (shape `[10]`).
pub fn score_predictions(
    dataset: &DatasetReader,
    predictions: &DatasetReader,
    task: Option<TaskKind>,
) -> Result<Report, MetricError> {
    let dh = dataset.header();
    let task = match task {
        Some(t) => t,
        None => dh.task.parse().map_err(MetricError::Predictions)?,
    };
    if dh.task != task.name() {
        return Err(MetricError::Predictions(format!(
            "dataset holds {} but scoring was requested for {task}",
            dh.task
        )));
    }
    let ph = predictions.header();
    let use_targets = ph.task == dh.task;
    if !use_targets && ph.task != "predictions" {
        return Err(MetricError::Predictions(format!(
            "prediction file has task `{}`, expected `predictions` or `{}`",
            ph.task, dh.task
        )));
    }
    if ph.count != dh.count {
        return Err(MetricError::Predictions(format!(
            "{} predictions for {} samples",
            ph.count, dh.count
        )));
    }
    let (pshape, pdtype) = if use_targets {
        (&ph.target_shape, ph.target_dtype)
    } else {
        (&ph.input_shape, ph.input_dtype)
    };

    let logits = task.is_classification() && pdtype == DType::F32;
    let expected_ok = if task.is_classification() {
        (pdtype == DType::U32 && pshape.is_empty())
            || (logits && pshape.len() == 1 && pshape[0] >= 1)
    } else {
        pdtype == DType::F32 && pshape == &dh.target_shape
    };
    if !expected_ok {
        return Err(MetricError::Predictions(format!(
            "predictions are {pdtype:?} {pshape:?}, {task} targets are {:?} {:?}",
            dh.target_dtype, dh.target_shape
        )));
    }

    let mut values = Vec::with_capacity(dh.count as usize);
    let mut losses = Vec::new();
    for (sample, pred) in dataset.samples()?.zip(predictions.samples()?) {
        let (sample, pred) = (sample?, pred?);
        let pred = if use_targets { pred.target } else { pred.input };
        match task {
            TaskKind::ImToParts | TaskKind::ImToChars | TaskKind::Words => {
                let p = SetBatch::from_tensor(&pred)?;
                let t = SetBatch::from_tensor(&sample.target)?;
                values.push(chamfer_mse(p, t)?);
            }
            TaskKind::PartsToChars => {
                let p = pred.as_f32().expect("checked dtype");
                let t = sample.target.as_f32().ok_or(MetricError::Empty)?;
                values.push(aligned_set_mse(p, t)?);
            }
            _ => {
                let label = sample
                    .target
                    .as_u32()
                    .and_then(|v| v.first().copied())
                    .ok_or_else(|| {
                        MetricError::Predictions("classification target must be u32".into())
                    })?;
                let predicted = if logits {
                    let l = pred.as_f32().expect("checked dtype");
                    losses.push(cross_entropy(l, label as usize)?);
                    argmax(l) as u32
                } else {
                    pred.as_u32().expect("checked dtype")[0]
                };
                values.push(if predicted == label { 1.0 } else { 0.0 });
            }
        }
    }

    let mut report = Report::new(task, metric_name(task), &values, dh.count);
    if logits {
        report.cross_entropy = Some(Summary::of(&losses));
    }
    Ok(report)
}

/// Header of a `predictions` container for `task`, one prediction per sample.
pub fn predictions_header(task: TaskKind, count: u64, logits: bool) -> crate::store::DatasetHeader {
    let (shape, dtype) = if task.is_classification() {
        if logits {
            (vec![crate::scene::NUM_CLASSES], DType::F32)
        } else {
            (vec![], DType::U32)
        }
    } else {
        (task.target_shape(), DType::F32)
    };
    debug_assert!(numel(&shape) > 0);
    crate::store::DatasetHeader::new("predictions", count, shape, dtype, vec![0], DType::F32)
}
