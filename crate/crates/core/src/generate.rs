//! Parallel dataset generation with an ordered single writer.

use std::path::Path;

use rayon::prelude::*;

use crate::raster::quantize_u8;
use crate::rng::Split;
use crate::scene::PoseRanges;
use crate::store::{DatasetWriter, Manifest};
use crate::tasks::{TaskError, TaskGenerator, TaskKind, TaskSample};
use crate::tensor::{DType, Tensor};

/// Samples handed from the worker pool to the writer per round.
const CHUNK: u64 = 512;

#[derive(Debug, Clone)]
pub struct GenerateOptions {
    pub task: TaskKind,
    pub split: Split,
    pub count: u64,
    pub seed: u64,
    pub ranges: PoseRanges,
    pub margin: f64,
    pub workers: usize,
    /// Store images as `round(255 · pixel)` bytes instead of `f32`.
    pub u8_images: bool,
}

impl GenerateOptions {
    pub fn new(task: TaskKind, split: Split, count: u64, seed: u64) -> Self {
        Self {
            task,
            split,
            count,
            seed,
            ranges: PoseRanges::default(),
            margin: 0.0,
            workers: 1,
            u8_images: false,
        }
    }

    pub fn generator(&self) -> Result<TaskGenerator, TaskError> {
        TaskGenerator::new(
            self.task,
            self.task
                .sampler_config(self.ranges.clone(), self.margin, self.seed, self.split),
        )
    }
}

/// Converts an `f32` image input to its 8-bit storage form.
pub fn to_u8_images(mut sample: TaskSample) -> TaskSample {
    if let Some(pixels) = sample.input.as_f32() {
        let bytes = pixels.iter().map(|p| quantize_u8(*p)).collect();
        sample.input = Tensor::u8(sample.input.shape.clone(), bytes);
    }
    sample
}

/// Generates `opts.count` samples into `path`. The file bytes depend only on
/// the options, never on the worker count.
pub fn generate_dataset(
    path: impl AsRef<Path>,
    opts: &GenerateOptions,
) -> Result<Manifest, TaskError> {
    let generator = opts.generator()?;
    let u8_images = opts.u8_images && opts.task.has_image_input();
    let input_dtype = if u8_images { DType::U8 } else { DType::F32 };
    let mut writer = DatasetWriter::create(path, generator.header(opts.count, input_dtype))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .map_err(|e| TaskError::WorkerPool(e.to_string()))?;

    let mut start = 0;
    while start < opts.count {
        let end = (start + CHUNK).min(opts.count);
        let batch: Vec<TaskSample> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|i| {
                    let s = generator.sample(i)?;
                    Ok(if u8_images { to_u8_images(s) } else { s })
                })
                .collect::<Result<_, TaskError>>()
        })?;
        for sample in &batch {
            writer.push(sample)?;
        }
        start = end;
    }
    Ok(writer.finish()?)
}
