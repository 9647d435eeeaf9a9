//! The seven supervised tasks: input/target construction with endpoint
//! duplication, zero padding and shuffling.
//!
//! Class labels are 0-based. Shuffles permute the whole outer dimension,
//! padding rows included.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::LinePose;
use crate::raster::{render_scene, Image};
use crate::rng::{Purpose, Split};
use crate::scene::{
    generalised_pose, Category, PoseRanges, Sampler, SamplerConfig, Scene, SceneError,
    GENERALISED_POSE_DIM,
};
use crate::store::{DatasetHeader, DatasetReader, DatasetWriter, Manifest, StoreError};
use crate::tensor::{DType, Tensor};

/// Rows of an ImToParts target (and PartsToClass input).
pub const PART_ROWS: usize = 9;
/// Rows of PartsToChars inputs and targets.
pub const PARTS_TO_CHARS_ROWS: usize = 25;
/// Rows of ImToChars and Words targets.
pub const OBJECT_ROWS: usize = 4;

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("{task} needs {expected} top-level object(s), scene has {found}")]
    ObjectCount {
        task: TaskKind,
        expected: &'static str,
        found: usize,
    },
    #[error("{task} needs {expected:?} objects, scene has {found:?}")]
    Category {
        task: TaskKind,
        expected: Category,
        found: Category,
    },
    #[error("{0} inputs are produced by repackaging activations, not by sampling")]
    NotSampled(TaskKind),
    #[error("activation mismatch: {0}")]
    Activations(String),
    #[error("worker pool: {0}")]
    WorkerPool(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    ImToParts,
    PartsToChars,
    ImToChars,
    ImToClass,
    PartsToClass,
    PreTrainedPartsToClass,
    Words,
}

impl TaskKind {
    pub const ALL: [TaskKind; 7] = [
        TaskKind::ImToParts,
        TaskKind::PartsToChars,
        TaskKind::ImToChars,
        TaskKind::ImToClass,
        TaskKind::PartsToClass,
        TaskKind::PreTrainedPartsToClass,
        TaskKind::Words,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::ImToParts => "im_to_parts",
            TaskKind::PartsToChars => "parts_to_chars",
            TaskKind::ImToChars => "im_to_chars",
            TaskKind::ImToClass => "im_to_class",
            TaskKind::PartsToClass => "parts_to_class",
            TaskKind::PreTrainedPartsToClass => "pre_trained_parts_to_class",
            TaskKind::Words => "words",
        }
    }

    /// Input shape, or `None` when it depends on the activation file.
    pub fn input_shape(&self) -> Option<Vec<usize>> {
        match self {
            TaskKind::ImToParts | TaskKind::ImToChars | TaskKind::ImToClass | TaskKind::Words => {
                Some(Image::SHAPE.to_vec())
            }
            TaskKind::PartsToChars => Some(vec![PARTS_TO_CHARS_ROWS, LinePose::DIM]),
            TaskKind::PartsToClass => Some(vec![PART_ROWS, LinePose::DIM]),
            TaskKind::PreTrainedPartsToClass => None,
        }
    }

    pub fn target_shape(&self) -> Vec<usize> {
        match self {
            TaskKind::ImToParts => vec![PART_ROWS, LinePose::DIM],
            TaskKind::PartsToChars => vec![PARTS_TO_CHARS_ROWS, GENERALISED_POSE_DIM],
            TaskKind::ImToChars | TaskKind::Words => vec![OBJECT_ROWS, GENERALISED_POSE_DIM],
            TaskKind::ImToClass | TaskKind::PartsToClass | TaskKind::PreTrainedPartsToClass => {
                vec![]
            }
        }
    }

    pub fn target_dtype(&self) -> DType {
        if self.is_classification() {
            DType::U32
        } else {
            DType::F32
        }
    }

    pub fn is_classification(&self) -> bool {
        matches!(
            self,
            TaskKind::ImToClass | TaskKind::PartsToClass | TaskKind::PreTrainedPartsToClass
        )
    }

    pub fn has_image_input(&self) -> bool {
        matches!(
            self,
            TaskKind::ImToParts | TaskKind::ImToChars | TaskKind::ImToClass | TaskKind::Words
        )
    }

    /// Scene distribution behind the task.
    pub fn sampler_config(
        &self,
        ranges: PoseRanges,
        margin: f64,
        seed: u64,
        split: Split,
    ) -> SamplerConfig {
        let base = match self {
            TaskKind::PartsToChars | TaskKind::ImToChars => SamplerConfig::characters(1, 3),
            TaskKind::Words => SamplerConfig::words(1, 3),
            _ => SamplerConfig::characters(1, 1),
        };
        SamplerConfig {
            ranges,
            margin,
            ..base
        }
        .with_seed(seed, split)
    }
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.name())
    }
}

impl std::str::FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let normalized: String = s.chars().filter(|c| *c != '_' && *c != '-').collect();
        TaskKind::ALL
            .into_iter()
            .find(|t| t.name().replace('_', "").eq_ignore_ascii_case(&normalized))
            .ok_or_else(|| {
                let names: Vec<_> = TaskKind::ALL.iter().map(|t| t.name()).collect();
                format!("unknown task `{s}` (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSample {
    pub index: u64,
    pub input: Tensor,
    pub target: Tensor,
}

/// Each line followed by its endpoint-swapped twin.
pub fn duplicate_endpoints(lines: &[LinePose]) -> Vec<LinePose> {
    lines.iter().flat_map(|l| [*l, l.swapped()]).collect()
}

fn image_tensor(img: Image) -> Tensor {
    Tensor::f32(Image::SHAPE.to_vec(), img.into_pixels())
}

fn rows_tensor<const W: usize>(rows: &[[f32; W]]) -> Tensor {
    Tensor::f32(
        vec![rows.len(), W],
        rows.iter().flatten().copied().collect(),
    )
}

fn single_character(task: TaskKind, scene: &Scene) -> Result<(), TaskError> {
    if scene.objects.len() != 1 {
        return Err(TaskError::ObjectCount {
            task,
            expected: "exactly 1",
            found: scene.objects.len(),
        });
    }
    expect_category(task, scene, Category::Character)
}

fn expect_category(task: TaskKind, scene: &Scene, expected: Category) -> Result<(), TaskError> {
    match scene.objects.iter().find(|o| o.class.category != expected) {
        Some(o) => Err(TaskError::Category {
            task,
            expected,
            found: o.class.category,
        }),
        None => Ok(()),
    }
}

fn one_to_three(task: TaskKind, scene: &Scene, category: Category) -> Result<(), TaskError> {
    if !(1..=3).contains(&scene.objects.len()) {
        return Err(TaskError::ObjectCount {
            task,
            expected: "1 to 3",
            found: scene.objects.len(),
        });
    }
    expect_category(task, scene, category)
}

fn part_rows(scene: &Scene, rng: &mut impl Rng) -> Vec<[f32; 6]> {
    let mut rows: Vec<[f32; 6]> = duplicate_endpoints(&scene.object_lines[0])
        .iter()
        .map(LinePose::to_f32)
        .collect();
    debug_assert!(rows.len() < PART_ROWS);
    rows.resize(PART_ROWS, [0.0; 6]);
    rows.shuffle(rng);
    rows
}

pub fn emit_im_to_parts(
    scene: &Scene,
    index: u64,
    rng: &mut impl Rng,
) -> Result<TaskSample, TaskError> {
    single_character(TaskKind::ImToParts, scene)?;
    Ok(TaskSample {
        index,
        input: image_tensor(render_scene(scene)),
        target: rows_tensor(&part_rows(scene, rng)),
    })
}

pub fn emit_parts_to_chars(
    scene: &Scene,
    index: u64,
    rng: &mut impl Rng,
) -> Result<TaskSample, TaskError> {
    one_to_three(TaskKind::PartsToChars, scene, Category::Character)?;
    let mut rows: Vec<([f32; 6], [f32; GENERALISED_POSE_DIM])> = Vec::new();
    for (object, lines) in scene.objects.iter().zip(&scene.object_lines) {
        let owner = generalised_pose(object.class, &object.pose)?.to_f32();
        rows.extend(
            duplicate_endpoints(lines)
                .iter()
                .map(|l| (l.to_f32(), owner)),
        );
    }
    debug_assert!(rows.len() < PARTS_TO_CHARS_ROWS);
    rows.resize(PARTS_TO_CHARS_ROWS, ([0.0; 6], [0.0; GENERALISED_POSE_DIM]));
    rows.shuffle(rng);
    let (parts, owners): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    Ok(TaskSample {
        index,
        input: rows_tensor(&parts),
        target: rows_tensor(&owners),
    })
}

fn object_rows(
    scene: &Scene,
    rng: &mut impl Rng,
) -> Result<Vec<[f32; GENERALISED_POSE_DIM]>, TaskError> {
    let mut rows = scene
        .objects
        .iter()
        .map(|o| generalised_pose(o.class, &o.pose).map(|g| g.to_f32()))
        .collect::<Result<Vec<_>, _>>()?;
    rows.resize(OBJECT_ROWS, [0.0; GENERALISED_POSE_DIM]);
    rows.shuffle(rng);
    Ok(rows)
}

pub fn emit_im_to_chars(
    scene: &Scene,
    index: u64,
    rng: &mut impl Rng,
) -> Result<TaskSample, TaskError> {
    one_to_three(TaskKind::ImToChars, scene, Category::Character)?;
    let rows = object_rows(scene, rng)?;
    Ok(TaskSample {
        index,
        input: image_tensor(render_scene(scene)),
        target: rows_tensor(&rows),
    })
}

pub fn emit_im_to_class(scene: &Scene, index: u64) -> Result<TaskSample, TaskError> {
    single_character(TaskKind::ImToClass, scene)?;
    Ok(TaskSample {
        index,
        input: image_tensor(render_scene(scene)),
        target: Tensor::scalar_u32(scene.objects[0].class.index as u32),
    })
}

pub fn emit_parts_to_class(
    scene: &Scene,
    index: u64,
    rng: &mut impl Rng,
) -> Result<TaskSample, TaskError> {
    single_character(TaskKind::PartsToClass, scene)?;
    Ok(TaskSample {
        index,
        input: rows_tensor(&part_rows(scene, rng)),
        target: Tensor::scalar_u32(scene.objects[0].class.index as u32),
    })
}

pub fn emit_words(scene: &Scene, index: u64, rng: &mut impl Rng) -> Result<TaskSample, TaskError> {
    one_to_three(TaskKind::Words, scene, Category::Word)?;
    let rows = object_rows(scene, rng)?;
    Ok(TaskSample {
        index,
        input: image_tensor(render_scene(scene)),
        target: rows_tensor(&rows),
    })
}

/// Dispatches to the emitter of `task`.
pub fn emit(
    task: TaskKind,
    scene: &Scene,
    index: u64,
    rng: &mut impl Rng,
) -> Result<TaskSample, TaskError> {
    match task {
        TaskKind::ImToParts => emit_im_to_parts(scene, index, rng),
        TaskKind::PartsToChars => emit_parts_to_chars(scene, index, rng),
        TaskKind::ImToChars => emit_im_to_chars(scene, index, rng),
        TaskKind::ImToClass => emit_im_to_class(scene, index),
        TaskKind::PartsToClass => emit_parts_to_class(scene, index, rng),
        TaskKind::Words => emit_words(scene, index, rng),
        TaskKind::PreTrainedPartsToClass => Err(TaskError::NotSampled(task)),
    }
}

/// Produces samples of one task from one `(seed, split)` stream family.
#[derive(Debug, Clone)]
pub struct TaskGenerator {
    task: TaskKind,
    sampler: Sampler,
}

impl TaskGenerator {
    pub fn new(task: TaskKind, cfg: SamplerConfig) -> Result<Self, TaskError> {
        if task == TaskKind::PreTrainedPartsToClass {
            return Err(TaskError::NotSampled(task));
        }
        Ok(Self {
            task,
            sampler: Sampler::new(cfg)?,
        })
    }

    /// Generator with the default pose ranges and margin.
    pub fn with_defaults(task: TaskKind, seed: u64, split: Split) -> Result<Self, TaskError> {
        Self::new(
            task,
            task.sampler_config(PoseRanges::default(), 0.0, seed, split),
        )
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn config(&self) -> &SamplerConfig {
        self.sampler.config()
    }

    pub fn scene(&self, index: u64) -> Result<Scene, TaskError> {
        Ok(self.sampler.sample(index)?)
    }

    pub fn sample(&self, index: u64) -> Result<TaskSample, TaskError> {
        let scene = self.scene(index)?;
        let mut rng = self.sampler.streams().stream(Purpose::Shuffle, index);
        emit(self.task, &scene, index, &mut rng)
    }

    /// Header for a dataset of `count` samples from this generator.
    pub fn header(&self, count: u64, input_dtype: DType) -> DatasetHeader {
        let cfg = self.sampler.config();
        DatasetHeader::new(
            self.task.name(),
            count,
            self.task
                .input_shape()
                .expect("sampled tasks have fixed input shapes"),
            input_dtype,
            self.task.target_shape(),
            self.task.target_dtype(),
        )
        .with_provenance(cfg.split, cfg.master_seed, cfg.clone())
    }
}

/// Builds a PreTrainedPartsToClass dataset from an ImToClass dataset and a
/// container of per-image activations (task tag `activations`, inputs of
/// shape `M×H′×W′`). Labels are copied row for row.
pub fn repackage_with_activations(
    images: &Path,
    activations: &Path,
    out: &Path,
) -> Result<Manifest, TaskError> {
    let images = DatasetReader::open(images)?;
    let acts = DatasetReader::open(activations)?;
    let ih = images.header();
    let ah = acts.header();
    if ih.task != TaskKind::ImToClass.name() {
        return Err(TaskError::Activations(format!(
            "label source is `{}`, expected im_to_class",
            ih.task
        )));
    }
    if ah.task != "activations" {
        return Err(TaskError::Activations(format!(
            "activation file has task `{}`",
            ah.task
        )));
    }
    if ah.count != ih.count {
        return Err(TaskError::Activations(format!(
            "{} activation rows for {} images",
            ah.count, ih.count
        )));
    }
    if ah.input_shape.len() != 3 || ah.input_dtype != DType::F32 {
        return Err(TaskError::Activations(format!(
            "activations must be f32 M×H′×W′, got {:?} {:?}",
            ah.input_dtype, ah.input_shape
        )));
    }

    let mut header = DatasetHeader::new(
        TaskKind::PreTrainedPartsToClass.name(),
        ih.count,
        ah.input_shape.clone(),
        DType::F32,
        vec![],
        DType::U32,
    );
    header.split = ih.split;
    header.master_seed = ih.master_seed;
    header.sampler_config = ih.sampler_config.clone();

    let mut writer = DatasetWriter::create(out, header)?;
    for (image, act) in images.samples()?.zip(acts.samples()?) {
        let (image, act) = (image?, act?);
        writer.push(&TaskSample {
            index: image.index,
            input: act.input,
            target: image.target,
        })?;
    }
    Ok(writer.finish()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ObjectPose;
    use crate::scene::{glyph_library, ClassId, SceneObject};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(1)
    }

    fn pose(x: f64, y: f64) -> ObjectPose {
        ObjectPose {
            x,
            y,
            scale: 0.25,
            brightness: 0.8,
            ..ObjectPose::IDENTITY
        }
    }

    fn char_scene(classes: &[u8]) -> Scene {
        let objects = classes
            .iter()
            .enumerate()
            .map(|(i, c)| SceneObject {
                class: ClassId::character(*c),
                pose: pose(0.25 + 0.25 * i as f64, 0.5),
            })
            .collect();
        Scene::from_objects(objects).unwrap()
    }

    fn zero_rows(t: &Tensor) -> usize {
        t.rows()
            .unwrap()
            .filter(|r| r.iter().all(|v| *v == 0.0))
            .count()
    }

    fn stroke_count(class: u8) -> usize {
        glyph_library().glyph(class as usize).unwrap().strokes.len()
    }

    #[test]
    fn duplication_examples() {
        assert!(duplicate_endpoints(&[]).is_empty());
        let l = LinePose::new(1., 2., 3., 4., 5., 0.5);
        assert_eq!(
            duplicate_endpoints(&[l]),
            vec![l, LinePose::new(3., 4., 1., 2., 5., 0.5)]
        );
        assert_eq!(duplicate_endpoints(&[l; 4]).len(), 8);
    }

    #[test]
    fn im_to_parts_padding() {
        // E has 4 strokes, I has 1.
        assert_eq!(stroke_count(8), 4);
        assert_eq!(stroke_count(0), 1);
        let four = emit_im_to_parts(&char_scene(&[8]), 0, &mut rng()).unwrap();
        assert_eq!(four.target.shape, vec![9, 6]);
        assert_eq!(zero_rows(&four.target), 1);
        let one = emit_im_to_parts(&char_scene(&[0]), 0, &mut rng()).unwrap();
        assert_eq!(zero_rows(&one.target), 7);
        assert_eq!(one.input.shape, vec![1, 100, 100]);
    }

    #[test]
    fn im_to_parts_rejects_multi_object_scene() {
        let err = emit_im_to_parts(&char_scene(&[1, 2]), 0, &mut rng()).unwrap_err();
        assert!(matches!(err, TaskError::ObjectCount { found: 2, .. }));
        assert!(emit_im_to_class(&char_scene(&[]), 0).is_err());
        assert!(emit_parts_to_class(&char_scene(&[1, 2]), 0, &mut rng()).is_err());
    }

    #[test]
    fn parts_to_chars_rows() {
        let s = emit_parts_to_chars(&char_scene(&[8, 8, 9]), 0, &mut rng()).unwrap();
        assert_eq!(s.input.shape, vec![25, 6]);
        assert_eq!(s.target.shape, vec![25, 18]);
        assert_eq!(zero_rows(&s.target), 1);
        assert_eq!(zero_rows(&s.input), 1);

        let s = emit_parts_to_chars(&char_scene(&[3, 5]), 0, &mut rng()).unwrap();
        let targets: Vec<_> = s.target.rows().unwrap().collect();
        for (k, class) in [3u8, 5].iter().enumerate() {
            let owner = generalised_pose(
                ClassId::character(*class),
                &pose(0.25 + 0.25 * k as f64, 0.5),
            )
            .unwrap()
            .to_f32();
            let n = targets.iter().filter(|r| **r == owner).count();
            assert_eq!(n, 2 * stroke_count(*class));
        }
    }

    #[test]
    fn parts_to_chars_alignment() {
        let scene = char_scene(&[1, 6]);
        let s = emit_parts_to_chars(&scene, 0, &mut rng()).unwrap();
        for (x, t) in s.input.rows().unwrap().zip(s.target.rows().unwrap()) {
            let line = LinePose::from_f32(x);
            if line.is_zero() {
                assert!(t.iter().all(|v| *v == 0.0));
                continue;
            }
            let owner = t[..10].iter().position(|v| *v == 1.0).unwrap();
            let object = scene
                .objects
                .iter()
                .position(|o| o.class.index as usize == owner)
                .unwrap();
            let lines = &scene.object_lines[object];
            assert!(lines.contains(&line) || lines.contains(&line.swapped()));
        }
    }

    #[test]
    fn im_to_chars_padding() {
        let two = emit_im_to_chars(&char_scene(&[2, 4]), 0, &mut rng()).unwrap();
        assert_eq!(two.target.shape, vec![4, 18]);
        assert_eq!(zero_rows(&two.target), 2);
        let three = emit_im_to_chars(&char_scene(&[2, 4, 7]), 0, &mut rng()).unwrap();
        assert_eq!(zero_rows(&three.target), 1);
        for row in three
            .target
            .rows()
            .unwrap()
            .filter(|r| r.iter().any(|v| *v != 0.0))
        {
            assert_eq!(row[..10].iter().filter(|v| **v == 1.0).count(), 1);
            assert_eq!(row[..10].iter().filter(|v| **v == 0.0).count(), 9);
        }
    }

    #[test]
    fn class_targets_ignore_pose() {
        let a = Scene::single(ClassId::character(7), pose(0.4, 0.4)).unwrap();
        let b = Scene::single(
            ClassId::character(7),
            ObjectPose {
                rotation: 0.3,
                ..pose(0.6, 0.5)
            },
        )
        .unwrap();
        for s in [&a, &b] {
            let sample = emit_im_to_class(s, 0).unwrap();
            assert_eq!(sample.target, Tensor::scalar_u32(7));
        }
    }

    #[test]
    fn parts_to_class_input_is_im_to_parts_target() {
        let scene = char_scene(&[5]);
        let a = emit_parts_to_class(&scene, 0, &mut rng()).unwrap();
        let b = emit_im_to_parts(&scene, 0, &mut rng()).unwrap();
        assert_eq!(a.input, b.target);
        assert_eq!(a.target, Tensor::scalar_u32(5));
    }

    #[test]
    fn words_target() {
        let scene = Scene::single(
            ClassId::word(9),
            ObjectPose {
                scale: 0.4,
                ..pose(0.5, 0.5)
            },
        )
        .unwrap();
        let s = emit_words(&scene, 0, &mut rng()).unwrap();
        assert_eq!(s.input.shape, vec![1, 100, 100]);
        assert_eq!(zero_rows(&s.target), 3);
        let row = s.target.rows().unwrap().find(|r| r[9] == 1.0).unwrap();
        assert_eq!(row[10..12], [0.5, 0.5]);
        assert!(emit_words(&char_scene(&[1]), 0, &mut rng()).is_err());
    }

    #[test]
    fn generator_rejects_pretrained() {
        assert!(matches!(
            TaskGenerator::with_defaults(TaskKind::PreTrainedPartsToClass, 0, Split::Train),
            Err(TaskError::NotSampled(_))
        ));
    }

    #[test]
    fn generator_is_deterministic() {
        let g = TaskGenerator::with_defaults(TaskKind::PartsToChars, 3, Split::Test).unwrap();
        assert_eq!(g.sample(41).unwrap(), g.sample(41).unwrap());
        assert_ne!(g.sample(41).unwrap(), g.sample(42).unwrap());
    }

    #[test]
    fn task_names_parse() {
        for t in TaskKind::ALL {
            assert_eq!(t.name().parse::<TaskKind>().unwrap(), t);
        }
        assert_eq!(
            "ImToParts".parse::<TaskKind>().unwrap(),
            TaskKind::ImToParts
        );
        assert!("im_to_everything".parse::<TaskKind>().is_err());
    }
}
