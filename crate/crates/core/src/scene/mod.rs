//! Object classes, recursive part expansion and seeded scene sampling.

mod library;

pub use library::{
    glyph_library, GlyphDef, GlyphLibrary, WordDef, CANONICAL_STROKE_THICKNESS,
    GLYPH_LIBRARY_VERSION, LETTER_LINE_THICKNESS, LETTER_SCALE, LETTER_SPACING,
    MAX_LETTERS_PER_WORD, MAX_STROKES_PER_GLYPH,
};

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{compose_pose, transform_line, LinePose, ObjectPose};
use crate::raster::depth_sort;
use crate::rng::{Purpose, Split, StreamFamily};

/// Number of classes per composite category.
pub const NUM_CLASSES: usize = 10;

/// Width of a generalised pose row: one-hot class head plus the 8D pose.
pub const GENERALISED_POSE_DIM: usize = NUM_CLASSES + ObjectPose::DIM;

/// Upper bound on rejected pose draws per object before sampling gives up.
pub const MAX_POSE_ATTEMPTS: usize = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("unknown class {0:?}")]
    UnknownClass(ClassId),
    #[error("lines have no generalised pose")]
    LineHasNoPose,
    #[error("invalid sampler config: {0}")]
    InvalidConfig(String),
    #[error("no pose within {attempts} draws keeps every endpoint inside the canvas margin")]
    MarginUnsatisfiable { attempts: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Line,
    Character,
    Word,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClassId {
    pub category: Category,
    pub index: u8,
}

impl ClassId {
    /// All 21 object types: one line class, ten characters, ten words.
    pub fn all() -> Vec<ClassId> {
        std::iter::once(ClassId::LINE)
            .chain((0..NUM_CLASSES as u8).map(ClassId::character))
            .chain((0..NUM_CLASSES as u8).map(ClassId::word))
            .collect()
    }

    pub fn is_valid(&self) -> bool {
        match self.category {
            Category::Line => self.index == 0,
            Category::Character | Category::Word => (self.index as usize) < NUM_CLASSES,
        }
    }
}

/// One-hot class head followed by the object pose. The all-zero row is padding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralisedPose(pub [f64; GENERALISED_POSE_DIM]);

impl GeneralisedPose {
    pub const PADDING: GeneralisedPose = GeneralisedPose([0.0; GENERALISED_POSE_DIM]);

    pub fn is_padding(&self) -> bool {
        self.0.iter().all(|v| *v == 0.0)
    }

    pub fn to_f32(&self) -> [f32; GENERALISED_POSE_DIM] {
        self.0.map(|v| v as f32)
    }

    /// Class index (from the largest head entry) and pose, or `None` for padding.
    pub fn decode(row: &[f32]) -> Option<(usize, ObjectPose)> {
        assert_eq!(
            row.len(),
            GENERALISED_POSE_DIM,
            "generalised pose rows are 18-wide"
        );
        if row.iter().all(|v| *v == 0.0) {
            return None;
        }
        let (index, _) =
            row[..NUM_CLASSES]
                .iter()
                .enumerate()
                .fold((0, f32::NEG_INFINITY), |best, (i, v)| {
                    if *v > best.1 {
                        (i, *v)
                    } else {
                        best
                    }
                });
        let mut pose = [0.0; ObjectPose::DIM];
        for (dst, src) in pose.iter_mut().zip(&row[NUM_CLASSES..]) {
            *dst = *src as f64;
        }
        Some((index, ObjectPose::from_array(pose)))
    }
}

pub fn generalised_pose(class: ClassId, pose: &ObjectPose) -> Result<GeneralisedPose, SceneError> {
    if class.category == Category::Line {
        return Err(SceneError::LineHasNoPose);
    }
    if !class.is_valid() {
        return Err(SceneError::UnknownClass(class));
    }
    let mut row = [0.0; GENERALISED_POSE_DIM];
    row[class.index as usize] = 1.0;
    row[NUM_CLASSES..].copy_from_slice(&pose.to_array());
    Ok(GeneralisedPose(row))
}

/// All bottom-level lines of an object placed at `pose`.
pub fn expand_object(class: ClassId, pose: &ObjectPose) -> Result<Vec<LinePose>, SceneError> {
    let lib = glyph_library();
    match class.category {
        Category::Character => {
            let glyph = lib
                .glyph(class.index as usize)
                .ok_or(SceneError::UnknownClass(class))?;
            Ok(glyph
                .strokes
                .iter()
                .map(|s| transform_line(s, pose))
                .collect())
        }
        Category::Word => {
            let word = lib
                .word(class.index as usize)
                .ok_or(SceneError::UnknownClass(class))?;
            let mut lines = Vec::new();
            for (letter, placement) in &word.letters {
                lines.extend(expand_object(*letter, &compose_pose(pose, placement))?);
            }
            Ok(lines)
        }
        Category::Line => Err(SceneError::UnknownClass(class)),
    }
}

/// Closed sampling interval `[lo, hi]`.
pub type Interval = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoseRanges {
    pub x: Interval,
    pub y: Interval,
    pub character_scale: Interval,
    pub word_scale: Interval,
    pub rotation: Interval,
    pub wideness: Interval,
    pub italic: Interval,
    pub line_thickness: Interval,
    pub brightness: Interval,
}

impl Default for PoseRanges {
    fn default() -> Self {
        Self {
            x: [0.2, 0.8],
            y: [0.2, 0.8],
            character_scale: [0.15, 0.35],
            word_scale: [0.3, 0.5],
            rotation: [-PI / 6.0, PI / 6.0],
            wideness: [0.75, 1.33],
            italic: [-0.3, 0.3],
            line_thickness: [0.5, 1.5],
            brightness: [0.3, 1.0],
        }
    }
}

impl PoseRanges {
    fn scale(&self, category: Category) -> Interval {
        match category {
            Category::Word => self.word_scale,
            _ => self.character_scale,
        }
    }

    fn validate(&self) -> Result<(), SceneError> {
        let named = [
            ("x", self.x),
            ("y", self.y),
            ("character_scale", self.character_scale),
            ("word_scale", self.word_scale),
            ("rotation", self.rotation),
            ("wideness", self.wideness),
            ("italic", self.italic),
            ("line_thickness", self.line_thickness),
            ("brightness", self.brightness),
        ];
        for (name, [lo, hi]) in named {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(SceneError::InvalidConfig(format!(
                    "range {name} = [{lo}, {hi}]"
                )));
            }
        }
        for (name, [lo, _]) in [
            ("character_scale", self.character_scale),
            ("word_scale", self.word_scale),
            ("wideness", self.wideness),
            ("line_thickness", self.line_thickness),
            ("brightness", self.brightness),
        ] {
            if lo <= 0.0 {
                return Err(SceneError::InvalidConfig(format!(
                    "range {name} must be positive"
                )));
            }
        }
        if self.brightness[1] > 1.0 {
            return Err(SceneError::InvalidConfig("brightness above 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub category: Category,
    pub min_objects: usize,
    pub max_objects: usize,
    pub ranges: PoseRanges,
    pub master_seed: u64,
    pub split: Split,
    /// Every line endpoint stays within `[-margin, 1 + margin]²`.
    pub margin: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self::characters(1, 1)
    }
}

impl SamplerConfig {
    pub fn characters(min_objects: usize, max_objects: usize) -> Self {
        Self {
            category: Category::Character,
            min_objects,
            max_objects,
            ranges: PoseRanges::default(),
            master_seed: 0,
            split: Split::Train,
            margin: 0.0,
        }
    }

    pub fn words(min_objects: usize, max_objects: usize) -> Self {
        Self {
            category: Category::Word,
            ..Self::characters(min_objects, max_objects)
        }
    }

    pub fn with_seed(mut self, master_seed: u64, split: Split) -> Self {
        self.master_seed = master_seed;
        self.split = split;
        self
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if !(1 <= self.min_objects && self.min_objects <= self.max_objects && self.max_objects <= 3)
        {
            return Err(SceneError::InvalidConfig(format!(
                "object count range [{}, {}] outside 1..=3",
                self.min_objects, self.max_objects
            )));
        }
        if self.category == Category::Line {
            return Err(SceneError::InvalidConfig(
                "lines are not top-level objects".into(),
            ));
        }
        if !(self.margin.is_finite() && self.margin >= 0.0) {
            return Err(SceneError::InvalidConfig(format!("margin {}", self.margin)));
        }
        self.ranges.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneObject {
    pub class: ClassId,
    pub pose: ObjectPose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub objects: Vec<SceneObject>,
    /// Lines of each object in canonical stroke order, rounded through `f32`.
    pub object_lines: Vec<Vec<LinePose>>,
    /// Every line of the scene in render order (darkest first).
    pub flat_lines: Vec<LinePose>,
    /// Index of the top-level object owning each entry of `flat_lines`.
    pub provenance: Vec<usize>,
}

impl Scene {
    /// Builds a scene from already placed objects.
    pub fn from_objects(objects: Vec<SceneObject>) -> Result<Self, SceneError> {
        let object_lines = objects
            .iter()
            .map(|o| {
                expand_object(o.class, &o.pose)
                    .map(|lines| lines.iter().map(LinePose::quantized).collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>, _>>()?;

        // Aggregation order is (object, stroke); depth_sort is stable, which
        // makes that the tie-break for equal brightness.
        let (aggregated, owners): (Vec<LinePose>, Vec<usize>) = object_lines
            .iter()
            .enumerate()
            .flat_map(|(i, lines)| lines.iter().map(move |l| (*l, i)))
            .unzip();
        let order = depth_sort(&aggregated);
        let flat_lines = order.iter().map(|&i| aggregated[i]).collect();
        let provenance = order.iter().map(|&i| owners[i]).collect();

        Ok(Self {
            objects,
            object_lines,
            flat_lines,
            provenance,
        })
    }

    pub fn single(class: ClassId, pose: ObjectPose) -> Result<Self, SceneError> {
        Self::from_objects(vec![SceneObject { class, pose }])
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }
}

/// Scene sampler for one config; owns the derived stream keys.
#[derive(Debug, Clone)]
pub struct Sampler {
    cfg: SamplerConfig,
    streams: StreamFamily,
}

impl Sampler {
    pub fn new(cfg: SamplerConfig) -> Result<Self, SceneError> {
        cfg.validate()?;
        let streams = StreamFamily::new(cfg.master_seed, cfg.split);
        Ok(Self { cfg, streams })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }

    pub fn streams(&self) -> &StreamFamily {
        &self.streams
    }

    pub fn sample(&self, sample_index: u64) -> Result<Scene, SceneError> {
        let cfg = &self.cfg;
        let mut rng = self.streams.stream(Purpose::Scene, sample_index);
        let count = rng.random_range(cfg.min_objects..=cfg.max_objects);
        let mut objects = Vec::with_capacity(count);
        for _ in 0..count {
            let index = rng.random_range(0..NUM_CLASSES as u8);
            let class = ClassId {
                category: cfg.category,
                index,
            };
            let pose = self.sample_pose(&mut rng, class)?;
            objects.push(SceneObject { class, pose });
        }
        Scene::from_objects(objects)
    }

    /// Draws poses until every endpoint of the expanded object respects the margin.
    fn sample_pose(&self, rng: &mut impl Rng, class: ClassId) -> Result<ObjectPose, SceneError> {
        let r = &self.cfg.ranges;
        let (lo, hi) = (-self.cfg.margin, 1.0 + self.cfg.margin);
        for _ in 0..MAX_POSE_ATTEMPTS {
            let pose = ObjectPose {
                x: uniform(rng, r.x),
                y: uniform(rng, r.y),
                scale: uniform(rng, r.scale(self.cfg.category)),
                rotation: uniform(rng, r.rotation),
                wideness: uniform(rng, r.wideness),
                italic: uniform(rng, r.italic),
                line_thickness: uniform(rng, r.line_thickness),
                brightness: uniform(rng, r.brightness),
            };
            let inside = expand_object(class, &pose)?.iter().all(|l| {
                [l.x1, l.y1, l.x2, l.y2]
                    .iter()
                    .all(|v| (lo..=hi).contains(v))
            });
            if inside {
                return Ok(pose);
            }
        }
        Err(SceneError::MarginUnsatisfiable {
            attempts: MAX_POSE_ATTEMPTS,
        })
    }
}

fn uniform(rng: &mut impl Rng, [lo, hi]: Interval) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Samples scene `sample_index` of the stream defined by `cfg`.
pub fn sample_scene(cfg: &SamplerConfig, sample_index: u64) -> Result<Scene, SceneError> {
    Sampler::new(cfg.clone())?.sample(sample_index)
}
