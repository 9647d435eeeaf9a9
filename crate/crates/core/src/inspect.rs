//! Dataset verification and summary statistics.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::Serialize;

use crate::geometry::{LinePose, ObjectPose};
use crate::raster::{quantize_u8, render_unsorted, Image};
use crate::scene::{
    expand_object, glyph_library, ClassId, GeneralisedPose, GENERALISED_POSE_DIM, NUM_CLASSES,
};
use crate::store::{manifest_path, DatasetReader, StoreError};
use crate::tasks::{TaskKind, TaskSample};
use crate::tensor::{DType, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Manifest,
    Checksum,
    Header,
    Shape,
    Padding,
    Duplication,
    Alignment,
    OneHot,
    Label,
    PixelRange,
    RoundTrip,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub index: Option<u64>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index {
            Some(i) => write!(f, "[{:?}] sample {i}: {}", self.kind, self.detail),
            None => write!(f, "[{:?}] {}", self.kind, self.detail),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct VerifyReport {
    pub task: String,
    pub count: u64,
    pub violations: Vec<Violation>,
}

impl VerifyReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count_of(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }

    fn push(&mut self, kind: ViolationKind, index: Option<u64>, detail: impl Into<String>) {
        self.violations.push(Violation {
            kind,
            index,
            detail: detail.into(),
        });
    }
}

/// Pairs every line with an endpoint-swapped twin and keeps one of each
/// pair. Returns the unpaired leftovers as the error.
pub fn dedup_swapped(lines: &[LinePose]) -> Result<Vec<LinePose>, Vec<LinePose>> {
    let mut kept = Vec::new();
    let mut pending: Vec<LinePose> = Vec::new();
    for line in lines {
        match pending.iter().position(|p| *p == line.swapped()) {
            Some(i) => {
                pending.swap_remove(i);
                kept.push(*line);
            }
            None => pending.push(*line),
        }
    }
    if pending.is_empty() {
        Ok(kept)
    } else {
        Err(pending)
    }
}

fn nonzero_lines(t: &Tensor) -> Vec<LinePose> {
    t.rows()
        .map(|rows| {
            rows.map(LinePose::from_f32)
                .filter(|l| !l.is_zero())
                .collect()
        })
        .unwrap_or_default()
}

fn zero_row_count(t: &Tensor) -> usize {
    t.rows()
        .map(|rows| rows.filter(|r| r.iter().all(|v| *v == 0.0)).count())
        .unwrap_or(0)
}

/// Runs every container and task invariant over the file at `path`.
///
/// Errors are returned only when the file cannot be opened as a container at
/// all; everything else is reported as a violation.
pub fn verify(path: impl AsRef<Path>) -> Result<VerifyReport, StoreError> {
    let path = path.as_ref();
    let reader = DatasetReader::open(path)?;
    let header = reader.header().clone();
    let mut report = VerifyReport {
        task: header.task.clone(),
        count: header.count,
        ..Default::default()
    };

    if !manifest_path(path).exists() {
        report.push(ViolationKind::Manifest, None, "manifest sidecar missing");
    } else {
        match reader.verify_manifest() {
            Ok(_) => {}
            Err(StoreError::ChecksumMismatch { expected, actual }) => report.push(
                ViolationKind::Checksum,
                None,
                format!("payload sha256 {actual} != manifest {expected}"),
            ),
            Err(e) => report.push(ViolationKind::Manifest, None, e.to_string()),
        }
    }

    let Ok(task) = header.task.parse::<TaskKind>() else {
        // Activation and prediction containers carry no task invariants.
        return Ok(report);
    };

    let input_ok = match task.input_shape() {
        Some(shape) => {
            let dtype_ok = header.input_dtype == DType::F32
                || (task.has_image_input() && header.input_dtype == DType::U8);
            shape == header.input_shape && dtype_ok
        }
        None => header.input_shape.len() == 3 && header.input_dtype == DType::F32,
    };
    if !input_ok {
        report.push(
            ViolationKind::Shape,
            None,
            format!(
                "input {:?} {:?} invalid for {task}",
                header.input_dtype, header.input_shape
            ),
        );
    }
    if header.target_shape != task.target_shape() || header.target_dtype != task.target_dtype() {
        report.push(
            ViolationKind::Shape,
            None,
            format!(
                "target {:?} {:?}, expected {:?} {:?}",
                header.target_dtype,
                header.target_shape,
                task.target_dtype(),
                task.target_shape()
            ),
        );
    }
    if !report
        .violations
        .iter()
        .all(|v| v.kind != ViolationKind::Shape)
    {
        return Ok(report);
    }

    for sample in reader.samples()? {
        match sample {
            Ok(s) => check_sample(task, &s, &mut report),
            Err(e) => {
                report.push(ViolationKind::Header, None, e.to_string());
                break;
            }
        }
    }
    Ok(report)
}

/// Task invariants of one sample.
pub fn check_sample(task: TaskKind, s: &TaskSample, report: &mut VerifyReport) {
    let i = Some(s.index);
    if task.has_image_input() {
        let pixels = s.input.to_f32_vec();
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            report.push(ViolationKind::PixelRange, i, "pixel outside [0, 1]");
        }
    }
    match task {
        TaskKind::ImToParts => {
            check_part_rows(&s.target, i, report);
            if let Ok(lines) = dedup_swapped(&nonzero_lines(&s.target)) {
                let rendered = render_unsorted(&lines);
                if !same_image(&rendered, &s.input) {
                    report.push(
                        ViolationKind::RoundTrip,
                        i,
                        "re-rendered target differs from input",
                    );
                }
            }
        }
        TaskKind::PartsToClass => {
            check_part_rows(&s.input, i, report);
            check_label(&s.target, i, report);
        }
        TaskKind::ImToClass | TaskKind::PreTrainedPartsToClass => check_label(&s.target, i, report),
        TaskKind::PartsToChars => check_parts_to_chars(s, report),
        TaskKind::ImToChars | TaskKind::Words => {
            if zero_row_count(&s.target) == 0 {
                report.push(ViolationKind::Padding, i, "no all-zero row");
            }
            for row in s.target.rows().into_iter().flatten() {
                check_one_hot(row, i, report);
            }
        }
    }
}

fn same_image(rendered: &Image, stored: &Tensor) -> bool {
    match stored.dtype() {
        DType::U8 => stored.as_u8() == Some(&rendered.to_u8()[..]),
        _ => stored.as_f32() == Some(rendered.pixels()),
    }
}

fn check_part_rows(t: &Tensor, i: Option<u64>, report: &mut VerifyReport) {
    if zero_row_count(t) == 0 {
        report.push(ViolationKind::Padding, i, "no all-zero row");
    }
    if let Err(unpaired) = dedup_swapped(&nonzero_lines(t)) {
        report.push(
            ViolationKind::Duplication,
            i,
            format!(
                "{} line(s) without an endpoint-swapped twin",
                unpaired.len()
            ),
        );
    }
}

fn check_label(t: &Tensor, i: Option<u64>, report: &mut VerifyReport) {
    match t.as_u32().and_then(|v| v.first()) {
        Some(label) if (*label as usize) < NUM_CLASSES => {}
        other => report.push(
            ViolationKind::Label,
            i,
            format!("label {other:?} outside [0, 10)"),
        ),
    }
}

fn check_one_hot(row: &[f32], i: Option<u64>, report: &mut VerifyReport) {
    if row.iter().all(|v| *v == 0.0) {
        return;
    }
    let head = &row[..NUM_CLASSES];
    let ones = head.iter().filter(|v| **v == 1.0).count();
    let zeros = head.iter().filter(|v| **v == 0.0).count();
    if ones != 1 || zeros != NUM_CLASSES - 1 {
        report.push(
            ViolationKind::OneHot,
            i,
            format!("class head {head:?} is not one-hot"),
        );
    }
}

fn check_parts_to_chars(s: &TaskSample, report: &mut VerifyReport) {
    let i = Some(s.index);
    if zero_row_count(&s.target) == 0 {
        report.push(ViolationKind::Padding, i, "no all-zero row");
    }
    let (Some(xs), Some(ts)) = (s.input.rows(), s.target.rows()) else {
        return;
    };
    let mut groups: Vec<(&[f32], Vec<LinePose>)> = Vec::new();
    for (x, t) in xs.zip(ts) {
        let line = LinePose::from_f32(x);
        let t_zero = t.iter().all(|v| *v == 0.0);
        if line.is_zero() != t_zero {
            report.push(
                ViolationKind::Alignment,
                i,
                "padding rows of input and target disagree",
            );
            continue;
        }
        if t_zero {
            continue;
        }
        check_one_hot(t, i, report);
        match groups.iter_mut().find(|(owner, _)| *owner == t) {
            Some((_, lines)) => lines.push(line),
            None => groups.push((t, vec![line])),
        }
    }
    for (owner, lines) in &groups {
        if dedup_swapped(lines).is_err() {
            report.push(
                ViolationKind::Duplication,
                i,
                "part rows not closed under endpoint swap",
            );
        }
        if let Some((class, _)) = GeneralisedPose::decode(owner) {
            let strokes = glyph_library().glyph(class).map_or(0, |g| g.strokes.len());
            if lines.len() != 2 * strokes {
                report.push(
                    ViolationKind::Alignment,
                    i,
                    format!(
                        "character {class} owns {} rows, expected {}",
                        lines.len(),
                        2 * strokes
                    ),
                );
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DimRange {
    pub name: &'static str,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DatasetStats {
    pub task: String,
    pub count: u64,
    pub class_histogram: [u64; NUM_CLASSES],
    /// Number of top-level objects per sample → number of samples.
    pub object_count_histogram: BTreeMap<usize, u64>,
    pub pose_ranges: Vec<DimRange>,
}

const LINE_DIMS: [&str; 6] = ["x1", "y1", "x2", "y2", "thickness", "brightness"];
const OBJECT_DIMS: [&str; 8] = [
    "x",
    "y",
    "scale",
    "rotation",
    "wideness",
    "italic",
    "line_thickness",
    "brightness",
];

impl DatasetStats {
    pub fn new(task: TaskKind) -> Self {
        let names: &[&'static str] = match task {
            TaskKind::ImToParts | TaskKind::PartsToClass => &LINE_DIMS,
            TaskKind::PartsToChars | TaskKind::ImToChars | TaskKind::Words => &OBJECT_DIMS,
            _ => &[],
        };
        Self {
            task: task.name().to_owned(),
            count: 0,
            class_histogram: [0; NUM_CLASSES],
            object_count_histogram: BTreeMap::new(),
            pose_ranges: names
                .iter()
                .map(|name| DimRange {
                    name,
                    min: f64::INFINITY,
                    max: f64::NEG_INFINITY,
                })
                .collect(),
        }
    }

    fn widen(&mut self, values: impl IntoIterator<Item = f64>) {
        for (range, v) in self.pose_ranges.iter_mut().zip(values) {
            range.min = range.min.min(v);
            range.max = range.max.max(v);
        }
    }

    pub fn add(&mut self, task: TaskKind, s: &TaskSample) {
        self.count += 1;
        let objects = match task {
            TaskKind::ImToClass | TaskKind::PartsToClass | TaskKind::PreTrainedPartsToClass => {
                if let Some(label) = s.target.as_u32().and_then(|v| v.first()) {
                    if let Some(slot) = self.class_histogram.get_mut(*label as usize) {
                        *slot += 1;
                    }
                }
                if task == TaskKind::PartsToClass {
                    for l in nonzero_lines(&s.input) {
                        self.widen(l.to_array());
                    }
                }
                1
            }
            TaskKind::ImToParts => {
                for l in nonzero_lines(&s.target) {
                    self.widen(l.to_array());
                }
                1
            }
            TaskKind::PartsToChars | TaskKind::ImToChars | TaskKind::Words => {
                let mut distinct: Vec<&[f32]> = Vec::new();
                for row in s.target.rows().into_iter().flatten() {
                    if row.len() == GENERALISED_POSE_DIM && !distinct.contains(&row) {
                        distinct.push(row);
                    }
                }
                let mut n = 0;
                for row in distinct {
                    if let Some((class, pose)) = GeneralisedPose::decode(row) {
                        n += 1;
                        self.class_histogram[class] += 1;
                        self.widen(pose.to_array());
                    }
                }
                n
            }
        };
        *self.object_count_histogram.entry(objects).or_default() += 1;
    }

    pub fn from_reader(reader: &DatasetReader) -> Result<Self, StoreError> {
        let task: TaskKind = reader
            .header()
            .task
            .parse()
            .map_err(StoreError::BadHeader)?;
        let mut stats = Self::new(task);
        for s in reader.samples()? {
            stats.add(task, &s?);
        }
        Ok(stats)
    }
}

/// Decodes generalised-pose rows into (class, pose), skipping padding and
/// repeated rows.
pub fn decode_objects(target: &Tensor) -> Vec<(usize, ObjectPose)> {
    let mut seen: Vec<&[f32]> = Vec::new();
    let mut out = Vec::new();
    for row in target.rows().into_iter().flatten() {
        if seen.contains(&row) {
            continue;
        }
        seen.push(row);
        if let Some(decoded) = GeneralisedPose::decode(row) {
            out.push(decoded);
        }
    }
    out
}

/// Renders a stored tensor for inspection: images as they are, line rows
/// through the rasterizer, generalised-pose rows by expanding each decoded
/// object. `words` selects the word library for 18-wide rows.
pub fn render_tensor(t: &Tensor, words: bool) -> Result<Image, String> {
    if t.shape == Image::SHAPE {
        return Image::from_pixels(t.to_f32_vec()).ok_or_else(|| "bad image tensor".to_owned());
    }
    match t.shape.as_slice() {
        [_, LinePose::DIM] => Ok(render_unsorted(&nonzero_lines(t))),
        [_, GENERALISED_POSE_DIM] => {
            let mut lines = Vec::new();
            for (class, pose) in decode_objects(t) {
                let id = if words {
                    ClassId::word(class as u8)
                } else {
                    ClassId::character(class as u8)
                };
                lines.extend(expand_object(id, &pose).map_err(|e| e.to_string())?);
            }
            Ok(render_unsorted(&lines))
        }
        other => Err(format!("no picture for a tensor of shape {other:?}")),
    }
}

/// `round(255 · p)` of a rendered image, for comparisons with 8-bit files.
pub fn quantized(img: &Image) -> Vec<u8> {
    img.pixels().iter().map(|p| quantize_u8(*p)).collect()
}
