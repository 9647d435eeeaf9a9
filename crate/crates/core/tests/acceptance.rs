//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::HashMap;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use syndacate::generate::{generate_dataset, GenerateOptions};
use syndacate::inspect::verify;
use syndacate::raster::{render_unsorted, AA_BAND};
use syndacate::scene::{expand_object, ClassId, SceneObject};
use syndacate::store::{manifest_path, write_dataset, DatasetHeader, DatasetReader, StoreError};
use syndacate::{
    chamfer_mse, render_scene, DType, LinePose, ObjectPose, Scene, SetBatch, Split, TaskGenerator,
    TaskKind, TaskSample, Tensor,
};

type Outcome = Result<String, String>;
type SampleCheck = fn(&TaskSample) -> Result<(), String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_syndacate"));
    cmd.env_remove("SYNDACATE_SEED");
    cmd
}

fn file_sha256(path: &Path) -> Result<String, String> {
    let bytes = std::fs::read(path).map_err(|e| e.to_string())?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

fn gen_cli(out: &Path, workers: &str) -> Result<(String, Duration), String> {
    let start = Instant::now();
    let status = bin()
        .args([
            "gen",
            "--task",
            "im_to_class",
            "--count",
            "1000",
            "--seed",
            "42",
            "--workers",
            workers,
        ])
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(status.status.success(), || {
        format!("gen failed: {}", String::from_utf8_lossy(&status.stderr))
    })?;
    Ok((file_sha256(out)?, elapsed))
}

fn determinism(dir: &Path) -> Outcome {
    let (a, ta) = gen_cli(&dir.join("a.bin"), "1")?;
    let (b, tb) = gen_cli(&dir.join("b.bin"), "1")?;
    let (c, tc) = gen_cli(&dir.join("c.bin"), "8")?;
    ensure(a == b, || format!("repeat run differs: {a} vs {b}"))?;
    ensure(a == c, || format!("workers 1 vs 8 differ: {a} vs {c}"))?;
    let slowest = ta.max(tb).max(tc);
    ensure(slowest < Duration::from_secs(60), || {
        format!("slowest run took {slowest:?}")
    })?;
    Ok(format!("sha256 {}…, slowest run {:.2?}", &a[..12], slowest))
}

/// Input and target shapes and dtypes each task must produce.
fn expected_shapes(task: TaskKind) -> (Vec<usize>, Vec<usize>, DType) {
    let image = vec![1, 100, 100];
    match task {
        TaskKind::ImToParts => (image, vec![9, 6], DType::F32),
        TaskKind::PartsToChars => (vec![25, 6], vec![25, 18], DType::F32),
        TaskKind::ImToChars | TaskKind::Words => (image, vec![4, 18], DType::F32),
        TaskKind::ImToClass => (image, vec![], DType::U32),
        TaskKind::PartsToClass => (vec![9, 6], vec![], DType::U32),
        TaskKind::PreTrainedPartsToClass => (vec![16, 10, 10], vec![], DType::U32),
    }
}

fn check_file_shapes(path: &Path, task: TaskKind) -> Result<(), String> {
    let (input, target, tdtype) = expected_shapes(task);
    let reader = DatasetReader::open(path).map_err(|e| e.to_string())?;
    let h = reader.header();
    ensure(h.count == 1000, || format!("{task}: count {}", h.count))?;
    ensure(
        h.input_shape == input && h.target_shape == target && h.target_dtype == tdtype,
        || {
            format!(
                "{task}: header {:?} → {:?} {:?}",
                h.input_shape, h.target_shape, h.target_dtype
            )
        },
    )?;
    for s in reader.samples().map_err(|e| e.to_string())? {
        let s = s.map_err(|e| e.to_string())?;
        ensure(s.input.shape == input && s.target.shape == target, || {
            format!(
                "{task} sample {}: {:?} → {:?}",
                s.index, s.input.shape, s.target.shape
            )
        })?;
        ensure(s.target.dtype() == tdtype, || {
            format!("{task} sample {}: target dtype", s.index)
        })?;
    }
    let report = verify(path).map_err(|e| e.to_string())?;
    ensure(report.is_ok(), || {
        format!(
            "{task}: {} violations, first {}",
            report.violations.len(),
            report.violations[0]
        )
    })
}

fn shape_suite(dir: &Path) -> Outcome {
    for task in TaskKind::ALL {
        if task == TaskKind::PreTrainedPartsToClass {
            continue;
        }
        let path = dir.join(format!("{task}.bin"));
        let mut opts = GenerateOptions::new(task, Split::Train, 1000, 7);
        opts.workers = 8;
        generate_dataset(&path, &opts).map_err(|e| e.to_string())?;
        check_file_shapes(&path, task)?;
    }

    // The pre-trained variant is assembled from stand-in activations.
    let images = dir.join("im_to_class.bin");
    let acts = dir.join("activations.bin");
    let header = DatasetHeader::new(
        "activations",
        1000,
        vec![16, 10, 10],
        DType::F32,
        vec![0],
        DType::F32,
    );
    let samples: Vec<TaskSample> = (0..1000u64)
        .map(|i| TaskSample {
            index: i,
            input: Tensor::f32(
                vec![16, 10, 10],
                (0..1600).map(|k| ((i + k) % 97) as f32 / 97.0).collect(),
            ),
            target: Tensor::f32(vec![0], vec![]),
        })
        .collect();
    write_dataset(&acts, header, samples.iter()).map_err(|e| e.to_string())?;
    let out = dir.join("pre_trained.bin");
    let status = bin()
        .arg("repack-pretrained")
        .arg("--images")
        .arg(&images)
        .arg("--activations")
        .arg(&acts)
        .arg("--out")
        .arg(&out)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(status.status.success(), || {
        String::from_utf8_lossy(&status.stderr).into_owned()
    })?;
    check_file_shapes(&out, TaskKind::PreTrainedPartsToClass)?;
    Ok(format!(
        "{} tasks × 1000 samples, zero violations",
        TaskKind::ALL.len()
    ))
}

fn line_key(row: &[f32]) -> [u32; 6] {
    std::array::from_fn(|k| row[k].to_bits())
}

fn swap_key(row: &[f32]) -> [u32; 6] {
    line_key(&[row[2], row[3], row[0], row[1], row[4], row[5]])
}

/// Every non-zero row occurs as often as its endpoint swap, and rows that
/// are their own swap occur an even number of times.
fn closed_under_swap(t: &Tensor) -> bool {
    let mut counts: HashMap<[u32; 6], usize> = HashMap::new();
    let rows: Vec<&[f32]> = t
        .rows()
        .unwrap()
        .filter(|r| r.iter().any(|v| *v != 0.0))
        .collect();
    for r in &rows {
        *counts.entry(line_key(r)).or_default() += 1;
    }
    rows.iter().all(|r| {
        let own = counts[&line_key(r)];
        if line_key(r) == swap_key(r) {
            own.is_multiple_of(2)
        } else {
            counts.get(&swap_key(r)) == Some(&own)
        }
    })
}

fn has_zero_row(t: &Tensor) -> bool {
    t.rows().unwrap().any(|r| r.iter().all(|v| *v == 0.0))
}

fn duplication_padding() -> Outcome {
    const N: u64 = 10_000;
    let checks: [(TaskKind, SampleCheck); 3] = [
        (TaskKind::ImToParts, |s| {
            ensure(closed_under_swap(&s.target), || {
                "target not closed under swap".into()
            })?;
            ensure(has_zero_row(&s.target), || "target has no zero row".into())
        }),
        (TaskKind::PartsToClass, |s| {
            ensure(closed_under_swap(&s.input), || {
                "input not closed under swap".into()
            })
        }),
        (TaskKind::PartsToChars, |s| {
            ensure(closed_under_swap(&s.input), || {
                "input not closed under swap".into()
            })?;
            ensure(has_zero_row(&s.target), || "target has no zero row".into())
        }),
    ];
    for (task, check) in checks {
        let g = TaskGenerator::with_defaults(task, 11, Split::Train).map_err(|e| e.to_string())?;
        let failures: Vec<String> = (0..N)
            .into_par_iter()
            .filter_map(|i| match g.sample(i) {
                Ok(s) => check(&s).err().map(|e| format!("{task} sample {i}: {e}")),
                Err(e) => Some(e.to_string()),
            })
            .collect();
        ensure(failures.is_empty(), || {
            format!("{} violations, first {}", failures.len(), failures[0])
        })?;
    }
    Ok(format!("3 tasks × {N} samples, zero violations"))
}

/// Keeps one row of each swapped pair, in canonical endpoint order.
fn dedup(t: &Tensor) -> Vec<LinePose> {
    let mut rows: Vec<[f32; 6]> = t
        .rows()
        .unwrap()
        .filter(|r| r.iter().any(|v| *v != 0.0))
        .map(|r| {
            let swapped = [r[2], r[3], r[0], r[1], r[4], r[5]];
            let row: [f32; 6] = r.try_into().unwrap();
            if line_key(&swapped) < line_key(&row) {
                swapped
            } else {
                row
            }
        })
        .collect();
    rows.sort_by_key(|r| line_key(r));
    rows.iter()
        .step_by(2)
        .map(|r| LinePose::from_f32(r))
        .collect()
}

fn render_round_trip() -> Outcome {
    let g = TaskGenerator::with_defaults(TaskKind::ImToParts, 3, Split::Test)
        .map_err(|e| e.to_string())?;
    let failures: Vec<u64> = (0..1000u64)
        .into_par_iter()
        .filter(|i| {
            let s = g.sample(*i).unwrap();
            let mut lines = dedup(&s.target);
            // Any order of the de-duplicated rows must give the same picture.
            lines.reverse();
            let img = render_unsorted(&lines);
            let stored = s.input.as_f32().unwrap();
            img.pixels()
                .iter()
                .zip(stored)
                .any(|(a, b)| a.to_bits() != b.to_bits())
        })
        .collect();
    ensure(failures.is_empty(), || {
        format!(
            "{} mismatches, first sample {}",
            failures.len(),
            failures[0]
        )
    })?;
    Ok("1000 samples bit-identical".into())
}

fn segment_distance(px: f64, py: f64, l: &LinePose) -> f64 {
    let (dx, dy) = (l.x2 - l.x1, l.y2 - l.y1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((px - l.x1) * dx + (py - l.y1) * dy) / len2).clamp(0.0, 1.0)
    };
    (px - l.x1 - t * dx).hypot(py - l.y1 - t * dy)
}

fn fully_covers(col: usize, row: usize, l: &LinePose) -> bool {
    let (px, py) = ((col as f64 + 0.5) / 100.0, (row as f64 + 0.5) / 100.0);
    // A small guard keeps pixels off the edge of the antialiasing band.
    segment_distance(px, py, l) <= l.thickness / 2.0 - AA_BAND / 2.0 - 1e-9
}

/// Number of fully covered pixels checked; fails if the front line's
/// brightness is not shown there.
fn check_front(img: &syndacate::Image, lines: &[LinePose]) -> Result<usize, String> {
    let front = lines.iter().map(|l| l.brightness).fold(f64::MIN, f64::max);
    let front_lines: Vec<&LinePose> = lines.iter().filter(|l| l.brightness == front).collect();
    let mut checked = 0;
    for row in 0..100 {
        for col in 0..100 {
            if front_lines.iter().any(|l| fully_covers(col, row, l)) {
                let got = img.get(row, col) as f64;
                ensure((got - front).abs() <= 1e-6, || {
                    format!("pixel ({row}, {col}) = {got}, front brightness {front}")
                })?;
                checked += 1;
            }
        }
    }
    Ok(checked)
}

fn occlusion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut pixels = 0;
    for trial in 0..500 {
        let n = rng.random_range(2..=4);
        let mut lines: Vec<LinePose> = (0..n)
            .map(|_| {
                let (cx, cy) = (rng.random_range(0.4..0.6), rng.random_range(0.4..0.6));
                let angle: f64 = rng.random_range(0.0..std::f64::consts::PI);
                let half = rng.random_range(0.15..0.35);
                LinePose::new(
                    cx - half * angle.cos(),
                    cy - half * angle.sin(),
                    cx + half * angle.cos(),
                    cy + half * angle.sin(),
                    rng.random_range(0.03..0.08),
                    rng.random_range(0.1..1.0),
                )
            })
            .collect();
        lines.shuffle(&mut rng);
        let img = render_unsorted(&lines);
        let checked = check_front(&img, &lines).map_err(|e| format!("trial {trial}: {e}"))?;
        ensure(checked > 0, || {
            format!("trial {trial}: no fully covered pixel")
        })?;
        pixels += checked;
    }

    // Two characters stacked at one position: the brighter one is in front.
    for (a, b) in [(0u8, 4u8), (7, 9), (3, 5)] {
        let pose = |brightness| ObjectPose {
            brightness,
            scale: 0.4,
            ..ObjectPose::at(0.5, 0.5)
        };
        for (first, second) in [((a, 0.4), (b, 0.9)), ((b, 0.9), (a, 0.4))] {
            let objects = [first, second].map(|(class, brightness)| SceneObject {
                class: ClassId::character(class),
                pose: pose(brightness),
            });
            let scene = Scene::from_objects(objects.to_vec()).map_err(|e| e.to_string())?;
            let bright = if first.1 > second.1 {
                first.0
            } else {
                second.0
            };
            let lines =
                expand_object(ClassId::character(bright), &pose(0.9)).map_err(|e| e.to_string())?;
            pixels += check_front(&render_scene(&scene), &lines)?;
        }
    }
    Ok(format!("{pixels} fully covered pixels within 1e-6"))
}

/// Exhaustive symmetric Chamfer, written independently of the library.
fn chamfer_oracle(p: &[Vec<f64>], t: &[Vec<f64>]) -> f64 {
    let d = |a: &Vec<f64>, b: &Vec<f64>| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    let dir = |from: &[Vec<f64>], to: &[Vec<f64>]| {
        from.iter()
            .map(|a| to.iter().map(|b| d(a, b)).fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / from.len() as f64
    };
    dir(t, p) + dir(p, t)
}

fn random_set(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<f32> {
    (0..n * dim)
        .map(|_| rng.random_range(-1.0f32..1.0))
        .collect()
}

fn widen(v: &[f32], dim: usize) -> Vec<Vec<f64>> {
    v.chunks(dim)
        .map(|r| r.iter().map(|x| *x as f64).collect())
        .collect()
}

fn chamfer() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst: f64 = 0.0;
    for trial in 0..10_000 {
        let dim = rng.random_range(1..=18);
        let (n, m) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let p = random_set(&mut rng, n, dim);
        let t = random_set(&mut rng, m, dim);
        let got = chamfer_mse(
            SetBatch::new(&p, dim).unwrap(),
            SetBatch::new(&t, dim).unwrap(),
        )
        .map_err(|e| e.to_string())?;
        let want = chamfer_oracle(&widen(&p, dim), &widen(&t, dim));
        let rel = if want == 0.0 {
            got.abs()
        } else {
            (got - want).abs() / want.abs()
        };
        ensure(rel <= 1e-6, || {
            format!("trial {trial}: got {got}, oracle {want}")
        })?;
        worst = worst.max(rel);
    }
    for trial in 0..1000 {
        let dim = rng.random_range(1..=18);
        let n = rng.random_range(1..=8);
        let a = random_set(&mut rng, n, dim);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let permuted: Vec<f32> = order
            .iter()
            .flat_map(|i| a[i * dim..(i + 1) * dim].iter().copied())
            .collect();
        let got = chamfer_mse(
            SetBatch::new(&a, dim).unwrap(),
            SetBatch::new(&permuted, dim).unwrap(),
        )
        .map_err(|e| e.to_string())?;
        ensure(got == 0.0, || format!("permutation trial {trial}: {got}"))?;
    }
    Ok(format!(
        "10000 pairs, worst relative error {worst:.1e}; 1000 permutations exactly 0"
    ))
}

fn exit_code(args: &[&std::ffi::OsStr]) -> Result<i32, String> {
    let out = bin().args(args).output().map_err(|e| e.to_string())?;
    out.status
        .code()
        .ok_or_else(|| "killed by signal".to_owned())
}

fn format_conformance(dir: &Path) -> Outcome {
    // Round trip with every element type the container carries.
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let cases = [
        (vec![3, 4], DType::F32, vec![], DType::U32),
        (vec![1, 5, 5], DType::U8, vec![2, 6], DType::F32),
        (vec![2], DType::F32, vec![0], DType::F32),
    ];
    for (k, (in_shape, in_dtype, tgt_shape, tgt_dtype)) in cases.into_iter().enumerate() {
        let make = |shape: &Vec<usize>, dtype: DType, rng: &mut ChaCha8Rng| {
            let n: usize = shape.iter().product();
            match dtype {
                DType::F32 => {
                    Tensor::f32(shape.clone(), (0..n).map(|_| rng.random::<f32>()).collect())
                }
                DType::U8 => {
                    Tensor::u8(shape.clone(), (0..n).map(|_| rng.random::<u8>()).collect())
                }
                DType::U32 => Tensor::scalar_u32(rng.random_range(0..10)),
            }
        };
        let samples: Vec<TaskSample> = (0..37u64)
            .map(|index| TaskSample {
                index,
                input: make(&in_shape, in_dtype, &mut rng),
                target: make(&tgt_shape, tgt_dtype, &mut rng),
            })
            .collect();
        let header =
            DatasetHeader::new("predictions", 37, in_shape, in_dtype, tgt_shape, tgt_dtype);
        let path = dir.join(format!("rt{k}.bin"));
        write_dataset(&path, header.clone(), samples.iter()).map_err(|e| e.to_string())?;
        let reader = DatasetReader::open(&path).map_err(|e| e.to_string())?;
        ensure(reader.header() == &header, || {
            format!("case {k}: header changed")
        })?;
        let back: Vec<TaskSample> = reader
            .samples()
            .unwrap()
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        ensure(back == samples, || format!("case {k}: samples changed"))?;
        ensure(
            reader.sample(20).ok().as_ref() == Some(&samples[20]),
            || format!("case {k}: random access"),
        )?;
    }

    let good = dir.join("good.bin");
    generate_dataset(
        &good,
        &GenerateOptions::new(TaskKind::ImToParts, Split::Test, 50, 1),
    )
    .map_err(|e| e.to_string())?;
    let bytes = std::fs::read(&good).map_err(|e| e.to_string())?;
    let copy_with = |name: &str, bytes: &[u8]| -> Result<std::path::PathBuf, String> {
        let p = dir.join(name);
        std::fs::write(&p, bytes).map_err(|e| e.to_string())?;
        std::fs::copy(manifest_path(&good), manifest_path(&p)).map_err(|e| e.to_string())?;
        Ok(p)
    };

    let mut magic = bytes.clone();
    magic[0] ^= 0xff;
    let magic = copy_with("magic.bin", &magic)?;
    let truncated = copy_with("trunc.bin", &bytes[..bytes.len() - 7])?;
    let mut flipped = bytes.clone();
    let mid = bytes.len() - 1000;
    flipped[mid] ^= 0x01;
    let flipped = copy_with("flip.bin", &flipped)?;

    match DatasetReader::open(&magic) {
        Err(StoreError::BadMagic { .. }) => {}
        other => return Err(format!("bad magic gave {:?}", other.map(|_| ()))),
    }
    match DatasetReader::open(&truncated) {
        Err(StoreError::Truncated { .. }) => {}
        other => return Err(format!("truncation gave {:?}", other.map(|_| ()))),
    }
    match DatasetReader::open(&flipped)
        .map_err(|e| e.to_string())?
        .verify_manifest()
    {
        Err(StoreError::ChecksumMismatch { .. }) => {}
        other => return Err(format!("flipped byte gave {:?}", other.map(|_| ()))),
    }

    // A hand-built ImToParts file whose target has no zero row.
    let line = LinePose::new(0.2, 0.3, 0.7, 0.6, 0.04, 0.8);
    let rows: Vec<f32> = (0..9)
        .flat_map(|k| {
            if k % 2 == 0 {
                line.to_f32()
            } else {
                line.swapped().to_f32()
            }
        })
        .collect();
    let s = TaskSample {
        index: 0,
        input: Tensor::f32(vec![1, 100, 100], render_unsorted(&[line]).into_pixels()),
        target: Tensor::f32(vec![9, 6], rows),
    };
    let no_pad = dir.join("nopad.bin");
    let h = DatasetHeader::new(
        "im_to_parts",
        1,
        vec![1, 100, 100],
        DType::F32,
        vec![9, 6],
        DType::F32,
    );
    write_dataset(&no_pad, h, [&s]).map_err(|e| e.to_string())?;
    let out = bin()
        .arg("verify")
        .arg("--dataset")
        .arg(&no_pad)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(
        String::from_utf8_lossy(&out.stdout).contains("\"padding\""),
        || "padding violation not reported".into(),
    )?;

    let verify_code =
        |p: &Path| exit_code(&["verify".as_ref(), "--dataset".as_ref(), p.as_os_str()]);
    let expectations = [
        ("fresh", verify_code(&good)?, 0),
        ("flipped byte", verify_code(&flipped)?, 3),
        ("bad magic", verify_code(&magic)?, 3),
        ("truncated", verify_code(&truncated)?, 3),
        ("no zero row", out.status.code().unwrap_or(-1), 3),
        ("missing file", verify_code(&dir.join("absent.bin"))?, 4),
        (
            "bad flag",
            exit_code(&["verify".as_ref(), "--nope".as_ref()])?,
            2,
        ),
    ];
    for (case, got, want) in expectations {
        ensure(got == want, || {
            format!("verify on {case}: exit {got}, expected {want}")
        })?;
    }
    Ok(
        "round trip exact; BadMagic/Truncated/ChecksumMismatch distinct; verify exits 0/3/4/2"
            .into(),
    )
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temp dir");
    let d = dir.path();
    for sub in ["det", "shapes", "format"] {
        std::fs::create_dir_all(d.join(sub)).expect("work dir");
    }
    let criteria: [Criterion; 7] = [
        ("determinism", Box::new(|| determinism(&d.join("det")))),
        ("shape suite", Box::new(|| shape_suite(&d.join("shapes")))),
        ("duplication/padding", Box::new(duplication_padding)),
        ("render round-trip", Box::new(render_round_trip)),
        ("occlusion semantics", Box::new(occlusion)),
        ("chamfer oracle", Box::new(chamfer)),
        (
            "format conformance",
            Box::new(|| format_conformance(&d.join("format"))),
        ),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail} [{:.1?}]", start.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion/criteria failed");
        ExitCode::FAILURE
    }
}
