//! Command-line front end. Exit codes: 0 success, 2 usage, 3 validation
//! failure, 4 I/O.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::generate::{generate_dataset, GenerateOptions};
use crate::inspect::{render_tensor, verify, DatasetStats};
use crate::metrics::{score_predictions, MetricError};
use crate::rng::Split;
use crate::scene::{glyph_library, SamplerConfig, SceneError};
use crate::store::{preview_dir, DatasetReader, StoreError};
use crate::tasks::{repackage_with_activations, TaskError, TaskKind};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_VALIDATION: u8 = 3;
pub const EXIT_IO: u8 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "syndacate",
    version,
    about = "Synthetic part-whole dataset generator and scorer"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset file and its manifest.
    Gen(GenArgs),
    /// Write a PNG of one sample's input, target or prediction.
    Preview(PreviewArgs),
    /// Check a dataset file against every container and task invariant.
    Verify {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Print class, object-count and pose-range summaries as JSON.
    Stats {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Score a prediction file against a dataset.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        task: Option<TaskKind>,
    },
    /// Build a pre_trained_parts_to_class dataset from images and activations.
    RepackPretrained {
        /// An im_to_class dataset supplying the labels.
        #[arg(long)]
        images: PathBuf,
        /// An `activations` container with one row per image.
        #[arg(long)]
        activations: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the glyph and word library as JSON.
    ExportLibrary {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, clap::Args)]
pub struct GenArgs {
    #[arg(long)]
    pub task: TaskKind,
    #[arg(long, default_value = "train")]
    pub split: Split,
    /// Defaults to 60000 for train and 10000 for test.
    #[arg(long)]
    pub count: Option<u64>,
    #[arg(long, env = "SYNDACATE_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON sampler config; its ranges, margin and master_seed are used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Store images as 8-bit values.
    #[arg(long)]
    pub u8_images: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Part {
    Input,
    Target,
}

#[derive(Debug, clap::Args)]
pub struct PreviewArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub index: u64,
    /// Defaults to `<dataset>.preview/<index>-<what>.png`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "input")]
    pub what: Part,
    /// Render this prediction file's row instead of the dataset's.
    #[arg(long)]
    pub pred: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Validation(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Validation(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Io(_) => CliError::Io(e.to_string()),
            StoreError::IndexOutOfRange { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<TaskError> for CliError {
    fn from(e: TaskError) -> Self {
        match e {
            TaskError::Store(e) => e.into(),
            TaskError::Scene(SceneError::InvalidConfig(_)) => CliError::Usage(e.to_string()),
            TaskError::Activations(_) => CliError::Validation(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::Store(e) => e.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            write!(out, "{e}").map_err(|e| CliError::Io(e.to_string()))?;
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };
    execute(cli.command, out)
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    let mut emit = |text: String| writeln!(out, "{text}").map_err(|e| CliError::Io(e.to_string()));
    match command {
        Command::Gen(args) => {
            let manifest = gen(&args)?;
            emit(format!(
                "{} {}",
                manifest.payload_sha256,
                args.out.display()
            ))
        }
        Command::Preview(args) => {
            let path = preview(&args)?;
            emit(path.display().to_string())
        }
        Command::Verify { dataset } => {
            let report = verify(&dataset)?;
            emit(serde_json::to_string_pretty(&report).expect("report serializes"))?;
            if report.is_ok() {
                Ok(())
            } else {
                let first = &report.violations[0];
                Err(CliError::Validation(format!(
                    "{} violation(s), first: {first}",
                    report.violations.len()
                )))
            }
        }
        Command::Stats { dataset } => {
            let stats = DatasetStats::from_reader(&DatasetReader::open(&dataset)?)?;
            emit(serde_json::to_string_pretty(&stats).expect("stats serialize"))
        }
        Command::Eval {
            dataset,
            pred,
            task,
        } => {
            let report = score_predictions(
                &DatasetReader::open(&dataset)?,
                &DatasetReader::open(&pred)?,
                task,
            )?;
            emit(serde_json::to_string_pretty(&report).expect("report serializes"))
        }
        Command::RepackPretrained {
            images,
            activations,
            out,
        } => {
            let manifest = repackage_with_activations(&images, &activations, &out)?;
            emit(format!("{} {}", manifest.payload_sha256, out.display()))
        }
        Command::ExportLibrary { out: None } => emit(glyph_library().to_json()),
        Command::ExportLibrary { out: Some(path) } => {
            std::fs::write(&path, glyph_library().to_json()).map_err(|e| io_err(&path, e))
        }
    }
}

/// Options for `gen`, with the seed taken from the flag or environment, then
/// the config file, then 0.
pub fn gen_options(args: &GenArgs) -> Result<GenerateOptions, CliError> {
    if args.task == TaskKind::PreTrainedPartsToClass {
        return Err(CliError::Usage(
            "pre_trained_parts_to_class needs external activations; generate im_to_class \
             and use `repack-pretrained`"
                .into(),
        ));
    }
    let config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            let cfg: SamplerConfig = serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            Some(cfg)
        }
        None => None,
    };
    let seed = args
        .seed
        .or(config.as_ref().map(|c| c.master_seed))
        .unwrap_or(0);
    let count = args.count.unwrap_or(args.split.default_count() as u64);
    let mut opts = GenerateOptions::new(args.task, args.split, count, seed);
    if let Some(cfg) = config {
        opts.ranges = cfg.ranges;
        opts.margin = cfg.margin;
    }
    opts.workers = args.workers;
    opts.u8_images = args.u8_images;
    Ok(opts)
}

pub fn gen(args: &GenArgs) -> Result<crate::store::Manifest, CliError> {
    let opts = gen_options(args)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    Ok(generate_dataset(&args.out, &opts)?)
}

pub fn preview(args: &PreviewArgs) -> Result<PathBuf, CliError> {
    let reader = DatasetReader::open(&args.dataset)?;
    let task: Option<TaskKind> = reader.header().task.parse().ok();
    let sample = match &args.pred {
        Some(pred) => {
            let preds = DatasetReader::open(pred)?;
            let s = preds.sample(args.index)?;
            // Prediction containers keep their rows in the input slot.
            if preds.header().task == "predictions" {
                s.input
            } else {
                s.target
            }
        }
        None => {
            let s = reader.sample(args.index)?;
            match args.what {
                Part::Input => s.input,
                Part::Target => s.target,
            }
        }
    };
    let words = task == Some(TaskKind::Words);
    let img = render_tensor(&sample, words).map_err(CliError::Usage)?;
    let out = match &args.out {
        Some(p) => p.clone(),
        None => {
            let what = match (&args.pred, args.what) {
                (Some(_), _) => "pred",
                (None, Part::Input) => "input",
                (None, Part::Target) => "target",
            };
            preview_dir(&args.dataset).join(format!("{}-{what}.png", args.index))
        }
    };
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    img.write_png(&out).map_err(|e| io_err(&out, e))?;
    Ok(out)
}

/// Entry point for the binary: runs, reports errors on stderr and maps them
/// to exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(args, &mut lock) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
