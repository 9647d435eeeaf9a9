//! Deterministic generator, renderer, task emitter and scorer for a synthetic
//! benchmark of line, character and word hierarchies on 100×100 grayscale
//! images.
//!
//! ```
//! use syndacate::{render_scene, Split, TaskGenerator, TaskKind};
//!
//! let generator = TaskGenerator::with_defaults(TaskKind::ImToParts, 42, Split::Train).unwrap();
//! let sample = generator.sample(0).unwrap();
//! assert_eq!(sample.target.shape, vec![9, 6]);
//! let scene = generator.scene(0).unwrap();
//! assert_eq!(render_scene(&scene).pixels(), sample.input.as_f32().unwrap());
//! ```

pub mod cli;
pub mod generate;
pub mod geometry;
pub mod inspect;
pub mod metrics;
pub mod raster;
pub mod rng;
pub mod scene;
pub mod store;
pub mod tasks;
pub mod tensor;

pub use generate::{generate_dataset, GenerateOptions};
pub use geometry::{compose_pose, pose_to_affine, transform_line, Affine2, LinePose, ObjectPose};
pub use inspect::{verify, DatasetStats, VerifyReport};
pub use metrics::{chamfer_mse, score_predictions, Report, SetBatch};
pub use raster::{render_lines, render_scene, Image};
pub use rng::Split;
pub use scene::{glyph_library, ClassId, Sampler, SamplerConfig, Scene};
pub use store::{DatasetHeader, DatasetReader, DatasetWriter, Manifest, StoreError};
pub use tasks::{TaskGenerator, TaskKind, TaskSample};
pub use tensor::{DType, Tensor};
