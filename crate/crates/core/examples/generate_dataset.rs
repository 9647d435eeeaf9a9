//! Generates a small dataset file, verifies it and reads a sample back.
//!
//! cargo run --release --example generate_dataset -- [out.bin]

use syndacate::inspect::verify;
use syndacate::{generate_dataset, DatasetReader, GenerateOptions, Split, TaskKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("im_to_parts.bin"), Into::into);
    let mut opts = GenerateOptions::new(TaskKind::ImToParts, Split::Train, 2000, 42);
    opts.workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let manifest = generate_dataset(&out, &opts)?;
    println!(
        "{} samples, sha256 {}",
        manifest.header.count, manifest.payload_sha256
    );

    let report = verify(&out)?;
    println!("violations: {}", report.violations.len());

    let reader = DatasetReader::open(&out)?;
    let s = reader.sample(7)?;
    let lines = s
        .target
        .rows()
        .expect("rank-2 target")
        .filter(|r| r.iter().any(|v| *v != 0.0))
        .count();
    println!("sample 7: {lines} line rows ({} strokes)", lines / 2);
    Ok(())
}
