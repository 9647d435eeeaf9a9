//! Class and object-count histograms of a generated character dataset.

use syndacate::{generate_dataset, DatasetReader, DatasetStats, GenerateOptions, Split, TaskKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::temp_dir().join("im_to_chars.bin");
    generate_dataset(
        &path,
        &GenerateOptions::new(TaskKind::ImToChars, Split::Test, 500, 9),
    )?;
    let stats = DatasetStats::from_reader(&DatasetReader::open(&path)?)?;
    println!("{}", serde_json::to_string_pretty(&stats)?);
    Ok(())
}
