//! Scores noisy predictions of line sets with the symmetric Chamfer MSE.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use syndacate::metrics::predictions_header;
use syndacate::store::write_dataset;
use syndacate::{
    chamfer_mse, generate_dataset, score_predictions, DatasetReader, GenerateOptions, SetBatch,
    Split, TaskKind, TaskSample, Tensor,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = [0.0f32, 0.0, 1.0, 1.0];
    let b = [1.0f32, 1.0, 0.0, 0.0, 0.0, 0.1];
    println!(
        "toy chamfer: {}",
        chamfer_mse(SetBatch::new(&a, 2)?, SetBatch::new(&b, 2)?)?
    );

    let dir = std::env::temp_dir().join("chamfer_scoring");
    std::fs::create_dir_all(&dir)?;
    let data = dir.join("data.bin");
    generate_dataset(
        &data,
        &GenerateOptions::new(TaskKind::ImToParts, Split::Test, 100, 3),
    )?;
    let reader = DatasetReader::open(&data)?;

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut preds = Vec::new();
    for s in reader.samples()? {
        let s = s?;
        let noisy = s
            .target
            .to_f32_vec()
            .iter()
            .map(|v| v + rng.random_range(-0.02..0.02))
            .collect();
        preds.push(TaskSample {
            index: s.index,
            input: Tensor::f32(vec![9, 6], noisy),
            target: Tensor::f32(vec![0], vec![]),
        });
    }
    let pred = dir.join("pred.bin");
    write_dataset(
        &pred,
        predictions_header(TaskKind::ImToParts, 100, false),
        preds.iter(),
    )?;
    let report = score_predictions(&reader, &DatasetReader::open(&pred)?, None)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
