//! Builds a pre-trained-parts classification set from image labels and a
//! container of per-image activations, as an external feature extractor
//! would write it.

use syndacate::store::write_dataset;
use syndacate::tasks::repackage_with_activations;
use syndacate::{
    generate_dataset, DType, DatasetHeader, DatasetReader, GenerateOptions, Split, TaskKind,
    TaskSample, Tensor,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("repack_pretrained");
    std::fs::create_dir_all(&dir)?;
    let images = dir.join("im_to_class.bin");
    generate_dataset(
        &images,
        &GenerateOptions::new(TaskKind::ImToClass, Split::Train, 64, 1),
    )?;

    // Stand-in for a network's feature maps: mean brightness of 8×8 patches.
    let shape = vec![1, 12, 12];
    let mut acts = Vec::new();
    for s in DatasetReader::open(&images)?.samples()? {
        let s = s?;
        let px = s.input.as_f32().expect("f32 images");
        let pooled = (0..144)
            .map(|k| {
                let (r0, c0) = (k / 12 * 8, k % 12 * 8);
                (0..8)
                    .flat_map(|r| (0..8).map(move |c| (r0 + r) * 100 + c0 + c))
                    .map(|i| px[i])
                    .sum::<f32>()
                    / 64.0
            })
            .collect();
        acts.push(TaskSample {
            index: s.index,
            input: Tensor::f32(shape.clone(), pooled),
            target: Tensor::f32(vec![0], vec![]),
        });
    }
    let act_path = dir.join("activations.bin");
    let header = DatasetHeader::new("activations", 64, shape, DType::F32, vec![0], DType::F32);
    write_dataset(&act_path, header, acts.iter())?;

    let out = dir.join("pre_trained.bin");
    let manifest = repackage_with_activations(&images, &act_path, &out)?;
    println!(
        "{} {:?} -> {:?}",
        manifest.header.task, manifest.header.input_shape, manifest.header.target_shape
    );
    Ok(())
}
