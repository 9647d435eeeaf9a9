//! Prints one sample's tensor shapes for every generated task.

use syndacate::{Split, TaskGenerator, TaskKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for task in TaskKind::ALL {
        let Ok(g) = TaskGenerator::with_defaults(task, 1, Split::Test) else {
            println!("{task:<28} needs external activations");
            continue;
        };
        let s = g.sample(0)?;
        println!(
            "{task:<28} {:?} {:?} -> {:?} {:?}",
            s.input.dtype(),
            s.input.shape,
            s.target.dtype(),
            s.target.shape
        );
    }
    Ok(())
}
