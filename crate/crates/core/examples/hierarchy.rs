//! Walks one sampled word scene down to its strokes.

use syndacate::scene::glyph_library;
use syndacate::{Split, TaskGenerator, TaskKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = TaskGenerator::with_defaults(TaskKind::Words, 42, Split::Train)?;
    let scene = g.scene(0)?;
    let lib = glyph_library();
    for (obj, lines) in scene.objects.iter().zip(&scene.object_lines) {
        let word = lib
            .word(obj.class.index as usize)
            .expect("sampled word exists");
        println!(
            "word {:?} at ({:.3}, {:.3}), scale {:.3}",
            word.text, obj.pose.x, obj.pose.y, obj.pose.scale
        );
        for line in lines {
            println!(
                "  line ({:.3}, {:.3})-({:.3}, {:.3}) thickness {:.4} brightness {:.3}",
                line.x1, line.y1, line.x2, line.y2, line.thickness, line.brightness
            );
        }
    }
    Ok(())
}
