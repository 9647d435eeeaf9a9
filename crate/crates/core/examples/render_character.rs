//! Renders every character class at one pose and writes a PNG per class.
//!
//! cargo run --example render_character -- [out_dir]

use syndacate::scene::glyph_library;
use syndacate::{render_scene, ObjectPose, Scene};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("glyphs"), Into::into);
    std::fs::create_dir_all(&out)?;
    let pose = ObjectPose {
        scale: 0.3,
        rotation: 0.2,
        italic: 0.15,
        brightness: 0.9,
        ..ObjectPose::at(0.5, 0.5)
    };
    for glyph in &glyph_library().characters {
        let scene = Scene::single(glyph.class, pose)?;
        let path = out.join(format!("{}.png", glyph.name));
        render_scene(&scene).write_png(&path)?;
        println!(
            "{} ({} strokes) -> {}",
            glyph.name,
            glyph.strokes.len(),
            path.display()
        );
    }
    Ok(())
}
