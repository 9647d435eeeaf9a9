//! Prints the glyph and word definitions as JSON.

fn main() {
    println!("{}", syndacate::glyph_library().to_json());
}
