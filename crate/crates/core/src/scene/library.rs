//! The fixed character and word alphabet.
//!
//! Characters are segment-font glyphs drawn with one to four straight strokes
//! inside the local box `[-0.5, 0.5]²` (y down). Words are two or three
//! characters laid out side by side. Any change to this table changes every
//! generated dataset and must bump [`GLYPH_LIBRARY_VERSION`].

use std::sync::OnceLock;

use serde::Serialize;

use super::{Category, ClassId};
use crate::geometry::{LinePose, ObjectPose};

pub const GLYPH_LIBRARY_VERSION: &str = "segfont-v1";

/// Stroke width in the glyph's local frame. At a character scale of 0.25 this
/// is two pixels on the 100×100 canvas.
pub const CANONICAL_STROKE_THICKNESS: f64 = 0.08;

/// Letter scale inside a word's local frame.
pub const LETTER_SCALE: f64 = 0.32;
/// Distance between neighbouring letter centres inside a word's local frame.
pub const LETTER_SPACING: f64 = 0.34;
/// Letters are drawn with heavier strokes so that they survive the smaller scale.
pub const LETTER_LINE_THICKNESS: f64 = 2.0;

pub const MAX_STROKES_PER_GLYPH: usize = 4;
pub const MAX_LETTERS_PER_WORD: usize = 3;

#[derive(Debug, Clone, Serialize)]
pub struct GlyphDef {
    pub class: ClassId,
    pub name: char,
    pub strokes: Vec<LinePose>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WordDef {
    pub class: ClassId,
    pub text: String,
    /// Character class and canonical placement of each letter in the word frame.
    pub letters: Vec<(ClassId, ObjectPose)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GlyphLibrary {
    pub version: &'static str,
    pub canonical_stroke_thickness: f64,
    pub characters: Vec<GlyphDef>,
    pub words: Vec<WordDef>,
}

impl GlyphLibrary {
    pub fn glyph(&self, index: usize) -> Option<&GlyphDef> {
        self.characters.get(index)
    }

    pub fn word(&self, index: usize) -> Option<&WordDef> {
        self.words.get(index)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("library serializes")
    }
}

type Segment = [f64; 4];

const GLYPHS: [(char, &[Segment]); 10] = [
    ('I', &[[0.0, -0.4, 0.0, 0.4]]),
    ('L', &[[-0.3, -0.4, -0.3, 0.4], [-0.3, 0.4, 0.3, 0.4]]),
    ('T', &[[-0.35, -0.4, 0.35, -0.4], [0.0, -0.4, 0.0, 0.4]]),
    ('V', &[[-0.35, -0.4, 0.0, 0.4], [0.0, 0.4, 0.35, -0.4]]),
    ('X', &[[-0.35, -0.4, 0.35, 0.4], [0.35, -0.4, -0.35, 0.4]]),
    (
        'Z',
        &[
            [-0.35, -0.4, 0.35, -0.4],
            [0.35, -0.4, -0.35, 0.4],
            [-0.35, 0.4, 0.35, 0.4],
        ],
    ),
    (
        'N',
        &[
            [-0.3, 0.4, -0.3, -0.4],
            [-0.3, -0.4, 0.3, 0.4],
            [0.3, 0.4, 0.3, -0.4],
        ],
    ),
    (
        'H',
        &[
            [-0.3, -0.4, -0.3, 0.4],
            [0.3, -0.4, 0.3, 0.4],
            [-0.3, 0.0, 0.3, 0.0],
        ],
    ),
    (
        'E',
        &[
            [-0.3, -0.4, -0.3, 0.4],
            [-0.3, -0.4, 0.3, -0.4],
            [-0.3, 0.0, 0.2, 0.0],
            [-0.3, 0.4, 0.3, 0.4],
        ],
    ),
    (
        'W',
        &[
            [-0.4, -0.4, -0.2, 0.4],
            [-0.2, 0.4, 0.0, -0.1],
            [0.0, -0.1, 0.2, 0.4],
            [0.2, 0.4, 0.4, -0.4],
        ],
    ),
];

const WORDS: [&str; 10] = [
    "IT", "HE", "WE", "TV", "EL", "NIX", "ZEN", "LET", "HEX", "WIT",
];

/// The process-wide library instance.
pub fn glyph_library() -> &'static GlyphLibrary {
    static LIBRARY: OnceLock<GlyphLibrary> = OnceLock::new();
    LIBRARY.get_or_init(build_library)
}

fn build_library() -> GlyphLibrary {
    let characters: Vec<GlyphDef> = GLYPHS
        .iter()
        .enumerate()
        .map(|(i, (name, segments))| GlyphDef {
            class: ClassId::character(i as u8),
            name: *name,
            strokes: segments
                .iter()
                .map(|s| LinePose::new(s[0], s[1], s[2], s[3], CANONICAL_STROKE_THICKNESS, 1.0))
                .collect(),
        })
        .collect();

    let words = WORDS
        .iter()
        .enumerate()
        .map(|(i, text)| {
            let n = text.len() as f64;
            let letters = text
                .chars()
                .enumerate()
                .map(|(j, ch)| {
                    let glyph = characters
                        .iter()
                        .find(|g| g.name == ch)
                        .unwrap_or_else(|| panic!("word `{text}` uses unknown glyph `{ch}`"));
                    let placement = ObjectPose {
                        x: (j as f64 - (n - 1.0) / 2.0) * LETTER_SPACING,
                        scale: LETTER_SCALE,
                        line_thickness: LETTER_LINE_THICKNESS,
                        ..ObjectPose::IDENTITY
                    };
                    (glyph.class, placement)
                })
                .collect();
            WordDef {
                class: ClassId::word(i as u8),
                text: (*text).to_owned(),
                letters,
            }
        })
        .collect();

    GlyphLibrary {
        version: GLYPH_LIBRARY_VERSION,
        canonical_stroke_thickness: CANONICAL_STROKE_THICKNESS,
        characters,
        words,
    }
}

impl ClassId {
    pub fn character(index: u8) -> Self {
        Self {
            category: Category::Character,
            index,
        }
    }

    pub fn word(index: u8) -> Self {
        Self {
            category: Category::Word,
            index,
        }
    }

    pub const LINE: ClassId = ClassId {
        category: Category::Line,
        index: 0,
    };
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_characters_ten_words() {
        let lib = glyph_library();
        assert_eq!(lib.characters.len(), 10);
        assert_eq!(lib.words.len(), 10);
    }

    #[test]
    fn stroke_counts_bounded() {
        for g in &glyph_library().characters {
            assert!(
                (1..=MAX_STROKES_PER_GLYPH).contains(&g.strokes.len()),
                "{}",
                g.name
            );
        }
        // The alphabet exercises both bounds.
        let counts: Vec<_> = glyph_library()
            .characters
            .iter()
            .map(|g| g.strokes.len())
            .collect();
        assert!(counts.contains(&1) && counts.contains(&4));
    }

    #[test]
    fn strokes_inside_local_box() {
        for g in &glyph_library().characters {
            for s in &g.strokes {
                for v in [s.x1, s.y1, s.x2, s.y2] {
                    assert!((-0.5..=0.5).contains(&v), "{} {s:?}", g.name);
                }
                assert_eq!(s.brightness, 1.0);
                assert_eq!(s.thickness, CANONICAL_STROKE_THICKNESS);
            }
        }
    }

    #[test]
    fn words_compose_library_glyphs() {
        let lib = glyph_library();
        for w in &lib.words {
            assert!(
                (2..=MAX_LETTERS_PER_WORD).contains(&w.letters.len()),
                "{}",
                w.text
            );
            for ((class, _), ch) in w.letters.iter().zip(w.text.chars()) {
                assert_eq!(class.category, Category::Character);
                assert_eq!(lib.glyph(class.index as usize).unwrap().name, ch);
            }
        }
    }

    #[test]
    fn word_letters_stay_in_word_box() {
        for w in &glyph_library().words {
            for (_, p) in &w.letters {
                assert!(p.x.abs() + 0.5 * p.scale <= 0.5 + 1e-12, "{}", w.text);
            }
        }
    }

    #[test]
    fn classes_distinct() {
        let lib = glyph_library();
        let mut names: Vec<_> = lib.characters.iter().map(|g| g.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 10);
        let mut texts: Vec<_> = lib.words.iter().map(|w| w.text.clone()).collect();
        texts.sort();
        texts.dedup();
        assert_eq!(texts.len(), 10);
    }

    #[test]
    fn json_export_lists_everything() {
        let v: serde_json::Value = serde_json::from_str(&glyph_library().to_json()).unwrap();
        assert_eq!(v["version"], GLYPH_LIBRARY_VERSION);
        assert_eq!(v["characters"].as_array().unwrap().len(), 10);
        assert_eq!(v["words"][5]["text"], "NIX");
        assert_eq!(v["words"][5]["letters"].as_array().unwrap().len(), 3);
    }
}
