//! Depth-sorted, anti-aliased rendering of line sets into 100×100 grayscale.
//!
//! A line is a capsule (round caps) of full width `thickness`. Pixel centres
//! sit at `((col + 0.5) / 100, (row + 0.5) / 100)` and coverage ramps
//! linearly over one pixel width around the capsule boundary:
//! `α = clamp(0.5 + (thickness/2 − d) / AA_BAND, 0, 1)`.
//!
//! Lines are painted darkest first with source-over compositing, so brighter
//! lines end up in front. Consecutive lines of exactly equal brightness form
//! one layer whose coverage is the per-pixel maximum; painting such a layer
//! does not depend on the order of its lines.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::geometry::LinePose;
use crate::scene::Scene;

pub const HEIGHT: usize = 100;
pub const WIDTH: usize = 100;
/// Width of the anti-aliasing ramp: one pixel in normalized units.
pub const AA_BAND: f64 = 1.0 / WIDTH as f64;

/// Single-channel image with values in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pixels: Vec<f32>,
}

impl Default for Image {
    fn default() -> Self {
        Self::blank()
    }
}

impl Image {
    pub const SHAPE: [usize; 3] = [1, HEIGHT, WIDTH];

    pub fn blank() -> Self {
        Self {
            pixels: vec![0.0; HEIGHT * WIDTH],
        }
    }

    pub fn from_pixels(pixels: Vec<f32>) -> Option<Self> {
        (pixels.len() == HEIGHT * WIDTH).then_some(Self { pixels })
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f32> {
        self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * WIDTH + col]
    }

    pub fn is_blank(&self) -> bool {
        self.pixels.iter().all(|p| *p == 0.0)
    }

    /// 8-bit quantization, `round(255 · pixel)`.
    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels.iter().map(|p| quantize_u8(*p)).collect()
    }

    pub fn from_u8(bytes: &[u8]) -> Option<Self> {
        Self::from_pixels(bytes.iter().map(|b| *b as f32 / 255.0).collect())
    }

    pub fn write_png(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let file = BufWriter::new(File::create(path)?);
        let mut encoder = png::Encoder::new(file, WIDTH as u32, HEIGHT as u32);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header().map_err(std::io::Error::other)?;
        writer
            .write_image_data(&self.to_u8())
            .map_err(std::io::Error::other)?;
        writer.finish().map_err(std::io::Error::other)
    }
}

pub fn quantize_u8(p: f32) -> u8 {
    (p.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Render order: indices of `lines` by ascending brightness, stable for ties.
pub fn depth_sort(lines: &[LinePose]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..lines.len()).collect();
    order.sort_by(|a, b| lines[*a].brightness.total_cmp(&lines[*b].brightness));
    order
}

/// Anti-aliased coverage of one pixel centre by a capsule.
pub fn coverage(distance: f64, thickness: f64) -> f64 {
    (0.5 + (0.5 * thickness - distance) / AA_BAND).clamp(0.0, 1.0)
}

/// Paints `line` over `img`.
pub fn rasterize_line(img: &mut Image, line: &LinePose) {
    let mut layer = Layer::new();
    layer.add(line);
    layer.composite(img, line.brightness);
}

/// Paints lines that are already in render order.
pub fn render_lines(lines: &[LinePose]) -> Image {
    let mut img = Image::blank();
    let mut layer = Layer::new();
    for run in lines.chunk_by(|a, b| a.brightness == b.brightness) {
        for line in run {
            layer.add(line);
        }
        layer.composite(&mut img, run[0].brightness);
        layer.clear();
    }
    img
}

pub fn render_scene(scene: &Scene) -> Image {
    render_lines(&scene.flat_lines)
}

/// Depth-sorts arbitrary lines (zero rows included) and renders them.
pub fn render_unsorted(lines: &[LinePose]) -> Image {
    let sorted: Vec<LinePose> = depth_sort(lines).into_iter().map(|i| lines[i]).collect();
    render_lines(&sorted)
}

/// Per-pixel maximum coverage of a group of equally bright lines.
struct Layer {
    alpha: Vec<f32>,
    rows: (usize, usize),
    cols: (usize, usize),
}

impl Layer {
    fn new() -> Self {
        Self {
            alpha: vec![0.0; HEIGHT * WIDTH],
            rows: (HEIGHT, 0),
            cols: (WIDTH, 0),
        }
    }

    fn add(&mut self, line: &LinePose) {
        if !line.is_valid() || line.thickness == 0.0 {
            return;
        }
        // Fixed endpoint order makes the result independent of which endpoint comes first.
        let (a, b) = {
            let p = (line.x1, line.y1);
            let q = (line.x2, line.y2);
            if p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)).is_gt() {
                (q, p)
            } else {
                (p, q)
            }
        };
        let reach = 0.5 * line.thickness + AA_BAND;
        let Some((r0, r1)) = pixel_span(a.1.min(b.1) - reach, a.1.max(b.1) + reach, HEIGHT) else {
            return;
        };
        let Some((c0, c1)) = pixel_span(a.0.min(b.0) - reach, a.0.max(b.0) + reach, WIDTH) else {
            return;
        };
        self.rows = (self.rows.0.min(r0), self.rows.1.max(r1));
        self.cols = (self.cols.0.min(c0), self.cols.1.max(c1));

        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let len2 = dx * dx + dy * dy;
        for row in r0..r1 {
            let py = (row as f64 + 0.5) / HEIGHT as f64;
            for col in c0..c1 {
                let px = (col as f64 + 0.5) / WIDTH as f64;
                let t = if len2 > 0.0 {
                    (((px - a.0) * dx + (py - a.1) * dy) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let d = (px - (a.0 + t * dx)).hypot(py - (a.1 + t * dy));
                let alpha = coverage(d, line.thickness) as f32;
                let slot = &mut self.alpha[row * WIDTH + col];
                if alpha > *slot {
                    *slot = alpha;
                }
            }
        }
    }

    fn composite(&self, img: &mut Image, brightness: f64) {
        let b = brightness as f32;
        for row in self.rows.0..self.rows.1 {
            for col in self.cols.0..self.cols.1 {
                let a = self.alpha[row * WIDTH + col];
                if a > 0.0 {
                    let p = &mut img.pixels[row * WIDTH + col];
                    *p = (a * b + (1.0 - a) * *p).clamp(0.0, 1.0);
                }
            }
        }
    }

    fn clear(&mut self) {
        for row in self.rows.0..self.rows.1 {
            self.alpha[row * WIDTH + self.cols.0..row * WIDTH + self.cols.1].fill(0.0);
        }
        self.rows = (HEIGHT, 0);
        self.cols = (WIDTH, 0);
    }
}

/// Half-open range of pixel indices whose centres may fall in `[lo, hi]`.
fn pixel_span(lo: f64, hi: f64, n: usize) -> Option<(usize, usize)> {
    let first = (lo * n as f64 - 0.5).floor().max(0.0);
    let last = (hi * n as f64 - 0.5).ceil().min(n as f64 - 1.0);
    (first <= last).then(|| (first as usize, last as usize + 1))
}
