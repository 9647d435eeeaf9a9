//! Two crossing lines: the brighter one is drawn in front whatever the
//! input order.

use syndacate::raster::render_unsorted;
use syndacate::LinePose;

fn main() {
    let dim = LinePose::new(0.2, 0.5, 0.8, 0.5, 0.1, 0.4);
    let bright = LinePose::new(0.5, 0.2, 0.5, 0.8, 0.1, 0.9);
    let a = render_unsorted(&[dim, bright]);
    let b = render_unsorted(&[bright, dim]);
    assert_eq!(a.pixels(), b.pixels());
    println!("crossing pixel: {}", a.get(50, 50));
    println!("dim-only pixel: {}", a.get(50, 25));
}
