//! Poses, affine maps and pose composition.
//!
//! All coordinates live in the image-normalized unit square with `x` pointing
//! right and `y` pointing down. The rasterizer owns the mapping to pixels.

use std::f64::consts::PI;
use std::ops::Mul;

use serde::{Deserialize, Serialize};

/// Pose of a bottom-level line part: both endpoints, stroke width and brightness.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LinePose {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    /// Full width of the stroke.
    pub thickness: f64,
    pub brightness: f64,
}

impl LinePose {
    pub const DIM: usize = 6;

    /// The all-zero padding line.
    pub const ZERO: LinePose = LinePose {
        x1: 0.0,
        y1: 0.0,
        x2: 0.0,
        y2: 0.0,
        thickness: 0.0,
        brightness: 0.0,
    };

    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64, thickness: f64, brightness: f64) -> Self {
        Self {
            x1,
            y1,
            x2,
            y2,
            thickness,
            brightness,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.to_array().iter().all(|v| *v == 0.0)
    }

    pub fn is_valid(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
            && self.thickness >= 0.0
            && (0.0..=1.0).contains(&self.brightness)
    }

    /// The same stroke with its endpoints exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            x1: self.x2,
            y1: self.y2,
            x2: self.x1,
            y2: self.y1,
            ..*self
        }
    }

    /// Rounds every field through `f32`, so that the pose survives storage unchanged.
    pub fn quantized(&self) -> Self {
        Self::from_array(self.to_array().map(|v| v as f32 as f64))
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.x1,
            self.y1,
            self.x2,
            self.y2,
            self.thickness,
            self.brightness,
        ]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4], a[5])
    }

    pub fn to_f32(&self) -> [f32; 6] {
        self.to_array().map(|v| v as f32)
    }

    pub fn from_f32(row: &[f32]) -> Self {
        assert_eq!(row.len(), Self::DIM, "line rows are 6-wide");
        Self::new(
            row[0] as f64,
            row[1] as f64,
            row[2] as f64,
            row[3] as f64,
            row[4] as f64,
            row[5] as f64,
        )
    }
}

/// Pose of a composite object (character or word).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectPose {
    pub x: f64,
    pub y: f64,
    pub scale: f64,
    /// Radians, positive turns +x towards +y.
    pub rotation: f64,
    /// Horizontal stretch in the object's own frame.
    pub wideness: f64,
    /// Horizontal shear coefficient.
    pub italic: f64,
    /// Stroke width multiplier.
    pub line_thickness: f64,
    /// Brightness multiplier.
    pub brightness: f64,
}

impl Default for ObjectPose {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl ObjectPose {
    pub const DIM: usize = 8;

    pub const IDENTITY: ObjectPose = ObjectPose {
        x: 0.0,
        y: 0.0,
        scale: 1.0,
        rotation: 0.0,
        wideness: 1.0,
        italic: 0.0,
        line_thickness: 1.0,
        brightness: 1.0,
    };

    pub fn at(x: f64, y: f64) -> Self {
        Self {
            x,
            y,
            ..Self::IDENTITY
        }
    }

    pub fn is_valid(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
            && self.scale > 0.0
            && self.wideness > 0.0
            && self.line_thickness > 0.0
            && self.brightness > 0.0
            && self.brightness <= 1.0
    }

    /// Fields in storage order: x, y, scale, rotation, wideness, italic,
    /// line thickness, brightness.
    pub fn to_array(&self) -> [f64; 8] {
        [
            self.x,
            self.y,
            self.scale,
            self.rotation,
            self.wideness,
            self.italic,
            self.line_thickness,
            self.brightness,
        ]
    }

    pub fn from_array(a: [f64; 8]) -> Self {
        Self {
            x: a[0],
            y: a[1],
            scale: a[2],
            rotation: a[3],
            wideness: a[4],
            italic: a[5],
            line_thickness: a[6],
            brightness: a[7],
        }
    }

    /// Affine map from the object's local frame into its parent frame.
    pub fn to_affine(&self) -> Affine2 {
        pose_to_affine(self)
    }
}

/// `linear · q + translation`, with `linear` stored row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine2 {
    pub linear: [[f64; 2]; 2],
    pub translation: [f64; 2],
}

impl Default for Affine2 {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Affine2 {
    pub const IDENTITY: Affine2 = Affine2 {
        linear: [[1.0, 0.0], [0.0, 1.0]],
        translation: [0.0, 0.0],
    };

    pub fn linear(m: [[f64; 2]; 2]) -> Self {
        Self {
            linear: m,
            translation: [0.0, 0.0],
        }
    }

    pub fn translate(tx: f64, ty: f64) -> Self {
        Self {
            linear: Self::IDENTITY.linear,
            translation: [tx, ty],
        }
    }

    pub fn rotate(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::linear([[c, -s], [s, c]])
    }

    /// `(u, v) -> (u + k v, v)`.
    pub fn shear_x(k: f64) -> Self {
        Self::linear([[1.0, k], [0.0, 1.0]])
    }

    pub fn scale_xy(sx: f64, sy: f64) -> Self {
        Self::linear([[sx, 0.0], [0.0, sy]])
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let m = &self.linear;
        [
            m[0][0] * p[0] + m[0][1] * p[1] + self.translation[0],
            m[1][0] * p[0] + m[1][1] * p[1] + self.translation[1],
        ]
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.linear;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }
}

/// `self * rhs` applies `rhs` first.
impl Mul for Affine2 {
    type Output = Affine2;

    fn mul(self, rhs: Affine2) -> Affine2 {
        let a = &self.linear;
        let b = &rhs.linear;
        let mut linear = [[0.0; 2]; 2];
        for (i, row) in linear.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Affine2 {
            linear,
            translation: self.apply(rhs.translation),
        }
    }
}

/// `R(rotation) · Shear_x(italic) · diag(scale·wideness, scale) · q + (x, y)`.
pub fn pose_to_affine(p: &ObjectPose) -> Affine2 {
    Affine2::translate(p.x, p.y)
        * Affine2::rotate(p.rotation)
        * Affine2::shear_x(p.italic)
        * Affine2::scale_xy(p.scale * p.wideness, p.scale)
}

/// Pose of `child` (expressed in `parent`'s frame) expressed in the parent's
/// own parent frame.
///
/// The linear parts are multiplied and the product is factored back into
/// rotation, shear and axis scales (a QR factorization), so the composed pose
/// maps points exactly like the two poses applied in sequence. When the
/// factors commute (no parent shear, or no child rotation, and unit parent
/// wideness) this reduces to adding rotations and italics and multiplying
/// scales and wideness. The rotation is the representative closest to
/// `parent.rotation + child.rotation`.
pub fn compose_pose(parent: &ObjectPose, child: &ObjectPose) -> ObjectPose {
    let [x, y] = pose_to_affine(parent).apply([child.x, child.y]);
    let product = pose_to_affine(parent) * pose_to_affine(child);
    let [[a, b], [c, d]] = product.linear;

    let sx = a.hypot(c);
    let det = a * d - b * c;
    let sy = det / sx;
    let italic = (a * b + c * d) / det;

    let nominal = parent.rotation + child.rotation;
    let rotation = nominal + wrap_angle(c.atan2(a) - nominal);

    ObjectPose {
        x,
        y,
        scale: sy,
        rotation,
        wideness: sx / sy,
        italic,
        line_thickness: parent.line_thickness * child.line_thickness,
        brightness: parent.brightness * child.brightness,
    }
}

/// Maps `theta` into `(-π, π]`.
fn wrap_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t - 2.0 * PI
    } else {
        t
    }
}

/// Places a line given in an object's local frame into the parent frame.
pub fn transform_line(line: &LinePose, p: &ObjectPose) -> LinePose {
    let affine = pose_to_affine(p);
    let [x1, y1] = affine.apply([line.x1, line.y1]);
    let [x2, y2] = affine.apply([line.x2, line.y2]);
    LinePose {
        x1,
        y1,
        x2,
        y2,
        thickness: line.thickness * p.line_thickness * p.scale,
        brightness: (line.brightness * p.brightness).clamp(0.0, 1.0),
    }
}
