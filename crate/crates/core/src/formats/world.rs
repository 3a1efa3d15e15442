use crate::geometry::Point2;

use super::FormatError;

/// Affine map from continuous pixel coordinates to world coordinates:
/// `x = a·px + b·py + c`, `y = d·px + e·py + f`.
///
/// Pixel coordinates are corner-based: `(0, 0)` is the outer corner of the
/// first pixel and the centre of pixel `(col, row)` sits at
/// `(col + 0.5, row + 0.5)`. COCO polygons use the same convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoTransform {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
}

impl GeoTransform {
    pub const IDENTITY: GeoTransform = GeoTransform {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 0.0,
        e: 1.0,
        f: 0.0,
    };

    pub fn new(a: f64, b: f64, c: f64, d: f64, e: f64, f: f64) -> Result<Self, FormatError> {
        let t = GeoTransform { a, b, c, d, e, f };
        if [a, b, c, d, e, f].iter().any(|v| !v.is_finite()) {
            return Err(FormatError::SingularTransform);
        }
        if t.determinant() == 0.0 {
            return Err(FormatError::SingularTransform);
        }
        Ok(t)
    }

    /// North-up transform with square pixels.
    pub fn north_up(origin_x: f64, origin_y: f64, pixel_size: f64) -> Self {
        GeoTransform {
            a: pixel_size,
            b: 0.0,
            c: origin_x,
            d: 0.0,
            e: -pixel_size,
            f: origin_y,
        }
    }

    pub fn determinant(&self) -> f64 {
        self.a * self.e - self.b * self.d
    }

    pub fn apply(&self, px: f64, py: f64) -> Point2 {
        Point2::new(
            self.a * px + self.b * py + self.c,
            self.d * px + self.e * py + self.f,
        )
    }

    pub fn apply_point(&self, p: Point2) -> Point2 {
        self.apply(p.x, p.y)
    }

    /// World position of the centre of pixel `(col, row)`.
    pub fn pixel_center(&self, col: u32, row: u32) -> Point2 {
        self.apply(col as f64 + 0.5, row as f64 + 0.5)
    }

    /// World → continuous pixel coordinates.
    pub fn invert(&self, p: Point2) -> Point2 {
        let det = self.determinant();
        let x = p.x - self.c;
        let y = p.y - self.f;
        Point2::new(
            (self.e * x - self.b * y) / det,
            (-self.d * x + self.a * y) / det,
        )
    }

    /// The transform of a sub-window whose top-left pixel is `(col, row)`.
    pub fn shifted(&self, col: u32, row: u32) -> GeoTransform {
        let o = self.apply(col as f64, row as f64);
        GeoTransform {
            c: o.x,
            f: o.y,
            ..*self
        }
    }

    /// Ground size of one pixel along x (meters per pixel for a north-up grid).
    pub fn pixel_size(&self) -> f64 {
        self.determinant().abs().sqrt()
    }
}

/// Parses an ESRI world file: six numbers, one per line, in the order
/// `a, d, b, e, c, f`, where `(c, f)` is the world position of the centre of
/// the top-left pixel. Blank lines are ignored.
pub fn parse_world_file(text: &str) -> Result<GeoTransform, FormatError> {
    let mut values = Vec::with_capacity(6);
    for (idx, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: f64 = t.parse().map_err(|_| FormatError::UnparseableNumber {
            line: idx + 1,
            text: t.chars().take(40).collect(),
        })?;
        if !v.is_finite() {
            return Err(FormatError::UnparseableNumber {
                line: idx + 1,
                text: t.chars().take(40).collect(),
            });
        }
        values.push(v);
    }
    if values.len() != 6 {
        return Err(FormatError::WrongLineCount(values.len()));
    }
    let (a, d, b, e, cx, cy) = (
        values[0], values[1], values[2], values[3], values[4], values[5],
    );
    // Shift from the centre of pixel (0,0) to its outer corner.
    let c = cx - 0.5 * (a + b);
    let f = cy - 0.5 * (d + e);
    GeoTransform::new(a, b, c, d, e, f)
}

pub fn write_world_file(t: &GeoTransform) -> String {
    let centre = t.apply(0.5, 0.5);
    format!(
        "{}\n{}\n{}\n{}\n{}\n{}\n",
        t.a, t.d, t.b, t.e, centre.x, centre.y
    )
}
