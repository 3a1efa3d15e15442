//! Planar polygon primitives and overlap measures.
//!
//! Every crown footprint is a single simple ring stored counter-clockwise.
//! Coordinates are planar (projected metres or pixels); nothing here knows
//! about a CRS.

mod overlay;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use overlay::snap_tolerance;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("vertex {0} is not finite")]
    NonFiniteVertex(usize),
    #[error("vertices {0} and {1} are identical")]
    DuplicateVertex(usize, usize),
    #[error("polygon is self-intersecting (edges {0} and {1})")]
    SelfIntersecting(usize, usize),
    #[error("polygon has zero area")]
    ZeroArea,
    #[error("polygons do not overlap; refusing to merge disjoint crowns")]
    DisjointUnion,
    #[error("overlay produced no valid boundary ring")]
    DegenerateOverlay,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    #[inline]
    pub(crate) fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }

    #[inline]
    pub(crate) fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }

    #[inline]
    pub(crate) fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub(crate) fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }
}

impl From<(f64, f64)> for Point2 {
    fn from((x, y): (f64, f64)) -> Self {
        Point2::new(x, y)
    }
}

impl fmt::Display for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min: Point2,
    pub max: Point2,
}

impl BBox {
    pub fn of(points: &[Point2]) -> Self {
        let mut min = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        Self { min, max }
    }

    pub fn intersects(&self, other: &BBox) -> bool {
        self.min.x <= other.max.x
            && other.min.x <= self.max.x
            && self.min.y <= other.max.y
            && other.min.y <= self.max.y
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            min: Point2::new(self.min.x.min(other.min.x), self.min.y.min(other.min.y)),
            max: Point2::new(self.max.x.max(other.max.x), self.max.y.max(other.max.y)),
        }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }
}

/// A simple closed polygon (one ring, no holes), stored counter-clockwise.
///
/// The ring is implicitly closed: the last vertex connects back to the first.
#[derive(Debug, Clone, PartialEq)]
pub struct CrownPolygon {
    vertices: Vec<Point2>,
    area: f64,
    bbox: BBox,
}

impl CrownPolygon {
    /// Validates and normalises a ring. Rejects fewer than three vertices,
    /// non-finite coordinates, consecutive duplicates, self-intersections and
    /// zero area. Clockwise input is reversed.
    pub fn new(vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        let n = vertices.len();
        if n < 3 {
            return Err(GeometryError::TooFewVertices(n));
        }
        if let Some(i) = vertices.iter().position(|p| !p.is_finite()) {
            return Err(GeometryError::NonFiniteVertex(i));
        }
        for i in 0..n {
            let j = (i + 1) % n;
            if vertices[i] == vertices[j] {
                return Err(GeometryError::DuplicateVertex(i, j));
            }
        }
        check_simple(&vertices)?;
        let signed = signed_area(&vertices);
        if signed == 0.0 || !signed.is_finite() {
            return Err(GeometryError::ZeroArea);
        }
        let mut vertices = vertices;
        if signed < 0.0 {
            vertices.reverse();
        }
        let bbox = BBox::of(&vertices);
        Ok(Self {
            vertices,
            area: signed.abs(),
            bbox,
        })
    }

    /// Builds a polygon after dropping consecutive repeated vertices and a
    /// repeated closing vertex, the usual noise in hand-drawn outlines.
    pub fn from_ring_lossy(mut vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        vertices.dedup();
        while vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        Self::new(vertices)
    }

    /// Axis-aligned rectangle `[x0,x1]×[y0,y1]`.
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, GeometryError> {
        Self::new(vec![
            Point2::new(x0, y0),
            Point2::new(x1, y0),
            Point2::new(x1, y1),
            Point2::new(x0, y1),
        ])
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn into_vertices(self) -> Vec<Point2> {
        self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }

    /// Shoelace area; always positive.
    pub fn area(&self) -> f64 {
        self.area
    }

    /// Area-weighted centroid of the enclosed region.
    pub fn centroid(&self) -> Point2 {
        let o = self.vertices[0];
        let mut cx = 0.0;
        let mut cy = 0.0;
        let mut a2 = 0.0;
        let n = self.vertices.len();
        for i in 0..n {
            let p = self.vertices[i].sub(o);
            let q = self.vertices[(i + 1) % n].sub(o);
            let w = p.cross(q);
            a2 += w;
            cx += (p.x + q.x) * w;
            cy += (p.y + q.y) * w;
        }
        Point2::new(o.x + cx / (3.0 * a2), o.y + cy / (3.0 * a2))
    }

    /// Point-in-polygon by crossing number. Points on the boundary may go
    /// either way; use [`CrownPolygon::locate`] when that matters.
    pub fn contains(&self, p: Point2) -> bool {
        point_in_ring(&self.vertices, p)
    }

    /// Classifies a point as strictly inside, on the boundary (within
    /// `tol`), or outside.
    pub fn locate(&self, p: Point2, tol: f64) -> Location {
        if on_ring_boundary(&self.vertices, p, tol) {
            Location::Boundary
        } else if point_in_ring(&self.vertices, p) {
            Location::Inside
        } else {
            Location::Outside
        }
    }

    /// Applies `f` to every vertex and revalidates.
    pub fn map_points(&self, f: impl Fn(Point2) -> Point2) -> Result<Self, GeometryError> {
        Self::new(self.vertices.iter().map(|&p| f(p)).collect())
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Result<Self, GeometryError> {
        self.map_points(|p| Point2::new(p.x + dx, p.y + dy))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Inside,
    Boundary,
    Outside,
}

pub fn area(p: &CrownPolygon) -> f64 {
    p.area()
}

pub fn centroid(p: &CrownPolygon) -> Point2 {
    p.centroid()
}

/// Area of the geometric intersection; symmetric, zero when disjoint.
pub fn intersection_area(a: &CrownPolygon, b: &CrownPolygon) -> f64 {
    if !a.bbox.intersects(&b.bbox) {
        return 0.0;
    }
    // Canonical argument order keeps the result bit-identical under swapping.
    let (a, b) = canonical_pair(a, b);
    overlay::Overlay::build(a, b).intersection_area()
}

/// Intersection over union, in `[0, 1]`.
pub fn iou(a: &CrownPolygon, b: &CrownPolygon) -> f64 {
    let inter = intersection_area(a, b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area + b.area - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Intersection over the smaller of the two areas, in `[0, 1]`.
pub fn ios(a: &CrownPolygon, b: &CrownPolygon) -> f64 {
    let inter = intersection_area(a, b);
    if inter <= 0.0 {
        return 0.0;
    }
    (inter / a.area.min(b.area)).clamp(0.0, 1.0)
}

/// Boundary of the geometric union as one simple ring.
///
/// Enclosed holes are filled and, if the union pinches into several lobes
/// touching at single points, the largest lobe is returned.
pub fn union_geometry(a: &CrownPolygon, b: &CrownPolygon) -> Result<CrownPolygon, GeometryError> {
    if !a.bbox.intersects(&b.bbox) {
        return Err(GeometryError::DisjointUnion);
    }
    let (a, b) = canonical_pair(a, b);
    let ov = overlay::Overlay::build(a, b);
    if ov.intersection_area() <= 0.0 {
        return Err(GeometryError::DisjointUnion);
    }
    ov.union_ring()
}

/// Intersection as a list of simple polygons (one per connected part).
pub fn intersection_geometry(a: &CrownPolygon, b: &CrownPolygon) -> Vec<CrownPolygon> {
    if !a.bbox.intersects(&b.bbox) {
        return Vec::new();
    }
    let (a, b) = canonical_pair(a, b);
    overlay::Overlay::build(a, b).intersection_rings()
}

fn canonical_pair<'a>(
    a: &'a CrownPolygon,
    b: &'a CrownPolygon,
) -> (&'a CrownPolygon, &'a CrownPolygon) {
    let key = |p: &CrownPolygon| {
        let v = p.vertices[0];
        (p.area, v.x, v.y, p.vertices.len())
    };
    let (ka, kb) = (key(a), key(b));
    let a_first = match ka.partial_cmp(&kb) {
        Some(std::cmp::Ordering::Greater) => false,
        Some(std::cmp::Ordering::Equal) | None => {
            // Same area and first vertex: fall back to full vertex order.
            a.vertices
                .iter()
                .zip(&b.vertices)
                .find_map(|(p, q)| match (p.x, p.y).partial_cmp(&(q.x, q.y)) {
                    Some(std::cmp::Ordering::Equal) => None,
                    o => Some(o != Some(std::cmp::Ordering::Greater)),
                })
                .unwrap_or(true)
        }
        _ => true,
    };
    if a_first {
        (a, b)
    } else {
        (b, a)
    }
}

/// Signed shoelace area relative to the first vertex (positive when CCW).
pub(crate) fn signed_area(ring: &[Point2]) -> f64 {
    let o = ring[0];
    let n = ring.len();
    let mut s = 0.0;
    for i in 1..n - 1 {
        s += ring[i].sub(o).cross(ring[i + 1].sub(o));
    }
    0.5 * s
}

pub(crate) fn point_in_ring(ring: &[Point2], p: Point2) -> bool {
    let n = ring.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (ring[i], ring[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

pub(crate) fn on_ring_boundary(ring: &[Point2], p: Point2, tol: f64) -> bool {
    let n = ring.len();
    (0..n).any(|i| segment_distance(p, ring[i], ring[(i + 1) % n]) <= tol)
}

pub(crate) fn segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(Point2::new(a.x + t * ab.x, a.y + t * ab.y))
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    b.sub(a).cross(c.sub(a))
}

fn on_segment(a: Point2, b: Point2, p: Point2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

fn segments_touch(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// O(n²) simplicity check: non-adjacent edges must not touch and adjacent
/// edges must not fold back onto each other.
fn check_simple(ring: &[Point2]) -> Result<(), GeometryError> {
    let n = ring.len();
    let bboxes: Vec<BBox> = (0..n)
        .map(|i| BBox::of(&[ring[i], ring[(i + 1) % n]]))
        .collect();
    for i in 0..n {
        let (p1, p2) = (ring[i], ring[(i + 1) % n]);
        // Adjacent edge i, i+1 share p2; they overlap iff collinear and folding back.
        let p3 = ring[(i + 2) % n];
        if orient(p1, p2, p3) == 0.0 && p2.sub(p1).dot(p3.sub(p2)) < 0.0 {
            return Err(GeometryError::SelfIntersecting(i, (i + 1) % n));
        }
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if !bboxes[i].intersects(&bboxes[j]) {
                continue;
            }
            let (q1, q2) = (ring[j], ring[(j + 1) % n]);
            if segments_touch(p1, p2, q1, q2) {
                return Err(GeometryError::SelfIntersecting(i, j));
            }
        }
    }
    Ok(())
}
