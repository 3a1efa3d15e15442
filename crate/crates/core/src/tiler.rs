//! Fixed-size overlapping tiles over a mosaic, and the coordinate maps
//! between tile-local and mosaic pixel frames.

use thiserror::Error;

use crate::formats::{CrownPrediction, GeoRaster};
use crate::geometry::{intersection_geometry, CrownPolygon, Point2};

pub const DEFAULT_TILE_SIZE: u32 = 1024;
pub const DEFAULT_OVERLAP: f64 = 0.2;
/// Clipped label fragments smaller than this (px²) are discarded.
pub const MIN_FRAGMENT_AREA: f64 = 4.0;
/// Vertices may overshoot the tile by this much before lifting (then clamped).
pub const EDGE_SLACK_PX: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TilerError {
    #[error("tile size must be at least 1 pixel")]
    ZeroTileSize,
    #[error("overlap fraction {0} outside [0, 1)")]
    BadOverlap(f64),
    #[error("tile origin ({x}, {y}) outside {width}x{height} raster")]
    OriginOutOfBounds {
        x: u32,
        y: u32,
        width: u32,
        height: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TileSpec {
    tile_size: u32,
    overlap_fraction: f64,
}

impl Default for TileSpec {
    fn default() -> Self {
        Self {
            tile_size: DEFAULT_TILE_SIZE,
            overlap_fraction: DEFAULT_OVERLAP,
        }
    }
}

impl TileSpec {
    pub fn new(tile_size: u32, overlap_fraction: f64) -> Result<Self, TilerError> {
        if tile_size == 0 {
            return Err(TilerError::ZeroTileSize);
        }
        if !(0.0..1.0).contains(&overlap_fraction) {
            return Err(TilerError::BadOverlap(overlap_fraction));
        }
        Ok(Self {
            tile_size,
            overlap_fraction,
        })
    }

    pub fn tile_size(&self) -> u32 {
        self.tile_size
    }

    pub fn overlap_fraction(&self) -> f64 {
        self.overlap_fraction
    }

    /// Distance between consecutive origins; rounded down so the realised
    /// overlap is never below the nominal one.
    pub fn stride(&self) -> u32 {
        ((self.tile_size as f64 * (1.0 - self.overlap_fraction)).floor() as u32).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TileOrigin {
    pub y: u32,
    pub x: u32,
}

impl TileOrigin {
    pub fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }
}

fn axis_origins(extent: u32, spec: &TileSpec) -> Vec<u32> {
    let size = spec.tile_size;
    let stride = spec.stride();
    let mut out = Vec::new();
    let mut o = 0u32;
    while o as u64 + (size as u64) < extent as u64 {
        out.push(o);
        o += stride;
    }
    let last = extent.saturating_sub(size);
    if out.last() != Some(&last) {
        out.push(last);
    }
    out
}

/// Row-major tile origins covering a `width × height` mosaic. The last
/// origin on each axis is pulled back so that tile ends flush with the edge.
pub fn plan_tiles(width: u32, height: u32, spec: &TileSpec) -> Vec<TileOrigin> {
    let xs = axis_origins(width.max(1), spec);
    let ys = axis_origins(height.max(1), spec);
    ys.iter()
        .flat_map(|&y| xs.iter().map(move |&x| TileOrigin { x, y }))
        .collect()
}

/// Pixel extent of the tile at `origin`, cropped at the mosaic edge.
pub fn tile_extent(width: u32, height: u32, origin: TileOrigin, spec: &TileSpec) -> (u32, u32) {
    (
        spec.tile_size.min(width.saturating_sub(origin.x)),
        spec.tile_size.min(height.saturating_sub(origin.y)),
    )
}

/// Bit-exact sub-window with a transform that keeps world positions fixed.
pub fn crop_tile(
    raster: &GeoRaster,
    origin: TileOrigin,
    spec: &TileSpec,
) -> Result<GeoRaster, TilerError> {
    if origin.x >= raster.width() || origin.y >= raster.height() {
        return Err(TilerError::OriginOutOfBounds {
            x: origin.x,
            y: origin.y,
            width: raster.width(),
            height: raster.height(),
        });
    }
    let (w, h) = tile_extent(raster.width(), raster.height(), origin, spec);
    Ok(raster.window(origin.x, origin.y, w, h))
}

/// Mosaic pixel coordinates → tile-local pixel coordinates.
pub fn to_tile_local(polygon: &CrownPolygon, origin: TileOrigin) -> CrownPolygon {
    let (dx, dy) = (origin.x as f64, origin.y as f64);
    polygon
        .translate(-dx, -dy)
        .expect("translation keeps a valid polygon valid")
}

/// Tile-local prediction → mosaic frame. Vertices overshooting the tile by at
/// most [`EDGE_SLACK_PX`] are clamped onto the tile border first.
pub fn lift_to_mosaic(
    pred: &CrownPrediction,
    origin: TileOrigin,
    tile_extent: (u32, u32),
) -> CrownPrediction {
    let (w, h) = (tile_extent.0 as f64, tile_extent.1 as f64);
    let clamp = |v: f64, hi: f64| {
        if (-EDGE_SLACK_PX..0.0).contains(&v) {
            0.0
        } else if v > hi && v <= hi + EDGE_SLACK_PX {
            hi
        } else {
            v
        }
    };
    let (dx, dy) = (origin.x as f64, origin.y as f64);
    let clamped: Vec<Point2> = pred
        .polygon
        .vertices()
        .iter()
        .map(|p| Point2::new(clamp(p.x, w) + dx, clamp(p.y, h) + dy))
        .collect();
    let polygon = CrownPolygon::from_ring_lossy(clamped).unwrap_or_else(|_| {
        pred.polygon
            .translate(dx, dy)
            .expect("translation keeps a valid polygon valid")
    });
    CrownPrediction {
        polygon,
        confidence: pred.confidence,
        source_image_id: pred.source_image_id.clone(),
    }
}

/// Clips mosaic-frame labels to each tile, returning tile-local fragments
/// per origin (same order as `origins`). Fragments under
/// [`MIN_FRAGMENT_AREA`] are dropped.
pub fn split_labels(
    labels: &[CrownPolygon],
    width: u32,
    height: u32,
    origins: &[TileOrigin],
    spec: &TileSpec,
) -> Vec<Vec<CrownPolygon>> {
    origins
        .iter()
        .map(|&o| {
            let (w, h) = tile_extent(width, height, o, spec);
            let rect =
                CrownPolygon::rect(o.x as f64, o.y as f64, (o.x + w) as f64, (o.y + h) as f64)
                    .expect("tile has positive extent");
            labels
                .iter()
                .flat_map(|l| intersection_geometry(l, &rect))
                .filter(|f| f.area() >= MIN_FRAGMENT_AREA)
                .map(|f| to_tile_local(&f, o))
                .collect()
        })
        .collect()
}
