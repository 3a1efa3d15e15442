//! Vegetation indices over crown footprints.
//!
//! A crown's region of interest is the set of pixels whose centre lies
//! strictly inside the outline. Channel values are summed as integers and
//! divided once, so the result does not depend on visiting order. Pure black
//! pixels are treated as nodata and skipped.

use serde::Serialize;
use thiserror::Error;

use crate::formats::GeoRaster;
use crate::geometry::{CrownPolygon, Point2};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IndexError {
    #[error("no pixel centre falls inside the crown")]
    EmptyCoverage,
    #[error("every covered pixel is nodata (black)")]
    AllBlackRegion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexKind {
    Gcc,
    Exg,
}

/// Pixels covered by a crown, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PixelRegion {
    pub pixels: Vec<(u32, u32)>,
}

impl PixelRegion {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

/// Integer channel totals over a region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ChannelSums {
    pub r: u64,
    pub g: u64,
    pub b: u64,
    /// Pixels that contributed (non-black).
    pub count: u64,
    /// Black pixels skipped as nodata.
    pub nodata: u64,
}

impl ChannelSums {
    pub fn add(&mut self, [r, g, b]: [u8; 3]) {
        if r == 0 && g == 0 && b == 0 {
            self.nodata += 1;
            return;
        }
        self.r += r as u64;
        self.g += g as u64;
        self.b += b as u64;
        self.count += 1;
    }

    fn total(&self) -> Result<u64, IndexError> {
        match self.r + self.g + self.b {
            0 => Err(IndexError::AllBlackRegion),
            t => Ok(t),
        }
    }

    /// `G / (R + G + B)`.
    pub fn gcc(&self) -> Result<f64, IndexError> {
        Ok(self.g as f64 / self.total()? as f64)
    }

    /// `(2G − R − B) / (R + G + B)`.
    pub fn exg(&self) -> Result<f64, IndexError> {
        let num = 2 * self.g as i128 - self.r as i128 - self.b as i128;
        Ok(num as f64 / self.total()? as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IndexValue {
    pub gcc: f64,
    pub exg: f64,
    pub pixel_count: u64,
}

/// Pixel centres strictly inside a world-space polygon, by scanline fill in
/// pixel space.
pub fn rasterize_crown(
    polygon: &CrownPolygon,
    raster: &GeoRaster,
) -> Result<PixelRegion, IndexError> {
    let pts: Vec<Point2> = polygon
        .vertices()
        .iter()
        .map(|&p| raster.transform.invert(p))
        .collect();
    let region = scanline_fill(&pts, raster.width(), raster.height());
    if region.is_empty() {
        Err(IndexError::EmptyCoverage)
    } else {
        Ok(region)
    }
}

/// Scanline fill of a pixel-space ring, clipped to a `width × height` grid.
pub fn scanline_fill(ring: &[Point2], width: u32, height: u32) -> PixelRegion {
    let n = ring.len();
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in ring {
        ymin = ymin.min(p.y);
        ymax = ymax.max(p.y);
    }
    let mut out = PixelRegion::default();
    if !(ymin.is_finite() && ymax.is_finite()) {
        return out;
    }
    let row_lo = (ymin - 0.5).floor().max(0.0);
    let row_hi = (ymax - 0.5).ceil().min(height as f64 - 1.0);
    if row_lo > row_hi {
        return out;
    }
    let mut xs: Vec<f64> = Vec::new();
    let mut flats: Vec<(f64, f64)> = Vec::new();
    for row in row_lo as u32..=row_hi as u32 {
        let y = row as f64 + 0.5;
        xs.clear();
        flats.clear();
        for i in 0..n {
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            // A vertex on the scanline is boundary even when its edges
            // produce no crossing (a notch tip inside a span).
            if a.y == y {
                flats.push((a.x, a.x));
            }
            if a.y == b.y {
                if a.y == y {
                    flats.push((a.x.min(b.x), a.x.max(b.x)));
                }
                continue;
            }
            if (a.y > y) != (b.y > y) {
                xs.push(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
            }
        }
        xs.sort_by(f64::total_cmp);
        for span in xs.chunks_exact(2) {
            let (x0, x1) = (span[0], span[1]);
            // centres c = col + 0.5 with x0 < c < x1
            let first = ((x0 - 0.5).floor() + 1.0).max(0.0);
            let last = ((x1 - 0.5).ceil() - 1.0).min(width as f64 - 1.0);
            if first > last {
                continue;
            }
            for col in first as u32..=last as u32 {
                let cx = col as f64 + 0.5;
                if flats.iter().any(|&(lo, hi)| cx >= lo && cx <= hi) {
                    continue;
                }
                out.pixels.push((col, row));
            }
        }
    }
    out
}

pub fn channel_sums(region: &PixelRegion, raster: &GeoRaster) -> ChannelSums {
    let mut s = ChannelSums::default();
    for &(col, row) in &region.pixels {
        s.add(raster.rgb(col, row));
    }
    s
}

pub fn index_value(polygon: &CrownPolygon, raster: &GeoRaster) -> Result<IndexValue, IndexError> {
    let region = rasterize_crown(polygon, raster)?;
    let sums = channel_sums(&region, raster);
    Ok(IndexValue {
        gcc: sums.gcc()?,
        exg: sums.exg()?,
        pixel_count: sums.count,
    })
}

/// Green chromatic coordinate of a crown.
pub fn gcc(polygon: &CrownPolygon, raster: &GeoRaster) -> Result<IndexValue, IndexError> {
    index_value(polygon, raster)
}

/// Excess green of a crown, normalised by total brightness.
pub fn exg(polygon: &CrownPolygon, raster: &GeoRaster) -> Result<f64, IndexError> {
    index_value(polygon, raster).map(|v| v.exg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::GeoTransform;

    fn square(x0: f64, y0: f64, x1: f64, y1: f64) -> CrownPolygon {
        CrownPolygon::rect(x0, y0, x1, y1).unwrap()
    }

    fn raster(w: u32, h: u32, rgb: [u8; 3]) -> GeoRaster {
        GeoRaster::filled(w, h, rgb, GeoTransform::IDENTITY)
    }

    #[test]
    fn block_of_hundred_pixels() {
        let r = raster(20, 20, [1, 1, 1]);
        let region = rasterize_crown(&square(5.0, 5.0, 15.0, 15.0), &r).unwrap();
        assert_eq!(region.len(), 100);
        assert_eq!(region.pixels[0], (5, 5));
    }

    #[test]
    fn off_raster_is_empty() {
        let r = raster(20, 20, [1, 1, 1]);
        assert_eq!(
            rasterize_crown(&square(30.0, 30.0, 40.0, 40.0), &r),
            Err(IndexError::EmptyCoverage)
        );
        // Thin sliver between pixel centres.
        assert_eq!(
            rasterize_crown(&square(1.6, 1.0, 2.4, 5.0), &r),
            Err(IndexError::EmptyCoverage)
        );
    }

    #[test]
    fn boundary_centres_are_excluded() {
        let r = raster(10, 10, [1, 1, 1]);
        // Edges run through centre rows/columns 2.5 and 5.5.
        let region = rasterize_crown(&square(2.5, 2.5, 5.5, 5.5), &r).unwrap();
        assert_eq!(region.len(), 4);
    }

    #[test]
    fn north_up_transform_inverts_rows() {
        let t = GeoTransform::north_up(100.0, 200.0, 0.5);
        let r = GeoRaster::filled(10, 10, [1, 1, 1], t);
        // world [101,102]x[198,199] -> cols 2..4, rows 2..4
        let region = rasterize_crown(&square(101.0, 198.0, 102.0, 199.0), &r).unwrap();
        assert_eq!(region.len(), 4);
        assert!(region
            .pixels
            .iter()
            .all(|&(c, r)| (2..4).contains(&c) && (2..4).contains(&r)));
    }

    #[test]
    fn gcc_of_pure_colours() {
        let crown = square(0.0, 0.0, 4.0, 4.0);
        assert_eq!(gcc(&crown, &raster(4, 4, [0, 255, 0])).unwrap().gcc, 1.0);
        assert_eq!(
            gcc(&crown, &raster(4, 4, [100, 100, 100])).unwrap().gcc,
            1.0 / 3.0
        );
        let mut two = raster(2, 1, [255, 0, 0]);
        two.set_rgb(1, 0, [0, 255, 0]);
        let v = gcc(&square(0.0, 0.0, 2.0, 1.0), &two).unwrap();
        assert_eq!(v.gcc, 0.5);
        assert_eq!(v.pixel_count, 2);
    }

    #[test]
    fn exg_of_pure_colours() {
        let crown = square(0.0, 0.0, 4.0, 4.0);
        assert_eq!(exg(&crown, &raster(4, 4, [0, 255, 0])).unwrap(), 2.0);
        assert_eq!(exg(&crown, &raster(4, 4, [100, 100, 100])).unwrap(), 0.0);
        assert_eq!(exg(&crown, &raster(4, 4, [255, 0, 0])).unwrap(), -1.0);
    }

    #[test]
    fn black_pixels_are_nodata() {
        let mut r = raster(2, 1, [0, 0, 0]);
        r.set_rgb(1, 0, [10, 30, 60]);
        let v = gcc(&square(0.0, 0.0, 2.0, 1.0), &r).unwrap();
        assert_eq!(v.gcc, 0.3);
        assert_eq!(v.pixel_count, 1);
        assert_eq!(
            gcc(&square(0.0, 0.0, 1.0, 1.0), &r),
            Err(IndexError::AllBlackRegion)
        );
    }

    #[test]
    fn notch_tip_on_a_centre_is_excluded() {
        // The vertex (2.5, 1.5) points into the polygon from below.
        let ring = [
            Point2::new(0.0, 0.0),
            Point2::new(2.5, 1.5),
            Point2::new(5.0, 0.0),
            Point2::new(5.0, 3.0),
            Point2::new(0.0, 3.0),
        ];
        let region = scanline_fill(&ring, 5, 3);
        assert!(!region.pixels.contains(&(2, 1)));
        assert!(region.pixels.contains(&(1, 1)));
        assert!(region.pixels.contains(&(2, 2)));
    }
}
