//! Deterministic synthetic scenes with planted crowns, trunks, dieback and
//! detector output.
//!
//! Randomness comes from Xoshiro256++ seeded through SplitMix64
//! (`Xoshiro256PlusPlus::seed_from_u64`), so a seed reproduces a scene bit
//! for bit. Crowns are star-shaped rings around a centre, which keeps every
//! perturbed copy a simple polygon. Crown colour is linear in dieback: green
//! falls and red rises as dieback goes from 0 to 1, over a brown background.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use thiserror::Error;

use crate::formats::{
    encode_png, write_coco, write_coco_results, write_trunk_csv, write_world_file, CocoImage,
    CrownPrediction, GeoRaster, GeoTransform, GroundTruthCrown, TrunkRecord,
};
use crate::geometry::{ios, CrownPolygon, Point2};
use crate::indices::scanline_fill;

pub const BACKGROUND: [u8; 3] = [120, 90, 60];
pub const IMAGE_ID: &str = "1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid scene parameters: {0}")]
    InvalidSpec(String),
    #[error("placed only {placed} of {wanted} crowns within the overlap budget after {attempts} attempts")]
    InfeasibleSpec {
        placed: usize,
        wanted: usize,
        attempts: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiebackDist {
    Fixed(f64),
    Uniform { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub seed: u64,
    /// Side of the square scene, metres.
    pub extent: f64,
    /// Ground sampling distance, metres per pixel.
    pub gsd: f64,
    /// World coordinate of the raster's top-left corner.
    pub origin: (f64, f64),
    pub n_crowns: usize,
    /// Mean crown radius range, metres.
    pub radius_range: (f64, f64),
    pub dieback: DiebackDist,
    /// Maximum trunk offset from the crown centroid, metres.
    pub trunk_jitter: f64,
    /// Largest intersection-over-smaller allowed between two crowns.
    pub overlap_fraction: f64,
    /// Relative radial noise on predicted outlines.
    pub vertex_noise: f64,
    /// Share of crowns that receive a second, nested prediction.
    pub duplicate_fraction: f64,
    /// Low-confidence detections with no crown behind them.
    pub false_positives: usize,
    /// Per-channel uniform pixel noise amplitude.
    pub pixel_noise: u8,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            extent: 60.0,
            gsd: 0.03,
            origin: (500_000.0, 4_460_000.0),
            n_crowns: 100,
            radius_range: (1.5, 2.5),
            dieback: DiebackDist::Uniform { lo: 0.0, hi: 1.0 },
            trunk_jitter: 0.5,
            overlap_fraction: 0.1,
            vertex_noise: 0.08,
            duplicate_fraction: 0.2,
            false_positives: 5,
            pixel_noise: 8,
        }
    }
}

impl SceneSpec {
    fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidSpec(m.into()));
        let (rlo, rhi) = self.radius_range;
        if !(self.gsd > 0.0 && self.gsd.is_finite()) {
            return bad("gsd must be positive");
        }
        if !(rlo > 0.0 && rlo <= rhi && rhi.is_finite()) {
            return bad("radius range must satisfy 0 < min <= max");
        }
        if !(self.extent > 2.6 * rhi && self.extent.is_finite()) {
            return bad("extent too small for the largest crown");
        }
        if self.extent / self.gsd > 40_000.0 {
            return bad("raster would exceed 40000 pixels per side");
        }
        match self.dieback {
            DiebackDist::Fixed(v) if !(0.0..=1.0).contains(&v) => {
                return bad("dieback outside [0, 1]")
            }
            DiebackDist::Uniform { lo, hi } if !(0.0 <= lo && lo <= hi && hi <= 1.0) => {
                return bad("dieback range outside [0, 1]")
            }
            _ => {}
        }
        if !(0.0..=1.0).contains(&self.overlap_fraction) {
            return bad("overlap fraction outside [0, 1]");
        }
        if !(0.0..0.5).contains(&self.vertex_noise) {
            return bad("vertex noise must be in [0, 0.5)");
        }
        if !(0.0..=1.0).contains(&self.duplicate_fraction) {
            return bad("duplicate fraction outside [0, 1]");
        }
        if self.trunk_jitter.is_nan() || self.trunk_jitter < 0.0 {
            return bad("trunk jitter must be non-negative");
        }
        Ok(())
    }

    pub fn pixels_per_side(&self) -> u32 {
        (self.extent / self.gsd).round() as u32
    }

    pub fn transform(&self) -> GeoTransform {
        GeoTransform::north_up(self.origin.0, self.origin.1, self.gsd)
    }
}

/// A crown outline as radii at evenly spaced angles around a centre.
#[derive(Debug, Clone)]
struct Star {
    center: Point2,
    phase: f64,
    radii: Vec<f64>,
}

impl Star {
    fn polygon(&self) -> CrownPolygon {
        let k = self.radii.len();
        let pts = self
            .radii
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let a = self.phase + std::f64::consts::TAU * i as f64 / k as f64;
                Point2::new(self.center.x + r * a.cos(), self.center.y + r * a.sin())
            })
            .collect();
        CrownPolygon::new(pts).expect("star rings with positive radii are simple")
    }

    fn scaled(&self, f: impl FnMut(f64) -> f64) -> Star {
        Star {
            center: self.center,
            phase: self.phase,
            radii: self.radii.iter().copied().map(f).collect(),
        }
    }
}

/// Everything a scene plants. Ground truth and predictions are in pixel
/// space (COCO convention); `crowns_world` holds the same outlines in world
/// coordinates.
#[derive(Debug, Clone)]
pub struct Scene {
    pub raster: GeoRaster,
    pub image: CocoImage,
    pub ground_truth: Vec<GroundTruthCrown>,
    pub crowns_world: Vec<CrownPolygon>,
    pub dieback: Vec<f64>,
    pub trunks: Vec<TrunkRecord>,
    pub predictions: Vec<CrownPrediction>,
    /// `(primary, duplicate)` indices into `predictions`.
    pub duplicates: Vec<(usize, usize)>,
}

pub fn crown_colour(dieback: f64) -> [u8; 3] {
    [
        (60.0 + 110.0 * dieback).round() as u8,
        (180.0 - 110.0 * dieback).round() as u8,
        50,
    ]
}

fn to_pixel(t: &GeoTransform, poly: &CrownPolygon) -> CrownPolygon {
    poly.map_points(|p| t.invert(p))
        .expect("an invertible affine map keeps a simple ring simple")
}

pub fn generate_scene(spec: &SceneSpec) -> Result<Scene, SynthError> {
    spec.validate()?;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(spec.seed);
    let t = spec.transform();
    let side = spec.pixels_per_side();
    let (rlo, rhi) = spec.radius_range;
    let margin = 1.25 * rhi;

    let mut stars: Vec<Star> = Vec::with_capacity(spec.n_crowns);
    let mut outlines: Vec<CrownPolygon> = Vec::with_capacity(spec.n_crowns);
    let attempts = 10 * spec.n_crowns;
    for _ in 0..attempts {
        if stars.len() == spec.n_crowns {
            break;
        }
        let r = rng.random_range(rlo..=rhi);
        let k = rng.random_range(12..=20usize);
        let star = Star {
            center: Point2::new(
                spec.origin.0 + rng.random_range(margin..spec.extent - margin),
                spec.origin.1 - rng.random_range(margin..spec.extent - margin),
            ),
            phase: rng.random_range(0.0..std::f64::consts::TAU),
            radii: (0..k).map(|_| r * rng.random_range(0.8..1.2)).collect(),
        };
        let poly = star.polygon();
        let clash = outlines
            .iter()
            .any(|o| o.bbox().intersects(&poly.bbox()) && ios(o, &poly) > spec.overlap_fraction);
        if !clash {
            stars.push(star);
            outlines.push(poly);
        }
    }
    if stars.len() < spec.n_crowns {
        return Err(SynthError::InfeasibleSpec {
            placed: stars.len(),
            wanted: spec.n_crowns,
            attempts,
        });
    }

    let dieback: Vec<f64> = (0..spec.n_crowns)
        .map(|_| match spec.dieback {
            DiebackDist::Fixed(v) => v,
            DiebackDist::Uniform { lo, hi } if lo == hi => lo,
            DiebackDist::Uniform { lo, hi } => rng.random_range(lo..=hi),
        })
        .collect();

    // Paint: background, then crowns in order, then pixel noise.
    let mut raster = GeoRaster::filled(side, side, BACKGROUND, t);
    for (poly, &d) in outlines.iter().zip(&dieback) {
        let ring: Vec<Point2> = poly.vertices().iter().map(|&p| t.invert(p)).collect();
        let colour = crown_colour(d);
        for (col, row) in scanline_fill(&ring, side, side).pixels {
            raster.set_rgb(col, row, colour);
        }
    }
    if spec.pixel_noise > 0 {
        let amp = spec.pixel_noise as i16;
        for row in 0..side {
            for col in 0..side {
                let px = raster.rgb(col, row);
                let noisy =
                    px.map(|v| (v as i16 + rng.random_range(-amp..=amp)).clamp(1, 255) as u8);
                raster.set_rgb(col, row, noisy);
            }
        }
    }

    let trunks = outlines
        .iter()
        .zip(&dieback)
        .enumerate()
        .map(|(i, (poly, &d))| {
            let c = poly.centroid();
            let rho = spec.trunk_jitter * rng.random_range(0.0f64..=1.0).sqrt();
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            TrunkRecord {
                tree_id: format!("t{:04}", i + 1),
                x: c.x + rho * theta.cos(),
                y: c.y + rho * theta.sin(),
                defoliation: d,
            }
        })
        .collect();

    let mut predictions = Vec::new();
    let mut duplicates = Vec::new();
    let pred = |star: &Star, confidence: f64| CrownPrediction {
        polygon: to_pixel(&t, &star.polygon()),
        confidence,
        source_image_id: IMAGE_ID.into(),
    };
    for star in &stars {
        let noisy =
            star.scaled(|r| r * (1.0 + rng.random_range(-spec.vertex_noise..=spec.vertex_noise)));
        let conf = rng.random_range(0.6..1.0);
        predictions.push(pred(&noisy, conf));
        if rng.random_bool(spec.duplicate_fraction) {
            // Nested inside the primary, so intersection-over-smaller is 1.
            let shrink = rng.random_range(0.7..0.95);
            let inner = noisy.scaled(|r| r * shrink);
            let dup_conf = conf * rng.random_range(0.5..0.95);
            duplicates.push((predictions.len() - 1, predictions.len()));
            predictions.push(pred(&inner, dup_conf));
        }
    }
    for _ in 0..spec.false_positives {
        let r = 0.5 * rlo;
        let fp = Star {
            center: Point2::new(
                spec.origin.0 + rng.random_range(r..spec.extent - r),
                spec.origin.1 - rng.random_range(r..spec.extent - r),
            ),
            phase: 0.0,
            radii: vec![r; 8],
        };
        let conf = rng.random_range(0.05..0.25);
        predictions.push(pred(&fp, conf));
    }

    let ground_truth = outlines
        .iter()
        .enumerate()
        .map(|(i, poly)| GroundTruthCrown {
            annotation_id: (i + 1).to_string(),
            image_id: IMAGE_ID.into(),
            polygon: to_pixel(&t, poly),
        })
        .collect();

    Ok(Scene {
        raster,
        image: CocoImage {
            id: IMAGE_ID.into(),
            file_name: String::new(),
            width: side,
            height: side,
            origin: None,
        },
        ground_truth,
        crowns_world: outlines,
        dieback,
        trunks,
        predictions,
        duplicates,
    })
}

/// Paths of the files written for one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenePaths {
    pub raster: PathBuf,
    pub world_file: PathBuf,
    pub ground_truth: PathBuf,
    pub predictions: PathBuf,
    pub trunks: PathBuf,
}

/// Writes `<stem>.png`, `<stem>.pgw`, `<stem>_gt.json`,
/// `<stem>_predictions.json` and `<stem>_trunks.csv` into `dir`.
pub fn write_scene(scene: &Scene, dir: &Path, stem: &str) -> io::Result<ScenePaths> {
    fs::create_dir_all(dir)?;
    let paths = ScenePaths {
        raster: dir.join(format!("{stem}.png")),
        world_file: dir.join(format!("{stem}.pgw")),
        ground_truth: dir.join(format!("{stem}_gt.json")),
        predictions: dir.join(format!("{stem}_predictions.json")),
        trunks: dir.join(format!("{stem}_trunks.csv")),
    };
    let r = &scene.raster;
    fs::write(&paths.raster, encode_png(r.width(), r.height(), r.pixels()))?;
    fs::write(&paths.world_file, write_world_file(&r.transform))?;
    let image = CocoImage {
        file_name: format!("{stem}.png"),
        ..scene.image.clone()
    };
    fs::write(
        &paths.ground_truth,
        write_coco(&[image], &scene.ground_truth),
    )?;
    fs::write(&paths.predictions, write_coco_results(&scene.predictions))?;
    fs::write(&paths.trunks, write_trunk_csv(&scene.trunks))?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indices::gcc;

    fn small(seed: u64, n: usize) -> SceneSpec {
        SceneSpec {
            seed,
            extent: 20.0,
            gsd: 0.1,
            n_crowns: n,
            radius_range: (1.0, 1.5),
            false_positives: 2,
            ..SceneSpec::default()
        }
    }

    #[test]
    fn healthy_crown_is_greener_than_background() {
        let spec = SceneSpec {
            dieback: DiebackDist::Fixed(0.0),
            ..small(1, 1)
        };
        let scene = generate_scene(&spec).unwrap();
        let crown = gcc(&scene.crowns_world[0], &scene.raster).unwrap().gcc;
        let bg = BACKGROUND[1] as f64 / BACKGROUND.iter().map(|&v| v as f64).sum::<f64>();
        assert!(crown > bg + 0.1, "crown {crown} vs background {bg}");
    }

    #[test]
    fn same_seed_same_scene() {
        let a = generate_scene(&small(7, 10)).unwrap();
        let b = generate_scene(&small(7, 10)).unwrap();
        assert_eq!(a.raster, b.raster);
        assert_eq!(a.trunks, b.trunks);
        assert_eq!(a.predictions, b.predictions);
        let c = generate_scene(&small(8, 10)).unwrap();
        assert_ne!(a.raster, c.raster);
    }

    #[test]
    fn overcrowded_scene_is_infeasible() {
        let spec = SceneSpec {
            overlap_fraction: 0.0,
            ..small(3, 400)
        };
        assert!(matches!(
            generate_scene(&spec),
            Err(SynthError::InfeasibleSpec { wanted: 400, .. })
        ));
    }

    #[test]
    fn crowns_respect_overlap_budget() {
        let scene = generate_scene(&small(5, 15)).unwrap();
        let c = &scene.crowns_world;
        for i in 0..c.len() {
            for j in i + 1..c.len() {
                assert!(ios(&c[i], &c[j]) <= 0.1);
            }
        }
    }

    #[test]
    fn duplicates_are_nested() {
        let spec = SceneSpec {
            duplicate_fraction: 1.0,
            ..small(11, 8)
        };
        let scene = generate_scene(&spec).unwrap();
        assert_eq!(scene.duplicates.len(), 8);
        for &(a, b) in &scene.duplicates {
            let (p, d) = (&scene.predictions[a], &scene.predictions[b]);
            assert!((ios(&p.polygon, &d.polygon) - 1.0).abs() < 1e-9);
            assert!(d.confidence <= p.confidence);
        }
    }

    #[test]
    fn trunks_sit_near_centroids() {
        let scene = generate_scene(&small(2, 10)).unwrap();
        for (t, c) in scene.trunks.iter().zip(&scene.crowns_world) {
            assert!(Point2::new(t.x, t.y).distance(c.centroid()) <= 0.5 + 1e-12);
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(matches!(
            generate_scene(&SceneSpec {
                gsd: 0.0,
                ..small(0, 1)
            }),
            Err(SynthError::InvalidSpec(_))
        ));
        assert!(matches!(
            generate_scene(&SceneSpec {
                dieback: DiebackDist::Fixed(1.5),
                ..small(0, 1)
            }),
            Err(SynthError::InvalidSpec(_))
        ));
    }
}
