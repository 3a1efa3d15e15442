//! Readers and writers for every on-disk artifact the pipeline touches.
//!
//! COCO coordinates are pixel-space (pixel corners at integers). World
//! coordinates only appear after a [`GeoTransform`] is applied, and GeoJSON is
//! always world-space.

mod coco;
mod geojson;
mod raster;
mod trunks;
mod world;

use std::num::NonZeroU8;

use thiserror::Error;

use crate::geometry::CrownPolygon;

pub use coco::{
    parse_coco, parse_coco_results, write_coco, write_coco_results, CocoDataset, CocoImage,
    GroundTruthCrown, IngestReport, PredictionSet,
};
pub use geojson::{read_geojson, write_geojson, CrownFeature, CrownProperties};
pub use raster::{decode_png, encode_png, read_raster, GeoRaster};
pub use trunks::{parse_trunk_csv, parse_trunk_csv_with, write_trunk_csv, DefoliationUnit};
pub use world::{parse_world_file, write_world_file, GeoTransform};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed JSON: {0}")]
    MalformedJson(#[from] serde_json::Error),
    #[error("invalid document structure: {0}")]
    Schema(String),
    #[error("annotation {0}: RLE segmentations are not supported, use polygon form")]
    UnsupportedSegmentation(String),
    #[error("prediction {index}: score {score} outside [0, 1]")]
    ScoreOutOfRange { index: usize, score: f64 },
    #[error("world file must have exactly 6 values, found {0}")]
    WrongLineCount(usize),
    #[error("line {line}: cannot parse number {text:?}")]
    UnparseableNumber { line: usize, text: String },
    #[error("geotransform is singular (determinant 0)")]
    SingularTransform,
    #[error("missing column {0:?} in header")]
    MissingColumn(&'static str),
    #[error("line {line}: defoliation {value} outside [0, 1]")]
    DefoliationOutOfRange { line: usize, value: f64 },
    #[error("line {line}: duplicate tree_id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("unsupported pixel format ({0}); only 8-bit RGB PNG is accepted")]
    UnsupportedPixelFormat(String),
    #[error("corrupt image: {0}")]
    CorruptImage(String),
}

/// A crown outline with the detector's confidence attached.
#[derive(Debug, Clone, PartialEq)]
pub struct CrownPrediction {
    pub polygon: CrownPolygon,
    pub confidence: f64,
    pub source_image_id: String,
}

/// One surveyed trunk. `defoliation` is a fraction in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrunkRecord {
    pub tree_id: String,
    pub x: f64,
    pub y: f64,
    pub defoliation: f64,
}

/// Identifier of one surveyed area (one orthomosaic). Areas are numbered
/// 1..=9 and each area is its own cross-validation fold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AreaId(NonZeroU8);

impl AreaId {
    pub const MAX: u8 = 9;

    pub fn new(id: u8) -> Option<Self> {
        if id > Self::MAX {
            return None;
        }
        NonZeroU8::new(id).map(Self)
    }

    pub fn get(self) -> u8 {
        self.0.get()
    }

    /// Geographic cross-validation: the fold that holds this area out.
    pub fn fold(self) -> u8 {
        self.get()
    }
}

impl std::fmt::Display for AreaId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Everything known about one area.
#[derive(Debug, Clone)]
pub struct AreaDataset {
    pub area_id: AreaId,
    pub raster: Option<std::path::PathBuf>,
    pub ground_truth: Vec<GroundTruthCrown>,
    pub predictions: Option<Vec<CrownPrediction>>,
    pub trunks: Option<Vec<TrunkRecord>>,
}
