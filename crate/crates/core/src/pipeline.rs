//! End-to-end processing of one area (merge → match → index) and the
//! cross-area statistics run after all areas are done.
//!
//! Predictions and ground truth arrive in mosaic pixel space. The raster's
//! geotransform is applied once, to the merged crowns, and everything after
//! that is in world units.

use std::collections::HashMap;

use serde::Serialize;

use crate::evaluator::{crossval_report, EvalReport, Stage};
use crate::formats::{
    AreaDataset, AreaId, CocoImage, CrownFeature, CrownPrediction, CrownProperties, GeoRaster,
    GroundTruthCrown, TrunkRecord,
};
use crate::geometry::CrownPolygon;
use crate::indices::{index_value, IndexValue};
use crate::matcher::{match_crowns, MatchPair, MatchResult};
use crate::merger::{
    filter_confidence, nmm_merge_groups, DEFAULT_CONFIDENCE_THRESHOLD, DEFAULT_IOS_THRESHOLD,
};
use crate::stats::{
    agreement, regress, residual_vs_distance, spearman, Agreement, LabeledPoint, RegressionReport,
    ResidualDistance,
};
use crate::tiler::{lift_to_mosaic, TileOrigin};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PipelineParams {
    pub confidence_threshold: f64,
    pub ios_threshold: f64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            confidence_threshold: DEFAULT_CONFIDENCE_THRESHOLD,
            ios_threshold: DEFAULT_IOS_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AreaInputs {
    pub area_id: AreaId,
    pub raster: GeoRaster,
    /// Mosaic pixel frame.
    pub predictions: Vec<CrownPrediction>,
    pub trunks: Vec<TrunkRecord>,
    /// Mosaic pixel frame.
    pub ground_truth: Option<Vec<GroundTruthCrown>>,
}

/// Moves predictions made on tiles into the mosaic frame, using the
/// `origin` of the image each prediction names. Predictions on images
/// without an origin are taken as already mosaic-frame.
pub fn lift_predictions(preds: &[CrownPrediction], images: &[CocoImage]) -> Vec<CrownPrediction> {
    let by_id: HashMap<&str, &CocoImage> = images.iter().map(|i| (i.id.as_str(), i)).collect();
    preds
        .iter()
        .map(|p| match by_id.get(p.source_image_id.as_str()) {
            Some(img) if img.origin.is_some() => {
                let (x, y) = img.origin.unwrap();
                lift_to_mosaic(p, TileOrigin::new(x, y), (img.width, img.height))
            }
            _ => p.clone(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrownIndexRow {
    pub crown_id: String,
    pub tree_id: Option<String>,
    pub value: Option<IndexValue>,
    /// Why no value could be computed.
    pub error: Option<String>,
}

/// Index values for crowns, one row per crown.
fn index_rows(
    ids: &[String],
    crowns: &[CrownPolygon],
    raster: &GeoRaster,
    matches: &MatchResult,
) -> Vec<CrownIndexRow> {
    let tree_of: HashMap<usize, &str> = matches
        .pairs
        .iter()
        .map(|p| (p.crown_index, p.tree_id.as_str()))
        .collect();
    crowns
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let v = index_value(c, raster);
            CrownIndexRow {
                crown_id: ids[i].clone(),
                tree_id: tree_of.get(&i).map(|s| s.to_string()),
                error: v.as_ref().err().map(ToString::to_string),
                value: v.ok(),
            }
        })
        .collect()
}

/// `(defoliation, gcc)` per accepted match with a valid index, tree ids
/// qualified by area.
fn labelled_points(
    area: AreaId,
    trunks: &[TrunkRecord],
    matches: &MatchResult,
    rows: &[CrownIndexRow],
) -> Vec<LabeledPoint> {
    matches
        .pairs
        .iter()
        .filter_map(|p| {
            let v = rows[p.crown_index].value?;
            Some(LabeledPoint {
                tree_id: qualified(area, &p.tree_id),
                x: trunks[p.trunk_index].defoliation,
                y: v.gcc,
            })
        })
        .collect()
}

pub fn qualified(area: AreaId, tree_id: &str) -> String {
    format!("{area}:{tree_id}")
}

#[derive(Debug, Clone)]
pub struct ManualOutcome {
    /// Mosaic pixel frame.
    pub ground_truth: Vec<GroundTruthCrown>,
    pub matches: MatchResult,
    pub index: Vec<CrownIndexRow>,
    pub points: Vec<LabeledPoint>,
}

#[derive(Debug, Clone)]
pub struct AreaOutcome {
    pub area_id: AreaId,
    pub kept_after_filter: usize,
    /// Merged crowns in world coordinates, confidence descending.
    pub merged: Vec<CrownPrediction>,
    /// Merged crowns in mosaic pixel space (same order).
    pub merged_pixel: Vec<CrownPrediction>,
    pub members: Vec<Vec<usize>>,
    pub crown_ids: Vec<String>,
    pub matches: MatchResult,
    pub index: Vec<CrownIndexRow>,
    pub points: Vec<LabeledPoint>,
    pub manual: Option<ManualOutcome>,
}

pub fn process_area(area: &AreaInputs, params: &PipelineParams) -> AreaOutcome {
    let t = area.raster.transform;
    let to_world = |p: &CrownPolygon| {
        p.map_points(|q| t.apply_point(q))
            .expect("invertible transform")
    };
    let kept = filter_confidence(&area.predictions, params.confidence_threshold);
    let groups = nmm_merge_groups(&kept, params.ios_threshold);
    let merged_pixel: Vec<CrownPrediction> = groups.iter().map(|g| g.prediction.clone()).collect();
    let merged: Vec<CrownPrediction> = merged_pixel
        .iter()
        .map(|p| CrownPrediction {
            polygon: to_world(&p.polygon),
            ..p.clone()
        })
        .collect();
    let crown_ids: Vec<String> = (1..=merged.len()).map(|i| format!("c{i}")).collect();
    let outlines: Vec<CrownPolygon> = merged.iter().map(|p| p.polygon.clone()).collect();
    let matches = match_crowns(&outlines, &area.trunks);
    let index = index_rows(&crown_ids, &outlines, &area.raster, &matches);
    let points = labelled_points(area.area_id, &area.trunks, &matches, &index);

    let manual = area.ground_truth.as_ref().map(|gts| {
        let outlines: Vec<CrownPolygon> = gts.iter().map(|g| to_world(&g.polygon)).collect();
        let ids: Vec<String> = gts
            .iter()
            .map(|g| format!("gt{}", g.annotation_id))
            .collect();
        let matches = match_crowns(&outlines, &area.trunks);
        let index = index_rows(&ids, &outlines, &area.raster, &matches);
        let points = labelled_points(area.area_id, &area.trunks, &matches, &index);
        ManualOutcome {
            ground_truth: gts.clone(),
            matches,
            index,
            points,
        }
    });

    AreaOutcome {
        area_id: area.area_id,
        kept_after_filter: kept.len(),
        members: groups.into_iter().map(|g| g.members).collect(),
        merged,
        merged_pixel,
        crown_ids,
        matches,
        index,
        points,
        manual,
    }
}

impl AreaOutcome {
    /// Merged crowns as GeoJSON features, with match and index attributes.
    pub fn features(&self, trunks: &[TrunkRecord]) -> Vec<CrownFeature> {
        let pair_of: HashMap<usize, &MatchPair> = self
            .matches
            .pairs
            .iter()
            .map(|p| (p.crown_index, p))
            .collect();
        self.merged
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let pair = pair_of.get(&i);
                CrownFeature {
                    polygon: p.polygon.clone(),
                    properties: CrownProperties {
                        crown_id: Some(self.crown_ids[i].clone()),
                        confidence: Some(p.confidence),
                        gcc: self.index[i].value.map(|v| v.gcc),
                        matched_tree_id: pair.map(|m| m.tree_id.clone()),
                        defoliation: pair.map(|m| trunks[m.trunk_index].defoliation),
                    },
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Fallible<T> {
    pub value: Option<T>,
    pub error: Option<String>,
}

impl<T, E: ToString> From<Result<T, E>> for Fallible<T> {
    fn from(r: Result<T, E>) -> Self {
        match r {
            Ok(v) => Self {
                value: Some(v),
                error: None,
            },
            Err(e) => Self {
                value: None,
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    /// GCC of predicted crowns against field defoliation.
    pub predicted: Fallible<RegressionReport>,
    pub predicted_spearman: Option<f64>,
    pub residual_vs_distance: Fallible<ResidualDistance>,
    /// GCC of manual crowns against field defoliation.
    pub manual: Option<Fallible<RegressionReport>>,
    /// Manual GCC (x) against predicted GCC (y), paired by tree.
    pub agreement: Option<Fallible<Agreement>>,
    pub evaluation: Option<EvalReport>,
}

/// Cross-area statistics over finished areas.
pub fn summarize(outcomes: &[AreaOutcome]) -> PipelineReport {
    let points: Vec<LabeledPoint> = outcomes.iter().flat_map(|o| o.points.clone()).collect();
    let predicted = regress(&points, "defoliation", "gcc");
    let all_pairs = MatchResult {
        pairs: outcomes
            .iter()
            .flat_map(|o| {
                o.matches.pairs.iter().map(move |p| MatchPair {
                    tree_id: qualified(o.area_id, &p.tree_id),
                    ..p.clone()
                })
            })
            .collect(),
        ..Default::default()
    };
    let residual = match &predicted {
        Ok(rep) => residual_vs_distance(rep, &all_pairs).map_err(|e| e.to_string()),
        Err(e) => Err(e.to_string()),
    };
    let xs: Vec<f64> = points.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.y).collect();

    let has_manual = outcomes.iter().any(|o| o.manual.is_some());
    let manual_points: Vec<LabeledPoint> = outcomes
        .iter()
        .filter_map(|o| o.manual.as_ref())
        .flat_map(|m| m.points.clone())
        .collect();
    let (manual, agree) = if has_manual {
        let predicted_gcc: HashMap<&str, f64> =
            points.iter().map(|p| (p.tree_id.as_str(), p.y)).collect();
        let (a, b): (Vec<f64>, Vec<f64>) = manual_points
            .iter()
            .filter_map(|m| Some((m.y, *predicted_gcc.get(m.tree_id.as_str())?)))
            .unzip();
        (
            Some(regress(&manual_points, "defoliation", "gcc").into()),
            Some(agreement(&a, &b).into()),
        )
    } else {
        (None, None)
    };

    PipelineReport {
        predicted: predicted.into(),
        predicted_spearman: spearman(&xs, &ys),
        residual_vs_distance: residual.into(),
        manual,
        agreement: agree,
        evaluation: has_manual.then(|| evaluate(outcomes)),
    }
}

/// Orthomosaic-stage evaluation of merged crowns against ground truth, one
/// row per area that has ground truth.
pub fn evaluate(outcomes: &[AreaOutcome]) -> EvalReport {
    // Merged crowns span the whole mosaic, so each area is one image.
    let image = "mosaic".to_string();
    let datasets: Vec<AreaDataset> = outcomes
        .iter()
        .filter_map(|o| {
            let m = o.manual.as_ref()?;
            Some(AreaDataset {
                area_id: o.area_id,
                raster: None,
                ground_truth: m
                    .ground_truth
                    .iter()
                    .map(|c| GroundTruthCrown {
                        image_id: image.clone(),
                        ..c.clone()
                    })
                    .collect(),
                predictions: Some(
                    o.merged_pixel
                        .iter()
                        .map(|p| CrownPrediction {
                            source_image_id: image.clone(),
                            ..p.clone()
                        })
                        .collect(),
                ),
                trunks: None,
            })
        })
        .collect();
    crossval_report(&datasets, Stage::Orthomosaic)
}
