//! COCO-style average precision for a single "tree" category, and the
//! per-area cross-validation table.
//!
//! Detections are matched per image: in confidence order each one claims the
//! unmatched ground truth with the highest IoU at or above the threshold.
//! Matched flags from every image are then pooled, sorted by confidence, and
//! turned into a 101-point interpolated precision–recall area.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::formats::{AreaDataset, AreaId, CrownPrediction};
use crate::geometry::{iou, CrownPolygon};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("no ground truth: average precision is undefined")]
    NoGroundTruth,
    #[error("area {0}: no predictions supplied")]
    MissingPredictions(AreaId),
}

/// IoU thresholds 0.50, 0.55, ..., 0.95, each computed as `n / 100` so that
/// 0.6 is the same double as the literal.
pub fn iou_thresholds() -> [f64; 10] {
    std::array::from_fn(|k| (50 + 5 * k) as f64 / 100.0)
}

/// `ious[i][g]`: IoU between prediction `i` and ground truth `g`.
pub fn iou_matrix(preds: &[CrownPrediction], gts: &[CrownPolygon]) -> Vec<Vec<f64>> {
    preds
        .iter()
        .map(|p| {
            gts.iter()
                .map(|g| {
                    if p.polygon.bbox().intersects(&g.bbox()) {
                        iou(&p.polygon, g)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// One image's detections against its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageEval {
    pub confidences: Vec<f64>,
    pub ious: Vec<Vec<f64>>,
    pub n_gt: usize,
}

impl ImageEval {
    pub fn new(preds: &[CrownPrediction], gts: &[CrownPolygon]) -> Self {
        Self {
            confidences: preds.iter().map(|p| p.confidence).collect(),
            ious: iou_matrix(preds, gts),
            n_gt: gts.len(),
        }
    }

    /// Stable confidence-descending order.
    fn order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.confidences.len()).collect();
        order.sort_by(|&a, &b| self.confidences[b].total_cmp(&self.confidences[a]));
        order
    }

    /// True-positive flag per prediction (input order) at `threshold`.
    pub fn match_flags(&self, threshold: f64) -> Vec<bool> {
        let mut taken = vec![false; self.n_gt];
        let mut tp = vec![false; self.confidences.len()];
        for i in self.order() {
            let mut best: Option<(usize, f64)> = None;
            for (g, &v) in self.ious[i].iter().enumerate() {
                if taken[g] || v < threshold {
                    continue;
                }
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((g, v));
                }
            }
            if let Some((g, _)) = best {
                taken[g] = true;
                tp[i] = true;
            }
        }
        tp
    }
}

/// 101-point interpolated AP from detections `(confidence, is_tp)`.
/// Detections are stably sorted by confidence, so equal scores keep the
/// order given.
pub fn interpolated_ap(detections: &[(f64, bool)], n_gt: usize) -> Result<f64, EvalError> {
    if n_gt == 0 {
        return Err(EvalError::NoGroundTruth);
    }
    let mut dets = detections.to_vec();
    dets.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut tps = Vec::with_capacity(dets.len());
    let mut precision = Vec::with_capacity(dets.len());
    let mut tp = 0usize;
    for (k, &(_, hit)) in dets.iter().enumerate() {
        tp += hit as usize;
        tps.push(tp);
        precision.push(tp as f64 / (k + 1) as f64);
    }
    for k in (1..precision.len()).rev() {
        precision[k - 1] = precision[k - 1].max(precision[k]);
    }
    // Recall level r = j/100 is reached at the first rank with
    // tp/n_gt >= j/100, compared in integers.
    let mut sum = 0.0;
    let mut rank = 0;
    for j in 0..=100usize {
        while rank < tps.len() && tps[rank] * 100 < j * n_gt {
            rank += 1;
        }
        if rank < tps.len() {
            sum += precision[rank];
        }
    }
    Ok(sum / 101.0)
}

/// AP pooled over images at one IoU threshold.
pub fn pooled_ap(images: &[ImageEval], threshold: f64) -> Result<f64, EvalError> {
    let mut dets = Vec::new();
    for img in images {
        let flags = img.match_flags(threshold);
        for i in img.order() {
            dets.push((img.confidences[i], flags[i]));
        }
    }
    interpolated_ap(&dets, images.iter().map(|i| i.n_gt).sum())
}

pub fn average_precision(
    preds: &[CrownPrediction],
    gts: &[CrownPolygon],
    iou_threshold: f64,
) -> Result<f64, EvalError> {
    pooled_ap(&[ImageEval::new(preds, gts)], iou_threshold)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapScores {
    pub map: f64,
    pub map50: f64,
    pub map75: f64,
}

pub fn pooled_map(images: &[ImageEval]) -> Result<MapScores, EvalError> {
    let mut aps = [0.0; 10];
    for (ap, t) in aps.iter_mut().zip(iou_thresholds()) {
        *ap = pooled_ap(images, t)?;
    }
    // AP falls with the threshold, so the mean cannot exceed AP50; the cap
    // only absorbs rounding in the sum.
    Ok(MapScores {
        map: (aps.iter().sum::<f64>() / 10.0).min(aps[0]),
        map50: aps[0],
        map75: aps[5],
    })
}

pub fn map_coco(preds: &[CrownPrediction], gts: &[CrownPolygon]) -> Result<MapScores, EvalError> {
    pooled_map(&[ImageEval::new(preds, gts)])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Tiled,
    Orthomosaic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AreaRow {
    pub area_id: u8,
    pub stage: Stage,
    pub map: f64,
    pub map50: f64,
    pub map75: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub map: MeanStd,
    pub map50: MeanStd,
    pub map75: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub stage: Stage,
    pub rows: Vec<AreaRow>,
    /// Areas left out of the table and why.
    pub skipped: Vec<(u8, String)>,
    pub summary: Option<Summary>,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len() as f64;
    let rough = values.iter().sum::<f64>() / n;
    let mean = rough + values.iter().map(|v| v - rough).sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    MeanStd {
        mean,
        std: var.sqrt(),
    }
}

pub fn summarize(rows: &[AreaRow]) -> Option<Summary> {
    if rows.is_empty() {
        return None;
    }
    let col = |f: fn(&AreaRow) -> f64| mean_std(&rows.iter().map(f).collect::<Vec<_>>());
    Some(Summary {
        map: col(|r| r.map),
        map50: col(|r| r.map50),
        map75: col(|r| r.map75),
    })
}

/// Scores one area. Tiled: unweighted mean of per-image mAP over images that
/// have ground truth. Orthomosaic: detections pooled over the area's images.
pub fn evaluate_area(area: &AreaDataset, stage: Stage) -> Result<AreaRow, EvalError> {
    let preds = area
        .predictions
        .as_ref()
        .ok_or(EvalError::MissingPredictions(area.area_id))?;
    let mut by_image: BTreeMap<&str, (Vec<CrownPrediction>, Vec<CrownPolygon>)> = BTreeMap::new();
    for gt in &area.ground_truth {
        by_image
            .entry(gt.image_id.as_str())
            .or_default()
            .1
            .push(gt.polygon.clone());
    }
    for p in preds {
        by_image
            .entry(p.source_image_id.as_str())
            .or_default()
            .0
            .push(p.clone());
    }
    let images: Vec<ImageEval> = by_image
        .values()
        .map(|(p, g)| ImageEval::new(p, g))
        .collect();
    let scores = match stage {
        Stage::Orthomosaic => pooled_map(&images)?,
        Stage::Tiled => {
            let per_tile: Vec<MapScores> = images
                .iter()
                .filter(|i| i.n_gt > 0)
                .map(|i| pooled_map(std::slice::from_ref(i)))
                .collect::<Result<_, _>>()?;
            if per_tile.is_empty() {
                return Err(EvalError::NoGroundTruth);
            }
            let n = per_tile.len() as f64;
            MapScores {
                map: per_tile.iter().map(|s| s.map).sum::<f64>() / n,
                map50: per_tile.iter().map(|s| s.map50).sum::<f64>() / n,
                map75: per_tile.iter().map(|s| s.map75).sum::<f64>() / n,
            }
        }
    };
    Ok(AreaRow {
        area_id: area.area_id.get(),
        stage,
        map: scores.map,
        map50: scores.map50,
        map75: scores.map75,
    })
}

/// One row per area (ordered by area id) plus the mean ± std summary.
/// Areas that cannot be scored are listed in `skipped`.
pub fn crossval_report(datasets: &[AreaDataset], stage: Stage) -> EvalReport {
    let mut sorted: Vec<&AreaDataset> = datasets.iter().collect();
    sorted.sort_by_key(|d| d.area_id);
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for area in sorted {
        match evaluate_area(area, stage) {
            Ok(row) => rows.push(row),
            Err(e) => skipped.push((area.area_id.get(), e.to_string())),
        }
    }
    let summary = summarize(&rows);
    EvalReport {
        stage,
        rows,
        skipped,
        summary,
    }
}

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("area,stage,map,map50,map75\n");
        let stage = match self.stage {
            Stage::Tiled => "tiled",
            Stage::Orthomosaic => "orthomosaic",
        };
        for r in &self.rows {
            out += &format!(
                "{},{stage},{:.6},{:.6},{:.6}\n",
                r.area_id, r.map, r.map50, r.map75
            );
        }
        if let Some(s) = &self.summary {
            out += &format!(
                "mean,{stage},{:.6},{:.6},{:.6}\n",
                s.map.mean, s.map50.mean, s.map75.mean
            );
            out += &format!(
                "std,{stage},{:.6},{:.6},{:.6}\n",
                s.map.std, s.map50.std, s.map75.std
            );
        }
        out
    }

    /// Aligned text table in the usual mAP / mAP50 / mAP75 layout.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<6} {:>14} {:>14} {:>14}\n",
            "Area", "mAP", "mAP50", "mAP75"
        );
        for r in &self.rows {
            out += &format!(
                "{:<6} {:>14.3} {:>14.3} {:>14.3}\n",
                r.area_id, r.map, r.map50, r.map75
            );
        }
        if let Some(s) = &self.summary {
            let cell = |m: MeanStd| format!("{:.3}±{:.3}", m.mean, m.std);
            out += &format!(
                "{:<6} {:>14} {:>14} {:>14}\n",
                "Mean",
                cell(s.map),
                cell(s.map50),
                cell(s.map75)
            );
        }
        for (id, why) in &self.skipped {
            out += &format!("area {id} skipped: {why}\n");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::GroundTruthCrown;

    fn pred(x0: f64, x1: f64, c: f64) -> CrownPrediction {
        CrownPrediction {
            polygon: CrownPolygon::rect(x0, 0.0, x1, 10.0).unwrap(),
            confidence: c,
            source_image_id: "1".into(),
        }
    }

    fn gt(x0: f64, x1: f64) -> CrownPolygon {
        CrownPolygon::rect(x0, 0.0, x1, 10.0).unwrap()
    }

    #[test]
    fn thresholds_are_exact() {
        let t = iou_thresholds();
        assert_eq!(t[0], 0.5);
        assert_eq!(t[2], 0.6);
        assert_eq!(t[5], 0.75);
        assert_eq!(t[9], 0.95);
    }

    #[test]
    fn perfect_prediction() {
        let s = map_coco(&[pred(0.0, 10.0, 0.9)], &[gt(0.0, 10.0)]).unwrap();
        assert_eq!((s.map, s.map50, s.map75), (1.0, 1.0, 1.0));
    }

    #[test]
    fn no_predictions_is_zero() {
        assert_eq!(average_precision(&[], &[gt(0.0, 1.0)], 0.5), Ok(0.0));
    }

    #[test]
    fn no_ground_truth_is_undefined() {
        assert_eq!(
            average_precision(&[pred(0.0, 1.0, 0.5)], &[], 0.5),
            Err(EvalError::NoGroundTruth)
        );
    }

    #[test]
    fn iou_point_six() {
        let p = pred(0.0, 6.0, 0.9);
        let g = gt(0.0, 10.0);
        assert_eq!(iou(&p.polygon, &g), 0.6);
        let s = map_coco(&[p], &[g]).unwrap();
        assert!((s.map - 0.3).abs() < 1e-12);
        assert_eq!(s.map50, 1.0);
        assert_eq!(s.map75, 0.0);
    }

    #[test]
    fn disjoint_predictions() {
        let s = map_coco(&[pred(20.0, 30.0, 0.9)], &[gt(0.0, 10.0)]).unwrap();
        assert_eq!((s.map, s.map50, s.map75), (0.0, 0.0, 0.0));
    }

    #[test]
    fn false_positive_ranked_first_halves_precision() {
        // FP at rank 1, TP at rank 2: precision 0.5 at every recall level.
        let preds = [pred(20.0, 30.0, 0.9), pred(0.0, 10.0, 0.8)];
        assert_eq!(average_precision(&preds, &[gt(0.0, 10.0)], 0.5), Ok(0.5));
    }

    #[test]
    fn duplicate_does_not_help() {
        let g = [gt(0.0, 10.0)];
        let one = average_precision(&[pred(0.0, 10.0, 0.9)], &g, 0.5).unwrap();
        let two =
            average_precision(&[pred(0.0, 10.0, 0.9), pred(0.0, 10.0, 0.8)], &g, 0.5).unwrap();
        assert!(two <= one);
    }

    #[test]
    fn half_recall() {
        // One of two crowns found: precision 1 for recall levels 0..=0.5.
        let ap = average_precision(
            &[pred(0.0, 10.0, 0.9)],
            &[gt(0.0, 10.0), gt(50.0, 60.0)],
            0.5,
        )
        .unwrap();
        assert_eq!(ap, 51.0 / 101.0);
    }

    #[test]
    fn population_std() {
        let m = mean_std(&[0.4, 0.4, 0.4]);
        assert!((m.mean - 0.4).abs() < 1e-15);
        assert_eq!(m.std, 0.0);
        assert_eq!(mean_std(&[0.2]).std, 0.0);
        let m = mean_std(&[1.0, 3.0]);
        assert_eq!((m.mean, m.std), (2.0, 1.0));
    }

    fn area(
        id: u8,
        preds: Option<Vec<CrownPrediction>>,
        gts: Vec<(&str, CrownPolygon)>,
    ) -> AreaDataset {
        AreaDataset {
            area_id: AreaId::new(id).unwrap(),
            raster: None,
            ground_truth: gts
                .into_iter()
                .enumerate()
                .map(|(i, (img, polygon))| GroundTruthCrown {
                    annotation_id: i.to_string(),
                    image_id: img.into(),
                    polygon,
                })
                .collect(),
            predictions: preds,
            trunks: None,
        }
    }

    #[test]
    fn tiled_stage_averages_tiles_unweighted() {
        let mut miss = pred(50.0, 60.0, 0.9);
        miss.source_image_id = "2".into();
        let a = area(
            3,
            Some(vec![pred(0.0, 10.0, 0.9), miss]),
            vec![
                ("1", gt(0.0, 10.0)),
                ("2", gt(0.0, 10.0)),
                ("2", gt(20.0, 30.0)),
            ],
        );
        let tiled = evaluate_area(&a, Stage::Tiled).unwrap();
        assert_eq!(tiled.map50, 0.5);
        // Pooled: one hit out of three crowns, precision 1/2 at recall 1/3.
        let pooled = evaluate_area(&a, Stage::Orthomosaic).unwrap();
        assert!(pooled.map50 < tiled.map50);
    }

    #[test]
    fn report_orders_areas_and_skips_missing() {
        let report = crossval_report(
            &[
                area(
                    5,
                    Some(vec![pred(0.0, 10.0, 0.9)]),
                    vec![("1", gt(0.0, 10.0))],
                ),
                area(2, None, vec![("1", gt(0.0, 10.0))]),
                area(1, Some(vec![]), vec![("1", gt(0.0, 10.0))]),
            ],
            Stage::Orthomosaic,
        );
        let ids: Vec<u8> = report.rows.iter().map(|r| r.area_id).collect();
        assert_eq!(ids, vec![1, 5]);
        assert_eq!(report.skipped.len(), 1);
        assert_eq!(report.skipped[0].0, 2);
        let s = report.summary.unwrap();
        assert_eq!((s.map50.mean, s.map50.std), (0.5, 0.5));
        assert!(report
            .to_csv()
            .starts_with("area,stage,map,map50,map75\n1,orthomosaic"));
    }
}
