//! Recombination of mosaic-frame predictions: confidence filtering followed
//! by greedy non-maximum merging on intersection-over-smaller.
//!
//! Predictions are ranked once, by confidence descending with ties broken by
//! larger area and then input order. Merging always folds the lower-ranked
//! group into the higher-ranked one, so a group keeps the rank (and
//! confidence, which is then the group maximum) of its best member. The
//! procedure is the fixed point of "merge the first qualifying pair in rank
//! order": whenever a keeper grows, previously finished keepers are checked
//! against it again, so no two output crowns overlap at or above the
//! threshold.

use crate::formats::CrownPrediction;
use crate::geometry::{intersection_area, union_geometry, CrownPolygon};

pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.3;
pub const DEFAULT_IOS_THRESHOLD: f64 = 0.5;

/// Keeps predictions with `confidence >= threshold`, in input order.
pub fn filter_confidence(preds: &[CrownPrediction], threshold: f64) -> Vec<CrownPrediction> {
    preds
        .iter()
        .filter(|p| p.confidence >= threshold)
        .cloned()
        .collect()
}

/// A merged crown and the input indices folded into it (first entry is the
/// keeper).
#[derive(Debug, Clone, PartialEq)]
pub struct MergedCrown {
    pub prediction: CrownPrediction,
    pub members: Vec<usize>,
}

/// Rank order used by the merger: confidence descending, larger area, then
/// lower input index.
pub fn merge_rank(preds: &[CrownPrediction]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&i, &j| {
        preds[j]
            .confidence
            .total_cmp(&preds[i].confidence)
            .then_with(|| preds[j].polygon.area().total_cmp(&preds[i].polygon.area()))
            .then(i.cmp(&j))
    });
    order
}

struct Group {
    polygon: CrownPolygon,
    members: Vec<usize>,
    alive: bool,
}

fn qualifies(a: &CrownPolygon, b: &CrownPolygon, threshold: f64) -> bool {
    if !a.bbox().intersects(&b.bbox()) {
        return false;
    }
    let inter = intersection_area(a, b);
    inter > 0.0 && inter / a.area().min(b.area()) >= threshold
}

fn absorb(groups: &mut [Group], keeper: usize, other: usize) {
    let taken = std::mem::take(&mut groups[other].members);
    groups[other].alive = false;
    // A union that cannot be traced cleanly keeps the keeper outline.
    if let Ok(u) = union_geometry(&groups[keeper].polygon, &groups[other].polygon) {
        groups[keeper].polygon = u;
    }
    groups[keeper].members.extend(taken);
}

/// Greedy non-maximum merging. Output is sorted by confidence descending.
pub fn nmm_merge(preds: &[CrownPrediction], ios_threshold: f64) -> Vec<CrownPrediction> {
    nmm_merge_groups(preds, ios_threshold)
        .into_iter()
        .map(|m| m.prediction)
        .collect()
}

/// As [`nmm_merge`], also reporting which inputs went into each output.
pub fn nmm_merge_groups(preds: &[CrownPrediction], ios_threshold: f64) -> Vec<MergedCrown> {
    let order = merge_rank(preds);
    let mut groups: Vec<Group> = order
        .iter()
        .map(|&i| Group {
            polygon: preds[i].polygon.clone(),
            members: vec![i],
            alive: true,
        })
        .collect();
    let n = groups.len();

    let mut k = 0;
    while k < n {
        if !groups[k].alive {
            k += 1;
            continue;
        }
        let partner = (k + 1..n).find(|&j| {
            groups[j].alive && qualifies(&groups[k].polygon, &groups[j].polygon, ios_threshold)
        });
        let Some(j) = partner else {
            k += 1;
            continue;
        };
        absorb(&mut groups, k, j);
        // The keeper grew: an earlier keeper may now qualify against it.
        let mut grown = k;
        while let Some(e) = (0..grown).find(|&e| {
            groups[e].alive && qualifies(&groups[e].polygon, &groups[grown].polygon, ios_threshold)
        }) {
            absorb(&mut groups, e, grown);
            grown = e;
        }
        k = grown;
    }

    groups
        .into_iter()
        .filter(|g| g.alive)
        .map(|g| {
            let best = &preds[g.members[0]];
            MergedCrown {
                prediction: CrownPrediction {
                    polygon: g.polygon,
                    confidence: best.confidence,
                    source_image_id: best.source_image_id.clone(),
                },
                members: g.members,
            }
        })
        .collect()
}
