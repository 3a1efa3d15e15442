//! Greedy crown-to-trunk matching with the square-root-of-area discard rule.
//!
//! The full centroid–trunk distance matrix is built once. The globally
//! smallest remaining entry becomes a pair and its row and column leave the
//! pool; this repeats until trunks or crowns run out. Equal distances go to
//! the lower trunk index, then the lower crown index. Only afterwards are
//! pairs whose distance exceeds `sqrt(crown area)` moved to `discarded`; they
//! still consumed their crown and trunk.

use serde::Serialize;

use crate::formats::TrunkRecord;
use crate::geometry::{CrownPolygon, Point2};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchPair {
    pub tree_id: String,
    pub trunk_index: usize,
    pub crown_index: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MatchResult {
    /// Accepted pairs, in the order they were extracted.
    pub pairs: Vec<MatchPair>,
    /// Pairs rejected by the discard rule, in extraction order.
    pub discarded: Vec<MatchPair>,
    pub unmatched_trunks: Vec<String>,
    pub unmatched_crowns: Vec<usize>,
}

impl MatchResult {
    pub fn pair_for_tree(&self, tree_id: &str) -> Option<&MatchPair> {
        self.pairs.iter().find(|p| p.tree_id == tree_id)
    }
}

pub fn match_crowns(crowns: &[CrownPolygon], trunks: &[TrunkRecord]) -> MatchResult {
    let centroids: Vec<Point2> = crowns.iter().map(CrownPolygon::centroid).collect();
    let mut entries: Vec<(f64, usize, usize)> = Vec::with_capacity(trunks.len() * crowns.len());
    for (t, trunk) in trunks.iter().enumerate() {
        let tp = Point2::new(trunk.x, trunk.y);
        for (c, centroid) in centroids.iter().enumerate() {
            entries.push((tp.distance(*centroid), t, c));
        }
    }
    // Sorting by (distance, trunk, crown) and sweeping is the same as
    // repeatedly taking the first minimum of the shrinking matrix.
    entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut trunk_used = vec![false; trunks.len()];
    let mut crown_used = vec![false; crowns.len()];
    let mut extracted = Vec::new();
    let limit = trunks.len().min(crowns.len());
    for (d, t, c) in entries {
        if extracted.len() == limit {
            break;
        }
        if trunk_used[t] || crown_used[c] {
            continue;
        }
        trunk_used[t] = true;
        crown_used[c] = true;
        extracted.push(MatchPair {
            tree_id: trunks[t].tree_id.clone(),
            trunk_index: t,
            crown_index: c,
            distance: d,
        });
    }

    let (pairs, discarded) = extracted
        .into_iter()
        .partition(|p| p.distance <= crowns[p.crown_index].area().sqrt());
    MatchResult {
        pairs,
        discarded,
        unmatched_trunks: trunks
            .iter()
            .zip(&trunk_used)
            .filter(|(_, used)| !**used)
            .map(|(t, _)| t.tree_id.clone())
            .collect(),
        unmatched_crowns: (0..crowns.len()).filter(|&c| !crown_used[c]).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trunk(id: &str, x: f64, y: f64) -> TrunkRecord {
        TrunkRecord {
            tree_id: id.into(),
            x,
            y,
            defoliation: 0.0,
        }
    }

    /// Square of the given area centred on (cx, cy).
    fn crown(cx: f64, cy: f64, area: f64) -> CrownPolygon {
        let h = area.sqrt() / 2.0;
        CrownPolygon::rect(cx - h, cy - h, cx + h, cy + h).unwrap()
    }

    #[test]
    fn close_pair_is_kept() {
        let r = match_crowns(&[crown(0.5, 0.0, 4.0)], &[trunk("t", 0.0, 0.0)]);
        assert_eq!(r.pairs.len(), 1);
        assert!((r.pairs[0].distance - 0.5).abs() < 1e-12);
        assert!(r.discarded.is_empty());
    }

    #[test]
    fn far_pair_is_discarded() {
        let r = match_crowns(&[crown(3.0, 0.0, 4.0)], &[trunk("t", 0.0, 0.0)]);
        assert!(r.pairs.is_empty());
        assert_eq!(r.discarded.len(), 1);
        assert!((r.discarded[0].distance - 3.0).abs() < 1e-12);
        assert!(r.unmatched_crowns.is_empty() && r.unmatched_trunks.is_empty());
    }

    #[test]
    fn exactly_sqrt_area_is_kept() {
        let r = match_crowns(&[crown(2.0, 0.0, 4.0)], &[trunk("t", 0.0, 0.0)]);
        assert_eq!(r.pairs.len(), 1);
    }

    #[test]
    fn global_minimum_goes_first() {
        let trunks = [trunk("T1", 0.0, 0.0), trunk("T2", 1.0, 0.0)];
        let crowns = [crown(0.4, 0.0, 100.0), crown(0.9, 0.0, 100.0)];
        let r = match_crowns(&crowns, &trunks);
        let got: Vec<(&str, usize)> = r
            .pairs
            .iter()
            .map(|p| (p.tree_id.as_str(), p.crown_index))
            .collect();
        assert_eq!(got, vec![("T2", 1), ("T1", 0)]);
        assert!((r.pairs[0].distance - 0.1).abs() < 1e-12);
        assert!((r.pairs[1].distance - 0.4).abs() < 1e-12);
    }

    #[test]
    fn leftovers_are_reported() {
        let trunks = [
            trunk("a", 0.0, 0.0),
            trunk("b", 50.0, 0.0),
            trunk("c", 99.0, 99.0),
        ];
        let crowns = [crown(49.0, 0.0, 9.0)];
        let r = match_crowns(&crowns, &trunks);
        assert_eq!(r.pairs[0].tree_id, "b");
        assert_eq!(r.unmatched_trunks, vec!["a".to_string(), "c".to_string()]);

        let r = match_crowns(&[crown(0.0, 0.0, 1.0), crown(9.0, 9.0, 1.0)], &trunks[..1]);
        assert_eq!(r.unmatched_crowns, vec![1]);
    }

    #[test]
    fn ties_go_to_lower_trunk_then_crown() {
        let trunks = [trunk("a", -1.0, 0.0), trunk("b", 1.0, 0.0)];
        let crowns = [crown(0.0, 0.0, 16.0)];
        let r = match_crowns(&crowns, &trunks);
        assert_eq!(r.pairs[0].tree_id, "a");

        let crowns = [crown(-1.0, 0.0, 16.0), crown(1.0, 0.0, 16.0)];
        let r = match_crowns(&crowns, &[trunk("m", 0.0, 0.0)]);
        assert_eq!(r.pairs[0].crown_index, 0);
    }

    #[test]
    fn empty_inputs() {
        assert_eq!(match_crowns(&[], &[]), MatchResult::default());
        let r = match_crowns(&[], &[trunk("a", 0.0, 0.0)]);
        assert_eq!(r.unmatched_trunks, vec!["a".to_string()]);
    }
}
