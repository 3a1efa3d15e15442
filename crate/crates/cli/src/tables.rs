//! CSV tables exchanged between subcommands.

use std::collections::HashMap;

use crown_dieback::indices::IndexKind;
use crown_dieback::matcher::MatchResult;
use crown_dieback::pipeline::CrownIndexRow;
use crown_dieback::stats::{RegressionReport, ResidualDistance};
use serde::{Deserialize, Serialize};

use crate::failure::{Classify, Outcome};

fn to_csv<T: Serialize>(rows: &[T], header: &[&str]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(true)
        .from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(header).expect("in-memory write");
    }
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRow {
    pub tree_id: String,
    pub crown_id: String,
    pub distance: f64,
    pub discarded: bool,
}

pub fn match_rows(result: &MatchResult, crown_ids: &[String]) -> Vec<MatchRow> {
    let row = |p: &crown_dieback::matcher::MatchPair, discarded| MatchRow {
        tree_id: p.tree_id.clone(),
        crown_id: crown_ids[p.crown_index].clone(),
        distance: p.distance,
        discarded,
    };
    result
        .pairs
        .iter()
        .map(|p| row(p, false))
        .chain(result.discarded.iter().map(|p| row(p, true)))
        .collect()
}

pub fn write_matches(rows: &[MatchRow]) -> Vec<u8> {
    to_csv(rows, &["tree_id", "crown_id", "distance", "discarded"])
}

pub fn read_matches(bytes: &[u8]) -> Outcome<Vec<MatchRow>> {
    csv::Reader::from_reader(bytes)
        .deserialize()
        .collect::<Result<_, _>>()
        .invalid("match table")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRow {
    pub crown_id: String,
    pub tree_id: Option<String>,
    pub gcc: Option<f64>,
    pub exg: Option<f64>,
    pub pixel_count: Option<u64>,
}

pub fn index_table(rows: &[CrownIndexRow], kinds: &[IndexKind]) -> Vec<IndexRow> {
    rows.iter()
        .map(|r| IndexRow {
            crown_id: r.crown_id.clone(),
            tree_id: r.tree_id.clone(),
            gcc: r
                .value
                .filter(|_| kinds.contains(&IndexKind::Gcc))
                .map(|v| v.gcc),
            exg: r
                .value
                .filter(|_| kinds.contains(&IndexKind::Exg))
                .map(|v| v.exg),
            pixel_count: r.value.map(|v| v.pixel_count),
        })
        .collect()
}

pub fn write_index(rows: &[IndexRow]) -> Vec<u8> {
    to_csv(rows, &["crown_id", "tree_id", "gcc", "exg", "pixel_count"])
}

pub fn read_index(bytes: &[u8]) -> Outcome<Vec<IndexRow>> {
    csv::Reader::from_reader(bytes)
        .deserialize()
        .collect::<Result<_, _>>()
        .invalid("index table")
}

impl IndexRow {
    pub fn value(&self, kind: IndexKind) -> Option<f64> {
        match kind {
            IndexKind::Gcc => self.gcc,
            IndexKind::Exg => self.exg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointRow {
    pub tree_id: String,
    pub x: f64,
    pub y: f64,
    pub fitted: f64,
    pub residual: f64,
    pub distance: Option<f64>,
}

/// Plot-ready regression table: observation, fit, residual, match distance.
pub fn point_rows(
    report: &RegressionReport,
    residuals: Option<&ResidualDistance>,
) -> Vec<PointRow> {
    let dist: HashMap<&str, f64> = residuals
        .map(|r| {
            r.rows
                .iter()
                .map(|d| (d.tree_id.as_str(), d.match_distance))
                .collect()
        })
        .unwrap_or_default();
    report
        .rows
        .iter()
        .map(|r| PointRow {
            tree_id: r.tree_id.clone(),
            x: r.x,
            y: r.y,
            fitted: r.fitted,
            residual: r.residual,
            distance: dist.get(r.tree_id.as_str()).copied(),
        })
        .collect()
}

pub fn write_points(rows: &[PointRow]) -> Vec<u8> {
    to_csv(
        rows,
        &["tree_id", "x", "y", "fitted", "residual", "distance"],
    )
}
