//! COCO instance files (ground truth) and COCO results files (predictions),
//! polygon segmentations only.

use serde::Deserialize;
use serde_json::{json, Value};

use crate::geometry::{union_geometry, CrownPolygon, Point2};

use super::{CrownPrediction, FormatError};

#[derive(Debug, Clone, PartialEq)]
pub struct CocoImage {
    pub id: String,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
    /// Top-left pixel of this image inside its mosaic, when the image is a tile.
    pub origin: Option<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthCrown {
    pub annotation_id: String,
    pub image_id: String,
    pub polygon: CrownPolygon,
}

/// Counts of input that was skipped or simplified on ingest.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestReport {
    /// Segmentations with fewer than three points.
    pub degenerate: usize,
    /// Segmentations that are self-intersecting or otherwise not a simple ring.
    pub invalid: usize,
    /// Parts of multi-part segmentations that did not overlap the rest.
    pub dropped_parts: usize,
}

impl IngestReport {
    pub fn is_clean(&self) -> bool {
        *self == IngestReport::default()
    }
}

#[derive(Debug, Clone, Default)]
pub struct CocoDataset {
    pub images: Vec<CocoImage>,
    pub crowns: Vec<GroundTruthCrown>,
    pub report: IngestReport,
}

impl CocoDataset {
    pub fn crowns_for<'a>(
        &'a self,
        image_id: &'a str,
    ) -> impl Iterator<Item = &'a GroundTruthCrown> + 'a {
        self.crowns.iter().filter(move |c| c.image_id == image_id)
    }

    pub fn image(&self, id: &str) -> Option<&CocoImage> {
        self.images.iter().find(|i| i.id == id)
    }
}

#[derive(Debug, Clone, Default)]
pub struct PredictionSet {
    pub predictions: Vec<CrownPrediction>,
    pub report: IngestReport,
}

#[derive(Deserialize)]
struct RawCoco {
    images: Vec<RawImage>,
    annotations: Vec<RawAnnotation>,
}

#[derive(Deserialize)]
struct RawImage {
    id: Value,
    #[serde(default)]
    file_name: String,
    #[serde(default)]
    width: u32,
    #[serde(default)]
    height: u32,
    #[serde(default)]
    origin_x: Option<u32>,
    #[serde(default)]
    origin_y: Option<u32>,
}

#[derive(Deserialize)]
struct RawAnnotation {
    #[serde(default)]
    id: Option<Value>,
    image_id: Value,
    segmentation: Value,
}

#[derive(Deserialize)]
struct RawResult {
    image_id: Value,
    segmentation: Value,
    score: f64,
}

fn id_string(v: &Value) -> Result<String, FormatError> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        other => Err(FormatError::Schema(format!("expected id, found {other}"))),
    }
}

fn id_value(id: &str) -> Value {
    match id.parse::<u64>() {
        Ok(n) if n.to_string() == id => json!(n),
        _ => json!(id),
    }
}

enum Outcome {
    Polygon(CrownPolygon, usize),
    Degenerate,
    Invalid,
}

fn segmentation_polygon(seg: &Value, label: &str) -> Result<Outcome, FormatError> {
    let parts: Vec<&Vec<Value>> = match seg {
        Value::Object(_) => return Err(FormatError::UnsupportedSegmentation(label.to_string())),
        Value::Array(items) if items.iter().all(Value::is_array) => {
            items.iter().filter_map(Value::as_array).collect()
        }
        // Some writers emit a single flat ring instead of a list of rings.
        Value::Array(items) => vec![items],
        other => {
            return Err(FormatError::Schema(format!(
                "{label}: segmentation must be a polygon list, found {other}"
            )))
        }
    };

    let mut polys = Vec::new();
    let mut degenerate = 0;
    for part in parts {
        let mut coords = Vec::with_capacity(part.len());
        for v in part {
            match v.as_f64() {
                Some(c) if c.is_finite() => coords.push(c),
                _ => {
                    return Err(FormatError::Schema(format!(
                        "{label}: segmentation coordinates must be numbers"
                    )))
                }
            }
        }
        let pts: Vec<Point2> = coords
            .chunks_exact(2)
            .map(|c| Point2::new(c[0], c[1]))
            .collect();
        if pts.len() < 3 {
            degenerate += 1;
            continue;
        }
        match CrownPolygon::from_ring_lossy(pts) {
            Ok(p) => polys.push(p),
            Err(crate::geometry::GeometryError::TooFewVertices(_)) => degenerate += 1,
            Err(_) => {}
        }
    }
    if polys.is_empty() {
        return Ok(if degenerate > 0 {
            Outcome::Degenerate
        } else {
            Outcome::Invalid
        });
    }
    let (poly, dropped) = union_parts(polys);
    Ok(Outcome::Polygon(poly, dropped))
}

/// Folds overlapping parts into the largest one; returns the number of parts
/// that never overlapped.
fn union_parts(mut parts: Vec<CrownPolygon>) -> (CrownPolygon, usize) {
    parts.sort_by(|a, b| b.area().total_cmp(&a.area()));
    let mut acc = parts.remove(0);
    loop {
        let before = parts.len();
        let mut rest = Vec::new();
        for p in parts {
            match union_geometry(&acc, &p) {
                Ok(u) => acc = u,
                Err(_) => rest.push(p),
            }
        }
        parts = rest;
        if parts.is_empty() || parts.len() == before {
            return (acc, parts.len());
        }
    }
}

/// Parses a COCO instance file. Degenerate or non-simple annotations are
/// skipped and counted; RLE segmentations are an error.
pub fn parse_coco(bytes: &[u8]) -> Result<CocoDataset, FormatError> {
    let raw: RawCoco = serde_json::from_slice(bytes)?;
    let mut images = Vec::with_capacity(raw.images.len());
    for img in &raw.images {
        let origin = match (img.origin_x, img.origin_y) {
            (Some(x), Some(y)) => Some((x, y)),
            _ => None,
        };
        images.push(CocoImage {
            id: id_string(&img.id)?,
            file_name: img.file_name.clone(),
            width: img.width,
            height: img.height,
            origin,
        });
    }
    let mut report = IngestReport::default();
    let mut crowns = Vec::new();
    for (idx, ann) in raw.annotations.iter().enumerate() {
        let annotation_id = match &ann.id {
            Some(v) => id_string(v)?,
            None => idx.to_string(),
        };
        let image_id = id_string(&ann.image_id)?;
        match segmentation_polygon(&ann.segmentation, &annotation_id)? {
            Outcome::Polygon(polygon, dropped) => {
                report.dropped_parts += dropped;
                crowns.push(GroundTruthCrown {
                    annotation_id,
                    image_id,
                    polygon,
                });
            }
            Outcome::Degenerate => report.degenerate += 1,
            Outcome::Invalid => report.invalid += 1,
        }
    }
    Ok(CocoDataset {
        images,
        crowns,
        report,
    })
}

/// Parses a COCO results array. Output is grouped by image id in order of
/// first appearance, preserving file order within each image.
pub fn parse_coco_results(bytes: &[u8]) -> Result<PredictionSet, FormatError> {
    let raw: Vec<RawResult> = serde_json::from_slice(bytes)?;
    let mut report = IngestReport::default();
    let mut keyed = Vec::with_capacity(raw.len());
    let mut group_order: Vec<String> = Vec::new();
    for (index, r) in raw.iter().enumerate() {
        if !(0.0..=1.0).contains(&r.score) {
            return Err(FormatError::ScoreOutOfRange {
                index,
                score: r.score,
            });
        }
        let image_id = id_string(&r.image_id)?;
        let group = match group_order.iter().position(|g| *g == image_id) {
            Some(g) => g,
            None => {
                group_order.push(image_id.clone());
                group_order.len() - 1
            }
        };
        match segmentation_polygon(&r.segmentation, &format!("prediction {index}"))? {
            Outcome::Polygon(polygon, dropped) => {
                report.dropped_parts += dropped;
                keyed.push((
                    group,
                    CrownPrediction {
                        polygon,
                        confidence: r.score,
                        source_image_id: image_id,
                    },
                ));
            }
            Outcome::Degenerate => report.degenerate += 1,
            Outcome::Invalid => report.invalid += 1,
        }
    }
    keyed.sort_by_key(|(g, _)| *g);
    Ok(PredictionSet {
        predictions: keyed.into_iter().map(|(_, p)| p).collect(),
        report,
    })
}

fn flat_ring(p: &CrownPolygon) -> Vec<f64> {
    p.vertices().iter().flat_map(|v| [v.x, v.y]).collect()
}

fn coco_bbox(p: &CrownPolygon) -> [f64; 4] {
    let b = p.bbox();
    [b.min.x, b.min.y, b.width(), b.height()]
}

pub fn write_coco(images: &[CocoImage], crowns: &[GroundTruthCrown]) -> Vec<u8> {
    let images: Vec<Value> = images
        .iter()
        .map(|img| {
            let mut v = json!({
                "id": id_value(&img.id),
                "file_name": img.file_name,
                "width": img.width,
                "height": img.height,
            });
            if let Some((x, y)) = img.origin {
                v["origin_x"] = json!(x);
                v["origin_y"] = json!(y);
            }
            v
        })
        .collect();
    let annotations: Vec<Value> = crowns
        .iter()
        .map(|c| {
            json!({
                "id": id_value(&c.annotation_id),
                "image_id": id_value(&c.image_id),
                "category_id": 1,
                "segmentation": [flat_ring(&c.polygon)],
                "area": c.polygon.area(),
                "bbox": coco_bbox(&c.polygon),
                "iscrowd": 0,
            })
        })
        .collect();
    let doc = json!({
        "images": images,
        "annotations": annotations,
        "categories": [{"id": 1, "name": "tree"}],
    });
    serde_json::to_vec_pretty(&doc).expect("JSON values serialise")
}

pub fn write_coco_results(preds: &[CrownPrediction]) -> Vec<u8> {
    let rows: Vec<Value> = preds
        .iter()
        .map(|p| {
            json!({
                "image_id": id_value(&p.source_image_id),
                "category_id": 1,
                "segmentation": [flat_ring(&p.polygon)],
                "bbox": coco_bbox(&p.polygon),
                "score": p.confidence,
            })
        })
        .collect();
    serde_json::to_vec_pretty(&rows).expect("JSON values serialise")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::intersection_area;

    #[test]
    fn one_square_annotation() {
        let doc = br#"{"images":[{"id":1,"file_name":"a.png","width":20,"height":20}],
            "annotations":[{"id":7,"image_id":1,"segmentation":[[0,0,10,0,10,10,0,10]],"area":100,"bbox":[0,0,10,10]}]}"#;
        let ds = parse_coco(doc).unwrap();
        assert_eq!(ds.images.len(), 1);
        assert_eq!(ds.crowns.len(), 1);
        assert_eq!(ds.crowns[0].polygon.area(), 100.0);
        assert_eq!(ds.crowns[0].annotation_id, "7");
        assert!(ds.report.is_clean());
    }

    #[test]
    fn two_point_annotation_is_counted_not_fatal() {
        let doc = br#"{"images":[{"id":1}],"annotations":[{"id":1,"image_id":1,"segmentation":[[0,0,10,0]]}]}"#;
        let ds = parse_coco(doc).unwrap();
        assert!(ds.crowns.is_empty());
        assert_eq!(ds.report.degenerate, 1);
    }

    #[test]
    fn overlapping_parts_are_unioned() {
        let doc = br#"{"images":[{"id":1}],"annotations":[{"id":1,"image_id":1,
            "segmentation":[[0,0,2,0,2,2,0,2],[1,1,3,1,3,3,1,3]]}]}"#;
        let ds = parse_coco(doc).unwrap();
        let a = CrownPolygon::rect(0.0, 0.0, 2.0, 2.0).unwrap();
        let b = CrownPolygon::rect(1.0, 1.0, 3.0, 3.0).unwrap();
        let expected = a.area() + b.area() - intersection_area(&a, &b);
        assert!((ds.crowns[0].polygon.area() - expected).abs() < 1e-12);
        assert_eq!(ds.report.dropped_parts, 0);
    }

    #[test]
    fn disjoint_part_is_dropped_and_counted() {
        let doc = br#"{"images":[{"id":1}],"annotations":[{"id":1,"image_id":1,
            "segmentation":[[0,0,1,0,1,1,0,1],[5,5,8,5,8,8,5,8]]}]}"#;
        let ds = parse_coco(doc).unwrap();
        assert_eq!(ds.crowns[0].polygon.area(), 9.0);
        assert_eq!(ds.report.dropped_parts, 1);
    }

    #[test]
    fn rle_is_rejected() {
        let doc = br#"{"images":[{"id":1}],"annotations":[{"id":3,"image_id":1,"segmentation":{"counts":"abc","size":[4,4]}}]}"#;
        assert!(
            matches!(parse_coco(doc), Err(FormatError::UnsupportedSegmentation(id)) if id == "3")
        );
    }

    #[test]
    fn malformed_json() {
        assert!(matches!(
            parse_coco(b"{\"images\": ["),
            Err(FormatError::MalformedJson(_))
        ));
        assert!(matches!(
            parse_coco(b"{}"),
            Err(FormatError::MalformedJson(_))
        ));
    }

    #[test]
    fn results_examples() {
        let one = br#"[{"image_id":1,"segmentation":[[0,0,4,0,4,4]],"score":0.9}]"#;
        let set = parse_coco_results(one).unwrap();
        assert_eq!(set.predictions.len(), 1);
        assert_eq!(set.predictions[0].confidence, 0.9);
        assert_eq!(set.predictions[0].source_image_id, "1");
        assert!(parse_coco_results(b"[]").unwrap().predictions.is_empty());
        let bad = br#"[{"image_id":1,"segmentation":[[0,0,4,0,4,4]],"score":1.5}]"#;
        assert!(matches!(
            parse_coco_results(bad),
            Err(FormatError::ScoreOutOfRange { index: 0, .. })
        ));
    }

    #[test]
    fn results_grouped_by_image_in_first_seen_order() {
        let doc = br#"[
            {"image_id":"b","segmentation":[[0,0,1,0,1,1]],"score":0.1},
            {"image_id":"a","segmentation":[[0,0,1,0,1,1]],"score":0.2},
            {"image_id":"b","segmentation":[[0,0,1,0,1,1]],"score":0.3}]"#;
        let set = parse_coco_results(doc).unwrap();
        let got: Vec<(&str, f64)> = set
            .predictions
            .iter()
            .map(|p| (p.source_image_id.as_str(), p.confidence))
            .collect();
        assert_eq!(got, vec![("b", 0.1), ("b", 0.3), ("a", 0.2)]);
    }

    #[test]
    fn write_then_parse_preserves_geometry_and_origin() {
        let images = vec![CocoImage {
            id: "3".into(),
            file_name: "tile_819_0.png".into(),
            width: 1024,
            height: 1024,
            origin: Some((819, 0)),
        }];
        let crowns = vec![GroundTruthCrown {
            annotation_id: "1".into(),
            image_id: "3".into(),
            polygon: CrownPolygon::rect(0.25, 0.5, 10.125, 7.0).unwrap(),
        }];
        let ds = parse_coco(&write_coco(&images, &crowns)).unwrap();
        assert_eq!(ds.images, images);
        assert_eq!(ds.crowns, crowns);

        let preds = vec![CrownPrediction {
            polygon: crowns[0].polygon.clone(),
            confidence: 0.7,
            source_image_id: "mosaic".into(),
        }];
        assert_eq!(
            parse_coco_results(&write_coco_results(&preds))
                .unwrap()
                .predictions,
            preds
        );
    }
}
