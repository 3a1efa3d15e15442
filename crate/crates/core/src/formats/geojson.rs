//! GeoJSON FeatureCollection of crown polygons (world coordinates).

use serde_json::{json, Map, Value};

use crate::geometry::{CrownPolygon, Point2};

use super::FormatError;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CrownProperties {
    pub crown_id: Option<String>,
    pub confidence: Option<f64>,
    pub gcc: Option<f64>,
    pub matched_tree_id: Option<String>,
    pub defoliation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrownFeature {
    pub polygon: CrownPolygon,
    pub properties: CrownProperties,
}

/// Serialises crowns as an RFC 7946 FeatureCollection with closed rings.
pub fn write_geojson(features: &[CrownFeature]) -> Vec<u8> {
    let feats: Vec<Value> = features
        .iter()
        .map(|f| {
            let mut ring: Vec<[f64; 2]> = f.polygon.vertices().iter().map(|p| [p.x, p.y]).collect();
            ring.push(ring[0]);
            let mut props = Map::new();
            let p = &f.properties;
            if let Some(v) = &p.crown_id {
                props.insert("crown_id".into(), json!(v));
            }
            if let Some(v) = p.confidence {
                props.insert("confidence".into(), json!(v));
            }
            if let Some(v) = p.gcc {
                props.insert("gcc".into(), json!(v));
            }
            if let Some(v) = &p.matched_tree_id {
                props.insert("matched_tree_id".into(), json!(v));
            }
            if let Some(v) = p.defoliation {
                props.insert("defoliation".into(), json!(v));
            }
            json!({
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [ring]},
                "properties": props,
            })
        })
        .collect();
    let doc = json!({"type": "FeatureCollection", "features": feats});
    let mut out = serde_json::to_vec_pretty(&doc).expect("JSON values serialise");
    out.push(b'\n');
    out
}

/// Reads back a FeatureCollection of Polygon features. Only the exterior
/// ring is used; holes are ignored.
pub fn read_geojson(bytes: &[u8]) -> Result<Vec<CrownFeature>, FormatError> {
    let doc: Value = serde_json::from_slice(bytes)?;
    let schema = |msg: &str| FormatError::Schema(msg.to_string());
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(schema("expected a FeatureCollection"));
    }
    let feats = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| schema("missing features array"))?;
    let mut out = Vec::with_capacity(feats.len());
    for (i, f) in feats.iter().enumerate() {
        let geom = f
            .get("geometry")
            .ok_or_else(|| schema("feature without geometry"))?;
        if geom.get("type").and_then(Value::as_str) != Some("Polygon") {
            return Err(FormatError::Schema(format!(
                "feature {i}: only Polygon geometry is supported"
            )));
        }
        let ring = geom
            .get("coordinates")
            .and_then(Value::as_array)
            .and_then(|rings| rings.first())
            .and_then(Value::as_array)
            .ok_or_else(|| FormatError::Schema(format!("feature {i}: missing exterior ring")))?;
        let mut pts = Vec::with_capacity(ring.len());
        for pos in ring {
            let xy = pos.as_array().filter(|a| a.len() >= 2);
            match xy.and_then(|a| Some(Point2::new(a[0].as_f64()?, a[1].as_f64()?))) {
                Some(p) => pts.push(p),
                None => return Err(FormatError::Schema(format!("feature {i}: bad position"))),
            }
        }
        let polygon = CrownPolygon::from_ring_lossy(pts)
            .map_err(|e| FormatError::Schema(format!("feature {i}: {e}")))?;
        let props = f.get("properties").cloned().unwrap_or(Value::Null);
        let text = |k: &str| {
            props.get(k).and_then(|v| match v {
                Value::String(s) => Some(s.clone()),
                Value::Number(n) => Some(n.to_string()),
                _ => None,
            })
        };
        let num = |k: &str| props.get(k).and_then(Value::as_f64);
        out.push(CrownFeature {
            polygon,
            properties: CrownProperties {
                crown_id: text("crown_id"),
                confidence: num("confidence"),
                gcc: num("gcc"),
                matched_tree_id: text("matched_tree_id"),
                defoliation: num("defoliation"),
            },
        });
    }
    Ok(out)
}
