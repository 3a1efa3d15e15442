use std::collections::HashSet;

use super::{FormatError, TrunkRecord};

/// Unit of the `defoliation` column on ingest. Records always store fractions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DefoliationUnit {
    #[default]
    Fraction,
    Percent,
}

/// Parses a trunk survey with header `tree_id,x,y,defoliation`
/// (columns located by name, extra columns ignored). LF or CRLF.
pub fn parse_trunk_csv(bytes: &[u8]) -> Result<Vec<TrunkRecord>, FormatError> {
    parse_trunk_csv_with(bytes, DefoliationUnit::Fraction)
}

pub fn parse_trunk_csv_with(
    bytes: &[u8],
    unit: DefoliationUnit,
) -> Result<Vec<TrunkRecord>, FormatError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let headers = rdr.headers()?.clone();
    let column = |name: &'static str| {
        headers
            .iter()
            .position(|h| h.trim_start_matches('\u{feff}') == name)
            .ok_or(FormatError::MissingColumn(name))
    };
    let (ci, cx, cy, cd) = (
        column("tree_id")?,
        column("x")?,
        column("y")?,
        column("defoliation")?,
    );

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let field =
            |idx: usize, name: &'static str| rec.get(idx).ok_or(FormatError::MissingColumn(name));
        let number = |idx: usize, name: &'static str| -> Result<f64, FormatError> {
            let text = field(idx, name)?;
            match text.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(FormatError::UnparseableNumber {
                    line,
                    text: text.chars().take(40).collect(),
                }),
            }
        };
        let tree_id = field(ci, "tree_id")?.to_string();
        let x = number(cx, "x")?;
        let y = number(cy, "y")?;
        let raw = number(cd, "defoliation")?;
        let defoliation = match unit {
            DefoliationUnit::Fraction => raw,
            DefoliationUnit::Percent => raw / 100.0,
        };
        if !(0.0..=1.0).contains(&defoliation) {
            return Err(FormatError::DefoliationOutOfRange { line, value: raw });
        }
        if !seen.insert(tree_id.clone()) {
            return Err(FormatError::DuplicateId { line, id: tree_id });
        }
        out.push(TrunkRecord {
            tree_id,
            x,
            y,
            defoliation,
        });
    }
    Ok(out)
}

pub fn write_trunk_csv(trunks: &[TrunkRecord]) -> Vec<u8> {
    let mut out = String::from("tree_id,x,y,defoliation\n");
    for t in trunks {
        out.push_str(&format!(
            "{},{},{},{}\n",
            t.tree_id, t.x, t.y, t.defoliation
        ));
    }
    out.into_bytes()
}
