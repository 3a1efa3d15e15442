//! Project file: run parameters plus one `[[area]]` table per orthomosaic.
//! Relative paths resolve against the directory holding the project file.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crown_dieback::formats::{AreaId, DefoliationUnit};
use crown_dieback::merger::{DEFAULT_CONFIDENCE_THRESHOLD, DEFAULT_IOS_THRESHOLD};
use serde::{Deserialize, Serialize};

use crate::failure::{read_text, Classify, Failure, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    #[default]
    Fraction,
    Percent,
}

impl From<Unit> for DefoliationUnit {
    fn from(u: Unit) -> Self {
        match u {
            Unit::Fraction => DefoliationUnit::Fraction,
            Unit::Percent => DefoliationUnit::Percent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default = "default_confidence")]
    pub confidence_threshold: f64,
    #[serde(default = "default_ios")]
    pub ios_threshold: f64,
    #[serde(default)]
    pub defoliation_unit: Unit,
}

fn default_confidence() -> f64 {
    DEFAULT_CONFIDENCE_THRESHOLD
}

fn default_ios() -> f64 {
    DEFAULT_IOS_THRESHOLD
}

impl Default for Params {
    fn default() -> Self {
        Self {
            confidence_threshold: DEFAULT_CONFIDENCE_THRESHOLD,
            ios_threshold: DEFAULT_IOS_THRESHOLD,
            defoliation_unit: Unit::Fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AreaEntry {
    pub id: u8,
    pub raster: PathBuf,
    pub world_file: PathBuf,
    pub predictions: PathBuf,
    pub trunks: PathBuf,
    /// COCO file listing tile images with `origin_x`/`origin_y`, when the
    /// predictions were made per tile.
    pub tiles: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    /// Cross-validation fold; must equal `id` when given.
    pub fold: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Project {
    #[serde(default)]
    pub params: Params,
    #[serde(rename = "area", default)]
    pub areas: Vec<AreaEntry>,
}

impl AreaEntry {
    pub fn area_id(&self) -> Outcome<AreaId> {
        AreaId::new(self.id)
            .ok_or_else(|| Failure::Validation(format!("area id {} outside 1..=9", self.id)))
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.raster);
        fix(&mut self.world_file);
        fix(&mut self.predictions);
        fix(&mut self.trunks);
        if let Some(p) = self.tiles.as_mut() {
            fix(p);
        }
        if let Some(p) = self.ground_truth.as_mut() {
            fix(p);
        }
    }
}

impl Project {
    pub fn parse(text: &str, base: &Path) -> Outcome<Self> {
        let mut project: Project = toml::from_str(text).invalid("project file")?;
        let p = &project.params;
        if !(0.0..=1.0).contains(&p.confidence_threshold) {
            return Err(Failure::Validation(
                "confidence_threshold outside [0, 1]".into(),
            ));
        }
        if !(p.ios_threshold > 0.0 && p.ios_threshold <= 1.0) {
            return Err(Failure::Validation("ios_threshold outside (0, 1]".into()));
        }
        if project.areas.is_empty() {
            return Err(Failure::Validation("project lists no [[area]]".into()));
        }
        let mut seen = BTreeSet::new();
        for a in &mut project.areas {
            a.area_id()?;
            if !seen.insert(a.id) {
                return Err(Failure::Validation(format!("area {} listed twice", a.id)));
            }
            if let Some(f) = a.fold.filter(|&f| f != a.id) {
                return Err(Failure::Validation(format!(
                    "area {}: fold {f} differs from the area id (one held-out area per fold)",
                    a.id
                )));
            }
            a.resolve(base);
        }
        project.areas.sort_by_key(|a| a.id);
        Ok(project)
    }

    pub fn load(path: &Path) -> Outcome<Self> {
        let text = read_text(path, "project file")?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"
[params]
confidence_threshold = 0.4

[[area]]
id = 2
raster = "b.png"
world_file = "b.pgw"
predictions = "b.json"
trunks = "/abs/b.csv"

[[area]]
id = 1
raster = "a.png"
world_file = "a.pgw"
predictions = "a.json"
trunks = "a.csv"
ground_truth = "a_gt.json"
fold = 1
"#;

    #[test]
    fn parses_and_resolves() {
        let p = Project::parse(DOC, Path::new("/proj")).unwrap();
        assert_eq!(p.params.confidence_threshold, 0.4);
        assert_eq!(p.params.ios_threshold, 0.5);
        assert_eq!(p.areas[0].id, 1);
        assert_eq!(p.areas[0].raster, PathBuf::from("/proj/a.png"));
        assert_eq!(p.areas[1].trunks, PathBuf::from("/abs/b.csv"));
        assert_eq!(
            p.areas[0].ground_truth,
            Some(PathBuf::from("/proj/a_gt.json"))
        );
    }

    #[test]
    fn rejects_bad_projects() {
        let dup = DOC.replace("id = 2", "id = 1");
        assert!(matches!(
            Project::parse(&dup, Path::new(".")),
            Err(Failure::Validation(_))
        ));
        let fold = DOC.replace("fold = 1", "fold = 3");
        assert!(Project::parse(&fold, Path::new(".")).is_err());
        let typo = DOC.replace("trunks = \"a.csv\"", "trunk = \"a.csv\"");
        assert!(Project::parse(&typo, Path::new(".")).is_err());
        assert!(Project::parse("[params]\n", Path::new(".")).is_err());
        let zero = DOC.replace("id = 2", "id = 10");
        assert!(Project::parse(&zero, Path::new(".")).is_err());
    }
}
