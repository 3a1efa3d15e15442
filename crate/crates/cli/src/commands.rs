use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crown_dieback::evaluator::{crossval_report, EvalReport, Stage};
use crown_dieback::formats::{
    encode_png, parse_coco, parse_coco_results, parse_trunk_csv_with, parse_world_file,
    read_geojson, read_raster, write_coco, write_coco_results, write_geojson, write_world_file,
    AreaDataset, AreaId, CocoDataset, CocoImage, CrownFeature, CrownPrediction, CrownProperties,
    DefoliationUnit, GeoRaster, GeoTransform, GroundTruthCrown, IngestReport, TrunkRecord,
};
use crown_dieback::geometry::CrownPolygon;
use crown_dieback::indices::{index_value, IndexKind};
use crown_dieback::matcher::match_crowns;
use crown_dieback::merger::{filter_confidence, nmm_merge};
use crown_dieback::pipeline::{
    lift_predictions, process_area, summarize, AreaInputs, AreaOutcome, CrownIndexRow,
    PipelineParams,
};
use crown_dieback::stats::{
    agreement, regress as fit_regression, residual_vs_distance, LabeledPoint,
};
use crown_dieback::synth::{generate_scene, write_scene, DiebackDist, SceneSpec};
use crown_dieback::tiler::{crop_tile, plan_tiles, split_labels, TileSpec, DEFAULT_OVERLAP};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{AreaEntry, Project, Unit};
use crate::failure::{read_input, read_text, write_output, Classify, Failure, Outcome};
use crate::manifest::Manifest;
use crate::tables;
use crate::{
    AgreeArgs, EvalArgs, IndexArgs, IndexChoice, MatchArgs, MergeArgs, PipelineArgs, RegressArgs,
    StageChoice, SynthArgs, Thresholds, TileArgs,
};

fn json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    let mut b = serde_json::to_vec_pretty(v).expect("report serialises");
    b.push(b'\n');
    b
}

fn warn_ingest(what: &str, r: &IngestReport) {
    if !r.is_clean() {
        eprintln!(
            "warning: {what}: skipped {} degenerate and {} invalid polygons, dropped {} detached parts",
            r.degenerate, r.invalid, r.dropped_parts
        );
    }
}

fn load_transform(path: &Path) -> Outcome<GeoTransform> {
    parse_world_file(&read_text(path, "world file")?).invalid(path.display())
}

fn load_raster(png: &Path, world: &Path) -> Outcome<GeoRaster> {
    let bytes = read_input(png, "raster")?;
    let text = read_text(world, "world file")?;
    read_raster(&bytes, &text).invalid(png.display())
}

fn load_coco(path: &Path) -> Outcome<CocoDataset> {
    let ds = parse_coco(&read_input(path, "COCO file")?).invalid(path.display())?;
    warn_ingest(&path.display().to_string(), &ds.report);
    Ok(ds)
}

fn load_predictions(path: &Path, tiles: Option<&Path>) -> Outcome<Vec<CrownPrediction>> {
    let set = parse_coco_results(&read_input(path, "predictions")?).invalid(path.display())?;
    warn_ingest(&path.display().to_string(), &set.report);
    Ok(match tiles {
        Some(t) => lift_predictions(&set.predictions, &load_coco(t)?.images),
        None => set.predictions,
    })
}

fn unit(percent: bool) -> DefoliationUnit {
    if percent {
        DefoliationUnit::Percent
    } else {
        DefoliationUnit::Fraction
    }
}

fn load_trunks(path: &Path, unit: DefoliationUnit) -> Outcome<Vec<TrunkRecord>> {
    parse_trunk_csv_with(&read_input(path, "trunk survey")?, unit).invalid(path.display())
}

fn load_crowns(path: &Path) -> Outcome<Vec<CrownFeature>> {
    read_geojson(&read_input(path, "crowns")?).invalid(path.display())
}

fn crown_ids(features: &[CrownFeature]) -> Vec<String> {
    features
        .iter()
        .enumerate()
        .map(|(i, f)| {
            f.properties
                .crown_id
                .clone()
                .unwrap_or_else(|| format!("c{}", i + 1))
        })
        .collect()
}

fn index_kinds(choices: &[IndexChoice]) -> Vec<IndexKind> {
    choices.iter().map(|&c| c.into()).collect()
}

impl From<IndexChoice> for IndexKind {
    fn from(c: IndexChoice) -> Self {
        match c {
            IndexChoice::Gcc => IndexKind::Gcc,
            IndexChoice::Exg => IndexKind::Exg,
        }
    }
}

fn check_thresholds(t: &Thresholds) -> Outcome<PipelineParams> {
    if !(0.0..=1.0).contains(&t.confidence) {
        return Err(Failure::Validation("--confidence must be in [0, 1]".into()));
    }
    if !(t.ios > 0.0 && t.ios <= 1.0) {
        return Err(Failure::Validation("--ios must be in (0, 1]".into()));
    }
    Ok(PipelineParams {
        confidence_threshold: t.confidence,
        ios_threshold: t.ios,
    })
}

pub fn tile(a: TileArgs) -> Outcome<()> {
    let overlap = a
        .overlap
        .unwrap_or(if a.training { 0.0 } else { DEFAULT_OVERLAP });
    let spec = TileSpec::new(a.tile_size, overlap).invalid("tile parameters")?;
    let raster = load_raster(&a.raster, &a.world)?;
    let labels = a.labels.as_deref().map(load_coco).transpose()?;
    let (w, h) = (raster.width(), raster.height());
    let origins = plan_tiles(w, h, &spec);

    let images: Vec<CocoImage> = origins
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let (tw, th) = crown_dieback::tiler::tile_extent(w, h, *o, &spec);
            CocoImage {
                id: (i + 1).to_string(),
                file_name: format!("tile_{:05}_{:05}.png", o.x, o.y),
                width: tw,
                height: th,
                origin: Some((o.x, o.y)),
            }
        })
        .collect();
    origins
        .par_iter()
        .zip(&images)
        .map(|(o, img)| {
            let t = crop_tile(&raster, *o, &spec).failed("cropping tile")?;
            let png = a.out.join(&img.file_name);
            write_output(&png, &encode_png(t.width(), t.height(), t.pixels()))?;
            write_output(
                &png.with_extension("pgw"),
                write_world_file(&t.transform).as_bytes(),
            )
        })
        .collect::<Outcome<Vec<()>>>()?;

    let mut crowns = Vec::new();
    if let Some(ds) = labels {
        let polys: Vec<CrownPolygon> = ds.crowns.iter().map(|c| c.polygon.clone()).collect();
        for (img, frags) in images
            .iter()
            .zip(split_labels(&polys, w, h, &origins, &spec))
        {
            for polygon in frags {
                crowns.push(GroundTruthCrown {
                    annotation_id: (crowns.len() + 1).to_string(),
                    image_id: img.id.clone(),
                    polygon,
                });
            }
        }
    }
    write_output(&a.out.join("tiles.json"), &write_coco(&images, &crowns))?;
    eprintln!(
        "{} tiles of {} px (overlap {overlap}), {} labels",
        images.len(),
        a.tile_size,
        crowns.len()
    );
    Ok(())
}

fn to_world(t: &GeoTransform, p: &CrownPolygon) -> Outcome<CrownPolygon> {
    p.map_points(|q| t.apply_point(q))
        .failed("georeferencing crown")
}

pub fn merge(a: MergeArgs) -> Outcome<()> {
    let params = check_thresholds(&a.thresholds)?;
    let t = load_transform(&a.world)?;
    let preds = load_predictions(&a.predictions, a.tiles.as_deref())?;
    let kept = filter_confidence(&preds, params.confidence_threshold);
    let merged = nmm_merge(&kept, params.ios_threshold);
    let features = merged
        .iter()
        .enumerate()
        .map(|(i, p)| {
            Ok(CrownFeature {
                polygon: to_world(&t, &p.polygon)?,
                properties: CrownProperties {
                    crown_id: Some(format!("c{}", i + 1)),
                    confidence: Some(p.confidence),
                    ..Default::default()
                },
            })
        })
        .collect::<Outcome<Vec<_>>>()?;
    write_output(&a.out, &write_geojson(&features))?;
    if let Some(p) = &a.pixel_out {
        write_output(p, &write_coco_results(&merged))?;
    }
    eprintln!(
        "{} predictions, {} above confidence {}, {} after merging",
        preds.len(),
        kept.len(),
        params.confidence_threshold,
        merged.len()
    );
    Ok(())
}

pub fn match_cmd(a: MatchArgs) -> Outcome<()> {
    let features = load_crowns(&a.crowns)?;
    let trunks = load_trunks(&a.trunks, unit(a.percent))?;
    let polys: Vec<CrownPolygon> = features.iter().map(|f| f.polygon.clone()).collect();
    let ids = crown_ids(&features);
    let result = match_crowns(&polys, &trunks);
    write_output(
        &a.out_csv,
        &tables::write_matches(&tables::match_rows(&result, &ids)),
    )?;
    if let Some(path) = &a.out_geojson {
        let matched: Vec<CrownFeature> = result
            .pairs
            .iter()
            .map(|p| {
                let mut f = features[p.crown_index].clone();
                f.properties.crown_id = Some(ids[p.crown_index].clone());
                f.properties.matched_tree_id = Some(p.tree_id.clone());
                f.properties.defoliation = Some(trunks[p.trunk_index].defoliation);
                f
            })
            .collect();
        write_output(path, &write_geojson(&matched))?;
    }
    eprintln!(
        "{} pairs kept, {} discarded, {} trunks and {} crowns unmatched",
        result.pairs.len(),
        result.discarded.len(),
        result.unmatched_trunks.len(),
        result.unmatched_crowns.len()
    );
    Ok(())
}

fn index_rows_for(features: &[CrownFeature], raster: &GeoRaster) -> Vec<CrownIndexRow> {
    let ids = crown_ids(features);
    features
        .par_iter()
        .zip(ids)
        .map(|(f, id)| {
            let v = index_value(&f.polygon, raster);
            CrownIndexRow {
                crown_id: id,
                tree_id: f.properties.matched_tree_id.clone(),
                error: v.as_ref().err().map(ToString::to_string),
                value: v.ok(),
            }
        })
        .collect()
}

fn report_index_errors(rows: &[CrownIndexRow]) {
    for r in rows {
        if let Some(e) = &r.error {
            eprintln!("warning: crown {}: {e}", r.crown_id);
        }
    }
}

pub fn index(a: IndexArgs) -> Outcome<()> {
    let features = load_crowns(&a.crowns)?;
    let raster = load_raster(&a.raster, &a.world)?;
    let rows = index_rows_for(&features, &raster);
    report_index_errors(&rows);
    let table = tables::index_table(&rows, &index_kinds(&a.index));
    write_output(&a.out, &tables::write_index(&table))
}

fn stage(s: StageChoice) -> Stage {
    match s {
        StageChoice::Tiled => Stage::Tiled,
        StageChoice::Orthomosaic => Stage::Orthomosaic,
    }
}

fn emit_eval(report: &EvalReport, out_csv: Option<&Path>) -> Outcome<()> {
    print!("{}", report.to_text());
    if let Some(p) = out_csv {
        write_output(p, report.to_csv().as_bytes())?;
    }
    Ok(())
}

/// Ground truth and merged predictions of one area, both mosaic frame.
fn orthomosaic_dataset(area: &AreaEntry, params: &PipelineParams) -> Outcome<Option<AreaDataset>> {
    let id = area.area_id()?;
    let Some(gt_path) = &area.ground_truth else {
        return Ok(None);
    };
    let ctx = |f: Failure| match f {
        Failure::Validation(m) => Failure::Validation(format!("area {id}: {m}")),
        other => other,
    };
    let gt = load_coco(gt_path).map_err(ctx)?;
    let preds = load_predictions(&area.predictions, area.tiles.as_deref()).map_err(ctx)?;
    let merged = nmm_merge(
        &filter_confidence(&preds, params.confidence_threshold),
        params.ios_threshold,
    );
    let image = "mosaic".to_string();
    Ok(Some(AreaDataset {
        area_id: id,
        raster: Some(area.raster.clone()),
        ground_truth: gt
            .crowns
            .into_iter()
            .map(|c| GroundTruthCrown {
                image_id: image.clone(),
                ..c
            })
            .collect(),
        predictions: Some(
            merged
                .into_iter()
                .map(|p| CrownPrediction {
                    source_image_id: image.clone(),
                    ..p
                })
                .collect(),
        ),
        trunks: None,
    }))
}

/// Tile-local labels (from `tile --labels`) against raw per-tile predictions.
fn tiled_dataset(area: &AreaEntry) -> Outcome<Option<AreaDataset>> {
    let id = area.area_id()?;
    let Some(tiles) = &area.tiles else {
        return Ok(None);
    };
    let labels = load_coco(tiles)?;
    let preds = load_predictions(&area.predictions, None)?;
    Ok(Some(AreaDataset {
        area_id: id,
        raster: Some(area.raster.clone()),
        ground_truth: labels.crowns,
        predictions: Some(preds),
        trunks: None,
    }))
}

pub fn eval(a: EvalArgs) -> Outcome<()> {
    let st = stage(a.stage);
    let datasets = match (&a.config, &a.ground_truth, &a.predictions) {
        (Some(cfg), _, _) => {
            let project = Project::load(cfg)?;
            let params = PipelineParams {
                confidence_threshold: project.params.confidence_threshold,
                ios_threshold: project.params.ios_threshold,
            };
            let mut out = Vec::new();
            for area in &project.areas {
                let ds = match st {
                    Stage::Orthomosaic => orthomosaic_dataset(area, &params)?,
                    Stage::Tiled => tiled_dataset(area)?,
                };
                match ds {
                    Some(d) => out.push(d),
                    None => eprintln!(
                        "warning: area {}: nothing to evaluate for this stage",
                        area.id
                    ),
                }
            }
            out
        }
        (None, Some(gt), Some(pred)) => {
            let id = AreaId::new(a.area)
                .ok_or_else(|| Failure::Validation("--area must be 1..=9".into()))?;
            let gt = load_coco(gt)?;
            let preds = load_predictions(pred, None)?;
            let preds = if st == Stage::Orthomosaic {
                let params = check_thresholds(&a.thresholds)?;
                nmm_merge(
                    &filter_confidence(&preds, params.confidence_threshold),
                    params.ios_threshold,
                )
            } else {
                preds
            };
            vec![AreaDataset {
                area_id: id,
                raster: None,
                ground_truth: gt.crowns,
                predictions: Some(preds),
                trunks: None,
            }]
        }
        _ => {
            return Err(Failure::Validation(
                "give --config, or --ground-truth with --predictions".into(),
            ))
        }
    };
    let report = crossval_report(&datasets, st);
    emit_eval(&report, a.out_csv.as_deref())
}

fn labelled_points(
    rows: &[tables::IndexRow],
    trunks: &[TrunkRecord],
    kind: IndexKind,
) -> Outcome<Vec<LabeledPoint>> {
    let defol: HashMap<&str, f64> = trunks
        .iter()
        .map(|t| (t.tree_id.as_str(), t.defoliation))
        .collect();
    let mut points = Vec::new();
    for r in rows {
        let (Some(tree), Some(y)) = (&r.tree_id, r.value(kind)) else {
            continue;
        };
        let x = *defol.get(tree.as_str()).ok_or_else(|| {
            Failure::Validation(format!("tree {tree:?} is not in the trunk survey"))
        })?;
        points.push(LabeledPoint {
            tree_id: tree.clone(),
            x,
            y,
        });
    }
    Ok(points)
}

pub fn regress(a: RegressArgs) -> Outcome<()> {
    let rows = tables::read_index(&read_input(&a.index, "index table")?)?;
    let trunks = load_trunks(&a.trunks, unit(a.percent))?;
    let kind: IndexKind = a.response.into();
    let points = labelled_points(&rows, &trunks, kind)?;
    let response = match kind {
        IndexKind::Gcc => "gcc",
        IndexKind::Exg => "exg",
    };
    let report = fit_regression(&points, "defoliation", response).failed("regression")?;
    let residuals = match &a.matches {
        Some(p) => {
            let rows = tables::read_matches(&read_input(p, "match table")?)?;
            let result = crown_dieback::matcher::MatchResult {
                pairs: rows
                    .iter()
                    .filter(|r| !r.discarded)
                    .enumerate()
                    .map(|(i, r)| crown_dieback::matcher::MatchPair {
                        tree_id: r.tree_id.clone(),
                        trunk_index: i,
                        crown_index: i,
                        distance: r.distance,
                    })
                    .collect(),
                ..Default::default()
            };
            Some(residual_vs_distance(&report, &result).invalid("match table")?)
        }
        None => None,
    };
    let doc = json!({
        "defoliation_unit": "fraction",
        "regression": report,
        "residual_vs_distance": residuals.as_ref().map(|r| r.abs_residual_distance_r),
    });
    write_output(&a.out, &json_bytes(&doc))?;
    if let Some(p) = &a.points {
        write_output(
            p,
            &tables::write_points(&tables::point_rows(&report, residuals.as_ref())),
        )?;
    }
    eprintln!(
        "n={} slope={:.6} intercept={:.6} R²={:.4} p={:.3e}",
        report.n, report.slope, report.intercept, report.r_squared, report.p_value
    );
    Ok(())
}

pub fn agree(a: AgreeArgs) -> Outcome<()> {
    let kind: IndexKind = a.index.into();
    let ra = tables::read_index(&read_input(&a.a, "index table")?)?;
    let rb = tables::read_index(&read_input(&a.b, "index table")?)?;
    let by_tree: HashMap<&str, f64> = rb
        .iter()
        .filter_map(|r| Some((r.tree_id.as_deref()?, r.value(kind)?)))
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = ra
        .iter()
        .filter_map(|r| Some((r.value(kind)?, *by_tree.get(r.tree_id.as_deref()?)?)))
        .unzip();
    let report = agreement(&xs, &ys).failed("agreement")?;
    let bytes = json_bytes(&report);
    match &a.out {
        Some(p) => write_output(p, &bytes),
        None => {
            print!("{}", String::from_utf8_lossy(&bytes));
            Ok(())
        }
    }
}

pub fn synth(a: SynthArgs) -> Outcome<()> {
    let spec = SceneSpec {
        seed: a.seed,
        extent: a.extent,
        gsd: a.gsd,
        n_crowns: a.n_crowns,
        radius_range: (a.radius_min, a.radius_max),
        dieback: DiebackDist::Uniform {
            lo: a.dieback_min,
            hi: a.dieback_max,
        },
        trunk_jitter: a.trunk_jitter,
        overlap_fraction: a.overlap,
        duplicate_fraction: a.duplicates,
        false_positives: a.false_positives,
        ..SceneSpec::default()
    };
    let scene = generate_scene(&spec).map_err(|e| match e {
        crown_dieback::synth::SynthError::InvalidSpec(_) => Failure::Validation(e.to_string()),
        _ => Failure::Processing(e.to_string()),
    })?;
    let paths = write_scene(&scene, &a.out, &a.stem).failed("writing scene")?;
    let name = |p: &PathBuf| p.file_name().unwrap().to_string_lossy().into_owned();
    let mut project = String::new();
    writeln!(project, "[params]").unwrap();
    writeln!(project, "confidence_threshold = 0.3").unwrap();
    writeln!(project, "ios_threshold = 0.5").unwrap();
    writeln!(project, "\n[[area]]\nid = 1").unwrap();
    for (k, p) in [
        ("raster", &paths.raster),
        ("world_file", &paths.world_file),
        ("predictions", &paths.predictions),
        ("trunks", &paths.trunks),
        ("ground_truth", &paths.ground_truth),
    ] {
        writeln!(project, "{k} = {:?}", name(p)).unwrap();
    }
    write_output(&a.out.join("project.toml"), project.as_bytes())?;
    eprintln!(
        "{} crowns, {} predictions ({} nested duplicates) in {}",
        scene.crowns_world.len(),
        scene.predictions.len(),
        scene.duplicates.len(),
        a.out.display()
    );
    Ok(())
}

fn load_area(area: &AreaEntry, unit: Unit) -> Outcome<AreaInputs> {
    let id = area.area_id()?;
    let tag = |f: Failure| match f {
        Failure::Validation(m) => Failure::Validation(format!("area {id}: {m}")),
        Failure::Processing(m) => Failure::Processing(format!("area {id}: {m}")),
    };
    let inner = || -> Outcome<AreaInputs> {
        Ok(AreaInputs {
            area_id: id,
            raster: load_raster(&area.raster, &area.world_file)?,
            predictions: load_predictions(&area.predictions, area.tiles.as_deref())?,
            trunks: load_trunks(&area.trunks, unit.into())?,
            ground_truth: area
                .ground_truth
                .as_deref()
                .map(|p| load_coco(p).map(|d| d.crowns))
                .transpose()?,
        })
    };
    inner().map_err(tag)
}

fn write_area(dir: &Path, area: &AreaInputs, out: &AreaOutcome) -> Outcome<Vec<PathBuf>> {
    let mut files = Vec::new();
    let mut put = |name: &str, bytes: Vec<u8>| -> Outcome<()> {
        let p = dir.join(name);
        write_output(&p, &bytes)?;
        files.push(p);
        Ok(())
    };
    put("merged.geojson", write_geojson(&out.features(&area.trunks)))?;
    put(
        "matches.csv",
        tables::write_matches(&tables::match_rows(&out.matches, &out.crown_ids)),
    )?;
    let both = [IndexKind::Gcc, IndexKind::Exg];
    put(
        "index.csv",
        tables::write_index(&tables::index_table(&out.index, &both)),
    )?;
    if let Some(m) = &out.manual {
        put(
            "manual_index.csv",
            tables::write_index(&tables::index_table(&m.index, &both)),
        )?;
    }
    Ok(files)
}

pub fn pipeline(a: PipelineArgs) -> Outcome<()> {
    let mut project = Project::load(&a.config)?;
    if let Some(c) = a.confidence {
        project.params.confidence_threshold = c;
    }
    if let Some(i) = a.ios {
        project.params.ios_threshold = i;
    }
    let params = check_thresholds(&Thresholds {
        confidence: project.params.confidence_threshold,
        ios: project.params.ios_threshold,
    })?;

    let mut inputs = project
        .areas
        .par_iter()
        .map(|area| load_area(area, project.params.defoliation_unit))
        .collect::<Outcome<Vec<_>>>()?;
    inputs.sort_by_key(|i| i.area_id);
    let outcomes: Vec<AreaOutcome> = inputs
        .par_iter()
        .map(|i| process_area(i, &params))
        .collect();

    let mut files = Vec::new();
    for (inp, out) in inputs.iter().zip(&outcomes) {
        for r in &out.index {
            if let Some(e) = &r.error {
                eprintln!("warning: area {} crown {}: {e}", inp.area_id, r.crown_id);
            }
        }
        files.extend(write_area(
            &a.out.join(format!("area_{}", inp.area_id)),
            inp,
            out,
        )?);
    }

    let report = summarize(&outcomes);
    let mut put = |name: &str, bytes: Vec<u8>| -> Outcome<()> {
        let p = a.out.join(name);
        write_output(&p, &bytes)?;
        files.push(p);
        Ok(())
    };
    put("regression.json", json_bytes(&report))?;
    if let Some(reg) = &report.predicted.value {
        let rows = tables::point_rows(reg, report.residual_vs_distance.value.as_ref());
        put("regression_points.csv", tables::write_points(&rows))?;
    }
    if let Some(Some(reg)) = report.manual.as_ref().map(|m| m.value.as_ref()) {
        put(
            "manual_regression_points.csv",
            tables::write_points(&tables::point_rows(reg, None)),
        )?;
    }
    if let Some(ev) = &report.evaluation {
        put("eval.csv", ev.to_csv().into_bytes())?;
        put("eval.txt", ev.to_text().into_bytes())?;
    }

    let mut manifest = Manifest::new(
        "pipeline",
        json!({
            "confidence_threshold": params.confidence_threshold,
            "ios_threshold": params.ios_threshold,
            "defoliation_unit": project.params.defoliation_unit,
            "areas": project.areas.iter().map(|a| json!({"id": a.id, "fold": a.id})).collect::<Vec<_>>(),
        }),
    );
    manifest.add_input(&a.config)?;
    for area in &project.areas {
        for p in [
            &area.raster,
            &area.world_file,
            &area.predictions,
            &area.trunks,
        ]
        .into_iter()
        .chain(area.tiles.as_ref())
        .chain(area.ground_truth.as_ref())
        {
            manifest.add_input(p)?;
        }
    }
    manifest.add_outputs(&a.out, &files)?;
    manifest.write(&a.out)?;

    match &report.predicted.value {
        Some(r) => eprintln!(
            "{} areas, n={} slope={:.4} R²={:.3} p={:.3e}",
            outcomes.len(),
            r.n,
            r.slope,
            r.r_squared,
            r.p_value
        ),
        None => eprintln!(
            "{} areas; regression not available: {}",
            outcomes.len(),
            report.predicted.error.as_deref().unwrap_or("")
        ),
    }
    Ok(())
}
