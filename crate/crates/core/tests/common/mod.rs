//! Independent reference implementations used as test oracles. Shared with
//! the CLI acceptance harness through `#[path]`, so nothing here may depend
//! on test-only items of either crate.
#![allow(dead_code)]

use std::f64::consts::PI;

use crown_dieback::formats::{CrownPrediction, TrunkRecord};
use crown_dieback::geometry::{intersection_area, union_geometry, CrownPolygon, Point2};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Vertices on an ellipse at sorted random angles: always convex.
pub fn random_convex(rng: &mut StdRng, cx: f64, cy: f64, rx: f64, ry: f64) -> CrownPolygon {
    loop {
        let n = rng.random_range(3..=12);
        let mut angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        angles.sort_by(f64::total_cmp);
        let pts = angles
            .iter()
            .map(|t| Point2::new(cx + rx * t.cos(), cy + ry * t.sin()))
            .collect();
        if let Ok(p) = CrownPolygon::new(pts) {
            return p;
        }
    }
}

/// Star-shaped ring around `(cx, cy)` with radii in `[r_lo, r_hi]`.
pub fn random_star(rng: &mut StdRng, cx: f64, cy: f64, r_lo: f64, r_hi: f64) -> CrownPolygon {
    loop {
        let n = rng.random_range(3..=16);
        let mut angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        angles.sort_by(f64::total_cmp);
        let pts = angles
            .iter()
            .map(|t| {
                let r = rng.random_range(r_lo..=r_hi);
                Point2::new(cx + r * t.cos(), cy + r * t.sin())
            })
            .collect();
        if let Ok(p) = CrownPolygon::new(pts) {
            return p;
        }
    }
}

/// Star-shaped ring with vertices snapped to a `1/q` grid, so that edges
/// pass exactly through pixel centres now and then.
pub fn random_grid_star(rng: &mut StdRng, cx: f64, cy: f64, r_hi: f64, q: f64) -> CrownPolygon {
    loop {
        let n = rng.random_range(3..=12);
        let mut angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        angles.sort_by(f64::total_cmp);
        let pts = angles
            .iter()
            .map(|t| {
                let r = rng.random_range(0.2 * r_hi..=r_hi);
                Point2::new(
                    ((cx + r * t.cos()) * q).round() / q,
                    ((cy + r * t.sin()) * q).round() / q,
                )
            })
            .collect();
        if let Ok(p) = CrownPolygon::new(pts) {
            return p;
        }
    }
}

/// Sign of the turn `a → b → p`.
fn orient(a: Point2, b: Point2, p: Point2) -> f64 {
    (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
}

/// Whether `p` lies on a ring edge, decided by exact orientation (exact for
/// coordinates on a coarse dyadic grid).
pub fn on_boundary(ring: &[Point2], p: Point2) -> bool {
    let n = ring.len();
    (0..n).any(|i| {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        orient(a, b, p) == 0.0
            && p.x >= a.x.min(b.x)
            && p.x <= a.x.max(b.x)
            && p.y >= a.y.min(b.y)
            && p.y <= a.y.max(b.y)
    })
}

/// Winding number of the ring around `p` (p not on the boundary).
pub fn winding(ring: &[Point2], p: Point2) -> i32 {
    let n = ring.len();
    let mut w = 0;
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        if a.y <= p.y {
            if b.y > p.y && orient(a, b, p) > 0.0 {
                w += 1;
            }
        } else if b.y <= p.y && orient(a, b, p) < 0.0 {
            w -= 1;
        }
    }
    w
}

pub fn strictly_inside(ring: &[Point2], p: Point2) -> bool {
    !on_boundary(ring, p) && winding(ring, p) != 0
}

/// Every pixel of a `width × height` grid whose centre is strictly inside.
pub fn pixels_inside(ring: &[Point2], width: u32, height: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for row in 0..height {
        for col in 0..width {
            if strictly_inside(ring, Point2::new(col as f64 + 0.5, row as f64 + 0.5)) {
                out.push((col, row));
            }
        }
    }
    out
}

/// Monte-Carlo estimate of `area(a ∩ b)` from uniform samples over `a`'s
/// bounding box.
pub fn monte_carlo_intersection(
    rng: &mut StdRng,
    a: &CrownPolygon,
    b: &CrownPolygon,
    samples: usize,
) -> f64 {
    let bb = a.bbox();
    let mut hits = 0usize;
    for _ in 0..samples {
        let p = Point2::new(
            rng.random_range(bb.min.x..bb.max.x),
            rng.random_range(bb.min.y..bb.max.y),
        );
        if winding(a.vertices(), p) != 0 && winding(b.vertices(), p) != 0 {
            hits += 1;
        }
    }
    hits as f64 / samples as f64 * bb.width() * bb.height()
}

/// `(tree_id, crown index, distance)`.
pub type Pair = (String, usize, f64);

/// Greedy matching by repeatedly taking the first minimum (trunk-major) of
/// the remaining distance matrix, then splitting by `distance ≤ √area`.
/// Returns `(tree_id, crown, distance)` for kept and discarded pairs.
pub fn match_oracle(crowns: &[CrownPolygon], trunks: &[TrunkRecord]) -> (Vec<Pair>, Vec<Pair>) {
    let dist =
        |t: usize, c: usize| Point2::new(trunks[t].x, trunks[t].y).distance(crowns[c].centroid());
    let mut rows: Vec<usize> = (0..trunks.len()).collect();
    let mut cols: Vec<usize> = (0..crowns.len()).collect();
    let mut kept = Vec::new();
    let mut discarded = Vec::new();
    while !rows.is_empty() && !cols.is_empty() {
        let mut best = (f64::INFINITY, 0, 0);
        for (ri, &t) in rows.iter().enumerate() {
            for (ci, &c) in cols.iter().enumerate() {
                let d = dist(t, c);
                if d < best.0 {
                    best = (d, ri, ci);
                }
            }
        }
        let (d, ri, ci) = best;
        let (t, c) = (rows.remove(ri), cols.remove(ci));
        let entry = (trunks[t].tree_id.clone(), c, d);
        if d <= crowns[c].area().sqrt() {
            kept.push(entry);
        } else {
            discarded.push(entry);
        }
    }
    (kept, discarded)
}

/// Fixed-point merging: in rank order, repeatedly merge the first qualifying
/// pair of current groups until none qualifies. Returns the partition of
/// input indices, each group and the list sorted.
pub fn nmm_oracle(preds: &[CrownPrediction], threshold: f64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (&preds[i], &preds[j]);
        b.confidence
            .partial_cmp(&a.confidence)
            .unwrap()
            .then(b.polygon.area().partial_cmp(&a.polygon.area()).unwrap())
            .then(i.cmp(&j))
    });
    let mut groups: Vec<(CrownPolygon, Vec<usize>)> = order
        .iter()
        .map(|&i| (preds[i].polygon.clone(), vec![i]))
        .collect();
    'outer: loop {
        for i in 0..groups.len() {
            for j in i + 1..groups.len() {
                let (a, b) = (&groups[i].0, &groups[j].0);
                let inter = intersection_area(a, b);
                if inter > 0.0 && inter / a.area().min(b.area()) >= threshold {
                    let (poly, members) = groups.remove(j);
                    let keeper = &mut groups[i];
                    if let Ok(u) = union_geometry(&keeper.0, &poly) {
                        keeper.0 = u;
                    }
                    keeper.1.extend(members);
                    continue 'outer;
                }
            }
        }
        break;
    }
    canonical_partition(groups.into_iter().map(|g| g.1).collect())
}

pub fn canonical_partition(mut groups: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    for g in &mut groups {
        g.sort_unstable();
    }
    groups.sort();
    groups
}

pub const COCO_THRESHOLDS: [f64; 10] = [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95];

/// One image for the AP oracle: detection confidences and the IoU of each
/// detection against each ground truth.
#[derive(Debug, Clone)]
pub struct OracleImage {
    pub confidences: Vec<f64>,
    pub ious: Vec<Vec<f64>>,
    pub n_gt: usize,
}

/// AP at one threshold by building the precision–recall curve explicitly:
/// greedy matching per image, detections pooled and ranked, then the mean of
/// the best precision at recall ≥ r over r = 0, 0.01, …, 1.
pub fn ap_oracle(images: &[OracleImage], threshold: f64) -> f64 {
    let mut dets: Vec<(f64, bool)> = Vec::new();
    let mut n_gt = 0;
    for img in images {
        n_gt += img.n_gt;
        let mut order: Vec<usize> = (0..img.confidences.len()).collect();
        order.sort_by(|&a, &b| img.confidences[b].partial_cmp(&img.confidences[a]).unwrap());
        let mut used = vec![false; img.n_gt];
        let mut flags = vec![false; img.confidences.len()];
        for &d in &order {
            let mut best: Option<usize> = None;
            for (g, &taken) in used.iter().enumerate() {
                let v = img.ious[d][g];
                if taken || v < threshold {
                    continue;
                }
                if best.is_none_or(|b| v > img.ious[d][b]) {
                    best = Some(g);
                }
            }
            if let Some(g) = best {
                used[g] = true;
                flags[d] = true;
            }
        }
        dets.extend(order.iter().map(|&d| (img.confidences[d], flags[d])));
    }
    dets.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut curve = Vec::new();
    let mut tp = 0.0;
    for (k, &(_, hit)) in dets.iter().enumerate() {
        if hit {
            tp += 1.0;
        }
        curve.push((tp / n_gt as f64, tp / (k + 1) as f64));
    }
    let mut total = 0.0;
    for j in 0..=100 {
        let r = j as f64 / 100.0;
        let best = curve
            .iter()
            .filter(|&&(rec, _)| rec >= r)
            .map(|&(_, prec)| prec)
            .fold(0.0, f64::max);
        total += best;
    }
    total / 101.0
}

pub fn map_oracle(images: &[OracleImage]) -> f64 {
    COCO_THRESHOLDS
        .iter()
        .map(|&t| ap_oracle(images, t))
        .sum::<f64>()
        / 10.0
}

/// Student-t density.
pub fn t_density(x: f64, df: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let ln_c = ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0) - 0.5 * (df * PI).ln();
    (ln_c - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp()
}

/// Romberg integration: trapezoid rule on successively halved steps with
/// Richardson extrapolation.
pub fn romberg(f: impl Fn(f64) -> f64, a: f64, b: f64, levels: usize) -> f64 {
    let mut prev = vec![(b - a) / 2.0 * (f(a) + f(b))];
    for k in 1..levels {
        let n = 1usize << k;
        let h = (b - a) / n as f64;
        let mids: f64 = (1..n).step_by(2).map(|i| f(a + i as f64 * h)).sum();
        let mut row = vec![prev[0] / 2.0 + h * mids];
        let mut scale = 1.0;
        for m in 1..=k {
            scale *= 4.0;
            let v = row[m - 1] + (row[m - 1] - prev[m - 1]) / (scale - 1.0);
            row.push(v);
        }
        prev = row;
    }
    *prev.last().unwrap()
}

/// Two-sided p-value by integrating the density over `[0, |t|]`.
pub fn t_p_oracle(t: f64, df: f64) -> f64 {
    1.0 - 2.0 * romberg(|x| t_density(x, df), 0.0, t.abs(), 14)
}

/// Up to 20 crowns and 20 trunks scattered over a 40 m square.
pub fn match_instance(r: &mut StdRng) -> (Vec<CrownPolygon>, Vec<TrunkRecord>) {
    let n_crowns = r.random_range(0..=20);
    let n_trunks = r.random_range(0..=20);
    let crowns = (0..n_crowns)
        .map(|_| {
            let (x, y) = (r.random_range(0.0..40.0), r.random_range(0.0..40.0));
            random_star(r, x, y, 0.5, 3.0)
        })
        .collect();
    let trunks = (0..n_trunks)
        .map(|i| TrunkRecord {
            tree_id: format!("t{i}"),
            x: r.random_range(0.0..40.0),
            y: r.random_range(0.0..40.0),
            defoliation: 0.0,
        })
        .collect();
    (crowns, trunks)
}

pub fn pred(polygon: CrownPolygon, confidence: f64) -> CrownPrediction {
    CrownPrediction {
        polygon,
        confidence,
        source_image_id: "1".into(),
    }
}

/// Clustered predictions so that merges, chains and ties all occur.
pub fn merge_scene(r: &mut StdRng) -> Vec<CrownPrediction> {
    let n = r.random_range(1..=50);
    let clusters: Vec<(f64, f64)> = (0..r.random_range(1..=8))
        .map(|_| (r.random_range(0.0..30.0), r.random_range(0.0..30.0)))
        .collect();
    (0..n)
        .map(|_| {
            let (cx, cy) = clusters[r.random_range(0..clusters.len())];
            let x = cx + r.random_range(-1.5..1.5);
            let y = cy + r.random_range(-1.5..1.5);
            let poly = random_star(r, x, y, 0.5, 2.0);
            let conf = if r.random_bool(0.3) {
                [0.5, 0.7, 0.9][r.random_range(0..3)]
            } else {
                r.random_range(0.0..1.0)
            };
            pred(poly, conf)
        })
        .collect()
}

/// IoU values biased towards the COCO thresholds, so that `≥` versus `>`
/// matters.
const IOU_CHOICES: [f64; 10] = [0.0, 0.3, 0.5, 0.55, 0.62, 0.75, 0.8, 0.95, 1.0, 0.49];

/// One to three images with up to five ground truths and five detections
/// each; confidences drawn from a small set to force ties.
pub fn ap_config(r: &mut StdRng) -> Vec<OracleImage> {
    let n_images = r.random_range(1..=3);
    let mut images: Vec<OracleImage> = (0..n_images)
        .map(|_| {
            let n_gt = r.random_range(0..=5);
            let n_det = r.random_range(0..=5);
            OracleImage {
                confidences: (0..n_det)
                    .map(|_| {
                        if r.random_bool(0.5) {
                            [0.2, 0.5, 0.9][r.random_range(0..3)]
                        } else {
                            r.random_range(0.0..1.0)
                        }
                    })
                    .collect(),
                ious: (0..n_det)
                    .map(|_| {
                        (0..n_gt)
                            .map(|_| {
                                if r.random_bool(0.6) {
                                    IOU_CHOICES[r.random_range(0..IOU_CHOICES.len())]
                                } else {
                                    r.random_range(0.0..=1.0)
                                }
                            })
                            .collect()
                    })
                    .collect(),
                n_gt,
            }
        })
        .collect();
    if images.iter().all(|i| i.n_gt == 0) {
        images[0].n_gt = 1;
        for row in &mut images[0].ious {
            row.push(r.random_range(0.0..=1.0));
        }
    }
    images
}

pub const SEED_COCO: &str = r#"{"images":[{"id":1,"file_name":"a.png","width":64,"height":64}],
"annotations":[{"id":7,"image_id":1,"category_id":1,
"segmentation":[[1,1,20,1,20,20,1,20],[15,15,30,15,30,30]],"area":361,"bbox":[1,1,19,19],"iscrowd":0}],
"categories":[{"id":1,"name":"crown"}]}"#;
pub const SEED_RESULTS: &str =
    r#"[{"image_id":1,"category_id":1,"segmentation":[[1,1,20,1,20,20]],"score":0.8}]"#;
pub const SEED_WORLD: &str = "0.03\n0.0\n0.0\n-0.03\n500000.015\n4460000.985\n";
pub const SEED_TRUNKS: &str = "tree_id,x,y,defoliation\nt1,500001.5,4459998.0,0.25\nt2,3,4,1\n";

/// Outcome counts of one fuzzing campaign.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FuzzTally {
    pub accepted: usize,
    pub rejected: usize,
    pub panicked: usize,
}

pub fn random_bytes(r: &mut StdRng) -> Vec<u8> {
    let len = r.random_range(0..=256);
    (0..len).map(|_| r.random()).collect()
}

/// Flips, inserts, deletes or truncates a few bytes of a valid document.
pub fn mutate(r: &mut StdRng, seed: &[u8]) -> Vec<u8> {
    let mut v = seed.to_vec();
    for _ in 0..r.random_range(1..=4) {
        match r.random_range(0..4) {
            0 if !v.is_empty() => {
                let i = r.random_range(0..v.len());
                v[i] = r.random();
            }
            1 => {
                let i = r.random_range(0..=v.len());
                v.insert(i, r.random());
            }
            2 if !v.is_empty() => {
                v.remove(r.random_range(0..v.len()));
            }
            _ => v.truncate(r.random_range(0..=v.len())),
        }
    }
    v
}

/// Feeds `n` pure random byte strings and `n` mutations of `seed` to
/// `parse`, counting accepted, rejected and panicking inputs.
pub fn fuzz<T, E>(
    n: usize,
    rng_seed: u64,
    seed: &[u8],
    parse: impl Fn(&[u8]) -> Result<T, E> + std::panic::RefUnwindSafe,
) -> FuzzTally {
    let mut r = rng(rng_seed);
    let mut tally = FuzzTally::default();
    for i in 0..2 * n {
        let input = if i % 2 == 0 {
            random_bytes(&mut r)
        } else {
            mutate(&mut r, seed)
        };
        match std::panic::catch_unwind(|| parse(&input).is_ok()) {
            Ok(true) => tally.accepted += 1,
            Ok(false) => tally.rejected += 1,
            Err(_) => tally.panicked += 1,
        }
    }
    tally
}

/// Runs the campaign for each input parser.
pub fn fuzz_all_parsers(n: usize) -> Vec<(&'static str, FuzzTally)> {
    use crown_dieback::formats::{
        parse_coco, parse_coco_results, parse_trunk_csv, parse_world_file,
    };
    vec![
        ("coco", fuzz(n, 1, SEED_COCO.as_bytes(), parse_coco)),
        (
            "results",
            fuzz(n, 2, SEED_RESULTS.as_bytes(), parse_coco_results),
        ),
        (
            "world",
            fuzz(n, 3, SEED_WORLD.as_bytes(), |b| {
                parse_world_file(&String::from_utf8_lossy(b))
            }),
        ),
        (
            "trunks",
            fuzz(n, 4, SEED_TRUNKS.as_bytes(), parse_trunk_csv),
        ),
    ]
}
