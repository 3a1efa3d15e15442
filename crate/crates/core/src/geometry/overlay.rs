//! Boundary-classification overlay of two simple polygons.
//!
//! Both rings are split at every mutual contact point; each resulting
//! sub-segment is then classified as inside, outside, or lying on the other
//! ring's boundary (same or opposite direction). Intersection and union are
//! read off those classes: the intersection area by Green's theorem over
//! the selected segments, the geometry by tracing them into rings.

use std::collections::{HashMap, HashSet};

use super::{point_in_ring, signed_area, BBox, CrownPolygon, GeometryError, Point2};

/// Contact tolerance for a scene of the given extent: 1e-9, scaled up for
/// extents beyond one unit.
pub fn snap_tolerance(extent: f64) -> f64 {
    1e-9 * extent.max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    Inside,
    Outside,
    SharedSame,
    SharedOpposite,
}

#[derive(Debug, Clone, Copy)]
struct Seg {
    from: usize,
    to: usize,
    class: Class,
}

pub(super) struct Overlay {
    local: Vec<Point2>,
    global: Vec<Point2>,
    segs_a: Vec<Seg>,
    segs_b: Vec<Seg>,
    tol: f64,
}

struct DisjointSet(Vec<usize>);

impl DisjointSet {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    /// The smaller id becomes the root so vertices of the first ring win.
    fn unite(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

impl Overlay {
    pub(super) fn build(a: &CrownPolygon, b: &CrownPolygon) -> Self {
        let va = a.vertices();
        let vb = b.vertices();
        let (na, nb) = (va.len(), vb.len());
        let origin = va[0];
        let extent = {
            let bb = a.bbox().union(&b.bbox());
            bb.width().max(bb.height())
        };
        let tol = snap_tolerance(extent);

        let mut global: Vec<Point2> = va.iter().chain(vb).copied().collect();
        let mut local: Vec<Point2> = global.iter().map(|p| p.sub(origin)).collect();
        let mut dsu = DisjointSet((0..na + nb).collect());

        let edge_box = |pts: &[Point2], i: usize, n: usize| {
            let mut bb = BBox::of(&[pts[i], pts[(i + 1) % n]]);
            bb.min.x -= tol;
            bb.min.y -= tol;
            bb.max.x += tol;
            bb.max.y += tol;
            bb
        };
        let boxes_a: Vec<BBox> = (0..na).map(|i| edge_box(&local[..na], i, na)).collect();
        let boxes_b: Vec<BBox> = (0..nb).map(|j| edge_box(&local[na..], j, nb)).collect();

        let mut splits_a: Vec<Vec<(f64, usize)>> = vec![Vec::new(); na];
        let mut splits_b: Vec<Vec<(f64, usize)>> = vec![Vec::new(); nb];

        for i in 0..na {
            let (ia1, ia2) = (i, (i + 1) % na);
            for j in 0..nb {
                if !boxes_a[i].intersects(&boxes_b[j]) {
                    continue;
                }
                let (ib1, ib2) = (na + j, na + (j + 1) % nb);
                let (p1, p2, q1, q2) = (local[ia1], local[ia2], local[ib1], local[ib2]);

                for (q, iq) in [(q1, ib1), (q2, ib2)] {
                    match contact(q, p1, p2, tol) {
                        Contact::Start => dsu.unite(iq, ia1),
                        Contact::End => dsu.unite(iq, ia2),
                        Contact::Interior(t) => splits_a[i].push((t, iq)),
                        Contact::None => {}
                    }
                }
                for (p, ip) in [(p1, ia1), (p2, ia2)] {
                    match contact(p, q1, q2, tol) {
                        Contact::Start => dsu.unite(ip, ib1),
                        Contact::End => dsu.unite(ip, ib2),
                        Contact::Interior(u) => splits_b[j].push((u, ip)),
                        Contact::None => {}
                    }
                }

                // Proper crossing: every endpoint clearly off the other line.
                let r = p2.sub(p1);
                let s = q2.sub(q1);
                let (lr, ls) = (r.dot(r).sqrt(), s.dot(s).sqrt());
                if lr == 0.0 || ls == 0.0 {
                    continue;
                }
                let d1 = r.cross(q1.sub(p1)) / lr;
                let d2 = r.cross(q2.sub(p1)) / lr;
                let d3 = s.cross(p1.sub(q1)) / ls;
                let d4 = s.cross(p2.sub(q1)) / ls;
                let straddles = |u: f64, v: f64| (u > tol && v < -tol) || (u < -tol && v > tol);
                if straddles(d1, d2) && straddles(d3, d4) {
                    let denom = r.cross(s);
                    let w = q1.sub(p1);
                    let t = w.cross(s) / denom;
                    let u = w.cross(r) / denom;
                    let x = Point2::new(p1.x + t * r.x, p1.y + t * r.y);
                    let id = local.len();
                    local.push(x);
                    global.push(x.add(origin));
                    dsu.0.push(id);
                    splits_a[i].push((t, id));
                    splits_b[j].push((u, id));
                }
            }
        }

        let mut canon = |id: usize| dsu.find(id);
        let segs_a = split_ring(0, na, &mut splits_a, &mut canon);
        let segs_b = split_ring(na, nb, &mut splits_b, &mut canon);

        let mut ov = Overlay {
            local,
            global,
            segs_a,
            segs_b,
            tol,
        };
        let ring_a: Vec<Point2> = ov.local[..na].to_vec();
        let ring_b: Vec<Point2> = ov.local[na..na + nb].to_vec();
        classify(&mut ov.segs_a, &ov.segs_b, &ov.local, &ring_b);
        classify(&mut ov.segs_b, &ov.segs_a, &ov.local, &ring_a);
        ov
    }

    fn selected(&self, keep: Class) -> impl Iterator<Item = &Seg> {
        self.segs_a
            .iter()
            .filter(move |s| s.class == keep || s.class == Class::SharedSame)
            .chain(self.segs_b.iter().filter(move |s| s.class == keep))
    }

    pub(super) fn intersection_area(&self) -> f64 {
        let mut s = 0.0;
        for seg in self.selected(Class::Inside) {
            s += self.local[seg.from].cross(self.local[seg.to]);
        }
        (0.5 * s).max(0.0)
    }

    pub(super) fn union_ring(&self) -> Result<CrownPolygon, GeometryError> {
        let mut rings = self.trace(Class::Outside);
        rings.retain(|r| r.len() >= 3);
        let mut best: Option<(f64, Vec<Point2>)> = None;
        for ring in rings {
            let a = signed_area(&ring);
            if a > 0.0 && best.as_ref().is_none_or(|(ba, _)| a > *ba) {
                best = Some((a, ring));
            }
        }
        let (_, ring) = best.ok_or(GeometryError::DegenerateOverlay)?;
        CrownPolygon::new(ring).map_err(|_| GeometryError::DegenerateOverlay)
    }

    pub(super) fn intersection_rings(&self) -> Vec<CrownPolygon> {
        self.trace(Class::Inside)
            .into_iter()
            .filter(|r| r.len() >= 3 && signed_area(r) > 0.0)
            .filter_map(|r| CrownPolygon::new(r).ok())
            .collect()
    }

    /// Links the selected directed segments into closed rings, keeping the
    /// region on the left and turning as far left as possible at junctions
    /// so that rings touching at a point come out as separate rings.
    fn trace(&self, keep: Class) -> Vec<Vec<Point2>> {
        let segs: Vec<Seg> = self.selected(keep).copied().collect();
        let mut outgoing: HashMap<usize, Vec<usize>> = HashMap::new();
        for (k, s) in segs.iter().enumerate() {
            outgoing.entry(s.from).or_default().push(k);
        }
        let dir = |s: &Seg| self.local[s.to].sub(self.local[s.from]);
        let mut used = vec![false; segs.len()];
        let mut rings = Vec::new();

        for start in 0..segs.len() {
            if used[start] {
                continue;
            }
            let mut ring_nodes = vec![segs[start].from];
            let mut cur = start;
            used[start] = true;
            let mut closed = false;
            for _ in 0..=segs.len() {
                let v = segs[cur].to;
                let rev = dir(&segs[cur]);
                let rev = Point2::new(-rev.x, -rev.y);
                let next = outgoing.get(&v).and_then(|cands| {
                    cands
                        .iter()
                        .copied()
                        .filter(|&c| !used[c] || c == start)
                        .map(|c| {
                            let w = dir(&segs[c]);
                            let mut ang = w.cross(rev).atan2(rev.dot(w));
                            if ang <= 0.0 {
                                ang += std::f64::consts::TAU;
                            }
                            (ang, c)
                        })
                        .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)))
                        .map(|(_, c)| c)
                });
                match next {
                    Some(c) if c == start => {
                        closed = true;
                        break;
                    }
                    Some(c) => {
                        used[c] = true;
                        ring_nodes.push(v);
                        cur = c;
                    }
                    None => break,
                }
            }
            if closed {
                let pts: Vec<Point2> = ring_nodes.iter().map(|&n| self.global[n]).collect();
                let cleaned = clean_ring(pts, self.tol);
                if cleaned.len() >= 3 {
                    rings.push(cleaned);
                }
            }
        }
        rings
    }
}

enum Contact {
    None,
    Start,
    End,
    Interior(f64),
}

/// Where point `q` touches segment `p1→p2`, within `tol`.
fn contact(q: Point2, p1: Point2, p2: Point2, tol: f64) -> Contact {
    if q.distance(p1) <= tol {
        return Contact::Start;
    }
    if q.distance(p2) <= tol {
        return Contact::End;
    }
    let r = p2.sub(p1);
    let len2 = r.dot(r);
    if len2 == 0.0 {
        return Contact::None;
    }
    let t = q.sub(p1).dot(r) / len2;
    if t <= 0.0 || t >= 1.0 {
        return Contact::None;
    }
    let foot = Point2::new(p1.x + t * r.x, p1.y + t * r.y);
    if q.distance(foot) <= tol {
        Contact::Interior(t)
    } else {
        Contact::None
    }
}

fn split_ring(
    offset: usize,
    n: usize,
    splits: &mut [Vec<(f64, usize)>],
    canon: &mut impl FnMut(usize) -> usize,
) -> Vec<Seg> {
    let mut segs = Vec::new();
    for (i, sp) in splits.iter_mut().enumerate() {
        sp.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut chain = Vec::with_capacity(sp.len() + 2);
        chain.push(canon(offset + i));
        chain.extend(sp.iter().map(|&(_, id)| canon(id)));
        chain.push(canon(offset + (i + 1) % n));
        chain.dedup();
        for w in chain.windows(2) {
            segs.push(Seg {
                from: w[0],
                to: w[1],
                class: Class::Outside,
            });
        }
    }
    segs
}

fn classify(segs: &mut [Seg], other: &[Seg], local: &[Point2], other_ring: &[Point2]) {
    let directed: HashSet<(usize, usize)> = other.iter().map(|s| (s.from, s.to)).collect();
    for s in segs.iter_mut() {
        s.class = if directed.contains(&(s.from, s.to)) {
            Class::SharedSame
        } else if directed.contains(&(s.to, s.from)) {
            Class::SharedOpposite
        } else {
            let (p, q) = (local[s.from], local[s.to]);
            let mid = Point2::new(0.5 * (p.x + q.x), 0.5 * (p.y + q.y));
            if point_in_ring(other_ring, mid) {
                Class::Inside
            } else {
                Class::Outside
            }
        };
    }
}

/// Drops repeated and collinear vertices until none remain.
pub(crate) fn clean_ring(mut pts: Vec<Point2>, tol: f64) -> Vec<Point2> {
    loop {
        let n = pts.len();
        if n < 3 {
            return pts;
        }
        let mut drop = None;
        for i in 0..n {
            let a = pts[(i + n - 1) % n];
            let b = pts[i];
            let c = pts[(i + 1) % n];
            if a.distance(b) <= tol {
                drop = Some(i);
                break;
            }
            let ac = c.sub(a);
            let len = ac.dot(ac).sqrt();
            if len == 0.0 || (ac.cross(b.sub(a)) / len).abs() <= tol {
                drop = Some(i);
                break;
            }
        }
        match drop {
            Some(i) => {
                pts.remove(i);
            }
            None => return pts,
        }
    }
}
