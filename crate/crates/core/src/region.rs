//! Face-to-region assignment and Chan-Vese region statistics.
//!
//! Faces near the curves are labeled by a sign test against the closest
//! curve node; all other faces inherit labels from their neighbors. Region
//! sums are kept in fixed point so that incremental updates and full
//! rescans agree bit for bit.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{CurveNetwork, End, NodeFrames, RegionId};
use crate::mesh::{FaceImage, SurfaceMesh};
use crate::Vec3;

pub const UNASSIGNED: RegionId = RegionId::MAX;

/// Fixed-point scale of face features (values in [0, 1]).
const FEATURE_BITS: i32 = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegionError {
    #[error("inconsistent region labels across faces {face} and {neighbor} ({a} vs {b}); curves do not bound consistent regions")]
    Inconsistent { face: usize, neighbor: usize, a: RegionId, b: RegionId },
    #[error("curves moved beyond the update band near face {face}")]
    Drift { face: usize },
    #[error("face {0} is not reachable from any curve")]
    Unreachable(usize),
    #[error("region {0} is empty")]
    EmptyRegion(RegionId),
    #[error("no coefficient for region {0}")]
    MissingRegion(RegionId),
    #[error("image has {image} faces but the mesh has {mesh}")]
    Size { image: usize, mesh: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ColorSpace {
    #[default]
    Gray,
    Rgb,
    Cb,
}

impl std::str::FromStr for ColorSpace {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gray" => Ok(ColorSpace::Gray),
            "rgb" => Ok(ColorSpace::Rgb),
            "cb" => Ok(ColorSpace::Cb),
            other => Err(format!("unknown color space `{other}` (expected gray|rgb|cb)")),
        }
    }
}

impl ColorSpace {
    pub fn dims(self) -> usize {
        match self {
            ColorSpace::Gray => 1,
            ColorSpace::Rgb => 3,
            ColorSpace::Cb => 4,
        }
    }
}

/// How region means are averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    #[default]
    Count,
    Area,
}

/// Per-face feature vector: gray value, RGB, or chroma direction and brightness.
pub fn features_of(value: &[f64], space: ColorSpace) -> Vec<f64> {
    match space {
        ColorSpace::Gray => vec![value.iter().sum::<f64>() / value.len() as f64],
        ColorSpace::Rgb => {
            if value.len() == 1 {
                vec![value[0]; 3]
            } else {
                value.to_vec()
            }
        }
        ColorSpace::Cb => {
            let rgb = if value.len() == 1 { Vec3::repeat(value[0]) } else { Vec3::new(value[0], value[1], value[2]) };
            let b = rgb.norm();
            // Black carries no chroma; use the gray direction.
            let v = if b > 0.0 { rgb / b } else { Vec3::repeat(1.0 / 3f64.sqrt()) };
            vec![v.x, v.y, v.z, b]
        }
    }
}

fn quantize(x: f64) -> i128 {
    (x * (1u64 << FEATURE_BITS) as f64).round() as i128
}

fn dequantize(q: i128) -> f64 {
    q as f64 / (1u64 << FEATURE_BITS) as f64
}

/// Face features in floating and fixed point.
#[derive(Debug, Clone)]
pub struct FaceFeatures {
    space: ColorSpace,
    dims: usize,
    values: Vec<f64>,
    q: Vec<i128>,
    qa: Vec<i128>,
    area_scale: f64,
}

impl FaceFeatures {
    pub fn new(mesh: &SurfaceMesh, image: &FaceImage, space: ColorSpace) -> Result<Self, RegionError> {
        if image.len() != mesh.num_faces() {
            return Err(RegionError::Size { image: image.len(), mesh: mesh.num_faces() });
        }
        let dims = space.dims();
        let mut values = Vec::with_capacity(dims * image.len());
        for f in 0..image.len() {
            values.extend(features_of(image.value(f), space));
        }
        let q = values.iter().map(|&v| quantize(v)).collect();
        let max_area = (0..mesh.num_faces()).map(|f| mesh.face_area(f)).fold(0.0, f64::max);
        let area_scale = 1.0 / max_area;
        let qa = (0..mesh.num_faces()).map(|f| quantize(mesh.face_area(f) * area_scale)).collect();
        Ok(Self { space, dims, values, q, qa, area_scale })
    }

    pub fn space(&self) -> ColorSpace {
        self.space
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn value(&self, f: usize) -> &[f64] {
        &self.values[f * self.dims..(f + 1) * self.dims]
    }

    fn quantized(&self, f: usize) -> &[i128] {
        &self.q[f * self.dims..(f + 1) * self.dims]
    }
}

/// Accumulated statistics of one region, in fixed point.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RegionStats {
    pub count: u64,
    pub sum: Vec<i128>,
    pub area: i128,
    pub area_sum: Vec<i128>,
}

impl RegionStats {
    fn new(dims: usize) -> Self {
        Self { count: 0, sum: vec![0; dims], area: 0, area_sum: vec![0; dims] }
    }

    fn add(&mut self, feats: &FaceFeatures, f: usize, sign: i128) {
        if sign > 0 {
            self.count += 1;
        } else {
            self.count -= 1;
        }
        let qa = feats.qa[f];
        self.area += sign * qa;
        for (d, &v) in feats.quantized(f).iter().enumerate() {
            self.sum[d] += sign * v;
            self.area_sum[d] += sign * v * qa;
        }
    }

    /// Summed face feature vector.
    pub fn color_sum(&self) -> Vec<f64> {
        self.sum.iter().map(|&s| dequantize(s)).collect()
    }

    pub fn area(&self, feats: &FaceFeatures) -> f64 {
        dequantize(self.area) / feats.area_scale
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionMap {
    labels: Vec<RegionId>,
    stats: BTreeMap<RegionId, RegionStats>,
    dims: usize,
}

/// Band faces with their sign-test labels, in breadth-first order.
#[derive(Debug, Clone, Default)]
pub struct Band {
    pub faces: Vec<usize>,
    pub labels: Vec<RegionId>,
    pub levels: Vec<u32>,
    /// Level per face; `u32::MAX` outside the band.
    pub level_of: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct UpdateSummary {
    pub band_faces: usize,
    pub flipped: usize,
}

fn num_segments(c: &crate::curve::Curve) -> usize {
    if c.closed {
        c.len()
    } else {
        c.len().saturating_sub(1)
    }
}

/// Squared distance from `p` to segment `s` of `c` and the projection
/// parameter, clamped to `[0, 1]`.
fn segment_distance(c: &crate::curve::Curve, s: usize, p: &Vec3) -> (f64, f64) {
    let x = c.nodes[s];
    let e = c.nodes[(s + 1) % c.len()] - x;
    let len2 = e.norm_squared();
    let t = if len2 > 0.0 { ((p - x).dot(&e) / len2).clamp(0.0, 1.0) } else { 0.0 };
    ((p - (x + e * t)).norm_squared(), t)
}

fn nearest_descent(net: &CurveNetwork, p: &Vec3, (ci, mut s): (usize, usize)) -> (usize, usize, f64) {
    let c = &net.curves[ci];
    let ns = num_segments(c);
    let mut d = segment_distance(c, s, p).0;
    loop {
        let mut moved = false;
        let prev = if s > 0 {
            Some(s - 1)
        } else if c.closed {
            Some(ns - 1)
        } else {
            None
        };
        let next = if s + 1 < ns {
            Some(s + 1)
        } else if c.closed {
            Some(0)
        } else {
            None
        };
        for nb in [prev, next].into_iter().flatten() {
            let dn = segment_distance(c, nb, p).0;
            if dn < d {
                d = dn;
                s = nb;
                moved = true;
            }
        }
        if !moved {
            return (ci, s, d);
        }
    }
}

/// Unit conormal `t x n` of segment `s`, matching the node conormals.
fn segment_normal(c: &crate::curve::Curve, fr: &NodeFrames, s: usize) -> Vec3 {
    let (a, b) = (s, (s + 1) % c.len());
    let phi = fr.omega_phi[a] + fr.omega_phi[b];
    (c.nodes[b] - c.nodes[a]).cross(&phi).try_normalize(0.0).unwrap_or(fr.omega_m[a] + fr.omega_m[b])
}

/// Signed side of `p` against segment `s`: the segment conormal for an
/// interior projection, otherwise the mean conormal of the segments meeting
/// at the nearer end node. The node conormal is not used there since it can
/// point sideways at a sharp corner.
fn side(c: &crate::curve::Curve, fr: &NodeFrames, s: usize, p: &Vec3) -> f64 {
    let ns = num_segments(c);
    let (a, b) = (s, (s + 1) % c.len());
    let (_, t) = segment_distance(c, s, p);
    let own = segment_normal(c, fr, s);
    let vertex = |v: usize, other: Option<usize>| {
        let n = own + other.map_or(Vec3::zeros(), |o| segment_normal(c, fr, o));
        (p - c.nodes[v]).dot(&n)
    };
    if t <= 0.0 {
        let prev = if s > 0 {
            Some(s - 1)
        } else if c.closed {
            Some(ns - 1)
        } else {
            None
        };
        return vertex(a, prev);
    }
    if t >= 1.0 {
        let next = if s + 1 < ns {
            Some(s + 1)
        } else if c.closed {
            Some(0)
        } else {
            None
        };
        return vertex(b, next);
    }
    (p - c.nodes[a]).dot(&own)
}

/// Open-curve end that the projection of `p` onto segment `s` clamps to.
fn clamped_end(c: &crate::curve::Curve, s: usize, p: &Vec3) -> Option<End> {
    if c.closed {
        return None;
    }
    let (_, t) = segment_distance(c, s, p);
    if t <= 0.0 && s == 0 {
        Some(End::Start)
    } else if t >= 1.0 && s + 1 == num_segments(c) {
        Some(End::End)
    } else {
        None
    }
}

/// Region containing `p` near junction `k`. The three outgoing directions are
/// ordered about the surface normal and `p` takes the region just
/// counterclockwise of the nearest direction clockwise from it.
fn junction_region(net: &CurveNetwork, frames: &[NodeFrames], k: usize, p: &Vec3) -> Option<RegionId> {
    let mut arms = Vec::with_capacity(3);
    for e in &net.junctions[k].ends {
        let ci = net.index_of(e.curve)?;
        let c = &net.curves[ci];
        let (at, next, ccw) = match e.end {
            End::Start => (0, 1, c.region_minus),
            End::End => (c.len() - 1, c.len() - 2, c.region_plus),
        };
        arms.push((c.nodes[at], c.nodes[next] - c.nodes[at], frames[ci].omega_phi[at], ccw));
    }
    let (origin, d0, n, _) = arms[0];
    let x = (d0 - n * n.dot(&d0)).try_normalize(0.0)?;
    let y = n.cross(&x);
    let angle = |v: Vec3| v.dot(&y).atan2(v.dot(&x)).rem_euclid(std::f64::consts::TAU);
    let q = angle(p - origin);
    arms.iter()
        .map(|&(_, d, _, ccw)| ((q - angle(d)).rem_euclid(std::f64::consts::TAU), ccw))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, r)| r)
}

/// Grows the band `n0` levels from faces met by the curve and labels
/// each band face by its side of the closest curve segment. A zero sign goes
/// to `region_plus`.
pub fn compute_band(mesh: &SurfaceMesh, net: &CurveNetwork, frames: &[NodeFrames], n0: u32) -> Band {
    let nf = mesh.num_faces();
    let mut level_of = vec![u32::MAX; nf];
    let mut cand: Vec<(usize, usize, f64)> = vec![(usize::MAX, 0, f64::INFINITY); nf];
    let mut band = Band::default();
    let step = 0.5 * mesh.mean_edge_length();

    for (ci, c) in net.curves.iter().enumerate() {
        let ns = num_segments(c);
        if ns == 0 {
            continue;
        }
        let mut seed = |f: usize, s: usize| {
            let d = segment_distance(c, s, &mesh.face_center(f)).0;
            if level_of[f] == u32::MAX {
                level_of[f] = 0;
                band.faces.push(f);
            }
            if d < cand[f].2 {
                cand[f] = (ci, s, d);
            }
        };
        for (j, &f) in c.faces.iter().enumerate() {
            seed(f, j.min(ns - 1));
        }
        // Faces crossed between nodes, so long segments are covered too.
        for s in 0..ns {
            let (x, y) = (c.nodes[s], c.nodes[(s + 1) % c.len()]);
            let k = ((y - x).norm() / step).ceil() as usize;
            let mut hint = c.faces[s];
            for i in 1..k {
                let q = x + (y - x) * (i as f64 / k as f64);
                if let Ok(loc) = mesh.project_to_surface(&q, Some(hint)) {
                    hint = loc.face;
                    seed(loc.face, s);
                }
            }
        }
    }
    for &f in &band.faces {
        let (ci, s, _) = cand[f];
        cand[f] = nearest_descent(net, &mesh.face_center(f), (ci, s));
    }
    let mut start = 0;
    for level in 1..=n0 {
        let end = band.faces.len();
        for k in start..end {
            let f = band.faces[k];
            for g in mesh.face_neighbors(f).iter().flatten().copied() {
                if level_of[g] == u32::MAX {
                    level_of[g] = level;
                    band.faces.push(g);
                }
                if level_of[g] == level {
                    let (ci, s, _) = cand[f];
                    let d = segment_distance(&net.curves[ci], s, &mesh.face_center(g)).0;
                    if d < cand[g].2 || (d == cand[g].2 && (ci, s) < (cand[g].0, cand[g].1)) {
                        cand[g] = (ci, s, d);
                    }
                }
            }
        }
        for &g in &band.faces[end..] {
            let (ci, s, _) = cand[g];
            cand[g] = nearest_descent(net, &mesh.face_center(g), (ci, s));
        }
        start = end;
    }
    band.levels = band.faces.iter().map(|&f| level_of[f]).collect();
    band.labels = band
        .faces
        .iter()
        .map(|&f| {
            let (ci, s, _) = cand[f];
            let c = &net.curves[ci];
            let p = mesh.face_center(f);
            let at_junction = clamped_end(c, s, &p).and_then(|e| net.junction_at(c.id, e));
            if let Some(r) = at_junction.and_then(|(k, _)| junction_region(net, frames, k, &p)) {
                return r;
            }
            if side(c, &frames[ci], s, &p) >= 0.0 {
                c.region_plus
            } else {
                c.region_minus
            }
        })
        .collect();
    band.level_of = level_of;
    band
}

impl RegionMap {
    /// Every face in one region.
    pub fn uniform(num_faces: usize, region: RegionId, feats: &FaceFeatures) -> Self {
        let mut map = RegionMap { labels: vec![region; num_faces], stats: BTreeMap::new(), dims: feats.dims() };
        map.stats = map.rescan(feats);
        map
    }

    pub fn from_labels(labels: Vec<RegionId>, feats: &FaceFeatures) -> Self {
        let mut map = RegionMap { labels, stats: BTreeMap::new(), dims: feats.dims() };
        map.stats = map.rescan(feats);
        map
    }

    pub fn labels(&self) -> &[RegionId] {
        &self.labels
    }

    pub fn region_of(&self, f: usize) -> RegionId {
        self.labels[f]
    }

    pub fn stats(&self) -> &BTreeMap<RegionId, RegionStats> {
        &self.stats
    }

    pub fn count(&self, k: RegionId) -> u64 {
        self.stats.get(&k).map_or(0, |s| s.count)
    }

    pub fn total_count(&self) -> u64 {
        self.stats.values().map(|s| s.count).sum()
    }

    /// Region statistics recomputed from scratch.
    pub fn rescan(&self, feats: &FaceFeatures) -> BTreeMap<RegionId, RegionStats> {
        let mut out: BTreeMap<RegionId, RegionStats> = BTreeMap::new();
        for (f, &k) in self.labels.iter().enumerate() {
            out.entry(k).or_insert_with(|| RegionStats::new(self.dims)).add(feats, f, 1);
        }
        out
    }

    fn relabel(&mut self, f: usize, k: RegionId, feats: &FaceFeatures) {
        let old = self.labels[f];
        if old == k {
            return;
        }
        if let Some(s) = self.stats.get_mut(&old) {
            s.add(feats, f, -1);
        }
        self.stats.entry(k).or_insert_with(|| RegionStats::new(self.dims)).add(feats, f, 1);
        self.labels[f] = k;
    }

    /// Drops regions without faces that no curve references.
    pub fn prune(&mut self, net: &CurveNetwork) {
        let live = net.regions();
        self.stats.retain(|k, s| s.count > 0 || live.contains(k));
    }
}

/// Full labeling from scratch.
pub fn initialize_regions(
    mesh: &SurfaceMesh,
    net: &CurveNetwork,
    frames: &[NodeFrames],
    feats: &FaceFeatures,
    n0: u32,
) -> Result<RegionMap, RegionError> {
    let nf = mesh.num_faces();
    let band = compute_band(mesh, net, frames, n0);
    let mut labels = vec![UNASSIGNED; nf];
    for (&f, &k) in band.faces.iter().zip(&band.labels) {
        labels[f] = k;
    }
    let mut queue: VecDeque<usize> = band.faces.iter().copied().collect();
    while let Some(f) = queue.pop_front() {
        for g in mesh.face_neighbors(f).iter().flatten().copied() {
            if labels[g] == UNASSIGNED {
                labels[g] = labels[f];
                queue.push_back(g);
            }
        }
    }
    if let Some(f) = labels.iter().position(|&k| k == UNASSIGNED) {
        return Err(RegionError::Unreachable(f));
    }
    check_outside_band(mesh, &labels, &band.level_of)?;
    let mut map = RegionMap { labels, stats: BTreeMap::new(), dims: feats.dims() };
    map.stats = map.rescan(feats);
    for k in net.regions() {
        map.stats.entry(k).or_insert_with(|| RegionStats::new(feats.dims()));
    }
    Ok(map)
}

fn check_outside_band(mesh: &SurfaceMesh, labels: &[RegionId], level_of: &[u32]) -> Result<(), RegionError> {
    for f in 0..mesh.num_faces() {
        if level_of[f] != u32::MAX {
            continue;
        }
        for g in mesh.face_neighbors(f).iter().flatten().copied() {
            if labels[g] != labels[f] {
                return Err(RegionError::Inconsistent { face: f, neighbor: g, a: labels[f], b: labels[g] });
            }
        }
    }
    Ok(())
}

/// Re-tests only the band faces and updates statistics per flipped face.
///
/// Fails with [`RegionError::Drift`] when a band face on the outermost level
/// disagrees with a neighbor outside the band; the map is left untouched in
/// that case.
pub fn update_regions_incremental(
    map: &mut RegionMap,
    mesh: &SurfaceMesh,
    net: &CurveNetwork,
    frames: &[NodeFrames],
    feats: &FaceFeatures,
    n0: u32,
) -> Result<UpdateSummary, RegionError> {
    let band = compute_band(mesh, net, frames, n0);
    for ((&f, &k), &lvl) in band.faces.iter().zip(&band.labels).zip(&band.levels) {
        if lvl < n0 {
            continue;
        }
        for g in mesh.face_neighbors(f).iter().flatten().copied() {
            if band.level_of[g] == u32::MAX && map.labels[g] != k {
                return Err(RegionError::Drift { face: f });
            }
        }
    }
    let mut flipped = 0;
    for (&f, &k) in band.faces.iter().zip(&band.labels) {
        if map.labels[f] != k {
            map.relabel(f, k, feats);
            flipped += 1;
        }
    }
    for k in net.regions() {
        map.stats.entry(k).or_insert_with(|| RegionStats::new(feats.dims()));
    }
    Ok(UpdateSummary { band_faces: band.faces.len(), flipped })
}

/// Region means c_k (or normalized chroma and brightness in CB mode).
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub space: ColorSpace,
    pub means: BTreeMap<RegionId, Vec<f64>>,
}

impl Coefficients {
    pub fn get(&self, k: RegionId) -> Result<&[f64], RegionError> {
        self.means.get(&k).map(Vec::as_slice).ok_or(RegionError::MissingRegion(k))
    }
}

pub fn compute_coefficients(
    map: &RegionMap,
    feats: &FaceFeatures,
    weighting: Weighting,
) -> Result<Coefficients, RegionError> {
    let mut means = BTreeMap::new();
    for (&k, s) in &map.stats {
        if s.count == 0 {
            return Err(RegionError::EmptyRegion(k));
        }
        let mut m: Vec<f64> = match weighting {
            Weighting::Count => s.sum.iter().map(|&v| dequantize(v) / s.count as f64).collect(),
            Weighting::Area => {
                let a = s.area as f64;
                s.area_sum.iter().map(|&v| dequantize(v) / a).collect()
            }
        };
        if feats.space() == ColorSpace::Cb {
            let n = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
            if n > 0.0 {
                for c in &mut m[..3] {
                    *c /= n;
                }
            }
        }
        means.insert(k, m);
    }
    Ok(Coefficients { space: feats.space(), means })
}
