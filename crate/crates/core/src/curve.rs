//! Polygonal curve networks on a surface mesh.
//!
//! Curves are open or closed polylines whose nodes lie on the mesh. Open
//! curves end in triple junctions; the three endpoints of a junction always
//! hold the same coordinates.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{MeshError, SurfaceMesh};
use crate::Vec3;

pub type CurveId = u64;
pub type RegionId = u32;

#[derive(Debug, Error)]
pub enum CurveError {
    #[error("curve {curve}: assumption (A) violated at node {node} ({reason})")]
    AssumptionA { curve: CurveId, node: usize, reason: &'static str },
    #[error("curve {curve}: {msg}")]
    Invalid { curve: CurveId, msg: String },
    #[error("junction {junction}: {msg}")]
    Junction { junction: usize, msg: String },
    #[error("unknown curve id {0}")]
    UnknownCurve(CurveId),
    #[error("curve file: {0}")]
    Format(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum End {
    Start,
    End,
}

impl End {
    pub fn as_index(self) -> u8 {
        match self {
            End::Start => 0,
            End::End => 1,
        }
    }

    pub fn from_index(i: u8) -> Option<Self> {
        match i {
            0 => Some(End::Start),
            1 => Some(End::End),
            _ => None,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            End::Start => End::End,
            End::End => End::Start,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub id: CurveId,
    pub nodes: Vec<Vec3>,
    /// Face containing each node, refreshed whenever nodes move.
    pub faces: Vec<usize>,
    pub closed: bool,
    pub region_plus: RegionId,
    pub region_minus: RegionId,
}

impl Curve {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn min_nodes(closed: bool) -> usize {
        if closed {
            3
        } else {
            2
        }
    }

    pub fn num_segments(&self) -> usize {
        if self.closed {
            self.nodes.len()
        } else {
            self.nodes.len().saturating_sub(1)
        }
    }

    /// Endpoints `(a, b)` of segment `s`.
    pub fn segment(&self, s: usize) -> (usize, usize) {
        (s, (s + 1) % self.nodes.len())
    }

    pub fn segment_length(&self, s: usize) -> f64 {
        let (a, b) = self.segment(s);
        (self.nodes[b] - self.nodes[a]).norm()
    }

    pub fn total_length(&self) -> f64 {
        (0..self.num_segments()).map(|s| self.segment_length(s)).sum()
    }

    pub fn mean_spacing(&self) -> f64 {
        self.total_length() / self.num_segments().max(1) as f64
    }

    pub fn end_index(&self, end: End) -> usize {
        match end {
            End::Start => 0,
            End::End => self.nodes.len() - 1,
        }
    }

    /// Index distance along the curve, cyclic for closed curves.
    pub fn index_distance(&self, a: usize, b: usize) -> usize {
        let d = a.abs_diff(b);
        if self.closed {
            d.min(self.nodes.len() - d)
        } else {
            d
        }
    }

    /// Checks assumption (A): consecutive nodes distinct and, at every
    /// interior node, distinct neighbors.
    pub fn check_assumption_a(&self) -> Result<(), CurveError> {
        let n = self.nodes.len();
        if n < Self::min_nodes(self.closed) {
            return Err(CurveError::Invalid { curve: self.id, msg: format!("{n} nodes is below the minimum") });
        }
        if self.region_plus == self.region_minus {
            return Err(CurveError::Invalid { curve: self.id, msg: "region_plus equals region_minus".into() });
        }
        for s in 0..self.num_segments() {
            let (a, b) = self.segment(s);
            if self.nodes[a] == self.nodes[b] {
                return Err(CurveError::AssumptionA { curve: self.id, node: a, reason: "coincident neighbor nodes" });
            }
        }
        for j in 0..n {
            if let (Some(p), Some(q)) = (self.prev(j), self.next(j)) {
                if self.nodes[p] == self.nodes[q] {
                    return Err(CurveError::AssumptionA {
                        curve: self.id,
                        node: j,
                        reason: "neighbors of node coincide",
                    });
                }
            }
        }
        Ok(())
    }

    pub fn prev(&self, j: usize) -> Option<usize> {
        let n = self.nodes.len();
        if j > 0 {
            Some(j - 1)
        } else if self.closed {
            Some(n - 1)
        } else {
            None
        }
    }

    pub fn next(&self, j: usize) -> Option<usize> {
        let n = self.nodes.len();
        if j + 1 < n {
            Some(j + 1)
        } else if self.closed {
            Some(0)
        } else {
            None
        }
    }

    /// Reverses node order and swaps the region labels, keeping the
    /// geometric meaning of `region_plus` unchanged.
    pub fn reverse(&mut self) {
        self.nodes.reverse();
        self.faces.reverse();
        if self.closed {
            // Keep node 0 in place so indices stay comparable.
            self.nodes.rotate_right(1);
            self.faces.rotate_right(1);
        }
        std::mem::swap(&mut self.region_plus, &mut self.region_minus);
    }
}

/// Per-node discrete frame of one curve.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodeFrames {
    pub omega_phi: Vec<Vec3>,
    pub omega_d: Vec<Vec3>,
    pub omega_m: Vec<Vec3>,
}

/// Frames from explicit per-node surface normals.
pub fn frames_from_normals(curve: &Curve, normals: &[Vec3]) -> Result<NodeFrames, CurveError> {
    curve.check_assumption_a()?;
    let n = curve.nodes.len();
    let mut out =
        NodeFrames { omega_phi: Vec::with_capacity(n), omega_d: Vec::with_capacity(n), omega_m: Vec::with_capacity(n) };
    for j in 0..n {
        let (a, b) = match (curve.prev(j), curve.next(j)) {
            (Some(p), Some(q)) => (p, q),
            (None, Some(q)) => (j, q),
            (Some(p), None) => (p, j),
            (None, None) => unreachable!("curve with a single node"),
        };
        let phi = normals[j].normalize();
        let d = curve.nodes[b] - curve.nodes[a];
        let d = d / d.norm();
        let t = d - phi * d.dot(&phi);
        let tn = t.norm();
        if !(tn > 1e-12) {
            return Err(CurveError::AssumptionA {
                curve: curve.id,
                node: j,
                reason: "tangent parallel to the surface normal",
            });
        }
        let t = t / tn;
        let m = t.cross(&phi);
        out.omega_phi.push(phi);
        out.omega_d.push(d);
        out.omega_m.push(m / m.norm());
    }
    Ok(out)
}

/// Frames with surface normals taken from the face of each node.
pub fn compute_frames(curve: &Curve, mesh: &SurfaceMesh) -> Result<NodeFrames, CurveError> {
    let normals: Vec<Vec3> = curve.faces.iter().map(|&f| mesh.face_normal(f)).collect();
    frames_from_normals(curve, &normals)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JunctionEnd {
    pub curve: CurveId,
    pub end: End,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripleJunction {
    pub ends: [JunctionEnd; 3],
}

/// Open and closed curves together with their triple junctions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CurveNetwork {
    pub curves: Vec<Curve>,
    pub junctions: Vec<TripleJunction>,
    next_id: CurveId,
}

/// Outcome of one refine/coarsen call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Remesh {
    Unchanged,
    Refined,
    Coarsened,
    /// Coarsening would drop below the minimum node count.
    Skipped,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssumptionReport {
    pub a: Vec<(CurveId, bool)>,
    pub a1: Vec<(CurveId, bool)>,
    pub a2: Vec<(usize, bool)>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.a.iter().chain(&self.a1).all(|x| x.1) && self.a2.iter().all(|x| x.1)
    }
}

/// Numerical rank of a set of 3-vectors (relative singular value threshold).
pub fn span_rank(vectors: &[Vec3], rel_tol: f64) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(vectors.len(), 3, |r, c| vectors[r][c]);
    let sv = m.singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

impl CurveNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn next_id(&self) -> CurveId {
        self.next_id
    }

    pub fn fresh_id(&mut self) -> CurveId {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    /// Adds a curve; its id is replaced by a fresh one and returned.
    pub fn add_curve(&mut self, mut curve: Curve) -> CurveId {
        curve.id = self.fresh_id();
        let id = curve.id;
        self.curves.push(curve);
        id
    }

    /// Adds a curve keeping its id (used when loading files).
    pub fn insert_curve(&mut self, curve: Curve) -> Result<(), CurveError> {
        if self.index_of(curve.id).is_some() {
            return Err(CurveError::Format(format!("duplicate curve id {}", curve.id)));
        }
        self.next_id = self.next_id.max(curve.id + 1);
        self.curves.push(curve);
        Ok(())
    }

    pub fn index_of(&self, id: CurveId) -> Option<usize> {
        self.curves.iter().position(|c| c.id == id)
    }

    pub fn curve(&self, id: CurveId) -> Option<&Curve> {
        self.curves.iter().find(|c| c.id == id)
    }

    pub fn curve_mut(&mut self, id: CurveId) -> Option<&mut Curve> {
        self.curves.iter_mut().find(|c| c.id == id)
    }

    pub fn remove_curve(&mut self, id: CurveId) -> Option<Curve> {
        let i = self.index_of(id)?;
        Some(self.curves.remove(i))
    }

    pub fn num_nodes(&self) -> usize {
        self.curves.iter().map(Curve::len).sum()
    }

    pub fn total_length(&self) -> f64 {
        self.curves.iter().map(Curve::total_length).sum()
    }

    pub fn regions(&self) -> BTreeSet<RegionId> {
        self.curves.iter().flat_map(|c| [c.region_plus, c.region_minus]).collect()
    }

    /// Junction index and slot holding the given curve end.
    pub fn junction_at(&self, curve: CurveId, end: End) -> Option<(usize, usize)> {
        self.junctions
            .iter()
            .enumerate()
            .find_map(|(k, j)| j.ends.iter().position(|e| e.curve == curve && e.end == end).map(|s| (k, s)))
    }

    pub fn junction_position(&self, k: usize) -> Option<Vec3> {
        let e = self.junctions.get(k)?.ends[0];
        let c = self.curve(e.curve)?;
        Some(c.nodes[c.end_index(e.end)])
    }

    /// True if every junction's three endpoint coordinates are bit-equal.
    pub fn attachment_holds(&self) -> bool {
        self.junctions.iter().all(|j| {
            let pts: Vec<Option<Vec3>> =
                j.ends.iter().map(|e| self.curve(e.curve).map(|c| c.nodes[c.end_index(e.end)])).collect();
            pts.iter().all(|p| p.is_some() && *p == pts[0])
        })
    }

    /// Structural checks: junction references valid and distinct, every
    /// open curve end attached to exactly one junction.
    pub fn check_structure(&self) -> Result<(), CurveError> {
        for (k, j) in self.junctions.iter().enumerate() {
            for (a, e) in j.ends.iter().enumerate() {
                let c = self.curve(e.curve).ok_or(CurveError::UnknownCurve(e.curve))?;
                if c.closed {
                    return Err(CurveError::Junction { junction: k, msg: format!("curve {} is closed", c.id) });
                }
                if j.ends[..a].contains(e) {
                    return Err(CurveError::Junction { junction: k, msg: "repeated (curve, end) pair".into() });
                }
            }
        }
        for c in self.curves.iter().filter(|c| !c.closed) {
            for end in [End::Start, End::End] {
                let count = self
                    .junctions
                    .iter()
                    .flat_map(|j| j.ends.iter())
                    .filter(|e| e.curve == c.id && e.end == end)
                    .count();
                if count != 1 {
                    return Err(CurveError::Invalid {
                        curve: c.id,
                        msg: format!(
                            "open end {end:?} attached to {count} junctions; free endpoints are not supported"
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn compute_frames(&self, mesh: &SurfaceMesh) -> Result<Vec<NodeFrames>, CurveError> {
        self.curves.iter().map(|c| compute_frames(c, mesh)).collect()
    }

    /// Checks (A) for every curve, (A1) for closed curves and (A2) for each
    /// junction over the interior nodes of its three curves.
    pub fn validate_assumptions(&self, frames: &[NodeFrames]) -> AssumptionReport {
        const TOL: f64 = 1e-10;
        let mut report = AssumptionReport::default();
        for (c, fr) in self.curves.iter().zip(frames) {
            report.a.push((c.id, c.check_assumption_a().is_ok()));
            if c.closed {
                let vecs: Vec<Vec3> = fr.omega_m.iter().chain(&fr.omega_phi).copied().collect();
                report.a1.push((c.id, span_rank(&vecs, TOL) == 3));
            }
        }
        for (k, j) in self.junctions.iter().enumerate() {
            let mut vecs = Vec::new();
            for e in &j.ends {
                if let Some(i) = self.index_of(e.curve) {
                    let fr = &frames[i];
                    let n = fr.omega_m.len();
                    for node in 1..n.saturating_sub(1) {
                        vecs.push(fr.omega_m[node]);
                        vecs.push(fr.omega_phi[node]);
                    }
                }
            }
            report.a2.push((k, span_rank(&vecs, TOL) == 3));
        }
        report
    }

    /// Norm of the signed sum of unit end tangents at each junction.
    pub fn young_residuals(&self) -> Vec<f64> {
        self.junctions
            .iter()
            .map(|j| {
                let mut s = Vec3::zeros();
                for e in &j.ends {
                    if let Some(c) = self.curve(e.curve) {
                        let (a, b) = match e.end {
                            End::Start => (0, 1),
                            End::End => (c.len() - 2, c.len() - 1),
                        };
                        let t = (c.nodes[b] - c.nodes[a]).normalize();
                        s += if e.end == End::Start { t } else { -t };
                    }
                }
                s.norm()
            })
            .collect()
    }

    /// Largest distance from a node to the closest point of its face.
    pub fn max_surface_distance(&self, mesh: &SurfaceMesh) -> f64 {
        self.curves
            .iter()
            .flat_map(|c| c.nodes.iter().zip(&c.faces).map(|(p, &f)| mesh.closest_on_face(f, p).0))
            .fold(0.0, f64::max)
    }
}

/// Refines or coarsens a curve once based on its mean spacing.
///
/// Endpoints of open curves never move. Inserted nodes are projected onto
/// the mesh.
pub fn refine_coarsen(curve: &mut Curve, mesh: &SurfaceMesh, l_min: f64, l_max: f64) -> Result<Remesh, CurveError> {
    if !(0.0 < l_min && l_min < l_max) {
        return Err(CurveError::Invalid {
            curve: curve.id,
            msg: format!("invalid thresholds l_min={l_min}, l_max={l_max}"),
        });
    }
    let spacing = curve.mean_spacing();
    if spacing > l_max {
        let mut nodes = Vec::with_capacity(2 * curve.len());
        let mut faces = Vec::with_capacity(2 * curve.len());
        for s in 0..curve.num_segments() {
            let (a, b) = curve.segment(s);
            nodes.push(curve.nodes[a]);
            faces.push(curve.faces[a]);
            let mid = (curve.nodes[a] + curve.nodes[b]) * 0.5;
            let loc = mesh.project_to_surface(&mid, Some(curve.faces[a]))?;
            nodes.push(loc.point);
            faces.push(loc.face);
        }
        if !curve.closed {
            nodes.push(*curve.nodes.last().unwrap());
            faces.push(*curve.faces.last().unwrap());
        }
        curve.nodes = nodes;
        curve.faces = faces;
        return Ok(Remesh::Refined);
    }
    if spacing < l_min {
        let n = curve.len();
        let keep: Vec<usize> = (0..n).filter(|&j| j % 2 == 0 || (!curve.closed && j == n - 1)).collect();
        if keep.len() < Curve::min_nodes(curve.closed) {
            log::warn!("curve {}: coarsening to {} nodes skipped", curve.id, keep.len());
            return Ok(Remesh::Skipped);
        }
        curve.nodes = keep.iter().map(|&j| curve.nodes[j]).collect();
        curve.faces = keep.iter().map(|&j| curve.faces[j]).collect();
        return Ok(Remesh::Coarsened);
    }
    Ok(Remesh::Unchanged)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CurveRecord {
    id: CurveId,
    closed: bool,
    region_plus: RegionId,
    region_minus: RegionId,
    nodes: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct JunctionRecord {
    curve_ids: [CurveId; 3],
    endpoints: [u8; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NetworkFile {
    curves: Vec<CurveRecord>,
    #[serde(default)]
    junctions: Vec<JunctionRecord>,
}

impl CurveNetwork {
    pub fn to_json(&self) -> String {
        let file = NetworkFile {
            curves: self
                .curves
                .iter()
                .map(|c| CurveRecord {
                    id: c.id,
                    closed: c.closed,
                    region_plus: c.region_plus,
                    region_minus: c.region_minus,
                    nodes: c.nodes.iter().map(|p| [p.x, p.y, p.z]).collect(),
                })
                .collect(),
            junctions: self
                .junctions
                .iter()
                .map(|j| JunctionRecord {
                    curve_ids: j.ends.map(|e| e.curve),
                    endpoints: j.ends.map(|e| e.end.as_index()),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("curve network serializes")
    }

    /// Parses a network file and snaps every node onto the mesh. Returns the
    /// network and the largest snap distance.
    pub fn from_json(text: &str, mesh: &SurfaceMesh) -> Result<(Self, f64), CurveError> {
        let file: NetworkFile = serde_json::from_str(text).map_err(|e| CurveError::Format(e.to_string()))?;
        let mut net = CurveNetwork::new();
        let mut max_snap = 0.0f64;
        for rec in file.curves {
            let mut nodes = Vec::with_capacity(rec.nodes.len());
            let mut faces = Vec::with_capacity(rec.nodes.len());
            let mut hint = None;
            for p in &rec.nodes {
                let p = Vec3::new(p[0], p[1], p[2]);
                let loc = match mesh.project_to_surface(&p, hint) {
                    Ok(l) => l,
                    Err(_) => mesh.project_to_surface(&p, None)?,
                };
                max_snap = max_snap.max((loc.point - p).norm());
                hint = Some(loc.face);
                nodes.push(loc.point);
                faces.push(loc.face);
            }
            net.insert_curve(Curve {
                id: rec.id,
                nodes,
                faces,
                closed: rec.closed,
                region_plus: rec.region_plus,
                region_minus: rec.region_minus,
            })?;
        }
        for (k, rec) in file.junctions.into_iter().enumerate() {
            let mut ends = [JunctionEnd { curve: 0, end: End::Start }; 3];
            for s in 0..3 {
                let end = End::from_index(rec.endpoints[s])
                    .ok_or_else(|| CurveError::Junction { junction: k, msg: "endpoint must be 0 or 1".into() })?;
                ends[s] = JunctionEnd { curve: rec.curve_ids[s], end };
            }
            net.junctions.push(TripleJunction { ends });
        }
        net.check_structure()?;
        net.unify_junctions();
        for c in &net.curves {
            c.check_assumption_a()?;
        }
        Ok((net, max_snap))
    }

    /// Copies the first endpoint of each junction onto the other two.
    pub fn unify_junctions(&mut self) {
        for k in 0..self.junctions.len() {
            let ends = self.junctions[k].ends;
            let Some(c0) = self.curve(ends[0].curve) else { continue };
            let i0 = c0.end_index(ends[0].end);
            let (p, f) = (c0.nodes[i0], c0.faces[i0]);
            for e in &ends[1..] {
                if let Some(c) = self.curve_mut(e.curve) {
                    let i = c.end_index(e.end);
                    c.nodes[i] = p;
                    c.faces[i] = f;
                }
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), CurveError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path, mesh: &SurfaceMesh) -> Result<(Self, f64), CurveError> {
        Self::from_json(&fs::read_to_string(path)?, mesh)
    }

    /// Builds a closed curve from raw points, snapping them onto the mesh.
    pub fn snapped_curve(
        mesh: &SurfaceMesh,
        points: &[Vec3],
        closed: bool,
        region_plus: RegionId,
        region_minus: RegionId,
    ) -> Result<Curve, CurveError> {
        let mut nodes = Vec::with_capacity(points.len());
        let mut faces = Vec::with_capacity(points.len());
        let mut hint = None;
        for p in points {
            let loc = match mesh.project_to_surface(p, hint) {
                Ok(l) => l,
                Err(_) => mesh.project_to_surface(p, None)?,
            };
            hint = Some(loc.face);
            nodes.push(loc.point);
            faces.push(loc.face);
        }
        Ok(Curve { id: 0, nodes, faces, closed, region_plus, region_minus })
    }
}

/// Node count per curve id, for logging.
pub fn node_counts(net: &CurveNetwork) -> HashMap<CurveId, usize> {
    net.curves.iter().map(|c| (c.id, c.len())).collect()
}
