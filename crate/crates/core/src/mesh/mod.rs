//! Triangulated surfaces with per-face image data.
//!
//! The mesh is immutable after construction. Adjacency is stored per face
//! edge: `face_neighbors[f][k]` is the face across the edge
//! `(faces[f][k], faces[f][(k + 1) % 3])`.

pub mod io;

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};

use thiserror::Error;

use crate::Vec3;

/// Barycentric slack accepted by the inside test.
pub const BARY_EPS: f64 = -1e-10;
/// Maximum number of faces a hinted walk may visit.
pub const WALK_LIMIT: usize = 10_000;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("face {face} references vertex {index} but the mesh has {count} vertices")]
    IndexOutOfRange { face: usize, index: usize, count: usize },
    #[error("face {face} repeats a vertex index")]
    RepeatedVertex { face: usize },
    #[error("face {face} is degenerate (area {area:e})")]
    DegenerateFace { face: usize, area: f64 },
    #[error("non-manifold edge ({0}, {1}) shared by more than two faces")]
    NonManifoldEdge(usize, usize),
    #[error("boundary edge ({0}, {1}); the surface must be closed")]
    BoundaryEdge(usize, usize),
    #[error("inconsistent orientation across edge ({0}, {1})")]
    Orientation(usize, usize),
    #[error("image has {got} values but the mesh has {expected} faces")]
    ImageSize { expected: usize, got: usize },
    #[error("image value {value} of face {face} is outside [0, 1]")]
    ImageRange { face: usize, value: f64 },
    #[error("no face within the tolerance band of ({x}, {y}, {z})")]
    NotFound { x: f64, y: f64, z: f64 },
    #[error("invalid mesh parameter: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl MeshError {
    fn not_found(p: &Vec3) -> Self {
        MeshError::NotFound { x: p.x, y: p.y, z: p.z }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn from_points<'a>(pts: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut min = Vec3::repeat(f64::INFINITY);
        let mut max = Vec3::repeat(f64::NEG_INFINITY);
        for p in pts {
            min = min.inf(p);
            max = max.sup(p);
        }
        Self { min, max }
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeshOptions {
    /// Accept boundary edges. Only meant for flat test domains.
    pub allow_open: bool,
}

/// Result of point location or projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshLocation {
    pub face: usize,
    pub barycentric: [f64; 3],
    pub point: Vec3,
}

#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    face_normals: Vec<Vec3>,
    face_areas: Vec<f64>,
    face_neighbors: Vec<[Option<usize>; 3]>,
    vertex_faces: Vec<Vec<usize>>,
    bbox: Aabb,
    closed: bool,
    band: f64,
}

impl SurfaceMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>, opts: MeshOptions) -> Result<Self, MeshError> {
        if faces.is_empty() {
            return Err(MeshError::Invalid("mesh has no faces".into()));
        }
        let nv = vertices.len();
        for (f, tri) in faces.iter().enumerate() {
            for &v in tri {
                if v >= nv {
                    return Err(MeshError::IndexOutOfRange { face: f, index: v, count: nv });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::RepeatedVertex { face: f });
            }
        }
        let bbox = Aabb::from_points(&vertices);
        let diag = bbox.diagonal();
        let min_area = 1e-14 * diag * diag;

        let mut face_normals = Vec::with_capacity(faces.len());
        let mut face_areas = Vec::with_capacity(faces.len());
        for (f, tri) in faces.iter().enumerate() {
            let [a, b, c] = tri.map(|i| vertices[i]);
            let n = (b - a).cross(&(c - a));
            let area = 0.5 * n.norm();
            if !(area >= min_area) || area == 0.0 {
                return Err(MeshError::DegenerateFace { face: f, area });
            }
            face_normals.push(n / n.norm());
            face_areas.push(area);
        }

        // Directed edge -> (face, local edge index).
        let mut directed: HashMap<(usize, usize), (usize, usize)> = HashMap::with_capacity(faces.len() * 3);
        for (f, tri) in faces.iter().enumerate() {
            for k in 0..3 {
                let e = (tri[k], tri[(k + 1) % 3]);
                if directed.insert(e, (f, k)).is_some() {
                    // Same directed edge twice: either >2 faces or flipped winding.
                    let reverse_count = usize::from(directed.contains_key(&(e.1, e.0)));
                    return Err(if reverse_count > 0 {
                        MeshError::NonManifoldEdge(e.0.min(e.1), e.0.max(e.1))
                    } else {
                        MeshError::Orientation(e.0.min(e.1), e.0.max(e.1))
                    });
                }
            }
        }
        let mut face_neighbors = vec![[None; 3]; faces.len()];
        let mut closed = true;
        let mut first_boundary = None;
        for (f, tri) in faces.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                match directed.get(&(b, a)) {
                    Some(&(g, _)) => face_neighbors[f][k] = Some(g),
                    None => {
                        closed = false;
                        first_boundary.get_or_insert((a.min(b), a.max(b)));
                    }
                }
            }
        }
        if !closed && !opts.allow_open {
            let (a, b) = first_boundary.unwrap();
            return Err(MeshError::BoundaryEdge(a, b));
        }

        let mut vertex_faces = vec![Vec::new(); nv];
        for (f, tri) in faces.iter().enumerate() {
            for &v in tri {
                vertex_faces[v].push(f);
            }
        }
        Ok(Self {
            vertices,
            faces,
            face_normals,
            face_areas,
            face_neighbors,
            vertex_faces,
            bbox,
            closed,
            band: 0.05 * diag,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_neighbors(&self, f: usize) -> &[Option<usize>; 3] {
        &self.face_neighbors[f]
    }

    pub fn vertex_faces(&self, v: usize) -> &[usize] {
        &self.vertex_faces[v]
    }

    pub fn bbox(&self) -> &Aabb {
        &self.bbox
    }

    pub fn diagonal(&self) -> f64 {
        self.bbox.diagonal()
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Distance band used by [`Self::locate_point`] and [`Self::project_to_surface`].
    pub fn band(&self) -> f64 {
        self.band
    }

    pub fn set_band_fraction(&mut self, fraction: f64) {
        self.band = fraction * self.diagonal();
    }

    pub fn face_normal(&self, f: usize) -> Vec3 {
        self.face_normals[f]
    }

    pub fn face_area(&self, f: usize) -> f64 {
        self.face_areas[f]
    }

    pub fn total_area(&self) -> f64 {
        self.face_areas.iter().sum()
    }

    pub fn face_vertices(&self, f: usize) -> [Vec3; 3] {
        self.faces[f].map(|i| self.vertices[i])
    }

    pub fn face_center(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.face_vertices(f);
        (a + b + c) / 3.0
    }

    pub fn face_circumradius(&self, f: usize) -> f64 {
        let [a, b, c] = self.face_vertices(f);
        let (la, lb, lc) = ((b - c).norm(), (c - a).norm(), (a - b).norm());
        la * lb * lc / (4.0 * self.face_areas[f])
    }

    pub fn min_circumradius(&self) -> f64 {
        (0..self.num_faces()).map(|f| self.face_circumradius(f)).fold(f64::INFINITY, f64::min)
    }

    pub fn mean_edge_length(&self) -> f64 {
        let mut sum = 0.0;
        for f in 0..self.num_faces() {
            let [a, b, c] = self.face_vertices(f);
            sum += (b - a).norm() + (c - b).norm() + (a - c).norm();
        }
        sum / (3 * self.num_faces()) as f64
    }

    /// Maximum over vertices of the mean length of incident edges.
    pub fn max_mean_incident_edge(&self) -> f64 {
        let mut sums = vec![(0.0, 0usize); self.vertices.len()];
        for tri in &self.faces {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let l = (self.vertices[a] - self.vertices[b]).norm();
                // Each interior edge is seen twice; both endpoints get both copies.
                sums[a].0 += l;
                sums[a].1 += 1;
                sums[b].0 += l;
                sums[b].1 += 1;
            }
        }
        sums.iter().filter(|s| s.1 > 0).map(|s| s.0 / s.1 as f64).fold(0.0, f64::max)
    }

    /// All faces sharing at least one vertex with `f`, excluding `f`.
    pub fn vertex_ring(&self, f: usize) -> Vec<usize> {
        let mut out: Vec<usize> =
            self.faces[f].iter().flat_map(|&v| self.vertex_faces[v].iter().copied()).filter(|&g| g != f).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Plane projection of `p` onto face `f` with barycentric coordinates
    /// and signed plane distance.
    pub fn plane_projection(&self, f: usize, p: &Vec3) -> ([f64; 3], Vec3, f64) {
        let [a, b, c] = self.face_vertices(f);
        let n = self.face_normals[f];
        let dist = (p - a).dot(&n);
        let q = p - n * dist;
        (barycentric(&a, &b, &c, &q), q, dist)
    }

    fn tie_tol(&self) -> f64 {
        1e-12 * self.diagonal()
    }

    fn try_inside(&self, f: usize, p: &Vec3) -> Option<(f64, MeshLocation)> {
        let (bary, q, dist) = self.plane_projection(f, p);
        let dist = dist.abs();
        if dist <= self.band && bary.iter().all(|&w| w >= BARY_EPS) {
            Some((dist, MeshLocation { face: f, barycentric: normalize_bary(bary), point: q }))
        } else {
            None
        }
    }

    fn better(&self, cand: (f64, usize), best: Option<(f64, usize)>) -> bool {
        match best {
            None => true,
            Some((d, g)) => cand.0 < d - self.tie_tol() || (cand.0 <= d + self.tie_tol() && cand.1 < g),
        }
    }

    /// Locates the face whose plane projection of `p` falls inside it.
    ///
    /// With a hint the search is a breadth-first walk over face neighbors;
    /// once a containing face is found the walk finishes that level and one
    /// more, then keeps the one with the smallest plane distance.
    pub fn locate_point(&self, p: &Vec3, hint: Option<usize>) -> Result<MeshLocation, MeshError> {
        let Some(start) = hint.filter(|&h| h < self.num_faces()) else {
            return self.locate_global(p);
        };
        let mut best: Option<(f64, usize, MeshLocation)> = None;
        let mut stop_level = usize::MAX;
        let mut visited = HashSet::new();
        let mut queue = VecDeque::from([(start, 0usize)]);
        visited.insert(start);
        while let Some((f, level)) = queue.pop_front() {
            if level > stop_level {
                break;
            }
            if let Some((d, loc)) = self.try_inside(f, p) {
                if self.better((d, f), best.map(|b| (b.0, b.1))) {
                    best = Some((d, f, loc));
                }
                stop_level = stop_level.min(level + 1);
            }
            if visited.len() >= WALK_LIMIT {
                continue;
            }
            for g in self.face_neighbors[f].iter().flatten() {
                if visited.insert(*g) {
                    queue.push_back((*g, level + 1));
                }
            }
        }
        best.map(|b| b.2).ok_or_else(|| MeshError::not_found(p))
    }

    /// Exhaustive variant of [`Self::locate_point`].
    pub fn locate_global(&self, p: &Vec3) -> Result<MeshLocation, MeshError> {
        let mut best: Option<(f64, usize, MeshLocation)> = None;
        for f in 0..self.num_faces() {
            if let Some((d, loc)) = self.try_inside(f, p) {
                if self.better((d, f), best.map(|b| (b.0, b.1))) {
                    best = Some((d, f, loc));
                }
            }
        }
        best.map(|b| b.2).ok_or_else(|| MeshError::not_found(p))
    }

    /// Closest point on face `f` to `p` and its distance.
    pub fn closest_on_face(&self, f: usize, p: &Vec3) -> (f64, MeshLocation) {
        let [a, b, c] = self.face_vertices(f);
        let (q, bary) = closest_point_on_triangle(p, &a, &b, &c);
        ((p - q).norm(), MeshLocation { face: f, barycentric: bary, point: q })
    }

    /// Closest point on the mesh among faces reached by a best-first walk
    /// from `hint`; without a hint every face is examined.
    pub fn project_to_surface(&self, p: &Vec3, hint: Option<usize>) -> Result<MeshLocation, MeshError> {
        let best = match hint.filter(|&h| h < self.num_faces()) {
            None => self.project_global(p),
            Some(start) => self.project_walk(p, start),
        };
        match best {
            Some((d, loc)) if d <= self.band => Ok(loc),
            _ => Err(MeshError::not_found(p)),
        }
    }

    fn project_global(&self, p: &Vec3) -> Option<(f64, MeshLocation)> {
        let mut best: Option<(f64, MeshLocation)> = None;
        for f in 0..self.num_faces() {
            let (d, loc) = self.closest_on_face(f, p);
            if self.better((d, f), best.map(|b| (b.0, b.1.face))) {
                best = Some((d, loc));
            }
        }
        best
    }

    fn project_walk(&self, p: &Vec3, start: usize) -> Option<(f64, MeshLocation)> {
        let tol = self.tie_tol();
        let mut heap = BinaryHeap::new();
        let mut visited = HashSet::new();
        let (d0, loc0) = self.closest_on_face(start, p);
        heap.push(Entry { dist: d0, face: start });
        visited.insert(start);
        let mut best: Option<(f64, MeshLocation)> = None;
        while let Some(Entry { dist, face }) = heap.pop() {
            if let Some((bd, _)) = best {
                if dist > bd + tol {
                    break;
                }
            }
            let loc = if face == start { loc0 } else { self.closest_on_face(face, p).1 };
            if self.better((dist, face), best.map(|b| (b.0, b.1.face))) {
                best = Some((dist, loc));
            }
            if visited.len() >= WALK_LIMIT {
                continue;
            }
            // Vertex neighbors so that walks across vertices are not blocked.
            for g in self.vertex_ring(face) {
                if visited.insert(g) {
                    let (d, _) = self.closest_on_face(g, p);
                    heap.push(Entry { dist: d, face: g });
                }
            }
        }
        best
    }
}

#[derive(Debug, PartialEq)]
struct Entry {
    dist: f64,
    face: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on distance, then face index.
        other.dist.total_cmp(&self.dist).then_with(|| other.face.cmp(&self.face))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn normalize_bary(b: [f64; 3]) -> [f64; 3] {
    let s = b[0] + b[1] + b[2];
    [b[0] / s, b[1] / s, b[2] / s]
}

/// Barycentric coordinates of `q` (assumed in the plane of `a,b,c`).
pub fn barycentric(a: &Vec3, b: &Vec3, c: &Vec3, q: &Vec3) -> [f64; 3] {
    let v0 = b - a;
    let v1 = c - a;
    let v2 = q - a;
    let d00 = v0.dot(&v0);
    let d01 = v0.dot(&v1);
    let d11 = v1.dot(&v1);
    let d20 = v2.dot(&v0);
    let d21 = v2.dot(&v1);
    let denom = d00 * d11 - d01 * d01;
    let v = (d11 * d20 - d01 * d21) / denom;
    let w = (d00 * d21 - d01 * d20) / denom;
    [1.0 - v - w, v, w]
}

/// Closest point on a triangle (region classification over vertices, edges
/// and interior). Returns the point and its barycentric coordinates.
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> (Vec3, [f64; 3]) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, [1.0, 0.0, 0.0]);
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, [0.0, 1.0, 0.0]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, [1.0 - v, v, 0.0]);
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, [0.0, 0.0, 1.0]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, [1.0 - w, 0.0, w]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, [0.0, 1.0 - w, w]);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, [1.0 - v - w, v, w])
}

/// Per-face constant image with 1 (gray) or 3 (RGB) channels.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceImage {
    channels: usize,
    values: Vec<f64>,
}

impl FaceImage {
    pub fn new(channels: usize, values: Vec<f64>) -> Result<Self, MeshError> {
        if channels != 1 && channels != 3 {
            return Err(MeshError::Invalid(format!("unsupported channel count {channels}")));
        }
        if !values.len().is_multiple_of(channels) {
            return Err(MeshError::Invalid("value buffer is not a multiple of the channel count".into()));
        }
        for (i, &v) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(MeshError::ImageRange { face: i / channels, value: v });
            }
        }
        Ok(Self { channels, values })
    }

    pub fn constant(channels: usize, num_faces: usize, value: f64) -> Self {
        Self { channels, values: vec![value; channels * num_faces] }
    }

    pub fn from_gray(values: Vec<f64>) -> Result<Self, MeshError> {
        Self::new(1, values)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, f: usize) -> &[f64] {
        debug_assert!(f < self.len(), "face {f} out of range");
        &self.values[f * self.channels..(f + 1) * self.channels]
    }

    pub fn set(&mut self, f: usize, v: &[f64]) {
        assert_eq!(v.len(), self.channels);
        self.values[f * self.channels..(f + 1) * self.channels].copy_from_slice(v);
    }

    pub fn raw(&self) -> &[f64] {
        &self.values
    }

    /// Channel mean, used to reduce color input to gray.
    pub fn to_gray(&self) -> FaceImage {
        if self.channels == 1 {
            return self.clone();
        }
        let values = self.values.chunks(3).map(|c| (c[0] + c[1] + c[2]) / 3.0).collect();
        FaceImage { channels: 1, values }
    }

    pub fn to_rgb(&self) -> FaceImage {
        if self.channels == 3 {
            return self.clone();
        }
        let values = self.values.iter().flat_map(|&v| [v, v, v]).collect();
        FaceImage { channels: 3, values }
    }

    pub fn check_mesh(&self, mesh: &SurfaceMesh) -> Result<(), MeshError> {
        if self.len() != mesh.num_faces() {
            return Err(MeshError::ImageSize { expected: mesh.num_faces(), got: self.len() });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> SurfaceMesh {
        let v = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)];
        SurfaceMesh::new(v, vec![[0, 1, 2]], MeshOptions { allow_open: true }).unwrap()
    }

    #[test]
    fn planar_normals_follow_winding() {
        let m = tri();
        assert_eq!(m.face_normal(0), Vec3::new(0.0, 0.0, 1.0));
        let v = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), Vec3::new(1.0, 0.0, 0.0)];
        let m = SurfaceMesh::new(v, vec![[0, 1, 2]], MeshOptions { allow_open: true }).unwrap();
        assert_eq!(m.face_normal(0), Vec3::new(0.0, 0.0, -1.0));
    }

    #[test]
    fn open_mesh_rejected_by_default() {
        let v = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)];
        let err = SurfaceMesh::new(v, vec![[0, 1, 2]], MeshOptions::default()).unwrap_err();
        assert!(matches!(err, MeshError::BoundaryEdge(..)));
    }

    #[test]
    fn degenerate_face_rejected() {
        let v = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0)];
        let err = SurfaceMesh::new(v, vec![[0, 1, 2]], MeshOptions { allow_open: true }).unwrap_err();
        assert!(matches!(err, MeshError::DegenerateFace { .. }));
    }

    #[test]
    fn locate_projects_orthogonally() {
        // 0.1 off-plane exceeds the default band of a unit triangle.
        let mut m = tri();
        m.set_band_fraction(0.1);
        let loc = m.locate_point(&Vec3::new(0.25, 0.25, 0.1), Some(0)).unwrap();
        assert_eq!(loc.face, 0);
        let expect = [0.5, 0.25, 0.25];
        for k in 0..3 {
            assert!((loc.barycentric[k] - expect[k]).abs() < 1e-14);
        }
        assert!((loc.point - Vec3::new(0.25, 0.25, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn locate_vertex() {
        let m = tri();
        let loc = m.locate_point(&Vec3::new(1.0, 0.0, 0.0), None).unwrap();
        assert!((loc.barycentric[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closest_point_clamps_to_edges_and_vertices() {
        let a = Vec3::new(0.0, 0.0, 0.0);
        let b = Vec3::new(1.0, 0.0, 0.0);
        let c = Vec3::new(0.0, 1.0, 0.0);
        let (q, _) = closest_point_on_triangle(&Vec3::new(2.0, -1.0, 0.3), &a, &b, &c);
        assert_eq!(q, b);
        let (q, bary) = closest_point_on_triangle(&Vec3::new(0.5, -1.0, 0.0), &a, &b, &c);
        assert!((q - Vec3::new(0.5, 0.0, 0.0)).norm() < 1e-15);
        assert!((bary[0] - 0.5).abs() < 1e-15 && bary[2] == 0.0);
        let (q, _) = closest_point_on_triangle(&Vec3::new(1.0, 1.0, 0.0), &a, &b, &c);
        assert!((q - Vec3::new(0.5, 0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn face_image_lookup() {
        let img = FaceImage::from_gray(vec![0.25, 0.5]).unwrap();
        assert_eq!(img.value(0), &[0.25]);
        assert!(FaceImage::from_gray(vec![1.5]).is_err());
    }
}
