//! Synthetic surfaces and painted images for experiments and tests.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::curve::CurveNetwork;
use crate::mesh::{FaceImage, MeshError, MeshOptions, SurfaceMesh};
use crate::Vec3;

/// Raw vertex and face buffers of a generated surface.
#[derive(Debug, Clone)]
pub struct MeshData {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
}

impl MeshData {
    pub fn build(self, opts: MeshOptions) -> Result<SurfaceMesh, MeshError> {
        SurfaceMesh::new(self.vertices, self.faces, opts)
    }
}

/// Icosphere of the given radius; `subdiv` rounds of 4-to-1 refinement
/// (20·4^subdiv faces).
pub fn icosphere(subdiv: u32, radius: f64) -> MeshData {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdiv {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    for v in &mut vertices {
        *v *= radius;
    }
    orient_outward(&vertices, &mut faces, Vec3::zeros());
    MeshData { vertices, faces }
}

/// Torus around the z axis with `nu` segments along the tube's sweep and
/// `nv` around the tube (2·nu·nv faces).
pub fn torus(major: f64, minor: f64, nu: usize, nv: usize) -> Result<MeshData, MeshError> {
    if nu < 3 || nv < 3 || !(major > minor && minor > 0.0) {
        return Err(MeshError::Invalid(format!(
            "torus needs nu,nv >= 3 and R > r > 0 (got {nu}x{nv}, R={major}, r={minor})"
        )));
    }
    let mut vertices = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = std::f64::consts::TAU * i as f64 / nu as f64;
        for j in 0..nv {
            let v = std::f64::consts::TAU * j as f64 / nv as f64;
            let rho = major + minor * v.cos();
            vertices.push(Vec3::new(rho * u.cos(), rho * u.sin(), minor * v.sin()));
        }
    }
    let idx = |i: usize, j: usize| (i % nu) * nv + (j % nv);
    let mut faces = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    // Outward means away from the tube's center circle.
    let center_of = |p: &Vec3| {
        let r = (p.x * p.x + p.y * p.y).sqrt();
        Vec3::new(p.x / r * major, p.y / r * major, 0.0)
    };
    for f in &mut faces {
        let [a, b, c] = f.map(|i| vertices[i]);
        let n = (b - a).cross(&(c - a));
        let g = (a + b + c) / 3.0;
        if n.dot(&(g - center_of(&g))) < 0.0 {
            f.swap(1, 2);
        }
    }
    Ok(MeshData { vertices, faces })
}

/// Open square grid `[-half, half]^2` at height `z`, `n` cells per side.
pub fn plane_grid(n: usize, half: f64, z: f64) -> Result<MeshData, MeshError> {
    if n == 0 || half <= 0.0 {
        return Err(MeshError::Invalid(format!("plane grid needs n >= 1 and half > 0 (got {n}, {half})")));
    }
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let x = -half + 2.0 * half * i as f64 / n as f64;
            let y = -half + 2.0 * half * j as f64 / n as f64;
            vertices.push(Vec3::new(x, y, z));
        }
    }
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut faces = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            // Alternate the diagonal so the grid has no preferred direction.
            if (i + j) % 2 == 0 {
                faces.push([a, b, c]);
                faces.push([a, c, d]);
            } else {
                faces.push([a, b, d]);
                faces.push([b, c, d]);
            }
        }
    }
    Ok(MeshData { vertices, faces })
}

/// Closed thin slab: a top grid at `z = 0`, a bottom grid at `-thickness`
/// and side walls.
pub fn slab(n: usize, half: f64, thickness: f64) -> Result<MeshData, MeshError> {
    if thickness <= 0.0 {
        return Err(MeshError::Invalid("slab thickness must be positive".into()));
    }
    let top = plane_grid(n, half, 0.0)?;
    let nv = top.vertices.len();
    let mut vertices = top.vertices.clone();
    vertices.extend(top.vertices.iter().map(|v| Vec3::new(v.x, v.y, -thickness)));
    let mut faces = top.faces.clone();
    faces.extend(top.faces.iter().map(|&[a, b, c]| [a + nv, c + nv, b + nv]));
    // Boundary ring of the top grid, counter-clockwise seen from +z.
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut ring = Vec::with_capacity(4 * n);
    ring.extend((0..n).map(|i| idx(i, 0)));
    ring.extend((0..n).map(|j| idx(n, j)));
    ring.extend((0..n).map(|i| idx(n - i, n)));
    ring.extend((0..n).map(|j| idx(0, n - j)));
    for k in 0..ring.len() {
        let (a, b) = (ring[k], ring[(k + 1) % ring.len()]);
        faces.push([a, b + nv, b]);
        faces.push([a, a + nv, b + nv]);
    }
    Ok(MeshData { vertices, faces })
}

/// Two stacked open grids `gap` apart (used to test sheet separation).
pub fn double_layer(n: usize, half: f64, gap: f64) -> Result<MeshData, MeshError> {
    let lower = plane_grid(n, half, 0.0)?;
    let upper = plane_grid(n, half, gap)?;
    let nv = lower.vertices.len();
    let mut vertices = lower.vertices;
    vertices.extend(upper.vertices);
    let mut faces = lower.faces;
    faces.extend(upper.faces.iter().map(|f| f.map(|i| i + nv)));
    Ok(MeshData { vertices, faces })
}

fn orient_outward(vertices: &[Vec3], faces: &mut [[usize; 3]], center: Vec3) {
    for f in faces.iter_mut() {
        let [a, b, c] = f.map(|i| vertices[i]);
        let n = (b - a).cross(&(c - a));
        if n.dot(&((a + b + c) / 3.0 - center)) < 0.0 {
            f.swap(1, 2);
        }
    }
}

/// Distance used to decide disc membership.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscMetric {
    Euclidean,
    /// Great-circle distance about the bounding-box center, scaled by the
    /// mean vertex radius.
    Spherical,
}

pub fn sphere_center_radius(mesh: &SurfaceMesh) -> (Vec3, f64) {
    let bb = mesh.bbox();
    let o = (bb.min + bb.max) * 0.5;
    let r = mesh.vertices().iter().map(|v| (v - o).norm()).sum::<f64>() / mesh.num_vertices() as f64;
    (o, r)
}

pub fn disc_distance(mesh: &SurfaceMesh, metric: DiscMetric, a: &Vec3, b: &Vec3) -> f64 {
    match metric {
        DiscMetric::Euclidean => (a - b).norm(),
        DiscMetric::Spherical => {
            let (o, r) = sphere_center_radius(mesh);
            let (u, v) = ((a - o).normalize(), (b - o).normalize());
            r * u.dot(&v).clamp(-1.0, 1.0).acos()
        }
    }
}

/// Faces whose centers lie within `radius` of any center get `inside`.
pub fn paint_discs(
    mesh: &SurfaceMesh,
    centers: &[Vec3],
    radius: f64,
    inside: &[f64],
    outside: &[f64],
    metric: DiscMetric,
) -> Result<FaceImage, MeshError> {
    if inside.len() != outside.len() {
        return Err(MeshError::Invalid("inside and outside values differ in channel count".into()));
    }
    let ch = inside.len();
    let (o, r) = sphere_center_radius(mesh);
    let mut values = Vec::with_capacity(mesh.num_faces() * ch);
    for f in 0..mesh.num_faces() {
        let g = mesh.face_center(f);
        let hit = centers.iter().any(|c| match metric {
            DiscMetric::Euclidean => (g - c).norm() <= radius,
            DiscMetric::Spherical => {
                let cos = (g - o).normalize().dot(&(c - o).normalize());
                r * cos.clamp(-1.0, 1.0).acos() <= radius
            }
        });
        values.extend_from_slice(if hit { inside } else { outside });
    }
    FaceImage::new(ch, values)
}

/// Stripes by azimuth about the z axis; stripe `k` of `values.len()` gets `values[k]`.
pub fn paint_stripes(mesh: &SurfaceMesh, values: &[Vec<f64>]) -> Result<FaceImage, MeshError> {
    let Some(ch) = values.first().map(Vec::len) else {
        return Err(MeshError::Invalid("stripes need at least one value".into()));
    };
    if values.iter().any(|v| v.len() != ch) {
        return Err(MeshError::Invalid("stripe values differ in channel count".into()));
    }
    let n = values.len();
    let mut out = Vec::with_capacity(mesh.num_faces() * ch);
    for f in 0..mesh.num_faces() {
        let g = mesh.face_center(f);
        let a = g.y.atan2(g.x).rem_euclid(std::f64::consts::TAU);
        let k = ((a / std::f64::consts::TAU * n as f64) as usize).min(n - 1);
        out.extend_from_slice(&values[k]);
    }
    FaceImage::new(ch, out)
}

/// `north` for face centers above the bounding-box mid-plane, `south` otherwise.
pub fn paint_hemispheres(mesh: &SurfaceMesh, north: &[f64], south: &[f64]) -> Result<FaceImage, MeshError> {
    if north.len() != south.len() {
        return Err(MeshError::Invalid("north and south values differ in channel count".into()));
    }
    let bb = mesh.bbox();
    let zc = 0.5 * (bb.min.z + bb.max.z);
    let mut out = Vec::with_capacity(mesh.num_faces() * north.len());
    for f in 0..mesh.num_faces() {
        out.extend_from_slice(if mesh.face_center(f).z > zc { north } else { south });
    }
    FaceImage::new(north.len(), out)
}

/// Adds seeded Gaussian noise of standard deviation `amplitude`, clamped to `[0, 1]`.
pub fn add_noise(image: &FaceImage, amplitude: f64, seed: u64) -> Result<FaceImage, MeshError> {
    let normal = Normal::new(0.0, amplitude).map_err(|e| MeshError::Invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = image.raw().iter().map(|v| (v + normal.sample(&mut rng)).clamp(0.0, 1.0)).collect();
    FaceImage::new(image.channels(), values)
}

/// Points of a circle of geodesic radius `r` around `axis` on the sphere
/// centered at the origin with radius `rs`, counter-clockwise about `axis`.
pub fn sphere_circle(axis: &Vec3, rs: f64, r: f64, n: usize) -> Vec<Vec3> {
    let z = axis.normalize();
    let helper = if z.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let x = helper.cross(&z).normalize();
    let x = z.cross(&x).cross(&z).normalize();
    let y = z.cross(&x);
    let theta = r / rs;
    (0..n)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / n as f64;
            (z * theta.cos() + (x * a.cos() + y * a.sin()) * theta.sin()) * rs
        })
        .collect()
}

/// Counter-clockwise planar circle at height `z`.
pub fn plane_circle(center: (f64, f64), r: f64, z: f64, n: usize) -> Vec<Vec3> {
    (0..n)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / n as f64;
            Vec3::new(center.0 + r * a.cos(), center.1 + r * a.sin(), z)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn euler(m: &MeshData) -> i64 {
        let mut edges = std::collections::HashSet::new();
        for f in &m.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        m.vertices.len() as i64 - edges.len() as i64 + m.faces.len() as i64
    }

    #[test]
    fn icosphere_counts_and_outward_normals() {
        let data = icosphere(3, 1.0);
        assert_eq!(data.faces.len(), 1280);
        assert_eq!(euler(&data), 2);
        let m = data.build(MeshOptions::default()).unwrap();
        for f in 0..m.num_faces() {
            assert!(m.face_normal(f).dot(&m.face_center(f)) > 0.0);
        }
    }

    #[test]
    fn icosphere_normals_near_radial() {
        let m = icosphere(4, 1.0).build(MeshOptions::default()).unwrap();
        assert_eq!(m.num_faces(), 5120);
        let cos5 = 5f64.to_radians().cos();
        for f in 0..m.num_faces() {
            let n = m.face_normal(f);
            assert!((n.norm() - 1.0).abs() < 1e-12);
            assert!(n.dot(&m.face_center(f).normalize()) > cos5);
        }
    }

    #[test]
    fn torus_is_genus_one() {
        let data = torus(2.0, 1.0, 64, 32).unwrap();
        assert_eq!(data.faces.len(), 4096);
        assert_eq!(euler(&data), 0);
        data.build(MeshOptions::default()).unwrap();
    }

    #[test]
    fn plane_and_slab() {
        let p = plane_grid(32, 1.0, 0.0).unwrap();
        assert_eq!(p.faces.len(), 2048);
        let s = slab(8, 1.0, 0.1).unwrap();
        assert_eq!(euler(&s), 2);
        let m = s.build(MeshOptions::default()).unwrap();
        assert!(m.is_closed());
    }

    #[test]
    fn noise_is_deterministic() {
        let m = icosphere(2, 1.0).build(MeshOptions::default()).unwrap();
        let base = FaceImage::constant(1, m.num_faces(), 0.5);
        assert_eq!(add_noise(&base, 0.2, 7).unwrap(), add_noise(&base, 0.2, 7).unwrap());
        assert_ne!(add_noise(&base, 0.2, 7).unwrap(), add_noise(&base, 0.2, 8).unwrap());
    }

    #[test]
    fn stripe_fractions_match_area_fractions() {
        let m = torus(2.0, 1.0, 64, 32).unwrap().build(MeshOptions::default()).unwrap();
        let vals: Vec<Vec<f64>> = vec![vec![0.0], vec![1.0 / 3.0], vec![2.0 / 3.0]];
        let img = paint_stripes(&m, &vals).unwrap();
        for (k, v) in vals.iter().enumerate() {
            let count = (0..m.num_faces()).filter(|&f| img.value(f)[0] == v[0]).count();
            let frac = count as f64 / m.num_faces() as f64;
            assert!((frac - 1.0 / 3.0).abs() < 0.02, "stripe {k}: {frac}");
        }
    }

    #[test]
    fn discs_use_geodesic_radius() {
        let m = icosphere(4, 1.0).build(MeshOptions::default()).unwrap();
        let img = paint_discs(&m, &[Vec3::z()], 0.5, &[0.1], &[0.9], DiscMetric::Spherical).unwrap();
        for f in 0..m.num_faces() {
            let g = m.face_center(f).normalize();
            let inside = g.z.clamp(-1.0, 1.0).acos() <= 0.5;
            assert_eq!(img.value(f)[0], if inside { 0.1 } else { 0.9 });
        }
    }
}

/// Point on the torus of [`torus`] at sweep angle `u` and tube angle `v`.
pub fn torus_point(major: f64, minor: f64, u: f64, v: f64) -> Vec3 {
    let rho = major + minor * v.cos();
    Vec3::new(rho * u.cos(), rho * u.sin(), minor * v.sin())
}

/// Closed loop on the torus around `(u0, v0)`, an ellipse of half-widths
/// `du`, `dv` in angle coordinates, counter-clockwise about the outward normal.
pub fn torus_loop(major: f64, minor: f64, (u0, v0): (f64, f64), (du, dv): (f64, f64), n: usize) -> Vec<Vec3> {
    (0..n)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / n as f64;
            torus_point(major, minor, u0 + du * a.cos(), v0 + dv * a.sin())
        })
        .collect()
}

/// Mesh, image and initial curves of a synthetic segmentation run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub mesh: SurfaceMesh,
    pub image: FaceImage,
    pub network: CurveNetwork,
}

/// Sphere of radius `rs` painted 0.9 with three discs of 0.1, each of
/// geodesic radius 15 degrees, centered at polar angle 40 degrees and
/// azimuths 0, 120 and 240 degrees. One circle of `nodes` nodes at polar
/// angle 62 degrees encloses all three; region 1 is inside, 2 outside.
pub fn three_discs(subdiv: u32, rs: f64, nodes: usize) -> crate::Result<Scenario> {
    let mesh = icosphere(subdiv, rs).build(MeshOptions::default())?;
    let (pol, rad, init) = (40f64.to_radians(), 15f64.to_radians(), 62f64.to_radians());
    let centers: Vec<Vec3> = [0.0f64, 120.0, 240.0]
        .iter()
        .map(|az| {
            let az = az.to_radians();
            Vec3::new(pol.sin() * az.cos(), pol.sin() * az.sin(), pol.cos()) * rs
        })
        .collect();
    let image = paint_discs(&mesh, &centers, rad * rs, &[0.1], &[0.9], DiscMetric::Spherical)?;
    let mut network = CurveNetwork::new();
    network.add_curve(CurveNetwork::snapped_curve(
        &mesh,
        &sphere_circle(&Vec3::z(), rs, init * rs, nodes),
        true,
        2,
        1,
    )?);
    Ok(Scenario { mesh, image, network })
}

/// Torus (R = 2, r = 1) in three RGB stripes by sweep angle: red, green,
/// blue. Two loops start inside the red and green stripes with regions 2
/// and 3 inside and region 1 around both.
pub fn torus_stripes(nu: usize, nv: usize, nodes: usize) -> crate::Result<Scenario> {
    let (major, minor) = (2.0, 1.0);
    let mesh = torus(major, minor, nu, nv)?.build(MeshOptions::default())?;
    let image = paint_stripes(&mesh, &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]])?;
    let third = std::f64::consts::TAU / 3.0;
    let mut network = CurveNetwork::new();
    for (k, u0) in [(2, 0.5 * third), (3, 1.5 * third)] {
        let pts = torus_loop(major, minor, (u0, 0.0), (0.3 * third, 0.8), nodes);
        network.add_curve(CurveNetwork::snapped_curve(&mesh, &pts, true, 1, k)?);
    }
    Ok(Scenario { mesh, image, network })
}
