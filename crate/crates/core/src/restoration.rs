//! Per-region restoration by linear finite elements.
//!
//! Each region solves `(1/λ) A u + M u = M U0` on the vertices of its own
//! faces. Vertices on a region boundary are duplicated per region, so no
//! smoothing happens across the curves.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::curve::RegionId;
use crate::linalg::{solve_spd, CsrMatrix, LinalgError, SolveOptions, TripletMatrix};
use crate::mesh::{FaceImage, MeshError, SurfaceMesh};
use crate::region::RegionMap;
use crate::Vec3;

#[derive(Debug, Error)]
pub enum RestorationError {
    #[error("lambda must be positive, got {0}")]
    Lambda(f64),
    #[error("region {0} has no faces")]
    EmptyRegion(RegionId),
    #[error("region map covers {map} faces, mesh has {mesh}")]
    Size { map: usize, mesh: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Surface gradient of the hat function of vertex `i` on triangle `tri`.
pub fn hat_gradient(tri: &[Vec3; 3], i: usize) -> Vec3 {
    let p = tri[i];
    let a = tri[(i + 1) % 3];
    let b = tri[(i + 2) % 3];
    let e = b - a;
    // Foot of the altitude from p onto the opposite edge.
    let q = a + e * ((p - a).dot(&e) / e.norm_squared());
    let d = p - q;
    d / d.norm_squared()
}

#[derive(Debug, Clone)]
pub struct RegionFem {
    pub region: RegionId,
    /// Global vertex index of each local unknown.
    pub vertices: Vec<usize>,
    pub local: BTreeMap<usize, usize>,
    pub faces: Vec<usize>,
    /// Lumped mass diagonal.
    pub mass: Vec<f64>,
    pub stiffness: CsrMatrix,
}

impl RegionFem {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Area-weighted vertex average of one channel over the region's faces.
    pub fn vertex_data(&self, mesh: &SurfaceMesh, image: &FaceImage, channel: usize) -> Vec<f64> {
        let mut num = vec![0.0; self.len()];
        let mut den = vec![0.0; self.len()];
        for &f in &self.faces {
            let area = mesh.face_area(f);
            let v = image.value(f)[channel];
            for g in mesh.faces()[f] {
                let l = self.local[&g];
                num[l] += area * v;
                den[l] += area;
            }
        }
        num.iter().zip(&den).map(|(n, d)| n / d).collect()
    }

    /// System matrix `(1/λ) A + M`.
    pub fn system(&self, lambda: f64) -> CsrMatrix {
        let mut t = TripletMatrix::with_capacity(self.len(), self.len(), self.stiffness.nnz() + self.len());
        for i in 0..self.len() {
            for (j, v) in self.stiffness.row(i) {
                t.push(i, j, v / lambda);
            }
            t.push(i, i, self.mass[i]);
        }
        t.finalize(true)
    }

    /// `(1/λ)<∇u,∇u> + <u-U0,u-U0>^h`.
    pub fn energy(&self, u: &[f64], u0: &[f64], lambda: f64) -> f64 {
        let au = self.stiffness.mul_vec(u);
        let grad: f64 = u.iter().zip(&au).map(|(a, b)| a * b).sum();
        let fid: f64 = (0..self.len()).map(|i| self.mass[i] * (u[i] - u0[i]).powi(2)).sum();
        grad / lambda + fid
    }
}

/// Assembles mass and stiffness of the given faces.
pub fn assemble_region(mesh: &SurfaceMesh, region: RegionId, faces: &[usize]) -> Result<RegionFem, RestorationError> {
    if faces.is_empty() {
        return Err(RestorationError::EmptyRegion(region));
    }
    let mut local = BTreeMap::new();
    for &f in faces {
        for g in mesh.faces()[f] {
            let n = local.len();
            local.entry(g).or_insert(n);
        }
    }
    let mut vertices = vec![0; local.len()];
    for (&g, &l) in &local {
        vertices[l] = g;
    }
    let mut mass = vec![0.0; local.len()];
    let mut t = TripletMatrix::with_capacity(local.len(), local.len(), 9 * faces.len());
    for &f in faces {
        let tri = mesh.face_vertices(f);
        let area = mesh.face_area(f);
        let ids = mesh.faces()[f].map(|g| local[&g]);
        let grads = [0, 1, 2].map(|i| hat_gradient(&tri, i));
        for a in 0..3 {
            mass[ids[a]] += area / 3.0;
            for b in 0..3 {
                t.push(ids[a], ids[b], area * grads[a].dot(&grads[b]));
            }
        }
    }
    Ok(RegionFem { region, vertices, local, faces: faces.to_vec(), mass, stiffness: t.finalize(true) })
}

/// Solves one region for the given vertex data.
pub fn solve_region(
    fem: &RegionFem,
    u0: &[f64],
    lambda: f64,
    opts: &SolveOptions,
) -> Result<Vec<f64>, RestorationError> {
    if !(lambda > 0.0) {
        return Err(RestorationError::Lambda(lambda));
    }
    let rhs: Vec<f64> = u0.iter().zip(&fem.mass).map(|(u, m)| u * m).collect();
    let (u, _) = solve_spd(&fem.system(lambda), &rhs, opts)?;
    Ok(u)
}

/// Faces of each region, in face order.
pub fn region_faces(map: &RegionMap) -> BTreeMap<RegionId, Vec<usize>> {
    let mut out: BTreeMap<RegionId, Vec<usize>> = BTreeMap::new();
    for (f, &k) in map.labels().iter().enumerate() {
        out.entry(k).or_default().push(f);
    }
    out
}

/// Denoises every channel of `image` region by region. Face values are the
/// mean of the three vertex values of the face's own region solution.
pub fn restore(
    mesh: &SurfaceMesh,
    image: &FaceImage,
    map: &RegionMap,
    lambda: f64,
    opts: &SolveOptions,
) -> Result<FaceImage, RestorationError> {
    if !(lambda > 0.0) {
        return Err(RestorationError::Lambda(lambda));
    }
    if map.labels().len() != mesh.num_faces() {
        return Err(RestorationError::Size { map: map.labels().len(), mesh: mesh.num_faces() });
    }
    image.check_mesh(mesh)?;
    let channels = image.channels();
    let mut out = image.clone();
    for (k, faces) in region_faces(map) {
        let fem = assemble_region(mesh, k, &faces)?;
        let system = fem.system(lambda);
        for ch in 0..channels {
            let u0 = fem.vertex_data(mesh, image, ch);
            let rhs: Vec<f64> = u0.iter().zip(&fem.mass).map(|(u, m)| u * m).collect();
            let (u, _) = solve_spd(&system, &rhs, opts)?;
            for &f in &faces {
                let v: f64 = mesh.faces()[f].iter().map(|g| u[fem.local[g]]).sum::<f64>() / 3.0;
                let mut val = out.value(f).to_vec();
                val[ch] = v.clamp(0.0, 1.0);
                out.set(f, &val);
            }
        }
    }
    Ok(out)
}

/// Piecewise-constant image from per-region means.
pub fn piecewise_constant(map: &RegionMap, means: &BTreeMap<RegionId, Vec<f64>>, channels: usize) -> FaceImage {
    let mut img = FaceImage::constant(channels, map.labels().len(), 0.0);
    for (f, k) in map.labels().iter().enumerate() {
        if let Some(m) = means.get(k) {
            let v: Vec<f64> = m.iter().take(channels).map(|x| x.clamp(0.0, 1.0)).collect();
            img.set(f, &v);
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MeshOptions;
    use crate::region::{ColorSpace, FaceFeatures};
    use crate::synth;
    use approx::assert_abs_diff_eq;

    fn square() -> SurfaceMesh {
        let v = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        SurfaceMesh::new(v, vec![[0, 1, 2], [0, 2, 3]], MeshOptions { allow_open: true }).unwrap()
    }

    #[test]
    fn hat_gradients_of_unit_triangle() {
        let t = [Vec3::zeros(), Vec3::x(), Vec3::y()];
        assert_abs_diff_eq!(hat_gradient(&t, 0), Vec3::new(-1.0, -1.0, 0.0), epsilon = 1e-15);
        assert_abs_diff_eq!(hat_gradient(&t, 1), Vec3::new(1.0, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn hat_gradient_matches_finite_differences() {
        let t = [Vec3::new(0.3, -0.2, 0.5), Vec3::new(1.1, 0.4, -0.3), Vec3::new(-0.2, 0.9, 0.7)];
        let n = (t[1] - t[0]).cross(&(t[2] - t[0])).normalize();
        let sum: Vec3 = (0..3).map(|i| hat_gradient(&t, i)).sum();
        assert!(sum.norm() < 1e-12);
        for i in 0..3 {
            let g = hat_gradient(&t, i);
            assert!(g.dot(&n).abs() < 1e-12);
            // phi_i is 1 at vertex i and 0 at the others.
            for j in 0..3 {
                let d = t[j] - t[i];
                let expected = if i == j { 0.0 } else { -1.0 };
                assert_abs_diff_eq!(g.dot(&d), expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn single_triangle_mass() {
        let v = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
        let mesh = SurfaceMesh::new(v, vec![[0, 1, 2]], MeshOptions { allow_open: true }).unwrap();
        let fem = assemble_region(&mesh, 1, &[0]).unwrap();
        for m in &fem.mass {
            assert_abs_diff_eq!(*m, 1.0 / 6.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn stiffness_rows_sum_to_zero() {
        let mesh = synth::icosphere(2, 1.0).build(MeshOptions::default()).unwrap();
        let faces: Vec<usize> = (0..mesh.num_faces()).filter(|f| f % 3 != 0).collect();
        let fem = assemble_region(&mesh, 1, &faces).unwrap();
        let ones = vec![1.0; fem.len()];
        let scale = fem.stiffness.max_abs();
        assert!(fem.stiffness.mul_vec(&ones).iter().all(|r| r.abs() < 1e-12 * scale));
        assert!(fem.stiffness.symmetry_defect() < 1e-12 * scale);
    }

    #[test]
    fn constant_data_is_fixed() {
        let mesh = square();
        let img = FaceImage::from_gray(vec![0.5, 0.5]).unwrap();
        let fem = assemble_region(&mesh, 1, &[0, 1]).unwrap();
        let u0 = fem.vertex_data(&mesh, &img, 0);
        assert!(u0.iter().all(|v| (v - 0.5).abs() < 1e-15));
        for lambda in [0.1, 1.0, 1e4] {
            let u = solve_region(&fem, &u0, lambda, &SolveOptions::default()).unwrap();
            assert!(u.iter().all(|v| (v - 0.5).abs() < 1e-10));
        }
    }

    #[test]
    fn huge_lambda_reproduces_data() {
        let mesh = square();
        let fem = assemble_region(&mesh, 1, &[0, 1]).unwrap();
        let u0 = vec![0.0, 1.0, 0.0, 1.0];
        let u = solve_region(&fem, &u0, 1e12, &SolveOptions::default()).unwrap();
        for (a, b) in u.iter().zip(&u0) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
    }

    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
            a.swap(k, p);
            b.swap(k, p);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
            x[k] = (b[k] - s) / a[k][k];
        }
        x
    }

    #[test]
    fn strip_matches_dense_solve() {
        let v = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(1.0, 1.2, 0.1),
        ];
        let mesh = SurfaceMesh::new(v, vec![[0, 1, 2], [1, 3, 2]], MeshOptions { allow_open: true }).unwrap();
        let fem = assemble_region(&mesh, 1, &[0, 1]).unwrap();
        let u0 = vec![0.2, 0.9, 0.4, 0.1];
        let u = solve_region(&fem, &u0, 1.0, &SolveOptions::default()).unwrap();
        let rhs: Vec<f64> = u0.iter().zip(&fem.mass).map(|(a, m)| a * m).collect();
        let x = dense_solve(fem.system(1.0).to_dense(), rhs);
        for (a, b) in u.iter().zip(&x) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn piecewise_constant_regions_are_preserved() {
        let mesh = synth::plane_grid(8, 1.0, 0.0).unwrap().build(MeshOptions { allow_open: true }).unwrap();
        let labels: Vec<RegionId> =
            (0..mesh.num_faces()).map(|f| if mesh.face_center(f).x < 0.0 { 1 } else { 2 }).collect();
        let vals: Vec<f64> = labels.iter().map(|&k| if k == 1 { 0.0 } else { 1.0 }).collect();
        let img = FaceImage::from_gray(vals.clone()).unwrap();
        let feats = FaceFeatures::new(&mesh, &img, ColorSpace::Gray).unwrap();
        let map = RegionMap::from_labels(labels, &feats);
        for lambda in [0.1, 100.0] {
            let out = restore(&mesh, &img, &map, lambda, &SolveOptions::default()).unwrap();
            for (a, b) in out.raw().iter().zip(&vals) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn solution_obeys_maximum_principle_and_minimizes_energy() {
        let mesh = synth::icosphere(2, 1.0).build(MeshOptions::default()).unwrap();
        let img = synth::add_noise(&FaceImage::constant(1, mesh.num_faces(), 0.5), 0.2, 7).unwrap();
        let faces: Vec<usize> = (0..mesh.num_faces()).collect();
        let fem = assemble_region(&mesh, 1, &faces).unwrap();
        let u0 = fem.vertex_data(&mesh, &img, 0);
        let (lo, hi) = u0.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        for lambda in [0.1, 10.0, 1000.0] {
            let u = solve_region(&fem, &u0, lambda, &SolveOptions::default()).unwrap();
            assert!(u.iter().all(|&v| v >= lo - 1e-9 && v <= hi + 1e-9));
            let mean = u0.iter().zip(&fem.mass).map(|(a, m)| a * m).sum::<f64>() / fem.mass.iter().sum::<f64>();
            let e = fem.energy(&u, &u0, lambda);
            assert!(e <= fem.energy(&u0, &u0, lambda) + 1e-12);
            assert!(e <= fem.energy(&vec![mean; u.len()], &u0, lambda) + 1e-12);
        }
    }
}
