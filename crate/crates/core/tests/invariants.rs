use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use surfseg_core::evolution::{self, StepParams};
use surfseg_core::linalg::{solve_spd, CsrMatrix, TripletMatrix};
use surfseg_core::region::{FaceFeatures, RegionMap};
use surfseg_core::restoration::{assemble_region, region_faces, solve_region};
use surfseg_core::topology::{detect, EventKind, GridConfig};
use surfseg_core::{
    synth, ColorSpace, CurveNetwork, FaceImage, MeshOptions, SolveMethod, SolveOptions, SurfaceMesh, Vec3,
};

fn plane() -> SurfaceMesh {
    synth::plane_grid(24, 1.5, 0.0).unwrap().build(MeshOptions { allow_open: true }).unwrap()
}

fn sphere() -> SurfaceMesh {
    synth::icosphere(3, 1.0).build(MeshOptions::default()).unwrap()
}

/// Star-shaped closed polygon from radial wobble coefficients.
fn star(center: (f64, f64), r0: f64, wobble: &[f64], n: usize) -> Vec<Vec3> {
    (0..n)
        .map(|k| {
            let a = TAU * k as f64 / n as f64;
            let r = r0 * (1.0 + wobble.iter().enumerate().map(|(m, c)| c * ((m + 2) as f64 * a).cos()).sum::<f64>());
            Vec3::new(center.0 + r * a.cos(), center.1 + r * a.sin(), 0.0)
        })
        .collect()
}

fn polygon_length(pts: &[Vec3]) -> f64 {
    (0..pts.len()).map(|j| (pts[(j + 1) % pts.len()] - pts[j]).norm()).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn spd_solvers_agree_with_dense_lu(n in 2usize..40, seed in 0u64..1000, cg in any::<bool>()) {
        // Diagonally dominant banded matrix with pseudo-random off-diagonals.
        let mut t = TripletMatrix::new(n, n);
        let mut dense = DMatrix::<f64>::zeros(n, n);
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for i in 0..n {
            for j in i + 1..(i + 4).min(n) {
                let v = next();
                t.push(i, j, v);
                t.push(j, i, v);
                dense[(i, j)] = v;
                dense[(j, i)] = v;
            }
            t.push(i, i, 4.0);
            dense[(i, i)] += 4.0;
        }
        let a: CsrMatrix = t.finalize(true);
        let b: Vec<f64> = (0..n).map(|_| next()).collect();
        let method = if cg { SolveMethod::Cg } else { SolveMethod::Direct };
        let (x, stats) = solve_spd(&a, &b, &SolveOptions { method, tol: 1e-13, ..SolveOptions::default() }).unwrap();
        let exact = dense.lu().solve(&DVector::from_column_slice(&b)).unwrap();
        prop_assert!(stats.relative_residual <= 1e-12);
        for (u, v) in x.iter().zip(exact.iter()) {
            prop_assert!((u - v).abs() <= 1e-10);
        }
    }

    #[test]
    fn frames_are_orthonormal_on_the_sphere(theta in 0.2f64..1.4, n in 8usize..64) {
        let mesh = sphere();
        let mut net = CurveNetwork::new();
        let axis = Vec3::new(0.3, -0.2, 1.0).normalize();
        net.add_curve(CurveNetwork::snapped_curve(&mesh, &synth::sphere_circle(&axis, 1.0, theta, n), true, 2, 1).unwrap());
        let frames = net.compute_frames(&mesh).unwrap();
        for fr in &frames {
            for j in 0..fr.omega_m.len() {
                prop_assert!((fr.omega_m[j].norm() - 1.0).abs() < 1e-12);
                prop_assert!((fr.omega_phi[j].norm() - 1.0).abs() < 1e-12);
                prop_assert!(fr.omega_m[j].dot(&fr.omega_phi[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unforced_step_does_not_lengthen_planar_curves(
        cx in -0.3f64..0.3,
        cy in -0.3f64..0.3,
        r0 in 0.2f64..0.6,
        wobble in proptest::collection::vec(-0.12f64..0.12, 3),
        n in 8usize..80,
        log_tau in -5.0f64..-1.0,
    ) {
        let mesh = plane();
        let mut net = CurveNetwork::new();
        net.add_curve(CurveNetwork::snapped_curve(&mesh, &star((cx, cy), r0, &wobble, n), true, 2, 1).unwrap());
        let frames = net.compute_frames(&mesh).unwrap();
        let sys = evolution::assemble(&net, &frames).unwrap();
        let params = StepParams { tau: 10f64.powf(log_tau), ..StepParams::default() };
        let res = evolution::step(&sys, &vec![0.0; n], &params).unwrap();
        let c = &net.curves[0];
        let moved: Vec<Vec3> = (0..n).map(|j| c.nodes[j] + res.delta_x[sys.dofs.vec_of[0][j]]).collect();
        prop_assert!(polygon_length(&moved) <= polygon_length(&c.nodes) * (1.0 + 1e-12));
        prop_assert!(res.residual <= 1e-10);
    }

    #[test]
    fn projection_lands_in_its_face(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0, off in -0.5f64..0.5) {
        let mesh = sphere();
        let dir = Vec3::new(x, y, z);
        prop_assume!(dir.norm() > 0.1);
        // Offsets stay inside the band where projection is defined.
        let p = dir.normalize() * (1.0 + off * mesh.band());
        let loc = mesh.project_to_surface(&p, None).unwrap();
        let [a, b, c] = mesh.face_vertices(loc.face);
        let n = (b - a).cross(&(c - a));
        prop_assert!((loc.point - a).dot(&n).abs() <= 1e-12 * n.norm());
        for (u, v) in [(a, b), (b, c), (c, a)] {
            prop_assert!((v - u).cross(&(loc.point - u)).dot(&n) >= -1e-12 * n.norm_squared());
        }
        // No mesh vertex, itself a surface point, is closer.
        let nearest_vertex = mesh.vertices().iter().map(|v| (v - p).norm()).fold(f64::INFINITY, f64::min);
        prop_assert!((loc.point - p).norm() <= nearest_vertex + 1e-12);
    }

    #[test]
    fn restoration_minimizes_its_energy(log_lambda in -1.0f64..4.0, seed in 0u64..50, eps in -1e-3f64..1e-3) {
        let mesh = synth::icosphere(2, 1.0).build(MeshOptions::default()).unwrap();
        let image = synth::add_noise(&FaceImage::constant(1, mesh.num_faces(), 0.5), 0.2, seed).unwrap();
        let feats = FaceFeatures::new(&mesh, &image, ColorSpace::Gray).unwrap();
        let labels = (0..mesh.num_faces()).map(|f| if mesh.face_center(f).z > 0.0 { 1 } else { 2 }).collect();
        let map = RegionMap::from_labels(labels, &feats);
        let lambda = 10f64.powf(log_lambda);
        for (k, faces) in region_faces(&map) {
            let fem = assemble_region(&mesh, k, &faces).unwrap();
            let u0 = fem.vertex_data(&mesh, &image, 0);
            let u = solve_region(&fem, &u0, lambda, &SolveOptions::default()).unwrap();
            let e = fem.energy(&u, &u0, lambda);
            let bumped: Vec<f64> = u.iter().enumerate().map(|(i, v)| v + eps * ((i * 7 % 5) as f64 - 2.0)).collect();
            prop_assert!(e <= fem.energy(&bumped, &u0, lambda) + 1e-14);
        }
    }

    #[test]
    fn circles_collide_only_when_close(gap in 0.0f64..0.6, r in 0.25f64..0.45, plus in 2u32..4) {
        let mesh = plane();
        let cfg = GridConfig::new(0.05, 0.1).unwrap();
        let mut net = CurveNetwork::new();
        let x = r + 0.5 * gap;
        net.add_curve(CurveNetwork::snapped_curve(&mesh, &synth::plane_circle((-x, 0.01), r, 0.0, 96), true, 2, 1).unwrap());
        net.add_curve(CurveNetwork::snapped_curve(&mesh, &synth::plane_circle((x, 0.01), r, 0.0, 96), true, plus, 1).unwrap());
        let (events, _) = detect(&net, &cfg);
        if gap > cfg.delta0 {
            prop_assert!(events.is_empty(), "{events:?}");
        }
        if gap < 0.02 {
            let expected = if plus == 2 { EventKind::Merge } else { EventKind::CreateTripleJunctions };
            prop_assert!(!events.is_empty());
            prop_assert!(events.iter().all(|e| e.kind == expected));
        }
    }
}
