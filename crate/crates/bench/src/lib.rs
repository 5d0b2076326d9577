//! Fixtures shared by the benchmarks.

use surfseg_core::{synth, CurveNetwork, FaceImage, MeshOptions, SurfaceMesh, Vec3};

/// Unit icosphere with a closed circle of `n` nodes at polar angle `r`.
pub fn sphere_circle(subdiv: u32, n: usize, r: f64) -> (SurfaceMesh, CurveNetwork) {
    let mesh = synth::icosphere(subdiv, 1.0).build(MeshOptions::default()).expect("icosphere builds");
    let mut net = CurveNetwork::new();
    let pts = synth::sphere_circle(&Vec3::z(), 1.0, r, n);
    net.add_curve(CurveNetwork::snapped_curve(&mesh, &pts, true, 2, 1).expect("circle snaps"));
    (mesh, net)
}

/// Unsnapped planar circle of `n` nodes with spacing about `spacing`; only
/// node positions matter for collision detection.
pub fn planar_circle(n: usize, spacing: f64) -> CurveNetwork {
    let r = spacing * n as f64 / std::f64::consts::TAU;
    let nodes = synth::plane_circle((0.0, 0.0), r, 0.0, n);
    let mut net = CurveNetwork::new();
    net.add_curve(surfseg_core::Curve {
        id: 0,
        faces: vec![0; n],
        nodes,
        closed: true,
        region_plus: 2,
        region_minus: 1,
    });
    net
}

/// Noisy two-hemisphere gray image.
pub fn noisy_hemispheres(mesh: &SurfaceMesh, amplitude: f64) -> FaceImage {
    let img = synth::paint_hemispheres(mesh, &[0.2], &[0.8]).expect("paints");
    synth::add_noise(&img, amplitude, 1).expect("noise")
}

/// Points spread over the unit sphere for locate and projection queries.
pub fn probe_points(n: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let a = golden * k as f64;
            Vec3::new(r * a.cos(), r * a.sin(), z) * 1.001
        })
        .collect()
}
