use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::json;
use surfseg_core::region::{initialize_regions, FaceFeatures};
use surfseg_core::synth::{self, DiscMetric};
use surfseg_core::{
    flowtest, load_mesh, restoration, run_segmentation, save_mesh, ColorSpace, CurveNetwork, FaceImage, MeshOptions,
    RegionMap, SolveOptions, SurfaceMesh, Vec3,
};

use crate::config::load_config;
use crate::{
    FlowKind, FlowTestArgs, MakeSurfaceArgs, Metric, PaintArgs, Pattern, RestoreArgs, Scenario, SegmentArgs,
    SurfaceKind,
};

/// One JSON object describing a failure, for machine consumption.
pub fn error_line(e: &anyhow::Error) -> String {
    use surfseg_core::{region::RegionError, restoration::RestorationError, CurveError, Error, MeshError};
    let core = e.chain().find_map(|c| c.downcast_ref::<Error>());
    let kind = e
        .chain()
        .find_map(|c| {
            if let Some(err) = c.downcast_ref::<Error>() {
                Some(err.kind())
            } else if c.is::<MeshError>() {
                Some("mesh")
            } else if c.is::<CurveError>() {
                Some("curve")
            } else if c.is::<RegionError>() {
                Some("region")
            } else if c.is::<RestorationError>() {
                Some("restoration")
            } else if c.is::<toml::de::Error>() {
                Some("config")
            } else if c.is::<std::io::Error>() {
                Some("io")
            } else {
                None
            }
        })
        .unwrap_or("cli");
    let step = match core {
        Some(Error::AtStep { step, .. }) => Some(*step),
        _ => None,
    };
    json!({ "error": { "kind": kind, "step": step, "message": format!("{e:#}") } }).to_string()
}

fn load(path: &Path, allow_open: bool) -> Result<(SurfaceMesh, FaceImage)> {
    load_mesh(path, None, 1, MeshOptions { allow_open }).with_context(|| format!("loading {}", path.display()))
}

fn parse_values(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|v| v.trim().parse::<f64>().with_context(|| format!("bad number `{v}`"))).collect()
}

fn parse_value_list(s: &str) -> Result<Vec<Vec<f64>>> {
    s.split(';').filter(|p| !p.trim().is_empty()).map(parse_values).collect()
}

/// Approximate geodesic circle of radius `r` around the surface point
/// nearest `center`: each node is reached by short steps along the surface,
/// re-projected after every step. Counter-clockwise about the outward
/// normal, so region 1 is inside and region 2 outside.
fn init_circle(mesh: &SurfaceMesh, values: &[f64]) -> Result<CurveNetwork> {
    let (c, r, n) = match values {
        [x, y, z, r] => (Vec3::new(*x, *y, *z), *r, 64),
        [x, y, z, r, n] => (Vec3::new(*x, *y, *z), *r, *n as usize),
        _ => bail!("--init-circle takes cx,cy,cz,radius[,nodes]"),
    };
    if !(r > 0.0) || n < 3 {
        bail!("--init-circle needs a positive radius and at least 3 nodes");
    }
    let start = mesh.project_to_surface(&c, None)?;
    let normal = mesh.face_normal(start.face);
    let helper = if normal.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let x = normal.cross(&helper).normalize();
    let y = normal.cross(&x);
    let substeps = (r / (0.25 * mesh.mean_edge_length())).ceil().max(1.0) as usize;
    let h = r / substeps as f64;
    let mut pts = Vec::with_capacity(n);
    for k in 0..n {
        let a = std::f64::consts::TAU * k as f64 / n as f64;
        let (mut loc, mut d) = (start, x * a.cos() + y * a.sin());
        for _ in 0..substeps {
            loc = mesh.project_to_surface(&(loc.point + d * h), Some(loc.face))?;
            let nf = mesh.face_normal(loc.face);
            d = (d - nf * nf.dot(&d)).try_normalize(0.0).unwrap_or(d);
        }
        pts.push(loc.point);
    }
    let mut net = CurveNetwork::new();
    net.add_curve(CurveNetwork::snapped_curve(mesh, &pts, true, 2, 1)?);
    Ok(net)
}

pub fn segment(a: SegmentArgs) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref(), &a.overrides)?;
    if let Some(n) = a.output_every {
        cfg.output_every = n;
    }
    if let Some(l) = a.restore_lambda {
        cfg.restore_lambda = l;
    }
    cfg.check_invariants |= a.check_invariants;
    cfg.validate()?;

    let (mesh, image, net) = match a.scenario {
        Some(Scenario::ThreeDiscs) => {
            let s = synth::three_discs(5, 20.0, 128)?;
            (s.mesh, s.image, s.network)
        }
        Some(Scenario::TorusStripes) => {
            let s = synth::torus_stripes(64, 32, 48)?;
            (s.mesh, s.image, s.network)
        }
        None => {
            let path = a.mesh.as_deref().ok_or_else(|| anyhow!("--mesh is required"))?;
            let (mesh, image) = load(path, a.allow_open)?;
            let net = match (&a.curves, &a.init_circle) {
                (Some(p), _) => {
                    let (net, snap) =
                        CurveNetwork::load(p, &mesh).with_context(|| format!("loading {}", p.display()))?;
                    log::info!("initial curves snapped by up to {snap:.3e}");
                    net
                }
                (None, Some(values)) => init_circle(&mesh, values)?,
                (None, None) => bail!("give --curves or --init-circle"),
            };
            (mesh, image, net)
        }
    };
    let res = run_segmentation(&mesh, &image, net, &cfg, Some(&a.out))?;
    let mut counts = std::collections::BTreeMap::<String, usize>::new();
    for e in &res.events {
        *counts.entry(format!("{:?}", e.kind)).or_default() += 1;
    }
    let summary = json!({
        "steps": res.records.len(),
        "curves": res.network.curves.len(),
        "junctions": res.network.junctions.len(),
        "events": counts,
        "coefficients": res.coefficients.means,
        "out": a.out,
    });
    println!("{summary}");
    Ok(())
}

pub fn restore(a: RestoreArgs) -> Result<()> {
    let (mesh, image) = load(&a.mesh, a.allow_open)?;
    let feats = FaceFeatures::new(&mesh, &image, ColorSpace::Gray)?;
    let map = match &a.curves {
        Some(p) => {
            let (net, _) = CurveNetwork::load(p, &mesh).with_context(|| format!("loading {}", p.display()))?;
            if net.curves.is_empty() {
                RegionMap::uniform(mesh.num_faces(), 1, &feats)
            } else {
                let frames = net.compute_frames(&mesh)?;
                initialize_regions(&mesh, &net, &frames, &feats, a.n0)?
            }
        }
        None => RegionMap::uniform(mesh.num_faces(), 1, &feats),
    };
    fs::create_dir_all(&a.out)?;
    let opts = SolveOptions { method: a.solver, tol: a.tol, ..SolveOptions::default() };
    let mut written = Vec::new();
    for &lambda in &a.lambda {
        let img = restoration::restore(&mesh, &image, &map, lambda, &opts)?;
        let path = a.out.join(format!("denoised_{lambda}.ply"));
        save_mesh(&path, None, &mesh, Some(&img))?;
        written.push(path);
    }
    println!("{}", json!({ "regions": map.stats().len(), "written": written }));
    Ok(())
}

pub fn make_surface(a: MakeSurfaceArgs) -> Result<()> {
    let (data, allow_open) = match a.kind {
        SurfaceKind::Sphere => (synth::icosphere(a.subdiv, a.radius), false),
        SurfaceKind::Torus => (synth::torus(a.major, a.minor, a.nu, a.nv)?, false),
        SurfaceKind::Plane => (synth::plane_grid(a.n, a.half, 0.0)?, true),
        SurfaceKind::Slab => (synth::slab(a.n, a.half, a.thickness)?, false),
    };
    let mesh = data.build(MeshOptions { allow_open })?;
    save_mesh(&a.out, None, &mesh, None)?;
    println!(
        "{}",
        json!({ "vertices": mesh.num_vertices(), "faces": mesh.num_faces(), "closed": mesh.is_closed(), "out": a.out })
    );
    Ok(())
}

pub fn paint(a: PaintArgs) -> Result<()> {
    let (mesh, image) = load(&a.mesh, a.allow_open)?;
    let out = match a.pattern {
        Pattern::Discs => {
            let centers: Vec<Vec3> =
                parse_value_list(a.centers.as_deref().ok_or_else(|| anyhow!("discs need --centers"))?)?
                    .into_iter()
                    .map(|c| match c.as_slice() {
                        [x, y, z] => Ok(Vec3::new(*x, *y, *z)),
                        _ => Err(anyhow!("a disc center needs three coordinates")),
                    })
                    .collect::<Result<_>>()?;
            let radius = a.radius.ok_or_else(|| anyhow!("discs need --radius"))?;
            let metric = match a.metric {
                Metric::Euclidean => DiscMetric::Euclidean,
                Metric::Spherical => DiscMetric::Spherical,
            };
            synth::paint_discs(&mesh, &centers, radius, &parse_values(&a.inside)?, &parse_values(&a.outside)?, metric)?
        }
        Pattern::Stripes => synth::paint_stripes(&mesh, &parse_value_list(&a.values)?)?,
        Pattern::Hemispheres => synth::paint_hemispheres(&mesh, &parse_values(&a.north)?, &parse_values(&a.south)?)?,
        Pattern::Noise => synth::add_noise(&image, a.amplitude, a.seed)?,
    };
    save_mesh(&a.out, None, &mesh, Some(&out))?;
    println!("{}", json!({ "faces": mesh.num_faces(), "channels": out.channels(), "out": a.out }));
    Ok(())
}

pub fn flow_test(a: FlowTestArgs) -> Result<()> {
    let quarter = std::f64::consts::FRAC_PI_4;
    let report = match a.kind {
        FlowKind::Plane => {
            let n = a.nodes.last().copied().unwrap_or(256);
            serde_json::to_value(flowtest::plane_circle(
                n,
                a.r0.unwrap_or(0.4),
                a.sigma,
                a.tau,
                a.r_stop.unwrap_or(0.1),
                a.grid,
            )?)?
        }
        FlowKind::Sphere => {
            let n = a.nodes.last().copied().unwrap_or(128);
            let r0 = a.r0.unwrap_or(quarter);
            serde_json::to_value(flowtest::sphere_circle(
                a.subdiv,
                n,
                r0,
                a.sigma,
                a.tau,
                a.r_stop.unwrap_or(0.5 * r0),
            )?)?
        }
        FlowKind::Equator => {
            let n = a.nodes.last().copied().unwrap_or(128);
            serde_json::to_value(flowtest::equator_drift(a.subdiv, n, a.tau, a.steps)?)?
        }
        FlowKind::Study => serde_json::to_value(flowtest::convergence_study(
            &a.nodes,
            &a.taus,
            a.r0.unwrap_or(0.4),
            a.r_stop.unwrap_or(0.1),
            a.subdiv,
        )?)?,
    };
    let text = report.to_string();
    if let Some(p) = &a.out {
        fs::write(p, &text)?;
    }
    println!("{text}");
    Ok(())
}
