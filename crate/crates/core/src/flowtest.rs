//! Unforced curvature-flow runs compared against closed-form or ODE radius
//! laws.

use serde::Serialize;

use crate::curve::CurveNetwork;
use crate::error::Result;
use crate::evolution::{self, StepParams};
use crate::mesh::{MeshOptions, SurfaceMesh};
use crate::synth;
use crate::Vec3;

/// One sample of a radius trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub time: f64,
    pub radius: f64,
    pub exact: f64,
}

impl Sample {
    pub fn rel_error(&self) -> f64 {
        (self.radius - self.exact).abs() / self.exact
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowReport {
    pub nodes: usize,
    pub tau: f64,
    pub samples: Vec<Sample>,
    pub max_rel_error: f64,
    pub max_residual: f64,
}

impl FlowReport {
    fn new(nodes: usize, tau: f64, samples: Vec<Sample>, max_residual: f64) -> Self {
        let max_rel_error = samples.iter().map(Sample::rel_error).fold(0.0, f64::max);
        Self { nodes, tau, samples, max_rel_error, max_residual }
    }
}

/// Evolves with `F = 0` until `stop` holds or `max_steps` is reached,
/// recording `measure` after every step (and initially).
pub fn run_unforced(
    mesh: &SurfaceMesh,
    net: &mut CurveNetwork,
    params: &StepParams,
    max_steps: usize,
    mut measure: impl FnMut(&CurveNetwork, f64),
    stop: impl Fn(&CurveNetwork) -> bool,
) -> Result<f64> {
    let mut max_res = 0.0f64;
    measure(net, 0.0);
    for m in 0..max_steps {
        if stop(net) {
            break;
        }
        let frames = net.compute_frames(mesh)?;
        let sys = evolution::assemble(net, &frames)?;
        let forcing = vec![0.0; sys.dofs.n_scalar];
        let out = evolution::step(&sys, &forcing, params)?;
        max_res = max_res.max(out.residual);
        evolution::advance(net, mesh, &sys.dofs, &out.delta_x)?;
        measure(net, (m + 1) as f64 * params.tau);
    }
    Ok(max_res)
}

/// Shrinking circle on a flat grid against `R(t) = sqrt(R0^2 - 2 sigma t)`.
pub fn plane_circle(n: usize, r0: f64, sigma: f64, tau: f64, r_stop: f64, grid: usize) -> Result<FlowReport> {
    let half = 1.25 * r0;
    let mesh = synth::plane_grid(grid, half, 0.0)?.build(MeshOptions { allow_open: true })?;
    let mut net = CurveNetwork::new();
    net.add_curve(CurveNetwork::snapped_curve(&mesh, &synth::plane_circle((0.0, 0.0), r0, 0.0, n), true, 2, 1)?);
    let mut samples = Vec::new();
    let radius = |net: &CurveNetwork| {
        let c = &net.curves[0];
        let center: Vec3 = c.nodes.iter().sum::<Vec3>() / c.len() as f64;
        c.nodes.iter().map(|x| (x - center).norm()).sum::<f64>() / c.len() as f64
    };
    let params = StepParams { sigma, tau, ..StepParams::default() };
    let max_steps = ((r0 * r0 - r_stop * r_stop) / (2.0 * sigma * tau)).ceil() as usize + 10;
    let res = run_unforced(
        &mesh,
        &mut net,
        &params,
        max_steps,
        |net, t| {
            let exact2 = r0 * r0 - 2.0 * sigma * t;
            if exact2 > 0.0 {
                samples.push(Sample { time: t, radius: radius(net), exact: exact2.sqrt() });
            }
        },
        |net| radius(net) <= r_stop,
    )?;
    Ok(FlowReport::new(n, tau, samples, res))
}

/// Solution of `dr/dt = -sigma cot r` at time `t` by classical RK4.
pub fn sphere_radius_ode(r0: f64, sigma: f64, t: f64) -> f64 {
    let f = |r: f64| -sigma / r.tan();
    let steps = ((t / 1e-5).ceil() as usize).max(1);
    let h = t / steps as f64;
    let mut r = r0;
    for _ in 0..steps {
        let k1 = f(r);
        let k2 = f(r + 0.5 * h * k1);
        let k3 = f(r + 0.5 * h * k2);
        let k4 = f(r + h * k3);
        r += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    r
}

/// Mean polar angle of the nodes about `axis` on a sphere centered at the origin.
pub fn polar_radius(net: &CurveNetwork, axis: &Vec3) -> f64 {
    let c = &net.curves[0];
    c.nodes.iter().map(|x| (x.normalize().dot(axis)).clamp(-1.0, 1.0).acos()).sum::<f64>() / c.len() as f64
}

/// Geodesic circle on the unit icosphere against the `cot r` ODE.
pub fn sphere_circle(subdiv: u32, n: usize, r0: f64, sigma: f64, tau: f64, r_stop: f64) -> Result<FlowReport> {
    let mesh = synth::icosphere(subdiv, 1.0).build(MeshOptions::default())?;
    let axis = Vec3::z();
    let mut net = CurveNetwork::new();
    net.add_curve(CurveNetwork::snapped_curve(&mesh, &synth::sphere_circle(&axis, 1.0, r0, n), true, 2, 1)?);
    // The discrete initial radius differs slightly from r0 after snapping.
    let start = polar_radius(&net, &axis);
    let params = StepParams { sigma, tau, ..StepParams::default() };
    let mut samples = Vec::new();
    let mut ode_r = start;
    let mut ode_t = 0.0;
    let res = run_unforced(
        &mesh,
        &mut net,
        &params,
        1_000_000,
        |net, t| {
            if t > ode_t {
                ode_r = sphere_radius_ode(ode_r, sigma, t - ode_t);
                ode_t = t;
            }
            samples.push(Sample { time: t, radius: polar_radius(net, &axis), exact: ode_r });
        },
        |net| polar_radius(net, &axis) <= r_stop,
    )?;
    Ok(FlowReport::new(n, tau, samples, res))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftReport {
    pub nodes: usize,
    pub steps: usize,
    pub tau: f64,
    pub max_drift: f64,
    pub drift_per_time: f64,
}

/// Equator polygon under unforced flow; reports the largest node drift.
pub fn equator_drift(subdiv: u32, n: usize, tau: f64, steps: usize) -> Result<DriftReport> {
    let mesh = synth::icosphere(subdiv, 1.0).build(MeshOptions::default())?;
    let mut net = CurveNetwork::new();
    let pts = synth::sphere_circle(&Vec3::z(), 1.0, std::f64::consts::FRAC_PI_2, n);
    net.add_curve(CurveNetwork::snapped_curve(&mesh, &pts, true, 2, 1)?);
    let start = net.curves[0].nodes.clone();
    let mut max_drift = 0.0f64;
    let params = StepParams { sigma: 1.0, tau, ..StepParams::default() };
    run_unforced(
        &mesh,
        &mut net,
        &params,
        steps,
        |net, _| {
            for (a, b) in net.curves[0].nodes.iter().zip(&start) {
                max_drift = max_drift.max((a - b).norm());
            }
        },
        |_| false,
    )?;
    let total = tau * steps as f64;
    Ok(DriftReport { nodes: n, steps, tau, max_drift, drift_per_time: max_drift / total })
}

/// Observed orders `log2(e_k / e_{k+1})` of a refinement sequence.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub space: Vec<FlowReport>,
    pub space_orders: Vec<f64>,
    pub time: Vec<FlowReport>,
    pub time_orders: Vec<f64>,
    pub sphere: FlowReport,
    pub equator: DriftReport,
}

/// Plane-circle errors under node doubling and step halving, plus the sphere checks.
pub fn convergence_study(
    nodes: &[usize],
    taus: &[f64],
    r0: f64,
    r_stop: f64,
    sphere_subdiv: u32,
) -> Result<ConvergenceReport> {
    let finest_tau = taus.iter().copied().fold(f64::INFINITY, f64::min);
    let finest_n = nodes.iter().copied().max().unwrap_or(256);
    let space: Vec<FlowReport> =
        nodes.iter().map(|&n| plane_circle(n, r0, 1.0, finest_tau, r_stop, 32)).collect::<Result<_>>()?;
    let time: Vec<FlowReport> =
        taus.iter().map(|&t| plane_circle(finest_n, r0, 1.0, t, r_stop, 32)).collect::<Result<_>>()?;
    let space_orders = observed_orders(&space.iter().map(|r| r.max_rel_error).collect::<Vec<_>>());
    let time_orders = observed_orders(&time.iter().map(|r| r.max_rel_error).collect::<Vec<_>>());
    let sphere =
        sphere_circle(sphere_subdiv, 128, std::f64::consts::FRAC_PI_4, 1.0, 1e-3, std::f64::consts::FRAC_PI_8)?;
    let equator = equator_drift(sphere_subdiv, 128, 1e-3, 1000)?;
    Ok(ConvergenceReport { space, space_orders, time, time_orders, sphere, equator })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ode_matches_closed_form() {
        // cos r(t) = cos r0 * exp(sigma t).
        let (r0, t): (f64, f64) = (0.7, 0.1);
        let exact = (r0.cos() * t.exp()).acos();
        assert!((sphere_radius_ode(r0, 1.0, t) - exact).abs() < 1e-10);
    }

    #[test]
    fn coarse_plane_circle_follows_law() {
        let r = plane_circle(32, 0.4, 1.0, 1e-3, 0.2, 16).unwrap();
        assert!(r.max_rel_error < 0.05, "{}", r.max_rel_error);
        assert!(r.max_residual < 1e-9);
        assert!(r.samples.last().unwrap().radius <= 0.21);
    }

    #[test]
    fn orders_of_halving_errors() {
        let o = observed_orders(&[0.4, 0.1, 0.025]);
        assert!(o.iter().all(|x| (x - 2.0).abs() < 1e-12));
    }
}
