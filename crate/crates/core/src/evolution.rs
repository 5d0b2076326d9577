//! One semi-implicit time step of forced geodesic curvature flow.
//!
//! Unknowns are a scalar curvature per curve node and a displacement per
//! position unknown; the three endpoints meeting at a triple junction share
//! one position unknown. The curvature is eliminated (Schur complement) and
//! the remaining system for the displacement is solved on the tangent
//! spaces of the surface.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::curve::{CurveError, CurveNetwork, NodeFrames, RegionId};
use crate::linalg::{solve_spd, CsrMatrix, LinalgError, SolveOptions, SolveStats, TripletMatrix};
use crate::mesh::{MeshError, SurfaceMesh};
use crate::region::{Coefficients, FaceFeatures, RegionError, RegionMap};
use crate::Vec3;

#[derive(Debug, Error)]
pub enum EvolutionError {
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error("singular step system: {0}")]
    Singular(LinalgError),
    #[error("linear solver failed: {0}")]
    Solver(LinalgError),
    #[error("assumption (A1)/(A2) violated for {0}")]
    Assumption(String),
    #[error("node left the surface band after the step ({0}); reduce the time step")]
    Projection(MeshError),
    #[error("invalid step parameter: {0}")]
    Invalid(String),
}

impl From<LinalgError> for EvolutionError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::ZeroPivot { .. } => EvolutionError::Singular(e),
            other => EvolutionError::Solver(other),
        }
    }
}

/// Index maps from curve nodes to scalar and vector unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    /// `vec_of[c][j]` is the position unknown of node `j` of curve `c`.
    pub vec_of: Vec<Vec<usize>>,
    /// First scalar unknown of each curve; node `j` maps to `offset + j`.
    pub scalar_offset: Vec<usize>,
    pub n_scalar: usize,
    pub n_vec: usize,
    /// One representative `(curve, node)` per position unknown.
    pub owner: Vec<(usize, usize)>,
}

impl DofMap {
    pub fn new(net: &CurveNetwork) -> Self {
        let mut vec_of: Vec<Vec<usize>> = net.curves.iter().map(|c| vec![usize::MAX; c.len()]).collect();
        let mut owner = Vec::new();
        for k in 0..net.junctions.len() {
            let g = owner.len();
            let mut first = None;
            for e in &net.junctions[k].ends {
                if let Some(ci) = net.index_of(e.curve) {
                    let j = net.curves[ci].end_index(e.end);
                    vec_of[ci][j] = g;
                    first.get_or_insert((ci, j));
                }
            }
            if let Some(o) = first {
                owner.push(o);
            }
        }
        for (ci, c) in net.curves.iter().enumerate() {
            for j in 0..c.len() {
                if vec_of[ci][j] == usize::MAX {
                    vec_of[ci][j] = owner.len();
                    owner.push((ci, j));
                }
            }
        }
        let mut scalar_offset = Vec::with_capacity(net.curves.len());
        let mut n_scalar = 0;
        for c in &net.curves {
            scalar_offset.push(n_scalar);
            n_scalar += c.len();
        }
        DofMap { vec_of, scalar_offset, n_scalar, n_vec: owner.len(), owner }
    }
}

/// Lumped mass, conormals and stiffness of the current curve network.
#[derive(Debug, Clone)]
pub struct SystemMatrices {
    pub dofs: DofMap,
    /// Lumped mass per scalar unknown.
    pub mass: Vec<f64>,
    /// Conormal per scalar unknown.
    pub omega_m: Vec<Vec3>,
    /// Position unknown of each scalar unknown.
    pub vec_index: Vec<usize>,
    /// Surface normal per position unknown.
    pub omega_phi: Vec<Vec3>,
    /// Scalar stiffness over position unknowns (acts per coordinate).
    pub stiffness: CsrMatrix,
    /// Current positions per position unknown.
    pub positions: Vec<Vec3>,
}

pub fn assemble(net: &CurveNetwork, frames: &[NodeFrames]) -> Result<SystemMatrices, EvolutionError> {
    let dofs = DofMap::new(net);
    let mut mass = vec![0.0; dofs.n_scalar];
    let mut omega_m = vec![Vec3::zeros(); dofs.n_scalar];
    let mut vec_index = vec![0; dofs.n_scalar];
    let mut omega_phi = vec![Vec3::zeros(); dofs.n_vec];
    let mut positions = vec![Vec3::zeros(); dofs.n_vec];
    let mut a = TripletMatrix::with_capacity(dofs.n_vec, dofs.n_vec, 4 * dofs.n_scalar);
    for (ci, c) in net.curves.iter().enumerate() {
        c.check_assumption_a()?;
        let off = dofs.scalar_offset[ci];
        for j in 0..c.len() {
            let g = dofs.vec_of[ci][j];
            omega_m[off + j] = frames[ci].omega_m[j];
            vec_index[off + j] = g;
            if dofs.owner[g] == (ci, j) {
                omega_phi[g] = frames[ci].omega_phi[j];
                positions[g] = c.nodes[j];
            }
        }
        for s in 0..c.num_segments() {
            let (p, q) = c.segment(s);
            let h = c.segment_length(s);
            mass[off + p] += 0.5 * h;
            mass[off + q] += 0.5 * h;
            let (gp, gq) = (dofs.vec_of[ci][p], dofs.vec_of[ci][q]);
            let w = 1.0 / h;
            a.push(gp, gp, w);
            a.push(gq, gq, w);
            a.push(gp, gq, -w);
            a.push(gq, gp, -w);
        }
    }
    Ok(SystemMatrices { dofs, mass, omega_m, vec_index, omega_phi, stiffness: a.finalize(true), positions })
}

/// Weights of the data term.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingParams {
    pub mu: f64,
    /// One weight per feature dimension (CB: three chroma weights, then brightness).
    pub weights: Vec<f64>,
    /// Optional per-region multipliers of the data term (default 1).
    pub region_scale: BTreeMap<RegionId, f64>,
}

impl ForcingParams {
    pub fn uniform(mu: f64, lambda: f64, dims: usize) -> Self {
        Self { mu, weights: vec![lambda; dims], region_scale: BTreeMap::new() }
    }

    pub fn scale(&self, k: RegionId) -> f64 {
        self.region_scale.get(&k).copied().unwrap_or(1.0)
    }

    fn data(&self, f: &[f64], c: &[f64]) -> f64 {
        self.weights.iter().zip(f).zip(c).map(|((w, x), y)| w * (x - y) * (x - y)).sum()
    }
}

/// Face used to evaluate the image at a node.
pub fn node_face(mesh: &SurfaceMesh, p: &Vec3, hint: usize) -> usize {
    mesh.locate_point(p, Some(hint)).map(|l| l.face).unwrap_or(hint)
}

/// Nodal forcing `F` per scalar unknown.
pub fn forcing_vector(
    net: &CurveNetwork,
    mesh: &SurfaceMesh,
    feats: &FaceFeatures,
    coeffs: &Coefficients,
    params: &ForcingParams,
) -> Result<Vec<f64>, EvolutionError> {
    let mut out = Vec::with_capacity(net.num_nodes());
    for c in &net.curves {
        let cp = coeffs.get(c.region_plus)?;
        let cm = coeffs.get(c.region_minus)?;
        let (sp, sm) = (params.scale(c.region_plus), params.scale(c.region_minus));
        for (p, &hint) in c.nodes.iter().zip(&c.faces) {
            let u = feats.value(node_face(mesh, p, hint));
            out.push(params.mu + sp * params.data(u, cp) - sm * params.data(u, cm));
        }
    }
    Ok(out)
}

/// Load vector `b = M F`.
pub fn load_vector(sys: &SystemMatrices, forcing: &[f64]) -> Vec<f64> {
    sys.mass.iter().zip(forcing).map(|(m, f)| m * f).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    pub sigma: f64,
    pub tau: f64,
    pub solve: SolveOptions,
    /// Run the (A1)/(A2) rank checks before solving.
    pub check_assumptions: bool,
}

impl Default for StepParams {
    fn default() -> Self {
        Self { sigma: 1.0, tau: 1e-3, solve: SolveOptions::default(), check_assumptions: false }
    }
}

#[derive(Debug, Clone)]
pub struct StepResult {
    /// Displacement per position unknown.
    pub delta_x: Vec<Vec3>,
    /// Curvature per scalar unknown.
    pub kappa: Vec<f64>,
    pub solver: SolveStats,
    /// Relative residual of the coupled (uneliminated) system.
    pub residual: f64,
}

impl StepResult {
    pub fn max_displacement(&self) -> f64 {
        self.delta_x.iter().map(|d| d.norm()).fold(0.0, f64::max)
    }
}

fn projector(n: &Vec3) -> nalgebra::Matrix3<f64> {
    nalgebra::Matrix3::identity() - n * n.transpose()
}

/// Solves one step for the displacement and the curvature.
pub fn step(sys: &SystemMatrices, forcing: &[f64], params: &StepParams) -> Result<StepResult, EvolutionError> {
    let StepParams { sigma, tau, .. } = *params;
    if !(sigma > 0.0 && tau > 0.0) {
        return Err(EvolutionError::Invalid(format!("sigma and tau must be positive (sigma={sigma}, tau={tau})")));
    }
    if forcing.len() != sys.dofs.n_scalar {
        return Err(EvolutionError::Invalid("forcing has the wrong length".into()));
    }
    let nv = sys.dofs.n_vec;
    let inv_st = 1.0 / (sigma * tau);

    // Per-unknown conormal mass blocks D_g = sum_j M_j w_j w_j^T.
    let mut d = vec![nalgebra::Matrix3::<f64>::zeros(); nv];
    let mut rhs_f = vec![Vec3::zeros(); nv];
    for (j, &g) in sys.vec_index.iter().enumerate() {
        let w = sys.omega_m[j];
        d[g] += sys.mass[j] * w * w.transpose();
        rhs_f[g] += sys.mass[j] * forcing[j] * w;
    }
    let proj: Vec<_> = sys.omega_phi.iter().map(projector).collect();

    // P A P + (1/(sigma tau)) P D P, plus the normal regularization added below.
    let mut t = TripletMatrix::with_capacity(3 * nv, 3 * nv, 9 * (sys.stiffness.nnz() + nv));
    let mut diag_sum = 0.0;
    for g in 0..nv {
        for (h, aval) in sys.stiffness.row(g) {
            let blk = aval * proj[g] * proj[h];
            for r in 0..3 {
                for c in 0..3 {
                    if blk[(r, c)] != 0.0 {
                        t.push(3 * g + r, 3 * h + c, blk[(r, c)]);
                    }
                }
            }
            if h == g {
                diag_sum += blk.trace();
            }
        }
        let blk = inv_st * proj[g] * d[g] * proj[g];
        diag_sum += blk.trace();
        for r in 0..3 {
            for c in 0..3 {
                if blk[(r, c)] != 0.0 {
                    t.push(3 * g + r, 3 * g + c, blk[(r, c)]);
                }
            }
        }
    }
    let alpha = diag_sum / (3 * nv) as f64;
    for (g, n) in sys.omega_phi.iter().enumerate() {
        let blk = alpha * n * n.transpose();
        for r in 0..3 {
            for c in 0..3 {
                t.push(3 * g + r, 3 * g + c, blk[(r, c)]);
            }
        }
    }
    let s = t.finalize(true);

    // rhs = P[(1/sigma) N_M F - A X].
    let ax = apply_stiffness(&sys.stiffness, &sys.positions);
    let mut rhs = vec![0.0; 3 * nv];
    for g in 0..nv {
        let v = proj[g] * (rhs_f[g] / sigma - ax[g]);
        rhs[3 * g..3 * g + 3].copy_from_slice(v.as_slice());
    }

    let (x, solver) = solve_spd(&s, &rhs, &params.solve)?;
    let delta_x: Vec<Vec3> = (0..nv).map(|g| Vec3::new(x[3 * g], x[3 * g + 1], x[3 * g + 2])).collect();
    let kappa: Vec<f64> = (0..sys.dofs.n_scalar)
        .map(|j| inv_st * (sys.omega_m[j].dot(&delta_x[sys.vec_index[j]]) - tau * forcing[j]))
        .collect();
    let residual = coupled_residual(sys, forcing, params, &delta_x, &kappa);
    Ok(StepResult { delta_x, kappa, solver, residual })
}

fn apply_stiffness(a: &CsrMatrix, x: &[Vec3]) -> Vec<Vec3> {
    (0..a.nrows()).map(|g| a.row(g).fold(Vec3::zeros(), |acc, (h, v)| acc + v * x[h])).collect()
}

/// Relative residual of the coupled system for `(delta_x, kappa)`:
/// `(1/tau) N^T dX - sigma M kappa = M F` and
/// `P (N kappa + A dX) = -P A X`.
pub fn coupled_residual(
    sys: &SystemMatrices,
    forcing: &[f64],
    params: &StepParams,
    delta_x: &[Vec3],
    kappa: &[f64],
) -> f64 {
    let nv = sys.dofs.n_vec;
    let mut r2 = 0.0;
    let mut b2 = 0.0;
    let mut nk = vec![Vec3::zeros(); nv];
    for j in 0..sys.dofs.n_scalar {
        let g = sys.vec_index[j];
        let m = sys.mass[j];
        let lhs = m * sys.omega_m[j].dot(&delta_x[g]) / params.tau - params.sigma * m * kappa[j];
        let b = m * forcing[j];
        r2 += (lhs - b).powi(2);
        b2 += b * b;
        nk[g] += m * kappa[j] * sys.omega_m[j];
    }
    let adx = apply_stiffness(&sys.stiffness, delta_x);
    let ax = apply_stiffness(&sys.stiffness, &sys.positions);
    for g in 0..nv {
        let p = projector(&sys.omega_phi[g]);
        let lhs = p * (nk[g] + adx[g]);
        let rhs = -(p * ax[g]);
        r2 += (lhs - rhs).norm_squared();
        b2 += rhs.norm_squared();
    }
    if b2 > 0.0 {
        (r2 / b2).sqrt()
    } else {
        r2.sqrt()
    }
}

/// Moves every node by its displacement and projects it back onto the
/// mesh. Junction endpoints receive one shared position. Returns the
/// largest node displacement.
pub fn advance(
    net: &mut CurveNetwork,
    mesh: &SurfaceMesh,
    dofs: &DofMap,
    delta_x: &[Vec3],
) -> Result<f64, EvolutionError> {
    let mut new_pos = Vec::with_capacity(dofs.n_vec);
    let mut max_move = 0.0f64;
    for (g, &(ci, j)) in dofs.owner.iter().enumerate() {
        let c = &net.curves[ci];
        let target = c.nodes[j] + delta_x[g];
        let loc = mesh
            .project_to_surface(&target, Some(c.faces[j]))
            .or_else(|_| mesh.project_to_surface(&target, None))
            .map_err(EvolutionError::Projection)?;
        max_move = max_move.max((loc.point - c.nodes[j]).norm());
        new_pos.push(loc);
    }
    for (ci, c) in net.curves.iter_mut().enumerate() {
        for j in 0..c.len() {
            let loc = new_pos[dofs.vec_of[ci][j]];
            c.nodes[j] = loc.point;
            c.faces[j] = loc.face;
        }
    }
    Ok(max_move)
}

/// Discrete energy: `sigma |Gamma| + mu |plus-only regions| + sum_k lambda_k int (u - c_k)^2`.
pub fn compute_energy(
    mesh: &SurfaceMesh,
    net: &CurveNetwork,
    map: &RegionMap,
    feats: &FaceFeatures,
    coeffs: &Coefficients,
    sigma: f64,
    params: &ForcingParams,
) -> Result<f64, EvolutionError> {
    let mut e = sigma * net.total_length();
    if params.mu != 0.0 {
        let plus: std::collections::BTreeSet<RegionId> = net.curves.iter().map(|c| c.region_plus).collect();
        let minus: std::collections::BTreeSet<RegionId> = net.curves.iter().map(|c| c.region_minus).collect();
        for k in plus.difference(&minus) {
            if let Some(s) = map.stats().get(k) {
                e += params.mu * s.area(feats);
            }
        }
    }
    for f in 0..mesh.num_faces() {
        let k = map.region_of(f);
        let c = coeffs.get(k)?;
        e += mesh.face_area(f) * params.scale(k) * params.data(feats.value(f), c);
    }
    Ok(e)
}
