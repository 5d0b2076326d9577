//! The segmentation loop: regions and coefficients, curve step, topology
//! changes with sub-stepping, and remeshing, repeated for a fixed number of
//! steps. Also writes logs and output files.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use crate::curve::{refine_coarsen, Curve, CurveId, CurveNetwork, NodeFrames, RegionId};
use crate::error::{Error, Result};
use crate::evolution::{self, EvolutionError, ForcingParams, StepParams};
use crate::linalg::{SolveMethod, SolveOptions};
use crate::mesh::io::save_mesh;
use crate::mesh::{FaceImage, SurfaceMesh};
use crate::region::{
    compute_coefficients, initialize_regions, update_regions_incremental, Coefficients, ColorSpace, FaceFeatures,
    RegionError, RegionMap, Weighting,
};
use crate::restoration;
use crate::topology::{self, EventKind, GridConfig, TopologyEvent};
use crate::Vec3;

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(v) => vec![v],
        OneOrMany::Many(v) => v,
    })
}

/// Run parameters. Unset lengths are derived from the mesh and the
/// initial curves by [`RunConfig::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub sigma: f64,
    /// One weight for all channels, one per channel, or `[lambda_c, lambda_b]` in CB mode.
    #[serde(deserialize_with = "one_or_many")]
    pub lambda: Vec<f64>,
    pub mu: f64,
    pub dt: f64,
    pub steps: usize,
    pub n_sub: usize,
    pub n0: u32,
    pub l_min: Option<f64>,
    pub l_max: Option<f64>,
    pub grid_a: Option<f64>,
    pub delta0: Option<f64>,
    pub delete_tol: Option<f64>,
    pub color_space: ColorSpace,
    pub solver: SolveMethod,
    pub tol: f64,
    pub seed: u64,
    pub weighting: Weighting,
    /// Per-region multipliers of the data weight, as `[region, factor]` pairs.
    pub region_lambda: Vec<(RegionId, f64)>,
    /// Restoration weights applied to the final segmentation.
    pub restore_lambda: Vec<f64>,
    /// Write curves and the piecewise-constant image every this many steps (0: initial and final only).
    pub output_every: usize,
    /// Assert the invariants of every module after each step.
    pub check_invariants: bool,
    pub max_events_per_step: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            lambda: vec![1.0],
            mu: 0.0,
            dt: 1e-3,
            steps: 100,
            n_sub: 10,
            n0: 4,
            l_min: None,
            l_max: None,
            grid_a: None,
            delta0: None,
            delete_tol: None,
            color_space: ColorSpace::Gray,
            solver: SolveMethod::Direct,
            tol: 1e-10,
            seed: 0,
            weighting: Weighting::Count,
            region_lambda: Vec::new(),
            restore_lambda: Vec::new(),
            output_every: 0,
            check_invariants: false,
            max_events_per_step: 8,
        }
    }
}

/// Parameters after defaults are filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub l_min: f64,
    pub l_max: f64,
    pub delete_tol: f64,
    pub grid: GridConfig,
    pub forcing: ForcingParams,
    pub step: StepParams,
}

impl RunConfig {
    /// Feature weights for the configured color space.
    pub fn weights(&self) -> Result<Vec<f64>> {
        let l = &self.lambda;
        let dims = self.color_space.dims();
        Ok(match (self.color_space, l.len()) {
            (_, 1) => vec![l[0]; dims],
            (ColorSpace::Cb, 2) => vec![l[0], l[0], l[0], l[1]],
            (ColorSpace::Rgb, 3) => l.clone(),
            (_, n) => {
                return Err(Error::Config(format!(
                    "lambda has {n} entries, color space {:?} expects 1 or {}",
                    self.color_space,
                    if self.color_space == ColorSpace::Cb { 2 } else { dims }
                )))
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.sigma > 0.0) {
            return bad("sigma must be positive");
        }
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if self.steps == 0 {
            return bad("steps must be at least 1");
        }
        if self.n_sub == 0 || self.n0 == 0 {
            return bad("n_sub and n0 must be at least 1");
        }
        if !(self.mu >= 0.0) || self.lambda.iter().any(|l| !(*l >= 0.0)) {
            return bad("weights must be non-negative");
        }
        if self.region_lambda.iter().any(|(_, l)| !(*l >= 0.0)) {
            return bad("region weights must be non-negative");
        }
        if self.restore_lambda.iter().any(|l| !(*l > 0.0)) {
            return bad("restoration weights must be positive");
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        self.weights()?;
        Ok(())
    }

    pub fn resolve(&self, mesh: &SurfaceMesh, net: &CurveNetwork) -> Result<Resolved> {
        self.validate()?;
        let segments: usize = net.curves.iter().map(|c| c.num_segments()).sum();
        let spacing = if segments > 0 { net.total_length() / segments as f64 } else { mesh.mean_edge_length() };
        let l_min = self.l_min.unwrap_or(0.5 * spacing);
        let l_max = self.l_max.unwrap_or(2.0 * spacing);
        if !(0.0 < l_min && l_min < l_max) {
            return Err(Error::Config(format!("need 0 < l_min < l_max, got {l_min} and {l_max}")));
        }
        let delta0 = self.delta0.unwrap_or(2.0 * mesh.max_mean_incident_edge());
        let a = self.grid_a.unwrap_or(0.99 * delta0 / 3f64.sqrt());
        let grid = GridConfig::new(a, delta0).map_err(|e| Error::Config(e.to_string()))?;
        let mut forcing = ForcingParams { mu: self.mu, weights: self.weights()?, region_scale: BTreeMap::new() };
        forcing.region_scale.extend(self.region_lambda.iter().copied());
        let solve = SolveOptions { method: self.solver, tol: self.tol, ..SolveOptions::default() };
        Ok(Resolved {
            l_min,
            l_max,
            delete_tol: self.delete_tol.unwrap_or(3.0 * l_min),
            grid,
            forcing,
            step: StepParams { sigma: self.sigma, tau: self.dt, solve, check_assumptions: self.check_invariants },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionUpdate {
    Incremental,
    Reinit,
}

/// Diagnostics of one step; energy and coefficients refer to the state at
/// the start of the step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub lengths: Vec<(CurveId, f64)>,
    pub energy: f64,
    pub coefficients: BTreeMap<RegionId, Vec<f64>>,
    pub max_dx: f64,
    pub residual: f64,
    pub region_update: RegionUpdate,
    pub events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventRecord {
    pub step: usize,
    pub substep: Option<usize>,
    pub kind: EventKind,
    pub curve_ids: Vec<CurveId>,
    pub position: [f64; 3],
}

/// Region lying outside a closed curve, judged by whether the conormals
/// point away from the node centroid.
pub fn surrounding_region(curve: &Curve, frames: &NodeFrames) -> RegionId {
    if outwardness(curve, frames) >= 0.0 {
        curve.region_plus
    } else {
        curve.region_minus
    }
}

/// Sum of `omega_m . (X - centroid)`: positive when the conormals point
/// away from the enclosed area.
pub fn outwardness(curve: &Curve, frames: &NodeFrames) -> f64 {
    let centroid: Vec3 = curve.nodes.iter().sum::<Vec3>() / curve.len() as f64;
    curve.nodes.iter().zip(&frames.omega_m).map(|(x, w)| w.dot(&(x - centroid))).sum()
}

pub struct Segmenter<'a> {
    mesh: &'a SurfaceMesh,
    image: &'a FaceImage,
    feats: FaceFeatures,
    cfg: RunConfig,
    res: Resolved,
    net: CurveNetwork,
    map: RegionMap,
    coeffs: Coefficients,
    background: RegionId,
    step: usize,
    time: f64,
    regions_stale: bool,
    last_move: f64,
    grid_ops: usize,
    records: Vec<StepRecord>,
    events: Vec<EventRecord>,
}

impl<'a> Segmenter<'a> {
    pub fn new(mesh: &'a SurfaceMesh, image: &'a FaceImage, net: CurveNetwork, cfg: RunConfig) -> Result<Self> {
        let res = cfg.resolve(mesh, &net)?;
        net.check_structure()?;
        let feats = FaceFeatures::new(mesh, image, cfg.color_space)?;
        let background = net.curves.first().map_or(1, |c| c.region_plus);
        let map = RegionMap::uniform(mesh.num_faces(), background, &feats);
        let coeffs = compute_coefficients(&map, &feats, cfg.weighting)?;
        let mut seg = Self {
            mesh,
            image,
            feats,
            cfg,
            res,
            net,
            map,
            coeffs,
            background,
            step: 0,
            time: 0.0,
            regions_stale: true,
            last_move: 0.0,
            grid_ops: 0,
            records: Vec::new(),
            events: Vec::new(),
        };
        seg.refresh_regions()?;
        Ok(seg)
    }

    pub fn network(&self) -> &CurveNetwork {
        &self.net
    }

    pub fn regions(&self) -> &RegionMap {
        &self.map
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coeffs
    }

    pub fn features(&self) -> &FaceFeatures {
        &self.feats
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn resolved(&self) -> &Resolved {
        &self.res
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Total hash-grid operations spent on collision detection.
    pub fn grid_ops(&self) -> usize {
        self.grid_ops
    }

    /// Current discrete energy (regions must be current).
    pub fn energy(&self) -> Result<f64> {
        Ok(evolution::compute_energy(
            self.mesh,
            &self.net,
            &self.map,
            &self.feats,
            &self.coeffs,
            self.cfg.sigma,
            &self.res.forcing,
        )?)
    }

    /// Brings the region map and coefficients up to date with the curves.
    pub fn refresh_regions(&mut self) -> Result<RegionUpdate> {
        let mut kind = RegionUpdate::Incremental;
        loop {
            if self.net.curves.is_empty() {
                if self.regions_stale {
                    self.map = RegionMap::uniform(self.mesh.num_faces(), self.background, &self.feats);
                    kind = RegionUpdate::Reinit;
                }
            } else {
                let frames = self.net.compute_frames(self.mesh)?;
                let limit = (self.res_n0() - 1) as f64 * self.mesh.min_circumradius();
                let mut reinit = self.regions_stale || self.last_move > limit;
                if !reinit {
                    match update_regions_incremental(
                        &mut self.map,
                        self.mesh,
                        &self.net,
                        &frames,
                        &self.feats,
                        self.cfg.n0,
                    ) {
                        Ok(_) => {}
                        Err(RegionError::Drift { face }) => {
                            log::debug!("band drift at face {face}; re-initializing regions");
                            reinit = true;
                        }
                        Err(e) => return Err(e.into()),
                    }
                }
                if reinit {
                    self.map = initialize_regions(self.mesh, &self.net, &frames, &self.feats, self.cfg.n0)?;
                    kind = RegionUpdate::Reinit;
                }
            }
            self.regions_stale = false;
            self.last_move = 0.0;
            self.map.prune(&self.net);
            let empty = self.net.regions().into_iter().find(|&k| self.map.count(k) == 0);
            let Some(k) = empty else { break };
            let victim = self
                .net
                .curves
                .iter()
                .filter(|c| c.closed && (c.region_plus == k || c.region_minus == k))
                .min_by(|a, b| a.total_length().total_cmp(&b.total_length()))
                .map(|c| c.id);
            let Some(id) = victim else {
                return Err(RegionError::EmptyRegion(k).into());
            };
            log::info!("region {k} is empty; deleting curve {id}");
            self.delete_curve(id, None)?;
        }
        self.coeffs = compute_coefficients(&self.map, &self.feats, self.cfg.weighting)?;
        Ok(kind)
    }

    fn res_n0(&self) -> u32 {
        self.cfg.n0.max(1)
    }

    fn record_event(&mut self, ev: &TopologyEvent, curve_ids: Vec<CurveId>, substep: Option<usize>) {
        log::info!("step {}: {:?} of curves {:?}", self.step, ev.kind, curve_ids);
        self.events.push(EventRecord {
            step: self.step,
            substep,
            kind: ev.kind,
            curve_ids,
            position: [ev.position.x, ev.position.y, ev.position.z],
        });
    }

    fn delete_curve(&mut self, id: CurveId, substep: Option<usize>) -> Result<()> {
        let Some(c) = self.net.curve(id) else { return Ok(()) };
        let frames = crate::curve::compute_frames(c, self.mesh)?;
        let outside = surrounding_region(c, &frames);
        let ev = TopologyEvent {
            kind: EventKind::Delete,
            a: topology::NodeRef { curve: id, node: 0 },
            b: None,
            position: c.nodes.iter().sum::<Vec3>() / c.len() as f64,
        };
        topology::execute(&ev, &mut self.net, self.mesh, self.res.grid.delta0)?;
        if self.net.curves.is_empty() {
            self.background = outside;
        }
        self.regions_stale = true;
        self.record_event(&ev, vec![id], substep);
        Ok(())
    }

    /// One curve step of size `tau`. Returns the largest node move and the
    /// coupled-system residual.
    fn evolve(&mut self, tau: f64) -> Result<(f64, f64)> {
        if self.net.curves.is_empty() {
            return Ok((0.0, 0.0));
        }
        let frames = self.net.compute_frames(self.mesh)?;
        if self.res.step.check_assumptions {
            let report = self.net.validate_assumptions(&frames);
            if !report.passed() {
                return Err(EvolutionError::Assumption(format!("{report:?}")).into());
            }
        }
        let sys = evolution::assemble(&self.net, &frames)?;
        let forcing = evolution::forcing_vector(&self.net, self.mesh, &self.feats, &self.coeffs, &self.res.forcing)?;
        let params = StepParams { tau, ..self.res.step };
        let out = evolution::step(&sys, &forcing, &params)?;
        let moved = evolution::advance(&mut self.net, self.mesh, &sys.dofs, &out.delta_x)?;
        self.last_move = self.last_move.max(moved);
        Ok((moved, out.residual))
    }

    fn run_deletions(&mut self, substep: Option<usize>) -> Result<usize> {
        let events = topology::detect_deletions(&self.net, self.res.delete_tol);
        for ev in &events {
            self.delete_curve(ev.a.curve, substep)?;
        }
        Ok(events.len())
    }

    fn detect(&mut self) -> Vec<TopologyEvent> {
        let (events, grid) = topology::detect(&self.net, &self.res.grid);
        self.grid_ops += grid.ops;
        events
    }

    fn orientation_of(&self, id: CurveId) -> Result<Option<f64>> {
        match self.net.curve(id) {
            Some(c) if c.closed => Ok(Some(outwardness(c, &crate::curve::compute_frames(c, self.mesh)?))),
            _ => Ok(None),
        }
    }

    /// Executes detected collisions one at a time, re-detecting after each.
    fn apply_collisions(&mut self, substep: Option<usize>) -> Result<usize> {
        let mut done = 0;
        while done < self.cfg.max_events_per_step {
            let events = self.detect();
            let mut executed = false;
            for ev in &events {
                let parent_sign = match ev.kind {
                    EventKind::Split => self.orientation_of(ev.a.curve)?,
                    _ => None,
                };
                match topology::execute(ev, &mut self.net, self.mesh, self.res.grid.delta0) {
                    Ok(out) => {
                        let mut ids = ev.curve_ids();
                        ids.extend(&out.created);
                        self.record_event(ev, ids, substep);
                        self.regions_stale = true;
                        executed = true;
                        if let Some(sign) = parent_sign {
                            // A loop cut from a neck whose sides already crossed comes out inverted.
                            for id in out.created {
                                let flipped = self.orientation_of(id)?.is_some_and(|s| s * sign < 0.0);
                                if flipped {
                                    log::warn!("step {}: split produced inverted loop {id}; deleting it", self.step);
                                    self.delete_curve(id, substep)?;
                                }
                            }
                        }
                        break;
                    }
                    Err(e) => log::warn!("step {}: skipping {:?}: {e}", self.step, ev.kind),
                }
            }
            if !executed {
                break;
            }
            done += 1;
        }
        Ok(done)
    }

    /// Runs one full step of the loop.
    pub fn step(&mut self) -> Result<StepRecord> {
        let step = self.step;
        self.step_inner().map_err(|e| e.at_step(step))
    }

    fn step_inner(&mut self) -> Result<StepRecord> {
        let region_update = self.refresh_regions()?;
        if self.cfg.check_invariants {
            self.check_invariants()?;
        }
        let energy = self.energy()?;
        let coefficients = self.coeffs.means.clone();
        let events_before = self.events.len();
        let tau = self.cfg.dt;

        let snapshot = (self.net.clone(), self.map.clone(), self.coeffs.clone());
        let (mut max_dx, mut residual) = self.evolve(tau)?;
        self.run_deletions(None)?;
        let collisions = if self.net.curves.is_empty() { Vec::new() } else { self.detect() };
        if !collisions.is_empty() {
            if self.cfg.n_sub <= 1 {
                self.apply_collisions(None)?;
            } else {
                let full = (self.net.clone(), self.last_move, self.regions_stale, self.events.len());
                (self.net, self.map, self.coeffs) = snapshot;
                self.last_move = 0.0;
                let sub_tau = tau / self.cfg.n_sub as f64;
                let mut fired = false;
                max_dx = 0.0;
                residual = 0.0;
                for s in 0..self.cfg.n_sub {
                    if s > 0 {
                        self.refresh_regions()?;
                    }
                    let (m, r) = self.evolve(sub_tau)?;
                    max_dx = max_dx.max(m);
                    residual = residual.max(r);
                    fired |= self.run_deletions(Some(s))? > 0;
                    fired |= self.apply_collisions(Some(s))? > 0;
                }
                if !fired {
                    log::warn!("step {}: collision did not recur in substeps; accepting the full step", self.step);
                    self.net = full.0;
                    self.last_move = full.1;
                    self.regions_stale = full.2;
                    self.events.truncate(full.3);
                }
            }
        }
        for c in &mut self.net.curves {
            refine_coarsen(c, self.mesh, self.res.l_min, self.res.l_max)?;
        }
        let record = StepRecord {
            step: self.step,
            time: self.time,
            lengths: self.net.curves.iter().map(|c| (c.id, c.total_length())).collect(),
            energy,
            coefficients,
            max_dx,
            residual,
            region_update,
            events: self.events.len() - events_before,
        };
        self.step += 1;
        self.time += tau;
        self.records.push(record.clone());
        Ok(record)
    }

    /// Checks the invariants of all modules on the current state.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(format!("invariant violated: {m}")));
        let d = self.net.max_surface_distance(self.mesh);
        if d > 1e-9 * self.mesh.diagonal() {
            return fail(format!("node {d} off the surface"));
        }
        self.net.check_structure()?;
        if !self.net.attachment_holds() {
            return fail("junction endpoints differ".into());
        }
        for c in &self.net.curves {
            c.check_assumption_a()?;
        }
        if self.map.total_count() != self.mesh.num_faces() as u64 {
            return fail(format!("partition covers {} of {} faces", self.map.total_count(), self.mesh.num_faces()));
        }
        let mut live = self.map.stats().clone();
        live.retain(|_, s| s.count > 0);
        if live != self.map.rescan(&self.feats) {
            return fail("incremental region statistics differ from a rescan".into());
        }
        Ok(())
    }

    /// Runs the remaining steps, calling `observe` after each.
    pub fn run(&mut self, mut observe: impl FnMut(&Self, &StepRecord) -> Result<()>) -> Result<()> {
        while self.step < self.cfg.steps {
            let rec = self.step()?;
            observe(self, &rec)?;
        }
        self.refresh_regions().map_err(|e| e.at_step(self.step))?;
        Ok(())
    }

    /// Piecewise-constant image from per-region means of the raw channels.
    pub fn piecewise_constant(&self) -> FaceImage {
        let ch = self.image.channels();
        let mut sums: BTreeMap<RegionId, (Vec<f64>, f64)> = BTreeMap::new();
        for (f, &k) in self.map.labels().iter().enumerate() {
            let e = sums.entry(k).or_insert_with(|| (vec![0.0; ch], 0.0));
            for (s, v) in e.0.iter_mut().zip(self.image.value(f)) {
                *s += v;
            }
            e.1 += 1.0;
        }
        let means: BTreeMap<RegionId, Vec<f64>> =
            sums.into_iter().map(|(k, (s, n))| (k, s.into_iter().map(|v| v / n).collect())).collect();
        restoration::piecewise_constant(&self.map, &means, ch)
    }

    /// Region labels as distinct colors.
    pub fn region_image(&self) -> FaceImage {
        const PALETTE: [[f64; 3]; 8] = [
            [0.90, 0.10, 0.10],
            [0.10, 0.60, 0.90],
            [0.20, 0.80, 0.20],
            [0.95, 0.75, 0.10],
            [0.60, 0.20, 0.80],
            [0.10, 0.80, 0.70],
            [0.95, 0.45, 0.70],
            [0.50, 0.50, 0.50],
        ];
        let mut img = FaceImage::constant(3, self.mesh.num_faces(), 0.0);
        for (f, &k) in self.map.labels().iter().enumerate() {
            img.set(f, &PALETTE[k as usize % PALETTE.len()]);
        }
        img
    }
}

/// Output files of a segmentation run.
pub struct OutputDir {
    dir: PathBuf,
    log: BufWriter<File>,
    events: BufWriter<File>,
    events_written: usize,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let mut log = BufWriter::new(File::create(dir.join("log.csv"))?);
        writeln!(
            log,
            "step,time,num_curves,total_length,lengths,energy,coefficients,max_dx,residual,region_update,events"
        )?;
        let events = BufWriter::new(File::create(dir.join("events.jsonl"))?);
        Ok(Self { dir: dir.to_path_buf(), log, events, events_written: 0 })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn log_step(&mut self, rec: &StepRecord, events: &[EventRecord]) -> Result<()> {
        let lengths: Vec<String> = rec.lengths.iter().map(|(id, l)| format!("{id}:{l}")).collect();
        let coeffs: Vec<String> = rec
            .coefficients
            .iter()
            .map(|(k, v)| format!("{k}:{}", v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("/")))
            .collect();
        writeln!(
            self.log,
            "{},{},{},{},{},{},{},{},{},{},{}",
            rec.step,
            rec.time,
            rec.lengths.len(),
            rec.lengths.iter().map(|l| l.1).sum::<f64>(),
            lengths.join(";"),
            rec.energy,
            coeffs.join(";"),
            rec.max_dx,
            rec.residual,
            serde_json::to_value(rec.region_update)?.as_str().unwrap_or_default(),
            rec.events
        )?;
        for ev in &events[self.events_written..] {
            serde_json::to_writer(&mut self.events, ev)?;
            writeln!(self.events)?;
        }
        self.events_written = events.len();
        self.log.flush()?;
        self.events.flush()?;
        Ok(())
    }

    pub fn write_snapshot(&self, seg: &Segmenter, mesh: &SurfaceMesh, step: usize) -> Result<()> {
        fs::write(self.dir.join(format!("curves_{step}.json")), seg.network().to_json())?;
        save_mesh(&self.dir.join(format!("piecewise_const_{step}.ply")), None, mesh, Some(&seg.piecewise_constant()))?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SegmentationResult {
    pub network: CurveNetwork,
    pub regions: RegionMap,
    pub coefficients: Coefficients,
    pub records: Vec<StepRecord>,
    pub events: Vec<EventRecord>,
    pub grid_ops: usize,
}

/// Full run: segmentation, optional restoration and all output files.
pub fn run_segmentation(
    mesh: &SurfaceMesh,
    image: &FaceImage,
    net: CurveNetwork,
    cfg: &RunConfig,
    out: Option<&Path>,
) -> Result<SegmentationResult> {
    let mut seg = Segmenter::new(mesh, image, net, cfg.clone())?;
    let mut dir = out.map(OutputDir::create).transpose()?;
    if let Some(d) = &dir {
        d.write_snapshot(&seg, mesh, 0)?;
    }
    seg.run(|s, rec| {
        if let Some(d) = dir.as_mut() {
            d.log_step(rec, s.events())?;
            let n = s.step_index();
            if cfg.output_every > 0 && n % cfg.output_every == 0 && n < cfg.steps {
                d.write_snapshot(s, mesh, n)?;
            }
        }
        Ok(())
    })?;
    if let Some(d) = &dir {
        d.write_snapshot(&seg, mesh, seg.step_index())?;
        save_mesh(&d.path().join("regions_final.ply"), None, mesh, Some(&seg.region_image()))?;
        let opts = SolveOptions { method: cfg.solver, tol: cfg.tol, ..SolveOptions::default() };
        for &lambda in &cfg.restore_lambda {
            let img = restoration::restore(mesh, image, seg.regions(), lambda, &opts)?;
            save_mesh(&d.path().join(format!("denoised_{lambda}.ply")), None, mesh, Some(&img))?;
        }
    }
    Ok(SegmentationResult {
        network: seg.network().clone(),
        regions: seg.regions().clone(),
        coefficients: seg.coefficients().clone(),
        records: seg.records().to_vec(),
        events: seg.events().to_vec(),
        grid_ops: seg.grid_ops(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MeshOptions;
    use crate::synth;

    #[test]
    fn config_parses_scalar_or_list_lambda() {
        let a: RunConfig = serde_json::from_str(r#"{"lambda": 50, "sigma": 2}"#).unwrap();
        assert_eq!(a.lambda, vec![50.0]);
        let b: RunConfig = serde_json::from_str(r#"{"lambda": [1, 2], "color_space": "cb"}"#).unwrap();
        assert_eq!(b.weights().unwrap(), vec![1.0, 1.0, 1.0, 2.0]);
        assert!(serde_json::from_str::<RunConfig>(r#"{"lamda": 1}"#).is_err());
    }

    #[test]
    fn invalid_config_rejected() {
        let mut c = RunConfig { sigma: 0.0, ..RunConfig::default() };
        assert!(c.validate().is_err());
        c.sigma = 1.0;
        c.lambda = vec![1.0, 2.0];
        assert!(c.validate().is_err());
    }

    #[test]
    fn shrinking_circle_on_constant_image_is_deleted() {
        let mesh = synth::icosphere(3, 1.0).build(MeshOptions::default()).unwrap();
        let image = FaceImage::constant(1, mesh.num_faces(), 0.5);
        let pts = synth::sphere_circle(&Vec3::z(), 1.0, 0.5, 48);
        let mut net = CurveNetwork::new();
        net.add_curve(CurveNetwork::snapped_curve(&mesh, &pts, true, 2, 1).unwrap());
        let cfg = RunConfig { lambda: vec![0.0], dt: 0.01, steps: 30, check_invariants: true, ..RunConfig::default() };
        let res = run_segmentation(&mesh, &image, net, &cfg, None).unwrap();
        assert!(res.network.curves.is_empty());
        assert!(res.events.iter().any(|e| e.kind == EventKind::Delete));
        let e = &res.records;
        assert!(e.windows(2).all(|w| w[1].energy <= w[0].energy + 1e-8));
    }

    #[test]
    fn outputs_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = synth::icosphere(2, 1.0).build(MeshOptions::default()).unwrap();
        let image = synth::paint_hemispheres(&mesh, &[0.2], &[0.8]).unwrap();
        let pts = synth::sphere_circle(&Vec3::z(), 1.0, 1.2, 48);
        let mut net = CurveNetwork::new();
        net.add_curve(CurveNetwork::snapped_curve(&mesh, &pts, true, 2, 1).unwrap());
        let cfg = RunConfig { steps: 3, restore_lambda: vec![10.0], ..RunConfig::default() };
        run_segmentation(&mesh, &image, net, &cfg, Some(dir.path())).unwrap();
        for f in [
            "log.csv",
            "events.jsonl",
            "curves_0.json",
            "curves_3.json",
            "piecewise_const_3.ply",
            "regions_final.ply",
            "denoised_10.ply",
        ] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let log = fs::read_to_string(dir.path().join("log.csv")).unwrap();
        assert_eq!(log.lines().count(), 4);
    }
}
