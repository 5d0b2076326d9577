//! Topology changes of the curve network.
//!
//! Collisions are found with a uniform hash grid: every node marks its
//! cell, and a node landing in a cell already marked by a non-neighbor node
//! is a collision candidate. Candidates are refined to the closest node pair
//! nearby and classified as a split, a merge, or the creation of a new curve
//! with two triple junctions.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::curve::{Curve, CurveError, CurveId, CurveNetwork, End, JunctionEnd, RegionId, TripleJunction};
use crate::mesh::{MeshError, SurfaceMesh};
use crate::Vec3;

/// Nodes searched on each side when refining a collision.
pub const REFINE_RADIUS: usize = 5;
/// Index distance up to which nodes count as neighbors.
pub const NEIGHBOR_EXCLUSION: usize = 2;
/// Same-curve pairs joined by an arc shorter than this multiple of `delta0`
/// are never collisions.
pub const ARC_EXCLUSION: f64 = 2.0;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("grid cell {a} violates a*sqrt(3) < delta0 = {delta0}")]
    GridConfig { a: f64, delta0: f64 },
    #[error("event is stale: {0}")]
    Stale(String),
    #[error("cannot execute {kind:?}: {msg}")]
    Unsupported { kind: EventKind, msg: String },
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub a: f64,
    pub delta0: f64,
    /// Also test the first occupants of the 26 adjacent cells, accepting
    /// pairs closer than `a`. Catches close pairs split by a cell face.
    pub probe_neighbors: bool,
}

impl GridConfig {
    pub fn new(a: f64, delta0: f64) -> Result<Self, TopologyError> {
        if !(a > 0.0 && a * 3f64.sqrt() < delta0) {
            return Err(TopologyError::GridConfig { a, delta0 });
        }
        Ok(Self { a, delta0, probe_neighbors: true })
    }

    /// Same-cell collisions only.
    pub fn same_cell_only(mut self) -> Self {
        self.probe_neighbors = false;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum EventKind {
    Delete,
    Split,
    Merge,
    CreateTripleJunctions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NodeRef {
    pub curve: CurveId,
    pub node: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopologyEvent {
    pub kind: EventKind,
    pub a: NodeRef,
    pub b: Option<NodeRef>,
    pub position: Vec3,
}

impl TopologyEvent {
    pub fn curve_ids(&self) -> Vec<CurveId> {
        let mut v = vec![self.a.curve];
        if let Some(b) = self.b {
            if b.curve != self.a.curve {
                v.push(b.curve);
            }
        }
        v
    }
}

const NEIGHBOR_OFFSETS: [[i64; 3]; 26] = {
    let mut out = [[0i64; 3]; 26];
    let mut n = 0;
    let mut k = 0;
    while k < 27 {
        let d = [k / 9 - 1, (k / 3) % 3 - 1, k % 3 - 1];
        if !(d[0] == 0 && d[1] == 0 && d[2] == 0) {
            out[n] = d;
            n += 1;
        }
        k += 1;
    }
    out
};

/// Hash grid over node positions keeping the first occupant of each cell.
#[derive(Debug, Clone)]
pub struct BackgroundGrid {
    a: f64,
    cells: HashMap<[i64; 3], (usize, usize)>,
    /// Cell lookups and insertions of the last build.
    pub ops: usize,
}

impl BackgroundGrid {
    pub fn new(a: f64) -> Self {
        Self { a, cells: HashMap::new(), ops: 0 }
    }

    pub fn cell_of(&self, p: &Vec3) -> [i64; 3] {
        [(p.x / self.a).floor() as i64, (p.y / self.a).floor() as i64, (p.z / self.a).floor() as i64]
    }

    pub fn occupied(&self) -> usize {
        self.cells.len()
    }
}

/// Length of the shorter arc of `c` between nodes `i` and `j`, if it is no
/// longer than `reach`.
fn short_arc(c: &Curve, i: usize, j: usize, reach: f64) -> Option<f64> {
    let walk = |step: &dyn Fn(usize) -> Option<usize>| {
        let (mut k, mut len) = (i, 0.0);
        while k != j {
            let n = step(k)?;
            len += (c.nodes[n] - c.nodes[k]).norm();
            if len > reach {
                return None;
            }
            k = n;
        }
        Some(len)
    };
    match (walk(&|k| c.next(k)), walk(&|k| c.prev(k))) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

/// True if two nodes are too close along the network to count as a
/// collision: within [`NEIGHBOR_EXCLUSION`] indices, or joined by an arc no
/// longer than `reach` that does not fold back (chord at least half the
/// arc). The second rule matters when the node spacing is small against the
/// detection distance.
pub fn are_neighbors(net: &CurveNetwork, ci: usize, i: usize, cj: usize, j: usize, reach: f64) -> bool {
    let (a, b) = (&net.curves[ci], &net.curves[cj]);
    if ci == cj {
        if a.index_distance(i, j) <= NEIGHBOR_EXCLUSION {
            return true;
        }
        if let Some(arc) = short_arc(a, i, j, reach) {
            if 2.0 * (a.nodes[i] - a.nodes[j]).norm() >= arc {
                return true;
            }
        }
    }
    // Through a shared junction.
    if a.closed || b.closed {
        return false;
    }
    for ea in [End::Start, End::End] {
        let da = a.index_distance(i, a.end_index(ea));
        let arc_a = short_arc(a, i, a.end_index(ea), reach);
        if da > NEIGHBOR_EXCLUSION && arc_a.is_none() {
            continue;
        }
        let Some((ka, _)) = net.junction_at(a.id, ea) else { continue };
        for eb in [End::Start, End::End] {
            if ci == cj && ea == eb {
                continue;
            }
            if net.junction_at(b.id, eb).map(|x| x.0) != Some(ka) {
                continue;
            }
            if da + b.index_distance(j, b.end_index(eb)) <= NEIGHBOR_EXCLUSION {
                return true;
            }
            let arc_b = short_arc(b, j, b.end_index(eb), reach);
            if let (Some(x), Some(y)) = (arc_a, arc_b) {
                if x + y <= reach {
                    return true;
                }
            }
        }
    }
    false
}

fn refine_pair(net: &CurveNetwork, ci: usize, i: usize, cj: usize, j: usize, reach: f64) -> (usize, usize, f64) {
    let (a, b) = (&net.curves[ci], &net.curves[cj]);
    let r = REFINE_RADIUS as isize;
    let wrap = |c: &Curve, k: isize| -> Option<usize> {
        let n = c.len() as isize;
        if c.closed {
            Some(k.rem_euclid(n) as usize)
        } else if (0..n).contains(&k) {
            Some(k as usize)
        } else {
            None
        }
    };
    let mut best = (i, j, (a.nodes[i] - b.nodes[j]).norm());
    for di in -r..=r {
        let Some(p) = wrap(a, i as isize + di) else { continue };
        for dj in -r..=r {
            let Some(q) = wrap(b, j as isize + dj) else { continue };
            if are_neighbors(net, ci, p, cj, q, reach) {
                continue;
            }
            let d = (a.nodes[p] - b.nodes[q]).norm();
            if d < best.2 {
                best = (p, q, d);
            }
        }
    }
    best
}

fn classify(net: &CurveNetwork, ci: usize, cj: usize) -> EventKind {
    if ci == cj {
        return EventKind::Split;
    }
    let (a, b) = (&net.curves[ci], &net.curves[cj]);
    let matched = a.region_plus == b.region_plus && a.region_minus == b.region_minus;
    let swapped = a.region_plus == b.region_minus && a.region_minus == b.region_plus;
    if matched || swapped {
        EventKind::Merge
    } else {
        EventKind::CreateTripleJunctions
    }
}

/// Closed curves shorter than `tol`.
pub fn detect_deletions(net: &CurveNetwork, tol: f64) -> Vec<TopologyEvent> {
    net.curves
        .iter()
        .filter(|c| c.closed && c.total_length() < tol)
        .map(|c| TopologyEvent {
            kind: EventKind::Delete,
            a: NodeRef { curve: c.id, node: 0 },
            b: None,
            position: c.nodes.iter().sum::<Vec3>() / c.len() as f64,
        })
        .collect()
}

/// Collision events of the current network, at most one per curve pair and
/// collision site. Also returns the grid used.
pub fn detect(net: &CurveNetwork, cfg: &GridConfig) -> (Vec<TopologyEvent>, BackgroundGrid) {
    let mut grid = BackgroundGrid::new(cfg.a);
    let reach = ARC_EXCLUSION * cfg.delta0;
    let mut events: Vec<TopologyEvent> = Vec::new();
    let mut sites: Vec<(usize, usize, usize, usize)> = Vec::new();
    for (ci, c) in net.curves.iter().enumerate() {
        for (i, p) in c.nodes.iter().enumerate() {
            let key = grid.cell_of(p);
            grid.ops += 1;
            let own = grid.cells.get(&key).copied();
            if own.is_none() {
                grid.cells.insert(key, (ci, i));
            }
            let mut hit = own.filter(|&(cj, j)| !are_neighbors(net, ci, i, cj, j, reach));
            if hit.is_none() && cfg.probe_neighbors {
                let mut best = cfg.a;
                for d in NEIGHBOR_OFFSETS {
                    grid.ops += 1;
                    let k = [key[0] + d[0], key[1] + d[1], key[2] + d[2]];
                    let Some(&(cj, j)) = grid.cells.get(&k) else { continue };
                    let dist = (net.curves[cj].nodes[j] - p).norm();
                    if dist < best && !are_neighbors(net, ci, i, cj, j, reach) {
                        best = dist;
                        hit = Some((cj, j));
                    }
                }
            }
            let Some((cj, j)) = hit else { continue };
            let (p1, p2, _) = refine_pair(net, cj, j, ci, i, reach);
            let dup = sites.iter().any(|&(sa, sp, sb, sq)| {
                let near = |c: usize, x: usize, y: usize| net.curves[c].index_distance(x, y) <= 2 * REFINE_RADIUS;
                (sa == cj && sb == ci && near(cj, sp, p1) && near(ci, sq, p2))
                    || (sa == ci && sb == cj && near(ci, sp, p2) && near(cj, sq, p1))
            });
            if dup {
                continue;
            }
            sites.push((cj, p1, ci, p2));
            let (a, b) = (&net.curves[cj], &net.curves[ci]);
            events.push(TopologyEvent {
                kind: classify(net, cj, ci),
                a: NodeRef { curve: a.id, node: p1 },
                b: Some(NodeRef { curve: b.id, node: p2 }),
                position: (a.nodes[p1] + b.nodes[p2]) * 0.5,
            });
        }
    }
    (events, grid)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExecOutcome {
    pub removed: Vec<CurveId>,
    pub created: Vec<CurveId>,
    /// Pieces that fell below the minimum node count and were dropped.
    pub dropped: Vec<CurveId>,
}

/// Inclusive cyclic or linear range of node indices.
fn take(c: &Curve, from: usize, to: usize) -> (Vec<Vec3>, Vec<usize>) {
    let n = c.len();
    let mut nodes = Vec::new();
    let mut faces = Vec::new();
    let mut k = from;
    loop {
        nodes.push(c.nodes[k]);
        faces.push(c.faces[k]);
        if k == to {
            break;
        }
        k = (k + 1) % n;
    }
    (nodes, faces)
}

fn new_curve(nodes: Vec<Vec3>, faces: Vec<usize>, closed: bool, plus: RegionId, minus: RegionId) -> Curve {
    Curve { id: 0, nodes, faces, closed, region_plus: plus, region_minus: minus }
}

fn check_node(net: &CurveNetwork, r: &NodeRef) -> Result<usize, TopologyError> {
    let ci =
        net.index_of(r.curve).ok_or_else(|| TopologyError::Stale(format!("curve {} no longer exists", r.curve)))?;
    if r.node >= net.curves[ci].len() {
        return Err(TopologyError::Stale(format!("node {} of curve {}", r.node, r.curve)));
    }
    Ok(ci)
}

/// Rewires junction references from an old curve end to a new one.
fn retarget(net: &mut CurveNetwork, old: CurveId, end: End, new: JunctionEnd) {
    for j in &mut net.junctions {
        for e in &mut j.ends {
            if e.curve == old && e.end == end {
                *e = new;
            }
        }
    }
}

/// Reversal of a curve that also returns where node `l` moved.
fn reverse_tracking(c: &mut Curve, l: usize) -> usize {
    let n = c.len();
    c.reverse();
    if c.closed {
        (n - l) % n
    } else {
        n - 1 - l
    }
}

fn open_interior_ok(c: &Curve, l: usize) -> bool {
    c.closed || (l >= 2 && l + 2 < c.len())
}

/// Applies one event to the network. New nodes are projected onto the mesh.
/// Nodes within `contact` of the other side of a collision are removed:
/// junction creation moves them into the new connector, and closed-curve
/// splits and merges bridge the gap they leave.
pub fn execute(
    event: &TopologyEvent,
    net: &mut CurveNetwork,
    mesh: &SurfaceMesh,
    contact: f64,
) -> Result<ExecOutcome, TopologyError> {
    match event.kind {
        EventKind::Delete => {
            let ci = check_node(net, &event.a)?;
            if !net.curves[ci].closed {
                return Err(TopologyError::Unsupported {
                    kind: event.kind,
                    msg: "only closed curves are deleted".into(),
                });
            }
            let id = net.curves.remove(ci).id;
            Ok(ExecOutcome { removed: vec![id], ..Default::default() })
        }
        EventKind::Split => execute_split(event, net, mesh, contact),
        EventKind::Merge => execute_merge(event, net, mesh, contact),
        EventKind::CreateTripleJunctions => execute_junctions(event, net, mesh, contact),
    }
}

fn push_piece(net: &mut CurveNetwork, out: &mut ExecOutcome, c: Curve) -> Option<CurveId> {
    if c.len() < Curve::min_nodes(c.closed) {
        let id = net.fresh_id();
        out.dropped.push(id);
        log::warn!("surgery piece with {} nodes dropped", c.len());
        return None;
    }
    let id = net.add_curve(c);
    out.created.push(id);
    Some(id)
}

fn execute_split(
    event: &TopologyEvent,
    net: &mut CurveNetwork,
    mesh: &SurfaceMesh,
    contact: f64,
) -> Result<ExecOutcome, TopologyError> {
    let b = event.b.ok_or_else(|| TopologyError::Stale("split needs two nodes".into()))?;
    let ci = check_node(net, &event.a)?;
    check_node(net, &b)?;
    let c = net.curves[ci].clone();
    let (l, l1) = (event.a.node.min(b.node), event.a.node.max(b.node));
    if c.index_distance(l, l1) <= NEIGHBOR_EXCLUSION {
        return Err(TopologyError::Stale("split nodes are neighbors".into()));
    }
    let mut out = ExecOutcome::default();
    if c.closed {
        // Drop the nodes around each contact node that still touch the far
        // side, so the two halves of a narrow neck do not collide again.
        let n = c.len();
        let reach = 2.0 * contact;
        let touching = |own: usize, far: usize| {
            let (c, net) = (&c, &*net);
            move |k: usize| {
                (0..n).any(|m| {
                    c.index_distance(m, far) < c.index_distance(m, own)
                        && (c.nodes[k] - c.nodes[m]).norm() < contact
                        && !are_neighbors(net, ci, k, ci, m, reach)
                })
            }
        };
        let mut z = zone_where(&c, l, touching(l, l1));
        let mut z1 = zone_where(&c, l1, touching(l1, l));
        let d = l1 - l;
        if d < z.1 + z1.0 + 4 || n - d < z1.1 + z.0 + 4 {
            (z, z1) = ((0, 0), (0, 0));
        }
        // A plain re-link at the contact when nothing else touches.
        let h = (z != (0, 0) || z1 != (0, 0)).then(|| c.mean_spacing());
        let (n1, f1) = closed_run(mesh, &c, (l + z.1 + 1) % n, (l1 + n - z1.0 - 1) % n, h)?;
        let (n2, f2) = closed_run(mesh, &c, (l1 + z1.1 + 1) % n, (l + n - z.0 - 1) % n, h)?;
        net.curves.remove(ci);
        out.removed.push(c.id);
        push_piece(net, &mut out, new_curve(n1, f1, true, c.region_plus, c.region_minus));
        push_piece(net, &mut out, new_curve(n2, f2, true, c.region_plus, c.region_minus));
    } else {
        if !open_interior_ok(&c, l) || !open_interior_ok(&c, l1) {
            return Err(TopologyError::Unsupported { kind: EventKind::Split, msg: "contact at an open end".into() });
        }
        let mut nodes: Vec<Vec3> = c.nodes[..l].to_vec();
        let mut faces: Vec<usize> = c.faces[..l].to_vec();
        nodes.extend_from_slice(&c.nodes[l1 + 1..]);
        faces.extend_from_slice(&c.faces[l1 + 1..]);
        let loop_nodes = c.nodes[l + 1..l1].to_vec();
        let loop_faces = c.faces[l + 1..l1].to_vec();
        net.curves.remove(ci);
        out.removed.push(c.id);
        let open = new_curve(nodes, faces, false, c.region_plus, c.region_minus);
        let id = push_piece(net, &mut out, open).ok_or_else(|| TopologyError::Unsupported {
            kind: EventKind::Split,
            msg: "open remainder too short".into(),
        })?;
        retarget(net, c.id, End::Start, JunctionEnd { curve: id, end: End::Start });
        retarget(net, c.id, End::End, JunctionEnd { curve: id, end: End::End });
        push_piece(net, &mut out, new_curve(loop_nodes, loop_faces, true, c.region_plus, c.region_minus));
    }
    Ok(out)
}

/// Pieces of a curve around contact node `l`: `(pre, post)` for open
/// curves, and the single forward run from `l+1` to `l-1` for closed ones.
enum Pieces {
    Closed(Vec<Vec3>, Vec<usize>),
    Open { pre: (Vec<Vec3>, Vec<usize>), post: (Vec<Vec3>, Vec<usize>) },
}

/// What is left of `c` after dropping the nodes `l - lo ..= l + hi`.
fn pieces(c: &Curve, l: usize, (lo, hi): (usize, usize)) -> Pieces {
    let n = c.len();
    if c.closed {
        let (nodes, faces) = take(c, (l + hi + 1) % n, (l + n - lo - 1) % n);
        Pieces::Closed(nodes, faces)
    } else {
        Pieces::Open {
            pre: (c.nodes[..l - lo].to_vec(), c.faces[..l - lo].to_vec()),
            post: (c.nodes[l + hi + 1..].to_vec(), c.faces[l + hi + 1..].to_vec()),
        }
    }
}

/// Junction shared by open curves `a` and `b` that both contact zones run
/// into, with `true` when it sits on the high side (end of `a`, start of `b`).
fn zip_side(
    net: &CurveNetwork,
    a: &Curve,
    la: usize,
    za: (usize, usize),
    b: &Curve,
    lb: usize,
    zb: (usize, usize),
) -> Option<(usize, bool)> {
    if a.closed || b.closed {
        return None;
    }
    let a_high = la + za.1 + 3 >= a.len();
    let a_low = la < za.0 + 3;
    let b_high = lb < zb.0 + 3;
    let b_low = lb + zb.1 + 3 >= b.len();
    let shared = |ea: End, eb: End| match (net.junction_at(a.id, ea), net.junction_at(b.id, eb)) {
        (Some((k, _)), Some((kb, _))) if k == kb => Some(k),
        _ => None,
    };
    if a_high && b_high {
        if let Some(k) = shared(End::End, End::Start) {
            return Some((k, true));
        }
    }
    if a_low && b_low {
        if let Some(k) = shared(End::Start, End::End) {
            return Some((k, false));
        }
    }
    None
}

/// Run of nodes around `l` lying within `radius` of `other`, as counts
/// below and above `l`.
fn contact_zone(c: &Curve, l: usize, other: &Curve, radius: f64) -> (usize, usize) {
    zone_where(c, l, |k| other.nodes.iter().any(|q| (c.nodes[k] - q).norm() < radius))
}

/// Run of nodes around `l` satisfying `near`, as counts below and above
/// `l`. The run stops early enough that at least three nodes of a closed
/// curve, or two nodes at each open end, remain.
fn zone_where(c: &Curve, l: usize, near: impl Fn(usize) -> bool) -> (usize, usize) {
    let n = c.len();
    let (mut lo, mut hi) = (0, 0);
    if c.closed {
        while lo + hi + 4 <= n {
            let grow_lo = near((l + n - lo - 1) % n);
            if grow_lo {
                lo += 1;
            }
            if lo + hi + 4 > n {
                break;
            }
            let grow_hi = near((l + hi + 1) % n);
            if grow_hi {
                hi += 1;
            }
            if !grow_lo && !grow_hi {
                break;
            }
        }
    } else {
        while l >= lo + 3 && near(l - lo - 1) {
            lo += 1;
        }
        while l + hi + 3 < n && near(l + hi + 1) {
            hi += 1;
        }
    }
    (lo, hi)
}

/// Projected interior nodes of the straight link `from -> to`, spaced about `h`.
fn bridge(
    mesh: &SurfaceMesh,
    from: (Vec3, usize),
    to: (Vec3, usize),
    h: f64,
) -> Result<(Vec<Vec3>, Vec<usize>), TopologyError> {
    let segments = ((to.0 - from.0).norm() / h).round().max(1.0) as usize;
    let mut out = (Vec::new(), Vec::new());
    for s in 1..segments {
        let loc = mesh.project_to_surface(&(from.0 + (to.0 - from.0) * (s as f64 / segments as f64)), Some(from.1))?;
        out.0.push(loc.point);
        out.1.push(loc.face);
    }
    Ok(out)
}

/// Closed curve through the nodes `from ..= to` of `c` (cyclic), closed
/// by a bridge back to the start when `h` is given.
fn closed_run(
    mesh: &SurfaceMesh,
    c: &Curve,
    from: usize,
    to: usize,
    h: Option<f64>,
) -> Result<(Vec<Vec3>, Vec<usize>), TopologyError> {
    let (mut n, mut f) = take(c, from, to);
    let Some(h) = h else { return Ok((n, f)) };
    let (bn, bf) = bridge(mesh, (c.nodes[to], c.faces[to]), (c.nodes[from], c.faces[from]), h)?;
    n.extend(bn);
    f.extend(bf);
    Ok((n, f))
}

fn between_all(c: &Curve, l: usize) -> (Vec<Vec3>, Vec<usize>) {
    // Every node except `l`, starting after it.
    let n = c.len();
    take(c, (l + 1) % n, (l + n - 1) % n)
}

fn execute_merge(
    event: &TopologyEvent,
    net: &mut CurveNetwork,
    mesh: &SurfaceMesh,
    contact: f64,
) -> Result<ExecOutcome, TopologyError> {
    let bref = event.b.ok_or_else(|| TopologyError::Stale("merge needs two nodes".into()))?;
    let ia = check_node(net, &event.a)?;
    let ib = check_node(net, &bref)?;
    let a = net.curves[ia].clone();
    let mut b = net.curves[ib].clone();
    let (la, mut lb) = (event.a.node, bref.node);
    if a.region_plus != b.region_plus {
        lb = reverse_tracking(&mut b, lb);
        // Junction ends of the reversed curve swap roles.
        for j in &mut net.junctions {
            for e in &mut j.ends {
                if e.curve == b.id {
                    e.end = e.end.flip();
                }
            }
        }
    }
    if !open_interior_ok(&a, la) || !open_interior_ok(&b, lb) {
        return Err(TopologyError::Unsupported { kind: EventKind::Merge, msg: "contact at an open end".into() });
    }
    let mut out = ExecOutcome::default();
    for id in [a.id, b.id] {
        net.remove_curve(id);
        out.removed.push(id);
    }
    let (plus, minus) = (a.region_plus, a.region_minus);
    match (a.closed, b.closed) {
        (true, true) => {
            // Both contact zones go, bridged across the gap they leave.
            let (na, nb) = (a.len(), b.len());
            let za = contact_zone(&a, la, &b, contact);
            let zb = contact_zone(&b, lb, &a, contact);
            let (a0, a1) = ((la + za.1 + 1) % na, (la + na - za.0 - 1) % na);
            let (b0, b1) = ((lb + zb.1 + 1) % nb, (lb + nb - zb.0 - 1) % nb);
            // A plain re-link when the zones are empty.
            let h =
                if za == (0, 0) && zb == (0, 0) { f64::INFINITY } else { 0.5 * (a.mean_spacing() + b.mean_spacing()) };
            let (mut n, mut f) = take(&a, a0, a1);
            for part in [
                bridge(mesh, (a.nodes[a1], a.faces[a1]), (b.nodes[b0], b.faces[b0]), h)?,
                take(&b, b0, b1),
                bridge(mesh, (b.nodes[b1], b.faces[b1]), (a.nodes[a0], a.faces[a0]), h)?,
            ] {
                n.extend(part.0);
                f.extend(part.1);
            }
            push_piece(net, &mut out, new_curve(n, f, true, plus, minus));
        }
        (false, false) => {
            // A_pre + B_post and B_pre + A_post.
            let mut n1 = a.nodes[..la].to_vec();
            let mut f1 = a.faces[..la].to_vec();
            n1.extend_from_slice(&b.nodes[lb + 1..]);
            f1.extend_from_slice(&b.faces[lb + 1..]);
            let mut n2 = b.nodes[..lb].to_vec();
            let mut f2 = b.faces[..lb].to_vec();
            n2.extend_from_slice(&a.nodes[la + 1..]);
            f2.extend_from_slice(&a.faces[la + 1..]);
            let id1 = net.add_curve(new_curve(n1, f1, false, plus, minus));
            let id2 = net.add_curve(new_curve(n2, f2, false, plus, minus));
            out.created.extend([id1, id2]);
            retarget(net, a.id, End::Start, JunctionEnd { curve: id1, end: End::Start });
            retarget(net, b.id, End::End, JunctionEnd { curve: id1, end: End::End });
            retarget(net, b.id, End::Start, JunctionEnd { curve: id2, end: End::Start });
            retarget(net, a.id, End::End, JunctionEnd { curve: id2, end: End::End });
        }
        (open_a, _) => {
            // One open and one closed curve: splice the loop into the open one.
            let (open, lo, closed, lc) = if !open_a { (&a, la, &b, lb) } else { (&b, lb, &a, la) };
            let mut n = open.nodes[..lo].to_vec();
            let mut f = open.faces[..lo].to_vec();
            let (nl, fl) = between_all(closed, lc);
            n.extend(nl);
            f.extend(fl);
            n.extend_from_slice(&open.nodes[lo + 1..]);
            f.extend_from_slice(&open.faces[lo + 1..]);
            let id = net.add_curve(new_curve(n, f, false, plus, minus));
            out.created.push(id);
            retarget(net, open.id, End::Start, JunctionEnd { curve: id, end: End::Start });
            retarget(net, open.id, End::End, JunctionEnd { curve: id, end: End::End });
        }
    }
    Ok(out)
}

fn execute_junctions(
    event: &TopologyEvent,
    net: &mut CurveNetwork,
    mesh: &SurfaceMesh,
    contact: f64,
) -> Result<ExecOutcome, TopologyError> {
    let kind = EventKind::CreateTripleJunctions;
    let bref = event.b.ok_or_else(|| TopologyError::Stale("junction creation needs two nodes".into()))?;
    let ia = check_node(net, &event.a)?;
    let ib = check_node(net, &bref)?;
    let mut a = net.curves[ia].clone();
    let mut b = net.curves[ib].clone();
    let ra = [a.region_plus, a.region_minus];
    let shared: Vec<RegionId> = ra.iter().copied().filter(|k| *k == b.region_plus || *k == b.region_minus).collect();
    if shared.len() != 1 {
        return Err(TopologyError::Unsupported { kind, msg: format!("curves share {} regions", shared.len()) });
    }
    let r = shared[0];
    let (mut la, mut lb) = (event.a.node, bref.node);
    let mut flipped: Vec<CurveId> = Vec::new();
    if a.region_plus != r {
        la = reverse_tracking(&mut a, la);
        flipped.push(a.id);
    }
    if b.region_plus != r {
        lb = reverse_tracking(&mut b, lb);
        flipped.push(b.id);
    }
    if !open_interior_ok(&a, la) || !open_interior_ok(&b, lb) {
        return Err(TopologyError::Unsupported { kind, msg: "contact at an open end".into() });
    }
    for j in &mut net.junctions {
        for e in &mut j.ends {
            if flipped.contains(&e.curve) {
                e.end = e.end.flip();
            }
        }
    }
    let (na, nb) = (a.len(), b.len());
    let za = contact_zone(&a, la, &b, contact);
    let zb = contact_zone(&b, lb, &a, contact);
    let a_prev = (la + na - za.0 - 1) % na;
    let a_next = (la + za.1 + 1) % na;
    let b_prev = (lb + nb - zb.0 - 1) % nb;
    let b_next = (lb + zb.1 + 1) % nb;
    let project = |p: Vec3, hint: usize| mesh.project_to_surface(&p, Some(hint));
    let j_low = project((a.nodes[a_prev] + b.nodes[b_next]) * 0.5, a.faces[a_prev])?;
    let j_high = project((a.nodes[a_next] + b.nodes[b_prev]) * 0.5, a.faces[a_next])?;
    // Connector interior: midpoints of the dropped A nodes and their closest B nodes.
    let mut inner = (Vec::new(), Vec::new());
    for s in 0..=za.0 + za.1 {
        let k = (la + na - za.0 + s) % na;
        let q = b.nodes.iter().min_by(|x, y| (*x - a.nodes[k]).norm().total_cmp(&(*y - a.nodes[k]).norm())).copied();
        let loc = project((a.nodes[k] + q.unwrap_or(a.nodes[k])) * 0.5, a.faces[k])?;
        inner.0.push(loc.point);
        inner.1.push(loc.face);
    }

    // Zip: when both zones run into a junction the curves share, that
    // junction slides to the far side of the contact and its third curve
    // absorbs the connector, instead of leaving a sliver lens behind.
    let zip = zip_side(net, &a, la, za, &b, lb, zb);
    let zip_third = match zip {
        Some((k, _)) => {
            let e = *net.junctions[k]
                .ends
                .iter()
                .find(|e| e.curve != a.id && e.curve != b.id)
                .ok_or_else(|| TopologyError::Unsupported { kind, msg: "junction without a third curve".into() })?;
            let c = net.curve(e.curve).cloned().ok_or_else(|| TopologyError::Stale("missing junction curve".into()))?;
            if net.junction_at(c.id, e.end.flip()).is_some_and(|(kk, _)| kk == k) {
                return Err(TopologyError::Unsupported { kind, msg: "junction curve closes on itself".into() });
            }
            Some((e, c))
        }
        None => None,
    };

    let mut out = ExecOutcome::default();
    for id in [a.id, b.id] {
        net.remove_curve(id);
        out.removed.push(id);
    }
    if let Some((k, _)) = zip {
        net.junctions.remove(k);
    }
    let zip_high = zip.map(|(_, high)| high);
    let jl = (j_low.point, j_low.face);
    let jh = (j_high.point, j_high.face);
    let with_ends = |start: Option<(Vec3, usize)>, body: (Vec<Vec3>, Vec<usize>), end: Option<(Vec3, usize)>| {
        let mut n = Vec::new();
        let mut f = Vec::new();
        if let Some((p, q)) = start {
            n.push(p);
            f.push(q);
        }
        n.extend(body.0);
        f.extend(body.1);
        if let Some((p, q)) = end {
            n.push(p);
            f.push(q);
        }
        (n, f)
    };

    // Attachments to the new junctions: (curve, end) at the low and high point.
    let mut low: Vec<JunctionEnd> = Vec::new();
    let mut high: Vec<JunctionEnd> = Vec::new();
    // Curve A runs from the high junction around to the low one; B the other way.
    for (c, l, zone, is_a) in [(&a, la, za, true), (&b, lb, zb, false)] {
        let (s_pt, e_pt) = if is_a { (jh, jl) } else { (jl, jh) };
        match pieces(c, l, zone) {
            Pieces::Closed(n, f) => {
                let (n, f) = with_ends(Some(s_pt), (n, f), Some(e_pt));
                let id = net.add_curve(new_curve(n, f, false, c.region_plus, c.region_minus));
                out.created.push(id);
                let (s_list, e_list) = if is_a { (&mut high, &mut low) } else { (&mut low, &mut high) };
                s_list.push(JunctionEnd { curve: id, end: End::Start });
                e_list.push(JunctionEnd { curve: id, end: End::End });
            }
            Pieces::Open { pre, post } => {
                // The post piece of A and the pre piece of B face the high junction.
                let drop_pre = zip_high == Some(!is_a);
                let drop_post = zip_high == Some(is_a);
                let (s_list, e_list) = if is_a { (&mut high, &mut low) } else { (&mut low, &mut high) };
                if !drop_pre {
                    let (n1, f1) = with_ends(None, pre, Some(e_pt));
                    let id1 = net.add_curve(new_curve(n1, f1, false, c.region_plus, c.region_minus));
                    out.created.push(id1);
                    retarget(net, c.id, End::Start, JunctionEnd { curve: id1, end: End::Start });
                    e_list.push(JunctionEnd { curve: id1, end: End::End });
                }
                if !drop_post {
                    let (n2, f2) = with_ends(Some(s_pt), post, None);
                    let id2 = net.add_curve(new_curve(n2, f2, false, c.region_plus, c.region_minus));
                    out.created.push(id2);
                    retarget(net, c.id, End::End, JunctionEnd { curve: id2, end: End::End });
                    s_list.push(JunctionEnd { curve: id2, end: End::Start });
                }
            }
        }
    }
    let regions = (b.region_minus, a.region_minus);
    let (cn, cf) = match (&zip_third, zip_high) {
        (Some((e, c)), Some(high)) => {
            // Orient the third curve so it continues the connector direction.
            let forward = (e.end == End::Start) == high;
            let (mut n, mut f) = (c.nodes.clone(), c.faces.clone());
            let mut pair = (c.region_plus, c.region_minus);
            if !forward {
                n.reverse();
                f.reverse();
                pair = (pair.1, pair.0);
            }
            if pair != regions {
                return Err(TopologyError::Unsupported { kind, msg: "junction curve regions disagree".into() });
            }
            net.remove_curve(c.id);
            out.removed.push(c.id);
            if high {
                let (mut cn, mut cf) = with_ends(Some(jl), inner, None);
                cn.extend(n);
                cf.extend(f);
                (cn, cf)
            } else {
                n.extend(inner.0);
                f.extend(inner.1);
                with_ends(None, (n, f), Some(jh))
            }
        }
        _ => with_ends(Some(jl), inner, Some(jh)),
    };
    let cid = net.add_curve(new_curve(cn, cf, false, regions.0, regions.1));
    out.created.push(cid);
    match (&zip_third, zip_high) {
        (Some((e, c)), Some(on_high)) => {
            let (near, far) = if on_high { (End::Start, End::End) } else { (End::End, End::Start) };
            retarget(net, c.id, e.end.flip(), JunctionEnd { curve: cid, end: far });
            if on_high { &mut low } else { &mut high }.push(JunctionEnd { curve: cid, end: near });
        }
        _ => {
            low.push(JunctionEnd { curve: cid, end: End::Start });
            high.push(JunctionEnd { curve: cid, end: End::End });
        }
    }
    for ends in [low, high] {
        if ends.is_empty() {
            continue;
        }
        let ends: [JunctionEnd; 3] =
            ends.try_into().map_err(|_| TopologyError::Unsupported { kind, msg: "junction bookkeeping".into() })?;
        net.junctions.push(TripleJunction { ends });
    }
    Ok(out)
}
