//! Discrete conformal and transboundary modulus by convex quadratic
//! minimization with shortest-path constraint generation.
//!
//! The solver minimizes `E(rho) = sum_cells rho^2 h^2 (+ sum_supers rho^2)`
//! subject to unit rho-length along every source-target path. Constraints
//! are generated by an exact Dijkstra separation oracle; the restricted QP
//! is solved by cyclic dual coordinate ascent with closed-form steps, whose
//! multipliers yield a Cauchy-Schwarz lower-bound certificate:
//! for any admissible rho', summing `1 <= <c_P, rho'>` against `lambda_P`
//! gives `E(rho') >= (sum lambda)^2 / (4 E(rho))`.

use crate::quotient::{
    energy, resolve_family, CurveFamilySpec, Density, GridError, NodeId, QuotientGraph,
    ResolvedFamily,
};
use serde::Serialize;
use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("terminals are not connected")]
    Disconnected,
    #[error("densities live on different graphs")]
    ShapeMismatch,
    #[error("invalid solver parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Converged,
    IterationCap,
    Infeasible,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub shortest_length: f64,
    pub energy: f64,
    pub lower_bound: f64,
}

#[derive(Clone, Debug)]
pub struct ModulusResult {
    /// energy of the returned admissible density
    pub upper_value: f64,
    /// dual certificate, a lower bound for the discrete optimum
    pub lower_value: f64,
    pub density: Density,
    /// active constraint paths with their multipliers
    pub active_paths: Vec<(Vec<NodeId>, f64)>,
    pub status: SolveStatus,
    pub tolerance: f64,
    pub trace: Vec<TraceRow>,
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub transboundary: bool,
    pub tol: f64,
    pub max_paths: usize,
    /// multiplier sweeps per outer iteration
    pub max_sweeps: usize,
    /// violated paths added per oracle call
    pub batch: usize,
    pub record_trace: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            transboundary: true,
            tol: 1e-3,
            max_paths: 10_000,
            max_sweeps: 1_000,
            batch: 64,
            record_trace: false,
        }
    }
}

impl SolveOptions {
    pub fn conformal() -> Self {
        SolveOptions { transboundary: false, ..Default::default() }
    }

    pub fn transboundary() -> Self {
        SolveOptions::default()
    }
}

#[derive(Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Multi-source Dijkstra under a density. Returns settled distances and
/// predecessors; `dist[v]` excludes the target-side endpoint correction.
fn dijkstra(
    g: &QuotientGraph,
    rho: &Density,
    source: &[NodeId],
) -> (Vec<f64>, Vec<NodeId>) {
    let n = g.n_nodes();
    let n_cells = g.n_cells();
    let h = g.h;
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![NodeId::MAX; n];
    let mut heap: BinaryHeap<Reverse<(OrdF64, NodeId)>> = BinaryHeap::new();
    for &s in source {
        let init = if g.is_super(s) { rho.super_values[g.super_index(s)] / 2.0 } else { 0.0 };
        if init < dist[s as usize] {
            dist[s as usize] = init;
            heap.push(Reverse((OrdF64(init), s)));
        }
    }
    let mut settled = vec![false; n];
    while let Some(Reverse((OrdF64(d), u))) = heap.pop() {
        let ui = u as usize;
        if settled[ui] {
            continue;
        }
        settled[ui] = true;
        let mut relax = |v: NodeId, w: f64, heap: &mut BinaryHeap<Reverse<(OrdF64, NodeId)>>,
                         dist: &mut Vec<f64>, pred: &mut Vec<NodeId>| {
            let nd = d + w;
            if nd < dist[v as usize] {
                dist[v as usize] = nd;
                pred[v as usize] = u;
                heap.push(Reverse((OrdF64(nd), v)));
            }
        };
        if ui < n_cells {
            let ru = rho.cell_values[ui];
            g.for_each_cell_neighbor(u, |v, len| {
                let rv = rho.cell_values[v as usize];
                relax(v, (ru + rv) * len / 2.0, &mut heap, &mut dist, &mut pred);
            });
            for &s in g.attached_supers(u) {
                let v = (n_cells + s as usize) as NodeId;
                let w = ru * h / 2.0 + rho.super_values[s as usize] / 2.0;
                relax(v, w, &mut heap, &mut dist, &mut pred);
            }
        } else {
            let si = ui - n_cells;
            let rs = rho.super_values[si];
            for &c in g.attached_cells(si) {
                let w = rs / 2.0 + rho.cell_values[c as usize] * h / 2.0;
                relax(c, w, &mut heap, &mut dist, &mut pred);
            }
        }
    }
    (dist, pred)
}

fn target_total(g: &QuotientGraph, rho: &Density, dist: &[f64], t: NodeId) -> f64 {
    let end = if g.is_super(t) { rho.super_values[g.super_index(t)] / 2.0 } else { 0.0 };
    dist[t as usize] + end
}

fn extract_path(pred: &[NodeId], t: NodeId) -> Vec<NodeId> {
    let mut path = vec![t];
    let mut cur = t;
    while pred[cur as usize] != NodeId::MAX {
        cur = pred[cur as usize];
        path.push(cur);
    }
    path.reverse();
    path
}

/// Shortest source-target path under `rho` with its rho-length.
/// Deterministic: heap ties break on the smaller node index.
pub fn shortest_path(
    g: &QuotientGraph,
    rho: &Density,
    source: &[NodeId],
    target: &[NodeId],
) -> Result<(Vec<NodeId>, f64), SolveError> {
    let (dist, pred) = dijkstra(g, rho, source);
    let mut best: Option<(f64, NodeId)> = None;
    for &t in target {
        let total = target_total(g, rho, &dist, t);
        if total.is_finite() {
            let better = match best {
                None => true,
                Some((b, bt)) => total < b || (total == b && t < bt),
            };
            if better {
                best = Some((total, t));
            }
        }
    }
    match best {
        None => Err(SolveError::Disconnected),
        Some((len, t)) => Ok((extract_path(&pred, t), len)),
    }
}

/// rho-length of an explicit node path: cell values weighted by half the
/// incident step lengths, one full super value per visit.
pub fn path_rho_length(g: &QuotientGraph, rho: &Density, path: &[NodeId]) -> f64 {
    let rec = path_record(g, path);
    rec.nodes
        .iter()
        .zip(&rec.coefs)
        .map(|(&n, c)| c * rho.value(g, n))
        .sum()
}

struct PathRecord {
    nodes: Vec<NodeId>,
    coefs: Vec<f64>,
    qnorm: f64,
    lambda: f64,
    key: u64,
    age: usize,
}

fn step_length(g: &QuotientGraph, a: NodeId, b: NodeId) -> f64 {
    let (ax, ay) = g.cells[a as usize];
    let (bx, by) = g.cells[b as usize];
    let dx = ax as f64 - bx as f64;
    let dy = ay as f64 - by as f64;
    g.h * (dx * dx + dy * dy).sqrt()
}

fn path_record(g: &QuotientGraph, path: &[NodeId]) -> PathRecord {
    let mut coefs = vec![0.0f64; path.len()];
    if path.len() == 1 {
        // the degenerate one-point curve through a shared super-node
        coefs[0] = if g.is_super(path[0]) { 1.0 } else { 0.0 };
    } else {
        for i in 0..path.len() - 1 {
            let (a, b) = (path[i], path[i + 1]);
            match (g.is_super(a), g.is_super(b)) {
                (false, false) => {
                    let l = step_length(g, a, b);
                    coefs[i] += l / 2.0;
                    coefs[i + 1] += l / 2.0;
                }
                (false, true) => {
                    coefs[i] += g.h / 2.0;
                    coefs[i + 1] += 0.5;
                }
                (true, false) => {
                    coefs[i] += 0.5;
                    coefs[i + 1] += g.h / 2.0;
                }
                (true, true) => unreachable!("no super-super edges"),
            }
        }
        if g.is_super(path[0]) {
            coefs[0] += 0.5;
        }
        if g.is_super(*path.last().unwrap()) {
            *coefs.last_mut().unwrap() += 0.5;
        }
    }
    let h2 = g.h * g.h;
    let qnorm: f64 = path
        .iter()
        .zip(&coefs)
        .map(|(&n, c)| {
            let w = if g.is_super(n) { 1.0 } else { h2 };
            c * c / w
        })
        .sum();
    let key = path_key(path);
    PathRecord { nodes: path.to_vec(), coefs, qnorm, lambda: 0.0, key, age: 0 }
}

fn canonical(path: &mut Vec<NodeId>) {
    if path.last() < path.first() {
        path.reverse();
    }
}

fn path_key(path: &[NodeId]) -> u64 {
    // FNV-1a over the node sequence
    let mut hash: u64 = 0xcbf29ce484222325;
    for &n in path {
        hash ^= n as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash ^= path.len() as u64;
    hash.wrapping_mul(0x100000001b3)
}

/// Exact minimum rho-length over the family with a witness path when the
/// minimum falls below 1.
pub fn admissibility_check(
    g: &QuotientGraph,
    rho: &Density,
    fam: &ResolvedFamily,
) -> Result<(f64, Option<Vec<NodeId>>), SolveError> {
    let (path, len) = shortest_path(g, rho, &fam.source, &fam.target)?;
    Ok((len, (len < 1.0).then_some(path)))
}

/// Pointwise arithmetic mean of densities on one graph.
pub fn average_densities(list: &[Density]) -> Result<Density, SolveError> {
    let first = list.first().ok_or(SolveError::ShapeMismatch)?;
    let (nc, ns) = (first.cell_values.len(), first.super_values.len());
    if list.iter().any(|d| d.cell_values.len() != nc || d.super_values.len() != ns) {
        return Err(SolveError::ShapeMismatch);
    }
    let k = list.len() as f64;
    let mut out = Density { cell_values: vec![0.0; nc], super_values: vec![0.0; ns] };
    for d in list {
        for (o, v) in out.cell_values.iter_mut().zip(&d.cell_values) {
            *o += v / k;
        }
        for (o, v) in out.super_values.iter_mut().zip(&d.super_values) {
            *o += v / k;
        }
    }
    Ok(out)
}

/// Solve the modulus of a curve family on a quotient graph.
pub fn solve_modulus(
    g: &QuotientGraph,
    spec: &CurveFamilySpec,
    opts: &SolveOptions,
) -> Result<ModulusResult, SolveError> {
    if !(opts.tol > 1e-6 && opts.tol < 1e-1) {
        return Err(SolveError::InvalidParameter(format!(
            "tol {} outside (1e-6, 1e-1)",
            opts.tol
        )));
    }
    let fam = resolve_family(g, spec, opts.transboundary)?;
    solve_on_family(&fam, opts)
}

/// Solver entry for a pre-resolved family.
pub fn solve_on_family(fam: &ResolvedFamily, opts: &SolveOptions) -> Result<ModulusResult, SolveError> {
    let g = &fam.graph;
    let n_cells = g.n_cells();
    let h2 = g.h * g.h;
    let tol = opts.tol;
    let oracle_gate = 1.0 - tol / 3.0;

    let mut rho = Density::zeros(g);
    let mut paths: Vec<PathRecord> = Vec::new();
    let mut seen: HashSet<u64> = HashSet::new();
    let mut trace = Vec::new();
    let mut status = SolveStatus::IterationCap;
    let mut flip = false;

    // feasibility probe
    {
        let zero = Density::zeros(g);
        if shortest_path(g, &zero, &fam.source, &fam.target).is_err() {
            return Ok(ModulusResult {
                upper_value: 0.0,
                lower_value: 0.0,
                density: zero,
                active_paths: Vec::new(),
                status: SolveStatus::Infeasible,
                tolerance: tol,
                trace,
            });
        }
    }

    let weight = |n: NodeId, g: &QuotientGraph| if g.is_super(n) { 1.0 } else { h2 };
    // scale of the uniform tie-breaking perturbation used when selecting
    // new constraint paths; keeps near-zero-length ties geometric
    let perturb_base = 1.0 / g.window.diam().max(g.h);
    let mut last_min_len = 0.0;
    let mut outer_iter = 0usize;
    let outer_cap = 8 * opts.max_paths.max(64);
    let mut stalled_rounds = 0usize;
    loop {
        outer_iter += 1;
        if outer_iter > outer_cap {
            status = SolveStatus::IterationCap;
            break;
        }
        // drop constraints that never bound; they contribute nothing to the
        // density and only slow the sweeps (the oracle re-adds them if they
        // ever matter again)
        if outer_iter % 2 == 0 {
            paths.retain(|p| {
                let keep = p.lambda > 0.0 || p.age <= 2;
                if !keep {
                    seen.remove(&p.key);
                }
                keep
            });
        }
        for p in paths.iter_mut() {
            p.age += 1;
        }
        // restricted QP by cyclic dual coordinate ascent; early rounds get
        // a small sweep budget, the final polish the full one
        let inner_tol = tol / 20.0;
        let sweep_budget = if paths.is_empty() {
            0
        } else if last_min_len < 0.75 && stalled_rounds == 0 {
            opts.max_sweeps.min(150)
        } else {
            opts.max_sweeps
        };
        let mut sweeps = 0usize;
        while sweeps < sweep_budget {
            sweeps += 1;
            let mut residual = 0.0f64;
            for p in paths.iter_mut() {
                let len: f64 = p
                    .nodes
                    .iter()
                    .zip(&p.coefs)
                    .map(|(&n, c)| c * rho.value(g, n))
                    .sum();
                let delta = 2.0 * (1.0 - len) / p.qnorm;
                let new_lambda = (p.lambda + delta).max(0.0);
                let change = new_lambda - p.lambda;
                if change != 0.0 {
                    p.lambda = new_lambda;
                    for (&n, c) in p.nodes.iter().zip(&p.coefs) {
                        let upd = change * c / (2.0 * weight(n, g));
                        if g.is_super(n) {
                            rho.super_values[n as usize - n_cells] += upd;
                        } else {
                            rho.cell_values[n as usize] += upd;
                        }
                    }
                }
                let viol = if new_lambda > 0.0 { (1.0 - len).abs() } else { (1.0 - len).max(0.0) };
                residual = residual.max(viol);
            }
            if residual < inner_tol {
                break;
            }
        }
        // clip the tiny negatives coordinate updates can leave behind
        for v in rho.cell_values.iter_mut().chain(rho.super_values.iter_mut()) {
            if *v < 0.0 {
                *v = 0.0;
            }
        }

        let e = energy(g, &rho, true);
        let lambda_sum: f64 = paths.iter().map(|p| p.lambda).sum();
        let lower = if e > 0.0 { lambda_sum * lambda_sum / (4.0 * e) } else { 0.0 };

        // exact separation oracle, alternating direction per round
        let (from, to) = if flip { (&fam.target, &fam.source) } else { (&fam.source, &fam.target) };
        flip = !flip;
        let (dist, pred_exact) = dijkstra(g, &rho, from);
        let mut min_len = f64::INFINITY;
        let mut min_target = NodeId::MAX;
        for &t in to.iter() {
            let total = target_total(g, &rho, &dist, t);
            if total < min_len || (total == min_len && t < min_target) {
                min_len = total;
                min_target = t;
            }
        }
        last_min_len = min_len;
        if opts.record_trace {
            trace.push(TraceRow {
                iteration: outer_iter,
                shortest_length: min_len,
                energy: e,
                lower_bound: lower,
            });
        }

        if min_len >= oracle_gate {
            let upper = if min_len > 0.0 { e / (min_len * min_len) } else { e };
            if upper - lower <= tol * upper || paths.is_empty() {
                status = SolveStatus::Converged;
                break;
            }
            // polish the restricted QP until the duality gap closes
            if sweeps >= opts.max_sweeps && outer_iter > 4 {
                status = SolveStatus::IterationCap;
                break;
            }
            continue;
        }

        if paths.len() >= opts.max_paths {
            status = SolveStatus::IterationCap;
            break;
        }

        // select new paths under a perturbed metric so that ties among
        // near-zero-length routes break toward geometrically short ones;
        // only exactly-violated paths are added
        let eta = perturb_base * tol.min(0.05).max(1e-4);
        let mut rho_sel = rho.clone();
        for v in rho_sel.cell_values.iter_mut() {
            *v += eta;
        }
        for v in rho_sel.super_values.iter_mut() {
            *v += eta * g.h;
        }
        let (dist_sel, pred_sel) = dijkstra(g, &rho_sel, from);
        let mut violations: Vec<(f64, NodeId)> = to
            .iter()
            .filter_map(|&t| {
                let total = target_total(g, &rho_sel, &dist_sel, t);
                total.is_finite().then_some((total, t))
            })
            .collect();
        // spatial spread: stride over targets in node order
        violations.sort_by(|a, b| a.1.cmp(&b.1));
        let stride = (violations.len() / opts.batch.max(1)).max(1);
        let mut added = 0usize;
        let cutoff = oracle_gate.min(1.0 - 1e-12);
        for (k, &(_, t)) in violations.iter().enumerate() {
            if k % stride != 0 && k != 0 {
                continue;
            }
            let mut nodes = extract_path(&pred_sel, t);
            canonical(&mut nodes);
            let rec = path_record(g, &nodes);
            let exact_len: f64 = rec
                .nodes
                .iter()
                .zip(&rec.coefs)
                .map(|(&n, c)| c * rho.value(g, n))
                .sum();
            if exact_len >= cutoff {
                continue;
            }
            let key = path_key(&nodes);
            if seen.insert(key) {
                paths.push(rec);
                added += 1;
                if added >= opts.batch || paths.len() >= opts.max_paths {
                    break;
                }
            }
        }
        if added == 0 && min_target != NodeId::MAX {
            // the perturbed tree missed every new violated route; fall back
            // to the exactly shortest path
            let mut nodes = extract_path(&pred_exact, min_target);
            canonical(&mut nodes);
            let key = path_key(&nodes);
            if seen.insert(key) {
                paths.push(path_record(g, &nodes));
                added += 1;
            }
        }
        if added == 0 {
            stalled_rounds += 1;
            // all violated routes are already active constraints: the
            // restricted QP needs more polish; give up only after several
            // full-budget rounds in a row
            if stalled_rounds > 8 && sweeps >= opts.max_sweeps {
                status = SolveStatus::IterationCap;
                break;
            }
        } else {
            stalled_rounds = 0;
        }
    }

    // scale to exact admissibility
    let min_len = if last_min_len.is_finite() && last_min_len > 0.0 {
        last_min_len
    } else {
        1.0
    };
    let mut density = rho.clone();
    if !paths.is_empty() {
        for v in density.cell_values.iter_mut().chain(density.super_values.iter_mut()) {
            *v /= min_len;
        }
    }
    let upper = energy(g, &density, true);
    let e = energy(g, &rho, true);
    let lambda_sum: f64 = paths.iter().map(|p| p.lambda).sum();
    let lower = if e > 0.0 {
        (lambda_sum * lambda_sum / (4.0 * e)).min(upper)
    } else {
        0.0
    };
    let active_paths = paths
        .into_iter()
        .filter(|p| p.lambda > 0.0)
        .map(|p| (p.nodes, p.lambda))
        .collect();
    Ok(ModulusResult {
        upper_value: upper,
        lower_value: lower,
        density,
        active_paths,
        status,
        tolerance: tol,
        trace,
    })
}
