//! Grid discretization of a domain quotient: free grid cells plus one
//! super-node per complementary component.
//!
//! Cells whose closed square meets any component are removed; every
//! component meeting the window collapses to a single super-node attached
//! to the free cells within one cell width of it. Paths therefore
//! alternate runs of free cells with single super-node visits, and a
//! path's rho-length is the sum of cell values weighted by Euclidean step
//! lengths plus one full super-node value per visit.

use crate::domains::{outer_radial_interval, Domain};
use crate::geometry::{dist_point_rect, sphere_intersects, Component, Point2, Shape, Window};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("no free cell remains in the window")]
    EmptyGrid,
    #[error("terminal set `{0}` resolved empty")]
    EmptyTerminal(String),
    #[error("invalid curve family: {0}")]
    InvalidFamily(String),
    #[error("unknown component id {0}")]
    UnknownComponent(usize),
}

/// Adjacency pattern among free cells. All patterns use exact Euclidean
/// step lengths; the wider ones reduce the direction-dependent bias of
/// shortest grid paths.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Neighborhood {
    /// axis + diagonal steps
    N8,
    /// N8 plus knight steps (length sqrt(5) h)
    N16,
}

const N8_OFFSETS: [(i32, i32); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

const KNIGHT_OFFSETS: [(i32, i32); 8] = [
    (2, 1),
    (2, -1),
    (-2, 1),
    (-2, -1),
    (1, 2),
    (1, -2),
    (-1, 2),
    (-1, -2),
];

pub type NodeId = u32;

/// Non-negative weight per node of a quotient graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Density {
    pub cell_values: Vec<f64>,
    pub super_values: Vec<f64>,
}

impl Density {
    pub fn zeros(g: &QuotientGraph) -> Self {
        Density {
            cell_values: vec![0.0; g.cells.len()],
            super_values: vec![0.0; g.supers.len()],
        }
    }

    pub fn value(&self, g: &QuotientGraph, node: NodeId) -> f64 {
        if g.is_super(node) {
            self.super_values[node as usize - self.cell_values.len()]
        } else {
            self.cell_values[node as usize]
        }
    }
}

/// Energy `sum rho^2 h^2` over cells, plus `sum rho(p)^2` over super-nodes
/// in transboundary mode.
pub fn energy(g: &QuotientGraph, rho: &Density, transboundary: bool) -> f64 {
    let h2 = g.h * g.h;
    let cells: f64 = rho.cell_values.iter().map(|v| v * v).sum::<f64>() * h2;
    if transboundary {
        cells + rho.super_values.iter().map(|v| v * v).sum::<f64>()
    } else {
        cells
    }
}

/// Descriptor for one terminal set of a curve family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum NodeSet {
    /// quotient image of the circle `|x - center| = radius`
    Circle { center: Point2, radius: f64 },
    /// a component's super-node (its attached cells in conformal mode)
    Component(usize),
    /// explicit grid cells by (ix, iy)
    Cells(Vec<(usize, usize)>),
    /// free cells along one window edge
    WindowEdge(Side),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
    Top,
    Bottom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveFamilySpec {
    pub source: NodeSet,
    pub target: NodeSet,
    /// components whose super-nodes are deleted before solving
    pub forbidden: Vec<usize>,
    /// keep only cells meeting the closed annulus r_in <= |x - center| <= r_out
    pub window_restriction: Option<AnnulusWindow>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnulusWindow {
    pub center: Point2,
    pub r_in: f64,
    pub r_out: f64,
}

impl CurveFamilySpec {
    pub fn joining(source: NodeSet, target: NodeSet) -> Self {
        CurveFamilySpec { source, target, forbidden: Vec::new(), window_restriction: None }
    }

    /// The annulus family around `center`: curves joining the quotient
    /// images of the two circles inside the closed annulus.
    pub fn ring(center: Point2, r_in: f64, r_out: f64) -> Self {
        CurveFamilySpec {
            source: NodeSet::Circle { center, radius: r_in },
            target: NodeSet::Circle { center, radius: r_out },
            forbidden: Vec::new(),
            window_restriction: Some(AnnulusWindow { center, r_in, r_out }),
        }
    }
}

/// The discretized quotient. Cell nodes come first, super-nodes after.
#[derive(Clone, Debug)]
pub struct QuotientGraph {
    pub h: f64,
    pub window: Window,
    pub nx: usize,
    pub ny: usize,
    /// grid slot -> cell index, u32::MAX when blocked
    grid: Vec<u32>,
    /// free cells as (ix, iy)
    pub cells: Vec<(u32, u32)>,
    /// component id per super-node
    pub supers: Vec<usize>,
    /// attached free cells per super-node
    super_cells: Vec<Vec<u32>>,
    /// CSR cell -> super-node indices
    attach_off: Vec<u32>,
    attach: Vec<u32>,
    pub neighborhood: Neighborhood,
    /// bounded components carried along for terminal resolution
    pub components: Vec<Component>,
    pub outer: Option<Component>,
}

impl QuotientGraph {
    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.cells.len() + self.supers.len()
    }

    pub fn is_super(&self, n: NodeId) -> bool {
        (n as usize) >= self.cells.len()
    }

    pub fn super_index(&self, n: NodeId) -> usize {
        n as usize - self.cells.len()
    }

    pub fn super_node_of(&self, component_id: usize) -> Option<NodeId> {
        self.supers
            .iter()
            .position(|&c| c == component_id)
            .map(|i| (self.cells.len() + i) as NodeId)
    }

    pub fn cell_center(&self, cell: u32) -> Point2 {
        let (ix, iy) = self.cells[cell as usize];
        Point2::new(
            self.window.lo.x + (ix as f64 + 0.5) * self.h,
            self.window.lo.y + (iy as f64 + 0.5) * self.h,
        )
    }

    pub fn cell_rect(&self, ix: u32, iy: u32) -> (Point2, Point2) {
        let lo = Point2::new(
            self.window.lo.x + ix as f64 * self.h,
            self.window.lo.y + iy as f64 * self.h,
        );
        (lo, Point2::new(lo.x + self.h, lo.y + self.h))
    }

    pub fn cell_at(&self, ix: i64, iy: i64) -> Option<u32> {
        if ix < 0 || iy < 0 || ix as usize >= self.nx || iy as usize >= self.ny {
            return None;
        }
        let v = self.grid[iy as usize * self.nx + ix as usize];
        (v != u32::MAX).then_some(v)
    }

    pub fn attached_supers(&self, cell: u32) -> &[u32] {
        let a = self.attach_off[cell as usize] as usize;
        let b = self.attach_off[cell as usize + 1] as usize;
        &self.attach[a..b]
    }

    pub fn attached_cells(&self, super_idx: usize) -> &[u32] {
        &self.super_cells[super_idx]
    }

    /// Visit cell-cell neighbors with their Euclidean step lengths;
    /// diagonal and knight steps are skipped when the cells they pass
    /// through are blocked.
    #[inline]
    pub fn for_each_cell_neighbor(&self, cell: u32, mut f: impl FnMut(u32, f64)) {
        let (ix, iy) = self.cells[cell as usize];
        let (ix, iy) = (ix as i64, iy as i64);
        for (dx, dy) in N8_OFFSETS {
            let (jx, jy) = (ix + dx as i64, iy + dy as i64);
            if let Some(other) = self.cell_at(jx, jy) {
                if dx != 0 && dy != 0 {
                    // no corner cutting
                    let a = self.cell_at(ix + dx as i64, iy).is_some();
                    let b = self.cell_at(ix, iy + dy as i64).is_some();
                    if !a && !b {
                        continue;
                    }
                    f(other, self.h * std::f64::consts::SQRT_2);
                } else {
                    f(other, self.h);
                }
            }
        }
        if self.neighborhood == Neighborhood::N16 {
            for (dx, dy) in KNIGHT_OFFSETS {
                let (jx, jy) = (ix + dx as i64, iy + dy as i64);
                if let Some(other) = self.cell_at(jx, jy) {
                    // the center-to-center segment crosses the two cells
                    // adjacent to the midpoint; both must be free
                    let (c1, c2) = if dx.abs() == 2 {
                        ((ix + dx as i64 / 2, iy), (ix + dx as i64 / 2, iy + dy as i64))
                    } else {
                        ((ix, iy + dy as i64 / 2), (ix + dx as i64, iy + dy as i64 / 2))
                    };
                    if self.cell_at(c1.0, c1.1).is_some() && self.cell_at(c2.0, c2.1).is_some() {
                        f(other, self.h * 5.0f64.sqrt());
                    }
                }
            }
        }
    }

    /// Adjacency dump for debugging; not a stable format.
    pub fn dump_adjacency(&self) -> String {
        let mut out = String::new();
        use std::fmt::Write;
        for c in 0..self.cells.len() as u32 {
            let (ix, iy) = self.cells[c as usize];
            write!(out, "cell {c} ({ix},{iy}):").unwrap();
            self.for_each_cell_neighbor(c, |m, len| {
                write!(out, " {m}[{len:.4}]").unwrap();
            });
            for s in self.attached_supers(c) {
                write!(out, " S{}", self.supers[*s as usize]).unwrap();
            }
            out.push('\n');
        }
        for (i, comp) in self.supers.iter().enumerate() {
            writeln!(out, "super {i} = component {comp}: {} cells", self.super_cells[i].len())
                .unwrap();
        }
        out
    }

    /// New graph keeping only the cells accepted by `keep`; super-nodes
    /// stay, with attachments restricted to surviving cells.
    pub fn retain_cells(&self, keep: impl Fn(u32) -> bool) -> QuotientGraph {
        let mut grid = vec![u32::MAX; self.nx * self.ny];
        let mut cells = Vec::new();
        let mut remap = vec![u32::MAX; self.cells.len()];
        for (old, &(ix, iy)) in self.cells.iter().enumerate() {
            if keep(old as u32) {
                remap[old] = cells.len() as u32;
                grid[iy as usize * self.nx + ix as usize] = cells.len() as u32;
                cells.push((ix, iy));
            }
        }
        let super_cells: Vec<Vec<u32>> = self
            .super_cells
            .iter()
            .map(|v| v.iter().filter_map(|&c| (remap[c as usize] != u32::MAX).then(|| remap[c as usize])).collect())
            .collect();
        let (attach_off, attach) = build_attach_csr(cells.len(), &super_cells);
        QuotientGraph {
            h: self.h,
            window: self.window,
            nx: self.nx,
            ny: self.ny,
            grid,
            cells,
            supers: self.supers.clone(),
            super_cells,
            attach_off,
            attach,
            neighborhood: self.neighborhood,
            components: self.components.clone(),
            outer: self.outer.clone(),
        }
    }

    /// New graph with the listed component super-nodes removed.
    pub fn remove_supers(&self, component_ids: &[usize]) -> QuotientGraph {
        let remove: BTreeSet<usize> = component_ids.iter().cloned().collect();
        let mut supers = Vec::new();
        let mut super_cells = Vec::new();
        for (i, &comp) in self.supers.iter().enumerate() {
            if !remove.contains(&comp) {
                supers.push(comp);
                super_cells.push(self.super_cells[i].clone());
            }
        }
        let (attach_off, attach) = build_attach_csr(self.cells.len(), &super_cells);
        QuotientGraph {
            h: self.h,
            window: self.window,
            nx: self.nx,
            ny: self.ny,
            grid: self.grid.clone(),
            cells: self.cells.clone(),
            supers,
            super_cells,
            attach_off,
            attach,
            neighborhood: self.neighborhood,
            components: self.components.clone(),
            outer: self.outer.clone(),
        }
    }
}

fn build_attach_csr(n_cells: usize, super_cells: &[Vec<u32>]) -> (Vec<u32>, Vec<u32>) {
    let mut counts = vec![0u32; n_cells + 1];
    for cells in super_cells {
        for &c in cells {
            counts[c as usize + 1] += 1;
        }
    }
    for i in 1..counts.len() {
        counts[i] += counts[i - 1];
    }
    let mut attach = vec![0u32; *counts.last().unwrap() as usize];
    let mut cursor = counts.clone();
    for (s, cells) in super_cells.iter().enumerate() {
        for &c in cells {
            attach[cursor[c as usize] as usize] = s as u32;
            cursor[c as usize] += 1;
        }
    }
    (counts, attach)
}

/// True when the closed exterior of the outer shape meets the closed
/// rectangle.
fn outer_meets_rect(outer: &Component, lo: Point2, hi: Point2) -> bool {
    match &outer.shape {
        Shape::Disk { center, radius } => {
            let corners = [
                lo,
                Point2::new(hi.x, lo.y),
                hi,
                Point2::new(lo.x, hi.y),
            ];
            corners.iter().any(|c| c.dist(*center) >= *radius)
        }
        Shape::Polygon { vertices } => {
            let corners = [
                lo,
                Point2::new(hi.x, lo.y),
                hi,
                Point2::new(lo.x, hi.y),
            ];
            // outside the polygon, or crossing its boundary
            corners
                .iter()
                .any(|c| !crate::geometry::point_in_polygon(*c, vertices))
                || outer.intersects_rect(lo, hi)
        }
        _ => true,
    }
}

/// Discretize a domain on `window` with cell side `h`.
pub fn discretize(
    d: &Domain,
    window: Window,
    h: f64,
    neighborhood: Neighborhood,
) -> Result<QuotientGraph, GridError> {
    assert!(h > 0.0, "cell side must be positive");
    let nx = ((window.width() / h) + 1e-9).floor().max(1.0) as usize;
    let ny = ((window.height() / h) + 1e-9).floor().max(1.0) as usize;
    let mut blocked = vec![false; nx * ny];
    let rect = |ix: usize, iy: usize| {
        let lo = Point2::new(window.lo.x + ix as f64 * h, window.lo.y + iy as f64 * h);
        (lo, Point2::new(lo.x + h, lo.y + h))
    };

    // bounded components block the cells they touch
    for c in &d.inner {
        let (blo, bhi) = c.bbox();
        let x0 = (((blo.x - window.lo.x) / h).floor() as i64 - 1).max(0) as usize;
        let x1 = ((((bhi.x - window.lo.x) / h).ceil() as i64) + 1).min(nx as i64) as usize;
        let y0 = (((blo.y - window.lo.y) / h).floor() as i64 - 1).max(0) as usize;
        let y1 = ((((bhi.y - window.lo.y) / h).ceil() as i64) + 1).min(ny as i64) as usize;
        for iy in y0..y1 {
            for ix in x0..x1 {
                if !blocked[iy * nx + ix] {
                    let (lo, hi) = rect(ix, iy);
                    if c.intersects_rect(lo, hi) {
                        blocked[iy * nx + ix] = true;
                    }
                }
            }
        }
    }
    if let Some(outer) = &d.outer {
        for iy in 0..ny {
            for ix in 0..nx {
                if !blocked[iy * nx + ix] {
                    let (lo, hi) = rect(ix, iy);
                    if outer_meets_rect(outer, lo, hi) {
                        blocked[iy * nx + ix] = true;
                    }
                }
            }
        }
    }

    let mut grid = vec![u32::MAX; nx * ny];
    let mut cells = Vec::new();
    for iy in 0..ny {
        for ix in 0..nx {
            if !blocked[iy * nx + ix] {
                grid[iy * nx + ix] = cells.len() as u32;
                cells.push((ix as u32, iy as u32));
            }
        }
    }
    if cells.is_empty() {
        return Err(GridError::EmptyGrid);
    }

    // super-nodes: one per component meeting the window, attached to the
    // free cells within distance h
    let mut supers = Vec::new();
    let mut super_cells: Vec<Vec<u32>> = Vec::new();
    let window_rect = (window.lo, window.hi);
    if let Some(outer) = &d.outer {
        if outer_meets_rect(outer, window_rect.0, window_rect.1) {
            let mut attached = Vec::new();
            for (ci, &(ix, iy)) in cells.iter().enumerate() {
                let (lo, hi) = rect(ix as usize, iy as usize);
                let ilo = Point2::new(lo.x - h, lo.y - h);
                let ihi = Point2::new(hi.x + h, hi.y + h);
                if outer_meets_rect(outer, ilo, ihi) {
                    attached.push(ci as u32);
                }
            }
            supers.push(outer.id);
            super_cells.push(attached);
        }
    }
    for c in &d.inner {
        if !c.intersects_rect(window_rect.0, window_rect.1) {
            continue;
        }
        let mut attached = Vec::new();
        let (blo, bhi) = c.bbox();
        let pad = 2.5 * h;
        let x0 = (((blo.x - pad - window.lo.x) / h).floor().max(0.0)) as usize;
        let x1 = ((((bhi.x + pad - window.lo.x) / h).ceil()).min(nx as f64)) as usize;
        let y0 = (((blo.y - pad - window.lo.y) / h).floor().max(0.0)) as usize;
        let y1 = ((((bhi.y + pad - window.lo.y) / h).ceil()).min(ny as f64)) as usize;
        for iy in y0..y1 {
            for ix in x0..x1 {
                let cell = grid[iy * nx + ix];
                if cell != u32::MAX {
                    let (lo, hi) = rect(ix, iy);
                    let ilo = Point2::new(lo.x - h, lo.y - h);
                    let ihi = Point2::new(hi.x + h, hi.y + h);
                    if c.intersects_rect(ilo, ihi) {
                        attached.push(cell);
                    }
                }
            }
        }
        supers.push(c.id);
        super_cells.push(attached);
    }

    let (attach_off, attach) = build_attach_csr(cells.len(), &super_cells);
    Ok(QuotientGraph {
        h,
        window,
        nx,
        ny,
        grid,
        cells,
        supers,
        super_cells,
        attach_off,
        attach,
        neighborhood,
        components: d.inner.clone(),
        outer: d.outer.clone(),
    })
}

/// A curve family after discretization: pruned graph plus terminal node
/// sets.
#[derive(Clone, Debug)]
pub struct ResolvedFamily {
    pub graph: QuotientGraph,
    pub source: Vec<NodeId>,
    pub target: Vec<NodeId>,
}

/// Resolve a family spec on a graph. In conformal mode (transboundary
/// false) all super-nodes are deleted and component terminals resolve to
/// the cells formerly attached to them.
pub fn resolve_family(
    g: &QuotientGraph,
    spec: &CurveFamilySpec,
    transboundary: bool,
) -> Result<ResolvedFamily, GridError> {
    for id in &spec.forbidden {
        if g.super_node_of(*id).is_none() {
            return Err(GridError::UnknownComponent(*id));
        }
    }

    // remember component attachments before any super deletion
    let component_cells = |id: usize| -> Option<Vec<u32>> {
        g.supers
            .iter()
            .position(|&c| c == id)
            .map(|i| g.super_cells[i].clone())
    };
    let pre_attach: Vec<(usize, Vec<u32>)> = g
        .supers
        .iter()
        .map(|&id| (id, component_cells(id).unwrap_or_default()))
        .collect();

    let mut graph = if transboundary {
        g.remove_supers(&spec.forbidden)
    } else {
        let all: Vec<usize> = g.supers.clone();
        g.remove_supers(&all)
    };

    let mut cell_remap: Option<Vec<u32>> = None;
    if let Some(ann) = &spec.window_restriction {
        if !(ann.r_in < ann.r_out) {
            return Err(GridError::InvalidFamily("annulus needs r_in < r_out".into()));
        }
        let mut remap = vec![u32::MAX; graph.cells.len()];
        let kept = graph.retain_cells(|c| {
            let (ix, iy) = graph.cells[c as usize];
            let (lo, hi) = graph.cell_rect(ix, iy);
            let dmin = dist_point_rect(ann.center, lo, hi);
            let corners = [
                lo,
                Point2::new(hi.x, lo.y),
                hi,
                Point2::new(lo.x, hi.y),
            ];
            let dmax = corners.iter().map(|p| p.dist(ann.center)).fold(0.0f64, f64::max);
            dmin <= ann.r_out && dmax >= ann.r_in
        });
        let mut idx = 0u32;
        for (old, &(ix, iy)) in graph.cells.iter().enumerate() {
            if kept.cell_at(ix as i64, iy as i64).is_some() {
                remap[old] = idx;
                idx += 1;
            }
        }
        cell_remap = Some(remap);
        graph = kept;
    }

    let resolve = |set: &NodeSet, name: &str| -> Result<Vec<NodeId>, GridError> {
        let mut nodes: Vec<NodeId> = Vec::new();
        match set {
            NodeSet::Circle { center, radius } => {
                for c in 0..graph.cells.len() as u32 {
                    let (ix, iy) = graph.cells[c as usize];
                    let (lo, hi) = graph.cell_rect(ix, iy);
                    let dmin = dist_point_rect(*center, lo, hi);
                    let corners = [
                        lo,
                        Point2::new(hi.x, lo.y),
                        hi,
                        Point2::new(lo.x, hi.y),
                    ];
                    let dmax = corners.iter().map(|p| p.dist(*center)).fold(0.0f64, f64::max);
                    if dmin <= *radius && dmax >= *radius {
                        nodes.push(c);
                    }
                }
                for (i, &comp_id) in graph.supers.iter().enumerate() {
                    let hit = if comp_id == 0 {
                        graph.outer.as_ref().map_or(false, |o| {
                            let (dmin, dmax) = outer_radial_interval(o, *center);
                            dmin <= *radius && *radius <= dmax
                        })
                    } else {
                        graph
                            .components
                            .iter()
                            .find(|c| c.id == comp_id)
                            .map_or(false, |c| sphere_intersects(c, *center, *radius))
                    };
                    if hit {
                        nodes.push((graph.cells.len() + i) as NodeId);
                    }
                }
            }
            NodeSet::Component(id) => {
                if let Some(n) = graph.super_node_of(*id) {
                    nodes.push(n);
                } else {
                    // conformal mode or deleted super: use its attached cells
                    let cells = pre_attach
                        .iter()
                        .find(|(cid, _)| cid == id)
                        .map(|(_, v)| v.clone())
                        .ok_or(GridError::UnknownComponent(*id))?;
                    for c in cells {
                        let mapped = match &cell_remap {
                            Some(remap) => remap[c as usize],
                            None => c,
                        };
                        if mapped != u32::MAX {
                            nodes.push(mapped);
                        }
                    }
                }
            }
            NodeSet::Cells(list) => {
                for &(ix, iy) in list {
                    if let Some(c) = graph.cell_at(ix as i64, iy as i64) {
                        nodes.push(c);
                    }
                }
            }
            NodeSet::WindowEdge(side) => {
                for c in 0..graph.cells.len() as u32 {
                    let (ix, iy) = graph.cells[c as usize];
                    let on = match side {
                        Side::Left => ix == 0,
                        Side::Right => ix as usize == graph.nx - 1,
                        Side::Bottom => iy == 0,
                        Side::Top => iy as usize == graph.ny - 1,
                    };
                    if on {
                        nodes.push(c);
                    }
                }
            }
        }
        nodes.sort_unstable();
        nodes.dedup();
        if nodes.is_empty() {
            return Err(GridError::EmptyTerminal(name.to_string()));
        }
        Ok(nodes)
    };

    let source = resolve(&spec.source, "source")?;
    let target = resolve(&spec.target, "target")?;
    // overlapping cells make the family degenerate; a shared super-node is
    // the legitimate one-point curve through that component
    let tgt: BTreeSet<NodeId> = target.iter().cloned().collect();
    for s in &source {
        if tgt.contains(s) && !graph.is_super(*s) {
            return Err(GridError::InvalidFamily(
                "source and target cells overlap; the terminals are not separated at this h".into(),
            ));
        }
    }
    Ok(ResolvedFamily { graph, source, target })
}
