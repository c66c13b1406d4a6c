//! Planar primitives and measurements for complementary components.
//!
//! Components are closed connected subsets of the plane: round disks,
//! concentric circular arcs, segments, single points, and filled simple
//! polygons. Arcs and segments carry a `thickness`; a positive thickness
//! means the Minkowski sum of the curve with a closed disk of radius
//! `thickness / 2`, thickness zero means the bare one-dimensional set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance for predicates on quantities that have a scale.
pub const REL_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("component has zero diameter")]
    ZeroDiameter,
    #[error("invalid window: {0}")]
    InvalidWindow(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        debug_assert!(x.is_finite() && y.is_finite());
        Point2 { x, y }
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }

    pub fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }

    pub fn scale(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }

    pub fn rotated(self, angle: f64) -> Point2 {
        let (s, c) = angle.sin_cos();
        Point2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }
}

/// Axis-aligned computation region; stands in for the sphere minus the
/// outer component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: Point2,
    pub hi: Point2,
}

impl Window {
    pub fn new(lo: Point2, hi: Point2) -> Result<Self, GeometryError> {
        if !(hi.x > lo.x && hi.y > lo.y) {
            return Err(GeometryError::InvalidWindow(format!(
                "degenerate extent ({}, {}) x ({}, {})",
                lo.x, hi.x, lo.y, hi.y
            )));
        }
        Ok(Window { lo, hi })
    }

    pub fn square(center: Point2, half: f64) -> Self {
        Window {
            lo: Point2::new(center.x - half, center.y - half),
            hi: Point2::new(center.x + half, center.y + half),
        }
    }

    pub fn width(&self) -> f64 {
        self.hi.x - self.lo.x
    }

    pub fn height(&self) -> f64 {
        self.hi.y - self.lo.y
    }

    pub fn diam(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.lo.x && p.x <= self.hi.x && p.y >= self.lo.y && p.y <= self.hi.y
    }
}

/// Geometric variants a complementary component can take. Circular arcs
/// are concentric around the origin, matching the generated domains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum Shape {
    Disk {
        center: Point2,
        radius: f64,
    },
    CircularArc {
        radius: f64,
        angle_start: f64,
        angle_end: f64,
        thickness: f64,
    },
    Segment {
        end_a: Point2,
        end_b: Point2,
        thickness: f64,
    },
    PointComp {
        location: Point2,
    },
    Polygon {
        vertices: Vec<Point2>,
    },
}

/// One complementary component with its enumeration id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub id: usize,
    #[serde(flatten)]
    pub shape: Shape,
}

impl Component {
    pub fn new(id: usize, shape: Shape) -> Self {
        Component { id, shape }
    }

    /// Euclidean diameter of the component.
    pub fn diameter(&self) -> f64 {
        match &self.shape {
            Shape::Disk { radius, .. } => 2.0 * radius,
            Shape::PointComp { .. } => 0.0,
            Shape::Segment { end_a, end_b, thickness } => end_a.dist(*end_b) + thickness,
            Shape::CircularArc { radius, angle_start, angle_end, thickness } => {
                let span = (angle_end - angle_start).min(std::f64::consts::PI);
                2.0 * radius * (span / 2.0).sin() + thickness
            }
            Shape::Polygon { vertices } => {
                let mut best = 0.0f64;
                for (i, a) in vertices.iter().enumerate() {
                    for b in &vertices[i + 1..] {
                        best = best.max(a.dist(*b));
                    }
                }
                best
            }
        }
    }

    /// Two-dimensional Lebesgue area.
    pub fn area(&self) -> f64 {
        match &self.shape {
            Shape::Disk { radius, .. } => std::f64::consts::PI * radius * radius,
            Shape::PointComp { .. } => 0.0,
            Shape::Segment { end_a, end_b, thickness } => {
                let len = end_a.dist(*end_b);
                len * thickness + std::f64::consts::PI * thickness * thickness / 4.0
            }
            Shape::CircularArc { radius, angle_start, angle_end, thickness } => {
                let len = radius * (angle_end - angle_start);
                len * thickness + std::f64::consts::PI * thickness * thickness / 4.0
            }
            Shape::Polygon { vertices } => polygon_area(vertices),
        }
    }

    /// Distance from `p` to the component (0 when `p` lies in it).
    pub fn distance_to(&self, p: Point2) -> f64 {
        match &self.shape {
            Shape::Disk { center, radius } => (p.dist(*center) - radius).max(0.0),
            Shape::PointComp { location } => p.dist(*location),
            Shape::Segment { end_a, end_b, thickness } => {
                (dist_point_segment(p, *end_a, *end_b) - thickness / 2.0).max(0.0)
            }
            Shape::CircularArc { radius, angle_start, angle_end, thickness } => {
                (dist_point_arc(p, *radius, *angle_start, *angle_end) - thickness / 2.0).max(0.0)
            }
            Shape::Polygon { vertices } => {
                if point_in_polygon(p, vertices) {
                    0.0
                } else {
                    polygon_edges(vertices)
                        .map(|(a, b)| dist_point_segment(p, a, b))
                        .fold(f64::INFINITY, f64::min)
                }
            }
        }
    }

    /// Largest distance from `p` to a point of the component.
    pub fn max_distance(&self, p: Point2) -> f64 {
        match &self.shape {
            Shape::Disk { center, radius } => p.dist(*center) + radius,
            Shape::PointComp { location } => p.dist(*location),
            Shape::Segment { end_a, end_b, thickness } => {
                p.dist(*end_a).max(p.dist(*end_b)) + thickness / 2.0
            }
            Shape::CircularArc { radius, angle_start, angle_end, thickness } => {
                // farthest circle point from p sits in the direction away from p
                let far = if p.norm() == 0.0 {
                    p.norm() + radius
                } else {
                    let phi = (-p.y).atan2(-p.x);
                    if angle_in_span(phi, *angle_start, *angle_end) {
                        p.norm() + radius
                    } else {
                        let a = Point2::new(radius * angle_start.cos(), radius * angle_start.sin());
                        let b = Point2::new(radius * angle_end.cos(), radius * angle_end.sin());
                        p.dist(a).max(p.dist(b))
                    }
                };
                far + thickness / 2.0
            }
            Shape::Polygon { vertices } => vertices
                .iter()
                .map(|v| p.dist(*v))
                .fold(0.0f64, f64::max),
        }
    }

    pub fn contains(&self, p: Point2) -> bool {
        self.distance_to(p) == 0.0
    }

    /// Bounding box, padded by half the thickness where applicable.
    pub fn bbox(&self) -> (Point2, Point2) {
        match &self.shape {
            Shape::Disk { center, radius } => (
                Point2::new(center.x - radius, center.y - radius),
                Point2::new(center.x + radius, center.y + radius),
            ),
            Shape::PointComp { location } => (*location, *location),
            Shape::Segment { end_a, end_b, thickness } => {
                let t = thickness / 2.0;
                (
                    Point2::new(end_a.x.min(end_b.x) - t, end_a.y.min(end_b.y) - t),
                    Point2::new(end_a.x.max(end_b.x) + t, end_a.y.max(end_b.y) + t),
                )
            }
            Shape::CircularArc { radius, angle_start, angle_end, thickness } => {
                let t = thickness / 2.0;
                let (mut lx, mut ly) = (f64::INFINITY, f64::INFINITY);
                let (mut hx, mut hy) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
                let mut push = |x: f64, y: f64| {
                    lx = lx.min(x);
                    ly = ly.min(y);
                    hx = hx.max(x);
                    hy = hy.max(y);
                };
                push(radius * angle_start.cos(), radius * angle_start.sin());
                push(radius * angle_end.cos(), radius * angle_end.sin());
                // axis extremes reached inside the span
                for k in -8i32..=8 {
                    let phi = k as f64 * std::f64::consts::FRAC_PI_2;
                    if angle_in_span(phi, *angle_start, *angle_end) {
                        push(radius * phi.cos(), radius * phi.sin());
                    }
                }
                (Point2::new(lx - t, ly - t), Point2::new(hx + t, hy + t))
            }
            Shape::Polygon { vertices } => {
                let (mut lx, mut ly) = (f64::INFINITY, f64::INFINITY);
                let (mut hx, mut hy) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
                for v in vertices {
                    lx = lx.min(v.x);
                    ly = ly.min(v.y);
                    hx = hx.max(v.x);
                    hy = hy.max(v.y);
                }
                (Point2::new(lx, ly), Point2::new(hx, hy))
            }
        }
    }

    /// Exact test against a closed axis-aligned rectangle.
    pub fn intersects_rect(&self, lo: Point2, hi: Point2) -> bool {
        // tolerate fp wobble at exact tangencies; over-marking by 1e-12 of
        // the feature scale is harmless for rasterization
        let eps = REL_TOL * (hi.x - lo.x).abs().max(1.0).max(self.diameter());
        let (blo, bhi) = self.bbox();
        if blo.x > hi.x + eps || bhi.x < lo.x - eps || blo.y > hi.y + eps || bhi.y < lo.y - eps {
            return false;
        }
        match &self.shape {
            Shape::Disk { center, radius } => dist_point_rect(*center, lo, hi) <= radius + eps,
            Shape::PointComp { location } => {
                location.x >= lo.x && location.x <= hi.x && location.y >= lo.y && location.y <= hi.y
            }
            Shape::Segment { end_a, end_b, thickness } => {
                dist_segment_rect(*end_a, *end_b, lo, hi) <= thickness / 2.0 + eps
            }
            Shape::CircularArc { radius, angle_start, angle_end, thickness } => {
                dist_arc_rect(*radius, *angle_start, *angle_end, lo, hi) <= thickness / 2.0 + eps
            }
            Shape::Polygon { vertices } => {
                if vertices.iter().any(|v| {
                    v.x >= lo.x && v.x <= hi.x && v.y >= lo.y && v.y <= hi.y
                }) {
                    return true;
                }
                let center = Point2::new((lo.x + hi.x) / 2.0, (lo.y + hi.y) / 2.0);
                if point_in_polygon(center, vertices) {
                    return true;
                }
                let corners = rect_corners(lo, hi);
                if corners.iter().any(|c| point_in_polygon(*c, vertices)) {
                    return true;
                }
                polygon_edges(vertices).any(|(a, b)| {
                    (0..4).any(|i| segments_intersect(a, b, corners[i], corners[(i + 1) % 4]))
                })
            }
        }
    }

    /// Radial distance interval `[min, max]` seen from `p`; connected
    /// components meet the circle of radius r around p iff r lies in it.
    pub fn radial_interval(&self, p: Point2) -> (f64, f64) {
        (self.distance_to(p), self.max_distance(p))
    }

    pub fn translated(&self, d: Point2) -> Component {
        let shape = match &self.shape {
            Shape::Disk { center, radius } => Shape::Disk { center: center.add(d), radius: *radius },
            Shape::PointComp { location } => Shape::PointComp { location: location.add(d) },
            Shape::Segment { end_a, end_b, thickness } => Shape::Segment {
                end_a: end_a.add(d),
                end_b: end_b.add(d),
                thickness: *thickness,
            },
            Shape::CircularArc { .. } => panic!("arcs are pinned to the origin"),
            Shape::Polygon { vertices } => Shape::Polygon {
                vertices: vertices.iter().map(|v| v.add(d)).collect(),
            },
        };
        Component { id: self.id, shape }
    }

    pub fn rotated(&self, angle: f64) -> Component {
        let shape = match &self.shape {
            Shape::Disk { center, radius } => Shape::Disk {
                center: center.rotated(angle),
                radius: *radius,
            },
            Shape::PointComp { location } => Shape::PointComp { location: location.rotated(angle) },
            Shape::Segment { end_a, end_b, thickness } => Shape::Segment {
                end_a: end_a.rotated(angle),
                end_b: end_b.rotated(angle),
                thickness: *thickness,
            },
            Shape::CircularArc { radius, angle_start, angle_end, thickness } => Shape::CircularArc {
                radius: *radius,
                angle_start: angle_start + angle,
                angle_end: angle_end + angle,
                thickness: *thickness,
            },
            Shape::Polygon { vertices } => Shape::Polygon {
                vertices: vertices.iter().map(|v| v.rotated(angle)).collect(),
            },
        };
        Component { id: self.id, shape }
    }

    pub fn scaled(&self, s: f64) -> Component {
        let shape = match &self.shape {
            Shape::Disk { center, radius } => Shape::Disk {
                center: center.scale(s),
                radius: radius * s,
            },
            Shape::PointComp { location } => Shape::PointComp { location: location.scale(s) },
            Shape::Segment { end_a, end_b, thickness } => Shape::Segment {
                end_a: end_a.scale(s),
                end_b: end_b.scale(s),
                thickness: thickness * s,
            },
            Shape::CircularArc { radius, angle_start, angle_end, thickness } => Shape::CircularArc {
                radius: radius * s,
                angle_start: *angle_start,
                angle_end: *angle_end,
                thickness: thickness * s,
            },
            Shape::Polygon { vertices } => Shape::Polygon {
                vertices: vertices.iter().map(|v| v.scale(s)).collect(),
            },
        };
        Component { id: self.id, shape }
    }

    /// Point on the boundary at normalized parameter `t` in [0, 1).
    pub fn boundary_point(&self, t: f64) -> Point2 {
        let t = t.rem_euclid(1.0);
        match &self.shape {
            Shape::Disk { center, radius } => {
                let phi = 2.0 * std::f64::consts::PI * t;
                Point2::new(center.x + radius * phi.cos(), center.y + radius * phi.sin())
            }
            Shape::PointComp { location } => *location,
            Shape::Segment { end_a, end_b, .. } => {
                // back and forth along the core curve
                let u = if t < 0.5 { 2.0 * t } else { 2.0 - 2.0 * t };
                Point2::new(
                    end_a.x + u * (end_b.x - end_a.x),
                    end_a.y + u * (end_b.y - end_a.y),
                )
            }
            Shape::CircularArc { radius, angle_start, angle_end, .. } => {
                let u = if t < 0.5 { 2.0 * t } else { 2.0 - 2.0 * t };
                let phi = angle_start + u * (angle_end - angle_start);
                Point2::new(radius * phi.cos(), radius * phi.sin())
            }
            Shape::Polygon { vertices } => {
                let n = vertices.len();
                let mut lens = Vec::with_capacity(n);
                let mut total = 0.0;
                for (a, b) in polygon_edges(vertices) {
                    let l = a.dist(b);
                    lens.push(l);
                    total += l;
                }
                let mut target = t * total;
                for (i, (a, b)) in polygon_edges(vertices).enumerate() {
                    if target <= lens[i] || i == n - 1 {
                        let u = if lens[i] > 0.0 { target / lens[i] } else { 0.0 };
                        return Point2::new(a.x + u * (b.x - a.x), a.y + u * (b.y - a.y));
                    }
                    target -= lens[i];
                }
                vertices[0]
            }
        }
    }

    /// Area of the intersection with the open ball B(center, r) via a
    /// deterministic subgrid count; disks use the exact lens formula.
    pub fn area_in_ball(&self, center: Point2, r: f64, grid: usize) -> f64 {
        if let Shape::Disk { center: c, radius } = &self.shape {
            return lens_area(*radius, r, c.dist(center));
        }
        let (blo, bhi) = self.bbox();
        let lo = Point2::new(blo.x.max(center.x - r), blo.y.max(center.y - r));
        let hi = Point2::new(bhi.x.min(center.x + r), bhi.y.min(center.y + r));
        if lo.x >= hi.x || lo.y >= hi.y {
            return 0.0;
        }
        let n = grid.max(8);
        let dx = (hi.x - lo.x) / n as f64;
        let dy = (hi.y - lo.y) / n as f64;
        let mut count = 0usize;
        for i in 0..n {
            let x = lo.x + (i as f64 + 0.5) * dx;
            for j in 0..n {
                let y = lo.y + (j as f64 + 0.5) * dy;
                let p = Point2::new(x, y);
                if p.dist(center) < r && self.contains(p) {
                    count += 1;
                }
            }
        }
        count as f64 * dx * dy
    }
}

/// True iff the component meets the circle `{ |x - center| = r }`,
/// up to 1e-12 relative tolerance.
pub fn sphere_intersects(c: &Component, center: Point2, r: f64) -> bool {
    debug_assert!(r > 0.0);
    let (dmin, dmax) = c.radial_interval(center);
    let tol = REL_TOL * r.max(dmax).max(1.0);
    dmin <= r + tol && r <= dmax + tol
}

/// Sampled lower estimate of the fatness constant
/// `sup { tau : area(c ∩ B(x0, r)) >= tau r^2 }` over boundary centers and
/// a log grid of admissible radii. Reports the sampled infimum.
pub fn tau_fatness(c: &Component, samples: usize, seed: u64) -> Result<f64, GeometryError> {
    let diam = c.diameter();
    if diam <= 0.0 {
        return Err(GeometryError::ZeroDiameter);
    }
    if c.area() == 0.0 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radii_per_center = 12usize;
    let n_centers = (samples / radii_per_center).clamp(8, 400);
    let phase: f64 = rng.gen();
    let mut tau = f64::INFINITY;
    let area_grid = ((samples as f64).sqrt() as usize).clamp(48, 160);
    for i in 0..n_centers {
        let t = (i as f64 + phase) / n_centers as f64;
        let x0 = c.boundary_point(t);
        let rmax = c.max_distance(x0);
        if rmax <= 0.0 {
            continue;
        }
        let rmin = rmax.min(diam / 128.0).max(rmax * 1e-3);
        let jitter: f64 = rng.gen_range(0.9..1.0);
        for k in 0..radii_per_center {
            let frac = k as f64 / (radii_per_center - 1) as f64;
            let r = rmin * (rmax * jitter / rmin).powf(frac);
            let a = c.area_in_ball(x0, r, area_grid);
            tau = tau.min(a / (r * r));
        }
    }
    Ok(if tau.is_finite() { tau } else { 0.0 })
}

// ---------------------------------------------------------------------------
// low-level primitives

pub(crate) fn polygon_edges(vs: &[Point2]) -> impl Iterator<Item = (Point2, Point2)> + '_ {
    (0..vs.len()).map(move |i| (vs[i], vs[(i + 1) % vs.len()]))
}

pub fn polygon_area(vs: &[Point2]) -> f64 {
    let mut s = 0.0;
    for (a, b) in polygon_edges(vs) {
        s += a.cross(b);
    }
    s.abs() / 2.0
}

pub fn point_in_polygon(p: Point2, vs: &[Point2]) -> bool {
    // ray cast to +x; boundary points count as inside via the edge distance
    let mut inside = false;
    for (a, b) in polygon_edges(vs) {
        if dist_point_segment(p, a, b) < 1e-14 {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let xin = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < xin {
                inside = !inside;
            }
        }
    }
    inside
}

/// Distance from `p` to the boundary polyline of a polygon.
pub fn polygon_edges_distance(p: Point2, vs: &[Point2]) -> f64 {
    polygon_edges(vs)
        .map(|(a, b)| dist_point_segment(p, a, b))
        .fold(f64::INFINITY, f64::min)
}

pub fn dist_point_segment(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(Point2::new(a.x + t * ab.x, a.y + t * ab.y))
}

pub fn segments_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let d1 = d.sub(c).cross(a.sub(c));
    let d2 = d.sub(c).cross(b.sub(c));
    let d3 = b.sub(a).cross(c.sub(a));
    let d4 = b.sub(a).cross(d.sub(a));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |p: Point2, q: Point2, r: Point2| {
        q.sub(p).cross(r.sub(p)) == 0.0
            && r.x >= p.x.min(q.x)
            && r.x <= p.x.max(q.x)
            && r.y >= p.y.min(q.y)
            && r.y <= p.y.max(q.y)
    };
    on(a, b, c) || on(a, b, d) || on(c, d, a) || on(c, d, b)
}

pub fn dist_segment_segment(a: Point2, b: Point2, c: Point2, d: Point2) -> f64 {
    if segments_intersect(a, b, c, d) {
        return 0.0;
    }
    dist_point_segment(a, c, d)
        .min(dist_point_segment(b, c, d))
        .min(dist_point_segment(c, a, b))
        .min(dist_point_segment(d, a, b))
}

pub fn dist_point_rect(p: Point2, lo: Point2, hi: Point2) -> f64 {
    let dx = (lo.x - p.x).max(0.0).max(p.x - hi.x);
    let dy = (lo.y - p.y).max(0.0).max(p.y - hi.y);
    dx.hypot(dy)
}

fn rect_corners(lo: Point2, hi: Point2) -> [Point2; 4] {
    [
        lo,
        Point2::new(hi.x, lo.y),
        hi,
        Point2::new(lo.x, hi.y),
    ]
}

fn point_in_rect(p: Point2, lo: Point2, hi: Point2) -> bool {
    p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y
}

pub fn dist_segment_rect(a: Point2, b: Point2, lo: Point2, hi: Point2) -> f64 {
    if point_in_rect(a, lo, hi) || point_in_rect(b, lo, hi) {
        return 0.0;
    }
    let corners = rect_corners(lo, hi);
    let mut best = f64::INFINITY;
    for i in 0..4 {
        best = best.min(dist_segment_segment(a, b, corners[i], corners[(i + 1) % 4]));
    }
    best
}

/// Normalize `phi` into `[start, start + 2*pi)` and test span membership.
pub fn angle_in_span(phi: f64, start: f64, end: f64) -> bool {
    let tau = 2.0 * std::f64::consts::PI;
    let mut a = (phi - start).rem_euclid(tau);
    if a > tau - 1e-15 {
        a = 0.0;
    }
    a <= end - start
}

/// Distance from a point to the bare arc of radius `r` around the origin.
pub fn dist_point_arc(p: Point2, r: f64, start: f64, end: f64) -> f64 {
    let phi = p.y.atan2(p.x);
    if angle_in_span(phi, start, end) {
        (p.norm() - r).abs()
    } else {
        let a = Point2::new(r * start.cos(), r * start.sin());
        let b = Point2::new(r * end.cos(), r * end.sin());
        p.dist(a).min(p.dist(b))
    }
}

fn arc_point(r: f64, phi: f64) -> Point2 {
    Point2::new(r * phi.cos(), r * phi.sin())
}

/// Whether the bare arc crosses the segment (circle-segment intersection
/// restricted to the angular span).
fn arc_segment_intersect(r: f64, start: f64, end: f64, a: Point2, b: Point2) -> bool {
    let d = b.sub(a);
    let fa = a.dot(a) - r * r;
    let qa = d.dot(d);
    let qb = 2.0 * a.dot(d);
    let disc = qb * qb - 4.0 * qa * fa;
    if disc < 0.0 || qa == 0.0 {
        return false;
    }
    let sq = disc.sqrt();
    for t in [(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)] {
        if (0.0..=1.0).contains(&t) {
            let p = Point2::new(a.x + t * d.x, a.y + t * d.y);
            if angle_in_span(p.y.atan2(p.x), start, end) {
                return true;
            }
        }
    }
    false
}

pub fn dist_arc_rect(r: f64, start: f64, end: f64, lo: Point2, hi: Point2) -> f64 {
    let ea = arc_point(r, start);
    let eb = arc_point(r, end);
    if point_in_rect(ea, lo, hi) || point_in_rect(eb, lo, hi) {
        return 0.0;
    }
    let corners = rect_corners(lo, hi);
    for i in 0..4 {
        if arc_segment_intersect(r, start, end, corners[i], corners[(i + 1) % 4]) {
            return 0.0;
        }
    }
    let mut best = dist_point_rect(ea, lo, hi).min(dist_point_rect(eb, lo, hi));
    for c in corners {
        best = best.min(dist_point_arc(c, r, start, end));
    }
    // perpendicular contact through the closest rectangle point to the circle center
    let q = Point2::new(0.0f64.clamp(lo.x, hi.x), 0.0f64.clamp(lo.y, hi.y));
    if q.norm() > 0.0 {
        let phi = q.y.atan2(q.x);
        if angle_in_span(phi, start, end) {
            best = best.min((q.norm() - r).abs());
        }
    }
    best
}

/// Intersection area of two disks (radius `r1` at distance `d` from a
/// disk of radius `r2`).
pub fn lens_area(r1: f64, r2: f64, d: f64) -> f64 {
    if d >= r1 + r2 {
        return 0.0;
    }
    let rmin = r1.min(r2);
    if d <= (r1 - r2).abs() {
        return std::f64::consts::PI * rmin * rmin;
    }
    let alpha = ((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1)).clamp(-1.0, 1.0);
    let beta = ((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2)).clamp(-1.0, 1.0);
    let tri = ((-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2)).max(0.0);
    r1 * r1 * alpha.acos() + r2 * r2 * beta.acos() - 0.5 * tri.sqrt()
}

/// Validate shape invariants (finite coordinates, positive radii, simple
/// polygon boundary).
pub fn validate_shape(shape: &Shape) -> Result<(), String> {
    let finite = |p: &Point2| p.x.is_finite() && p.y.is_finite();
    match shape {
        Shape::Disk { center, radius } => {
            if !finite(center) || !radius.is_finite() || *radius <= 0.0 {
                return Err("disk needs finite center and radius > 0".into());
            }
        }
        Shape::PointComp { location } => {
            if !finite(location) {
                return Err("point component needs finite coordinates".into());
            }
        }
        Shape::Segment { end_a, end_b, thickness } => {
            if !finite(end_a) || !finite(end_b) || *thickness < 0.0 {
                return Err("segment needs finite endpoints and thickness >= 0".into());
            }
        }
        Shape::CircularArc { radius, angle_start, angle_end, thickness } => {
            if *radius <= 0.0 || !(angle_start < angle_end) || *thickness < 0.0 {
                return Err("arc needs radius > 0 and angle_start < angle_end".into());
            }
        }
        Shape::Polygon { vertices } => {
            if vertices.len() < 3 {
                return Err("polygon needs at least 3 vertices".into());
            }
            if !vertices.iter().all(finite) {
                return Err("polygon vertices must be finite".into());
            }
            if !polygon_is_simple(vertices) {
                return Err("polygon boundary must be simple".into());
            }
        }
    }
    Ok(())
}

pub fn polygon_is_simple(vs: &[Point2]) -> bool {
    let n = vs.len();
    for i in 0..n {
        let (a, b) = (vs[i], vs[(i + 1) % n]);
        for j in i + 1..n {
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let (c, d) = (vs[j], vs[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// Distance between two components, zero when they touch.
pub fn component_distance(a: &Component, b: &Component) -> f64 {
    // coarse but sound: sample boundary of the smaller set against the
    // exact point-to-set distance of the other, refined near the minimum
    let (small, big) = if a.diameter() <= b.diameter() { (a, b) } else { (b, a) };
    if matches!(small.shape, Shape::PointComp { .. }) {
        if let Shape::PointComp { location } = small.shape {
            return big.distance_to(location);
        }
    }
    let coarse = 256;
    let mut best = f64::INFINITY;
    let mut best_t = 0.0;
    for i in 0..coarse {
        let t = i as f64 / coarse as f64;
        let d = big.distance_to(small.boundary_point(t));
        if d < best {
            best = d;
            best_t = t;
        }
    }
    let mut lo = best_t - 1.5 / coarse as f64;
    let mut hi = best_t + 1.5 / coarse as f64;
    for _ in 0..40 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        let d1 = big.distance_to(small.boundary_point(m1));
        let d2 = big.distance_to(small.boundary_point(m2));
        if d1 < d2 {
            hi = m2;
        } else {
            lo = m1;
        }
        best = best.min(d1.min(d2));
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn disk(r: f64) -> Component {
        Component::new(0, Shape::Disk { center: Point2::new(0.0, 0.0), radius: r })
    }

    fn unit_square() -> Component {
        Component::new(
            0,
            Shape::Polygon {
                vertices: vec![
                    Point2::new(0.0, 0.0),
                    Point2::new(1.0, 0.0),
                    Point2::new(1.0, 1.0),
                    Point2::new(0.0, 1.0),
                ],
            },
        )
    }

    #[test]
    fn diameter_basics() {
        assert_relative_eq!(disk(1.0).diameter(), 2.0);
        let p = Component::new(0, Shape::PointComp { location: Point2::new(0.3, 0.4) });
        assert_eq!(p.diameter(), 0.0);
    }

    #[test]
    fn half_circle_arc_diameter_matches_dense_sampling() {
        let arc = Component::new(
            0,
            Shape::CircularArc {
                radius: 2.0,
                angle_start: 0.0,
                angle_end: std::f64::consts::PI,
                thickness: 0.0,
            },
        );
        assert_relative_eq!(arc.diameter(), 4.0, max_relative = 1e-12);
        // oracle: max pairwise distance over dense angular samples
        let n = 2000;
        let pts: Vec<Point2> = (0..=n)
            .map(|i| {
                let phi = std::f64::consts::PI * i as f64 / n as f64;
                Point2::new(2.0 * phi.cos(), 2.0 * phi.sin())
            })
            .collect();
        let mut best = 0.0f64;
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                best = best.max(a.dist(*b));
            }
        }
        assert_relative_eq!(arc.diameter(), best, max_relative = 1e-6);
    }

    #[test]
    fn quarter_arc_diameter_is_chord() {
        let arc = Component::new(
            0,
            Shape::CircularArc {
                radius: 2.0,
                angle_start: 0.0,
                angle_end: std::f64::consts::FRAC_PI_2,
                thickness: 0.0,
            },
        );
        let chord = 2.0 * 2.0 * (std::f64::consts::FRAC_PI_4).sin();
        assert_relative_eq!(arc.diameter(), chord, max_relative = 1e-12);
    }

    #[test]
    fn area_basics() {
        assert_relative_eq!(disk(1.0).area(), std::f64::consts::PI);
        let seg = Component::new(
            0,
            Shape::Segment {
                end_a: Point2::new(0.0, 0.0),
                end_b: Point2::new(1.0, 0.0),
                thickness: 0.0,
            },
        );
        assert_eq!(seg.area(), 0.0);
    }

    #[test]
    fn unit_square_area_shoelace_vs_grid() {
        let sq = unit_square();
        assert_relative_eq!(sq.area(), 1.0, max_relative = 1e-12);
        // grid-count oracle over the bounding area
        let a = sq.area_in_ball(Point2::new(0.5, 0.5), 2.0, 400);
        assert_relative_eq!(a, 1.0, max_relative = 5e-3);
    }

    #[test]
    fn sphere_intersects_disk_cases() {
        let d = disk(1.0);
        assert!(sphere_intersects(&d, Point2::new(0.0, 0.0), 0.5));
        assert!(!sphere_intersects(&d, Point2::new(0.0, 0.0), 3.0));
    }

    #[test]
    fn sphere_intersects_arc_polar_containment() {
        let arc = Component::new(
            0,
            Shape::CircularArc {
                radius: 2.0,
                angle_start: 0.0,
                angle_end: std::f64::consts::FRAC_PI_2,
                thickness: 0.0,
            },
        );
        assert!(sphere_intersects(&arc, Point2::new(0.0, 0.0), 2.0));
        assert!(!sphere_intersects(&arc, Point2::new(0.0, 0.0), 1.0));
    }

    #[test]
    fn tau_fatness_disk_bounded_by_lens_minimum() {
        let d = disk(1.0);
        let tau = tau_fatness(&d, 10_000, 7).unwrap();
        assert!(tau > 0.0 && tau <= std::f64::consts::PI, "tau = {tau}");
        // oracle: worst case over boundary centers in closed form; the
        // infimum over admissible radii is attained near r = 2R
        let mut oracle = f64::INFINITY;
        for k in 0..400 {
            let r = 2.0 * (k as f64 + 1.0) / 400.0;
            oracle = oracle.min(lens_area(1.0, r, 1.0) / (r * r));
        }
        assert!(tau >= oracle * 0.95, "tau {tau} vs oracle {oracle}");
        assert!(tau <= oracle * 1.25, "tau {tau} vs oracle {oracle}");
    }

    #[test]
    fn tau_fatness_zero_area_sets() {
        let seg = Component::new(
            0,
            Shape::Segment {
                end_a: Point2::new(0.0, 0.0),
                end_b: Point2::new(1.0, 0.0),
                thickness: 0.0,
            },
        );
        assert_eq!(tau_fatness(&seg, 1000, 1).unwrap(), 0.0);
        let p = Component::new(0, Shape::PointComp { location: Point2::new(0.0, 0.0) });
        assert_eq!(tau_fatness(&p, 1000, 1), Err(GeometryError::ZeroDiameter));
    }

    #[test]
    fn tau_fatness_square_reproducible_across_seeds() {
        let sq = unit_square();
        let a = tau_fatness(&sq, 4000, 1).unwrap();
        let b = tau_fatness(&sq, 4000, 99).unwrap();
        assert!(a > 0.0);
        assert!((a - b).abs() / a < 0.05, "{a} vs {b}");
        // brute-force oracle on a dense (x0, r) grid
        let mut oracle = f64::INFINITY;
        for i in 0..60 {
            let x0 = sq.boundary_point(i as f64 / 60.0);
            let rmax = sq.max_distance(x0);
            for k in 1..=24 {
                let r = rmax * k as f64 / 24.0;
                oracle = oracle.min(sq.area_in_ball(x0, r, 96) / (r * r));
            }
        }
        assert!((a - oracle).abs() / oracle < 0.15, "est {a} oracle {oracle}");
    }

    #[test]
    fn diameter_rigid_motion_invariance() {
        let comps = vec![
            disk(1.3),
            unit_square(),
            Component::new(
                0,
                Shape::Segment {
                    end_a: Point2::new(-0.4, 0.2),
                    end_b: Point2::new(1.0, 1.7),
                    thickness: 0.1,
                },
            ),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for c in comps {
            let d0 = c.diameter();
            for _ in 0..20 {
                let angle = rng.gen_range(0.0..std::f64::consts::TAU);
                let shift = Point2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
                let moved = c.rotated(angle).translated(shift);
                assert!((moved.diameter() - d0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn area_scaling_quadratic() {
        let comps = vec![
            disk(0.8),
            unit_square(),
            Component::new(
                0,
                Shape::CircularArc {
                    radius: 1.5,
                    angle_start: 0.3,
                    angle_end: 2.0,
                    thickness: 0.05,
                },
            ),
        ];
        for c in comps {
            let a0 = c.area();
            for s in [0.1, 0.37, 2.0, 10.0] {
                let a = c.scaled(s).area();
                assert_relative_eq!(a, s * s * a0, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn tau_fatness_disk_scale_invariant() {
        let a = tau_fatness(&disk(1.0), 6000, 3).unwrap();
        let b = tau_fatness(&disk(7.0), 6000, 3).unwrap();
        assert!((a - b).abs() / a < 0.05, "{a} vs {b}");
    }

    #[test]
    fn sphere_intersects_monotone_consistent() {
        // if no r in [r1, r2] meets the set, the closed annulus misses it
        let d = Component::new(0, Shape::Disk { center: Point2::new(3.0, 0.0), radius: 0.5 });
        let x0 = Point2::new(0.0, 0.0);
        let (r1, r2) = (0.5, 2.0);
        let mut any = false;
        for k in 0..=64 {
            let r = r1 + (r2 - r1) * k as f64 / 64.0;
            any |= sphere_intersects(&d, x0, r);
        }
        assert!(!any);
        for k in 0..500 {
            let t = k as f64 / 500.0;
            let p = d.boundary_point(t);
            let rho = p.dist(x0);
            assert!(!(rho >= r1 && rho <= r2));
        }
    }

    #[test]
    fn rect_intersection_exactness() {
        let d = disk(1.0);
        assert!(d.intersects_rect(Point2::new(0.9, -0.1), Point2::new(1.5, 0.1)));
        assert!(!d.intersects_rect(Point2::new(1.01, 1.01), Point2::new(2.0, 2.0)));
        let arc = Component::new(
            0,
            Shape::CircularArc {
                radius: 1.0,
                angle_start: 0.0,
                angle_end: std::f64::consts::FRAC_PI_2,
                thickness: 0.0,
            },
        );
        // rectangle straddling the circle at 45 degrees
        assert!(arc.intersects_rect(Point2::new(0.6, 0.6), Point2::new(0.8, 0.8)));
        // same rectangle but the arc span excludes it
        let arc2 = Component::new(
            0,
            Shape::CircularArc {
                radius: 1.0,
                angle_start: 3.0,
                angle_end: 4.0,
                thickness: 0.0,
            },
        );
        assert!(!arc2.intersects_rect(Point2::new(0.6, 0.6), Point2::new(0.8, 0.8)));
    }
}
