//! Telescoping surfaces in the plane: homotopies that shrink a domain's
//! boundary onto an interior point, and sampled checks of the properties a
//! valid family of surfaces must have.
//!
//! Every homotopy takes a boundary parameter `s ∈ [0, 1)` (angle `2πs` on the
//! unit circle, normalised arc length on a polygon) and a level `λ ∈ [0, 1]`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sampling::NormalStream;

pub type Point = [f64; 2];

/// Points this close to an edge count as inside.
pub const ON_EDGE_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-6;
pub const COLLAPSE_TOL: f64 = 1e-12;
pub const COVERAGE_THRESHOLD: f64 = 0.99;
pub const MIN_SAMPLES: usize = 8;

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn lerp(a: Point, b: Point, w: f64) -> Point {
    [a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1])]
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    let (u, v) = (sub(a, o), sub(b, o));
    u[0] * v[1] - u[1] * v[0]
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    if len2 == 0.0 {
        return dist(p, a);
    }
    let ap = sub(p, a);
    let w = ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0);
    dist(p, lerp(a, b, w))
}

fn closed_edges(poly: &[Point]) -> impl Iterator<Item = (Point, Point)> + '_ {
    (0..poly.len()).map(move |i| (poly[i], poly[(i + 1) % poly.len()]))
}

/// Distance from `p` to the closed polyline through `poly`.
pub fn polyline_distance(poly: &[Point], p: Point) -> f64 {
    match poly.len() {
        0 => f64::INFINITY,
        1 => dist(p, poly[0]),
        _ => closed_edges(poly).map(|(a, b)| segment_distance(p, a, b)).fold(f64::INFINITY, f64::min),
    }
}

/// Closed-region membership by ray casting; points within `tol` of an edge are inside.
pub fn polygon_contains(poly: &[Point], p: Point, tol: f64) -> bool {
    if polyline_distance(poly, p) <= tol {
        return true;
    }
    if poly.len() < 3 {
        return false;
    }
    let mut inside = false;
    for (a, b) in closed_edges(poly) {
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

/// Closed segments `ab` and `cd` share at least one point.
fn segments_meet(a: Point, b: Point, c: Point, d: Point) -> bool {
    let (d1, d2) = (cross(c, d, a), cross(c, d, b));
    let (d3, d4) = (cross(a, b, c), cross(a, b, d));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// True when no two non-adjacent edges of the closed polyline meet.
/// Zero-length edges are dropped first.
pub fn is_simple(poly: &[Point]) -> bool {
    let mut pts: Vec<Point> = Vec::with_capacity(poly.len());
    for &p in poly {
        if pts.last() != Some(&p) {
            pts.push(p);
        }
    }
    while pts.len() > 1 && pts.first() == pts.last() {
        pts.pop();
    }
    let n = pts.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_meet(a, b, pts[j], pts[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

fn signed_area(poly: &[Point]) -> f64 {
    0.5 * closed_edges(poly).map(|(a, b)| a[0] * b[1] - b[0] * a[1]).sum::<f64>()
}

/// A simple polygon stored counterclockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarDomain {
    vertices: Vec<Point>,
    /// Arc length from vertex 0 to each vertex, with the perimeter last.
    arc: Vec<f64>,
}

impl PlanarDomain {
    /// Clockwise input is reversed; a repeated closing vertex is dropped.
    pub fn new(mut vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(Error::Invalid(format!("polygon needs at least 3 vertices, got {}", vertices.len())));
        }
        if vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("polygon has non-finite vertices".into()));
        }
        if !is_simple(&vertices) {
            return Err(Error::Invalid("polygon is not simple".into()));
        }
        if signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        let mut arc = vec![0.0];
        for (a, b) in closed_edges(&vertices) {
            arc.push(arc.last().copied().unwrap_or(0.0) + dist(a, b));
        }
        Ok(Self { vertices, arc })
    }

    /// Regular `n`-gon inscribed in the unit circle with a vertex at angle `2πk/n`.
    pub fn unit_disc(n: usize) -> Result<Self> {
        let step = std::f64::consts::TAU / n as f64;
        Self::new((0..n).map(|k| [(k as f64 * step).cos(), (k as f64 * step).sin()]).collect())
    }

    pub fn unit_square() -> Self {
        Self::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).expect("square is simple")
    }

    /// `[0,2]×[0,1] ∪ [0,1]×[0,2]`.
    pub fn l_shape() -> Self {
        Self::new(vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]])
            .expect("L is simple")
    }

    /// `[0,3]×[0,3]` with the slot `(1,2)×(1,3]` removed.
    pub fn u_shape() -> Self {
        Self::new(vec![
            [0.0, 0.0],
            [3.0, 0.0],
            [3.0, 3.0],
            [2.0, 3.0],
            [2.0, 1.0],
            [1.0, 1.0],
            [1.0, 3.0],
            [0.0, 3.0],
        ])
        .expect("U is simple")
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn perimeter(&self) -> f64 {
        self.arc[self.vertices.len()]
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn centroid(&self) -> Point {
        let a = self.area();
        let (mut cx, mut cy) = (0.0, 0.0);
        for (p, q) in closed_edges(&self.vertices) {
            let w = p[0] * q[1] - q[0] * p[1];
            cx += (p[0] + q[0]) * w;
            cy += (p[1] + q[1]) * w;
        }
        [cx / (6.0 * a), cy / (6.0 * a)]
    }

    pub fn contains(&self, p: Point) -> bool {
        polygon_contains(&self.vertices, p, ON_EDGE_TOL)
    }

    pub fn boundary_distance(&self, p: Point) -> f64 {
        polyline_distance(&self.vertices, p)
    }

    /// Inside and farther than [`ON_EDGE_TOL`] from every edge.
    pub fn strictly_contains(&self, p: Point) -> bool {
        self.contains(p) && self.boundary_distance(p) > ON_EDGE_TOL
    }

    /// Boundary point at normalised arc length `s` (taken mod 1).
    pub fn boundary_point(&self, s: f64) -> Point {
        let target = s.rem_euclid(1.0) * self.perimeter();
        let n = self.vertices.len();
        let edge = self.arc[1..].partition_point(|&a| a <= target).min(n - 1);
        let len = self.arc[edge + 1] - self.arc[edge];
        let w = if len > 0.0 { (target - self.arc[edge]) / len } else { 0.0 };
        lerp(self.vertices[edge], self.vertices[(edge + 1) % n], w)
    }

    /// Normalised arc-length parameters of the vertices.
    pub fn vertex_parameters(&self) -> Vec<f64> {
        let p = self.perimeter();
        self.arc[..self.vertices.len()].iter().map(|a| a / p).collect()
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        (lo, hi)
    }

    /// `count` points uniform in the domain, by rejection from the bounding box.
    pub fn sample_interior(&self, count: usize, seed: u64) -> Vec<Point> {
        let (lo, hi) = self.bounding_box();
        let mut rng = NormalStream::new(seed);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let p = [lo[0] + (hi[0] - lo[0]) * rng.uniform(), lo[1] + (hi[1] - lo[1]) * rng.uniform()];
            if self.contains(p) {
                out.push(p);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Boundary {
    UnitCircle,
    Polygon(PlanarDomain),
}

impl Boundary {
    pub fn point(&self, s: f64) -> Point {
        match self {
            Boundary::UnitCircle => {
                let angle = std::f64::consts::TAU * s;
                [angle.cos(), angle.sin()]
            }
            Boundary::Polygon(d) => d.boundary_point(s),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Boundary::UnitCircle => Vec::new(),
            Boundary::Polygon(d) => d.vertex_parameters(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HomotopyKind {
    Radial,
    Affine,
    Ellipse,
    Tabulated,
}

impl HomotopyKind {
    pub fn name(self) -> &'static str {
        match self {
            HomotopyKind::Radial => "radial",
            HomotopyKind::Affine => "affine",
            HomotopyKind::Ellipse => "ellipse",
            HomotopyKind::Tabulated => "tabulated",
        }
    }
}

type Semiaxis = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Shape {
    Radial,
    Affine { boundary: Boundary, center: Point },
    Ellipse { semi_x: Semiaxis, semi_y: Semiaxis },
    Tabulated { levels: Vec<f64>, rows: Vec<Vec<Point>> },
}

/// A deformation `h(s, λ)` from a boundary curve at `λ = 0` to a point at `λ = 1`.
#[derive(Clone)]
pub struct HomotopySpec {
    shape: Shape,
}

impl std::fmt::Debug for HomotopySpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HomotopySpec").field("kind", &self.kind()).field("center", &self.center()).finish()
    }
}

impl HomotopySpec {
    /// Concentric circles `(1−λ)(cos θ, sin θ)`.
    pub fn radial() -> Self {
        Self { shape: Shape::Radial }
    }

    /// `(1−λ)t + λc` for boundary points `t`.
    pub fn affine(boundary: Boundary, center: Point) -> Self {
        Self { shape: Shape::Affine { boundary, center } }
    }

    /// Circles of radius `1−λ` whose centres slide from the origin to `center`.
    pub fn shifted_circle(center: Point) -> Self {
        Self::affine(Boundary::UnitCircle, center)
    }

    /// `(a(λ) cos θ, b(λ) sin θ)`.
    pub fn ellipse(
        semi_x: impl Fn(f64) -> f64 + Send + Sync + 'static,
        semi_y: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { shape: Shape::Ellipse { semi_x: Arc::new(semi_x), semi_y: Arc::new(semi_y) } }
    }

    /// Surfaces given as equal-length rows of samples at increasing levels
    /// from 0 to 1, interpolated bilinearly (periodically in `s`).
    pub fn tabulated(levels: Vec<f64>, rows: Vec<Vec<Point>>) -> Result<Self> {
        if levels.len() < 2 || levels.len() != rows.len() {
            return Err(Error::Invalid(format!(
                "tabulated homotopy needs matching levels and rows (≥ 2), got {} and {}",
                levels.len(),
                rows.len()
            )));
        }
        if levels[0] != 0.0 || levels[levels.len() - 1] != 1.0 || levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("tabulated levels must increase from 0 to 1".into()));
        }
        let width = rows[0].len();
        if width < 2 || rows.iter().any(|r| r.len() != width) {
            return Err(Error::Invalid("tabulated rows must share a length of at least 2".into()));
        }
        Ok(Self { shape: Shape::Tabulated { levels, rows } })
    }

    pub fn kind(&self) -> HomotopyKind {
        match self.shape {
            Shape::Radial => HomotopyKind::Radial,
            Shape::Affine { .. } => HomotopyKind::Affine,
            Shape::Ellipse { .. } => HomotopyKind::Ellipse,
            Shape::Tabulated { .. } => HomotopyKind::Tabulated,
        }
    }

    pub fn evaluate(&self, s: f64, lambda: f64) -> Point {
        match &self.shape {
            Shape::Radial => {
                let p = Boundary::UnitCircle.point(s);
                [(1.0 - lambda) * p[0], (1.0 - lambda) * p[1]]
            }
            Shape::Affine { boundary, center } => lerp(boundary.point(s), *center, lambda),
            Shape::Ellipse { semi_x, semi_y } => {
                let p = Boundary::UnitCircle.point(s);
                [semi_x(lambda) * p[0], semi_y(lambda) * p[1]]
            }
            Shape::Tabulated { levels, rows } => {
                let j = levels[1..].partition_point(|&l| l < lambda).min(levels.len() - 2);
                let w = ((lambda - levels[j]) / (levels[j + 1] - levels[j])).clamp(0.0, 1.0);
                lerp(interpolate_row(&rows[j], s), interpolate_row(&rows[j + 1], s), w)
            }
        }
    }

    /// Image of the boundary at `λ = 1`, evaluated at `s = 0`.
    pub fn center(&self) -> Point {
        self.evaluate(0.0, 1.0)
    }

    fn breakpoints(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Affine { boundary, .. } => boundary.breakpoints(),
            _ => Vec::new(),
        }
    }
}

fn interpolate_row(row: &[Point], s: f64) -> Point {
    let n = row.len();
    let x = s.rem_euclid(1.0) * n as f64;
    let i = (x.floor() as usize).min(n - 1);
    lerp(row[i], row[(i + 1) % n], x - i as f64)
}

fn sample_parameters(h: &HomotopySpec, n: usize) -> Vec<f64> {
    let mut params: Vec<f64> = (0..n).map(|k| k as f64 / n as f64).collect();
    params.extend(h.breakpoints());
    params.sort_by(f64::total_cmp);
    params.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    params
}

/// Ordered samples of the surface at level `λ`: the parameters `k/n` plus,
/// for polygon boundaries, every vertex parameter.
pub fn surface(h: &HomotopySpec, lambda: f64, n_samples: usize) -> Result<Vec<Point>> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Invalid(format!("level {lambda} outside [0, 1]")));
    }
    if n_samples < MIN_SAMPLES {
        return Err(Error::Invalid(format!("need at least {MIN_SAMPLES} samples, got {n_samples}")));
    }
    Ok(sample_parameters(h, n_samples).into_iter().map(|s| h.evaluate(s, lambda)).collect())
}

/// `n` evenly spaced values from 0 to 1 inclusive.
pub fn uniform_levels(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|j| j as f64 / (n - 1) as f64).collect(),
    }
}

pub const STAR_BOUNDARY_SAMPLES: usize = 256;
pub const STAR_LEVELS: usize = 64;

/// Whether `(1−λ)t + λc` stays in the closed domain for every boundary
/// parameter in `boundary_grid` and level in `lambda_grid`.
pub fn check_star_center(domain: &PlanarDomain, c: Point, lambda_grid: &[f64], boundary_grid: &[f64]) -> bool {
    if lambda_grid.is_empty() || boundary_grid.is_empty() || !domain.contains(c) {
        return false;
    }
    boundary_grid.iter().all(|&s| {
        let t = domain.boundary_point(s);
        lambda_grid.iter().all(|&l| domain.contains(lerp(t, c, l)))
    })
}

/// [`check_star_center`] on the default 256 boundary × 64 level grid.
pub fn check_star_center_default(domain: &PlanarDomain, c: Point) -> bool {
    let boundary: Vec<f64> = (0..STAR_BOUNDARY_SAMPLES).map(|k| k as f64 / STAR_BOUNDARY_SAMPLES as f64).collect();
    check_star_center(domain, c, &uniform_levels(STAR_LEVELS), &boundary)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationGrid {
    pub boundary_samples: usize,
    pub levels: usize,
    pub coverage_points: usize,
    pub seed: u64,
}

impl Default for ValidationGrid {
    fn default() -> Self {
        Self { boundary_samples: 256, levels: 64, coverage_points: 10_000, seed: 0 }
    }
}

impl ValidationGrid {
    pub fn coverage_epsilon(&self) -> f64 {
        2.0 / (self.boundary_samples as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyVerdict {
    pub name: &'static str,
    pub passed: bool,
    /// Set when the verdict rests on necessary conditions only.
    pub qualifier: Option<&'static str>,
    pub metrics: Vec<(&'static str, f64)>,
}

impl PropertyVerdict {
    pub fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.iter().find(|(k, _)| *k == key).map(|&(_, v)| v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomotopyReport {
    pub grid: ValidationGrid,
    pub levels: Vec<f64>,
    pub properties: Vec<PropertyVerdict>,
    /// `nested[i][j]` for `i < j`: surface `j` lies inside surface `i`.
    pub nested: Vec<Vec<bool>>,
    pub nesting_transitive: bool,
}

impl HomotopyReport {
    pub fn property(&self, name: &str) -> Option<&PropertyVerdict> {
        self.properties.iter().find(|p| p.name == name)
    }

    pub fn passed(&self, name: &str) -> bool {
        self.property(name).is_some_and(|p| p.passed)
    }

    pub fn all_passed(&self) -> bool {
        self.properties.iter().all(|p| p.passed)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "setting.boundary_samples={}", self.grid.boundary_samples);
        let _ = writeln!(out, "setting.levels={}", self.grid.levels);
        let _ = writeln!(out, "setting.coverage_points={}", self.grid.coverage_points);
        let _ = writeln!(out, "setting.coverage_epsilon={}", self.grid.coverage_epsilon());
        let _ = writeln!(out, "setting.seed={}", self.grid.seed);
        for p in &self.properties {
            let status = if p.passed { "pass" } else { "fail" };
            let _ = write!(out, "property={} status={status}", p.name);
            if let Some(q) = p.qualifier {
                let _ = write!(out, " note=\"{q}\"");
            }
            for (k, v) in &p.metrics {
                let _ = write!(out, " {k}={v:e}");
            }
            out.push('\n');
        }
        let _ = writeln!(out, "nesting_transitive={}", self.nesting_transitive);
        out
    }
}

/// Two-sided Hausdorff distance between closed polylines, with each edge
/// probed at `refine` interior points as well as its ends.
fn hausdorff(a: &[Point], b: &[Point], refine: usize) -> f64 {
    let one_way = |from: &[Point], to: &[Point]| {
        let mut worst = 0.0f64;
        for (p, q) in closed_edges(from) {
            for k in 0..=refine {
                let probe = lerp(p, q, k as f64 / (refine + 1) as f64);
                worst = worst.max(polyline_distance(to, probe));
            }
        }
        worst
    };
    one_way(a, b).max(one_way(b, a))
}

/// Segments of all surfaces bucketed on a square grid of side `cell`,
/// clipped to the cells around the probe region so that runaway surfaces
/// cannot blow up the index.
struct SegmentGrid {
    cell: f64,
    lo: (i64, i64),
    hi: (i64, i64),
    buckets: HashMap<(i64, i64), Vec<(Point, Point)>>,
}

impl SegmentGrid {
    fn new(cell: f64, (lo, hi): (Point, Point)) -> Self {
        let key = |v: f64| (v / cell).floor() as i64;
        Self {
            cell,
            lo: (key(lo[0]) - 1, key(lo[1]) - 1),
            hi: (key(hi[0]) + 1, key(hi[1]) + 1),
            buckets: HashMap::new(),
        }
    }

    fn key(&self, v: f64) -> i64 {
        (v / self.cell).floor() as i64
    }

    fn insert(&mut self, a: Point, b: Point) {
        if !a.iter().chain(&b).all(|v| v.is_finite()) {
            return;
        }
        let x0 = self.key(a[0].min(b[0])).max(self.lo.0);
        let x1 = self.key(a[0].max(b[0])).min(self.hi.0);
        let y0 = self.key(a[1].min(b[1])).max(self.lo.1);
        let y1 = self.key(a[1].max(b[1])).min(self.hi.1);
        for i in x0..=x1 {
            for j in y0..=y1 {
                self.buckets.entry((i, j)).or_default().push((a, b));
            }
        }
    }

    fn within(&self, p: Point, radius: f64) -> bool {
        let (ci, cj) = (self.key(p[0]), self.key(p[1]));
        (ci - 1..=ci + 1).any(|i| {
            (cj - 1..=cj + 1).any(|j| {
                self.buckets
                    .get(&(i, j))
                    .is_some_and(|segs| segs.iter().any(|&(a, b)| segment_distance(p, a, b) <= radius))
            })
        })
    }
}

fn max_jump_along_boundary(h: &HomotopySpec, levels: &[f64], n: usize) -> f64 {
    let mut worst = 0.0f64;
    for &l in levels {
        for k in 0..n {
            let a = h.evaluate(k as f64 / n as f64, l);
            let b = h.evaluate((k + 1) as f64 / n as f64, l);
            worst = worst.max(dist(a, b));
        }
    }
    worst
}

fn max_jump_across_levels(h: &HomotopySpec, levels: &[f64], n: usize) -> f64 {
    let mut worst = 0.0f64;
    for k in 0..n {
        let s = k as f64 / n as f64;
        for w in levels.windows(2) {
            worst = worst.max(dist(h.evaluate(s, w[0]), h.evaluate(s, w[1])));
        }
    }
    worst
}

/// Sampled checks of the four surface properties plus continuity of `h`.
/// Inputs below the minimum grid sizes are clamped up to them.
pub fn validate_homotopy(h: &HomotopySpec, domain: &PlanarDomain, grid: &ValidationGrid) -> HomotopyReport {
    let mut grid = *grid;
    grid.boundary_samples = grid.boundary_samples.max(MIN_SAMPLES);
    grid.levels = grid.levels.max(2);
    let n = grid.boundary_samples;
    let levels = uniform_levels(grid.levels);
    let surfaces: Vec<Vec<Point>> =
        levels.iter().map(|&l| surface(h, l, n).expect("level and sample count are valid")).collect();
    let mut properties = Vec::new();

    // Endpoints.
    let trace = hausdorff(&surfaces[0], domain.vertices(), 4);
    let c = h.center();
    let collapse = surfaces[levels.len() - 1].iter().map(|&p| dist(p, c)).fold(0.0, f64::max);
    let center_inside = domain.strictly_contains(c);
    properties.push(PropertyVerdict {
        name: "P1",
        passed: trace <= TRACE_TOL && collapse <= COLLAPSE_TOL && center_inside,
        qualifier: None,
        metrics: vec![
            ("hausdorff", trace),
            ("collapse", collapse),
            ("center_inside", if center_inside { 1.0 } else { 0.0 }),
        ],
    });

    // Each intermediate surface: inside the domain, closed and simple.
    let mut outside = 0usize;
    let mut non_simple = 0usize;
    let mut gap = 0.0f64;
    for (j, &l) in levels.iter().enumerate() {
        if l == 0.0 || l == 1.0 {
            continue;
        }
        outside += surfaces[j].iter().filter(|&&p| !domain.contains(p)).count();
        if !is_simple(&surfaces[j]) {
            non_simple += 1;
        }
        gap = gap.max(dist(h.evaluate(0.0, l), h.evaluate(1.0 - 1e-12, l)));
    }
    properties.push(PropertyVerdict {
        name: "P2",
        passed: outside == 0 && non_simple == 0 && gap <= TRACE_TOL,
        qualifier: Some("sample-checked only"),
        metrics: vec![
            ("points_outside", outside as f64),
            ("non_simple_surfaces", non_simple as f64),
            ("closure_gap", gap),
        ],
    });

    // Nesting.
    let m = levels.len();
    let mut nested = vec![vec![false; m]; m];
    for i in 0..m {
        for j in i + 1..m {
            nested[i][j] = levels[i] < 1.0
                && surfaces[j].iter().all(|&p| polygon_contains(&surfaces[i], p, ON_EDGE_TOL));
        }
    }
    let failures = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).filter(|&(i, j)| !nested[i][j]).count();
    let mut transitive = true;
    for i in 0..m {
        for j in i + 1..m {
            if !nested[i][j] {
                continue;
            }
            if (j + 1..m).any(|k| nested[j][k] && !nested[i][k]) {
                transitive = false;
            }
        }
    }
    properties.push(PropertyVerdict {
        name: "P3",
        passed: failures == 0,
        qualifier: None,
        metrics: vec![("pairs_not_nested", failures as f64), ("pairs_checked", (m * (m - 1) / 2) as f64)],
    });

    // Coverage.
    let eps = grid.coverage_epsilon();
    let mut index = SegmentGrid::new(eps, domain.bounding_box());
    for s in &surfaces {
        if s.len() == 1 {
            index.insert(s[0], s[0]);
        }
        for (a, b) in closed_edges(s) {
            index.insert(a, b);
        }
    }
    let probes = domain.sample_interior(grid.coverage_points, grid.seed);
    let covered = probes.iter().filter(|&&p| index.within(p, eps)).count();
    let fraction = if probes.is_empty() { 1.0 } else { covered as f64 / probes.len() as f64 };
    properties.push(PropertyVerdict {
        name: "P4",
        passed: fraction > COVERAGE_THRESHOLD,
        qualifier: None,
        metrics: vec![("covered_fraction", fraction), ("epsilon", eps)],
    });

    // Halving the grid spacing must shrink the largest step between neighbours.
    let fine_levels = uniform_levels(2 * levels.len() - 1);
    let ratio = |coarse: f64, fine: f64| if coarse == 0.0 { 0.0 } else { fine / coarse };
    let along = ratio(max_jump_along_boundary(h, &levels, n), max_jump_along_boundary(h, &levels, 2 * n));
    let across = ratio(max_jump_across_levels(h, &levels, n), max_jump_across_levels(h, &fine_levels, n));
    properties.push(PropertyVerdict {
        name: "continuity",
        passed: along <= 0.75 && across <= 0.75,
        qualifier: Some("sample-checked only"),
        metrics: vec![("boundary_refinement_ratio", along), ("level_refinement_ratio", across)],
    });

    HomotopyReport { grid, levels, properties, nested, nesting_transitive: transitive }
}

/// `lambda,index,x,y` rows for each sampled surface.
pub fn surfaces_csv(surfaces: &[(f64, Vec<Point>)]) -> String {
    let mut out = String::from("lambda,index,x,y\n");
    for (l, pts) in surfaces {
        for (i, p) in pts.iter().enumerate() {
            let _ = writeln!(out, "{l},{i},{},{}", p[0], p[1]);
        }
    }
    out
}

/// Domain outline plus one closed path per surface, y axis pointing up.
pub fn surfaces_svg(domain: &PlanarDomain, surfaces: &[(f64, Vec<Point>)]) -> String {
    let (lo, hi) = domain.bounding_box();
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE);
    let margin = 0.05 * span;
    let size = 512.0;
    let scale = size / (span + 2.0 * margin);
    let map = |p: Point| ((p[0] - lo[0] + margin) * scale, (hi[1] - p[1] + margin) * scale);
    let path = |pts: &[Point]| {
        let mut d = String::new();
        for (i, &p) in pts.iter().enumerate() {
            let (x, y) = map(p);
            let _ = write!(d, "{}{x:.3},{y:.3} ", if i == 0 { "M" } else { "L" });
        }
        d.push('Z');
        d
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">"
    );
    let _ = writeln!(
        out,
        "<path d=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"/>",
        path(domain.vertices())
    );
    // Surfaces with non-finite points cannot be drawn.
    for (l, pts) in surfaces.iter().filter(|(_, pts)| pts.iter().flatten().all(|v| v.is_finite())) {
        let _ = writeln!(
            out,
            "<path d=\"{}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"1\" data-lambda=\"{l}\"/>",
            path(pts)
        );
    }
    out.push_str("</svg>\n");
    out
}
