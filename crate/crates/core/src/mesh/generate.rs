//! Unstructured triangulation of the channel with a single obstacle hole.
//!
//! Boundary points are placed by equidistributing a target size function
//! along the channel sides; interior points come from a seeded Poisson-disk
//! sample that is then relaxed by a DistMesh-style spring iteration. Each
//! relaxation step re-triangulates with a constrained Delaunay triangulation
//! that keeps every boundary segment as an edge.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use spade::{ConstrainedDelaunayTriangulation, Point2, Triangulation};

use crate::fem::Field;
use crate::geom::{self, Point};
use crate::{Error, Result};

use super::{Locator, Mesh, Tag};

/// Rectangular channel with a circular obstacle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelGeometry {
    pub corners: [Point; 4],
    pub obstacle_center: Point,
    pub obstacle_radius: f64,
    /// Number of obstacle polyline segments; chosen from `h_min` when absent.
    #[serde(default)]
    pub obstacle_segments: Option<usize>,
}

impl Default for ChannelGeometry {
    fn default() -> Self {
        Self::reference()
    }
}

impl ChannelGeometry {
    /// Channel `[0, 2] × [-0.5, 0.5]` with an obstacle of radius 0.13 at `(0.325, 0)`.
    pub fn reference() -> Self {
        ChannelGeometry {
            corners: [[0.0, -0.5], [0.0, 0.5], [2.0, 0.5], [2.0, -0.5]],
            obstacle_center: [0.325, 0.0],
            obstacle_radius: 0.13,
            obstacle_segments: None,
        }
    }

    /// Lower-left and upper-right corners, after checking that the four
    /// corners form an axis-aligned rectangle of positive area.
    pub fn bounds(&self) -> Result<(Point, Point)> {
        let xs: Vec<f64> = self.corners.iter().map(|p| p[0]).collect();
        let ys: Vec<f64> = self.corners.iter().map(|p| p[1]).collect();
        let lo = [
            xs.iter().cloned().fold(f64::INFINITY, f64::min),
            ys.iter().cloned().fold(f64::INFINITY, f64::min),
        ];
        let hi = [
            xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        ];
        if !(hi[0] > lo[0] && hi[1] > lo[1]) {
            return Err(Error::invalid("channel corners span no area"));
        }
        for want in [lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]] {
            if !self.corners.iter().any(|&c| geom::dist(c, want) < 1e-12) {
                return Err(Error::invalid("channel corners are not an axis-aligned rectangle"));
            }
        }
        Ok((lo, hi))
    }

    pub fn validate(&self) -> Result<(Point, Point)> {
        let (lo, hi) = self.bounds()?;
        if !(self.obstacle_radius > 0.0) {
            return Err(Error::invalid("obstacle radius must be positive"));
        }
        let c = self.obstacle_center;
        let clearance = (c[0] - lo[0])
            .min(hi[0] - c[0])
            .min(c[1] - lo[1])
            .min(hi[1] - c[1])
            - self.obstacle_radius;
        if !(clearance > 0.0) {
            return Err(Error::invalid(format!(
                "obstacle must lie strictly inside the channel (clearance {clearance:.4})"
            )));
        }
        if matches!(self.obstacle_segments, Some(n) if n < 3) {
            return Err(Error::invalid("obstacle needs at least three segments"));
        }
        Ok((lo, hi))
    }

    /// Segment count giving a chord length close to `h_min`.
    pub fn segments_for(&self, h_min: f64) -> usize {
        self.obstacle_segments.unwrap_or_else(|| {
            ((std::f64::consts::TAU * self.obstacle_radius / h_min).ceil() as usize).max(8)
        })
    }

    /// Obstacle polyline vertices, counter-clockwise.
    pub fn obstacle_polyline(&self, h_min: f64) -> Vec<Point> {
        let n = self.segments_for(h_min);
        let [cx, cy] = self.obstacle_center;
        (0..n)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / n as f64;
                [cx + self.obstacle_radius * t.cos(), cy + self.obstacle_radius * t.sin()]
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshingOptions {
    /// Seed of the interior point sampler; equal seeds give identical meshes.
    pub seed: u64,
    pub smoothing_iterations: usize,
}

impl Default for MeshingOptions {
    fn default() -> Self {
        MeshingOptions {
            seed: 7,
            smoothing_iterations: 30,
        }
    }
}

/// Triangulates the channel geometry with sizes graded from `h_min` at the
/// obstacle to `h_max` away from it.
pub fn build_channel_mesh(geom: &ChannelGeometry, h_min: f64, h_max: f64) -> Result<Mesh> {
    build_channel_mesh_with(geom, h_min, h_max, MeshingOptions::default())
}

pub fn build_channel_mesh_with(
    geom: &ChannelGeometry,
    h_min: f64,
    h_max: f64,
    opts: MeshingOptions,
) -> Result<Mesh> {
    check_sizes(h_min, h_max)?;
    let (lo, hi) = geom.validate()?;
    let c = geom.obstacle_center;
    let r = geom.obstacle_radius;
    let size = move |p: Point| (h_min + 0.3 * (geom::dist(p, c) - r).max(0.0)).clamp(h_min, h_max);
    let hole = geom.obstacle_polyline(h_min);
    mesh_region(lo, hi, &hole, &size, h_min, opts)
}

/// Regenerates the mesh with sizes graded by the speed `|u|`.
///
/// The target size is `h_max / (1 + |u| / max|u|)` clamped to
/// `[h_min, h_max]`; the FREE polyline vertices are kept exactly, so the
/// enclosed volume does not change.
pub fn adapt_mesh(mesh: &Mesh, u: &Field, h_min: f64, h_max: f64) -> Result<Mesh> {
    adapt_mesh_with(mesh, u, h_min, h_max, MeshingOptions::default())
}

pub fn adapt_mesh_with(
    mesh: &Mesh,
    u: &Field,
    h_min: f64,
    h_max: f64,
    opts: MeshingOptions,
) -> Result<Mesh> {
    check_sizes(h_min, h_max)?;
    if !std::ptr::eq(u.dofmap().mesh().topology().as_ref(), mesh.topology().as_ref()) {
        return Err(Error::invalid("speed field is not defined on this mesh"));
    }
    let speed: Vec<f64> = (0..mesh.num_vertices()).map(|v| geom::norm(u.node_vector(v))).collect();
    let umax = speed.iter().cloned().fold(0.0, f64::max);
    let (lo, hi) = mesh_bounds(mesh);
    let locator = Locator::new(mesh);
    let size = |p: Point| {
        if !(umax > 0.0) || !umax.is_finite() {
            return h_max;
        }
        let s = match locator.locate(p) {
            Some((t, _)) => geom::norm(u.eval_in(t, p)),
            None => 0.0,
        };
        (h_max / (1.0 + s / umax)).clamp(h_min, h_max)
    };
    let hole = mesh.free_polyline();
    mesh_region(lo, hi, &hole, &size, h_min, opts)
}

fn check_sizes(h_min: f64, h_max: f64) -> Result<()> {
    if !(h_min > 0.0 && h_max >= h_min && h_max.is_finite()) {
        return Err(Error::invalid(format!("mesh sizes must satisfy 0 < h_min <= h_max (got {h_min}, {h_max})")));
    }
    Ok(())
}

fn mesh_bounds(mesh: &Mesh) -> (Point, Point) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for e in mesh.boundary_edges().iter().filter(|e| e.tag != Tag::Free) {
        for &v in &e.vertices {
            let p = mesh.vertex(v);
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
    }
    (lo, hi)
}

/// Points on `[a, b)` whose spacing follows `size`.
fn discretize_side(a: Point, b: Point, size: &dyn Fn(Point) -> f64) -> Vec<Point> {
    const SAMPLES: usize = 512;
    let len = geom::dist(a, b);
    let mut cumulative = vec![0.0; SAMPLES + 1];
    for k in 0..SAMPLES {
        let mid = geom::lerp(a, b, (k as f64 + 0.5) / SAMPLES as f64);
        cumulative[k + 1] = cumulative[k] + len / SAMPLES as f64 / size(mid);
    }
    let total = cumulative[SAMPLES];
    let n = (total.round() as usize).max(1);
    let mut pts = vec![a];
    let mut k = 0;
    for i in 1..n {
        let target = total * i as f64 / n as f64;
        while cumulative[k + 1] < target {
            k += 1;
        }
        let frac = (target - cumulative[k]) / (cumulative[k + 1] - cumulative[k]);
        pts.push(geom::lerp(a, b, (k as f64 + frac) / SAMPLES as f64));
    }
    pts
}

struct Region<'a> {
    lo: Point,
    hi: Point,
    hole: &'a [Point],
    segments: Vec<[usize; 2]>,
    points: Vec<Point>,
}

impl Region<'_> {
    fn contains(&self, p: Point) -> bool {
        p[0] > self.lo[0]
            && p[0] < self.hi[0]
            && p[1] > self.lo[1]
            && p[1] < self.hi[1]
            && (self.hole.is_empty() || !geom::point_in_polygon(p, self.hole))
    }

    fn boundary_distance(&self, p: Point) -> f64 {
        let rect = (p[0] - self.lo[0])
            .min(self.hi[0] - p[0])
            .min(p[1] - self.lo[1])
            .min(self.hi[1] - p[1]);
        let n = self.hole.len();
        (0..n)
            .map(|i| geom::point_segment_distance(p, self.hole[i], self.hole[(i + 1) % n]))
            .fold(rect, f64::min)
    }
}

/// Uniform bucket grid used for neighbour queries while sampling.
struct PointGrid {
    lo: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<usize>>,
}

impl PointGrid {
    fn new(lo: Point, hi: Point, cell: f64) -> Self {
        let nx = (((hi[0] - lo[0]) / cell).ceil() as usize).max(1);
        let ny = (((hi[1] - lo[1]) / cell).ceil() as usize).max(1);
        PointGrid {
            lo,
            cell,
            nx,
            ny,
            cells: vec![Vec::new(); nx * ny],
        }
    }

    fn index(&self, p: Point) -> (usize, usize) {
        let i = (((p[0] - self.lo[0]) / self.cell).floor().max(0.0) as usize).min(self.nx - 1);
        let j = (((p[1] - self.lo[1]) / self.cell).floor().max(0.0) as usize).min(self.ny - 1);
        (i, j)
    }

    fn insert(&mut self, p: Point, id: usize) {
        let (i, j) = self.index(p);
        self.cells[j * self.nx + i].push(id);
    }

    fn any_within(&self, p: Point, r: f64, points: &[Point]) -> bool {
        let (i, j) = self.index(p);
        let k = (r / self.cell).ceil() as usize;
        for jj in j.saturating_sub(k)..=(j + k).min(self.ny - 1) {
            for ii in i.saturating_sub(k)..=(i + k).min(self.nx - 1) {
                if self.cells[jj * self.nx + ii].iter().any(|&q| geom::dist(points[q], p) < r) {
                    return true;
                }
            }
        }
        false
    }
}

fn mesh_region(
    lo: Point,
    hi: Point,
    hole: &[Point],
    size: &dyn Fn(Point) -> f64,
    h_min: f64,
    opts: MeshingOptions,
) -> Result<Mesh> {
    // Outer boundary, counter-clockwise from the lower-left corner.
    let corners = [lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]];
    let side_tags = [Tag::Wall, Tag::Out, Tag::Wall, Tag::In];
    let mut points = Vec::new();
    let mut tagged = Vec::new();
    for s in 0..4 {
        let side = discretize_side(corners[s], corners[(s + 1) % 4], size);
        let first = points.len();
        points.extend(side);
        let last = points.len();
        for k in first..last {
            tagged.push(([k, k + 1], side_tags[s]));
        }
    }
    let n_outer = points.len();
    if let Some(last) = tagged.last_mut() {
        last.0[1] = 0;
    }
    let first_hole = points.len();
    points.extend_from_slice(hole);
    for k in 0..hole.len() {
        tagged.push(([first_hole + k, first_hole + (k + 1) % hole.len()], Tag::Free));
    }
    let n_fixed = points.len();
    debug_assert!(n_outer >= 4);

    let mut region = Region {
        lo,
        hi,
        hole,
        segments: tagged.iter().map(|(s, _)| *s).collect(),
        points,
    };

    // Poisson-disk sample of interior points.
    let spacing = 0.5 * h_min;
    let mut candidates = Vec::new();
    let ny = ((hi[1] - lo[1]) / (spacing * 0.866)).ceil() as usize;
    for j in 0..=ny {
        let y = lo[1] + j as f64 * spacing * 0.866;
        let shift = if j % 2 == 0 { 0.0 } else { 0.5 * spacing };
        let mut x = lo[0] + shift;
        while x < hi[0] {
            let p = [x, y];
            if region.contains(p) {
                candidates.push(p);
            }
            x += spacing;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    candidates.shuffle(&mut rng);
    let mut grid = PointGrid::new(lo, hi, h_min);
    for (id, &p) in region.points.iter().enumerate() {
        grid.insert(p, id);
    }
    for p in candidates {
        let s = size(p);
        if region.boundary_distance(p) < 0.6 * s {
            continue;
        }
        if grid.any_within(p, 0.85 * s, &region.points) {
            continue;
        }
        grid.insert(p, region.points.len());
        region.points.push(p);
    }

    // Spring relaxation of the interior points.
    const FSCALE: f64 = 1.2;
    const DT: f64 = 0.2;
    for _ in 0..opts.smoothing_iterations {
        let triangles = triangulate(&region)?;
        let bars = unique_bars(&triangles);
        let mut lengths = Vec::with_capacity(bars.len());
        let mut targets = Vec::with_capacity(bars.len());
        for &[i, j] in &bars {
            let (a, b) = (region.points[i], region.points[j]);
            lengths.push(geom::dist(a, b));
            targets.push(size(geom::midpoint(a, b)));
        }
        let sum_l2: f64 = lengths.iter().map(|l| l * l).sum();
        let sum_h2: f64 = targets.iter().map(|h| h * h).sum();
        let scale = FSCALE * (sum_l2 / sum_h2).sqrt();
        let mut force = vec![[0.0; 2]; region.points.len()];
        for (k, &[i, j]) in bars.iter().enumerate() {
            let l = lengths[k];
            let push = (targets[k] * scale - l).max(0.0);
            if push == 0.0 || l == 0.0 {
                continue;
            }
            let dir = geom::scale(geom::sub(region.points[i], region.points[j]), push / l);
            force[i] = geom::add(force[i], dir);
            force[j] = geom::sub(force[j], dir);
        }
        for i in n_fixed..region.points.len() {
            let old = region.points[i];
            let new = geom::add(old, geom::scale(force[i], DT));
            if region.contains(new) && region.boundary_distance(new) > 0.3 * size(new) {
                region.points[i] = new;
            }
        }
    }

    let triangles = triangulate(&region)?;
    let mut used = vec![false; region.points.len()];
    for t in &triangles {
        for &v in t {
            used[v] = true;
        }
    }
    // Drop interior points that ended up outside every kept triangle.
    let mut remap = vec![usize::MAX; region.points.len()];
    let mut vertices = Vec::new();
    for (i, &p) in region.points.iter().enumerate() {
        if used[i] || i < n_fixed {
            remap[i] = vertices.len();
            vertices.push(p);
        }
    }
    let triangles = triangles.iter().map(|t| t.map(|v| remap[v])).collect();
    let boundary = tagged
        .into_iter()
        .map(|([a, b], tag)| ([remap[a], remap[b]], tag))
        .collect();
    Mesh::new(vertices, triangles, boundary)
}

fn triangulate(region: &Region) -> Result<Vec<[usize; 3]>> {
    let pts: Vec<Point2<f64>> = region.points.iter().map(|p| Point2::new(p[0], p[1])).collect();
    let cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::bulk_load_cdt(pts, region.segments.clone())
        .map_err(|e| Error::mesh(format!("triangulation failed: {e:?}")))?;
    if cdt.num_vertices() != region.points.len() {
        return Err(Error::mesh("triangulation merged coincident points"));
    }
    let mut out = Vec::with_capacity(cdt.num_inner_faces());
    for face in cdt.inner_faces() {
        let mut t = face.vertices().map(|v| v.fix().index());
        let [a, b, c] = t.map(|v| region.points[v]);
        let centroid = [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0];
        if !region.contains(centroid) {
            continue;
        }
        if geom::signed_area(a, b, c) < 0.0 {
            t.swap(1, 2);
        }
        out.push(t);
    }
    Ok(out)
}

fn unique_bars(triangles: &[[usize; 3]]) -> Vec<[usize; 2]> {
    let mut bars: Vec<[usize; 2]> = triangles
        .iter()
        .flat_map(|t| {
            [[t[0], t[1]], [t[1], t[2]], [t[2], t[0]]].map(|[a, b]| [a.min(b), a.max(b)])
        })
        .collect();
    bars.sort_unstable();
    bars.dedup();
    bars
}
