//! Triangle meshes of the fluid domain: construction, boundary labels,
//! deformation by a displacement field, quality control, adaptive
//! regeneration and polyline distances.

mod generate;
mod hausdorff;
pub mod io;
mod locate;
mod quality;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::fem::{Field, FieldKind};
use crate::geom::{self, Point};
use crate::{Error, Result};

pub use generate::{
    adapt_mesh, adapt_mesh_with, build_channel_mesh, build_channel_mesh_with, ChannelGeometry,
    MeshingOptions,
};
pub use hausdorff::{directed_hausdorff, hausdorff_distance};
pub use locate::Locator;
pub(crate) use locate::barycentric;
pub use quality::{mesh_quality, QualityReport, DEFAULT_ANGLE_THRESHOLD, DEFAULT_AREA_THRESHOLD};

/// Boundary segment label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Tag {
    In,
    Wall,
    Out,
    Free,
}

impl Tag {
    pub const ALL: [Tag; 4] = [Tag::In, Tag::Wall, Tag::Out, Tag::Free];

    pub fn as_str(self) -> &'static str {
        match self {
            Tag::In => "IN",
            Tag::Wall => "WALL",
            Tag::Out => "OUT",
            Tag::Free => "FREE",
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "IN" => Ok(Tag::In),
            "WALL" => Ok(Tag::Wall),
            "OUT" => Ok(Tag::Out),
            "FREE" => Ok(Tag::Free),
            other => Err(Error::invalid(format!("unknown boundary tag `{other}`"))),
        }
    }
}

/// A boundary edge, stored with the fluid domain on its left.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub tag: Tag,
    /// Index into [`Mesh::edges`].
    pub edge: usize,
}

/// Connectivity shared between a mesh and all of its deformations.
#[derive(Debug)]
pub struct Topology {
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    triangle_edges: Vec<[usize; 3]>,
    edge_triangles: Vec<[usize; 2]>,
    boundary: Vec<BoundaryEdge>,
    free_cycle: Vec<usize>,
    free_edges: Vec<usize>,
    vertex_triangles: Vec<Vec<usize>>,
}

/// Marker for an edge with only one adjacent triangle.
pub const NO_TRIANGLE: usize = usize::MAX;

/// Local vertex pairs of the three triangle edges.
pub const LOCAL_EDGES: [[usize; 2]; 3] = [[0, 1], [1, 2], [2, 0]];

/// Conforming triangle mesh with labeled boundary edges.
///
/// Vertex coordinates are owned; connectivity is shared behind an `Arc` so
/// that deformed copies are cheap.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    topo: Arc<Topology>,
}

impl Mesh {
    /// Builds and validates a mesh.
    ///
    /// Triangles must be counter-clockwise with positive area; every edge with
    /// a single adjacent triangle must be tagged; FREE edges must form a
    /// single closed loop. Boundary edge orientation in the input is ignored.
    pub fn new(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<([usize; 2], Tag)>,
    ) -> Result<Self> {
        let nv = vertices.len();
        for (k, t) in triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= nv) {
                return Err(Error::mesh(format!("triangle {k} references a missing vertex")));
            }
            let a = geom::signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if !(a > 0.0) {
                return Err(Error::mesh(format!("triangle {k} has non-positive area {a:e}")));
            }
        }

        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_triangles: Vec<[usize; 2]> = Vec::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for (k, t) in triangles.iter().enumerate() {
            let mut te = [0; 3];
            for (l, [i, j]) in LOCAL_EDGES.iter().enumerate() {
                let (a, b) = (t[*i], t[*j]);
                let key = (a.min(b), a.max(b));
                let id = *edge_index.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_triangles.push([NO_TRIANGLE, NO_TRIANGLE]);
                    edges.len() - 1
                });
                let slot = &mut edge_triangles[id];
                if slot[0] == NO_TRIANGLE {
                    slot[0] = k;
                } else if slot[1] == NO_TRIANGLE {
                    slot[1] = k;
                } else {
                    return Err(Error::mesh(format!(
                        "edge ({a}, {b}) is shared by more than two triangles"
                    )));
                }
                te[l] = id;
            }
            triangle_edges.push(te);
        }

        let mut tagged: HashMap<usize, Tag> = HashMap::new();
        for ([a, b], tag) in &boundary {
            let key = ((*a).min(*b), (*a).max(*b));
            let id = *edge_index.get(&key).ok_or_else(|| {
                Error::mesh(format!("boundary edge ({a}, {b}) is not a triangle edge"))
            })?;
            if edge_triangles[id][1] != NO_TRIANGLE {
                return Err(Error::mesh(format!("boundary edge ({a}, {b}) is interior")));
            }
            if tagged.insert(id, *tag).is_some() {
                return Err(Error::mesh(format!("boundary edge ({a}, {b}) listed twice")));
            }
        }

        let mut bedges = Vec::new();
        for (id, tris) in edge_triangles.iter().enumerate() {
            if tris[1] != NO_TRIANGLE {
                continue;
            }
            let tag = *tagged.get(&id).ok_or_else(|| {
                let [a, b] = edges[id];
                Error::mesh(format!("boundary edge ({a}, {b}) has no tag"))
            })?;
            // Orient with the owning (counter-clockwise) triangle so the domain is on the left.
            let t = triangles[tris[0]];
            let l = triangle_edges[tris[0]].iter().position(|&e| e == id).unwrap();
            let [i, j] = LOCAL_EDGES[l];
            bedges.push(BoundaryEdge {
                vertices: [t[i], t[j]],
                tag,
                edge: id,
            });
        }
        bedges.sort_by_key(|e| (e.tag, e.edge));

        let (free_cycle, free_edges) = free_loop(&bedges)?;

        let mut vertex_triangles = vec![Vec::new(); nv];
        for (k, t) in triangles.iter().enumerate() {
            for &v in t {
                vertex_triangles[v].push(k);
            }
        }

        Ok(Mesh {
            vertices,
            topo: Arc::new(Topology {
                triangles,
                edges,
                triangle_edges,
                edge_triangles,
                boundary: bedges,
                free_cycle,
                free_edges,
                vertex_triangles,
            }),
        })
    }

    /// Structured mesh of the rectangle `[x0, x1] × [y0, y1]` with `nx × ny`
    /// cells, each split into two triangles. Left side is IN, right side OUT,
    /// top and bottom WALL.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64, nx: usize, ny: usize) -> Result<Self> {
        Self::rectangle_tagged(x0, y0, x1, y1, nx, ny, [Tag::Wall, Tag::Out, Tag::Wall, Tag::In])
    }

    /// Structured rectangle mesh with explicit tags for the bottom, right, top
    /// and left sides.
    pub fn rectangle_tagged(
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
        nx: usize,
        ny: usize,
        tags: [Tag; 4],
    ) -> Result<Self> {
        if nx == 0 || ny == 0 || !(x1 > x0) || !(y1 > y0) {
            return Err(Error::invalid("rectangle needs positive extent and cell counts"));
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                let x = x0 + (x1 - x0) * i as f64 / nx as f64;
                let y = y0 + (y1 - y0) * j as f64 / ny as f64;
                vertices.push([x, y]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                // alternate the diagonal for a less biased pattern
                if (i + j) % 2 == 0 {
                    triangles.push([a, b, c]);
                    triangles.push([a, c, d]);
                } else {
                    triangles.push([a, b, d]);
                    triangles.push([b, c, d]);
                }
            }
        }
        let mut boundary = Vec::new();
        for i in 0..nx {
            boundary.push(([id(i, 0), id(i + 1, 0)], tags[0]));
            boundary.push(([id(i, ny), id(i + 1, ny)], tags[2]));
        }
        for j in 0..ny {
            boundary.push(([id(nx, j), id(nx, j + 1)], tags[1]));
            boundary.push(([id(0, j), id(0, j + 1)], tags[3]));
        }
        Mesh::new(vertices, triangles, boundary)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> Point {
        self.vertices[i]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.topo.triangles
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.topo.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.topo.edges.len()
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.topo.edges
    }

    /// Global edge ids of triangle `t`, in [`LOCAL_EDGES`] order.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.topo.triangle_edges[t]
    }

    /// The one or two triangles adjacent to an edge ([`NO_TRIANGLE`] marks a missing side).
    pub fn edge_triangles(&self, e: usize) -> [usize; 2] {
        self.topo.edge_triangles[e]
    }

    pub fn vertex_triangles(&self, v: usize) -> &[usize] {
        &self.topo.vertex_triangles[v]
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.topo.boundary
    }

    pub fn boundary_edges_tagged(&self, tag: Tag) -> impl Iterator<Item = &BoundaryEdge> {
        self.topo.boundary.iter().filter(move |e| e.tag == tag)
    }

    pub fn has_tag(&self, tag: Tag) -> bool {
        self.topo.boundary.iter().any(|e| e.tag == tag)
    }

    /// FREE loop vertices in traversal order (fluid on the left).
    pub fn free_cycle(&self) -> &[usize] {
        &self.topo.free_cycle
    }

    /// Indices into [`Mesh::boundary_edges`] of the FREE edges, with
    /// `free_edges()[k]` joining `free_cycle()[k]` and `free_cycle()[k + 1]`.
    pub fn free_edges(&self) -> &[usize] {
        &self.topo.free_edges
    }

    pub fn free_polyline(&self) -> Vec<Point> {
        self.topo.free_cycle.iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.topo.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        geom::signed_area(a, b, c)
    }

    /// Sum of signed triangle areas (the fluid volume |Ω|).
    pub fn area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.topo.edges[e];
        geom::dist(self.vertices[a], self.vertices[b])
    }

    /// Total length of boundary edges with the given tag.
    pub fn boundary_length(&self, tag: Tag) -> f64 {
        self.boundary_edges_tagged(tag).map(|e| self.edge_length(e.edge)).sum()
    }

    /// Length of the obstacle boundary.
    pub fn perimeter(&self) -> f64 {
        self.boundary_length(Tag::Free)
    }

    /// Outward unit normal of a boundary edge.
    pub fn boundary_normal(&self, edge: &BoundaryEdge) -> Point {
        geom::right_normal(self.vertices[edge.vertices[0]], self.vertices[edge.vertices[1]])
    }

    pub(crate) fn topology(&self) -> &Arc<Topology> {
        &self.topo
    }

    /// Same connectivity with new coordinates. No validity checks.
    pub fn with_vertices(&self, vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::invalid("vertex count mismatch"));
        }
        Ok(Mesh {
            vertices,
            topo: Arc::clone(&self.topo),
        })
    }

    pub fn translated(&self, d: Point) -> Self {
        Mesh {
            vertices: self.vertices.iter().map(|&p| geom::add(p, d)).collect(),
            topo: Arc::clone(&self.topo),
        }
    }

    /// True if every triangle has positive signed area.
    pub fn is_valid(&self) -> bool {
        (0..self.num_triangles()).all(|t| self.triangle_area(t) > 0.0)
    }

    /// True if the FREE loop has no self-intersections.
    pub fn free_polyline_is_simple(&self) -> bool {
        self.free_cycle().is_empty() || geom::closed_polyline_is_simple(&self.free_polyline())
    }

    /// Moves every vertex by `t · displacement(vertex)`.
    ///
    /// `displacement` holds one vector per vertex. Connectivity and tags are
    /// kept; the result may contain inverted triangles.
    pub fn displaced(&self, displacement: &[Point], t: f64) -> Result<Self> {
        if displacement.len() != self.vertices.len() {
            return Err(Error::invalid("displacement length differs from vertex count"));
        }
        let vertices = self
            .vertices
            .iter()
            .zip(displacement)
            .map(|(&p, &d)| geom::add(p, geom::scale(d, t)))
            .collect();
        self.with_vertices(vertices)
    }

    /// Vertices lying on boundary edges with the given tag.
    pub fn tagged_vertices(&self, tag: Tag) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .boundary_edges_tagged(tag)
            .flat_map(|e| e.vertices)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Moves every vertex by `t · θ(vertex)`.
///
/// `theta` must be a quadratic vector field on this mesh that vanishes on
/// all IN, WALL and OUT nodes (tolerance `1e-12`).
pub fn apply_deformation(mesh: &Mesh, theta: &Field, t: f64) -> Result<Mesh> {
    if theta.kind() != FieldKind::VectorP2 || !theta.dofmap().same_mesh(mesh) {
        return Err(Error::contract("deformation must be a quadratic vector field on this mesh"));
    }
    let dofmap = theta.dofmap();
    for tag in [Tag::In, Tag::Wall, Tag::Out] {
        for &n in dofmap.boundary_nodes(tag) {
            if geom::norm(theta.node_vector(n)) > 1e-12 {
                return Err(Error::contract(format!(
                    "deformation is nonzero on {tag} node {n} at {:?}",
                    dofmap.node_point(n)
                )));
            }
        }
    }
    let displacement: Vec<Point> = (0..mesh.num_vertices()).map(|v| theta.node_vector(v)).collect();
    mesh.displaced(&displacement, t)
}

fn free_loop(bedges: &[BoundaryEdge]) -> Result<(Vec<usize>, Vec<usize>)> {
    let free: Vec<usize> = (0..bedges.len()).filter(|&k| bedges[k].tag == Tag::Free).collect();
    if free.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let mut next: HashMap<usize, usize> = HashMap::new();
    for &k in &free {
        if next.insert(bedges[k].vertices[0], k).is_some() {
            return Err(Error::mesh("FREE edges do not form a simple closed loop"));
        }
    }
    let start = bedges[free[0]].vertices[0];
    let mut cycle = vec![start];
    let mut order = Vec::new();
    let mut v = start;
    loop {
        let k = *next
            .get(&v)
            .ok_or_else(|| Error::mesh("FREE polyline is not closed"))?;
        order.push(k);
        v = bedges[k].vertices[1];
        if v == start {
            break;
        }
        if order.len() > free.len() {
            return Err(Error::mesh("FREE polyline is not closed"));
        }
        cycle.push(v);
    }
    if order.len() != free.len() {
        return Err(Error::mesh("FREE edges form more than one loop"));
    }
    Ok((cycle, order))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectangle_mesh_is_conforming() {
        let m = Mesh::rectangle(0.0, 0.0, 2.0, 1.0, 4, 3).unwrap();
        assert_eq!(m.num_vertices(), 20);
        assert_eq!(m.num_triangles(), 24);
        // Euler: V - E + T = 1 for a disk
        assert_eq!(m.num_vertices() + m.num_triangles(), m.num_edges() + 1);
        assert!((m.area() - 2.0).abs() < 1e-14);
        assert!((m.boundary_length(Tag::In) - 1.0).abs() < 1e-14);
        assert!(m.free_cycle().is_empty());
        for e in m.boundary_edges() {
            let n = m.boundary_normal(e);
            let mid = geom::midpoint(m.vertex(e.vertices[0]), m.vertex(e.vertices[1]));
            // outward normal points away from the rectangle center
            assert!(geom::dot(n, geom::sub(mid, [1.0, 0.5])) > 0.0);
        }
    }

    #[test]
    fn rejects_untagged_boundary() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let err = Mesh::new(v, vec![[0, 1, 2]], vec![([0, 1], Tag::Wall)]);
        assert!(matches!(err, Err(Error::InvalidMesh(_))));
    }

    #[test]
    fn rejects_clockwise_triangle() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let b = vec![([0, 1], Tag::Wall), ([1, 2], Tag::Wall), ([2, 0], Tag::Wall)];
        assert!(Mesh::new(v, vec![[0, 2, 1]], b).is_err());
    }

    #[test]
    fn tag_round_trip() {
        for t in Tag::ALL {
            assert_eq!(t.as_str().parse::<Tag>().unwrap(), t);
        }
        assert!("SIDE".parse::<Tag>().is_err());
    }

    fn channel() -> Mesh {
        build_channel_mesh(&ChannelGeometry::reference(), 1.0 / 25.0, 1.0 / 15.0).unwrap()
    }

    // radial field on r < 0.25 around the obstacle, zero beyond
    fn radial(mesh: &Mesh) -> Field {
        let dofmap = crate::fem::build_dofmap(mesh);
        Field::interpolate_vector(&dofmap, |p| {
            let d = geom::sub(p, [0.325, 0.0]);
            let r = geom::norm(d);
            if r < 0.25 {
                geom::scale(d, -1.0 / r)
            } else {
                [0.0, 0.0]
            }
        })
    }

    #[test]
    fn deformation_identity() {
        let m = channel();
        let th = radial(&m);
        let same = apply_deformation(&m, &th, 0.0).unwrap();
        assert_eq!(same.vertices(), m.vertices());
        let zero = Field::zeros(th.dofmap(), FieldKind::VectorP2);
        assert_eq!(apply_deformation(&m, &zero, 1.0).unwrap().vertices(), m.vertices());
    }

    #[test]
    fn deformation_moves_free_boundary() {
        let m = channel();
        let moved = apply_deformation(&m, &radial(&m), 0.01).unwrap();
        for p in moved.free_polyline() {
            assert!((geom::dist(p, [0.325, 0.0]) - 0.12).abs() < 1e-12);
        }
        assert!(moved.is_valid());
    }

    #[test]
    fn deformation_rejects_wall_motion() {
        let m = channel();
        let dofmap = crate::fem::build_dofmap(&m);
        let th = Field::interpolate_vector(&dofmap, |_| [1.0, 0.0]);
        assert!(apply_deformation(&m, &th, 0.1).is_err());
        let other = channel();
        assert!(apply_deformation(&other, &radial(&m), 0.1).is_err());
    }
}

