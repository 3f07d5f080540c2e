//! Taylor–Hood discretization: quadratic vector velocity, linear pressure.
//!
//! Velocity nodes are the mesh vertices (node `v`) followed by the edge
//! midpoints (node `V + e`). Scalar velocity dofs interleave the two
//! components, `2·node + c`. In the saddle system the pressure dofs follow
//! the velocity dofs, one per vertex.

mod assemble;
pub mod element;
mod solve;
mod sparse;

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::geom::Point;
use crate::mesh::{Mesh, Tag};
use crate::{Error, Result};

pub use assemble::{
    apply_dirichlet, assemble, assemble_with, boundary_load, boundary_mass, vector_mass, vector_stiffness,
    velocity_load, BoundaryCondition, SaddleSystem,
};
pub use solve::{solve_saddle, LinearSolver, SaddleSolver};
pub use sparse::CsrMatrix;

use element::{p2_values, TriGeom};

/// Degree-of-freedom numbering over a fixed mesh.
#[derive(Debug)]
pub struct DofMap {
    mesh: Mesh,
    boundary_nodes: BTreeMap<Tag, Vec<usize>>,
}

pub fn build_dofmap(mesh: &Mesh) -> Arc<DofMap> {
    let nv = mesh.num_vertices();
    let mut boundary_nodes: BTreeMap<Tag, Vec<usize>> = BTreeMap::new();
    for e in mesh.boundary_edges() {
        let set = boundary_nodes.entry(e.tag).or_default();
        set.extend([e.vertices[0], e.vertices[1], nv + e.edge]);
    }
    for set in boundary_nodes.values_mut() {
        set.sort_unstable();
        set.dedup();
    }
    Arc::new(DofMap {
        mesh: mesh.clone(),
        boundary_nodes,
    })
}

impl DofMap {
    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    /// Quadratic nodes: vertices plus edge midpoints.
    pub fn num_nodes(&self) -> usize {
        self.mesh.num_vertices() + self.mesh.num_edges()
    }

    pub fn num_velocity_dofs(&self) -> usize {
        2 * self.num_nodes()
    }

    pub fn num_pressure_dofs(&self) -> usize {
        self.mesh.num_vertices()
    }

    /// Size of the saddle system.
    pub fn num_dofs(&self) -> usize {
        self.num_velocity_dofs() + self.num_pressure_dofs()
    }

    pub fn node_point(&self, n: usize) -> Point {
        let nv = self.mesh.num_vertices();
        if n < nv {
            self.mesh.vertex(n)
        } else {
            let [a, b] = self.mesh.edges()[n - nv];
            crate::geom::midpoint(self.mesh.vertex(a), self.mesh.vertex(b))
        }
    }

    /// Six quadratic nodes of triangle `t`, in element order.
    pub fn triangle_nodes(&self, t: usize) -> [usize; 6] {
        let v = self.mesh.triangles()[t];
        let e = self.mesh.triangle_edges(t);
        let nv = self.mesh.num_vertices();
        [v[0], v[1], v[2], nv + e[0], nv + e[1], nv + e[2]]
    }

    /// Start vertex, end vertex and midpoint node of boundary edge `edge`
    /// oriented as `vertices`.
    pub fn edge_nodes(&self, vertices: [usize; 2], edge: usize) -> [usize; 3] {
        [vertices[0], vertices[1], self.mesh.num_vertices() + edge]
    }

    /// Quadratic nodes lying on boundary edges with this tag.
    pub fn boundary_nodes(&self, tag: Tag) -> &[usize] {
        self.boundary_nodes.get(&tag).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Scalar velocity dofs on boundary edges with this tag.
    pub fn boundary_dofs(&self, tag: Tag) -> Vec<usize> {
        self.boundary_nodes(tag).iter().flat_map(|&n| [2 * n, 2 * n + 1]).collect()
    }

    pub(crate) fn same_mesh(&self, mesh: &Mesh) -> bool {
        Arc::ptr_eq(self.mesh.topology(), mesh.topology())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// Quadratic vector field, two coefficients per node.
    VectorP2,
    /// Linear scalar field, one coefficient per vertex.
    ScalarP1,
}

/// Discrete function tied to a dofmap.
#[derive(Debug, Clone)]
pub struct Field {
    dofmap: Arc<DofMap>,
    kind: FieldKind,
    coeffs: Vec<f64>,
}

impl Field {
    pub fn zeros(dofmap: &Arc<DofMap>, kind: FieldKind) -> Self {
        let n = match kind {
            FieldKind::VectorP2 => dofmap.num_velocity_dofs(),
            FieldKind::ScalarP1 => dofmap.num_pressure_dofs(),
        };
        Field {
            dofmap: Arc::clone(dofmap),
            kind,
            coeffs: vec![0.0; n],
        }
    }

    pub fn from_coeffs(dofmap: &Arc<DofMap>, kind: FieldKind, coeffs: Vec<f64>) -> Result<Self> {
        let f = Field::zeros(dofmap, kind);
        if coeffs.len() != f.coeffs.len() {
            return Err(Error::invalid(format!(
                "{kind:?} field needs {} coefficients, got {}",
                f.coeffs.len(),
                coeffs.len()
            )));
        }
        Ok(Field { coeffs, ..f })
    }

    /// Nodal interpolant of a vector function.
    pub fn interpolate_vector(dofmap: &Arc<DofMap>, f: impl Fn(Point) -> Point) -> Self {
        let mut out = Field::zeros(dofmap, FieldKind::VectorP2);
        for n in 0..dofmap.num_nodes() {
            let v = f(dofmap.node_point(n));
            out.coeffs[2 * n] = v[0];
            out.coeffs[2 * n + 1] = v[1];
        }
        out
    }

    /// Nodal interpolant of a scalar function at the vertices.
    pub fn interpolate_scalar(dofmap: &Arc<DofMap>, f: impl Fn(Point) -> f64) -> Self {
        let mut out = Field::zeros(dofmap, FieldKind::ScalarP1);
        for (v, c) in out.coeffs.iter_mut().enumerate() {
            *c = f(dofmap.mesh.vertex(v));
        }
        out
    }

    pub fn dofmap(&self) -> &Arc<DofMap> {
        &self.dofmap
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Vector value at quadratic node `n`.
    pub fn node_vector(&self, n: usize) -> Point {
        debug_assert_eq!(self.kind, FieldKind::VectorP2);
        [self.coeffs[2 * n], self.coeffs[2 * n + 1]]
    }

    /// Local nodal vectors on triangle `t`.
    pub fn local_vectors(&self, t: usize) -> [Point; 6] {
        self.dofmap.triangle_nodes(t).map(|n| self.node_vector(n))
    }

    /// Vector value at barycentric `l` of triangle `t`.
    pub fn vector_at(&self, t: usize, l: [f64; 3]) -> Point {
        let phi = p2_values(l);
        let u = self.local_vectors(t);
        let mut out = [0.0; 2];
        for i in 0..6 {
            out[0] += phi[i] * u[i][0];
            out[1] += phi[i] * u[i][1];
        }
        out
    }

    /// Gradient `G[i][j] = ∂u_i/∂x_j` at barycentric `l` of triangle `t`.
    pub fn gradient_at(&self, t: usize, geom: &TriGeom, l: [f64; 3]) -> [[f64; 2]; 2] {
        let dphi = geom.p2_gradients(l);
        let u = self.local_vectors(t);
        let mut g = [[0.0; 2]; 2];
        for k in 0..6 {
            for i in 0..2 {
                for j in 0..2 {
                    g[i][j] += u[k][i] * dphi[k][j];
                }
            }
        }
        g
    }

    /// Vector value at point `p` inside triangle `t`.
    pub fn eval_in(&self, t: usize, p: Point) -> Point {
        let l = crate::mesh::barycentric(self.dofmap.mesh.triangle_points(t), p);
        self.vector_at(t, l)
    }

    /// Scalar value at barycentric `l` of triangle `t`.
    pub fn scalar_at(&self, t: usize, l: [f64; 3]) -> f64 {
        debug_assert_eq!(self.kind, FieldKind::ScalarP1);
        let v = self.dofmap.mesh.triangles()[t];
        l[0] * self.coeffs[v[0]] + l[1] * self.coeffs[v[1]] + l[2] * self.coeffs[v[2]]
    }

    /// Largest nodal difference from another field of the same kind.
    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        assert_eq!(self.kind, other.kind);
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    /// `self + s · other`.
    pub fn add_scaled(&self, s: f64, other: &Field) -> Field {
        assert_eq!(self.kind, other.kind);
        assert_eq!(self.coeffs.len(), other.coeffs.len());
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + s * b).collect();
        Field { coeffs, ..self.clone() }
    }

    pub fn scaled(&self, s: f64) -> Field {
        Field {
            coeffs: self.coeffs.iter().map(|a| a * s).collect(),
            ..self.clone()
        }
    }

    /// Same coefficients over another dofmap of the same mesh topology.
    pub fn rebind(&self, dofmap: &Arc<DofMap>) -> Result<Field> {
        if !dofmap.same_mesh(&self.dofmap.mesh) {
            return Err(Error::invalid("dofmaps belong to different mesh topologies"));
        }
        Ok(Field {
            dofmap: Arc::clone(dofmap),
            ..self.clone()
        })
    }
}
