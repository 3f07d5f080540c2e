//! Assembly of the Stokes blocks and auxiliary forms.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::exec::Execution;
use crate::geom::Point;
use crate::mesh::{mesh_quality, Tag, DEFAULT_ANGLE_THRESHOLD, DEFAULT_AREA_THRESHOLD};
use crate::{Error, Result};

use super::element::{p2_edge_values, p2_values, TriGeom, EDGE_RULE, VOLUME_RULE};
use super::{CsrMatrix, DofMap, SaddleSolver};

/// Dirichlet data for one boundary tag.
pub type BoundaryCondition<'a> = (Tag, &'a (dyn Fn(Point) -> Point + Sync));

/// Blocks of the discrete Stokes operator
/// `[[ν A, Bᵀ], [B, 0]]` plus the velocity mass matrix.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    dofmap: Arc<DofMap>,
    nu: f64,
    /// `ν ∫ ∇φ : ∇ψ` on velocity dofs.
    pub a: CsrMatrix,
    /// `−∫ q div φ`, pressure rows by velocity columns.
    pub b: CsrMatrix,
    /// `∫ φ · ψ` on velocity dofs.
    pub m: CsrMatrix,
    constraints: Vec<(usize, f64)>,
}

pub fn assemble(dofmap: &Arc<DofMap>, nu: f64) -> Result<SaddleSystem> {
    assemble_with(dofmap, nu, Execution::default())
}

pub fn assemble_with(dofmap: &Arc<DofMap>, nu: f64, exec: Execution) -> Result<SaddleSystem> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::invalid(format!("viscosity must be positive, got {nu}")));
    }
    let mesh = dofmap.mesh();
    let nvel = dofmap.num_velocity_dofs();
    let np = dofmap.num_pressure_dofs();
    let locals = exec.map(mesh.num_triangles(), |t| {
        let g = TriGeom::new(mesh.triangle_points(t));
        let nodes = dofmap.triangle_nodes(t);
        let verts = mesh.triangles()[t];
        let mut a = Vec::with_capacity(72);
        let mut m = Vec::with_capacity(72);
        let mut b = Vec::with_capacity(36);
        let mut stiff = [[0.0; 6]; 6];
        let mut mass = [[0.0; 6]; 6];
        let mut div = [[[0.0; 6]; 2]; 3];
        for (l, w) in VOLUME_RULE {
            let w = w * g.area;
            let phi = p2_values(l);
            let dphi = g.p2_gradients(l);
            for i in 0..6 {
                for j in 0..6 {
                    stiff[i][j] += w * (dphi[i][0] * dphi[j][0] + dphi[i][1] * dphi[j][1]);
                    mass[i][j] += w * phi[i] * phi[j];
                }
                for k in 0..3 {
                    for c in 0..2 {
                        div[k][c][i] -= w * l[k] * dphi[i][c];
                    }
                }
            }
        }
        for i in 0..6 {
            for j in 0..6 {
                for c in 0..2 {
                    a.push((2 * nodes[i] + c, 2 * nodes[j] + c, nu * stiff[i][j]));
                    m.push((2 * nodes[i] + c, 2 * nodes[j] + c, mass[i][j]));
                }
            }
            for k in 0..3 {
                for c in 0..2 {
                    b.push((verts[k], 2 * nodes[i] + c, div[k][c][i]));
                }
            }
        }
        (a, b, m)
    });
    let mut ta = Vec::new();
    let mut tb = Vec::new();
    let mut tm = Vec::new();
    for (a, b, m) in locals {
        ta.extend(a);
        tb.extend(b);
        tm.extend(m);
    }
    Ok(SaddleSystem {
        dofmap: Arc::clone(dofmap),
        nu,
        a: CsrMatrix::from_triplets(nvel, nvel, ta),
        b: CsrMatrix::from_triplets(np, nvel, tb),
        m: CsrMatrix::from_triplets(nvel, nvel, tm),
        constraints: Vec::new(),
    })
}

/// Records Dirichlet values on the given tags.
///
/// Every tag present on the mesh except OUT must be listed; OUT is the
/// natural outflow boundary and may not be constrained. Where two tags share
/// a node the later entry wins.
pub fn apply_dirichlet(system: SaddleSystem, conditions: &[BoundaryCondition]) -> Result<SaddleSystem> {
    let dofmap = Arc::clone(&system.dofmap);
    let mesh = dofmap.mesh();
    if conditions.iter().any(|(tag, _)| *tag == Tag::Out) {
        return Err(Error::contract("OUT is a natural boundary and cannot carry Dirichlet data"));
    }
    for tag in [Tag::In, Tag::Wall, Tag::Free] {
        if mesh.has_tag(tag) && !conditions.iter().any(|(t, _)| *t == tag) {
            return Err(Error::contract(format!("no Dirichlet data for {tag}")));
        }
    }
    let mut values = BTreeMap::new();
    for (tag, f) in conditions {
        for &n in dofmap.boundary_nodes(*tag) {
            let v = f(dofmap.node_point(n));
            values.insert(2 * n, v[0]);
            values.insert(2 * n + 1, v[1]);
        }
    }
    Ok(SaddleSystem {
        constraints: values.into_iter().collect(),
        ..system
    })
}

impl SaddleSystem {
    pub fn dofmap(&self) -> &Arc<DofMap> {
        &self.dofmap
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Constrained velocity dofs and their values, sorted by dof.
    pub fn constraints(&self) -> &[(usize, f64)] {
        &self.constraints
    }

    /// Full saddle matrix before elimination.
    pub fn matrix(&self) -> CsrMatrix {
        let nvel = self.dofmap.num_velocity_dofs();
        let n = self.dofmap.num_dofs();
        let mut t: Vec<(usize, usize, f64)> = self.a.iter().collect();
        for (i, j, v) in self.b.iter() {
            t.push((nvel + i, j, v));
            t.push((j, nvel + i, v));
        }
        CsrMatrix::from_triplets(n, n, t)
    }

    /// Factorizes the matrix with the recorded constraints eliminated.
    pub fn factorize(&self) -> Result<SaddleSolver> {
        if !self.dofmap.mesh().has_tag(Tag::Out) {
            return Err(Error::contract("pressure is undetermined without an OUT boundary"));
        }
        SaddleSolver::new(self)
    }

    pub(crate) fn diagnostics(&self) -> String {
        mesh_diagnostics(&self.dofmap)
    }
}

pub(crate) fn mesh_diagnostics(dofmap: &DofMap) -> String {
    let mesh = dofmap.mesh();
    let q = mesh_quality(mesh, DEFAULT_ANGLE_THRESHOLD, DEFAULT_AREA_THRESHOLD);
    format!(
        "{} vertices, {} triangles, min angle {:.3} deg, min area {:.3e}, degenerate {}",
        mesh.num_vertices(),
        mesh.num_triangles(),
        q.min_angle,
        q.min_area,
        q.degenerate
    )
}

/// `∫ ∇φ : ∇ψ` on velocity dofs.
pub fn vector_stiffness(dofmap: &DofMap, exec: Execution) -> CsrMatrix {
    velocity_matrix(dofmap, exec, |_, _, dphi, _| {
        let mut k = [[0.0; 6]; 6];
        for i in 0..6 {
            for j in 0..6 {
                k[i][j] = dphi[i][0] * dphi[j][0] + dphi[i][1] * dphi[j][1];
            }
        }
        k
    })
}

/// `∫ φ · ψ` on velocity dofs.
pub fn vector_mass(dofmap: &DofMap, exec: Execution) -> CsrMatrix {
    velocity_matrix(dofmap, exec, |_, phi, _, _| {
        let mut k = [[0.0; 6]; 6];
        for i in 0..6 {
            for j in 0..6 {
                k[i][j] = phi[i] * phi[j];
            }
        }
        k
    })
}

/// Component-diagonal matrix from a scalar integrand evaluated at each
/// quadrature point.
fn velocity_matrix<F>(dofmap: &DofMap, exec: Execution, integrand: F) -> CsrMatrix
where
    F: Fn(&TriGeom, &[f64; 6], &[Point; 6], [f64; 3]) -> [[f64; 6]; 6] + Sync + Send,
{
    let mesh = dofmap.mesh();
    let n = dofmap.num_velocity_dofs();
    let locals = exec.map(mesh.num_triangles(), |t| {
        let g = TriGeom::new(mesh.triangle_points(t));
        let nodes = dofmap.triangle_nodes(t);
        let mut k = [[0.0; 6]; 6];
        for (l, w) in VOLUME_RULE {
            let phi = p2_values(l);
            let dphi = g.p2_gradients(l);
            let q = integrand(&g, &phi, &dphi, l);
            for i in 0..6 {
                for j in 0..6 {
                    k[i][j] += w * g.area * q[i][j];
                }
            }
        }
        let mut out = Vec::with_capacity(72);
        for i in 0..6 {
            for j in 0..6 {
                for c in 0..2 {
                    out.push((2 * nodes[i] + c, 2 * nodes[j] + c, k[i][j]));
                }
            }
        }
        out
    });
    CsrMatrix::from_triplets(n, n, locals.into_iter().flatten().collect())
}

/// `∫_Γ φ · ψ ds` over boundary edges with the given tag.
pub fn boundary_mass(dofmap: &DofMap, tag: Tag) -> CsrMatrix {
    let mesh = dofmap.mesh();
    let n = dofmap.num_velocity_dofs();
    let mut t = Vec::new();
    for e in mesh.boundary_edges_tagged(tag) {
        let len = mesh.edge_length(e.edge);
        let nodes = dofmap.edge_nodes(e.vertices, e.edge);
        let mut k = [[0.0; 3]; 3];
        for (s, w) in EDGE_RULE {
            let phi = p2_edge_values(s);
            for i in 0..3 {
                for j in 0..3 {
                    k[i][j] += w * len * phi[i] * phi[j];
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                for c in 0..2 {
                    t.push((2 * nodes[i] + c, 2 * nodes[j] + c, k[i][j]));
                }
            }
        }
    }
    CsrMatrix::from_triplets(n, n, t)
}

/// Load vector `Σ_T ∫_T f · φ + F : ∇φ` for an integrand returning
/// `(f, F)` at each quadrature point of triangle `t`.
pub fn velocity_load<F>(dofmap: &DofMap, exec: Execution, integrand: F) -> Vec<f64>
where
    F: Fn(usize, &TriGeom, [f64; 3]) -> (Point, [[f64; 2]; 2]) + Sync + Send,
{
    let mesh = dofmap.mesh();
    let locals = exec.map(mesh.num_triangles(), |t| {
        let g = TriGeom::new(mesh.triangle_points(t));
        let mut local = [0.0; 12];
        for (l, w) in VOLUME_RULE {
            let (f, flux) = integrand(t, &g, l);
            let phi = p2_values(l);
            let dphi = g.p2_gradients(l);
            let w = w * g.area;
            for i in 0..6 {
                for c in 0..2 {
                    local[2 * i + c] +=
                        w * (f[c] * phi[i] + flux[c][0] * dphi[i][0] + flux[c][1] * dphi[i][1]);
                }
            }
        }
        (dofmap.triangle_nodes(t), local)
    });
    let mut out = vec![0.0; dofmap.num_velocity_dofs()];
    for (nodes, local) in locals {
        for i in 0..6 {
            for c in 0..2 {
                out[2 * nodes[i] + c] += local[2 * i + c];
            }
        }
    }
    out
}

/// Load vector `∫_Γ f · φ ds` over boundary edges with the given tag.
pub fn boundary_load(dofmap: &DofMap, tag: Tag, f: impl Fn(Point, Point) -> Point) -> Vec<f64> {
    let mesh = dofmap.mesh();
    let mut out = vec![0.0; dofmap.num_velocity_dofs()];
    for e in mesh.boundary_edges_tagged(tag) {
        let [a, b] = e.vertices.map(|v| mesh.vertex(v));
        let len = mesh.edge_length(e.edge);
        let n = mesh.boundary_normal(e);
        let nodes = dofmap.edge_nodes(e.vertices, e.edge);
        for (s, w) in EDGE_RULE {
            let v = f(crate::geom::lerp(a, b, s), n);
            let phi = p2_edge_values(s);
            for i in 0..3 {
                for c in 0..2 {
                    out[2 * nodes[i] + c] += w * len * phi[i] * v[c];
                }
            }
        }
    }
    out
}
