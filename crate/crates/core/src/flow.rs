//! Stokes state and adjoint solves on a fixed mesh.
//!
//! The state is computed as the total velocity `u` with `u = g` on IN and
//! `u = 0` on WALL and FREE; OUT carries the do-nothing condition. The
//! adjoint problem shares the factorized operator because it constrains the
//! same dofs, only homogeneously.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use crate::exec::Execution;
use crate::fem::{
    self, apply_dirichlet, assemble_with, build_dofmap, DofMap, Field, SaddleSolver,
};
use crate::functionals::h_prime;
use crate::geom::Point;
use crate::mesh::{Mesh, Tag};
use crate::{Error, Result};

/// Inflow velocity profile on IN.
#[derive(Clone)]
pub enum Profile {
    /// `(a·(w² − (y − c)²), 0)`.
    Poiseuille { amplitude: f64, center: f64, half_width: f64 },
    Zero,
    Custom(Arc<dyn Fn(Point) -> Point + Send + Sync>),
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Poiseuille { amplitude, center, half_width } => f
                .debug_struct("Poiseuille")
                .field("amplitude", amplitude)
                .field("center", center)
                .field("half_width", half_width)
                .finish(),
            Profile::Zero => f.write_str("Zero"),
            Profile::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl Default for Profile {
    fn default() -> Self {
        Profile::reference()
    }
}

impl Profile {
    /// `g = (1.2 (0.25 − y²), 0)`.
    pub fn reference() -> Self {
        Profile::Poiseuille {
            amplitude: 1.2,
            center: 0.0,
            half_width: 0.5,
        }
    }

    pub fn eval(&self, p: Point) -> Point {
        match self {
            Profile::Poiseuille { amplitude, center, half_width } => {
                let y = p[1] - center;
                [amplitude * (half_width * half_width - y * y), 0.0]
            }
            Profile::Zero => [0.0, 0.0],
            Profile::Custom(f) => f(p),
        }
    }
}

/// Discrete state: total velocity, pressure and the inflow extension.
#[derive(Debug, Clone)]
pub struct StateSolution {
    pub u: Field,
    pub p: Field,
    pub g_lift: Field,
    pub nu: f64,
    solver: Arc<SaddleSolver>,
}

impl StateSolution {
    pub fn dofmap(&self) -> &Arc<DofMap> {
        self.u.dofmap()
    }

    pub fn mesh(&self) -> &Mesh {
        self.u.dofmap().mesh()
    }

    /// Factorized Stokes operator of this state.
    pub fn solver(&self) -> &Arc<SaddleSolver> {
        &self.solver
    }

    /// Largest `|b(u − g_lift, q)|` over pressure basis functions.
    pub fn divergence_residual(&self) -> f64 {
        let du = self.u.add_scaled(-1.0, &self.g_lift);
        divergence_residual(&self.solver, &du)
    }
}

#[derive(Debug, Clone)]
pub struct AdjointSolution {
    pub v: Field,
    pub pi: Field,
}

/// `max_q |b(w, q)|` with the B block of a factorized Stokes operator.
pub fn divergence_residual(solver: &SaddleSolver, w: &Field) -> f64 {
    let k = solver.linear_solver().matrix();
    let nvel = solver.dofmap().num_velocity_dofs();
    (nvel..k.nrows())
        .map(|i| {
            let (cols, vals) = k.row(i);
            cols.iter().zip(vals).map(|(&j, &b)| b * w.coeffs()[j]).sum::<f64>().abs()
        })
        .fold(0.0, f64::max)
}

/// Factorized Stokes operator with the channel boundary conditions.
pub fn stokes_operator(
    dofmap: &Arc<DofMap>,
    nu: f64,
    profile: &Profile,
    exec: Execution,
) -> Result<SaddleSolver> {
    check_compatible(dofmap, profile)?;
    let zero = |_: Point| [0.0, 0.0];
    let inflow = |p: Point| profile.eval(p);
    let mut conditions: Vec<fem::BoundaryCondition> = vec![(Tag::In, &inflow), (Tag::Wall, &zero)];
    if dofmap.mesh().has_tag(Tag::Free) {
        conditions.push((Tag::Free, &zero));
    }
    let system = apply_dirichlet(assemble_with(dofmap, nu, exec)?, &conditions)?;
    system.factorize()
}

fn check_compatible(dofmap: &DofMap, profile: &Profile) -> Result<()> {
    let inflow = dofmap.boundary_nodes(Tag::In);
    for tag in [Tag::Wall, Tag::Free] {
        for &n in dofmap.boundary_nodes(tag) {
            if inflow.binary_search(&n).is_ok() {
                let g = profile.eval(dofmap.node_point(n));
                if g[0].abs() > 1e-12 || g[1].abs() > 1e-12 {
                    return Err(Error::invalid(format!(
                        "inflow profile is {g:?} at the {tag} corner {:?}; it must vanish there",
                        dofmap.node_point(n)
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Discrete Stokes extension of the inflow data: equal to the profile on IN
/// dofs, zero on WALL and FREE dofs, discretely divergence free.
pub fn lift_inflow(dofmap: &Arc<DofMap>, profile: &Profile) -> Result<Field> {
    let solver = stokes_operator(dofmap, 1.0, profile, Execution::default())?;
    Ok(solver.solve(&vec![0.0; dofmap.num_dofs()])?.0)
}

/// Body force, `None` for the force-free channel.
pub type BodyForce<'a> = Option<&'a (dyn Fn(Point) -> Point + Sync)>;

pub fn solve_state(mesh: &Mesh, nu: f64, f: BodyForce, profile: &Profile) -> Result<StateSolution> {
    solve_state_with(mesh, nu, f, profile, Execution::default())
}

pub fn solve_state_with(
    mesh: &Mesh,
    nu: f64,
    f: BodyForce,
    profile: &Profile,
    exec: Execution,
) -> Result<StateSolution> {
    let dofmap = build_dofmap(mesh);
    let solver = stokes_operator(&dofmap, nu, profile, exec)?;
    let zero_rhs = vec![0.0; dofmap.num_dofs()];
    let (g_lift, p0) = solver.solve(&zero_rhs)?;
    let (u, p) = match f {
        None => (g_lift.clone(), p0),
        Some(f) => {
            let mut rhs = fem::velocity_load(&dofmap, exec, |_, g, l| (f(g.point(l)), [[0.0; 2]; 2]));
            rhs.resize(dofmap.num_dofs(), 0.0);
            solver.solve(&rhs)?
        }
    };
    Ok(StateSolution {
        u,
        p,
        g_lift,
        nu,
        solver: Arc::new(solver),
    })
}

/// Derivative of `−γ₁/2 ∫|∇×u|² − γ₂ ∫h(det ∇u)` in direction `φ`, as a
/// vector over velocity dofs.
pub fn adjoint_rhs(state: &StateSolution, gamma1: f64, gamma2: f64) -> Vec<f64> {
    adjoint_rhs_of(&state.u, gamma1, gamma2, Execution::default())
}

pub fn adjoint_rhs_of(u: &Field, gamma1: f64, gamma2: f64, exec: Execution) -> Vec<f64> {
    let dofmap = u.dofmap();
    if gamma1 == 0.0 && gamma2 == 0.0 {
        return vec![0.0; dofmap.num_velocity_dofs()];
    }
    fem::velocity_load(dofmap, exec, |t, g, l| {
        let a = u.gradient_at(t, g, l);
        let curl = a[1][0] - a[0][1];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let hp = if gamma2 != 0.0 { h_prime(det) } else { 0.0 };
        let mut flux = [[0.0; 2]; 2];
        // curl φ = ∂₁φ₂ − ∂₂φ₁
        flux[1][0] -= gamma1 * curl;
        flux[0][1] += gamma1 * curl;
        // dDet(A)[H] = A₁₁H₂₂ + A₂₂H₁₁ − A₁₂H₂₁ − A₂₁H₁₂
        flux[1][1] -= gamma2 * hp * a[0][0];
        flux[0][0] -= gamma2 * hp * a[1][1];
        flux[1][0] += gamma2 * hp * a[0][1];
        flux[0][1] += gamma2 * hp * a[1][0];
        ([0.0; 2], flux)
    })
}

/// Adjoint velocity and pressure, zero on IN, WALL and FREE.
pub fn solve_adjoint(state: &StateSolution, gamma1: f64, gamma2: f64) -> Result<AdjointSolution> {
    let mut rhs = adjoint_rhs(state, gamma1, gamma2);
    rhs.resize(state.dofmap().num_dofs(), 0.0);
    let (v, pi) = state.solver.solve_homogeneous(&rhs)?;
    Ok(AdjointSolution { v, pi })
}

/// Legacy ASCII VTK with the velocity, pressure and optional adjoint
/// velocity as point data on the mesh vertices.
pub fn write_vtk<W: Write>(mut out: W, state: &StateSolution, adjoint: Option<&AdjointSolution>) -> std::io::Result<()> {
    let mesh = state.mesh();
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "stokes state")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.num_vertices())?;
    for p in mesh.vertices() {
        writeln!(out, "{:.10e} {:.10e} 0", p[0], p[1])?;
    }
    writeln!(out, "CELLS {} {}", mesh.num_triangles(), 4 * mesh.num_triangles())?;
    for t in mesh.triangles() {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(out, "CELL_TYPES {}", mesh.num_triangles())?;
    for _ in 0..mesh.num_triangles() {
        writeln!(out, "5")?;
    }
    writeln!(out, "POINT_DATA {}", mesh.num_vertices())?;
    let vectors = |out: &mut W, name: &str, f: &Field| -> std::io::Result<()> {
        writeln!(out, "VECTORS {name} double")?;
        for v in 0..mesh.num_vertices() {
            let x = f.node_vector(v);
            writeln!(out, "{:.10e} {:.10e} 0", x[0], x[1])?;
        }
        Ok(())
    };
    vectors(&mut out, "velocity", &state.u)?;
    writeln!(out, "SCALARS pressure double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for p in state.p.coeffs() {
        writeln!(out, "{p:.10e}")?;
    }
    if let Some(adj) = adjoint {
        vectors(&mut out, "adjoint_velocity", &adj.v)?;
    }
    Ok(())
}
