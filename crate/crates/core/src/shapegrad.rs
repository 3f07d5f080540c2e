//! Boundary shape gradient of the vortex objective.
//!
//! All boundary quantities live on the vertices of the FREE polyline, in the
//! order of [`Mesh::free_cycle`]. The normal `n` points out of the fluid,
//! into the obstacle, so the mean curvature of the initial circle is
//! negative.

use std::io::Write;

use crate::exec::Execution;
use crate::fem::element::{p2_edge_values, TriGeom, EDGE_RULE, P2_NODES};
use crate::fem::{
    boundary_load, boundary_mass, build_dofmap, vector_stiffness, CsrMatrix, Field, FieldKind,
    LinearSolver,
};
use crate::flow::{solve_adjoint, solve_state_with, AdjointSolution, Profile, StateSolution};
use crate::functionals::{eval_breakdown, h, h_prime, ObjectiveBreakdown, ObjectiveParams};
use crate::geom::{self, Point};
use crate::mesh::{apply_deformation, mesh_quality, Mesh, Tag, DEFAULT_ANGLE_THRESHOLD, DEFAULT_AREA_THRESHOLD};
use crate::{Error, Result};

/// One scalar per FREE polyline vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryScalar {
    pub nodes: Vec<usize>,
    pub values: Vec<f64>,
}

impl BoundaryScalar {
    pub fn constant(mesh: &Mesh, value: f64) -> Self {
        BoundaryScalar {
            nodes: mesh.free_cycle().to_vec(),
            values: vec![value; mesh.free_cycle().len()],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        BoundaryScalar {
            nodes: self.nodes.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len().max(1) as f64
    }

    /// Rows `node,x,y,value` under a header naming `value_name`.
    pub fn write_csv<W: Write>(&self, mesh: &Mesh, value_name: &str, mut out: W) -> std::io::Result<()> {
        writeln!(out, "node,x [length],y [length],{value_name}")?;
        for (&n, v) in self.nodes.iter().zip(&self.values) {
            let p = mesh.vertex(n);
            writeln!(out, "{n},{:.12e},{:.12e},{v:.12e}", p[0], p[1])?;
        }
        Ok(())
    }

    /// Per-vertex lookup table; non-FREE vertices map to `None`.
    fn by_vertex(&self, num_vertices: usize) -> Vec<Option<f64>> {
        let mut out = vec![None; num_vertices];
        for (&n, &v) in self.nodes.iter().zip(&self.values) {
            out[n] = Some(v);
        }
        out
    }
}

/// Unit normal (out of the fluid) and unit tangent at each FREE vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFrame {
    pub nodes: Vec<usize>,
    pub normals: Vec<Point>,
    /// `n` rotated by `−π/2`, so that `(τ, n)` is positively oriented.
    pub tangents: Vec<Point>,
}

impl BoundaryFrame {
    /// The same frame with every normal and tangent reversed.
    pub fn flipped(&self) -> Self {
        BoundaryFrame {
            nodes: self.nodes.clone(),
            normals: self.normals.iter().map(|&n| geom::scale(n, -1.0)).collect(),
            tangents: self.tangents.iter().map(|&t| geom::scale(t, -1.0)).collect(),
        }
    }
}

/// Vertex normals as the average of the two adjacent FREE edge normals
/// weighted by inverse edge length, which is exact on polygons inscribed in
/// a circle.
pub fn boundary_frame(mesh: &Mesh) -> Result<BoundaryFrame> {
    let cycle = mesh.free_cycle();
    if cycle.len() < 3 {
        return Err(Error::invalid("mesh has no closed FREE polyline"));
    }
    let edges: Vec<_> = mesh.free_edges().iter().map(|&k| mesh.boundary_edges()[k]).collect();
    let k = cycle.len();
    let mut normals = Vec::with_capacity(k);
    for i in 0..k {
        // edge i starts at cycle[i]; edge i-1 ends there
        let (prev, next) = (&edges[(i + k - 1) % k], &edges[i]);
        debug_assert_eq!(prev.vertices[1], cycle[i]);
        debug_assert_eq!(next.vertices[0], cycle[i]);
        let lp = mesh.edge_length(prev.edge);
        let ln = mesh.edge_length(next.edge);
        let n = geom::add(
            geom::scale(mesh.boundary_normal(prev), 1.0 / lp),
            geom::scale(mesh.boundary_normal(next), 1.0 / ln),
        );
        let len = geom::norm(n);
        if !(len > 0.0) {
            return Err(Error::mesh(format!("FREE polyline folds back at vertex {}", cycle[i])));
        }
        normals.push(geom::scale(n, 1.0 / len));
    }
    let tangents = normals.iter().map(|n| [n[1], -n[0]]).collect();
    Ok(BoundaryFrame {
        nodes: cycle.to_vec(),
        normals,
        tangents,
    })
}

/// `10⁻³` times the diameter of the mesh bounding box.
pub fn default_epsilon(mesh: &Mesh) -> f64 {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in mesh.vertices() {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    1e-3 * geom::dist(lo, hi)
}

/// Solves `ε a(N, φ) + (N, φ)_Γf = (n, φ)_Γf` for the quadratic field `N`.
pub fn extend_normal(mesh: &Mesh, epsilon: f64) -> Result<Field> {
    extend_normal_with(mesh, epsilon, Execution::default())
}

pub fn extend_normal_with(mesh: &Mesh, epsilon: f64, exec: Execution) -> Result<Field> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(format!("normal extension weight must be positive, got {epsilon}")));
    }
    if !mesh.has_tag(Tag::Free) {
        return Err(Error::invalid("mesh has no FREE boundary"));
    }
    let dofmap = build_dofmap(mesh);
    let k = vector_stiffness(&dofmap, exec);
    let mb = boundary_mass(&dofmap, Tag::Free);
    let n = dofmap.num_velocity_dofs();
    let matrix = CsrMatrix::from_triplets(
        n,
        n,
        k.iter().map(|(i, j, v)| (i, j, epsilon * v)).chain(mb.iter()).collect(),
    );
    let rhs = boundary_load(&dofmap, Tag::Free, |_, normal| normal);
    let diagnostics = format!("normal extension on {} vertices", mesh.num_vertices());
    let x = LinearSolver::new(&matrix, &[], diagnostics)?.solve(&rhs, &[])?;
    Field::from_coeffs(&dofmap, FieldKind::VectorP2, x)
}

/// Gradient of a quadratic vector field at each FREE vertex, averaged over
/// incident triangles with interior-angle weights.
pub fn nodal_gradients(field: &Field) -> Vec<[[f64; 2]; 2]> {
    let mesh = field.dofmap().mesh();
    mesh.free_cycle()
        .iter()
        .map(|&v| {
            let mut g = [[0.0; 2]; 2];
            let mut wsum = 0.0;
            for &t in mesh.vertex_triangles(v) {
                let tri = mesh.triangles()[t];
                let local = tri.iter().position(|&x| x == v).unwrap();
                let pts = mesh.triangle_points(t);
                let geo = TriGeom::new(pts);
                let w = interior_angle(pts, local);
                let gt = field.gradient_at(t, &geo, P2_NODES[local]);
                for i in 0..2 {
                    for j in 0..2 {
                        g[i][j] += w * gt[i][j];
                    }
                }
                wsum += w;
            }
            g.map(|row| row.map(|x| x / wsum))
        })
        .collect()
}

fn interior_angle(pts: [Point; 3], k: usize) -> f64 {
    let a = geom::sub(pts[(k + 1) % 3], pts[k]);
    let b = geom::sub(pts[(k + 2) % 3], pts[k]);
    geom::cross(a, b).atan2(geom::dot(a, b)).abs()
}

fn mat_vec(g: &[[f64; 2]; 2], x: Point) -> Point {
    [g[0][0] * x[0] + g[0][1] * x[1], g[1][0] * x[0] + g[1][1] * x[1]]
}

/// Mean curvature `div_Γ N / |N|` at the FREE vertices, with
/// `div_Γ N = tr ∇N − n · (∇N) n`.
pub fn curvature(n_ext: &Field) -> Result<BoundaryScalar> {
    let mesh = n_ext.dofmap().mesh();
    let frame = boundary_frame(mesh)?;
    Ok(curvature_in_frame(n_ext, &frame))
}

pub fn curvature_in_frame(n_ext: &Field, frame: &BoundaryFrame) -> BoundaryScalar {
    let grads = nodal_gradients(n_ext);
    let values = frame
        .nodes
        .iter()
        .zip(&frame.normals)
        .zip(&grads)
        .map(|((&v, &n), g)| {
            let div_gamma = g[0][0] + g[1][1] - geom::dot(n, mat_vec(g, n));
            // scale by the signed length of N along n
            div_gamma / geom::dot(n_ext.node_vector(v), n)
        })
        .collect();
    BoundaryScalar {
        nodes: frame.nodes.clone(),
        values,
    }
}

/// `(∇w) n` at each FREE vertex.
pub fn normal_derivative(field: &Field, frame: &BoundaryFrame) -> Vec<Point> {
    nodal_gradients(field)
        .iter()
        .zip(&frame.normals)
        .map(|(g, &n)| mat_vec(g, n))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientParams {
    pub alpha: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub nu: f64,
}

impl GradientParams {
    pub fn new(params: &ObjectiveParams, nu: f64) -> Self {
        GradientParams {
            alpha: params.alpha,
            gamma1: params.gamma1,
            gamma2: params.gamma2,
            nu,
        }
    }
}

/// Shape gradient `∇G` of `α P − J₁ − J₂` at the FREE vertices:
///
/// `ακ − γ₁/2 ω² − γ₂ h(det ∇u) + ∂ₙu · (ν ∂ₙv + γ₁ ω t + γ₂ P(u))`
///
/// with `ω = ∇×u`, `t = (−n₂, n₁)` and `P(u) = h′(det ∇u) cof(∇u) n`.
pub fn shape_gradient(
    state: &StateSolution,
    adjoint: &AdjointSolution,
    kappa: &BoundaryScalar,
    frame: &BoundaryFrame,
    params: &GradientParams,
) -> BoundaryScalar {
    let gu = nodal_gradients(&state.u);
    let gv = nodal_gradients(&adjoint.v);
    let values = (0..frame.nodes.len())
        .map(|i| {
            let n = frame.normals[i];
            let a = &gu[i];
            let dn_u = mat_vec(a, n);
            let dn_v = mat_vec(&gv[i], n);
            let omega = a[1][0] - a[0][1];
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            let t = [-n[1], n[0]];
            let cof_n = [a[1][1] * n[0] - a[1][0] * n[1], a[0][0] * n[1] - a[0][1] * n[0]];
            let hp = h_prime(det);
            let mut flux = geom::scale(dn_v, params.nu);
            flux = geom::add(flux, geom::scale(t, params.gamma1 * omega));
            flux = geom::add(flux, geom::scale(cof_n, params.gamma2 * hp));
            params.alpha * kappa.values[i] - 0.5 * params.gamma1 * omega * omega - params.gamma2 * h(det)
                + geom::dot(dn_u, flux)
        })
        .collect();
    BoundaryScalar {
        nodes: frame.nodes.clone(),
        values,
    }
}

/// `∇L = ∇G − ℓ + b (volume − m)`.
pub fn lagrangian_gradient(grad_g: &BoundaryScalar, ell: f64, b: f64, volume: f64, m: f64) -> BoundaryScalar {
    let shift = -ell + b * (volume - m);
    grad_g.map(|g| g + shift)
}

/// `∫_Γf g (θ · n) ds` with `g` linear and `θ` quadratic along each edge.
pub fn boundary_pairing(mesh: &Mesh, g: &BoundaryScalar, theta: &Field) -> f64 {
    let gv = g.by_vertex(mesh.num_vertices());
    let dofmap = theta.dofmap();
    let mut total = 0.0;
    for e in mesh.boundary_edges_tagged(Tag::Free) {
        let (ga, gb) = (gv[e.vertices[0]].unwrap_or(0.0), gv[e.vertices[1]].unwrap_or(0.0));
        let n = mesh.boundary_normal(e);
        let len = mesh.edge_length(e.edge);
        let nodes = dofmap.edge_nodes(e.vertices, e.edge);
        for (s, w) in EDGE_RULE {
            let phi = p2_edge_values(s);
            let th = (0..3).fold([0.0; 2], |acc, k| geom::add(acc, geom::scale(theta.node_vector(nodes[k]), phi[k])));
            total += w * len * ((1.0 - s) * ga + s * gb) * geom::dot(th, n);
        }
    }
    total
}

/// `‖θ‖²` in `L²(Γf)`.
pub fn boundary_norm_sq(theta: &Field) -> f64 {
    let dofmap = theta.dofmap();
    let mesh = dofmap.mesh();
    let mut total = 0.0;
    for e in mesh.boundary_edges_tagged(Tag::Free) {
        let len = mesh.edge_length(e.edge);
        let nodes = dofmap.edge_nodes(e.vertices, e.edge);
        for (s, w) in EDGE_RULE {
            let phi = p2_edge_values(s);
            let th = (0..3).fold([0.0; 2], |acc, k| geom::add(acc, geom::scale(theta.node_vector(nodes[k]), phi[k])));
            total += w * len * geom::dot(th, th);
        }
    }
    total
}

/// Flow data and objective weights shared by evaluations on different meshes.
#[derive(Debug, Clone)]
pub struct ShapeProblem {
    pub nu: f64,
    pub profile: Profile,
    pub params: ObjectiveParams,
    /// Normal-extension weight; [`default_epsilon`] when absent.
    pub epsilon: Option<f64>,
}

/// State and objective on one mesh.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub state: StateSolution,
    pub breakdown: ObjectiveBreakdown,
}

/// Everything needed to form a descent direction on one mesh.
#[derive(Debug, Clone)]
pub struct GradientData {
    pub frame: BoundaryFrame,
    pub normal_extension: Field,
    pub kappa: BoundaryScalar,
    pub adjoint: AdjointSolution,
    pub grad_g: BoundaryScalar,
}

impl ShapeProblem {
    pub fn evaluate(&self, mesh: &Mesh, exec: Execution) -> Result<Evaluation> {
        let state = solve_state_with(mesh, self.nu, None, &self.profile, exec)?;
        let breakdown = eval_breakdown(&state.u, &self.params);
        Ok(Evaluation { state, breakdown })
    }

    pub fn gradient(&self, eval: &Evaluation, exec: Execution) -> Result<GradientData> {
        let mesh = eval.state.mesh();
        let eps = self.epsilon.unwrap_or_else(|| default_epsilon(mesh));
        let frame = boundary_frame(mesh)?;
        let normal_extension = extend_normal_with(mesh, eps, exec)?;
        let kappa = curvature_in_frame(&normal_extension, &frame);
        let adjoint = solve_adjoint(&eval.state, self.params.gamma1, self.params.gamma2)?;
        let grad_g = shape_gradient(
            &eval.state,
            &adjoint,
            &kappa,
            &frame,
            &GradientParams::new(&self.params, self.nu),
        );
        Ok(GradientData {
            frame,
            normal_extension,
            kappa,
            adjoint,
            grad_g,
        })
    }
}

/// One row of a finite-difference check.
#[derive(Debug, Clone, PartialEq)]
pub struct FdRow {
    pub t: f64,
    /// Central difference `[𝒥(Ω₊) − 𝒥(Ω₋)] / 2t`; `None` if a deformed mesh
    /// was degenerate or its solve failed.
    pub fd: Option<f64>,
    pub abs_error: Option<f64>,
    pub rel_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeCheck {
    /// `⟨∇G, θ·n⟩` on the undeformed mesh.
    pub analytic: f64,
    pub rows: Vec<FdRow>,
    /// Order of the central differences estimated from successive
    /// differences `|FD(tᵢ) − FD(tᵢ₊₁)|`, one entry per usable triple.
    pub observed_orders: Vec<f64>,
    pub notices: Vec<String>,
}

impl DerivativeCheck {
    pub fn row(&self, t: f64) -> Option<&FdRow> {
        self.rows.iter().find(|r| r.t == t)
    }

    /// Order from the largest steps, where rounding error is smallest.
    pub fn observed_order(&self) -> Option<f64> {
        self.observed_orders.first().copied()
    }
}

/// Compares `⟨∇G, θ·n⟩` with central differences of the objective.
pub fn validate_shape_derivative(
    mesh: &Mesh,
    problem: &ShapeProblem,
    theta: &Field,
    steps: &[f64],
    exec: Execution,
) -> Result<DerivativeCheck> {
    let base = problem.evaluate(mesh, exec)?;
    let grad = problem.gradient(&base, exec)?;
    let analytic = boundary_pairing(mesh, &grad.grad_g, theta);
    let value = |m: &Mesh| -> std::result::Result<f64, String> {
        if !m.is_valid() {
            return Err("inverted triangle".into());
        }
        let q = mesh_quality(m, DEFAULT_ANGLE_THRESHOLD, DEFAULT_AREA_THRESHOLD);
        if q.degenerate {
            return Err(format!("degenerate mesh (min angle {:.2} deg)", q.min_angle));
        }
        problem
            .evaluate(m, Execution::Sequential)
            .map(|e| e.breakdown.objective)
            .map_err(|e| e.to_string())
    };
    let jobs: Vec<(usize, f64)> = steps.iter().enumerate().flat_map(|(i, &t)| [(i, t), (i, -t)]).collect();
    let values = exec.map(jobs.len(), |k| {
        let (_, t) = jobs[k];
        apply_deformation(mesh, theta, t)
            .map_err(|e| e.to_string())
            .and_then(|m| value(&m))
    });
    let mut rows = Vec::new();
    let mut notices = Vec::new();
    for (i, &t) in steps.iter().enumerate() {
        let (plus, minus) = (&values[2 * i], &values[2 * i + 1]);
        let fd = match (plus, minus) {
            (Ok(a), Ok(b)) => Some((a - b) / (2.0 * t)),
            (Err(e), _) | (_, Err(e)) => {
                notices.push(format!("step {t:e} skipped: {e}"));
                None
            }
        };
        let abs_error = fd.map(|f| (f - analytic).abs());
        let rel_error = abs_error.map(|e| e / analytic.abs().max(f64::MIN_POSITIVE));
        rows.push(FdRow { t, fd, abs_error, rel_error });
    }
    let mut observed_orders = Vec::new();
    for w in rows.windows(3) {
        if let (Some(a), Some(b), Some(c)) = (w[0].fd, w[1].fd, w[2].fd) {
            let (d1, d2) = ((a - b).abs(), (b - c).abs());
            if d1 > 0.0 && d2 > 0.0 {
                observed_orders.push((d1 / d2).ln() / (w[0].t / w[1].t).ln());
            }
        }
    }
    Ok(DerivativeCheck {
        analytic,
        rows,
        observed_orders,
        notices,
    })
}

/// Smooth vector field `bump(|x − c|) · dir(x)`, with `bump = 1` inside
/// `r_in` and `0` beyond `r_out`.
pub fn bump_field(
    mesh: &Mesh,
    center: Point,
    r_in: f64,
    r_out: f64,
    dir: impl Fn(Point) -> Point,
) -> Field {
    let dofmap = build_dofmap(mesh);
    Field::interpolate_vector(&dofmap, |p| {
        let r = geom::dist(p, center);
        let s = ((r - r_in) / (r_out - r_in)).clamp(0.0, 1.0);
        let w = if s <= 0.0 {
            1.0
        } else if s >= 1.0 {
            0.0
        } else {
            // C∞ step
            let f = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
            f(1.0 - s) / (f(1.0 - s) + f(s))
        };
        geom::scale(dir(p), w)
    })
}
