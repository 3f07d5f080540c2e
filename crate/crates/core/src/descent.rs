//! H¹ gradient descent with a volume constraint.
//!
//! Each iteration solves the state and adjoint, forms the boundary shape
//! gradient, extends it to a smooth deformation field `θ`, and moves the
//! mesh by `t θ` with a halving line search. The volume constraint is
//! handled either by an augmented Lagrangian (`aL`) or by restricting `θ`
//! to discretely divergence-free fields (`dF`).

use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::fem::element::{p2_edge_values, EDGE_RULE};
use crate::fem::{assemble_with, build_dofmap, CsrMatrix, Field, FieldKind, LinearSolver};
use crate::flow::{solve_state_with, Profile};
use crate::functionals::{ObjectiveBreakdown, ObjectiveParams};
use crate::geom::Point;
use crate::mesh::{
    adapt_mesh_with, apply_deformation, build_channel_mesh_with, mesh_quality, ChannelGeometry, Mesh,
    MeshingOptions, QualityReport, Tag, DEFAULT_ANGLE_THRESHOLD, DEFAULT_AREA_THRESHOLD,
};
use crate::shapegrad::{
    boundary_norm_sq, boundary_pairing, lagrangian_gradient, BoundaryScalar, Evaluation, ShapeProblem,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    /// Augmented Lagrangian, plain H¹ deformation (`λ = 0`).
    #[serde(rename = "aL")]
    AugmentedLagrangian,
    /// Divergence-free deformation (`λ = 1`).
    #[serde(rename = "dF")]
    DivergenceFree,
}

impl Algorithm {
    pub fn divergence_free(self) -> bool {
        self == Algorithm::DivergenceFree
    }

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::AugmentedLagrangian => "aL",
            Algorithm::DivergenceFree => "dF",
        }
    }
}

/// Complete description of one optimization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub gamma1: f64,
    pub gamma2: f64,
    pub alpha: f64,
    /// Step scale of the initial line-search step.
    pub beta: f64,
    /// Weight of the gradient term in the deformation solve.
    pub gamma_smooth: f64,
    /// Normal-extension weight; `10⁻³ ·` domain diameter when absent.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub ell0: f64,
    #[serde(default)]
    pub b0: f64,
    #[serde(default = "default_tau")]
    pub tau_mult: f64,
    #[serde(default = "default_b_max")]
    pub b_max: f64,
    /// Target volume; the initial fluid area when absent.
    #[serde(default)]
    pub target_volume: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    #[serde(default = "default_halvings")]
    pub max_halvings: usize,
    pub h_min: f64,
    pub h_max: f64,
    pub nu: f64,
    /// Peak-related amplitude `a` of the inflow `a (w² − y²)`.
    pub inflow_amplitude: f64,
    pub geometry: ChannelGeometry,
    pub meshing: MeshingOptions,
    /// Regrade the initial mesh by the speed of the initial state.
    #[serde(default = "default_true")]
    pub adapt_initial_mesh: bool,
}

fn default_tau() -> f64 {
    1.05
}

fn default_b_max() -> f64 {
    10.0
}

fn default_halvings() -> usize {
    12
}

fn default_true() -> bool {
    true
}

impl RunConfig {
    fn base(algorithm: Algorithm, gamma1: f64, gamma2: f64, alpha: f64) -> Self {
        RunConfig {
            algorithm,
            gamma1,
            gamma2,
            alpha,
            beta: 0.005,
            gamma_smooth: 0.05,
            epsilon: None,
            ell0: 0.0,
            b0: 0.0,
            tau_mult: default_tau(),
            b_max: default_b_max(),
            target_volume: None,
            tol: 1e-6,
            max_iter: 50,
            max_halvings: default_halvings(),
            h_min: 1.0 / 50.0,
            h_max: 1.0 / 30.0,
            nu: 0.01,
            inflow_amplitude: 1.2,
            geometry: ChannelGeometry::reference(),
            meshing: MeshingOptions::default(),
            adapt_initial_mesh: true,
        }
    }

    /// Curl objective, augmented Lagrangian.
    pub fn curl_al() -> Self {
        RunConfig {
            ell0: 20.0,
            b0: 1e-4,
            ..Self::base(Algorithm::AugmentedLagrangian, 1.0, 0.0, 6.0)
        }
    }

    /// Det-grad objective, augmented Lagrangian.
    pub fn detgrad_al() -> Self {
        RunConfig {
            ell0: 0.5,
            b0: 1e-2,
            ..Self::base(Algorithm::AugmentedLagrangian, 0.0, 1.0, 1.3)
        }
    }

    pub fn curl_df() -> Self {
        Self::base(Algorithm::DivergenceFree, 1.0, 0.0, 5.0)
    }

    pub fn detgrad_df() -> Self {
        Self::base(Algorithm::DivergenceFree, 0.0, 1.0, 1.0)
    }

    /// Mixed configuration `k`, divergence-free.
    pub fn mixed_df(k: u32) -> Result<Self> {
        let p = ObjectiveParams::mixed(k)?;
        Ok(Self::base(Algorithm::DivergenceFree, p.gamma1, p.gamma2, p.alpha))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        positive("beta", self.beta)?;
        positive("gamma_smooth", self.gamma_smooth)?;
        positive("tol", self.tol)?;
        positive("nu", self.nu)?;
        positive("h_min", self.h_min)?;
        if let Some(e) = self.epsilon {
            positive("epsilon", e)?;
        }
        if let Some(m) = self.target_volume {
            positive("target_volume", m)?;
        }
        if self.h_max < self.h_min {
            return Err(Error::invalid("h_max must be at least h_min"));
        }
        for (name, v) in [("gamma1", self.gamma1), ("gamma2", self.gamma2), ("alpha", self.alpha)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.algorithm == Algorithm::AugmentedLagrangian {
            if !(self.tau_mult > 1.0) {
                return Err(Error::invalid("tau_mult must exceed 1"));
            }
            if !(self.b0 > 0.0 && self.b_max > self.b0) {
                return Err(Error::invalid("multiplier bounds need b_max > b0 > 0"));
            }
        }
        self.geometry.validate()?;
        Ok(())
    }

    pub fn profile(&self) -> Profile {
        let (lo, hi) = self.geometry.bounds().unwrap_or(([0.0, -0.5], [2.0, 0.5]));
        Profile::Poiseuille {
            amplitude: self.inflow_amplitude,
            center: 0.5 * (lo[1] + hi[1]),
            half_width: 0.5 * (hi[1] - lo[1]),
        }
    }
}

/// Telemetry of one iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Terms of the current iterate under the multipliers of the next step.
    pub breakdown: ObjectiveBreakdown,
    /// Accepted step `t_k`, zero for iteration 0.
    pub step: f64,
    /// Halvings before acceptance.
    pub retries: usize,
    pub ell: f64,
    pub b: f64,
    pub quality: QualityReport,
    pub accepted: bool,
    /// Objective (aL: Lagrangian) of the previous iterate and of this one,
    /// both under the multipliers used by the line search.
    pub previous_value: Option<f64>,
    pub accepted_value: Option<f64>,
    /// `⟨∇K, θ·n⟩` of the descent direction that produced this iterate.
    pub pairing: Option<f64>,
    /// Maximum divergence residual of `θ` (dF only).
    pub theta_divergence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StopReason {
    Tolerance,
    MaxIterations,
    /// Deformation field vanished on the free boundary.
    Stationary,
    /// No halving produced a valid, decreasing step; holds the last trial's defect.
    NoDescent(String),
    /// A solve failed; records up to the failure are kept.
    Aborted(String),
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub records: Vec<IterationRecord>,
    /// FREE polyline of every iterate, starting with the initial shape.
    pub polylines: Vec<Vec<Point>>,
    pub initial_mesh: Mesh,
    pub final_mesh: Mesh,
    pub stop: StopReason,
}

impl OptimizationResult {
    pub fn initial(&self) -> &IterationRecord {
        &self.records[0]
    }

    pub fn last(&self) -> &IterationRecord {
        self.records.iter().rev().find(|r| r.accepted).unwrap_or(&self.records[0])
    }

    /// `100 (final − initial) / initial` of the objective.
    pub fn objective_change_percent(&self) -> f64 {
        let (a, b) = (self.initial().breakdown.objective, self.last().breakdown.objective);
        100.0 * (b - a) / a.abs()
    }

    pub fn volume_change_percent(&self) -> f64 {
        let (a, b) = (self.initial().breakdown.volume, self.last().breakdown.volume);
        100.0 * (b - a) / a
    }
}

/// Solves `γ a(θ, φ) + (θ, φ) + λ b(φ, ϑ) = −(∇K n, φ)_Γf`, `λ b(θ, ψ) = 0`
/// with `θ = 0` on IN, WALL and OUT.
pub fn solve_deformation(mesh: &Mesh, grad_k: &BoundaryScalar, gamma_smooth: f64, divergence_free: bool) -> Result<Field> {
    solve_deformation_with(mesh, grad_k, gamma_smooth, divergence_free, Execution::default())
}

pub fn solve_deformation_with(
    mesh: &Mesh,
    grad_k: &BoundaryScalar,
    gamma_smooth: f64,
    divergence_free: bool,
    exec: Execution,
) -> Result<Field> {
    if !(gamma_smooth > 0.0) {
        return Err(Error::invalid("gamma_smooth must be positive"));
    }
    if grad_k.nodes.as_slice() != mesh.free_cycle() {
        return Err(Error::invalid("boundary gradient is not defined on this mesh's FREE polyline"));
    }
    let dofmap = build_dofmap(mesh);
    let blocks = assemble_with(&dofmap, gamma_smooth, exec)?;
    let nvel = dofmap.num_velocity_dofs();
    let n = if divergence_free { dofmap.num_dofs() } else { nvel };
    let mut t: Vec<(usize, usize, f64)> = blocks.a.iter().chain(blocks.m.iter()).collect();
    if divergence_free {
        for (i, j, v) in blocks.b.iter() {
            t.push((nvel + i, j, v));
            t.push((j, nvel + i, v));
        }
    }
    let matrix = CsrMatrix::from_triplets(n, n, t);

    let mut rhs = vec![0.0; n];
    let mut gv = vec![0.0; mesh.num_vertices()];
    for (&v, &g) in grad_k.nodes.iter().zip(&grad_k.values) {
        gv[v] = g;
    }
    for e in mesh.boundary_edges_tagged(Tag::Free) {
        let normal = mesh.boundary_normal(e);
        let len = mesh.edge_length(e.edge);
        let nodes = dofmap.edge_nodes(e.vertices, e.edge);
        let (ga, gb) = (gv[e.vertices[0]], gv[e.vertices[1]]);
        for (s, w) in EDGE_RULE {
            let g = (1.0 - s) * ga + s * gb;
            let phi = p2_edge_values(s);
            for k in 0..3 {
                for c in 0..2 {
                    rhs[2 * nodes[k] + c] -= w * len * g * phi[k] * normal[c];
                }
            }
        }
    }

    let mut fixed = Vec::new();
    for tag in [Tag::In, Tag::Wall, Tag::Out] {
        fixed.extend(dofmap.boundary_dofs(tag));
    }
    fixed.sort_unstable();
    fixed.dedup();
    let diagnostics = format!("deformation solve on {} vertices", mesh.num_vertices());
    let mut x = LinearSolver::new(&matrix, &fixed, diagnostics)?.solve(&rhs, &[])?;
    x.truncate(nvel);
    Field::from_coeffs(&dofmap, FieldKind::VectorP2, x)
}

/// `max_q |b(θ, q)|` over the linear pressure basis.
pub fn divergence_residual(theta: &Field) -> Result<f64> {
    let blocks = assemble_with(theta.dofmap(), 1.0, Execution::default())?;
    Ok(blocks.b.mul_vec(theta.coeffs()).iter().fold(0.0, |m, v| m.max(v.abs())))
}

/// `β |value| / norm_sq`; `None` when the boundary norm is below `10⁻¹⁴`.
pub fn initial_step_from(value: f64, norm_sq: f64, beta: f64) -> Option<f64> {
    if !(norm_sq.sqrt() > 1e-14) {
        return None;
    }
    Some(beta * value.abs() / norm_sq)
}

/// Initial step `β |𝒥| / ‖θ‖²_{L²(Γf)}`.
///
/// The absolute value keeps the step positive when the objective is
/// negative. `None` signals a stationary point.
pub fn initial_step(value: f64, theta: &Field, beta: f64) -> Option<f64> {
    initial_step_from(value, boundary_norm_sq(theta), beta)
}

/// `(ℓ − b F, τ b)` with the penalty frozen once `b ≥ b̄`.
pub fn update_multipliers(ell: f64, b: f64, defect: f64, tau: f64, b_max: f64) -> (f64, f64) {
    (ell - b * defect, if b < b_max { tau * b } else { b })
}

/// Result of a line search.
#[derive(Debug)]
pub enum LineSearch<T> {
    Accepted { mesh: Mesh, t: f64, retries: usize, value: f64, data: T },
    Rejected { reasons: Vec<String> },
}

/// Why a trial mesh is unusable, if it is.
pub fn mesh_defect(mesh: &Mesh) -> Option<String> {
    if !mesh.is_valid() {
        return Some("inverted triangle".into());
    }
    let q = mesh_quality(mesh, DEFAULT_ANGLE_THRESHOLD, DEFAULT_AREA_THRESHOLD);
    if q.degenerate {
        return Some(format!("degenerate mesh (min angle {:.2} deg, min area {:.2e})", q.min_angle, q.min_area));
    }
    if !mesh.free_polyline_is_simple() {
        return Some("FREE polyline self-intersects".into());
    }
    None
}

/// Tries `t₀, t₀/2, …` (`max_halvings` halvings) and returns the largest
/// step whose deformed mesh is valid and whose value is strictly below
/// `reference`. Trials are evaluated in batches of `exec.width()`.
pub fn line_search<T, F>(
    mesh: &Mesh,
    theta: &Field,
    t0: f64,
    reference: f64,
    max_halvings: usize,
    exec: Execution,
    evaluate: F,
) -> Result<LineSearch<T>>
where
    T: Send,
    F: Fn(&Mesh) -> Result<(f64, T)> + Sync + Send,
{
    if !(t0 > 0.0 && t0.is_finite()) {
        return Err(Error::invalid(format!("initial step must be positive, got {t0}")));
    }
    let width = exec.width().max(1);
    let mut reasons = Vec::new();
    let mut k = 0;
    while k <= max_halvings {
        let batch: Vec<usize> = (k..=(k + width - 1).min(max_halvings)).collect();
        let trials = exec.map(batch.len(), |i| -> Result<std::result::Result<(Mesh, f64, f64, T), String>> {
            let t = t0 / 2f64.powi(batch[i] as i32);
            let candidate = apply_deformation(mesh, theta, t)?;
            if let Some(why) = mesh_defect(&candidate) {
                return Ok(Err(why));
            }
            match evaluate(&candidate) {
                Ok((v, data)) if v.is_finite() && v < reference => Ok(Ok((candidate, t, v, data))),
                Ok((v, _)) => Ok(Err(format!("no decrease ({v:.9e} >= {reference:.9e})"))),
                Err(e) => Ok(Err(format!("solve failed: {e}"))),
            }
        });
        for (i, trial) in trials.into_iter().enumerate() {
            match trial? {
                Ok((mesh, t, value, data)) => {
                    return Ok(LineSearch::Accepted { mesh, t, retries: batch[i], value, data });
                }
                Err(why) => reasons.push(format!("t = {:.3e}: {why}", t0 / 2f64.powi(batch[i] as i32))),
            }
        }
        k += batch.len();
    }
    Ok(LineSearch::Rejected { reasons })
}

/// The starting mesh of a run: the channel mesh, regraded by the speed of
/// its Stokes flow when `adapt_initial_mesh` is set.
pub fn initial_mesh(config: &RunConfig, exec: Execution) -> Result<Mesh> {
    config.validate()?;
    let mesh = build_channel_mesh_with(&config.geometry, config.h_min, config.h_max, config.meshing)?;
    if !config.adapt_initial_mesh {
        return Ok(mesh);
    }
    let state = solve_state_with(&mesh, config.nu, None, &config.profile(), exec)?;
    adapt_mesh_with(&mesh, &state.u, config.h_min, config.h_max, config.meshing)
}

/// Runs the optimization loop.
pub fn optimize(config: &RunConfig) -> Result<OptimizationResult> {
    optimize_with(config, Execution::default(), |_, _| {})
}

/// As [`optimize`], calling `observe` after every recorded iteration.
pub fn optimize_with(
    config: &RunConfig,
    exec: Execution,
    mut observe: impl FnMut(&IterationRecord, &Mesh),
) -> Result<OptimizationResult> {
    config.validate()?;
    let mut problem = ShapeProblem {
        nu: config.nu,
        profile: config.profile(),
        params: ObjectiveParams::new(config.gamma1, config.gamma2, config.alpha),
        epsilon: config.epsilon,
    };
    let mut mesh = initial_mesh(config, exec)?;
    let aug = config.algorithm == Algorithm::AugmentedLagrangian;
    let (mut ell, mut b) = if aug { (config.ell0, config.b0) } else { (0.0, 0.0) };
    problem.params.m = config.target_volume.unwrap_or_else(|| mesh.area());
    problem.params.ell = ell;
    problem.params.b = b;
    let value_of = |br: &ObjectiveBreakdown| if aug { br.lagrangian } else { br.objective };

    let mut eval = problem.evaluate(&mesh, exec)?;
    let initial_mesh = mesh.clone();
    let quality = |m: &Mesh| mesh_quality(m, DEFAULT_ANGLE_THRESHOLD, DEFAULT_AREA_THRESHOLD);
    let mut records = vec![IterationRecord {
        iteration: 0,
        breakdown: eval.breakdown,
        step: 0.0,
        retries: 0,
        ell,
        b,
        quality: quality(&mesh),
        accepted: true,
        previous_value: None,
        accepted_value: None,
        pairing: None,
        theta_divergence: None,
    }];
    observe(&records[0], &mesh);
    let mut polylines = vec![mesh.free_polyline()];

    let mut stop = StopReason::MaxIterations;
    for k in 1..=config.max_iter {
        let step = descent_step(config, &problem, &mesh, &eval, exec, value_of(&eval.breakdown));
        let (next_mesh, next_eval, t, retries, pairing, divergence) = match step {
            Err(e) => {
                stop = StopReason::Aborted(e.to_string());
                break;
            }
            Ok(Step::Stationary) => {
                stop = StopReason::Stationary;
                break;
            }
            Ok(Step::Rejected(reasons)) => {
                let mut rec = records.last().unwrap().clone();
                rec.iteration = k;
                rec.accepted = false;
                rec.step = 0.0;
                rec.retries = config.max_halvings;
                rec.previous_value = None;
                rec.accepted_value = None;
                observe(&rec, &mesh);
                records.push(rec);
                stop = StopReason::NoDescent(reasons.last().cloned().unwrap_or_default());
                break;
            }
            Ok(Step::Accepted { mesh, eval, t, retries, pairing, divergence }) => (mesh, eval, t, retries, pairing, divergence),
        };
        let previous = value_of(&eval.breakdown);
        let current = value_of(&next_eval.breakdown);
        mesh = next_mesh;
        eval = next_eval;
        if aug {
            (ell, b) = update_multipliers(ell, b, eval.breakdown.volume_defect(), config.tau_mult, config.b_max);
            problem.params.ell = ell;
            problem.params.b = b;
            eval.breakdown = eval.breakdown.with_multipliers(ell, b);
        }
        let rec = IterationRecord {
            iteration: k,
            breakdown: eval.breakdown,
            step: t,
            retries,
            ell,
            b,
            quality: quality(&mesh),
            accepted: true,
            previous_value: Some(previous),
            accepted_value: Some(current),
            pairing: Some(pairing),
            theta_divergence: divergence,
        };
        observe(&rec, &mesh);
        records.push(rec);
        polylines.push(mesh.free_polyline());
        if (current - previous).abs() < config.tol {
            stop = StopReason::Tolerance;
            break;
        }
    }
    Ok(OptimizationResult {
        records,
        polylines,
        initial_mesh,
        final_mesh: mesh,
        stop,
    })
}

enum Step {
    Stationary,
    Rejected(Vec<String>),
    Accepted {
        mesh: Mesh,
        eval: Evaluation,
        t: f64,
        retries: usize,
        pairing: f64,
        divergence: Option<f64>,
    },
}

fn descent_step(
    config: &RunConfig,
    problem: &ShapeProblem,
    mesh: &Mesh,
    eval: &Evaluation,
    exec: Execution,
    reference: f64,
) -> Result<Step> {
    let grad = problem.gradient(eval, exec)?;
    let br = &eval.breakdown;
    let grad_k = match config.algorithm {
        Algorithm::AugmentedLagrangian => {
            lagrangian_gradient(&grad.grad_g, br.params.ell, br.params.b, br.volume, br.params.m)
        }
        Algorithm::DivergenceFree => grad.grad_g,
    };
    let divergence_free = config.algorithm.divergence_free();
    let theta = solve_deformation_with(mesh, &grad_k, config.gamma_smooth, divergence_free, exec)?;
    let pairing = boundary_pairing(mesh, &grad_k, &theta);
    let divergence = if divergence_free { Some(divergence_residual(&theta)?) } else { None };
    let Some(t0) = initial_step(reference, &theta, config.beta) else {
        return Ok(Step::Stationary);
    };
    let aug = config.algorithm == Algorithm::AugmentedLagrangian;
    let outcome = line_search(mesh, &theta, t0, reference, config.max_halvings, exec, |m| {
        let e = problem.evaluate(m, Execution::Sequential)?;
        let v = if aug { e.breakdown.lagrangian } else { e.breakdown.objective };
        Ok((v, e))
    })?;
    Ok(match outcome {
        LineSearch::Rejected { reasons } => Step::Rejected(reasons),
        LineSearch::Accepted { mesh, t, retries, data, .. } => Step::Accepted {
            mesh,
            eval: data,
            t,
            retries,
            pairing,
            divergence,
        },
    })
}
