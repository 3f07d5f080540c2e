//! Vortex functionals, perimeter, volume, the composite objective and the
//! augmented Lagrangian.

use serde::{Deserialize, Serialize};

use crate::fem::element::{TriGeom, VOLUME_RULE};
use crate::fem::Field;
use crate::{Error, Result};

/// `h(t) = t³/(t² + 1)` for `t > 0`, zero otherwise.
pub fn h(t: f64) -> f64 {
    if t > 0.0 {
        t * t * t / (t * t + 1.0)
    } else {
        0.0
    }
}

pub fn h_prime(t: f64) -> f64 {
    if t > 0.0 {
        let s = 1.0 + t * t;
        (t.powi(4) + 3.0 * t * t) / (s * s)
    } else {
        0.0
    }
}

pub fn h_second(t: f64) -> f64 {
    if t > 0.0 {
        2.0 * t * (3.0 - t * t) / (1.0 + t * t).powi(3)
    } else {
        0.0
    }
}

/// Weights of the objective and the volume-constraint multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveParams {
    pub gamma1: f64,
    pub gamma2: f64,
    pub alpha: f64,
    /// Lagrange multiplier `ℓ`.
    #[serde(default)]
    pub ell: f64,
    /// Penalty weight `b`.
    #[serde(default)]
    pub b: f64,
    /// Target volume `m`.
    #[serde(default)]
    pub m: f64,
}

impl ObjectiveParams {
    pub fn new(gamma1: f64, gamma2: f64, alpha: f64) -> Self {
        ObjectiveParams {
            gamma1,
            gamma2,
            alpha,
            ell: 0.0,
            b: 0.0,
            m: 0.0,
        }
    }

    /// Mixed configuration `k`: `α = 5 + k`, `γ₁ = 1`, `γ₂ = k`.
    pub fn mixed(k: u32) -> Result<Self> {
        if !(1..=10).contains(&k) {
            return Err(Error::invalid(format!("mixed configuration {k} outside 1..=10")));
        }
        Ok(ObjectiveParams::new(1.0, k as f64, 5.0 + k as f64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    /// `γ₁/2 ∫ |∇×u|²`.
    pub j1: f64,
    /// `γ₂ ∫ h(det ∇u)`.
    pub j2: f64,
    pub perimeter: f64,
    pub volume: f64,
    /// `α P − j1 − j2`.
    pub objective: f64,
    /// `objective − ℓ F + b/2 F²` with `F = volume − m`.
    pub lagrangian: f64,
    pub params: ObjectiveParams,
}

impl ObjectiveBreakdown {
    pub fn volume_defect(&self) -> f64 {
        self.volume - self.params.m
    }

    /// Same flow and geometry terms under new multipliers.
    pub fn with_multipliers(&self, ell: f64, b: f64) -> Self {
        let params = ObjectiveParams { ell, b, ..self.params };
        let f = self.volume - params.m;
        ObjectiveBreakdown {
            lagrangian: self.objective - ell * f + 0.5 * b * f * f,
            params,
            ..*self
        }
    }
}

/// Unweighted integrals `∫|∇×u|²`, `∫h(det ∇u)` and `∫|det ∇u|`.
pub fn flow_integrals(u: &Field) -> [f64; 3] {
    let mesh = u.dofmap().mesh();
    let mut acc = [0.0; 3];
    for t in 0..mesh.num_triangles() {
        let g = TriGeom::new(mesh.triangle_points(t));
        for (l, w) in VOLUME_RULE {
            let a = u.gradient_at(t, &g, l);
            let curl = a[1][0] - a[0][1];
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            let w = w * g.area;
            acc[0] += w * curl * curl;
            acc[1] += w * h(det);
            acc[2] += w * det.abs();
        }
    }
    acc
}

/// Objective terms of the velocity `u` on its own mesh.
pub fn eval_breakdown(u: &Field, params: &ObjectiveParams) -> ObjectiveBreakdown {
    let mesh = u.dofmap().mesh();
    let [curl2, hdet, _] = flow_integrals(u);
    let j1 = 0.5 * params.gamma1 * curl2;
    let j2 = params.gamma2 * hdet;
    let perimeter = mesh.boundary_length(crate::mesh::Tag::Free);
    let volume = mesh.area();
    let objective = params.alpha * perimeter - j1 - j2;
    let f = volume - params.m;
    ObjectiveBreakdown {
        j1,
        j2,
        perimeter,
        volume,
        objective,
        lagrangian: objective - params.ell * f + 0.5 * params.b * f * f,
        params: *params,
    }
}

/// Splits a configuration-`k` objective into `5P − J₁` and `P − J₂/k`, so
/// that `curl_part + k · detgrad_part` equals the objective.
pub fn mixed_split(breakdown: &ObjectiveBreakdown, k: u32) -> Result<(f64, f64)> {
    let expected = ObjectiveParams::mixed(k)?;
    let p = breakdown.params;
    if p.gamma1 != expected.gamma1 || p.gamma2 != expected.gamma2 || p.alpha != expected.alpha {
        return Err(Error::invalid(format!(
            "breakdown was not evaluated with configuration {k} weights"
        )));
    }
    let kf = k as f64;
    Ok((5.0 * breakdown.perimeter - breakdown.j1, breakdown.perimeter - breakdown.j2 / kf))
}
