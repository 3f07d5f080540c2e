//! Built-in oracle suite.

use std::f64::consts::PI;
use std::sync::Arc;

use vortex_shape::descent::{optimize_with, RunConfig};
use vortex_shape::fem::element::{TriGeom, VOLUME_RULE};
use vortex_shape::flow::{solve_state, Profile};
use vortex_shape::functionals::{h, h_prime, h_second, ObjectiveParams};
use vortex_shape::geom;
use vortex_shape::mesh::{build_channel_mesh, ChannelGeometry, Mesh};
use vortex_shape::shapegrad::{
    boundary_pairing, bump_field, shape_gradient, validate_shape_derivative, GradientParams, ShapeProblem,
};
use vortex_shape::Execution;

pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

// Stream function ψ = sin²(πy)(1 − sin³(πx)) with ν = 1/2 and
// p = cos(πx/2) cos(πy), traction-free at x = 1.
const NU: f64 = 0.5;

fn phi(x: f64, k: usize) -> f64 {
    let (s, c) = ((PI * x).sin(), (PI * x).cos());
    match k {
        0 => 1.0 - s.powi(3),
        1 => -3.0 * PI * s * s * c,
        2 => -3.0 * PI * PI * (2.0 * s - 3.0 * s.powi(3)),
        _ => -3.0 * PI.powi(3) * c * (2.0 - 9.0 * s * s),
    }
}

fn exact_u(p: [f64; 2]) -> [f64; 2] {
    [phi(p[0], 0) * PI * (2.0 * PI * p[1]).sin(), -phi(p[0], 1) * (PI * p[1]).sin().powi(2)]
}

fn manufactured_errors(n: usize) -> Result<(f64, f64), String> {
    let mesh = Mesh::rectangle(0.0, 0.0, 1.0, 1.0, n, n).map_err(|e| e.to_string())?;
    let force = |p: [f64; 2]| {
        let (x, y) = (p[0], p[1]);
        let (s2, c2, sy) = ((2.0 * PI * y).sin(), (2.0 * PI * y).cos(), (PI * y).sin());
        let lap1 = phi(x, 2) * PI * s2 - 4.0 * PI.powi(3) * phi(x, 0) * s2;
        let lap2 = -phi(x, 3) * sy * sy - phi(x, 1) * 2.0 * PI * PI * c2;
        let dp = [-0.5 * PI * (0.5 * PI * x).sin() * (PI * y).cos(), -PI * (0.5 * PI * x).cos() * sy];
        [-NU * lap1 + dp[0], -NU * lap2 + dp[1]]
    };
    let state =
        solve_state(&mesh, NU, Some(&force), &Profile::Custom(Arc::new(exact_u))).map_err(|e| e.to_string())?;
    let (mut h1, mut l2) = (0.0, 0.0);
    for t in 0..mesh.num_triangles() {
        let g = TriGeom::new(mesh.triangle_points(t));
        for (l, w) in VOLUME_RULE {
            let [x, y] = g.point(l);
            let ge = [
                [phi(x, 1) * PI * (2.0 * PI * y).sin(), phi(x, 0) * 2.0 * PI * PI * (2.0 * PI * y).cos()],
                [-phi(x, 2) * (PI * y).sin().powi(2), -phi(x, 1) * PI * (2.0 * PI * y).sin()],
            ];
            let gh = state.u.gradient_at(t, &g, l);
            for i in 0..2 {
                for j in 0..2 {
                    h1 += w * g.area * (gh[i][j] - ge[i][j]).powi(2);
                }
            }
            let pe = (0.5 * PI * x).cos() * (PI * y).cos();
            l2 += w * g.area * (state.p.scalar_at(t, l) - pe).powi(2);
        }
    }
    Ok((h1.sqrt(), l2.sqrt()))
}

fn manufactured() -> Check {
    let errs: Result<Vec<_>, _> = [16, 32, 64, 128].into_iter().map(manufactured_errors).collect();
    let (pass, detail) = match errs {
        Err(e) => (false, e),
        Ok(errs) => {
            let orders: Vec<(f64, f64)> =
                errs.windows(2).map(|w| ((w[0].0 / w[1].0).log2(), (w[0].1 / w[1].1).log2())).collect();
            let pass = orders.iter().all(|(u, p)| (u - 2.0).abs() <= 0.3 && (p - 2.0).abs() <= 0.3);
            let text: Vec<String> = orders.iter().map(|(u, p)| format!("{u:.2}/{p:.2}")).collect();
            (pass, format!("H1 velocity / L2 pressure orders {}", text.join(", ")))
        }
    };
    Check { name: "manufactured solution", pass, detail }
}

fn shape_derivative() -> Check {
    let run = || -> Result<Check, String> {
        let mesh =
            build_channel_mesh(&ChannelGeometry::reference(), 1.0 / 100.0, 1.0 / 30.0).map_err(|e| e.to_string())?;
        let problem = ShapeProblem {
            nu: 0.01,
            profile: Profile::reference(),
            params: ObjectiveParams::new(1.0, 0.0, 6.0),
            epsilon: None,
        };
        let c = [0.325, 0.0];
        let theta = bump_field(&mesh, c, 0.2, 0.3, |p| geom::sub(p, c));
        let check = validate_shape_derivative(&mesh, &problem, &theta, &[8e-3, 4e-3, 2e-3, 1e-3, 1e-4], Execution::default())
            .map_err(|e| e.to_string())?;
        let fd = check.row(1e-4).and_then(|r| r.fd).ok_or("FD step 1e-4 failed")?;
        let rel = (check.analytic - fd).abs() / fd.abs();
        let order = check.observed_order().unwrap_or(0.0);

        // the same gradient with the adjoint flux taken without the viscosity factor
        let eval = problem.evaluate(&mesh, Execution::default()).map_err(|e| e.to_string())?;
        let grad = problem.gradient(&eval, Execution::default()).map_err(|e| e.to_string())?;
        let without_nu = GradientParams { nu: 1.0, ..GradientParams::new(&problem.params, problem.nu) };
        let g1 = shape_gradient(&eval.state, &grad.adjoint, &grad.kappa, &grad.frame, &without_nu);
        let rel_without = (boundary_pairing(&mesh, &g1, &theta) - fd).abs() / fd.abs();
        Ok(Check {
            name: "shape derivative",
            pass: rel <= 0.02 && order >= 1.8,
            detail: format!(
                "rel error {:.2}%, FD order {order:.2} (without viscosity factor: {:.1}%)",
                100.0 * rel,
                100.0 * rel_without
            ),
        })
    };
    run().unwrap_or_else(|e| Check { name: "shape derivative", pass: false, detail: e })
}

fn h_table() -> Check {
    let exact = h(0.0) == 0.0 && h(1.0) == 0.5 && h(2.0) == 1.6 && h(-1.0) == 0.0;
    let mut worst: f64 = 0.0;
    for t in [0.25, 0.5, 1.0, 1.75, 2.0, 3.0] {
        let e = 1e-4;
        worst = worst.max(((h(t + e) - h(t - e)) / (2.0 * e) - h_prime(t)).abs() / h_prime(t).abs());
        worst = worst.max(((h_prime(t + e) - h_prime(t - e)) / (2.0 * e) - h_second(t)).abs() / h_second(t).abs());
    }
    Check {
        name: "h table",
        pass: exact && worst <= 1e-6,
        detail: format!("table exact {exact}, worst derivative rel error {worst:.1e}"),
    }
}

fn divergence_free_volume() -> Check {
    let config = RunConfig {
        max_iter: 3,
        h_min: 1.0 / 25.0,
        h_max: 1.0 / 15.0,
        ..RunConfig::curl_df()
    };
    match optimize_with(&config, Execution::default(), |_, _| {}) {
        Err(e) => Check { name: "divergence-free volume", pass: false, detail: e.to_string() },
        Ok(r) => {
            let v0 = r.initial().breakdown.volume;
            let accepted: Vec<_> = r.records.iter().skip(1).filter(|x| x.accepted).collect();
            let drift = accepted.iter().map(|x| (x.breakdown.volume - v0).abs() / v0).fold(0.0, f64::max);
            let div = accepted.iter().filter_map(|x| x.theta_divergence).fold(0.0, f64::max);
            let monotone = accepted.iter().all(|x| x.accepted_value < x.previous_value);
            Check {
                name: "divergence-free volume",
                pass: !accepted.is_empty() && drift <= 0.015 && div <= 1e-10 && monotone,
                detail: format!(
                    "{} steps, max |dV|/V {:.3}%, max div {div:.1e}, monotone {monotone}",
                    accepted.len(),
                    100.0 * drift
                ),
            }
        }
    }
}

pub fn validate() -> Vec<Check> {
    vec![manufactured(), shape_derivative(), h_table(), divergence_free_volume()]
}
