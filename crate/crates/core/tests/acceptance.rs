//! Acceptance criteria, one PASS/FAIL line each.

mod common;

use std::time::{Duration, Instant};

use vortex_shape::descent::{initial_mesh, optimize, OptimizationResult, RunConfig, StopReason};
use vortex_shape::flow::{divergence_residual, solve_adjoint, solve_state, Profile};
use vortex_shape::functionals::{eval_breakdown, h, h_prime, h_second, mixed_split, ObjectiveParams};
use vortex_shape::geom;
use vortex_shape::mesh::{apply_deformation, build_channel_mesh, ChannelGeometry, Mesh};
use vortex_shape::shapegrad::{
    boundary_pairing, bump_field, curvature, default_epsilon, extend_normal, validate_shape_derivative, ShapeProblem,
};
use vortex_shape::Execution;

const CENTER: [f64; 2] = [0.325, 0.0];

struct Report {
    failed: usize,
}

impl Report {
    fn check(&mut self, id: u32, title: &str, pass: bool, detail: String, elapsed: Duration) {
        if !pass {
            self.failed += 1;
        }
        println!(
            "{} criterion {id:>2} {title}: {detail} [{:.1} s]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
}

fn poiseuille() -> (bool, String) {
    let mesh = Mesh::rectangle(0.0, -0.5, 2.0, 0.5, 60, 30).unwrap();
    let state = solve_state(&mesh, 0.01, None, &Profile::reference()).unwrap();
    let dofmap = state.dofmap();
    let mut err_u: f64 = 0.0;
    for n in 0..dofmap.num_nodes() {
        let p = dofmap.node_point(n);
        let u = state.u.node_vector(n);
        err_u = err_u.max((u[0] - 1.2 * (0.25 - p[1] * p[1])).abs()).max(u[1].abs());
    }
    let mut err_p: f64 = 0.0;
    for v in 0..mesh.num_vertices() {
        err_p = err_p.max((state.p.coeffs()[v] + 2.4 * 0.01 * (mesh.vertex(v)[0] - 2.0)).abs());
    }
    (err_u.max(err_p) <= 1e-8, format!("max velocity error {err_u:.2e}, max pressure error {err_p:.2e}"))
}

fn manufactured() -> (bool, String) {
    let errs: Vec<(f64, f64)> = [16, 32, 64, 128].iter().map(|&n| common::errors(n)).collect();
    let mut orders = Vec::new();
    for w in errs.windows(2) {
        orders.push(((w[0].0 / w[1].0).log2(), (w[0].1 / w[1].1).log2()));
    }
    let pass = orders.iter().all(|(u, p)| (u - 2.0).abs() <= 0.3 && (p - 2.0).abs() <= 0.3);
    let fmt: Vec<String> = orders.iter().map(|(u, p)| format!("{u:.2}/{p:.2}")).collect();
    (pass, format!("H1 velocity / L2 pressure orders {}", fmt.join(", ")))
}

fn shape_derivative() -> (bool, String) {
    // the reference geometry resolved at h = 1/100 along the obstacle
    let mesh = build_channel_mesh(&ChannelGeometry::reference(), 1.0 / 100.0, 1.0 / 30.0).unwrap();
    let problem = ShapeProblem {
        nu: 0.01,
        profile: Profile::reference(),
        params: ObjectiveParams::new(1.0, 0.0, 6.0),
        epsilon: None,
    };
    let fields = [
        ("radial", bump_field(&mesh, CENTER, 0.2, 0.3, |p| geom::sub(p, CENTER))),
        ("front", bump_field(&mesh, [0.2, 0.0], 0.05, 0.2, |_| [1.0, 0.0])),
        ("top", bump_field(&mesh, [0.325, 0.13], 0.05, 0.2, |_| [0.3, 1.0])),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, theta) in &fields {
        let check = validate_shape_derivative(
            &mesh,
            &problem,
            theta,
            &[8e-3, 4e-3, 2e-3, 1e-3, 1e-4],
            Execution::default(),
        )
        .unwrap();
        let rel = check.row(1e-4).and_then(|r| r.rel_error).unwrap_or(f64::INFINITY);
        let order = check.observed_order().unwrap_or(0.0);
        pass &= rel <= 0.02 && order >= 1.8;
        parts.push(format!("{name} rel {:.2}% order {order:.2}", 100.0 * rel));
    }
    (pass, parts.join("; "))
}

fn curvature_oracle() -> (bool, String) {
    let mesh = build_channel_mesh(&ChannelGeometry::reference(), 1.0 / 50.0, 1.0 / 30.0).unwrap();
    let n_ext = extend_normal(&mesh, default_epsilon(&mesh)).unwrap();
    let kappa = curvature(&n_ext).unwrap();
    let exact = -1.0 / 0.13;
    let mean_err = (kappa.mean() - exact).abs() / exact.abs();
    let theta = bump_field(&mesh, CENTER, 0.2, 0.3, |p| geom::sub(p, CENTER));
    let t = 1e-4;
    let fd = (apply_deformation(&mesh, &theta, t).unwrap().perimeter() - mesh.perimeter()) / t;
    let rel = (boundary_pairing(&mesh, &kappa, &theta) - fd).abs() / fd.abs();
    (
        mean_err <= 0.1 && rel <= 0.05,
        format!("mean kappa {:.4} ({:.2}% off), perimeter derivative rel {:.2}%", kappa.mean(), 100.0 * mean_err, 100.0 * rel),
    )
}

fn max_volume_drift(r: &OptimizationResult) -> f64 {
    let v0 = r.initial().breakdown.volume;
    r.records.iter().filter(|x| x.accepted).map(|x| (x.breakdown.volume - v0).abs() / v0).fold(0.0, f64::max)
}

fn monotone(r: &OptimizationResult) -> bool {
    r.records.iter().skip(1).filter(|x| x.accepted).all(|x| x.accepted_value.unwrap() < x.previous_value.unwrap())
}

fn summary(r: &OptimizationResult) -> String {
    format!(
        "objective {:+.2}%, volume {:+.3}%, {} iterations, stop {:?}",
        r.objective_change_percent(),
        r.volume_change_percent(),
        r.records.len() - 1,
        r.stop
    )
}

fn mixed_split_check() -> (bool, String) {
    let cfg = RunConfig::mixed_df(1).unwrap();
    let mesh = initial_mesh(&cfg, Execution::default()).unwrap();
    let state = solve_state(&mesh, cfg.nu, None, &cfg.profile()).unwrap();
    let params = ObjectiveParams::mixed(1).unwrap();
    let b = eval_breakdown(&state.u, &params);
    let (curl, det) = mixed_split(&b, 1).unwrap();
    let additivity = (curl + det - b.objective).abs();
    let pass = (curl - 2.45).abs() <= 0.15 * 2.45 && (det - 0.65).abs() <= 0.15 * 0.65 && additivity <= 1e-12;
    (pass, format!("curl part {curl:.4}, detgrad part {det:.4}, additivity defect {additivity:.1e}"))
}

fn h_table() -> (bool, String) {
    let exact = h(0.0) == 0.0 && h(1.0) == 0.5 && h(2.0) == 1.6 && h(-3.0) == 0.0;
    let mut worst: f64 = 0.0;
    for t in [0.3, 0.7, 1.0, 1.5, 2.0, 4.0] {
        let e = 1e-4;
        let d1 = (h(t + e) - h(t - e)) / (2.0 * e);
        let d2 = (h_prime(t + e) - h_prime(t - e)) / (2.0 * e);
        worst = worst.max((d1 - h_prime(t)).abs() / h_prime(t).abs());
        worst = worst.max((d2 - h_second(t)).abs() / h_second(t).abs());
    }
    (exact && worst <= 1e-6, format!("table exact: {exact}, worst derivative rel error {worst:.1e}"))
}

fn properties(runs: &[&OptimizationResult]) -> (bool, String) {
    let mut worst_pairing = f64::NEG_INFINITY;
    let mut worst_div: f64 = 0.0;
    let mut simple = true;
    for r in runs {
        for rec in r.records.iter().filter(|x| x.accepted) {
            if let Some(p) = rec.pairing {
                worst_pairing = worst_pairing.max(p);
            }
            if let Some(d) = rec.theta_divergence {
                worst_div = worst_div.max(d);
            }
        }
        simple &= r.polylines.iter().all(|p| geom::closed_polyline_is_simple(p));
    }
    let mesh = build_channel_mesh(&ChannelGeometry::reference(), 1.0 / 50.0, 1.0 / 30.0).unwrap();
    let state = solve_state(&mesh, 0.01, None, &Profile::reference()).unwrap();
    let adjoint = solve_adjoint(&state, 1.0, 1.0).unwrap();
    let flow_div = state.divergence_residual().max(divergence_residual(state.solver(), &adjoint.v));
    let pass = worst_pairing <= 0.0 && worst_div <= 1e-10 && flow_div <= 1e-10 && simple;
    (
        pass,
        format!(
            "max pairing {worst_pairing:.2e}, max theta divergence {worst_div:.1e}, state/adjoint divergence {flow_div:.1e}, simple polylines {simple}"
        ),
    )
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn main() {
    let mut report = Report { failed: 0 };

    let ((pass, detail), dt) = timed(poiseuille);
    report.check(1, "exact Poiseuille", pass && dt.as_secs_f64() < 5.0, detail, dt);

    let ((pass, detail), dt) = timed(manufactured);
    report.check(2, "manufactured convergence", pass && dt.as_secs_f64() < 60.0, detail, dt);

    let ((pass, detail), dt) = timed(shape_derivative);
    report.check(3, "shape-derivative oracle", pass && dt.as_secs_f64() < 120.0, detail, dt);

    let ((pass, detail), dt) = timed(curvature_oracle);
    report.check(4, "curvature oracle", pass, detail, dt);

    let (curl_df, dt) = timed(|| optimize(&RunConfig::curl_df()).unwrap());
    let drift = max_volume_drift(&curl_df);
    report.check(
        5,
        "curl_dF volume conservation",
        drift <= 0.015 && monotone(&curl_df),
        format!("max |dV|/V {:.3}%, monotone {}; {}", 100.0 * drift, monotone(&curl_df), summary(&curl_df)),
        dt,
    );

    let (curl_al, dt) = timed(|| optimize(&RunConfig::curl_al()).unwrap());
    let decrease = -curl_al.objective_change_percent();
    let terminated = matches!(curl_al.stop, StopReason::Tolerance | StopReason::MaxIterations) && curl_al.records.len() <= 51;
    report.check(
        6,
        "curl_aL reproduction",
        (7.0..=14.0).contains(&decrease)
            && curl_al.volume_change_percent().abs() <= 2.0
            && terminated
            && dt.as_secs_f64() < 600.0,
        summary(&curl_al),
        dt,
    );

    let (detgrad_df, dt) = timed(|| optimize(&RunConfig::detgrad_df()).unwrap());
    let decrease = -detgrad_df.objective_change_percent();
    report.check(
        7,
        "detgrad_dF reproduction",
        (0.5..=3.0).contains(&decrease) && detgrad_df.volume_change_percent().abs() <= 0.5,
        summary(&detgrad_df),
        dt,
    );

    let ((pass, detail), dt) = timed(mixed_split_check);
    report.check(8, "mixed split", pass, detail, dt);

    let ((pass, detail), dt) = timed(h_table);
    report.check(9, "h table", pass, detail, dt);

    let ((pass, detail), dt) = timed(|| properties(&[&curl_df, &curl_al, &detgrad_df]));
    report.check(10, "property suites", pass, detail, dt);

    println!("{} of 10 criteria passed", 10 - report.failed);
    if report.failed > 0 {
        std::process::exit(1);
    }
}
