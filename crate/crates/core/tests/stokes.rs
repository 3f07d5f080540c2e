mod common;

use common::{errors, exact_grad, exact_p, exact_u, force, NU};
use vortex_shape::flow::{adjoint_rhs, solve_adjoint, solve_state, Profile};
use vortex_shape::functionals::{eval_breakdown, ObjectiveParams};
use vortex_shape::fem::Field;
use vortex_shape::mesh::{build_channel_mesh, ChannelGeometry, Mesh, Tag};

#[test]
fn manufactured_derivatives_are_consistent() {
    // the analytic force against central differences of the exact fields
    let h = 1e-3;
    for p in [[0.3, 0.7], [0.81, 0.12], [0.5, 0.5]] {
        let lap = |c: usize| {
            let u = |q: [f64; 2]| exact_u(q)[c];
            (u([p[0] + h, p[1]]) + u([p[0] - h, p[1]]) + u([p[0], p[1] + h]) + u([p[0], p[1] - h]) - 4.0 * u(p)) / (h * h)
        };
        let dp = [
            (exact_p([p[0] + h, p[1]]) - exact_p([p[0] - h, p[1]])) / (2.0 * h),
            (exact_p([p[0], p[1] + h]) - exact_p([p[0], p[1] - h])) / (2.0 * h),
        ];
        let f = force(p);
        for c in 0..2 {
            let fd = -NU * lap(c) + dp[c];
            assert!((fd - f[c]).abs() < 1e-3 * (1.0 + f[c].abs()), "{c}: {fd} vs {}", f[c]);
        }
        let g = exact_grad(p);
        let h = 1e-5;
        let du = exact_u([p[0] + h, p[1]]);
        let dl = exact_u([p[0] - h, p[1]]);
        assert!(((du[1] - dl[1]) / (2.0 * h) - g[1][0]).abs() < 1e-4);
        // divergence free
        assert!((g[0][0] + g[1][1]).abs() < 1e-12);
    }
}

#[test]
fn manufactured_solution_converges_at_second_order() {
    let sizes = [16, 32, 64, 128];
    let errs: Vec<(f64, f64)> = sizes.iter().map(|&n| errors(n)).collect();
    for w in errs.windows(2) {
        let ou = (w[0].0 / w[1].0).log2();
        let op = (w[0].1 / w[1].1).log2();
        assert!((ou - 2.0).abs() <= 0.3, "velocity H1 order {ou}");
        assert!((op - 2.0).abs() <= 0.3, "pressure L2 order {op}");
    }
}

#[test]
fn poiseuille_channel_is_exact() {
    let mesh = Mesh::rectangle(0.0, -0.5, 2.0, 0.5, 16, 8).unwrap();
    let state = solve_state(&mesh, 0.01, None, &Profile::reference()).unwrap();
    let dofmap = state.dofmap().clone();
    for n in 0..dofmap.num_nodes() {
        let p = dofmap.node_point(n);
        let u = state.u.node_vector(n);
        assert!((u[0] - 1.2 * (0.25 - p[1] * p[1])).abs() < 1e-8);
        assert!(u[1].abs() < 1e-8);
    }
    for v in 0..mesh.num_vertices() {
        let x = mesh.vertex(v)[0];
        assert!((state.p.coeffs()[v] + 2.4 * 0.01 * (x - 2.0)).abs() < 1e-8);
    }
}

#[test]
fn state_and_adjoint_share_the_operator() {
    let mesh = build_channel_mesh(&ChannelGeometry::reference(), 1.0 / 25.0, 1.0 / 15.0).unwrap();
    let state = solve_state(&mesh, 0.01, None, &Profile::reference()).unwrap();
    let reduced = state.solver().linear_solver().reduced_matrix();
    assert!(reduced.asymmetry() <= 1e-12);
    let adj = solve_adjoint(&state, 1.0, 1.0).unwrap();
    assert!(state.divergence_residual() <= 1e-10);
    assert!(vortex_shape::flow::divergence_residual(state.solver(), &adj.v) <= 1e-10);
    for tag in [Tag::In, Tag::Wall, Tag::Free] {
        for &n in state.dofmap().boundary_nodes(tag) {
            assert_eq!(adj.v.node_vector(n), [0.0, 0.0]);
        }
    }
}

#[test]
fn adjoint_rhs_is_the_functional_derivative() {
    let mesh = build_channel_mesh(&ChannelGeometry::reference(), 1.0 / 25.0, 1.0 / 15.0).unwrap();
    let state = solve_state(&mesh, 0.01, None, &Profile::reference()).unwrap();
    let du = Field::interpolate_vector(state.dofmap(), |p| [(3.0 * p[1]).sin() * p[0], (2.0 * p[0]).cos() * p[1]]);
    for (g1, g2) in [(1.0, 0.0), (0.0, 1.0), (1.0, 2.0)] {
        let params = ObjectiveParams::new(g1, g2, 0.0);
        let j = |eps: f64| {
            let u = state.u.add_scaled(eps, &du);
            let b = eval_breakdown(&u, &params);
            -b.j1 - b.j2
        };
        let rhs = adjoint_rhs(&state, g1, g2);
        let slope = rhs.iter().zip(du.coeffs()).map(|(a, b)| a * b).sum::<f64>();
        let (e1, e2) = (1e-3, 1e-4);
        let r1 = (j(e1) - j(0.0) - e1 * slope).abs();
        let r2 = (j(e2) - j(0.0) - e2 * slope).abs();
        let order = (r1 / r2).log10();
        assert!(order >= 1.9, "({g1}, {g2}): remainder order {order}");
    }
}
