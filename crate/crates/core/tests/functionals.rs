use std::sync::OnceLock;

use proptest::prelude::*;
use vortex_shape::fem::Field;
use vortex_shape::flow::{solve_state, Profile, StateSolution};
use vortex_shape::functionals::{eval_breakdown, flow_integrals, h, h_prime, h_second, mixed_split, ObjectiveParams};
use vortex_shape::mesh::{
    adapt_mesh, apply_deformation, build_channel_mesh, build_channel_mesh_with, mesh_quality, ChannelGeometry, Mesh,
    MeshingOptions, DEFAULT_ANGLE_THRESHOLD, DEFAULT_AREA_THRESHOLD,
};
use vortex_shape::shapegrad::bump_field;

fn coarse() -> &'static (Mesh, StateSolution) {
    static CELL: OnceLock<(Mesh, StateSolution)> = OnceLock::new();
    CELL.get_or_init(|| {
        let mesh = build_channel_mesh(&ChannelGeometry::reference(), 1.0 / 25.0, 1.0 / 15.0).unwrap();
        let state = solve_state(&mesh, 0.01, None, &Profile::reference()).unwrap();
        (mesh, state)
    })
}

#[test]
fn reference_geometry_matches_the_disk() {
    let mesh = build_channel_mesh(&ChannelGeometry::reference(), 1.0 / 50.0, 1.0 / 30.0).unwrap();
    let r = 0.13;
    assert!((mesh.perimeter() - std::f64::consts::TAU * r).abs() < 1e-3);
    assert!((mesh.area() - (2.0 - std::f64::consts::PI * r * r)).abs() < 1e-3);
}

#[test]
fn rotation_has_constant_vorticity() {
    let mesh = Mesh::rectangle(0.0, 0.0, 1.5, 1.0, 6, 4).unwrap();
    let dofmap = vortex_shape::fem::build_dofmap(&mesh);
    let u = Field::interpolate_vector(&dofmap, |p| [-p[1], p[0]]);
    let b = eval_breakdown(&u, &ObjectiveParams::new(1.0, 1.0, 0.0));
    assert!((b.j1 - 2.0 * 1.5).abs() < 1e-12);
    // det ∇u = 1 on the rotation, h(1) = 1/2
    assert!((b.j2 - 0.5 * 1.5).abs() < 1e-12);
    let strain = Field::interpolate_vector(&dofmap, |p| [p[0], -p[1]]);
    assert_eq!(eval_breakdown(&strain, &ObjectiveParams::new(0.0, 1.0, 0.0)).j2, 0.0);
}

#[test]
fn zero_flow_split_is_pure_perimeter() {
    let (mesh, _) = coarse();
    let state = solve_state(mesh, 0.01, None, &Profile::Zero).unwrap();
    for k in 1..=10 {
        let b = eval_breakdown(&state.u, &ObjectiveParams::mixed(k).unwrap());
        let (curl, det) = mixed_split(&b, k).unwrap();
        assert_eq!((curl, det), (5.0 * b.perimeter, b.perimeter));
    }
}

#[test]
fn split_rejects_foreign_weights() {
    let (_, state) = coarse();
    let b = eval_breakdown(&state.u, &ObjectiveParams::mixed(2).unwrap());
    assert!(mixed_split(&b, 3).is_err());
    assert!(mixed_split(&b, 11).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn h_is_monotone_and_below_identity(a in 0.0f64..20.0, d in 0.0f64..5.0) {
        prop_assert!(h(a) <= h(a + d));
        prop_assert!(h(a) <= a);
        prop_assert!(h_prime(a) >= 0.0);
    }

    #[test]
    fn h_vanishes_for_nonpositive(t in -1e6f64..=0.0) {
        prop_assert_eq!((h(t), h_prime(t), h_second(t)), (0.0, 0.0, 0.0));
    }

    #[test]
    fn h_derivatives_match_differences(t in 0.05f64..10.0) {
        let e = 1e-5 * t.max(1.0);
        let d1 = (h(t + e) - h(t - e)) / (2.0 * e);
        let d2 = (h_prime(t + e) - h_prime(t - e)) / (2.0 * e);
        prop_assert!((d1 - h_prime(t)).abs() <= 1e-7 * (1.0 + h_prime(t).abs()));
        prop_assert!((d2 - h_second(t)).abs() <= 1e-6 * (1.0 + h_second(t).abs()));
    }

    #[test]
    fn breakdown_identities(g1 in 0.0f64..3.0, g2 in 0.0f64..3.0, alpha in 0.0f64..10.0,
                            ell in -5.0f64..5.0, b in 0.0f64..5.0, m in 1.5f64..2.5) {
        let (_, state) = coarse();
        let params = ObjectiveParams { ell, b, m, ..ObjectiveParams::new(g1, g2, alpha) };
        let br = eval_breakdown(&state.u, &params);
        prop_assert_eq!(br.objective, alpha * br.perimeter - br.j1 - br.j2);
        let f = br.volume - m;
        prop_assert!((br.lagrangian - (br.objective - ell * f + 0.5 * b * f * f)).abs() <= 1e-14);
        prop_assert!(br.j1 >= 0.0 && br.j2 >= 0.0 && br.perimeter > 0.0 && br.volume > 0.0);

        let doubled = eval_breakdown(&state.u, &ObjectiveParams::new(2.0 * g1, 2.0 * g2, alpha));
        prop_assert_eq!(doubled.j1, 2.0 * br.j1);
        prop_assert_eq!(doubled.j2, 2.0 * br.j2);
        let [_, _, det_l1] = flow_integrals(&state.u);
        prop_assert!(br.j2 <= g2 * det_l1 + 1e-15);
    }

    #[test]
    fn mixed_split_is_additive(k in 1u32..=10) {
        let (_, state) = coarse();
        let b = eval_breakdown(&state.u, &ObjectiveParams::mixed(k).unwrap());
        let (curl, det) = mixed_split(&b, k).unwrap();
        prop_assert!((curl + k as f64 * det - b.objective).abs() <= 1e-12);
    }

    #[test]
    fn translation_keeps_geometry(dx in -3.0f64..3.0, dy in -3.0f64..3.0) {
        let (mesh, _) = coarse();
        let moved = mesh.translated([dx, dy]);
        prop_assert!((moved.perimeter() - mesh.perimeter()).abs() <= 1e-12);
        prop_assert!((moved.area() - mesh.area()).abs() <= 1e-12);
    }

    #[test]
    fn deformation_is_affine_in_t(s in 0.001f64..0.05, t in 0.001f64..0.05) {
        let (mesh, _) = coarse();
        let c = [0.325, 0.0];
        let theta = bump_field(mesh, c, 0.2, 0.3, |p| [p[0] - c[0], 0.5 * (p[1] - c[1])]);
        let a = apply_deformation(mesh, &theta, s).unwrap();
        let b = apply_deformation(mesh, &theta, t).unwrap();
        for v in 0..mesh.num_vertices() {
            let (x0, xa, xb) = (mesh.vertex(v), a.vertex(v), b.vertex(v));
            for d in 0..2 {
                let va = (xa[d] - x0[d]) / s;
                let vb = (xb[d] - x0[d]) / t;
                prop_assert!((va - vb).abs() <= 1e-9);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn generated_meshes_are_sound(seed in 0u64..1000, r in 0.08f64..0.2, cy in -0.1f64..0.1) {
        let geom = ChannelGeometry { obstacle_radius: r, obstacle_center: [0.4, cy], ..ChannelGeometry::reference() };
        let opts = MeshingOptions { seed, ..MeshingOptions::default() };
        let mesh = build_channel_mesh_with(&geom, 1.0 / 20.0, 1.0 / 10.0, opts).unwrap();
        prop_assert!(!mesh_quality(&mesh, DEFAULT_ANGLE_THRESHOLD, DEFAULT_AREA_THRESHOLD).degenerate);
        let state = solve_state(&mesh, 0.01, None, &Profile::reference()).unwrap();
        let adapted = adapt_mesh(&mesh, &state.u, 1.0 / 20.0, 1.0 / 10.0).unwrap();
        let sorted = |m: &Mesh| {
            let mut v = m.free_polyline();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v
        };
        prop_assert_eq!(sorted(&adapted), sorted(&mesh));
        prop_assert!((adapted.area() - mesh.area()).abs() <= 1e-12);
    }
}
