//! Manufactured Stokes solution on the unit square.

#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use vortex_shape::fem::element::{TriGeom, VOLUME_RULE};
use vortex_shape::flow::{solve_state, Profile};
use vortex_shape::mesh::Mesh;

// ψ = sin²(πy) φ(x), φ = 1 − sin³(πx); φ′(1) = φ″(1) = 0 gives a
// traction-free outflow together with p(1, y) = 0.
pub fn phi(x: f64, k: usize) -> f64 {
    let (s, c) = ((PI * x).sin(), (PI * x).cos());
    match k {
        0 => 1.0 - s.powi(3),
        1 => -3.0 * PI * s * s * c,
        2 => -3.0 * PI * PI * (2.0 * s - 3.0 * s.powi(3)),
        3 => -3.0 * PI.powi(3) * c * (2.0 - 9.0 * s * s),
        _ => unreachable!(),
    }
}

pub fn exact_u(p: [f64; 2]) -> [f64; 2] {
    let (x, y) = (p[0], p[1]);
    [phi(x, 0) * PI * (2.0 * PI * y).sin(), -phi(x, 1) * (PI * y).sin().powi(2)]
}

pub fn exact_grad(p: [f64; 2]) -> [[f64; 2]; 2] {
    let (x, y) = (p[0], p[1]);
    [
        [phi(x, 1) * PI * (2.0 * PI * y).sin(), phi(x, 0) * 2.0 * PI * PI * (2.0 * PI * y).cos()],
        [-phi(x, 2) * (PI * y).sin().powi(2), -phi(x, 1) * PI * (2.0 * PI * y).sin()],
    ]
}

pub fn exact_p(p: [f64; 2]) -> f64 {
    (0.5 * PI * p[0]).cos() * (PI * p[1]).cos()
}

pub const NU: f64 = 0.5;

pub fn force(p: [f64; 2]) -> [f64; 2] {
    let (x, y) = (p[0], p[1]);
    let lap1 = phi(x, 2) * PI * (2.0 * PI * y).sin() - 4.0 * PI.powi(3) * phi(x, 0) * (2.0 * PI * y).sin();
    let lap2 = -phi(x, 3) * (PI * y).sin().powi(2) - phi(x, 1) * 2.0 * PI * PI * (2.0 * PI * y).cos();
    let dp = [
        -0.5 * PI * (0.5 * PI * x).sin() * (PI * y).cos(),
        -PI * (0.5 * PI * x).cos() * (PI * y).sin(),
    ];
    [-NU * lap1 + dp[0], -NU * lap2 + dp[1]]
}

/// H¹ seminorm velocity error and L² pressure error on an `n × n` grid.
pub fn errors(n: usize) -> (f64, f64) {
    let mesh = Mesh::rectangle(0.0, 0.0, 1.0, 1.0, n, n).unwrap();
    let profile = Profile::Custom(Arc::new(exact_u));
    let f = |p: [f64; 2]| force(p);
    let state = solve_state(&mesh, NU, Some(&f), &profile).unwrap();
    let (mut h1, mut l2p) = (0.0, 0.0);
    for t in 0..mesh.num_triangles() {
        let geo = TriGeom::new(mesh.triangle_points(t));
        for (l, w) in VOLUME_RULE {
            let x = geo.point(l);
            let gh = state.u.gradient_at(t, &geo, l);
            let ge = exact_grad(x);
            for i in 0..2 {
                for j in 0..2 {
                    h1 += w * geo.area * (gh[i][j] - ge[i][j]).powi(2);
                }
            }
            l2p += w * geo.area * (state.p.scalar_at(t, l) - exact_p(x)).powi(2);
        }
    }
    (h1.sqrt(), l2p.sqrt())
}
