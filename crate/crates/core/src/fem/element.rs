//! Quadratic Lagrange element on straight triangles and the quadrature rules
//! shared by every volume and boundary integral.

use crate::geom::{self, Point};

/// Symmetric 6-point rule on the reference triangle, exact for degree 4.
/// Barycentric coordinates and weights normalized to sum to one.
pub const VOLUME_RULE: [([f64; 3], f64); 6] = {
    const A: f64 = 0.108103018168070;
    const B: f64 = 0.445948490915965;
    const C: f64 = 0.816847572980459;
    const D: f64 = 0.091576213509771;
    const WA: f64 = 0.223381589678011;
    const WC: f64 = 0.109951743655322;
    [
        ([A, B, B], WA),
        ([B, A, B], WA),
        ([B, B, A], WA),
        ([C, D, D], WC),
        ([D, C, D], WC),
        ([D, D, C], WC),
    ]
};

/// 3-point Gauss rule on `[0, 1]`, weights summing to one.
pub const EDGE_RULE: [(f64, f64); 3] = {
    const S: f64 = 0.387_298_334_620_741_7; // sqrt(3/5) / 2
    [(0.5 - S, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + S, 5.0 / 18.0)]
};

/// Affine triangle data: area and constant barycentric gradients.
#[derive(Debug, Clone, Copy)]
pub struct TriGeom {
    pub points: [Point; 3],
    pub area: f64,
    pub grad_lambda: [Point; 3],
}

impl TriGeom {
    pub fn new(points: [Point; 3]) -> Self {
        let [a, b, c] = points;
        let twice = geom::cross(geom::sub(b, a), geom::sub(c, a));
        let inv = 1.0 / twice;
        // grad λ_i = rot(p_k - p_j) / (2 area) for (i, j, k) cyclic
        let g = |pj: Point, pk: Point| [(pj[1] - pk[1]) * inv, (pk[0] - pj[0]) * inv];
        TriGeom {
            points,
            area: 0.5 * twice,
            grad_lambda: [g(b, c), g(c, a), g(a, b)],
        }
    }

    pub fn point(&self, l: [f64; 3]) -> Point {
        let [a, b, c] = self.points;
        [
            l[0] * a[0] + l[1] * b[0] + l[2] * c[0],
            l[0] * a[1] + l[1] * b[1] + l[2] * c[1],
        ]
    }

    /// Gradients of the six quadratic basis functions at barycentric `l`.
    pub fn p2_gradients(&self, l: [f64; 3]) -> [Point; 6] {
        let g = self.grad_lambda;
        let lin = |i: usize, j: usize| {
            [
                4.0 * (l[i] * g[j][0] + l[j] * g[i][0]),
                4.0 * (l[i] * g[j][1] + l[j] * g[i][1]),
            ]
        };
        [
            geom::scale(g[0], 4.0 * l[0] - 1.0),
            geom::scale(g[1], 4.0 * l[1] - 1.0),
            geom::scale(g[2], 4.0 * l[2] - 1.0),
            lin(0, 1),
            lin(1, 2),
            lin(2, 0),
        ]
    }
}

/// Quadratic basis values at barycentric `l`: three vertex functions, then
/// edge functions for local edges (0,1), (1,2), (2,0).
pub fn p2_values(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

/// Values of the three nodal functions of a quadratic edge trace at
/// parameter `s` (start vertex, end vertex, midpoint).
pub fn p2_edge_values(s: f64) -> [f64; 3] {
    [(1.0 - s) * (1.0 - 2.0 * s), s * (2.0 * s - 1.0), 4.0 * s * (1.0 - s)]
}

/// Barycentric coordinates of the six nodes.
pub const P2_NODES: [[f64; 3]; 6] = [
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.5, 0.5, 0.0],
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volume_rule_integrates_quartics() {
        // ∫_T λ0^a λ1^b λ2^c = 2|T| a! b! c! / (a+b+c+2)!
        let fact = |n: u32| (1..=n).product::<u32>().max(1) as f64;
        for a in 0..=4u32 {
            for b in 0..=(4 - a) {
                for c in 0..=(4 - a - b) {
                    let q: f64 = VOLUME_RULE
                        .iter()
                        .map(|(l, w)| w * l[0].powi(a as i32) * l[1].powi(b as i32) * l[2].powi(c as i32))
                        .sum();
                    let exact = 2.0 * fact(a) * fact(b) * fact(c) / fact(a + b + c + 2);
                    assert!((q - exact).abs() < 1e-13, "{a} {b} {c}: {q} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn edge_rule_integrates_quintics() {
        for k in 0..=5 {
            let q: f64 = EDGE_RULE.iter().map(|(s, w)| w * s.powi(k)).sum();
            assert!((q - 1.0 / (k as f64 + 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn basis_is_nodal_and_sums_to_one() {
        for (n, l) in P2_NODES.iter().enumerate() {
            let v = p2_values(*l);
            for (m, x) in v.iter().enumerate() {
                assert!((x - if m == n { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
        let t = TriGeom::new([[0.1, 0.2], [1.3, 0.4], [0.5, 1.1]]);
        for (l, _) in VOLUME_RULE {
            assert!((p2_values(l).iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let g = t.p2_gradients(l);
            let s = g.iter().fold([0.0, 0.0], |acc, x| geom::add(acc, *x));
            assert!(geom::norm(s) < 1e-12);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let t = TriGeom::new([[0.0, 0.0], [2.0, 0.5], [0.3, 1.0]]);
        let l = [0.2, 0.5, 0.3];
        let x = t.point(l);
        let bary = |p: Point| crate::mesh::barycentric(t.points, p);
        let h = 1e-6;
        let g = t.p2_gradients(l);
        for d in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[d] += h;
            xm[d] -= h;
            let (vp, vm) = (p2_values(bary(xp)), p2_values(bary(xm)));
            for i in 0..6 {
                let fd = (vp[i] - vm[i]) / (2.0 * h);
                assert!((fd - g[i][d]).abs() < 1e-7, "basis {i} dir {d}");
            }
        }
    }
}
