use crate::geom;

use super::Mesh;

/// Minimum interior angle (degrees) below which a mesh counts as degenerate.
pub const DEFAULT_ANGLE_THRESHOLD: f64 = 5.0;
/// Minimum signed triangle area below which a mesh counts as degenerate.
pub const DEFAULT_AREA_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct QualityReport {
    /// Smallest interior angle over all triangles, in degrees (0 for inverted triangles).
    pub min_angle: f64,
    /// Smallest signed triangle area.
    pub min_area: f64,
    /// Largest circumradius / (2 · inradius); 1 for an equilateral triangle.
    pub worst_aspect_ratio: f64,
    pub degenerate: bool,
}

pub fn mesh_quality(mesh: &Mesh, angle_thresh: f64, area_thresh: f64) -> QualityReport {
    let mut min_angle = f64::INFINITY;
    let mut min_area = f64::INFINITY;
    let mut worst = 1.0f64;
    for t in 0..mesh.num_triangles() {
        let [a, b, c] = mesh.triangle_points(t);
        let area = geom::signed_area(a, b, c);
        min_area = min_area.min(area);
        if area <= 0.0 {
            min_angle = 0.0;
            worst = f64::INFINITY;
            continue;
        }
        let la = geom::dist(b, c);
        let lb = geom::dist(c, a);
        let lc = geom::dist(a, b);
        for (opp, s1, s2) in [(la, lb, lc), (lb, lc, la), (lc, la, lb)] {
            let cos = ((s1 * s1 + s2 * s2 - opp * opp) / (2.0 * s1 * s2)).clamp(-1.0, 1.0);
            min_angle = min_angle.min(cos.acos().to_degrees());
        }
        let s = 0.5 * (la + lb + lc);
        let inradius = area / s;
        let circumradius = la * lb * lc / (4.0 * area);
        worst = worst.max(circumradius / (2.0 * inradius));
    }
    if mesh.num_triangles() == 0 {
        min_angle = 0.0;
        min_area = 0.0;
    }
    QualityReport {
        min_angle,
        min_area,
        worst_aspect_ratio: worst,
        degenerate: min_angle < angle_thresh || min_area < area_thresh,
    }
}
