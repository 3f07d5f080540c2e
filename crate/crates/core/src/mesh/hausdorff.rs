use crate::geom::{self, Point};
use crate::{Error, Result};

/// Number of sub-segments each polyline edge is split into when sampling.
const SAMPLES_PER_EDGE: usize = 4;

/// Directed Hausdorff distance `sup_{x ∈ a} dist(x, b)` between two closed polylines.
///
/// `a` is sampled at its vertices and at evenly spaced points along each
/// edge; distances to `b` are taken to its segments, not its vertices.
pub fn directed_hausdorff(a: &[Point], b: &[Point]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("Hausdorff distance of an empty polyline"));
    }
    let nb = b.len();
    let to_b = |p: Point| {
        if nb == 1 {
            return geom::dist(p, b[0]);
        }
        (0..nb)
            .map(|j| geom::point_segment_distance(p, b[j], b[(j + 1) % nb]))
            .fold(f64::INFINITY, f64::min)
    };
    let na = a.len();
    let mut worst = 0.0f64;
    for i in 0..na {
        let (p, q) = (a[i], a[(i + 1) % na]);
        for s in 0..SAMPLES_PER_EDGE {
            let x = geom::lerp(p, q, s as f64 / SAMPLES_PER_EDGE as f64);
            worst = worst.max(to_b(x));
        }
    }
    Ok(worst)
}

/// Symmetric Hausdorff distance between two closed polylines.
pub fn hausdorff_distance(a: &[Point], b: &[Point]) -> Result<f64> {
    Ok(directed_hausdorff(a, b)?.max(directed_hausdorff(b, a)?))
}
