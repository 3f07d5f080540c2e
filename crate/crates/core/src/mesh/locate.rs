use crate::geom::{self, Point};

use super::Mesh;

/// Uniform-grid point locator over the triangles of a mesh.
#[derive(Debug)]
pub struct Locator<'m> {
    mesh: &'m Mesh,
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl<'m> Locator<'m> {
    pub fn new(mesh: &'m Mesh) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in mesh.vertices() {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let nt = mesh.num_triangles().max(1);
        let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
        let area = ((hi[0] - lo[0]) * (hi[1] - lo[1])).max(extent * extent * 1e-6);
        let cell = (area / nt as f64).sqrt() * 2.0;
        let nx = (((hi[0] - lo[0]) / cell).ceil() as usize).max(1);
        let ny = (((hi[1] - lo[1]) / cell).ceil() as usize).max(1);
        let mut buckets = vec![Vec::new(); nx * ny];
        let clampi = |v: f64, n: usize| (v.floor().max(0.0) as usize).min(n - 1);
        for t in 0..mesh.num_triangles() {
            let pts = mesh.triangle_points(t);
            let xmin = pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
            let xmax = pts.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
            let ymin = pts.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
            let ymax = pts.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
            let (i0, i1) = (clampi((xmin - lo[0]) / cell, nx), clampi((xmax - lo[0]) / cell, nx));
            let (j0, j1) = (clampi((ymin - lo[1]) / cell, ny), clampi((ymax - lo[1]) / cell, ny));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * nx + i].push(t);
                }
            }
        }
        Locator {
            mesh,
            origin: lo,
            cell,
            nx,
            ny,
            buckets,
        }
    }

    /// Triangle containing `p` and the barycentric coordinates of `p` in it.
    ///
    /// Points slightly outside the mesh (within `1e-9` relative) are snapped
    /// to the nearest candidate triangle; points far outside return `None`.
    pub fn locate(&self, p: Point) -> Option<(usize, [f64; 3])> {
        let i = ((p[0] - self.origin[0]) / self.cell).floor();
        let j = ((p[1] - self.origin[1]) / self.cell).floor();
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for dj in -1i64..=1 {
            for di in -1i64..=1 {
                let (ii, jj) = (i as i64 + di, j as i64 + dj);
                if ii < 0 || jj < 0 || ii >= self.nx as i64 || jj >= self.ny as i64 {
                    continue;
                }
                for &t in &self.buckets[jj as usize * self.nx + ii as usize] {
                    let b = barycentric(self.mesh.triangle_points(t), p);
                    let worst = b.iter().cloned().fold(f64::INFINITY, f64::min);
                    if worst >= -1e-12 {
                        return Some((t, b));
                    }
                    if best.map_or(true, |(_, _, w)| worst > w) {
                        best = Some((t, b, worst));
                    }
                }
            }
        }
        match best {
            Some((t, b, w)) if w > -1e-6 => {
                let mut c = b.map(|x| x.max(0.0));
                let s: f64 = c.iter().sum();
                c.iter_mut().for_each(|x| *x /= s);
                Some((t, c))
            }
            _ => None,
        }
    }
}

pub(crate) fn barycentric(tri: [Point; 3], p: Point) -> [f64; 3] {
    let area = geom::signed_area(tri[0], tri[1], tri[2]);
    let l0 = geom::signed_area(p, tri[1], tri[2]) / area;
    let l1 = geom::signed_area(tri[0], p, tri[2]) / area;
    [l0, l1, 1.0 - l0 - l1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locates_points_in_structured_mesh() {
        let m = Mesh::rectangle(0.0, 0.0, 1.0, 1.0, 5, 5).unwrap();
        let loc = Locator::new(&m);
        for p in [[0.13, 0.77], [0.5, 0.5], [1.0, 1.0], [0.0, 0.0]] {
            let (t, b) = loc.locate(p).unwrap();
            let tri = m.triangle_points(t);
            let q = [
                b[0] * tri[0][0] + b[1] * tri[1][0] + b[2] * tri[2][0],
                b[0] * tri[0][1] + b[1] * tri[1][1] + b[2] * tri[2][1],
            ];
            assert!(geom::dist(p, q) < 1e-12);
        }
        assert!(loc.locate([3.0, 3.0]).is_none());
    }
}
