//! Sparse direct solves with symmetrically eliminated Dirichlet dofs.

use std::sync::Arc;

use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;

use crate::{Error, Result};

use super::assemble::SaddleSystem;
use super::{CsrMatrix, DofMap, Field, FieldKind};

const RESIDUAL_TOL: f64 = 1e-10;
const REFINEMENT_STEPS: usize = 2;

/// LU factorization of a square matrix whose constrained rows and columns
/// are replaced by the identity.
pub struct LinearSolver {
    full: CsrMatrix,
    reduced: CsrMatrix,
    constrained: Vec<bool>,
    lu: Lu<usize, f64>,
    diagnostics: String,
}

impl std::fmt::Debug for LinearSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearSolver")
            .field("n", &self.full.nrows())
            .field("nnz", &self.reduced.nnz())
            .finish()
    }
}

impl LinearSolver {
    /// `diagnostics` is attached to any solver error.
    pub fn new(matrix: &CsrMatrix, constrained: &[usize], diagnostics: String) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::invalid("linear solver needs a square matrix"));
        }
        let mut mask = vec![false; n];
        for &i in constrained {
            mask[i] = true;
        }
        let mut t: Vec<(usize, usize, f64)> = matrix
            .iter()
            .filter(|&(i, j, _)| !mask[i] && !mask[j])
            .collect();
        t.extend((0..n).filter(|&i| mask[i]).map(|i| (i, i, 1.0)));
        let reduced = CsrMatrix::from_triplets(n, n, t);
        let lu = reduced.to_faer()?.sp_lu().map_err(|e| Error::Solver {
            reason: format!("factorization failed: {e:?}"),
            diagnostics: diagnostics.clone(),
        })?;
        Ok(LinearSolver {
            full: matrix.clone(),
            reduced,
            constrained: mask,
            lu,
            diagnostics,
        })
    }

    pub fn size(&self) -> usize {
        self.full.nrows()
    }

    /// Matrix before elimination.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.full
    }

    /// Matrix after elimination.
    pub fn reduced_matrix(&self) -> &CsrMatrix {
        &self.reduced
    }

    pub fn is_constrained(&self, i: usize) -> bool {
        self.constrained[i]
    }

    /// Solves `K x = rhs` on free dofs with `x_i = value` on constrained
    /// dofs. Constrained dofs missing from `values` are set to zero.
    pub fn solve(&self, rhs: &[f64], values: &[(usize, f64)]) -> Result<Vec<f64>> {
        let n = self.size();
        if rhs.len() != n {
            return Err(Error::invalid(format!("right-hand side has length {}, expected {n}", rhs.len())));
        }
        let mut g = vec![0.0; n];
        for &(i, v) in values {
            if !self.constrained[i] {
                return Err(Error::invalid(format!("dof {i} is not constrained")));
            }
            g[i] = v;
        }
        let kg = self.full.mul_vec(&g);
        let b: Vec<f64> = (0..n)
            .map(|i| if self.constrained[i] { g[i] } else { rhs[i] - kg[i] })
            .collect();
        let bnorm = norm(&b);
        if bnorm == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let mut x = self.apply_inverse(&b);
        let mut res = residual(&self.reduced, &x, &b);
        for _ in 0..REFINEMENT_STEPS {
            if norm(&res) <= 1e-3 * RESIDUAL_TOL * bnorm {
                break;
            }
            let dx = self.apply_inverse(&res);
            x.iter_mut().zip(&dx).for_each(|(a, d)| *a += d);
            res = residual(&self.reduced, &x, &b);
        }
        let rnorm = norm(&res);
        if !(rnorm <= RESIDUAL_TOL * bnorm) {
            return Err(Error::Solver {
                reason: format!("relative residual {:.3e} exceeds {RESIDUAL_TOL:e}", rnorm / bnorm),
                diagnostics: self.diagnostics.clone(),
            });
        }
        Ok(x)
    }

    fn apply_inverse(&self, b: &[f64]) -> Vec<f64> {
        let mut x = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
        self.lu.solve_in_place(x.as_mut());
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    a.mul_vec(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect()
}

/// Factorized Stokes operator; state and adjoint share it since both
/// constrain the same dofs.
#[derive(Debug)]
pub struct SaddleSolver {
    dofmap: Arc<DofMap>,
    solver: LinearSolver,
    values: Vec<(usize, f64)>,
}

impl SaddleSolver {
    pub(crate) fn new(system: &SaddleSystem) -> Result<Self> {
        let constrained: Vec<usize> = system.constraints().iter().map(|&(i, _)| i).collect();
        let solver = LinearSolver::new(&system.matrix(), &constrained, system.diagnostics())?;
        Ok(SaddleSolver {
            dofmap: Arc::clone(system.dofmap()),
            solver,
            values: system.constraints().to_vec(),
        })
    }

    pub fn dofmap(&self) -> &Arc<DofMap> {
        &self.dofmap
    }

    pub fn linear_solver(&self) -> &LinearSolver {
        &self.solver
    }

    /// Solves with the recorded Dirichlet values.
    pub fn solve(&self, rhs: &[f64]) -> Result<(Field, Field)> {
        self.split(self.solver.solve(rhs, &self.values)?)
    }

    /// Solves with zero values on the constrained dofs.
    pub fn solve_homogeneous(&self, rhs: &[f64]) -> Result<(Field, Field)> {
        self.split(self.solver.solve(rhs, &[])?)
    }

    fn split(&self, mut x: Vec<f64>) -> Result<(Field, Field)> {
        let p = x.split_off(self.dofmap.num_velocity_dofs());
        Ok((
            Field::from_coeffs(&self.dofmap, FieldKind::VectorP2, x)?,
            Field::from_coeffs(&self.dofmap, FieldKind::ScalarP1, p)?,
        ))
    }
}

/// Factorizes and solves once. `rhs` has one entry per saddle dof.
pub fn solve_saddle(system: &SaddleSystem, rhs: &[f64]) -> Result<(Field, Field)> {
    system.factorize()?.solve(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{apply_dirichlet, assemble, build_dofmap};
    use crate::geom::Point;
    use crate::mesh::{Mesh, Tag};

    #[test]
    fn small_dense_system() {
        let k = CsrMatrix::from_triplets(3, 3, vec![(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0), (2, 2, 1.0), (1, 2, 0.5), (2, 1, 0.5)]);
        let s = LinearSolver::new(&k, &[2], String::new()).unwrap();
        let x = s.solve(&[1.0, 2.0, 0.0], &[(2, 4.0)]).unwrap();
        // free block [[2,1],[1,3]] x = [1, 2 - 0.5*4]
        assert!((x[0] - 0.6).abs() < 1e-14 && (x[1] + 0.2).abs() < 1e-14 && x[2] == 4.0);
        assert!(s.solve(&[1.0, 2.0, 0.0], &[(0, 1.0)]).is_err());
    }

    #[test]
    fn homogeneous_problem_has_zero_solution() {
        let d = build_dofmap(&Mesh::rectangle(0.0, 0.0, 1.0, 1.0, 3, 3).unwrap());
        let zero = |_: Point| [0.0, 0.0];
        let s = apply_dirichlet(assemble(&d, 1.0).unwrap(), &[(Tag::In, &zero), (Tag::Wall, &zero)]).unwrap();
        let (u, p) = solve_saddle(&s, &vec![0.0; d.num_dofs()]).unwrap();
        assert_eq!(u.max_abs(), 0.0);
        assert_eq!(p.max_abs(), 0.0);
    }

    #[test]
    fn missing_outflow_is_rejected() {
        let m = Mesh::rectangle_tagged(0.0, 0.0, 1.0, 1.0, 2, 2, [Tag::Wall, Tag::Wall, Tag::Wall, Tag::In]).unwrap();
        let d = build_dofmap(&m);
        let zero = |_: Point| [0.0, 0.0];
        let s = apply_dirichlet(assemble(&d, 1.0).unwrap(), &[(Tag::In, &zero), (Tag::Wall, &zero)]).unwrap();
        assert!(matches!(s.factorize(), Err(Error::ContractViolation(_))));
    }
}
