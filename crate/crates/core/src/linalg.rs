//! Dense LU solves with a residual check.

use nalgebra::{DMatrix, DVector, LU};

use crate::error::{IrlError, Result};

/// Relative residual bound accepted for every solve.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-10;

/// LU factorization of a square system, reused across right-hand sides.
pub struct LuSolver {
    matrix: DMatrix<f64>,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    norm_inf: f64,
}

impl LuSolver {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(IrlError::DimensionMismatch(format!(
                "LU needs a square matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let norm_inf = matrix
            .row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let lu = matrix.clone().lu();
        if !lu.is_invertible() {
            return Err(IrlError::SolverFailure("singular system".into()));
        }
        Ok(LuSolver {
            matrix,
            lu,
            norm_inf,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Solves `A x = b`, applying one round of iterative refinement if the
    /// first residual is above [`SOLVE_RESIDUAL_TOL`].
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let b = DVector::from_column_slice(rhs);
        let mut x = self
            .lu
            .solve(&b)
            .ok_or_else(|| IrlError::SolverFailure("singular system".into()))?;
        let mut r = &b - &self.matrix * &x;
        if !self.accept(&r, &x, &b) {
            if let Some(dx) = self.lu.solve(&r) {
                x += dx;
                r = &b - &self.matrix * &x;
            }
            if !self.accept(&r, &x, &b) {
                return Err(IrlError::SolverFailure(format!(
                    "residual {:e} above tolerance",
                    r.amax()
                )));
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(IrlError::SolverFailure("non-finite solution".into()));
        }
        Ok(x.as_slice().to_vec())
    }

    fn accept(&self, r: &DVector<f64>, x: &DVector<f64>, b: &DVector<f64>) -> bool {
        let scale = self.norm_inf * x.amax() + b.amax();
        r.amax() <= SOLVE_RESIDUAL_TOL * scale.max(1.0)
    }
}
