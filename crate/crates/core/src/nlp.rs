//! The smooth NLP interface consumed by the interior-point solver:
//!
//! ```txt
//!     min f(x)   s.t.   c_E(x) = 0,   c_I(x) <= 0
//! ```

use thiserror::Error;

use crate::formulation::ConstraintHandle;
use crate::linalg::DenseMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("non-finite entry in decision vector at index {0}")]
    NonFinite(usize),
    #[error("decision vector has length {found}, expected {expected}")]
    Dimension { expected: usize, found: usize },
}

pub fn check_point(x: &[f64], n: usize) -> Result<(), EvalError> {
    if x.len() != n {
        return Err(EvalError::Dimension { expected: n, found: x.len() });
    }
    match x.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(EvalError::NonFinite(i)),
        None => Ok(()),
    }
}

/// Compressed sparse rows with a fixed pattern.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseRows {
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SparseRows {
    pub fn new(ncols: usize) -> Self {
        Self { ncols, row_ptr: vec![0], cols: Vec::new(), vals: Vec::new() }
    }

    pub fn push_row(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) {
        for (c, v) in entries {
            debug_assert!(c < self.ncols);
            self.cols.push(c);
            self.vals.push(v);
        }
        self.row_ptr.push(self.cols.len());
    }

    pub fn nrows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    /// `J x`
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows())
            .map(|i| {
                let (c, v) = self.row(i);
                c.iter().zip(v).map(|(&j, &a)| a * x[j]).sum()
            })
            .collect()
    }

    /// `out += Jᵀ y`
    pub fn tmul_add(&self, y: &[f64], out: &mut [f64]) {
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                out[j] += a * yi;
            }
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows()];
        for (i, row) in d.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                row[j] += a;
            }
        }
        d
    }
}

/// Constraint values together with their Jacobians.
#[derive(Debug, Clone)]
pub struct ConstraintEval {
    pub eq: Vec<f64>,
    pub ineq: Vec<f64>,
    pub jac_eq: SparseRows,
    pub jac_ineq: SparseRows,
}

pub trait Nlp {
    fn dimension(&self) -> usize;
    fn eq_count(&self) -> usize;
    fn ineq_count(&self) -> usize;

    /// Default starting point when no warm start is supplied.
    fn initial_point(&self) -> Vec<f64>;

    /// Objective value and dense gradient.
    fn objective(&self, x: &[f64]) -> Result<(f64, Vec<f64>), EvalError>;

    fn constraints(&self, x: &[f64]) -> Result<ConstraintEval, EvalError>;

    /// Constraint values only; override when Jacobians are expensive.
    fn constraint_values(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>), EvalError> {
        let c = self.constraints(x)?;
        Ok((c.eq, c.ineq))
    }

    /// Accumulates `obj_factor ∇²f + Σ y_i ∇²c_E,i + Σ z_j ∇²c_I,j` into `out`
    /// (which the caller zeroes).
    fn hessian(
        &self,
        x: &[f64],
        obj_factor: f64,
        y: &[f64],
        z: &[f64],
        out: &mut DenseMatrix,
    ) -> Result<(), EvalError>;

    /// Row handles `(equalities, inequalities)`; empty when rows are anonymous.
    fn handles(&self) -> (Vec<ConstraintHandle>, Vec<ConstraintHandle>) {
        (Vec::new(), Vec::new())
    }

    /// Equality rows of the form `a x_i + b = 0`. The solver eliminates the
    /// variables they fix.
    fn singleton_equalities(&self) -> Vec<SingletonRow> {
        Vec::new()
    }
}

/// Equality row `coeff · x[var] + constant = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingletonRow {
    pub row: usize,
    pub var: usize,
    pub coeff: f64,
    pub constant: f64,
}

impl SingletonRow {
    pub fn value(&self) -> f64 {
        -self.constant / self.coeff
    }
}

/// Largest finite-difference mismatches found by [`derivative_check`].
/// Each error is `|analytic - fd| / max(1, |analytic row|_inf)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DerivativeErrors {
    pub gradient: f64,
    pub jacobian_eq: f64,
    pub jacobian_ineq: f64,
    pub hessian: f64,
}

impl DerivativeErrors {
    pub fn max(&self) -> f64 {
        self.gradient.max(self.jacobian_eq).max(self.jacobian_ineq).max(self.hessian)
    }
}

fn row_error(analytic: &[f64], fd: &[f64]) -> f64 {
    let scale = analytic.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    analytic.iter().zip(fd).map(|(a, f)| (a - f).abs()).fold(0.0, f64::max) / scale
}

/// Compares analytic first and second derivatives at `x` against central
/// differences with step `h`. The Hessian is checked through the gradient
/// of the Lagrangian with weights `y`, `z`.
pub fn derivative_check(nlp: &dyn Nlp, x: &[f64], y: &[f64], z: &[f64], h: f64) -> Result<DerivativeErrors, EvalError> {
    let n = nlp.dimension();
    let (_, grad) = nlp.objective(x)?;
    let cons = nlp.constraints(x)?;
    let jac_eq = cons.jac_eq.to_dense();
    let jac_ineq = cons.jac_ineq.to_dense();
    let mut hess = DenseMatrix::zeros(n);
    nlp.hessian(x, 1.0, y, z, &mut hess)?;

    let lag_grad = |x: &[f64]| -> Result<Vec<f64>, EvalError> {
        let (_, mut g) = nlp.objective(x)?;
        let c = nlp.constraints(x)?;
        c.jac_eq.tmul_add(y, &mut g);
        c.jac_ineq.tmul_add(z, &mut g);
        Ok(g)
    };

    let mut fd_grad = vec![0.0; n];
    let mut fd_eq = vec![vec![0.0; n]; jac_eq.len()];
    let mut fd_ineq = vec![vec![0.0; n]; jac_ineq.len()];
    let mut fd_hess = vec![vec![0.0; n]; n];
    let mut xp = x.to_vec();
    for k in 0..n {
        xp[k] = x[k] + h;
        let (fp, _) = nlp.objective(&xp)?;
        let (ep, ip) = nlp.constraint_values(&xp)?;
        let lp = lag_grad(&xp)?;
        xp[k] = x[k] - h;
        let (fm, _) = nlp.objective(&xp)?;
        let (em, im) = nlp.constraint_values(&xp)?;
        let lm = lag_grad(&xp)?;
        xp[k] = x[k];
        fd_grad[k] = (fp - fm) / (2.0 * h);
        for (r, (a, b)) in ep.iter().zip(&em).enumerate() {
            fd_eq[r][k] = (a - b) / (2.0 * h);
        }
        for (r, (a, b)) in ip.iter().zip(&im).enumerate() {
            fd_ineq[r][k] = (a - b) / (2.0 * h);
        }
        for (r, (a, b)) in lp.iter().zip(&lm).enumerate() {
            fd_hess[r][k] = (a - b) / (2.0 * h);
        }
    }

    let rows = |a: &[Vec<f64>], f: &[Vec<f64>]| a.iter().zip(f).map(|(a, f)| row_error(a, f)).fold(0.0, f64::max);
    let hess_rows: Vec<Vec<f64>> = (0..n).map(|i| hess.row(i).to_vec()).collect();
    Ok(DerivativeErrors {
        gradient: row_error(&grad, &fd_grad),
        jacobian_eq: rows(&jac_eq, &fd_eq),
        jacobian_ineq: rows(&jac_ineq, &fd_ineq),
        hessian: rows(&hess_rows, &fd_hess),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_products() {
        let mut j = SparseRows::new(3);
        j.push_row([(0, 1.0), (2, 2.0)]);
        j.push_row([(1, -1.0)]);
        assert_eq!(j.mul(&[1.0, 2.0, 3.0]), vec![7.0, -2.0]);
        let mut out = vec![0.0; 3];
        j.tmul_add(&[1.0, 2.0], &mut out);
        assert_eq!(out, vec![1.0, -2.0, 2.0]);
    }

    #[test]
    fn point_checks() {
        assert_eq!(check_point(&[1.0, f64::NAN], 2), Err(EvalError::NonFinite(1)));
        assert!(matches!(check_point(&[1.0], 2), Err(EvalError::Dimension { .. })));
    }
}
