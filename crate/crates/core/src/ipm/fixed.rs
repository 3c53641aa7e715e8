//! Elimination of variables pinned by singleton equality rows.

use crate::formulation::ConstraintHandle;
use crate::linalg::DenseMatrix;
use crate::nlp::{ConstraintEval, EvalError, Nlp, SingletonRow, SparseRows};

/// `nlp` restricted to its free variables. Fixing rows are dropped, as are
/// rows that only touch fixed variables.
pub(super) struct Reduced<'a> {
    nlp: &'a dyn Nlp,
    /// Full point with fixed entries set; free entries are overwritten.
    template: Vec<f64>,
    free: Vec<usize>,
    /// Full index to reduced index.
    position: Vec<Option<usize>>,
    fixings: Vec<SingletonRow>,
    eq_keep: Vec<usize>,
    ineq_keep: Vec<usize>,
}

/// Rows that only touch fixed variables and are violated.
#[derive(Debug)]
pub(super) struct Inconsistent;

impl<'a> Reduced<'a> {
    /// Returns `None` when nothing is fixed.
    pub(super) fn new(nlp: &'a dyn Nlp, x0: &[f64], tol: f64) -> Option<Result<Self, Inconsistent>> {
        let n = nlp.dimension();
        let mut fixings: Vec<SingletonRow> = Vec::new();
        let mut fixed = vec![false; n];
        for row in nlp.singleton_equalities() {
            if row.var < n && !fixed[row.var] && row.value().is_finite() {
                fixed[row.var] = true;
                fixings.push(row);
            }
        }
        if fixings.is_empty() {
            return None;
        }
        let mut template = x0.to_vec();
        template.resize(n, 0.0);
        for f in &fixings {
            template[f.var] = f.value();
        }
        let free: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
        let mut position = vec![None; n];
        for (k, &i) in free.iter().enumerate() {
            position[i] = Some(k);
        }
        let cons = match nlp.constraints(&template) {
            Ok(c) => c,
            Err(_) => return Some(Err(Inconsistent)),
        };
        let fixing_row: Vec<bool> = {
            let mut v = vec![false; cons.eq.len()];
            for f in &fixings {
                v[f.row] = true;
            }
            v
        };
        let touches_free = |jac: &SparseRows, r: usize| jac.row(r).0.iter().any(|&c| !fixed[c]);
        let mut eq_keep = Vec::new();
        for r in 0..cons.eq.len() {
            if fixing_row[r] {
                continue;
            }
            if touches_free(&cons.jac_eq, r) {
                eq_keep.push(r);
            } else if cons.eq[r].abs() > tol {
                return Some(Err(Inconsistent));
            }
        }
        let mut ineq_keep = Vec::new();
        for r in 0..cons.ineq.len() {
            if touches_free(&cons.jac_ineq, r) {
                ineq_keep.push(r);
            } else if cons.ineq[r] > tol {
                return Some(Err(Inconsistent));
            }
        }
        Some(Ok(Self { nlp, template, free, position, fixings, eq_keep, ineq_keep }))
    }

    pub(super) fn full(&self, xr: &[f64]) -> Vec<f64> {
        let mut x = self.template.clone();
        for (k, &i) in self.free.iter().enumerate() {
            x[i] = xr[k];
        }
        x
    }

    pub(super) fn restrict(&self, x: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&i| x.get(i).copied().unwrap_or(0.0)).collect()
    }

    /// Full multipliers from reduced ones. Dropped rows get zero, except the
    /// fixing rows, whose multipliers close stationarity in the fixed
    /// coordinates.
    pub(super) fn expand_duals(&self, x: &[f64], yr: &[f64], zr: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut y = vec![0.0; self.nlp.eq_count()];
        let mut z = vec![0.0; self.nlp.ineq_count()];
        for (&r, &v) in self.eq_keep.iter().zip(yr) {
            y[r] = v;
        }
        for (&r, &v) in self.ineq_keep.iter().zip(zr) {
            z[r] = v;
        }
        if let (Ok((_, mut g)), Ok(c)) = (self.nlp.objective(x), self.nlp.constraints(x)) {
            c.jac_eq.tmul_add(&y, &mut g);
            c.jac_ineq.tmul_add(&z, &mut g);
            for f in &self.fixings {
                y[f.row] = -g[f.var] / f.coeff;
            }
        }
        (y, z)
    }

    fn reduce_jacobian(&self, jac: &SparseRows, keep: &[usize]) -> SparseRows {
        let mut out = SparseRows::new(self.free.len());
        for &r in keep {
            let (cols, vals) = jac.row(r);
            out.push_row(cols.iter().zip(vals).filter_map(|(&c, &v)| self.position[c].map(|k| (k, v))));
        }
        out
    }
}

fn pick(v: &[f64], keep: &[usize]) -> Vec<f64> {
    keep.iter().map(|&r| v[r]).collect()
}

fn spread(v: &[f64], keep: &[usize], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (&r, &a) in keep.iter().zip(v) {
        out[r] = a;
    }
    out
}

impl Nlp for Reduced<'_> {
    fn dimension(&self) -> usize {
        self.free.len()
    }

    fn eq_count(&self) -> usize {
        self.eq_keep.len()
    }

    fn ineq_count(&self) -> usize {
        self.ineq_keep.len()
    }

    fn initial_point(&self) -> Vec<f64> {
        self.restrict(&self.template)
    }

    fn objective(&self, x: &[f64]) -> Result<(f64, Vec<f64>), EvalError> {
        let (f, g) = self.nlp.objective(&self.full(x))?;
        Ok((f, self.restrict(&g)))
    }

    fn constraints(&self, x: &[f64]) -> Result<ConstraintEval, EvalError> {
        let c = self.nlp.constraints(&self.full(x))?;
        Ok(ConstraintEval {
            eq: pick(&c.eq, &self.eq_keep),
            ineq: pick(&c.ineq, &self.ineq_keep),
            jac_eq: self.reduce_jacobian(&c.jac_eq, &self.eq_keep),
            jac_ineq: self.reduce_jacobian(&c.jac_ineq, &self.ineq_keep),
        })
    }

    fn constraint_values(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>), EvalError> {
        let (eq, ineq) = self.nlp.constraint_values(&self.full(x))?;
        Ok((pick(&eq, &self.eq_keep), pick(&ineq, &self.ineq_keep)))
    }

    fn hessian(&self, x: &[f64], obj_factor: f64, y: &[f64], z: &[f64], out: &mut DenseMatrix) -> Result<(), EvalError> {
        let mut h = DenseMatrix::zeros(self.nlp.dimension());
        let y = spread(y, &self.eq_keep, self.nlp.eq_count());
        let z = spread(z, &self.ineq_keep, self.nlp.ineq_count());
        self.nlp.hessian(&self.full(x), obj_factor, &y, &z, &mut h)?;
        for (a, &i) in self.free.iter().enumerate() {
            for (b, &j) in self.free.iter().enumerate() {
                out.add(a, b, h.get(i, j));
            }
        }
        Ok(())
    }

    fn handles(&self) -> (Vec<ConstraintHandle>, Vec<ConstraintHandle>) {
        (Vec::new(), Vec::new())
    }
}
