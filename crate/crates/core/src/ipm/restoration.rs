//! Feasibility restoration: Levenberg–Marquardt on
//! `½|c_E(x)|² + ½|max(c_I(x) - relax, 0)|²`.

use crate::linalg::{DenseMatrix, LdlFactor, SymmetricFactor};
use crate::nlp::{EvalError, Nlp};

pub(super) enum Restoration {
    /// Feasible to the requested tolerance.
    Feasible(Vec<f64>),
    /// Stationary for the infeasibility measure with a nonzero residual.
    Infeasible(Vec<f64>),
    Stalled,
}

const MAX_ITER: usize = 500;
const FLAT_WINDOW: usize = 20;
/// Relative decrease over the window below which progress counts as stalled.
const FLAT_DECREASE: f64 = 1e-4;
/// Worst residual above which a stalled restoration reports infeasibility.
const INFEASIBLE_RESIDUAL: f64 = 1e-4;

struct Residual {
    value: f64,
    worst: f64,
    grad: Vec<f64>,
    jtj: DenseMatrix,
}

fn residual(nlp: &dyn Nlp, x: &[f64], relax: f64, with_jac: bool) -> Result<Residual, EvalError> {
    let n = x.len();
    if !with_jac {
        let (eq, ineq) = nlp.constraint_values(x)?;
        let viol = ineq.iter().map(|c| (c - relax).max(0.0));
        let r: Vec<f64> = eq.iter().copied().chain(viol).collect();
        let value = 0.5 * r.iter().map(|v| v * v).sum::<f64>();
        let worst = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        return Ok(Residual { value, worst, grad: Vec::new(), jtj: DenseMatrix::zeros(0) });
    }
    let c = nlp.constraints(x)?;
    let mut grad = vec![0.0; n];
    let mut jtj = DenseMatrix::zeros(n);
    let mut value = 0.0;
    let mut worst = 0.0f64;
    let mut add_row = |r: f64, cols: &[usize], vals: &[f64]| {
        value += 0.5 * r * r;
        worst = worst.max(r.abs());
        for (&ca, &va) in cols.iter().zip(vals) {
            grad[ca] += r * va;
            for (&cb, &vb) in cols.iter().zip(vals) {
                jtj.add(ca, cb, va * vb);
            }
        }
    };
    for (i, &r) in c.eq.iter().enumerate() {
        let (cols, vals) = c.jac_eq.row(i);
        add_row(r, cols, vals);
    }
    for (i, &ci) in c.ineq.iter().enumerate() {
        let r = ci - relax;
        if r > 0.0 {
            let (cols, vals) = c.jac_ineq.row(i);
            add_row(r, cols, vals);
        }
    }
    Ok(Residual { value, worst, grad, jtj })
}

pub(super) fn restore(nlp: &dyn Nlp, x0: &[f64], relax: f64, tol: f64) -> Result<Restoration, EvalError> {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut lambda = 1e-3;
    let mut history: Vec<f64> = Vec::new();
    for _ in 0..MAX_ITER {
        let res = residual(nlp, &x, relax, true)?;
        if res.worst <= 0.1 * tol {
            return Ok(Restoration::Feasible(x));
        }
        let gnorm = res.grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let flat = history.len() >= FLAT_WINDOW && {
            let old = history[history.len() - FLAT_WINDOW];
            old - res.value <= FLAT_DECREASE * old
        };
        if res.worst > INFEASIBLE_RESIDUAL && (gnorm <= 1e-9 * res.worst.max(1.0) || flat) {
            return Ok(Restoration::Infeasible(x));
        }
        history.push(res.value);
        loop {
            let mut m = res.jtj.clone();
            for i in 0..n {
                m.add(i, i, lambda * (1.0 + res.jtj.get(i, i)));
            }
            let rhs: Vec<f64> = res.grad.iter().map(|g| -g).collect();
            let d = LdlFactor::factor(&m, 1e-16).solve(&rhs);
            let xt: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
            let better = match residual(nlp, &xt, relax, false) {
                Ok(t) => t.value < res.value,
                Err(_) => false,
            };
            if better {
                x = xt;
                lambda = (lambda / 3.0).max(1e-12);
                break;
            }
            lambda *= 4.0;
            if lambda > 1e12 {
                return Ok(if res.worst > INFEASIBLE_RESIDUAL { Restoration::Infeasible(x) } else { Restoration::Stalled });
            }
        }
    }
    let res = residual(nlp, &x, relax, false)?;
    Ok(if res.worst > INFEASIBLE_RESIDUAL { Restoration::Infeasible(x) } else { Restoration::Stalled })
}
