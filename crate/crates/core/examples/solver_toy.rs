//! Uses the interior-point solver on a small problem of your own:
//!
//!     min (x - 2)² + (y - 1)²   s.t.   x + y = 2,   x² + y² <= 2.25
//!
//! and checks the KKT residuals of the returned point.
//!
//!     cargo run --example solver_toy

use storage_opf::ipm::{kkt_residuals, solve, SolverOptions};
use storage_opf::linalg::DenseMatrix;
use storage_opf::nlp::{derivative_check, ConstraintEval, EvalError, Nlp, SparseRows};

struct Toy;

impl Nlp for Toy {
    fn dimension(&self) -> usize {
        2
    }

    fn eq_count(&self) -> usize {
        1
    }

    fn ineq_count(&self) -> usize {
        1
    }

    fn initial_point(&self) -> Vec<f64> {
        vec![0.0, 0.0]
    }

    fn objective(&self, x: &[f64]) -> Result<(f64, Vec<f64>), EvalError> {
        let (a, b) = (x[0] - 2.0, x[1] - 1.0);
        Ok((a * a + b * b, vec![2.0 * a, 2.0 * b]))
    }

    fn constraints(&self, x: &[f64]) -> Result<ConstraintEval, EvalError> {
        let mut jac_eq = SparseRows::new(2);
        jac_eq.push_row([(0, 1.0), (1, 1.0)]);
        let mut jac_ineq = SparseRows::new(2);
        jac_ineq.push_row([(0, 2.0 * x[0]), (1, 2.0 * x[1])]);
        Ok(ConstraintEval {
            eq: vec![x[0] + x[1] - 2.0],
            ineq: vec![x[0] * x[0] + x[1] * x[1] - 2.25],
            jac_eq,
            jac_ineq,
        })
    }

    fn hessian(&self, _: &[f64], w: f64, _: &[f64], z: &[f64], out: &mut DenseMatrix) -> Result<(), EvalError> {
        for i in 0..2 {
            out.add(i, i, 2.0 * w + 2.0 * z[0]);
        }
        Ok(())
    }
}

fn main() -> anyhow::Result<()> {
    let e = derivative_check(&Toy, &[0.3, -0.7], &[1.5], &[0.8], 1e-6)?;
    println!("derivative check: max relative error {:.1e}", e.max());

    let (sol, duals) = solve(&Toy, &SolverOptions::default(), None);
    println!("{} in {} iterations", sol.status.name(), sol.iterations);
    println!("x = [{:.8}, {:.8}], f = {:.8}", sol.x[0], sol.x[1], sol.objective);
    println!("y = {:.8}, z = {:.8}", duals.eq[0], duals.ineq[0]);
    let r = kkt_residuals(&Toy, &sol.x, &duals.eq, &duals.ineq)?;
    println!(
        "stationarity {:.1e}, feasibility {:.1e}, complementarity {:.1e}",
        r.stationarity, r.feasibility, r.complementarity
    );
    Ok(())
}
