//! Polar branch flow expressions with exact first and second derivatives.
//!
//! Every end flow has the shape
//!
//! ```txt
//!     F = a_i V_i² + a_j V_j² + V_i V_j (α cos δ + β sin δ),   δ = θ_i − θ_j − φ
//! ```
//!
//! so one routine covers `P_ij`, `P_ji`, `Q_ij` and `Q_ji`.

use crate::network::Branch;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowEnd {
    /// Active power leaving the from-bus.
    PFrom,
    /// Active power leaving the to-bus.
    PTo,
    QFrom,
    QTo,
}

/// Branch parameters with bus positions resolved.
#[derive(Debug, Clone)]
pub struct BranchTerm {
    pub from: usize,
    pub to: usize,
    pub g: f64,
    pub b: f64,
    pub bc: f64,
    pub tau: Vec<f64>,
    pub phi: Vec<f64>,
}

impl BranchTerm {
    pub fn new(branch: &Branch, from: usize, to: usize) -> Self {
        Self {
            from,
            to,
            g: branch.series_conductance,
            b: branch.series_susceptance,
            bc: branch.charging_susceptance,
            tau: branch.tap_ratio.clone(),
            phi: branch.phase_shift.clone(),
        }
    }

    fn coefficients(&self, end: FlowEnd, t: usize) -> (f64, f64, f64, f64) {
        let (g, b, tau) = (self.g, self.b, self.tau[t]);
        let bsh = b + 0.5 * self.bc;
        match end {
            FlowEnd::PFrom => (g / (tau * tau), 0.0, -g / tau, -b / tau),
            FlowEnd::PTo => (0.0, g, -g / tau, b / tau),
            FlowEnd::QFrom => (-bsh / (tau * tau), 0.0, b / tau, -g / tau),
            FlowEnd::QTo => (0.0, -bsh, b / tau, g / tau),
        }
    }

    /// Evaluates one end flow at period `t` from `(V_i, V_j, θ_i, θ_j)`.
    pub fn eval(&self, end: FlowEnd, t: usize, vi: f64, vj: f64, ti: f64, tj: f64) -> FlowEval {
        let (ai, aj, alpha, beta) = self.coefficients(end, t);
        let delta = ti - tj - self.phi[t];
        let (s, c) = delta.sin_cos();
        let h = alpha * c + beta * s;
        let hp = -alpha * s + beta * c;
        let vv = vi * vj;
        let value = ai * vi * vi + aj * vj * vj + vv * h;
        let grad = [2.0 * ai * vi + vj * h, 2.0 * aj * vj + vi * h, vv * hp, -vv * hp];
        let hess = [
            [2.0 * ai, h, vj * hp, -vj * hp],
            [h, 2.0 * aj, vi * hp, -vi * hp],
            [vj * hp, vi * hp, -vv * h, vv * h],
            [-vj * hp, -vi * hp, vv * h, -vv * h],
        ];
        FlowEval { value, grad, hess }
    }
}

/// Value, gradient and Hessian with respect to `[V_i, V_j, θ_i, θ_j]`.
#[derive(Debug, Clone, Copy)]
pub struct FlowEval {
    pub value: f64,
    pub grad: [f64; 4],
    pub hess: [[f64; 4]; 4],
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(g: f64, b: f64, bc: f64, tau: f64, phi: f64) -> BranchTerm {
        BranchTerm { from: 0, to: 1, g, b, bc, tau: vec![tau], phi: vec![phi] }
    }

    #[test]
    fn flat_start_lossless_line_has_no_flow() {
        let br = line(0.0, -10.0, 0.0, 1.0, 0.0);
        for end in [FlowEnd::PFrom, FlowEnd::PTo, FlowEnd::QFrom, FlowEnd::QTo] {
            assert_eq!(br.eval(end, 0, 1.0, 1.0, 0.0, 0.0).value, 0.0);
        }
    }

    #[test]
    fn active_flow_from_angle_difference() {
        // P12 = -(1)(1)(-10) sin(0.1)
        let br = line(0.0, -10.0, 0.0, 1.0, 0.0);
        let p = br.eval(FlowEnd::PFrom, 0, 1.0, 1.0, 0.1, 0.0).value;
        assert!((p - 10.0 * 0.1f64.sin()).abs() < 1e-15);
        assert!((p - 0.99833).abs() < 1e-5);
        let pj = br.eval(FlowEnd::PTo, 0, 1.0, 1.0, 0.1, 0.0).value;
        assert!((p + pj).abs() < 1e-15, "lossless line conserves active power");
    }

    #[test]
    fn matches_textbook_expressions() {
        let (g, b, bc, tau, phi) = (1.3, -7.5, 0.2, 1.05, 0.03);
        let br = line(g, b, bc, tau, phi);
        let (vi, vj, ti, tj) = (1.02, 0.97, 0.11, -0.05);
        let d = ti - tj - phi;
        let pij = g * vi * vi / (tau * tau) - vi * vj / tau * (g * d.cos() + b * d.sin());
        let pji = g * vj * vj - vi * vj / tau * (g * (-d).cos() + b * (-d).sin());
        let qij = -(b + bc / 2.0) * vi * vi / (tau * tau) - vi * vj / tau * (g * d.sin() - b * d.cos());
        let qji = -(b + bc / 2.0) * vj * vj - vi * vj / tau * (g * (-d).sin() - b * (-d).cos());
        for (end, want) in [(FlowEnd::PFrom, pij), (FlowEnd::PTo, pji), (FlowEnd::QFrom, qij), (FlowEnd::QTo, qji)] {
            assert!((br.eval(end, 0, vi, vj, ti, tj).value - want).abs() < 1e-13, "{end:?}");
        }
    }

    #[test]
    fn derivatives_match_central_differences() {
        let br = line(0.8, -6.0, 0.1, 0.98, -0.02);
        let x0 = [1.01, 0.96, 0.07, -0.12];
        let h = 1e-6;
        for end in [FlowEnd::PFrom, FlowEnd::PTo, FlowEnd::QFrom, FlowEnd::QTo] {
            let f = |x: [f64; 4]| br.eval(end, 0, x[0], x[1], x[2], x[3]);
            let base = f(x0);
            for k in 0..4 {
                let (mut xp, mut xm) = (x0, x0);
                xp[k] += h;
                xm[k] -= h;
                let fd = (f(xp).value - f(xm).value) / (2.0 * h);
                assert!((fd - base.grad[k]).abs() < 1e-7, "{end:?} grad {k}");
                for l in 0..4 {
                    let fd2 = (f(xp).grad[l] - f(xm).grad[l]) / (2.0 * h);
                    assert!((fd2 - base.hess[k][l]).abs() < 1e-6, "{end:?} hess {k},{l}");
                }
            }
        }
    }
}
