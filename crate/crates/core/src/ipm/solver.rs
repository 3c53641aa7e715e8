use std::fs::File;
use std::io::{BufWriter, Write};

use super::fixed::{Inconsistent, Reduced};
use super::restoration::{restore, Restoration};
use super::{primal_infeasibility, DualRecord, SolutionPoint, SolveStatus, SolverOptions};
use crate::linalg::{DenseMatrix, EquilibratedLdl, Inertia, LdlFactor, SymmetricFactor};
use crate::nlp::{ConstraintEval, EvalError, Nlp, SparseRows};

use super::DUAL_SCALE_THRESHOLD as S_MAX;
const KAPPA_EPS: f64 = 10.0;
const KAPPA_SIGMA: f64 = 1e10;
const ARMIJO: f64 = 1e-4;
const PENALTY_RHO: f64 = 0.1;
const MIN_STEP: f64 = 1e-12;
const ZERO_PIVOT: f64 = 1e-14;
const TINY_STEP_LIMIT: usize = 5;
const MAX_RESTORATIONS: usize = 3;
const PENALTY_LIMIT: f64 = 1e8;

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, a| m.max(a.abs()))
}

fn one_norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a.abs()).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest `α <= 1` with `v + α dv >= (1 - tau) v`.
fn fraction_to_boundary(v: &[f64], dv: &[f64], tau: f64) -> f64 {
    v.iter().zip(dv).filter(|(_, d)| **d < 0.0).fold(1.0f64, |a, (vi, di)| a.min(-tau * vi / di))
}

/// Scaled objective and shifted constraints at one point.
struct Eval {
    f: f64,
    g: Vec<f64>,
    c: ConstraintEval,
}

struct Problem<'a> {
    nlp: &'a dyn Nlp,
    scale: f64,
    relax: f64,
}

impl Problem<'_> {
    fn eval(&self, x: &[f64]) -> Result<Eval, EvalError> {
        let (f, mut g) = self.nlp.objective(x)?;
        g.iter_mut().for_each(|v| *v *= self.scale);
        let mut c = self.nlp.constraints(x)?;
        c.ineq.iter_mut().for_each(|v| *v -= self.relax);
        check_finite(f, &g, &c.eq, &c.ineq)?;
        Ok(Eval { f: f * self.scale, g, c })
    }

    fn values(&self, x: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>), EvalError> {
        let (f, _) = self.nlp.objective(x)?;
        let (eq, mut ineq) = self.nlp.constraint_values(x)?;
        ineq.iter_mut().for_each(|v| *v -= self.relax);
        check_finite(f, &[], &eq, &ineq)?;
        Ok((f * self.scale, eq, ineq))
    }
}

fn check_finite(f: f64, g: &[f64], eq: &[f64], ineq: &[f64]) -> Result<(), EvalError> {
    if !f.is_finite() {
        return Err(EvalError::NonFinite(0));
    }
    for v in [g, eq, ineq] {
        if let Some(i) = v.iter().position(|a| !a.is_finite()) {
            return Err(EvalError::NonFinite(i));
        }
    }
    Ok(())
}

struct IterationLog(Option<BufWriter<File>>);

impl IterationLog {
    fn open(opts: &SolverOptions) -> Self {
        let w = opts.log_path.as_ref().and_then(|p| match File::create(p) {
            Ok(f) => Some(BufWriter::new(f)),
            Err(e) => {
                log::warn!("cannot open iteration log {}: {e}", p.display());
                None
            }
        });
        let mut log = Self(w);
        log.line(format_args!("iter\tmu\tobjective\tinf_pr\tinf_du\talpha"));
        log
    }

    fn line(&mut self, args: std::fmt::Arguments<'_>) {
        if let Some(w) = &mut self.0 {
            let _ = writeln!(w, "{args}");
        }
    }
}

struct Kkt {
    factor: EquilibratedLdl,
    /// `W + δ_w I` without the slack term, for the merit curvature.
    w_reg: DenseMatrix,
}

/// Factors `[[W + J_IᵀΣJ_I + δ_w I, J_Eᵀ], [J_E, -δ_c I]]`, raising `δ_w`
/// until the inertia is `(n, m_E, 0)`.
fn factor_kkt(
    w: &DenseMatrix,
    je: &SparseRows,
    ji: &SparseRows,
    sigma: &[f64],
    mu: f64,
    opts: &SolverOptions,
    last_delta: &mut f64,
) -> Option<Kkt> {
    let n = w.dim();
    let me = je.nrows();
    let mut base = DenseMatrix::zeros(n + me);
    for i in 0..n {
        for (j, v) in w.row(i).iter().enumerate() {
            if *v != 0.0 {
                base.set(i, j, *v);
            }
        }
    }
    for r in 0..ji.nrows() {
        let (cols, vals) = ji.row(r);
        for (a, &ca) in cols.iter().enumerate() {
            for (b, &cb) in cols.iter().enumerate() {
                base.add(ca, cb, sigma[r] * vals[a] * vals[b]);
            }
        }
    }
    for r in 0..me {
        let (cols, vals) = je.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            base.add(n + r, c, v);
            base.add(c, n + r, v);
        }
    }
    let wanted = Inertia { positive: n, negative: me, zero: 0 };
    let attempt = |dw: f64, dc: f64| {
        let mut k = base.clone();
        for i in 0..n {
            k.add(i, i, dw);
        }
        for r in 0..me {
            k.add(n + r, n + r, -dc);
        }
        EquilibratedLdl::factor(&k, ZERO_PIVOT)
    };
    let with_reg = |dw: f64| {
        let mut wr = w.clone();
        for i in 0..n {
            wr.add(i, i, dw);
        }
        wr
    };

    let f = attempt(0.0, 0.0);
    if f.inertia() == wanted {
        *last_delta = 0.0;
        return Some(Kkt { factor: f, w_reg: w.clone() });
    }
    let dc = if f.inertia().zero > 0 { 1e-8 * mu.powf(0.25) } else { 0.0 };
    if dc > 0.0 {
        let f = attempt(0.0, dc);
        if f.inertia() == wanted {
            *last_delta = 0.0;
            return Some(Kkt { factor: f, w_reg: w.clone() });
        }
    }
    let (mut dw, grow) = if *last_delta == 0.0 {
        (1e-4f64.max(opts.regularization_min), 100.0)
    } else {
        ((*last_delta / 3.0).max(opts.regularization_min), 8.0)
    };
    while dw <= opts.regularization_max {
        let f = attempt(dw, dc);
        if f.inertia() == wanted {
            *last_delta = dw;
            return Some(Kkt { factor: f, w_reg: with_reg(dw) });
        }
        dw *= grow;
    }
    None
}

struct State {
    x: Vec<f64>,
    s: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
}

fn least_squares_duals(ev: &Eval, z: &[f64], n: usize) -> Vec<f64> {
    let me = ev.c.jac_eq.nrows();
    if me == 0 {
        return Vec::new();
    }
    let mut k = DenseMatrix::zeros(n + me);
    for i in 0..n {
        k.set(i, i, 1.0);
    }
    for r in 0..me {
        let (cols, vals) = ev.c.jac_eq.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            k.add(n + r, c, v);
            k.add(c, n + r, v);
        }
        k.add(n + r, n + r, -1e-8);
    }
    let mut rhs = ev.g.clone();
    ev.c.jac_ineq.tmul_add(z, &mut rhs);
    rhs.iter_mut().for_each(|v| *v = -*v);
    rhs.resize(n + me, 0.0);
    let sol = LdlFactor::factor(&k, ZERO_PIVOT).solve(&rhs);
    let y = sol[n..].to_vec();
    if y.iter().all(|v| v.is_finite()) && inf_norm(&y) <= 1e3 {
        y
    } else {
        vec![0.0; me]
    }
}

fn initial_slacks(ineq: &[f64]) -> Vec<f64> {
    ineq.iter().map(|c| (-c).max(1e-2)).collect()
}

/// Scaled optimality error for barrier parameter `mu`.
fn kkt_error(ev: &Eval, st: &State, mu: f64) -> (f64, f64, f64) {
    let mut rd = ev.g.clone();
    ev.c.jac_eq.tmul_add(&st.y, &mut rd);
    ev.c.jac_ineq.tmul_add(&st.z, &mut rd);
    let (me, mi) = (st.y.len(), st.z.len());
    let sd = if me + mi == 0 { 1.0 } else { S_MAX.max((one_norm(&st.y) + one_norm(&st.z)) / (me + mi) as f64) / S_MAX };
    let sc = if mi == 0 { 1.0 } else { S_MAX.max(one_norm(&st.z) / mi as f64) / S_MAX };
    let inf_du = inf_norm(&rd) / sd;
    let inf_pr = ev
        .c
        .ineq
        .iter()
        .zip(&st.s)
        .fold(inf_norm(&ev.c.eq), |m, (c, s)| m.max((c + s).abs()));
    let comp = st.s.iter().zip(&st.z).fold(0.0f64, |m, (s, z)| m.max((s * z - mu).abs())) / sc;
    (inf_du.max(inf_pr).max(comp), inf_pr, inf_du)
}

fn merit(f: f64, eq: &[f64], ineq: &[f64], s: &[f64], mu: f64, nu: f64) -> f64 {
    let barrier: f64 = s.iter().map(|v| v.ln()).sum();
    let theta = one_norm(eq) + ineq.iter().zip(s).map(|(c, s)| (c + s).abs()).sum::<f64>();
    f - mu * barrier + nu * theta
}

fn finish(
    nlp: &dyn Nlp,
    prob: &Problem<'_>,
    st: &State,
    status: SolveStatus,
    iterations: usize,
) -> (SolutionPoint, DualRecord) {
    let (objective, primal_infeasibility) = match (nlp.objective(&st.x), nlp.constraint_values(&st.x)) {
        (Ok((f, _)), Ok((eq, ineq))) => (f, primal_infeasibility(&eq, &ineq)),
        _ => (f64::NAN, f64::INFINITY),
    };
    let unscale = |v: &[f64]| v.iter().map(|a| a / prob.scale).collect::<Vec<_>>();
    let (eh, ih) = nlp.handles();
    let duals = DualRecord::new(unscale(&st.y), unscale(&st.z), eh, ih);
    (SolutionPoint { x: st.x.clone(), objective, primal_infeasibility, status, iterations, objective_scale: prob.scale }, duals)
}

/// Solves the NLP from `warm_start` (or its default initial point).
/// Variables pinned by singleton equality rows are eliminated first.
pub fn solve(nlp: &dyn Nlp, opts: &SolverOptions, warm_start: Option<&[f64]>) -> (SolutionPoint, DualRecord) {
    let x0 = warm_start.map_or_else(|| nlp.initial_point(), |w| w.to_vec());
    let reduced = match Reduced::new(nlp, &x0, opts.kkt_tolerance) {
        None => return solve_direct(nlp, opts, Some(&x0)),
        Some(r) => r,
    };
    let (eh, ih) = nlp.handles();
    let (x, status, iterations, scale, y, z) = match reduced {
        Ok(red) => {
            let (sol, duals) = solve_direct(&red, opts, Some(&red.restrict(&x0)));
            let x = red.full(&sol.x);
            let (y, z) = red.expand_duals(&x, &duals.eq, &duals.ineq);
            (x, sol.status, sol.iterations, sol.objective_scale, y, z)
        }
        Err(Inconsistent) => {
            let mut x = x0;
            x.resize(nlp.dimension(), 0.0);
            for f in nlp.singleton_equalities() {
                if let Some(v) = x.get_mut(f.var) {
                    *v = f.value();
                }
            }
            let (me, mi) = (nlp.eq_count(), nlp.ineq_count());
            (x, SolveStatus::InfeasibleDetected, 0, 1.0, vec![0.0; me], vec![0.0; mi])
        }
    };
    let (objective, primal_infeasibility) = match (nlp.objective(&x), nlp.constraint_values(&x)) {
        (Ok((f, _)), Ok((eq, ineq))) => (f, primal_infeasibility(&eq, &ineq)),
        _ => (f64::NAN, f64::INFINITY),
    };
    (
        SolutionPoint { x, objective, primal_infeasibility, status, iterations, objective_scale: scale },
        DualRecord::new(y, z, eh, ih),
    )
}

fn solve_direct(nlp: &dyn Nlp, opts: &SolverOptions, warm_start: Option<&[f64]>) -> (SolutionPoint, DualRecord) {
    let n = nlp.dimension();
    let (me, mi) = (nlp.eq_count(), nlp.ineq_count());
    let x0 = warm_start.map_or_else(|| nlp.initial_point(), |w| w.to_vec());
    let mut prob = Problem { nlp, scale: 1.0, relax: opts.constraint_relax };
    let mut st = State { x: x0, s: vec![1.0; mi], y: vec![0.0; me], z: vec![1.0; mi] };
    if st.x.len() != n {
        st.x.resize(n, 0.0);
        return finish(nlp, &prob, &st, SolveStatus::NumericalFailure, 0);
    }
    let fail = |st: &State, prob: &Problem<'_>, it| finish(nlp, prob, st, SolveStatus::NumericalFailure, it);

    match nlp.objective(&st.x) {
        Ok((_, g)) => {
            let gmax = inf_norm(&g);
            if gmax.is_finite() && gmax > 0.0 {
                prob.scale = (100.0 / gmax).min(1.0);
            }
        }
        Err(_) => return fail(&st, &prob, 0),
    }
    let mut ev = match prob.eval(&st.x) {
        Ok(e) => e,
        Err(_) => return fail(&st, &prob, 0),
    };
    st.s = initial_slacks(&ev.c.ineq);
    st.y = least_squares_duals(&ev, &st.z, n);

    let tol = opts.kkt_tolerance;
    let mu_min = tol / 10.0;
    let tau = opts.fraction_to_boundary;
    let mut mu = opts.barrier_initial;
    let mut nu = 1.0f64;
    let mut last_delta = 0.0;
    let mut tiny_steps = 0;
    let mut restorations = 0;
    let mut log = IterationLog::open(opts);
    let mut hess = DenseMatrix::zeros(n);

    for iter in 0..opts.max_iterations {
        let (err0, _, _) = kkt_error(&ev, &st, 0.0);
        if err0 <= tol {
            return finish(nlp, &prob, &st, SolveStatus::Optimal, iter);
        }
        while mu > mu_min && kkt_error(&ev, &st, mu).0 <= KAPPA_EPS * mu {
            mu = (opts.barrier_shrink * mu).max(mu_min);
        }

        let (_, inf_pr, inf_du) = kkt_error(&ev, &st, mu);

        // Newton direction.
        hess.fill_zero();
        if nlp.hessian(&st.x, prob.scale, &st.y, &st.z, &mut hess).is_err() {
            return fail(&st, &prob, iter);
        }
        let sigma: Vec<f64> = st.s.iter().zip(&st.z).map(|(s, z)| z / s).collect();
        let Some(kkt) = factor_kkt(&hess, &ev.c.jac_eq, &ev.c.jac_ineq, &sigma, mu, opts, &mut last_delta) else {
            log::debug!("inertia correction exhausted at iteration {iter}");
            return fail(&st, &prob, iter);
        };
        let r_i: Vec<f64> = ev.c.ineq.iter().zip(&st.s).map(|(c, s)| c + s).collect();
        let direction = |r_i: &[f64], c_e: &[f64]| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
            let mut rd = ev.g.clone();
            ev.c.jac_eq.tmul_add(&st.y, &mut rd);
            let w: Vec<f64> = (0..mi).map(|k| mu / st.s[k] + sigma[k] * r_i[k]).collect();
            ev.c.jac_ineq.tmul_add(&w, &mut rd);
            let mut rhs: Vec<f64> = rd.iter().map(|v| -v).collect();
            rhs.extend(c_e.iter().map(|v| -v));
            let sol = kkt.factor.solve(&rhs);
            let dx = sol[..n].to_vec();
            let dy = sol[n..].to_vec();
            let jdx = ev.c.jac_ineq.mul(&dx);
            let ds: Vec<f64> = (0..mi).map(|k| -r_i[k] - jdx[k]).collect();
            (dx, dy, ds)
        };
        let (mut dx, mut dy, mut ds) = direction(&r_i, &ev.c.eq);
        if dx.iter().chain(&dy).chain(&ds).any(|v| !v.is_finite()) {
            return fail(&st, &prob, iter);
        }

        // Merit penalty update and directional derivative.
        let theta = one_norm(&ev.c.eq) + one_norm(&r_i);
        let barrier_slope = dot(&ev.g, &dx) - mu * st.s.iter().zip(&ds).map(|(s, d)| d / s).sum::<f64>();
        let curvature = dot(&dx, &kkt.w_reg.mul_vec(&dx)) + (0..mi).map(|k| sigma[k] * ds[k] * ds[k]).sum::<f64>();
        if theta > 1e-14 {
            let needed = (barrier_slope + 0.5 * curvature.max(0.0)) / ((1.0 - PENALTY_RHO) * theta);
            if nu < needed {
                nu = needed + 1.0;
            }
        }
        let slope = barrier_slope - nu * theta;
        let phi0 = merit(ev.f, &ev.c.eq, &ev.c.ineq, &st.s, mu, nu);
        let slack = 10.0 * f64::EPSILON * phi0.abs();

        let trial = |dx: &[f64], ds: &[f64], alpha: f64| -> Option<(Vec<f64>, Vec<f64>, f64, Vec<f64>, Vec<f64>)> {
            let xt: Vec<f64> = st.x.iter().zip(dx).map(|(x, d)| x + alpha * d).collect();
            let stt: Vec<f64> = st.s.iter().zip(ds).map(|(s, d)| s + alpha * d).collect();
            let (f, eq, ineq) = prob.values(&xt).ok()?;
            let phi = merit(f, &eq, &ineq, &stt, mu, nu);
            Some((xt, stt, phi, eq, ineq))
        };

        let alpha_max = fraction_to_boundary(&st.s, &ds, tau);
        let mut alpha = alpha_max;
        let mut accepted = false;
        let mut first = true;
        while alpha >= MIN_STEP {
            if let Some((_, stt, phi, eq, ineq)) = trial(&dx, &ds, alpha) {
                if phi <= phi0 + ARMIJO * alpha * slope + slack {
                    accepted = true;
                    break;
                }
                if first {
                    // Second-order correction with the trial residuals.
                    let c_soc_e: Vec<f64> = ev.c.eq.iter().zip(&eq).map(|(a, b)| alpha * a + b).collect();
                    let c_soc_i: Vec<f64> =
                        (0..mi).map(|k| alpha * r_i[k] + ineq[k] + stt[k]).collect();
                    let (sx, sy, ss) = direction(&c_soc_i, &c_soc_e);
                    let a_soc = fraction_to_boundary(&st.s, &ss, tau);
                    if let Some((_, _, phi_s, _, _)) = trial(&sx, &ss, a_soc) {
                        if phi_s <= phi0 + ARMIJO * alpha * slope + slack {
                            dx = sx;
                            dy = sy;
                            ds = ss;
                            alpha = a_soc;
                            accepted = true;
                            break;
                        }
                    }
                }
            }
            first = false;
            alpha *= 0.5;
        }

        if !accepted && theta <= tol {
            // Round-off regime: the merit cannot resolve the decrease.
            alpha = alpha_max;
            accepted = true;
            tiny_steps += 1;
        }

        let step_small = accepted
            && dx.iter().zip(&st.x).all(|(d, x)| (alpha * d).abs() <= 10.0 * f64::EPSILON * (1.0 + x.abs()));
        if step_small {
            tiny_steps += 1;
        } else if accepted {
            tiny_steps = 0;
        }

        if !accepted || nu > PENALTY_LIMIT || tiny_steps >= TINY_STEP_LIMIT {
            if tiny_steps >= TINY_STEP_LIMIT && mu > mu_min {
                mu = (opts.barrier_shrink * mu).max(mu_min);
                tiny_steps = 0;
                continue;
            }
            if restorations >= MAX_RESTORATIONS {
                return fail(&st, &prob, iter);
            }
            restorations += 1;
            log::debug!("restoration phase at iteration {iter}");
            match restore(nlp, &st.x, prob.relax, tol) {
                Ok(Restoration::Feasible(x)) => {
                    st.x = x;
                    ev = match prob.eval(&st.x) {
                        Ok(e) => e,
                        Err(_) => return fail(&st, &prob, iter),
                    };
                    st.s = initial_slacks(&ev.c.ineq);
                    st.z = st.s.iter().map(|s| (mu / s).max(1e-2)).collect();
                    st.y = least_squares_duals(&ev, &st.z, n);
                    nu = 1.0;
                    tiny_steps = 0;
                    continue;
                }
                Ok(Restoration::Infeasible(x)) => {
                    st.x = x;
                    return finish(nlp, &prob, &st, SolveStatus::InfeasibleDetected, iter);
                }
                _ => return fail(&st, &prob, iter),
            }
        }

        // Dual step.
        let dz: Vec<f64> = (0..mi).map(|k| mu / st.s[k] - st.z[k] - sigma[k] * ds[k]).collect();
        let alpha_z = fraction_to_boundary(&st.z, &dz, tau);
        for (x, d) in st.x.iter_mut().zip(&dx) {
            *x += alpha * d;
        }
        for (s, d) in st.s.iter_mut().zip(&ds) {
            *s += alpha * d;
        }
        for (y, d) in st.y.iter_mut().zip(&dy) {
            *y += alpha * d;
        }
        for k in 0..mi {
            let z = st.z[k] + alpha_z * dz[k];
            let (lo, hi) = (mu / (KAPPA_SIGMA * st.s[k]), KAPPA_SIGMA * mu / st.s[k]);
            st.z[k] = z.clamp(lo, hi.max(lo));
        }
        ev = match prob.eval(&st.x) {
            Ok(e) => e,
            Err(_) => return fail(&st, &prob, iter),
        };
        log.line(format_args!(
            "{iter}\t{mu:.3e}\t{:.10e}\t{inf_pr:.3e}\t{inf_du:.3e}\t{alpha:.3e}",
            ev.f / prob.scale
        ));
    }
    let (err0, _, _) = kkt_error(&ev, &st, 0.0);
    let status = if err0 <= tol { SolveStatus::Optimal } else { SolveStatus::MaxIter };
    finish(nlp, &prob, &st, status, opts.max_iterations)
}
