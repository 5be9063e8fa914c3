//! Log-barrier interior-point method for small smooth convex programs
//!
//! minimize f(x) subject to g_i(x) <= r_i, with `r_i` a small per-constraint
//! relaxation so that points sitting exactly on the boundary can start the
//! method. Centering uses damped Newton steps on
//! `t f(x) - sum log(r_i - g_i(x))` with a Jacobi-scaled Cholesky solve and
//! backtracking; `t` grows geometrically until the duality gap `m / t` is
//! below tolerance.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

pub trait ConvexProgram {
    fn dim(&self) -> usize;
    fn num_constraints(&self) -> usize;

    fn objective(&self, x: &DVector<f64>) -> f64;
    /// Writes the objective gradient into `grad` and adds `scale` times its
    /// Hessian to `hess`.
    fn objective_derivatives(
        &self,
        x: &DVector<f64>,
        grad: &mut DVector<f64>,
        hess: &mut DMatrix<f64>,
        scale: f64,
    );

    fn constraint(&self, i: usize, x: &DVector<f64>) -> f64;
    /// Writes the nonzero gradient entries of constraint `i` into `grad`
    /// (which arrives zeroed) and adds `scale` times its Hessian to `hess`.
    fn constraint_derivatives(
        &self,
        i: usize,
        x: &DVector<f64>,
        grad: &mut DVector<f64>,
        hess: &mut DMatrix<f64>,
        scale: f64,
    );

    /// Points outside the domain of `f` or any `g_i` (beyond the constraint
    /// values themselves) return `false`.
    fn in_domain(&self, x: &DVector<f64>) -> bool;
}

#[derive(Debug, Clone, Copy)]
pub struct BarrierOptions {
    /// Constraint relaxation `r_i`, uniform.
    pub relax: f64,
    /// Barrier parameter growth factor.
    pub mu: f64,
    /// Stop when `m / t <= gap_tol * max(|f|, gap_floor)`.
    pub gap_tol: f64,
    pub gap_floor: f64,
    /// Newton-decrement threshold `lambda^2 / 2` ending a centering step.
    pub newton_tol: f64,
    pub max_newton: usize,
    pub max_outer: usize,
    /// Constraints with slack below this enter the least-squares multiplier
    /// estimate.
    pub active_slack: f64,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self {
            relax: 1e-9,
            mu: 20.0,
            gap_tol: 1e-12,
            gap_floor: 1e-3,
            newton_tol: 1e-14,
            max_newton: 200,
            max_outer: 60,
            active_slack: 1e-7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BarrierOutcome {
    pub x: DVector<f64>,
    pub t: f64,
    /// Infinity norm of `grad f + sum lambda_i grad g_i` for the reported
    /// multipliers.
    pub kkt_residual: f64,
    pub newton_steps: usize,
    /// Barrier duals `1 / (t s_i)`, or nonnegative least-squares duals on
    /// the nearly active constraints when those fit better. Tiny slacks
    /// carry few correct digits, which limits the barrier estimate.
    pub multipliers: Vec<f64>,
}

struct Workspace {
    grad: DVector<f64>,
    hess: DMatrix<f64>,
    cgrad: DVector<f64>,
}

fn slacks<P: ConvexProgram>(p: &P, x: &DVector<f64>, relax: f64, out: &mut [f64]) -> bool {
    if !p.in_domain(x) {
        return false;
    }
    for (i, s) in out.iter_mut().enumerate() {
        *s = relax - p.constraint(i, x);
        if !(*s > 0.0) {
            return false;
        }
    }
    true
}

fn barrier_value<P: ConvexProgram>(p: &P, x: &DVector<f64>, t: f64, s: &[f64]) -> f64 {
    t * p.objective(x) - s.iter().map(|v| v.ln()).sum::<f64>()
}

pub fn solve<P: ConvexProgram>(
    p: &P,
    x0: DVector<f64>,
    opts: &BarrierOptions,
) -> Result<BarrierOutcome> {
    let n = p.dim();
    let m = p.num_constraints();
    let mut s = vec![0.0; m];
    if !slacks(p, &x0, opts.relax, &mut s) {
        let worst = (0..m)
            .map(|i| p.constraint(i, &x0) - opts.relax)
            .fold(f64::NEG_INFINITY, f64::max);
        return Err(Error::Solver {
            reason: "starting point is not strictly feasible".into(),
            residual: worst,
        });
    }

    let mut ws = Workspace {
        grad: DVector::zeros(n),
        hess: DMatrix::zeros(n, n),
        cgrad: DVector::zeros(n),
    };
    let mut x = x0;
    let scale = p.objective(&x).abs().max(opts.gap_floor);
    let mut t = m as f64 / scale;
    let mut steps = 0;

    for _ in 0..opts.max_outer {
        steps += center(p, &mut x, t, opts, &mut ws, &mut s)?;
        let gap = m as f64 / t;
        if gap <= opts.gap_tol * p.objective(&x).abs().max(opts.gap_floor) {
            break;
        }
        t *= opts.mu;
    }

    slacks(p, &x, opts.relax, &mut s);
    let barrier_dual: Vec<f64> = s.iter().map(|si| 1.0 / (t * si)).collect();
    let mut grad_f = DVector::zeros(n);
    let mut dummy = DMatrix::zeros(n, n);
    p.objective_derivatives(&x, &mut grad_f, &mut dummy, 0.0);
    let jac: Vec<DVector<f64>> = (0..m)
        .map(|i| {
            ws.cgrad.fill(0.0);
            p.constraint_derivatives(i, &x, &mut ws.cgrad, &mut dummy, 0.0);
            ws.cgrad.clone()
        })
        .collect();
    let residual = |lam: &[f64]| {
        let mut r = grad_f.clone();
        for (g, l) in jac.iter().zip(lam) {
            r.axpy(*l, g, 1.0);
        }
        r.amax()
    };
    let (multipliers, kkt_residual) = {
        let barrier_res = residual(&barrier_dual);
        match refined_multipliers(&grad_f, &jac, &s, opts.active_slack) {
            Some(lam) if residual(&lam) < barrier_res => {
                let r = residual(&lam);
                (lam, r)
            }
            _ => (barrier_dual, barrier_res),
        }
    };
    Ok(BarrierOutcome {
        x,
        t,
        kkt_residual,
        newton_steps: steps,
        multipliers,
    })
}

/// Least-squares multipliers on the constraints with slack below
/// `active_slack`, negative entries dropped and the fit repeated.
fn refined_multipliers(
    grad_f: &DVector<f64>,
    jac: &[DVector<f64>],
    s: &[f64],
    active_slack: f64,
) -> Option<Vec<f64>> {
    let mut active: Vec<usize> = (0..s.len()).filter(|&i| s[i] <= active_slack).collect();
    while !active.is_empty() {
        let a = DMatrix::from_fn(grad_f.len(), active.len(), |r, c| jac[active[c]][r]);
        let lam = a.svd(true, true).solve(&(-grad_f), 1e-14).ok()?;
        if lam.iter().all(|&l| l >= 0.0) {
            let mut out = vec![0.0; s.len()];
            for (k, &i) in active.iter().enumerate() {
                out[i] = lam[k];
            }
            return Some(out);
        }
        let worst = (0..active.len()).min_by(|&i, &j| lam[i].total_cmp(&lam[j]))?;
        active.remove(worst);
    }
    None
}

fn center<P: ConvexProgram>(
    p: &P,
    x: &mut DVector<f64>,
    t: f64,
    opts: &BarrierOptions,
    ws: &mut Workspace,
    s: &mut [f64],
) -> Result<usize> {
    let n = p.dim();
    let m = p.num_constraints();
    let mut trial_s = vec![0.0; m];
    for step in 0..opts.max_newton {
        slacks(p, x, opts.relax, s);
        ws.hess.fill(0.0);
        p.objective_derivatives(x, &mut ws.grad, &mut ws.hess, t);
        ws.grad *= t;
        for (i, &si) in s.iter().enumerate() {
            let inv = 1.0 / si;
            ws.cgrad.fill(0.0);
            p.constraint_derivatives(i, x, &mut ws.cgrad, &mut ws.hess, inv);
            ws.grad.axpy(inv, &ws.cgrad, 1.0);
            ws.hess.ger(inv * inv, &ws.cgrad, &ws.cgrad, 1.0);
        }

        let dx = newton_direction(&ws.hess, &ws.grad).ok_or_else(|| Error::Solver {
            reason: "barrier Hessian is not positive definite".into(),
            residual: ws.grad.amax(),
        })?;
        let slope = ws.grad.dot(&dx);
        let decrement = -slope;
        if decrement / 2.0 <= opts.newton_tol {
            return Ok(step);
        }

        let phi = barrier_value(p, x, t, s);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..80 {
            let trial = &*x + alpha * &dx;
            if slacks(p, &trial, opts.relax, &mut trial_s) {
                let phi_new = barrier_value(p, &trial, t, &trial_s);
                if phi_new <= phi + 0.01 * alpha * slope + 1e-15 * phi.abs() {
                    *x = trial;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            // no representable progress left along the Newton direction
            return Ok(step);
        }
        debug_assert_eq!(x.len(), n);
    }
    Ok(opts.max_newton)
}

/// Solves `H dx = -g` after symmetric Jacobi scaling, adding diagonal
/// regularization if the factorization fails.
fn newton_direction(hess: &DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    let n = grad.len();
    let d = DVector::from_iterator(
        n,
        hess.diagonal()
            .iter()
            .map(|&h| if h > 0.0 { 1.0 / h.sqrt() } else { 1.0 }),
    );
    let mut scaled = hess.clone();
    for j in 0..n {
        for i in 0..n {
            scaled[(i, j)] *= d[i] * d[j];
        }
    }
    let rhs = -grad.component_mul(&d);
    let mut reg = 0.0;
    for _ in 0..12 {
        let mut m = scaled.clone();
        if reg > 0.0 {
            for i in 0..n {
                m[(i, i)] += reg;
            }
        }
        if let Some(chol) = m.cholesky() {
            let y = chol.solve(&rhs);
            if y.iter().all(|v| v.is_finite()) {
                return Some(y.component_mul(&d));
            }
        }
        reg = if reg == 0.0 { 1e-12 } else { reg * 100.0 };
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    /// minimize x + y subject to x^2 + y^2 <= 1.
    struct Disk;

    impl ConvexProgram for Disk {
        fn dim(&self) -> usize {
            2
        }
        fn num_constraints(&self) -> usize {
            1
        }
        fn objective(&self, x: &DVector<f64>) -> f64 {
            x[0] + x[1]
        }
        fn objective_derivatives(
            &self,
            _: &DVector<f64>,
            g: &mut DVector<f64>,
            _: &mut DMatrix<f64>,
            _: f64,
        ) {
            g.fill(1.0);
        }
        fn constraint(&self, _: usize, x: &DVector<f64>) -> f64 {
            x[0] * x[0] + x[1] * x[1] - 1.0
        }
        fn constraint_derivatives(
            &self,
            _: usize,
            x: &DVector<f64>,
            g: &mut DVector<f64>,
            h: &mut DMatrix<f64>,
            scale: f64,
        ) {
            g[0] = 2.0 * x[0];
            g[1] = 2.0 * x[1];
            h[(0, 0)] += 2.0 * scale;
            h[(1, 1)] += 2.0 * scale;
        }
        fn in_domain(&self, _: &DVector<f64>) -> bool {
            true
        }
    }

    #[test]
    fn disk_linear_objective() {
        let opts = BarrierOptions {
            relax: 0.0,
            gap_floor: 1.0,
            ..Default::default()
        };
        let out = solve(&Disk, DVector::from_vec(vec![0.3, -0.2]), &opts).unwrap();
        let r = -std::f64::consts::FRAC_1_SQRT_2;
        assert!((out.x[0] - r).abs() < 1e-9, "{}", out.x);
        assert!((out.x[1] - r).abs() < 1e-9);
        assert!(out.kkt_residual < 1e-7, "{}", out.kkt_residual);
        assert!((out.multipliers[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
    }

    #[test]
    fn starts_on_the_boundary_with_relaxation() {
        let out = solve(
            &Disk,
            DVector::from_vec(vec![1.0, 0.0]),
            &BarrierOptions::default(),
        )
        .unwrap();
        assert!(out.x[0] < -0.7);
    }

    #[test]
    fn rejects_infeasible_start() {
        let err = solve(
            &Disk,
            DVector::from_vec(vec![2.0, 0.0]),
            &BarrierOptions::default(),
        );
        assert!(matches!(err, Err(Error::Solver { .. })));
    }
}
