//! Convexified placement subproblem around a linearization point.
//!
//! Per sensor the iterate carries the bandwidth `B`, the rate-approximation
//! variable `nu`, the squared slant distance `Q`, the line-of-sight
//! probability `Pr` and the elevation `theta`. The non-convex coupling
//! constraints between them are replaced by first-order expansions at the
//! previous iterate, which gives a convex inner approximation:
//!
//! - rate: `Dt / B - (2 ln nu + 1/nu - 1) <= 0`, with `Dt = D ln 2 / T`
//! - SNR:  `ln[nu'(nu'-1)] + s'(nu - nu') <= kd Pr - ln Q' - (Q - Q')/Q' + C`
//! - range: `|h - h_u|^2 + H^2 <= Q`
//! - LoS:  `1 + a exp(-b (k theta - a)) <= 1/Pr' - (Pr - Pr')/Pr'^2`
//! - angle: `sin th' + cos th' (th - th') <= H/sqrt(Q') - H (Q - Q') / (2 Q'^1.5)`
//!
//! plus `nu >= 1`, `0 <= Pr <= 1`, `0 <= theta <= pi/2`. The solver works in
//! kilometres and megahertz.

use std::f64::consts::{FRAC_PI_2, LN_10, LN_2, PI};

use nalgebra::{DMatrix, DVector};

use super::barrier::{self, BarrierOptions, ConvexProgram};
use crate::channel::{channel_state, los_probability, spectral_efficiency_approx};
use crate::scenario::{Location, NoiseModel, Scenario};
use crate::{Error, Result};

pub const LENGTH_SCALE: f64 = 1e3;
pub const BANDWIDTH_SCALE: f64 = 1e6;
const VARS_PER_USER: usize = 5;
const CONSTRAINTS_PER_USER: usize = 10;

/// Location and per-sensor slack variables of the placement problem, in SI
/// units except `theta`, which is in the scenario's sigmoid angle unit.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaIterate {
    pub location: Location,
    /// Hz.
    pub bandwidth: Vec<f64>,
    pub nu: Vec<f64>,
    /// Squared slant distance, m^2.
    pub q: Vec<f64>,
    pub pr: Vec<f64>,
    pub theta: Vec<f64>,
}

impl ScaIterate {
    /// The point where every coupling constraint is tight for the given
    /// location: exact distance, elevation, LoS probability, `nu` from the
    /// SNR and the minimum bandwidth.
    pub fn at_location(scenario: &Scenario, loc: Location) -> Result<Self> {
        ensure_fixed_noise(scenario)?;
        let unit = scenario.angle_unit.per_radian();
        let t = scenario.latency_req;
        let n = scenario.num_users();
        let mut it = ScaIterate {
            location: loc,
            bandwidth: Vec::with_capacity(n),
            nu: Vec::with_capacity(n),
            q: Vec::with_capacity(n),
            pr: Vec::with_capacity(n),
            theta: Vec::with_capacity(n),
        };
        for s in &scenario.sensors {
            let st = channel_state(loc, s, scenario);
            let approx = spectral_efficiency_approx(st.mean_snr)
                .map_err(|_| Error::Unreachable { id: s.id, se: 0.0 })?;
            it.bandwidth
                .push(s.data_volume / (t * approx.spectral_efficiency));
            it.nu.push(approx.nu);
            it.q.push(st.distance * st.distance);
            it.pr.push(los_probability(
                st.elevation,
                &scenario.channel,
                scenario.angle_unit,
            ));
            it.theta.push(st.elevation * unit);
        }
        Ok(it)
    }

    pub fn num_users(&self) -> usize {
        self.nu.len()
    }

    pub fn sum_bandwidth(&self) -> f64 {
        self.bandwidth.iter().sum()
    }

    /// Solver vector `[hx, hy, (B, nu, Q, Pr, theta)_u ...]` in km, MHz,
    /// km^2 and radians.
    pub fn to_scaled(&self, per_radian: f64) -> DVector<f64> {
        let n = self.num_users();
        let mut x = DVector::zeros(2 + VARS_PER_USER * n);
        x[0] = self.location.x / LENGTH_SCALE;
        x[1] = self.location.y / LENGTH_SCALE;
        for u in 0..n {
            let k = 2 + VARS_PER_USER * u;
            x[k] = self.bandwidth[u] / BANDWIDTH_SCALE;
            x[k + 1] = self.nu[u];
            x[k + 2] = self.q[u] / (LENGTH_SCALE * LENGTH_SCALE);
            x[k + 3] = self.pr[u];
            x[k + 4] = self.theta[u] / per_radian;
        }
        x
    }

    pub fn from_scaled(x: &DVector<f64>, per_radian: f64) -> Self {
        let n = (x.len() - 2) / VARS_PER_USER;
        let mut it = ScaIterate {
            location: Location::new(x[0] * LENGTH_SCALE, x[1] * LENGTH_SCALE),
            bandwidth: Vec::with_capacity(n),
            nu: Vec::with_capacity(n),
            q: Vec::with_capacity(n),
            pr: Vec::with_capacity(n),
            theta: Vec::with_capacity(n),
        };
        for u in 0..n {
            let k = 2 + VARS_PER_USER * u;
            it.bandwidth.push(x[k] * BANDWIDTH_SCALE);
            it.nu.push(x[k + 1]);
            it.q.push(x[k + 2] * LENGTH_SCALE * LENGTH_SCALE);
            it.pr.push(x[k + 3]);
            it.theta.push(x[k + 4] * per_radian);
        }
        it
    }
}

pub(crate) fn ensure_fixed_noise(scenario: &Scenario) -> Result<()> {
    if scenario.noise_model == NoiseModel::Psd {
        return Err(Error::Unsupported(
            "placement by convex approximation assumes a fixed noise power".into(),
        ));
    }
    Ok(())
}

/// `f(nu) = 2 ln nu + 1/nu - 1`.
pub fn rate_term(nu: f64) -> f64 {
    2.0 * nu.ln() + 1.0 / nu - 1.0
}

/// Constraint families of the subproblem, in evaluation order per sensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Rate,
    Snr,
    Range,
    LineOfSight,
    Angle,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Rate,
        Family::Snr,
        Family::Range,
        Family::LineOfSight,
        Family::Angle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Rate => "rate",
            Family::Snr => "snr",
            Family::Range => "range",
            Family::LineOfSight => "line_of_sight",
            Family::Angle => "angle",
        }
    }
}

#[derive(Debug, Clone)]
struct UserData {
    /// `D ln 2 / (T 1e6)`.
    dt: f64,
    /// Sensor position, km.
    ux: f64,
    uy: f64,
    /// `ln(p / sigma^2) + 2 ln(c / 4 pi f) - kappa eta_NLoS - ln(1e6)`.
    c: f64,
    // linearization point
    nu0: f64,
    q0: f64,
    pr0: f64,
    th0: f64,
}

/// The convex subproblem built at a linearization point.
#[derive(Debug, Clone)]
pub struct Subproblem {
    users: Vec<UserData>,
    /// Altitude, km.
    h: f64,
    a: f64,
    b: f64,
    /// Sigmoid angle units per radian.
    k: f64,
    /// `ln(10)/10 (eta_NLoS - eta_LoS)`.
    kd: f64,
}

impl Subproblem {
    pub fn new(scenario: &Scenario, point: &ScaIterate) -> Result<Self> {
        ensure_fixed_noise(scenario)?;
        if point.num_users() != scenario.num_users() {
            return Err(Error::InvalidInput(
                "iterate does not match the scenario".into(),
            ));
        }
        let kappa = LN_10 / 10.0;
        let ch = &scenario.channel;
        let per_radian = scenario.angle_unit.per_radian();
        let users = scenario
            .sensors
            .iter()
            .enumerate()
            .map(|(u, s)| UserData {
                dt: s.data_volume * LN_2 / (scenario.latency_req * BANDWIDTH_SCALE),
                ux: s.x / LENGTH_SCALE,
                uy: s.y / LENGTH_SCALE,
                c: (s.tx_power / scenario.noise_power).ln()
                    + 2.0 * (scenario.light_speed / (4.0 * PI * scenario.carrier_freq)).ln()
                    - kappa * ch.eta_nlos
                    - (LENGTH_SCALE * LENGTH_SCALE).ln(),
                nu0: point.nu[u],
                q0: point.q[u] / (LENGTH_SCALE * LENGTH_SCALE),
                pr0: point.pr[u],
                th0: point.theta[u] / per_radian,
            })
            .collect();
        Ok(Self {
            users,
            h: scenario.uav_height / LENGTH_SCALE,
            a: ch.a,
            b: ch.b,
            k: per_radian,
            kd: kappa * (ch.eta_nlos - ch.eta_los),
        })
    }

    fn sigmoid_term(&self, theta: f64) -> f64 {
        self.a * (-self.b * (self.k * theta - self.a)).exp()
    }

    /// Value of the `family` constraint of sensor `u` at `x` (`<= 0` is feasible).
    pub fn family_value(&self, family: Family, u: usize, x: &DVector<f64>) -> f64 {
        let d = &self.users[u];
        let j = 2 + VARS_PER_USER * u;
        let (bw, nu, q, pr, th) = (x[j], x[j + 1], x[j + 2], x[j + 3], x[j + 4]);
        match family {
            Family::Rate => d.dt / bw - rate_term(nu),
            Family::Snr => {
                let g0 = d.nu0 * (d.nu0 - 1.0);
                g0.ln() + (2.0 * d.nu0 - 1.0) / g0 * (nu - d.nu0) - self.kd * pr
                    + d.q0.ln()
                    + (q - d.q0) / d.q0
                    - d.c
            }
            Family::Range => (x[0] - d.ux).powi(2) + (x[1] - d.uy).powi(2) + self.h * self.h - q,
            Family::LineOfSight => {
                1.0 + self.sigmoid_term(th) - 1.0 / d.pr0 + (pr - d.pr0) / (d.pr0 * d.pr0)
            }
            Family::Angle => {
                d.th0.sin() + d.th0.cos() * (th - d.th0) - self.h / d.q0.sqrt()
                    + self.h * (q - d.q0) / (2.0 * d.q0.powf(1.5))
            }
        }
    }

    /// Makes every coupling constraint tight for the location in `x`,
    /// propagating range -> angle -> LoS -> SNR -> rate. Each step can only
    /// lower the bandwidth of a feasible point.
    pub fn activate(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = x.clone();
        for (u, d) in self.users.iter().enumerate() {
            let j = 2 + VARS_PER_USER * u;
            let q = (y[0] - d.ux).powi(2) + (y[1] - d.uy).powi(2) + self.h * self.h;
            let rhs = self.h / d.q0.sqrt() - self.h * (q - d.q0) / (2.0 * d.q0.powf(1.5));
            let cos0 = d.th0.cos();
            let th = if cos0 > 1e-12 {
                d.th0 + (rhs - d.th0.sin()) / cos0
            } else {
                FRAC_PI_2
            }
            .clamp(0.0, FRAC_PI_2);
            let pr = (2.0 * d.pr0 - d.pr0 * d.pr0 * (1.0 + self.sigmoid_term(th))).clamp(0.0, 1.0);
            let g0 = d.nu0 * (d.nu0 - 1.0);
            let slope = (2.0 * d.nu0 - 1.0) / g0;
            let nu = (d.nu0
                + (self.kd * pr - d.q0.ln() - (q - d.q0) / d.q0 + d.c - g0.ln()) / slope)
                .max(1.0);
            y[j] = d.dt / rate_term(nu);
            y[j + 1] = nu;
            y[j + 2] = q;
            y[j + 3] = pr;
            y[j + 4] = th;
        }
        y
    }
}

impl ConvexProgram for Subproblem {
    fn dim(&self) -> usize {
        2 + VARS_PER_USER * self.users.len()
    }

    fn num_constraints(&self) -> usize {
        CONSTRAINTS_PER_USER * self.users.len()
    }

    fn objective(&self, x: &DVector<f64>) -> f64 {
        (0..self.users.len())
            .map(|u| x[2 + VARS_PER_USER * u])
            .sum()
    }

    fn objective_derivatives(
        &self,
        _: &DVector<f64>,
        grad: &mut DVector<f64>,
        _: &mut DMatrix<f64>,
        _: f64,
    ) {
        grad.fill(0.0);
        for u in 0..self.users.len() {
            grad[2 + VARS_PER_USER * u] = 1.0;
        }
    }

    fn constraint(&self, i: usize, x: &DVector<f64>) -> f64 {
        let u = i / CONSTRAINTS_PER_USER;
        let j = 2 + VARS_PER_USER * u;
        match i % CONSTRAINTS_PER_USER {
            c @ 0..=4 => self.family_value(Family::ALL[c], u, x),
            5 => 1.0 - x[j + 1],
            6 => -x[j + 3],
            7 => x[j + 3] - 1.0,
            8 => -x[j + 4],
            _ => x[j + 4] - FRAC_PI_2,
        }
    }

    fn constraint_derivatives(
        &self,
        i: usize,
        x: &DVector<f64>,
        grad: &mut DVector<f64>,
        hess: &mut DMatrix<f64>,
        scale: f64,
    ) {
        let u = i / CONSTRAINTS_PER_USER;
        let d = &self.users[u];
        let j = 2 + VARS_PER_USER * u;
        let (ib, inu, iq, ipr, ith) = (j, j + 1, j + 2, j + 3, j + 4);
        match i % CONSTRAINTS_PER_USER {
            0 => {
                let (bw, nu) = (x[ib], x[inu]);
                grad[ib] = -d.dt / (bw * bw);
                grad[inu] = -(2.0 / nu - 1.0 / (nu * nu));
                hess[(ib, ib)] += scale * 2.0 * d.dt / (bw * bw * bw);
                hess[(inu, inu)] += scale * (2.0 / (nu * nu) - 2.0 / (nu * nu * nu));
            }
            1 => {
                let g0 = d.nu0 * (d.nu0 - 1.0);
                grad[inu] = (2.0 * d.nu0 - 1.0) / g0;
                grad[ipr] = -self.kd;
                grad[iq] = 1.0 / d.q0;
            }
            2 => {
                grad[0] = 2.0 * (x[0] - d.ux);
                grad[1] = 2.0 * (x[1] - d.uy);
                grad[iq] = -1.0;
                hess[(0, 0)] += 2.0 * scale;
                hess[(1, 1)] += 2.0 * scale;
            }
            3 => {
                let e = self.sigmoid_term(x[ith]);
                grad[ith] = -self.b * self.k * e;
                grad[ipr] = 1.0 / (d.pr0 * d.pr0);
                hess[(ith, ith)] += scale * self.b * self.b * self.k * self.k * e;
            }
            4 => {
                grad[ith] = d.th0.cos();
                grad[iq] = self.h / (2.0 * d.q0.powf(1.5));
            }
            5 => grad[inu] = -1.0,
            6 => grad[ipr] = -1.0,
            7 => grad[ipr] = 1.0,
            8 => grad[ith] = -1.0,
            _ => grad[ith] = 1.0,
        }
    }

    fn in_domain(&self, x: &DVector<f64>) -> bool {
        (0..self.users.len()).all(|u| {
            let j = 2 + VARS_PER_USER * u;
            x[j] > 0.0 && x[j + 1] > 0.0 && x[j + 2] > 0.0
        }) && x.iter().all(|v| v.is_finite())
    }
}

/// Largest constraint value per family over all sensors, in solver units.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConstraintAudit {
    /// Max of `g` (positive means violated) for each [`Family`].
    pub max_value: [f64; 5],
    /// Max of `|g|` for each [`Family`].
    pub max_abs: [f64; 5],
    /// Max violation of the simple bounds on `nu`, `Pr`, `theta`.
    pub bound_violation: f64,
}

impl ConstraintAudit {
    pub fn worst_violation(&self) -> f64 {
        self.max_value
            .iter()
            .copied()
            .fold(self.bound_violation, f64::max)
    }

    pub fn max_inactivity(&self) -> f64 {
        self.max_abs.iter().copied().fold(0.0, f64::max)
    }
}

pub fn audit_of(p: &Subproblem, x: &DVector<f64>) -> ConstraintAudit {
    let mut out = ConstraintAudit {
        max_value: [f64::NEG_INFINITY; 5],
        max_abs: [0.0; 5],
        bound_violation: f64::NEG_INFINITY,
    };
    for u in 0..p.users.len() {
        for (f, fam) in Family::ALL.iter().enumerate() {
            let g = p.family_value(*fam, u, x);
            out.max_value[f] = out.max_value[f].max(g);
            out.max_abs[f] = out.max_abs[f].max(g.abs());
        }
        for c in 5..CONSTRAINTS_PER_USER {
            out.bound_violation = out
                .bound_violation
                .max(p.constraint(CONSTRAINTS_PER_USER * u + c, x));
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub point: ScaIterate,
    pub kkt_residual: f64,
    pub newton_steps: usize,
    /// Constraint values of the returned point in the subproblem it solved.
    pub audit: ConstraintAudit,
    /// Constraint values of the interior-point minimizer before the
    /// coupling constraints are made tight. Saturated line-of-sight links
    /// leave their angle constraint slack there, since the optimum is not
    /// unique in `theta`.
    pub interior_activity: ConstraintAudit,
    /// Subproblem objective at the returned point and at the interior-point
    /// minimizer, MHz.
    pub objective: f64,
    pub interior_objective: f64,
}

/// Largest violation accepted for the input point and the returned point.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Solves the convexified subproblem built at `point` and returns its
/// minimizer with every coupling constraint made tight.
pub fn solve_subproblem(point: &ScaIterate, scenario: &Scenario) -> Result<SubproblemSolution> {
    solve_subproblem_with(point, scenario, &BarrierOptions::default())
}

pub fn solve_subproblem_with(
    point: &ScaIterate,
    scenario: &Scenario,
    opts: &BarrierOptions,
) -> Result<SubproblemSolution> {
    let per_radian = scenario.angle_unit.per_radian();
    let p = Subproblem::new(scenario, point)?;
    let x0 = point.to_scaled(per_radian);
    let start = audit_of(&p, &x0);
    if start.worst_violation() > FEASIBILITY_TOL {
        return Err(Error::Solver {
            reason: "linearization point is not feasible for its own subproblem".into(),
            residual: start.worst_violation(),
        });
    }
    let out = barrier::solve(&p, x0.clone(), opts)?;
    let y = p.activate(&out.x);
    let (x, newton_steps) = if p.objective(&y) <= p.objective(&x0) {
        (y, out.newton_steps)
    } else {
        (x0, 0)
    };
    let audit = audit_of(&p, &x);
    if audit.worst_violation() > FEASIBILITY_TOL {
        return Err(Error::Solver {
            reason: "subproblem solution violates its constraints".into(),
            residual: audit.worst_violation(),
        });
    }
    if !(out.kkt_residual <= 1e-7) {
        return Err(Error::Solver {
            reason: "stationarity residual above tolerance".into(),
            residual: out.kkt_residual,
        });
    }
    Ok(SubproblemSolution {
        point: ScaIterate::from_scaled(&x, per_radian),
        kkt_residual: out.kkt_residual,
        newton_steps,
        audit,
        interior_activity: audit_of(&p, &out.x),
        objective: p.objective(&x),
        interior_objective: p.objective(&out.x),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate, AngleUnit};

    #[test]
    fn scaling_round_trip() {
        let s = generate(3, 1e8, 5).unwrap();
        let it = ScaIterate::at_location(&s, Location::new(123.4, -56.7)).unwrap();
        let back = ScaIterate::from_scaled(
            &it.to_scaled(s.angle_unit.per_radian()),
            s.angle_unit.per_radian(),
        );
        let rel = |a: f64, b: f64| ((a - b) / a).abs();
        assert!(rel(back.location.x, it.location.x) < 1e-12);
        for u in 0..5 {
            assert!(rel(back.bandwidth[u], it.bandwidth[u]) < 1e-12);
            assert!(rel(back.q[u], it.q[u]) < 1e-12);
            assert!(rel(back.theta[u], it.theta[u]) < 1e-12);
            assert_eq!(back.nu[u], it.nu[u]);
            assert_eq!(back.pr[u], it.pr[u]);
        }
    }

    #[test]
    fn equality_point_is_tight() {
        for unit in [AngleUnit::Degrees, AngleUnit::Radians] {
            let mut s = generate(8, 1e8, 5).unwrap();
            s.angle_unit = unit;
            let it = ScaIterate::at_location(&s, Location::new(50.0, 20.0)).unwrap();
            let p = Subproblem::new(&s, &it).unwrap();
            let a = audit_of(&p, &it.to_scaled(unit.per_radian()));
            assert!(a.max_inactivity() < 1e-12, "{a:?}");
        }
    }

    #[test]
    fn rate_forms_agree() {
        // D ln 2 / (T B) equals the bracketed rate expression at the fixed point of nu
        for gamma in [0.5f64, 3.0, 100.0, 1e5] {
            let nu: f64 = 0.5 + (0.25 + gamma).sqrt();
            let bracket = (1.0 + gamma / nu).ln() - gamma / (gamma + nu) + nu.ln();
            assert!((bracket - rate_term(nu)).abs() < 1e-10 * rate_term(nu));
        }
    }

    #[test]
    fn rate_term_is_concave() {
        let h = 1e-4;
        for nu in [1.0 + 2e-4, 1.5, 3.0, 40.0, 1e3] {
            let fd = (rate_term(nu + h) - 2.0 * rate_term(nu) + rate_term(nu - h)) / (h * h);
            let exact = 2.0 / (nu * nu * nu) * (1.0 - nu);
            assert!(exact <= 0.0);
            assert!((fd - exact).abs() < 1e-5, "{nu}: {fd} vs {exact}");
        }
    }

    #[test]
    fn constraints_are_convex_along_random_lines() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for unit in [AngleUnit::Degrees, AngleUnit::Radians] {
            let mut s = generate(2, 5e7, 4).unwrap();
            s.angle_unit = unit;
            let it = ScaIterate::at_location(&s, Location::new(-80.0, 140.0)).unwrap();
            let p = Subproblem::new(&s, &it).unwrap();
            let base = it.to_scaled(unit.per_radian());
            for _ in 0..200 {
                let x = base.map(|v| v * rng.random_range(0.9..1.1));
                let d = DVector::from_fn(x.len(), |_, _| rng.random_range(-1.0..1.0)) * 1e-3;
                for i in 0..p.num_constraints() {
                    let g = |y: &DVector<f64>| p.constraint(i, y);
                    let second = g(&(&x + &d)) + g(&(&x - &d)) - 2.0 * g(&x);
                    assert!(
                        second >= -1e-12 * (1.0 + g(&x).abs()),
                        "constraint {i}: {second}"
                    );
                }
            }
        }
    }

    #[test]
    fn subproblem_improves_and_is_tight() {
        let s = generate(11, 1e8, 5).unwrap();
        let it = ScaIterate::at_location(&s, Location::new(300.0, -200.0)).unwrap();
        let sol = solve_subproblem(&it, &s).unwrap();
        assert!(sol.point.sum_bandwidth() <= it.sum_bandwidth());
        assert!(sol.kkt_residual <= 1e-7);
        assert!(sol.audit.worst_violation() <= 1e-8);
    }

    #[test]
    fn psd_is_rejected() {
        let mut s = generate(1, 1e8, 2).unwrap();
        s.noise_model = NoiseModel::Psd;
        assert!(matches!(
            ScaIterate::at_location(&s, Location::ORIGIN),
            Err(Error::Unsupported(_))
        ));
    }
}
