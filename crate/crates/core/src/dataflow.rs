//! Upload latency and storage of the receive / compute / upload pipeline.
//!
//! A sensor streams `D` bits to the hub at rate `R`. A fraction `eta` goes
//! into a to-be-computed queue served at `F / rho` bits/s, producing
//! `zeta` output bits per input bit; the rest, together with the compute
//! output, goes into a to-be-uploaded queue served by the backhaul at `R_S`.
//! All three stages run concurrently. [`latency_storage`] gives the closed
//! form of the completion time and peak buffer, [`simulate_fluid`] integrates
//! the same fluid model event by event.

use std::io::Write;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Task {
    /// Bits, `D`.
    pub data: f64,
    /// Cycles per bit, `rho`.
    pub intensity: f64,
    /// Output bits per computed bit, `zeta`.
    pub output_ratio: f64,
}

impl Task {
    pub fn new(data: f64, intensity: f64, output_ratio: f64) -> Self {
        Self {
            data,
            intensity,
            output_ratio,
        }
    }

    /// Bits that leave over the backhaul for split `eta`: `D (zeta eta + 1 - eta)`.
    pub fn output_bits(&self, eta: f64) -> f64 {
        self.data * self.output_factor(eta)
    }

    pub fn output_factor(&self, eta: f64) -> f64 {
        self.output_ratio * eta + 1.0 - eta
    }

    fn check(&self) -> Result<()> {
        if !(self.data > 0.0 && self.data.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "D must be positive, got {}",
                self.data
            )));
        }
        if !(self.intensity > 0.0 && self.intensity.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "rho must be positive, got {}",
                self.intensity
            )));
        }
        if !(self.output_ratio > 0.0 && self.output_ratio < 1.0) {
            return Err(Error::InvalidInput(format!(
                "zeta must lie in (0,1), got {}",
                self.output_ratio
            )));
        }
        Ok(())
    }
}

/// Per-sensor link and compute rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resources {
    /// Sensor-to-hub rate, bits/s.
    pub rate: f64,
    /// Backhaul rate, bits/s.
    pub backhaul: f64,
    /// CPU frequency, cycles/s.
    pub cpu: f64,
}

impl Resources {
    pub fn new(rate: f64, backhaul: f64, cpu: f64) -> Self {
        Self {
            rate,
            backhaul,
            cpu,
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "R_u must be positive, got {}",
                self.rate
            )));
        }
        if !(self.backhaul >= 0.0 && self.backhaul.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "R_S must be non-negative, got {}",
                self.backhaul
            )));
        }
        if !(self.cpu >= 0.0 && self.cpu.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "F must be non-negative, got {}",
                self.cpu
            )));
        }
        Ok(())
    }
}

/// Which queues build up, and what bounds the completion time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    /// Both queues accumulate; the backhaul finishes last.
    BothUploadBound,
    /// Both queues accumulate; the compute stage finishes last.
    BothComputeBound,
    /// Only the to-be-computed queue accumulates.
    ComputeQueueOnly,
    /// Only the to-be-uploaded queue accumulates.
    UploadQueueOnly,
    /// Nothing is buffered; the user link is the bottleneck.
    PassThrough,
}

impl Branch {
    pub const ALL: [Branch; 5] = [
        Branch::BothUploadBound,
        Branch::BothComputeBound,
        Branch::ComputeQueueOnly,
        Branch::UploadQueueOnly,
        Branch::PassThrough,
    ];

    /// 1-based row number in the usual table ordering.
    pub fn index(self) -> usize {
        match self {
            Branch::BothUploadBound => 1,
            Branch::BothComputeBound => 2,
            Branch::ComputeQueueOnly => 3,
            Branch::UploadQueueOnly => 4,
            Branch::PassThrough => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataflowOutcome {
    /// Completion time of the last output bit, seconds.
    pub latency: f64,
    /// Peak combined occupancy of both queues, bits.
    pub storage: f64,
    pub branch: Branch,
}

fn check_inputs(res: &Resources, eta: f64, task: &Task) -> Result<()> {
    res.check()?;
    task.check()?;
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidInput(format!(
            "eta must lie in [0,1], got {eta}"
        )));
    }
    Ok(())
}

/// Selects the branch for the given inputs. Equalities fall to the branch
/// whose condition is non-strict. `eta = 0` always selects one of the two
/// compute-free branches.
pub fn classify(res: &Resources, eta: f64, task: &Task) -> Branch {
    let r = res.rate;
    let rs = res.backhaul;
    let c = res.cpu / task.intensity;
    let zeta = task.output_ratio;
    let k = task.output_factor(eta);
    if eta > 0.0 && eta * r >= c {
        if zeta * c + (1.0 - eta) * r >= rs {
            if c * k >= eta * rs {
                Branch::BothUploadBound
            } else {
                Branch::BothComputeBound
            }
        } else {
            Branch::ComputeQueueOnly
        }
    } else if k * r >= rs {
        Branch::UploadQueueOnly
    } else {
        Branch::PassThrough
    }
}

/// Closed-form completion time and minimum storage.
pub fn latency_storage(res: &Resources, eta: f64, task: &Task) -> Result<DataflowOutcome> {
    check_inputs(res, eta, task)?;
    if res.backhaul == 0.0 {
        return Err(Error::NeverCompletes("backhaul rate is zero".into()));
    }
    let branch = classify(res, eta, task);
    let d = task.data;
    let r = res.rate;
    let rs = res.backhaul;
    let c = res.cpu / task.intensity;
    let zeta = task.output_ratio;
    let k = task.output_factor(eta);
    let no_cpu =
        || Error::NeverCompletes("data routed to compute but cpu frequency is zero".into());

    let (latency, storage) = match branch {
        Branch::BothUploadBound => (d * k / rs, d * (r - rs - (1.0 - zeta) * c) / r),
        Branch::BothComputeBound => {
            if c == 0.0 {
                return Err(no_cpu());
            }
            (eta * d / c, d * (r - rs - (1.0 - zeta) * c) / r)
        }
        Branch::ComputeQueueOnly => {
            if c == 0.0 {
                return Err(no_cpu());
            }
            (eta * d / c, d * (eta * r - c) / r)
        }
        Branch::UploadQueueOnly => (d * k / rs, d * (k * r - rs) / r),
        Branch::PassThrough => (d / r, 0.0),
    };
    Ok(DataflowOutcome {
        latency,
        storage: storage.max(0.0),
        branch,
    })
}

/// Queue occupancies at each event of a fluid run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FluidTrace {
    pub event_times: Vec<f64>,
    pub q_compute: Vec<f64>,
    pub q_upload: Vec<f64>,
    pub peak_compute: f64,
    pub peak_upload: f64,
    /// Bits that left over the backhaul.
    pub uploaded: f64,
}

impl FluidTrace {
    fn record(&mut self, t: f64, qc: f64, qu: f64) {
        self.event_times.push(t);
        self.q_compute.push(qc);
        self.q_upload.push(qu);
        self.peak_compute = self.peak_compute.max(qc);
        self.peak_upload = self.peak_upload.max(qu);
    }

    /// `event_time,q_compute_bits,q_upload_bits` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "event_time,q_compute_bits,q_upload_bits")?;
        for i in 0..self.event_times.len() {
            writeln!(
                w,
                "{},{},{}",
                self.event_times[i], self.q_compute[i], self.q_upload[i]
            )?;
        }
        Ok(())
    }
}

const MAX_PHASES: usize = 64;

/// Event-driven fluid simulation of the pipeline. The branch in the returned
/// outcome is the one [`classify`] assigns to the inputs.
pub fn simulate_fluid(
    res: &Resources,
    eta: f64,
    task: &Task,
) -> Result<(DataflowOutcome, FluidTrace)> {
    check_inputs(res, eta, task)?;
    if res.backhaul == 0.0 {
        return Err(Error::NeverCompletes("backhaul rate is zero".into()));
    }
    if res.cpu == 0.0 && eta > 0.0 {
        return Err(Error::NeverCompletes(
            "data routed to compute but cpu frequency is zero".into(),
        ));
    }

    let r = res.rate;
    let rs = res.backhaul;
    let c = res.cpu / task.intensity;
    let zeta = task.output_ratio;
    let t_arrival = task.data / r;

    let mut t = 0.0;
    let mut qc = 0.0f64;
    let mut qu = 0.0f64;
    let mut arriving = true;
    let mut peak = 0.0f64;
    let mut trace = FluidTrace::default();
    trace.record(0.0, 0.0, 0.0);

    for _ in 0..MAX_PHASES {
        if !arriving && qc == 0.0 && qu == 0.0 {
            let outcome = DataflowOutcome {
                latency: t,
                storage: peak,
                branch: classify(res, eta, task),
            };
            return Ok((outcome, trace));
        }

        let in_c = if arriving { eta * r } else { 0.0 };
        let out_c = if qc > 0.0 { c } else { c.min(in_c) };
        let in_u = if arriving { (1.0 - eta) * r } else { 0.0 } + zeta * out_c;
        let out_u = if qu > 0.0 { rs } else { rs.min(in_u) };
        let dqc = in_c - out_c;
        let dqu = in_u - out_u;

        let empties = |q: f64, dq: f64| {
            if q > 0.0 && dq < 0.0 {
                q / -dq
            } else {
                f64::INFINITY
            }
        };
        let t_c = empties(qc, dqc);
        let t_u = empties(qu, dqu);
        let t_a = if arriving {
            t_arrival - t
        } else {
            f64::INFINITY
        };
        let dt = t_a.min(t_c).min(t_u);
        if !dt.is_finite() {
            return Err(Error::NeverCompletes(format!(
                "no further event at t = {t} with queues ({qc}, {qu})"
            )));
        }

        let close = |x: f64| x <= dt * (1.0 + 1e-12);
        qc = if close(t_c) {
            0.0
        } else {
            (qc + dqc * dt).max(0.0)
        };
        qu = if close(t_u) {
            0.0
        } else {
            (qu + dqu * dt).max(0.0)
        };
        trace.uploaded += out_u * dt;
        if close(t_a) {
            arriving = false;
            t = t_arrival;
        } else {
            t += dt;
        }
        peak = peak.max(qc + qu);
        trace.record(t, qc, qu);
    }
    Err(Error::NeverCompletes(format!(
        "fluid run exceeded {MAX_PHASES} phases"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64, scale: f64) -> f64 {
        (a - b).abs() / scale.max(f64::MIN_POSITIVE)
    }

    #[test]
    fn pass_through_without_compute() {
        let task = Task::new(1e7, 2000.0, 0.05);
        let res = Resources::new(1e5, 2e5, 1e8);
        let out = latency_storage(&res, 0.0, &task).unwrap();
        assert_eq!(out.branch, Branch::PassThrough);
        assert_eq!(out.latency, 100.0);
        assert_eq!(out.storage, 0.0);
        let (sim, trace) = simulate_fluid(&res, 0.0, &task).unwrap();
        assert_eq!(sim.latency, 100.0);
        assert_eq!(sim.storage, 0.0);
        assert_eq!(trace.event_times.len(), 2);
    }

    #[test]
    fn full_compute_upload_queue_only() {
        // F/rho >= R >= R_S/zeta
        let task = Task::new(1e7, 1000.0, 0.1);
        let res = Resources::new(1e5, 5e3, 2e8);
        let out = latency_storage(&res, 1.0, &task).unwrap();
        assert_eq!(out.branch, Branch::UploadQueueOnly);
        assert!(rel(out.latency, 0.1 * 1e7 / 5e3, 200.0) < 1e-15);
        assert!(rel(out.storage, 1e7 * (0.1 * 1e5 - 5e3) / 1e5, 1e7) < 1e-15);
    }

    #[test]
    fn full_compute_compute_bound() {
        let task = Task::new(1e7, 2000.0, 0.05);
        let res = Resources::new(2e5, 1e5, 1e8);
        let out = latency_storage(&res, 1.0, &task).unwrap();
        assert_eq!(out.branch, Branch::ComputeQueueOnly);
        assert!(rel(out.latency, 1e7 * 2000.0 / 1e8, 200.0) < 1e-15);
        let (sim, _) = simulate_fluid(&res, 1.0, &task).unwrap();
        assert!(rel(sim.latency, out.latency, out.latency) < 1e-12);
        assert!(rel(sim.storage, out.storage, 1e7) < 1e-12);
    }

    #[test]
    fn mixed_split_matches_simulator() {
        let task = Task::new(1e7, 2000.0, 0.05);
        let res = Resources::new(2e5, 1.5e5, 3e8);
        let out = latency_storage(&res, 0.5, &task).unwrap();
        let (sim, trace) = simulate_fluid(&res, 0.5, &task).unwrap();
        assert_eq!(sim.branch, out.branch);
        assert!(rel(sim.latency, out.latency, out.latency) < 1e-9);
        assert!(rel(sim.storage, out.storage, task.data) < 1e-9);
        assert!(rel(trace.uploaded, task.output_bits(0.5), task.data) < 1e-9);
        assert_eq!(*trace.q_compute.last().unwrap(), 0.0);
        assert_eq!(*trace.q_upload.last().unwrap(), 0.0);
    }

    #[test]
    fn degenerate_rates() {
        let task = Task::new(1e7, 2000.0, 0.05);
        assert!(matches!(
            latency_storage(&Resources::new(1e5, 0.0, 1e8), 0.3, &task),
            Err(Error::NeverCompletes(_))
        ));
        assert!(matches!(
            latency_storage(&Resources::new(1e5, 1e5, 0.0), 0.3, &task),
            Err(Error::NeverCompletes(_))
        ));
        assert!(matches!(
            simulate_fluid(&Resources::new(1e5, 1e5, 0.0), 0.3, &task),
            Err(Error::NeverCompletes(_))
        ));
        // no compute needed when nothing is routed to it
        let out = latency_storage(&Resources::new(1e5, 2e5, 0.0), 0.0, &task).unwrap();
        assert_eq!(out.latency, 100.0);
        assert!(latency_storage(&Resources::new(0.0, 1e5, 1e8), 0.3, &task).is_err());
        assert!(latency_storage(&Resources::new(1e5, 1e5, 1e8), 1.5, &task).is_err());
    }

    #[test]
    fn trace_csv() {
        let task = Task::new(1e7, 2000.0, 0.05);
        let (_, trace) = simulate_fluid(&Resources::new(2e5, 1.5e5, 3e8), 0.5, &task).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("event_time,q_compute_bits,q_upload_bits\n0,0,0\n"));
        assert_eq!(text.lines().count(), trace.event_times.len() + 1);
    }
}
