//! Optimal split of a sensor's data between compute and direct upload.

use crate::dataflow::{latency_storage, Resources, Task};
use crate::{Error, Result};

/// Regions of `(R, R_S, F/rho)` with a distinct optimal split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EtaBranch {
    /// `R < R_S`: the backhaul outpaces the user link, upload everything.
    LinkBound,
    /// `R_S <= R < R_S/zeta`, compute too slow to balance the link.
    ComputeShort,
    /// `R_S <= R < R_S/zeta`, enough compute: flows balance, nothing buffered.
    Balanced,
    /// `R >= R_S/zeta`, `F/rho < R_S/zeta`.
    ComputeShortHighRate,
    /// `R >= R_S/zeta`, `R_S/zeta <= F/rho < R`: compute everything.
    BackhaulBound,
    /// `R >= R_S/zeta`, `F/rho >= R`: compute everything, no compute queue.
    BackhaulBoundFastCpu,
}

impl EtaBranch {
    pub const ALL: [EtaBranch; 6] = [
        EtaBranch::LinkBound,
        EtaBranch::ComputeShort,
        EtaBranch::Balanced,
        EtaBranch::ComputeShortHighRate,
        EtaBranch::BackhaulBound,
        EtaBranch::BackhaulBoundFastCpu,
    ];

    /// 1-based row number in the usual table ordering.
    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&b| b == self).unwrap() + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaOptResult {
    pub eta: f64,
    pub latency: f64,
    pub storage: f64,
    pub branch: EtaBranch,
}

pub fn classify_eta(res: &Resources, task: &Task) -> EtaBranch {
    let r = res.rate;
    let rs = res.backhaul;
    let c = res.cpu / task.intensity;
    let zeta = task.output_ratio;
    if r < rs {
        EtaBranch::LinkBound
    } else if zeta * r < rs {
        if (1.0 - zeta) * c < r - rs {
            EtaBranch::ComputeShort
        } else {
            EtaBranch::Balanced
        }
    } else if zeta * c < rs {
        EtaBranch::ComputeShortHighRate
    } else if c < r {
        EtaBranch::BackhaulBound
    } else {
        EtaBranch::BackhaulBoundFastCpu
    }
}

/// The split minimizing both completion time and peak storage, with the
/// resulting values. Where a whole interval of splits is optimal the
/// canonical representative is returned. A zero backhaul gives infinite
/// latency.
pub fn optimal_eta(res: &Resources, task: &Task) -> Result<EtaOptResult> {
    if !(res.rate > 0.0) || !(res.backhaul >= 0.0) || !(res.cpu >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "rates must satisfy R > 0, R_S >= 0, F >= 0; got ({}, {}, {})",
            res.rate, res.backhaul, res.cpu
        )));
    }
    let branch = classify_eta(res, task);
    let d = task.data;
    let r = res.rate;
    let rs = res.backhaul;
    let c = res.cpu / task.intensity;
    let zeta = task.output_ratio;
    let both_queues = d / r * (r - rs - (1.0 - zeta) * c);

    let (eta, latency, storage) = match branch {
        EtaBranch::LinkBound => (0.0, d / r, 0.0),
        EtaBranch::ComputeShort | EtaBranch::ComputeShortHighRate => {
            let denom = c * (1.0 - zeta) + rs;
            if denom == 0.0 {
                (0.0, f64::INFINITY, both_queues)
            } else {
                (c / denom, d / denom, both_queues)
            }
        }
        EtaBranch::Balanced => ((r - rs) / ((1.0 - zeta) * r), d / r, 0.0),
        EtaBranch::BackhaulBound => (1.0, zeta * d / rs, both_queues),
        EtaBranch::BackhaulBoundFastCpu => (1.0, zeta * d / rs, d / r * (zeta * r - rs)),
    };
    Ok(EtaOptResult {
        eta: eta.clamp(0.0, 1.0),
        latency,
        storage: storage.max(0.0),
        branch,
    })
}

/// Completion time under the optimal split:
/// `D / min(R, R_S + (1 - zeta) F/rho, R_S / zeta)`.
pub fn optimized_latency(res: &Resources, task: &Task) -> f64 {
    let c = res.cpu / task.intensity;
    let zeta = task.output_ratio;
    let throughput = res
        .rate
        .min(res.backhaul + (1.0 - zeta) * c)
        .min(res.backhaul / zeta);
    task.data / throughput
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepBest {
    pub eta: f64,
    pub latency: f64,
    pub storage: f64,
}

/// Brute-force minimum of the latency over `eta in {0, step, 2 step, ..., 1}`
/// with storage as tiebreak. Splits that can never complete count as
/// infinite latency.
pub fn sweep_eta_oracle(res: &Resources, task: &Task, step: f64) -> Result<SweepBest> {
    if !(step > 0.0 && step <= 1e-3) {
        return Err(Error::InvalidInput(format!(
            "grid step must lie in (0, 1e-3], got {step}"
        )));
    }
    let n = (1.0 / step - 1e-9).ceil() as usize;
    let mut best = SweepBest {
        eta: f64::NAN,
        latency: f64::INFINITY,
        storage: f64::INFINITY,
    };
    for i in 0..=n {
        let eta = (i as f64 * step).min(1.0);
        let (latency, storage) = match latency_storage(res, eta, task) {
            Ok(o) => (o.latency, o.storage),
            Err(Error::NeverCompletes(_)) => (f64::INFINITY, f64::INFINITY),
            Err(e) => return Err(e),
        };
        if latency < best.latency
            || (latency == best.latency && storage < best.storage)
            || best.eta.is_nan()
        {
            best = SweepBest {
                eta,
                latency,
                storage,
            };
        }
    }
    Ok(best)
}
