//! Air-to-ground link model and ergodic spectral efficiency.

use std::f64::consts::{FRAC_PI_2, LN_2, PI};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::scenario::{AngleUnit, ChannelParams, Location, Scenario, Sensor};
use crate::{Error, Execution, Result};

/// Large-scale state of one sensor-to-hub link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelState {
    /// Slant distance, meters.
    pub distance: f64,
    /// Elevation angle seen from the sensor, radians.
    pub elevation: f64,
    /// Amplitude gain `l`.
    pub large_scale_gain: f64,
    /// `p l^2 / sigma^2`. With a noise density this is the SNR times hertz.
    pub mean_snr: f64,
}

/// Deterministic-equivalent rate approximation and its auxiliary variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateApprox {
    pub nu: f64,
    pub spectral_efficiency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Which spectral-efficiency model turns SNR into bits/s/Hz.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeSource {
    #[default]
    Approx,
    MonteCarlo {
        samples: u64,
        seed: u64,
    },
    Exact,
}

impl SeSource {
    pub const DEFAULT_MC_SAMPLES: u64 = 1_000_000;

    pub fn spectral_efficiency(self, gamma: f64, exec: Execution) -> Result<f64> {
        match self {
            SeSource::Approx => Ok(spectral_efficiency_approx(gamma)?.spectral_efficiency),
            SeSource::MonteCarlo { samples, seed } => {
                Ok(spectral_efficiency_mc(gamma, samples, seed, exec)?.mean)
            }
            SeSource::Exact => spectral_efficiency_exact(gamma),
        }
    }
}

/// Line-of-sight probability for an elevation given in radians.
pub fn los_probability(elevation: f64, params: &ChannelParams, unit: AngleUnit) -> f64 {
    let theta = elevation * unit.per_radian();
    1.0 / (1.0 + params.a * (-params.b * (theta - params.a)).exp())
}

/// Average excess path loss in dB at the given line-of-sight probability.
pub fn excess_loss_db(los_probability: f64, params: &ChannelParams) -> f64 {
    (params.eta_los - params.eta_nlos) * los_probability + params.eta_nlos
}

pub fn channel_state(loc: Location, sensor: &Sensor, scenario: &Scenario) -> ChannelState {
    let horizontal = loc.horizontal_distance(sensor);
    let h = scenario.uav_height;
    let distance = horizontal.hypot(h);
    let elevation = if horizontal == 0.0 {
        FRAC_PI_2
    } else {
        (h / horizontal).atan()
    };
    let pr = los_probability(elevation, &scenario.channel, scenario.angle_unit);
    let free_space = scenario.light_speed / (4.0 * PI * scenario.carrier_freq * distance);
    let large_scale_gain = free_space * 10f64.powf(-excess_loss_db(pr, &scenario.channel) / 20.0);
    ChannelState {
        distance,
        elevation,
        large_scale_gain,
        mean_snr: sensor.tx_power * large_scale_gain * large_scale_gain / scenario.noise_power,
    }
}

/// `nu = 1/2 + sqrt(1/4 + gamma)` and `SE = (2 ln nu + 1/nu - 1) / ln 2`.
pub fn spectral_efficiency_approx(gamma: f64) -> Result<RateApprox> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidInput(format!(
            "mean SNR must be positive, got {gamma}"
        )));
    }
    let nu = 0.5 + (0.25 + gamma).sqrt();
    // nu - 1 = gamma / nu, which keeps ln(nu) accurate as gamma -> 0
    let u = gamma / nu;
    let se = (2.0 * u.ln_1p() - u / nu) / LN_2;
    Ok(RateApprox {
        nu,
        spectral_efficiency: se,
    })
}

/// `[ln(1 + gamma/nu) - gamma/(gamma + nu) + ln nu] / ln 2` for an arbitrary
/// `nu`; equals the approximation when `nu (nu - 1) = gamma`.
pub fn spectral_efficiency_bracket(gamma: f64, nu: f64) -> f64 {
    ((gamma / nu).ln_1p() - gamma / (gamma + nu) + nu.ln()) / LN_2
}

/// `e^{1/gamma} E1(1/gamma) / ln 2`, the ergodic rate under Rayleigh fading.
pub fn spectral_efficiency_exact(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidInput(format!(
            "mean SNR must be positive, got {gamma}"
        )));
    }
    Ok(crate::special::scaled_e1(1.0 / gamma) / LN_2)
}

const MC_CHUNK: u64 = 1 << 16;

/// Sample mean of `log2(1 + gamma X)` with `X ~ Exp(1)`.
///
/// Samples are drawn in fixed chunks, each from its own ChaCha stream, and
/// the partial sums are combined in chunk order, so the estimate depends only
/// on `(gamma, n_samples, seed)`.
pub fn spectral_efficiency_mc(
    gamma: f64,
    n_samples: u64,
    seed: u64,
    exec: Execution,
) -> Result<McEstimate> {
    if n_samples == 0 {
        return Err(Error::InvalidInput("n_samples must be at least 1".into()));
    }
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidInput(format!(
            "mean SNR must be non-negative, got {gamma}"
        )));
    }
    if gamma == 0.0 {
        return Ok(McEstimate {
            mean: 0.0,
            std_error: 0.0,
        });
    }
    let chunks = n_samples.div_ceil(MC_CHUNK);
    let partial = exec.map_indexed(chunks as usize, |chunk| {
        let chunk = chunk as u64;
        let len = MC_CHUNK.min(n_samples - chunk * MC_CHUNK);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chunk);
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..len {
            let x: f64 = Exp1.sample(&mut rng);
            let v = (gamma * x).ln_1p() / LN_2;
            sum += v;
            sumsq += v * v;
        }
        (sum, sumsq)
    });
    let (sum, sumsq) = partial
        .into_iter()
        .fold((0.0, 0.0), |(a, b), (s, q)| (a + s, b + q));
    let n = n_samples as f64;
    let mean = sum / n;
    let var = if n_samples > 1 {
        ((sumsq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(McEstimate {
        mean,
        std_error: (var / n).sqrt(),
    })
}
