use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use eih_core::bench::{scheme1_config, scheme2_config, sequential_latency, sequential_user};
use eih_core::channel::SeSource;
use eih_core::config_opt::full_configuration;
use eih_core::scenario::generate;
use eih_core::{Execution, Location, Scenario};

/// Cheapest (eta, B, F) found by a coarse-to-fine grid, with R_S the
/// smallest backhaul meeting the deadline for the remaining time.
fn brute_force(data: f64, se: f64, rho: f64, zeta: f64, t: f64, w: [f64; 3]) -> f64 {
    let cost_at = |eta: f64, b: f64, f: f64| {
        let f = if eta > 0.0 { f } else { 0.0 };
        let left = t - data / (b * se) - if eta > 0.0 { eta * data * rho / f } else { 0.0 };
        if left <= 0.0 {
            return f64::INFINITY;
        }
        let rs = (zeta * eta + 1.0 - eta) * data / left;
        debug_assert!(sequential_latency(data, se, rho, zeta, eta, b, rs, f) <= t * (1.0 + 1e-9));
        w[0] * b + w[1] * f + w[2] * rs
    };
    let b_min = data / (se * t);
    let f_min = data * rho / t;
    // search in log space of the multiple above the single-stage minimum
    let (mut center, mut span) = ([0.5, 1.0, 1.0], [0.5, 3.0, 3.0]);
    let mut best = (f64::INFINITY, center);
    for _ in 0..40 {
        let n = 12;
        for i in 0..=n {
            for j in 0..=n {
                for k in 0..=n {
                    let eta =
                        (center[0] + span[0] * (2.0 * i as f64 / n as f64 - 1.0)).clamp(0.0, 1.0);
                    let lb = center[1] + span[1] * (2.0 * j as f64 / n as f64 - 1.0);
                    let lf = center[2] + span[2] * (2.0 * k as f64 / n as f64 - 1.0);
                    let c = cost_at(eta, b_min * lb.exp(), f_min * lf.exp());
                    if c < best.0 {
                        best = (c, [eta, lb, lf]);
                    }
                }
            }
        }
        center = best.1;
        span = span.map(|s| s * 0.5);
    }
    best.0
}

#[test]
fn sequential_allocation_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let w = [1e-6, 1e-9, 3e-6];
    for _ in 0..20 {
        let data = rng.random_range(1e6..1e8);
        let se = rng.random_range(0.5..8.0);
        let rho = rng.random_range(100.0..5000.0);
        let zeta = rng.random_range(0.01..0.5);
        let t = 100.0;
        let closed = sequential_user(data, se, rho, zeta, t, w);
        let brute = brute_force(data, se, rho, zeta, t, w);
        assert!(
            closed.cost <= brute * (1.0 + 1e-6),
            "closed {} brute {}",
            closed.cost,
            brute
        );
        assert!(
            closed.cost >= brute * (1.0 - 1e-4),
            "closed {} brute {}",
            closed.cost,
            brute
        );
        let lat = sequential_latency(
            data,
            se,
            rho,
            zeta,
            closed.eta,
            closed.bandwidth,
            closed.backhaul,
            closed.cpu,
        );
        assert_relative_eq!(lat, t, max_relative = 1e-9);
    }
}

fn identical(n: usize) -> Scenario {
    let mut s = generate(3, 5e7, n).unwrap();
    let first = s.sensors[0].clone();
    for (i, u) in s.sensors.iter_mut().enumerate() {
        *u = first.clone();
        u.id = i as u32 + 1;
    }
    s
}

fn three_costs(s: &Scenario) -> [f64; 3] {
    let loc = Location::ORIGIN;
    let p = full_configuration(s, loc, SeSource::Approx, Execution::Sequential).unwrap();
    let s1 = scheme1_config(s, loc).unwrap();
    let s2 = scheme2_config(s, loc).unwrap();
    [p, s1, s2].map(|c| c.config.three_weight_cost(&s.cost))
}

#[test]
fn identical_sensors_equal_shares_are_optimal() {
    let [p, _, s2] = three_costs(&identical(4));
    assert_relative_eq!(p, s2, max_relative = 1e-9);
}

#[test]
fn proposed_dominates_on_random_topologies() {
    for seed in 0..10 {
        let s = generate(seed, 1e8, 5).unwrap();
        let [p, s1, s2] = three_costs(&s);
        assert!(
            p <= s1 * (1.0 + 1e-9) && p <= s2 * (1.0 + 1e-9),
            "seed {seed}: {p} {s1} {s2}"
        );
    }
}

#[test]
fn single_sensor_equal_shares_coincide() {
    let s = generate(5, 5e7, 1).unwrap();
    let [p, s1, s2] = three_costs(&s);
    assert_relative_eq!(p, s2, max_relative = 1e-9);
    assert!(s1 >= p);
}
