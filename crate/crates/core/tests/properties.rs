use proptest::prelude::*;

use eih_core::channel::{spectral_efficiency_approx, spectral_efficiency_bracket};
use eih_core::dataflow::{latency_storage, simulate_fluid, Resources, Task};
use eih_core::scenario::{generate, read_scenario_str, write_scenario_string};
use eih_core::scheduling::{optimal_eta, optimized_latency, sweep_eta_oracle};

fn task() -> impl Strategy<Value = Task> {
    (1e5..1e9f64, 100.0..5000.0f64, 0.01..0.99f64)
        .prop_map(|(d, rho, zeta)| Task::new(d, rho, zeta))
}

fn resources(rho: f64) -> impl Strategy<Value = Resources> {
    (1e5..1e8f64, -2.0..1.0f64, -2.0..1.0f64)
        .prop_map(move |(r, a, b)| Resources::new(r, r * 10f64.powf(a), rho * r * 10f64.powf(b)))
}

fn task_and_resources() -> impl Strategy<Value = (Task, Resources)> {
    task().prop_flat_map(|t| (Just(t), resources(t.intensity)))
}

proptest! {
    #[test]
    fn closed_form_matches_fluid((t, res) in task_and_resources(), eta in 0.0..=1.0f64) {
        let a = latency_storage(&res, eta, &t).unwrap();
        let (s, _) = simulate_fluid(&res, eta, &t).unwrap();
        prop_assert!((a.latency - s.latency).abs() <= 1e-9 * a.latency);
        prop_assert!((a.storage - s.storage).abs() <= 1e-9 * t.data);
    }

    #[test]
    fn optimal_split_beats_sweep((t, res) in task_and_resources()) {
        let opt = optimal_eta(&res, &t).unwrap();
        let sweep = sweep_eta_oracle(&res, &t, 1e-3).unwrap();
        prop_assert!(opt.latency <= sweep.latency * (1.0 + 1e-9));
        prop_assert!((opt.latency - optimized_latency(&res, &t)).abs() <= 1e-9 * opt.latency);
    }

    #[test]
    fn latency_non_increasing_in_resources((t, res) in task_and_resources(), k in 1.0..4.0f64) {
        let base = optimized_latency(&res, &t);
        for more in [
            Resources::new(res.rate * k, res.backhaul, res.cpu),
            Resources::new(res.rate, res.backhaul * k, res.cpu),
            Resources::new(res.rate, res.backhaul, res.cpu * k),
        ] {
            prop_assert!(optimized_latency(&more, &t) <= base * (1.0 + 1e-12));
        }
    }

    #[test]
    fn approximation_forms_agree(gamma in 1e-3..1e6f64) {
        let a = spectral_efficiency_approx(gamma).unwrap();
        prop_assert!((a.nu * (a.nu - 1.0) - gamma).abs() <= 1e-12 * gamma);
        let b = spectral_efficiency_bracket(gamma, a.nu);
        prop_assert!((a.spectral_efficiency - b).abs() <= 1e-12 * b.abs().max(1e-300) + 1e-15);
    }

    #[test]
    fn scenario_text_round_trip(seed in 0u64..1000, n in 1usize..8) {
        let s = generate(seed, 1e8, n).unwrap();
        let back = read_scenario_str(&write_scenario_string(&s)).unwrap();
        prop_assert_eq!(back, s);
    }
}
