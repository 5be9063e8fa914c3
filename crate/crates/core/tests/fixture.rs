use std::path::Path;

use approx::assert_relative_eq;

use eih_core::channel::SeSource;
use eih_core::config_opt::full_configuration;
use eih_core::placement::{grid_search, sca_optimize, Bounds, DEFAULT_EPS, DEFAULT_MAX_ITER};
use eih_core::scenario::read_scenario;
use eih_core::{Execution, Location, Scenario};

fn fixture() -> Scenario {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/five_sensors.toml");
    read_scenario(&path).unwrap().validated().unwrap()
}

#[test]
fn configuration_at_origin() {
    let s = fixture();
    let c = full_configuration(
        &s,
        Location::ORIGIN,
        SeSource::Approx,
        Execution::Sequential,
    )
    .unwrap();
    assert_relative_eq!(c.config.bandwidth, 313037.47, max_relative = 1e-7);
    assert_relative_eq!(c.config.backhaul_rate, 1.886e6, max_relative = 1e-12);
    assert_relative_eq!(c.config.cpu_freq, 2.9e9, max_relative = 1e-12);
    assert_relative_eq!(c.config.cost, 8.871037471828505, max_relative = 1e-12);
    assert_eq!(c.computes, vec![false, false, true, true, true]);
}

#[test]
fn placement_agrees_with_grid() {
    let s = fixture();
    let sca = sca_optimize(&s, DEFAULT_EPS, DEFAULT_MAX_ITER).unwrap();
    let grid = grid_search(&s, Bounds::square(1000.0), 10.0, Execution::Parallel).unwrap();
    assert!(sca.cost <= grid.cost * 1.005);
    assert!((sca.location.x - grid.location.x).abs() < 30.0);
    assert!((sca.location.y - grid.location.y).abs() < 30.0);
}

#[test]
fn sequential_and_parallel_grids_agree() {
    let s = fixture();
    let a = grid_search(&s, Bounds::square(500.0), 25.0, Execution::Parallel).unwrap();
    let b = grid_search(&s, Bounds::square(500.0), 25.0, Execution::Sequential).unwrap();
    assert_eq!(a.location, b.location);
    assert_eq!(a.cost.to_bits(), b.cost.to_bits());
}
