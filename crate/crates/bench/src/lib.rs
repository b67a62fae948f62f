//! Benchmark fixtures: a built-in model with one simulated observation path.

use filterlab_core::model::{builtin, Model};
use filterlab_core::rng::Stream;
use filterlab_core::simulate::{simulate_model, ObservationPath, TimeGrid};

pub struct Fixture {
    pub model: Model,
    pub grid: TimeGrid,
    pub obs: ObservationPath,
}

/// `name` simulated to `horizon` with step `dt` on seed 0.
pub fn fixture(name: &str, horizon: f64, dt: f64) -> Fixture {
    let model = builtin(name).expect("built-in model");
    let grid = TimeGrid::new(horizon, dt).expect("valid grid");
    let obs = simulate_model(&model, &grid, Stream::new(0))
        .expect("simulation")
        .observation();
    Fixture { model, grid, obs }
}
