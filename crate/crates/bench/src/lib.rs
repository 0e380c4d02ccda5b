//! Benchmark fixtures.

use std::sync::Arc;

use kslab_core::{MotilityModel, RadialField, RadialGrid, StateSnapshot};

/// Smooth radial bump on a graded grid with `cells` cells in the unit 3-ball.
pub fn bump_state(cells: usize) -> StateSnapshot {
    let grid = Arc::new(RadialGrid::graded(3, 1.0, cells, 1e-4).expect("valid grid"));
    let u = RadialField::from_fn(grid.clone(), |r| 1.0 + 50.0 * (-(r * r) / 0.01).exp()).expect("finite");
    let v = RadialField::from_fn(grid, |r| 1.0 + (-(r * r) / 0.04).exp()).expect("finite");
    StateSnapshot::new(0.0, u, v).expect("nonnegative")
}

pub fn ftbu_model() -> MotilityModel {
    MotilityModel::prototype(3, 1.0, 1.0, 1.0).expect("valid exponents")
}

/// A pair with m ≠ q, whose G goes through quadrature.
pub fn quadrature_model() -> MotilityModel {
    MotilityModel::prototype(3, 1.0, 1.2, 0.5).expect("valid exponents")
}
