//! Shared fixtures for the pipeline benchmarks.

use std::f64::consts::PI;

use weakkam_core::{DiscountProblem, Preset, PresetSetup, Result};

/// Preset setup at `n` nodes with `dt = dx`.
pub fn setup(preset: Preset, n: usize) -> Result<PresetSetup> {
    preset.setup(n, None)
}

/// Discount problem with `a = cos 2 pi x` and `A = 1`.
pub fn cos_problem(setup: &PresetSetup, lambda: f64) -> Result<DiscountProblem<'_>> {
    let a = setup.grid.sample(|x| (2.0 * PI * x).cos());
    DiscountProblem::new(setup.atlas.reduced(), setup.kernel.dt(), lambda, a, 1.0)
}
