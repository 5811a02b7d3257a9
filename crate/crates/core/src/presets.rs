//! The two model problems on the unit circle, with their closed-form
//! elementary solutions.
//!
//! * `Example1`: `H = p (p - U')`, `U = (1 - cos 2 pi x) / 2`. Aubry set
//!   `{0, 1/2}`, `h(0, x) = U(x)`, `h(1/2, x) = 0`.
//! * `Example2`: `H = p^2 - U`, `U = sin^2 2 pi x`. Aubry set `{0, 1/2}`,
//!   `h(0, x) = (1 - cos 2 pi x) / 2 pi`, `h(1/2, x) = (1 + cos 2 pi x) / 2 pi`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{build_action_kernel, ActionKernel, HamiltonianSpec, PeriodicGrid, Potential};
use crate::weak_kam::{AtlasTolerances, WeakKamAtlas};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Example1,
    Example2,
}

/// Grid, Hamiltonian, kernel and atlas for one preset.
#[derive(Debug, Clone)]
pub struct PresetSetup {
    pub grid: PeriodicGrid,
    pub spec: HamiltonianSpec,
    pub kernel: ActionKernel,
    pub atlas: WeakKamAtlas,
}

impl Preset {
    pub fn potential(self) -> Potential {
        match self {
            Preset::Example1 => Potential::cosine_well(1.0),
            Preset::Example2 => Potential::sin_squared(1.0),
        }
    }

    pub fn spec(self) -> Result<HamiltonianSpec> {
        match self {
            Preset::Example1 => HamiltonianSpec::example1(self.potential(), 1.0),
            Preset::Example2 => HamiltonianSpec::example2(self.potential(), 1.0),
        }
    }

    /// Builds everything on `n` nodes; `dt` defaults to `dx`.
    pub fn setup(self, n: usize, dt: Option<f64>) -> Result<PresetSetup> {
        let grid = PeriodicGrid::new(n)?;
        let spec = self.spec()?;
        let dt = dt.unwrap_or(grid.dx());
        let kernel = build_action_kernel(&grid, &spec, dt)?;
        let atlas = WeakKamAtlas::build(&grid, &kernel, AtlasTolerances::for_grid(grid.dx(), dt))?;
        Ok(PresetSetup { grid, spec, kernel, atlas })
    }

    /// Closed-form `h(x0, x)` with `x0 = 0` or, if `from_half`, `x0 = 1/2`.
    pub fn elementary_target(self, from_half: bool, x: f64) -> f64 {
        let c = (2.0 * PI * x).cos();
        match (self, from_half) {
            (Preset::Example1, false) => 0.5 * (1.0 - c),
            (Preset::Example1, true) => 0.0,
            (Preset::Example2, false) => (1.0 - c) / (2.0 * PI),
            (Preset::Example2, true) => (1.0 + c) / (2.0 * PI),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Example1 => "example1",
            Preset::Example2 => "example2",
        })
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "example1" => Ok(Preset::Example1),
            "example2" => Ok(Preset::Example2),
            other => Err(Error::InvalidHamiltonian(format!("unknown preset {other:?}"))),
        }
    }
}
