//! Discrete weak KAM toolkit on the circle: min-plus action kernels,
//! Peierls barriers, Mather measures, and the vanishing discount limit for
//! equations of the form `λ a(x) u + H(x, u') = λ A + c0` with a
//! sign-changing coefficient `a`.

#![allow(clippy::needless_range_loop)]

pub mod discount;
pub mod error;
pub mod grid;
pub mod mather;
pub mod oracle;
pub mod presets;
pub mod tropical;
pub mod weak_kam;

pub use discount::{DiscountProblem, DiscountSolution, OrbitOccupation, SolveOptions, Strategy, SweepRow};
pub use error::{Error, Result};
pub use grid::{build_action_kernel, ActionKernel, HamiltonianKind, HamiltonianSpec, PeriodicGrid, Potential};
pub use mather::{ConditionReport, MatherMeasure, NodeMeasure, Selection, TightSubgraph};
pub use presets::{Preset, PresetSetup};
pub use tropical::{
    all_pairs_shortest, karp_min_mean_cycle, mp_multiply, mp_power, reduce_kernel, MeanCycle, MinPlusMatrix,
    ShortestPathTable,
};
pub use weak_kam::{AtlasTolerances, StaticClass, WeakKamAtlas};
