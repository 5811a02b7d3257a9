use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid Hamiltonian: {0}")]
    InvalidHamiltonian(String),

    #[error("momentum window too small at x = {x}, v = {v} (maximizer hit |p| = {p_max})")]
    MomentumWindowTooSmall { x: f64, v: f64, p_max: f64 },

    #[error("velocity {v} outside the admissible range |v| <= {v_max}")]
    VelocityOutOfRange { v: f64, v_max: f64 },

    #[error("custom Lagrangian has no Hamiltonian to transform")]
    NoHamiltonian,

    #[error("Lagrangian is not convex in v near x = {x}, v = {v}")]
    NonConvexLagrangian { x: f64, v: f64 },

    #[error("kernel configuration error: {0}")]
    KernelConfig(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid matrix entry at ({row}, {col}): {value}")]
    InvalidEntry { row: usize, col: usize, value: f64 },

    #[error("kernel not strongly cyclic: no cycle of finite cost")]
    NotStronglyCyclic,

    #[error("c0 underestimates critical value: reduced kernel has a cycle of mean {mean:e}")]
    CriticalValueUnderestimated { mean: f64 },

    #[error("no Aubry nodes at tolerance {tol:e}; raise tol_aubry")]
    NoAubryNodes { tol: f64 },

    #[error("static class index {index} out of range ({count} classes)")]
    ClassOutOfRange { index: usize, count: usize },

    #[error("cycle explosion; raise tol separation or refine grid (more than {cap} cycles)")]
    CycleExplosion { cap: usize },

    #[error("no Mather cycle found in class {class}")]
    NoMatherMeasures { class: usize },

    #[error("condition (a) violated on support: measure {measure} has integral of a = {integral:e}")]
    ConditionViolatedOnSupport { measure: usize, integral: f64 },

    #[error("invalid discount problem: {0}")]
    InvalidDiscount(String),

    #[error("initial function is not a subsolution at node {node} (excess {excess:e})")]
    NotSubsolution { node: usize, excess: f64 },

    #[error("A = {level} must exceed |a|_inf * |v0|_inf = {bound}")]
    LevelTooSmall { level: f64, bound: f64 },

    #[error("solver did not converge after {iterations} iterations (last residual {residual:e}); lambda may be too small for dt")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("iterate decreased at node {node} on iteration {iteration} by {drop:e}")]
    MonotonicityViolated { iteration: usize, node: usize, drop: f64 },

    #[error("invalid lambda schedule: {0}")]
    InvalidSchedule(String),
}
