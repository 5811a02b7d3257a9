//! Periodic configuration grids, Tonelli Hamiltonian presets and the
//! one-step action kernel.
//!
//! The circle `[0, L)` is sampled at `n` equispaced nodes. A Lagrangian is
//! either the Legendre dual of one of the two closed-form presets or a
//! user-supplied convex evaluator. The kernel entry `cost[y][x]` is the
//! action of the constant-velocity path from node `y` to node `x` over one
//! time step, evaluated at the spatial midpoint.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tropical::MinPlusMatrix;

/// Scalar function of position.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// Lagrangian evaluator `(x, v) -> L(x, v)`.
pub type LagrangianFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Number of samples in the momentum grid of the numeric Legendre transform.
pub const LEGENDRE_SAMPLES: usize = 2049;

/// Resolution used when scanning closed-form potentials for extrema.
const SCAN_SAMPLES: usize = 4096;

/// Uniform discretization of the circle of length `circumference`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicGrid {
    n: usize,
    circumference: f64,
    dx: f64,
}

impl PeriodicGrid {
    /// Unit circle with `n` nodes.
    pub fn new(n: usize) -> Result<Self> {
        Self::with_circumference(n, 1.0)
    }

    pub fn with_circumference(n: usize, circumference: f64) -> Result<Self> {
        if n < 4 {
            return Err(Error::InvalidGrid(format!("n = {n} but at least 4 nodes are required")));
        }
        if !(circumference.is_finite() && circumference > 0.0) {
            return Err(Error::InvalidGrid(format!("circumference must be positive, got {circumference}")));
        }
        Ok(Self { n, circumference, dx: circumference / n as f64 })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn circumference(&self) -> f64 {
        self.circumference
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn position(&self, i: usize) -> f64 {
        (i % self.n) as f64 * self.dx
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.position(i)).collect()
    }

    /// Reduces a coordinate into `[0, circumference)`.
    pub fn wrap(&self, x: f64) -> f64 {
        let r = x.rem_euclid(self.circumference);
        // rem_euclid can round up to the modulus itself
        if r >= self.circumference {
            0.0
        } else {
            r
        }
    }

    /// Signed index offset from `i` to `j` in `(-n/2, n/2]`.
    pub fn offset(&self, i: usize, j: usize) -> isize {
        let n = self.n as isize;
        let k = (j as isize - i as isize).rem_euclid(n);
        if 2 * k > n {
            k - n
        } else {
            k
        }
    }

    /// Signed geodesic displacement from node `i` to node `j`, in
    /// `(-L/2, L/2]`. The antipodal tie resolves to `+L/2`.
    pub fn displacement(&self, i: usize, j: usize) -> f64 {
        self.offset(i, j) as f64 * self.dx
    }

    /// Point halfway along the geodesic from `i` to `j`.
    pub fn midpoint(&self, i: usize, j: usize) -> f64 {
        // evaluate from the lower index so that midpoint(i, j) == midpoint(j, i) bitwise
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.wrap(self.position(a) + 0.5 * self.displacement(a, b))
    }

    /// Node closest to coordinate `x` (ties towards the lower index).
    pub fn nearest_node(&self, x: f64) -> usize {
        let t = self.wrap(x) / self.dx;
        let i = t.round() as usize;
        i % self.n
    }

    /// Geodesic distance between two nodes.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.displacement(i, j).abs()
    }

    /// Evaluates `f` at every node.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.n).map(|i| f(self.position(i))).collect()
    }
}

/// Potential `U` on the circle.
#[derive(Clone)]
pub enum Potential {
    /// Closed form with its derivative.
    ClosedForm { name: String, value: ScalarFn, derivative: ScalarFn },
    /// Per-node samples, extended by periodic linear interpolation.
    Sampled { circumference: f64, samples: Vec<f64> },
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::ClosedForm { name, .. } => f.debug_struct("ClosedForm").field("name", name).finish(),
            Potential::Sampled { circumference, samples } => {
                f.debug_struct("Sampled").field("circumference", circumference).field("len", &samples.len()).finish()
            }
        }
    }
}

impl Potential {
    pub fn closed_form(
        name: impl Into<String>,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Potential::ClosedForm { name: name.into(), value: Arc::new(value), derivative: Arc::new(derivative) }
    }

    /// `U(x) = (1 - cos(2 pi x / L)) / 2`: minimum at 0, maximum at `L/2`.
    pub fn cosine_well(circumference: f64) -> Self {
        let k = 2.0 * PI / circumference;
        Self::closed_form("cosine_well", move |x| 0.5 * (1.0 - (k * x).cos()), move |x| 0.5 * k * (k * x).sin())
    }

    /// `U(x) = sin^2(2 pi x / L)`: zeros at 0 and `L/2`.
    pub fn sin_squared(circumference: f64) -> Self {
        let k = 2.0 * PI / circumference;
        Self::closed_form("sin_squared", move |x| (k * x).sin().powi(2), move |x| k * (2.0 * k * x).sin())
    }

    pub fn zero() -> Self {
        Self::closed_form("zero", |_| 0.0, |_| 0.0)
    }

    pub fn sampled(circumference: f64, samples: Vec<f64>) -> Result<Self> {
        if samples.len() < 4 {
            return Err(Error::InvalidHamiltonian("potential needs at least 4 samples".into()));
        }
        if let Some(bad) = samples.iter().find(|s| !s.is_finite()) {
            return Err(Error::InvalidHamiltonian(format!("non-finite potential sample {bad}")));
        }
        Ok(Potential::Sampled { circumference, samples })
    }

    pub fn name(&self) -> &str {
        match self {
            Potential::ClosedForm { name, .. } => name,
            Potential::Sampled { .. } => "samples",
        }
    }

    fn locate(circumference: f64, len: usize, x: f64) -> (usize, usize, f64) {
        let h = circumference / len as f64;
        let t = x.rem_euclid(circumference) / h;
        let i = (t.floor() as usize) % len;
        let frac = (t - t.floor()).clamp(0.0, 1.0);
        (i, (i + 1) % len, frac)
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            Potential::ClosedForm { value, .. } => value(x),
            Potential::Sampled { circumference, samples } => {
                let (i, j, t) = Self::locate(*circumference, samples.len(), x);
                (1.0 - t) * samples[i] + t * samples[j]
            }
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Potential::ClosedForm { derivative, .. } => derivative(x),
            Potential::Sampled { circumference, samples } => {
                let m = samples.len();
                let h = circumference / m as f64;
                let node_slope = |i: usize| (samples[(i + 1) % m] - samples[(i + m - 1) % m]) / (2.0 * h);
                let (i, j, t) = Self::locate(*circumference, m, x);
                (1.0 - t) * node_slope(i) + t * node_slope(j)
            }
        }
    }

    fn scan_points(&self, circumference: f64) -> Vec<f64> {
        match self {
            Potential::Sampled { circumference, samples } => {
                let h = circumference / samples.len() as f64;
                (0..samples.len()).map(|i| i as f64 * h).collect()
            }
            Potential::ClosedForm { .. } => {
                (0..SCAN_SAMPLES).map(|i| i as f64 * circumference / SCAN_SAMPLES as f64).collect()
            }
        }
    }

    pub fn max_abs_derivative(&self, circumference: f64) -> f64 {
        self.scan_points(circumference).into_iter().map(|x| self.derivative(x).abs()).fold(0.0, f64::max)
    }

    pub fn min_value(&self, circumference: f64) -> f64 {
        self.scan_points(circumference).into_iter().map(|x| self.value(x)).fold(f64::INFINITY, f64::min)
    }

    pub fn max_sqrt(&self, circumference: f64) -> f64 {
        self.scan_points(circumference).into_iter().map(|x| self.value(x).max(0.0).sqrt()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HamiltonianKind {
    /// `H(x, p) = p (p - U'(x))`, `L(x, v) = (v + U'(x))^2 / 4`.
    Example1,
    /// `H(x, p) = p^2 - U(x)`, `L(x, v) = v^2 / 4 + U(x)`.
    Example2,
    /// Lagrangian supplied directly.
    Custom,
}

impl fmt::Display for HamiltonianKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HamiltonianKind::Example1 => "example1",
            HamiltonianKind::Example2 => "example2",
            HamiltonianKind::Custom => "custom",
        })
    }
}

/// A Tonelli Hamiltonian (or its Lagrangian) on the circle, together with
/// the velocity truncation and the momentum window used numerically.
#[derive(Clone)]
pub struct HamiltonianSpec {
    kind: HamiltonianKind,
    potential: Potential,
    circumference: f64,
    lagrangian: Option<LagrangianFn>,
    v_max: f64,
    p_max: f64,
}

impl fmt::Debug for HamiltonianSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianSpec")
            .field("kind", &self.kind)
            .field("potential", &self.potential)
            .field("v_max", &self.v_max)
            .field("p_max", &self.p_max)
            .finish()
    }
}

fn default_p_max(v_max: f64) -> f64 {
    8.0 * (1.0 + v_max)
}

impl HamiltonianSpec {
    /// `H(x, p) = p (p - U'(x))` with `v_max = 4 (1 + max |U'|)`.
    pub fn example1(potential: Potential, circumference: f64) -> Result<Self> {
        let v_max = 4.0 * (1.0 + potential.max_abs_derivative(circumference));
        Ok(Self {
            kind: HamiltonianKind::Example1,
            potential,
            circumference,
            lagrangian: None,
            v_max,
            p_max: default_p_max(v_max),
        })
    }

    /// `H(x, p) = p^2 - U(x)` with `U >= 0`, `min U = 0` and
    /// `v_max = 4 (1 + max sqrt U)`.
    pub fn example2(potential: Potential, circumference: f64) -> Result<Self> {
        let min = potential.min_value(circumference);
        if !(-1e-12..=1e-9).contains(&min) {
            return Err(Error::InvalidHamiltonian(format!(
                "example2 needs U >= 0 with min U = 0, found min U = {min:e}"
            )));
        }
        let v_max = 4.0 * (1.0 + potential.max_sqrt(circumference));
        Ok(Self {
            kind: HamiltonianKind::Example2,
            potential,
            circumference,
            lagrangian: None,
            v_max,
            p_max: default_p_max(v_max),
        })
    }

    /// User-supplied Lagrangian. Convexity in `v` is spot-checked on a
    /// 16 x 65 grid of `(x, v)` samples with `|v| <= v_max`.
    pub fn custom(
        lagrangian: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        potential: Potential,
        circumference: f64,
        v_max: f64,
    ) -> Result<Self> {
        if !(v_max.is_finite() && v_max > 0.0) {
            return Err(Error::InvalidHamiltonian(format!("v_max must be positive, got {v_max}")));
        }
        let lagrangian: LagrangianFn = Arc::new(lagrangian);
        let m = 64;
        let h = 2.0 * v_max / m as f64;
        for ix in 0..16 {
            let x = ix as f64 * circumference / 16.0;
            for k in 1..m {
                let v = -v_max + k as f64 * h;
                let (l0, l1, l2) = (lagrangian(x, v - h), lagrangian(x, v), lagrangian(x, v + h));
                if !(l0.is_finite() && l1.is_finite() && l2.is_finite()) {
                    return Err(Error::InvalidHamiltonian(format!("Lagrangian not finite near x = {x}, v = {v}")));
                }
                let scale = 1.0 + l0.abs().max(l1.abs()).max(l2.abs());
                if l0 - 2.0 * l1 + l2 < -1e-9 * scale {
                    return Err(Error::NonConvexLagrangian { x, v });
                }
            }
        }
        Ok(Self {
            kind: HamiltonianKind::Custom,
            potential,
            circumference,
            lagrangian: Some(lagrangian),
            v_max,
            p_max: default_p_max(v_max),
        })
    }

    pub fn with_v_max(mut self, v_max: f64) -> Result<Self> {
        if !(v_max.is_finite() && v_max > 0.0) {
            return Err(Error::InvalidHamiltonian(format!("v_max must be positive, got {v_max}")));
        }
        self.v_max = v_max;
        Ok(self)
    }

    pub fn with_p_max(mut self, p_max: f64) -> Result<Self> {
        if !(p_max.is_finite() && p_max > 0.0) {
            return Err(Error::InvalidHamiltonian(format!("p_max must be positive, got {p_max}")));
        }
        self.p_max = p_max;
        Ok(self)
    }

    pub fn kind(&self) -> HamiltonianKind {
        self.kind
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn circumference(&self) -> f64 {
        self.circumference
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    /// `H(x, p)`, or `None` for custom Lagrangians.
    pub fn hamiltonian(&self, x: f64, p: f64) -> Option<f64> {
        match self.kind {
            HamiltonianKind::Example1 => Some(p * (p - self.potential.derivative(x))),
            HamiltonianKind::Example2 => Some(p * p - self.potential.value(x)),
            HamiltonianKind::Custom => None,
        }
    }

    /// Closed-form (or user-supplied) Lagrangian.
    pub fn lagrangian(&self, x: f64, v: f64) -> f64 {
        match self.kind {
            HamiltonianKind::Example1 => {
                let s = v + self.potential.derivative(x);
                0.25 * s * s
            }
            HamiltonianKind::Example2 => 0.25 * v * v + self.potential.value(x),
            HamiltonianKind::Custom => (self.lagrangian.as_ref().expect("custom spec carries a Lagrangian"))(x, v),
        }
    }

    /// Numeric Legendre transform `sup_p (p v - H(x, p))`.
    ///
    /// The supremum is located on a uniform grid of [`LEGENDRE_SAMPLES`]
    /// momenta in `[-p_max, p_max]` and then refined by golden-section
    /// search inside the bracketing cells (the objective is concave).
    pub fn legendre_transform(&self, x: f64, v: f64) -> Result<f64> {
        if v.abs() > self.v_max * (1.0 + 1e-12) {
            return Err(Error::VelocityOutOfRange { v, v_max: self.v_max });
        }
        if self.kind == HamiltonianKind::Custom {
            return Err(Error::NoHamiltonian);
        }
        let objective = |p: f64| p * v - self.hamiltonian(x, p).expect("preset kinds carry H");
        let last = LEGENDRE_SAMPLES - 1;
        let step = 2.0 * self.p_max / last as f64;
        let (mut best_k, mut best) = (0, f64::NEG_INFINITY);
        for k in 0..LEGENDRE_SAMPLES {
            let f = objective(-self.p_max + k as f64 * step);
            if f > best {
                best = f;
                best_k = k;
            }
        }
        if best_k == 0 || best_k == last {
            return Err(Error::MomentumWindowTooSmall { x, v, p_max: self.p_max });
        }
        let (mut lo, mut hi) = (-self.p_max + (best_k - 1) as f64 * step, -self.p_max + (best_k + 1) as f64 * step);
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        let mut a = hi - ratio * (hi - lo);
        let mut b = lo + ratio * (hi - lo);
        let (mut fa, mut fb) = (objective(a), objective(b));
        for _ in 0..80 {
            if fa < fb {
                lo = a;
                a = b;
                fa = fb;
                b = lo + ratio * (hi - lo);
                fb = objective(b);
            } else {
                hi = b;
                b = a;
                fb = fa;
                a = hi - ratio * (hi - lo);
                fa = objective(a);
            }
        }
        Ok(best.max(fa).max(fb))
    }
}

/// Minimal action over one time step between grid nodes.
#[derive(Debug, Clone)]
pub struct ActionKernel {
    dt: f64,
    half_width: usize,
    cost: MinPlusMatrix,
}

impl ActionKernel {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Stencil half-width `w = floor(v_max dt / dx)`.
    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.cost.order()
    }

    pub fn is_empty(&self) -> bool {
        self.cost.order() == 0
    }

    pub fn cost(&self) -> &MinPlusMatrix {
        &self.cost
    }

    pub fn entry(&self, y: usize, x: usize) -> f64 {
        self.cost.get(y, x)
    }

    pub fn reachable(&self, y: usize, x: usize) -> bool {
        self.cost.get(y, x).is_finite()
    }

    /// Wraps an externally built cost table.
    pub fn from_parts(dt: f64, half_width: usize, cost: MinPlusMatrix) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::KernelConfig(format!("dt must be positive, got {dt}")));
        }
        Ok(Self { dt, half_width, cost })
    }
}

/// Builds `cost[y][x] = dt L(mid(y, x), disp(y, x) / dt)` on the stencil
/// `|disp| <= v_max dt`, `+inf` elsewhere.
pub fn build_action_kernel(grid: &PeriodicGrid, spec: &HamiltonianSpec, dt: f64) -> Result<ActionKernel> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::KernelConfig(format!("dt must be positive, got {dt}")));
    }
    let reach = spec.v_max() * dt;
    let dx = grid.dx();
    if reach < 2.0 * dx * (1.0 - 1e-12) {
        return Err(Error::KernelConfig(format!("stencil too narrow: v_max*dt = {reach} < 2*dx = {}", 2.0 * dx)));
    }
    if reach > 0.5 * grid.circumference() * (1.0 + 1e-12) {
        return Err(Error::KernelConfig(format!(
            "stencil too wide: v_max*dt = {reach} > circumference/2 = {}",
            0.5 * grid.circumference()
        )));
    }
    let n = grid.len();
    let w = ((reach / dx) * (1.0 + 1e-12)).floor() as usize;
    let w = w.min(n / 2);
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|y| {
            let mut row = vec![f64::INFINITY; n];
            for k in -(w as isize)..=(w as isize) {
                let x = (y as isize + k).rem_euclid(n as isize) as usize;
                let disp = grid.displacement(y, x);
                let mid = grid.midpoint(y, x);
                row[x] = dt * spec.lagrangian(mid, disp / dt);
            }
            row
        })
        .collect();
    let cost = MinPlusMatrix::from_rows(rows)?;
    Ok(ActionKernel { dt, half_width: w, cost })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex1() -> HamiltonianSpec {
        HamiltonianSpec::example1(Potential::cosine_well(1.0), 1.0).unwrap()
    }

    fn ex2_flat() -> HamiltonianSpec {
        HamiltonianSpec::example2(Potential::zero(), 1.0).unwrap()
    }

    #[test]
    fn grid_rejects_small_n() {
        assert!(PeriodicGrid::new(3).is_err());
        assert!(PeriodicGrid::new(4).is_ok());
        assert!(PeriodicGrid::with_circumference(8, 0.0).is_err());
    }

    #[test]
    fn displacement_is_antisymmetric_with_positive_tie() {
        let g = PeriodicGrid::new(8).unwrap();
        for i in 0..8 {
            assert_eq!(g.displacement(i, i), 0.0);
            for j in 0..8 {
                let d = g.displacement(i, j);
                assert!(d > -0.5 && d <= 0.5);
                if g.offset(i, j).unsigned_abs() != 4 {
                    assert_eq!(d, -g.displacement(j, i));
                }
            }
        }
        assert_eq!(g.displacement(0, 4), 0.5);
        assert_eq!(g.displacement(4, 0), 0.5);
        assert_eq!(g.displacement(7, 0), 0.125);
        assert_eq!(g.displacement(0, 7), -0.125);
    }

    #[test]
    fn midpoint_wraps() {
        let g = PeriodicGrid::new(8).unwrap();
        assert!((g.midpoint(7, 1) - 0.0).abs() < 1e-15);
        assert!((g.midpoint(0, 7) - 0.9375).abs() < 1e-15);
        assert_eq!(g.nearest_node(0.999), 0);
        assert_eq!(g.nearest_node(0.5), 4);
    }

    #[test]
    fn legendre_examples() {
        let flat = ex2_flat();
        assert!(flat.legendre_transform(0.3, 0.0).unwrap().abs() < 1e-12);
        assert!((flat.legendre_transform(0.3, 2.0).unwrap() - 1.0).abs() < 1e-9);
        let crit = HamiltonianSpec::example1(Potential::closed_form("flat", |_| 0.0, |_| 0.0), 1.0).unwrap();
        assert!((crit.legendre_transform(0.0, 2.0).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn legendre_matches_closed_form_on_sample_grid() {
        for spec in [ex1(), HamiltonianSpec::example2(Potential::sin_squared(1.0), 1.0).unwrap()] {
            for ix in 0..32 {
                let x = ix as f64 / 32.0;
                for iv in 0..32 {
                    let v = -spec.v_max() + 2.0 * spec.v_max() * iv as f64 / 31.0;
                    let numeric = spec.legendre_transform(x, v).unwrap();
                    let closed = spec.lagrangian(x, v);
                    assert!((numeric - closed).abs() <= 1e-3, "x={x} v={v}: {numeric} vs {closed}");
                }
            }
        }
    }

    #[test]
    fn legendre_detects_narrow_window() {
        let spec = ex2_flat().with_p_max(0.5).unwrap();
        assert!(matches!(spec.legendre_transform(0.0, 3.0), Err(Error::MomentumWindowTooSmall { .. })));
        assert!(matches!(spec.legendre_transform(0.0, 1e6), Err(Error::VelocityOutOfRange { .. })));
    }

    #[test]
    fn example2_requires_zero_minimum() {
        assert!(HamiltonianSpec::example2(Potential::cosine_well(1.0), 1.0).is_ok());
        let shifted = Potential::closed_form("shifted", |_| 1.0, |_| 0.0);
        assert!(HamiltonianSpec::example2(shifted, 1.0).is_err());
    }

    #[test]
    fn custom_convexity_is_checked() {
        let ok = HamiltonianSpec::custom(|_, v: f64| 0.25 * (v - 0.3).powi(2), Potential::zero(), 1.0, 4.0);
        assert!(ok.is_ok());
        let bad = HamiltonianSpec::custom(|_, v: f64| -v * v, Potential::zero(), 1.0, 4.0);
        assert!(matches!(bad, Err(Error::NonConvexLagrangian { .. })));
        assert_eq!(ok.unwrap().legendre_transform(0.0, 0.0), Err(Error::NoHamiltonian));
    }

    #[test]
    fn default_velocity_bounds() {
        let s = ex1();
        assert!((s.v_max() - 4.0 * (1.0 + PI)).abs() < 1e-6);
        assert!((s.p_max() - 8.0 * (1.0 + s.v_max())).abs() < 1e-12);
        let s2 = HamiltonianSpec::example2(Potential::sin_squared(1.0), 1.0).unwrap();
        assert!((s2.v_max() - 8.0).abs() < 1e-9);
    }

    #[test]
    fn kernel_examples() {
        let g = PeriodicGrid::new(64).unwrap();
        let k = build_action_kernel(&g, &ex2_flat(), g.dx()).unwrap();
        for y in 0..64 {
            assert_eq!(k.entry(y, y), 0.0);
        }
        assert!((k.entry(3, 4) - g.dx() / 4.0).abs() < 1e-15);
        assert_eq!(k.half_width(), 4);
        assert!(!k.reachable(0, 5));
        assert!(k.reachable(0, 60));

        let k1 = build_action_kernel(&g, &ex1(), g.dx()).unwrap();
        assert_eq!(k1.entry(0, 0), 0.0);
    }

    #[test]
    fn kernel_rows_and_columns_have_finite_entries() {
        let g = PeriodicGrid::new(64).unwrap();
        let k = build_action_kernel(&g, &ex1(), g.dx()).unwrap();
        for i in 0..64 {
            assert!((0..64).any(|j| k.reachable(i, j)));
            assert!((0..64).any(|j| k.reachable(j, i)));
            for j in 0..64 {
                if k.reachable(i, j) {
                    assert!(k.entry(i, j) >= 0.0);
                }
            }
        }
    }

    #[test]
    fn kernel_symmetric_for_even_hamiltonian() {
        let g = PeriodicGrid::new(48).unwrap();
        let spec = HamiltonianSpec::example2(Potential::sin_squared(1.0), 1.0).unwrap();
        let k = build_action_kernel(&g, &spec, g.dx()).unwrap();
        for y in 0..48 {
            for x in 0..48 {
                assert_eq!(k.entry(y, x), k.entry(x, y));
            }
        }
    }

    #[test]
    fn kernel_stencil_bounds_are_enforced() {
        let g = PeriodicGrid::new(64).unwrap();
        let spec = ex2_flat().with_v_max(1.0).unwrap();
        let err = build_action_kernel(&g, &spec, g.dx()).unwrap_err();
        assert!(err.to_string().contains("too narrow"));
        let err = build_action_kernel(&g, &ex2_flat(), 0.5).unwrap_err();
        assert!(err.to_string().contains("too wide"));
        assert!(build_action_kernel(&g, &ex2_flat(), 0.0).is_err());
    }

    fn row_min(k: &ActionKernel, i: usize) -> f64 {
        (0..k.len()).map(|j| k.entry(i, j)).fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn refinement_does_not_raise_minimal_entry() {
        for spec in [ex1(), HamiltonianSpec::example2(Potential::sin_squared(1.0), 1.0).unwrap()] {
            for n in [64, 128, 256] {
                let coarse = PeriodicGrid::new(n).unwrap();
                let fine = PeriodicGrid::new(2 * n).unwrap();
                let kc = build_action_kernel(&coarse, &spec, coarse.dx()).unwrap();
                let kf = build_action_kernel(&fine, &spec, fine.dx()).unwrap();
                let lo = |k: &ActionKernel| (0..k.len()).map(|i| row_min(k, i)).fold(f64::INFINITY, f64::min);
                assert!(lo(&kf) <= lo(&kc) + 1e-6);
            }
        }
    }

    #[test]
    fn refinement_at_fixed_step_keeps_every_row_minimum() {
        let spec = ex1();
        let coarse = PeriodicGrid::new(64).unwrap();
        let fine = PeriodicGrid::new(128).unwrap();
        let kc = build_action_kernel(&coarse, &spec, coarse.dx()).unwrap();
        // same time step, so every coarse move is also a fine move
        let kf = build_action_kernel(&fine, &spec, coarse.dx()).unwrap();
        for i in 0..64 {
            assert!(row_min(&kf, 2 * i) <= row_min(&kc, i) + 1e-14);
        }
    }

    #[test]
    fn sampled_potential_interpolates() {
        let g = PeriodicGrid::new(16).unwrap();
        let p = Potential::sampled(1.0, g.sample(|x| (2.0 * PI * x).cos())).unwrap();
        assert!((p.value(0.0) - 1.0).abs() < 1e-15);
        assert!((p.value(1.0 / 32.0) - 0.5 * (1.0 + (2.0 * PI / 16.0).cos())).abs() < 1e-12);
        assert!(p.derivative(0.0).abs() < 1e-12);
    }
}
