//! Discounted Bellman problem
//!
//! `u(x) = (min_y (u(y) + K[y][x]) + dt A lambda) / (1 + lambda dt a(x))`
//!
//! on a reduced kernel `K`, its maximal solution above a critical
//! subsolution, calibrated orbits, and the vanishing discount sweep.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mather::NodeMeasure;
use crate::tropical::MinPlusMatrix;

/// Slack allowed when asserting that value iteration never decreases.
pub const MONOTONE_SLACK: f64 = 1e-12;
/// Slack on `u >= v0` for the returned solution.
pub const MAXIMALITY_SLACK: f64 = 1e-9;

/// One discount rate on one reduced kernel.
#[derive(Debug, Clone)]
pub struct DiscountProblem<'a> {
    kernel: &'a MinPlusMatrix,
    incoming: Vec<Vec<(usize, f64)>>,
    dt: f64,
    lambda: f64,
    a: Vec<f64>,
    level: f64,
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

impl<'a> DiscountProblem<'a> {
    /// `lambda = 0` is accepted and gives the undiscounted step.
    pub fn new(kernel: &'a MinPlusMatrix, dt: f64, lambda: f64, a: Vec<f64>, level: f64) -> Result<Self> {
        let n = kernel.order();
        if a.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: a.len() });
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidDiscount(format!("dt must be positive, got {dt}")));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidDiscount(format!("lambda must be nonnegative, got {lambda}")));
        }
        if !level.is_finite() || a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDiscount("A and a must be finite".into()));
        }
        let stiffness = lambda * dt * sup_norm(&a);
        if stiffness >= 1.0 {
            return Err(Error::InvalidDiscount(format!("lambda*dt*|a|_inf = {stiffness} must be below 1")));
        }
        let incoming =
            (0..n).map(|x| (0..n).map(|y| (y, kernel.get(y, x))).filter(|(_, w)| w.is_finite()).collect()).collect();
        Ok(Self { kernel, incoming, dt, lambda, a, level })
    }

    /// Same problem at another discount rate.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.kernel, self.dt, lambda, self.a.clone(), self.level)
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn coefficient(&self) -> &[f64] {
        &self.a
    }

    pub fn kernel(&self) -> &MinPlusMatrix {
        self.kernel
    }

    fn source(&self) -> f64 {
        self.dt * self.level * self.lambda
    }

    fn denominator(&self, x: usize) -> f64 {
        1.0 + self.lambda * self.dt * self.a[x]
    }

    /// `(min, argmin)` of `u(y) + K[y][x]`, smallest `y` on ties.
    fn best_incoming(&self, u: &[f64], x: usize) -> (f64, usize) {
        let mut best = f64::INFINITY;
        let mut arg = usize::MAX;
        for &(y, w) in &self.incoming[x] {
            let v = u[y] + w;
            if v < best {
                best = v;
                arg = y;
            }
        }
        (best, arg)
    }
}

/// One implicit discounted step with its argmin predecessors.
pub fn discounted_bellman_step(u: &[f64], p: &DiscountProblem) -> (Vec<f64>, Vec<usize>) {
    let c = p.source();
    (0..p.len())
        .into_par_iter()
        .map(|x| {
            let (m, y) = p.best_incoming(u, x);
            ((m + c) / p.denominator(x), y)
        })
        .unzip()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Howard iteration on predecessor policies with exact evaluation.
    PolicyIteration,
    /// Repeated application of the step from the starting function.
    ValueIteration,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol_fix: f64,
    pub max_iters: usize,
    pub strategy: Strategy,
    /// Allowed violation of the subsolution inequality for `v0`.
    pub subsolution_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol_fix: 1e-10, max_iters: 200_000, strategy: Strategy::PolicyIteration, subsolution_tol: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscountSolution {
    pub u: Vec<f64>,
    /// `sup |step(u) - u|`.
    pub residual: f64,
    pub iterations: usize,
    /// Minimizing predecessor of each node at `u`.
    pub backpointer: Vec<usize>,
}

fn finish(p: &DiscountProblem, u: Vec<f64>, iterations: usize) -> DiscountSolution {
    let (next, backpointer) = discounted_bellman_step(&u, p);
    let residual = next.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    DiscountSolution { u, residual, iterations, backpointer }
}

/// Iterates the step from `start`. With `monotone`, fails as soon as some
/// node decreases by more than `MONOTONE_SLACK`.
pub fn value_iterate(
    p: &DiscountProblem,
    start: &[f64],
    opts: &SolveOptions,
    monotone: bool,
) -> Result<DiscountSolution> {
    if start.len() != p.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), got: start.len() });
    }
    let mut u = start.to_vec();
    let mut residual = f64::INFINITY;
    for iteration in 1..=opts.max_iters {
        let (next, backpointer) = discounted_bellman_step(&u, p);
        if monotone {
            if let Some((node, drop)) =
                next.iter().zip(&u).map(|(a, b)| b - a).enumerate().find(|&(_, d)| d > MONOTONE_SLACK)
            {
                return Err(Error::MonotonicityViolated { iteration, node, drop });
            }
        }
        residual = next.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if residual <= opts.tol_fix {
            return Ok(DiscountSolution { u: next, residual, iterations: iteration, backpointer });
        }
        u = next;
    }
    Err(Error::NonConvergence { iterations: opts.max_iters, residual })
}

/// Exact value of a predecessor policy: every node solves
/// `u(x) = (u(pi(x)) + K[pi(x)][x] + dt A lambda) / d(x)`.
fn evaluate_policy(p: &DiscountProblem, policy: &[usize]) -> Vec<f64> {
    let n = p.len();
    let c = p.source();
    let gain = |x: usize| p.kernel.get(policy[x], x) + c;
    let mut u = vec![f64::NAN; n];
    // 0 = unvisited, 1 = on the current walk, 2 = evaluated
    let mut state = vec![0u8; n];
    let mut walk = Vec::new();
    for s in 0..n {
        if state[s] != 0 {
            continue;
        }
        walk.clear();
        let mut x = s;
        while state[x] == 0 {
            state[x] = 1;
            walk.push(x);
            x = policy[x];
        }
        let mut tail = walk.len();
        if state[x] == 1 {
            let start = walk.iter().position(|&v| v == x).expect("node is on the walk");
            let cycle = &walk[start..];
            let mut inv_prod = 1.0;
            let mut series = 0.0;
            let mut log_prod = 0.0;
            for &v in cycle {
                inv_prod /= p.denominator(v);
                series += gain(v) * inv_prod;
                log_prod += (p.lambda * p.dt * p.a[v]).ln_1p();
            }
            // u(x0) (1 - 1/P) = series with P the product of denominators
            let head = cycle[0];
            u[head] = series * log_prod.exp() / log_prod.exp_m1();
            for &v in cycle[1..].iter().rev() {
                u[v] = (u[policy[v]] + gain(v)) / p.denominator(v);
            }
            for &v in cycle {
                state[v] = 2;
            }
            tail = start;
        }
        for &v in walk[..tail].iter().rev() {
            u[v] = (u[policy[v]] + gain(v)) / p.denominator(v);
            state[v] = 2;
        }
    }
    u
}

/// Self-loops where `a > 0`, and a breadth-first tree toward them elsewhere.
fn feeder_policy(p: &DiscountProblem) -> Result<Vec<usize>> {
    let n = p.len();
    let mut policy = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    for x in 0..n {
        if p.a[x] > 0.0 && p.kernel.get(x, x).is_finite() {
            policy[x] = x;
            queue.push_back(x);
        }
    }
    if queue.is_empty() {
        return Err(Error::InvalidDiscount("a has no positive node with a self-loop".into()));
    }
    while let Some(y) = queue.pop_front() {
        for x in 0..n {
            if policy[x] == usize::MAX && p.kernel.get(y, x).is_finite() {
                policy[x] = y;
                queue.push_back(x);
            }
        }
    }
    if policy.contains(&usize::MAX) {
        return Err(Error::InvalidDiscount("some node cannot be reached from a positive node".into()));
    }
    Ok(policy)
}

fn policy_iterate(p: &DiscountProblem, opts: &SolveOptions) -> Result<DiscountSolution> {
    let mut policy = feeder_policy(p)?;
    for iteration in 1..=opts.max_iters {
        let u = evaluate_policy(p, &policy);
        let mut changed = false;
        for x in 0..p.len() {
            let current = u[policy[x]] + p.kernel.get(policy[x], x);
            let (best, arg) = p.best_incoming(&u, x);
            if best < current - 1e-13 * (1.0 + current.abs()) {
                policy[x] = arg;
                changed = true;
            }
        }
        if !changed {
            return Ok(finish(p, u, iteration));
        }
    }
    let u = evaluate_policy(p, &policy);
    Err(Error::NonConvergence { iterations: opts.max_iters, residual: finish(p, u, 0).residual })
}

/// Maximal fixed point of the discounted step above the subsolution `v0`.
pub fn solve_max_solution(p: &DiscountProblem, v0: &[f64], opts: &SolveOptions) -> Result<DiscountSolution> {
    if v0.len() != p.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), got: v0.len() });
    }
    if p.lambda.is_nan() || p.lambda <= 0.0 {
        return Err(Error::InvalidDiscount("lambda must be positive".into()));
    }
    let bound = sup_norm(&p.a) * sup_norm(v0);
    if p.level <= bound {
        return Err(Error::LevelTooSmall { level: p.level, bound });
    }
    let undiscounted = p.with_lambda(0.0)?;
    let (t0, _) = discounted_bellman_step(v0, &undiscounted);
    if let Some((node, excess)) =
        v0.iter().zip(&t0).map(|(v, t)| v - t).enumerate().find(|&(_, e)| e > opts.subsolution_tol)
    {
        return Err(Error::NotSubsolution { node, excess });
    }
    let sol = match opts.strategy {
        Strategy::ValueIteration => value_iterate(p, v0, opts, true)?,
        Strategy::PolicyIteration => policy_iterate(p, opts)?,
    };
    if sol.residual > opts.tol_fix {
        return Err(Error::NonConvergence { iterations: sol.iterations, residual: sol.residual });
    }
    if let Some((node, drop)) =
        v0.iter().zip(&sol.u).map(|(v, u)| v - u).enumerate().find(|&(_, d)| d > MAXIMALITY_SLACK)
    {
        return Err(Error::MonotonicityViolated { iteration: sol.iterations, node, drop });
    }
    Ok(sol)
}

/// Backpointer orbit and its occupation measures.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitOccupation {
    pub orbit: Vec<usize>,
    /// Uniform over the trailing half of the orbit.
    pub window_measure: NodeMeasure,
    /// Weight `exp(-lambda dt sum_{j<k} a(orbit[j]))` on the `k`-th visit.
    pub discounted_measure: NodeMeasure,
}

pub fn calibrated_orbit(sol: &DiscountSolution, p: &DiscountProblem, z: usize, steps: usize) -> OrbitOccupation {
    let mut orbit = Vec::with_capacity(steps + 1);
    let mut x = z;
    orbit.push(x);
    for _ in 0..steps {
        x = sol.backpointer[x];
        orbit.push(x);
    }
    let window_measure = NodeMeasure::uniform_on(&orbit[orbit.len() / 2..]);

    let mut logs = Vec::with_capacity(orbit.len());
    let mut acc = 0.0;
    for &v in &orbit {
        logs.push(-acc);
        acc += p.lambda * p.dt * p.a[v];
    }
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let discounted_measure = NodeMeasure::from_masses(orbit.iter().zip(&logs).map(|(&v, &l)| (v, (l - top).exp())));
    OrbitOccupation { orbit, window_measure, discounted_measure }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    /// `sup |u_lambda - target|`.
    pub sup_error: f64,
    pub residual: f64,
    pub iterations: usize,
    pub solution: DiscountSolution,
}

/// Solves at every rate of a strictly decreasing schedule and compares to
/// `target`. Rows come back in schedule order.
pub fn lambda_sweep(
    base: &DiscountProblem,
    schedule: &[f64],
    v0: &[f64],
    target: &[f64],
    opts: &SolveOptions,
) -> Result<Vec<SweepRow>> {
    validate_schedule(schedule)?;
    if target.len() != base.len() {
        return Err(Error::DimensionMismatch { expected: base.len(), got: target.len() });
    }
    schedule
        .par_iter()
        .map(|&lambda| {
            let p = base.with_lambda(lambda)?;
            let solution = solve_max_solution(&p, v0, opts)?;
            let sup_error = solution.u.iter().zip(target).map(|(u, t)| (u - t).abs()).fold(0.0, f64::max);
            Ok(SweepRow { lambda, sup_error, residual: solution.residual, iterations: solution.iterations, solution })
        })
        .collect()
}

pub fn validate_schedule(schedule: &[f64]) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::InvalidSchedule("empty schedule".into()));
    }
    if let Some(bad) = schedule.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        return Err(Error::InvalidSchedule(format!("rate {bad} is not positive")));
    }
    if schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidSchedule("rates must be strictly decreasing".into()));
    }
    Ok(())
}

/// Geometric schedule from `hi` down to `lo` with `points` entries.
pub fn geometric_schedule(hi: f64, lo: f64, points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![hi];
    }
    let r = (lo / hi).ln() / (points - 1) as f64;
    (0..points).map(|k| if k + 1 == points { lo } else { hi * (r * k as f64).exp() }).collect()
}
