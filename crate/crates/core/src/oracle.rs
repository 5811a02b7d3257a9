//! Slow reference computations used to cross-check the fast paths.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tropical::{mp_multiply, mp_power, MinPlusMatrix};

/// Deterministic generator for reproducible oracle runs.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random graph on `n` nodes with integer weights in `[-5, 10]`; each edge
/// is present with probability `density`.
pub fn random_integer_graph<R: Rng>(rng: &mut R, n: usize, density: f64) -> MinPlusMatrix {
    let entries: Vec<f64> = (0..n * n)
        .map(|_| if rng.gen_bool(density) { f64::from(rng.gen_range(-5i32..=10)) } else { f64::INFINITY })
        .collect();
    MinPlusMatrix::from_fn(n, |i, j| entries[i * n + j]).expect("finite or +inf entries")
}

/// Minimum mean over every simple cycle, by exhaustive search.
/// Returns the mean and one cycle attaining it.
pub fn brute_force_min_mean_cycle(k: &MinPlusMatrix) -> Option<(f64, Vec<usize>)> {
    let n = k.order();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut path = Vec::new();
    let mut on_path = vec![false; n];
    for start in 0..n {
        path.clear();
        path.push(start);
        on_path[start] = true;
        extend(k, start, 0.0, &mut path, &mut on_path, &mut best);
        on_path[start] = false;
    }
    best
}

fn extend(
    k: &MinPlusMatrix,
    start: usize,
    cost: f64,
    path: &mut Vec<usize>,
    on_path: &mut [bool],
    best: &mut Option<(f64, Vec<usize>)>,
) {
    let last = *path.last().expect("non-empty path");
    let close = k.get(last, start);
    if close.is_finite() {
        let mean = (cost + close) / path.len() as f64;
        if best.as_ref().is_none_or(|(b, _)| mean < *b) {
            *best = Some((mean, path.clone()));
        }
    }
    // only nodes above `start` so that each cycle is visited from its smallest node
    for next in start + 1..k.order() {
        let w = k.get(last, next);
        if on_path[next] || !w.is_finite() {
            continue;
        }
        on_path[next] = true;
        path.push(next);
        extend(k, start, cost + w, path, on_path, best);
        path.pop();
        on_path[next] = false;
    }
}

/// Entrywise `min_{lo <= m <= hi} (K^m)[x][y]`.
pub fn power_window_min(k: &MinPlusMatrix, lo: usize, hi: usize) -> MinPlusMatrix {
    assert!(lo >= 1 && lo <= hi, "need 1 <= lo <= hi");
    let mut power = mp_power(k, lo);
    let mut acc = power.clone();
    for _ in lo..hi {
        power = mp_multiply(&power, k);
        acc = acc.min_with(&power);
    }
    acc
}

/// Distance from `a` to `b` on a circle of length `circumference` in the
/// metric `w(s) |ds|`: the shorter of the two arcs, each by composite
/// Simpson quadrature with `steps` panels.
pub fn metric_distance(w: impl Fn(f64) -> f64, circumference: f64, a: f64, b: f64, steps: usize) -> f64 {
    let forward = (b - a).rem_euclid(circumference);
    let simpson = |start: f64, len: f64| {
        let m = steps.max(1) * 2;
        let h = len / m as f64;
        let mut acc = w(start) + w(start + len);
        for k in 1..m {
            acc += if k % 2 == 1 { 4.0 } else { 2.0 } * w(start + k as f64 * h);
        }
        acc * h / 3.0
    };
    simpson(a, forward).min(simpson(b, circumference - forward))
}

/// Liminf of `K^m` as `m -> inf`: window minima over `[M, 2M]` with `M`
/// doubling from `start` until two successive windows agree within `tol`.
/// Returns the last window minimum and the `M` reached.
pub fn power_liminf(k: &MinPlusMatrix, start: usize, tol: f64, max_m: usize) -> (MinPlusMatrix, usize) {
    let mut m = start.max(1);
    let mut prev = power_window_min(k, m, 2 * m);
    while 2 * m <= max_m {
        m *= 2;
        let next = power_window_min(k, m, 2 * m);
        let settled = next.max_abs_diff(&prev) <= tol;
        prev = next;
        if settled {
            break;
        }
    }
    (prev, m)
}
