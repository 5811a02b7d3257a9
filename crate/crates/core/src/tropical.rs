//! Min-plus matrix algebra over `f64 ∪ {+inf}`.
//!
//! Composition of one-step actions is matrix multiplication in the
//! `(min, +)` semiring. This module also carries Karp's minimum mean cycle
//! algorithm and the all-pairs closure used on reduced kernels.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::ActionKernel;

/// Residual negative cycle mean tolerated after reduction by a critical value.
pub const TOL_NEG: f64 = 1e-7;

const NO_NODE: usize = usize::MAX;

/// Square matrix with entries in `R ∪ {+inf}`; `entry[i][j]` is the cost of
/// the best one-hop transition `i -> j`.
#[derive(Debug, Clone, PartialEq)]
pub struct MinPlusMatrix {
    n: usize,
    data: Vec<f64>,
}

fn check_entry(row: usize, col: usize, value: f64) -> Result<()> {
    if value.is_nan() || value == f64::NEG_INFINITY {
        Err(Error::InvalidEntry { row, col, value })
    } else {
        Ok(())
    }
}

impl MinPlusMatrix {
    /// Matrix with every entry equal to `fill`.
    pub fn filled(n: usize, fill: f64) -> Result<Self> {
        check_entry(0, 0, fill)?;
        Ok(Self { n, data: vec![fill; n * n] })
    }

    /// Min-plus unit: `0` on the diagonal, `+inf` elsewhere.
    pub fn identity(n: usize) -> Self {
        let mut data = vec![f64::INFINITY; n * n];
        for i in 0..n {
            data[i * n + i] = 0.0;
        }
        Self { n, data }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
            for (j, &v) in row.iter().enumerate() {
                check_entry(i, j, v)?;
            }
            data.extend(row);
        }
        Ok(Self { n, data })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let v = f(i, j);
                check_entry(i, j, v)?;
                data.push(v);
            }
        }
        Ok(Self { n, data })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) -> Result<()> {
        check_entry(i, j, value)?;
        self.data[i * self.n + j] = value;
        Ok(())
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Adds `c` to every finite entry.
    pub fn shifted(&self, c: f64) -> Self {
        let data = self.data.iter().map(|&v| if v.is_finite() { v + c } else { v }).collect();
        Self { n: self.n, data }
    }

    /// Largest absolute difference between finite entries; `+inf` if the
    /// finiteness patterns differ.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.n, other.n, "orders differ");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| match (a.is_finite(), b.is_finite()) {
                (true, true) => (a - b).abs(),
                (false, false) => 0.0,
                _ => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    }

    /// Entrywise minimum.
    pub fn min_with(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "orders differ");
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a.min(b)).collect();
        Self { n: self.n, data }
    }
}

/// `C[i][j] = min_k A[i][k] + B[k][j]`.
///
/// # Panics
///
/// If the orders differ.
pub fn mp_multiply(a: &MinPlusMatrix, b: &MinPlusMatrix) -> MinPlusMatrix {
    assert_eq!(a.n, b.n, "min-plus product needs equal orders");
    let n = a.n;
    let mut data = vec![f64::INFINITY; n * n];
    if n > 0 {
        data.par_chunks_mut(n).enumerate().for_each(|(i, out)| {
            for (k, &aik) in a.row(i).iter().enumerate() {
                if !aik.is_finite() {
                    continue;
                }
                for (o, &bkj) in out.iter_mut().zip(b.row(k)) {
                    let s = aik + bkj;
                    if s < *o {
                        *o = s;
                    }
                }
            }
        });
    }
    MinPlusMatrix { n, data }
}

/// `K^{⊗m}` by binary exponentiation.
///
/// # Panics
///
/// If `m == 0`.
pub fn mp_power(k: &MinPlusMatrix, m: usize) -> MinPlusMatrix {
    assert!(m >= 1, "min-plus power needs m >= 1");
    let mut result: Option<MinPlusMatrix> = None;
    let mut base = k.clone();
    let mut e = m;
    loop {
        if e & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => mp_multiply(&r, &base),
            });
        }
        e >>= 1;
        if e == 0 {
            break;
        }
        base = mp_multiply(&base, &base);
    }
    result.expect("m >= 1")
}

/// Minimum mean cycle and one cycle attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanCycle {
    /// Total cost of `cycle` divided by its length.
    pub mean: f64,
    /// Nodes in traversal order, rotated to start at the smallest index;
    /// the closing edge runs from the last node back to the first.
    pub cycle: Vec<usize>,
}

/// Total cost of the closed walk through `cycle`.
pub fn cycle_cost(k: &MinPlusMatrix, cycle: &[usize]) -> f64 {
    cycle.iter().enumerate().map(|(i, &u)| k.get(u, cycle[(i + 1) % cycle.len()])).sum()
}

fn rotate_to_min(mut cycle: Vec<usize>) -> Vec<usize> {
    if let Some(pos) = cycle.iter().enumerate().min_by_key(|(_, &v)| v).map(|(i, _)| i) {
        cycle.rotate_left(pos);
    }
    cycle
}

/// Karp's minimum mean cycle.
///
/// `D_k(v)` is the cheapest walk of exactly `k` edges ending at `v` from a
/// virtual source adjacent to every node; the optimum mean is
/// `min_v max_{k<n} (D_n(v) - D_k(v)) / (n - k)`. The witness is the
/// cheapest-mean cycle on the backtracked `n`-edge walk of the minimizing `v`.
pub fn karp_min_mean_cycle(k: &MinPlusMatrix) -> Result<MeanCycle> {
    let n = k.order();
    if n == 0 {
        return Err(Error::NotStronglyCyclic);
    }
    let incoming: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|v| (0..n).filter_map(|u| Some((u, k.get(u, v))).filter(|(_, w)| w.is_finite())).collect())
        .collect();

    let mut dist = vec![vec![f64::INFINITY; n]; n + 1];
    let mut pred = vec![vec![NO_NODE; n]; n + 1];
    dist[0].iter_mut().for_each(|d| *d = 0.0);
    for step in 1..=n {
        let (done, rest) = dist.split_at_mut(step);
        let prev = &done[step - 1];
        let cur = &mut rest[0];
        for v in 0..n {
            let mut best = f64::INFINITY;
            let mut arg = NO_NODE;
            for &(u, w) in &incoming[v] {
                let cand = prev[u] + w;
                if cand < best {
                    best = cand;
                    arg = u;
                }
            }
            cur[v] = best;
            pred[step][v] = arg;
        }
    }

    let mut best_v = NO_NODE;
    let mut best_val = f64::INFINITY;
    for v in 0..n {
        let dn = dist[n][v];
        if !dn.is_finite() {
            continue;
        }
        let worst = (0..n)
            .filter(|&s| dist[s][v].is_finite())
            .map(|s| (dn - dist[s][v]) / (n - s) as f64)
            .fold(f64::NEG_INFINITY, f64::max);
        if worst < best_val {
            best_val = worst;
            best_v = v;
        }
    }
    if best_v == NO_NODE {
        return Err(Error::NotStronglyCyclic);
    }

    let mut walk = vec![NO_NODE; n + 1];
    walk[n] = best_v;
    for step in (1..=n).rev() {
        walk[step - 1] = pred[step][walk[step]];
    }
    let mut last_seen = vec![NO_NODE; n];
    let mut best: Option<MeanCycle> = None;
    for (j, &v) in walk.iter().enumerate() {
        let i = last_seen[v];
        if i != NO_NODE {
            let cycle = walk[i..j].to_vec();
            let mean = cycle_cost(k, &cycle) / cycle.len() as f64;
            if best.as_ref().is_none_or(|b| mean < b.mean) {
                best = Some(MeanCycle { mean, cycle });
            }
        }
        last_seen[v] = j;
    }
    let found = best.ok_or(Error::NotStronglyCyclic)?;
    Ok(MeanCycle { mean: found.mean, cycle: rotate_to_min(found.cycle) })
}

/// `K~[y][x] = cost[y][x] + c0 dt` on finite entries.
pub fn reduce_kernel(kernel: &ActionKernel, c0: f64) -> MinPlusMatrix {
    kernel.cost().shifted(c0 * kernel.dt())
}

/// All-pairs closure of a reduced kernel.
#[derive(Debug, Clone)]
pub struct ShortestPathTable {
    dist: MinPlusMatrix,
    dist_plus: MinPlusMatrix,
    pred: Vec<usize>,
}

impl ShortestPathTable {
    pub fn order(&self) -> usize {
        self.dist.order()
    }

    /// Minimal cost over paths with zero or more edges.
    pub fn dist(&self) -> &MinPlusMatrix {
        &self.dist
    }

    /// Minimal cost over paths with at least one edge.
    pub fn dist_plus(&self) -> &MinPlusMatrix {
        &self.dist_plus
    }

    /// Node preceding `j` on the stored best path from `i`.
    pub fn predecessor(&self, i: usize, j: usize) -> Option<usize> {
        Some(self.pred[i * self.order() + j]).filter(|&p| p != NO_NODE)
    }

    /// Best path `i -> j` as a node list from `i` to `j`, or `None` when
    /// `j` is unreachable.
    pub fn path(&self, i: usize, j: usize) -> Option<Vec<usize>> {
        if i == j {
            return Some(vec![i]);
        }
        let mut nodes = vec![j];
        let mut cur = j;
        for _ in 0..self.order() {
            let p = self.predecessor(i, cur)?;
            nodes.push(p);
            if p == i {
                nodes.reverse();
                return Some(nodes);
            }
            cur = p;
        }
        None
    }
}

/// Floyd–Warshall closure of `kt` with predecessor tracking.
///
/// Fails when `kt` has a cycle of mean below `-TOL_NEG`. Smaller negative
/// residues are absorbed by pinning the diagonal of `D` to zero.
pub fn all_pairs_shortest(kt: &MinPlusMatrix) -> Result<ShortestPathTable> {
    let n = kt.order();
    if n > 0 {
        let cyc = karp_min_mean_cycle(kt)?;
        if cyc.mean < -TOL_NEG {
            return Err(Error::CriticalValueUnderestimated { mean: cyc.mean });
        }
    }
    let mut dist = kt.data.clone();
    let mut pred = vec![NO_NODE; n * n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                dist[i * n + j] = 0.0;
            } else if dist[i * n + j].is_finite() {
                pred[i * n + j] = i;
            }
        }
    }
    for k in 0..n {
        let row_k: Vec<f64> = dist[k * n..(k + 1) * n].to_vec();
        let pred_k: Vec<usize> = pred[k * n..(k + 1) * n].to_vec();
        dist.par_chunks_mut(n).zip(pred.par_chunks_mut(n)).enumerate().for_each(|(i, (drow, prow))| {
            let dik = drow[k];
            if i == k || !dik.is_finite() {
                return;
            }
            for j in 0..n {
                if j == i {
                    continue;
                }
                let cand = dik + row_k[j];
                if cand < drow[j] {
                    drow[j] = cand;
                    prow[j] = pred_k[j];
                }
            }
        });
    }
    let dist = MinPlusMatrix { n, data: dist };
    let dist_plus = mp_multiply(kt, &dist);
    Ok(ShortestPathTable { dist, dist_plus, pred })
}
