//! Discrete Mather measures: uniform occupation measures of near-zero
//! reduced-cost cycles, the sign condition on the discount coefficient, and
//! the selection constant.

use crate::error::{Error, Result};
use crate::grid::ActionKernel;
use crate::tropical::{cycle_cost, MinPlusMatrix};
use crate::weak_kam::{StaticClass, WeakKamAtlas};

pub const DEFAULT_CYCLE_CAP: usize = 10_000;

/// Probability measure on nodes as sorted `(node, mass)` atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeMeasure {
    atoms: Vec<(usize, f64)>,
}

impl NodeMeasure {
    /// Uniform mass `1/len` on each visit of `nodes`, merged on repeats.
    pub fn uniform_on(nodes: &[usize]) -> Self {
        let w = 1.0 / nodes.len() as f64;
        Self::from_masses(nodes.iter().map(|&x| (x, w)))
    }

    /// Sums masses per node and normalizes to total mass one.
    pub fn from_masses(masses: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut atoms: Vec<(usize, f64)> = masses.into_iter().filter(|&(_, m)| m > 0.0).collect();
        atoms.sort_by_key(|&(x, _)| x);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(atoms.len());
        for (x, m) in atoms {
            match merged.last_mut() {
                Some((y, acc)) if *y == x => *acc += m,
                _ => merged.push((x, m)),
            }
        }
        let total: f64 = merged.iter().map(|&(_, m)| m).sum();
        if total > 0.0 {
            merged.iter_mut().for_each(|(_, m)| *m /= total);
        }
        Self { atoms: merged }
    }

    pub fn atoms(&self) -> &[(usize, f64)] {
        &self.atoms
    }

    pub fn support(&self) -> Vec<usize> {
        self.atoms.iter().map(|&(x, _)| x).collect()
    }

    pub fn mass(&self, x: usize) -> f64 {
        self.atoms.binary_search_by_key(&x, |&(y, _)| y).map_or(0.0, |i| self.atoms[i].1)
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|&(_, m)| m).sum()
    }

    /// `sum_x mu(x) f(x)`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.atoms.iter().map(|&(x, m)| m * f[x]).sum()
    }

    /// `sum_x mu(x) a(x) g(x)`.
    pub fn integrate_product(&self, a: &[f64], g: &[f64]) -> f64 {
        self.atoms.iter().map(|&(x, m)| m * a[x] * g[x]).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatherMeasure {
    /// Simple cycle in traversal order, starting at its smallest node.
    pub cycle: Vec<usize>,
    pub weights: NodeMeasure,
    pub class_id: usize,
    /// Mean reduced cost per step along the cycle.
    pub mean_reduced_cost: f64,
}

/// Edges `y -> x` between Aubry nodes with `K[y][x] + D[x][y] <= tol`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TightSubgraph {
    successors: Vec<Vec<usize>>,
}

impl TightSubgraph {
    pub fn successors(&self, y: usize) -> &[usize] {
        &self.successors[y]
    }

    pub fn contains(&self, y: usize, x: usize) -> bool {
        self.successors[y].binary_search(&x).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.successors.iter().map(Vec::len).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.successors.iter().enumerate().flat_map(|(y, s)| s.iter().map(move |&x| (y, x)))
    }
}

pub fn tight_subgraph(atlas: &WeakKamAtlas) -> TightSubgraph {
    let kt = atlas.reduced();
    let d = atlas.paths().dist();
    let tol = atlas.tolerances().tight();
    let aubry = atlas.aubry();
    let mut successors = vec![Vec::new(); kt.order()];
    for &y in aubry {
        for &x in aubry {
            let w = kt.get(y, x);
            if w.is_finite() && w + d.get(x, y) <= tol {
                successors[y].push(x);
            }
        }
    }
    TightSubgraph { successors }
}

/// Johnson's elementary circuit search restricted to `nodes`.
fn simple_cycles(nodes: &[usize], graph: &TightSubgraph, cap: usize) -> Result<Vec<Vec<usize>>> {
    let m = nodes.len();
    let local = |x: usize| nodes.binary_search(&x).ok();
    let adj: Vec<Vec<usize>> =
        nodes.iter().map(|&y| graph.successors(y).iter().filter_map(|&x| local(x)).collect()).collect();

    struct Search<'a> {
        adj: &'a [Vec<usize>],
        start: usize,
        blocked: Vec<bool>,
        blocked_by: Vec<Vec<usize>>,
        stack: Vec<usize>,
        found: Vec<Vec<usize>>,
        cap: usize,
    }

    impl Search<'_> {
        fn unblock(&mut self, u: usize) {
            self.blocked[u] = false;
            for w in std::mem::take(&mut self.blocked_by[u]) {
                if self.blocked[w] {
                    self.unblock(w);
                }
            }
        }

        fn circuit(&mut self, v: usize) -> Result<bool> {
            let mut closed = false;
            self.stack.push(v);
            self.blocked[v] = true;
            let adj = self.adj;
            let start = self.start;
            for &w in adj[v].iter().filter(|&&w| w >= start) {
                if w == self.start {
                    self.found.push(self.stack.clone());
                    if self.found.len() > self.cap {
                        return Err(Error::CycleExplosion { cap: self.cap });
                    }
                    closed = true;
                } else if !self.blocked[w] && self.circuit(w)? {
                    closed = true;
                }
            }
            if closed {
                self.unblock(v);
            } else {
                for &w in adj[v].iter().filter(|&&w| w >= start) {
                    if !self.blocked_by[w].contains(&v) {
                        self.blocked_by[w].push(v);
                    }
                }
            }
            self.stack.pop();
            Ok(closed)
        }
    }

    let mut search = Search {
        adj: &adj,
        start: 0,
        blocked: vec![false; m],
        blocked_by: vec![Vec::new(); m],
        stack: Vec::new(),
        found: Vec::new(),
        cap,
    };
    for s in 0..m {
        search.start = s;
        search.blocked.iter_mut().for_each(|b| *b = false);
        search.blocked_by.iter_mut().for_each(Vec::clear);
        search.circuit(s)?;
    }
    Ok(search.found.into_iter().map(|c| c.into_iter().map(|i| nodes[i]).collect()).collect())
}

/// All simple cycles of the tight subgraph inside class `class_id` whose
/// mean reduced cost is at most the tight tolerance.
pub fn enumerate_cycle_measures(
    atlas: &WeakKamAtlas,
    graph: &TightSubgraph,
    class_id: usize,
) -> Result<Vec<MatherMeasure>> {
    enumerate_cycle_measures_capped(atlas, graph, class_id, DEFAULT_CYCLE_CAP)
}

pub fn enumerate_cycle_measures_capped(
    atlas: &WeakKamAtlas,
    graph: &TightSubgraph,
    class_id: usize,
    cap: usize,
) -> Result<Vec<MatherMeasure>> {
    let class = atlas.class(class_id)?;
    let tol = atlas.tolerances().tight();
    let kt = atlas.reduced();
    Ok(simple_cycles(&class.nodes, graph, cap)?
        .into_iter()
        .filter_map(|cycle| {
            let mean = cycle_cost(kt, &cycle) / cycle.len() as f64;
            (mean <= tol).then(|| MatherMeasure {
                weights: NodeMeasure::uniform_on(&cycle),
                cycle,
                class_id,
                mean_reduced_cost: mean,
            })
        })
        .collect())
}

/// Cycle average of raw action per unit time.
pub fn mather_mean_action(measure: &MatherMeasure, kernel: &ActionKernel) -> f64 {
    cycle_cost(kernel.cost(), &measure.cycle) / (measure.cycle.len() as f64 * kernel.dt())
}

/// Result of checking `a > 0` on the selected class and `a < 0` on all
/// others.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub passed: bool,
    /// `min(min a on the selected class, -max a on the others)`.
    pub epsilon: f64,
    /// Nodes where the sign is wrong.
    pub offending: Vec<usize>,
}

pub fn verify_condition_a(a: &[f64], classes: &[StaticClass], selected: usize) -> Result<ConditionReport> {
    if selected >= classes.len() {
        return Err(Error::ClassOutOfRange { index: selected, count: classes.len() });
    }
    let mut epsilon = f64::INFINITY;
    let mut offending = Vec::new();
    for (i, class) in classes.iter().enumerate() {
        for &x in &class.nodes {
            let signed = if i == selected { a[x] } else { -a[x] };
            epsilon = epsilon.min(signed);
            if signed <= 0.0 {
                offending.push(x);
            }
        }
    }
    // a single class leaves nothing for the negative side
    let passed = classes.len() > 1 && offending.is_empty() && epsilon > 0.0;
    offending.sort_unstable();
    Ok(ConditionReport { passed, epsilon, offending })
}

/// Minimizer of the selection formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub value: f64,
    /// Index of the minimizing measure.
    pub measure: usize,
}

/// `C = min_mu (sum mu a h[.][x0] + A) / (sum mu a)` over `measures`.
pub fn selection_constant(
    measures: &[MatherMeasure],
    a: &[f64],
    level: f64,
    barrier: &MinPlusMatrix,
    x0: usize,
) -> Result<Selection> {
    let column: Vec<f64> = (0..barrier.order()).map(|y| barrier.get(y, x0)).collect();
    let mut best: Option<Selection> = None;
    for (i, m) in measures.iter().enumerate() {
        let denom = m.weights.integrate(a);
        if denom <= 0.0 {
            return Err(Error::ConditionViolatedOnSupport { measure: i, integral: denom });
        }
        let value = (m.weights.integrate_product(a, &column) + level) / denom;
        if best.is_none_or(|b| value < b.value) {
            best = Some(Selection { value, measure: i });
        }
    }
    best.ok_or(Error::NoMatherMeasures { class: measures.first().map_or(0, |m| m.class_id) })
}

/// `|a|_inf |v0|_inf + margin`.
pub fn default_level(a: &[f64], v0: &[f64], margin: f64) -> f64 {
    let sup = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    sup(a) * sup(v0) + margin
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_action_kernel, HamiltonianSpec, PeriodicGrid, Potential};
    use crate::presets::Preset;
    use crate::weak_kam::AtlasTolerances;
    use std::f64::consts::PI;

    fn flat_atlas(n: usize) -> (ActionKernel, WeakKamAtlas) {
        let grid = PeriodicGrid::new(n).unwrap();
        let spec = HamiltonianSpec::example2(Potential::zero(), 1.0).unwrap();
        let kernel = build_action_kernel(&grid, &spec, grid.dx()).unwrap();
        let atlas = WeakKamAtlas::build(&grid, &kernel, AtlasTolerances::for_grid(grid.dx(), grid.dx())).unwrap();
        (kernel, atlas)
    }

    fn cos_coefficient(n: usize, sign: f64) -> Vec<f64> {
        (0..n).map(|i| sign * (2.0 * PI * i as f64 / n as f64).cos()).collect()
    }

    #[test]
    fn node_measure_merges_repeats() {
        let m = NodeMeasure::uniform_on(&[3, 1, 3, 2]);
        assert_eq!(m.atoms(), &[(1, 0.25), (2, 0.25), (3, 0.5)]);
        assert_eq!(m.mass(3), 0.5);
        assert_eq!(m.mass(0), 0.0);
        assert!((m.integrate(&[0.0, 1.0, 2.0, 4.0]) - 2.75).abs() < 1e-15);
    }

    #[test]
    fn flat_potential_self_loops() {
        let (kernel, atlas) = flat_atlas(16);
        let g = tight_subgraph(&atlas);
        for x in 0..16 {
            assert!(g.contains(x, x));
        }
        let ms = enumerate_cycle_measures(&atlas, &g, 0).unwrap();
        assert!(ms.iter().any(|m| m.cycle == vec![0]));
        for m in &ms {
            assert_eq!(mather_mean_action(m, &kernel), 0.0);
        }
    }

    #[test]
    fn example1_measures_and_selection() {
        let setup = Preset::Example1.setup(256, None).unwrap();
        let atlas = &setup.atlas;
        let g = tight_subgraph(atlas);
        assert!(g.contains(0, 0) && g.contains(128, 128));
        for (y, x) in g.edges() {
            assert_eq!(atlas.class_of(y), atlas.class_of(x));
        }
        let i0 = atlas.class_of(0).unwrap();
        let ms = enumerate_cycle_measures(atlas, &g, i0).unwrap();
        assert!(ms.iter().any(|m| m.weights.atoms() == [(0, 1.0)]));
        let tol = atlas.tolerances().tight();
        for m in &ms {
            assert!(m.mean_reduced_cost <= tol);
            let action = mather_mean_action(m, &setup.kernel);
            assert!((action + atlas.c0()).abs() <= tol / setup.kernel.dt());
            assert!(m.cycle.iter().all(|&x| atlas.classes()[i0].contains(x)));
            // telescoping sums vanish on closed cycles
            for f in [|x: f64| x.sin(), |x: f64| x * x, |x: f64| (3.0 * x).cos()] {
                let vals: Vec<f64> = (0..256).map(|i| f(i as f64)).collect();
                let len = m.cycle.len();
                let s: f64 = (0..len).map(|k| vals[m.cycle[(k + 1) % len]] - vals[m.cycle[k]]).sum();
                assert!(s.abs() <= 1e-12);
            }
        }

        let a = cos_coefficient(256, 1.0);
        let report = verify_condition_a(&a, atlas.classes(), i0).unwrap();
        assert!(report.passed);
        assert!(report.epsilon > 0.99 && report.epsilon <= 1.0);
        let c = selection_constant(&ms, &a, 1.0, atlas.barrier(), 0).unwrap();
        assert!((c.value - 1.0).abs() <= 1e-6);
        assert_eq!(ms[c.measure].cycle, vec![0]);

        let flipped = cos_coefficient(256, -1.0);
        let j0 = atlas.class_of(128).unwrap();
        assert!(verify_condition_a(&flipped, atlas.classes(), j0).unwrap().passed);
        assert!(!verify_condition_a(&flipped, atlas.classes(), i0).unwrap().passed);
    }

    #[test]
    fn constant_coefficient_fails_condition() {
        let setup = Preset::Example1.setup(64, None).unwrap();
        let r = verify_condition_a(&[1.0; 64], setup.atlas.classes(), 0).unwrap();
        assert!(!r.passed);
        assert!(!r.offending.is_empty());
        assert!(verify_condition_a(&[1.0; 64], setup.atlas.classes(), 7).is_err());
    }

    fn dirac(x: usize) -> MatherMeasure {
        MatherMeasure { cycle: vec![x], weights: NodeMeasure::uniform_on(&[x]), class_id: 0, mean_reduced_cost: 0.0 }
    }

    #[test]
    fn dirac_selection_and_scaling() {
        let h = MinPlusMatrix::from_rows(vec![vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap();
        let a = [0.5, -1.0];
        let c = selection_constant(&[dirac(0)], &a, 3.0, &h, 0).unwrap();
        assert_eq!(c.value, 6.0);
        for t in [0.25, 2.0, 7.0] {
            let scaled: Vec<f64> = a.iter().map(|v| v * t).collect();
            let ct = selection_constant(&[dirac(0)], &scaled, 3.0, &h, 0).unwrap();
            assert!((ct.value - 3.0 / (t * 0.5)).abs() < 1e-12);
        }
        let err = selection_constant(&[dirac(1)], &a, 3.0, &h, 0).unwrap_err();
        assert!(err.to_string().contains("condition (a) violated on support"));
    }

    #[test]
    fn cycle_cap_is_enforced() {
        // complete graph on 6 nodes has far more than 10 simple cycles
        let nodes: Vec<usize> = (0..6).collect();
        let g = TightSubgraph { successors: vec![nodes.clone(); 6] };
        assert_eq!(simple_cycles(&nodes, &g, 10), Err(Error::CycleExplosion { cap: 10 }));
        // 6 loops + 15 two-cycles + 40 three-cycles + 90 + 144 + 120
        assert_eq!(simple_cycles(&nodes, &g, DEFAULT_CYCLE_CAP).unwrap().len(), 415);
    }

    #[test]
    fn default_level_margin() {
        assert_eq!(default_level(&[0.5, -2.0], &[1.0, -0.25], 1.0), 3.0);
    }
}
