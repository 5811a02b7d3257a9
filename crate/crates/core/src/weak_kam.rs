//! Critical value, Peierls barrier, projected Aubry set and static classes
//! of a discrete action kernel.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{ActionKernel, PeriodicGrid};
use crate::tropical::{all_pairs_shortest, karp_min_mean_cycle, reduce_kernel, MinPlusMatrix, ShortestPathTable};

/// Thresholds separating "zero" from "positive" in the discrete model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtlasTolerances {
    /// `x` is an Aubry node when `Dplus[x][x] <= aubry`.
    pub aubry: f64,
    /// `x ~ y` when `h[x][y] + h[y][x] <= class`.
    pub class: f64,
    /// Allowed defect of a discrete critical solution.
    pub fixed: f64,
}

impl AtlasTolerances {
    /// Defaults scaled to the grid: `aubry = dt (dx + dt) / 2`,
    /// `class = 20 (dx + dt)`, `fixed = 10 (dx + dt)`.
    ///
    /// The Aubry threshold carries an extra factor `dt` because it compares
    /// a per-step action, which is itself `O(dt)`.
    pub fn for_grid(dx: f64, dt: f64) -> Self {
        let h = dx + dt;
        Self { aubry: 0.5 * dt * h, class: 20.0 * h, fixed: 10.0 * h }
    }

    /// Tolerance on the mean reduced cost of a Mather cycle.
    pub fn tight(&self) -> f64 {
        self.aubry
    }
}

/// One static class of the Aubry set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StaticClass {
    /// Smallest node index in the class.
    pub basepoint: usize,
    /// Sorted member nodes.
    pub nodes: Vec<usize>,
}

impl StaticClass {
    pub fn contains(&self, x: usize) -> bool {
        self.nodes.binary_search(&x).is_ok()
    }
}

/// `c0 = -(min mean cycle of K) / dt`.
pub fn critical_value(kernel: &ActionKernel) -> Result<f64> {
    Ok(-karp_min_mean_cycle(kernel.cost())?.mean / kernel.dt())
}

/// Nodes lying on a cycle of reduced cost at most `tol`.
pub fn aubry_nodes(paths: &ShortestPathTable, tol: f64) -> Vec<usize> {
    let dplus = paths.dist_plus();
    (0..paths.order()).filter(|&x| dplus.get(x, x) <= tol).collect()
}

/// `h[x][y] = min_{z in aubry} D[x][z] + D[z][y]`.
pub fn peierls_barrier(paths: &ShortestPathTable, aubry: &[usize], tol: f64) -> Result<MinPlusMatrix> {
    if aubry.is_empty() {
        return Err(Error::NoAubryNodes { tol });
    }
    let d = paths.dist();
    let n = d.order();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut row = vec![f64::INFINITY; n];
            for &z in aubry {
                let dxz = d.get(x, z);
                if !dxz.is_finite() {
                    continue;
                }
                for (r, &dzy) in row.iter_mut().zip(d.row(z)) {
                    let s = dxz + dzy;
                    if s < *r {
                        *r = s;
                    }
                }
            }
            row
        })
        .collect();
    MinPlusMatrix::from_rows(rows)
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Partition of `aubry` under `h[x][y] + h[y][x] <= tol`, closed
/// transitively. Classes come sorted by basepoint.
pub fn static_classes(aubry: &[usize], barrier: &MinPlusMatrix, tol: f64) -> Vec<StaticClass> {
    let m = aubry.len();
    let mut parent: Vec<usize> = (0..m).collect();
    for i in 0..m {
        for j in i + 1..m {
            let (x, y) = (aubry[i], aubry[j]);
            if barrier.get(x, y) + barrier.get(y, x) <= tol {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); m];
    for i in 0..m {
        let r = find(&mut parent, i);
        groups[r].push(aubry[i]);
    }
    let mut classes: Vec<StaticClass> = groups
        .into_iter()
        .filter(|g| !g.is_empty())
        .map(|mut nodes| {
            nodes.sort_unstable();
            StaticClass { basepoint: nodes[0], nodes }
        })
        .collect();
    classes.sort_by_key(|c| c.basepoint);
    classes
}

/// Largest difference quotient of `h` between neighbouring nodes, in either
/// argument, over finite entries.
pub fn lipschitz_kappa(barrier: &MinPlusMatrix, grid: &PeriodicGrid) -> f64 {
    let n = barrier.order();
    let dx = grid.dx();
    (0..n)
        .into_par_iter()
        .map(|x| {
            let mut k: f64 = 0.0;
            for y in 0..n {
                let h = barrier.get(x, y);
                let right = barrier.get(x, (y + 1) % n);
                let down = barrier.get((x + 1) % n, y);
                if h.is_finite() && right.is_finite() {
                    k = k.max((right - h).abs() / dx);
                }
                if h.is_finite() && down.is_finite() {
                    k = k.max((down - h).abs() / dx);
                }
            }
            k
        })
        .reduce(|| 0.0, f64::max)
}

/// `min_y u(y) + K[y][x]` for every `x`: one undiscounted Lax–Oleinik step.
pub fn lax_oleinik_step(u: &[f64], kt: &MinPlusMatrix) -> Vec<f64> {
    let n = kt.order();
    (0..n).into_par_iter().map(|x| (0..n).map(|y| u[y] + kt.get(y, x)).fold(f64::INFINITY, f64::min)).collect()
}

/// Everything the selection step needs from the critical problem.
#[derive(Debug, Clone)]
pub struct WeakKamAtlas {
    c0: f64,
    dt: f64,
    reduced: MinPlusMatrix,
    paths: ShortestPathTable,
    aubry: Vec<usize>,
    classes: Vec<StaticClass>,
    barrier: MinPlusMatrix,
    lipschitz_kappa: f64,
    tolerances: AtlasTolerances,
}

impl WeakKamAtlas {
    pub fn build(grid: &PeriodicGrid, kernel: &ActionKernel, tolerances: AtlasTolerances) -> Result<Self> {
        if grid.len() != kernel.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: kernel.len() });
        }
        let c0 = critical_value(kernel)?;
        let reduced = reduce_kernel(kernel, c0);
        let paths = all_pairs_shortest(&reduced)?;
        let aubry = aubry_nodes(&paths, tolerances.aubry);
        let barrier = peierls_barrier(&paths, &aubry, tolerances.aubry)?;
        let classes = static_classes(&aubry, &barrier, tolerances.class);
        let lipschitz_kappa = lipschitz_kappa(&barrier, grid);
        Ok(Self { c0, dt: kernel.dt(), reduced, paths, aubry, classes, barrier, lipschitz_kappa, tolerances })
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.reduced.order()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Reduced kernel `K + c0 dt`.
    pub fn reduced(&self) -> &MinPlusMatrix {
        &self.reduced
    }

    pub fn paths(&self) -> &ShortestPathTable {
        &self.paths
    }

    pub fn aubry(&self) -> &[usize] {
        &self.aubry
    }

    pub fn classes(&self) -> &[StaticClass] {
        &self.classes
    }

    pub fn barrier(&self) -> &MinPlusMatrix {
        &self.barrier
    }

    pub fn lipschitz_kappa(&self) -> f64 {
        self.lipschitz_kappa
    }

    pub fn tolerances(&self) -> &AtlasTolerances {
        &self.tolerances
    }

    pub fn class(&self, index: usize) -> Result<&StaticClass> {
        self.classes.get(index).ok_or(Error::ClassOutOfRange { index, count: self.classes.len() })
    }

    pub fn class_of(&self, node: usize) -> Option<usize> {
        self.classes.iter().position(|c| c.contains(node))
    }

    /// Class containing the Aubry node closest to `node` in grid distance.
    pub fn class_nearest(&self, grid: &PeriodicGrid, node: usize) -> Option<usize> {
        self.aubry.iter().min_by_key(|&&z| grid.offset(node, z).unsigned_abs()).and_then(|&z| self.class_of(z))
    }

    /// `h[x_i][.]` for the basepoint `x_i` of class `index`.
    pub fn elementary_solution(&self, index: usize) -> Result<Vec<f64>> {
        let bp = self.class(index)?.basepoint;
        Ok(self.elementary_solution_at(bp))
    }

    /// `h[x0][.]` for an arbitrary source node.
    pub fn elementary_solution_at(&self, x0: usize) -> Vec<f64> {
        self.barrier.row(x0).to_vec()
    }

    /// `sup_x |u(x) - min_y (u(y) + K[y][x])|`.
    pub fn fixed_point_defect(&self, u: &[f64]) -> f64 {
        lax_oleinik_step(u, &self.reduced).iter().zip(u).map(|(t, v)| (t - v).abs()).fold(0.0, f64::max)
    }

    /// `sup_x (u(x) - min_y (u(y) + K[y][x]))^+`: zero for subsolutions.
    pub fn subsolution_excess(&self, u: &[f64]) -> (usize, f64) {
        lax_oleinik_step(u, &self.reduced)
            .iter()
            .zip(u)
            .map(|(t, v)| v - t)
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, e)| if e > best.1 { (i, e) } else { best })
    }

    /// Elementary solution of the class with the smallest oscillation,
    /// shifted so that its maximum and minimum are symmetric about zero.
    pub fn reference_subsolution(&self) -> Vec<f64> {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for i in 0..self.classes.len() {
            let u = self.elementary_solution(i).expect("class index in range");
            let (lo, hi) = min_max(&u);
            if best.as_ref().is_none_or(|(osc, _)| hi - lo < *osc) {
                best = Some((hi - lo, u));
            }
        }
        let (_, mut u) = best.expect("atlas has at least one class");
        let (lo, hi) = min_max(&u);
        let mid = 0.5 * (lo + hi);
        u.iter_mut().for_each(|v| *v -= mid);
        u
    }
}

fn min_max(u: &[f64]) -> (f64, f64) {
    u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_action_kernel, HamiltonianSpec, Potential};
    use crate::presets::Preset;

    fn flat(n: usize) -> (PeriodicGrid, ActionKernel) {
        let grid = PeriodicGrid::new(n).unwrap();
        let spec = HamiltonianSpec::example2(Potential::zero(), 1.0).unwrap();
        let kernel = build_action_kernel(&grid, &spec, grid.dx()).unwrap();
        (grid, kernel)
    }

    #[test]
    fn flat_potential_has_zero_critical_value_and_full_aubry_set() {
        let (grid, kernel) = flat(32);
        assert!(critical_value(&kernel).unwrap().abs() <= 1e-9);
        let atlas = WeakKamAtlas::build(&grid, &kernel, AtlasTolerances::for_grid(grid.dx(), kernel.dt())).unwrap();
        assert_eq!(atlas.aubry().len(), 32);
        assert_eq!(atlas.classes().len(), 1);
        for x in 0..32 {
            assert_eq!(atlas.barrier().get(x, x), 0.0);
        }
    }

    #[test]
    fn example1_structure() {
        let setup = Preset::Example1.setup(256, None).unwrap();
        let atlas = &setup.atlas;
        let g = &setup.grid;
        assert!(atlas.c0().abs() <= 0.05);
        for &z in atlas.aubry() {
            let d0 = g.distance(z, 0);
            let d1 = g.distance(z, 128);
            assert!(d0.min(d1) <= 2.0 * g.dx() + 1e-12, "stray Aubry node {z}");
        }
        assert!(atlas.aubry().contains(&0) && atlas.aubry().contains(&128));
        assert_eq!(atlas.classes().len(), 2);
        let bp: Vec<f64> = atlas.classes().iter().map(|c| g.position(c.basepoint)).collect();
        assert!(g.distance(atlas.classes()[0].basepoint, 0) <= 2.0 * g.dx());
        assert!((bp[1] - 0.5).abs() <= 2.0 * g.dx());

        let u = setup.spec.potential();
        let h0 = atlas.elementary_solution_at(0);
        let hx = atlas.elementary_solution_at(128);
        for x in 0..256 {
            assert!((h0[x] - u.value(g.position(x))).abs() <= 0.05);
            assert!(hx[x].abs() <= 0.05);
        }
    }

    #[test]
    fn example2_structure() {
        let setup = Preset::Example2.setup(256, None).unwrap();
        let atlas = &setup.atlas;
        let g = &setup.grid;
        assert!(atlas.c0().abs() <= 0.05);
        for &z in atlas.aubry() {
            assert!(g.distance(z, 0).min(g.distance(z, 128)) <= 2.0 * g.dx() + 1e-12);
        }
        assert_eq!(atlas.classes().len(), 2);
    }

    #[test]
    fn barrier_invariants_on_presets() {
        for preset in [Preset::Example1, Preset::Example2] {
            let setup = preset.setup(64, None).unwrap();
            let atlas = &setup.atlas;
            let h = atlas.barrier();
            let tol = atlas.tolerances();
            for x in 0..64 {
                assert!(h.get(x, x) >= -1e-9);
                assert_eq!(h.get(x, x) <= tol.aubry, atlas.aubry().contains(&x));
            }
            for x in (0..64).step_by(3) {
                for y in (0..64).step_by(5) {
                    for z in 0..64 {
                        assert!(h.get(x, y) <= h.get(x, z) + h.get(z, y) + 1e-9);
                    }
                }
            }
            for (i, ci) in atlas.classes().iter().enumerate() {
                for (j, cj) in atlas.classes().iter().enumerate() {
                    for &x in &ci.nodes {
                        for &y in &cj.nodes {
                            let dh = h.get(x, y) + h.get(y, x);
                            if i == j {
                                assert!(dh <= tol.class);
                            } else {
                                assert!(dh > tol.class);
                            }
                        }
                    }
                }
            }
            let covered: usize = atlas.classes().iter().map(|c| c.nodes.len()).sum();
            assert_eq!(covered, atlas.aubry().len());
        }
    }

    #[test]
    fn elementary_solutions_are_fixed_points() {
        let setup = Preset::Example1.setup(128, None).unwrap();
        let atlas = &setup.atlas;
        for i in 0..atlas.classes().len() {
            let u = atlas.elementary_solution(i).unwrap();
            assert_eq!(u[atlas.classes()[i].basepoint], 0.0);
            assert!(atlas.fixed_point_defect(&u) <= atlas.tolerances().fixed);
            // subsolution domination
            let h = atlas.barrier();
            for x in 0..128 {
                for y in 0..128 {
                    assert!(h.get(x, y) >= u[y] - u[x] - 1e-9);
                }
            }
        }
        assert!(matches!(atlas.elementary_solution(5), Err(Error::ClassOutOfRange { index: 5, count: 2 })));
    }

    #[test]
    fn basepoint_shift_invariance() {
        let setup = Preset::Example2.setup(128, None).unwrap();
        let atlas = &setup.atlas;
        let h = atlas.barrier();
        for class in atlas.classes() {
            for &a in &class.nodes {
                for &b in &class.nodes {
                    let (ua, ub) = (atlas.elementary_solution_at(a), atlas.elementary_solution_at(b));
                    let worst = (0..128).map(|x| (ua[x] - ub[x] - h.get(a, b)).abs()).fold(0.0, f64::max);
                    assert!(worst <= atlas.tolerances().class);
                }
            }
        }
    }

    #[test]
    fn single_aubry_node_gives_one_class() {
        let h = MinPlusMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let classes = static_classes(&[0], &h, 0.1);
        assert_eq!(classes, vec![StaticClass { basepoint: 0, nodes: vec![0] }]);
    }

    #[test]
    fn empty_aubry_set_is_an_error() {
        let (_, kernel) = flat(8);
        let paths = all_pairs_shortest(kernel.cost()).unwrap();
        assert!(matches!(peierls_barrier(&paths, &[], 1e-3), Err(Error::NoAubryNodes { .. })));
    }

    #[test]
    fn reference_subsolution_is_centered() {
        let setup = Preset::Example1.setup(64, None).unwrap();
        let v0 = setup.atlas.reference_subsolution();
        let (lo, hi) = min_max(&v0);
        assert!((lo + hi).abs() <= 1e-12);
        let (_, excess) = setup.atlas.subsolution_excess(&v0);
        assert!(excess <= 1e-12);
    }
}
