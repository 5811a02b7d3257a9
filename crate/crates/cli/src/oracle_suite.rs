//! Independent cross-checks of the tropical machinery, runnable from the
//! command line.

use weakkam_core::oracle::{brute_force_min_mean_cycle, power_liminf, random_integer_graph, seeded_rng};
use weakkam_core::tropical::cycle_cost;
use weakkam_core::{karp_min_mean_cycle, mp_multiply, MinPlusMatrix, Preset};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl OracleResult {
    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// Karp against exhaustive cycle enumeration on random integer graphs.
pub fn karp_vs_enumeration(seed: u64, per_size: usize) -> OracleResult {
    let mut rng = seeded_rng(seed);
    let (mut checked, mut mismatches) = (0, Vec::new());
    for n in 1..=6 {
        for trial in 0..per_size {
            let g = random_integer_graph(&mut rng, n, 0.5);
            match (karp_min_mean_cycle(&g), brute_force_min_mean_cycle(&g)) {
                (Ok(c), Some((mean, _))) => {
                    checked += 1;
                    let witness = cycle_cost(&g, &c.cycle) / c.cycle.len() as f64;
                    if c.mean != mean || witness != mean {
                        mismatches.push(format!("n={n} trial={trial}: {} vs {mean}", c.mean));
                    }
                }
                (Err(_), None) => {}
                (k, b) => mismatches.push(format!("n={n} trial={trial}: {k:?} vs {b:?}")),
            }
        }
    }
    OracleResult {
        name: "karp vs enumeration".into(),
        passed: mismatches.is_empty() && checked >= 100,
        detail: if mismatches.is_empty() {
            format!("{checked} cyclic graphs agree exactly")
        } else {
            mismatches.join("; ")
        },
    }
}

/// Routed barrier against the stabilized liminf of kernel powers.
pub fn barrier_vs_powers(preset: Preset) -> OracleResult {
    let n = 16;
    let outcome = preset.setup(n, Some(1.0 / 48.0)).map(|setup| {
        let (oracle, m) = power_liminf(setup.atlas.reduced(), n, 1e-13, 1 << 14);
        (setup.atlas.barrier().max_abs_diff(&oracle), m)
    });
    match outcome {
        Ok((gap, m)) => OracleResult {
            name: format!("{preset} barrier vs powers"),
            passed: gap <= 1e-6,
            detail: format!("max gap {gap:e}, window start {m}"),
        },
        Err(e) => OracleResult { name: format!("{preset} barrier vs powers"), passed: false, detail: e.to_string() },
    }
}

/// Identity and associativity of the min-plus product on random matrices.
pub fn semiring_laws(seed: u64, trials: usize) -> OracleResult {
    let mut rng = seeded_rng(seed);
    let mut failures = 0;
    for _ in 0..trials {
        let a = random_integer_graph(&mut rng, 5, 0.7);
        let b = random_integer_graph(&mut rng, 5, 0.7);
        let c = random_integer_graph(&mut rng, 5, 0.7);
        let id = MinPlusMatrix::identity(5);
        let ok = mp_multiply(&a, &id) == a
            && mp_multiply(&id, &a) == a
            && mp_multiply(&mp_multiply(&a, &b), &c) == mp_multiply(&a, &mp_multiply(&b, &c));
        if !ok {
            failures += 1;
        }
    }
    OracleResult {
        name: "min-plus laws".into(),
        passed: failures == 0,
        detail: format!("{failures} failures in {trials} triples"),
    }
}

pub fn run_all(seed: u64) -> Vec<OracleResult> {
    vec![
        karp_vs_enumeration(seed, 60),
        barrier_vs_powers(Preset::Example1),
        barrier_vs_powers(Preset::Example2),
        semiring_laws(seed.wrapping_add(1), 50),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_for_several_seeds() {
        for seed in [0, 1, 2024] {
            assert!(karp_vs_enumeration(seed, 60).passed);
            assert!(semiring_laws(seed, 20).passed);
        }
    }
}
