use weakkam_core::oracle::{brute_force_min_mean_cycle, power_liminf, random_integer_graph, seeded_rng};
use weakkam_core::tropical::cycle_cost;
use weakkam_core::{karp_min_mean_cycle, mp_multiply, MinPlusMatrix, Preset};

#[test]
fn karp_agrees_with_enumeration() {
    let mut rng = seeded_rng(2024);
    let mut checked = 0;
    for n in 1..=6 {
        for _ in 0..60 {
            let g = random_integer_graph(&mut rng, n, 0.5);
            match (karp_min_mean_cycle(&g), brute_force_min_mean_cycle(&g)) {
                (Ok(c), Some((mean, _))) => {
                    assert_eq!(c.mean, mean);
                    assert_eq!(cycle_cost(&g, &c.cycle) / c.cycle.len() as f64, mean);
                    checked += 1;
                }
                (Err(_), None) => {}
                (k, b) => panic!("disagreement: {k:?} vs {b:?}"),
            }
        }
    }
    assert!(checked >= 100);
}

#[test]
fn barrier_matches_power_window() {
    for preset in [Preset::Example1, Preset::Example2] {
        // dt = dx makes the example1 stencil wider than half the circle at this size
        let setup = preset.setup(16, Some(1.0 / 48.0)).unwrap();
        let (oracle, _) = power_liminf(setup.atlas.reduced(), 16, 1e-13, 1 << 14);
        let gap = setup.atlas.barrier().max_abs_diff(&oracle);
        assert!(gap <= 1e-6, "{preset}: {gap}");
    }
}

#[test]
fn unit_and_associativity_are_exact() {
    let mut rng = seeded_rng(7);
    for _ in 0..50 {
        let a = random_integer_graph(&mut rng, 5, 0.7);
        let b = random_integer_graph(&mut rng, 5, 0.7);
        let c = random_integer_graph(&mut rng, 5, 0.7);
        let id = MinPlusMatrix::identity(5);
        assert_eq!(mp_multiply(&a, &id), a);
        assert_eq!(mp_multiply(&id, &a), a);
        assert_eq!(mp_multiply(&mp_multiply(&a, &b), &c), mp_multiply(&a, &mp_multiply(&b, &c)));
    }
}
