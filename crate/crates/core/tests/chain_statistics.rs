use proptest::prelude::*;
use seqir_core::reference;
use seqir_core::regime_chain::{
    occupancy, sample_path_discretized, sample_path_exact, stationary_distribution,
    transition_matrix, Generator,
};
use seqir_core::seeds::{stream, CHAIN_STREAM};

#[test]
fn exact_sampler_occupancy_converges() {
    let g = reference::generator();
    let pi = stationary_distribution(&g).unwrap();
    for seed in [1u64, 2, 3] {
        let mut rng = stream(seed, CHAIN_STREAM);
        let path = sample_path_exact(&g, reference::INITIAL_REGIME, 1e4, &mut rng).unwrap();
        let l1 = pi.l1_distance(&occupancy(&path));
        assert!(l1 < 0.02, "seed {seed}: L1 {l1}");
    }
}

#[test]
fn discretized_sampler_occupancy_converges() {
    let g = reference::generator();
    let pi = stationary_distribution(&g).unwrap();
    // occupancy pooled over three seeds
    let mut pooled = [0.0; 4];
    for seed in [11u64, 12, 13] {
        let mut rng = stream(seed, CHAIN_STREAM);
        let path = sample_path_discretized(&g, 0, 100.0, 1e-4, &mut rng).unwrap();
        for (acc, v) in pooled.iter_mut().zip(occupancy(&path)) {
            *acc += v / 3.0;
        }
    }
    let l1 = pi.l1_distance(&pooled);
    assert!(l1 < 0.05, "L1 {l1}");
}

#[test]
fn discretized_sampler_jump_rate() {
    // mean number of jumps per unit time is sum_k pi_k q_k
    let g = reference::generator();
    let pi = stationary_distribution(&g).unwrap();
    let rate: f64 = (0..4).map(|k| pi.get(k) * g.exit_rate(k)).sum();
    let mut rng = stream(5, CHAIN_STREAM);
    let path = sample_path_discretized(&g, 0, 200.0, 1e-4, &mut rng).unwrap();
    let observed = path.n_jumps() as f64 / 200.0;
    assert!((observed / rate - 1.0).abs() < 0.05, "{observed} vs {rate}");
}

#[test]
fn stationary_law_is_invariant_under_p() {
    let g = reference::generator();
    let pi = stationary_distribution(&g).unwrap();
    for dt in [1e-4, 0.01, 0.5] {
        let p = transition_matrix(&g, dt).unwrap();
        for j in 0..4 {
            let v: f64 = (0..4).map(|i| pi.get(i) * p[(i, j)]).sum();
            assert!((v - pi.get(j)).abs() < 1e-13);
        }
    }
}

#[test]
fn printed_transition_matrix() {
    let p = transition_matrix(&reference::generator(), reference::TRANSITION_PRINTED_DT).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            assert!((p[(i, j)] - reference::TRANSITION_PRINTED[i][j]).abs() <= 5e-5);
        }
    }
}

fn generator_strategy() -> impl Strategy<Value = Generator> {
    (2usize..=5)
        .prop_flat_map(|n| prop::collection::vec(0.05f64..20.0, n * n).prop_map(move |v| (n, v)))
        .prop_map(|(n, v)| {
            let mut rows: Vec<Vec<f64>> = (0..n).map(|i| v[i * n..(i + 1) * n].to_vec()).collect();
            for (i, row) in rows.iter_mut().enumerate() {
                row[i] = 0.0;
                row[i] = -row.iter().sum::<f64>();
            }
            Generator::new(&rows).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn semigroup_property(g in generator_strategy(), s in 0.0f64..0.3, t in 0.0f64..0.3) {
        let ps = transition_matrix(&g, s).unwrap();
        let pt = transition_matrix(&g, t).unwrap();
        let pst = transition_matrix(&g, s + t).unwrap();
        let prod = &ps * &pt;
        prop_assert!((prod - &pst).abs().max() < 1e-12);
    }

    #[test]
    fn transition_rows_are_stochastic(g in generator_strategy(), t in 0.0f64..3.0) {
        let p = transition_matrix(&g, t).unwrap();
        for i in 0..g.n_states() {
            let row_sum: f64 = p.row(i).iter().sum();
            prop_assert!((row_sum - 1.0).abs() < 1e-12);
            prop_assert!(p.row(i).iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn stationary_is_distribution(g in generator_strategy()) {
        let pi = stationary_distribution(&g).unwrap();
        prop_assert!((pi.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(pi.probabilities().iter().all(|&v| v > 0.0));
        prop_assert!(pi.residual(&g) < 1e-10);
    }

    #[test]
    fn occupancy_sums_to_one(seed in any::<u64>(), r0 in 0usize..4) {
        let g = reference::generator();
        let mut rng = stream(seed, CHAIN_STREAM);
        let path = sample_path_exact(&g, r0, 5.0, &mut rng).unwrap();
        let occ = occupancy(&path);
        prop_assert!((occ.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert_eq!(path.regime_at(0.0), r0);
    }
}
