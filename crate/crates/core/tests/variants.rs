//! Monte-Carlo direction check for pooled strategies in the low-sample regime.

use featrans::bankio::synth_generate;
use featrans::protocol::{compare_strategies, Method};
use featrans::{RunConfig, StrategyKind, StrategySpec, SyntheticSpec};

#[test]
fn pooled_strategies_beat_single_when_samples_are_few() {
    let methods: Vec<(String, Method)> = ["kth", "m2", "m3", "single"]
        .iter()
        .map(|m| (m.to_string(), m.parse().unwrap()))
        .collect();
    let mut change = [0.0f64; 4];
    let seeds = 10;
    for seed in 0..seeds {
        let bank = synth_generate(&SyntheticSpec {
            num_classes: 20,
            dim: 32,
            train_per_class: 20,
            test_per_class: 50,
            centroid_scale: 0.5,
            noise_sigma: 1.0,
            anisotropy: None,
            class_variance_spread: 2.0,
            seed,
        })
        .unwrap();
        let base = RunConfig::new(2, 10, StrategySpec::new(StrategyKind::Kth, 10), seed);
        let cmp = compare_strategies(&bank, &base, &methods, "kth", &[2]).unwrap();
        for (acc, row) in change.iter_mut().zip(&cmp.rows) {
            *acc += row.change_top1 / seeds as f64;
        }
    }
    let [_, m2, m3, single] = change;
    println!("mean change vs kth1: m2 {m2:.3}, m3 {m3:.3}, single {single:.3}");
    assert!(m2 >= single, "m2 {m2} < single {single}");
    assert!(m3 >= single, "m3 {m3} < single {single}");
}
