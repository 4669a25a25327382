mod common;

use std::cell::Cell;

use common::{random_batch, separable_set};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tabdisc_model::bayes::{
    averaged_probabilities, incremental_loop, init_variational, predict_test, sample_weights, train_increment,
    BayesConfig, GaussianPrior, VariationalParams,
};
use tabdisc_model::relevance::{
    forward, precision_at_1, rank_instance, sigmoid, simple_incremental, ParamShape, QuestionBatch, RelevanceConfig,
};

fn rcfg() -> RelevanceConfig {
    RelevanceConfig {
        proj_dim: 8,
        learning_rate: 0.05,
        seed: 3,
        ..RelevanceConfig::new(6)
    }
}

#[test]
fn monte_carlo_moments() {
    let v = init_variational(ParamShape::new(2, 2), 8);
    let sigma = v.sigma();
    let n = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut sum = vec![0.0; v.mu.len()];
    let mut sq = vec![0.0; v.mu.len()];
    for _ in 0..n {
        let (w, _) = sample_weights(&v, &mut rng);
        for (i, x) in w.values.iter().enumerate() {
            sum[i] += x;
            sq[i] += x * x;
        }
    }
    for i in 0..v.mu.len() {
        let mean = sum[i] / n as f64;
        let var = sq[i] / n as f64 - mean * mean;
        assert!((mean - v.mu[i]).abs() <= 3.0 * sigma[i] / (n as f64).sqrt(), "mean {i}");
        assert!((var / (sigma[i] * sigma[i]) - 1.0).abs() <= 0.1, "variance {i}");
    }
}

#[test]
fn zero_learning_rate_returns_the_prior() {
    let shape = rcfg().shape();
    let prior = GaussianPrior::from_posterior(&init_variational(shape, 4));
    let data = separable_set(6, 5, 1);
    let refs: Vec<&QuestionBatch> = data.iter().collect();
    let cfg = RelevanceConfig { learning_rate: 0.0, ..rcfg() };
    let out = train_increment(
        &prior,
        VariationalParams::from_prior(&prior),
        &refs,
        &cfg,
        &BayesConfig::default(),
        1,
        |p| precision_at_1(p, &data),
    )
    .unwrap();
    let back = GaussianPrior::from_posterior(&out.snapshot.params);
    assert_eq!(back.mean, prior.mean);
    for (a, b) in back.std.iter().zip(&prior.std) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn increment_presents_only_its_dataset() {
    let shape = rcfg().shape();
    let data = separable_set(6, 7, 2);
    let refs: Vec<&QuestionBatch> = data.iter().collect();
    let run = || {
        train_increment(
            &GaussianPrior::standard(shape),
            init_variational(shape, 1),
            &refs,
            &rcfg(),
            &BayesConfig::default(),
            5,
            |p| precision_at_1(p, &data),
        )
        .unwrap()
    };
    let out = run();
    assert_eq!(out.presentations, 7 * out.epochs as u64);
    assert_eq!(out, run());
}

#[test]
fn separable_posterior_mean_is_perfect_on_validation() {
    let shape = rcfg().shape();
    let train = separable_set(6, 30, 3);
    let validation = separable_set(6, 10, 4);
    let refs: Vec<&QuestionBatch> = train.iter().collect();
    let cfg = RelevanceConfig { epoch_patience: 20, ..rcfg() };
    let out = train_increment(
        &GaussianPrior::standard(shape),
        init_variational(shape, 2),
        &refs,
        &cfg,
        &BayesConfig::default(),
        9,
        |p| precision_at_1(p, &validation),
    )
    .unwrap();
    assert_eq!(out.snapshot.eval, 1.0);
    assert_eq!(precision_at_1(&out.snapshot.params.mean_params(), &validation), 1.0);
}

/// Evaluation stub: every training run sees the same score each epoch (so it
/// lasts exactly 3 epochs with patience 1) and run `t` scores `bests[t]`.
fn stub(bests: &[f64]) -> impl FnMut(&tabdisc_model::relevance::ModelParams) -> f64 + '_ {
    let calls = Cell::new(0);
    move |_| {
        let c = calls.get();
        calls.set(c + 1);
        bests[c / 3]
    }
}

#[test]
fn dataset_patience_stops_after_two_misses() {
    let datasets: Vec<Vec<QuestionBatch>> = (0..6).map(|i| separable_set(6, 3, 20 + i)).collect();
    let out = incremental_loop(&datasets, &rcfg(), &BayesConfig::default(), stub(&[0.3, 0.5, 0.5, 0.4, 0.9, 0.9])).unwrap();
    assert_eq!(out.cost.steps.len(), 4);
    assert_eq!(out.best.datasets, vec![0, 1]);
    assert_eq!(out.best.eval, 0.5);
    let improved: Vec<bool> = out.cost.steps.iter().map(|s| s.improved).collect();
    assert_eq!(improved, vec![true, true, false, false]);
}

#[test]
fn discarded_dataset_is_not_folded_into_the_chain() {
    let datasets: Vec<Vec<QuestionBatch>> = (0..4).map(|i| separable_set(6, 3, 30 + i)).collect();
    let out = incremental_loop(&datasets, &rcfg(), &BayesConfig::default(), stub(&[0.3, 0.2, 0.6, 0.1])).unwrap();
    assert_eq!(out.best.datasets, vec![0, 2]);
}

#[test]
fn single_dataset_stream() {
    let datasets = vec![separable_set(6, 4, 40)];
    let out = incremental_loop(&datasets, &rcfg(), &BayesConfig::default(), stub(&[0.7])).unwrap();
    assert_eq!(out.best.datasets, vec![0]);
    assert_eq!(out.cost.steps.len(), 1);
}

#[test]
fn no_samples_means_posterior_mean_prediction() {
    let v = init_variational(ParamShape::new(6, 4), 5);
    let batch = random_batch(6, 7, 5, false);
    let inst = &batch.instances[0];
    let mean = rank_instance(&v.mean_params(), &batch.features, inst);
    let pred = predict_test(&v, &batch.features, inst, 0, 1);
    let ids = |r: &[tabdisc_model::relevance::RankedTable]| r.iter().map(|t| t.table_id.clone()).collect::<Vec<_>>();
    assert_eq!(ids(&mean), ids(&pred));
    let out = forward(&v.mean_params(), &batch.features, inst, 0.0);
    let probs = averaged_probabilities(&v, &batch.features, inst, 0, 1);
    for (p, s) in probs.iter().flatten().zip(out.scores.iter().flatten()) {
        assert_eq!(*p, sigmoid(*s));
    }
}

#[test]
fn degenerate_posterior_averages_to_the_mean() {
    let mut v = init_variational(ParamShape::new(6, 4), 6);
    v.rho.iter_mut().for_each(|r| *r = -40.0);
    let batch = random_batch(6, 7, 6, false);
    let inst = &batch.instances[0];
    let mean = averaged_probabilities(&v, &batch.features, inst, 0, 1);
    let avg = averaged_probabilities(&v, &batch.features, inst, 6, 1);
    for (a, b) in mean.iter().flatten().zip(avg.iter().flatten()) {
        assert!((a - b).abs() <= 1e-6);
    }
}

#[test]
fn test_prediction_is_seeded() {
    let v = init_variational(ParamShape::new(6, 4), 7);
    let batch = random_batch(6, 9, 7, false);
    let inst = &batch.instances[0];
    assert_eq!(
        predict_test(&v, &batch.features, inst, 6, 42),
        predict_test(&v, &batch.features, inst, 6, 42)
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn chained_training_presents_fewer_questions(n_datasets in 2usize..5, size in 1usize..6) {
        let datasets: Vec<Vec<QuestionBatch>> = (0..n_datasets).map(|i| separable_set(6, size, i as u64)).collect();
        let bests: Vec<f64> = (0..n_datasets).map(|t| t as f64).collect();
        let bayes = incremental_loop(&datasets, &rcfg(), &BayesConfig::default(), stub(&bests)).unwrap();
        let simple = simple_incremental(&datasets, &rcfg(), 1, stub(&bests)).unwrap();
        let epochs = |c: &tabdisc_model::stopping::CostReport| c.steps.iter().map(|s| s.epochs).collect::<Vec<_>>();
        prop_assert_eq!(epochs(&bayes.cost), epochs(&simple.cost));
        prop_assert!(bayes.cost.total_presentations() < simple.cost.total_presentations());
    }
}
