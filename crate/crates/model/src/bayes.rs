//! Mean-field Gaussian posteriors over the relevance parameters.
//!
//! Each scalar `w` has a variational mean `mu` and `rho` with
//! `sigma = ln(1 + e^rho)`; weights are drawn as `mu + sigma * eps`. Training
//! minimizes `kl_weight * (log q(w) - log prior(w)) + data loss` with one noise
//! draw per step, and the posterior of one dataset becomes the prior of the
//! next.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::relevance::{
    batch_loss, loss_and_grad, rank_tables, sigmoid, softplus, Instance, ModelParams, ParamShape,
    QuestionBatch, RankedTable, RelevanceConfig,
};
use crate::stopping::{CostReport, EarlyStop, StepReport};
use crate::{Error, Result};

/// Inverse of [`softplus`] for `sigma > 0`.
pub fn softplus_inv(sigma: f64) -> f64 {
    if sigma < 20.0 {
        sigma.exp_m1().ln()
    } else {
        sigma + (-(-sigma).exp_m1()).ln()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariationalParams {
    pub shape: ParamShape,
    pub mu: Vec<f64>,
    pub rho: Vec<f64>,
}

impl VariationalParams {
    pub fn sigma(&self) -> Vec<f64> {
        self.rho.iter().map(|&r| softplus(r)).collect()
    }

    /// Deterministic parameters at the posterior mean.
    pub fn mean_params(&self) -> ModelParams {
        ModelParams {
            shape: self.shape,
            values: self.mu.clone(),
        }
    }

    pub fn from_prior(prior: &GaussianPrior) -> VariationalParams {
        VariationalParams {
            shape: prior.shape,
            mu: prior.mean.clone(),
            rho: prior.std.iter().map(|&s| softplus_inv(s)).collect(),
        }
    }

    /// Weights for a given noise vector.
    pub fn weights(&self, eps: &[f64]) -> ModelParams {
        let values = self
            .mu
            .iter()
            .zip(&self.rho)
            .zip(eps)
            .map(|((m, r), e)| m + softplus(*r) * e)
            .collect();
        ModelParams {
            shape: self.shape,
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPrior {
    pub shape: ParamShape,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl GaussianPrior {
    /// N(0, 1) for every scalar.
    pub fn standard(shape: ParamShape) -> GaussianPrior {
        GaussianPrior {
            shape,
            mean: vec![0.0; shape.len()],
            std: vec![1.0; shape.len()],
        }
    }

    pub fn from_posterior(v: &VariationalParams) -> GaussianPrior {
        GaussianPrior {
            shape: v.shape,
            mean: v.mu.clone(),
            std: v.sigma(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSnapshot {
    pub params: VariationalParams,
    /// Datasets folded into this posterior, in order.
    pub datasets: Vec<usize>,
    pub eval: f64,
}

impl PosteriorSnapshot {
    pub fn to_prior(&self) -> GaussianPrior {
        GaussianPrior::from_posterior(&self.params)
    }
}

/// Scaling of the complexity term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlWeight {
    /// One over the number of steps (questions) per epoch.
    PerBatch,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesConfig {
    #[serde(default = "default_test_samples")]
    pub n_test_samples: usize,
    #[serde(default = "default_kl_weight")]
    pub kl_weight: KlWeight,
    #[serde(default = "default_patience")]
    pub epoch_patience: usize,
    #[serde(default = "default_patience")]
    pub dataset_patience: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_test_samples() -> usize {
    6
}
fn default_kl_weight() -> KlWeight {
    KlWeight::PerBatch
}
fn default_patience() -> usize {
    1
}

impl Default for BayesConfig {
    fn default() -> Self {
        BayesConfig {
            n_test_samples: default_test_samples(),
            kl_weight: default_kl_weight(),
            epoch_patience: default_patience(),
            dataset_patience: default_patience(),
            seed: 0,
        }
    }
}

/// `mu ~ U(-1, 1)`, `rho ~ U(-3, 0)`.
pub fn init_variational(shape: ParamShape, seed: u64) -> VariationalParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.len();
    let mu = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let rho = (0..n).map(|_| rng.random_range(-3.0..0.0)).collect();
    VariationalParams { shape, mu, rho }
}

/// Weights drawn with fresh standard normal noise, returned with the noise.
pub fn sample_weights(v: &VariationalParams, rng: &mut impl Rng) -> (ModelParams, Vec<f64>) {
    let eps: Vec<f64> = (0..v.mu.len()).map(|_| rng.sample(StandardNormal)).collect();
    (v.weights(&eps), eps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Elbo {
    pub loss: f64,
    pub complexity: f64,
    pub data: f64,
    pub d_mu: Vec<f64>,
    pub d_rho: Vec<f64>,
}

/// Complexity term `log q(w) - log prior(w)` at `w = mu + sigma * eps`.
fn complexity(v: &VariationalParams, prior: &GaussianPrior, w: &[f64], eps: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..w.len() {
        let sigma = softplus(v.rho[i]);
        let z = (w[i] - prior.mean[i]) / prior.std[i];
        total += -sigma.ln() - 0.5 * eps[i] * eps[i] + prior.std[i].ln() + 0.5 * z * z;
    }
    total
}

/// Loss and reparameterized gradients for a fixed noise vector.
pub fn elbo_loss(
    v: &VariationalParams,
    prior: &GaussianPrior,
    batch: &QuestionBatch,
    lambda_div: f64,
    kl_weight: f64,
    eps: &[f64],
) -> Elbo {
    let w = v.weights(eps);
    let (data, g) = loss_and_grad(&w.values, v.shape, batch, lambda_div);
    let complexity = complexity(v, prior, &w.values, eps);
    let n = w.values.len();
    let mut d_mu = Vec::with_capacity(n);
    let mut d_rho = Vec::with_capacity(n);
    for i in 0..n {
        let sigma = softplus(v.rho[i]);
        let dw = g[i] + kl_weight * (w.values[i] - prior.mean[i]) / (prior.std[i] * prior.std[i]);
        d_mu.push(dw);
        d_rho.push(sigmoid(v.rho[i]) * (eps[i] * dw - kl_weight / sigma));
    }
    Elbo {
        loss: kl_weight * complexity + data,
        complexity,
        data,
        d_mu,
        d_rho,
    }
}

/// Loss value only, for finite-difference checks.
pub fn elbo_value(
    v: &VariationalParams,
    prior: &GaussianPrior,
    batch: &QuestionBatch,
    lambda_div: f64,
    kl_weight: f64,
    eps: &[f64],
) -> f64 {
    let w = v.weights(eps);
    kl_weight * complexity(v, prior, &w.values, eps) + batch_loss(&w.values, v.shape, batch, lambda_div)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncrementOutcome {
    pub snapshot: PosteriorSnapshot,
    pub epochs: usize,
    pub presentations: u64,
}

/// Trains the variational parameters on one dataset against `prior`,
/// starting from `init`. Validation uses the posterior mean.
pub fn train_increment(
    prior: &GaussianPrior,
    init: VariationalParams,
    train: &[&QuestionBatch],
    rcfg: &RelevanceConfig,
    bcfg: &BayesConfig,
    seed: u64,
    mut eval: impl FnMut(&ModelParams) -> f64,
) -> Result<IncrementOutcome> {
    rcfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if init.shape != rcfg.shape() || prior.shape != rcfg.shape() {
        return Err(Error::Shape("prior or init shape differs from config".into()));
    }
    for b in train {
        b.validate(rcfg.feature_dim)?;
    }
    let kl_weight = match bcfg.kl_weight {
        KlWeight::PerBatch => 1.0 / train.len() as f64,
        KlWeight::Fixed(w) => w,
    };
    let lr = rcfg.learning_rate;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = init;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut stop = EarlyStop::new(bcfg.epoch_patience);
    let mut best = v.clone();
    let mut epochs = 0;
    let mut presentations = 0u64;
    for _ in 0..rcfg.max_epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let eps: Vec<f64> = (0..v.mu.len()).map(|_| rng.sample(StandardNormal)).collect();
            let e = elbo_loss(&v, prior, train[i], rcfg.lambda_div, kl_weight, &eps);
            for (m, d) in v.mu.iter_mut().zip(&e.d_mu) {
                *m -= lr * d;
            }
            for (r, d) in v.rho.iter_mut().zip(&e.d_rho) {
                *r -= lr * d;
            }
            presentations += 1;
        }
        epochs += 1;
        let obs = stop.observe(eval(&v.mean_params()));
        if obs.improved {
            best = v.clone();
        }
        if obs.stop {
            break;
        }
    }
    Ok(IncrementOutcome {
        snapshot: PosteriorSnapshot {
            params: best,
            datasets: Vec::new(),
            eval: stop.best().unwrap_or(f64::NEG_INFINITY),
        },
        epochs,
        presentations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesOutcome {
    pub best: PosteriorSnapshot,
    pub cost: CostReport,
}

/// Chains [`train_increment`] over the dataset stream. The first step starts
/// from [`init_variational`] under a standard normal prior; later steps use
/// the best posterior so far as both prior and starting point. A dataset that
/// does not strictly improve evaluation is discarded, and `dataset_patience`
/// + 1 consecutive such datasets end the loop.
pub fn incremental_loop(
    datasets: &[Vec<QuestionBatch>],
    rcfg: &RelevanceConfig,
    bcfg: &BayesConfig,
    mut eval: impl FnMut(&ModelParams) -> f64,
) -> Result<BayesOutcome> {
    if datasets.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let shape = rcfg.shape();
    let mut stop = EarlyStop::new(bcfg.dataset_patience);
    let mut best: Option<PosteriorSnapshot> = None;
    let mut cost = CostReport::default();
    for (t, dataset) in datasets.iter().enumerate() {
        let started = Instant::now();
        let (prior, init, mut folded) = match &best {
            Some(b) => {
                let prior = b.to_prior();
                let init = VariationalParams::from_prior(&prior);
                (prior, init, b.datasets.clone())
            }
            None => (
                GaussianPrior::standard(shape),
                init_variational(shape, bcfg.seed),
                Vec::new(),
            ),
        };
        let train: Vec<&QuestionBatch> = dataset.iter().collect();
        let step_seed = bcfg.seed.wrapping_add(1 + t as u64);
        let out = train_increment(&prior, init, &train, rcfg, bcfg, step_seed, &mut eval)?;
        let obs = stop.observe(out.snapshot.eval);
        folded.push(t);
        cost.push(StepReport {
            dataset: t,
            trained_on: vec![t],
            eval: out.snapshot.eval,
            improved: obs.improved,
            epochs: out.epochs,
            presentations: out.presentations,
            seconds: started.elapsed().as_secs_f64(),
        });
        if obs.improved {
            best = Some(PosteriorSnapshot {
                datasets: folded,
                ..out.snapshot
            });
        }
        if obs.stop {
            break;
        }
    }
    Ok(BayesOutcome {
        best: best.expect("first dataset always improves"),
        cost,
    })
}

/// Per-triple probabilities averaged over the posterior mean and
/// `n_samples` sampled weight sets, grouped like `inst.groups`.
pub fn averaged_probabilities(
    v: &VariationalParams,
    features: &[Vec<f32>],
    inst: &Instance,
    n_samples: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum: Vec<Vec<f64>> = inst.groups.iter().map(|g| vec![0.0; g.rows.len()]).collect();
    let mut add = |params: &ModelParams| {
        let out = crate::relevance::forward(params, features, inst, 0.0);
        for (acc, scores) in sum.iter_mut().zip(&out.scores) {
            for (a, s) in acc.iter_mut().zip(scores) {
                *a += sigmoid(*s);
            }
        }
    };
    add(&v.mean_params());
    for _ in 0..n_samples {
        let (w, _) = sample_weights(v, &mut rng);
        add(&w);
    }
    let versions = (n_samples + 1) as f64;
    for acc in &mut sum {
        for a in acc.iter_mut() {
            *a /= versions;
        }
    }
    sum
}

/// Table ranking from averaged probabilities.
pub fn predict_test(
    v: &VariationalParams,
    features: &[Vec<f32>],
    inst: &Instance,
    n_samples: usize,
    seed: u64,
) -> Vec<RankedTable> {
    let probs = averaged_probabilities(v, features, inst, n_samples, seed);
    rank_tables(
        inst.groups
            .iter()
            .zip(&probs)
            .flat_map(|(g, p)| p.iter().map(move |&x| (g.table_id.as_str(), x))),
    )
}
