//! Features, max-pooling forward pass, analytic gradients, table ranking and
//! the maximum-likelihood trainer with its accumulate-and-retrain loop.
//!
//! Parameters live in one flat `f64` vector laid out as
//! `W_t | b_t | W_u | b_u | w_s | b_s`, where `W_t` and `W_u` are row-major
//! `proj_dim × feature_dim` and `w_s` scores `[REP_u ; REP_T]`.

use std::ops::Range;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::stopping::{CostReport, EarlyStop, StepReport};
use crate::{Error, Result};

/// `[q ; p ; q⊙p ; |q−p|]`.
pub fn extract_features(q: &[f32], p: &[f32]) -> Result<Vec<f32>> {
    if q.len() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: q.len(),
            actual: p.len(),
        });
    }
    let mut out = Vec::with_capacity(4 * q.len());
    out.extend_from_slice(q);
    out.extend_from_slice(p);
    out.extend(q.iter().zip(p).map(|(a, b)| a * b));
    out.extend(q.iter().zip(p).map(|(a, b)| (a - b).abs()));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamShape {
    pub feature_dim: usize,
    pub proj_dim: usize,
}

impl ParamShape {
    pub fn new(feature_dim: usize, proj_dim: usize) -> ParamShape {
        ParamShape {
            feature_dim,
            proj_dim,
        }
    }

    fn matrix(&self) -> usize {
        self.feature_dim * self.proj_dim
    }

    pub fn w_t(&self) -> Range<usize> {
        0..self.matrix()
    }

    pub fn b_t(&self) -> Range<usize> {
        let s = self.matrix();
        s..s + self.proj_dim
    }

    pub fn w_u(&self) -> Range<usize> {
        let s = self.b_t().end;
        s..s + self.matrix()
    }

    pub fn b_u(&self) -> Range<usize> {
        let s = self.w_u().end;
        s..s + self.proj_dim
    }

    pub fn w_s(&self) -> Range<usize> {
        let s = self.b_u().end;
        s..s + 2 * self.proj_dim
    }

    pub fn b_s(&self) -> usize {
        self.w_s().end
    }

    pub fn len(&self) -> usize {
        self.b_s() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Fan-in of the layer owning parameter `i`.
    pub fn fan_in(&self, i: usize) -> usize {
        if i < self.w_s().start {
            self.feature_dim
        } else {
            2 * self.proj_dim
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub shape: ParamShape,
    pub values: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(shape: ParamShape) -> ModelParams {
        ModelParams {
            shape,
            values: vec![0.0; shape.len()],
        }
    }

    pub fn from_values(shape: ParamShape, values: Vec<f64>) -> Result<ModelParams> {
        if values.len() != shape.len() {
            return Err(Error::DimensionMismatch {
                expected: shape.len(),
                actual: values.len(),
            });
        }
        Ok(ModelParams { shape, values })
    }

    /// Uniform in `±1/√fan_in` per layer.
    pub fn init_uniform(shape: ParamShape, seed: u64) -> ModelParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..shape.len())
            .map(|i| {
                let bound = 1.0 / (shape.fan_in(i) as f64).sqrt();
                rng.random_range(-bound..bound)
            })
            .collect();
        ModelParams { shape, values }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceConfig {
    pub feature_dim: usize,
    #[serde(default = "default_proj_dim")]
    pub proj_dim: usize,
    #[serde(default = "default_lambda_div")]
    pub lambda_div: f64,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_patience")]
    pub epoch_patience: usize,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_proj_dim() -> usize {
    128
}
fn default_lambda_div() -> f64 {
    0.1
}
fn default_learning_rate() -> f64 {
    1e-3
}
fn default_patience() -> usize {
    1
}
fn default_max_epochs() -> usize {
    50
}

impl RelevanceConfig {
    pub fn new(feature_dim: usize) -> RelevanceConfig {
        RelevanceConfig {
            feature_dim,
            proj_dim: default_proj_dim(),
            lambda_div: default_lambda_div(),
            learning_rate: default_learning_rate(),
            epoch_patience: default_patience(),
            max_epochs: default_max_epochs(),
            seed: 0,
        }
    }

    pub fn shape(&self) -> ParamShape {
        ParamShape::new(self.feature_dim, self.proj_dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 || self.proj_dim == 0 {
            return Err(Error::Config("dimensions must be positive".into()));
        }
        if !(self.lambda_div >= 0.0) || !(self.learning_rate >= 0.0) || self.max_epochs == 0 {
            return Err(Error::Config(format!("invalid relevance config {self:?}")));
        }
        Ok(())
    }
}

/// Triples of one table, as row indices into the question's feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub table_id: String,
    pub rows: Vec<usize>,
    pub label: bool,
}

/// One ranking problem over the groups of a question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub groups: Vec<Group>,
}

/// A question's feature rows and the instances built on them (the original
/// example first, then any augmented variants). One training step consumes
/// one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct QuestionBatch {
    pub question_id: String,
    pub features: Vec<Vec<f32>>,
    pub instances: Vec<Instance>,
}

impl QuestionBatch {
    pub fn validate(&self, feature_dim: usize) -> Result<()> {
        if let Some(row) = self.features.iter().find(|r| r.len() != feature_dim) {
            return Err(Error::DimensionMismatch {
                expected: feature_dim,
                actual: row.len(),
            });
        }
        if self.instances.is_empty() {
            return Err(Error::Shape(format!("{}: no instances", self.question_id)));
        }
        for inst in &self.instances {
            if inst.groups.is_empty() || inst.groups.iter().any(|g| g.rows.is_empty()) {
                return Err(Error::Shape(format!("{}: empty group", self.question_id)));
            }
            if inst
                .groups
                .iter()
                .flat_map(|g| &g.rows)
                .any(|&r| r >= self.features.len())
            {
                return Err(Error::Shape(format!("{}: row out of range", self.question_id)));
            }
        }
        Ok(())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dot_mixed(w: &[f64], x: &[f32]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * f64::from(*b)).sum()
}

/// Triple-space and table-space projections of every feature row.
pub struct Projections {
    pub rep_t: Vec<Vec<f64>>,
    pub rep_u: Vec<Vec<f64>>,
}

pub fn project(params: &[f64], shape: ParamShape, features: &[Vec<f32>]) -> Projections {
    let (f, d) = (shape.feature_dim, shape.proj_dim);
    let layer = |w: &[f64], b: &[f64], x: &[f32]| -> Vec<f64> {
        (0..d)
            .map(|k| (b[k] + dot_mixed(&w[k * f..(k + 1) * f], x)).tanh())
            .collect()
    };
    let (wt, bt) = (&params[shape.w_t()], &params[shape.b_t()]);
    let (wu, bu) = (&params[shape.w_u()], &params[shape.b_u()]);
    Projections {
        rep_t: features.iter().map(|x| layer(wt, bt, x)).collect(),
        rep_u: features.iter().map(|x| layer(wu, bu, x)).collect(),
    }
}

/// Result of a forward pass over one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// Logits per group, per triple, in input order.
    pub scores: Vec<Vec<f64>>,
    /// Max-pooled table representation per group.
    pub table_reps: Vec<Vec<f64>>,
    pub data_loss: f64,
    pub diversity: f64,
    pub total: f64,
}

struct Pooled {
    rep: Vec<f64>,
    argmax: Vec<usize>,
}

fn max_pool(rows: &[usize], rep_t: &[Vec<f64>]) -> Pooled {
    let first = &rep_t[rows[0]];
    let mut rep = first.clone();
    let mut argmax = vec![0; rep.len()];
    for (pos, &r) in rows.iter().enumerate().skip(1) {
        for (k, &v) in rep_t[r].iter().enumerate() {
            if v > rep[k] {
                rep[k] = v;
                argmax[k] = pos;
            }
        }
    }
    Pooled { rep, argmax }
}

/// Gradient accumulators for one question.
struct Grads<'a> {
    params: &'a mut [f64],
    d_rep_t: Vec<Vec<f64>>,
    d_rep_u: Vec<Vec<f64>>,
}

fn instance_pass(
    params: &[f64],
    shape: ParamShape,
    proj: &Projections,
    inst: &Instance,
    lambda_div: f64,
    mut grads: Option<(&mut Grads, f64)>,
) -> ForwardOutput {
    let d = shape.proj_dim;
    let w_s = &params[shape.w_s()];
    let (ws_u, ws_t) = w_s.split_at(d);
    let b_s = params[shape.b_s()];
    let n_triples: usize = inst.groups.iter().map(|g| g.rows.len()).sum();
    let inv_n = 1.0 / n_triples as f64;

    let pooled: Vec<Pooled> = inst
        .groups
        .iter()
        .map(|g| max_pool(&g.rows, &proj.rep_t))
        .collect();
    let mut scores = Vec::with_capacity(inst.groups.len());
    let mut data_loss = 0.0;
    for (g, pool) in inst.groups.iter().zip(&pooled) {
        let y = if g.label { 1.0 } else { 0.0 };
        let table_term = dot(ws_t, &pool.rep) + b_s;
        let mut d_pool = vec![0.0; d];
        let mut group_scores = Vec::with_capacity(g.rows.len());
        for &r in &g.rows {
            let s = dot(ws_u, &proj.rep_u[r]) + table_term;
            data_loss += (softplus(s) - y * s) * inv_n;
            group_scores.push(s);
            if let Some((gr, c)) = grads.as_mut() {
                let ds = *c * (sigmoid(s) - y) * inv_n;
                let (gu, gt) = gr.params[shape.w_s()].split_at_mut(d);
                for k in 0..d {
                    gu[k] += ds * proj.rep_u[r][k];
                    gt[k] += ds * pool.rep[k];
                    gr.d_rep_u[r][k] += ds * ws_u[k];
                    d_pool[k] += ds * ws_t[k];
                }
                gr.params[shape.b_s()] += ds;
            }
        }
        if let Some((gr, _)) = grads.as_mut() {
            for k in 0..d {
                gr.d_rep_t[g.rows[pool.argmax[k]]][k] += d_pool[k];
            }
        }
        scores.push(group_scores);
    }

    let multi: Vec<&Group> = inst.groups.iter().filter(|g| g.rows.len() >= 2).collect();
    let mut diversity = 0.0;
    for g in &multi {
        let n = g.rows.len();
        let pairs = (n * (n - 1) / 2) as f64;
        let mut sum = 0.0;
        for a in 0..n {
            for b in a + 1..n {
                sum += dot(&proj.rep_t[g.rows[a]], &proj.rep_t[g.rows[b]]);
            }
        }
        diversity += sum / pairs;
        if let Some((gr, c)) = grads.as_mut() {
            if lambda_div != 0.0 {
                let coef = *c * lambda_div / (multi.len() as f64 * pairs);
                let mut total = vec![0.0; d];
                for &r in &g.rows {
                    for (t, v) in total.iter_mut().zip(&proj.rep_t[r]) {
                        *t += v;
                    }
                }
                for &r in &g.rows {
                    for k in 0..d {
                        gr.d_rep_t[r][k] += coef * (total[k] - proj.rep_t[r][k]);
                    }
                }
            }
        }
    }
    if !multi.is_empty() {
        diversity /= multi.len() as f64;
    }
    ForwardOutput {
        scores,
        table_reps: pooled.into_iter().map(|p| p.rep).collect(),
        data_loss,
        diversity,
        total: data_loss + lambda_div * diversity,
    }
}

/// Forward pass of one instance.
pub fn forward(
    params: &ModelParams,
    features: &[Vec<f32>],
    inst: &Instance,
    lambda_div: f64,
) -> ForwardOutput {
    let proj = project(&params.values, params.shape, features);
    instance_pass(&params.values, params.shape, &proj, inst, lambda_div, None)
}

/// Mean loss over the batch's instances and its gradient with respect to the
/// flat parameter vector.
pub fn loss_and_grad(
    params: &[f64],
    shape: ParamShape,
    batch: &QuestionBatch,
    lambda_div: f64,
) -> (f64, Vec<f64>) {
    let proj = project(params, shape, &batch.features);
    let d = shape.proj_dim;
    let n_rows = batch.features.len();
    let mut grad = vec![0.0; shape.len()];
    let mut gr = Grads {
        params: &mut grad,
        d_rep_t: vec![vec![0.0; d]; n_rows],
        d_rep_u: vec![vec![0.0; d]; n_rows],
    };
    let c = 1.0 / batch.instances.len() as f64;
    let mut loss = 0.0;
    for inst in &batch.instances {
        loss += c * instance_pass(params, shape, &proj, inst, lambda_div, Some((&mut gr, c))).total;
    }
    let Grads {
        d_rep_t, d_rep_u, ..
    } = gr;
    let f = shape.feature_dim;
    let backprop = |grad: &mut [f64], w: Range<usize>, b: Range<usize>, reps: &[Vec<f64>], d_reps: &[Vec<f64>]| {
        for ((x, rep), d_rep) in batch.features.iter().zip(reps).zip(d_reps) {
            for k in 0..d {
                let dz = d_rep[k] * (1.0 - rep[k] * rep[k]);
                if dz == 0.0 {
                    continue;
                }
                grad[b.start + k] += dz;
                let row = &mut grad[w.start + k * f..w.start + (k + 1) * f];
                for (gw, xv) in row.iter_mut().zip(x) {
                    *gw += dz * f64::from(*xv);
                }
            }
        }
    };
    backprop(&mut grad, shape.w_t(), shape.b_t(), &proj.rep_t, &d_rep_t);
    backprop(&mut grad, shape.w_u(), shape.b_u(), &proj.rep_u, &d_rep_u);
    (loss, grad)
}

/// Loss only, for finite-difference checks.
pub fn batch_loss(params: &[f64], shape: ParamShape, batch: &QuestionBatch, lambda_div: f64) -> f64 {
    let proj = project(params, shape, &batch.features);
    let c = 1.0 / batch.instances.len() as f64;
    batch
        .instances
        .iter()
        .map(|inst| c * instance_pass(params, shape, &proj, inst, lambda_div, None).total)
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedTable {
    pub table_id: String,
    pub score: f64,
}

/// Tables ordered by their best triple score, ties by table id.
pub fn rank_tables<'a>(triples: impl IntoIterator<Item = (&'a str, f64)>) -> Vec<RankedTable> {
    let mut best: Vec<RankedTable> = Vec::new();
    for (table, score) in triples {
        match best.iter_mut().find(|t| t.table_id == table) {
            Some(t) => t.score = t.score.max(score),
            None => best.push(RankedTable {
                table_id: table.to_owned(),
                score,
            }),
        }
    }
    best.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.table_id.cmp(&b.table_id))
    });
    best
}

/// Ranks an instance's tables by per-triple logits.
pub fn rank_instance(params: &ModelParams, features: &[Vec<f32>], inst: &Instance) -> Vec<RankedTable> {
    let out = forward(params, features, inst, 0.0);
    rank_tables(
        inst.groups
            .iter()
            .zip(&out.scores)
            .flat_map(|(g, s)| s.iter().map(move |&v| (g.table_id.as_str(), v))),
    )
}

/// Whether the top-ranked table is a positive group.
pub fn top1_hit(ranking: &[RankedTable], inst: &Instance) -> bool {
    ranking.first().is_some_and(|top| {
        inst.groups
            .iter()
            .any(|g| g.label && g.table_id == top.table_id)
    })
}

/// P@1 over the original instance of each batch.
pub fn precision_at_1(params: &ModelParams, batches: &[QuestionBatch]) -> f64 {
    if batches.is_empty() {
        return 0.0;
    }
    let hits = batches
        .iter()
        .filter(|b| top1_hit(&rank_instance(params, &b.features, &b.instances[0]), &b.instances[0]))
        .count();
    hits as f64 / batches.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub eval: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleOutcome {
    /// Parameters of the best epoch.
    pub params: ModelParams,
    pub best_eval: f64,
    pub epochs: usize,
    pub presentations: u64,
    pub history: Vec<EpochRecord>,
}

/// Plain SGD from a seeded initialization, one question per step, with
/// epoch-level early stopping on `eval`.
pub fn train_mle(
    train: &[&QuestionBatch],
    cfg: &RelevanceConfig,
    mut eval: impl FnMut(&ModelParams) -> f64,
) -> Result<MleOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for b in train {
        b.validate(cfg.feature_dim)?;
    }
    let shape = cfg.shape();
    let mut params = ModelParams::init_uniform(shape, cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5eed));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut stop = EarlyStop::new(cfg.epoch_patience);
    let mut best = params.clone();
    let mut history = Vec::new();
    let mut presentations = 0u64;
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let (_, grad) = loss_and_grad(&params.values, shape, train[i], cfg.lambda_div);
            for (p, g) in params.values.iter_mut().zip(&grad) {
                *p -= cfg.learning_rate * g;
            }
            presentations += 1;
        }
        let score = eval(&params);
        history.push(EpochRecord { epoch, eval: score });
        let obs = stop.observe(score);
        if obs.improved {
            best = params.clone();
        }
        if obs.stop {
            break;
        }
    }
    Ok(MleOutcome {
        params: best,
        best_eval: stop.best().unwrap_or(f64::NEG_INFINITY),
        epochs: history.len(),
        presentations,
        history,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimpleOutcome {
    pub params: ModelParams,
    pub best_eval: f64,
    /// Datasets whose addition improved evaluation.
    pub accepted: Vec<usize>,
    pub cost: CostReport,
}

/// Accumulate-and-retrain: each step retrains from scratch on the accepted
/// datasets plus the next one. A dataset that does not strictly improve the
/// best evaluation is discarded; two consecutive such datasets end the loop.
pub fn simple_incremental(
    datasets: &[Vec<QuestionBatch>],
    cfg: &RelevanceConfig,
    dataset_patience: usize,
    mut eval: impl FnMut(&ModelParams) -> f64,
) -> Result<SimpleOutcome> {
    if datasets.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut stop = EarlyStop::new(dataset_patience);
    let mut accepted: Vec<usize> = Vec::new();
    let mut best: Option<(ModelParams, f64)> = None;
    let mut cost = CostReport::default();
    for t in 0..datasets.len() {
        let started = Instant::now();
        let mut trained_on = accepted.clone();
        trained_on.push(t);
        let train: Vec<&QuestionBatch> = trained_on.iter().flat_map(|&i| &datasets[i]).collect();
        let out = train_mle(&train, cfg, &mut eval)?;
        let obs = stop.observe(out.best_eval);
        if obs.improved {
            accepted.push(t);
            best = Some((out.params, out.best_eval));
        }
        cost.push(StepReport {
            dataset: t,
            trained_on,
            eval: out.best_eval,
            improved: obs.improved,
            epochs: out.epochs,
            presentations: out.presentations,
            seconds: started.elapsed().as_secs_f64(),
        });
        if obs.stop {
            break;
        }
    }
    let (params, best_eval) = best.expect("first dataset always improves");
    Ok(SimpleOutcome {
        params,
        best_eval,
        accepted,
        cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn features_of_unit_vectors() {
        let f = extract_features(&[1.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_eq!(f, vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let f = extract_features(&[0.0, 0.0], &[0.5, -2.0]).unwrap();
        assert_eq!(&f[0..2], &[0.0, 0.0]);
        assert_eq!(&f[4..6], &[0.0, -0.0]);
        assert_eq!(&f[6..8], &[0.5, 2.0]);
        assert!(extract_features(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn swapping_inputs_permutes_first_blocks() {
        let (q, p) = ([0.3f32, -0.2, 0.9], [0.1f32, 0.4, -0.5]);
        let a = extract_features(&q, &p).unwrap();
        let b = extract_features(&p, &q).unwrap();
        assert_eq!(&a[0..3], &b[3..6]);
        assert_eq!(&a[3..6], &b[0..3]);
        assert_eq!(&a[6..], &b[6..]);
    }

    #[test]
    fn layout_is_contiguous() {
        let s = ParamShape::new(16, 8);
        assert_eq!(s.b_t().start, s.w_t().end);
        assert_eq!(s.w_u().start, s.b_t().end);
        assert_eq!(s.len(), 2 * 16 * 8 + 4 * 8 + 1);
    }

    #[test]
    fn zero_params_give_ln2() {
        let shape = ParamShape::new(4, 3);
        let inst = Instance {
            groups: vec![
                Group { table_id: "a".into(), rows: vec![0], label: true },
                Group { table_id: "b".into(), rows: vec![1], label: false },
            ],
        };
        let feats = vec![vec![0.5; 4], vec![-0.5; 4]];
        let out = forward(&ModelParams::zeros(shape), &feats, &inst, 0.1);
        assert!(out.scores.iter().flatten().all(|&s| s == 0.0));
        assert!((out.data_loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(out.diversity, 0.0);
    }

    #[test]
    fn ranking_by_max_then_id() {
        let r = rank_tables([("B", 0.5), ("A", 0.9), ("A", 0.1)]);
        assert_eq!(r.iter().map(|t| t.table_id.as_str()).collect::<Vec<_>>(), vec!["A", "B"]);
        let r = rank_tables([("Z", 0.5), ("Y", 0.5)]);
        assert_eq!(r[0].table_id, "Y");
        assert_eq!(rank_tables([("only", -3.0)]).len(), 1);
    }

    #[test]
    fn stable_logistic_helpers() {
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        assert!(softplus(-800.0) >= 0.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert!(sigmoid(-800.0).is_finite());
    }
}
