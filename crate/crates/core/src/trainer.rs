//! Two-step adversarial training with a bound-derived objective.
//!
//! Step (i) trains a sequence of prior means `v_1..v_T` on `S'` with
//! adversarially perturbed batches and keeps the one with the lowest
//! sampled linear loss on `S`. Step (ii) starts the posterior at that prior
//! and minimizes a loss derived from a PAC-Bayes bound on perturbed batches
//! of `S`. Gradients with respect to a Gaussian mean are taken along the
//! sampled weights `w' = w + √λ ζ` with `ζ` frozen per batch.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::{defense_perturbation, AttackConfig};
use crate::data::LabeledDataset;
use crate::diffnet::{self, AdamState, LinearLoss, Network, WeightVector};
use crate::error::{contract, Error, Result};
use crate::posterior::{kl_gaussians, GaussianPosterior, DEFAULT_LAMBDA};
use crate::rng::{self, pair_index};

/// Lower end of the open interval allowed for `C`.
pub const C_MIN: f64 = 1e-4;
/// Upper end of the interval allowed for `C`.
pub const C_MAX: f64 = 100.0;
/// Examples per gradient chunk; chunk sums are reduced in index order.
const GRAD_CHUNK: usize = 8;

/// Which bound the posterior objective follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundLoss {
    /// kl-inverse bound on the averaged risk.
    Eq8,
    /// Bound on the averaged-max risk.
    Eq10,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Step (i) epochs `T`; also the number of candidate priors.
    pub prior_epochs: usize,
    /// Step (ii) epochs `T'`.
    pub posterior_epochs: usize,
    /// Step (i) learning rate `η`.
    pub prior_lr: f64,
    /// Step (ii) learning rate `η'`, shared by `C`.
    pub posterior_lr: f64,
    pub batch_size: usize,
    pub lambda: f64,
    pub delta: f64,
    pub c_init: f64,
    pub bound: BoundLoss,
    pub defense: AttackConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            prior_epochs: 20,
            posterior_epochs: 20,
            prior_lr: 1e-4,
            posterior_lr: 1e-4,
            batch_size: 64,
            lambda: DEFAULT_LAMBDA,
            delta: 0.05,
            c_init: 0.05,
            bound: BoundLoss::Eq8,
            defense: AttackConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.prior_epochs == 0 || self.posterior_epochs == 0 {
            return Err(contract("epoch counts must be positive"));
        }
        if !(self.prior_lr >= 0.0 && self.posterior_lr >= 0.0) || !self.prior_lr.is_finite() || !self.posterior_lr.is_finite() {
            return Err(contract("learning rates must be finite and non-negative"));
        }
        if self.batch_size == 0 {
            return Err(contract("batch size must be positive"));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(contract("lambda must be positive"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(contract("delta must lie in (0, 1)"));
        }
        if !(self.c_init > 0.0 && self.c_init <= C_MAX) {
            return Err(contract(format!("C_init must lie in (0, {C_MAX}]")));
        }
        self.defense.validate()
    }
}

/// Per-epoch record of Step (i).
#[derive(Debug, Clone, PartialEq)]
pub struct PriorTrace {
    /// `v_t` after each epoch.
    pub means: Vec<WeightVector>,
    /// Sampled clean linear loss on `S` for each `v_t`.
    pub scores: Vec<f64>,
    /// Index of the selected epoch.
    pub chosen: usize,
}

/// Result of Step (ii).
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorOutcome {
    pub posterior: GaussianPosterior,
    /// Learned `C` for the kl-inverse objective.
    pub c: Option<f64>,
    /// `KL(Q‖P)` of the returned posterior.
    pub kl: f64,
    /// Mean objective value per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Bound loss value with its partial derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub value: f64,
    /// With respect to the linear loss `ℓ`.
    pub d_lin: f64,
    /// With respect to `KL`.
    pub d_kl: f64,
    /// With respect to `C`; zero for the averaged-max objective.
    pub d_c: f64,
}

/// Clamps `C` into `(C_MIN, C_MAX]`, logging when it moves.
pub fn clamp_c(c: f64) -> f64 {
    let clamped = if c.is_nan() { C_MIN } else { c.clamp(C_MIN, C_MAX) };
    if clamped != c {
        log::info!("C = {c} clamped to {clamped}");
    }
    clamped
}

/// `(1 − exp(−Cℓ − [KL + ln(T(m+1)/δ)]/m)) / (1 − exp(−C))`.
pub fn loss_eq8(lin: f64, kl: f64, m: usize, t_priors: usize, delta: f64, c: f64) -> LossParts {
    let c = clamp_c(c);
    let m = m as f64;
    let a = c * lin + (kl + (t_priors as f64 * (m + 1.0) / delta).ln()) / m;
    let ea = (-a).exp();
    let ec = (-c).exp();
    let den = -(-c).exp_m1();
    let num = -(-a).exp_m1();
    LossParts {
        value: num / den,
        d_lin: c * ea / den,
        d_kl: ea / (m * den),
        d_c: (lin * ea * den - num * ec) / (den * den),
    }
}

/// `ℓ + sqrt([KL + ln(2T√m/δ)] / 2m)`.
pub fn loss_eq10(lin: f64, kl: f64, m: usize, t_priors: usize, delta: f64) -> LossParts {
    let m = m as f64;
    let root = ((kl + (2.0 * t_priors as f64 * m.sqrt() / delta).ln()) / (2.0 * m)).sqrt();
    LossParts { value: lin + root, d_lin: 1.0, d_kl: 1.0 / (4.0 * m * root), d_c: 0.0 }
}

/// Constants of the bound objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveParams {
    pub bound: BoundLoss,
    pub m: usize,
    pub t_priors: usize,
    pub delta: f64,
    pub lambda: f64,
}

impl ObjectiveParams {
    fn parts(&self, lin: f64, kl: f64, c: f64) -> LossParts {
        match self.bound {
            BoundLoss::Eq8 => loss_eq8(lin, kl, self.m, self.t_priors, self.delta, c),
            BoundLoss::Eq10 => loss_eq10(lin, kl, self.m, self.t_priors, self.delta),
        }
    }
}

/// Batch objective and its gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveGrad {
    /// Mean bound loss over the batch.
    pub value: f64,
    pub kl: f64,
    /// With respect to the posterior mean `w`.
    pub weights: Vec<f64>,
    pub c: f64,
}

/// Sums per-example weight gradients of `loss` at `w'` over `batch`,
/// scaled by `1 / |batch|`, in a fixed order.
fn batch_weight_grad(net: &Network, w: &WeightVector, batch: &[(Vec<f64>, i8)], loss: &(impl diffnet::ScoreLoss + Sync)) -> Result<(Vec<f64>, Vec<f64>)> {
    let scale = 1.0 / batch.len() as f64;
    let parts = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; net.n_params()];
            let mut scores = Vec::with_capacity(chunk.len());
            for (x, y) in chunk {
                let (s, _) = diffnet::accumulate_weight_grad(net, w, x, f64::from(*y), loss, scale, &mut acc)?;
                scores.push(s);
            }
            Ok((acc, scores))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = vec![0.0; net.n_params()];
    let mut scores = Vec::with_capacity(batch.len());
    for (acc, s) in parts {
        total.iter_mut().zip(&acc).for_each(|(t, a)| *t += a);
        scores.extend(s);
    }
    Ok((total, scores))
}

/// Bound objective on a perturbed batch at the sampled weights
/// `w' = w + noise`, differentiated with respect to `w` and `C`.
pub fn objective_grad(
    params: &ObjectiveParams,
    net: &Network,
    w: &WeightVector,
    prior_mean: &WeightVector,
    noise: &[f64],
    batch: &[(Vec<f64>, i8)],
    c: f64,
) -> Result<ObjectiveGrad> {
    if batch.is_empty() {
        return Err(contract("objective needs a nonempty batch"));
    }
    if noise.len() != w.len() || prior_mean.len() != w.len() {
        return Err(crate::error::shape("noise and prior mean must match the weights"));
    }
    let kl = w.dist2(prior_mean) / (2.0 * params.lambda);
    let sampled = WeightVector::new(w.as_slice().iter().zip(noise).map(|(a, b)| a + b).collect())?;
    let loss = |score: f64, y: f64| {
        let lin = 0.5 * (1.0 - y * score);
        let p = params.parts(lin, kl, c);
        (p.value, -0.5 * y * p.d_lin)
    };
    let (mut g, scores) = batch_weight_grad(net, &sampled, batch, &loss)?;
    let (mut value, mut d_kl, mut d_c) = (0.0, 0.0, 0.0);
    for (s, (_, y)) in scores.iter().zip(batch) {
        let p = params.parts(0.5 * (1.0 - f64::from(*y) * s), kl, c);
        value += p.value;
        d_kl += p.d_kl;
        d_c += p.d_c;
    }
    let b = batch.len() as f64;
    let (value, d_kl, d_c) = (value / b, d_kl / b, d_c / b);
    for ((gi, wi), vi) in g.iter_mut().zip(w.as_slice()).zip(prior_mean.as_slice()) {
        *gi += d_kl * (wi - vi) / params.lambda;
    }
    Ok(ObjectiveGrad { value, kl, weights: g, c: d_c })
}

fn batches(len: usize, batch_size: usize, order: &[usize]) -> Vec<Vec<usize>> {
    debug_assert_eq!(order.len(), len);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

fn shuffled(len: usize, seed: u64, tag: &str, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut rng::stream(seed, tag, epoch as u64));
    order
}

/// Perturbs each example of a batch against `target`; example `idx[i]`
/// draws from stream `(seed, tag, (epoch, idx[i]))`.
#[allow(clippy::too_many_arguments)]
fn perturb_batch(cfg: &AttackConfig, net: &Network, target: &WeightVector, data: &LabeledDataset, idx: &[usize], seed: u64, tag: &str, epoch: usize) -> Result<Vec<(Vec<f64>, i8)>> {
    idx.par_iter()
        .map(|&i| {
            let (x, y) = (&data.inputs[i], data.labels[i]);
            let mut r = rng::stream(seed, tag, pair_index(epoch as u64, i as u64));
            let eps = defense_perturbation(cfg, net, target, x, y, &mut r)?;
            Ok((x.iter().zip(&eps).map(|(a, e)| a + e).collect(), y))
        })
        .collect()
}

fn sampled_noise(lambda: f64, len: usize, seed: u64, tag: &str, epoch: usize, batch: usize) -> Vec<f64> {
    let zero = GaussianPosterior::new(WeightVector::zeros(len), lambda).expect("validated lambda");
    zero.sample(&mut rng::stream(seed, tag, pair_index(epoch as u64, batch as u64))).into_inner()
}

fn check_disjoint(s_prime: &LabeledDataset, s: &LabeledDataset) -> Result<()> {
    if s_prime.is_disjoint_from(s) {
        Ok(())
    } else {
        Err(contract("S' and S share examples; the prior would depend on the bound sample"))
    }
}

/// Mean over the batches of `S` (in file order) of the clean linear loss
/// of one network sampled from `N(v, λI)` per batch.
pub fn selection_score(net: &Network, v: &WeightVector, lambda: f64, s: &LabeledDataset, batch_size: usize, seed: u64, epoch: usize) -> Result<f64> {
    let order: Vec<usize> = (0..s.len()).collect();
    let mut total = 0.0;
    let groups = batches(s.len(), batch_size, &order);
    for (b, idx) in groups.iter().enumerate() {
        let noise = sampled_noise(lambda, v.len(), seed, "select", epoch, b);
        let sampled = WeightVector::new(v.as_slice().iter().zip(&noise).map(|(a, n)| a + n).collect())?;
        let losses = idx
            .par_iter()
            .map(|&i| Ok(0.5 * (1.0 - f64::from(s.labels[i]) * diffnet::forward(net, &sampled, &s.inputs[i])?)))
            .collect::<Result<Vec<f64>>>()?;
        total += losses.iter().sum::<f64>() / losses.len() as f64;
    }
    Ok(total / groups.len() as f64)
}

/// Step (i). `on_epoch(t, v_t, score)` runs after every epoch.
pub fn train_prior(
    cfg: &TrainConfig,
    net: &Network,
    v0: &WeightVector,
    s_prime: &LabeledDataset,
    s: &LabeledDataset,
    mut on_epoch: impl FnMut(usize, &WeightVector, f64),
) -> Result<(GaussianPosterior, PriorTrace)> {
    cfg.validate()?;
    check_disjoint(s_prime, s)?;
    if s_prime.is_empty() || s.is_empty() {
        return Err(contract("S' and S must be nonempty"));
    }
    let mut v = v0.clone();
    let mut adam = AdamState::new(v.len(), cfg.prior_lr);
    let (mut means, mut scores) = (Vec::new(), Vec::new());
    for t in 0..cfg.prior_epochs {
        let order = shuffled(s_prime.len(), cfg.seed, "prior-shuffle", t);
        for (b, idx) in batches(s_prime.len(), cfg.batch_size, &order).iter().enumerate() {
            let current = GaussianPosterior::new(v.clone(), cfg.lambda)?;
            let target = current.sample(&mut rng::stream(cfg.seed, "prior-attack-target", pair_index(t as u64, b as u64)));
            let batch = perturb_batch(&cfg.defense, net, &target, s_prime, idx, cfg.seed, "prior-attack", t)?;
            let noise = sampled_noise(cfg.lambda, v.len(), cfg.seed, "prior-sample", t, b);
            let sampled = WeightVector::new(v.as_slice().iter().zip(&noise).map(|(a, n)| a + n).collect())?;
            let (g, _) = batch_weight_grad(net, &sampled, &batch, &LinearLoss)?;
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::Diverged { epoch: t, batch: b, snapshot: "non-finite prior gradient".into() });
            }
            adam.step(v.as_mut_slice(), &g)?;
        }
        let score = selection_score(net, &v, cfg.lambda, s, cfg.batch_size, cfg.seed, t)?;
        log::debug!("prior epoch {t}: selection score {score:.6}");
        on_epoch(t, &v, score);
        means.push(v.clone());
        scores.push(score);
    }
    let chosen = scores
        .iter()
        .enumerate()
        .fold(0, |best, (i, &s)| if s < scores[best] { i } else { best });
    let prior = GaussianPosterior::new(means[chosen].clone(), cfg.lambda)?;
    Ok((prior, PriorTrace { means, scores, chosen }))
}

/// Step (ii). `on_epoch(t, w, mean loss)` runs after every epoch.
pub fn train_posterior(
    cfg: &TrainConfig,
    net: &Network,
    prior: &GaussianPosterior,
    s: &LabeledDataset,
    mut on_epoch: impl FnMut(usize, &WeightVector, f64),
) -> Result<PosteriorOutcome> {
    cfg.validate()?;
    if s.is_empty() {
        return Err(contract("S must be nonempty"));
    }
    if (prior.lambda() - cfg.lambda).abs() > 0.0 {
        return Err(contract("prior and training config disagree on lambda"));
    }
    let params = ObjectiveParams { bound: cfg.bound, m: s.len(), t_priors: cfg.prior_epochs, delta: cfg.delta, lambda: cfg.lambda };
    let v = prior.mean();
    let mut w = v.clone();
    let mut adam = AdamState::new(w.len(), cfg.posterior_lr);
    let mut c = [cfg.c_init];
    let mut c_adam = AdamState::new(1, cfg.posterior_lr);
    let mut epoch_losses = Vec::with_capacity(cfg.posterior_epochs);
    for t in 0..cfg.posterior_epochs {
        let order = shuffled(s.len(), cfg.seed, "post-shuffle", t);
        let groups = batches(s.len(), cfg.batch_size, &order);
        let mut epoch_total = 0.0;
        for (b, idx) in groups.iter().enumerate() {
            let current = GaussianPosterior::new(w.clone(), cfg.lambda)?;
            let target = current.sample(&mut rng::stream(cfg.seed, "post-attack-target", pair_index(t as u64, b as u64)));
            let batch = perturb_batch(&cfg.defense, net, &target, s, idx, cfg.seed, "post-attack", t)?;
            let noise = sampled_noise(cfg.lambda, w.len(), cfg.seed, "post-sample", t, b);
            let og = objective_grad(&params, net, &w, v, &noise, &batch, c[0])?;
            if !og.value.is_finite() || og.weights.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged {
                    epoch: t,
                    batch: b,
                    snapshot: format!("loss={} kl={} C={} |w|²={}", og.value, og.kl, c[0], w.dist2(&WeightVector::zeros(w.len()))),
                });
            }
            epoch_total += og.value;
            adam.step(w.as_mut_slice(), &og.weights)?;
            if cfg.bound == BoundLoss::Eq8 {
                c_adam.step(&mut c, &[og.c])?;
                c[0] = clamp_c(c[0]);
            }
        }
        let mean_loss = epoch_total / groups.len() as f64;
        log::debug!("posterior epoch {t}: mean objective {mean_loss:.6}");
        on_epoch(t, &w, mean_loss);
        epoch_losses.push(mean_loss);
    }
    let posterior = GaussianPosterior::new(w, cfg.lambda)?;
    let kl = kl_gaussians(&posterior, prior)?;
    Ok(PosteriorOutcome { posterior, c: (cfg.bound == BoundLoss::Eq8).then_some(c[0]), kl, epoch_losses })
}
