//! Empirical risk estimators for the Monte Carlo majority vote.
//!
//! Every estimator reads the same [`ScoreTable`]: the score of each voter on
//! each perturbed point. Reusing one table (hence one sampled ensemble)
//! across the 0-1 risks and their linear surrogates makes the factor-2
//! relation `risk ≤ 2 · surrogate` hold exactly on the computed numbers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::{self, AttackConfig, PerturbedSample};
use crate::data::LabeledDataset;
use crate::diffnet::{self, WeightVector};
use crate::error::{contract, Result};
use crate::posterior::{vote_sign, VoterEnsemble};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskKind {
    Avg01,
    Avgmax01,
    AvgSurrogate,
    AvgmaxSurrogate,
    Worstcase01,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub value: f64,
    pub kind: RiskKind,
    /// Number of examples.
    pub m: usize,
    /// Perturbations per example.
    pub n: usize,
    /// Number of voters.
    pub n_voters: usize,
}

/// Voter scores on one example: `scores[j * N + k]` is voter `k` on `x + ε_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub y: i8,
    pub n: usize,
    pub scores: Vec<f64>,
}

/// Voter scores on every perturbed point of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    /// Voter weights; `None` means uniform `1/N`.
    weights: Option<Vec<f64>>,
    n_voters: usize,
    rows: Vec<ScoreRow>,
}

impl ScoreTable {
    /// Evaluates every voter of `ens` on every `x_i + ε_j^i`.
    pub fn from_ensemble(ens: &VoterEnsemble, data: &[PerturbedSample]) -> Result<Self> {
        check_data(data)?;
        let rows = data
            .par_iter()
            .map(|s| {
                let mut scores = Vec::with_capacity(s.n() * ens.len());
                for j in 0..s.n() {
                    scores.extend(ens.voter_scores(&s.point(j))?);
                }
                Ok(ScoreRow { y: s.y, n: s.n(), scores })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { weights: None, n_voters: ens.len(), rows })
    }

    /// Table from explicit values, e.g. a finite voter set with weights `Q`.
    pub fn from_rows(n_voters: usize, weights: Option<Vec<f64>>, rows: Vec<ScoreRow>) -> Result<Self> {
        if n_voters == 0 {
            return Err(contract("a score table needs at least one voter"));
        }
        if rows.is_empty() {
            return Err(contract("a score table needs at least one example"));
        }
        let n = rows[0].n;
        for r in &rows {
            if r.n == 0 || r.n != n || r.scores.len() != r.n * n_voters {
                return Err(contract("every row needs the same n >= 1 and n·N scores"));
            }
        }
        if let Some(w) = &weights {
            if w.len() != n_voters || w.iter().any(|&v| v < 0.0) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                return Err(contract("voter weights must be a probability vector of length N"));
            }
        }
        Ok(Self { weights, n_voters, rows })
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn n(&self) -> usize {
        self.rows[0].n
    }

    pub fn n_voters(&self) -> usize {
        self.n_voters
    }

    pub fn rows(&self) -> &[ScoreRow] {
        &self.rows
    }

    /// Weight of voter `k`.
    pub fn voter_weight(&self, k: usize) -> f64 {
        self.weights.as_ref().map_or(1.0 / self.n_voters as f64, |w| w[k])
    }

    /// Vote score on `x_i + ε_j`.
    pub fn vote(&self, i: usize, j: usize) -> f64 {
        let row = &self.rows[i];
        let s = &row.scores[j * self.n_voters..(j + 1) * self.n_voters];
        match &self.weights {
            None => s.iter().sum::<f64>() / self.n_voters as f64,
            Some(w) => s.iter().zip(w).map(|(a, b)| a * b).sum(),
        }
    }

    /// `y_i · vote(i, j)` for every perturbation of example `i`.
    pub fn margins(&self, i: usize) -> impl Iterator<Item = f64> + '_ {
        let y = f64::from(self.rows[i].y);
        (0..self.rows[i].n).map(move |j| y * self.vote(i, j))
    }

    fn wrong(&self, i: usize, j: usize) -> bool {
        vote_sign(self.vote(i, j)) != self.rows[i].y
    }

    fn estimate(&self, value: f64, kind: RiskKind) -> RiskEstimate {
        RiskEstimate { value, kind, m: self.m(), n: self.n(), n_voters: self.n_voters }
    }

    /// `(1/mn) Σ_i Σ_j I(sign(mv) ≠ y)`.
    pub fn avg_risk_01(&self) -> RiskEstimate {
        let errors: usize = (0..self.m()).map(|i| (0..self.rows[i].n).filter(|&j| self.wrong(i, j)).count()).sum();
        self.estimate(errors as f64 / (self.m() * self.n()) as f64, RiskKind::Avg01)
    }

    /// `(1/m) Σ_i max_j I(sign(mv) ≠ y)`.
    pub fn avgmax_risk_01(&self) -> RiskEstimate {
        let errors = (0..self.m()).filter(|&i| (0..self.rows[i].n).any(|j| self.wrong(i, j))).count();
        self.estimate(errors as f64 / self.m() as f64, RiskKind::Avgmax01)
    }

    /// `(1/mn) Σ_i Σ_j ½(1 − y·mv)`.
    pub fn avg_surrogate(&self) -> RiskEstimate {
        let total: f64 = (0..self.m()).map(|i| self.margins(i).map(|g| 0.5 * (1.0 - g)).sum::<f64>()).sum();
        self.estimate(total / (self.m() * self.n()) as f64, RiskKind::AvgSurrogate)
    }

    /// `(1/m) Σ_i ½(1 − min_j y·mv)`.
    pub fn avgmax_surrogate(&self) -> RiskEstimate {
        let total: f64 = (0..self.m()).map(|i| 0.5 * (1.0 - self.margins(i).fold(f64::INFINITY, f64::min))).sum();
        self.estimate(total / self.m() as f64, RiskKind::AvgmaxSurrogate)
    }

    /// Worst case over finite candidate sets: the rows hold every
    /// candidate perturbation, so the max is exhaustive.
    pub fn worstcase_over_candidates(&self) -> RiskEstimate {
        RiskEstimate { kind: RiskKind::Worstcase01, ..self.avgmax_risk_01() }
    }
}

fn check_data(data: &[PerturbedSample]) -> Result<()> {
    let first = data.first().ok_or_else(|| contract("risk estimates need at least one example"))?;
    if first.n() == 0 || data.iter().any(|s| s.n() != first.n()) {
        return Err(contract("all examples must carry the same number n >= 1 of perturbations"));
    }
    Ok(())
}

pub fn avg_risk_01(ens: &VoterEnsemble, data: &[PerturbedSample]) -> Result<RiskEstimate> {
    Ok(ScoreTable::from_ensemble(ens, data)?.avg_risk_01())
}

pub fn avgmax_risk_01(ens: &VoterEnsemble, data: &[PerturbedSample]) -> Result<RiskEstimate> {
    Ok(ScoreTable::from_ensemble(ens, data)?.avgmax_risk_01())
}

pub fn avg_surrogate(ens: &VoterEnsemble, data: &[PerturbedSample]) -> Result<RiskEstimate> {
    Ok(ScoreTable::from_ensemble(ens, data)?.avg_surrogate())
}

pub fn avgmax_surrogate(ens: &VoterEnsemble, data: &[PerturbedSample]) -> Result<RiskEstimate> {
    Ok(ScoreTable::from_ensemble(ens, data)?.avgmax_surrogate())
}

/// Error rate of the vote on points attacked by a single gradient attack
/// against `target`. This under-estimates the true worst case over the ball.
///
/// Example `i` uses the stream `(cfg.seed, "worstcase", i)`.
pub fn worstcase_risk_estimate(ens: &VoterEnsemble, data: &LabeledDataset, cfg: &AttackConfig, target: &WeightVector) -> Result<RiskEstimate> {
    if !cfg.kind.is_gradient() {
        return Err(contract(format!("worst-case estimates need a gradient attack, got `{}`", cfg.kind)));
    }
    if data.is_empty() {
        return Err(contract("risk estimates need at least one example"));
    }
    let net = ens.network();
    let errors = data
        .inputs
        .par_iter()
        .zip(data.labels.par_iter())
        .enumerate()
        .map(|(i, (x, &y))| {
            let eps = attacks::attack_once(cfg, net, target, x, y, &mut rng::stream(cfg.seed, "worstcase", i as u64))?;
            let point: Vec<f64> = x.iter().zip(&eps).map(|(a, e)| a + e).collect();
            let scores = ens.voter_scores(&point)?;
            Ok(usize::from(vote_sign(scores.iter().sum::<f64>() / scores.len() as f64) != y))
        })
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(RiskEstimate {
        value: errors as f64 / data.len() as f64,
        kind: RiskKind::Worstcase01,
        m: data.len(),
        n: 1,
        n_voters: ens.len(),
    })
}

/// Plain 0-1 risk of one deterministic network on clean data.
pub fn clean_risk_01(net: &diffnet::Network, w: &WeightVector, data: &LabeledDataset) -> Result<f64> {
    let errors = data
        .inputs
        .par_iter()
        .zip(data.labels.par_iter())
        .map(|(x, &y)| Ok(usize::from(vote_sign(diffnet::forward(net, w, x)?) != y)))
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(errors as f64 / data.len().max(1) as f64)
}
