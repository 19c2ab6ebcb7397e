//! Isotropic Gaussian distributions over network weights.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffnet::{self, Network, NetworkSpec, WeightVector};
use crate::error::{contract, Error, Result};
use crate::rng;

/// Default isotropic variance λ.
pub const DEFAULT_LAMBDA: f64 = 0.01;

/// Default number of voters sampled for Monte Carlo votes.
pub const DEFAULT_ENSEMBLE_SIZE: usize = 100;

/// `N(mean, λ I)`. Serves both as posterior `Q` and prior `P`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPosterior {
    mean: WeightVector,
    lambda: f64,
}

impl GaussianPosterior {
    pub fn new(mean: WeightVector, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(contract(format!("lambda must be positive and finite, got {lambda}")));
        }
        Ok(Self { mean, lambda })
    }

    pub fn mean(&self) -> &WeightVector {
        &self.mean
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `w' = w + √λ ζ` with `ζ ~ N(0, I)` drawn from `rng`.
    pub fn sample(&self, rng: &mut impl Rng) -> WeightVector {
        let scale = self.lambda.sqrt();
        let values = self
            .mean
            .as_slice()
            .iter()
            .map(|&m| {
                let z: f64 = rng.sample(StandardNormal);
                m + scale * z
            })
            .collect();
        WeightVector::new(values).expect("finite mean plus finite noise")
    }

    /// Draws the standard-normal noise `ζ` alone, for pathwise gradients.
    pub fn sample_noise(&self, rng: &mut impl Rng) -> Vec<f64> {
        (0..self.mean.len()).map(|_| rng.sample(StandardNormal)).collect()
    }
}

/// `KL(Q‖P) = ‖w − v‖² / (2λ)` for two Gaussians sharing λ.
pub fn kl_gaussians(q: &GaussianPosterior, p: &GaussianPosterior) -> Result<f64> {
    if q.lambda != p.lambda {
        return Err(contract(format!("KL closed form needs a shared lambda, got {} and {}", q.lambda, p.lambda)));
    }
    if q.mean.len() != p.mean.len() {
        return Err(Error::Shape("posterior and prior have different dimensions".into()));
    }
    Ok(q.mean.dist2(&p.mean) / (2.0 * q.lambda))
}

/// `N` weight vectors drawn from one posterior; the Monte Carlo majority vote.
#[derive(Debug, Clone)]
pub struct VoterEnsemble {
    net: Network,
    samples: Vec<WeightVector>,
    seed: u64,
}

impl VoterEnsemble {
    /// Samples voter `k` from stream `(seed, "ensemble", k)`.
    pub fn sample(net: &Network, post: &GaussianPosterior, n_voters: usize, seed: u64) -> Result<Self> {
        if n_voters == 0 {
            return Err(contract("an ensemble needs at least one voter"));
        }
        if post.mean.len() != net.n_params() {
            return Err(Error::Shape("posterior does not match the network".into()));
        }
        let samples = (0..n_voters as u64)
            .into_par_iter()
            .map(|k| post.sample(&mut rng::stream(seed, "ensemble", k)))
            .collect();
        Ok(Self { net: net.clone(), samples, seed })
    }

    /// Ensemble from explicit weight vectors.
    pub fn from_samples(net: &Network, samples: Vec<WeightVector>, seed: u64) -> Result<Self> {
        if samples.is_empty() {
            return Err(contract("an ensemble needs at least one voter"));
        }
        if samples.iter().any(|s| s.len() != net.n_params()) {
            return Err(Error::Shape("ensemble member does not match the network".into()));
        }
        Ok(Self { net: net.clone(), samples, seed })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn samples(&self) -> &[WeightVector] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Score of every voter at `x`, in ensemble order.
    pub fn voter_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.samples.iter().map(|w| diffnet::forward(&self.net, w, x)).collect()
    }
}

/// Monte Carlo estimate of `E_{h~Q} h(x)`: the mean voter score.
pub fn mv_score(ens: &VoterEnsemble, x: &[f64]) -> Result<f64> {
    let scores = ens.voter_scores(x)?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Majority vote prediction; `sign(0) = +1`.
pub fn vote_sign(score: f64) -> i8 {
    if score >= 0.0 {
        1
    } else {
        -1
    }
}

const POSTERIOR_MAGIC: &[u8; 8] = b"ADVBPOST";
const POSTERIOR_SCHEMA: u32 = 1;

#[derive(Serialize, Deserialize)]
struct PosteriorHeader {
    schema_version: u32,
    lambda: f64,
    seed: u64,
    spec: NetworkSpec,
}

/// Posterior checkpoint: `magic | header length (u32 LE) | JSON header | weight checkpoint`.
pub fn write_posterior(net: &Network, post: &GaussianPosterior, seed: u64, out: &mut impl Write) -> Result<()> {
    let header = PosteriorHeader {
        schema_version: POSTERIOR_SCHEMA,
        lambda: post.lambda,
        seed,
        spec: net.spec().clone(),
    };
    let json = serde_json::to_vec(&header)?;
    out.write_all(POSTERIOR_MAGIC)?;
    out.write_all(&(json.len() as u32).to_le_bytes())?;
    out.write_all(&json)?;
    diffnet::write_checkpoint(net, &post.mean, out)
}

/// Inverse of [`write_posterior`]; returns the network, posterior and master seed.
pub fn read_posterior(input: &mut impl Read) -> Result<(Network, GaussianPosterior, u64)> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != POSTERIOR_MAGIC {
        return Err(Error::Checkpoint("bad posterior magic".into()));
    }
    let mut len = [0u8; 4];
    input.read_exact(&mut len)?;
    let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
    input.read_exact(&mut json)?;
    let header: PosteriorHeader = serde_json::from_slice(&json)?;
    if header.schema_version != POSTERIOR_SCHEMA {
        return Err(Error::Checkpoint(format!("unsupported posterior schema {}", header.schema_version)));
    }
    let net = Network::new(header.spec)?;
    let mean = diffnet::read_checkpoint(&net, input)?;
    Ok((net, GaussianPosterior::new(mean, header.lambda)?, header.seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffnet::{init_weights, NetworkSpec};
    use approx::assert_relative_eq;

    fn net() -> Network {
        Network::new(NetworkSpec::mlp(3, &[4])).unwrap()
    }

    #[test]
    fn lambda_must_be_positive() {
        assert!(GaussianPosterior::new(WeightVector::zeros(2), 0.0).is_err());
        assert!(GaussianPosterior::new(WeightVector::zeros(2), -1.0).is_err());
        assert!(GaussianPosterior::new(WeightVector::zeros(2), f64::NAN).is_err());
    }

    #[test]
    fn tiny_lambda_collapses_to_mean() {
        let mean = WeightVector::new(vec![0.3, -0.2, 1.5]).unwrap();
        let lambda = 1e-20;
        let post = GaussianPosterior::new(mean.clone(), lambda).unwrap();
        let s = post.sample(&mut rng::stream(1, "t", 0));
        let max_dev = s.as_slice().iter().zip(mean.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        // |ζ| < 10 with overwhelming probability.
        assert!(max_dev <= lambda.sqrt() * 10.0);
    }

    #[test]
    fn sample_variance_matches_lambda() {
        let post = GaussianPosterior::new(WeightVector::zeros(3), 0.04).unwrap();
        let mut rng = rng::stream(5, "var", 0);
        let n = 10_000;
        let draws: Vec<WeightVector> = (0..n).map(|_| post.sample(&mut rng)).collect();
        for c in 0..3 {
            let mean = draws.iter().map(|d| d.as_slice()[c]).sum::<f64>() / n as f64;
            let var = draws.iter().map(|d| (d.as_slice()[c] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!((var - 0.04).abs() < 0.05 * 0.04, "coordinate {c}: variance {var}");
        }
    }

    #[test]
    fn same_stream_same_sample() {
        let post = GaussianPosterior::new(WeightVector::zeros(5), 0.1).unwrap();
        assert_eq!(post.sample(&mut rng::stream(3, "s", 9)), post.sample(&mut rng::stream(3, "s", 9)));
    }

    #[test]
    fn kl_closed_form() {
        let v = WeightVector::new(vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let w = WeightVector::new(vec![4.0, 5.0, 1.0, 1.0]).unwrap();
        let p = GaussianPosterior::new(v.clone(), 0.5).unwrap();
        let q = GaussianPosterior::new(w, 0.5).unwrap();
        assert_eq!(kl_gaussians(&q, &p).unwrap(), 25.0);
        assert_eq!(kl_gaussians(&p, &p).unwrap(), 0.0);
        let other = GaussianPosterior::new(v, 0.25).unwrap();
        assert!(matches!(kl_gaussians(&q, &other), Err(Error::Contract(_))));
    }

    #[test]
    fn kl_matches_quadrature_in_one_dimension() {
        // ∫ q ln(q/p) by composite Simpson over ±12σ around the posterior mean.
        let (mu_q, mu_p, lambda) = (0.37, -0.81, 0.3_f64);
        let sd = lambda.sqrt();
        let log_density = |x: f64, mu: f64| -0.5 * (x - mu).powi(2) / lambda - 0.5 * (2.0 * std::f64::consts::PI * lambda).ln();
        let integrand = |x: f64| {
            let lq = log_density(x, mu_q);
            lq.exp() * (lq - log_density(x, mu_p))
        };
        let (a, b) = (mu_q - 12.0 * sd, mu_q + 12.0 * sd);
        let n = 20_000;
        let h = (b - a) / n as f64;
        let mut sum = integrand(a) + integrand(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            sum += if i % 2 == 1 { 4.0 } else { 2.0 } * integrand(x);
        }
        let numeric = sum * h / 3.0;
        let q = GaussianPosterior::new(WeightVector::new(vec![mu_q]).unwrap(), lambda).unwrap();
        let p = GaussianPosterior::new(WeightVector::new(vec![mu_p]).unwrap(), lambda).unwrap();
        assert_relative_eq!(kl_gaussians(&q, &p).unwrap(), numeric, max_relative = 1e-9);
    }

    #[test]
    fn single_voter_vote_is_its_score() {
        let net = net();
        let w = init_weights(&net, 2);
        let ens = VoterEnsemble::from_samples(&net, vec![w.clone()], 0).unwrap();
        let x = [0.2, 0.9, 0.4];
        assert_eq!(mv_score(&ens, &x).unwrap(), diffnet::forward(&net, &w, &x).unwrap());
    }

    #[test]
    fn vote_is_mean_of_scores() {
        // Two one-input tanh voters with scores 0.8 and -0.2 at x = 1.
        let net = Network::new(NetworkSpec::mlp(1, &[])).unwrap();
        let a = WeightVector::new(vec![0.8f64.atanh(), 0.0]).unwrap();
        let b = WeightVector::new(vec![(-0.2f64).atanh(), 0.0]).unwrap();
        let ens = VoterEnsemble::from_samples(&net, vec![a, b], 0).unwrap();
        assert_relative_eq!(mv_score(&ens, &[1.0]).unwrap(), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn empty_ensemble_rejected() {
        let net = net();
        let post = GaussianPosterior::new(init_weights(&net, 0), 0.01).unwrap();
        assert!(VoterEnsemble::sample(&net, &post, 0, 1).is_err());
        assert!(VoterEnsemble::from_samples(&net, vec![], 1).is_err());
    }

    #[test]
    fn vote_converges_to_mean_network() {
        let net = net();
        let mean = init_weights(&net, 11);
        let post = GaussianPosterior::new(mean.clone(), 1e-4).unwrap();
        let x = [0.6, 0.1, 0.8];
        let center = diffnet::forward(&net, &mean, &x).unwrap();
        let mut errors = Vec::new();
        for n in [10, 100, 1000] {
            let ens = VoterEnsemble::sample(&net, &post, n, 4).unwrap();
            let scores = ens.voter_scores(&x).unwrap();
            let m = scores.iter().sum::<f64>() / n as f64;
            let sd = (scores.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
            // Mean-of-noise error plus the O(λ) curvature bias of tanh.
            assert!((m - center).abs() <= 4.0 * sd / (n as f64).sqrt() + 1e-3, "n = {n}");
            errors.push((m - center).abs());
        }
        assert!(errors[2] < 0.01);
    }

    #[test]
    fn posterior_checkpoint_round_trip() {
        let net = net();
        let post = GaussianPosterior::new(init_weights(&net, 8), 0.02).unwrap();
        let mut buf = Vec::new();
        write_posterior(&net, &post, 77, &mut buf).unwrap();
        let (net2, post2, seed) = read_posterior(&mut buf.as_slice()).unwrap();
        assert_eq!(net2.spec(), net.spec());
        assert_eq!(post2, post);
        assert_eq!(seed, 77);
    }
}
