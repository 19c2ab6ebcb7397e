//! ℓ∞-bounded input perturbations.
//!
//! Gradient attacks ascend the linear loss `½(1 − y·h(x+ε))` of a single
//! white-box network. The `*_u` kinds follow one attack with `n` uniform
//! offsets in `[-u, u]^d`, which turns a single adversarial point into a
//! perturbation distribution around it.

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diffnet::{self, LinearLoss, Network, WeightVector};
use crate::error::{contract, Error, Result};
use crate::posterior::GaussianPosterior;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    None,
    Unif,
    Fgsm,
    Ifgsm,
    Pgd,
    IfgsmU,
    PgdU,
}

impl AttackKind {
    pub fn name(self) -> &'static str {
        match self {
            AttackKind::None => "none",
            AttackKind::Unif => "unif",
            AttackKind::Fgsm => "fgsm",
            AttackKind::Ifgsm => "ifgsm",
            AttackKind::Pgd => "pgd",
            AttackKind::IfgsmU => "ifgsm_u",
            AttackKind::PgdU => "pgd_u",
        }
    }

    /// The gradient attack behind a uniform-offset kind.
    pub fn base(self) -> Option<AttackKind> {
        match self {
            AttackKind::IfgsmU => Some(AttackKind::Ifgsm),
            AttackKind::PgdU => Some(AttackKind::Pgd),
            _ => None,
        }
    }

    pub fn is_gradient(self) -> bool {
        matches!(self, AttackKind::Fgsm | AttackKind::Ifgsm | AttackKind::Pgd)
    }
}

impl std::str::FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "none" | "---" => AttackKind::None,
            "unif" => AttackKind::Unif,
            "fgsm" => AttackKind::Fgsm,
            "ifgsm" => AttackKind::Ifgsm,
            "pgd" => AttackKind::Pgd,
            "ifgsm_u" => AttackKind::IfgsmU,
            "pgd_u" => AttackKind::PgdU,
            other => return Err(contract(format!("unknown attack kind `{other}`"))),
        })
    }
}

impl std::fmt::Display for AttackKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackConfig {
    pub kind: AttackKind,
    /// ℓ∞ radius `b` of the perturbation ball.
    pub budget: f64,
    pub iterations: usize,
    pub step_size: f64,
    /// Half-width `u` of the uniform offsets of the `*_u` kinds.
    pub uniform_offset: f64,
    pub n_perturbations: usize,
    /// Keep `x + ε` inside `[0, 1]^d`.
    pub clamp_input: bool,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            kind: AttackKind::None,
            budget: 0.1,
            iterations: 100,
            step_size: 0.008,
            uniform_offset: 0.01,
            n_perturbations: 1,
            clamp_input: true,
            seed: 0,
        }
    }
}

impl AttackConfig {
    pub fn new(kind: AttackKind, budget: f64) -> Self {
        Self { kind, budget, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.budget.is_finite() && self.budget >= 0.0) {
            return Err(contract(format!("budget must be finite and non-negative, got {}", self.budget)));
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(contract("step size must be positive"));
        }
        if !(self.uniform_offset >= 0.0 && self.uniform_offset <= self.budget) && self.kind.base().is_some() {
            return Err(contract(format!("uniform offset {} must lie in [0, budget = {}]", self.uniform_offset, self.budget)));
        }
        if self.n_perturbations == 0 {
            return Err(contract("n_perturbations must be at least 1"));
        }
        Ok(())
    }
}

/// One example with its perturbation list `E = {ε_1..ε_n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedSample {
    pub x: Vec<f64>,
    pub y: i8,
    pub perturbations: Vec<Vec<f64>>,
}

impl PerturbedSample {
    pub fn n(&self) -> usize {
        self.perturbations.len()
    }

    /// `x + ε_j`.
    pub fn point(&self, j: usize) -> Vec<f64> {
        self.x.iter().zip(&self.perturbations[j]).map(|(a, e)| a + e).collect()
    }

    /// The same example keeping only the first `n` perturbations.
    pub fn prefix(&self, n: usize) -> PerturbedSample {
        PerturbedSample {
            x: self.x.clone(),
            y: self.y,
            perturbations: self.perturbations[..n.min(self.n())].to_vec(),
        }
    }
}

/// Projection onto `[-b, b]^d`.
pub fn clip_linf(z: &mut [f64], b: f64) {
    z.iter_mut().for_each(|v| *v = v.clamp(-b, b));
}

/// ℓ∞ norm.
pub fn linf(z: &[f64]) -> f64 {
    z.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn project(eps: &mut [f64], x: &[f64], b: f64, clamp_input: bool) {
    clip_linf(eps, b);
    if clamp_input {
        for (e, &xi) in eps.iter_mut().zip(x) {
            *e = (xi + *e).clamp(0.0, 1.0) - xi;
        }
        // Rounding in the subtraction must not leak outside the ball.
        clip_linf(eps, b);
    }
}

#[inline]
fn sign(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn shifted(x: &[f64], eps: &[f64]) -> Vec<f64> {
    x.iter().zip(eps).map(|(a, e)| a + e).collect()
}

/// A single gradient attack (`fgsm`, `ifgsm` or `pgd`) on the network `w`.
///
/// `rng` is only consumed by the random start of `pgd`.
pub fn attack_once(cfg: &AttackConfig, net: &Network, w: &WeightVector, x: &[f64], y: i8, rng: &mut impl Rng) -> Result<Vec<f64>> {
    let b = cfg.budget;
    let y = f64::from(y);
    let mut eps = vec![0.0; x.len()];
    match cfg.kind {
        AttackKind::Fgsm => {
            let (_, gx) = diffnet::input_grad(net, w, x, y, &LinearLoss)?;
            eps.iter_mut().zip(&gx).for_each(|(e, &g)| *e = b * sign(g));
            project(&mut eps, x, b, cfg.clamp_input);
        }
        AttackKind::Ifgsm | AttackKind::Pgd => {
            if cfg.kind == AttackKind::Pgd {
                eps.iter_mut().for_each(|e| *e = if b > 0.0 { rng.random_range(-b..=b) } else { 0.0 });
                project(&mut eps, x, b, cfg.clamp_input);
            }
            for _ in 0..cfg.iterations {
                let (_, gx) = diffnet::input_grad(net, w, &shifted(x, &eps), y, &LinearLoss)?;
                eps.iter_mut().zip(&gx).for_each(|(e, &g)| *e += cfg.step_size * sign(g));
                project(&mut eps, x, b, cfg.clamp_input);
            }
        }
        other => return Err(contract(format!("`{other}` is not a single gradient attack"))),
    }
    Ok(eps)
}

/// `ε` uniform in `[-b, b]^d`, projected into the input domain if configured.
pub fn unif_noise(cfg: &AttackConfig, x: &[f64], rng: &mut impl Rng) -> Vec<f64> {
    let b = cfg.budget;
    let mut eps: Vec<f64> = x.iter().map(|_| if b > 0.0 { rng.random_range(-b..=b) } else { 0.0 }).collect();
    project(&mut eps, x, b, cfg.clamp_input);
    eps
}

/// Builds `E` for one example.
///
/// Draws are sequential on `rng`, so the first `n'` perturbations built for
/// `n ≥ n'` coincide with the set built for `n'` from the same stream.
#[allow(clippy::too_many_arguments)]
pub fn build_perturbation_set(cfg: &AttackConfig, net: &Network, w: &WeightVector, x: &[f64], y: i8, n: usize, rng: &mut impl Rng) -> Result<PerturbedSample> {
    if n == 0 {
        return Err(contract("a perturbation set needs n >= 1"));
    }
    let b = cfg.budget;
    let perturbations = match cfg.kind {
        AttackKind::None => vec![vec![0.0; x.len()]; n],
        AttackKind::Unif => (0..n).map(|_| unif_noise(cfg, x, rng)).collect(),
        AttackKind::PgdU | AttackKind::IfgsmU => {
            let base = AttackConfig { kind: cfg.kind.base().expect("uniform-offset kind"), ..cfg.clone() };
            let center = attack_once(&base, net, w, x, y, rng)?;
            let u = cfg.uniform_offset;
            (0..n)
                .map(|_| {
                    let mut eps: Vec<f64> = center.iter().map(|&c| c + if u > 0.0 { rng.random_range(-u..=u) } else { 0.0 }).collect();
                    project(&mut eps, x, b, cfg.clamp_input);
                    eps
                })
                .collect()
        }
        other => return Err(contract(format!("`{other}` does not define a perturbation distribution; use attack_once"))),
    };
    Ok(PerturbedSample { x: x.to_vec(), y, perturbations })
}

/// A single perturbation as used while training: `n = 1` draws for the
/// distribution kinds, the plain attack for gradient kinds.
pub fn defense_perturbation(cfg: &AttackConfig, net: &Network, w: &WeightVector, x: &[f64], y: i8, rng: &mut impl Rng) -> Result<Vec<f64>> {
    if cfg.kind.is_gradient() {
        attack_once(cfg, net, w, x, y, rng)
    } else {
        Ok(build_perturbation_set(cfg, net, w, x, y, 1, rng)?.perturbations.pop().expect("one perturbation"))
    }
}

/// White-box target for evaluation sets: one network drawn from the prior
/// on stream `(seed, tag, 0)`.
pub fn attack_target_for_eval(prior: &GaussianPosterior, seed: u64, tag: &str) -> WeightVector {
    prior.sample(&mut rng::stream(seed, tag, 0))
}

/// Rounds to `f32` toward zero so that `|stored| ≤ |value|`.
pub fn quantize_toward_zero(value: f64) -> f32 {
    let q = value as f32;
    if q != 0.0 && f64::from(q).abs() > value.abs() {
        f32::from_bits(q.to_bits() - 1)
    } else {
        q
    }
}

/// Rounds every perturbation of `sample` through [`quantize_toward_zero`],
/// exactly as a write/read cycle of the record stream would.
pub fn quantize_sample(sample: &mut PerturbedSample) {
    for eps in &mut sample.perturbations {
        eps.iter_mut().for_each(|e| *e = f64::from(quantize_toward_zero(*e)));
    }
}

/// One decoded record of a perturbation stream.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationRecord {
    pub index: u64,
    pub label: i8,
    pub perturbations: Vec<Vec<f64>>,
}

const STREAM_MAGIC: &[u8; 8] = b"ADVBPERT";

/// Writes `magic | dim (u32) | count (u64)` followed by one record per
/// sample: `index (u64) | label (i8) | n (u32) | n·dim f32`. All little-endian.
pub fn write_perturbation_stream(samples: &[(u64, &PerturbedSample)], out: &mut impl Write) -> Result<()> {
    let dim = samples.first().map_or(0, |(_, s)| s.x.len());
    out.write_all(STREAM_MAGIC)?;
    out.write_all(&(dim as u32).to_le_bytes())?;
    out.write_all(&(samples.len() as u64).to_le_bytes())?;
    for (index, s) in samples {
        if s.x.len() != dim {
            return Err(Error::Shape("records of one stream must share a dimension".into()));
        }
        out.write_all(&index.to_le_bytes())?;
        out.write_all(&s.y.to_le_bytes())?;
        out.write_all(&(s.n() as u32).to_le_bytes())?;
        for eps in &s.perturbations {
            for &e in eps {
                out.write_all(&quantize_toward_zero(e).to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_perturbation_stream(input: &mut impl Read) -> Result<Vec<PerturbationRecord>> {
    fn take<const N: usize>(input: &mut impl Read) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        input.read_exact(&mut buf)?;
        Ok(buf)
    }
    if &take::<8>(input)? != STREAM_MAGIC {
        return Err(Error::Checkpoint("bad perturbation stream magic".into()));
    }
    let dim = u32::from_le_bytes(take(input)?) as usize;
    let count = u64::from_le_bytes(take(input)?);
    let mut records = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let index = u64::from_le_bytes(take(input)?);
        let label = i8::from_le_bytes(take(input)?);
        let n = u32::from_le_bytes(take(input)?) as usize;
        let mut raw = vec![0u8; n * dim * 4];
        input.read_exact(&mut raw)?;
        let flat: Vec<f64> = raw.chunks_exact(4).map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes")))).collect();
        let perturbations = if dim == 0 { vec![Vec::new(); n] } else { flat.chunks(dim).map(<[f64]>::to_vec).collect() };
        records.push(PerturbationRecord { index, label, perturbations });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffnet::{init_weights, NetworkSpec};
    use proptest::prelude::*;
    use rand::Rng;

    fn linear_voter(a: &[f64]) -> (Network, WeightVector) {
        let net = Network::new(NetworkSpec::mlp(a.len(), &[])).unwrap();
        let mut w = a.to_vec();
        w.push(0.0);
        (net, WeightVector::new(w).unwrap())
    }

    #[test]
    fn fgsm_on_linear_voter_pushes_against_margin() {
        let a = [0.7, -1.3, 0.2, -0.05];
        let (net, w) = linear_voter(&a);
        let cfg = AttackConfig { clamp_input: false, ..AttackConfig::new(AttackKind::Fgsm, 0.1) };
        let eps = attack_once(&cfg, &net, &w, &[0.5; 4], 1, &mut rng::stream(0, "t", 0)).unwrap();
        for (e, ai) in eps.iter().zip(&a) {
            assert_eq!(*e, -0.1 * ai.signum());
        }
    }

    #[test]
    fn zero_budget_means_zero_perturbation() {
        let net = Network::new(NetworkSpec::mlp(3, &[4])).unwrap();
        let w = init_weights(&net, 1);
        let x = [0.2, 0.5, 0.9];
        for kind in [AttackKind::Fgsm, AttackKind::Ifgsm, AttackKind::Pgd] {
            let cfg = AttackConfig { iterations: 5, uniform_offset: 0.0, ..AttackConfig::new(kind, 0.0) };
            let eps = attack_once(&cfg, &net, &w, &x, -1, &mut rng::stream(0, "t", 0)).unwrap();
            assert!(eps.iter().all(|&e| e == 0.0), "{kind}");
        }
        for kind in [AttackKind::Unif, AttackKind::PgdU, AttackKind::IfgsmU, AttackKind::None] {
            let cfg = AttackConfig { iterations: 5, uniform_offset: 0.0, ..AttackConfig::new(kind, 0.0) };
            let set = build_perturbation_set(&cfg, &net, &w, &x, 1, 3, &mut rng::stream(0, "t", 0)).unwrap();
            assert!(set.perturbations.iter().flatten().all(|&e| e == 0.0), "{kind}");
        }
    }

    #[test]
    fn unsupported_kinds_rejected() {
        let net = Network::new(NetworkSpec::mlp(2, &[])).unwrap();
        let w = init_weights(&net, 1);
        let cfg = AttackConfig::new(AttackKind::Unif, 0.1);
        assert!(matches!(attack_once(&cfg, &net, &w, &[0.1, 0.2], 1, &mut rng::stream(0, "t", 0)), Err(Error::Contract(_))));
        let cfg = AttackConfig::new(AttackKind::Pgd, 0.1);
        assert!(build_perturbation_set(&cfg, &net, &w, &[0.1, 0.2], 1, 2, &mut rng::stream(0, "t", 0)).is_err());
        let cfg = AttackConfig::new(AttackKind::None, 0.1);
        assert!(build_perturbation_set(&cfg, &net, &w, &[0.1, 0.2], 1, 0, &mut rng::stream(0, "t", 0)).is_err());
    }

    #[test]
    fn uniform_noise_fills_the_box() {
        let cfg = AttackConfig { clamp_input: false, ..AttackConfig::new(AttackKind::Unif, 0.2) };
        let x = [0.5; 3];
        let mut rng = rng::stream(3, "u", 0);
        let mut max = [0.0f64; 3];
        for _ in 0..10_000 {
            let e = unif_noise(&cfg, &x, &mut rng);
            for c in 0..3 {
                max[c] = max[c].max(e[c].abs());
            }
        }
        for m in max {
            assert!(m > 0.99 * 0.2 && m <= 0.2, "max {m}");
        }
        assert_eq!(unif_noise(&cfg, &x, &mut rng::stream(1, "u", 2)), unif_noise(&cfg, &x, &mut rng::stream(1, "u", 2)));
    }

    #[test]
    fn no_attack_gives_zero_set() {
        let net = Network::new(NetworkSpec::mlp(2, &[])).unwrap();
        let w = init_weights(&net, 1);
        let set = build_perturbation_set(&AttackConfig::new(AttackKind::None, 0.1), &net, &w, &[0.3, 0.4], 1, 3, &mut rng::stream(0, "t", 0)).unwrap();
        assert_eq!(set.perturbations, vec![vec![0.0, 0.0]; 3]);
    }

    #[test]
    fn zero_offset_repeats_the_attack() {
        let net = Network::new(NetworkSpec::mlp(3, &[4])).unwrap();
        let w = init_weights(&net, 5);
        let cfg = AttackConfig { iterations: 10, uniform_offset: 0.0, ..AttackConfig::new(AttackKind::PgdU, 0.1) };
        let set = build_perturbation_set(&cfg, &net, &w, &[0.2, 0.5, 0.9], 1, 4, &mut rng::stream(0, "t", 0)).unwrap();
        assert!(set.perturbations.windows(2).all(|p| p[0] == p[1]));
        assert!(set.perturbations[0].iter().any(|&e| e != 0.0));
    }

    #[test]
    fn eval_target_is_reproducible() {
        let mean = WeightVector::new(vec![0.1, -0.4, 2.0]).unwrap();
        let prior = GaussianPosterior::new(mean.clone(), 1e-30).unwrap();
        let t = attack_target_for_eval(&prior, 3, "eval-target");
        for (a, b) in t.as_slice().iter().zip(mean.as_slice()) {
            assert!((a - b).abs() < 1e-13);
        }
        let prior = GaussianPosterior::new(mean, 0.1).unwrap();
        assert_eq!(attack_target_for_eval(&prior, 3, "a"), attack_target_for_eval(&prior, 3, "a"));
        let distinct: std::collections::HashSet<Vec<u64>> = (0..100)
            .flat_map(|s| {
                let a = attack_target_for_eval(&prior, s, "a");
                let b = attack_target_for_eval(&prior, s, "b");
                [a, b].map(|v| v.as_slice().iter().map(|f| f.to_bits()).collect::<Vec<u64>>())
            })
            .collect();
        assert_eq!(distinct.len(), 200);
    }

    #[test]
    fn quantization_never_grows_magnitude() {
        for v in [0.1, -0.1, 0.3, -0.3, 1.0 / 3.0, -2.0 / 3.0, 0.0, 1e-30, -0.009_999_999] {
            let q = quantize_toward_zero(v);
            assert!(f64::from(q).abs() <= v.abs(), "{v}");
            assert!((f64::from(q) - v).abs() < 1e-6);
        }
    }

    #[test]
    fn record_stream_round_trip() {
        let s1 = PerturbedSample { x: vec![0.1, 0.2], y: 1, perturbations: vec![vec![0.05, -0.1], vec![0.0, 0.1]] };
        let s2 = PerturbedSample { x: vec![0.3, 0.4], y: -1, perturbations: vec![vec![-0.1, 0.025]] };
        let mut buf = Vec::new();
        write_perturbation_stream(&[(4, &s1), (9, &s2)], &mut buf).unwrap();
        let recs = read_perturbation_stream(&mut buf.as_slice()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].index, 4);
        assert_eq!(recs[1].label, -1);
        let mut q1 = s1.clone();
        quantize_sample(&mut q1);
        assert_eq!(recs[0].perturbations, q1.perturbations);
    }

    #[test]
    fn ifgsm_beats_fgsm_on_most_examples() {
        let net = Network::new(NetworkSpec::mlp(6, &[8])).unwrap();
        let w = init_weights(&net, 21);
        let b = 0.1;
        let fgsm = AttackConfig::new(AttackKind::Fgsm, b);
        let ifgsm = AttackConfig { iterations: 100, step_size: 0.008, ..AttackConfig::new(AttackKind::Ifgsm, b) };
        let mut data_rng = rng::stream(2, "examples", 0);
        let mut wins = 0;
        for i in 0..200 {
            let x: Vec<f64> = (0..6).map(|_| data_rng.random::<f64>()).collect();
            let y = if i % 2 == 0 { 1 } else { -1 };
            let loss = |eps: &[f64]| 0.5 * (1.0 - f64::from(y) * diffnet::forward(&net, &w, &shifted(&x, eps)).unwrap());
            let e1 = attack_once(&fgsm, &net, &w, &x, y, &mut data_rng).unwrap();
            let e2 = attack_once(&ifgsm, &net, &w, &x, y, &mut data_rng).unwrap();
            if loss(&e2) >= loss(&e1) - 1e-12 {
                wins += 1;
            }
        }
        assert!(wins >= 190, "ifgsm won {wins}/200");
    }

    #[test]
    fn projection_is_idempotent() {
        let mut z = vec![0.3, -0.7, 0.05, -0.01];
        clip_linf(&mut z, 0.1);
        let once = z.clone();
        clip_linf(&mut z, 0.1);
        assert_eq!(z, once);
    }

    fn kind_strategy() -> impl Strategy<Value = AttackKind> {
        prop_oneof![Just(AttackKind::None), Just(AttackKind::Unif), Just(AttackKind::PgdU), Just(AttackKind::IfgsmU)]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn every_perturbation_stays_in_the_ball(
            kind in kind_strategy(),
            b in 0.0f64..0.5,
            u_frac in 0.0f64..1.0,
            clamp in any::<bool>(),
            seed in any::<u64>(),
            x in proptest::collection::vec(0.0f64..=1.0, 3),
        ) {
            let net = Network::new(NetworkSpec::mlp(3, &[4])).unwrap();
            let w = init_weights(&net, seed);
            let cfg = AttackConfig { iterations: 8, step_size: 0.05, uniform_offset: b * u_frac, clamp_input: clamp, ..AttackConfig::new(kind, b) };
            let set = build_perturbation_set(&cfg, &net, &w, &x, 1, 5, &mut rng::stream(seed, "p", 0)).unwrap();
            for eps in &set.perturbations {
                prop_assert!(linf(eps) <= b + 1e-12);
                if clamp {
                    for (xi, e) in x.iter().zip(eps) {
                        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&(xi + e)));
                    }
                }
            }
        }

        #[test]
        fn prefixes_are_stable(kind in kind_strategy(), seed in any::<u64>(), n_short in 1usize..5) {
            let net = Network::new(NetworkSpec::mlp(3, &[4])).unwrap();
            let w = init_weights(&net, seed);
            let cfg = AttackConfig { iterations: 5, ..AttackConfig::new(kind, 0.1) };
            let x = [0.3, 0.6, 0.1];
            let long = build_perturbation_set(&cfg, &net, &w, &x, -1, 6, &mut rng::stream(seed, "p", 1)).unwrap();
            let short = build_perturbation_set(&cfg, &net, &w, &x, -1, n_short, &mut rng::stream(seed, "p", 1)).unwrap();
            prop_assert_eq!(&long.perturbations[..n_short], &short.perturbations[..]);
        }

        #[test]
        fn clip_is_idempotent(z in proptest::collection::vec(-2.0f64..2.0, 1..20), b in 0.0f64..1.0) {
            let mut once = z.clone();
            clip_linf(&mut once, b);
            let mut twice = once.clone();
            clip_linf(&mut twice, b);
            prop_assert_eq!(once, twice);
        }
    }
}
