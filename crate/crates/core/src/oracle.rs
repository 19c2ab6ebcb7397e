//! Exact risks on finite worlds by enumeration.
//!
//! A world fixes a distribution `D` over labelled lattice points, a finite
//! noise set `B` with a per-point distribution `ω`, and a finite set of
//! voters with weights `Q`. Every risk is then a finite sum. Points and
//! noises live on an integer lattice so that `x + ε` coincides exactly when
//! two perturbed examples meet, which the pushforward tables rely on.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::posterior::vote_sign;
use crate::risks::{ScoreRow, ScoreTable};
use crate::rng;

pub const WORLD_SCHEMA_VERSION: u32 = 1;
pub const MAX_POINTS: usize = 16;
pub const MAX_NOISES: usize = 8;
pub const MAX_VOTERS: usize = 8;
/// Tolerance on probability-table normalization.
pub const NORM_TOL: f64 = 1e-12;
/// Tolerance on the inequality chains.
pub const CHAIN_TOL: f64 = 1e-12;
/// `n` values checked by the averaged-max chain.
pub const CHAIN_NS: [usize; 5] = [1, 2, 3, 5, 8];

pub type Lattice = Vec<i64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldPoint {
    pub x: Lattice,
    pub y: i8,
    /// `D(x, y)`.
    pub prob: f64,
    /// `ω_{(x,y)}`, one entry per noise.
    pub omega: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteWorld {
    pub schema_version: u32,
    /// ℓ∞ radius of `B` in lattice units.
    pub budget: i64,
    pub noises: Vec<Lattice>,
    pub points: Vec<WorldPoint>,
    /// Every reachable `x + ε`.
    pub cells: Vec<Lattice>,
    /// `voters[h][c]` is voter `h` on cell `c`.
    pub voters: Vec<Vec<f64>>,
    /// `Q`.
    pub weights: Vec<f64>,
}

/// A named invariant that failed on a world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub invariant: String,
    pub detail: String,
}

impl Violation {
    fn new(invariant: &str, detail: String) -> Self {
        Self { invariant: invariant.into(), detail }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactRisks {
    pub averaged: f64,
    /// `(n, averaged-max risk)`.
    pub avgmax: Vec<(usize, f64)>,
    pub worstcase: f64,
    pub avg_surrogate: f64,
    /// `(n, averaged-max surrogate)`.
    pub avgmax_surrogate: Vec<(usize, f64)>,
    pub worstcase_surrogate: f64,
    /// `TV(Π‖Δ)`.
    pub tv_pi_delta: f64,
}

/// Pushforward distributions over perturbed examples `(x + ε, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PushForward {
    /// Randomly perturbed examples.
    pub delta: BTreeMap<(usize, i8), f64>,
    /// Worst-case perturbed examples.
    pub pi: BTreeMap<(usize, i8), f64>,
    /// `½ Σ |Π − Δ|` over the union support.
    pub tv: f64,
    /// Chosen worst noise per point.
    pub worst_noise: Vec<usize>,
    /// Points whose worst noise was picked among ties.
    pub tied: Vec<usize>,
}

fn add(a: &[i64], b: &[i64]) -> Lattice {
    a.iter().zip(b).map(|(u, v)| u + v).collect()
}

impl FiniteWorld {
    pub fn from_json(text: &str) -> Result<Self> {
        let w: FiniteWorld = serde_json::from_str(text)?;
        w.validate()?;
        Ok(w)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Structural checks. Normalization is checked by [`Self::check_invariants`]
    /// so that a mis-normalized world is reported by name.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != WORLD_SCHEMA_VERSION {
            return Err(contract(format!("world schema {} is not {WORLD_SCHEMA_VERSION}", self.schema_version)));
        }
        let (np, nb, nh) = (self.points.len(), self.noises.len(), self.voters.len());
        if !(1..=MAX_POINTS).contains(&np) || !(1..=MAX_NOISES).contains(&nb) || !(1..=MAX_VOTERS).contains(&nh) {
            return Err(contract(format!("world sizes {np}×{nb}×{nh} outside 1..={MAX_POINTS}×{MAX_NOISES}×{MAX_VOTERS}")));
        }
        if self.weights.len() != nh || self.weights.iter().any(|&q| q.is_nan() || q < 0.0) {
            return Err(contract("Q needs one nonnegative weight per voter"));
        }
        let dim = self.noises[0].len();
        if self.noises.iter().any(|e| e.len() != dim || e.iter().any(|v| v.abs() > self.budget)) {
            return Err(contract("noises must share a dimension and lie in the budget ball"));
        }
        for (i, p) in self.points.iter().enumerate() {
            if p.x.len() != dim || (p.y != 1 && p.y != -1) || p.omega.len() != nb || p.prob.is_nan() || p.prob < 0.0 || p.omega.iter().any(|&o| o.is_nan() || o < 0.0) {
                return Err(contract(format!("point {i} is malformed")));
            }
            for e in &self.noises {
                if self.cell_of(&add(&p.x, e)).is_none() {
                    return Err(contract(format!("point {i} perturbed by {e:?} is not a cell")));
                }
            }
        }
        if self.voters.iter().any(|v| v.len() != self.cells.len() || v.iter().any(|s| !(-1.0..=1.0).contains(s))) {
            return Err(contract("voter tables need one value in [-1, 1] per cell"));
        }
        Ok(())
    }

    fn cell_of(&self, z: &[i64]) -> Option<usize> {
        self.cells.iter().position(|c| c == z)
    }

    /// Cell index of point `i` under noise `j`.
    pub fn cell(&self, i: usize, j: usize) -> usize {
        self.cell_of(&add(&self.points[i].x, &self.noises[j])).expect("validated world")
    }

    /// `Σ_h Q(h) h(c)`.
    pub fn vote(&self, c: usize) -> f64 {
        self.voters.iter().zip(&self.weights).map(|(v, q)| q * v[c]).sum()
    }

    fn margin(&self, i: usize, j: usize) -> f64 {
        f64::from(self.points[i].y) * self.vote(self.cell(i, j))
    }

    fn wrong(&self, i: usize, j: usize) -> bool {
        vote_sign(self.vote(self.cell(i, j))) != self.points[i].y
    }

    /// Probability under `ω_i` that the vote is correct.
    pub fn correct_prob(&self, i: usize) -> f64 {
        let p = &self.points[i];
        (0..self.noises.len()).filter(|&j| !self.wrong(i, j)).map(|j| p.omega[j]).sum()
    }

    fn expect(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.points.iter().enumerate().map(|(i, p)| p.prob * f(i)).sum()
    }

    pub fn exact_averaged(&self) -> f64 {
        self.expect(|i| (0..self.noises.len()).filter(|&j| self.wrong(i, j)).map(|j| self.points[i].omega[j]).sum())
    }

    /// `E_D[1 − p_x^n]`.
    pub fn exact_avgmax(&self, n: usize) -> f64 {
        self.expect(|i| 1.0 - self.correct_prob(i).powi(n as i32))
    }

    /// Max over all of `B`, not just the support of `ω`.
    pub fn exact_worstcase(&self) -> f64 {
        self.expect(|i| if (0..self.noises.len()).any(|j| self.wrong(i, j)) { 1.0 } else { 0.0 })
    }

    pub fn exact_avg_surrogate(&self) -> f64 {
        self.expect(|i| (0..self.noises.len()).map(|j| self.points[i].omega[j] * 0.5 * (1.0 - self.margin(i, j))).sum())
    }

    /// `E_D E_{ω^n} ½(1 − min_j y·vote)`, using
    /// `P(min = g_(k)) = S_k^n − S_{k+1}^n` over ascending margins.
    pub fn exact_avgmax_surrogate(&self, n: usize) -> f64 {
        self.expect(|i| {
            let mut g: Vec<(f64, f64)> = (0..self.noises.len()).map(|j| (self.margin(i, j), self.points[i].omega[j])).collect();
            g.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut tail: f64 = g.iter().map(|t| t.1).sum();
            let mut e_min = 0.0;
            for (v, w) in g {
                let next = (tail - w).max(0.0);
                e_min += v * (tail.powi(n as i32) - next.powi(n as i32));
                tail = next;
            }
            0.5 * (1.0 - e_min)
        })
    }

    pub fn exact_worstcase_surrogate(&self) -> f64 {
        self.expect(|i| 0.5 * (1.0 - (0..self.noises.len()).map(|j| self.margin(i, j)).fold(f64::INFINITY, f64::min)))
    }

    /// Worst noise per point for the 0-1 loss: the first fooling noise, or
    /// noise 0 when none fools. Returns whether the choice was tied.
    fn worst_noise(&self, i: usize) -> (usize, bool) {
        let fooling: Vec<usize> = (0..self.noises.len()).filter(|&j| self.wrong(i, j)).collect();
        match fooling.first() {
            Some(&j) => (j, fooling.len() > 1),
            None => (0, self.noises.len() > 1),
        }
    }

    pub fn delta_pi_tv(&self) -> PushForward {
        let mut delta = BTreeMap::new();
        let mut pi = BTreeMap::new();
        let mut worst_noise = Vec::with_capacity(self.points.len());
        let mut tied = Vec::new();
        for (i, p) in self.points.iter().enumerate() {
            for (j, &o) in p.omega.iter().enumerate().filter(|(_, &o)| p.prob * o > 0.0) {
                *delta.entry((self.cell(i, j), p.y)).or_insert(0.0) += p.prob * o;
            }
            let (j, tie) = self.worst_noise(i);
            if tie {
                tied.push(i);
            }
            worst_noise.push(j);
            if p.prob > 0.0 {
                *pi.entry((self.cell(i, j), p.y)).or_insert(0.0) += p.prob;
            }
        }
        let keys: std::collections::BTreeSet<_> = delta.keys().chain(pi.keys()).copied().collect();
        let tv = 0.5 * keys.iter().map(|k| (pi.get(k).unwrap_or(&0.0) - delta.get(k).unwrap_or(&0.0)).abs()).sum::<f64>();
        PushForward { delta, pi, tv, worst_noise, tied }
    }

    /// 0-1 risk of the vote under a table over `(cell, y)`.
    pub fn risk_under(&self, table: &BTreeMap<(usize, i8), f64>) -> f64 {
        table.iter().filter(|((c, y), _)| vote_sign(self.vote(*c)) != *y).map(|(_, p)| p).sum()
    }

    pub fn exact_risks(&self) -> ExactRisks {
        ExactRisks {
            averaged: self.exact_averaged(),
            avgmax: CHAIN_NS.iter().map(|&n| (n, self.exact_avgmax(n))).collect(),
            worstcase: self.exact_worstcase(),
            avg_surrogate: self.exact_avg_surrogate(),
            avgmax_surrogate: CHAIN_NS.iter().map(|&n| (n, self.exact_avgmax_surrogate(n))).collect(),
            worstcase_surrogate: self.exact_worstcase_surrogate(),
            tv_pi_delta: self.delta_pi_tv().tv,
        }
    }

    /// Every invariant the oracle asserts; empty when the world passes.
    pub fn check_invariants(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut check = |ok: bool, name: &str, detail: String| {
            if !ok {
                out.push(Violation::new(name, detail));
            }
        };
        let mass = |v: &mut dyn Iterator<Item = f64>| v.sum::<f64>();

        let d_mass = mass(&mut self.points.iter().map(|p| p.prob));
        check((d_mass - 1.0).abs() <= NORM_TOL, "d_normalized", format!("D sums to {d_mass}"));
        for (i, p) in self.points.iter().enumerate() {
            let s = mass(&mut p.omega.iter().copied());
            check((s - 1.0).abs() <= NORM_TOL, "omega_normalized", format!("ω of point {i} sums to {s}"));
        }
        let q_mass = mass(&mut self.weights.iter().copied());
        check((q_mass - 1.0).abs() <= NORM_TOL, "q_normalized", format!("Q sums to {q_mass}"));

        let push = self.delta_pi_tv();
        let pi_mass = mass(&mut push.pi.values().copied());
        let delta_mass = mass(&mut push.delta.values().copied());
        check((pi_mass - 1.0).abs() <= NORM_TOL, "pi_normalized", format!("Π sums to {pi_mass}"));
        check((delta_mass - 1.0).abs() <= NORM_TOL, "delta_normalized", format!("Δ sums to {delta_mass}"));

        let r = self.exact_risks();
        let (avg, worst) = (r.averaged, r.worstcase);
        let r_delta = self.risk_under(&push.delta);
        let r_pi = self.risk_under(&push.pi);
        check((r_delta - avg).abs() <= CHAIN_TOL, "lemma_averaged_is_delta_risk", format!("{r_delta} vs {avg}"));
        check((r_pi - worst).abs() <= CHAIN_TOL, "lemma_worstcase_is_pi_risk", format!("{r_pi} vs {worst}"));

        let mut prev = ("averaged".to_string(), avg);
        for &(n, v) in &r.avgmax {
            check(prev.1 <= v + CHAIN_TOL, "prop1_chain", format!("{} = {} > avgmax({n}) = {v}", prev.0, prev.1));
            prev = (format!("avgmax({n})"), v);
        }
        check(prev.1 <= worst + CHAIN_TOL, "prop1_chain", format!("{} = {} > worstcase = {worst}", prev.0, prev.1));
        let one = r.avgmax[0].1;
        check((one - avg).abs() <= CHAIN_TOL, "prop1_n1_equality", format!("avgmax(1) = {one} vs averaged = {avg}"));

        check(worst - push.tv <= avg + CHAIN_TOL, "prop2_sandwich", format!("worstcase {worst} − TV {} > averaged {avg}", push.tv));
        check(avg <= worst + CHAIN_TOL, "prop2_sandwich", format!("averaged {avg} > worstcase {worst}"));

        check(avg <= 2.0 * r.avg_surrogate, "surrogate_factor2", format!("averaged {avg} > 2·{}", r.avg_surrogate));
        for (&(n, v), &(_, s)) in r.avgmax.iter().zip(&r.avgmax_surrogate) {
            check(v <= 2.0 * s + CHAIN_TOL, "surrogate_factor2", format!("avgmax({n}) {v} > 2·{s}"));
        }
        check(worst <= 2.0 * r.worstcase_surrogate, "surrogate_factor2", format!("worstcase {worst} > 2·{}", r.worstcase_surrogate));

        let values = [avg, worst, r.avg_surrogate, r.worstcase_surrogate, push.tv];
        check(values.iter().all(|v| (-CHAIN_TOL..=1.0 + CHAIN_TOL).contains(v)), "unit_interval", format!("{values:?}"));
        out
    }

    /// Draws `m` examples from `D` with `n` i.i.d. noises each from `ω` and
    /// tabulates every voter on them, weighted by `Q`.
    pub fn sample_table(&self, m: usize, n: usize, rng: &mut impl Rng) -> Result<ScoreTable> {
        if m == 0 || n == 0 {
            return Err(contract("sampling needs m >= 1 and n >= 1"));
        }
        let d = WeightedIndex::new(self.points.iter().map(|p| p.prob)).map_err(|e| contract(e.to_string()))?;
        let omegas = self
            .points
            .iter()
            .map(|p| WeightedIndex::new(&p.omega).map_err(|e| contract(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let rows = (0..m)
            .map(|_| {
                let i = d.sample(rng);
                let mut scores = Vec::with_capacity(n * self.voters.len());
                for _ in 0..n {
                    let c = self.cell(i, omegas[i].sample(rng));
                    scores.extend(self.voters.iter().map(|v| v[c]));
                }
                ScoreRow { y: self.points[i].y, n, scores }
            })
            .collect();
        ScoreTable::from_rows(self.voters.len(), Some(self.weights.clone()), rows)
    }
}

/// `Σ q ln(q/p)` for discrete distributions.
pub fn kl_discrete(q: &[f64], p: &[f64]) -> Result<f64> {
    if q.len() != p.len() {
        return Err(contract("discrete KL needs tables of equal length"));
    }
    Ok(q.iter()
        .zip(p)
        .map(|(&a, &b)| if a == 0.0 { 0.0 } else if b == 0.0 { f64::INFINITY } else { a * (a / b).ln() })
        .sum())
}

/// Resolution of the dyadic grids used by [`random_world`].
const PROB_UNITS: u32 = 1 << 10;
const VALUE_UNITS: i32 = 1 << 8;

/// Nonnegative multiples of `2^-10` summing to exactly one.
fn dyadic_simplex(len: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut cuts: Vec<u32> = (0..len - 1).map(|_| rng.random_range(0..=PROB_UNITS)).collect();
    cuts.push(0);
    cuts.push(PROB_UNITS);
    cuts.sort_unstable();
    cuts.windows(2).map(|w| f64::from(w[1] - w[0]) / f64::from(PROB_UNITS)).collect()
}

/// Random world with dyadic probabilities, voter values and weights, so that
/// the vote and every first-order risk are exact in `f64`.
pub fn random_world(rng: &mut impl Rng) -> FiniteWorld {
    let dim = rng.random_range(1..=2usize);
    let budget = rng.random_range(1..=2i64);
    let n_noises = rng.random_range(1..=MAX_NOISES);
    let n_points = rng.random_range(1..=MAX_POINTS);
    let n_voters = rng.random_range(1..=MAX_VOTERS);
    let noises: Vec<Lattice> = (0..n_noises).map(|_| (0..dim).map(|_| rng.random_range(-budget..=budget)).collect()).collect();
    let probs = dyadic_simplex(n_points, rng);
    let points: Vec<WorldPoint> = probs
        .into_iter()
        .map(|prob| WorldPoint {
            x: (0..dim).map(|_| rng.random_range(0..4i64)).collect(),
            y: if rng.random_bool(0.5) { 1 } else { -1 },
            prob,
            omega: dyadic_simplex(n_noises, rng),
        })
        .collect();
    let mut cells: Vec<Lattice> = points.iter().flat_map(|p| noises.iter().map(|e| add(&p.x, e))).collect();
    cells.sort();
    cells.dedup();
    let voters = (0..n_voters)
        .map(|_| cells.iter().map(|_| f64::from(rng.random_range(-VALUE_UNITS..=VALUE_UNITS)) / f64::from(VALUE_UNITS)).collect())
        .collect();
    FiniteWorld { schema_version: WORLD_SCHEMA_VERSION, budget, noises, points, cells, voters, weights: dyadic_simplex(n_voters, rng) }
}

/// Outcome of checking many random worlds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub worlds: usize,
    pub seed: u64,
    /// `(world index, violation)`.
    pub violations: Vec<(usize, Violation)>,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every invariant on `worlds` random worlds, in parallel.
pub fn sweep(worlds: usize, seed: u64) -> SweepReport {
    let violations = (0..worlds)
        .into_par_iter()
        .flat_map_iter(|w| {
            let world = random_world(&mut rng::stream(seed, "world", w as u64));
            world.check_invariants().into_iter().map(move |v| (w, v))
        })
        .collect();
    SweepReport { worlds, seed, violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// One point at the origin of a 1-D lattice, noises {0, +1}.
    fn two_noise_world(omega: [f64; 2], voter_on_shift: f64) -> FiniteWorld {
        FiniteWorld {
            schema_version: WORLD_SCHEMA_VERSION,
            budget: 1,
            noises: vec![vec![0], vec![1]],
            points: vec![WorldPoint { x: vec![0], y: 1, prob: 1.0, omega: omega.to_vec() }],
            cells: vec![vec![0], vec![1]],
            voters: vec![vec![0.5, voter_on_shift]],
            weights: vec![1.0],
        }
    }

    #[test]
    fn dirac_noise_gives_clean_risk() {
        let w = two_noise_world([1.0, 0.0], -0.5);
        assert_eq!(w.exact_averaged(), 0.0);
        // The fooling noise lies in B, so the worst case still sees it.
        assert_eq!(w.exact_worstcase(), 1.0);
        let only_zero = FiniteWorld { noises: vec![vec![0]], points: vec![WorldPoint { omega: vec![1.0], ..w.points[0].clone() }], ..w };
        assert_eq!(only_zero.exact_worstcase(), 0.0);
    }

    #[test]
    fn half_fooling_noise() {
        let w = two_noise_world([0.5, 0.5], -0.5);
        assert_eq!(w.exact_averaged(), 0.5);
        assert_eq!(w.exact_avgmax(1), 0.5);
        assert_eq!(w.exact_avgmax(2), 0.75);
        let push = w.delta_pi_tv();
        assert_eq!(push.tv, 0.5);
        assert_eq!(w.exact_averaged(), w.exact_worstcase() - 0.5);
        assert!(w.check_invariants().is_empty());
    }

    #[test]
    fn dirac_at_worst_noise_closes_the_gap() {
        let w = two_noise_world([0.0, 1.0], -0.5);
        let push = w.delta_pi_tv();
        assert_eq!(push.delta, push.pi);
        assert_eq!(push.tv, 0.0);
        assert_eq!(w.exact_averaged(), w.exact_worstcase());
    }

    #[test]
    fn avgmax_surrogate_matches_brute_force() {
        let mut r = rng::stream(3, "oracle-test", 0);
        for _ in 0..50 {
            let w = random_world(&mut r);
            for n in 1..=3usize {
                // Enumerate all n-tuples of noises.
                let nb = w.noises.len();
                let brute = w.expect(|i| {
                    let mut total = 0.0;
                    for code in 0..nb.pow(n as u32) {
                        let (mut c, mut p, mut gmin) = (code, 1.0, f64::INFINITY);
                        for _ in 0..n {
                            let j = c % nb;
                            c /= nb;
                            p *= w.points[i].omega[j];
                            gmin = gmin.min(w.margin(i, j));
                        }
                        total += p * 0.5 * (1.0 - gmin);
                    }
                    total
                });
                assert!((brute - w.exact_avgmax_surrogate(n)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lemma_identities_are_bit_exact_on_dyadic_worlds() {
        let mut r = rng::stream(5, "oracle-test", 0);
        for _ in 0..200 {
            let w = random_world(&mut r);
            let push = w.delta_pi_tv();
            assert_eq!(w.risk_under(&push.delta), w.exact_averaged());
            assert_eq!(w.risk_under(&push.pi), w.exact_worstcase());
        }
    }

    #[test]
    fn random_sweep_is_clean() {
        let report = sweep(100, 11);
        assert!(report.passed(), "{:?}", report.violations);
    }

    #[test]
    fn corrupted_mass_is_named() {
        let mut w = two_noise_world([0.5, 0.5], -0.5);
        w.points[0].prob = 0.9;
        let names: Vec<String> = w.check_invariants().into_iter().map(|v| v.invariant).collect();
        assert!(names.contains(&"pi_normalized".to_string()));
        assert!(names.contains(&"d_normalized".to_string()));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let w = random_world(&mut rng::stream(1, "oracle-test", 0));
        assert_eq!(FiniteWorld::from_json(&w.to_json().unwrap()).unwrap(), w);
        let mut bad = w.clone();
        bad.cells.pop();
        assert!(bad.validate().is_err());
        let mut bad = w;
        bad.noises[0][0] = 99;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn sampled_estimates_agree_with_exact() {
        let w = two_noise_world([0.25, 0.75], -0.5);
        let t = w.sample_table(10_000, 1, &mut rng::stream(2, "oracle-test", 0)).unwrap();
        let est = t.avg_risk_01().value;
        let sigma = (0.75f64 * 0.25 / 10_000.0).sqrt();
        assert!((est - w.exact_averaged()).abs() <= 3.0 * sigma);
    }

    #[test]
    fn discrete_kl() {
        assert_eq!(kl_discrete(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        assert_eq!(kl_discrete(&[1.0, 0.0], &[0.5, 0.5]).unwrap(), 2f64.ln());
        assert_eq!(kl_discrete(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), f64::INFINITY);
    }
}
