//! PAC-Bayes certificates for the averaged and averaged-max surrogate risks.
//!
//! `bound_eq8` inverts the binary kl, `bound_eq9` is its Pinsker relaxation
//! and `bound_eq10` bounds the averaged-max risk with an extra total-variation
//! term. All three take a union bound over `T` candidate priors. The values
//! are on the surrogate scale; [`lift_to_01`] doubles them into certificates
//! on the 0-1 risk of the majority vote.

use serde::{Deserialize, Serialize};

use crate::attacks::{AttackConfig, PerturbedSample};
use crate::error::{contract, Result};
use crate::posterior::VoterEnsemble;
use crate::risks::ScoreTable;

/// Width at which kl inversion stops bisecting.
pub const KL_INV_TOL: f64 = 1e-9;
/// Iteration cap for kl inversion.
pub const KL_INV_MAX_ITER: usize = 80;
/// Additional stopping condition on the kl gap across the final bracket.
const KL_GAP_TOL: f64 = 1e-10;

/// Bernoulli kl divergence `kl(q‖p)`.
pub fn binary_kl(q: f64, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) || !(0.0..=1.0).contains(&p) {
        return Err(contract(format!("binary kl arguments must lie in [0, 1], got q={q}, p={p}")));
    }
    Ok(binary_kl_unchecked(q, p))
}

fn binary_kl_unchecked(q: f64, p: f64) -> f64 {
    if q == p {
        return 0.0;
    }
    // Small-argument forms keep the expansion accurate near p = 0 and p = 1.
    let a = if q == 0.0 { 0.0 } else if p == 0.0 { f64::INFINITY } else { q * (q / p).ln() };
    let b = if q == 1.0 {
        0.0
    } else if p == 1.0 {
        f64::INFINITY
    } else {
        (1.0 - q) * ((1.0 - q).ln() - (-p).ln_1p())
    };
    (a + b).max(0.0)
}

/// Saturation point `1⁻` of the inversion. Below it, neighbouring floats
/// change `kl(q‖·)` by at most about `1e-9`, so the inverse stays resolvable.
pub const ONE_MINUS: f64 = 1.0 - 1e-7;

/// `sup { r ∈ [q, 1] : kl(q‖r) ≤ c }` by bisection.
///
/// Returns a point `r` with `kl(q‖r) ≤ c`. When even `kl(q‖1⁻) ≤ c` the
/// result saturates at [`ONE_MINUS`] (or at one for `c = ∞`).
pub fn kl_inverse_sup(q: f64, c: f64) -> f64 {
    let q = q.clamp(0.0, 1.0);
    if c.is_nan() || c <= 0.0 || q >= ONE_MINUS {
        return q;
    }
    if c == f64::INFINITY {
        return 1.0;
    }
    if binary_kl_unchecked(q, ONE_MINUS) <= c {
        return ONE_MINUS;
    }
    let (mut lo, mut hi) = (q, ONE_MINUS);
    for _ in 0..KL_INV_MAX_ITER {
        let mid = lo + (hi - lo) / 2.0;
        if mid <= lo || mid >= hi {
            break;
        }
        if binary_kl_unchecked(q, mid) <= c {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= KL_INV_TOL && binary_kl_unchecked(q, hi) - binary_kl_unchecked(q, lo) <= KL_GAP_TOL {
            break;
        }
    }
    lo
}

/// Everything a certificate depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Averaged surrogate risk on the perturbed test set.
    pub emp_avg_surrogate: f64,
    /// Averaged-max surrogate risk on the same set.
    pub emp_avgmax_surrogate: f64,
    /// `KL(Q‖P)`.
    pub kl: f64,
    /// Number of examples.
    pub m: usize,
    /// Perturbations per example.
    pub n: usize,
    /// Voters in the Monte Carlo ensemble.
    pub n_voters: usize,
    /// Candidate priors covered by the union bound.
    pub t_priors: usize,
    pub delta: f64,
    /// Total-variation term of the averaged-max bound.
    pub tv: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if self.m == 0 || self.t_priors == 0 {
            return Err(contract("bounds need m >= 1 and T >= 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(contract(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if !unit(self.emp_avg_surrogate) || !unit(self.emp_avgmax_surrogate) {
            return Err(contract("empirical risks must lie in [0, 1]"));
        }
        if self.kl.is_nan() || self.kl < 0.0 {
            return Err(contract(format!("KL must be >= 0, got {}", self.kl)));
        }
        if !unit(self.tv) {
            return Err(contract(format!("TV term must lie in [0, 1], got {}", self.tv)));
        }
        Ok(())
    }

    fn m_f(&self) -> f64 {
        self.m as f64
    }

    /// `KL + ln(T(m+1)/δ)`.
    pub fn complexity_eq8(&self) -> f64 {
        self.kl + (self.t_priors as f64 * (self.m_f() + 1.0) / self.delta).ln()
    }

    /// `KL + ln(2T√m/δ)`.
    pub fn complexity_eq10(&self) -> f64 {
        self.kl + (2.0 * self.t_priors as f64 * self.m_f().sqrt() / self.delta).ln()
    }
}

/// kl-inverse certificate on the averaged surrogate risk.
pub fn bound_eq8(inp: &BoundInputs) -> Result<f64> {
    inp.validate()?;
    Ok(kl_inverse_sup(inp.emp_avg_surrogate, inp.complexity_eq8() / inp.m_f()))
}

/// Pinsker form: `emp + sqrt((KL + ln(T(m+1)/δ)) / 2m)`.
pub fn bound_eq9(inp: &BoundInputs) -> Result<f64> {
    inp.validate()?;
    Ok(inp.emp_avg_surrogate + (inp.complexity_eq8() / (2.0 * inp.m_f())).sqrt())
}

/// Averaged-max certificate: `emp_max + TV + sqrt((KL + ln(2T√m/δ)) / 2m)`.
pub fn bound_eq10(inp: &BoundInputs) -> Result<f64> {
    inp.validate()?;
    Ok(inp.emp_avgmax_surrogate + inp.tv + (inp.complexity_eq10() / (2.0 * inp.m_f())).sqrt())
}

/// Certificate on the 0-1 risk from a surrogate-level bound.
pub fn lift_to_01(surrogate_bound: f64) -> f64 {
    2.0 * surrogate_bound
}

/// Index of the perturbation maximizing voter `k`'s linear loss on row `i`;
/// ties go to the lowest index.
fn worst_perturbation(table: &ScoreTable, i: usize, k: usize) -> usize {
    let row = &table.rows()[i];
    let y = f64::from(row.y);
    let big_n = table.n_voters();
    let mut best = 0;
    let mut best_margin = y * row.scores[k];
    for j in 1..row.n {
        let margin = y * row.scores[j * big_n + k];
        if margin < best_margin {
            best = j;
            best_margin = margin;
        }
    }
    best
}

/// Mean total variation between each voter's Dirac at its worst
/// perturbation and the voter-weighted mixture of those Diracs.
///
/// For a Dirac at `j_k`, `TV(δ_{j_k}‖π) = 1 − π(j_k)`.
pub fn tv_term_from_table(table: &ScoreTable) -> f64 {
    let big_n = table.n_voters();
    let mut total = 0.0;
    let mut pi = vec![0.0; table.n()];
    for i in 0..table.m() {
        pi.iter_mut().for_each(|p| *p = 0.0);
        let worst: Vec<usize> = (0..big_n).map(|k| worst_perturbation(table, i, k)).collect();
        for (k, &j) in worst.iter().enumerate() {
            pi[j] += table.voter_weight(k);
        }
        total += worst.iter().enumerate().map(|(k, &j)| table.voter_weight(k) * (1.0 - pi[j]).max(0.0)).sum::<f64>();
    }
    (total / table.m() as f64).clamp(0.0, 1.0)
}

/// TV term of the averaged-max bound for an ensemble on a perturbed set.
pub fn tv_term(ens: &VoterEnsemble, data: &[PerturbedSample]) -> Result<f64> {
    Ok(tv_term_from_table(&ScoreTable::from_ensemble(ens, data)?))
}

/// Current [`BoundReport`] layout version.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Empirical risks of the majority vote on the perturbed test set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportedRisks {
    pub avg_01: f64,
    pub avgmax_01: f64,
    pub avg_surrogate: f64,
    pub avgmax_surrogate: f64,
}

/// Surrogate-level bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundValues {
    pub eq8: f64,
    pub eq9: f64,
    pub eq10: f64,
}

impl BoundValues {
    pub fn compute(inp: &BoundInputs) -> Result<Self> {
        Ok(Self { eq8: bound_eq8(inp)?, eq9: bound_eq9(inp)?, eq10: bound_eq10(inp)? })
    }

    pub fn lifted(&self) -> Self {
        Self { eq8: lift_to_01(self.eq8), eq9: lift_to_01(self.eq9), eq10: lift_to_01(self.eq10) }
    }
}

/// Seeds behind every random choice of a certification run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportSeeds {
    pub master: u64,
    pub ensemble: u64,
    pub attack: u64,
}

/// One certification result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub schema_version: u32,
    pub defense: AttackConfig,
    pub attack: AttackConfig,
    pub seeds: ReportSeeds,
    pub inputs: BoundInputs,
    pub risks: ReportedRisks,
    pub surrogate: BoundValues,
    /// Doubled bounds, i.e. certificates on the 0-1 risk.
    pub certificate: BoundValues,
}

impl BoundReport {
    pub fn new(defense: AttackConfig, attack: AttackConfig, seeds: ReportSeeds, inputs: BoundInputs, risks: ReportedRisks) -> Result<Self> {
        let surrogate = BoundValues::compute(&inputs)?;
        Ok(Self {
            schema_version: REPORT_SCHEMA_VERSION,
            defense,
            attack,
            seeds,
            inputs,
            risks,
            certificate: surrogate.lifted(),
            surrogate,
        })
    }

    /// Builds the report from one shared score table.
    #[allow(clippy::too_many_arguments)]
    pub fn from_table(
        table: &ScoreTable,
        kl: f64,
        t_priors: usize,
        delta: f64,
        defense: AttackConfig,
        attack: AttackConfig,
        seeds: ReportSeeds,
    ) -> Result<Self> {
        let risks = ReportedRisks {
            avg_01: table.avg_risk_01().value,
            avgmax_01: table.avgmax_risk_01().value,
            avg_surrogate: table.avg_surrogate().value,
            avgmax_surrogate: table.avgmax_surrogate().value,
        };
        let inputs = BoundInputs {
            emp_avg_surrogate: risks.avg_surrogate,
            emp_avgmax_surrogate: risks.avgmax_surrogate,
            kl,
            m: table.m(),
            n: table.n(),
            n_voters: table.n_voters(),
            t_priors,
            delta,
            tv: tv_term_from_table(table),
        };
        Self::new(defense, attack, seeds, inputs, risks)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub const CSV_HEADER: &'static str = "defense,attack,b,risk,th2_bound,avgmax_risk,th3_bound";

    /// Row in the layout of [`Self::CSV_HEADER`], with doubled certificates.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.4},{:.4},{:.4},{:.4}",
            self.defense.kind.name(),
            self.attack.kind.name(),
            self.attack.budget,
            self.risks.avg_01,
            self.certificate.eq8,
            self.risks.avgmax_01,
            self.certificate.eq10
        )
    }
}
