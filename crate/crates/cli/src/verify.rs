//! `verify`: the finite-world oracle suite as a pass/fail ledger.

use std::fmt;
use std::path::PathBuf;
use std::time::Instant;

use advbound::oracle::{sweep, FiniteWorld, Violation};

use crate::{io_at, CliError};

/// Worlds shipped with the binary; each must pass every invariant.
pub const STOCK_WORLDS: [(&str, &str); 3] = [
    ("half_fooling", include_str!("../fixtures/worlds/half_fooling.json")),
    ("two_points_two_voters", include_str!("../fixtures/worlds/two_points_two_voters.json")),
    ("plane_ties", include_str!("../fixtures/worlds/plane_ties.json")),
];

#[derive(Debug, Clone)]
pub struct LedgerEntry {
    pub name: String,
    pub violations: Vec<Violation>,
}

impl LedgerEntry {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct VerifyLedger {
    pub entries: Vec<LedgerEntry>,
    pub seconds: f64,
}

impl VerifyLedger {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(LedgerEntry::passed)
    }

    /// Names of the violated invariants, deduplicated, in order of appearance.
    pub fn violated_invariants(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for v in self.entries.iter().flat_map(|e| &e.violations) {
            if !names.contains(&v.invariant) {
                names.push(v.invariant.clone());
            }
        }
        names
    }

    /// `Err` naming the violated invariants when any entry failed.
    pub fn into_result(self) -> Result<Self, CliError> {
        if self.passed() {
            Ok(self)
        } else {
            Err(CliError::Invariant(self.violated_invariants().join(", ")))
        }
    }
}

impl fmt::Display for VerifyLedger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(f, "{} {}", if e.passed() { "PASS" } else { "FAIL" }, e.name)?;
            for v in e.violations.iter().take(5) {
                writeln!(f, "    {}: {}", v.invariant, v.detail)?;
            }
            if e.violations.len() > 5 {
                writeln!(f, "    ... {} more", e.violations.len() - 5)?;
            }
        }
        write!(f, "{} ({:.2} s)", if self.passed() { "all invariants hold" } else { "violations found" }, self.seconds)
    }
}

/// Checks the stock worlds, each file in `extra`, and `worlds` random worlds
/// drawn from `seed`.
pub fn cmd_verify(worlds: usize, seed: u64, extra: &[PathBuf]) -> Result<VerifyLedger, CliError> {
    let start = Instant::now();
    let mut entries = Vec::new();
    for (name, text) in STOCK_WORLDS {
        let world = FiniteWorld::from_json(text)?;
        entries.push(LedgerEntry { name: format!("fixture {name}"), violations: world.check_invariants() });
    }
    for path in extra {
        let text = std::fs::read_to_string(path).map_err(io_at(path))?;
        let world = FiniteWorld::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        entries.push(LedgerEntry { name: format!("world {}", path.display()), violations: world.check_invariants() });
    }
    if worlds > 0 {
        let report = sweep(worlds, seed);
        entries.push(LedgerEntry {
            name: format!("sweep of {worlds} random worlds (seed {seed})"),
            violations: report
                .violations
                .into_iter()
                .map(|(w, v)| Violation { detail: format!("world {w}: {}", v.detail), ..v })
                .collect(),
        });
    }
    Ok(VerifyLedger { entries, seconds: start.elapsed().as_secs_f64() })
}
