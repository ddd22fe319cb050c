//! Isolation scenarios run against the reference store and two
//! fault-injected controls, with interleavings fixed by a seed.

mod scenarios;
mod stores;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use scenarios::{run_cascade_atomicity, run_traversal_anomaly, RunVerdict, Scenario};
pub use stores::{ReadTx, StoreKind, TxStore};

/// Failures kept per scenario report.
const KEPT_FAILURES: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScenarioReport {
    pub scenario: Scenario,
    pub store: StoreKind,
    pub runs: usize,
    pub passed: usize,
    /// First few failing interleavings.
    pub failures: Vec<RunVerdict>,
}

impl ScenarioReport {
    pub fn ok(&self) -> bool {
        self.passed == self.runs
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AcidReport {
    pub store: StoreKind,
    pub seed: u64,
    pub scenarios: Vec<ScenarioReport>,
    pub all_passed: bool,
}

/// Runs `runs` interleavings of `scenario`, each seeded from `seed`.
pub fn run_scenario(
    store: StoreKind,
    scenario: Scenario,
    seed: u64,
    runs: usize,
) -> ScenarioReport {
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ScenarioReport {
        scenario,
        store,
        runs,
        passed: 0,
        failures: Vec::new(),
    };
    for _ in 0..runs {
        let v = scenario.run(store, seeds.gen());
        if v.passed {
            report.passed += 1;
        } else if report.failures.len() < KEPT_FAILURES {
            report.failures.push(v);
        }
    }
    tracing::info!(
        scenario = scenario.name(),
        store = store.name(),
        passed = report.passed,
        runs,
        "acid scenario"
    );
    report
}

pub fn run_acid(store: StoreKind, scenarios: &[Scenario], seed: u64, runs: usize) -> AcidReport {
    let scenarios: Vec<ScenarioReport> = scenarios
        .iter()
        .map(|&s| run_scenario(store, s, seed, runs))
        .collect();
    let all_passed = scenarios.iter().all(ScenarioReport::ok);
    AcidReport {
        store,
        seed,
        scenarios,
        all_passed,
    }
}
