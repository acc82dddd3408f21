//! Cost accounting per method: sampling-pass counts, tuning passes, and
//! training steps accumulate monotonically across commands in a run
//! directory. Wall-clock seconds are collected alongside but persisted to a
//! separate, unhashed `timings.json` so run outputs stay byte-reproducible.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

use super::PipelineError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodCost {
    /// Stochastic sampling passes behind the reported test-split ensembles.
    pub eval_passes: u64,
    /// Passes spent inside BO loss evaluations (stochastic attention only).
    pub calibration_passes: u64,
    /// Passes spent drawing calibration-split ensembles for temperature
    /// fitting.
    pub temperature_passes: u64,
    /// Gradient steps or per-member refits behind the method.
    pub training_steps: u64,
}

impl MethodCost {
    pub fn total_forward_passes(&self) -> u64 {
        self.eval_passes + self.calibration_passes + self.temperature_passes
    }

    fn add(&mut self, other: &MethodCost) {
        self.eval_passes += other.eval_passes;
        self.calibration_passes += other.calibration_passes;
        self.temperature_passes += other.temperature_passes;
        self.training_steps += other.training_steps;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostLedger {
    pub methods: BTreeMap<String, MethodCost>,
}

impl CostLedger {
    pub fn method_mut(&mut self, method: &str) -> &mut MethodCost {
        self.methods.entry(method.to_string()).or_default()
    }

    pub fn get(&self, method: &str) -> MethodCost {
        self.methods.get(method).copied().unwrap_or_default()
    }

    /// Merge counts from another ledger (monotone accumulation).
    pub fn absorb(&mut self, other: &CostLedger) {
        for (method, cost) in &other.methods {
            self.method_mut(method).add(cost);
        }
    }

    /// Load the ledger previously written to this run directory, or an
    /// empty one.
    pub fn load_or_default(dir: &Path) -> Result<CostLedger, PipelineError> {
        let path = dir.join("cost_ledger.json");
        if !path.exists() {
            return Ok(CostLedger::default());
        }
        let text = std::fs::read_to_string(&path)
            .map_err(|e| PipelineError::io("reading cost ledger", e))?;
        serde_json::from_str(&text)
            .map_err(|e| PipelineError::Config(format!("cost ledger does not parse: {e}")))
    }

    pub fn save(&self, dir: &Path) -> Result<(), PipelineError> {
        let text = serde_json::to_string_pretty(self)
            .expect("ledger serializes");
        std::fs::write(dir.join("cost_ledger.json"), text + "\n")
            .map_err(|e| PipelineError::io("writing cost ledger", e))
    }
}

/// Wall-clock seconds per method, accumulated like the ledger but kept out
/// of the hashed artifact set.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Timings {
    pub seconds: BTreeMap<String, f64>,
}

impl Timings {
    pub fn add(&mut self, method: &str, seconds: f64) {
        *self.seconds.entry(method.to_string()).or_insert(0.0) += seconds;
    }

    pub fn load_or_default(dir: &Path) -> Timings {
        std::fs::read_to_string(dir.join("timings.json"))
            .ok()
            .and_then(|text| serde_json::from_str(&text).ok())
            .unwrap_or_default()
    }

    pub fn save(&self, dir: &Path) -> Result<(), PipelineError> {
        let text = serde_json::to_string_pretty(self).expect("timings serialize");
        std::fs::write(dir.join("timings.json"), text + "\n")
            .map_err(|e| PipelineError::io("writing timings", e))
    }
}
