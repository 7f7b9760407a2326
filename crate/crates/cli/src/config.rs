use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vlqfb_core::bounds::ScheduleFn;
use vlqfb_core::estimate::{Estimator, Strategy};

use crate::CliError;

pub const DEFAULT_STOP_STREAK: usize = 2000;

/// Codebook resolution: fixed, or `δ(P) = φ⁻¹(f(P))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeltaSpec {
    Fixed(f64),
    Schedule {
        f: ScheduleFn,
        c0: f64,
    },
}

/// One run. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub t: usize,
    pub strategy: Strategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<DeltaSpec>,
    pub p_grid_db: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub codebook_path: Option<PathBuf>,
    pub output_path: PathBuf,
    #[serde(default)]
    pub estimator: Estimator,
    #[serde(default = "default_streak")]
    pub stop_streak: usize,
}

fn default_streak() -> usize {
    DEFAULT_STOP_STREAK
}

impl SimulationConfig {
    pub fn from_json(s: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| CliError::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn p_grid(&self) -> Vec<f64> {
        self.p_grid_db.iter().map(|&db| vlqfb_core::db_to_linear(db)).collect()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, msg: String| Err(CliError::Config(format!("{field}: {msg}")));
        if self.t == 0 {
            return bad("t", "must be at least 1".into());
        }
        if self.samples == 0 {
            return bad("samples", "must be at least 1".into());
        }
        if self.stop_streak == 0 {
            return bad("stop_streak", "must be at least 1".into());
        }
        if self.p_grid_db.is_empty() {
            return bad("p_grid_db", "must not be empty".into());
        }
        if let Some(x) = self.p_grid_db.iter().find(|x| !x.is_finite()) {
            return bad("p_grid_db", format!("{x} is not finite"));
        }
        if let Some(w) = self.p_grid_db.windows(2).find(|w| w[1] <= w[0]) {
            return bad("p_grid_db", format!("must be strictly ascending ({} then {})", w[0], w[1]));
        }
        if self.strategy == Strategy::BfVlq && self.p_grid_db[0] <= 0.0 {
            return bad("p_grid_db", "bf-vlq needs P > 1, i.e. every entry above 0 dB".into());
        }
        if self.strategy.is_precoding() && !(1..=4).contains(&self.t) {
            return bad("t", format!("precoding supports 1 to 4 antennas, got {}", self.t));
        }
        match (self.strategy.needs_codebook(), self.delta, &self.codebook_path) {
            (true, None, None) => {
                return bad("delta", format!("required for {}", self.strategy));
            }
            (true, Some(DeltaSpec::Fixed(d)), _) if !(d > 0.0 && d < 1.0) => {
                return bad("delta", format!("must lie in (0, 1), got {d}"));
            }
            (true, Some(DeltaSpec::Schedule { c0, .. }), path) => {
                if !(c0 > 0.0) || !c0.is_finite() {
                    return bad("delta.c0", format!("must be positive, got {c0}"));
                }
                if path.is_some() {
                    return bad("codebook_path", "cannot be combined with a delta schedule".into());
                }
            }
            (false, Some(_), _) => {
                return bad("delta", format!("not used by {}", self.strategy));
            }
            (false, None, Some(_)) => {
                return bad("codebook_path", format!("not used by {}", self.strategy));
            }
            _ => {}
        }
        Ok(())
    }
}
