//! Scenario files (TOML).
//!
//! ```toml
//! n = 200
//! t = 0.5
//! test = "distribution"       # mean | variance | regression | distribution
//! reps = 5000
//! master_seed = 20240101
//!
//! [config]
//! delta = 0.2254
//! alpha = 0.05
//! # lrv_mode = "hac_bartlett" | "plain_variance"; bias_correction = false
//!
//! [dgp]                        # iid_gaussian | ar1_mean_shift | chi2_switch | regression_slope
//! kind = "chi2_switch"
//! df = 1.0
//!
//! [sweep]                      # grid for `power`; one output row per value
//! parameter = "df"             # threshold | shift | df | sd | sd2 | rho | n
//! values = [0.2, 0.6, 1.0]
//!
//! [outer]                      # optional second grid, written as the first column
//! parameter = "n"
//! values = [200, 500]
//! ```

use std::path::Path;

use relchange_core::sim::{ScenarioSpec, Sweep};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    #[serde(flatten)]
    pub scenario: ScenarioSpec,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub outer: Option<Sweep>,
}

pub fn parse_scenario(text: &str) -> Result<ScenarioFile, CliError> {
    toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid scenario file: {e}")))
}

pub fn load_scenario(path: &Path) -> Result<ScenarioFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Usage(format!("cannot read scenario file {}: {e}", path.display()))
    })?;
    parse_scenario(&text)
}
