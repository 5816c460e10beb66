//! Harness configuration file: `[run]`, `[sweep]` and `[suite]` tables, all
//! optional. Unknown keys are rejected.

use std::path::Path;

use infmod_core::{Error, Result, RunConfig, SuiteConfig, SweepConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarnessConfig {
    pub run: RunConfig,
    pub sweep: SweepConfig,
    pub suite: SuiteConfig,
}

impl HarnessConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let mut cfg: HarnessConfig = toml::from_str(s).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        cfg.run.mortality.prepare()?;
        cfg.run.validate()?;
        cfg.suite.run = cfg.run.clone();
        cfg.suite.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::ConfigInvalid(format!("cannot read {}: {e}", p.display())))?;
                Self::from_toml_str(&text)
            }
            None => Self::from_toml_str(""),
        }
    }
}
