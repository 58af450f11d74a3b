use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use teachsim::agents::{AgentConfig, Condition, SimConfig};
use teachsim::choicemodel::PriorConfig;
use teachsim::env::{CellRange, GeneratorConfig, ValueMap};
use teachsim::optimize::OptimizerConfig;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub conditions: Vec<Condition>,
    pub dyads: usize,
    pub trials: usize,
    /// Cells replacing (or adding to) the default value map.
    pub value_map_overrides: Vec<CellRange>,
    pub alternate_counterbalance: bool,
    pub lambda: f64,
    pub window: usize,
    pub board_count: usize,
    pub top_k: usize,
    pub optimizer: OptimizerConfig,
    pub agent: AgentConfig,
    pub generator: GeneratorConfig,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            conditions: Condition::ALL.to_vec(),
            dyads: 20,
            trials: 10,
            value_map_overrides: Vec::new(),
            alternate_counterbalance: true,
            lambda: 1.0,
            window: 3,
            board_count: 10,
            top_k: 20,
            optimizer: OptimizerConfig::default(),
            agent: AgentConfig::default(),
            generator: GeneratorConfig::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Usage(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.conditions.is_empty() {
            return bad("no conditions selected".into());
        }
        if self.dyads == 0 {
            return bad("dyads must be at least 1".into());
        }
        if self.window == 0 || self.window > self.trials {
            return bad(format!("window must lie in 1..={}", self.trials));
        }
        PriorConfig::new(self.lambda).map_err(|e| CliError::Usage(e.to_string()))?;
        self.optimizer
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        self.sim_config()?
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(())
    }

    pub fn value_map(&self) -> Result<ValueMap, CliError> {
        let mut cells = ValueMap::default().cells();
        for o in &self.value_map_overrides {
            match cells
                .iter_mut()
                .find(|c| c.shape == o.shape && c.color == o.color)
            {
                Some(c) => *c = *o,
                None => cells.push(*o),
            }
        }
        ValueMap::from_cells(&cells, false).map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn sim_config(&self) -> Result<SimConfig, CliError> {
        Ok(SimConfig {
            agent: self.agent.clone(),
            generator: self.generator.clone(),
            value_map: self.value_map()?,
            trials: self.trials,
            alternate_counterbalance: self.alternate_counterbalance,
        })
    }

    pub fn prior(&self) -> PriorConfig {
        PriorConfig {
            lambda: self.lambda,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut cfg = RunConfig::default();
        cfg.value_map_overrides.push(CellRange {
            shape: teachsim::env::Shape::Triangle,
            color: teachsim::env::Color::Pink,
            lo: 0,
            hi: 0,
        });
        cfg.lambda = 2.5;
        let back: RunConfig = serde_json::from_str(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        back.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_fields_and_versions() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"schema_version":1,"sed":3}"#).is_err());
        let cfg: RunConfig = serde_json::from_str(r#"{"schema_version":2}"#).unwrap();
        assert!(cfg.validate().is_err());
        let cfg: RunConfig =
            serde_json::from_str(r#"{"conditions":["Chat-Full"],"window":0}"#).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn overrides_must_respect_sign_law() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"value_map_overrides":[{"shape":"circle","color":"pink","lo":-3,"hi":2}]}"#,
        )
        .unwrap();
        assert!(cfg.validate().is_err());
    }
}
