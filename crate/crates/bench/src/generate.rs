//! Reproducible MDP + policy bundles.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use valab_core::{PolicyTable, TabularMdp};

use crate::config::{ExperimentConfig, Mode};
use crate::experiment::{prepare_seed, BenchError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bundle {
    pub seed: u64,
    pub mode: Mode,
    pub epsilon: f64,
    pub mdp: TabularMdp,
    pub pi_det: PolicyTable,
    pub behavior: PolicyTable,
    /// Evaluation target; absent in control mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<PolicyTable>,
}

impl Bundle {
    /// Draws the same MDP and policies that `run` uses for `seed`.
    pub fn generate(config: &ExperimentConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let epsilon = config.effective_epsilon();
        let setup = prepare_seed(config, epsilon, seed)?;
        Ok(Self { seed, mode: config.mode, epsilon, mdp: setup.mdp, pi_det: setup.pi_det, behavior: setup.mu, target: setup.target })
    }

    pub fn validate(&self) -> valab_core::Result<()> {
        self.mdp.validate()?;
        let (s, a) = (self.mdp.num_states(), self.mdp.num_actions());
        self.pi_det.check_shape(s, a)?;
        self.behavior.check_shape(s, a)?;
        if let Some(t) = &self.target {
            t.check_shape(s, a)?;
        }
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|source| BenchError::Io { path: dir.to_path_buf(), source })?;
        let path = dir.join(format!("bundle_seed{}.json", self.seed));
        let text = serde_json::to_string_pretty(self).map_err(valab_core::Error::from)?;
        std::fs::write(&path, text + "\n").map_err(|source| BenchError::Io { path: path.clone(), source })?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io { path: path.to_path_buf(), source })?;
        let bundle: Bundle =
            serde_json::from_str(&text).map_err(|e| BenchError::Artifact { path: path.to_path_buf(), source: e.into() })?;
        bundle.validate().map_err(|source| BenchError::Artifact { path: path.to_path_buf(), source })?;
        Ok(bundle)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundle_matches_run_setup() {
        let c = ExperimentConfig { mode: Mode::Evaluation, ..ExperimentConfig::default() };
        let b = Bundle::generate(&c, 3).unwrap();
        let setup = prepare_seed(&c, 1.0, 3).unwrap();
        assert_eq!(b.mdp, setup.mdp);
        assert_eq!(b.target, setup.target);
        assert_eq!(b.behavior, PolicyTable::uniform(20, 5));
        b.validate().unwrap();
        let text = serde_json::to_string(&b).unwrap();
        assert_eq!(serde_json::from_str::<Bundle>(&text).unwrap(), b);
    }
}
