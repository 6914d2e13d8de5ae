use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatienceConfig {
    pub base: f64,
    pub growth: f64,
}

impl Default for PatienceConfig {
    fn default() -> Self {
        Self { base: 50.0, growth: 1.005 }
    }
}

/// Early stopping on validation reward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatienceState {
    pub improvements: u32,
    pub remaining: f64,
    pub best_reward: Option<f64>,
    config: PatienceConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatienceOutcome {
    pub improved: bool,
    pub stop: bool,
}

impl PatienceState {
    pub fn new(config: PatienceConfig) -> Self {
        Self {
            improvements: 0,
            remaining: config.base,
            best_reward: None,
            config,
        }
    }

    /// Records the validation reward of `epoch` (1-based).
    pub fn step(&mut self, epoch: usize, reward: f64, max_epochs: usize) -> PatienceOutcome {
        let improved = self.best_reward.is_none_or(|b| reward > b);
        if improved {
            self.improvements += 1;
            self.remaining = self.config.base * self.config.growth.powi(self.improvements as i32);
            self.best_reward = Some(reward);
        } else {
            self.remaining -= 1.0;
        }
        PatienceOutcome {
            improved,
            stop: self.remaining <= 0.0 || epoch >= max_epochs,
        }
    }
}
