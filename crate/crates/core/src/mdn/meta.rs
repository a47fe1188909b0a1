use serde::{Deserialize, Serialize};

use crate::channel::ScenarioConfig;

/// What a trained model needs to be applied to genuine data again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub scenario: String,
    pub scaling_coef: f64,
    pub d_max: f64,
    pub seed: u64,
}

impl ModelMeta {
    pub fn for_scenario(scenario: &ScenarioConfig, seed: u64) -> Self {
        Self {
            scenario: scenario.name.clone(),
            scaling_coef: scenario.scaling_coef,
            d_max: scenario.d_max(),
            seed,
        }
    }
}
