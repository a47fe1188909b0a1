use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use crate::mdn::NetworkWeights;

/// Weights after an epoch plus their validation scores. Epoch 0 only
/// occurs for zero-epoch transfer, where it is the pretrained model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Checkpoint {
    pub iteration: usize,
    pub epoch: usize,
    pub train_nll: Option<f64>,
    pub val_nll: f64,
    pub val_avg_oa: f64,
    pub val_moa: f64,
    pub val_oa_per_d: Vec<f64>,
    #[serde(skip)]
    pub weights: NetworkWeights,
    /// Optimizer state at this point, when the run keeps it.
    #[serde(skip)]
    pub optimizer: Option<AdamState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub iteration: usize,
    pub restarts: usize,
    pub failure: Option<String>,
}

/// All checkpoints of an experiment; `global_best` and `global_median`
/// index into `checkpoints`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelRegistry {
    pub checkpoints: Vec<Checkpoint>,
    pub global_best: usize,
    pub global_median: usize,
    pub runs: Vec<RunSummary>,
}

fn by_score(a: &Checkpoint, b: &Checkpoint) -> Ordering {
    a.val_moa
        .total_cmp(&b.val_moa)
        .then(a.iteration.cmp(&b.iteration))
        .then(a.epoch.cmp(&b.epoch))
}

impl ModelRegistry {
    /// `None` when there are no checkpoints.
    pub fn new(checkpoints: Vec<Checkpoint>, runs: Vec<RunSummary>) -> Option<Self> {
        if checkpoints.is_empty() {
            return None;
        }
        let mut order: Vec<usize> = (0..checkpoints.len()).collect();
        order.sort_by(|&a, &b| by_score(&checkpoints[a], &checkpoints[b]));
        let median = order[order.len() / 2];
        // highest MOA, earliest iteration/epoch among ties
        let best = (0..checkpoints.len())
            .reduce(|acc, i| {
                let (a, c) = (&checkpoints[acc], &checkpoints[i]);
                match c.val_moa.total_cmp(&a.val_moa) {
                    Ordering::Greater => i,
                    Ordering::Less => acc,
                    Ordering::Equal => {
                        if (c.iteration, c.epoch) < (a.iteration, a.epoch) {
                            i
                        } else {
                            acc
                        }
                    }
                }
            })
            .unwrap_or(0);
        Some(Self {
            checkpoints,
            global_best: best,
            global_median: median,
            runs,
        })
    }

    pub fn best(&self) -> &Checkpoint {
        &self.checkpoints[self.global_best]
    }

    pub fn median(&self) -> &Checkpoint {
        &self.checkpoints[self.global_median]
    }

    pub fn restarts(&self) -> usize {
        self.runs.iter().map(|r| r.restarts).sum()
    }

    /// Checkpoints of one iteration in epoch order.
    pub fn iteration(&self, iteration: usize) -> Vec<&Checkpoint> {
        let mut v: Vec<_> = self.checkpoints.iter().filter(|c| c.iteration == iteration).collect();
        v.sort_by_key(|c| c.epoch);
        v
    }

    /// Scores only, without weights.
    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("registry summary serializes")
    }
}
