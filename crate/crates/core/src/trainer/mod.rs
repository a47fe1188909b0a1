//! Optimization, restart watchdog, experiment bookkeeping and persistence.

mod adam;
mod persist;
mod registry;
mod run;

pub use adam::{AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use persist::{
    load_model, load_saved, model_from_json, model_to_json, save_model, save_model_with_optimizer, SavedModel,
    MODEL_FORMAT_VERSION,
};
pub use registry::{Checkpoint, ModelRegistry, RunSummary};
pub use run::{
    initial_weights, train_experiment, train_experiment_with_init, train_run, train_run_from, train_run_with_faults, transfer_train, RestartEvent, RunOutcome, TrainConfig,
};
