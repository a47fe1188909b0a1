//! Benchmark channel scenarios and genuine-data generation.

mod config;
mod dataset;
pub mod gamma;
mod sim;

pub use config::{
    ChannelFamily, LogNormalConfig, NakagamiConfig, NoiseConfig, NoiseDomain, ScenarioConfig,
    BUILTIN_SCENARIOS,
};
pub use dataset::{generate_dataset, Dataset, Sample, DATASET_FORMAT_VERSION};
pub use sim::{
    add_noise, analytic_moments, nakagami_m, p_db_mean, p_db_reference, path_loss_nakagami,
    sample_family, sample_lognormal, sample_nakagami, shadowing_std, Moments,
};
