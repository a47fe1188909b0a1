//! Overlapped-Area metrology and evaluation reports.

mod kde;
pub mod ks;
mod report;
mod stats;

pub use kde::{kde, kde_on_grid, overlap_curves, overlapped_area, BandwidthRule, KdeConfig, OverlapCurves};
pub use report::{
    evaluate, evaluate_distance, generate_scaled, oa_by_distance, DistanceEval, DistanceReport,
    EvalReport, REPORT_FORMAT_VERSION,
};
pub use stats::{mean, moa, percent_error, sample_stats, scaled_pe};
