//! Stability analysis, soliton diagnostics and convergence/cost studies.

pub mod soliton;
pub mod stability;
pub mod studies;

pub use soliton::{shape_distance_errors, Soliton, SolitonErrors};
pub use stability::{stability_report, stability_roots, stability_threshold, tau_max, StabilityReport};
pub use studies::{
    airy_experiment, convergence_slope, cost_accuracy_sweep, energy_drift_study, loglog_slope, matched_cost, AiryOutcome,
    CostRow, DriftStudy,
};
