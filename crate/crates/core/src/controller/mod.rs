//! Finite-time feedback, open-loop null controls, optimality witnesses and
//! observability estimates.

mod feedback;
mod nullctrl;
mod observability;
mod ramps;
mod witness;

pub use feedback::{
    check_compatibility, run_closed_loop, stabilization_report, synthesize_feedback,
    CompatibilityReport, FeedbackAccess, FeedbackLaw, FeedbackOptions, StabilizationReport,
    REPORT_THRESHOLDS,
};
pub use nullctrl::{null_control_openloop, NullControlOptions, NullControlResult};
pub use observability::{
    observability_sample, verify_observability, ObservabilityEstimate, SampleKind, SampleRatio,
};
pub use ramps::{AuxiliaryDynamics, Ramp};
pub use witness::{optimality_witness, Probe, Witness};
