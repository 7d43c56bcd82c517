//! Convex programs, dual norms and probes around weighted square-function inequalities.

mod dual;
mod gradlemma;
mod lemma1;
mod probe;

pub use dual::{dual_norm, hardy_s_dual_norm, measurable_dual_norm, DualNormResult};
pub use gradlemma::{
    check_gradlemma, random_instance, GradLemmaInstance, GradLemmaOptions, GradLemmaReport, PointwiseNorm,
    SupportCondition, MAX_SAMPLED_DIM,
};
pub use lemma1::{
    minimize_phi, verify_lemma1, AdaptedSequenceSpace, Lemma1Check, OptimizationReport, WeightSystem, EPSILON_SCHEDULE,
};
pub use probe::{gradient_probe, probe_sweep, write_probe_csv, ProbeRow, ProbeSweep, ProbeValues, PROBE_HEADER};
