//! Per-link bandwidth allocation models (MAM, RDM, ATCS) expressed through a
//! generalized sharing matrix, and a case-based reasoning loop that learns
//! when to switch between them.
//!
//! The crate is organized bottom-up:
//!
//! * [`bam`] is the allocation engine: admission, release, preemption and
//!   devolution on a single link.
//! * [`policy`] evaluates manager rules over measurements and produces
//!   symptoms.
//! * [`cbr`] implements retrieve / reuse / revise / retain over positive and
//!   negative case bases.
//! * [`sim`] drives the link with Poisson traffic, fires triggers and builds
//!   [`sim::SimulationReport`]s.
//! * [`report`] turns finished runs into comparison tables.

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bam;
pub mod cbr;
mod error;
pub mod policy;
pub mod report;
pub mod sim;

pub use bam::{
    make_model_matrix, snapshot_measurements, AdmissionDecision, BamModel, ClassId, LinkEvent,
    LinkEventKind, LinkState, LspId, LspRecord, LspRequest, Mbps, Measurements, MetricCounters,
    ModelTag, Outcome, SharingMatrix, Tally, TrafficClassConfig, Victim, VictimKind,
};
pub use cbr::{
    AttrValue, Attributes, Case, CaseBase, CaseBaseKind, CaseStatus, CycleOutcome, CbrConfig, CbrEngine,
    ProblemDescriptor, SimilarityConfig, SimilarityFunction, Solution, Verdict,
};
pub use error::{Error, Result};
pub use policy::{default_policy_set, evaluate_policies, ManagerGoals, Metric, PolicyRule};
pub use report::{ComparisonReport, ComparisonRow};
pub use sim::{run_scenario, ScenarioConfig, SimulationReport};
