//! Case-based reasoning over BAM reconfigurations.
//!
//! A cycle starts from a window of measurements. If a policy flags a
//! symptom, the engine retrieves a similar positive case (or proposes an
//! arbitrary model), checks the proposal against rejected cases, applies it,
//! and after the revision timer judges the result and files the case as
//! positive or negative.

mod case;
pub mod descriptor;
mod engine;
mod similarity;

pub use case::{Case, CaseBase, CaseBaseKind, CaseStatus, Solution, CASE_SCHEMA_VERSION};
pub use descriptor::{describe, AttrValue, Attributes, ProblemDescriptor, Tolerances};
pub use engine::{
    adapt, arbitrary_solution, retain, retrieve, revise, validate_against_rejected, CbrConfig, CbrEngine, CbrStats,
    CycleOutcome, GuardBasis, NoActionReason, PolicySolutions, ProfileGuard, Review, SolutionSource, Trigger,
    Validity, Verdict,
};
pub use similarity::{similarity, SimilarityConfig, SimilarityFunction, Weighting};
