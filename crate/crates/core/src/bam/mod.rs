//! The generalized per-link bandwidth allocation engine.
//!
//! A link owns a fixed capacity split into per-class bandwidth constraints
//! (BCs). Which class may occupy spare bandwidth inside which other class's
//! BC is decided by a [`SharingMatrix`]; the three classic models are just
//! presets of that matrix:
//!
//! * MAM: identity, no sharing.
//! * RDM: lower-priority classes may borrow from higher-priority BCs (HTL).
//! * ATCS: every class may borrow from every BC (HTL and LTH).
//!
//! An owner that finds its own BC occupied by borrowers reclaims it by
//! tearing those LSPs down: lower-priority victims are *preempted*,
//! higher-priority victims are *devolved*.

mod link;
mod metrics;
mod model;

pub use link::{
    AdmissionDecision, LinkEvent, LinkEventKind, LinkState, LspId, LspRecord, LspRequest, Outcome,
    Victim, VictimKind,
};
pub use metrics::{snapshot_measurements, Measurements, MetricCounters, Tally};
pub use model::{make_model_matrix, validate_classes, BamModel, ModelTag, SharingMatrix, TrafficClassConfig};

/// Index of a traffic class on a link (`0..N`).
pub type ClassId = usize;

/// Bandwidth in integer megabits per second.
pub type Mbps = u64;
