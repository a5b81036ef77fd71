//! Discrete-event simulation of one link under a traffic schedule.
//!
//! Arrivals are generated per pattern and replayed identically in every
//! repetition. Measurement windows tumble at a fixed length; each close may
//! review a pending case and fire a reactive cycle, and a separate timer
//! fires proactive cycles.

mod config;
mod harness;
mod traffic;

pub use config::{
    reference_patterns, DemandConfig, LinkConfig, LoadLevel, LoadRegime, Mode, OutputConfig, PolicyConfig,
    ScenarioConfig, ScheduleConfig, TimerConfig, TrafficPattern,
};
pub use harness::{
    empty_bases, run_scenario, CaseBaseSummary, CycleRecord, RepetitionSummary, ReviewRecord, SimOutcome,
    Simulation, SimulationReport, TimelineEntry, TriggerStats, WindowRecord,
};
pub use traffic::{generate_arrivals, offered_loads};
