use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::config::{Mode, ScenarioConfig};
use super::traffic::generate_arrivals;
use crate::bam::{LinkEvent, LinkState, LspId, LspRequest, Measurements, MetricCounters, ModelTag, Tally};
use crate::cbr::{
    CaseBase, CaseBaseKind, CbrEngine, CbrStats, CycleOutcome, ProfileGuard, SolutionSource, Trigger, Verdict,
};
use crate::policy::PolicyRule;
use crate::Result;

const EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub window_id: u64,
    pub repetition: u32,
    pub start: f64,
    pub end: f64,
    pub active_model: ModelTag,
    pub mean_utilization: f64,
    pub total: Tally,
    pub per_class: Vec<Tally>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub time: f64,
    /// Seconds since the start of the entry's repetition.
    pub offset: f64,
    pub repetition: u32,
    pub model: ModelTag,
    /// `None` for the model in place when the run or repetition began.
    pub source: Option<SolutionSource>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepetitionSummary {
    pub index: u32,
    pub start: f64,
    pub end: f64,
    /// Sums of the windows that started in this repetition.
    pub totals: Tally,
    /// Cases added to either base during this repetition.
    pub retained: u64,
    /// Starts with the model active when the repetition began.
    pub timeline: Vec<TimelineEntry>,
}

impl RepetitionSummary {
    /// Model changes as (offset, model) pairs, for comparing repetitions.
    pub fn plan(&self) -> Vec<(f64, ModelTag)> {
        self.timeline.iter().map(|e| (e.offset, e.model)).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerStats {
    pub reactive_fired: u64,
    pub reactive_suppressed: u64,
    pub proactive_fired: u64,
    pub proactive_suppressed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub time: f64,
    pub trigger: Trigger,
    #[serde(flatten)]
    pub outcome: CycleOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReviewRecord {
    pub time: f64,
    pub model: crate::bam::BamModel,
    pub verdict: Verdict,
    pub retained: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CaseBaseSummary {
    pub positive: usize,
    pub negative: usize,
    pub stats: CbrStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub label: String,
    pub seed: u64,
    pub mode: Mode,
    pub schedule_hash: String,
    pub config_hash: String,
    pub duration: f64,
    pub cumulative: MetricCounters,
    pub active_at_end: u64,
    pub windows: Vec<WindowRecord>,
    pub repetitions: Vec<RepetitionSummary>,
    pub timeline: Vec<TimelineEntry>,
    pub triggers: TriggerStats,
    pub cycles: Vec<CycleRecord>,
    pub reviews: Vec<ReviewRecord>,
    pub cases: CaseBaseSummary,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<LinkEvent>,
}

impl SimulationReport {
    pub fn totals(&self) -> &Tally {
        &self.cumulative.total
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum EventKind {
    WindowClose,
    Proactive,
    RepetitionStart(u32),
    Arrival(usize),
    Departure(LspId),
}

#[derive(Debug)]
struct Scheduled {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // Reversed so the max-heap pops the earliest (time, seq) first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.seq.cmp(&self.seq))
    }
}

/// What a finished run leaves behind.
#[derive(Clone, Debug)]
pub struct SimOutcome {
    pub report: SimulationReport,
    /// Final case bases; `None` for static runs.
    pub bases: Option<(CaseBase, CaseBase)>,
}

/// One scenario run. Built from a validated config, optionally seeded with
/// existing case bases.
pub struct Simulation {
    cfg: ScenarioConfig,
    link: LinkState,
    engine: Option<CbrEngine>,
    policies: Vec<PolicyRule>,
    guard: ProfileGuard,
    arrivals: Vec<LspRequest>,
    queue: BinaryHeap<Scheduled>,
    seq: u64,
    rep_length: f64,
    duration: f64,
    window_start: f64,
    last_closed: Option<Measurements>,
    windows: Vec<WindowRecord>,
    repetitions: Vec<RepetitionSummary>,
    timeline: Vec<TimelineEntry>,
    triggers: TriggerStats,
    cycles: Vec<CycleRecord>,
    reviews: Vec<ReviewRecord>,
}

impl Simulation {
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let mut link = LinkState::new(cfg.link.capacity, cfg.classes.clone(), cfg.mode.initial_model())?;
        link.set_record_events(cfg.output.events);
        let engine = cfg.mode.is_cognitive().then(|| CbrEngine::new(cfg.cbr.clone(), cfg.seed));
        let guard = ProfileGuard {
            tolerance: cfg.cbr.guard_tolerance,
            basis: cfg.cbr.guard_basis,
            mean_holding: cfg.demand.mean_holding,
        };
        let rep_length = cfg.schedule.repetition_length();
        let duration = cfg.schedule.total_duration();
        Ok(Self {
            policies: cfg.policies.rules(),
            link,
            engine,
            guard,
            arrivals: Vec::new(),
            queue: BinaryHeap::new(),
            seq: 0,
            rep_length,
            duration,
            window_start: 0.0,
            last_closed: None,
            windows: Vec::new(),
            repetitions: Vec::new(),
            timeline: Vec::new(),
            triggers: TriggerStats::default(),
            cycles: Vec::new(),
            reviews: Vec::new(),
            cfg,
        })
    }

    /// Starts the reasoning loop from existing knowledge instead of empty
    /// bases. No effect on static runs.
    pub fn with_case_bases(mut self, positive: CaseBase, negative: CaseBase) -> Self {
        self.engine = self.engine.map(|e| e.with_bases(positive, negative));
        self
    }

    fn push(&mut self, time: f64, kind: EventKind) {
        self.queue.push(Scheduled { time, seq: self.seq, kind });
        self.seq += 1;
    }

    fn repetition_at(&self, time: f64) -> u32 {
        if self.rep_length <= 0.0 {
            return 0;
        }
        let r = ((time + EPS) / self.rep_length).floor() as u32;
        r.min(self.cfg.schedule.repetitions.saturating_sub(1))
    }

    fn schedule(&mut self) {
        let s = self.cfg.schedule.clone();
        let window = self.cfg.timers.window;
        let mut t = window;
        while t < self.duration - EPS {
            self.push(t, EventKind::WindowClose);
            t += window;
        }
        if self.duration > 0.0 {
            self.push(self.duration, EventKind::WindowClose);
        }
        if let (true, Some(interval)) = (self.cfg.mode.is_cognitive(), self.cfg.timers.proactive_interval) {
            let mut t = interval;
            while t <= self.duration + EPS {
                self.push(t, EventKind::Proactive);
                t += interval;
            }
        }
        // Queued after the closes and checks that share its timestamp, so a
        // change made exactly on a boundary belongs to the ending repetition.
        let boundaries = if self.rep_length > 0.0 { 1..s.repetitions } else { 0..0 };
        for rep in boundaries {
            self.push(rep as f64 * self.rep_length, EventKind::RepetitionStart(rep));
        }
        // Every repetition replays the same per-pattern streams.
        let mut one_pass = Vec::new();
        let mut start = 0.0;
        for (i, p) in s.patterns.iter().enumerate() {
            let d = s.duration_of(p);
            let reqs = generate_arrivals(
                p,
                d,
                &self.cfg.classes,
                self.cfg.link.capacity,
                &self.cfg.demand,
                self.cfg.seed,
                i as u64,
            );
            one_pass.extend(reqs.into_iter().map(|r| r.at(r.arrival_time + start, r.holding_time)));
            start += d;
        }
        for rep in 0..s.repetitions {
            let offset = rep as f64 * self.rep_length;
            for r in &one_pass {
                self.arrivals.push(r.at(r.arrival_time + offset, r.holding_time));
            }
        }
        for i in 0..self.arrivals.len() {
            let t = self.arrivals[i].arrival_time;
            self.push(t, EventKind::Arrival(i));
        }
    }

    fn start_repetition(&mut self, index: u32) {
        let start = index as f64 * self.rep_length;
        let entry = TimelineEntry {
            time: start,
            offset: 0.0,
            repetition: index,
            model: self.link.active_model(),
            source: None,
        };
        self.repetitions.push(RepetitionSummary {
            index,
            start,
            end: start + self.rep_length,
            totals: Tally::default(),
            retained: 0,
            timeline: vec![entry],
        });
    }

    /// Makes sure summaries exist up to and including `index`.
    fn open_repetitions(&mut self, index: u32) {
        while self.repetitions.len() as u32 <= index {
            let next = self.repetitions.len() as u32;
            self.start_repetition(next);
        }
    }

    /// Runs the whole schedule.
    pub fn run(mut self) -> Result<SimOutcome> {
        if self.duration > 0.0 {
            self.timeline.push(TimelineEntry {
                time: 0.0,
                offset: 0.0,
                repetition: 0,
                model: self.link.active_model(),
                source: None,
            });
            self.start_repetition(0);
        }
        self.schedule();

        while let Some(ev) = self.queue.pop() {
            if ev.time > self.duration + EPS {
                break;
            }
            match ev.kind {
                EventKind::Arrival(i) => {
                    let req = self.arrivals[i];
                    self.link.advance_to(ev.time);
                    let decision = self.link.admit_lsp(req)?;
                    if let Some(id) = decision.lsp {
                        self.push(ev.time + req.holding_time, EventKind::Departure(id));
                    }
                }
                EventKind::Departure(id) => {
                    // Victims were already torn down.
                    if self.link.is_active(id) {
                        self.link.release_lsp(id, true, ev.time)?;
                    }
                }
                EventKind::WindowClose => self.close_window(ev.time)?,
                EventKind::Proactive => self.fire_trigger(Trigger::Proactive, ev.time),
                EventKind::RepetitionStart(rep) => self.open_repetitions(rep),
            }
        }
        Ok(self.finish())
    }

    fn close_window(&mut self, time: f64) -> Result<()> {
        let m = self.link.close_window(time);
        let repetition = self.repetition_at(self.window_start);
        self.open_repetitions(repetition);
        self.windows.push(WindowRecord {
            window_id: m.counters.window_id,
            repetition,
            start: self.window_start,
            end: time,
            active_model: m.active_model,
            mean_utilization: m.mean_utilization,
            total: m.counters.total.clone(),
            per_class: m.counters.per_class.clone(),
        });
        self.repetitions[repetition as usize].totals.add(&m.counters.total);
        self.window_start = time;
        self.last_closed = Some(m.clone());

        let Some(engine) = self.engine.as_mut() else { return Ok(()) };
        let revision_span = self.cfg.timers.revision_windows as f64 * self.cfg.timers.window;
        if engine.pending_since().is_some_and(|at| time + EPS >= at + revision_span) {
            if let Some(review) = engine.review(&m, &self.guard, time)? {
                if review.retained {
                    self.repetitions[repetition as usize].retained += 1;
                }
                self.reviews.push(ReviewRecord {
                    time,
                    model: review.model,
                    verdict: review.verdict,
                    retained: review.retained,
                });
            }
        }
        if engine.diagnose(&m, &self.policies).1.is_some() {
            self.fire_trigger(Trigger::Reactive, time);
        }
        Ok(())
    }

    /// Runs one reasoning cycle now, unless a case is still under revision.
    fn fire_trigger(&mut self, trigger: Trigger, time: f64) {
        let Some(engine) = self.engine.as_mut() else { return };
        let suppressed = engine.pending().is_some();
        let counter = match (trigger, suppressed) {
            (Trigger::Reactive, false) => &mut self.triggers.reactive_fired,
            (Trigger::Reactive, true) => &mut self.triggers.reactive_suppressed,
            (Trigger::Proactive, false) => &mut self.triggers.proactive_fired,
            (Trigger::Proactive, true) => &mut self.triggers.proactive_suppressed,
        };
        *counter += 1;
        if suppressed {
            return;
        }
        // A proactive check right after a window closes looks at that
        // window rather than an empty one.
        self.link.advance_to(time);
        let current = self.link.measurements();
        let m = if current.counters.elapsed > 0.0 {
            current
        } else {
            match &self.last_closed {
                Some(m) => m.clone(),
                None => current,
            }
        };
        let outcome = engine.run_cycle(trigger, &mut self.link, &m, &self.policies, time);
        if let CycleOutcome::Applied { model, source, .. } = &outcome {
            let rep = self.repetition_at(time);
            let rep_start = rep as f64 * self.rep_length;
            // A change exactly on a repetition boundary belongs to the
            // repetition that just ended.
            let (rep, rep_start) = if rep > 0 && (time - rep_start).abs() < EPS {
                (rep - 1, rep_start - self.rep_length)
            } else {
                (rep, rep_start)
            };
            let entry = TimelineEntry {
                time,
                offset: time - rep_start,
                repetition: rep,
                model: (*model).into(),
                source: Some(*source),
            };
            self.timeline.push(entry.clone());
            self.open_repetitions(rep);
            self.repetitions[rep as usize].timeline.push(entry);
        }
        self.cycles.push(CycleRecord { time, trigger, outcome });
    }

    fn finish(mut self) -> SimOutcome {
        let events = self.link.drain_events();
        let cases = match &self.engine {
            Some(e) => CaseBaseSummary { positive: e.positive().len(), negative: e.negative().len(), stats: e.stats().clone() },
            None => CaseBaseSummary::default(),
        };
        let report = SimulationReport {
            label: self.cfg.mode.label(),
            seed: self.cfg.seed,
            mode: self.cfg.mode.clone(),
            schedule_hash: self.cfg.schedule_hash(),
            config_hash: self.cfg.config_hash(),
            duration: self.duration,
            cumulative: self.link.cumulative().clone(),
            active_at_end: self.link.active_count() as u64,
            windows: self.windows,
            repetitions: self.repetitions,
            timeline: self.timeline,
            triggers: self.triggers,
            cycles: self.cycles,
            reviews: self.reviews,
            cases,
            events,
        };
        let bases = self.engine.map(|e| e.into_bases());
        SimOutcome { report, bases }
    }
}

/// Runs a scenario from empty case bases.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SimulationReport> {
    Ok(Simulation::new(cfg.clone())?.run()?.report)
}

/// Empty positive and negative bases.
pub fn empty_bases() -> (CaseBase, CaseBase) {
    (CaseBase::new(CaseBaseKind::Positive), CaseBase::new(CaseBaseKind::Negative))
}
