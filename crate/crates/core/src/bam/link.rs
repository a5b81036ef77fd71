use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::metrics::{snapshot_measurements, Measurements, MetricCounters};
use super::model::{validate_classes, BamModel, ModelTag, SharingMatrix, TrafficClassConfig};
use super::{ClassId, Mbps};
use crate::{Error, Result};

/// Identifier of an LSP, assigned in admission order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LspId(pub u64);

impl fmt::Display for LspId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "lsp#{}", self.0)
    }
}

/// An LSP setup request.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LspRequest {
    pub class: ClassId,
    pub bandwidth: Mbps,
    pub arrival_time: f64,
    pub holding_time: f64,
}

impl LspRequest {
    pub fn new(class: ClassId, bandwidth: Mbps) -> Self {
        Self { class, bandwidth, arrival_time: 0.0, holding_time: 0.0 }
    }

    pub fn at(mut self, arrival_time: f64, holding_time: f64) -> Self {
        self.arrival_time = arrival_time;
        self.holding_time = holding_time;
        self
    }
}

/// An admitted LSP and where its bandwidth came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LspRecord {
    pub id: LspId,
    pub class: ClassId,
    pub bandwidth: Mbps,
    pub arrival_time: f64,
    pub holding_time: f64,
    /// Lender class → bandwidth taken from that class's BC.
    pub breakdown: BTreeMap<ClassId, Mbps>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Accepted,
    Blocked,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VictimKind {
    /// A lower-priority borrower torn down by the owning class.
    Preempted,
    /// A higher-priority borrower torn down by the owning class.
    Devolved,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Victim {
    pub lsp: LspId,
    pub class: ClassId,
    pub kind: VictimKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissionDecision {
    pub outcome: Outcome,
    pub lsp: Option<LspId>,
    pub breakdown: BTreeMap<ClassId, Mbps>,
    pub victims: Vec<Victim>,
}

impl AdmissionDecision {
    fn blocked() -> Self {
        Self { outcome: Outcome::Blocked, lsp: None, breakdown: BTreeMap::new(), victims: Vec::new() }
    }

    pub fn is_accepted(&self) -> bool {
        self.outcome == Outcome::Accepted
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkEvent {
    pub time: f64,
    #[serde(flatten)]
    pub kind: LinkEventKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LinkEventKind {
    Admitted { lsp: LspId, class: ClassId, bandwidth: Mbps },
    Blocked { class: ClassId, bandwidth: Mbps },
    Preempted { lsp: LspId, class: ClassId, by_class: ClassId },
    Devolved { lsp: LspId, class: ClassId, by_class: ClassId },
    Released { lsp: LspId, completed: bool },
    UnknownRelease { lsp: LspId },
    Reconfigured { from: ModelTag, to: ModelTag },
}

/// The allocation ledger of one link.
///
/// All mutation goes through [`admit_lsp`](Self::admit_lsp),
/// [`release_lsp`](Self::release_lsp) and the `reconfigure_*` methods, each of
/// which keeps `used_per_lender` equal to the column sums of the active LSPs'
/// breakdowns.
#[derive(Clone, Debug)]
pub struct LinkState {
    capacity: Mbps,
    classes: Vec<TrafficClassConfig>,
    matrix: SharingMatrix,
    active_model: ModelTag,
    lsps: BTreeMap<LspId, LspRecord>,
    used_per_lender: Vec<Mbps>,
    held_per_class: Vec<Mbps>,
    /// Candidate lenders per borrower, own class first, then by increasing
    /// priority distance, ties toward the lower index.
    lender_order: Vec<Vec<ClassId>>,
    cumulative: MetricCounters,
    window: MetricCounters,
    clock: f64,
    next_id: u64,
    events: Vec<LinkEvent>,
    record_events: bool,
}

impl LinkState {
    pub fn new(capacity: Mbps, classes: Vec<TrafficClassConfig>, model: BamModel) -> Result<Self> {
        let matrix = SharingMatrix::preset(model, &classes)?;
        Self::with_matrix(capacity, classes, matrix, model.into())
    }

    pub fn with_matrix(
        capacity: Mbps,
        classes: Vec<TrafficClassConfig>,
        matrix: SharingMatrix,
        tag: ModelTag,
    ) -> Result<Self> {
        validate_classes(capacity, &classes)?;
        if matrix.len() != classes.len() {
            return Err(Error::Validation(vec![format!(
                "matrix: {} rows for {} classes",
                matrix.len(),
                classes.len()
            )]));
        }
        let n = classes.len();
        let lender_order = (0..n)
            .map(|b| {
                let mut order: Vec<ClassId> = (0..n).collect();
                order.sort_by_key(|&l| (l != b, classes[l].priority.abs_diff(classes[b].priority), l));
                order
            })
            .collect();
        Ok(Self {
            capacity,
            matrix,
            active_model: tag,
            lsps: BTreeMap::new(),
            used_per_lender: vec![0; n],
            held_per_class: vec![0; n],
            lender_order,
            cumulative: MetricCounters::new(n, 0),
            window: MetricCounters::new(n, 0),
            clock: 0.0,
            next_id: 0,
            events: Vec::new(),
            record_events: true,
            classes,
        })
    }

    pub fn set_record_events(&mut self, on: bool) {
        self.record_events = on;
    }

    pub fn capacity(&self) -> Mbps {
        self.capacity
    }

    pub fn classes(&self) -> &[TrafficClassConfig] {
        &self.classes
    }

    pub fn matrix(&self) -> &SharingMatrix {
        &self.matrix
    }

    pub fn active_model(&self) -> ModelTag {
        self.active_model
    }

    pub fn used_per_lender(&self) -> &[Mbps] {
        &self.used_per_lender
    }

    pub fn held_per_class(&self) -> &[Mbps] {
        &self.held_per_class
    }

    pub fn spare(&self, lender: ClassId) -> Mbps {
        self.classes[lender].bc - self.used_per_lender[lender]
    }

    pub fn active_lsps(&self) -> impl Iterator<Item = &LspRecord> {
        self.lsps.values()
    }

    pub fn lsp(&self, id: LspId) -> Option<&LspRecord> {
        self.lsps.get(&id)
    }

    pub fn is_active(&self, id: LspId) -> bool {
        self.lsps.contains_key(&id)
    }

    pub fn active_count(&self) -> usize {
        self.lsps.len()
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn cumulative(&self) -> &MetricCounters {
        &self.cumulative
    }

    pub fn window(&self) -> &MetricCounters {
        &self.window
    }

    pub fn events(&self) -> &[LinkEvent] {
        &self.events
    }

    pub fn drain_events(&mut self) -> Vec<LinkEvent> {
        std::mem::take(&mut self.events)
    }

    /// Lenders `class` may draw from under the active matrix, in fill order.
    pub fn permitted_lenders(&self, class: ClassId) -> Vec<ClassId> {
        self.lender_order[class]
            .iter()
            .copied()
            .filter(|&l| self.matrix.allows(class, l))
            .collect()
    }

    /// Moves the clock forward, accumulating occupancy integrals.
    pub fn advance_to(&mut self, time: f64) {
        if time > self.clock {
            let dt = time - self.clock;
            self.window.integrate(&self.used_per_lender, &self.held_per_class, dt);
            self.cumulative.integrate(&self.used_per_lender, &self.held_per_class, dt);
            self.clock = time;
        }
    }

    fn log(&mut self, kind: LinkEventKind) {
        if self.record_events {
            self.events.push(LinkEvent { time: self.clock, kind });
        }
    }

    fn bump(&mut self, class: ClassId, f: impl Fn(&mut super::Tally) + Copy) {
        self.window.bump(class, f);
        self.cumulative.bump(class, f);
    }

    /// Borrowers sitting inside `owner`'s BC, in teardown order: lowest
    /// priority first, then most recently admitted first.
    fn reclaim_candidates(&self, owner: ClassId) -> Vec<(LspId, Mbps)> {
        let mut candidates: Vec<&LspRecord> = self
            .lsps
            .values()
            .filter(|r| r.class != owner && r.breakdown.get(&owner).copied().unwrap_or(0) > 0)
            .collect();
        candidates.sort_by_key(|r| (self.classes[r.class].priority, std::cmp::Reverse(r.id)));
        candidates.iter().map(|r| (r.id, r.breakdown[&owner])).collect()
    }

    /// Tries to admit an LSP.
    ///
    /// Spare bandwidth across permitted lenders is used first. Only when it
    /// is insufficient does the requester reclaim bandwidth inside its own BC
    /// from borrowers, tearing down the shortest prefix of the teardown order
    /// that covers the shortfall. A request that cannot be covered is
    /// blocked and only the blocking counter changes.
    pub fn admit_lsp(&mut self, request: LspRequest) -> Result<AdmissionDecision> {
        let class = request.class;
        if class >= self.classes.len() {
            return Err(Error::InvalidRequest(format!("class {class} does not exist on this link")));
        }
        if request.bandwidth == 0 {
            return Err(Error::InvalidRequest("bandwidth must be positive".into()));
        }
        self.check_bounds()?;
        self.advance_to(request.arrival_time);
        let bw = request.bandwidth;
        self.bump(class, |t| {
            t.arrivals += 1;
            t.offered += bw;
        });

        let lenders = self.permitted_lenders(class);
        let spare_total: Mbps = lenders.iter().map(|&l| self.spare(l)).sum();

        let mut victims: Vec<LspId> = Vec::new();
        if bw > self.capacity {
            return Ok(self.block(class, bw));
        }
        if spare_total < bw {
            let shortfall = bw - spare_total;
            let mut reclaimed: Mbps = 0;
            for (id, portion) in self.reclaim_candidates(class) {
                if reclaimed >= shortfall {
                    break;
                }
                reclaimed += portion;
                victims.push(id);
            }
            if reclaimed < shortfall {
                return Ok(self.block(class, bw));
            }
        }

        let requester_rank = self.classes[class].priority;
        let mut torn_down = Vec::with_capacity(victims.len());
        for id in victims {
            let record = self.remove(id)?;
            let kind = if self.classes[record.class].priority < requester_rank {
                VictimKind::Preempted
            } else {
                VictimKind::Devolved
            };
            match kind {
                VictimKind::Preempted => {
                    self.bump(record.class, |t| t.preemption += 1);
                    self.log(LinkEventKind::Preempted { lsp: id, class: record.class, by_class: class });
                }
                VictimKind::Devolved => {
                    self.bump(record.class, |t| t.devolution += 1);
                    self.log(LinkEventKind::Devolved { lsp: id, class: record.class, by_class: class });
                }
            }
            torn_down.push(Victim { lsp: id, class: record.class, kind });
        }

        let mut breakdown = BTreeMap::new();
        let mut remaining = bw;
        for &lender in &lenders {
            if remaining == 0 {
                break;
            }
            let take = remaining.min(self.spare(lender));
            if take > 0 {
                breakdown.insert(lender, take);
                remaining -= take;
            }
        }
        if remaining > 0 {
            return Err(Error::Ledger(format!(
                "admission of {bw} Mbps for class {class} left {remaining} Mbps uncovered after reclaim"
            )));
        }

        let id = LspId(self.next_id);
        self.next_id += 1;
        for (&lender, &amount) in &breakdown {
            self.used_per_lender[lender] += amount;
        }
        self.held_per_class[class] += bw;
        self.lsps.insert(
            id,
            LspRecord {
                id,
                class,
                bandwidth: bw,
                arrival_time: request.arrival_time,
                holding_time: request.holding_time,
                breakdown: breakdown.clone(),
            },
        );
        self.bump(class, |t| t.established += 1);
        self.log(LinkEventKind::Admitted { lsp: id, class, bandwidth: bw });
        #[cfg(debug_assertions)]
        self.check_ledger()?;
        Ok(AdmissionDecision { outcome: Outcome::Accepted, lsp: Some(id), breakdown, victims: torn_down })
    }

    fn block(&mut self, class: ClassId, bandwidth: Mbps) -> AdmissionDecision {
        self.bump(class, |t| t.blocking += 1);
        self.log(LinkEventKind::Blocked { class, bandwidth });
        AdmissionDecision::blocked()
    }

    fn remove(&mut self, id: LspId) -> Result<LspRecord> {
        let record = self
            .lsps
            .remove(&id)
            .ok_or_else(|| Error::Ledger(format!("{id} vanished from the ledger")))?;
        for (&lender, &amount) in &record.breakdown {
            self.used_per_lender[lender] = self.used_per_lender[lender]
                .checked_sub(amount)
                .ok_or_else(|| Error::Ledger(format!("lender {lender} underflow releasing {id}")))?;
        }
        self.held_per_class[record.class] -= record.bandwidth;
        Ok(record)
    }

    /// Releases an LSP, returning its bandwidth to its lenders. `completed`
    /// marks an LSP that ran its full holding time. Unknown ids are a no-op
    /// that leaves a warning event and returns `None`.
    pub fn release_lsp(&mut self, id: LspId, completed: bool, time: f64) -> Result<Option<LspRecord>> {
        self.advance_to(time);
        if !self.lsps.contains_key(&id) {
            self.log(LinkEventKind::UnknownRelease { lsp: id });
            return Ok(None);
        }
        let record = self.remove(id)?;
        if completed {
            self.bump(record.class, |t| t.unbroken += 1);
        } else {
            self.bump(record.class, |t| t.withdrawn += 1);
        }
        self.log(LinkEventKind::Released { lsp: id, completed });
        Ok(Some(record))
    }

    /// Switches to a preset model. Existing LSPs keep their breakdowns.
    pub fn reconfigure_model(&mut self, model: BamModel, time: f64) -> Result<()> {
        let matrix = SharingMatrix::preset(model, &self.classes)?;
        self.reconfigure(matrix, model.into(), time)
    }

    pub fn reconfigure_custom(&mut self, matrix: SharingMatrix, time: f64) -> Result<()> {
        self.reconfigure(matrix, ModelTag::Custom, time)
    }

    fn reconfigure(&mut self, matrix: SharingMatrix, tag: ModelTag, time: f64) -> Result<()> {
        if matrix.len() != self.classes.len() {
            return Err(Error::Validation(vec![format!(
                "matrix: {} rows for {} classes",
                matrix.len(),
                self.classes.len()
            )]));
        }
        self.advance_to(time);
        let from = self.active_model;
        self.matrix = matrix;
        self.active_model = tag;
        self.log(LinkEventKind::Reconfigured { from, to: tag });
        Ok(())
    }

    /// Snapshot against the current window counters.
    pub fn measurements(&self) -> Measurements {
        snapshot_measurements(self, &self.window)
    }

    /// Closes the current measurement window at `time`, returning its
    /// snapshot and starting a fresh one.
    pub fn close_window(&mut self, time: f64) -> Measurements {
        self.advance_to(time);
        let snapshot = self.measurements();
        let next = self.window.window_id + 1;
        self.window = MetricCounters::new(self.classes.len(), next);
        snapshot
    }

    fn check_bounds(&self) -> Result<()> {
        for (l, used) in self.used_per_lender.iter().enumerate() {
            if *used > self.classes[l].bc {
                return Err(Error::Ledger(format!(
                    "lender {l} holds {used} Mbps over its BC of {}",
                    self.classes[l].bc
                )));
            }
        }
        Ok(())
    }

    /// Full consistency check: per-BC bounds, capacity, and
    /// `used_per_lender` equal to the recomputed column sums.
    pub fn check_ledger(&self) -> Result<()> {
        self.check_bounds()?;
        let n = self.classes.len();
        let mut columns = vec![0; n];
        let mut held = vec![0; n];
        for record in self.lsps.values() {
            let sum: Mbps = record.breakdown.values().sum();
            if sum != record.bandwidth {
                return Err(Error::Ledger(format!(
                    "{} breakdown sums to {sum}, bandwidth is {}",
                    record.id, record.bandwidth
                )));
            }
            for (&lender, &amount) in &record.breakdown {
                columns[lender] += amount;
            }
            held[record.class] += record.bandwidth;
        }
        if columns != self.used_per_lender {
            return Err(Error::Ledger(format!(
                "used_per_lender {:?} differs from recomputed {columns:?}",
                self.used_per_lender
            )));
        }
        if held != self.held_per_class {
            return Err(Error::Ledger("held_per_class differs from active LSPs".into()));
        }
        let total: Mbps = columns.iter().sum();
        if total > self.capacity {
            return Err(Error::Ledger(format!("{total} Mbps allocated on a {} Mbps link", self.capacity)));
        }
        Ok(())
    }
}
