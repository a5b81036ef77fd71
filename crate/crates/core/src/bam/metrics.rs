use serde::{Deserialize, Serialize};

use super::{ClassId, LinkState, Mbps, ModelTag};

/// Event counts for one scope (the whole link or one class).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub arrivals: u64,
    pub established: u64,
    pub blocking: u64,
    pub preemption: u64,
    pub devolution: u64,
    pub unbroken: u64,
    /// LSPs released before completing their holding time for reasons other
    /// than preemption or devolution.
    pub withdrawn: u64,
    /// Sum of requested bandwidth over all arrivals.
    pub offered: Mbps,
}

impl Tally {
    pub fn add(&mut self, other: &Tally) {
        self.arrivals += other.arrivals;
        self.established += other.established;
        self.blocking += other.blocking;
        self.preemption += other.preemption;
        self.devolution += other.devolution;
        self.unbroken += other.unbroken;
        self.withdrawn += other.withdrawn;
        self.offered += other.offered;
    }

    pub fn victims(&self) -> u64 {
        self.preemption + self.devolution
    }
}

/// Preemption, devolution, blocking and unbroken-LSP tallies for one window
/// (or for a whole run), in total and per class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricCounters {
    pub window_id: u64,
    pub total: Tally,
    pub per_class: Vec<Tally>,
    /// Time-integral of occupied bandwidth per lender BC, in Mbps·s.
    pub lender_integral: Vec<f64>,
    /// Time-integral of bandwidth held per class, in Mbps·s.
    pub class_integral: Vec<f64>,
    /// Seconds covered by the integrals.
    pub elapsed: f64,
}

impl MetricCounters {
    pub fn new(classes: usize, window_id: u64) -> Self {
        Self {
            window_id,
            total: Tally::default(),
            per_class: vec![Tally::default(); classes],
            lender_integral: vec![0.0; classes],
            class_integral: vec![0.0; classes],
            elapsed: 0.0,
        }
    }

    pub fn preemption(&self) -> u64 {
        self.total.preemption
    }

    pub fn devolution(&self) -> u64 {
        self.total.devolution
    }

    pub fn blocking(&self) -> u64 {
        self.total.blocking
    }

    pub fn unbroken(&self) -> u64 {
        self.total.unbroken
    }

    pub fn established(&self) -> u64 {
        self.total.established
    }

    pub(crate) fn bump(&mut self, class: ClassId, f: impl Fn(&mut Tally)) {
        f(&mut self.total);
        f(&mut self.per_class[class]);
    }

    pub(crate) fn integrate(&mut self, used_per_lender: &[Mbps], held_per_class: &[Mbps], dt: f64) {
        for (acc, used) in self.lender_integral.iter_mut().zip(used_per_lender) {
            *acc += *used as f64 * dt;
        }
        for (acc, held) in self.class_integral.iter_mut().zip(held_per_class) {
            *acc += *held as f64 * dt;
        }
        self.elapsed += dt;
    }

    /// Adds another counter set into this one (used to fold windows into a
    /// cumulative total).
    pub fn absorb(&mut self, other: &MetricCounters) {
        self.total.add(&other.total);
        for (mine, theirs) in self.per_class.iter_mut().zip(&other.per_class) {
            mine.add(theirs);
        }
        for (mine, theirs) in self.lender_integral.iter_mut().zip(&other.lender_integral) {
            *mine += theirs;
        }
        for (mine, theirs) in self.class_integral.iter_mut().zip(&other.class_integral) {
            *mine += theirs;
        }
        self.elapsed += other.elapsed;
    }
}

/// A read-only snapshot of link state plus one counter set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurements {
    pub time: f64,
    pub active_model: ModelTag,
    pub capacity: Mbps,
    pub bc: Vec<Mbps>,
    /// Occupied / capacity right now.
    pub utilization: f64,
    /// Time-averaged occupied / capacity over the counter window, or the
    /// instantaneous value when the window has no elapsed time.
    pub mean_utilization: f64,
    /// Occupancy of each BC (by any class) over its size, right now.
    pub bc_utilization: Vec<f64>,
    /// Time-averaged bandwidth held by each class over its own BC. Exceeds 1
    /// when the class borrows.
    pub class_load: Vec<f64>,
    pub active_lsps: u64,
    pub counters: MetricCounters,
}

impl Measurements {
    fn rate(&self, count: u64) -> f64 {
        if self.counters.total.arrivals == 0 {
            0.0
        } else {
            count as f64 / self.counters.total.arrivals as f64
        }
    }

    pub fn preemption_rate(&self) -> f64 {
        self.rate(self.counters.total.preemption)
    }

    pub fn devolution_rate(&self) -> f64 {
        self.rate(self.counters.total.devolution)
    }

    pub fn blocking_rate(&self) -> f64 {
        self.rate(self.counters.total.blocking)
    }

    pub fn unbroken_rate(&self) -> f64 {
        self.rate(self.counters.total.unbroken)
    }

    /// Offered load per class in Mbps, estimated as requested bandwidth per
    /// second times the mean holding time.
    pub fn offered_load(&self, mean_holding: f64) -> Vec<f64> {
        self.counters
            .per_class
            .iter()
            .map(|t| {
                if self.counters.elapsed > 0.0 {
                    t.offered as f64 / self.counters.elapsed * mean_holding
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Snapshot of per-class and total utilization plus the given counters.
pub fn snapshot_measurements(state: &LinkState, counters: &MetricCounters) -> Measurements {
    let capacity = state.capacity();
    let bc: Vec<Mbps> = state.classes().iter().map(|c| c.bc).collect();
    let used_total: Mbps = state.used_per_lender().iter().sum();
    let utilization = used_total as f64 / capacity as f64;
    let bc_utilization = state
        .used_per_lender()
        .iter()
        .zip(&bc)
        .map(|(used, bc)| *used as f64 / *bc as f64)
        .collect();
    let (mean_utilization, class_load) = if counters.elapsed > 0.0 {
        let occupied: f64 = counters.lender_integral.iter().sum();
        let load = counters
            .class_integral
            .iter()
            .zip(&bc)
            .map(|(integral, bc)| integral / counters.elapsed / *bc as f64)
            .collect();
        (occupied / counters.elapsed / capacity as f64, load)
    } else {
        let load = state
            .held_per_class()
            .iter()
            .zip(&bc)
            .map(|(held, bc)| *held as f64 / *bc as f64)
            .collect();
        (utilization, load)
    };
    Measurements {
        time: state.clock(),
        active_model: state.active_model(),
        capacity,
        bc,
        utilization,
        mean_utilization,
        bc_utilization,
        class_load,
        active_lsps: state.active_count() as u64,
        counters: counters.clone(),
    }
}
