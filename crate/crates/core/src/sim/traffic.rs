use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::config::{DemandConfig, LoadRegime, TrafficPattern};
use crate::bam::{LspRequest, TrafficClassConfig};

/// Offered load per class in Mbps, after applying the pattern's regime.
pub fn offered_loads(
    pattern: &TrafficPattern,
    classes: &[TrafficClassConfig],
    capacity: u64,
    demand: &DemandConfig,
) -> Vec<f64> {
    let base: Vec<f64> = pattern
        .levels
        .iter()
        .zip(classes)
        .map(|(level, class)| demand.level(*level) * class.bc as f64)
        .collect();
    let total: f64 = base.iter().sum();
    let cap = capacity as f64;
    let scale = match pattern.regime {
        LoadRegime::AtLeastNinety if total < demand.overload_floor * cap => demand.overload_floor * cap / total,
        LoadRegime::UnderNinety if total > demand.underload_ceiling * cap => demand.underload_ceiling * cap / total,
        _ => 1.0,
    };
    base.into_iter().map(|l| l * scale).collect()
}

/// Arrivals for one pattern, starting at time zero and ending before
/// `duration`. Each class draws from its own stream, keyed by
/// `stream`, so a pattern regenerated with the same key is identical.
pub fn generate_arrivals(
    pattern: &TrafficPattern,
    duration: f64,
    classes: &[TrafficClassConfig],
    capacity: u64,
    demand: &DemandConfig,
    seed: u64,
    stream: u64,
) -> Vec<LspRequest> {
    let loads = offered_loads(pattern, classes, capacity, demand);
    let holding = Exp::new(1.0 / demand.mean_holding).expect("positive mean holding");
    let mut out = Vec::new();
    for (class, load) in loads.iter().enumerate() {
        let rate = load / (demand.mean_size() * demand.mean_holding);
        if !(rate > 0.0) {
            continue;
        }
        let gap = Exp::new(rate).expect("positive arrival rate");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream * 64 + class as u64);
        let mut t = gap.sample(&mut rng);
        while t < duration {
            let size = demand.sizes[rng.random_range(0..demand.sizes.len())];
            out.push(LspRequest::new(class, size).at(t, holding.sample(&mut rng)));
            t += gap.sample(&mut rng);
        }
    }
    out.sort_by(|a, b| a.arrival_time.total_cmp(&b.arrival_time).then(a.class.cmp(&b.class)));
    out
}
