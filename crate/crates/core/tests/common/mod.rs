//! Shared fixtures for the integration targets: a brute-force admission
//! oracle, random link generators and the property checks that both the
//! `properties` suite and the acceptance runner execute.
#![allow(dead_code)]

use std::cmp::Reverse;

use bamcbr_core::bam::{ClassId, LinkState, LspId, Mbps, MetricCounters, VictimKind};
use bamcbr_core::cbr::{similarity, CaseBase, CaseBaseKind, CbrConfig, CbrEngine, CycleOutcome, Trigger};
use bamcbr_core::policy::{Comparator, Condition, PolicyRule, Threshold};
use bamcbr_core::sim::{Mode, Simulation};
use bamcbr_core::{
    snapshot_measurements, BamModel, LspRequest, ScenarioConfig, SharingMatrix, TrafficClassConfig,
};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// Random micro links

/// A link with 1..=3 classes, capacity at most 30 and a random sharing
/// matrix (one of the presets or an arbitrary custom one).
pub fn random_link(rng: &mut ChaCha8Rng) -> LinkState {
    let n = rng.random_range(1..=3usize);
    let capacity: Mbps = rng.random_range(n as Mbps..=30);
    // Random composition of `capacity` into `n` positive parts.
    let mut cuts: Vec<Mbps> = (1..capacity).collect();
    cuts.shuffle(rng);
    let mut cuts: Vec<Mbps> = cuts.into_iter().take(n - 1).collect();
    cuts.sort_unstable();
    let mut bcs = Vec::with_capacity(n);
    let mut prev = 0;
    for c in cuts.iter().copied().chain(std::iter::once(capacity)) {
        bcs.push(c - prev);
        prev = c;
    }
    let mut ranks: Vec<u32> = (0..n as u32).collect();
    ranks.shuffle(rng);
    let classes: Vec<TrafficClassConfig> =
        (0..n).map(|i| TrafficClassConfig::new(i, ranks[i], bcs[i])).collect();
    random_matrix_link(rng, capacity, classes)
}

fn random_matrix_link(rng: &mut ChaCha8Rng, capacity: Mbps, classes: Vec<TrafficClassConfig>) -> LinkState {
    let mut link = if rng.random_bool(0.25) {
        let n = classes.len();
        let allow = (0..n).map(|b| (0..n).map(|l| b == l || rng.random_bool(0.5)).collect()).collect();
        let matrix = SharingMatrix::custom(allow).expect("diagonal is set");
        LinkState::with_matrix(capacity, classes, matrix, bamcbr_core::ModelTag::Custom).expect("valid link")
    } else {
        LinkState::new(capacity, classes, random_model(rng)).expect("valid link")
    };
    link.set_record_events(false);
    link
}

pub fn random_model(rng: &mut impl Rng) -> BamModel {
    BamModel::ALL[rng.random_range(0..BamModel::ALL.len())]
}

fn random_bandwidth(rng: &mut ChaCha8Rng, capacity: Mbps) -> Mbps {
    if rng.random_bool(0.1) {
        rng.random_range(1..=capacity + 2)
    } else {
        rng.random_range(1..=10)
    }
}

// ---------------------------------------------------------------------------
// Brute-force admission oracle

/// What the oracle expects from one request.
#[derive(Debug, PartialEq, Eq)]
pub enum Expected {
    Blocked,
    /// Accepted after tearing down exactly these LSPs.
    Accepted(Vec<LspId>),
}

/// Does some split of `bw` over `lenders` fit inside `avail`? Every integer
/// breakdown is tried.
fn some_breakdown_fits(lenders: &[ClassId], avail: &[Mbps], bw: Mbps) -> bool {
    fn go(lenders: &[ClassId], avail: &[Mbps], remaining: Mbps) -> bool {
        match lenders.split_first() {
            None => remaining == 0,
            Some((&l, rest)) => (0..=avail[l].min(remaining)).any(|x| go(rest, avail, remaining - x)),
        }
    }
    go(lenders, avail, bw)
}

/// Recomputes everything from the LSP records and enumerates every victim
/// subset and every breakdown.
///
/// Borrowers sitting in the requester's BC may be torn down; only the
/// portion they hold inside that BC is reclaimed for the requester. The
/// request is admissible when some victim subset leaves room for some
/// breakdown over the permitted lenders. The victims actually used are the
/// shortest feasible prefix of the teardown order (lowest priority first,
/// newest first), which is empty whenever spare bandwidth alone suffices.
pub fn oracle(link: &LinkState, class: ClassId, bw: Mbps) -> Expected {
    let classes = link.classes();
    let n = classes.len();
    let mut used = vec![0; n];
    for r in link.active_lsps() {
        for (&l, &amount) in &r.breakdown {
            used[l] += amount;
        }
    }
    let spare: Vec<Mbps> = (0..n).map(|l| classes[l].bc - used[l]).collect();
    let lenders: Vec<ClassId> = (0..n).filter(|&l| link.matrix().allows(class, l)).collect();

    let mut borrowers: Vec<(u32, Reverse<LspId>, Mbps)> = link
        .active_lsps()
        .filter(|r| r.class != class)
        .filter_map(|r| r.breakdown.get(&class).map(|&p| (classes[r.class].priority, Reverse(r.id), p)))
        .filter(|b| b.2 > 0)
        .collect();
    borrowers.sort();

    let feasible = |subset: &[usize]| {
        let mut avail = spare.clone();
        avail[class] += subset.iter().map(|&i| borrowers[i].2).sum::<Mbps>();
        some_breakdown_fits(&lenders, &avail, bw)
    };

    let m = borrowers.len();
    let any = (0u32..1 << m).any(|mask| {
        let subset: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        feasible(&subset)
    });
    if !any {
        return Expected::Blocked;
    }
    let k = (0..=m)
        .find(|&k| feasible(&(0..k).collect::<Vec<_>>()))
        .expect("the full set is a prefix and some subset is feasible");
    Expected::Accepted(borrowers[..k].iter().map(|b| b.1 .0).collect())
}

/// Checks one admission against the oracle, including victim direction.
pub fn check_admission(link: &mut LinkState, class: ClassId, bw: Mbps, t: f64) -> Result<(), String> {
    let expected = oracle(link, class, bw);
    let ranks: Vec<u32> = link.classes().iter().map(|c| c.priority).collect();
    let decision = link
        .admit_lsp(LspRequest::new(class, bw).at(t, 1.0))
        .map_err(|e| format!("admit_lsp failed: {e}"))?;
    match (&expected, decision.is_accepted()) {
        (Expected::Blocked, false) => Ok(()),
        (Expected::Accepted(victims), true) => {
            let got: Vec<LspId> = decision.victims.iter().map(|v| v.lsp).collect();
            if &got != victims {
                return Err(format!("class {class} bw {bw}: victims {got:?}, oracle {victims:?}"));
            }
            for v in &decision.victims {
                let ok = match v.kind {
                    VictimKind::Preempted => ranks[v.class] < ranks[class],
                    VictimKind::Devolved => ranks[v.class] > ranks[class],
                };
                if !ok {
                    return Err(format!("victim {:?} has the wrong direction", v));
                }
            }
            Ok(())
        }
        (e, accepted) => Err(format!("class {class} bw {bw}: accepted={accepted}, oracle {e:?}")),
    }
}

/// One micro-instance: a random link, a random history of at most six
/// concurrent LSPs (every admission checked), an optional model switch, and
/// a final checked request.
pub fn oracle_instance(seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut link = random_link(&mut rng);
    let n = link.classes().len();
    let capacity = link.capacity();
    let mut checked = 0;
    let mut t = 0.0;
    for _ in 0..rng.random_range(0..12) {
        t += 1.0;
        let active: Vec<LspId> = link.active_lsps().map(|r| r.id).collect();
        if !active.is_empty() && (active.len() >= 6 || rng.random_bool(0.25)) {
            let id = active[rng.random_range(0..active.len())];
            link.release_lsp(id, true, t).map_err(|e| e.to_string())?;
        } else {
            let class = rng.random_range(0..n);
            let bw = random_bandwidth(&mut rng, capacity);
            check_admission(&mut link, class, bw, t)?;
            checked += 1;
        }
    }
    while link.active_count() > 6 {
        let id = link.active_lsps().next().map(|r| r.id).expect("non-empty");
        link.release_lsp(id, true, t).map_err(|e| e.to_string())?;
    }
    if rng.random_bool(0.3) {
        link.reconfigure_model(random_model(&mut rng), t).map_err(|e| e.to_string())?;
    }
    let class = rng.random_range(0..n);
    let bw = random_bandwidth(&mut rng, capacity);
    check_admission(&mut link, class, bw, t + 1.0)?;
    Ok(checked + 1)
}

// ---------------------------------------------------------------------------
// Link operation sequences

#[derive(Clone, Debug)]
pub enum LinkOp {
    Admit { class: usize, bw: Mbps },
    Release { pick: usize, completed: bool },
    Reconfigure { model: usize },
    Advance { dt: u8 },
}

pub fn link_ops() -> impl Strategy<Value = (u64, Vec<LinkOp>)> {
    let op = prop_oneof![
        5 => (0..3usize, 1..=12 as Mbps).prop_map(|(class, bw)| LinkOp::Admit { class, bw }),
        2 => (any::<usize>(), any::<bool>()).prop_map(|(pick, completed)| LinkOp::Release { pick, completed }),
        1 => (0..3usize).prop_map(|model| LinkOp::Reconfigure { model }),
        1 => any::<u8>().prop_map(|dt| LinkOp::Advance { dt }),
    ];
    (any::<u64>(), prop::collection::vec(op, 1..60))
}

/// Replays `ops` on a random micro link, calling `check` after every step.
fn replay_ops(
    seed: u64,
    ops: &[LinkOp],
    mut check: impl FnMut(&LinkState) -> Result<(), TestCaseError>,
) -> Result<(), TestCaseError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut link = random_link(&mut rng);
    let n = link.classes().len();
    let mut t = 0.0;
    for op in ops {
        match *op {
            LinkOp::Admit { class, bw } => {
                link.admit_lsp(LspRequest::new(class % n, bw).at(t, 10.0))
                    .map_err(|e| TestCaseError::fail(e.to_string()))?;
            }
            LinkOp::Release { pick, completed } => {
                let ids: Vec<LspId> = link.active_lsps().map(|r| r.id).collect();
                if !ids.is_empty() {
                    link.release_lsp(ids[pick % ids.len()], completed, t)
                        .map_err(|e| TestCaseError::fail(e.to_string()))?;
                }
            }
            LinkOp::Reconfigure { model } => {
                link.reconfigure_model(BamModel::ALL[model], t).map_err(|e| TestCaseError::fail(e.to_string()))?;
            }
            LinkOp::Advance { dt } => {
                t += dt as f64;
                link.advance_to(t);
            }
        }
        check(&link)?;
    }
    Ok(())
}

pub fn capacity_safety((seed, ops): (u64, Vec<LinkOp>)) -> Result<(), TestCaseError> {
    replay_ops(seed, &ops, |link| {
        let used = link.used_per_lender();
        let total: Mbps = used.iter().sum();
        prop_assert!(total <= link.capacity(), "{total} > capacity {}", link.capacity());
        for (l, c) in link.classes().iter().enumerate() {
            prop_assert!(used[l] <= c.bc, "lender {l}: {} > bc {}", used[l], c.bc);
        }
        Ok(())
    })
}

pub fn ledger_consistency((seed, ops): (u64, Vec<LinkOp>)) -> Result<(), TestCaseError> {
    replay_ops(seed, &ops, |link| {
        let n = link.classes().len();
        let mut lent = vec![0; n];
        let mut held = vec![0; n];
        for r in link.active_lsps() {
            prop_assert_eq!(r.breakdown.values().sum::<Mbps>(), r.bandwidth);
            for (&l, &a) in &r.breakdown {
                lent[l] += a;
            }
            held[r.class] += r.bandwidth;
        }
        prop_assert_eq!(link.used_per_lender(), &lent[..]);
        prop_assert_eq!(link.held_per_class(), &held[..]);
        prop_assert!(link.check_ledger().is_ok());
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Small scenarios

pub fn mode_of(i: u8) -> Mode {
    match i % 4 {
        0 => Mode::Static { model: BamModel::Mam },
        1 => Mode::Static { model: BamModel::Rdm },
        2 => Mode::Static { model: BamModel::Atcs },
        _ => Mode::Cognitive { initial_model: BamModel::Mam },
    }
}

/// The reference link and patterns compressed to a few simulated minutes.
pub fn small_scenario(seed: u64, mode: u8, pattern_secs: u16, repetitions: u8) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::reference(seed, mode_of(mode));
    cfg.schedule.pattern_duration = pattern_secs as f64;
    cfg.schedule.repetitions = repetitions as u32;
    cfg.timers.window = 60.0;
    cfg.timers.proactive_interval = Some(150.0);
    cfg
}

pub fn scenarios() -> impl Strategy<Value = ScenarioConfig> {
    (any::<u64>(), any::<u8>(), 30..240u16, 1..=2u8).prop_map(|(s, m, d, r)| small_scenario(s, m, d, r))
}

pub fn conservation(cfg: ScenarioConfig) -> Result<(), TestCaseError> {
    let report = bamcbr_core::run_scenario(&cfg).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let t = report.totals();
    prop_assert_eq!(t.arrivals, t.established + t.blocking);
    prop_assert_eq!(t.established, t.unbroken + t.preemption + t.devolution + t.withdrawn + report.active_at_end);
    prop_assert_eq!(t.withdrawn, 0);
    for (c, pc) in report.cumulative.per_class.iter().enumerate() {
        prop_assert_eq!(pc.arrivals, pc.established + pc.blocking, "class {}", c);
    }
    Ok(())
}

pub fn determinism(cfg: ScenarioConfig) -> Result<(), TestCaseError> {
    let a = Simulation::new(cfg.clone()).and_then(|s| s.run()).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let b = Simulation::new(cfg).and_then(|s| s.run()).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(&a.report, &b.report);
    prop_assert_eq!(a.report.to_json(), b.report.to_json());
    prop_assert_eq!(a.bases, b.bases);
    Ok(())
}

// ---------------------------------------------------------------------------
// Descriptors

/// A random measurement snapshot on the reference link.
pub fn random_measurements(seed: u64) -> bamcbr_core::Measurements {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = vec![
        TrafficClassConfig::new(0, 0, 400),
        TrafficClassConfig::new(1, 1, 350),
        TrafficClassConfig::new(2, 2, 250),
    ];
    let mut link = LinkState::new(1000, classes, random_model(&mut rng)).expect("reference link");
    link.set_record_events(false);
    for _ in 0..rng.random_range(0..40) {
        let class = rng.random_range(0..3);
        let bw = [10, 25, 50][rng.random_range(0..3)];
        let _ = link.admit_lsp(LspRequest::new(class, bw));
    }
    let mut counters = MetricCounters::new(3, 0);
    counters.elapsed = rng.random_range(0.0..600.0);
    for c in 0..3 {
        counters.lender_integral[c] = rng.random_range(0.0..400.0) * counters.elapsed;
        counters.class_integral[c] = rng.random_range(0.0..500.0) * counters.elapsed;
    }
    let arrivals = rng.random_range(0..300);
    counters.total.arrivals = arrivals;
    counters.total.blocking = rng.random_range(0..=arrivals);
    counters.total.preemption = rng.random_range(0..=arrivals / 4);
    counters.total.devolution = rng.random_range(0..=arrivals / 4);
    snapshot_measurements(&link, &counters)
}

pub fn similarity_laws((a, b): (u64, u64)) -> Result<(), TestCaseError> {
    let engine = CbrEngine::new(CbrConfig::default(), 0);
    let cfg = &engine.config().similarity;
    let symptoms = [None, Some("x".to_string()), Some("y".to_string())];
    let pa = engine.describe(&random_measurements(a), symptoms[(a % 3) as usize].clone());
    let pb = engine.describe(&random_measurements(b), symptoms[(b % 3) as usize].clone());
    let saa = similarity(&pa, &pa, cfg).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let sab = similarity(&pa, &pb, cfg).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let sba = similarity(&pb, &pa, cfg).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert!((saa - 1.0).abs() < 1e-12, "self-similarity {saa}");
    prop_assert_eq!(sab, sba);
    prop_assert!((0.0..=1.0).contains(&sab), "out of bounds: {sab}");
    Ok(())
}

pub fn descriptor_pairs() -> impl Strategy<Value = (u64, u64)> {
    (any::<u64>(), any::<u64>())
}

// ---------------------------------------------------------------------------
// Negative-case exclusion

pub fn exclusion_inputs() -> impl Strategy<Value = (u64, u64, usize, bool, u64)> {
    (any::<u64>(), any::<u64>(), 0..3usize, any::<bool>(), any::<u64>())
}

/// A rule that always fires, so every cycle proposes something.
pub fn always_breach() -> Vec<PolicyRule> {
    vec![PolicyRule {
        name: "probe".into(),
        conditions: vec![Condition::new("link_utilization", Comparator::Ge, Threshold::Number(0.0))],
        symptom: "probe".into(),
        suggested_solution: None,
    }]
}

/// Stores (P, X) as negative, then replays problems near and far from P,
/// with X also planted as a positive case and pushed as a manager
/// injection. Whenever X is applied the live problem must be below the
/// acceptance threshold relative to P.
pub fn negative_exclusion(
    (stored, live, rejected, inject, engine_seed): (u64, u64, usize, bool, u64),
) -> Result<(), TestCaseError> {
    let cfg = CbrConfig::default();
    let rejected = BamModel::ALL[rejected];
    let rules = always_breach();
    let probe = CbrEngine::new(cfg.clone(), 0);

    let before = random_measurements(stored);
    let p = probe.describe(&before, Some("probe".into()));
    let mut negative = CaseBase::new(CaseBaseKind::Negative);
    negative.insert(bamcbr_core::cbr::adapt(rejected.into(), &p, Some(&before), 0.0));
    let mut positive = CaseBase::new(CaseBaseKind::Positive);
    positive.insert(bamcbr_core::cbr::adapt(rejected.into(), &p, Some(&before), 0.0));

    // Half of the replays reuse the stored measurements exactly.
    let m = if live % 2 == 0 { before.clone() } else { random_measurements(live) };
    let q = probe.describe(&m, Some("probe".into()));
    let score = similarity(&q, &p, &cfg.similarity).map_err(|e| TestCaseError::fail(e.to_string()))?;

    let mut engine = CbrEngine::new(cfg.clone(), engine_seed).with_bases(positive, negative);
    if inject {
        engine.inject_solution(rejected);
    }
    let classes = vec![
        TrafficClassConfig::new(0, 0, 400),
        TrafficClassConfig::new(1, 1, 350),
        TrafficClassConfig::new(2, 2, 250),
    ];
    let model = m.active_model.preset().unwrap_or(BamModel::Mam);
    let mut link = LinkState::new(1000, classes, model).expect("reference link");
    match engine.run_cycle(Trigger::Reactive, &mut link, &m, &rules, 1.0) {
        CycleOutcome::Applied { model, .. } if model == rejected => {
            prop_assert!(score < cfg.similarity.threshold, "rejected {model} re-proposed at similarity {score}");
        }
        _ => {}
    }
    Ok(())
}
