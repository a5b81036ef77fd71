//! Acceptance runner. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use bamcbr_core::cbr::{AttrValue, Attributes};
use bamcbr_core::sim::Mode;
use bamcbr_core::{default_policy_set, evaluate_policies, run_scenario, BamModel, ScenarioConfig, SimulationReport};
use proptest::strategy::Strategy;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const ORACLE_INSTANCES: u64 = 10_000;
const PROPERTY_CASES: u32 = 1_000;

type Verdict = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Verdict + 'a>);

fn modes() -> [Mode; 4] {
    [
        Mode::Static { model: BamModel::Mam },
        Mode::Static { model: BamModel::Rdm },
        Mode::Static { model: BamModel::Atcs },
        Mode::Cognitive { initial_model: BamModel::Mam },
    ]
}

/// Reference runs keyed by (seed, label), computed in parallel.
fn reference_runs() -> BTreeMap<(u64, String), SimulationReport> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = SEEDS
            .iter()
            .flat_map(|&seed| modes().into_iter().map(move |mode| (seed, mode)))
            .map(|(seed, mode)| {
                scope.spawn(move || {
                    let cfg = ScenarioConfig::reference(seed, mode);
                    let report = run_scenario(&cfg).expect("reference scenario runs");
                    ((seed, report.label.clone()), report)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("run thread")).collect()
    })
}

struct Runs(BTreeMap<(u64, String), SimulationReport>);

impl Runs {
    fn get(&self, seed: u64, label: &str) -> &SimulationReport {
        &self.0[&(seed, label.to_string())]
    }
}

fn mam_purity(runs: &Runs) -> Verdict {
    for seed in SEEDS {
        let t = runs.get(seed, "MAM").totals();
        if t.preemption != 0 || t.devolution != 0 {
            return Err(format!("seed {seed}: preemption {} devolution {}", t.preemption, t.devolution));
        }
    }
    Ok(format!("seeds {SEEDS:?}: preemption 0, devolution 0"))
}

fn rdm_asymmetry(runs: &Runs) -> Verdict {
    let mut detail = Vec::new();
    for seed in SEEDS {
        let r = runs.get(seed, "RDM");
        let cfg = ScenarioConfig::reference(seed, Mode::Static { model: BamModel::Rdm });
        let rep_len = cfg.schedule.repetition_length();
        let first = cfg.schedule.duration_of(&cfg.schedule.patterns[0]);
        let pattern1: u64 = r
            .windows
            .iter()
            .filter(|w| w.start.rem_euclid(rep_len) < first)
            .map(|w| w.total.preemption)
            .sum();
        let t = r.totals();
        if t.devolution != 0 || pattern1 == 0 {
            return Err(format!("seed {seed}: devolution {} pattern-1 preemption {pattern1}", t.devolution));
        }
        detail.push(format!("{pattern1}"));
    }
    Ok(format!("devolution 0; pattern-1 preemption {}", detail.join("/")))
}

fn ordering(runs: &Runs) -> Verdict {
    for seed in SEEDS {
        let [mam, rdm, atcs] = ["MAM", "RDM", "ATCS"].map(|l| runs.get(seed, l).totals().clone());
        if !(mam.blocking > rdm.blocking && rdm.blocking > atcs.blocking) {
            return Err(format!(
                "seed {seed}: blocking MAM {} RDM {} ATCS {}",
                mam.blocking, rdm.blocking, atcs.blocking
            ));
        }
        if !(atcs.unbroken > rdm.unbroken && rdm.unbroken > mam.unbroken) {
            return Err(format!(
                "seed {seed}: unbroken ATCS {} RDM {} MAM {}",
                atcs.unbroken, rdm.unbroken, mam.unbroken
            ));
        }
    }
    Ok(format!("strict orderings hold for seeds {SEEDS:?}"))
}

fn cognitive_benefit(runs: &Runs) -> Verdict {
    let mut detail = Vec::new();
    for seed in SEEDS {
        let [rdm, atcs, cbr] = ["RDM", "ATCS", "BAMCBR"].map(|l| runs.get(seed, l).totals().clone());
        let loss = |t: &bamcbr_core::Tally| t.preemption + t.devolution;
        let floor = loss(&rdm).min(loss(&atcs));
        if !(loss(&cbr) < floor && cbr.unbroken > rdm.unbroken) {
            return Err(format!(
                "seed {seed}: BAMCBR loss {} vs min(RDM, ATCS) {floor}; unbroken {} vs RDM {}",
                loss(&cbr),
                cbr.unbroken,
                rdm.unbroken
            ));
        }
        detail.push(format!("{}<{floor}", loss(&cbr)));
    }
    Ok(format!("preemption+devolution {}", detail.join(", ")))
}

fn convergence(runs: &Runs) -> Verdict {
    for seed in SEEDS {
        let r = runs.get(seed, "BAMCBR");
        let [.., third, fourth] = r.repetitions.as_slice() else {
            return Err(format!("seed {seed}: {} repetitions", r.repetitions.len()));
        };
        if fourth.retained != 0 || third.plan() != fourth.plan() {
            return Err(format!(
                "seed {seed}: repetition 4 retained {}; plans 3 {:?} vs 4 {:?}",
                fourth.retained,
                third.plan(),
                fourth.plan()
            ));
        }
    }
    Ok(format!("repetition 4 retains 0 and replays repetition 3 for seeds {SEEDS:?}"))
}

fn oracle_equivalence() -> Verdict {
    let mut admissions = 0;
    for seed in 0..ORACLE_INSTANCES {
        admissions += common::oracle_instance(seed).map_err(|e| format!("instance {seed}: {e}"))?;
    }
    Ok(format!("{ORACLE_INSTANCES} instances, {admissions} admissions match"))
}

fn property<S: Strategy>(name: &str, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Verdict {
    let mut runner = TestRunner::new(Config { cases: PROPERTY_CASES, failure_persistence: None, ..Config::default() });
    runner.run(&strategy, test).map(|_| name.to_string()).map_err(|e| format!("{name}: {e}"))
}

fn invariants() -> Verdict {
    let passed = [
        property("capacity safety", common::link_ops(), common::capacity_safety)?,
        property("ledger consistency", common::link_ops(), common::ledger_consistency)?,
        property("conservation", common::scenarios(), common::conservation)?,
        property("similarity laws", common::descriptor_pairs(), common::similarity_laws)?,
        property("negative exclusion", common::exclusion_inputs(), common::negative_exclusion)?,
        property("determinism", common::scenarios(), common::determinism)?,
    ];
    Ok(format!("{} x {PROPERTY_CASES} cases: {}", passed.len(), passed.join(", ")))
}

fn fixture(model: &str, util: f64, blocking: f64, preemption: f64, devolution: f64) -> (Attributes, Attributes) {
    let mut contextual = Attributes::new();
    contextual.insert("active_model".into(), AttrValue::categorical(model));
    let mut measurements = Attributes::new();
    for (name, v) in [
        ("link_utilization", util),
        ("blocking_rate", blocking),
        ("preemption_rate", preemption),
        ("devolution_rate", devolution),
    ] {
        measurements.insert(name.into(), AttrValue::numeric(v, 0.0, 1.0));
    }
    (contextual, measurements)
}

fn policy_fixtures() -> Verdict {
    use BamModel::*;
    let rules = default_policy_set();
    let firing = [
        (fixture("MAM", 0.45, 0.0, 0.0, 0.0), "mam_low_utilization", Atcs),
        (fixture("RDM", 0.50, 0.20, 0.0, 0.0), "rdm_low_utilization_high_blocking", Atcs),
        (fixture("RDM", 0.92, 0.05, 0.05, 0.0), "rdm_high_utilization_high_preemption", Mam),
        (fixture("ATCS", 0.90, 0.02, 0.0, 0.03), "atcs_high_utilization_low_preemption_high_devolution", Rdm),
        (fixture("ATCS", 0.95, 0.02, 0.04, 0.0), "atcs_high_utilization_high_preemption", Mam),
    ];
    let compliant = [
        fixture("MAM", 0.92, 0.20, 0.0, 0.0),
        fixture("RDM", 0.50, 0.02, 0.0, 0.0),
        fixture("RDM", 0.92, 0.05, 0.0, 0.0),
        fixture("ATCS", 0.90, 0.02, 0.0, 0.0),
        fixture("ATCS", 0.70, 0.02, 0.04, 0.0),
    ];
    for ((ctx, m), symptom, solution) in &firing {
        let hit = evaluate_policies(m, ctx, &rules).ok_or(format!("`{symptom}` fixture raised nothing"))?;
        if hit.symptom != *symptom || hit.suggested_solution != Some(*solution) {
            return Err(format!("expected {symptom} -> {solution}, got {} -> {:?}", hit.symptom, hit.suggested_solution));
        }
    }
    for (i, (ctx, m)) in compliant.iter().enumerate() {
        if let Some(hit) = evaluate_policies(m, ctx, &rules) {
            return Err(format!("compliant fixture {} raised {}", i + 1, hit.symptom));
        }
    }
    Ok(format!("{} firing, {} compliant", firing.len(), compliant.len()))
}

fn main() {
    let started = Instant::now();
    let runs = Runs(reference_runs());
    let sims = started.elapsed();

    let criteria: [Criterion; 8] = [
        ("MAM purity", Box::new(|| mam_purity(&runs))),
        ("RDM asymmetry", Box::new(|| rdm_asymmetry(&runs))),
        ("ordering reproduction", Box::new(|| ordering(&runs))),
        ("cognitive benefit", Box::new(|| cognitive_benefit(&runs))),
        ("learning convergence", Box::new(|| convergence(&runs))),
        ("admission oracle equivalence", Box::new(oracle_equivalence)),
        ("invariant suite", Box::new(invariants)),
        ("policy fixtures", Box::new(policy_fixtures)),
    ];

    println!("acceptance: {} reference runs in {:.1?}", runs.0.len(), sims);
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let verdict = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        let elapsed = t.elapsed();
        match verdict {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail}) [{elapsed:.1?}]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({detail}) [{elapsed:.1?}]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
