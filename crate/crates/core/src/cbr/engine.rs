use std::collections::{BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::case::{Case, CaseBase, CaseBaseKind, CaseStatus, Solution};
use super::descriptor::{describe, ProblemDescriptor, Tolerances};
use super::similarity::{similarity, SimilarityConfig};
use crate::bam::{BamModel, LinkState, Measurements};
use crate::policy::{evaluate_policies, ManagerGoals, PolicyMatch, PolicyRule};
use crate::{Error, Result};

/// Top-`k` positive cases at or above the acceptance threshold, best first.
/// Equal scores keep the older case first.
pub fn retrieve<'a>(
    problem: &ProblemDescriptor,
    positive: &'a CaseBase,
    cfg: &SimilarityConfig,
    k: usize,
) -> Vec<(&'a Case, f64)> {
    let mut scored: Vec<(&Case, f64)> = positive
        .cases()
        .iter()
        .filter_map(|c| similarity(problem, &c.problem, cfg).ok().map(|s| (c, s)))
        .filter(|(_, s)| *s >= cfg.threshold)
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.created_at.total_cmp(&b.0.created_at)));
    scored.truncate(k.max(1));
    scored
}

/// Models that a similar-enough negative case already rejected.
fn rejected_models(problem: &ProblemDescriptor, negative: &CaseBase, cfg: &SimilarityConfig) -> BTreeSet<BamModel> {
    negative
        .cases()
        .iter()
        .filter(|c| similarity(problem, &c.problem, cfg).is_ok_and(|s| s >= cfg.threshold))
        .map(|c| c.solution.target_model)
        .collect()
}

fn pick<R: Rng + ?Sized>(candidates: &[BamModel], hint: Option<(BamModel, f64)>, rng: &mut R) -> BamModel {
    let weight = |m: BamModel| match hint {
        Some((h, w)) if h == m => w,
        _ => 1.0,
    };
    let total: f64 = candidates.iter().map(|m| weight(*m)).sum();
    let mut draw = rng.random::<f64>() * total;
    for m in candidates {
        draw -= weight(*m);
        if draw < 0.0 {
            return *m;
        }
    }
    *candidates.last().expect("candidate set is never empty")
}

fn arbitrary_excluding<R: Rng + ?Sized>(
    problem: &ProblemDescriptor,
    negative: &CaseBase,
    cfg: &SimilarityConfig,
    hint: Option<(BamModel, f64)>,
    excluded: &BTreeSet<BamModel>,
    rng: &mut R,
) -> BamModel {
    let active = problem.active_model().and_then(|m| m.preset());
    let alternatives: Vec<BamModel> = BamModel::ALL.into_iter().filter(|m| Some(*m) != active).collect();
    let rejected = rejected_models(problem, negative, cfg);
    let open: Vec<BamModel> = alternatives
        .iter()
        .copied()
        .filter(|m| !rejected.contains(m) && !excluded.contains(m))
        .collect();
    if open.is_empty() {
        pick(&alternatives, hint, rng)
    } else {
        pick(&open, hint, rng)
    }
}

/// Proposes a model when retrieval found nothing: uniform over the models
/// other than the active one that no similar negative case rejected, falling
/// back to any non-active model. A `hint` multiplies one model's weight.
pub fn arbitrary_solution<R: Rng + ?Sized>(
    problem: &ProblemDescriptor,
    negative: &CaseBase,
    cfg: &SimilarityConfig,
    hint: Option<(BamModel, f64)>,
    rng: &mut R,
) -> Solution {
    arbitrary_excluding(problem, negative, cfg, hint, &BTreeSet::new(), rng).into()
}

/// Binds a solution to the live problem as a new pending case.
pub fn adapt(solution: Solution, problem: &ProblemDescriptor, before: Option<&Measurements>, now: f64) -> Case {
    Case {
        problem: problem.clone(),
        solution,
        status: CaseStatus::Pending,
        created_at: now,
        resolved_at: None,
        metrics_before: before.cloned(),
        metrics_after: None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Validity {
    Valid,
    Invalid,
}

/// A candidate is invalid when a negative case with the same solution has a
/// problem at least as similar as the acceptance threshold.
pub fn validate_against_rejected(candidate: &Case, negative: &CaseBase, cfg: &SimilarityConfig) -> Validity {
    let rejected = negative.cases().iter().any(|c| {
        c.solution == candidate.solution
            && similarity(&candidate.problem, &c.problem, cfg).is_ok_and(|s| s >= cfg.threshold)
    });
    if rejected {
        Validity::Invalid
    } else {
        Validity::Valid
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardBasis {
    /// Change relative to the larger of the two windows' offered load.
    Relative,
    /// Difference in per-class arrival counts, in standard deviations of a
    /// Poisson count: `|a - b| / sqrt(a + b)`.
    ArrivalZ,
    /// Change relative to the class's bandwidth constraint.
    BandwidthConstraint,
}

/// Refuses to judge a solution when the traffic profile moved between the
/// before and after windows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileGuard {
    pub tolerance: f64,
    pub basis: GuardBasis,
    /// Mean LSP holding time, used to turn requested bandwidth per second
    /// into offered load.
    pub mean_holding: f64,
}

impl ProfileGuard {
    /// Largest per-class change between the two windows, in the basis's
    /// units.
    pub fn change(&self, before: &Measurements, after: &Measurements) -> f64 {
        if self.basis == GuardBasis::ArrivalZ {
            return before
                .counters
                .per_class
                .iter()
                .zip(&after.counters.per_class)
                .map(|(x, y)| {
                    let (a, b) = (x.arrivals as f64, y.arrivals as f64);
                    if a + b > 0.0 {
                        (a - b).abs() / (a + b).sqrt()
                    } else {
                        0.0
                    }
                })
                .fold(0.0, f64::max);
        }
        let b = before.offered_load(self.mean_holding);
        let a = after.offered_load(self.mean_holding);
        b.iter()
            .zip(&a)
            .enumerate()
            .map(|(c, (x, y))| {
                let base = match self.basis {
                    GuardBasis::BandwidthConstraint => before.bc.get(c).copied().unwrap_or(1) as f64,
                    _ => x.max(*y),
                };
                if base > 0.0 {
                    (x - y).abs() / base
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn trips(&self, before: &Measurements, after: &Measurements) -> bool {
        self.change(before, after) > self.tolerance
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Positive,
    Negative,
    /// The profile guard tripped; nothing is learned.
    Inconclusive,
}

/// Judges an applied solution once its revision timer has elapsed.
pub fn revise(
    pending: &Case,
    after: &Measurements,
    before: Option<&Measurements>,
    goals: &ManagerGoals,
    guard: &ProfileGuard,
) -> Result<Verdict> {
    if pending.status != CaseStatus::Pending {
        return Err(Error::NotPending);
    }
    let before = before.ok_or(Error::MissingSnapshot)?;
    if guard.trips(before, after) {
        return Ok(Verdict::Inconclusive);
    }
    Ok(if goals.improved(before, after) { Verdict::Positive } else { Verdict::Negative })
}

/// Stores a revised case in the base matching its verdict. Returns whether
/// a new entry was added; inconclusive verdicts and duplicates add nothing.
pub fn retain(case: Case, verdict: Verdict, positive: &mut CaseBase, negative: &mut CaseBase) -> bool {
    match verdict {
        Verdict::Positive => positive.insert(case),
        Verdict::Negative => negative.insert(case),
        Verdict::Inconclusive => false,
    }
}

/// How policy suggestions feed the proposal step when retrieval misses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicySolutions {
    /// Weight the suggested model in the arbitrary draw.
    Hint,
    /// Propose the suggested model outright.
    Seed,
    /// Ignore suggestions.
    Off,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CbrConfig {
    pub similarity: SimilarityConfig,
    /// Cases returned by retrieval.
    pub k: usize,
    pub goals: ManagerGoals,
    pub guard_tolerance: f64,
    pub guard_basis: GuardBasis,
    pub policy_solutions: PolicySolutions,
    pub hint_weight: f64,
    pub tolerances: Tolerances,
    /// Measurement attributes are rounded to this step when building
    /// problem descriptors.
    pub resolution: Option<f64>,
    /// Proposals tried per cycle before giving up.
    pub max_attempts: usize,
}

impl Default for CbrConfig {
    fn default() -> Self {
        Self {
            similarity: SimilarityConfig::default(),
            k: 3,
            goals: ManagerGoals::default(),
            guard_tolerance: 3.0,
            guard_basis: GuardBasis::ArrivalZ,
            policy_solutions: PolicySolutions::Hint,
            hint_weight: 3.0,
            tolerances: Tolerances::default(),
            resolution: None,
            max_attempts: 3,
        }
    }
}

impl CbrConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for check in [self.similarity.validate(), self.goals.validate()] {
            if let Err(Error::Validation(p)) = check {
                problems.extend(p);
            }
        }
        if self.k == 0 {
            problems.push("cbr.k: must be at least 1".into());
        }
        if !(self.guard_tolerance >= 0.0) {
            problems.push("cbr.guard_tolerance: must be non-negative".into());
        }
        if !(self.hint_weight > 0.0) {
            problems.push("cbr.hint_weight: must be positive".into());
        }
        if self.resolution.is_some_and(|r| !(r > 0.0)) {
            problems.push("cbr.resolution: must be positive when set".into());
        }
        if self.max_attempts == 0 {
            problems.push("cbr.max_attempts: must be at least 1".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    Reactive,
    Proactive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionSource {
    Retrieved,
    Arbitrary,
    PolicySeed,
    Manager,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoActionReason {
    Compliant,
    PendingRevision,
    NoValidSolution,
    Internal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum CycleOutcome {
    NoAction { reason: NoActionReason },
    Applied { model: BamModel, source: SolutionSource, score: Option<f64>, symptom: String },
}

/// The result of the revision half of a cycle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Review {
    pub model: BamModel,
    pub source: SolutionSource,
    pub verdict: Verdict,
    pub retained: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CbrStats {
    pub cycles: u64,
    pub compliant: u64,
    pub applied: u64,
    pub retrieval_hits: u64,
    pub retrieval_misses: u64,
    pub invalid_candidates: u64,
    pub no_valid_solution: u64,
    pub positive_verdicts: u64,
    pub negative_verdicts: u64,
    pub inconclusive: u64,
    pub retained: u64,
    /// Positive verdicts on retrieved solutions.
    pub confirmed: u64,
    pub duplicates: u64,
}

#[derive(Clone, Debug)]
struct Pending {
    case: Case,
    applied_at: f64,
    source: SolutionSource,
}

/// The reasoning loop for one link: two case bases, at most one case under
/// revision, and a seeded RNG for arbitrary proposals.
#[derive(Clone, Debug)]
pub struct CbrEngine {
    cfg: CbrConfig,
    positive: CaseBase,
    negative: CaseBase,
    pending: Option<Pending>,
    injected: VecDeque<BamModel>,
    rng: ChaCha8Rng,
    stats: CbrStats,
}

impl CbrEngine {
    pub fn new(cfg: CbrConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX);
        Self {
            cfg,
            positive: CaseBase::new(CaseBaseKind::Positive),
            negative: CaseBase::new(CaseBaseKind::Negative),
            pending: None,
            injected: VecDeque::new(),
            rng,
            stats: CbrStats::default(),
        }
    }

    pub fn with_bases(mut self, positive: CaseBase, negative: CaseBase) -> Self {
        self.positive = positive;
        self.negative = negative;
        self
    }

    pub fn config(&self) -> &CbrConfig {
        &self.cfg
    }

    pub fn positive(&self) -> &CaseBase {
        &self.positive
    }

    pub fn negative(&self) -> &CaseBase {
        &self.negative
    }

    pub fn stats(&self) -> &CbrStats {
        &self.stats
    }

    pub fn pending(&self) -> Option<&Case> {
        self.pending.as_ref().map(|p| &p.case)
    }

    pub fn pending_since(&self) -> Option<f64> {
        self.pending.as_ref().map(|p| p.applied_at)
    }

    pub fn into_bases(self) -> (CaseBase, CaseBase) {
        (self.positive, self.negative)
    }

    /// Queues a manager-proposed model for the next cycle. It bypasses
    /// retrieval but is still checked against rejected cases.
    pub fn inject_solution(&mut self, model: BamModel) {
        self.injected.push_back(model);
    }

    pub fn describe(&self, m: &Measurements, symptom: Option<String>) -> ProblemDescriptor {
        describe(m, &self.cfg.tolerances, self.cfg.resolution, symptom)
    }

    /// Checks the current problem against the policies.
    pub fn diagnose(&self, m: &Measurements, policies: &[PolicyRule]) -> (ProblemDescriptor, Option<PolicyMatch>) {
        let problem = self.describe(m, None);
        let hit = evaluate_policies(&problem.measurements, &problem.contextual, policies);
        let problem = problem.with_symptom(hit.as_ref().map(|h| h.symptom.clone()));
        (problem, hit)
    }

    /// Evaluation-and-proposal followed by adaptation-and-use.
    ///
    /// On success the chosen model is applied to `link` and a case is left
    /// pending until [`review`](Self::review) is called.
    pub fn run_cycle(
        &mut self,
        _trigger: Trigger,
        link: &mut LinkState,
        measurements: &Measurements,
        policies: &[PolicyRule],
        now: f64,
    ) -> CycleOutcome {
        if self.pending.is_some() {
            return CycleOutcome::NoAction { reason: NoActionReason::PendingRevision };
        }
        self.stats.cycles += 1;
        let (problem, hit) = self.diagnose(measurements, policies);
        let Some(hit) = hit else {
            self.stats.compliant += 1;
            return CycleOutcome::NoAction { reason: NoActionReason::Compliant };
        };
        let active = link.active_model().preset();
        let mut excluded: BTreeSet<BamModel> = active.into_iter().collect();
        let mut counted_retrieval = false;

        for _ in 0..self.cfg.max_attempts {
            let (model, source, score) = if let Some(model) = self.injected.pop_front() {
                (model, SolutionSource::Manager, None)
            } else if let Some((case, score)) = retrieve(&problem, &self.positive, &self.cfg.similarity, self.cfg.k)
                .into_iter()
                .find(|(c, _)| !excluded.contains(&c.solution.target_model))
            {
                if !counted_retrieval {
                    self.stats.retrieval_hits += 1;
                    counted_retrieval = true;
                }
                (case.solution.target_model, SolutionSource::Retrieved, Some(score))
            } else {
                if !counted_retrieval {
                    self.stats.retrieval_misses += 1;
                    counted_retrieval = true;
                }
                let suggestion = hit.suggested_solution.filter(|m| !excluded.contains(m));
                match (self.cfg.policy_solutions, suggestion) {
                    (PolicySolutions::Seed, Some(model)) => (model, SolutionSource::PolicySeed, None),
                    (mode, suggestion) => {
                        let weight = suggestion.filter(|_| mode == PolicySolutions::Hint).map(|m| (m, self.cfg.hint_weight));
                        let model = arbitrary_excluding(
                            &problem,
                            &self.negative,
                            &self.cfg.similarity,
                            weight,
                            &excluded,
                            &mut self.rng,
                        );
                        (model, SolutionSource::Arbitrary, None)
                    }
                }
            };

            let candidate = adapt(model.into(), &problem, Some(measurements), now);
            if excluded.contains(&model)
                || validate_against_rejected(&candidate, &self.negative, &self.cfg.similarity) == Validity::Invalid
            {
                self.stats.invalid_candidates += 1;
                excluded.insert(model);
                continue;
            }
            if link.reconfigure_model(model, now).is_err() {
                return CycleOutcome::NoAction { reason: NoActionReason::Internal };
            }
            self.stats.applied += 1;
            self.pending = Some(Pending { case: candidate, applied_at: now, source });
            return CycleOutcome::Applied { model, source, score, symptom: hit.symptom };
        }
        self.stats.no_valid_solution += 1;
        CycleOutcome::NoAction { reason: NoActionReason::NoValidSolution }
    }

    /// Test-and-review followed by storage-and-learning for the pending case.
    /// Returns `None` when nothing is pending.
    pub fn review(&mut self, after: &Measurements, guard: &ProfileGuard, now: f64) -> Result<Option<Review>> {
        let Some(Pending { mut case, source, .. }) = self.pending.take() else {
            return Ok(None);
        };
        let verdict = revise(&case, after, case.metrics_before.as_ref(), &self.cfg.goals, guard)?;
        let model = case.solution.target_model;
        case.metrics_after = Some(after.clone());
        case.resolved_at = Some(now);
        match verdict {
            Verdict::Positive => self.stats.positive_verdicts += 1,
            Verdict::Negative => self.stats.negative_verdicts += 1,
            Verdict::Inconclusive => self.stats.inconclusive += 1,
        }
        // A retrieved solution that worked again confirms the case it came
        // from; storing it would only add a near copy.
        let retained = if verdict == Verdict::Positive && source == SolutionSource::Retrieved {
            self.stats.confirmed += 1;
            false
        } else {
            let added = retain(case, verdict, &mut self.positive, &mut self.negative);
            if added {
                self.stats.retained += 1;
            } else if verdict != Verdict::Inconclusive {
                self.stats.duplicates += 1;
            }
            added
        };
        Ok(Some(Review { model, source, verdict, retained }))
    }
}
