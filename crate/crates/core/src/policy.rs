//! Manager policies: condition rules over the problem attributes that turn a
//! window of measurements into a symptom, plus the manager's optimization
//! goals used when revising a case.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bam::{BamModel, Measurements};
use crate::cbr::{AttrValue, Attributes};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
}

impl Comparator {
    fn holds<T: PartialOrd>(self, lhs: T, rhs: T) -> bool {
        match self {
            Comparator::Lt => lhs < rhs,
            Comparator::Le => lhs <= rhs,
            Comparator::Gt => lhs > rhs,
            Comparator::Ge => lhs >= rhs,
            Comparator::Eq => lhs == rhs,
            Comparator::Ne => lhs != rhs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Threshold {
    Number(f64),
    Text(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub attribute: String,
    pub comparator: Comparator,
    pub threshold: Threshold,
}

impl Condition {
    pub fn new(attribute: &str, comparator: Comparator, threshold: Threshold) -> Self {
        Self { attribute: attribute.into(), comparator, threshold }
    }

    fn matches(&self, value: &AttrValue) -> bool {
        match (value, &self.threshold) {
            (AttrValue::Numeric { value, .. }, Threshold::Number(t)) => self.comparator.holds(*value, *t),
            (AttrValue::Categorical(v), Threshold::Text(t)) => match self.comparator {
                Comparator::Eq => v.eq_ignore_ascii_case(t),
                Comparator::Ne => !v.eq_ignore_ascii_case(t),
                _ => false,
            },
            _ => false,
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.comparator {
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
            Comparator::Eq => "==",
            Comparator::Ne => "!=",
        };
        match &self.threshold {
            Threshold::Number(n) => write!(f, "{} {op} {n}", self.attribute),
            Threshold::Text(t) => write!(f, "{} {op} {t}", self.attribute),
        }
    }
}

/// A manager rule: when every condition holds, the network shows `symptom`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyRule {
    pub name: String,
    pub conditions: Vec<Condition>,
    pub symptom: String,
    #[serde(default)]
    pub suggested_solution: Option<BamModel>,
}

impl PolicyRule {
    pub fn matches(&self, contextual: &Attributes, measurements: &Attributes) -> bool {
        self.conditions.iter().all(|c| {
            contextual
                .get(&c.attribute)
                .or_else(|| measurements.get(&c.attribute))
                .is_some_and(|v| c.matches(v))
        })
    }
}

/// The symptom raised by the first matching rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyMatch {
    pub rule: String,
    pub symptom: String,
    pub suggested_solution: Option<BamModel>,
}

/// First-match evaluation in declaration order. `None` means the network
/// is compliant.
pub fn evaluate_policies(
    measurements: &Attributes,
    contextual: &Attributes,
    rules: &[PolicyRule],
) -> Option<PolicyMatch> {
    rules.iter().find(|r| r.matches(contextual, measurements)).map(|r| PolicyMatch {
        rule: r.name.clone(),
        symptom: r.symptom.clone(),
        suggested_solution: r.suggested_solution,
    })
}

/// Checks rules against a descriptor schema: every attribute must exist,
/// numeric thresholds must lie in the attribute's declared range, and
/// categorical attributes only take `==` / `!=`.
pub fn validate_rules(rules: &[PolicyRule], contextual: &Attributes, measurements: &Attributes) -> Result<()> {
    let mut problems = Vec::new();
    for (i, rule) in rules.iter().enumerate() {
        if rule.conditions.is_empty() {
            problems.push(format!("policies[{i}] `{}`: a rule needs at least one condition", rule.name));
        }
        for cond in &rule.conditions {
            let Some(attr) = contextual.get(&cond.attribute).or_else(|| measurements.get(&cond.attribute)) else {
                problems.push(format!("policies[{i}] `{}`: unknown attribute `{}`", rule.name, cond.attribute));
                continue;
            };
            match (attr, &cond.threshold) {
                (AttrValue::Numeric { min, max, .. }, Threshold::Number(t)) => {
                    if t < min || t > max {
                        problems.push(format!(
                            "policies[{i}] `{}`: threshold {t} for `{}` outside [{min}, {max}]",
                            rule.name, cond.attribute
                        ));
                    }
                }
                (AttrValue::Categorical(_), Threshold::Text(_)) => {
                    if !matches!(cond.comparator, Comparator::Eq | Comparator::Ne) {
                        problems.push(format!(
                            "policies[{i}] `{}`: `{}` is categorical and only supports == and !=",
                            rule.name, cond.attribute
                        ));
                    }
                }
                _ => problems.push(format!(
                    "policies[{i}] `{}`: threshold kind does not match attribute `{}`",
                    rule.name, cond.attribute
                )),
            }
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(problems))
    }
}

/// Level boundaries behind the default rules.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyThresholds {
    /// Utilization strictly below this is "low".
    pub low_utilization: f64,
    /// Utilization at or above this is "high".
    pub high_utilization: f64,
    /// Blocked fraction of window arrivals at or above this is "high".
    pub high_blocking: f64,
    pub high_preemption: f64,
    pub high_devolution: f64,
}

impl Default for PolicyThresholds {
    fn default() -> Self {
        Self {
            low_utilization: 0.60,
            high_utilization: 0.80,
            high_blocking: 0.10,
            high_preemption: 0.01,
            high_devolution: 0.01,
        }
    }
}

pub fn default_policy_set() -> Vec<PolicyRule> {
    default_policy_set_with(&PolicyThresholds::default())
}

/// The five default problem → solution rules, in evaluation order.
pub fn default_policy_set_with(t: &PolicyThresholds) -> Vec<PolicyRule> {
    use crate::cbr::descriptor::{ACTIVE_MODEL, BLOCKING_RATE, DEVOLUTION_RATE, LINK_UTILIZATION, PREEMPTION_RATE};
    use Comparator::*;
    let model = |m: &str| Condition::new(ACTIVE_MODEL, Eq, Threshold::Text(m.into()));
    let num = |attr: &str, op, v: f64| Condition::new(attr, op, Threshold::Number(v));
    let rule = |name: &str, conditions, solution| PolicyRule {
        name: name.into(),
        conditions,
        symptom: name.into(),
        suggested_solution: Some(solution),
    };
    vec![
        rule(
            "mam_low_utilization",
            vec![model("MAM"), num(LINK_UTILIZATION, Lt, t.low_utilization)],
            BamModel::Atcs,
        ),
        rule(
            "rdm_low_utilization_high_blocking",
            vec![
                model("RDM"),
                num(LINK_UTILIZATION, Lt, t.low_utilization),
                num(BLOCKING_RATE, Ge, t.high_blocking),
            ],
            BamModel::Atcs,
        ),
        rule(
            "rdm_high_utilization_high_preemption",
            vec![
                model("RDM"),
                num(LINK_UTILIZATION, Ge, t.high_utilization),
                num(PREEMPTION_RATE, Ge, t.high_preemption),
            ],
            BamModel::Mam,
        ),
        rule(
            "atcs_high_utilization_low_preemption_high_devolution",
            vec![
                model("ATCS"),
                num(LINK_UTILIZATION, Ge, t.high_utilization),
                num(PREEMPTION_RATE, Lt, t.high_preemption),
                num(DEVOLUTION_RATE, Ge, t.high_devolution),
            ],
            BamModel::Rdm,
        ),
        rule(
            "atcs_high_utilization_high_preemption",
            vec![
                model("ATCS"),
                num(LINK_UTILIZATION, Ge, t.high_utilization),
                num(PREEMPTION_RATE, Ge, t.high_preemption),
            ],
            BamModel::Mam,
        ),
    ]
}

/// A network metric the manager cares about.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Preemption,
    Devolution,
    Blocking,
    Unbroken,
    Established,
    Utilization,
}

impl Metric {
    fn is_count(self) -> bool {
        !matches!(self, Metric::Utilization)
    }
}

/// What the manager wants minimized and maximized, and how much loss on a
/// maximized metric is tolerated before an improvement is refused.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ManagerGoals {
    pub minimize: Vec<Metric>,
    pub maximize: Vec<Metric>,
    pub tolerances: BTreeMap<Metric, f64>,
    /// Levels of a minimized metric the manager accepts. A rise that stays
    /// within budget does not block an improvement on the maximized side.
    pub budgets: BTreeMap<Metric, f64>,
    /// Compare count metrics as fractions of the window's arrivals instead
    /// of raw counts, so windows with different arrival volumes compare
    /// fairly.
    pub per_arrival: bool,
}

impl Default for ManagerGoals {
    fn default() -> Self {
        Self {
            minimize: vec![Metric::Preemption, Metric::Devolution],
            maximize: vec![Metric::Established],
            tolerances: BTreeMap::from([(Metric::Established, 0.02)]),
            budgets: BTreeMap::from([(Metric::Preemption, 0.03), (Metric::Devolution, 0.03)]),
            per_arrival: true,
        }
    }
}

impl ManagerGoals {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for m in &self.minimize {
            if self.maximize.contains(m) {
                problems.push(format!("cbr.goals: {m:?} is both minimized and maximized"));
            }
        }
        if self.tolerances.values().any(|t| !(0.0..=1.0).contains(t)) {
            problems.push("cbr.goals.tolerances: tolerances must lie in [0, 1]".into());
        }
        if self.budgets.values().any(|b| !(*b >= 0.0)) {
            problems.push("cbr.goals.budgets: budgets must be non-negative".into());
        }
        for m in self.budgets.keys() {
            if !self.minimize.contains(m) {
                problems.push(format!("cbr.goals.budgets: {m:?} is not a minimized metric"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    pub fn value(&self, metric: Metric, m: &Measurements) -> f64 {
        let t = &m.counters.total;
        let raw = match metric {
            Metric::Preemption => t.preemption as f64,
            Metric::Devolution => t.devolution as f64,
            Metric::Blocking => t.blocking as f64,
            Metric::Unbroken => t.unbroken as f64,
            Metric::Established => t.established as f64,
            Metric::Utilization => m.mean_utilization,
        };
        if self.per_arrival && metric.is_count() {
            if t.arrivals == 0 {
                0.0
            } else {
                raw / t.arrivals as f64
            }
        } else {
            raw
        }
    }

    /// Whether every minimized metric is at or below its budget.
    /// Metrics without a budget never count as within budget unless zero.
    pub fn within_budget(&self, m: &Measurements) -> bool {
        self.minimize
            .iter()
            .all(|metric| self.value(*metric, m) <= self.budgets.get(metric).copied().unwrap_or(0.0))
    }

    /// An improvement either lowers the minimized sum, or raises the
    /// maximized sum while every minimized metric stays at or below its
    /// earlier value or its budget.
    ///
    /// When the before-window was within budget, no maximized metric may
    /// fall by more than its tolerance. When it was over budget, getting
    /// back under control takes precedence and the tolerances are waived.
    pub fn improved(&self, before: &Measurements, after: &Measurements) -> bool {
        let sum = |metrics: &[Metric], m: &Measurements| metrics.iter().map(|x| self.value(*x, m)).sum::<f64>();
        if self.within_budget(before) {
            for metric in &self.maximize {
                let tol = self.tolerances.get(metric).copied().unwrap_or(0.0);
                if self.value(*metric, after) < self.value(*metric, before) * (1.0 - tol) {
                    return false;
                }
            }
        }
        if sum(&self.minimize, after) < sum(&self.minimize, before) {
            return true;
        }
        let within = self.minimize.iter().all(|metric| {
            let a = self.value(*metric, after);
            a <= self.value(*metric, before) || self.budgets.get(metric).is_some_and(|b| a <= *b)
        });
        within && sum(&self.maximize, after) > sum(&self.maximize, before)
    }
}
