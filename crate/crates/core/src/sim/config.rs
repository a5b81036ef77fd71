use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bam::{validate_classes, BamModel, Mbps, TrafficClassConfig};
use crate::cbr::CbrConfig;
use crate::policy::{default_policy_set_with, validate_rules, PolicyRule, PolicyThresholds};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadLevel {
    Low,
    Medium,
    High,
}

/// Whether a pattern's total offered load sits below or at/above 90 % of
/// the link.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadRegime {
    UnderNinety,
    AtLeastNinety,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrafficPattern {
    /// One level per class, in class-index order.
    pub levels: Vec<LoadLevel>,
    pub regime: LoadRegime,
    /// Simulated seconds. Falls back to the schedule's pattern duration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
}

impl TrafficPattern {
    pub fn new(levels: Vec<LoadLevel>, regime: LoadRegime) -> Self {
        Self { levels, regime, duration: None }
    }
}

/// The six reference patterns for three classes.
pub fn reference_patterns() -> Vec<TrafficPattern> {
    use LoadLevel::*;
    use LoadRegime::*;
    vec![
        TrafficPattern::new(vec![High, Low, Low], UnderNinety),
        TrafficPattern::new(vec![Medium, Low, High], UnderNinety),
        TrafficPattern::new(vec![Low, Medium, High], UnderNinety),
        TrafficPattern::new(vec![High, High, High], AtLeastNinety),
        TrafficPattern::new(vec![High, High, High], AtLeastNinety),
        TrafficPattern::new(vec![High, High, High], AtLeastNinety),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleConfig {
    pub patterns: Vec<TrafficPattern>,
    pub pattern_duration: f64,
    pub repetitions: u32,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self { patterns: reference_patterns(), pattern_duration: 3600.0, repetitions: 4 }
    }
}

impl ScheduleConfig {
    pub fn duration_of(&self, pattern: &TrafficPattern) -> f64 {
        pattern.duration.unwrap_or(self.pattern_duration)
    }

    /// Length of one pass over the pattern list.
    pub fn repetition_length(&self) -> f64 {
        self.patterns.iter().map(|p| self.duration_of(p)).sum()
    }

    pub fn total_duration(&self) -> f64 {
        self.repetition_length() * self.repetitions as f64
    }
}

/// LSP demand and the mapping from load levels to offered load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemandConfig {
    /// Requested bandwidths, drawn uniformly.
    pub sizes: Vec<Mbps>,
    /// Mean of the exponential holding time, in seconds.
    pub mean_holding: f64,
    /// Offered load as a fraction of the class's BC, per level.
    pub low: f64,
    pub medium: f64,
    pub high: f64,
    /// `AtLeastNinety` patterns are scaled up to at least this fraction of
    /// capacity.
    pub overload_floor: f64,
    /// `UnderNinety` patterns are scaled down to at most this fraction.
    pub underload_ceiling: f64,
}

impl Default for DemandConfig {
    fn default() -> Self {
        Self {
            sizes: vec![10, 25, 50],
            mean_holding: 120.0,
            low: 0.3,
            medium: 0.7,
            high: 1.2,
            overload_floor: 0.9,
            underload_ceiling: 0.85,
        }
    }
}

impl DemandConfig {
    pub fn level(&self, level: LoadLevel) -> f64 {
        match level {
            LoadLevel::Low => self.low,
            LoadLevel::Medium => self.medium,
            LoadLevel::High => self.high,
        }
    }

    pub fn mean_size(&self) -> f64 {
        self.sizes.iter().sum::<Mbps>() as f64 / self.sizes.len().max(1) as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimerConfig {
    /// Tumbling measurement window, in seconds.
    pub window: f64,
    /// Windows between applying a solution and judging it.
    pub revision_windows: u32,
    /// Proactive cycle interval in seconds; absent disables proactive mode.
    pub proactive_interval: Option<f64>,
}

impl Default for TimerConfig {
    fn default() -> Self {
        Self { window: 600.0, revision_windows: 1, proactive_interval: Some(1800.0) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mode {
    /// One model for the whole run.
    Static { model: BamModel },
    /// The reasoning loop chooses models, starting from `initial_model`.
    Cognitive {
        #[serde(default = "default_initial")]
        initial_model: BamModel,
    },
}

fn default_initial() -> BamModel {
    BamModel::Mam
}

impl Default for Mode {
    fn default() -> Self {
        Mode::Cognitive { initial_model: BamModel::Mam }
    }
}

impl Mode {
    pub fn label(&self) -> String {
        match self {
            Mode::Static { model } => model.to_string(),
            Mode::Cognitive { .. } => "BAMCBR".into(),
        }
    }

    pub fn initial_model(&self) -> BamModel {
        match self {
            Mode::Static { model } => *model,
            Mode::Cognitive { initial_model } => *initial_model,
        }
    }

    pub fn is_cognitive(&self) -> bool {
        matches!(self, Mode::Cognitive { .. })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    pub thresholds: PolicyThresholds,
    /// Replaces the default rule set when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rules: Option<Vec<PolicyRule>>,
}

impl PolicyConfig {
    pub fn rules(&self) -> Vec<PolicyRule> {
        self.rules.clone().unwrap_or_else(|| default_policy_set_with(&self.thresholds))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub capacity: Mbps,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    /// Keep the full admission/teardown event log in the report.
    pub events: bool,
}

/// Everything needed to reproduce one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub seed: u64,
    #[serde(default)]
    pub mode: Mode,
    pub link: LinkConfig,
    pub classes: Vec<TrafficClassConfig>,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub demand: DemandConfig,
    #[serde(default)]
    pub timers: TimerConfig,
    #[serde(default)]
    pub cbr: CbrConfig,
    #[serde(default)]
    pub policies: PolicyConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ScenarioConfig {
    /// The reference link: 1 Gbps split 400/350/250 over three classes,
    /// six one-hour patterns repeated four times.
    pub fn reference(seed: u64, mode: Mode) -> Self {
        Self {
            seed,
            mode,
            link: LinkConfig { capacity: 1000 },
            classes: vec![
                TrafficClassConfig::new(0, 0, 400),
                TrafficClassConfig::new(1, 1, 350),
                TrafficClassConfig::new(2, 2, 250),
            ],
            schedule: ScheduleConfig::default(),
            demand: DemandConfig::default(),
            timers: TimerConfig::default(),
            cbr: CbrConfig::default(),
            policies: PolicyConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Collects every problem instead of stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let mut absorb = |r: Result<()>| match r {
            Ok(()) => {}
            Err(Error::Validation(p)) => problems.extend(p),
            Err(e) => problems.push(e.to_string()),
        };
        absorb(validate_classes(self.link.capacity, &self.classes));
        absorb(self.cbr.validate());

        let n = self.classes.len();
        let s = &self.schedule;
        if s.repetitions < 1 {
            problems.push("schedule.repetitions: must be at least 1".into());
        }
        if !(s.pattern_duration > 0.0) {
            problems.push("schedule.pattern_duration: must be positive".into());
        }
        for (i, p) in s.patterns.iter().enumerate() {
            if p.levels.len() != n {
                problems.push(format!("schedule.patterns[{i}]: {} levels for {n} classes", p.levels.len()));
            }
            if p.duration.is_some_and(|d| !(d > 0.0)) {
                problems.push(format!("schedule.patterns[{i}].duration: must be positive"));
            }
        }

        let d = &self.demand;
        if d.sizes.is_empty() || d.sizes.contains(&0) {
            problems.push("demand.sizes: must be a non-empty list of positive bandwidths".into());
        }
        if !(d.mean_holding > 0.0) {
            problems.push("demand.mean_holding: must be positive".into());
        }
        for (name, v) in [("low", d.low), ("medium", d.medium), ("high", d.high)] {
            if !(v > 0.0) {
                problems.push(format!("demand.{name}: load levels must map to positive offered load"));
            }
        }
        if !(d.overload_floor > 0.0) || !(d.underload_ceiling > 0.0) {
            problems.push("demand: regime bounds must be positive".into());
        }

        let t = &self.timers;
        if !(t.window > 0.0) {
            problems.push("timers.window: must be positive".into());
        }
        if t.revision_windows < 1 {
            problems.push("timers.revision_windows: must be at least 1".into());
        }
        if t.proactive_interval.is_some_and(|p| !(p > 0.0)) {
            problems.push("timers.proactive_interval: must be positive when set".into());
        }

        if problems.is_empty() && self.mode.is_cognitive() {
            // Rules are checked against a descriptor of an idle link.
            if let Ok(link) = crate::bam::LinkState::new(self.link.capacity, self.classes.clone(), BamModel::Mam) {
                let probe = crate::cbr::describe(&link.measurements(), &self.cbr.tolerances, None, None);
                if let Err(Error::Validation(p)) =
                    validate_rules(&self.policies.rules(), &probe.contextual, &probe.measurements)
                {
                    problems.extend(p.into_iter().map(|m| format!("policies: {m}")));
                }
            }
        }

        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// Hash of everything that shapes the offered traffic: link, classes,
    /// schedule, demand and seed. Runs with equal hashes see identical
    /// arrivals.
    pub fn schedule_hash(&self) -> String {
        let shape = serde_json::json!({
            "seed": self.seed,
            "link": self.link,
            "classes": self.classes,
            "schedule": self.schedule,
            "demand": self.demand,
            "window": self.timers.window,
        });
        digest(&shape)
    }

    pub fn config_hash(&self) -> String {
        digest(&serde_json::to_value(self).expect("config serializes"))
    }
}

fn digest(value: &serde_json::Value) -> String {
    hex::encode(Sha256::digest(value.to_string().as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_config_is_valid() {
        ScenarioConfig::reference(1, Mode::default()).validate().unwrap();
    }

    #[test]
    fn minimal_toml_fills_defaults() {
        let cfg = ScenarioConfig::from_toml(
            r#"
            seed = 3
            [mode]
            kind = "static"
            model = "RDM"
            [link]
            capacity = 100
            [[classes]]
            index = 0
            priority = 0
            bc = 60
            [[classes]]
            index = 1
            priority = 1
            bc = 40
            [schedule]
            patterns = [{ levels = ["high", "low"], regime = "under_ninety" }]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.mode, Mode::Static { model: BamModel::Rdm });
        assert_eq!(cfg.schedule.repetitions, 4);
        assert_eq!(cfg.demand.sizes, vec![10, 25, 50]);
    }

    #[test]
    fn validation_lists_every_problem() {
        let mut cfg = ScenarioConfig::reference(1, Mode::default());
        cfg.link.capacity = 900;
        cfg.schedule.repetitions = 0;
        cfg.timers.window = 0.0;
        let Err(Error::Validation(p)) = cfg.validate() else { panic!("expected validation error") };
        assert!(p.iter().any(|m| m.contains("sum to 1000 but link capacity is 900")));
        assert!(p.iter().any(|m| m.contains("repetitions")));
        assert!(p.iter().any(|m| m.contains("timers.window")));
    }

    #[test]
    fn schedule_hash_ignores_mode_but_not_seed() {
        let a = ScenarioConfig::reference(1, Mode::Static { model: BamModel::Mam });
        let b = ScenarioConfig::reference(1, Mode::default());
        let c = ScenarioConfig::reference(2, Mode::default());
        assert_eq!(a.schedule_hash(), b.schedule_hash());
        assert_ne!(a.schedule_hash(), c.schedule_hash());
        assert_ne!(a.config_hash(), b.config_hash());
    }
}
