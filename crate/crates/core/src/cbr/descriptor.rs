use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bam::{Measurements, ModelTag};

pub const ACTIVE_MODEL: &str = "active_model";
pub const SYMPTOM: &str = "symptom";
pub const LINK_UTILIZATION: &str = "link_utilization";
pub const PREEMPTION_RATE: &str = "preemption_rate";
pub const DEVOLUTION_RATE: &str = "devolution_rate";
pub const BLOCKING_RATE: &str = "blocking_rate";

/// One attribute value with the kind that governs its similarity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttrValue {
    Categorical(String),
    Numeric { value: f64, min: f64, max: f64 },
}

impl AttrValue {
    pub fn numeric(value: f64, min: f64, max: f64) -> Self {
        AttrValue::Numeric { value: value.clamp(min, max), min, max }
    }

    pub fn categorical(value: impl Into<String>) -> Self {
        AttrValue::Categorical(value.into())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            AttrValue::Numeric { value, .. } => Some(*value),
            AttrValue::Categorical(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            AttrValue::Categorical(s) => Some(s),
            AttrValue::Numeric { .. } => None,
        }
    }

    pub fn same_kind(&self, other: &AttrValue) -> bool {
        matches!(
            (self, other),
            (AttrValue::Categorical(_), AttrValue::Categorical(_)) | (AttrValue::Numeric { .. }, AttrValue::Numeric { .. })
        )
    }

    pub fn in_range(&self) -> bool {
        match self {
            AttrValue::Numeric { value, min, max } => value.is_finite() && min <= value && value <= max,
            AttrValue::Categorical(_) => true,
        }
    }
}

pub type Attributes = BTreeMap<String, AttrValue>;

/// The "current problem": configuration context, a window of measurements
/// and the symptom that raised it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemDescriptor {
    pub contextual: Attributes,
    pub measurements: Attributes,
    pub symptom: Option<String>,
}

impl ProblemDescriptor {
    pub fn active_model(&self) -> Option<ModelTag> {
        match self.contextual.get(ACTIVE_MODEL)?.as_str()? {
            "MAM" => Some(ModelTag::Mam),
            "RDM" => Some(ModelTag::Rdm),
            "ATCS" => Some(ModelTag::Atcs),
            "CUSTOM" => Some(ModelTag::Custom),
            _ => None,
        }
    }

    /// Looks an attribute up in the contextual then measurement maps.
    pub fn get(&self, name: &str) -> Option<&AttrValue> {
        self.contextual.get(name).or_else(|| self.measurements.get(name))
    }

    pub fn with_symptom(mut self, symptom: Option<String>) -> Self {
        self.symptom = symptom;
        self
    }
}

/// Manager tolerances carried as contextual attributes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub preemption: f64,
    pub devolution: f64,
    pub blocking: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { preemption: 0.01, devolution: 0.01, blocking: 0.10 }
    }
}

fn quantize(value: f64, resolution: Option<f64>) -> f64 {
    match resolution {
        Some(step) if step > 0.0 => (value / step).round() * step,
        _ => value,
    }
}

/// Builds the attribute maps the policy engine and the case bases share.
///
/// Contextual: `active_model`, `bc_tc{i}`, `tolerance_{preemption,devolution,blocking}`.
/// Measurements: `link_utilization`, `util_tc{i}` (time-averaged load held by
/// class i over its own BC, capped at 1 when the class borrows), and
/// preemption / devolution / blocking rates per window arrival.
pub fn describe(
    m: &Measurements,
    tolerances: &Tolerances,
    resolution: Option<f64>,
    symptom: Option<String>,
) -> ProblemDescriptor {
    let mut contextual = Attributes::new();
    contextual.insert(ACTIVE_MODEL.into(), AttrValue::categorical(m.active_model.as_str()));
    for (i, bc) in m.bc.iter().enumerate() {
        contextual.insert(format!("bc_tc{i}"), AttrValue::numeric(*bc as f64, 0.0, m.capacity as f64));
    }
    contextual.insert("tolerance_preemption".into(), AttrValue::numeric(tolerances.preemption, 0.0, 1.0));
    contextual.insert("tolerance_devolution".into(), AttrValue::numeric(tolerances.devolution, 0.0, 1.0));
    contextual.insert("tolerance_blocking".into(), AttrValue::numeric(tolerances.blocking, 0.0, 1.0));

    let q = |v: f64| quantize(v, resolution);
    let mut measurements = Attributes::new();
    measurements.insert(LINK_UTILIZATION.into(), AttrValue::numeric(q(m.mean_utilization), 0.0, 1.0));
    for (i, load) in m.class_load.iter().enumerate() {
        measurements.insert(format!("util_tc{i}"), AttrValue::numeric(q(*load), 0.0, 1.0));
    }
    measurements.insert(PREEMPTION_RATE.into(), AttrValue::numeric(q(m.preemption_rate()), 0.0, 1.0));
    measurements.insert(DEVOLUTION_RATE.into(), AttrValue::numeric(q(m.devolution_rate()), 0.0, 1.0));
    measurements.insert(BLOCKING_RATE.into(), AttrValue::numeric(q(m.blocking_rate()), 0.0, 1.0));

    ProblemDescriptor { contextual, measurements, symptom }
}
