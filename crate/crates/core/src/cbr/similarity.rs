use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::descriptor::{AttrValue, ProblemDescriptor, ACTIVE_MODEL, SYMPTOM};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityFunction {
    /// `1 - |a - b| / range` per numeric attribute.
    Linear,
    /// Numeric ranges are cut into steps; `1 - step_distance / step_count`.
    Ladder,
    /// Linear per-attribute scores; retrieval ranks by score and keeps the
    /// `k` nearest.
    NearestNeighbor,
}

/// How weights are assigned when none are listed explicitly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Every attribute, and the symptom, weighs the same.
    Equal,
    /// Half of the weight on per-class BC utilization (`util_tc*`), the
    /// rest split between the active model and the symptom. Attributes
    /// that are constant for a link (BCs, tolerances) and the outcome rates
    /// weigh nothing.
    TrafficProfile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimilarityConfig {
    pub function: SimilarityFunction,
    /// Per-attribute weights. Empty means `weighting` decides. Otherwise
    /// they must sum to one; unlisted attributes get weight zero.
    pub weights: BTreeMap<String, f64>,
    pub weighting: Weighting,
    pub threshold: f64,
    /// Number of equal-width ladder steps for attributes without explicit
    /// boundaries.
    pub ladder_steps: usize,
    /// Explicit inner step boundaries per numeric attribute.
    pub ladder_boundaries: BTreeMap<String, Vec<f64>>,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        Self {
            function: SimilarityFunction::NearestNeighbor,
            weights: BTreeMap::new(),
            weighting: Weighting::TrafficProfile,
            threshold: 0.8,
            ladder_steps: 5,
            ladder_boundaries: BTreeMap::new(),
        }
    }
}

impl SimilarityConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(0.0..=1.0).contains(&self.threshold) {
            problems.push(format!("cbr.similarity.threshold: {} is outside [0, 1]", self.threshold));
        }
        if self.weights.values().any(|w| !w.is_finite() || *w < 0.0) {
            problems.push("cbr.similarity.weights: weights must be non-negative".into());
        }
        if !self.weights.is_empty() {
            let sum: f64 = self.weights.values().sum();
            if (sum - 1.0).abs() > 1e-9 {
                problems.push(format!("cbr.similarity.weights: weights sum to {sum}, expected 1"));
            }
        }
        if self.ladder_steps == 0 {
            problems.push("cbr.similarity.ladder_steps: must be at least 1".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

fn attribute_pairs<'a>(
    a: &'a ProblemDescriptor,
    b: &'a ProblemDescriptor,
) -> Result<Vec<(&'a str, &'a AttrValue, &'a AttrValue)>> {
    let mut pairs = Vec::new();
    for (side_a, side_b, label) in [(&a.contextual, &b.contextual, "contextual"), (&a.measurements, &b.measurements, "measurement")] {
        if side_a.len() != side_b.len() || side_a.keys().zip(side_b.keys()).any(|(x, y)| x != y) {
            return Err(Error::SchemaMismatch(format!("{label} attribute names differ")));
        }
        for ((name, va), vb) in side_a.iter().zip(side_b.values()) {
            if !va.same_kind(vb) {
                return Err(Error::SchemaMismatch(format!("attribute `{name}` has different kinds")));
            }
            pairs.push((name.as_str(), va, vb));
        }
    }
    Ok(pairs)
}

fn linear(x: f64, y: f64, lo: f64, hi: f64) -> f64 {
    let range = hi - lo;
    if range <= 0.0 {
        return if x == y { 1.0 } else { 0.0 };
    }
    (1.0 - (x - y).abs() / range).clamp(0.0, 1.0)
}

fn ladder(name: &str, x: f64, y: f64, lo: f64, hi: f64, cfg: &SimilarityConfig) -> f64 {
    let step = |v: f64, bounds: &[f64]| bounds.iter().filter(|b| v >= **b).count();
    let bounds: Vec<f64> = match cfg.ladder_boundaries.get(name) {
        Some(explicit) => explicit.clone(),
        None => {
            let n = cfg.ladder_steps.max(1);
            (1..n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
        }
    };
    let steps = bounds.len() + 1;
    let distance = step(x, &bounds).abs_diff(step(y, &bounds));
    1.0 - distance as f64 / steps as f64
}

/// Weights per attribute name (plus the symptom) for one schema.
fn effective_weights<'a>(names: impl Iterator<Item = &'a str>, cfg: &SimilarityConfig) -> BTreeMap<String, f64> {
    let names: Vec<&str> = std::iter::once(SYMPTOM).chain(names).collect();
    if !cfg.weights.is_empty() {
        return names.iter().map(|n| (n.to_string(), cfg.weights.get(*n).copied().unwrap_or(0.0))).collect();
    }
    let equal = || names.iter().map(|n| (n.to_string(), 1.0 / names.len() as f64)).collect();
    match cfg.weighting {
        Weighting::Equal => equal(),
        Weighting::TrafficProfile => {
            let profile = names.iter().filter(|n| n.starts_with("util_tc")).count();
            let raw: Vec<f64> = names
                .iter()
                .map(|n| match *n {
                    SYMPTOM | ACTIVE_MODEL => 1.0,
                    n if n.starts_with("util_tc") => 2.0 / profile as f64,
                    _ => 0.0,
                })
                .collect();
            let total: f64 = raw.iter().sum();
            if total <= 0.0 {
                return equal();
            }
            names.iter().zip(raw).map(|(n, w)| (n.to_string(), w / total)).collect()
        }
    }
}

/// Weighted similarity of two problem descriptors, in `[0, 1]`.
///
/// Categorical attributes (and the symptom) score 1 when equal, 0 otherwise.
/// Numeric attributes are scored over the union of both declared ranges so
/// the measure stays symmetric.
pub fn similarity(a: &ProblemDescriptor, b: &ProblemDescriptor, cfg: &SimilarityConfig) -> Result<f64> {
    let pairs = attribute_pairs(a, b)?;
    let weights = effective_weights(pairs.iter().map(|p| p.0), cfg);
    let weight = |name: &str| weights.get(name).copied().unwrap_or(0.0);
    let mut score = weight(SYMPTOM) * if a.symptom == b.symptom { 1.0 } else { 0.0 };
    for (name, va, vb) in pairs {
        let local = match (va, vb) {
            (AttrValue::Categorical(x), AttrValue::Categorical(y)) => {
                if x == y {
                    1.0
                } else {
                    0.0
                }
            }
            (
                AttrValue::Numeric { value: x, min: min_a, max: max_a },
                AttrValue::Numeric { value: y, min: min_b, max: max_b },
            ) => {
                let (lo, hi) = (min_a.min(*min_b), max_a.max(*max_b));
                match cfg.function {
                    SimilarityFunction::Linear | SimilarityFunction::NearestNeighbor => linear(*x, *y, lo, hi),
                    SimilarityFunction::Ladder => ladder(name, *x, *y, lo, hi, cfg),
                }
            }
            _ => unreachable!("kinds checked by attribute_pairs"),
        };
        score += weight(name) * local;
    }
    Ok(score.clamp(0.0, 1.0))
}
