use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ClassId, Mbps};
use crate::{Error, Result};

/// One of the three basic allocation models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BamModel {
    Mam,
    Rdm,
    Atcs,
}

impl BamModel {
    pub const ALL: [BamModel; 3] = [BamModel::Mam, BamModel::Rdm, BamModel::Atcs];

    pub fn as_str(self) -> &'static str {
        match self {
            BamModel::Mam => "MAM",
            BamModel::Rdm => "RDM",
            BamModel::Atcs => "ATCS",
        }
    }
}

impl fmt::Display for BamModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BamModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "MAM" => Ok(BamModel::Mam),
            "RDM" => Ok(BamModel::Rdm),
            "ATCS" => Ok(BamModel::Atcs),
            _ => Err(Error::UnknownModel(s.to_string())),
        }
    }
}

/// Tag of the model currently configured on a link. `Custom` marks a
/// hand-built sharing matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ModelTag {
    Mam,
    Rdm,
    Atcs,
    Custom,
}

impl ModelTag {
    pub fn preset(self) -> Option<BamModel> {
        match self {
            ModelTag::Mam => Some(BamModel::Mam),
            ModelTag::Rdm => Some(BamModel::Rdm),
            ModelTag::Atcs => Some(BamModel::Atcs),
            ModelTag::Custom => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelTag::Custom => "CUSTOM",
            other => other.preset().map(BamModel::as_str).unwrap_or("CUSTOM"),
        }
    }
}

impl From<BamModel> for ModelTag {
    fn from(model: BamModel) -> Self {
        match model {
            BamModel::Mam => ModelTag::Mam,
            BamModel::Rdm => ModelTag::Rdm,
            BamModel::Atcs => ModelTag::Atcs,
        }
    }
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Static configuration of one traffic class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficClassConfig {
    pub index: ClassId,
    /// Higher rank means higher priority.
    pub priority: u32,
    /// Bandwidth constraint owned by the class.
    pub bc: Mbps,
}

impl TrafficClassConfig {
    pub fn new(index: ClassId, priority: u32, bc: Mbps) -> Self {
        Self { index, priority, bc }
    }
}

/// Checks the class table against the link capacity and returns every
/// violation found.
pub fn validate_classes(capacity: Mbps, classes: &[TrafficClassConfig]) -> Result<()> {
    let mut problems = Vec::new();
    if classes.is_empty() {
        problems.push("classes: at least one traffic class is required".to_string());
    }
    for (pos, class) in classes.iter().enumerate() {
        if class.index != pos {
            problems.push(format!(
                "classes[{pos}].index: expected {pos}, found {} (indices must be unique and contiguous from 0)",
                class.index
            ));
        }
        if class.bc == 0 {
            problems.push(format!("classes[{pos}].bc: bandwidth constraint must be positive"));
        }
    }
    let ranks: BTreeSet<u32> = classes.iter().map(|c| c.priority).collect();
    if ranks.len() != classes.len() {
        problems.push("classes.priority: priority ranks must be unique".to_string());
    }
    let total: Mbps = classes.iter().map(|c| c.bc).sum();
    if total != capacity {
        problems.push(format!(
            "classes.bc: bandwidth constraints sum to {total} but link capacity is {capacity}"
        ));
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(problems))
    }
}

/// Borrowing permissions between classes.
///
/// `allows(b, l)` is true when class `b` may occupy spare bandwidth inside
/// class `l`'s bandwidth constraint. The diagonal is always true.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharingMatrix {
    allow: Vec<Vec<bool>>,
}

impl SharingMatrix {
    /// Builds the preset matrix for `model`.
    pub fn preset(model: BamModel, classes: &[TrafficClassConfig]) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::Validation(vec!["classes: at least one traffic class is required".into()]));
        }
        let ranks: BTreeSet<u32> = classes.iter().map(|c| c.priority).collect();
        if ranks.len() != classes.len() {
            return Err(Error::Validation(vec!["classes.priority: priority ranks must be unique".into()]));
        }
        let n = classes.len();
        let allow = (0..n)
            .map(|b| {
                (0..n)
                    .map(|l| match model {
                        BamModel::Mam => b == l,
                        BamModel::Rdm => b == l || classes[l].priority > classes[b].priority,
                        BamModel::Atcs => true,
                    })
                    .collect()
            })
            .collect();
        Ok(Self { allow })
    }

    /// Builds an arbitrary matrix. It must be square with a true diagonal.
    pub fn custom(allow: Vec<Vec<bool>>) -> Result<Self> {
        let n = allow.len();
        let mut problems = Vec::new();
        for (b, row) in allow.iter().enumerate() {
            if row.len() != n {
                problems.push(format!("matrix row {b}: expected {n} entries, found {}", row.len()));
            } else if !row[b] {
                problems.push(format!("matrix[{b}][{b}]: a class must always be allowed its own BC"));
            }
        }
        if n == 0 {
            problems.push("matrix: must have at least one class".into());
        }
        if problems.is_empty() {
            Ok(Self { allow })
        } else {
            Err(Error::Validation(problems))
        }
    }

    pub fn len(&self) -> usize {
        self.allow.len()
    }

    pub fn is_empty(&self) -> bool {
        self.allow.is_empty()
    }

    pub fn allows(&self, borrower: ClassId, lender: ClassId) -> bool {
        self.allow
            .get(borrower)
            .and_then(|row| row.get(lender))
            .copied()
            .unwrap_or(false)
    }

    pub fn rows(&self) -> &[Vec<bool>] {
        &self.allow
    }
}

/// Builds a preset matrix from a textual model tag.
pub fn make_model_matrix(model_tag: &str, classes: &[TrafficClassConfig]) -> Result<SharingMatrix> {
    let model: BamModel = model_tag.parse()?;
    SharingMatrix::preset(model, classes)
}
