use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::descriptor::ProblemDescriptor;
use crate::bam::{BamModel, Measurements};
use crate::{Error, Result};

/// Version written into every persisted case record.
pub const CASE_SCHEMA_VERSION: u32 = 1;

/// A reconfiguration: switch the link to one of the preset models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Solution {
    pub target_model: BamModel,
}

impl From<BamModel> for Solution {
    fn from(target_model: BamModel) -> Self {
        Self { target_model }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseStatus {
    Pending,
    Positive,
    Negative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub problem: ProblemDescriptor,
    pub solution: Solution,
    pub status: CaseStatus,
    /// Simulated time the case was built.
    pub created_at: f64,
    /// Simulated time the case was revised.
    pub resolved_at: Option<f64>,
    pub metrics_before: Option<Measurements>,
    pub metrics_after: Option<Measurements>,
}

impl Case {
    /// True when both cases bind equal problems to the same solution.
    pub fn same_knowledge(&self, other: &Case) -> bool {
        self.solution == other.solution && self.problem == other.problem
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseBaseKind {
    Positive,
    Negative,
}

impl CaseBaseKind {
    pub fn status(self) -> CaseStatus {
        match self {
            CaseBaseKind::Positive => CaseStatus::Positive,
            CaseBaseKind::Negative => CaseStatus::Negative,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CaseRecord {
    schema_version: u32,
    #[serde(flatten)]
    case: Case,
}

/// An ordered collection of finalized cases of one polarity.
#[derive(Clone, Debug, PartialEq)]
pub struct CaseBase {
    kind: CaseBaseKind,
    entries: Vec<Case>,
}

impl CaseBase {
    pub fn new(kind: CaseBaseKind) -> Self {
        Self { kind, entries: Vec::new() }
    }

    pub fn kind(&self) -> CaseBaseKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn cases(&self) -> &[Case] {
        &self.entries
    }

    pub fn contains(&self, case: &Case) -> bool {
        self.entries.iter().any(|c| c.same_knowledge(case))
    }

    /// Inserts a case, stamping it with this base's status. Returns `false`
    /// (and drops the case) when the same problem/solution pair is already
    /// stored.
    pub fn insert(&mut self, mut case: Case) -> bool {
        case.status = self.kind.status();
        if self.contains(&case) {
            return false;
        }
        self.entries.push(case);
        true
    }

    fn encode(case: &Case) -> Result<String> {
        Ok(serde_json::to_string(&CaseRecord { schema_version: CASE_SCHEMA_VERSION, case: case.clone() })?)
    }

    fn decode(line: &str, line_no: usize) -> Result<Case> {
        let record: CaseRecord =
            serde_json::from_str(line).map_err(|e| Error::Record { line: line_no, message: e.to_string() })?;
        if record.schema_version != CASE_SCHEMA_VERSION {
            return Err(Error::Record {
                line: line_no,
                message: format!("unsupported schema version {}", record.schema_version),
            });
        }
        Ok(record.case)
    }

    /// Writes the whole base, one JSON record per line.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        for case in &self.entries {
            writeln!(out, "{}", Self::encode(case)?)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Appends one record to an existing file.
    pub fn append(path: impl AsRef<Path>, case: &Case) -> Result<()> {
        let mut out = OpenOptions::new().create(true).append(true).open(path)?;
        writeln!(out, "{}", Self::encode(case)?)?;
        Ok(())
    }

    /// Loads a base, failing on the first malformed record.
    pub fn load(path: impl AsRef<Path>, kind: CaseBaseKind) -> Result<Self> {
        let (base, skipped) = Self::load_lenient(path, kind)?;
        match skipped.into_iter().next() {
            Some(err) => Err(err),
            None => Ok(base),
        }
    }

    /// Loads a base, skipping malformed records and returning them as errors
    /// alongside the cases that did parse. Blank lines are ignored.
    pub fn load_lenient(path: impl AsRef<Path>, kind: CaseBaseKind) -> Result<(Self, Vec<Error>)> {
        let reader = BufReader::new(File::open(path)?);
        let mut base = Self::new(kind);
        let mut skipped = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match Self::decode(&line, i + 1) {
                Ok(case) => base.entries.push(case),
                Err(e) => skipped.push(e),
            }
        }
        Ok((base, skipped))
    }
}
