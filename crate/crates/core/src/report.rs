//! Side-by-side comparison of finished runs.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bam::Tally;
use crate::sim::SimulationReport;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub preemption: u64,
    pub devolution: u64,
    pub blocking: u64,
    pub unbroken: u64,
}

impl ComparisonRow {
    pub fn from_tally(label: impl Into<String>, t: &Tally) -> Self {
        Self {
            label: label.into(),
            preemption: t.preemption,
            devolution: t.devolution,
            blocking: t.blocking,
            unbroken: t.unbroken,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub seed: u64,
    pub schedule_hash: String,
    /// Config hash of each source report, in row order.
    pub config_hashes: Vec<String>,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    /// One row per report. Needs at least two reports, all over the same
    /// traffic.
    pub fn compare(reports: &[SimulationReport]) -> Result<Self> {
        if reports.len() < 2 {
            return Err(Error::Comparability(format!(
                "a comparison needs at least 2 reports, got {}",
                reports.len()
            )));
        }
        let first = &reports[0];
        for r in &reports[1..] {
            if r.schedule_hash != first.schedule_hash {
                return Err(Error::Comparability(format!(
                    "{} and {} ran different schedules ({} vs {})",
                    first.label, r.label, first.schedule_hash, r.schedule_hash
                )));
            }
        }
        Ok(Self {
            seed: first.seed,
            schedule_hash: first.schedule_hash.clone(),
            config_hashes: reports.iter().map(|r| r.config_hash.clone()).collect(),
            rows: reports.iter().map(|r| ComparisonRow::from_tally(&r.label, r.totals())).collect(),
        })
    }

    /// One row per repetition of a single run, labelled `LABEL k/n`.
    pub fn split_repetitions(report: &SimulationReport) -> Result<Self> {
        let n = report.repetitions.len();
        if n == 0 {
            return Err(Error::Comparability(format!("{} has no repetitions to split", report.label)));
        }
        Ok(Self {
            seed: report.seed,
            schedule_hash: report.schedule_hash.clone(),
            config_hashes: vec![report.config_hash.clone(); n],
            rows: report
                .repetitions
                .iter()
                .map(|r| ComparisonRow::from_tally(format!("{} {}/{}", report.label, r.index + 1, n), &r.totals))
                .collect(),
        })
    }

    pub fn row(&self, label: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("comparison serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Fixed-width table for terminals.
    pub fn render_human(&self) -> String {
        let width = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max("Run".len());
        let mut out = String::new();
        let _ = writeln!(out, "seed {}  schedule {}", self.seed, &self.schedule_hash[..self.schedule_hash.len().min(12)]);
        let _ = writeln!(
            out,
            "{:<width$}  {:>10}  {:>10}  {:>10}  {:>10}",
            "Run", "Preemption", "Devolution", "Blocking", "Unbroken"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<width$}  {:>10}  {:>10}  {:>10}  {:>10}",
                r.label, r.preemption, r.devolution, r.blocking, r.unbroken
            );
        }
        out
    }
}
