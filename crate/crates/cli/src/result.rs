//! Experiment results and the bookkeeping shared by all experiments.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
}

/// One named assertion of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub section: String,
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    pub pass: bool,
}

/// A numeric table, emitted as one CSV file. Missing cells are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row.iter().map(|v| Some(*v)).collect());
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub experiment: String,
    pub name: String,
    pub pass: bool,
    pub headline: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    /// Full reports of the library calls, keyed by section.
    pub report: BTreeMap<String, serde_json::Value>,
    pub tables: Vec<Table>,
    /// Library operations in the order they were first called.
    pub operations: Vec<String>,
    /// Seconds per section plus `total`. The only field allowed to differ between reruns.
    pub wall_clock: BTreeMap<String, f64>,
    pub config: ExperimentConfig,
}

impl ExperimentResult {
    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// A copy with the timings cleared, for comparing reruns.
    pub fn without_timings(&self) -> Self {
        Self {
            wall_clock: BTreeMap::new(),
            ..self.clone()
        }
    }

    pub fn section_seconds(&self, section: &str) -> Option<f64> {
        self.wall_clock.get(section).copied()
    }
}

pub(crate) struct Recorder<'a> {
    pub cfg: &'a ExperimentConfig,
    section: String,
    checks: Vec<Check>,
    headline: BTreeMap<String, f64>,
    report: BTreeMap<String, serde_json::Value>,
    tables: Vec<Table>,
    operations: Vec<String>,
    wall_clock: BTreeMap<String, f64>,
}

impl<'a> Recorder<'a> {
    pub fn new(cfg: &'a ExperimentConfig) -> Self {
        Self {
            cfg,
            section: String::new(),
            checks: Vec::new(),
            headline: BTreeMap::new(),
            report: BTreeMap::new(),
            tables: Vec::new(),
            operations: Vec::new(),
            wall_clock: BTreeMap::new(),
        }
    }

    /// Runs one timed section.
    pub fn section(&mut self, name: &str, body: impl FnOnce(&mut Self) -> Result<()>) -> Result<()> {
        self.section = name.to_string();
        let start = Instant::now();
        body(self)?;
        self.wall_clock.insert(name.to_string(), start.elapsed().as_secs_f64());
        Ok(())
    }

    pub fn op(&mut self, name: &str) {
        if !self.operations.iter().any(|o| o == name) {
            self.operations.push(name.to_string());
        }
    }

    pub fn at_most(&mut self, name: &str, value: f64, bound: f64) {
        self.check(name, value, Relation::AtMost, bound);
    }

    pub fn at_least(&mut self, name: &str, value: f64, bound: f64) {
        self.check(name, value, Relation::AtLeast, bound);
    }

    fn check(&mut self, name: &str, value: f64, relation: Relation, bound: f64) {
        let pass = match relation {
            Relation::AtMost => value <= bound,
            Relation::AtLeast => value >= bound,
        };
        self.checks.push(Check {
            section: self.section.clone(),
            name: name.to_string(),
            value,
            relation,
            bound,
            pass,
        });
    }

    pub fn headline(&mut self, name: &str, value: f64) {
        self.headline.insert(name.to_string(), value);
    }

    pub fn report(&mut self, value: &impl Serialize) -> Result<()> {
        self.report.insert(self.section.clone(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn table(&mut self, table: Table) {
        self.tables.push(table);
    }

    pub fn finish(mut self, id: &str, name: &str, total: f64) -> ExperimentResult {
        self.wall_clock.insert("total".into(), total);
        ExperimentResult {
            experiment: id.to_string(),
            name: name.to_string(),
            pass: !self.checks.is_empty() && self.checks.iter().all(|c| c.pass),
            headline: self.headline,
            checks: self.checks,
            report: self.report,
            tables: self.tables,
            operations: self.operations,
            wall_clock: self.wall_clock,
            config: self.cfg.clone(),
        }
    }
}
