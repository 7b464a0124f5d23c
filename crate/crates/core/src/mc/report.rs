use std::collections::BTreeMap;

use serde::Serialize;

use super::config::ExperimentConfig;

/// Summary of one grid cell (one `n`, one `m`, or one data set).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub label: String,
    pub n: usize,
    pub m: Option<u64>,
    /// Replicates that produced a value.
    pub count: usize,
    /// Replicates dropped (degenerate normalizer).
    pub dropped: usize,
    pub metrics: BTreeMap<String, f64>,
}

impl CellSummary {
    pub fn new(label: impl Into<String>, n: usize, m: Option<u64>) -> Self {
        Self {
            label: label.into(),
            n,
            m,
            count: 0,
            dropped: 0,
            metrics: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.metrics.insert(key.to_string(), value);
        self
    }

    pub fn metric(&self, key: &str) -> f64 {
        self.metrics.get(key).copied().unwrap_or(f64::NAN)
    }
}

/// One pass/fail check. Checks with `asserted = false` are informational
/// and never affect [`Report::pass`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Criterion {
    pub name: String,
    pub asserted: bool,
    pub pass: bool,
    pub detail: String,
}

impl Criterion {
    pub fn asserted(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            asserted: true,
            pass,
            detail: detail.into(),
        }
    }

    pub fn info(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            asserted: false,
            pass,
            detail: detail.into(),
        }
    }
}

/// Raw per-replicate values for plotting.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl RawTable {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> crate::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| {
                if v.is_nan() {
                    String::new()
                } else {
                    v.to_string()
                }
            }))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub kind: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub cells: Vec<CellSummary>,
    pub statistics: BTreeMap<String, f64>,
    pub criteria: Vec<Criterion>,
    pub pass: bool,
    /// Wall-clock time; excluded from [`Report::body_json`].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
    #[serde(skip)]
    pub raw: Option<RawTable>,
}

impl Report {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            kind: config.kind().to_string(),
            version: crate::VERSION.to_string(),
            config: config.clone(),
            cells: Vec::new(),
            statistics: BTreeMap::new(),
            criteria: Vec::new(),
            pass: true,
            runtime_seconds: None,
            raw: None,
        }
    }

    pub fn stat(&mut self, key: &str, value: f64) {
        self.statistics.insert(key.to_string(), value);
    }

    pub fn check(&mut self, criterion: Criterion) {
        self.criteria.push(criterion);
        self.pass = self.criteria.iter().all(|c| !c.asserted || c.pass);
    }

    pub fn criterion(&self, name: &str) -> Option<&Criterion> {
        self.criteria.iter().find(|c| c.name == name)
    }

    /// Pretty JSON without the runtime field; byte-identical across runs
    /// of the same configuration.
    pub fn body_json(&self) -> String {
        let mut body = self.clone();
        body.runtime_seconds = None;
        serde_json::to_string_pretty(&body).expect("report serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
