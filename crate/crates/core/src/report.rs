//! Sweep configuration and the JSON-lines / CSV report format.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::verifier::{Budget, InequalityId, SweepSpec, Verdict, VerificationRecord};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Everything a `verify` run needs; readable from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub ids: Vec<InequalityId>,
    pub p: Vec<f64>,
    pub d: Vec<usize>,
    pub n: Vec<usize>,
    pub vectors_per_cell: usize,
    pub samples: u64,
    pub exact_cap: usize,
    pub nodes: Option<usize>,
    pub retries: u32,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let spec = SweepSpec::default();
        Self::from_spec(&spec)
    }
}

impl SweepConfig {
    pub fn from_spec(spec: &SweepSpec) -> Self {
        Self {
            ids: spec.ids.clone(),
            p: spec.ps.clone(),
            d: spec.ds.clone(),
            n: spec.ns.clone(),
            vectors_per_cell: spec.vectors_per_cell,
            samples: spec.budget.samples,
            exact_cap: spec.budget.exact_cap,
            nodes: spec.budget.nodes,
            retries: spec.budget.retries,
            seed: spec.budget.seed,
            out: None,
            format: Format::Json,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn spec(&self) -> SweepSpec {
        SweepSpec {
            ids: self.ids.clone(),
            ps: self.p.clone(),
            ds: self.d.clone(),
            ns: self.n.clone(),
            vectors_per_cell: self.vectors_per_cell,
            budget: Budget {
                samples: self.samples,
                exact_cap: self.exact_cap,
                nodes: self.nodes,
                retries: self.retries,
                seed: self.seed,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec().validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorstMargin {
    pub margin: f64,
    pub sigma_margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub inconclusive: usize,
    /// Smallest margin per inequality, in units of sigma where available.
    pub worst: BTreeMap<InequalityId, WorstMargin>,
}

impl Summary {
    pub fn tally(records: &[VerificationRecord]) -> Self {
        let mut s = Summary::default();
        for r in records {
            match r.verdict {
                Verdict::Pass => s.pass += 1,
                Verdict::Fail => s.fail += 1,
                Verdict::Inconclusive => s.inconclusive += 1,
            }
            let key = |w: &WorstMargin| w.sigma_margin.unwrap_or(f64::INFINITY);
            let cand = WorstMargin { margin: r.margin, sigma_margin: r.sigma_margin };
            let replace = match s.worst.get(&r.id) {
                None => true,
                Some(w) => (key(&cand), cand.margin) < (key(w), w.margin),
            };
            if replace {
                s.worst.insert(r.id, cand);
            }
        }
        s
    }

    /// 0 all pass, 1 any fail, 3 inconclusive left over.
    pub fn exit_code(&self) -> i32 {
        if self.fail > 0 {
            1
        } else if self.inconclusive > 0 {
            3
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub tool_version: String,
    /// Seconds since the Unix epoch; the only field that differs between reruns.
    pub timestamp: u64,
    pub config: SweepConfig,
    pub records: Vec<VerificationRecord>,
    pub summary: Summary,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
enum Line {
    Header { tool_version: String, timestamp: u64, config: SweepConfig },
    Record(VerificationRecord),
    Summary(Summary),
}

impl ReportDocument {
    pub fn new(config: SweepConfig, records: Vec<VerificationRecord>, timestamp: u64) -> Self {
        let summary = Summary::tally(&records);
        Self { tool_version: TOOL_VERSION.to_string(), timestamp, config, records, summary }
    }

    /// Header line, one line per record, summary footer.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let header = Line::Header {
            tool_version: self.tool_version.clone(),
            timestamp: self.timestamp,
            config: self.config.clone(),
        };
        write_line(&mut w, &header)?;
        for r in &self.records {
            write_line(&mut w, &Line::Record(r.clone()))?;
        }
        write_line(&mut w, &Line::Summary(self.summary.clone()))?;
        w.flush().map_err(io)
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut header = None;
        let mut records = Vec::new();
        let mut summary = None;
        for line in r.lines() {
            let line = line.map_err(io)?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(&line).map_err(|e| Error::Config(e.to_string()))? {
                Line::Header { tool_version, timestamp, config } => header = Some((tool_version, timestamp, config)),
                Line::Record(rec) => records.push(rec),
                Line::Summary(s) => summary = Some(s),
            }
        }
        let (tool_version, timestamp, config) = header.ok_or_else(|| Error::Config("report has no header".into()))?;
        let summary = summary.ok_or_else(|| Error::Config("report has no summary".into()))?;
        Ok(Self { tool_version, timestamp, config, records, summary })
    }

    /// One row per record; vectors are joined with `;`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "id", "p", "d", "n", "a", "b", "shift", "lhs", "lhs_err", "lhs_method", "rhs", "rhs_err",
            "rhs_method", "samples_or_nodes", "margin", "sigma_margin", "verdict",
        ])
        .map_err(csv_err)?;
        let join = |v: &Option<Vec<f64>>| {
            v.as_ref().map(|v| v.iter().map(f64::to_string).collect::<Vec<_>>().join(";")).unwrap_or_default()
        };
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let method = |e: &crate::moments::Estimate| {
            serde_json::to_value(e.method).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
        };
        let verdict = |v: Verdict| serde_json::to_value(v).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        for r in &self.records {
            out.write_record([
                r.id.to_string(),
                r.params.p.to_string(),
                r.params.d.to_string(),
                r.params.n.map(|n| n.to_string()).unwrap_or_default(),
                join(&r.params.a),
                join(&r.params.b),
                opt(r.params.shift),
                r.lhs.value.to_string(),
                r.lhs.err.to_string(),
                method(&r.lhs),
                r.rhs.value.to_string(),
                r.rhs.err.to_string(),
                method(&r.rhs),
                r.lhs.samples_or_nodes.max(r.rhs.samples_or_nodes).to_string(),
                r.margin.to_string(),
                opt(r.sigma_margin),
                verdict(r.verdict),
            ])
            .map_err(csv_err)?;
        }
        out.flush().map_err(io)
    }
}

fn write_line<W: Write, T: Serialize>(w: &mut W, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *w, value).map_err(|e| Error::Io(e.to_string()))?;
    w.write_all(b"\n").map_err(io)
}

fn io(e: std::io::Error) -> Error {
    Error::Io(e.to_string())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}
