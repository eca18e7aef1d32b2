use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analytic::{Fidelity, ModelParams};

use super::ExperimentsError;

pub const SCHEMA_VERSION: &str = "sleepnet-sweep/1";
pub const CSV_HEADER: &str = "rho,r0,D,a,b,P0,Ec,fidelity,metric,value,stderr,status";

/// One `(cell, metric)` line. Speeds are in m/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub rho: f64,
    pub r0: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub a: f64,
    pub b: f64,
    #[serde(rename = "P0")]
    pub p0: f64,
    #[serde(rename = "Ec")]
    pub ec: f64,
    pub fidelity: Fidelity,
    pub metric: String,
    /// `None` when the cell failed.
    pub value: Option<f64>,
    pub stderr: Option<f64>,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl TableRow {
    pub fn new(params: &ModelParams, metric: impl Into<String>) -> Self {
        TableRow {
            rho: params.rho,
            r0: params.r0,
            d: params.d,
            a: params.a,
            b: params.b,
            p0: params.p0,
            ec: params.ec,
            fidelity: params.fidelity,
            metric: metric.into(),
            value: None,
            stderr: None,
            status: String::new(),
            detail: None,
        }
    }

    pub fn params(&self) -> ModelParams {
        ModelParams {
            rho: self.rho,
            r0: self.r0,
            d: self.d,
            a: self.a,
            b: self.b,
            p0: self.p0,
            ec: self.ec,
            fidelity: self.fidelity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub tool: String,
    pub version: String,
    /// `sweep` or `validation`.
    pub kind: String,
    /// Preset name, `custom`, or a validation mode.
    pub label: String,
    pub seed: Option<u64>,
    /// Parameter templates of the grids behind the rows.
    pub params: Vec<ModelParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_cycles: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passed: Option<bool>,
}

impl TableMeta {
    pub fn new(kind: &str, label: &str) -> Self {
        TableMeta {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            kind: kind.to_string(),
            label: label.to_string(),
            seed: None,
            params: Vec::new(),
            n_cycles: None,
            passed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub meta: TableMeta,
    pub rows: Vec<TableRow>,
}

impl SweepTable {
    /// Appends another table's rows and templates.
    pub fn extend(&mut self, other: SweepTable) {
        self.meta.params.extend(other.meta.params);
        self.rows.extend(other.rows);
    }

    pub fn rows_for<'a>(&'a self, metric: &'a str) -> impl Iterator<Item = &'a TableRow> + 'a {
        self.rows.iter().filter(move |r| r.metric == metric)
    }
}

#[derive(Serialize, Deserialize)]
struct Document {
    schema: String,
    meta: TableMeta,
    rows: Vec<TableRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

fn sci(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{v:.16e}"),
        None => String::new(),
    }
}

pub fn write_csv<W: Write>(table: &SweepTable, out: &mut W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in &table.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.rho,
            r.r0,
            r.d,
            r.a,
            r.b,
            r.p0,
            r.ec,
            r.fidelity,
            r.metric,
            sci(r.value),
            sci(r.stderr),
            r.status
        )?;
    }
    Ok(())
}

pub fn write_json<W: Write>(table: &SweepTable, out: &mut W) -> io::Result<()> {
    let doc = Document {
        schema: SCHEMA_VERSION.to_string(),
        meta: table.meta.clone(),
        rows: table.rows.clone(),
    };
    serde_json::to_writer_pretty(&mut *out, &doc)?;
    writeln!(out)
}

pub fn emit_table<W: Write>(table: &SweepTable, format: OutputFormat, out: &mut W) -> io::Result<()> {
    match format {
        OutputFormat::Csv => write_csv(table, out),
        OutputFormat::Json => write_json(table, out),
    }
}

pub fn emit_to_string(table: &SweepTable, format: OutputFormat) -> String {
    let mut buf = Vec::new();
    emit_table(table, format, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("output is UTF-8")
}

pub fn parse_json(text: &str) -> Result<SweepTable, ExperimentsError> {
    let doc: Document = serde_json::from_str(text).map_err(|e| ExperimentsError::Parse(e.to_string()))?;
    if doc.schema != SCHEMA_VERSION {
        return Err(ExperimentsError::Parse(format!(
            "schema `{}` is not {SCHEMA_VERSION}",
            doc.schema
        )));
    }
    Ok(SweepTable {
        meta: doc.meta,
        rows: doc.rows,
    })
}
