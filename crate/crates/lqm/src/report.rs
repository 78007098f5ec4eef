//! Plot-ready CSV and JSON reports.

use std::io::Write;
use std::path::Path;

use lqm_core::continual::{CglReport, Summary};
use lqm_core::evaluation::{DiagnosticReport, EcdfRow};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::formats::{write_atomic, write_json};

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    write_atomic(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(header)?;
        for row in rows {
            out.write_record(&row)?;
        }
        out.flush()
    })
}

/// `iteration,loss` with 1-based iterations.
pub fn write_loss_trace(path: &Path, trace: &[f64]) -> Result<()> {
    write_rows(
        path,
        &["iteration", "loss"],
        trace.iter().enumerate().map(|(i, l)| vec![(i + 1).to_string(), l.to_string()]),
    )
}

/// `class,value` per class, then an `all` row with the mean.
pub fn write_diagnostic(path: &Path, report: &DiagnosticReport) -> Result<()> {
    let rows = report
        .per_class
        .iter()
        .map(|c| vec![c.class.to_string(), c.value.to_string()])
        .chain(std::iter::once(vec!["all".to_string(), report.overall.to_string()]));
    write_rows(path, &["class", "value"], rows)
}

pub fn write_ecdf(path: &Path, rows: &[EcdfRow]) -> Result<()> {
    write_rows(
        path,
        &["value", "real", "syn", "optimal"],
        rows.iter().map(|r| vec![r.value.to_string(), r.real.to_string(), r.syn.to_string(), r.optimal.to_string()]),
    )
}

/// `run,stage,task,accuracy` for every filled matrix entry.
pub fn write_accuracy_matrices(path: &Path, report: &CglReport) -> Result<()> {
    let rows = report.runs.iter().enumerate().flat_map(|(run, r)| {
        r.matrix
            .entries()
            .into_iter()
            .map(move |(k, i, a)| vec![run.to_string(), k.to_string(), i.to_string(), a.to_string()])
    });
    write_rows(path, &["run", "stage", "task", "accuracy"], rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CglSummary {
    pub method: String,
    pub tasks: usize,
    pub average_accuracy: Summary,
    pub backward_transfer: Option<Summary>,
    pub per_run: Vec<RunSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub average_accuracy: f64,
    pub backward_transfer: Option<f64>,
    pub memory_sizes: Vec<usize>,
}

impl CglSummary {
    pub fn of(report: &CglReport) -> Self {
        CglSummary {
            method: report.method.clone(),
            tasks: report.runs.first().map_or(0, |r| r.matrix.num_tasks()),
            average_accuracy: report.average_accuracy,
            backward_transfer: report.backward_transfer,
            per_run: report
                .runs
                .iter()
                .map(|r| RunSummary {
                    average_accuracy: r.average_accuracy,
                    backward_transfer: r.backward_transfer,
                    memory_sizes: r.memory_sizes.clone(),
                })
                .collect(),
        }
    }
}

pub fn write_cgl_summary(path: &Path, report: &CglReport) -> Result<()> {
    write_json(path, &CglSummary::of(report))
}

pub fn print_json<T: Serialize>(value: &T) -> std::io::Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)
}
