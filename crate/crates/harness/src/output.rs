//! CSV emission and parsing. Floats are written with 17 significant digits
//! so every finite value reads back bit-exactly.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use ngn_core::run::RunRecord;
use ngn_core::verify::AuditReport;

use crate::error::{HarnessError, Result};
use crate::sweep::{SweepResult, SweepSpec};

pub const TRAJECTORY_HEADER: [&str; 9] = [
    "step",
    "loss",
    "full_loss",
    "grad_norm",
    "gamma_scalar",
    "gamma_coord_min",
    "gamma_coord_max",
    "gamma_coord_mean",
    "update_norm",
];

pub const SUMMARY_HEADER: [&str; 11] = [
    "optimizer",
    "c",
    "beta",
    "seed",
    "status",
    "final_loss",
    "best_loss",
    "steps_to_success",
    "schedule",
    "x0",
    "final_x",
];

pub const AUDIT_HEADER: [&str; 5] = ["name", "passed", "max_violation", "tolerance", "location"];

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(";")
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| ngn_core::Error::MalformedData(format!("not a number: `{s}`")).into())
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s.trim().is_empty() {
        Ok(None)
    } else {
        parse_f64(s).map(Some)
    }
}

fn parse_vec(s: &str) -> Result<Vec<f64>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(';').map(parse_f64).collect()
}

/// One trajectory line. The step-report columns are empty on a terminal
/// row that recorded a loss without stepping.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub step: u64,
    pub loss: f64,
    pub full_loss: Option<f64>,
    pub grad_norm: f64,
    pub gamma_scalar: Option<f64>,
    pub gamma_coord_min: Option<f64>,
    pub gamma_coord_max: Option<f64>,
    pub gamma_coord_mean: Option<f64>,
    pub update_norm: Option<f64>,
}

pub fn trajectory_rows(record: &RunRecord) -> Vec<TrajectoryRow> {
    (0..record.losses.len())
        .map(|k| {
            let r = record.step_reports.get(k);
            TrajectoryRow {
                step: k as u64,
                loss: record.losses[k],
                full_loss: record.full_losses[k],
                grad_norm: record.grad_norms[k],
                gamma_scalar: r.map(|r| r.gamma_scalar),
                gamma_coord_min: r.map(|r| r.gamma_coord_min),
                gamma_coord_max: r.map(|r| r.gamma_coord_max),
                gamma_coord_mean: r.map(|r| r.gamma_coord_mean),
                update_norm: r.map(|r| r.update_norm),
            }
        })
        .collect()
}

pub fn write_trajectory<W: io::Write>(out: W, rows: &[TrajectoryRow]) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER)?;
    for r in rows {
        w.write_record([
            r.step.to_string(),
            fmt_f64(r.loss),
            fmt_opt(r.full_loss),
            fmt_f64(r.grad_norm),
            fmt_opt(r.gamma_scalar),
            fmt_opt(r.gamma_coord_min),
            fmt_opt(r.gamma_coord_max),
            fmt_opt(r.gamma_coord_mean),
            fmt_opt(r.update_norm),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory<R: io::Read>(input: R) -> Result<Vec<TrajectoryRow>> {
    let mut reader = csv::Reader::from_reader(input);
    check_header(&mut reader, &TRAJECTORY_HEADER)?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| HarnessError::csv("<trajectory>", e))?;
        let step = rec[0]
            .parse()
            .map_err(|_| ngn_core::Error::MalformedData(format!("bad step `{}`", &rec[0])))?;
        rows.push(TrajectoryRow {
            step,
            loss: parse_f64(&rec[1])?,
            full_loss: parse_opt(&rec[2])?,
            grad_norm: parse_f64(&rec[3])?,
            gamma_scalar: parse_opt(&rec[4])?,
            gamma_coord_min: parse_opt(&rec[5])?,
            gamma_coord_max: parse_opt(&rec[6])?,
            gamma_coord_mean: parse_opt(&rec[7])?,
            update_norm: parse_opt(&rec[8])?,
        });
    }
    Ok(rows)
}

/// One summary line per sweep cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub optimizer: String,
    pub c: f64,
    pub beta: f64,
    pub seed: u64,
    pub status: String,
    pub final_loss: f64,
    pub best_loss: f64,
    pub steps_to_success: Option<u64>,
    pub schedule: String,
    pub x0: Vec<f64>,
    pub final_x: Vec<f64>,
}

pub fn summary_rows(result: &SweepResult) -> Vec<SummaryRow> {
    result
        .cells
        .iter()
        .map(|cr| {
            let spec = &cr.cell.spec;
            let base = SummaryRow {
                optimizer: spec.kind.name().to_string(),
                c: spec.c,
                beta: spec.beta1,
                seed: cr.cell.seed,
                status: "error".into(),
                final_loss: f64::NAN,
                best_loss: f64::NAN,
                steps_to_success: None,
                schedule: spec.schedule.to_string(),
                x0: cr.cell.x0.clone().unwrap_or_default(),
                final_x: Vec::new(),
            };
            match &cr.outcome {
                Ok(o) => SummaryRow {
                    status: o.status.label().to_string(),
                    final_loss: o.final_loss,
                    best_loss: o.best_loss,
                    steps_to_success: o.steps_to_success,
                    x0: o.x0.clone(),
                    final_x: o.final_x.clone(),
                    ..base
                },
                Err(_) => base,
            }
        })
        .collect()
}

pub fn write_summary<W: io::Write>(out: W, rows: &[SummaryRow]) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.optimizer.clone(),
            fmt_f64(r.c),
            fmt_f64(r.beta),
            r.seed.to_string(),
            r.status.clone(),
            fmt_f64(r.final_loss),
            fmt_f64(r.best_loss),
            r.steps_to_success.map(|s| s.to_string()).unwrap_or_default(),
            r.schedule.clone(),
            fmt_vec(&r.x0),
            fmt_vec(&r.final_x),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary<R: io::Read>(input: R) -> Result<Vec<SummaryRow>> {
    let mut reader = csv::Reader::from_reader(input);
    check_header(&mut reader, &SUMMARY_HEADER)?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| HarnessError::csv("<summary>", e))?;
        let int = |s: &str| -> Result<u64> {
            s.parse()
                .map_err(|_| ngn_core::Error::MalformedData(format!("bad integer `{s}`")).into())
        };
        rows.push(SummaryRow {
            optimizer: rec[0].to_string(),
            c: parse_f64(&rec[1])?,
            beta: parse_f64(&rec[2])?,
            seed: int(&rec[3])?,
            status: rec[4].to_string(),
            final_loss: parse_f64(&rec[5])?,
            best_loss: parse_f64(&rec[6])?,
            steps_to_success: if rec[7].is_empty() { None } else { Some(int(&rec[7])?) },
            schedule: rec[8].to_string(),
            x0: parse_vec(&rec[9])?,
            final_x: parse_vec(&rec[10])?,
        });
    }
    Ok(rows)
}

pub fn write_audits<W: io::Write>(out: W, reports: &[AuditReport]) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AUDIT_HEADER)?;
    for r in reports {
        w.write_record([
            r.name.clone(),
            r.passed.to_string(),
            fmt_f64(r.max_violation),
            fmt_f64(r.tolerance),
            r.location.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn check_header<R: io::Read>(reader: &mut csv::Reader<R>, want: &[&str]) -> Result<()> {
    let got = reader.headers().map_err(|e| HarnessError::csv("<csv>", e))?;
    if got.iter().ne(want.iter().copied()) {
        return Err(ngn_core::Error::MalformedData(format!("unexpected CSV header `{}`", got.iter().collect::<Vec<_>>().join(","))).into());
    }
    Ok(())
}

fn create(path: &Path) -> Result<fs::File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    fs::File::create(path).map_err(|e| HarnessError::io(path, e))
}

pub fn emit_trajectory(record: &RunRecord, path: &Path) -> Result<()> {
    let file = create(path)?;
    write_trajectory(io::BufWriter::new(file), &trajectory_rows(record)).map_err(|e| HarnessError::csv(path, e))
}

pub fn emit_summary(result: &SweepResult, path: &Path) -> Result<()> {
    let file = create(path)?;
    write_summary(io::BufWriter::new(file), &summary_rows(result)).map_err(|e| HarnessError::csv(path, e))
}

/// Writes the summary and, if requested, one trajectory per cell into the
/// resolved output directory. Returns the summary path.
pub fn write_sweep_outputs(sweep: &SweepSpec, result: &SweepResult) -> Result<PathBuf> {
    let dir = sweep.output.resolved_dir();
    let summary = dir.join(&sweep.output.summary);
    emit_summary(result, &summary)?;
    if sweep.output.trajectories {
        for cr in &result.cells {
            if let Some(rec) = &cr.record {
                emit_trajectory(rec, &dir.join(format!("trajectory_{:05}.csv", cr.cell.index)))?;
            }
        }
    }
    Ok(summary)
}
