//! Machine-readable report emission.
//!
//! CSV and JSON-lines output is byte-deterministic for a fixed config and
//! master seed: fixed field order, fixed float formatting, `\n` line ends,
//! and rows pre-sorted by the caller.

use crate::experiment::{HarnessError, ReportTable, TaskSummaryRow, TrialRecord};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// CSV schema: `method,pos_mean_mm,pos_min_mm,pos_max_mm,ori_mean_deg,ori_min_deg,ori_max_deg`.
pub fn write_report_csv(table: &ReportTable, path: &Path) -> Result<(), HarnessError> {
    if table.rows.is_empty() {
        return Err(HarnessError::EmptyResults);
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "method,pos_mean_mm,pos_min_mm,pos_max_mm,ori_mean_deg,ori_min_deg,ori_max_deg"
    )?;
    for row in &table.rows {
        writeln!(
            w,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            row.label,
            row.pos_mean_mm,
            row.pos_min_mm,
            row.pos_max_mm,
            row.ori_mean_deg,
            row.ori_min_deg,
            row.ori_max_deg
        )?;
    }
    w.flush()?;
    Ok(())
}

/// One trial record per line, traces omitted.
pub fn write_records_jsonl(records: &[TrialRecord], path: &Path) -> Result<(), HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::EmptyResults);
    }
    let mut w = BufWriter::new(File::create(path)?);
    for record in records {
        let mut slim = record.clone();
        slim.trace = None;
        serde_json::to_writer(&mut w, &slim).map_err(io_like)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_jsonl(path: &Path) -> Result<Vec<TrialRecord>, HarnessError> {
    let text = std::fs::read_to_string(path)?;
    let mut records = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(line).map_err(io_like)?);
    }
    if records.is_empty() {
        return Err(HarnessError::EmptyResults);
    }
    Ok(records)
}

/// Per-step estimate traces, one line per (trial, step).
pub fn write_traces_jsonl(records: &[TrialRecord], path: &Path) -> Result<(), HarnessError> {
    #[derive(serde::Serialize)]
    struct TraceLine<'a> {
        method: &'a str,
        correction: bool,
        object_id: usize,
        pose_id: usize,
        step: usize,
        x: f64,
        y: f64,
        yaw: f64,
        sigma_x: f64,
        sigma_y: f64,
        sigma_yaw: f64,
    }
    let mut w = BufWriter::new(File::create(path)?);
    let mut wrote = false;
    for record in records {
        let Some(trace) = &record.trace else { continue };
        for s in trace {
            let line = TraceLine {
                method: &record.method,
                correction: record.correction,
                object_id: record.object_id,
                pose_id: record.pose_id,
                step: s.step,
                x: s.x,
                y: s.y,
                yaw: s.yaw,
                sigma_x: s.sigma_x,
                sigma_y: s.sigma_y,
                sigma_yaw: s.sigma_yaw,
            };
            serde_json::to_writer(&mut w, &line).map_err(io_like)?;
            w.write_all(b"\n")?;
            wrote = true;
        }
    }
    if !wrote {
        return Err(HarnessError::EmptyResults);
    }
    w.flush()?;
    Ok(())
}

/// Task-benchmark summary CSV:
/// `method,trials,successes,success_rate,pos_mean_mm,ori_mean_deg`.
pub fn write_task_summary_csv(rows: &[TaskSummaryRow], path: &Path) -> Result<(), HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::EmptyResults);
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "method,trials,successes,success_rate,pos_mean_mm,ori_mean_deg")?;
    for row in rows {
        writeln!(
            w,
            "{},{},{},{:.6},{:.6},{:.6}",
            row.label, row.trials, row.successes, row.success_rate, row.pos_mean_mm, row.ori_mean_deg
        )?;
    }
    w.flush()?;
    Ok(())
}

fn io_like(e: serde_json::Error) -> HarnessError {
    HarnessError::Runtime(format!("serialization failed: {e}"))
}
