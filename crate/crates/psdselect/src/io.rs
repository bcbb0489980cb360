//! On-disk formats.
//!
//! Images are raw little-endian f64, row-major, with a JSON sidecar
//! carrying the dimensions; the pair round-trips losslessly. Every CSV
//! is comma-separated, LF-terminated, UTF-8, with a header row; floats
//! are printed with 17 significant digits so identical runs produce
//! identical bytes regardless of scheduling.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bench::{ConfusionMatrix, EvidenceRow, TaskKey, TimingReport, TracePoint};
use crate::error::{Error, Result};
use crate::evidence::{EvidenceReport, ModelPosterior};
use crate::gibbs::GibbsChain;
use crate::numeric::fmt_g17;
use crate::spectral::Grid;

/// Sidecar describing a raw image file. `kind` is a free-form label and
/// may be omitted, as in hand-written PSF sidecars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMeta {
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub kind: String,
}

fn io_ctx(path: &Path, err: std::io::Error) -> Error {
    Error::config(format!("{}: {err}", path.display()))
}

/// Write `<stem>.f64` plus `<stem>.json` into `dir`; returns the data
/// file path.
pub fn write_image(
    dir: &Path,
    stem: &str,
    grid: Grid,
    data: &[f64],
    kind: &str,
) -> Result<PathBuf> {
    if data.len() != grid.len() {
        return Err(Error::usage(format!(
            "image has {} samples but the grid holds {}",
            data.len(),
            grid.len()
        )));
    }
    let mut bytes = Vec::with_capacity(data.len() * 8);
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let data_path = dir.join(format!("{stem}.f64"));
    fs::write(&data_path, bytes).map_err(|e| io_ctx(&data_path, e))?;

    let meta = ImageMeta {
        width: grid.width(),
        height: grid.height(),
        kind: kind.to_string(),
    };
    let sidecar = dir.join(format!("{stem}.json"));
    let mut text = serde_json::to_string_pretty(&meta)?;
    text.push('\n');
    fs::write(&sidecar, text).map_err(|e| io_ctx(&sidecar, e))?;
    Ok(data_path)
}

/// Read a raw image given the path of its `.f64` file; the sidecar is
/// found by swapping the extension.
pub fn read_image(data_path: &Path) -> Result<(Grid, Vec<f64>, ImageMeta)> {
    let bytes = fs::read(data_path).map_err(|e| io_ctx(data_path, e))?;
    let sidecar = data_path.with_extension("json");
    let meta_text = fs::read_to_string(&sidecar).map_err(|e| io_ctx(&sidecar, e))?;
    let meta: ImageMeta = serde_json::from_str(&meta_text)
        .map_err(|e| Error::config(format!("{}: {e}", sidecar.display())))?;
    let grid = Grid::new(meta.width, meta.height)?;
    if bytes.len() != grid.len() * 8 {
        return Err(Error::config(format!(
            "{}: expected {} bytes for {}x{}, found {}",
            data_path.display(),
            grid.len() * 8,
            meta.width,
            meta.height,
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("exact chunks")))
        .collect();
    Ok((grid, data, meta))
}

/// 8-bit binary PGM, min-max scaled; a constant field maps to 0.
pub fn write_pgm(path: &Path, grid: Grid, data: &[f64]) -> Result<()> {
    if data.len() != grid.len() {
        return Err(Error::usage(format!(
            "image has {} samples but the grid holds {}",
            data.len(),
            grid.len()
        )));
    }
    let lo = data.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let mut out = format!("P5\n{} {}\n255\n", grid.width(), grid.height()).into_bytes();
    out.extend(data.iter().map(|&v| {
        if span > 0.0 {
            (255.0 * (v - lo) / span).round() as u8
        } else {
            0
        }
    }));
    fs::write(path, out).map_err(|e| io_ctx(path, e))
}

fn open_csv(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| io_ctx(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn csv_ctx(path: &Path, err: csv::Error) -> Error {
    Error::config(format!("{}: {err}", path.display()))
}

const REPORT_FIELDS: [&str; 9] = [
    "model_id",
    "log_evidence",
    "term_likelihood",
    "term_prior",
    "term_posterior_density",
    "gamma_bar_x",
    "gamma_bar_e",
    "sample_count",
    "std_error",
];

fn report_record(r: &EvidenceReport) -> Vec<String> {
    vec![
        r.model_id.to_string(),
        fmt_g17(r.log_evidence),
        fmt_g17(r.term_likelihood),
        fmt_g17(r.term_prior),
        fmt_g17(r.term_posterior_density),
        fmt_g17(r.gamma_bar.gamma_x),
        fmt_g17(r.gamma_bar.gamma_e),
        r.sample_count.to_string(),
        fmt_g17(r.std_error),
    ]
}

/// One row per candidate model of a single selection run.
pub fn write_report_csv(path: &Path, reports: &[EvidenceReport]) -> Result<()> {
    let mut w = open_csv(path)?;
    w.write_record(REPORT_FIELDS)
        .map_err(|e| csv_ctx(path, e))?;
    for r in reports {
        w.write_record(report_record(r))
            .map_err(|e| csv_ctx(path, e))?;
    }
    w.flush().map_err(|e| io_ctx(path, e))
}

/// Single-row posterior: one probability column per model, then the
/// selected id.
pub fn write_posterior_csv(path: &Path, posterior: &ModelPosterior) -> Result<()> {
    let mut w = open_csv(path)?;
    let mut header: Vec<String> = posterior
        .model_ids
        .iter()
        .map(|id| format!("p_model_{id}"))
        .collect();
    header.push("selected".to_string());
    w.write_record(&header).map_err(|e| csv_ctx(path, e))?;
    let mut row: Vec<String> = posterior
        .probabilities
        .iter()
        .map(|&p| fmt_g17(p))
        .collect();
    row.push(posterior.selected.to_string());
    w.write_record(&row).map_err(|e| csv_ctx(path, e))?;
    w.flush().map_err(|e| io_ctx(path, e))
}

const ROW_FIELDS: [&str; 11] = [
    "true_model",
    "replicate",
    "candidate",
    "log_evidence",
    "term_likelihood",
    "term_prior",
    "term_posterior_density",
    "gamma_bar_x",
    "gamma_bar_e",
    "sample_count",
    "std_error",
];

fn row_record(r: &EvidenceRow) -> Vec<String> {
    vec![
        r.true_model.to_string(),
        r.replicate.to_string(),
        r.candidate.to_string(),
        fmt_g17(r.log_evidence),
        fmt_g17(r.term_likelihood),
        fmt_g17(r.term_prior),
        fmt_g17(r.term_posterior_density),
        fmt_g17(r.gamma_bar_x),
        fmt_g17(r.gamma_bar_e),
        r.sample_count.to_string(),
        fmt_g17(r.std_error),
    ]
}

/// Full evidence table of a confusion run, sorted by the caller.
pub fn write_evidence_rows_csv(path: &Path, rows: &[EvidenceRow]) -> Result<()> {
    let mut w = open_csv(path)?;
    w.write_record(ROW_FIELDS).map_err(|e| csv_ctx(path, e))?;
    for r in rows {
        w.write_record(row_record(r))
            .map_err(|e| csv_ctx(path, e))?;
    }
    w.flush().map_err(|e| io_ctx(path, e))
}

/// Append-only journal of completed evidence rows. Rows land in
/// completion order, so the file is a resume log, not a deterministic
/// artifact; the sorted table is written separately at the end.
pub struct EvidenceJournal {
    path: PathBuf,
}

impl EvidenceJournal {
    pub fn new(path: PathBuf) -> Self {
        Self { path }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Previously journaled rows, keyed by task; empty if absent.
    pub fn load(&self) -> Result<BTreeMap<TaskKey, EvidenceRow>> {
        if !self.path.exists() {
            return Ok(BTreeMap::new());
        }
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(&self.path)
            .map_err(|e| csv_ctx(&self.path, e))?;
        let mut rows = BTreeMap::new();
        for record in reader.deserialize::<EvidenceRow>() {
            let row = record.map_err(|e| csv_ctx(&self.path, e))?;
            rows.insert(row.key(), row);
        }
        Ok(rows)
    }

    /// Append one row, creating the file with its header on first use.
    pub fn append(&self, row: &EvidenceRow) -> Result<()> {
        let fresh = !self.path.exists()
            || fs::metadata(&self.path)
                .map_err(|e| io_ctx(&self.path, e))?
                .len()
                == 0;
        let file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| io_ctx(&self.path, e))?;
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .has_headers(false)
            .from_writer(file);
        if fresh {
            w.write_record(ROW_FIELDS)
                .map_err(|e| csv_ctx(&self.path, e))?;
        }
        w.write_record(row_record(row))
            .map_err(|e| csv_ctx(&self.path, e))?;
        w.flush().map_err(|e| io_ctx(&self.path, e))
    }
}

/// Percentages (one decimal) and raw counts, one row per true model.
pub fn write_confusion_csv(path: &Path, matrix: &ConfusionMatrix) -> Result<()> {
    let mut w = open_csv(path)?;
    let mut header = vec!["true_model".to_string()];
    header.extend(matrix.candidate_ids().iter().map(|id| format!("pct_{id}")));
    header.extend(
        matrix
            .candidate_ids()
            .iter()
            .map(|id| format!("count_{id}")),
    );
    w.write_record(&header).map_err(|e| csv_ctx(path, e))?;
    let percentages = matrix.percentages();
    for (i, &t) in matrix.true_ids().iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(percentages[i].iter().map(|p| format!("{p:.1}")));
        row.extend(matrix.counts()[i].iter().map(|c| c.to_string()));
        w.write_record(&row).map_err(|e| csv_ctx(path, e))?;
    }
    w.flush().map_err(|e| io_ctx(path, e))
}

/// Per-iteration chain state with a burn-in flag, for trace plots and
/// histograms.
pub fn write_chain_csv(path: &Path, chain: &GibbsChain) -> Result<()> {
    let mut w = open_csv(path)?;
    w.write_record(["g", "gamma_x", "gamma_e", "stat_x", "stat_e", "burn_in"])
        .map_err(|e| csv_ctx(path, e))?;
    let burn = chain.config().burn_in;
    for (i, rec) in chain.records().iter().enumerate() {
        let g = i + 1;
        w.write_record([
            g.to_string(),
            fmt_g17(rec.gamma.gamma_x),
            fmt_g17(rec.gamma.gamma_e),
            fmt_g17(rec.stat_x),
            fmt_g17(rec.stat_e),
            usize::from(g <= burn).to_string(),
        ])
        .map_err(|e| csv_ctx(path, e))?;
    }
    w.flush().map_err(|e| io_ctx(path, e))
}

/// Running-evidence checkpoints next to the quadrature reference.
pub fn write_trace_csv(path: &Path, points: &[TracePoint]) -> Result<()> {
    let mut w = open_csv(path)?;
    w.write_record([
        "iterations",
        "retained",
        "log_evidence",
        "oracle_log_evidence",
    ])
    .map_err(|e| csv_ctx(path, e))?;
    for p in points {
        w.write_record([
            p.iterations.to_string(),
            p.retained.to_string(),
            fmt_g17(p.log_evidence),
            fmt_g17(p.oracle_log_evidence),
        ])
        .map_err(|e| csv_ctx(path, e))?;
    }
    w.flush().map_err(|e| io_ctx(path, e))
}

/// Single quadrature result.
pub fn write_oracle_csv(path: &Path, model_id: usize, log_evidence: f64) -> Result<()> {
    let mut w = open_csv(path)?;
    w.write_record(["model_id", "log_evidence"])
        .map_err(|e| csv_ctx(path, e))?;
    w.write_record([model_id.to_string(), fmt_g17(log_evidence)])
        .map_err(|e| csv_ctx(path, e))?;
    w.flush().map_err(|e| io_ctx(path, e))
}

/// Per-task wall-clock seconds.
pub fn write_timing_csv(path: &Path, report: &TimingReport) -> Result<()> {
    let mut w = open_csv(path)?;
    w.write_record(["true_model", "replicate", "candidate", "seconds"])
        .map_err(|e| csv_ctx(path, e))?;
    for t in &report.rows {
        w.write_record([
            t.true_model.to_string(),
            t.replicate.to_string(),
            t.candidate.to_string(),
            fmt_g17(t.seconds),
        ])
        .map_err(|e| csv_ctx(path, e))?;
    }
    w.flush().map_err(|e| io_ctx(path, e))
}

/// `manifest.json` beside the outputs: the full resolved configuration,
/// no timestamps, so reruns stay byte-identical.
pub fn write_manifest(dir: &Path, manifest: &serde_json::Value) -> Result<()> {
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| io_ctx(&path, e))
}
