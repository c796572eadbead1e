use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use novelty_core::detectors::{Evaluation, ResultTable, Threshold};
use novelty_core::nn::TrainingMeta;
use serde::{Deserialize, Serialize};

use crate::pipeline::{io_err, write_json};
use crate::profile::ExperimentProfile;
use crate::PipelineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub role: String,
    pub architecture: String,
    pub checkpoint: String,
    pub checkpoint_sha256: String,
    pub meta: TrainingMeta,
}

/// Everything a profile run produced. Contains no timings or paths, so two
/// runs with the same inputs serialize identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub profile: ExperimentProfile,
    pub manifest_sha256: String,
    pub rng: String,
    pub table: ResultTable,
    pub threshold: Option<Threshold>,
    pub models: Vec<ModelSummary>,
    pub evaluation: Evaluation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Markdown,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Json, Format::Csv, Format::Markdown];
}

impl FromStr for Format {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "markdown" | "md" => Ok(Format::Markdown),
            _ => Err(PipelineError::Profile(format!("unknown report format {s:?}"))),
        }
    }
}

impl Report {
    pub fn to_markdown(&self) -> String {
        let mut s = format!("# {}\n\nseed {}", self.profile.name, self.profile.seed);
        if let Some(t) = &self.threshold {
            let _ = write!(
                s,
                ", threshold {:.6} ({}th percentile of {} training errors)",
                t.value, t.percentile, t.sample_count
            );
        }
        s.push_str("\n\n");
        s.push_str(&self.table.to_markdown());
        for m in &self.models {
            let _ = write!(
                s,
                "\n{} `{}`: {} epochs, final loss {:.6}",
                m.role, m.architecture, m.meta.epochs_run, m.meta.final_loss
            );
        }
        s.push('\n');
        s
    }
}

fn write(path: PathBuf, text: &str, written: &mut Vec<PathBuf>) -> Result<(), PipelineError> {
    fs::write(&path, text).map_err(io_err(&path))?;
    written.push(path);
    Ok(())
}

/// Writes the report in each requested format and returns the files written.
///
/// JSON carries everything. CSV gives the result table plus, for
/// reconstruction detectors, per eval set a 100-bin density file and the raw
/// error samples. Markdown gives the result table.
pub fn emit_report(report: &Report, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>, PipelineError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    for format in formats {
        match format {
            Format::Json => {
                let path = dir.join("report.json");
                write_json(report, &path)?;
                written.push(path);
            }
            Format::Markdown => write(dir.join("report.md"), &report.to_markdown(), &mut written)?,
            Format::Csv => {
                write(dir.join("table.csv"), &report.table.to_csv(), &mut written)?;
                let (Some(h), Some(scores)) = (&report.evaluation.histogram, &report.evaluation.scores) else {
                    continue;
                };
                let width = (h.hi - h.lo) / h.bins as f64;
                for ((set, counts), (_, samples)) in h.counts.iter().zip(scores) {
                    if samples.is_empty() {
                        continue;
                    }
                    let mut density = String::from("bin_lo,bin_hi,count,density\n");
                    let n = samples.len() as f64;
                    for (b, &c) in counts.iter().enumerate() {
                        let d = if width > 0.0 { c as f64 / (n * width) } else { 0.0 };
                        let lo = h.lo + width * b as f64;
                        let _ = writeln!(density, "{lo},{},{c},{d}", lo + width);
                    }
                    write(dir.join(format!("density_{}.csv", set.key())), &density, &mut written)?;
                    let mut raw = String::from("reconstruction_error\n");
                    for x in samples {
                        let _ = writeln!(raw, "{x}");
                    }
                    write(dir.join(format!("samples_{}.csv", set.key())), &raw, &mut written)?;
                }
            }
        }
    }
    Ok(written)
}
