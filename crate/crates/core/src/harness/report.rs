//! Aggregation and CSV output.
//!
//! The summary CSV has the pinned header `episode,mean_length,std_length`,
//! one row per episode and a final `grand` row. Plot data is long-format
//! `seed,episode,length,return`. Floats print through Rust's shortest
//! round-trip formatting, which is locale-independent and deterministic.

use std::io::Write;
use std::path::Path;

use super::run::RunRecord;
use crate::error::{Error, Result};

/// Cross-seed statistics of one episode index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStat {
    pub mean: f64,
    pub std: f64,
}

/// Aggregated experiment results.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub per_episode: Vec<EpisodeStat>,
    /// Mean over episodes of the per-episode cross-seed mean length.
    pub grand_mean: f64,
    /// Cross-seed sample standard deviation of per-run mean lengths.
    pub grand_std: f64,
    pub seeds: usize,
}

fn sample_std(values: &[f64], mean: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Fold per-seed records into per-episode and grand statistics.
pub fn aggregate(records: &[RunRecord]) -> Result<Summary> {
    if records.is_empty() {
        return Err(Error::Validation("cannot aggregate zero runs".into()));
    }
    let episodes = records[0].episodes.len();
    if records.iter().any(|r| r.episodes.len() != episodes) {
        return Err(Error::Validation(
            "all runs must have the same episode count".into(),
        ));
    }
    let mut per_episode = Vec::with_capacity(episodes);
    for e in 0..episodes {
        let lengths: Vec<f64> = records
            .iter()
            .map(|r| r.episodes[e].length as f64)
            .collect();
        let mean = lengths.iter().sum::<f64>() / lengths.len() as f64;
        per_episode.push(EpisodeStat {
            mean,
            std: sample_std(&lengths, mean),
        });
    }
    let grand_mean = per_episode.iter().map(|s| s.mean).sum::<f64>() / episodes as f64;
    let run_means: Vec<f64> = records
        .iter()
        .map(|r| {
            r.episodes.iter().map(|e| e.length as f64).sum::<f64>() / episodes as f64
        })
        .collect();
    let run_mean_avg = run_means.iter().sum::<f64>() / run_means.len() as f64;
    let grand_std = sample_std(&run_means, run_mean_avg);
    Ok(Summary {
        per_episode,
        grand_mean,
        grand_std,
        seeds: records.len(),
    })
}

/// Write the summary CSV: header, one row per episode (1-indexed), then the
/// `grand` summary row.
pub fn emit_csv(summary: &Summary, mut out: impl Write) -> Result<()> {
    writeln!(out, "episode,mean_length,std_length")?;
    for (i, stat) in summary.per_episode.iter().enumerate() {
        writeln!(out, "{},{},{}", i + 1, stat.mean, stat.std)?;
    }
    writeln!(out, "grand,{},{}", summary.grand_mean, summary.grand_std)?;
    Ok(())
}

/// Write per-seed, per-episode plot data.
pub fn emit_plotdata(records: &[RunRecord], mut out: impl Write) -> Result<()> {
    writeln!(out, "seed,episode,length,return")?;
    for record in records {
        for (i, episode) in record.episodes.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{}",
                record.seed,
                i + 1,
                episode.length,
                episode.total_return
            )?;
        }
    }
    Ok(())
}

pub fn write_csv(summary: &Summary, path: &Path) -> Result<()> {
    let mut buffer = Vec::new();
    emit_csv(summary, &mut buffer)?;
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, buffer)?;
    Ok(())
}

pub fn write_plotdata(records: &[RunRecord], path: &Path) -> Result<()> {
    let mut buffer = Vec::new();
    emit_plotdata(records, &mut buffer)?;
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, buffer)?;
    Ok(())
}
