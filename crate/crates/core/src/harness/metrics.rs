use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::{run_trials, ExperimentResult};
use crate::error::{Error, Result};

/// Version of the metrics column set.
pub const SCHEMA_VERSION: u32 = 1;

pub const COLUMNS: [&str; 12] = [
    "schema_version",
    "row_type",
    "trial",
    "seed",
    "episode",
    "trial_count",
    "hops",
    "normalized_throughput",
    "mean_user_reward",
    "mean_loss_q",
    "mean_loss_c",
    "episodes_to_target",
];

/// Per-episode summary of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    /// Counted from 1.
    pub episode: u64,
    pub hops: u64,
    pub normalized_throughput: f64,
    pub mean_user_reward: f64,
    pub mean_loss_q: Option<f64>,
    pub mean_loss_c: Option<f64>,
}

/// One hop of training telemetry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HopRecord {
    pub trial: u64,
    pub episode: u64,
    pub hop: u64,
    pub action: usize,
    pub ack: bool,
    pub user_reward: f64,
    pub loss_q: Option<f64>,
    pub loss_c: Option<f64>,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowType {
    Trial,
    Aggregate,
}

/// One row of a metrics file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub schema_version: u32,
    pub row_type: RowType,
    pub trial: Option<u64>,
    pub seed: Option<u64>,
    pub episode: u64,
    pub trial_count: u64,
    pub hops: f64,
    pub normalized_throughput: f64,
    pub mean_user_reward: f64,
    pub mean_loss_q: Option<f64>,
    pub mean_loss_c: Option<f64>,
    pub episodes_to_target: Option<f64>,
}

/// Sidecar describing how a metrics file was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub trial_seeds: Vec<u64>,
    pub config: ExperimentConfig,
}

pub fn manifest_path(metrics: &Path) -> PathBuf {
    let mut s = metrics.as_os_str().to_owned();
    s.push(".manifest.toml");
    PathBuf::from(s)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn mean_opt(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = xs.flatten().collect();
    (!v.is_empty()).then(|| mean(&v))
}

/// Detail rows in trial order followed by one aggregate row per episode.
pub fn metrics_records(result: &ExperimentResult) -> Vec<MetricsRecord> {
    let target = result.config.target_throughput;
    let mut rows = Vec::new();
    for t in &result.trials {
        let ett = t.episodes_to_target(target).map(|e| e as f64);
        for e in &t.episodes {
            rows.push(MetricsRecord {
                schema_version: SCHEMA_VERSION,
                row_type: RowType::Trial,
                trial: Some(t.trial),
                seed: Some(t.seed),
                episode: e.episode,
                trial_count: 1,
                hops: e.hops as f64,
                normalized_throughput: e.normalized_throughput,
                mean_user_reward: e.mean_user_reward,
                mean_loss_q: e.mean_loss_q,
                mean_loss_c: e.mean_loss_c,
                episodes_to_target: ett,
            });
        }
    }
    let all_reached: Option<Vec<f64>> = result
        .trials
        .iter()
        .map(|t| t.episodes_to_target(target).map(|e| e as f64))
        .collect();
    let ett = all_reached.map(|v| mean(&v));
    let last = result
        .trials
        .iter()
        .map(|t| t.episodes.len() as u64)
        .max()
        .unwrap_or(0);
    for episode in 1..=last {
        let eps: Vec<_> = result
            .trials
            .iter()
            .filter_map(|t| t.episodes.get(episode as usize - 1))
            .collect();
        rows.push(MetricsRecord {
            schema_version: SCHEMA_VERSION,
            row_type: RowType::Aggregate,
            trial: None,
            seed: None,
            episode,
            trial_count: eps.len() as u64,
            hops: mean(&eps.iter().map(|e| e.hops as f64).collect::<Vec<_>>()),
            normalized_throughput: mean(
                &eps.iter()
                    .map(|e| e.normalized_throughput)
                    .collect::<Vec<_>>(),
            ),
            mean_user_reward: mean(&eps.iter().map(|e| e.mean_user_reward).collect::<Vec<_>>()),
            mean_loss_q: mean_opt(eps.iter().map(|e| e.mean_loss_q)),
            mean_loss_c: mean_opt(eps.iter().map(|e| e.mean_loss_c)),
            episodes_to_target: ett,
        });
    }
    rows
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Serializes records as CSV with a header row.
pub fn write_metrics_csv<W: std::io::Write>(records: &[MetricsRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    for r in records {
        w.write_record([
            r.schema_version.to_string(),
            match r.row_type {
                RowType::Trial => "trial".into(),
                RowType::Aggregate => "aggregate".into(),
            },
            fmt_opt(r.trial),
            fmt_opt(r.seed),
            r.episode.to_string(),
            r.trial_count.to_string(),
            r.hops.to_string(),
            r.normalized_throughput.to_string(),
            r.mean_user_reward.to_string(),
            fmt_opt(r.mean_loss_q),
            fmt_opt(r.mean_loss_c),
            fmt_opt(r.episodes_to_target),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<metrics>", e))?;
    Ok(())
}

pub fn read_metrics_csv<R: std::io::Read>(input: R) -> Result<Vec<MetricsRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != COLUMNS {
        return Err(Error::Metrics(format!(
            "metrics header {header:?} does not match schema version {SCHEMA_VERSION}"
        )));
    }
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        let rec: MetricsRecord = rec?;
        if rec.schema_version != SCHEMA_VERSION {
            return Err(Error::Metrics(format!(
                "unsupported metrics schema version {}",
                rec.schema_version
            )));
        }
        rows.push(rec);
    }
    Ok(rows)
}

/// Writes the metrics file, its manifest and, if configured, the telemetry file.
pub fn write_outputs(result: &ExperimentResult, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_metrics_csv(&metrics_records(result), std::io::BufWriter::new(file))?;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        trial_seeds: result.trials.iter().map(|t| t.seed).collect(),
        config: result.config.clone(),
    };
    let mp = manifest_path(path);
    std::fs::write(&mp, toml::to_string(&manifest)?).map_err(|e| Error::io(&mp, e))?;
    if let Some(tp) = &result.config.telemetry_path {
        let file = std::fs::File::create(tp).map_err(|e| Error::io(tp, e))?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        for t in &result.trials {
            for rec in &t.telemetry {
                w.serialize(rec)?;
            }
        }
        w.flush().map_err(|e| Error::io(tp, e))?;
    }
    Ok(())
}

pub fn read_manifest(metrics: &Path) -> Result<Manifest> {
    let mp = manifest_path(metrics);
    let text = std::fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
    Ok(toml::from_str(&text)?)
}

/// Runs every trial and writes the outputs when `output_path` is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let result = run_trials(cfg)?;
    if let Some(p) = &cfg.output_path {
        write_outputs(&result, p)?;
    }
    Ok(result)
}
