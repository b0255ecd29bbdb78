//! Batch execution of a scenario: one run per router, sweep point and seed,
//! aggregated per sweep point and written as CSV.

use std::fs;
use std::io;
use std::path::{Path as FsPath, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::config::{Scenario, SweepPoint};
use crate::metrics::{write_runs, write_series, MetricsError, MetricsReport, RunMeta, RunRow};
use crate::sim::{ConfigError, RouterKind, Simulation};
use crate::topology::Topology;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("run {run}: {source}")]
    Config {
        run: String,
        #[source]
        source: ConfigError,
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub router: RouterKind,
    pub point: SweepPoint,
    pub meta: RunMeta,
    pub report: MetricsReport,
}

/// Mean and standard error over seeds at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub scenario: String,
    pub router: RouterKind,
    pub sweep: &'static str,
    pub value: Option<f64>,
    pub rate: f64,
    pub sources: u32,
    pub seeds: usize,
    pub blocking_probability: f64,
    pub blocking_probability_se: f64,
    pub packets_received: f64,
    pub packets_received_se: f64,
    pub mean_delay: f64,
    pub mean_utilization: f64,
    pub restored: f64,
    pub dropped: f64,
    pub probes_sent: f64,
}

pub const SUMMARY_COLUMNS: [&str; 16] = [
    "scenario",
    "router",
    "sweep",
    "value",
    "rate",
    "sources",
    "seeds",
    "blocking_probability",
    "blocking_probability_se",
    "packets_received",
    "packets_received_se",
    "mean_delay",
    "mean_utilization",
    "restored",
    "dropped",
    "probes_sent",
];

/// Runs every (router, sweep point, seed) combination. Results come back in
/// that nested order whether or not `parallel` is set.
pub fn execute(
    scenario: &Scenario,
    topology: &Topology,
    parallel: bool,
) -> Result<Vec<RunResult>, RunError> {
    let points = scenario.points();
    let mut jobs = Vec::new();
    for &router in &scenario.routers {
        for &point in &points {
            for &seed in &scenario.seeds {
                jobs.push((router, point, seed));
            }
        }
    }
    let one = |&(router, point, seed): &(RouterKind, SweepPoint, u64)| {
        let meta = RunMeta {
            scenario: scenario.name.clone(),
            router: router.name().to_string(),
            seed,
            rate: point.rate_mbps,
            sources: point.sources,
        };
        let config = scenario.sim_config(topology, router, point, seed);
        let sim = Simulation::new(config).map_err(|source| RunError::Config {
            run: meta.run_id(),
            source,
        })?;
        Ok(RunResult {
            router,
            point,
            meta,
            report: sim.run(),
        })
    };
    if parallel {
        jobs.par_iter().map(one).collect()
    } else {
        jobs.iter().map(one).collect()
    }
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Groups consecutive results sharing router and sweep point.
pub fn aggregate(scenario: &Scenario, results: &[RunResult]) -> Vec<AggregateRow> {
    results
        .chunk_by(|a, b| a.router == b.router && a.point == b.point)
        .map(|group| {
            let first = &group[0];
            let col = |f: fn(&MetricsReport) -> f64| -> Vec<f64> {
                group.iter().map(|r| f(&r.report)).collect()
            };
            let (bp, bp_se) = mean_se(&col(|r| r.blocking_probability));
            let (pk, pk_se) = mean_se(&col(|r| r.packets_received as f64));
            AggregateRow {
                scenario: scenario.name.clone(),
                router: first.router,
                sweep: scenario.sweep.name(),
                value: first.point.value,
                rate: first.point.rate_mbps,
                sources: first.point.sources,
                seeds: group.len(),
                blocking_probability: bp,
                blocking_probability_se: bp_se,
                packets_received: pk,
                packets_received_se: pk_se,
                mean_delay: mean_se(&col(|r| r.mean_delay)).0,
                mean_utilization: mean_se(&col(|r| r.mean_utilization)).0,
                restored: mean_se(&col(|r| r.restored as f64)).0,
                dropped: mean_se(&col(|r| r.dropped as f64)).0,
                probes_sent: mean_se(&col(|r| r.probes_sent as f64)).0,
            }
        })
        .collect()
}

pub fn write_summary<W: io::Write>(rows: &[AggregateRow], out: W) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.scenario.clone(),
            r.router.name().to_string(),
            r.sweep.to_string(),
            r.value.map(|v| v.to_string()).unwrap_or_default(),
            r.rate.to_string(),
            r.sources.to_string(),
            r.seeds.to_string(),
            r.blocking_probability.to_string(),
            r.blocking_probability_se.to_string(),
            r.packets_received.to_string(),
            r.packets_received_se.to_string(),
            r.mean_delay.to_string(),
            r.mean_utilization.to_string(),
            r.restored.to_string(),
            r.dropped.to_string(),
            r.probes_sent.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Files written by [`run_scenario`].
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub summary: PathBuf,
    pub runs: PathBuf,
    pub series: Vec<PathBuf>,
}

fn io_err(path: &FsPath) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(
    path: &FsPath,
    f: impl FnOnce(&mut Vec<u8>) -> Result<(), MetricsError>,
) -> Result<(), RunError> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    fs::write(path, buf).map_err(io_err(path))
}

/// Runs the scenario and writes `summary.csv`, `runs.csv` and one
/// `timeseries_<run-id>.csv` per run into `out_dir`. Nothing is written
/// unless every run succeeds, and the summary is written last so an
/// interrupted export never leaves a summary behind.
pub fn run_scenario(
    scenario: &Scenario,
    topology: &Topology,
    out_dir: &FsPath,
    parallel: bool,
) -> Result<Artifacts, RunError> {
    let results = execute(scenario, topology, parallel)?;
    let rows = aggregate(scenario, &results);
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let mut series = Vec::with_capacity(results.len());
    for r in &results {
        let path = out_dir.join(format!("timeseries_{}.csv", r.meta.run_id()));
        write_file(&path, |b| write_series(&r.report.series, b))?;
        series.push(path);
    }
    let runs = out_dir.join("runs.csv");
    let run_rows: Vec<RunRow> = results
        .iter()
        .map(|r| RunRow {
            meta: r.meta.clone(),
            report: r.report.clone(),
        })
        .collect();
    write_file(&runs, |b| write_runs(&run_rows, b))?;

    let summary = out_dir.join("summary.csv");
    let tmp = out_dir.join(".summary.csv.tmp");
    write_file(&tmp, |b| write_summary(&rows, b))?;
    fs::rename(&tmp, &summary).map_err(io_err(&summary))?;
    Ok(Artifacts {
        summary,
        runs,
        series,
    })
}
