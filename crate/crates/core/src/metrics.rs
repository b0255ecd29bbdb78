//! Run metrics: demand blocking, delivered payload packets, end-to-end delay
//! and channel utilization, plus their CSV exports.

use std::io;

use thiserror::Error;

use crate::routing::Lightpath;
use crate::sim::traffic::TrafficModel;
use crate::topology::Topology;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("blocking probability is undefined with zero offered demands")]
    NothingOffered,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("malformed csv: {0}")]
    Malformed(String),
}

pub fn blocking_probability(blocked: u64, offered: u64) -> Result<f64, MetricsError> {
    if offered == 0 {
        return Err(MetricsError::NothingOffered);
    }
    Ok(blocked as f64 / offered as f64)
}

/// Whole payload packets a session at `model.data_rate` delivers while
/// carried for `carried` seconds.
pub fn packets_for(carried: f64, model: &TrafficModel) -> u64 {
    if carried <= 0.0 {
        return 0;
    }
    let bits_per_packet = model.packet_size as f64 * 8.0;
    // the epsilon absorbs binary rounding of decimal durations (2e6 * 0.2 / 1600)
    (model.data_rate * carried / bits_per_packet + 1e-9).floor() as u64
}

/// Propagation delay of the carrying lightpath plus `conversion_time` per
/// wavelength change. Circuit-switched, so there is no queueing term.
pub fn end_to_end_delay(lightpath: &Lightpath, topo: &Topology, conversion_time: f64) -> f64 {
    lightpath.end_to_end_delay(topo, conversion_time)
}

/// `(now, occupied / total)` over the directed channels of up links.
pub fn sample_utilization(topo: &Topology, now: f64) -> (f64, f64) {
    (now, topo.utilization())
}

/// One row of the per-run time series.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePoint {
    pub time: f64,
    pub blocking_probability: f64,
    pub cumulative_packets: u64,
    pub utilization: f64,
    /// Carried-time-weighted mean delay of everything carried so far.
    pub mean_delay: f64,
    pub probes_sent: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub offered: u64,
    pub accepted: u64,
    pub blocked: u64,
    pub completed: u64,
    /// Successful reroutes after a failure.
    pub restored: u64,
    pub dropped: u64,
    /// Accepted connections still holding channels at the end of the run.
    pub still_active: u64,
    pub blocking_probability: f64,
    pub packets_received: u64,
    /// Seconds, weighted by carried duration; 0 when nothing was carried.
    pub mean_delay: f64,
    /// Mean primary setup delay over accepted connections, seconds.
    pub mean_setup_delay: f64,
    pub mean_utilization: f64,
    pub probes_sent: u64,
    pub probe_acks: u64,
    pub probe_nacks: u64,
    /// Time of the last processed event.
    pub end_time: f64,
    pub series: Vec<SamplePoint>,
}

impl MetricsReport {
    pub fn blocking_probability(&self) -> Result<f64, MetricsError> {
        blocking_probability(self.blocked, self.offered)
    }
}

/// Identifies a run inside a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMeta {
    pub scenario: String,
    pub router: String,
    pub seed: u64,
    /// Per-session payload rate, Mb/s.
    pub rate: f64,
    pub sources: u32,
}

impl RunMeta {
    /// File-name-safe run identifier.
    pub fn run_id(&self) -> String {
        format!(
            "{}_{}_rate{}_src{}_seed{}",
            self.scenario, self.router, self.rate, self.sources, self.seed
        )
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.' {
                c
            } else {
                '-'
            }
        })
        .collect()
    }
}

pub const RUN_COLUMNS: [&str; 20] = [
    "scenario",
    "router",
    "seed",
    "rate",
    "sources",
    "blocking_probability",
    "packets_received",
    "mean_delay",
    "mean_utilization",
    "offered",
    "accepted",
    "blocked",
    "completed",
    "restored",
    "dropped",
    "mean_setup_delay",
    "probes_sent",
    "probe_acks",
    "probe_nacks",
    "end_time",
];

pub const SERIES_COLUMNS: [&str; 6] = [
    "time",
    "blocking_probability",
    "cumulative_packets",
    "utilization",
    "mean_delay",
    "probes_sent",
];

/// The scalar part of a run, as it appears in one summary CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub meta: RunMeta,
    pub report: MetricsReport,
}

impl RunRow {
    fn record(&self) -> Vec<String> {
        let (m, r) = (&self.meta, &self.report);
        vec![
            m.scenario.clone(),
            m.router.clone(),
            m.seed.to_string(),
            m.rate.to_string(),
            m.sources.to_string(),
            r.blocking_probability.to_string(),
            r.packets_received.to_string(),
            r.mean_delay.to_string(),
            r.mean_utilization.to_string(),
            r.offered.to_string(),
            r.accepted.to_string(),
            r.blocked.to_string(),
            r.completed.to_string(),
            r.restored.to_string(),
            r.dropped.to_string(),
            r.mean_setup_delay.to_string(),
            r.probes_sent.to_string(),
            r.probe_acks.to_string(),
            r.probe_nacks.to_string(),
            r.end_time.to_string(),
        ]
    }

    fn from_record(rec: &csv::StringRecord) -> Result<Self, MetricsError> {
        if rec.len() != RUN_COLUMNS.len() {
            return Err(MetricsError::Malformed(format!(
                "expected {} fields, found {}",
                RUN_COLUMNS.len(),
                rec.len()
            )));
        }
        let f = |i: usize| -> Result<f64, MetricsError> {
            rec[i]
                .parse()
                .map_err(|_| MetricsError::Malformed(format!("{}: `{}`", RUN_COLUMNS[i], &rec[i])))
        };
        let u = |i: usize| -> Result<u64, MetricsError> {
            rec[i]
                .parse()
                .map_err(|_| MetricsError::Malformed(format!("{}: `{}`", RUN_COLUMNS[i], &rec[i])))
        };
        let meta = RunMeta {
            scenario: rec[0].to_string(),
            router: rec[1].to_string(),
            seed: u(2)?,
            rate: f(3)?,
            sources: u(4)? as u32,
        };
        let report = MetricsReport {
            blocking_probability: f(5)?,
            packets_received: u(6)?,
            mean_delay: f(7)?,
            mean_utilization: f(8)?,
            offered: u(9)?,
            accepted: u(10)?,
            blocked: u(11)?,
            completed: u(12)?,
            restored: u(13)?,
            dropped: u(14)?,
            mean_setup_delay: f(15)?,
            probes_sent: u(16)?,
            probe_acks: u(17)?,
            probe_nacks: u(18)?,
            end_time: f(19)?,
            ..MetricsReport::default()
        };
        Ok(Self { meta, report })
    }
}

/// Writes the header and one row per run.
pub fn write_runs<W: io::Write>(rows: &[RunRow], out: W) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RUN_COLUMNS)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a run summary written by [`write_runs`]. Time series and the
/// still-active count are not part of the summary and come back empty.
pub fn read_runs<R: io::Read>(input: R) -> Result<Vec<RunRow>, MetricsError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(RUN_COLUMNS.iter().copied()) {
        return Err(MetricsError::Malformed("unexpected header".into()));
    }
    r.records().map(|rec| RunRow::from_record(&rec?)).collect()
}

pub fn write_series<W: io::Write>(series: &[SamplePoint], out: W) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SERIES_COLUMNS)?;
    for p in series {
        w.write_record([
            p.time.to_string(),
            p.blocking_probability.to_string(),
            p.cumulative_packets.to_string(),
            p.utilization.to_string(),
            p.mean_delay.to_string(),
            p.probes_sent.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_series<R: io::Read>(input: R) -> Result<Vec<SamplePoint>, MetricsError> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let bad =
            |i: usize| MetricsError::Malformed(format!("{}: `{}`", SERIES_COLUMNS[i], &rec[i]));
        if rec.len() != SERIES_COLUMNS.len() {
            return Err(MetricsError::Malformed("wrong field count".into()));
        }
        out.push(SamplePoint {
            time: rec[0].parse().map_err(|_| bad(0))?,
            blocking_probability: rec[1].parse().map_err(|_| bad(1))?,
            cumulative_packets: rec[2].parse().map_err(|_| bad(2))?,
            utilization: rec[3].parse().map_err(|_| bad(3))?,
            mean_delay: rec[4].parse().map_err(|_| bad(4))?,
            probes_sent: rec[5].parse().map_err(|_| bad(5))?,
        });
    }
    Ok(out)
}
