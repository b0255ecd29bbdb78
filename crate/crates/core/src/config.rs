//! Scenario files: `key = value` lines with `#` comments. Every key left out
//! takes its default (the reference simulation parameters: 8 wavelengths,
//! 10 ms links, 0.024 s conversion, 0.5 s sampling, 0.5 calls/s, 0.2 s
//! holding, 200-byte packets, 4 sources, 50 requests).

use std::collections::HashSet;
use std::fmt;
use std::path::{Path as FsPath, PathBuf};

use thiserror::Error;

use crate::probing::ProbePolicy;
use crate::routing::{ConversionMode, CostParams};
use crate::sim::{random_failures, Demand, LinkEvent, RouterKind, SimConfig, TrafficModel};
use crate::topology::{LinkId, NodeId, Topology, TopologyError};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("{key}: invalid value `{value}`: {reason}")]
    Value {
        key: &'static str,
        value: String,
        reason: String,
    },
    #[error("{key}: {value} out of range, expected {expected}")]
    Range {
        key: &'static str,
        value: String,
        expected: &'static str,
    },
    #[error("topology: {0}")]
    Topology(#[from] TopologyError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Sweep {
    #[default]
    None,
    /// Per-session payload rates, Mb/s.
    Rate(Vec<f64>),
    /// Number of traffic sources.
    Sources(Vec<u32>),
}

impl Sweep {
    pub fn name(&self) -> &'static str {
        match self {
            Sweep::None => "none",
            Sweep::Rate(_) => "rate",
            Sweep::Sources(_) => "sources",
        }
    }
}

/// Every tunable of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub wavelengths: usize,
    pub link_delay_ms: f64,
    pub conversion: ConversionMode,
    pub conversion_time: f64,
    /// Accepted and reported; has no effect on the model.
    pub conversion_factor: f64,
    /// Accepted and reported; has no effect on the model.
    pub conversion_distance: f64,
    pub sample_interval: f64,
    pub arrival_rate: f64,
    pub holding_time: f64,
    pub packet_size: u32,
    pub session_traffics: u32,
    pub max_requests: usize,
    pub data_rate_mbps: f64,
    pub load_threshold: f64,
    pub probes_per_path: u32,
    pub probe_interval: f64,
    pub adaptive_scale: f64,
    pub candidate_paths: usize,
    /// Defaults to `candidate_paths`.
    pub backup_paths: Option<usize>,
    pub failures: Vec<LinkEvent>,
    pub repairs: Vec<LinkEvent>,
    pub random_failures: usize,
    pub demands: Vec<Demand>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            wavelengths: 8,
            link_delay_ms: 10.0,
            conversion: ConversionMode::NoConversion,
            conversion_time: 0.024,
            conversion_factor: 1.0,
            conversion_distance: 8.0,
            sample_interval: 0.5,
            arrival_rate: 0.5,
            holding_time: 0.2,
            packet_size: 200,
            session_traffics: 4,
            max_requests: 50,
            data_rate_mbps: 2.0,
            load_threshold: 0.3,
            probes_per_path: 20,
            probe_interval: 0.5,
            adaptive_scale: 1.0,
            candidate_paths: 3,
            backup_paths: None,
            failures: Vec::new(),
            repairs: Vec::new(),
            random_failures: 0,
            demands: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub routers: Vec<RouterKind>,
    pub settings: Settings,
    pub sweep: Sweep,
    pub seeds: Vec<u64>,
    /// Topology file, relative paths resolved against the config file.
    pub topology: Option<PathBuf>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            routers: vec![RouterKind::Rftr],
            settings: Settings::default(),
            sweep: Sweep::None,
            seeds: vec![1],
            topology: None,
        }
    }
}

/// One point on the sweep axis (or the single point of an unswept scenario).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub rate_mbps: f64,
    pub sources: u32,
    /// Swept value; `None` without a sweep.
    pub value: Option<f64>,
}

const KEYS: &[&str] = &[
    "name",
    "router",
    "routers",
    "seed",
    "seeds",
    "topology",
    "sweep",
    "sweep_values",
    "wavelengths",
    "link_delay_ms",
    "conversion",
    "conversion_time",
    "conversion_factor",
    "conversion_distance",
    "sample_interval",
    "arrival_rate",
    "holding_time",
    "packet_size",
    "session_traffics",
    "max_requests",
    "data_rate_mbps",
    "load_threshold",
    "probes_per_path",
    "probe_interval",
    "adaptive_scale",
    "candidate_paths",
    "backup_paths",
    "failures",
    "repairs",
    "random_failures",
    "demands",
];

fn value_err(key: &'static str, value: &str, reason: impl fmt::Display) -> ScenarioError {
    ScenarioError::Value {
        key,
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

fn range_err(key: &'static str, value: impl fmt::Display, expected: &'static str) -> ScenarioError {
    ScenarioError::Range {
        key,
        value: value.to_string(),
        expected,
    }
}

fn parse_num<T: std::str::FromStr>(key: &'static str, v: &str) -> Result<T, ScenarioError>
where
    T::Err: fmt::Display,
{
    v.trim().parse::<T>().map_err(|e| value_err(key, v, e))
}

fn positive(key: &'static str, v: &str) -> Result<f64, ScenarioError> {
    let x: f64 = parse_num(key, v)?;
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(range_err(key, x, "a positive number"))
    }
}

fn non_negative(key: &'static str, v: &str) -> Result<f64, ScenarioError> {
    let x: f64 = parse_num(key, v)?;
    if x >= 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(range_err(key, x, "a non-negative number"))
    }
}

fn at_least_one<T>(key: &'static str, v: &str) -> Result<T, ScenarioError>
where
    T: std::str::FromStr + PartialOrd + From<u8> + fmt::Display,
    T::Err: fmt::Display,
{
    let x: T = parse_num(key, v)?;
    if x >= T::from(1u8) {
        Ok(x)
    } else {
        Err(range_err(key, x, "an integer of at least 1"))
    }
}

fn list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn link_events(key: &'static str, v: &str) -> Result<Vec<LinkEvent>, ScenarioError> {
    list(v)
        .map(|item| {
            let (t, l) = item
                .split_once(':')
                .ok_or_else(|| value_err(key, item, "expected `<time>:<link>`"))?;
            Ok(LinkEvent {
                time: non_negative(key, t)?,
                link: LinkId(parse_num(key, l)?),
            })
        })
        .collect()
}

fn demands(v: &str) -> Result<Vec<Demand>, ScenarioError> {
    const KEY: &str = "demands";
    list(v)
        .map(|item| {
            let parts: Vec<&str> = item.split(':').collect();
            let [t, s, d, h] = parts[..] else {
                return Err(value_err(
                    KEY,
                    item,
                    "expected `<time>:<src>:<dst>:<holding>`",
                ));
            };
            Ok(Demand {
                time: non_negative(KEY, t)?,
                src: NodeId(parse_num(KEY, s)?),
                dst: NodeId(parse_num(KEY, d)?),
                holding: positive(KEY, h)?,
            })
        })
        .collect()
}

fn routers(v: &str) -> Result<Vec<RouterKind>, ScenarioError> {
    let out: Vec<RouterKind> = list(v)
        .map(|r| r.parse().map_err(|e: String| value_err("routers", r, e)))
        .collect::<Result<_, _>>()?;
    if out.is_empty() {
        return Err(value_err("routers", v, "at least one router is required"));
    }
    Ok(out)
}

fn strictly_increasing<T: PartialOrd>(values: &[T]) -> bool {
    values.windows(2).all(|w| w[0] < w[1])
}

/// Parses a scenario document. Unknown or repeated keys are rejected.
pub fn parse_config(doc: &str) -> Result<Scenario, ScenarioError> {
    let mut sc = Scenario::default();
    let mut seen = HashSet::new();
    let mut sweep_kind: Option<String> = None;
    let mut sweep_values: Option<String> = None;

    for (idx, raw) in doc.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or(ScenarioError::Syntax { line })?;
        let (key, value) = (key.trim(), value.trim());
        let Some(&key) = KEYS.iter().find(|k| **k == key) else {
            return Err(ScenarioError::UnknownKey {
                line,
                key: key.to_string(),
            });
        };
        if !seen.insert(key) {
            return Err(ScenarioError::DuplicateKey {
                line,
                key: key.to_string(),
            });
        }
        let s = &mut sc.settings;
        match key {
            "name" => {
                if value.is_empty() {
                    return Err(value_err("name", value, "must not be empty"));
                }
                sc.name = value.to_string();
            }
            "router" | "routers" => sc.routers = routers(value)?,
            "seed" | "seeds" => {
                sc.seeds = list(value)
                    .map(|x| parse_num::<u64>("seeds", x))
                    .collect::<Result<_, _>>()?;
                if sc.seeds.is_empty() {
                    return Err(value_err("seeds", value, "at least one seed is required"));
                }
            }
            "topology" => sc.topology = Some(PathBuf::from(value)),
            "sweep" => sweep_kind = Some(value.to_string()),
            "sweep_values" => sweep_values = Some(value.to_string()),
            "wavelengths" => s.wavelengths = at_least_one("wavelengths", value)?,
            "link_delay_ms" => s.link_delay_ms = positive("link_delay_ms", value)?,
            "conversion" => {
                s.conversion = match value {
                    "none" => ConversionMode::NoConversion,
                    "full" => ConversionMode::FullConversion,
                    _ => return Err(value_err("conversion", value, "expected `none` or `full`")),
                }
            }
            "conversion_time" => s.conversion_time = non_negative("conversion_time", value)?,
            "conversion_factor" => s.conversion_factor = non_negative("conversion_factor", value)?,
            "conversion_distance" => {
                s.conversion_distance = non_negative("conversion_distance", value)?
            }
            "sample_interval" => s.sample_interval = positive("sample_interval", value)?,
            "arrival_rate" => s.arrival_rate = positive("arrival_rate", value)?,
            "holding_time" => s.holding_time = positive("holding_time", value)?,
            "packet_size" => s.packet_size = at_least_one("packet_size", value)?,
            "session_traffics" => s.session_traffics = at_least_one("session_traffics", value)?,
            "max_requests" => s.max_requests = at_least_one("max_requests", value)?,
            "data_rate_mbps" => s.data_rate_mbps = positive("data_rate_mbps", value)?,
            "load_threshold" => {
                let lt: f64 = parse_num("load_threshold", value)?;
                CostParams::new(lt)
                    .map_err(|_| range_err("load_threshold", lt, "a value in (0, 1)"))?;
                s.load_threshold = lt;
            }
            "probes_per_path" => s.probes_per_path = at_least_one("probes_per_path", value)?,
            "probe_interval" => s.probe_interval = positive("probe_interval", value)?,
            "adaptive_scale" => s.adaptive_scale = non_negative("adaptive_scale", value)?,
            "candidate_paths" => s.candidate_paths = parse_num("candidate_paths", value)?,
            "backup_paths" => s.backup_paths = Some(parse_num("backup_paths", value)?),
            "failures" => s.failures = link_events("failures", value)?,
            "repairs" => s.repairs = link_events("repairs", value)?,
            "random_failures" => s.random_failures = parse_num("random_failures", value)?,
            "demands" => s.demands = demands(value)?,
            _ => unreachable!("every key in KEYS is handled"),
        }
    }

    sc.sweep = match (sweep_kind.as_deref(), sweep_values) {
        (None | Some("none"), None) => Sweep::None,
        (None | Some("none"), Some(v)) => {
            return Err(value_err(
                "sweep_values",
                &v,
                "given without a `sweep` kind",
            ))
        }
        (Some(kind @ ("rate" | "sources")), values) => {
            let values = values.ok_or_else(|| value_err("sweep", kind, "needs `sweep_values`"))?;
            let sweep = if kind == "rate" {
                let v: Vec<f64> = list(&values)
                    .map(|x| positive("sweep_values", x))
                    .collect::<Result<_, _>>()?;
                if v.is_empty() || !strictly_increasing(&v) {
                    return Err(value_err(
                        "sweep_values",
                        &values,
                        "must be non-empty and strictly increasing",
                    ));
                }
                Sweep::Rate(v)
            } else {
                let v: Vec<u32> = list(&values)
                    .map(|x| at_least_one("sweep_values", x))
                    .collect::<Result<_, _>>()?;
                if v.is_empty() || !strictly_increasing(&v) {
                    return Err(value_err(
                        "sweep_values",
                        &values,
                        "must be non-empty and strictly increasing",
                    ));
                }
                Sweep::Sources(v)
            };
            sweep
        }
        (Some(other), _) => {
            return Err(value_err(
                "sweep",
                other,
                "expected `none`, `rate` or `sources`",
            ))
        }
    };
    Ok(sc)
}

impl Scenario {
    pub fn points(&self) -> Vec<SweepPoint> {
        let s = &self.settings;
        match &self.sweep {
            Sweep::None => vec![SweepPoint {
                rate_mbps: s.data_rate_mbps,
                sources: s.session_traffics,
                value: None,
            }],
            Sweep::Rate(v) => v
                .iter()
                .map(|&r| SweepPoint {
                    rate_mbps: r,
                    sources: s.session_traffics,
                    value: Some(r),
                })
                .collect(),
            Sweep::Sources(v) => v
                .iter()
                .map(|&n| SweepPoint {
                    rate_mbps: s.data_rate_mbps,
                    sources: n,
                    value: Some(n as f64),
                })
                .collect(),
        }
    }

    /// The built-in mesh sized by `wavelengths` and `link_delay_ms`.
    pub fn default_topology(&self) -> Topology {
        Topology::default_mesh(
            self.settings.wavelengths,
            self.settings.link_delay_ms / 1000.0,
        )
    }

    /// Loads the configured topology file (relative to `base`), or the
    /// built-in mesh when none is configured.
    pub fn load_topology(&self, base: Option<&FsPath>) -> Result<Topology, ScenarioError> {
        match &self.topology {
            None => Ok(self.default_topology()),
            Some(p) => {
                let path = match base {
                    Some(b) if p.is_relative() => b.join(p),
                    _ => p.clone(),
                };
                let text = std::fs::read_to_string(&path)
                    .map_err(|source| ScenarioError::Io { path, source })?;
                Ok(Topology::parse(&text)?)
            }
        }
    }

    pub fn sim_config(
        &self,
        topology: &Topology,
        router: RouterKind,
        point: SweepPoint,
        seed: u64,
    ) -> SimConfig {
        let s = &self.settings;
        let traffic = TrafficModel {
            arrival_rate: s.arrival_rate,
            mean_holding: s.holding_time,
            num_sources: point.sources,
            packet_size: s.packet_size,
            data_rate: point.rate_mbps * 1e6,
        };
        let mut failures = s.failures.clone();
        if s.random_failures > 0 {
            let horizon = s.max_requests as f64 / traffic.aggregate_rate();
            failures.extend(random_failures(
                topology.link_count(),
                horizon,
                s.random_failures,
                seed,
            ));
            failures.sort_by(|a, b| a.time.total_cmp(&b.time));
        }
        SimConfig {
            topology: topology.clone(),
            router,
            cost: CostParams::new(s.load_threshold).expect("validated when parsed"),
            probe: ProbePolicy::new(s.probes_per_path, s.probe_interval, s.adaptive_scale)
                .expect("validated when parsed"),
            traffic,
            conversion: s.conversion,
            conversion_time: s.conversion_time,
            failures,
            repairs: s.repairs.clone(),
            scripted: s.demands.clone(),
            max_requests: s.max_requests,
            sample_interval: s.sample_interval,
            candidates: s.candidate_paths,
            backups: s.backup_paths.unwrap_or(s.candidate_paths),
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

/// Static checks of a scenario against its topology; never runs anything.
pub fn validate(scenario: &Scenario, topology: &Topology) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut error = |m: String| {
        out.push(Diagnostic {
            severity: Severity::Error,
            message: m,
        })
    };
    if topology.node_count() < 2 {
        error("topology needs at least two nodes".into());
    }
    for e in &scenario.settings.failures {
        if e.link.0 >= topology.link_count() {
            error(format!("failure schedule: unknown link {}", e.link));
        }
    }
    for e in &scenario.settings.repairs {
        if e.link.0 >= topology.link_count() {
            error(format!("repair schedule: unknown link {}", e.link));
        }
    }
    for d in &scenario.settings.demands {
        for n in [d.src, d.dst] {
            if !topology.contains(n) {
                error(format!("demand at {}: unknown node {n}", d.time));
            }
        }
        if d.src == d.dst {
            error(format!("demand at {}: source equals destination", d.time));
        }
    }
    if !topology.is_connected() {
        out.push(Diagnostic {
            severity: Severity::Warning,
            message: "topology is disconnected; demands between components always block".into(),
        });
    }
    if scenario.settings.backup_paths.unwrap_or(0) > scenario.settings.candidate_paths {
        out.push(Diagnostic {
            severity: Severity::Warning,
            message: "backup_paths exceeds candidate_paths; only candidate_paths backups can exist"
                .into(),
        });
    }
    out
}

pub fn has_errors(diagnostics: &[Diagnostic]) -> bool {
    diagnostics.iter().any(|d| d.severity == Severity::Error)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let sc = parse_config("").unwrap();
        assert_eq!(sc, Scenario::default());
        let s = &sc.settings;
        assert_eq!(s.wavelengths, 8);
        assert_eq!(s.link_delay_ms, 10.0);
        assert_eq!(s.conversion_time, 0.024);
        assert_eq!(s.sample_interval, 0.5);
        assert_eq!(s.arrival_rate, 0.5);
        assert_eq!(s.holding_time, 0.2);
        assert_eq!(s.packet_size, 200);
        assert_eq!(s.session_traffics, 4);
        assert_eq!(s.max_requests, 50);
    }

    #[test]
    fn single_override() {
        let sc = parse_config("# more colours\nwavelengths = 16\n").unwrap();
        let expected = Scenario {
            settings: Settings {
                wavelengths: 16,
                ..Settings::default()
            },
            ..Scenario::default()
        };
        assert_eq!(sc, expected);
    }

    #[test]
    fn threshold_out_of_range() {
        let err = parse_config("load_threshold = 1.5").unwrap_err();
        assert!(
            matches!(
                err,
                ScenarioError::Range {
                    key: "load_threshold",
                    ..
                }
            ),
            "{err}"
        );
        assert!(parse_config("load_threshold = 0").is_err());
    }

    #[test]
    fn rejects_bad_documents() {
        for (doc, needle) in [
            ("colour = blue", "unknown key `colour`"),
            ("wavelengths", "expected `key = value`"),
            ("wavelengths = 8\nwavelengths = 9", "duplicate key"),
            ("wavelengths = 0", "out of range"),
            ("arrival_rate = -1", "out of range"),
            ("holding_time = x", "invalid value"),
            ("conversion = partial", "expected `none` or `full`"),
            ("sweep = rate", "needs `sweep_values`"),
            ("sweep = rate\nsweep_values = 4, 2", "strictly increasing"),
            ("sweep = sources\nsweep_values = 0, 1", "out of range"),
            ("sweep = time", "expected `none`"),
            ("sweep_values = 1,2", "without a `sweep`"),
            ("routers = rftr, dpbr", "unknown router"),
            ("failures = 1.0", "expected `<time>:<link>`"),
            ("demands = 1:0:1", "expected `<time>:<src>:<dst>:<holding>`"),
        ] {
            let err = parse_config(doc).unwrap_err().to_string();
            assert!(err.contains(needle), "{doc:?}: {err}");
        }
    }

    #[test]
    fn lists_and_sweeps() {
        let sc = parse_config(
            "name = rate-sweep\nrouters = rftr, baseline\nseeds = 1, 2, 3\n\
             sweep = rate\nsweep_values = 2, 4, 6, 8\nfailures = 3.5:2, 1:0\n\
             demands = 0.5:0:3:10\nconversion = full\n",
        )
        .unwrap();
        assert_eq!(sc.name, "rate-sweep");
        assert_eq!(sc.routers, vec![RouterKind::Rftr, RouterKind::Baseline]);
        assert_eq!(sc.seeds, vec![1, 2, 3]);
        assert_eq!(sc.sweep, Sweep::Rate(vec![2.0, 4.0, 6.0, 8.0]));
        assert_eq!(sc.settings.failures.len(), 2);
        assert_eq!(sc.settings.failures[0].link, LinkId(2));
        assert_eq!(sc.settings.demands[0].dst, NodeId(3));
        assert_eq!(sc.settings.conversion, ConversionMode::FullConversion);
        let pts = sc.points();
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[2].rate_mbps, 6.0);
        assert_eq!(pts[2].sources, 4);
    }

    #[test]
    fn sim_config_mapping() {
        let sc =
            parse_config("sweep = sources\nsweep_values = 1,2,3,4\ncandidate_paths = 2").unwrap();
        let topo = sc.default_topology();
        let pts = sc.points();
        let cfg = sc.sim_config(&topo, RouterKind::Baseline, pts[1], 9);
        assert_eq!(cfg.traffic.num_sources, 2);
        assert_eq!(cfg.traffic.data_rate, 2e6);
        assert_eq!(cfg.backups, 2);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.topology.link_count(), 11);
        cfg.validate().unwrap();
    }

    #[test]
    fn random_failures_follow_the_seed() {
        let sc = parse_config("random_failures = 1").unwrap();
        let topo = sc.default_topology();
        let p = sc.points()[0];
        let a = sc.sim_config(&topo, RouterKind::Rftr, p, 1);
        let b = sc.sim_config(&topo, RouterKind::Rftr, p, 1);
        assert_eq!(a.failures.len(), 1);
        assert_eq!(a.failures, b.failures);
        assert!(a.failures[0].time < 25.0);
    }

    #[test]
    fn validation_diagnostics() {
        let sc = Scenario::default();
        let topo = sc.default_topology();
        assert!(validate(&sc, &topo).is_empty());

        let sc = parse_config("failures = 2:99").unwrap();
        let d = validate(&sc, &topo);
        assert!(has_errors(&d));
        assert!(d[0].message.contains("unknown link 99"));

        let split = Topology::parse("nodes 4\nlink 0 1 10 8\nlink 2 3 10 8").unwrap();
        let d = validate(&Scenario::default(), &split);
        assert!(!has_errors(&d));
        assert_eq!(d[0].severity, Severity::Warning);
    }
}
