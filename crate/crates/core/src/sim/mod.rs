//! Deterministic discrete-event simulation of one scenario run.
//!
//! Arrivals establish primaries; established connections probe their
//! link-disjoint candidates every update interval and keep the best-ranked
//! ones as backups. Link failures reroute every connection crossing the dead
//! link onto its first usable backup, then onto a fresh route, and drop it
//! when neither exists.

pub mod event;
pub mod traffic;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::metrics::{packets_for, MetricsReport, SamplePoint};
use crate::probing::{
    candidate_paths, probe_outcome, rank_and_select, reroute, static_ranking, BlockingEstimate,
    CandidateSet, ProbeOutcome, ProbePolicy, ProbeWindow, RankedBackup, RerouteOutcome,
};
use crate::routing::{
    ConversionMode, CostModel, CostParams, Lightpath, Path, RouteOutcome, Router,
};
use crate::topology::{Direction, LightpathId, LinkId, NodeId, Topology, WavelengthIndex};

pub use event::{ConnectionId, Event, EventKind, EventQueue};
pub use traffic::{generate_arrivals, random_failures, Demand, LinkEvent, TrafficModel};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// Which routing scheme a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RouterKind {
    /// Threshold load-balanced primaries with probe-ranked backups.
    Rftr,
    /// Unit link costs with backups in static hop-count order, no probing.
    Baseline,
}

impl RouterKind {
    pub fn name(self) -> &'static str {
        match self {
            RouterKind::Rftr => "rftr",
            RouterKind::Baseline => "baseline",
        }
    }
}

impl fmt::Display for RouterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RouterKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rftr" => Ok(RouterKind::Rftr),
            "baseline" | "baseline-shortest-hop" => Ok(RouterKind::Baseline),
            other => Err(format!(
                "unknown router `{other}` (expected rftr or baseline)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub topology: Topology,
    pub router: RouterKind,
    pub cost: CostParams,
    pub probe: ProbePolicy,
    pub traffic: TrafficModel,
    pub conversion: ConversionMode,
    /// Seconds per wavelength change.
    pub conversion_time: f64,
    pub failures: Vec<LinkEvent>,
    pub repairs: Vec<LinkEvent>,
    /// Demands injected on top of the generated traffic.
    pub scripted: Vec<Demand>,
    /// Generated arrivals; may be 0 only when `scripted` is non-empty.
    pub max_requests: usize,
    pub sample_interval: f64,
    /// Candidate backups computed per connection (k).
    pub candidates: usize,
    /// Backups retained after ranking (m).
    pub backups: usize,
    pub seed: u64,
}

impl SimConfig {
    /// Default parameters over `topology`.
    pub fn new(topology: Topology) -> Self {
        Self {
            topology,
            router: RouterKind::Rftr,
            cost: CostParams::default(),
            probe: ProbePolicy::default(),
            traffic: TrafficModel::default(),
            conversion: ConversionMode::NoConversion,
            conversion_time: 0.024,
            failures: Vec::new(),
            repairs: Vec::new(),
            scripted: Vec::new(),
            max_requests: 50,
            sample_interval: 0.5,
            candidates: 3,
            backups: 3,
            seed: 1,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_requests == 0 && self.scripted.is_empty() {
            return Err(invalid("max_requests must be at least 1"));
        }
        if !(self.sample_interval > 0.0 && self.sample_interval.is_finite()) {
            return Err(invalid("sample_interval must be positive"));
        }
        if !(self.conversion_time >= 0.0 && self.conversion_time.is_finite()) {
            return Err(invalid("conversion_time must be non-negative"));
        }
        if self.topology.node_count() < 2 {
            return Err(invalid("topology needs at least two nodes"));
        }
        self.traffic.validate().map_err(ConfigError::Invalid)?;
        for (what, list) in [("failure", &self.failures), ("repair", &self.repairs)] {
            for e in list {
                if e.link.0 >= self.topology.link_count() {
                    return Err(invalid(format!("{what} names unknown link {}", e.link)));
                }
                if !(e.time >= 0.0 && e.time.is_finite()) {
                    return Err(invalid(format!(
                        "{what} time {} must be non-negative",
                        e.time
                    )));
                }
            }
        }
        for d in &self.scripted {
            if !self.topology.contains(d.src) || !self.topology.contains(d.dst) || d.src == d.dst {
                return Err(invalid(format!(
                    "scripted demand {} -> {} needs two distinct existing nodes",
                    d.src, d.dst
                )));
            }
            if !(d.time >= 0.0 && d.time.is_finite() && d.holding > 0.0 && d.holding.is_finite()) {
                return Err(invalid(
                    "scripted demand times must be non-negative and holding positive",
                ));
            }
        }
        Ok(())
    }

    fn router(&self) -> Router {
        let cost = match self.router {
            RouterKind::Rftr => CostModel::LoadBalanced(self.cost),
            RouterKind::Baseline => CostModel::HopCount,
        };
        Router::new(cost, self.conversion, self.conversion_time)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConnectionState {
    Active,
    Blocked,
    Restored,
    Dropped,
    Completed,
}

impl ConnectionState {
    /// Holding channels and still in service.
    pub fn is_live(self) -> bool {
        matches!(self, ConnectionState::Active | ConnectionState::Restored)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Segment {
    start: f64,
    delay: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    pub id: ConnectionId,
    pub src: NodeId,
    pub dst: NodeId,
    pub arrival: f64,
    pub holding: f64,
    pub state: ConnectionState,
    pub primary: Option<Lightpath>,
    pub current: Option<Lightpath>,
    pub candidates: Vec<Path>,
    /// Most recent completed ranking.
    pub backups: Vec<RankedBackup>,
    /// Estimates behind `backups`, empty before the first window closes.
    pub estimates: Vec<BlockingEstimate>,
    pub setup_delay: f64,
    /// When a drop cut the session short.
    pub dropped_at: Option<f64>,
    pub restorations: u32,
    /// Probes actually transmitted, per candidate.
    pub probes_sent: Vec<u64>,
    /// Closed probe windows.
    pub probe_rounds: u32,
    windows: Vec<ProbeWindow>,
    segments: Vec<Segment>,
}

impl Connection {
    pub fn accepted(&self) -> bool {
        self.primary.is_some()
    }

    fn session_end(&self) -> f64 {
        self.dropped_at.unwrap_or(self.arrival + self.holding)
    }

    /// Seconds of payload carried by time `t`.
    pub fn carried_until(&self, t: f64) -> f64 {
        if !self.accepted() {
            return 0.0;
        }
        (t.min(self.session_end()) - self.arrival).max(0.0)
    }

    /// `(sum of delay x carried seconds, carried seconds)` by time `t`.
    fn delay_weight_until(&self, t: f64) -> (f64, f64) {
        let stop = t.min(self.session_end());
        let mut weighted = 0.0;
        let mut carried = 0.0;
        for (i, seg) in self.segments.iter().enumerate() {
            let end = self
                .segments
                .get(i + 1)
                .map_or(stop, |next| next.start.min(stop));
            let d = (end - seg.start).max(0.0);
            weighted += seg.delay * d;
            carried += d;
        }
        (weighted, carried)
    }

    /// End-to-end delay of whatever path carried the session at time `t`.
    pub fn delay_at(&self, t: f64) -> Option<f64> {
        if t < self.arrival || t >= self.session_end() {
            return None;
        }
        self.segments
            .iter()
            .rev()
            .find(|s| s.start <= t)
            .map(|s| s.delay)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Counters {
    offered: u64,
    blocked: u64,
    completed: u64,
    restored: u64,
    dropped: u64,
    probes_sent: u64,
    probe_acks: u64,
    probe_nacks: u64,
}

/// One run's mutable state. Drive it with [`Simulation::step`] to observe
/// every event, or call [`Simulation::run`].
#[derive(Debug)]
pub struct Simulation {
    config: SimConfig,
    router: Router,
    topo: Topology,
    queue: EventQueue,
    connections: Vec<Connection>,
    next_lightpath: u64,
    now: f64,
    ticks: u64,
    counters: Counters,
    series: Vec<SamplePoint>,
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let mut queue = EventQueue::new();
        let mut demands = generate_arrivals(
            &config.traffic,
            config.topology.node_count(),
            config.max_requests,
            config.seed,
        );
        demands.extend(config.scripted.iter().copied());
        demands.sort_by(|a, b| a.time.total_cmp(&b.time));
        for d in demands {
            queue.push(d.time, EventKind::Arrival(d));
        }
        for f in &config.failures {
            queue.push(f.time, EventKind::LinkFailure(f.link));
        }
        for r in &config.repairs {
            queue.push(r.time, EventKind::LinkRepair(r.link));
        }
        queue.push(config.sample_interval, EventKind::SampleTick);
        Ok(Self {
            router: config.router(),
            topo: config.topology.clone(),
            config,
            queue,
            connections: Vec::new(),
            next_lightpath: 0,
            now: 0.0,
            ticks: 1,
            counters: Counters::default(),
            series: Vec::new(),
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn connections(&self) -> &[Connection] {
        &self.connections
    }

    pub fn connection(&self, id: ConnectionId) -> Option<&Connection> {
        self.connections.get(id.0)
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn is_finished(&self) -> bool {
        self.queue.is_empty()
    }

    /// Processes the next event and returns it, or `None` once drained.
    pub fn step(&mut self) -> Option<Event> {
        let event = self.queue.pop()?;
        debug_assert!(event.time >= self.now, "clock went backwards");
        self.now = event.time;
        match &event.kind {
            EventKind::Arrival(d) => self.handle_arrival(*d),
            EventKind::Departure(c) => self.handle_departure(*c),
            EventKind::ProbeRound(c) => self.handle_probe_round(*c),
            EventKind::ProbeSend { conn, path, seq } => self.handle_probe_send(*conn, *path, *seq),
            EventKind::FeedbackArrive {
                conn,
                path,
                seq,
                outcome,
            } => {
                if let Some(c) = self.connections.get_mut(conn.0) {
                    if c.state.is_live() {
                        if let Some(w) = c.windows.get_mut(*path) {
                            // late feedback belongs to a closed window and is dropped
                            if w.record_feedback(*seq, *outcome).is_ok() {
                                match outcome {
                                    ProbeOutcome::Pack => self.counters.probe_acks += 1,
                                    ProbeOutcome::Nack => self.counters.probe_nacks += 1,
                                }
                            }
                        }
                    }
                }
            }
            EventKind::LinkFailure(l) => self.handle_failure(*l),
            EventKind::LinkRepair(l) => self.topo.set_link_state(*l, true),
            EventKind::SampleTick => self.handle_tick(),
        }
        Some(event)
    }

    /// Runs to completion.
    pub fn run(mut self) -> MetricsReport {
        while self.step().is_some() {}
        self.report()
    }

    fn next_lightpath_id(&mut self) -> LightpathId {
        let id = LightpathId(self.next_lightpath);
        self.next_lightpath += 1;
        id
    }

    fn handle_arrival(&mut self, d: Demand) {
        self.counters.offered += 1;
        let id = ConnectionId(self.connections.len());
        let lp_id = self.next_lightpath_id();
        let result = self
            .router
            .establish_primary(&mut self.topo, d.src, d.dst, lp_id)
            .expect("demand endpoints are validated");
        let mut conn = Connection {
            id,
            src: d.src,
            dst: d.dst,
            arrival: self.now,
            holding: d.holding,
            state: ConnectionState::Blocked,
            primary: None,
            current: None,
            candidates: Vec::new(),
            backups: Vec::new(),
            estimates: Vec::new(),
            setup_delay: 0.0,
            dropped_at: None,
            restorations: 0,
            probes_sent: Vec::new(),
            probe_rounds: 0,
            windows: Vec::new(),
            segments: Vec::new(),
        };
        let RouteOutcome::Established(lp) = result.outcome else {
            self.counters.blocked += 1;
            self.connections.push(conn);
            return;
        };
        let cands = candidate_paths(&self.topo, d.src, d.dst, &lp.path, self.config.candidates);
        conn.backups = match self.config.router {
            RouterKind::Rftr => rank_and_select(&[], &cands, self.config.backups),
            RouterKind::Baseline => static_ranking(&cands, self.config.backups),
        };
        conn.state = ConnectionState::Active;
        conn.setup_delay = result.setup_delay;
        conn.segments.push(Segment {
            start: self.now,
            delay: lp.end_to_end_delay(&self.topo, self.router.conversion_time),
        });
        conn.probes_sent = vec![0; cands.len()];
        conn.candidates = cands.paths;
        conn.primary = Some(lp.clone());
        conn.current = Some(lp);
        self.queue
            .push(self.now + d.holding, EventKind::Departure(id));
        let probing = self.config.router == RouterKind::Rftr && !conn.candidates.is_empty();
        self.connections.push(conn);
        if probing {
            self.open_probe_round(id);
        }
    }

    fn open_probe_round(&mut self, id: ConnectionId) {
        let now = self.now;
        let rate = self.config.traffic.aggregate_rate();
        let policy = self.config.probe;
        let conn = &mut self.connections[id.0];
        if conn.windows.is_empty() {
            conn.windows = (0..conn.candidates.len())
                .map(|i| ProbeWindow::open(i, now))
                .collect();
        } else {
            conn.windows = conn.windows.iter().map(|w| w.successor(now)).collect();
        }
        for w in &mut conn.windows {
            for p in w.emit_probes(&policy, rate, now) {
                self.queue.push(
                    p.time,
                    EventKind::ProbeSend {
                        conn: id,
                        path: p.path,
                        seq: p.seq,
                    },
                );
            }
        }
        self.queue
            .push(now + policy.update_interval(), EventKind::ProbeRound(id));
    }

    fn handle_probe_round(&mut self, id: ConnectionId) {
        let m = self.config.backups;
        let conn = &mut self.connections[id.0];
        if !conn.state.is_live() {
            return;
        }
        let estimates: Vec<BlockingEstimate> = conn
            .windows
            .iter()
            .map(|w| w.blocking_probability())
            .collect();
        let set = CandidateSet {
            src: conn.src,
            dst: conn.dst,
            paths: conn.candidates.clone(),
        };
        conn.backups = rank_and_select(&estimates, &set, m);
        conn.estimates = estimates;
        conn.probe_rounds += 1;
        self.open_probe_round(id);
    }

    fn handle_probe_send(&mut self, id: ConnectionId, path: usize, seq: u64) {
        let conn = &mut self.connections[id.0];
        if !conn.state.is_live() {
            return;
        }
        let route = &conn.candidates[path];
        let outcome = probe_outcome(&self.topo, route, self.config.conversion);
        let rtt = 2.0 * route.propagation_delay(&self.topo);
        conn.probes_sent[path] += 1;
        self.counters.probes_sent += 1;
        self.queue.push(
            self.now + rtt,
            EventKind::FeedbackArrive {
                conn: id,
                path,
                seq,
                outcome,
            },
        );
    }

    fn handle_departure(&mut self, id: ConnectionId) {
        let conn = &mut self.connections[id.0];
        if !conn.state.is_live() {
            // the session was dropped by a failure
            return;
        }
        if let Some(lp) = conn.current.take() {
            lp.release(&mut self.topo)
                .expect("a live lightpath owns its channels");
        }
        conn.state = ConnectionState::Completed;
        self.counters.completed += 1;
    }

    fn handle_failure(&mut self, link: LinkId) {
        if !self.topo.link(link).is_up() {
            return;
        }
        self.topo.set_link_state(link, false);
        let affected: Vec<ConnectionId> = self
            .connections
            .iter()
            .filter(|c| {
                c.state.is_live() && c.current.as_ref().is_some_and(|lp| lp.path.uses_link(link))
            })
            .map(|c| c.id)
            .collect();
        for &id in &affected {
            let lp = self.connections[id.0]
                .current
                .take()
                .expect("affected connections are live");
            lp.release(&mut self.topo)
                .expect("a live lightpath owns its channels");
        }
        for id in affected {
            let lp_id = self.next_lightpath_id();
            let conn = &self.connections[id.0];
            let outcome = reroute(
                &mut self.topo,
                &self.router,
                conn.src,
                conn.dst,
                &conn.backups,
                lp_id,
            );
            let conn = &mut self.connections[id.0];
            match outcome {
                RerouteOutcome::Restored { lightpath, .. } => {
                    conn.segments.push(Segment {
                        start: self.now,
                        delay: lightpath.end_to_end_delay(&self.topo, self.router.conversion_time),
                    });
                    conn.current = Some(lightpath);
                    conn.state = ConnectionState::Restored;
                    conn.restorations += 1;
                    self.counters.restored += 1;
                }
                RerouteOutcome::Dropped => {
                    conn.state = ConnectionState::Dropped;
                    conn.dropped_at = Some(self.now);
                    self.counters.dropped += 1;
                }
            }
        }
    }

    fn handle_tick(&mut self) {
        let point = self.sample(self.now);
        self.series.push(point);
        if self.queue.has_work() {
            self.ticks += 1;
            self.queue.push(
                self.ticks as f64 * self.config.sample_interval,
                EventKind::SampleTick,
            );
        }
    }

    fn packets_until(&self, t: f64) -> u64 {
        self.connections
            .iter()
            .map(|c| packets_for(c.carried_until(t), &self.config.traffic))
            .sum()
    }

    fn mean_delay_until(&self, t: f64) -> f64 {
        let (w, d) = self
            .connections
            .iter()
            .map(|c| c.delay_weight_until(t))
            .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        if d > 0.0 {
            w / d
        } else {
            0.0
        }
    }

    fn sample(&self, t: f64) -> SamplePoint {
        let c = &self.counters;
        SamplePoint {
            time: t,
            blocking_probability: if c.offered == 0 {
                0.0
            } else {
                c.blocked as f64 / c.offered as f64
            },
            cumulative_packets: self.packets_until(t),
            utilization: self.topo.utilization(),
            mean_delay: self.mean_delay_until(t),
            probes_sent: c.probes_sent,
        }
    }

    /// Metrics as of now; final once the queue has drained.
    pub fn report(&self) -> MetricsReport {
        let c = &self.counters;
        let accepted: Vec<&Connection> = self.connections.iter().filter(|c| c.accepted()).collect();
        let mean_setup_delay = if accepted.is_empty() {
            0.0
        } else {
            accepted.iter().map(|c| c.setup_delay).sum::<f64>() / accepted.len() as f64
        };
        let mean_utilization = if self.series.is_empty() {
            0.0
        } else {
            self.series.iter().map(|p| p.utilization).sum::<f64>() / self.series.len() as f64
        };
        MetricsReport {
            offered: c.offered,
            accepted: accepted.len() as u64,
            blocked: c.blocked,
            completed: c.completed,
            restored: c.restored,
            dropped: c.dropped,
            still_active: self
                .connections
                .iter()
                .filter(|c| c.state.is_live())
                .count() as u64,
            blocking_probability: if c.offered == 0 {
                0.0
            } else {
                c.blocked as f64 / c.offered as f64
            },
            packets_received: self.packets_until(f64::INFINITY),
            mean_delay: self.mean_delay_until(f64::INFINITY),
            mean_setup_delay,
            mean_utilization,
            probes_sent: c.probes_sent,
            probe_acks: c.probe_acks,
            probe_nacks: c.probe_nacks,
            end_time: self.now,
            series: self.series.clone(),
        }
    }

    /// Checks the channel-state invariants against the live connections:
    /// every occupied channel belongs to exactly one live lightpath and vice
    /// versa, no live lightpath crosses a down link, blocked connections own
    /// nothing, and continuity holds without conversion.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut expected: HashMap<(LinkId, Direction, WavelengthIndex), LightpathId> =
            HashMap::new();
        for c in &self.connections {
            match (c.state.is_live(), &c.current) {
                (true, Some(lp)) => {
                    if lp.hops().len() != lp.wavelengths.len() {
                        return Err(format!("{}: wavelength vector length mismatch", lp.id));
                    }
                    if lp.route().first() != Some(&c.src) || lp.route().last() != Some(&c.dst) {
                        return Err(format!("connection {} carried off its endpoints", c.id.0));
                    }
                    if self.config.conversion == ConversionMode::NoConversion && !lp.is_continuous()
                    {
                        return Err(format!("{} violates wavelength continuity", lp.id));
                    }
                    for (h, w) in lp.hops().iter().zip(&lp.wavelengths) {
                        if !self.topo.link(h.link).is_up() {
                            return Err(format!("{} crosses down link {}", lp.id, h.link));
                        }
                        if expected.insert((h.link, h.dir, *w), lp.id).is_some() {
                            return Err(format!("channel {w} on link {} claimed twice", h.link));
                        }
                    }
                }
                (true, None) => return Err(format!("live connection {} has no lightpath", c.id.0)),
                (false, Some(_)) => {
                    return Err(format!(
                        "finished connection {} still holds a lightpath",
                        c.id.0
                    ))
                }
                (false, None) => {}
            }
        }
        let mut occupied = 0;
        for link in self.topo.links() {
            for (dir, w, owner) in link.occupied() {
                occupied += 1;
                match expected.get(&(link.id(), dir, w)) {
                    Some(&lp) if lp == owner => {}
                    _ => {
                        return Err(format!(
                            "channel {w} on link {} owned by {owner} without a live lightpath",
                            link.id()
                        ))
                    }
                }
            }
        }
        if occupied != expected.len() {
            return Err(format!(
                "{} channels expected occupied, {} are",
                expected.len(),
                occupied
            ));
        }
        Ok(())
    }
}

/// Runs one configuration to completion.
pub fn run(config: SimConfig) -> Result<MetricsReport, ConfigError> {
    Ok(Simulation::new(config)?.run())
}
