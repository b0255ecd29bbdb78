//! Backup path discovery and ranking.
//!
//! For every source-destination pair with an established primary, the source
//! keeps a set of link-disjoint candidate routes and sends sequence-numbered
//! probes down each. The destination answers PACK when the probe got through
//! (the route currently admits a wavelength) and NACK otherwise. Per-window
//! NACK fractions rank the candidates; the best `m` are the backups that a
//! failed connection is rerouted onto.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, VecDeque};

use thiserror::Error;

use crate::routing::{admissible, ConversionMode, Lightpath, Path, Role, RouteOutcome, Router};
use crate::topology::{LightpathId, NodeId, Topology};

#[derive(Debug, Error, PartialEq)]
pub enum ProbeError {
    #[error("sequence number {0} was not emitted in this window")]
    UnknownSequence(u64),
    #[error("feedback for sequence number {0} already recorded")]
    DuplicateFeedback(u64),
    #[error("invalid probe policy: {0}")]
    InvalidPolicy(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub src: NodeId,
    pub dst: NodeId,
    pub paths: Vec<Path>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

/// Up to `k` loop-free `src -> dst` routes sharing no link with `primary`,
/// shortest by hop count first, ties in lexicographic node order.
///
/// Link status is ignored: candidates are structural, and probing is what
/// reveals whether one is currently usable.
pub fn candidate_paths(
    topo: &Topology,
    src: NodeId,
    dst: NodeId,
    primary: &Path,
    k: usize,
) -> CandidateSet {
    let mut allowed = vec![true; topo.link_count()];
    for h in primary.hops() {
        allowed[h.link.0] = false;
    }
    CandidateSet {
        src,
        dst,
        paths: shortest_simple_paths(topo, src, dst, &allowed, k),
    }
}

#[derive(PartialEq, Eq)]
struct Partial {
    bound: usize,
    nodes: Vec<NodeId>,
}

impl PartialOrd for Partial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// min-heap on (bound, nodes)
impl Ord for Partial {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .cmp(&self.bound)
            .then_with(|| other.nodes.cmp(&self.nodes))
    }
}

/// Best-first enumeration of simple paths over `allowed` links in
/// (hop count, node sequence) order. The bound is hops so far plus the
/// unrestricted BFS distance to `dst`, which never overestimates, so complete
/// paths surface in order.
fn shortest_simple_paths(
    topo: &Topology,
    src: NodeId,
    dst: NodeId,
    allowed: &[bool],
    k: usize,
) -> Vec<Path> {
    let mut out = Vec::new();
    if k == 0 || src == dst {
        return out;
    }
    let dist = hop_distances(topo, dst, allowed);
    let Some(d0) = dist[src.0] else {
        return out;
    };
    let mut heap = BinaryHeap::new();
    heap.push(Partial {
        bound: d0,
        nodes: vec![src],
    });
    while let Some(Partial { nodes, .. }) = heap.pop() {
        let here = *nodes.last().expect("non-empty");
        if here == dst {
            out.push(Path::from_nodes(topo, &nodes).expect("enumerated paths are valid"));
            if out.len() == k {
                break;
            }
            continue;
        }
        for (hop, next) in topo.out_hops(here) {
            if !allowed[hop.link.0] || nodes.contains(&next) {
                continue;
            }
            if let Some(d) = dist[next.0] {
                let mut ext = nodes.clone();
                ext.push(next);
                heap.push(Partial {
                    bound: nodes.len() + d,
                    nodes: ext,
                });
            }
        }
    }
    out
}

fn hop_distances(topo: &Topology, dst: NodeId, allowed: &[bool]) -> Vec<Option<usize>> {
    let mut dist = vec![None; topo.node_count()];
    dist[dst.0] = Some(0);
    let mut queue = VecDeque::from([dst]);
    while let Some(n) = queue.pop_front() {
        let d = dist[n.0].expect("queued nodes have a distance");
        for (hop, m) in topo.out_hops(n) {
            if allowed[hop.link.0] && dist[m.0].is_none() {
                dist[m.0] = Some(d + 1);
                queue.push_back(m);
            }
        }
    }
    dist
}

/// How many probes go down each candidate per update interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbePolicy {
    probes_per_path: u32,
    update_interval: f64,
    adaptive_scale: f64,
}

impl ProbePolicy {
    pub fn new(
        probes_per_path: u32,
        update_interval: f64,
        adaptive_scale: f64,
    ) -> Result<Self, ProbeError> {
        if probes_per_path == 0 {
            return Err(ProbeError::InvalidPolicy(
                "probes per path must be positive",
            ));
        }
        if !(update_interval > 0.0 && update_interval.is_finite()) {
            return Err(ProbeError::InvalidPolicy(
                "update interval must be positive",
            ));
        }
        if !(adaptive_scale >= 0.0 && adaptive_scale.is_finite()) {
            return Err(ProbeError::InvalidPolicy(
                "adaptive scale must be non-negative",
            ));
        }
        Ok(Self {
            probes_per_path,
            update_interval,
            adaptive_scale,
        })
    }

    pub fn probes_per_path(&self) -> u32 {
        self.probes_per_path
    }

    pub fn update_interval(&self) -> f64 {
        self.update_interval
    }

    pub fn adaptive_scale(&self) -> f64 {
        self.adaptive_scale
    }

    /// `max(1, floor(probes / (1 + scale * rate)))`: fewer probes under
    /// heavier arrival rates.
    pub fn effective_probes(&self, arrival_rate: f64) -> u32 {
        let n = (self.probes_per_path as f64 / (1.0 + self.adaptive_scale * arrival_rate)).floor();
        (n as u32).max(1)
    }
}

impl Default for ProbePolicy {
    fn default() -> Self {
        Self {
            probes_per_path: 20,
            update_interval: 0.5,
            adaptive_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeOutcome {
    Pack,
    Nack,
}

/// A probe scheduled by [`ProbeWindow::emit_probes`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduledProbe {
    pub time: f64,
    pub path: usize,
    pub seq: u64,
}

/// Probe bookkeeping for one candidate over one update interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeWindow {
    path: usize,
    window_start: f64,
    first_seq: u64,
    next_seq: u64,
    sent: u32,
    acked: u32,
    nacked: u32,
    pending: BTreeSet<u64>,
}

impl ProbeWindow {
    pub fn open(path: usize, window_start: f64) -> Self {
        Self::starting_at(path, window_start, 0)
    }

    fn starting_at(path: usize, window_start: f64, first_seq: u64) -> Self {
        Self {
            path,
            window_start,
            first_seq,
            next_seq: first_seq,
            sent: 0,
            acked: 0,
            nacked: 0,
            pending: BTreeSet::new(),
        }
    }

    /// Opens the following window. Sequence numbers keep increasing so late
    /// feedback for this window is recognisable as foreign.
    pub fn successor(&self, window_start: f64) -> Self {
        Self::starting_at(self.path, window_start, self.next_seq)
    }

    pub fn path(&self) -> usize {
        self.path
    }

    pub fn window_start(&self) -> f64 {
        self.window_start
    }

    pub fn sent(&self) -> u32 {
        self.sent
    }

    pub fn acked(&self) -> u32 {
        self.acked
    }

    pub fn nacked(&self) -> u32 {
        self.nacked
    }

    /// Schedules the policy's probe count for this interval, spread evenly
    /// from `now`.
    pub fn emit_probes(
        &mut self,
        policy: &ProbePolicy,
        arrival_rate: f64,
        now: f64,
    ) -> Vec<ScheduledProbe> {
        let n = policy.effective_probes(arrival_rate);
        let spacing = policy.update_interval / n as f64;
        (0..n)
            .map(|i| {
                let seq = self.next_seq;
                self.next_seq += 1;
                self.sent += 1;
                self.pending.insert(seq);
                ScheduledProbe {
                    time: now + spacing * i as f64,
                    path: self.path,
                    seq,
                }
            })
            .collect()
    }

    pub fn record_feedback(&mut self, seq: u64, outcome: ProbeOutcome) -> Result<(), ProbeError> {
        if seq < self.first_seq || seq >= self.next_seq {
            return Err(ProbeError::UnknownSequence(seq));
        }
        if !self.pending.remove(&seq) {
            return Err(ProbeError::DuplicateFeedback(seq));
        }
        match outcome {
            ProbeOutcome::Pack => self.acked += 1,
            ProbeOutcome::Nack => self.nacked += 1,
        }
        Ok(())
    }

    /// NACKed fraction of resolved probes; 1.0 when nothing resolved.
    pub fn blocking_probability(&self) -> BlockingEstimate {
        let resolved = self.acked + self.nacked;
        let bp = if resolved == 0 {
            1.0
        } else {
            self.nacked as f64 / resolved as f64
        };
        BlockingEstimate {
            path: self.path,
            bp,
            sample_size: resolved,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockingEstimate {
    pub path: usize,
    pub bp: f64,
    pub sample_size: u32,
}

/// Whether a probe sent down `path` right now would get through.
/// Reads channel state only.
pub fn probe_outcome(topo: &Topology, path: &Path, mode: ConversionMode) -> ProbeOutcome {
    if admissible(topo, path, mode) {
        ProbeOutcome::Pack
    } else {
        ProbeOutcome::Nack
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedBackup {
    /// Index into the candidate set.
    pub candidate: usize,
    pub path: Path,
    /// Estimate the ranking used; `None` for a static hop-count ordering.
    pub bp: Option<f64>,
}

/// Sorts candidates ascending by estimated blocking probability (ties: fewer
/// hops, then node order) and keeps the first `m`. A candidate with no
/// estimate is ranked as fully blocked.
pub fn rank_and_select(
    estimates: &[BlockingEstimate],
    candidates: &CandidateSet,
    m: usize,
) -> Vec<RankedBackup> {
    let mut ranked: Vec<RankedBackup> = candidates
        .paths
        .iter()
        .enumerate()
        .map(|(i, p)| RankedBackup {
            candidate: i,
            path: p.clone(),
            bp: Some(estimates.iter().find(|e| e.path == i).map_or(1.0, |e| e.bp)),
        })
        .collect();
    ranked.sort_by(|a, b| {
        let (x, y) = (a.bp.unwrap_or(1.0), b.bp.unwrap_or(1.0));
        x.total_cmp(&y).then_with(|| a.path.tie_order(&b.path))
    });
    ranked.truncate(m);
    ranked
}

/// Candidates in their hop-count order, without measurements.
pub fn static_ranking(candidates: &CandidateSet, m: usize) -> Vec<RankedBackup> {
    candidates
        .paths
        .iter()
        .take(m)
        .enumerate()
        .map(|(i, p)| RankedBackup {
            candidate: i,
            path: p.clone(),
            bp: None,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Restoration {
    /// Restored on the backup at this rank position.
    Backup(usize),
    /// Restored on a freshly computed route.
    Fresh,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RerouteOutcome {
    Restored {
        lightpath: Lightpath,
        via: Restoration,
    },
    Dropped,
}

/// Moves a connection whose lightpath failed onto the first usable backup,
/// then a fresh route, else drops it. The failed lightpath's channels must
/// already be released.
pub fn reroute(
    topo: &mut Topology,
    router: &Router,
    src: NodeId,
    dst: NodeId,
    backups: &[RankedBackup],
    id: LightpathId,
) -> RerouteOutcome {
    for (rank, b) in backups.iter().enumerate() {
        if let Some(lightpath) = router.establish_on(topo, &b.path, id, Role::Backup) {
            return RerouteOutcome::Restored {
                lightpath,
                via: Restoration::Backup(rank),
            };
        }
    }
    match router.establish(topo, src, dst, id, Role::Backup) {
        Ok(r) => match r.outcome {
            RouteOutcome::Established(lightpath) => RerouteOutcome::Restored {
                lightpath,
                via: Restoration::Fresh,
            },
            RouteOutcome::Blocked(_) => RerouteOutcome::Dropped,
        },
        Err(_) => RerouteOutcome::Dropped,
    }
}
