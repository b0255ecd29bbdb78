//! Primary lightpath computation: threshold link costs over the current load,
//! least-cost Dijkstra, first-fit wavelength assignment and atomic setup.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::topology::{ChannelError, Hop, LightpathId, NodeId, Topology, WavelengthIndex};

#[derive(Debug, Error, PartialEq)]
pub enum RoutingError {
    #[error("no such node {0}")]
    NoSuchNode(NodeId),
    #[error("source and destination are both node {0}")]
    SameEndpoints(NodeId),
    #[error("load threshold {0} outside (0, 1)")]
    InvalidThreshold(f64),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostParams {
    load_threshold: f64,
}

impl CostParams {
    pub fn new(load_threshold: f64) -> Result<Self, RoutingError> {
        if load_threshold > 0.0 && load_threshold < 1.0 {
            Ok(Self { load_threshold })
        } else {
            Err(RoutingError::InvalidThreshold(load_threshold))
        }
    }

    pub fn load_threshold(&self) -> f64 {
        self.load_threshold
    }
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            load_threshold: 0.3,
        }
    }
}

/// Threshold link cost over a load index `li` (free-channel fraction):
///
/// * `1 - li` when `li > LT`
/// * `1 + li` when `0 < li <= LT`
/// * infinite when `li == 0`
pub fn link_cost(li: f64, params: &CostParams) -> f64 {
    let lt = params.load_threshold;
    if li > lt {
        1.0 - li
    } else if li > 0.0 {
        1.0 + li
    } else {
        f64::INFINITY
    }
}

/// How links are priced for primary routing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CostModel {
    /// Threshold cost over the load index.
    LoadBalanced(CostParams),
    /// Unit cost per up link (the shortest-hop baseline).
    HopCount,
}

impl CostModel {
    pub fn hop_cost(&self, topo: &Topology, hop: Hop) -> f64 {
        match self {
            CostModel::LoadBalanced(params) => link_cost(topo.load_index(hop), params),
            CostModel::HopCount => {
                if topo.link(hop.link).is_up() {
                    1.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConversionMode {
    /// Wavelength continuity: one index end to end.
    #[default]
    NoConversion,
    /// Every node may convert; each hop is assigned independently.
    FullConversion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Primary,
    Backup,
}

/// A loop-free route as a node sequence plus the directed hops between them.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Path {
    nodes: Vec<NodeId>,
    hops: Vec<Hop>,
}

impl Path {
    /// Builds a path from consecutive adjacent nodes. `None` if two
    /// consecutive nodes are not adjacent, a node repeats, or fewer than two
    /// nodes are given.
    pub fn from_nodes(topo: &Topology, nodes: &[NodeId]) -> Option<Self> {
        if nodes.len() < 2 {
            return None;
        }
        let mut seen = vec![false; topo.node_count()];
        for n in nodes {
            if !topo.contains(*n) || std::mem::replace(&mut seen[n.0], true) {
                return None;
            }
        }
        let hops = nodes
            .windows(2)
            .map(|w| topo.hop(w[0], w[1]))
            .collect::<Option<Vec<_>>>()?;
        Some(Self {
            nodes: nodes.to_vec(),
            hops,
        })
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn hops(&self) -> &[Hop] {
        &self.hops
    }

    pub fn hop_count(&self) -> usize {
        self.hops.len()
    }

    pub fn src(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn dst(&self) -> NodeId {
        *self.nodes.last().expect("paths have at least two nodes")
    }

    pub fn uses_link(&self, link: crate::topology::LinkId) -> bool {
        self.hops.iter().any(|h| h.link == link)
    }

    pub fn shares_link_with(&self, other: &Path) -> bool {
        self.hops.iter().any(|h| other.uses_link(h.link))
    }

    pub fn all_up(&self, topo: &Topology) -> bool {
        self.hops.iter().all(|h| topo.link(h.link).is_up())
    }

    /// Sum of hop propagation delays, seconds.
    pub fn propagation_delay(&self, topo: &Topology) -> f64 {
        self.hops.iter().map(|h| topo.link(h.link).delay()).sum()
    }

    /// Fewer hops first, then lexicographic node sequence.
    pub fn tie_order(&self, other: &Path) -> Ordering {
        self.hop_count()
            .cmp(&other.hop_count())
            .then_with(|| self.nodes.cmp(&other.nodes))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lightpath {
    pub id: LightpathId,
    pub path: Path,
    pub wavelengths: Vec<WavelengthIndex>,
    pub role: Role,
}

impl Lightpath {
    pub fn route(&self) -> &[NodeId] {
        self.path.nodes()
    }

    pub fn hops(&self) -> &[Hop] {
        self.path.hops()
    }

    /// Number of hops whose wavelength differs from the previous hop's.
    pub fn conversions(&self) -> usize {
        self.wavelengths.windows(2).filter(|w| w[0] != w[1]).count()
    }

    pub fn is_continuous(&self) -> bool {
        self.conversions() == 0
    }

    /// Propagation delay plus `conversion_time` per wavelength change.
    pub fn end_to_end_delay(&self, topo: &Topology, conversion_time: f64) -> f64 {
        self.path.propagation_delay(topo) + conversion_time * self.conversions() as f64
    }

    pub(crate) fn occupy(&self, topo: &mut Topology) -> Result<(), ChannelError> {
        for (k, (hop, w)) in self.hops().iter().zip(&self.wavelengths).enumerate() {
            if let Err(e) = topo.occupy_channel(*hop, *w, self.id) {
                for (h, w) in self.hops()[..k].iter().zip(&self.wavelengths) {
                    topo.release_channel(*h, *w, self.id)
                        .expect("rolling back channels this lightpath just took");
                }
                return Err(e);
            }
        }
        Ok(())
    }

    pub(crate) fn release(&self, topo: &mut Topology) -> Result<(), ChannelError> {
        for (hop, w) in self.hops().iter().zip(&self.wavelengths) {
            topo.release_channel(*hop, *w, self.id)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutedPath {
    pub path: Path,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct Label {
    cost: f64,
    nodes: Vec<NodeId>,
    hops: Vec<Hop>,
}

impl Label {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then_with(|| self.nodes.len().cmp(&other.nodes.len()))
            .then_with(|| self.nodes.cmp(&other.nodes))
    }
}

impl Eq for Label {}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Reversed so BinaryHeap pops the smallest key.
impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        other.key_cmp(self)
    }
}

/// Least-cost `src -> dst` path under `model`, evaluated on the current
/// channel state. Ties go to fewer hops, then the lexicographically smaller
/// node sequence. `Ok(None)` means every path has infinite cost.
pub fn compute_primary(
    topo: &Topology,
    src: NodeId,
    dst: NodeId,
    model: &CostModel,
) -> Result<Option<RoutedPath>, RoutingError> {
    check_endpoints(topo, src, dst)?;
    let mut best: Vec<Option<Label>> = vec![None; topo.node_count()];
    let mut settled = vec![false; topo.node_count()];
    let mut heap = BinaryHeap::new();
    let start = Label {
        cost: 0.0,
        nodes: vec![src],
        hops: Vec::new(),
    };
    best[src.0] = Some(start.clone());
    heap.push(start);

    while let Some(label) = heap.pop() {
        let here = *label.nodes.last().expect("labels are non-empty");
        if settled[here.0] {
            continue;
        }
        settled[here.0] = true;
        if here == dst {
            return Ok(Some(RoutedPath {
                path: Path {
                    nodes: label.nodes,
                    hops: label.hops,
                },
                cost: label.cost,
            }));
        }
        for (hop, next) in topo.out_hops(here) {
            if settled[next.0] {
                continue;
            }
            let c = model.hop_cost(topo, hop);
            if c.is_infinite() {
                continue;
            }
            let mut nodes = label.nodes.clone();
            nodes.push(next);
            let mut hops = label.hops.clone();
            hops.push(hop);
            let cand = Label {
                cost: label.cost + c,
                nodes,
                hops,
            };
            let better = best[next.0]
                .as_ref()
                .is_none_or(|b| cand.key_cmp(b) == Ordering::Less);
            if better {
                best[next.0] = Some(cand.clone());
                heap.push(cand);
            }
        }
    }
    Ok(None)
}

fn check_endpoints(topo: &Topology, src: NodeId, dst: NodeId) -> Result<(), RoutingError> {
    for n in [src, dst] {
        if !topo.contains(n) {
            return Err(RoutingError::NoSuchNode(n));
        }
    }
    if src == dst {
        return Err(RoutingError::SameEndpoints(src));
    }
    Ok(())
}

/// First-fit wavelength assignment over `hops`. `Ok(None)` when no
/// admissible assignment exists.
pub fn assign_wavelength(
    topo: &Topology,
    hops: &[Hop],
    mode: ConversionMode,
) -> Result<Option<Vec<WavelengthIndex>>, ChannelError> {
    if let Some(down) = hops.iter().find(|h| !topo.link(h.link).is_up()) {
        return Err(ChannelError::LinkDown(down.link));
    }
    Ok(first_fit(topo, hops, mode))
}

fn first_fit(topo: &Topology, hops: &[Hop], mode: ConversionMode) -> Option<Vec<WavelengthIndex>> {
    match mode {
        ConversionMode::NoConversion => {
            let width = hops
                .iter()
                .map(|h| topo.link(h.link).total_channels())
                .min()?;
            (0..width).map(WavelengthIndex).find_map(|w| {
                hops.iter()
                    .all(|h| topo.link(h.link).is_free(h.dir, w))
                    .then(|| vec![w; hops.len()])
            })
        }
        ConversionMode::FullConversion => hops
            .iter()
            .map(|h| {
                let link = topo.link(h.link);
                (0..link.total_channels())
                    .map(WavelengthIndex)
                    .find(|&w| link.is_free(h.dir, w))
            })
            .collect(),
    }
}

/// Whether `path` is fully up and admits a wavelength assignment right now.
pub fn admissible(topo: &Topology, path: &Path, mode: ConversionMode) -> bool {
    path.all_up(topo) && first_fit(topo, path.hops(), mode).is_some()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockReason {
    NoFinitePath,
    NoWavelength,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RouteOutcome {
    Established(Lightpath),
    Blocked(BlockReason),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteResult {
    pub outcome: RouteOutcome,
    /// Sum of link costs along the chosen path; infinite when no path exists.
    pub total_cost: f64,
    /// Seconds; zero when blocked.
    pub setup_delay: f64,
}

impl RouteResult {
    pub fn lightpath(&self) -> Option<&Lightpath> {
        match &self.outcome {
            RouteOutcome::Established(lp) => Some(lp),
            RouteOutcome::Blocked(_) => None,
        }
    }

    pub fn is_blocked(&self) -> bool {
        matches!(self.outcome, RouteOutcome::Blocked(_))
    }
}

/// Routing policy bundle shared by primary setup and restoration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Router {
    pub cost: CostModel,
    pub mode: ConversionMode,
    /// Seconds charged per wavelength change along a lightpath.
    pub conversion_time: f64,
}

impl Router {
    pub fn new(cost: CostModel, mode: ConversionMode, conversion_time: f64) -> Self {
        Self {
            cost,
            mode,
            conversion_time,
        }
    }

    /// Computes, assigns and occupies a primary lightpath all-or-nothing.
    pub fn establish_primary(
        &self,
        topo: &mut Topology,
        src: NodeId,
        dst: NodeId,
        id: LightpathId,
    ) -> Result<RouteResult, RoutingError> {
        self.establish(topo, src, dst, id, Role::Primary)
    }

    pub(crate) fn establish(
        &self,
        topo: &mut Topology,
        src: NodeId,
        dst: NodeId,
        id: LightpathId,
        role: Role,
    ) -> Result<RouteResult, RoutingError> {
        let Some(routed) = compute_primary(topo, src, dst, &self.cost)? else {
            return Ok(RouteResult {
                outcome: RouteOutcome::Blocked(BlockReason::NoFinitePath),
                total_cost: f64::INFINITY,
                setup_delay: 0.0,
            });
        };
        match self.establish_on(topo, &routed.path, id, role) {
            Some(lp) => {
                let setup_delay = lp.end_to_end_delay(topo, self.conversion_time);
                Ok(RouteResult {
                    outcome: RouteOutcome::Established(lp),
                    total_cost: routed.cost,
                    setup_delay,
                })
            }
            None => Ok(RouteResult {
                outcome: RouteOutcome::Blocked(BlockReason::NoWavelength),
                total_cost: routed.cost,
                setup_delay: 0.0,
            }),
        }
    }

    /// Occupies a lightpath on a fixed `path`, or leaves state untouched and
    /// returns `None` if a hop is down or no wavelength fits.
    pub fn establish_on(
        &self,
        topo: &mut Topology,
        path: &Path,
        id: LightpathId,
        role: Role,
    ) -> Option<Lightpath> {
        if !path.all_up(topo) {
            return None;
        }
        let wavelengths = first_fit(topo, path.hops(), self.mode)?;
        let lp = Lightpath {
            id,
            path: path.clone(),
            wavelengths,
            role,
        };
        lp.occupy(topo).ok()?;
        Some(lp)
    }
}
