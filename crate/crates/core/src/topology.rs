//! Network graph, per-wavelength channel state and link failure status.
//!
//! Every link is bidirectional and carries two independent directed channel
//! pools of `channels` wavelengths each. A lightpath occupies the channel of
//! the direction it travels in.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Dense node index, `0..node_count`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Link index in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkId(pub usize);

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Wavelength index, only meaningful relative to one link's channel count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WavelengthIndex(pub usize);

impl fmt::Display for WavelengthIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "w{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LightpathId(pub u64);

impl fmt::Display for LightpathId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "lp{}", self.0)
    }
}

/// Travel direction over a link: `Forward` runs from endpoint `a` to `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Forward,
    Reverse,
}

impl Direction {
    fn slot(self) -> usize {
        match self {
            Direction::Forward => 0,
            Direction::Reverse => 1,
        }
    }
}

/// One directed traversal of a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Hop {
    pub link: LinkId,
    pub dir: Direction,
}

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing `nodes <count>` header")]
    MissingHeader,
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("duplicate link between nodes {0} and {1}")]
    DuplicateLink(NodeId, NodeId),
    #[error("dangling node reference {node} in a {count}-node network")]
    DanglingNode { node: usize, count: usize },
    #[error("link {0}-{1}: delay must be positive")]
    NonPositiveDelay(NodeId, NodeId),
    #[error("link {0}-{1}: channel count must be at least 1")]
    NoChannels(NodeId, NodeId),
    #[error("line {line}: {source}")]
    Invalid {
        line: usize,
        #[source]
        source: Box<TopologyError>,
    },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChannelError {
    #[error("channel {w} on link {link} is already owned by {owner}")]
    Busy {
        link: LinkId,
        w: WavelengthIndex,
        owner: LightpathId,
    },
    #[error("link {0} is down")]
    LinkDown(LinkId),
    #[error("channel {w} on link {link} is owned by {owner}, not {claimed}")]
    NotOwner {
        link: LinkId,
        w: WavelengthIndex,
        owner: LightpathId,
        claimed: LightpathId,
    },
    #[error("channel {w} on link {link} is already free")]
    AlreadyFree { link: LinkId, w: WavelengthIndex },
    #[error("link {link} has no wavelength {w}")]
    NoSuchChannel { link: LinkId, w: WavelengthIndex },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    id: LinkId,
    a: NodeId,
    b: NodeId,
    delay: f64,
    channels: usize,
    occupancy: [Vec<Option<LightpathId>>; 2],
    up: bool,
}

impl Link {
    fn new(id: LinkId, a: NodeId, b: NodeId, delay: f64, channels: usize) -> Self {
        Self {
            id,
            a,
            b,
            delay,
            channels,
            occupancy: [vec![None; channels], vec![None; channels]],
            up: true,
        }
    }

    pub fn id(&self) -> LinkId {
        self.id
    }

    pub fn endpoints(&self) -> (NodeId, NodeId) {
        (self.a, self.b)
    }

    /// Propagation delay in seconds.
    pub fn delay(&self) -> f64 {
        self.delay
    }

    /// Wavelengths per direction (C_n).
    pub fn total_channels(&self) -> usize {
        self.channels
    }

    pub fn is_up(&self) -> bool {
        self.up
    }

    pub fn other_end(&self, node: NodeId) -> Option<NodeId> {
        if node == self.a {
            Some(self.b)
        } else if node == self.b {
            Some(self.a)
        } else {
            None
        }
    }

    /// Direction of travel when leaving `node` over this link.
    pub fn direction_from(&self, node: NodeId) -> Option<Direction> {
        if node == self.a {
            Some(Direction::Forward)
        } else if node == self.b {
            Some(Direction::Reverse)
        } else {
            None
        }
    }

    /// Node a hop in `dir` arrives at.
    pub fn head(&self, dir: Direction) -> NodeId {
        match dir {
            Direction::Forward => self.b,
            Direction::Reverse => self.a,
        }
    }

    pub fn tail(&self, dir: Direction) -> NodeId {
        match dir {
            Direction::Forward => self.a,
            Direction::Reverse => self.b,
        }
    }

    pub fn owner(&self, dir: Direction, w: WavelengthIndex) -> Option<LightpathId> {
        self.occupancy[dir.slot()].get(w.0).copied().flatten()
    }

    pub fn is_free(&self, dir: Direction, w: WavelengthIndex) -> bool {
        w.0 < self.channels && self.occupancy[dir.slot()][w.0].is_none()
    }

    /// Free channels in `dir` (C_f), regardless of link status.
    pub fn free_count(&self, dir: Direction) -> usize {
        self.occupancy[dir.slot()]
            .iter()
            .filter(|o| o.is_none())
            .count()
    }

    pub fn occupied_count(&self, dir: Direction) -> usize {
        self.channels - self.free_count(dir)
    }

    /// Load index C_f / C_n of the `dir` channel pool. A down link reports 0.
    pub fn load_index(&self, dir: Direction) -> f64 {
        if !self.up {
            return 0.0;
        }
        self.free_count(dir) as f64 / self.channels as f64
    }

    /// Iterate `(direction, wavelength, owner)` for every occupied channel.
    pub fn occupied(&self) -> impl Iterator<Item = (Direction, WavelengthIndex, LightpathId)> + '_ {
        [Direction::Forward, Direction::Reverse]
            .into_iter()
            .flat_map(move |dir| {
                self.occupancy[dir.slot()]
                    .iter()
                    .enumerate()
                    .filter_map(move |(w, o)| o.map(|id| (dir, WavelengthIndex(w), id)))
            })
    }

    fn occupy(
        &mut self,
        dir: Direction,
        w: WavelengthIndex,
        owner: LightpathId,
    ) -> Result<(), ChannelError> {
        if !self.up {
            return Err(ChannelError::LinkDown(self.id));
        }
        let slot = self.occupancy[dir.slot()]
            .get_mut(w.0)
            .ok_or(ChannelError::NoSuchChannel { link: self.id, w })?;
        match *slot {
            Some(current) => Err(ChannelError::Busy {
                link: self.id,
                w,
                owner: current,
            }),
            None => {
                *slot = Some(owner);
                Ok(())
            }
        }
    }

    fn release(
        &mut self,
        dir: Direction,
        w: WavelengthIndex,
        owner: LightpathId,
    ) -> Result<(), ChannelError> {
        let slot = self.occupancy[dir.slot()]
            .get_mut(w.0)
            .ok_or(ChannelError::NoSuchChannel { link: self.id, w })?;
        match *slot {
            None => Err(ChannelError::AlreadyFree { link: self.id, w }),
            Some(current) if current != owner => Err(ChannelError::NotOwner {
                link: self.id,
                w,
                owner: current,
                claimed: owner,
            }),
            Some(_) => {
                *slot = None;
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    node_count: usize,
    links: Vec<Link>,
    adjacency: Vec<Vec<LinkId>>,
}

impl Topology {
    pub fn new(node_count: usize) -> Self {
        Self {
            node_count,
            links: Vec::new(),
            adjacency: vec![Vec::new(); node_count],
        }
    }

    /// Adds an undirected link; `delay` is in seconds.
    pub fn add_link(
        &mut self,
        a: NodeId,
        b: NodeId,
        delay: f64,
        channels: usize,
    ) -> Result<LinkId, TopologyError> {
        for n in [a, b] {
            if n.0 >= self.node_count {
                return Err(TopologyError::DanglingNode {
                    node: n.0,
                    count: self.node_count,
                });
            }
        }
        if a == b {
            return Err(TopologyError::SelfLoop(a));
        }
        if self.link_between(a, b).is_some() {
            return Err(TopologyError::DuplicateLink(a, b));
        }
        if !(delay > 0.0 && delay.is_finite()) {
            return Err(TopologyError::NonPositiveDelay(a, b));
        }
        if channels == 0 {
            return Err(TopologyError::NoChannels(a, b));
        }
        let id = LinkId(self.links.len());
        self.links.push(Link::new(id, a, b, delay, channels));
        self.adjacency[a.0].push(id);
        self.adjacency[b.0].push(id);
        Ok(id)
    }

    /// Stand-in for the 8-node mesh: ring `i <-> i+1 mod 8` plus chords
    /// 0-4, 1-5 and 2-6.
    pub fn default_mesh(channels: usize, delay: f64) -> Self {
        let mut topo = Self::ring(8, channels, delay);
        for (a, b) in [(0, 4), (1, 5), (2, 6)] {
            topo.add_link(NodeId(a), NodeId(b), delay, channels)
                .expect("chords are distinct from ring links");
        }
        topo
    }

    pub fn ring(n: usize, channels: usize, delay: f64) -> Self {
        let mut topo = Self::new(n);
        for i in 0..n {
            let j = (i + 1) % n;
            if i != j && topo.link_between(NodeId(i), NodeId(j)).is_none() {
                topo.add_link(NodeId(i), NodeId(j), delay, channels)
                    .expect("ring links are valid");
            }
        }
        topo
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.node_count).map(NodeId)
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.0]
    }

    pub fn get_link(&self, id: LinkId) -> Option<&Link> {
        self.links.get(id.0)
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node.0 < self.node_count
    }

    /// Links incident to `node`.
    pub fn incident(&self, node: NodeId) -> &[LinkId] {
        &self.adjacency[node.0]
    }

    /// `(hop, neighbour)` pairs for every link leaving `node`.
    pub fn out_hops(&self, node: NodeId) -> impl Iterator<Item = (Hop, NodeId)> + '_ {
        self.adjacency[node.0].iter().map(move |&id| {
            let link = &self.links[id.0];
            let dir = link.direction_from(node).expect("adjacency is consistent");
            (Hop { link: id, dir }, link.head(dir))
        })
    }

    pub fn link_between(&self, a: NodeId, b: NodeId) -> Option<LinkId> {
        self.adjacency
            .get(a.0)?
            .iter()
            .copied()
            .find(|&id| self.links[id.0].other_end(a) == Some(b))
    }

    /// The directed hop from `from` to `to`, if they are adjacent.
    pub fn hop(&self, from: NodeId, to: NodeId) -> Option<Hop> {
        let link = self.link_between(from, to)?;
        let dir = self.links[link.0].direction_from(from)?;
        Some(Hop { link, dir })
    }

    pub fn load_index(&self, hop: Hop) -> f64 {
        self.links[hop.link.0].load_index(hop.dir)
    }

    pub fn occupy_channel(
        &mut self,
        hop: Hop,
        w: WavelengthIndex,
        owner: LightpathId,
    ) -> Result<(), ChannelError> {
        self.links[hop.link.0].occupy(hop.dir, w, owner)
    }

    pub fn release_channel(
        &mut self,
        hop: Hop,
        w: WavelengthIndex,
        owner: LightpathId,
    ) -> Result<(), ChannelError> {
        self.links[hop.link.0].release(hop.dir, w, owner)
    }

    /// Sets link status without touching its occupancy. Idempotent.
    pub fn set_link_state(&mut self, link: LinkId, up: bool) {
        self.links[link.0].up = up;
    }

    pub fn occupied_channels(&self) -> usize {
        self.links
            .iter()
            .map(|l| l.occupied_count(Direction::Forward) + l.occupied_count(Direction::Reverse))
            .sum()
    }

    /// Occupied over total directed channels across up links; 0 when no link is up.
    pub fn utilization(&self) -> f64 {
        let (occupied, total) =
            self.links
                .iter()
                .filter(|l| l.up)
                .fold((0usize, 0usize), |(o, t), l| {
                    (
                        o + l.occupied_count(Direction::Forward)
                            + l.occupied_count(Direction::Reverse),
                        t + 2 * l.channels,
                    )
                });
        if total == 0 {
            0.0
        } else {
            occupied as f64 / total as f64
        }
    }

    /// Whether every node can reach every other over up and down links alike.
    pub fn is_connected(&self) -> bool {
        if self.node_count == 0 {
            return true;
        }
        let mut seen = vec![false; self.node_count];
        let mut stack = vec![NodeId(0)];
        seen[0] = true;
        while let Some(n) = stack.pop() {
            for &id in &self.adjacency[n.0] {
                let m = self.links[id.0].other_end(n).expect("incident link");
                if !seen[m.0] {
                    seen[m.0] = true;
                    stack.push(m);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Parses the line-oriented topology format.
    ///
    /// ```text
    /// # comment
    /// nodes 3
    /// link 0 1 10 8     # a b delay_ms channels
    /// link 1 2 10 8
    /// ```
    pub fn parse(source: &str) -> Result<Self, TopologyError> {
        let mut topo: Option<Topology> = None;
        for (idx, raw) in source.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            let syntax = |message: String| TopologyError::Syntax { line, message };
            match fields[0] {
                "nodes" => {
                    if topo.is_some() {
                        return Err(syntax("repeated `nodes` header".into()));
                    }
                    if fields.len() != 2 {
                        return Err(syntax("expected `nodes <count>`".into()));
                    }
                    let count: usize = fields[1]
                        .parse()
                        .map_err(|_| syntax(format!("invalid node count `{}`", fields[1])))?;
                    if count == 0 {
                        return Err(syntax("node count must be at least 1".into()));
                    }
                    topo = Some(Topology::new(count));
                }
                "link" => {
                    let t = topo
                        .as_mut()
                        .ok_or_else(|| syntax("`link` before `nodes` header".into()))?;
                    if fields.len() != 5 {
                        return Err(syntax(
                            "expected `link <a> <b> <delay_ms> <channels>`".into(),
                        ));
                    }
                    let node = |s: &str| {
                        s.parse::<usize>()
                            .map_err(|_| syntax(format!("invalid node id `{s}`")))
                    };
                    let a = node(fields[1])?;
                    let b = node(fields[2])?;
                    let delay_ms: f64 = fields[3]
                        .parse()
                        .map_err(|_| syntax(format!("invalid delay `{}`", fields[3])))?;
                    let channels: usize = fields[4]
                        .parse()
                        .map_err(|_| syntax(format!("invalid channel count `{}`", fields[4])))?;
                    t.add_link(NodeId(a), NodeId(b), delay_ms / 1000.0, channels)
                        .map_err(|e| TopologyError::Invalid {
                            line,
                            source: Box::new(e),
                        })?;
                }
                other => return Err(syntax(format!("unknown directive `{other}`"))),
            }
        }
        topo.ok_or(TopologyError::MissingHeader)
    }

    /// Renders the topology in the format accepted by [`Topology::parse`].
    pub fn to_text(&self) -> String {
        let mut out = format!("nodes {}\n", self.node_count);
        for l in &self.links {
            out.push_str(&format!(
                "link {} {} {} {}\n",
                l.a,
                l.b,
                l.delay * 1000.0,
                l.channels
            ));
        }
        out
    }
}

impl FromStr for Topology {
    type Err = TopologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}
