//! Brute-force oracles and random fixtures shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rftr::routing::{CostModel, Path};
use rftr::topology::{Direction, Hop, LightpathId, LinkId, NodeId, Topology, WavelengthIndex};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random topology with 2..=`max_nodes` nodes, each pair linked with
/// probability one half, 1..=4 channels per link, random occupancy and the
/// occasional down link. Not necessarily connected.
pub fn random_topology(rng: &mut impl Rng, max_nodes: usize) -> Topology {
    let n = rng.random_range(2..=max_nodes);
    let mut topo = Topology::new(n);
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(0.5) {
                let delay = rng.random_range(1..=20) as f64 / 1000.0;
                let channels = rng.random_range(1..=4);
                topo.add_link(NodeId(a), NodeId(b), delay, channels)
                    .unwrap();
            }
        }
    }
    let mut owner = 1_000_000;
    for l in 0..topo.link_count() {
        let link = topo.link(LinkId(l));
        let channels = link.total_channels();
        for dir in [Direction::Forward, Direction::Reverse] {
            for w in 0..channels {
                if rng.random_bool(0.4) {
                    owner += 1;
                    topo.occupy_channel(
                        Hop {
                            link: LinkId(l),
                            dir,
                        },
                        WavelengthIndex(w),
                        LightpathId(owner),
                    )
                    .unwrap();
                }
            }
        }
        if rng.random_bool(0.1) {
            topo.set_link_state(LinkId(l), false);
        }
    }
    topo
}

/// Every loop-free `src -> dst` node sequence, by exhaustive DFS.
pub fn all_simple_paths(topo: &Topology, src: NodeId, dst: NodeId) -> Vec<Vec<NodeId>> {
    fn dfs(topo: &Topology, dst: NodeId, stack: &mut Vec<NodeId>, out: &mut Vec<Vec<NodeId>>) {
        let here = *stack.last().unwrap();
        if here == dst {
            out.push(stack.clone());
            return;
        }
        for next in topo.nodes() {
            if topo.link_between(here, next).is_some() && !stack.contains(&next) {
                stack.push(next);
                dfs(topo, dst, stack, out);
                stack.pop();
            }
        }
    }
    let mut out = Vec::new();
    dfs(topo, dst, &mut vec![src], &mut out);
    out
}

pub fn path_cost(topo: &Topology, nodes: &[NodeId], model: &CostModel) -> f64 {
    nodes
        .windows(2)
        .map(|w| model.hop_cost(topo, topo.hop(w[0], w[1]).unwrap()))
        .sum()
}

/// Minimum cost over all loop-free paths, `None` if all are infinite.
pub fn brute_min_cost(topo: &Topology, src: NodeId, dst: NodeId, model: &CostModel) -> Option<f64> {
    all_simple_paths(topo, src, dst)
        .iter()
        .map(|p| path_cost(topo, p, model))
        .filter(|c| c.is_finite())
        .min_by(f64::total_cmp)
}

/// The `k` best loop-free paths sharing no link with `primary`, ordered by
/// hop count and then node sequence.
pub fn brute_disjoint(
    topo: &Topology,
    src: NodeId,
    dst: NodeId,
    primary: &Path,
    k: usize,
) -> Vec<Vec<NodeId>> {
    let mut paths: Vec<Vec<NodeId>> = all_simple_paths(topo, src, dst)
        .into_iter()
        .filter(|p| {
            p.windows(2)
                .all(|w| !primary.uses_link(topo.link_between(w[0], w[1]).unwrap()))
        })
        .collect();
    paths.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    paths.truncate(k);
    paths
}
