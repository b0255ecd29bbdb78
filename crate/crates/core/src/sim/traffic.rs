//! Dynamic traffic: Poisson arrivals per source, exponential holding times,
//! uniformly random ordered node pairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::topology::{LinkId, NodeId};

const PAIR_STREAM: u64 = 1;
const HOLDING_STREAM: u64 = 2;
const FAILURE_STREAM: u64 = 3;
const SOURCE_STREAM_BASE: u64 = 16;

/// Independent, reproducible random stream `stream` derived from `seed`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficModel {
    /// Calls per second, per source.
    pub arrival_rate: f64,
    /// Mean holding time, seconds.
    pub mean_holding: f64,
    pub num_sources: u32,
    /// Payload packet size, bytes.
    pub packet_size: u32,
    /// Per-session payload rate, bits per second.
    pub data_rate: f64,
}

impl Default for TrafficModel {
    fn default() -> Self {
        Self {
            arrival_rate: 0.5,
            mean_holding: 0.2,
            num_sources: 4,
            packet_size: 200,
            data_rate: 2e6,
        }
    }
}

impl TrafficModel {
    /// Arrival rate of the multiplexed stream.
    pub fn aggregate_rate(&self) -> f64 {
        self.arrival_rate * self.num_sources as f64
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.arrival_rate) {
            return Err(format!(
                "arrival rate {} must be positive",
                self.arrival_rate
            ));
        }
        if !positive(self.mean_holding) {
            return Err(format!(
                "holding time {} must be positive",
                self.mean_holding
            ));
        }
        if self.num_sources == 0 {
            return Err("at least one traffic source is required".into());
        }
        if self.packet_size == 0 {
            return Err("packet size must be positive".into());
        }
        if !positive(self.data_rate) {
            return Err(format!("data rate {} must be positive", self.data_rate));
        }
        Ok(())
    }
}

/// One connection request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Demand {
    pub time: f64,
    pub src: NodeId,
    pub dst: NodeId,
    pub holding: f64,
}

/// The first `max_requests` arrivals of `num_sources` independent Poisson
/// generators merged into one stream, each with a uniformly drawn
/// `src != dst` pair and an exponential holding time.
///
/// # Panics
///
/// If the model is invalid or `node_count < 2`.
pub fn generate_arrivals(
    model: &TrafficModel,
    node_count: usize,
    max_requests: usize,
    seed: u64,
) -> Vec<Demand> {
    assert!(node_count >= 2, "traffic needs at least two nodes");
    let gap = Exp::new(model.arrival_rate).expect("positive arrival rate");
    let holding = Exp::new(1.0 / model.mean_holding).expect("positive holding time");

    // (time, source) for every source's first max_requests arrivals; the
    // merged stream can draw at most that many from any one source.
    let mut times: Vec<(f64, u32)> = Vec::with_capacity(max_requests * model.num_sources as usize);
    for s in 0..model.num_sources {
        let mut rng = stream(seed, SOURCE_STREAM_BASE + s as u64);
        let mut t = 0.0;
        for _ in 0..max_requests {
            t += gap.sample(&mut rng);
            times.push((t, s));
        }
    }
    times.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    times.truncate(max_requests);

    let mut pairs = stream(seed, PAIR_STREAM);
    let mut holds = stream(seed, HOLDING_STREAM);
    times
        .into_iter()
        .map(|(time, _)| {
            let (src, dst) = random_pair(&mut pairs, node_count);
            Demand {
                time,
                src,
                dst,
                holding: holding.sample(&mut holds),
            }
        })
        .collect()
}

fn random_pair(rng: &mut impl Rng, n: usize) -> (NodeId, NodeId) {
    let src = rng.random_range(0..n);
    let mut dst = rng.random_range(0..n - 1);
    if dst >= src {
        dst += 1;
    }
    (NodeId(src), NodeId(dst))
}

/// A timed change of one link's status.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkEvent {
    pub time: f64,
    pub link: LinkId,
}

/// `count` single-link failures at uniform times in `[0, horizon)` on
/// uniformly chosen links, sorted by time.
pub fn random_failures(link_count: usize, horizon: f64, count: usize, seed: u64) -> Vec<LinkEvent> {
    if link_count == 0 {
        return Vec::new();
    }
    let mut rng = stream(seed, FAILURE_STREAM);
    let mut out: Vec<LinkEvent> = (0..count)
        .map(|_| LinkEvent {
            time: rng.random::<f64>() * horizon,
            link: LinkId(rng.random_range(0..link_count)),
        })
        .collect();
    out.sort_by(|a, b| a.time.total_cmp(&b.time));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn interarrival_and_holding_statistics() {
        let model = TrafficModel {
            num_sources: 1,
            ..TrafficModel::default()
        };
        // 1e5 samples: the sample variance of an exponential has relative
        // standard error sqrt(8 / n), under 1% here
        let arrivals = generate_arrivals(&model, 8, 100_000, 42);
        assert_eq!(arrivals.len(), 100_000);
        let mut prev = 0.0;
        let gaps: Vec<f64> = arrivals
            .iter()
            .map(|d| {
                let g = d.time - prev;
                prev = d.time;
                g
            })
            .collect();
        // exponential with mean 1/r = 2 s, variance 4
        let (m, v) = mean_var(&gaps);
        assert!((m - 2.0).abs() / 2.0 < 0.05, "gap mean {m}");
        assert!((v - 4.0).abs() / 4.0 < 0.05, "gap variance {v}");

        let holds: Vec<f64> = arrivals.iter().map(|d| d.holding).collect();
        let (m, v) = mean_var(&holds);
        assert!((m - 0.2).abs() / 0.2 < 0.05, "holding mean {m}");
        assert!((v - 0.04).abs() / 0.04 < 0.05, "holding variance {v}");
    }

    #[test]
    fn sources_multiply_the_rate() {
        let model = TrafficModel::default();
        let arrivals = generate_arrivals(&model, 8, 10_000, 7);
        let span = arrivals.last().unwrap().time;
        let rate = arrivals.len() as f64 / span;
        assert!((rate - 2.0).abs() / 2.0 < 0.05, "aggregate rate {rate}");
        assert!(arrivals.windows(2).all(|w| w[0].time <= w[1].time));
    }

    #[test]
    fn pairs_are_distinct_and_cover_all_nodes() {
        let arrivals = generate_arrivals(&TrafficModel::default(), 8, 5_000, 3);
        let mut seen = [[false; 8]; 8];
        for d in &arrivals {
            assert_ne!(d.src, d.dst);
            seen[d.src.0][d.dst.0] = true;
        }
        for (s, row) in seen.iter().enumerate() {
            for (t, &hit) in row.iter().enumerate() {
                assert_eq!(hit, s != t, "pair {s}->{t}");
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let m = TrafficModel::default();
        assert_eq!(
            generate_arrivals(&m, 8, 50, 9),
            generate_arrivals(&m, 8, 50, 9)
        );
        assert_ne!(
            generate_arrivals(&m, 8, 50, 9),
            generate_arrivals(&m, 8, 50, 10)
        );
    }

    #[test]
    fn failure_helper() {
        let f = random_failures(11, 25.0, 3, 5);
        assert_eq!(f.len(), 3);
        assert!(f
            .iter()
            .all(|e| e.time >= 0.0 && e.time < 25.0 && e.link.0 < 11));
        assert!(f.windows(2).all(|w| w[0].time <= w[1].time));
        assert_eq!(f, random_failures(11, 25.0, 3, 5));
        assert!(random_failures(0, 1.0, 3, 5).is_empty());
    }
}
