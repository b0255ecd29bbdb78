//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Budgets are wall-clock limits on this build profile.

mod common;

use std::time::{Duration, Instant};

use rand::Rng;

use rftr::config::{parse_config, Scenario};
use rftr::metrics::blocking_probability;
use rftr::probing::{candidate_paths, ProbeOutcome, ProbePolicy, ProbeWindow};
use rftr::routing::{compute_primary, link_cost, CostModel, CostParams};
use rftr::runner::{aggregate, execute, run_scenario, AggregateRow};
use rftr::sim::{ConnectionState, Demand, EventKind, LinkEvent, RouterKind, SimConfig, Simulation};
use rftr::topology::{Direction, Hop, LightpathId, LinkId, NodeId, Topology, WavelengthIndex};

use common::{brute_disjoint, brute_min_cost, random_topology, rng};

type Criterion = (&'static str, Duration, fn() -> Verdict);

struct Verdict {
    ok: bool,
    detail: String,
}

fn verdict(ok: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        ok,
        detail: detail.into(),
    }
}

fn formula_fidelity() -> Verdict {
    let mut mismatches = 0;
    for j in 1..=9 {
        let lt = j as f64 / 10.0;
        let p = CostParams::new(lt).unwrap();
        for i in 0..=100 {
            let li = i as f64 / 100.0;
            let expected = if li == 0.0 {
                f64::INFINITY
            } else if li > lt {
                1.0 - li
            } else {
                1.0 + li
            };
            if link_cost(li, &p).to_bits() != expected.to_bits() {
                mismatches += 1;
            }
        }
    }

    // load index: free / total per direction; exact when total is a power of two
    let mut li_bad = 0;
    for channels in 1..=16usize {
        for busy in 0..=channels {
            let mut t = Topology::ring(3, channels, 0.01);
            let hop = Hop {
                link: LinkId(0),
                dir: Direction::Forward,
            };
            for w in 0..busy {
                t.occupy_channel(hop, WavelengthIndex(w), LightpathId(w as u64))
                    .unwrap();
            }
            let li = t.load_index(hop);
            let free = (channels - busy) as f64;
            let exact = if channels.is_power_of_two() {
                li * channels as f64 == free
            } else {
                li == free / channels as f64
            };
            if !exact {
                li_bad += 1;
            }
        }
    }

    // path estimate: nacked / resolved
    let mut bp_bad = 0;
    for n in 1..=32u32 {
        for lost in 0..=n {
            let policy = ProbePolicy::new(n, 0.5, 0.0).unwrap();
            let mut w = ProbeWindow::open(0, 0.0);
            for (i, p) in w.emit_probes(&policy, 1.0, 0.0).into_iter().enumerate() {
                let o = if (i as u32) < lost {
                    ProbeOutcome::Nack
                } else {
                    ProbeOutcome::Pack
                };
                w.record_feedback(p.seq, o).unwrap();
            }
            let bp = w.blocking_probability().bp;
            let exact = if n.is_power_of_two() {
                bp * n as f64 == lost as f64
            } else {
                bp == lost as f64 / n as f64
            };
            if !exact {
                bp_bad += 1;
            }
        }
    }
    let demand_bp = blocking_probability(3, 12).unwrap() == 0.25;
    verdict(
        mismatches == 0 && li_bad == 0 && bp_bad == 0 && demand_bp,
        format!(
            "cost grid 909 points, {mismatches} mismatches; load index {li_bad} inexact; estimate {bp_bad} inexact"
        ),
    )
}

fn routing_oracles() -> Verdict {
    let mut pairs = 0;
    let mut failures = Vec::new();
    for case in 0..200u64 {
        let mut r = rng(0xACCE_5500 + case);
        let topo = random_topology(&mut r, 8);
        let n = topo.node_count();
        for s in 0..n {
            for d in 0..n {
                if s == d {
                    continue;
                }
                pairs += 1;
                let (s, d) = (NodeId(s), NodeId(d));
                for model in [
                    CostModel::LoadBalanced(CostParams::default()),
                    CostModel::HopCount,
                ] {
                    let got = compute_primary(&topo, s, d, &model).unwrap();
                    let want = brute_min_cost(&topo, s, d, &model);
                    let agree = match (&got, want) {
                        (None, None) => true,
                        (Some(rp), Some(c)) => (rp.cost - c).abs() <= 1e-9,
                        _ => false,
                    };
                    if !agree {
                        failures.push(format!("case {case} {s}->{d}"));
                    }
                    if let Some(rp) = got {
                        let cands = candidate_paths(&topo, s, d, &rp.path, 3);
                        let got: Vec<Vec<NodeId>> =
                            cands.paths.iter().map(|p| p.nodes().to_vec()).collect();
                        if got != brute_disjoint(&topo, s, d, &rp.path, 3) {
                            failures.push(format!("case {case} {s}->{d} candidates"));
                        }
                    }
                }
            }
        }
    }
    verdict(
        failures.is_empty(),
        format!(
            "200 topologies, {pairs} ordered pairs x 2 cost models, {} disagreements{}",
            failures.len(),
            failures
                .first()
                .map(|f| format!(" (first: {f})"))
                .unwrap_or_default()
        ),
    )
}

fn estimator_convergence() -> Verdict {
    const N: u32 = 100;
    const WINDOWS: u32 = 1000;
    let policy = ProbePolicy::new(N, 0.5, 0.0).unwrap();
    let mut parts = Vec::new();
    let mut ok = true;
    for (k, p) in [0.1f64, 0.5, 0.9].into_iter().enumerate() {
        let sigma = (p * (1.0 - p) / N as f64).sqrt();
        let mut r = rng(0xB0 + k as u64);
        let mut window = ProbeWindow::open(0, 0.0);
        let mut inside = 0;
        for i in 0..WINDOWS {
            window = window.successor(i as f64 * 0.5);
            for probe in window.emit_probes(&policy, 1.0, i as f64 * 0.5) {
                let o = if r.random_bool(p) {
                    ProbeOutcome::Nack
                } else {
                    ProbeOutcome::Pack
                };
                window.record_feedback(probe.seq, o).unwrap();
            }
            if (window.blocking_probability().bp - p).abs() <= 3.0 * sigma {
                inside += 1;
            }
        }
        let frac = inside as f64 / WINDOWS as f64;
        ok &= frac >= 0.99;
        parts.push(format!("p={p}: {:.1}%", frac * 100.0));
    }
    verdict(ok, format!("within 3 sigma: {}", parts.join(", ")))
}

fn safety_invariants() -> Verdict {
    let sc = parse_config("random_failures = 1").unwrap();
    let topo = sc.default_topology();
    let point = sc.points()[0];
    let mut violations = Vec::new();
    let mut events = 0u64;
    let mut disrupted = 0;
    for seed in 1..=100u64 {
        let mut sim = Simulation::new(sc.sim_config(&topo, RouterKind::Rftr, point, seed)).unwrap();
        while sim.step().is_some() {
            events += 1;
            if let Err(e) = sim.check_invariants() {
                violations.push(format!("seed {seed} t={}: {e}", sim.now()));
                break;
            }
        }
        let r = sim.report();
        if r.accepted + r.blocked != 50 || r.offered != 50 {
            violations.push(format!(
                "seed {seed}: accepted {} + blocked {} != 50",
                r.accepted, r.blocked
            ));
        }
        if sim.topology().occupied_channels() != 0 || r.still_active != 0 {
            violations.push(format!("seed {seed}: channels leaked"));
        }
        if r.restored + r.dropped > 0 {
            disrupted += 1;
        }
    }
    verdict(
        violations.is_empty(),
        format!(
            "100 runs, {events} events checked, {disrupted} runs with a disrupted connection, {} violations{}",
            violations.len(),
            violations.first().map(|v| format!(" (first: {v})")).unwrap_or_default()
        ),
    )
}

fn determinism() -> Verdict {
    let sc = parse_config(
        "name = det\nrouters = rftr, baseline\nseeds = 11, 12, 13, 14\nrandom_failures = 2\n\
         holding_time = 2\nsweep = sources\nsweep_values = 1, 2, 4\n",
    )
    .unwrap();
    let topo = sc.default_topology();
    let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    for (d, parallel) in dirs.iter().zip([true, true, false]) {
        run_scenario(&sc, &topo, d.path(), parallel).unwrap();
    }
    let snapshot = |d: &tempfile::TempDir| {
        let mut files: Vec<(std::ffi::OsString, Vec<u8>)> = std::fs::read_dir(d.path())
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        files
    };
    let a = snapshot(&dirs[0]);
    let same = a == snapshot(&dirs[1]) && a == snapshot(&dirs[2]);
    verdict(
        same,
        format!(
            "{} files, parallel x2 and sequential byte-identical: {same}",
            a.len()
        ),
    )
}

/// Adjacent inversions larger than one pooled standard error.
fn inversions(rows: &[AggregateRow]) -> Vec<String> {
    rows.windows(2)
        .filter(|w| w[0].router == w[1].router)
        .filter_map(|w| {
            let pooled = (w[0].blocking_probability_se.powi(2)
                + w[1].blocking_probability_se.powi(2))
            .sqrt();
            let drop = w[0].blocking_probability - w[1].blocking_probability;
            (drop > pooled).then(|| {
                format!(
                    "{} {:?}->{:?}: {:.4} -> {:.4}",
                    w[0].router,
                    w[0].value,
                    w[1].value,
                    w[0].blocking_probability,
                    w[1].blocking_probability
                )
            })
        })
        .collect()
}

fn trend_rows(base: &str, sweep: &str) -> Vec<AggregateRow> {
    let seeds: Vec<String> = (1..=30).map(|s| s.to_string()).collect();
    let doc = format!(
        "{base}\nrouters = rftr, baseline\nseeds = {}\n{sweep}\n",
        seeds.join(",")
    );
    let sc: Scenario = parse_config(&doc).unwrap();
    let results = execute(&sc, &sc.default_topology(), true).unwrap();
    aggregate(&sc, &results)
}

fn qualitative_trends() -> Verdict {
    let sweeps = [
        ("rate", "sweep = rate\nsweep_values = 2, 4, 6, 8"),
        ("sources", "sweep = sources\nsweep_values = 1, 2, 3, 4"),
    ];
    let loads = [
        ("default", "name = default"),
        (
            "stressed",
            "name = stressed\nwavelengths = 2\nholding_time = 8",
        ),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (load, base) in loads {
        for (axis, sweep) in sweeps {
            let rows = trend_rows(base, sweep);
            let bad = inversions(&rows);
            ok &= bad.is_empty();
            let curve = |router: RouterKind| {
                rows.iter()
                    .filter(|r| r.router == router)
                    .map(|r| format!("{:.3}", r.blocking_probability))
                    .collect::<Vec<_>>()
                    .join("/")
            };
            parts.push(format!(
                "{load} {axis}: rftr {} baseline {}{}",
                curve(RouterKind::Rftr),
                curve(RouterKind::Baseline),
                if bad.is_empty() {
                    String::new()
                } else {
                    format!(" INVERTED {}", bad.join("; "))
                }
            ));
        }
    }
    verdict(ok, format!("30 seeds; {}", parts.join("; ")))
}

fn ring4(link3_channels: usize) -> Topology {
    Topology::parse(&format!(
        "nodes 4\nlink 0 1 10 8\nlink 1 2 10 8\nlink 2 3 10 8\nlink 3 0 10 {link3_channels}\n"
    ))
    .unwrap()
}

/// Runs one restoration scenario and reports the monitored 0->1
/// connection's state and top-ranked backup estimate right after link 0
/// fails at t = 2.
fn restoration_run(
    topo: Topology,
    scripted: Vec<Demand>,
    seed: u64,
) -> Result<(ConnectionState, Option<f64>), String> {
    let mut cfg = SimConfig::new(topo);
    cfg.seed = seed;
    cfg.max_requests = 20;
    cfg.scripted = scripted;
    cfg.failures = vec![LinkEvent {
        time: 2.0,
        link: LinkId(0),
    }];
    let mut sim = Simulation::new(cfg).map_err(|e| e.to_string())?;
    let watched = |sim: &Simulation| {
        sim.connections()
            .iter()
            .find(|c| c.src == NodeId(0) && c.dst == NodeId(1) && c.holding == 100.0)
            .cloned()
    };
    let mut before = None;
    while let Some(ev) = sim.step() {
        if matches!(ev.kind, EventKind::LinkFailure(_)) {
            let c = watched(&sim).ok_or("monitored connection missing")?;
            before = Some((c.state, c.backups.first().and_then(|b| b.bp)));
        }
    }
    let (state, bp) = before.ok_or("failure never fired")?;
    let c = watched(&sim).unwrap();
    if !c
        .primary
        .as_ref()
        .is_some_and(|p| p.path.uses_link(LinkId(0)))
    {
        return Err(format!("seed {seed}: primary avoided the failing link"));
    }
    Ok((state, bp))
}

fn restoration_efficacy() -> Verdict {
    let watched = Demand {
        time: 0.0,
        src: NodeId(0),
        dst: NodeId(1),
        holding: 100.0,
    };
    let saturate = Demand {
        time: 0.0,
        src: NodeId(0),
        dst: NodeId(3),
        holding: 1000.0,
    };
    let (mut restored, mut dropped, mut errors) = (0, 0, Vec::new());
    for seed in 1..=50 {
        match restoration_run(ring4(8), vec![watched], seed) {
            Ok((ConnectionState::Restored, Some(0.0))) => restored += 1,
            Ok(other) => errors.push(format!("restore arm seed {seed}: {other:?}")),
            Err(e) => errors.push(e),
        }
        match restoration_run(ring4(1), vec![saturate, watched], seed) {
            Ok((ConnectionState::Dropped, Some(1.0))) => dropped += 1,
            Ok(other) => errors.push(format!("drop arm seed {seed}: {other:?}")),
            Err(e) => errors.push(e),
        }
    }
    verdict(
        restored == 50 && dropped == 50,
        format!(
            "backup measured bp=0: restored {restored}/50; all candidates saturated: dropped {dropped}/50{}",
            errors.first().map(|e| format!(" (first problem: {e})")).unwrap_or_default()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 7] = [
        (
            "1 formula fidelity",
            Duration::from_secs(1),
            formula_fidelity,
        ),
        (
            "2 routing oracle equivalence",
            Duration::from_secs(30),
            routing_oracles,
        ),
        (
            "3 estimator convergence",
            Duration::from_secs(10),
            estimator_convergence,
        ),
        (
            "4 safety invariants under fuzzing",
            Duration::from_secs(60),
            safety_invariants,
        ),
        ("5 determinism", Duration::from_secs(300), determinism),
        (
            "6 qualitative trends",
            Duration::from_secs(300),
            qualitative_trends,
        ),
        (
            "7 restoration efficacy",
            Duration::from_secs(300),
            restoration_efficacy,
        ),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let v = check();
        let took = start.elapsed();
        let ok = v.ok && took <= budget;
        if !ok {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {} [{:.2}s, budget {}s]",
            if ok { "PASS" } else { "FAIL" },
            v.detail,
            took.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} of 7 criteria passed", 7 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
