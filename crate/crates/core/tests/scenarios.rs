use rftr::config::parse_config;
use rftr::runner::execute;
use rftr::sim::{RouterKind, SimConfig};
use rftr::topology::Topology;

#[test]
fn routers_agree_when_there_is_only_one_route() {
    // on a line every demand has exactly one route, so cost functions and
    // backup ranking cannot matter
    let line = Topology::parse("nodes 4\nlink 0 1 10 2\nlink 1 2 10 2\nlink 2 3 10 2\n").unwrap();
    for seed in 0..20 {
        let run = |router| {
            let mut cfg = SimConfig::new(line.clone());
            cfg.seed = seed;
            cfg.router = router;
            cfg.traffic.mean_holding = 4.0;
            rftr::run(cfg).unwrap()
        };
        let (a, b) = (run(RouterKind::Rftr), run(RouterKind::Baseline));
        assert_eq!(a.blocked, b.blocked, "seed {seed}");
        assert_eq!(a.packets_received, b.packets_received, "seed {seed}");
        assert_eq!(a.mean_delay, b.mean_delay, "seed {seed}");
        assert_eq!(b.probes_sent, 0);
    }
}

#[test]
fn shipped_topology_equals_builtin_mesh() {
    let text =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/topologies/mesh8.txt"))
            .unwrap();
    assert_eq!(
        Topology::parse(&text).unwrap(),
        Topology::default_mesh(8, 0.01)
    );
}

#[test]
fn default_scenario_conserves_demands() {
    let sc = parse_config("routers = rftr, baseline\nseeds = 1, 2, 3, 4, 5\nrandom_failures = 1")
        .unwrap();
    for r in execute(&sc, &sc.default_topology(), true).unwrap() {
        let rep = &r.report;
        assert_eq!(rep.offered, 50);
        assert_eq!(rep.accepted + rep.blocked, 50);
        assert_eq!(rep.completed + rep.dropped, rep.accepted);
        let last = rep.series.last().unwrap();
        assert_eq!(last.utilization, 0.0);
        assert_eq!(last.cumulative_packets, rep.packets_received);
    }
}

#[test]
fn sweep_run_and_row_counts() {
    let dir = tempfile::tempdir().unwrap();
    let sc = parse_config(
        "routers = rftr, baseline\nseeds = 1, 2, 3, 4, 5\nsweep = rate\nsweep_values = 2, 4, 6, 8",
    )
    .unwrap();
    let art = rftr::runner::run_scenario(&sc, &sc.default_topology(), dir.path(), true).unwrap();
    assert_eq!(art.series.len(), 40);
    let summary = std::fs::read_to_string(&art.summary).unwrap();
    assert_eq!(summary.lines().count(), 1 + 8);
    let runs = std::fs::read_to_string(&art.runs).unwrap();
    assert_eq!(runs.lines().count(), 1 + 40);

    let sc = parse_config("routers = rftr, baseline\nsweep = sources\nsweep_values = 1, 2, 3, 4")
        .unwrap();
    let rows = rftr::runner::aggregate(&sc, &execute(&sc, &sc.default_topology(), true).unwrap());
    for router in [RouterKind::Rftr, RouterKind::Baseline] {
        assert_eq!(rows.iter().filter(|r| r.router == router).count(), 4);
    }
}
