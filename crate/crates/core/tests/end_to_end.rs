use mpcp_core::igp::RankingCheck;
use mpcp_core::planner::{certify_plan, RelocationPlan};
use mpcp_core::solver::{exact_small, Solver};
use mpcp_core::tdnet::{PiecewiseLinearTT, TDNetwork, TimeHorizon};
use mpcp_core::workbench::instance::instance_to_json;
use mpcp_core::workbench::{
    generate_instance, read_instance, run_bench, write_instance, BenchReport, Budget, GeneratorConfig, Instance,
};

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("n{i}")).collect()
}

/// Two facilities, two customers; the arc ranking flips halfway.
fn crossing_network() -> TDNetwork {
    let h = TimeHorizon::uniform(0.0, 40.0, 3).unwrap();
    let flat = |v: f64| PiecewiseLinearTT::constant(v, 0.0, 40.0).unwrap();
    let rising = PiecewiseLinearTT::new(vec![(0.0, 2.0), (10.0, 2.0), (20.0, 8.0), (40.0, 8.0)]).unwrap();
    let falling = PiecewiseLinearTT::new(vec![(0.0, 8.0), (10.0, 8.0), (20.0, 2.0), (40.0, 2.0)]).unwrap();
    TDNetwork::new(ids(2), ids(2), vec![rising, flat(5.0), falling, flat(5.0)], h).unwrap()
}

#[test]
fn instance_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for config in [GeneratorConfig::crossing(9, 10, 3), GeneratorConfig::common(6, 4, 4)] {
        let inst = generate_instance(&config).unwrap();
        let path = dir.path().join("inst.json");
        write_instance(&path, &inst).unwrap();
        assert_eq!(read_instance(&path).unwrap(), inst);
    }
}

#[test]
fn generation_is_byte_identical() {
    let cfg = GeneratorConfig::crossing(12, 30, 99);
    let a = instance_to_json(&generate_instance(&cfg).unwrap());
    let b = instance_to_json(&generate_instance(&cfg).unwrap());
    assert_eq!(a, b);
}

fn without_timings(mut r: BenchReport) -> BenchReport {
    for row in &mut r.rows {
        (row.phase1_s, row.phase2_s, row.total_s) = (0.0, 0.0, 0.0);
    }
    for cell in &mut r.cells {
        (cell.phase1_s, cell.phase2_s, cell.total_s) = (0.0, 0.0, 0.0);
    }
    r
}

#[test]
fn bench_is_deterministic_apart_from_timings() {
    let make = || -> Vec<Instance> {
        (0..3)
            .map(|s| generate_instance(&GeneratorConfig::crossing(10, 12, s)).unwrap())
            .collect()
    };
    let budgets = [Budget::Fixed(0), Budget::Fixed(2), Budget::Fixed(4)];
    let a = without_timings(run_bench(&make(), &[2, 3], &budgets));
    let b = without_timings(run_bench(&make(), &[2, 3], &budgets));
    assert_eq!(a, b);
    assert_eq!(a.rows.len(), 8);
    for row in a.rows.iter().filter(|r| r.k == "12") {
        assert_eq!((row.gap, row.gain), (0.0, 1.0));
    }
}

#[test]
fn static_instances_never_gap() {
    let inst = generate_instance(&GeneratorConfig::static_times(9, 8, 5)).unwrap();
    let solver = Solver::new(&inst.network).unwrap();
    for k in [0, 3, 8] {
        assert_eq!(solver.solve(3, k, false).unwrap().gap, 0.0);
    }
}

#[test]
fn heuristic_above_exact_on_small_random_instance() {
    let inst = generate_instance(&GeneratorConfig::crossing(6, 4, 21)).unwrap();
    let net = &inst.network;
    let solver = Solver::new(net).unwrap();
    let heuristic = solver.heuristic(2, 1).unwrap().0.objective;
    let exact = exact_small(net, 2, 1).unwrap();
    assert!(exact.value <= heuristic);
    assert_eq!(exact_small(net, 2, 4).unwrap().value, solver.lower_bound(2).unwrap());
}

#[test]
fn exact_matches_heuristic_without_relocation_when_invariant() {
    for seed in 0..5 {
        let inst = generate_instance(&GeneratorConfig::common(6, 3, seed)).unwrap();
        let net = &inst.network;
        let exact = exact_small(net, 2, 0).unwrap().value;
        let heuristic = Solver::new(net).unwrap().heuristic(2, 0).unwrap().0.objective;
        assert_eq!(exact, heuristic);
    }
}

#[test]
fn certificates_on_common_profiles() {
    for seed in 0..6 {
        let inst = generate_instance(&GeneratorConfig::common(8, 10, seed)).unwrap();
        let solver = Solver::new(&inst.network).unwrap();
        for k in [0, 2, 5, 10] {
            let r = solver.solve(2, k, true).unwrap();
            let cert = r.certificate.unwrap();
            assert!((cert.delta - 1.0).abs() < 1e-9, "delta {}", cert.delta);
            assert!(cert.optimal);
            assert_eq!(r.gap, 0.0);
        }
    }
}

#[test]
fn crossing_inside_a_block_is_reported() {
    let net = crossing_network();
    let solver = Solver::new(&net).unwrap();
    let whole = certify_plan(&net, solver.table(), &RelocationPlan::none(3)).unwrap();
    assert!(!whole.optimal);
    match &whole.rankings[0] {
        RankingCheck::Crossing {
            first,
            second,
            period_a,
            period_b,
        } => {
            let t = solver.table();
            assert!(t.get(*first, *period_a) < t.get(*second, *period_a));
            assert!(t.get(*first, *period_b) > t.get(*second, *period_b));
        }
        RankingCheck::Invariant => panic!("expected a crossing"),
    }
    let every = certify_plan(&net, solver.table(), &RelocationPlan::all(3)).unwrap();
    assert!(every.optimal);
    assert!(every.rankings.iter().all(RankingCheck::is_invariant));
}

#[test]
fn relocating_helps_on_the_crossing_network() {
    let net = crossing_network();
    let solver = Solver::new(&net).unwrap();
    let stay = solver.solve(1, 0, false).unwrap();
    let moved = solver.solve(1, 3, false).unwrap();
    assert!(moved.solution.objective < stay.solution.objective);
    assert_eq!(moved.gap, 0.0);
    assert!(stay.gap > 0.0);
    assert_eq!(stay.gain, 0.0);
}
