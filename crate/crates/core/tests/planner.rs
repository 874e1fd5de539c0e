mod common;

use common::{config, dijkstra, oracle_costs, pick, random_world, GridWorld, Q};
use lavatube_core::map::{UpdatedCells, VoxelKey, VoxelState};
use lavatube_core::planner::{plan, DStarLite, PlanOutcome, PlannerConfig, RiskConfig, RiskGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn check(outcome: &PlanOutcome<Q>, expected: Option<Q>, grid: &RiskGrid<Q>, start: VoxelKey, goal: VoxelKey) {
    match (outcome, expected) {
        (PlanOutcome::Path(p), Some(c)) => {
            assert_eq!(p.total_cost, c);
            assert_eq!(p.keys[0], start);
            assert_eq!(p.goal(), goal);
            for w in p.keys.windows(2) {
                assert_eq!(w[0].chebyshev(w[1]), 1);
                assert!(grid.traversable(w[1]));
            }
        }
        (PlanOutcome::Inaccessible, None) => {}
        (o, e) => panic!("planner {:?} vs oracle {e:?}", o.path().map(|p| p.total_cost)),
    }
}

#[test]
fn plans_match_dijkstra_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..60 {
        let w = random_world(&mut rng, 12);
        let (cfg, p) = config(&mut rng);
        let grid = RiskGrid::<Q>::from_view(&w, w.lo, w.hi, cfg).unwrap();
        let costs = oracle_costs(&w, &p);
        for key in w.keys() {
            assert_eq!(grid.traversable(key), costs[&key].is_some());
            if let Some(c) = costs[&key] {
                assert_eq!(grid.cost(key), c);
            }
        }
        let Some(start) = pick(&mut rng, &w, |s| s != VoxelState::Occupied) else { continue };
        let Some(goal) = pick(&mut rng, &w, |s| s == VoxelState::Free) else { continue };
        let out = plan(&grid, start, goal, &PlannerConfig::default()).unwrap();
        check(&out, dijkstra(&w, &costs, start, goal), &grid, start, goal);
    }
}

#[test]
fn replanning_matches_fresh_dijkstra() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut replans = 0;
    for _ in 0..60 {
        let mut w = random_world(&mut rng, 10);
        let (cfg, p) = config(&mut rng);
        let mut grid = RiskGrid::<Q>::from_view(&w, w.lo, w.hi, cfg).unwrap();
        let Some(mut start) = pick(&mut rng, &w, |s| s != VoxelState::Occupied) else { continue };
        let Some(goal) = pick(&mut rng, &w, |s| s == VoxelState::Free) else { continue };
        let mut d = DStarLite::new(&grid, start, goal, Some((w.lo, w.hi)), &PlannerConfig::default()).unwrap();
        let mut out = d.plan(&grid).unwrap();
        for _round in 0..4 {
            if let Some(path) = out.path() {
                if path.len() > 2 {
                    start = path.keys[rng.random_range(1..path.len() - 1)];
                }
            }
            let mut changed = Vec::new();
            for _ in 0..rng.random_range(1..8) {
                let k = pick(&mut rng, &w, |_| true).unwrap();
                if k == start {
                    continue;
                }
                let s = [VoxelState::Free, VoxelState::Occupied, VoxelState::Unknown][rng.random_range(0..3)];
                w.cells.insert(k, s);
                changed.push(k);
            }
            let touched = grid.apply_updates(&w, &UpdatedCells::from_keys(changed));
            out = d.replan_on_update(&grid, start, &touched).unwrap();
            let costs = oracle_costs(&w, &p);
            check(&out, dijkstra(&w, &costs, start, goal), &grid, start, goal);
            replans += 1;
        }
    }
    assert!(replans > 100);
}

#[test]
fn unchanged_replan_returns_previous_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let w = random_world(&mut rng, 8);
    let grid = RiskGrid::<f64>::from_view(&w, w.lo, w.hi, RiskConfig::default()).unwrap();
    let start = pick(&mut rng, &w, |s| s == VoxelState::Free).unwrap();
    let goal = pick(&mut rng, &w, |s| s == VoxelState::Free).unwrap();
    let mut d = DStarLite::new(&grid, start, goal, None, &PlannerConfig::default()).unwrap();
    let a = d.plan(&grid).unwrap();
    let b = d.replan_on_update(&grid, start, &[]).unwrap();
    assert_eq!(a, b);
}

#[test]
fn float_costs_agree_with_exact_costs() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..30 {
        let w = random_world(&mut rng, 10);
        let (cfg, _) = config(&mut rng);
        let gq = RiskGrid::<Q>::from_view(&w, w.lo, w.hi, cfg.clone()).unwrap();
        let gf = RiskGrid::<f64>::from_view(&w, w.lo, w.hi, cfg).unwrap();
        let Some(start) = pick(&mut rng, &w, |s| s == VoxelState::Free) else { continue };
        let Some(goal) = pick(&mut rng, &w, |s| s == VoxelState::Free) else { continue };
        let q = plan(&gq, start, goal, &PlannerConfig::default()).unwrap();
        let f = plan(&gf, start, goal, &PlannerConfig::default()).unwrap();
        match (q.path(), f.path()) {
            (Some(a), Some(b)) => {
                let exact = *a.total_cost.numer() as f64 / *a.total_cost.denom() as f64;
                assert!((exact - b.total_cost).abs() <= 1e-9 * exact.max(1.0));
            }
            (None, None) => {}
            _ => panic!("reachability differs"),
        }
    }
}

#[test]
fn start_in_occupied_voxel_is_an_error() {
    let mut w = GridWorld {
        resolution: 0.5,
        lo: VoxelKey::new(0, 0, 0),
        hi: VoxelKey::new(4, 4, 0),
        cells: Default::default(),
    };
    for k in w.keys() {
        w.cells.insert(k, VoxelState::Free);
    }
    w.cells.insert(VoxelKey::new(0, 0, 0), VoxelState::Occupied);
    let grid = RiskGrid::<f64>::from_view(&w, w.lo, w.hi, RiskConfig::default()).unwrap();
    assert!(plan(&grid, VoxelKey::new(0, 0, 0), VoxelKey::new(4, 4, 0), &PlannerConfig::default()).is_err());
    let same = plan(&grid, VoxelKey::new(4, 4, 0), VoxelKey::new(4, 4, 0), &PlannerConfig::default()).unwrap();
    let p = same.path().unwrap();
    assert_eq!(p.len(), 1);
    assert_eq!(p.total_cost, grid.cost(VoxelKey::new(4, 4, 0)));
}
