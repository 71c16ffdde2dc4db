//! Fixed inputs shared by the planner benchmarks.

use crouchnav::grid::{GridSpec, HeightGrid, LocalMapView};
use crouchnav::planner::condition_for_set;
use crouchnav::{CommandSet, State};

/// Walking start, a target 0.3 m ahead and a view with one obstacle.
pub fn reactive_case(set: &CommandSet) -> (State, State, LocalMapView) {
    let x0 = condition_for_set(&State::from_array([0.0, 0.0, 0.9, 0.0, 0.3, 0.0, 0.0, 0.0]), set);
    let target = condition_for_set(&State::from_array([0.3, 0.05, 0.85, 0.0, 0.4, 0.0, 0.0, 0.0]), set);
    let view = LocalMapView { obstacles: vec![[1.0, 0.5, 0.354]], h_min: 0.9, ..LocalMapView::empty([0.5, 0.0], 1.0) };
    (x0, target, view)
}

/// A 1.5 m local goal under a 0.85 m ceiling beside one obstacle.
pub fn local_case() -> (State, [f64; 2], LocalMapView) {
    let x0 = State::from_array([0.0, 0.0, 0.9, 0.0, 0.2, 0.0, 0.0, 0.0]);
    let view =
        LocalMapView { obstacles: vec![[0.9, 0.7, 0.354]], h_min: 0.85, ..LocalMapView::empty([0.75, 0.0], 1.0) };
    (x0, [1.5, 0.0], view)
}

/// A 40×40 explored grid with a comb of walls and a low band.
pub fn route_grid() -> HeightGrid {
    let mut g = HeightGrid::new(GridSpec { extent: [20.0, 20.0], ..Default::default() }).unwrap();
    for j in 0..40 {
        for i in 0..40 {
            let h = if i % 8 == 4 && (j + i / 8 * 13) % 40 > 6 {
                0.2
            } else if (18..22).contains(&j) {
                0.8
            } else {
                f64::INFINITY
            };
            g.set_height(i, j, Some(h), 1.0);
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crouchnav::collocation::SolveStatus;
    use crouchnav::planner::{plan_local, plan_reactive, PlannerConfig};
    use crouchnav::router::{astar, RouteOptions};

    #[test]
    fn fixtures_solve() {
        let set = CommandSet::default_flat();
        let cfg = PlannerConfig::default();
        let (x0, target, view) = reactive_case(&set);
        let (t, _) = plan_reactive(&x0, &target, &view, &cfg, &set, None).unwrap();
        assert_eq!(t.status, SolveStatus::Optimal);
        let (x0, goal, view) = local_case();
        let t = plan_local(&x0, goal, &view, &cfg, &set, None).unwrap();
        assert_eq!(t.status, SolveStatus::Optimal, "{} iterations", t.iterations);
        assert!(astar(&route_grid(), [0.25, 0.25], [19.75, 19.75], &RouteOptions::default()).is_ok());
    }
}
