use crouchnav::command_set::{select_set, CommandSet, SetLibrary};
use proptest::prelude::*;

fn permuted_flat() -> impl Strategy<Value = CommandSet> {
    Just(CommandSet::default_flat().vertices).prop_shuffle().prop_map(|v| {
        let flat = CommandSet::default_flat();
        CommandSet::new(v, flat.yaw_rate_bounds, 0.0).unwrap()
    })
}

fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, n).prop_filter_map("zero weights", |w| {
        let s: f64 = w.iter().sum();
        (s > 1e-3).then(|| w.iter().map(|x| x / s).collect())
    })
}

proptest! {
    #[test]
    fn every_vertex_is_a_member(set in permuted_flat()) {
        for v in &set.vertices {
            prop_assert!(set.contains(*v, 1e-9));
        }
    }

    #[test]
    fn membership_ignores_vertex_order(
        set in permuted_flat(),
        p in (-1.0..1.4f64, -0.7..0.7f64, 0.6..1.05f64),
    ) {
        let p = [p.0, p.1, p.2];
        let flat = CommandSet::default_flat();
        prop_assert_eq!(set.contains(p, 1e-6), flat.contains(p, 1e-6));
        prop_assert!((set.margin(p) - flat.margin(p)).abs() < 1e-9);
    }

    #[test]
    fn convex_combinations_are_members(w in weights(10)) {
        let set = CommandSet::default_flat();
        let mut p = [0.0; 3];
        for (wj, v) in w.iter().zip(&set.vertices) {
            for k in 0..3 {
                p[k] += wj * v[k];
            }
        }
        prop_assert!(set.contains(p, 1e-9));
    }

    #[test]
    fn flat_set_stays_inside_documented_extremes(w in weights(10)) {
        let set = CommandSet::default_flat();
        let mut p = [0.0; 3];
        for (wj, v) in w.iter().zip(&set.vertices) {
            for k in 0..3 {
                p[k] += wj * v[k];
            }
        }
        prop_assert!((0.7 - 1e-12..=1.0 + 1e-12).contains(&p[2]));
        prop_assert!(p[1].abs() <= 0.5 + 1e-12);
        prop_assert!((-0.6 - 1e-12..=1.2 + 1e-12).contains(&p[0]));
    }

    #[test]
    fn projection_lands_in_the_set(p in (-1.5..1.5f64, -0.8..0.8f64, 0.5..1.2f64)) {
        let set = CommandSet::default_flat();
        let q = set.project([p.0, p.1, p.2]);
        prop_assert!(set.contains(q, 1e-7));
    }

    #[test]
    fn selection_picks_nearest_slope(slope in -30.0..30.0f64) {
        let lib = SetLibrary::default();
        let chosen = select_set(&lib, slope).unwrap().slope_angle;
        for key in [-10.0, 0.0, 10.0f64] {
            prop_assert!((chosen - slope).abs() <= (key - slope).abs() + 1e-12);
        }
    }
}

#[test]
fn envelope_corners_from_hardware_observations() {
    let set = CommandSet::default_flat();
    assert!(set.contains([1.2, 0.0, 0.95], 1e-6));
    assert!(!set.contains([1.2, 0.0, 0.70], 1e-6));
    assert!(set.contains(set.centroid(), 1e-9));
}

#[test]
fn slope_library_lookup() {
    let lib = SetLibrary::default();
    assert_eq!(select_set(&lib, 0.0).unwrap(), &CommandSet::default_flat());
    assert_eq!(select_set(&lib, 4.0).unwrap().slope_angle, 0.0);
    assert_eq!(select_set(&lib, 6.0).unwrap().slope_angle, 10.0);
    assert_eq!(select_set(&lib, 5.0).unwrap().slope_angle, 0.0);
    let decline = select_set(&lib, -10.0).unwrap();
    assert!(decline.bounding_box()[2][0] > CommandSet::default_flat().bounding_box()[2][0]);
    let empty = SetLibrary { sets: Default::default() };
    assert!(select_set(&empty, 0.0).is_err());
}
