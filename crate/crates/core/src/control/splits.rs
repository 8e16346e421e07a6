/// Maps nonnegative weights onto the simplex with per-entry floors.
///
/// Shares are proportional to the weights except where that would undercut a
/// floor; such entries are pinned at their floor and the remaining mass is
/// redistributed over the others. All-zero weights share the free mass
/// equally. Floors must sum to at most one.
pub fn project_with_floors(weights: &[f64], floors: &[f64]) -> Vec<f64> {
    let n = weights.len();
    assert_eq!(n, floors.len(), "one floor per weight");
    assert!(n > 0, "need at least one share");
    debug_assert!(floors.iter().sum::<f64>() <= 1.0 + 1e-9, "floors exceed the simplex");
    debug_assert!(weights.iter().all(|w| *w >= 0.0 && w.is_finite()));

    let mut pinned = vec![false; n];
    loop {
        let free_mass = 1.0 - (0..n).filter(|&i| pinned[i]).map(|i| floors[i]).sum::<f64>();
        let free: Vec<usize> = (0..n).filter(|&i| !pinned[i]).collect();
        if free.is_empty() {
            // Only reachable when the floors sum to one.
            return floors.to_vec();
        }
        let wsum: f64 = free.iter().map(|&i| weights[i]).sum();
        let mut shares = floors.to_vec();
        for &i in &free {
            shares[i] = if wsum > 0.0 {
                free_mass * weights[i] / wsum
            } else {
                free_mass / free.len() as f64
            };
        }
        let mut changed = false;
        for &i in &free {
            if shares[i] < floors[i] {
                pinned[i] = true;
                changed = true;
            }
        }
        if !changed {
            return shares;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn proportional_when_floors_slack() {
        let s = project_with_floors(&[3.0, 1.0], &[0.1, 0.1]);
        assert!((s[0] - 0.75).abs() < 1e-12 && (s[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn floor_binds_and_mass_is_redistributed() {
        let f = 10.0 / 90.0;
        let s = project_with_floors(&[100.0, 0.1], &[f, f]);
        assert!((s[0] - (1.0 - f)).abs() < 1e-12);
        assert!((s[1] - f).abs() < 1e-12);
    }

    #[test]
    fn zero_weights_split_equally() {
        assert_eq!(project_with_floors(&[0.0, 0.0], &[0.1, 0.1]), vec![0.5, 0.5]);
    }

    proptest! {
        #[test]
        fn shares_are_on_the_floored_simplex(
            w in prop::collection::vec(0.0f64..50.0, 1..6),
            floor_frac in 0.0f64..1.0,
        ) {
            let n = w.len();
            let floors = vec![floor_frac / n as f64; n];
            let s = project_with_floors(&w, &floors);
            prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for (x, f) in s.iter().zip(&floors) {
                prop_assert!(*x >= f - 1e-12);
            }
        }
    }
}
