//! Brute-force solvers for instances small enough to enumerate. These back
//! the theorem regression command and serve as ground truth in tests; they
//! share no code with the algorithms they check.

use crate::baseline::{assign_nearest, Assignment};
use crate::dataset::GroupedDataset;

/// All k-subsets of {0, .., n-1} in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        // advance
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn guard(n_facilities: usize, k: usize) {
    let mut count: u128 = 1;
    for i in 0..k {
        count = count.saturating_mul((n_facilities - i) as u128) / (i as u128 + 1);
        assert!(
            count <= 5_000_000,
            "exhaustive search over C({n_facilities},{k}) subsets is too large"
        );
    }
}

/// Minimum fair objective (max of per-group weighted average distances) over
/// all k-subsets of the candidate facilities.
pub fn exhaustive_fair_kmedian(ds: &GroupedDataset, k: usize) -> (Vec<usize>, f64) {
    guard(ds.n_facilities(), k);
    let mut best: (Vec<usize>, f64) = (Vec::new(), f64::INFINITY);
    for centers in combinations(ds.n_facilities(), k) {
        let a = assign_nearest(ds, &centers);
        let obj = a.fair_objective();
        if obj < best.1 {
            best = (centers, obj);
        }
    }
    best
}

/// Minimum weighted-sum k-median cost over all k-subsets of facilities.
/// `weights` overrides the dataset's point weights when given.
pub fn exhaustive_weighted_kmedian(
    ds: &GroupedDataset,
    weights: Option<&[f64]>,
    k: usize,
) -> (Vec<usize>, f64) {
    guard(ds.n_facilities(), k);
    let mut best: (Vec<usize>, f64) = (Vec::new(), f64::INFINITY);
    for centers in combinations(ds.n_facilities(), k) {
        let a = assign_nearest(ds, &centers);
        let cost = match weights {
            None => a.total_cost,
            Some(w) => a
                .distances
                .iter()
                .zip(w)
                .map(|(d, wi)| d * wi)
                .sum(),
        };
        if cost < best.1 {
            best = (centers, cost);
        }
    }
    best
}

/// Minimum k-center radius over all k-subsets of the *points* (farthest
/// point to its nearest chosen point).
pub fn exhaustive_kcenter_points(ds: &GroupedDataset, k: usize) -> (Vec<usize>, f64) {
    guard(ds.n_points(), k);
    let n = ds.n_points();
    let mut best: (Vec<usize>, f64) = (Vec::new(), f64::INFINITY);
    for centers in combinations(n, k) {
        let mut radius: f64 = 0.0;
        for u in 0..n {
            let d = centers
                .iter()
                .map(|&c| ds.d_pp(u, c))
                .fold(f64::INFINITY, f64::min);
            radius = radius.max(d);
        }
        if radius < best.1 {
            best = (centers, radius);
        }
    }
    best
}

/// Fair objective of a fixed center set; convenience for regression checks.
pub fn fair_objective_of(ds: &GroupedDataset, centers: &[usize]) -> (Assignment, f64) {
    let a = assign_nearest(ds, centers);
    let obj = a.fair_objective();
    (a, obj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::integrality_gap_instance;

    #[test]
    fn combinations_enumerate_lexicographically() {
        assert_eq!(
            combinations(4, 2),
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
        assert_eq!(combinations(3, 0), vec![Vec::<usize>::new()]);
        assert!(combinations(2, 3).is_empty());
    }

    #[test]
    fn gap_instance_integral_optimum_is_d() {
        for m in 2..=5 {
            for d in [1.0, 7.0] {
                let (ds, k) = integrality_gap_instance(m, d).unwrap();
                let (_, opt) = exhaustive_fair_kmedian(&ds, k);
                assert!((opt - d).abs() < 1e-12, "m={m} d={d} opt={opt}");
            }
        }
    }
}
