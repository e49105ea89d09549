//! Swap-based local search for weighted k-median, the uniform-weight fair
//! baseline built on it, and the per-group k-median approximation the
//! relative-error pipeline needs as a scale.

use crate::dataset::{DataPoint, Facilities, GroupedDataset, MetricSource};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Minimum relative improvement a swap must deliver to be accepted. Keeps
/// the search strictly decreasing and guarantees termination.
pub const SWAP_IMPROVEMENT: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// A chosen set of facility indices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CenterSet {
    pub centers: Vec<usize>,
    /// The budget the producing algorithm aimed for; |centers| may be below
    /// it and bi-criteria producers may exceed it.
    pub k: usize,
}

/// Point-to-center mapping with per-group cost bookkeeping. Costs are
/// weighted sums of distances; the fair objective divides each by the
/// group's weight and takes the maximum.
#[derive(Debug, Clone, Serialize)]
pub struct Assignment {
    /// Facility index each point is assigned to.
    pub assigned: Vec<usize>,
    pub distances: Vec<f64>,
    pub group_costs: Vec<f64>,
    pub group_weights: Vec<f64>,
    pub total_cost: f64,
}

impl Assignment {
    pub fn fair_objective(&self) -> f64 {
        self.group_costs
            .iter()
            .zip(&self.group_weights)
            .map(|(c, w)| if *w > 0.0 { c / w } else { 0.0 })
            .fold(0.0, f64::max)
    }

    pub fn group_averages(&self) -> Vec<f64> {
        self.group_costs
            .iter()
            .zip(&self.group_weights)
            .map(|(c, w)| if *w > 0.0 { c / w } else { 0.0 })
            .collect()
    }
}

/// Assign every point to its nearest center (ties to the lowest facility
/// index) and tally weighted costs.
pub fn assign_nearest(ds: &GroupedDataset, centers: &[usize]) -> Assignment {
    assert!(!centers.is_empty(), "cannot assign to an empty center set");
    let dists: Vec<(usize, f64)> = (0..ds.n_points())
        .into_par_iter()
        .map(|u| {
            let mut best = (centers[0], f64::INFINITY);
            for &c in centers {
                let d = ds.d_pf(u, c);
                if d < best.1 || (d == best.1 && c < best.0) {
                    best = (c, d);
                }
            }
            best
        })
        .collect();
    let mut group_costs = vec![0.0; ds.n_groups()];
    let mut group_weights = vec![0.0; ds.n_groups()];
    let mut total = 0.0;
    let mut assigned = Vec::with_capacity(ds.n_points());
    let mut distances = Vec::with_capacity(ds.n_points());
    for (p, (c, d)) in ds.points().iter().zip(dists) {
        assigned.push(c);
        distances.push(d);
        group_costs[p.group] += p.weight * d;
        group_weights[p.group] += p.weight;
        total += p.weight * d;
    }
    Assignment {
        assigned,
        distances,
        group_costs,
        group_weights,
        total_cost: total,
    }
}

/// Objective the swap search minimizes.
#[derive(Debug, Clone, Copy)]
pub enum SwapObjective<'a> {
    /// Sum of weight * distance. `None` uses the dataset's point weights.
    WeightedSum(Option<&'a [f64]>),
    /// Max over groups of weighted average distance.
    FairAbsError,
}

#[derive(Debug, Clone)]
pub struct LocalSearchOpts {
    pub swap_budget: usize,
    pub seed: u64,
    pub initial: Option<Vec<usize>>,
    pub max_rounds: usize,
}

impl Default for LocalSearchOpts {
    fn default() -> Self {
        LocalSearchOpts {
            swap_budget: 1,
            seed: 0,
            initial: None,
            max_rounds: 10_000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalSearchOutcome {
    pub centers: CenterSet,
    pub assignment: Assignment,
    pub objective: f64,
    /// Objective after each accepted swap, starting with the initial value.
    /// Strictly decreasing by construction.
    pub cost_trace: Vec<f64>,
    pub rounds: usize,
}

struct ObjectiveEval<'a> {
    ds: &'a GroupedDataset,
    weights: Vec<f64>,
    group_weights: Vec<f64>,
    fair: bool,
}

impl<'a> ObjectiveEval<'a> {
    fn new(ds: &'a GroupedDataset, objective: &SwapObjective) -> Self {
        let (weights, fair) = match objective {
            SwapObjective::WeightedSum(Some(w)) => (w.to_vec(), false),
            SwapObjective::WeightedSum(None) => {
                (ds.points().iter().map(|p| p.weight).collect(), false)
            }
            SwapObjective::FairAbsError => {
                (ds.points().iter().map(|p| p.weight).collect(), true)
            }
        };
        let mut group_weights = vec![0.0; ds.n_groups()];
        for p in ds.points() {
            group_weights[p.group] += p.weight;
        }
        ObjectiveEval {
            ds,
            weights,
            group_weights,
            fair,
        }
    }

    /// Objective value given each point's service distance.
    fn value_at<F: Fn(usize) -> f64>(&self, dist_of: F) -> f64 {
        if self.fair {
            let mut sums = vec![0.0; self.ds.n_groups()];
            for (u, p) in self.ds.points().iter().enumerate() {
                sums[p.group] += self.weights[u] * dist_of(u);
            }
            sums.iter()
                .zip(&self.group_weights)
                .map(|(c, w)| if *w > 0.0 { c / w } else { 0.0 })
                .fold(0.0, f64::max)
        } else {
            (0..self.ds.n_points())
                .map(|u| self.weights[u] * dist_of(u))
                .sum()
        }
    }
}

/// Per-point nearest and second-nearest service distances under a center
/// set, the state single swaps are evaluated against.
struct ServiceState {
    near_center: Vec<usize>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl ServiceState {
    fn compute(ds: &GroupedDataset, centers: &[usize]) -> Self {
        let rows: Vec<(usize, f64, f64)> = (0..ds.n_points())
            .into_par_iter()
            .map(|u| {
                let mut c1 = usize::MAX;
                let mut d1 = f64::INFINITY;
                let mut d2 = f64::INFINITY;
                for &c in centers {
                    let d = ds.d_pf(u, c);
                    if d < d1 || (d == d1 && c < c1) {
                        d2 = d1;
                        d1 = d;
                        c1 = c;
                    } else if d < d2 {
                        d2 = d;
                    }
                }
                (c1, d1, d2)
            })
            .collect();
        let mut near_center = Vec::with_capacity(rows.len());
        let mut d1 = Vec::with_capacity(rows.len());
        let mut d2 = Vec::with_capacity(rows.len());
        for (c, a, b) in rows {
            near_center.push(c);
            d1.push(a);
            d2.push(b);
        }
        ServiceState { near_center, d1, d2 }
    }
}

/// Deterministic farthest-point seeding over the candidate facilities: the
/// seed picks the first center, each following center maximizes the minimum
/// distance to those already chosen (ties to the lowest index).
fn farthest_point_init(ds: &GroupedDataset, k: usize, seed: u64) -> Vec<usize> {
    let nf = ds.n_facilities();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.gen_range(0..nf);
    let mut chosen = vec![first];
    let mut mind: Vec<f64> = (0..nf).map(|f| ds.d_ff(f, first)).collect();
    while chosen.len() < k {
        let mut best = (0usize, f64::NEG_INFINITY);
        for f in 0..nf {
            if chosen.contains(&f) {
                continue;
            }
            if mind[f] > best.1 {
                best = (f, mind[f]);
            }
        }
        chosen.push(best.0);
        for f in 0..nf {
            let d = ds.d_ff(f, best.0);
            if d < mind[f] {
                mind[f] = d;
            }
        }
    }
    chosen.sort_unstable();
    chosen
}

/// p-swap local search over candidate facilities. The single-swap path is
/// incremental; larger budgets re-evaluate whole candidate sets and are only
/// meant for small instances.
pub fn local_search_kmedian(
    ds: &GroupedDataset,
    k: usize,
    objective: SwapObjective,
    opts: &LocalSearchOpts,
) -> Result<LocalSearchOutcome, BaselineError> {
    let nf = ds.n_facilities();
    if k == 0 || k > nf {
        return Err(BaselineError::InvalidInput(format!(
            "k={k} out of range for {nf} facilities"
        )));
    }
    if ds.n_points() == 0 {
        return Err(BaselineError::InvalidInput("empty point set".into()));
    }
    let eval = ObjectiveEval::new(ds, &objective);
    let mut centers = match &opts.initial {
        Some(init) => {
            let mut c = init.clone();
            c.sort_unstable();
            c.dedup();
            if c.len() != k || c.iter().any(|&f| f >= nf) {
                return Err(BaselineError::InvalidInput(
                    "initial centers must be k distinct facility indices".into(),
                ));
            }
            c
        }
        None => farthest_point_init(ds, k, opts.seed),
    };

    let mut state = ServiceState::compute(ds, &centers);
    let mut current = eval.value_at(|u| state.d1[u]);
    let mut trace = vec![current];
    let mut rounds = 0usize;

    loop {
        if rounds >= opts.max_rounds {
            break;
        }
        rounds += 1;
        let improvement = if opts.swap_budget <= 1 {
            best_single_swap(ds, &eval, &centers, &state, current)
        } else {
            best_multi_swap(ds, &eval, &centers, opts.swap_budget, current)
        };
        match improvement {
            Some((new_cost, new_centers)) => {
                centers = new_centers;
                state = ServiceState::compute(ds, &centers);
                current = new_cost;
                trace.push(current);
            }
            None => break,
        }
    }

    let assignment = assign_nearest(ds, &centers);
    Ok(LocalSearchOutcome {
        centers: CenterSet { centers, k },
        assignment,
        objective: current,
        cost_trace: trace,
        rounds,
    })
}

/// Evaluate all (open, closed) single swaps in parallel, then pick the best
/// improving one by (cost, open index, closed index) so the result does not
/// depend on thread scheduling.
fn best_single_swap(
    ds: &GroupedDataset,
    eval: &ObjectiveEval,
    centers: &[usize],
    state: &ServiceState,
    current: f64,
) -> Option<(f64, Vec<usize>)> {
    let nf = ds.n_facilities();
    let closed: Vec<usize> = (0..nf).filter(|f| !centers.contains(f)).collect();
    let mut candidates: Vec<(usize, usize)> = Vec::with_capacity(centers.len() * closed.len());
    for &r in centers {
        for &a in &closed {
            candidates.push((r, a));
        }
    }
    let scored: Vec<(f64, usize, usize)> = candidates
        .par_iter()
        .map(|&(r, a)| {
            let cost = eval.value_at(|u| {
                let base = if state.near_center[u] == r {
                    state.d2[u]
                } else {
                    state.d1[u]
                };
                base.min(ds.d_pf(u, a))
            });
            (cost, r, a)
        })
        .collect();
    let best = scored
        .into_iter()
        .min_by(|x, y| x.partial_cmp(y).unwrap())?;
    if best.0 < current * (1.0 - SWAP_IMPROVEMENT) {
        let mut new_centers: Vec<usize> =
            centers.iter().copied().filter(|&c| c != best.1).collect();
        new_centers.push(best.2);
        new_centers.sort_unstable();
        Some((best.0, new_centers))
    } else {
        None
    }
}

fn best_multi_swap(
    ds: &GroupedDataset,
    eval: &ObjectiveEval,
    centers: &[usize],
    budget: usize,
    current: f64,
) -> Option<(f64, Vec<usize>)> {
    let nf = ds.n_facilities();
    let closed: Vec<usize> = (0..nf).filter(|f| !centers.contains(f)).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for q in 1..=budget.min(centers.len()).min(closed.len()) {
        for out in crate::exhaustive::combinations(centers.len(), q) {
            for inn in crate::exhaustive::combinations(closed.len(), q) {
                let mut cand: Vec<usize> = centers
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !out.contains(i))
                    .map(|(_, &c)| c)
                    .collect();
                cand.extend(inn.iter().map(|&i| closed[i]));
                cand.sort_unstable();
                let st = ServiceState::compute(ds, &cand);
                let cost = eval.value_at(|u| st.d1[u]);
                if best.as_ref().map(|(b, _)| cost < *b).unwrap_or(true) {
                    best = Some((cost, cand));
                }
            }
        }
    }
    match best {
        Some((cost, cand)) if cost < current * (1.0 - SWAP_IMPROVEMENT) => Some((cost, cand)),
        _ => None,
    }
}

/// Weighted k-median local search with explicit per-point weights.
pub fn weighted_local_search_kmedian(
    ds: &GroupedDataset,
    k: usize,
    weights: Option<&[f64]>,
    opts: &LocalSearchOpts,
) -> Result<LocalSearchOutcome, BaselineError> {
    if let Some(w) = weights {
        if w.len() != ds.n_points() {
            return Err(BaselineError::InvalidInput(format!(
                "{} weights for {} points",
                w.len(),
                ds.n_points()
            )));
        }
        if w.iter().any(|x| !(*x > 0.0)) {
            return Err(BaselineError::InvalidInput(
                "weights must be positive".into(),
            ));
        }
    }
    local_search_kmedian(ds, k, SwapObjective::WeightedSum(weights), opts)
}

/// The simple observation baseline: weight every point by the inverse of its
/// group's total weight and run standard weighted local search. Returns the
/// outcome together with the fair objective of the resulting assignment.
pub fn obs1_fair_baseline(
    ds: &GroupedDataset,
    k: usize,
    opts: &LocalSearchOpts,
) -> Result<(LocalSearchOutcome, f64), BaselineError> {
    let gw = ds.group_weights();
    let weights: Vec<f64> = ds
        .points()
        .iter()
        .map(|p| p.weight / gw[p.group])
        .collect();
    let outcome = weighted_local_search_kmedian(ds, k, Some(&weights), opts)?;
    let fair = outcome.assignment.fair_objective();
    Ok((outcome, fair))
}

/// Dataset restricted to a single group (weights, entities and the facility
/// list are preserved).
pub fn group_subset(ds: &GroupedDataset, group: usize) -> Result<GroupedDataset, BaselineError> {
    if group >= ds.n_groups() {
        return Err(BaselineError::InvalidInput(format!(
            "group {group} out of range"
        )));
    }
    let points: Vec<DataPoint> = ds
        .points()
        .iter()
        .filter(|p| p.group == group)
        .map(|p| DataPoint {
            coords: p.coords.clone(),
            weight: p.weight,
            group: 0,
            entity: p.entity,
        })
        .collect();
    if points.is_empty() {
        return Err(BaselineError::InvalidInput(format!(
            "group {group} has no points"
        )));
    }
    let facilities = match ds.facilities() {
        Facilities::Coords(c) => Facilities::Coords(c.clone()),
        Facilities::Entities(e) => Facilities::Entities(e.clone()),
    };
    let metric = match ds.metric() {
        MetricSource::Kernel(k) => MetricSource::Kernel(*k),
        MetricSource::Matrix { n, dist } => MetricSource::Matrix {
            n: *n,
            dist: dist.clone(),
        },
    };
    GroupedDataset::new(
        points,
        vec![ds.group_labels()[group].clone()],
        facilities,
        metric,
    )
    .map_err(|e| BaselineError::InvalidInput(e.to_string()))
}

/// K-Med-Approx(X_i): the local-search k-median cost of one group on its
/// own, used as the per-group scale of the relative-error LP.
pub fn kmed_approx(
    ds: &GroupedDataset,
    group: usize,
    k: usize,
    opts: &LocalSearchOpts,
) -> Result<f64, BaselineError> {
    let sub = group_subset(ds, group)?;
    let k = k.min(sub.n_facilities());
    let outcome = weighted_local_search_kmedian(&sub, k, None, opts)?;
    Ok(outcome.assignment.total_cost)
}

/// Nominal approximation factor of single-swap local search for k-median,
/// reported alongside relative-error certificates.
pub const LOCAL_SEARCH_NOMINAL_RHO: f64 = 5.0;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{local_search_trap_instance, DataPoint, Facilities, MetricSource};
    use crate::geo::MetricKind;

    fn line_dataset(xs: &[f64], groups: &[usize], m: usize) -> GroupedDataset {
        let points = xs
            .iter()
            .zip(groups)
            .enumerate()
            .map(|(i, (&x, &g))| DataPoint {
                coords: vec![x],
                weight: 1.0,
                group: g,
                entity: i,
            })
            .collect();
        let labels = (0..m).map(|g| format!("g{g}")).collect();
        let facs = xs.iter().map(|&x| vec![x]).collect();
        GroupedDataset::new(
            points,
            labels,
            Facilities::Coords(facs),
            MetricSource::Kernel(MetricKind::Euclidean { dim: 1 }),
        )
        .unwrap()
    }

    #[test]
    fn all_facilities_open_costs_nearest_sum() {
        let ds = line_dataset(&[0.0, 1.0, 5.0, 6.0], &[0, 0, 0, 0], 1);
        let out = local_search_kmedian(
            &ds,
            4,
            SwapObjective::WeightedSum(None),
            &LocalSearchOpts::default(),
        )
        .unwrap();
        assert_eq!(out.assignment.total_cost, 0.0);
    }

    #[test]
    fn six_points_within_five_times_bruteforce() {
        let ds = line_dataset(&[0.0, 0.2, 0.9, 4.0, 4.3, 9.0], &[0; 6], 1);
        let (_, opt) = crate::exhaustive::exhaustive_weighted_kmedian(&ds, None, 2);
        let out = local_search_kmedian(
            &ds,
            2,
            SwapObjective::WeightedSum(None),
            &LocalSearchOpts::default(),
        )
        .unwrap();
        assert!(out.assignment.total_cost >= opt - 1e-12);
        assert!(out.assignment.total_cost <= 5.0 * opt + 1e-12);
    }

    #[test]
    fn trap_start_is_local_optimum_for_fair_objective() {
        let trap = local_search_trap_instance(10, 1.0, 0.01, None).unwrap();
        let opts = LocalSearchOpts {
            initial: Some(vec![trap.a1, trap.b1]),
            ..Default::default()
        };
        let out =
            local_search_kmedian(&trap.dataset, 2, SwapObjective::FairAbsError, &opts).unwrap();
        let mut got = out.centers.centers.clone();
        got.sort_unstable();
        assert_eq!(got, vec![trap.a1, trap.b1]);
        assert_eq!(out.cost_trace.len(), 1, "no swap should be accepted");
    }

    #[test]
    fn obs1_reduces_to_unweighted_for_uniform_groups() {
        // one group: weights all 1/|X|, a positive rescale of the unweighted
        // objective, so the search must walk the same path
        let ds = line_dataset(&[0.0, 1.0, 2.0, 10.0, 11.0], &[0; 5], 1);
        let opts = LocalSearchOpts::default();
        let (outcome, _) = obs1_fair_baseline(&ds, 2, &opts).unwrap();
        let unweighted = local_search_kmedian(
            &ds,
            2,
            SwapObjective::WeightedSum(None),
            &opts,
        )
        .unwrap();
        assert_eq!(outcome.centers.centers, unweighted.centers.centers);

        // two equal-size groups: same conclusion
        let ds2 = line_dataset(&[0.0, 1.0, 2.0, 10.0, 11.0, 12.0], &[0, 1, 0, 1, 0, 1], 2);
        let (outcome2, _) = obs1_fair_baseline(&ds2, 2, &opts).unwrap();
        let unweighted2 =
            local_search_kmedian(&ds2, 2, SwapObjective::WeightedSum(None), &opts).unwrap();
        assert_eq!(outcome2.centers.centers, unweighted2.centers.centers);
    }

    #[test]
    fn kmed_approx_trivial_zeroes() {
        let ds = line_dataset(&[3.0], &[0], 1);
        assert_eq!(
            kmed_approx(&ds, 0, 1, &LocalSearchOpts::default()).unwrap(),
            0.0
        );
        let ds2 = line_dataset(&[0.0, 4.0], &[0, 0], 1);
        assert_eq!(
            kmed_approx(&ds2, 0, 2, &LocalSearchOpts::default()).unwrap(),
            0.0
        );
    }

    #[test]
    fn kmed_approx_within_five_of_exhaustive() {
        let ds = line_dataset(
            &[0.0, 0.5, 1.0, 1.5, 6.0, 6.5, 7.0, 12.0],
            &[0; 8],
            1,
        );
        let (_, opt) = crate::exhaustive::exhaustive_weighted_kmedian(&ds, None, 2);
        let got = kmed_approx(&ds, 0, 2, &LocalSearchOpts::default()).unwrap();
        assert!(got >= opt - 1e-12 && got <= 5.0 * opt + 1e-12, "got {got}, opt {opt}");
    }

    #[test]
    fn nearest_assignment_is_exactly_nearest() {
        let ds = line_dataset(&[0.0, 1.0, 2.0, 3.0, 4.0], &[0; 5], 1);
        let a = assign_nearest(&ds, &[1, 3]);
        for (u, &c) in a.assigned.iter().enumerate() {
            for &other in &[1usize, 3usize] {
                assert!(ds.d_pf(u, c) <= ds.d_pf(u, other));
            }
        }
        let total: f64 = a.group_costs.iter().sum();
        assert!((total - a.total_cost).abs() < 1e-12);
    }

    #[test]
    fn cost_trace_strictly_decreasing() {
        let ds = line_dataset(&[0.0, 0.1, 0.2, 5.0, 5.1, 9.0, 9.1, 14.0], &[0; 8], 1);
        let opts = LocalSearchOpts {
            // a deliberately bad start so swaps actually happen
            initial: Some(vec![6, 7]),
            ..Default::default()
        };
        let out =
            local_search_kmedian(&ds, 2, SwapObjective::WeightedSum(None), &opts).unwrap();
        for w in out.cost_trace.windows(2) {
            assert!(w[1] < w[0] * (1.0 - SWAP_IMPROVEMENT));
        }
    }
}
