//! Turning fractional LP solutions into center sets. Filtering opens up to
//! k/(1-eps) well-separated low-cost points with a pointwise 2R_u/eps
//! guarantee; dependent rounding opens exactly k facilities with marginals
//! matching y and is checked empirically against the 4-lambda expectation
//! contract rather than asserted.

use crate::dataset::GroupedDataset;
use crate::fairlp::FractionalSolution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RoundingError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Result of the filtering pass. Centers are *point* indices: the procedure
/// promotes well-separated points to centers.
#[derive(Debug, Clone, Serialize)]
pub struct FilteringResult {
    pub centers: Vec<usize>,
    pub epsilon: f64,
    /// Per-point guarantee 2 R_u / eps.
    pub point_bounds: Vec<f64>,
    pub opened: usize,
    pub k: usize,
}

/// Greedy filtering: repeatedly take the unremoved point with the smallest
/// fractional connection cost, open it, and remove every point v within
/// 2 R_v / eps of it.
pub fn filtering_round(
    ds: &GroupedDataset,
    frac: &FractionalSolution,
    k: usize,
    epsilon: f64,
) -> Result<FilteringResult, RoundingError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(RoundingError::InvalidInput(format!(
            "epsilon must be in (0,1), got {epsilon}"
        )));
    }
    let n = ds.n_points();
    if frac.r.len() != n {
        return Err(RoundingError::InvalidInput(
            "solution does not match dataset".into(),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| frac.r[a].partial_cmp(&frac.r[b]).unwrap().then(a.cmp(&b)));
    let mut removed = vec![false; n];
    let mut centers = Vec::new();
    for &u in &order {
        if removed[u] {
            continue;
        }
        centers.push(u);
        removed[u] = true;
        for v in 0..n {
            if !removed[v] && ds.d_pp(u, v) <= 2.0 * frac.r[v] / epsilon {
                removed[v] = true;
            }
        }
    }
    let point_bounds = frac.r.iter().map(|r| 2.0 * r / epsilon).collect();
    Ok(FilteringResult {
        opened: centers.len(),
        centers,
        epsilon,
        point_bounds,
        k,
    })
}

/// Post-hoc audit of the three filtering guarantees, recomputed from raw
/// distances.
#[derive(Debug, Clone, Serialize)]
pub struct FilteringAudit {
    pub opened: usize,
    pub open_bound: usize,
    pub max_pointwise_excess: f64,
    pub min_separation_slack: f64,
    pub group_averages: Vec<f64>,
    pub group_bound: f64,
    pub ok: bool,
}

pub fn audit_filtering(
    ds: &GroupedDataset,
    frac: &FractionalSolution,
    res: &FilteringResult,
) -> FilteringAudit {
    let eps = res.epsilon;
    let n = ds.n_points();
    let open_bound = (res.k as f64 / (1.0 - eps)).floor() as usize;
    // pointwise: d(u, S) <= 2 R_u / eps
    let excesses: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|u| {
            let d = res
                .centers
                .iter()
                .map(|&c| ds.d_pp(u, c))
                .fold(f64::INFINITY, f64::min);
            d - 2.0 * frac.r[u] / eps
        })
        .collect();
    let max_pointwise_excess = excesses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // separation: d(u,v) >= (2/eps) max(R_u, R_v) for centers u != v
    let mut min_separation_slack = f64::INFINITY;
    for (i, &u) in res.centers.iter().enumerate() {
        for &v in res.centers.iter().skip(i + 1) {
            let slack = ds.d_pp(u, v) - (2.0 / eps) * frac.r[u].max(frac.r[v]);
            min_separation_slack = min_separation_slack.min(slack);
        }
    }
    // per-group average cost vs (2/eps) lambda
    let gw = ds.group_weights();
    let mut group_cost = vec![0.0; ds.n_groups()];
    for (u, p) in ds.points().iter().enumerate() {
        let d = res
            .centers
            .iter()
            .map(|&c| ds.d_pp(u, c))
            .fold(f64::INFINITY, f64::min);
        group_cost[p.group] += p.weight * d;
    }
    let group_averages: Vec<f64> = group_cost.iter().zip(&gw).map(|(c, w)| c / w).collect();
    let group_bound = 2.0 * frac.lambda / eps;
    let ok = res.opened <= open_bound
        && max_pointwise_excess <= 1e-9
        && min_separation_slack >= -1e-9
        && group_averages.iter().all(|a| *a <= group_bound + 1e-6);
    FilteringAudit {
        opened: res.opened,
        open_bound,
        max_pointwise_excess,
        min_separation_slack,
        group_averages,
        group_bound,
        ok,
    }
}

/// One dependent-rounding trial: exactly k open facilities and the group
/// costs of the induced nearest-center assignment.
#[derive(Debug, Clone, Serialize)]
pub struct DependentTrial {
    pub centers: Vec<usize>,
    /// Weighted average distance per group.
    pub group_averages: Vec<f64>,
    pub max_group_average: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DependentRoundingOutcome {
    pub trials: Vec<DependentTrial>,
    /// Fraction of trials each facility was opened in.
    pub open_frequency: Vec<f64>,
    pub group_mean: Vec<f64>,
    pub group_stderr: Vec<f64>,
    pub k: usize,
    pub seed: u64,
}

/// Pairwise (pipage-style) rounding of y to an exactly-k facility set,
/// repeated over independent trials. Each elementary step moves mass
/// between two fractional coordinates, preserving their sum and each
/// coordinate's expectation; the direction is random with the probabilities
/// that make the step marginal-preserving.
pub fn dependent_round(
    ds: &GroupedDataset,
    frac: &FractionalSolution,
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<DependentRoundingOutcome, RoundingError> {
    let nf = ds.n_facilities();
    if frac.y.len() != nf {
        return Err(RoundingError::InvalidInput(
            "solution does not match dataset".into(),
        ));
    }
    if trials == 0 {
        return Err(RoundingError::InvalidInput("trials must be >= 1".into()));
    }
    let y_sum = frac.open_mass();
    if y_sum > k as f64 + 1e-6 {
        return Err(RoundingError::InvalidInput(format!(
            "sum of y = {y_sum} exceeds k = {k}"
        )));
    }
    let trial_results: Vec<DependentTrial> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(crate::coreset::derive_seed(seed, t as u64));
            let centers = round_once(&frac.y, k, &mut rng);
            let a = crate::baseline::assign_nearest(ds, &centers);
            let group_averages = a.group_averages();
            let max_group_average = group_averages.iter().copied().fold(0.0, f64::max);
            DependentTrial {
                centers,
                group_averages,
                max_group_average,
            }
        })
        .collect();

    let mut open_frequency = vec![0.0; nf];
    for t in &trial_results {
        for &c in &t.centers {
            open_frequency[c] += 1.0;
        }
    }
    for f in open_frequency.iter_mut() {
        *f /= trials as f64;
    }
    let m = ds.n_groups();
    let mut group_mean = vec![0.0; m];
    for t in &trial_results {
        for g in 0..m {
            group_mean[g] += t.group_averages[g];
        }
    }
    for g in group_mean.iter_mut() {
        *g /= trials as f64;
    }
    let mut group_stderr = vec![0.0; m];
    if trials > 1 {
        for g in 0..m {
            let var: f64 = trial_results
                .iter()
                .map(|t| (t.group_averages[g] - group_mean[g]).powi(2))
                .sum::<f64>()
                / (trials - 1) as f64;
            group_stderr[g] = (var / trials as f64).sqrt();
        }
    }
    Ok(DependentRoundingOutcome {
        trials: trial_results,
        open_frequency,
        group_mean,
        group_stderr,
        k,
        seed,
    })
}

const INTEGRAL_TOL: f64 = 1e-9;

/// One rounding pass: pair fractional coordinates until at most one
/// remains, Bernoulli-round the leftover, then pad deterministically if the
/// opened count is still short of k (possible only when sum(y) < k).
fn round_once(y: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut y: Vec<f64> = y.to_vec();
    let is_fractional = |v: f64| v > INTEGRAL_TOL && v < 1.0 - INTEGRAL_TOL;
    // stack of fractional coordinates; each step settles at least one
    let mut fractional: Vec<usize> = (0..y.len()).filter(|&i| is_fractional(y[i])).collect();
    while fractional.len() >= 2 {
        let j = fractional.pop().unwrap();
        let i = fractional.pop().unwrap();
        let delta_up = (1.0 - y[i]).min(y[j]); // raise i, lower j
        let delta_down = y[i].min(1.0 - y[j]); // lower i, raise j
        // P(up) = delta_down / (delta_up + delta_down) preserves marginals
        let p_up = delta_down / (delta_up + delta_down);
        let pair_sum = y[i] + y[j];
        if rng.gen::<f64>() < p_up {
            y[i] += delta_up;
            y[j] -= delta_up;
        } else {
            y[i] -= delta_down;
            y[j] += delta_down;
        }
        debug_assert!((y[i] + y[j] - pair_sum).abs() < 1e-12, "pairing must conserve mass");
        if is_fractional(y[i]) {
            fractional.push(i);
        }
        if is_fractional(y[j]) {
            fractional.push(j);
        }
    }
    if let Some(&i) = fractional.first() {
        if rng.gen::<f64>() < y[i] {
            y[i] = 1.0;
        } else {
            y[i] = 0.0;
        }
    }
    let mut centers: Vec<usize> = (0..y.len())
        .filter(|&i| y[i] >= 1.0 - INTEGRAL_TOL)
        .collect();
    if centers.len() < k {
        // sum(y) < k case: open the largest remaining coordinates, index
        // order breaking ties, so every trial still returns exactly k
        let mut rest: Vec<usize> = (0..y.len()).filter(|i| !centers.contains(i)).collect();
        rest.sort_by(|&a, &b| y[b].partial_cmp(&y[a]).unwrap().then(a.cmp(&b)));
        for &i in rest.iter().take(k - centers.len()) {
            centers.push(i);
        }
        centers.sort_unstable();
    }
    debug_assert_eq!(centers.len(), k);
    centers
}

/// Certificate for the relative-error rounding: both sides of the group
/// bound, recomputed exactly.
#[derive(Debug, Clone, Serialize)]
pub struct RelErrorCertificate {
    pub eta: f64,
    /// eta * rho of the producing k-median approximation.
    pub implied_factor: f64,
    pub group_cost: Vec<f64>,
    pub group_bound: Vec<f64>,
    pub satisfied: bool,
}

/// Filtering on a relative-error solution plus the certified per-group
/// bound sum_{u in X_i} d(u,S) <= (2/eps) * lambda * scale_i.
pub fn relerror_round(
    ds: &GroupedDataset,
    frac: &FractionalSolution,
    scales: &[f64],
    rho_nominal: f64,
    k: usize,
    epsilon: f64,
) -> Result<(FilteringResult, RelErrorCertificate), RoundingError> {
    if scales.len() != ds.n_groups() {
        return Err(RoundingError::InvalidInput(format!(
            "{} scales for {} groups",
            scales.len(),
            ds.n_groups()
        )));
    }
    let res = filtering_round(ds, frac, k, epsilon)?;
    let eta = 2.0 / epsilon;
    let mut group_cost = vec![0.0; ds.n_groups()];
    for (u, p) in ds.points().iter().enumerate() {
        let d = res
            .centers
            .iter()
            .map(|&c| ds.d_pp(u, c))
            .fold(f64::INFINITY, f64::min);
        group_cost[p.group] += p.weight * d;
    }
    let group_bound: Vec<f64> = scales.iter().map(|s| eta * frac.lambda * s).collect();
    let satisfied = group_cost
        .iter()
        .zip(&group_bound)
        .all(|(c, b)| *c <= b + 1e-9 * b.max(1.0));
    Ok((
        res,
        RelErrorCertificate {
            eta,
            implied_factor: eta * rho_nominal,
            group_cost,
            group_bound,
            satisfied,
        },
    ))
}
