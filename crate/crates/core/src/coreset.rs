//! Per-group coresets for k-median: bi-criteria seeding by repeated
//! sampling-and-pruning, then importance sampling with weights chosen so
//! each cluster's mass is conserved exactly. The union of per-group
//! coresets preserves the fair objective, which is what the planning
//! pipeline relies on.

use crate::dataset::{DataPoint, Facilities, GroupedDataset, MetricSource};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoresetError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Derive a child seed from a master seed and a salt (splitmix64 step).
pub fn derive_seed(master: u64, salt: u64) -> u64 {
    let mut z = master ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Output of the sampling-and-pruning seeding pass. Centers are indices
/// into the dataset's point list.
#[derive(Debug, Clone)]
pub struct BicriteriaSolution {
    pub centers: Vec<usize>,
    /// For every input member, distance to its nearest center.
    pub dist_to_seed: Vec<f64>,
    /// For every input member, position (in `centers`) of its nearest center.
    pub cluster_of: Vec<usize>,
    pub cost: f64,
}

/// How many points each sampling round draws, per unit of k.
const SAMPLE_FACTOR: usize = 2;

/// Repeated sampling + pruning: draw ~8k points (weight-proportional), drop
/// the half of the remaining set closest to the centers drawn so far, and
/// repeat until the remainder is small enough to keep outright. Produces
/// O(k log n) centers.
pub fn bicriteria_seed(
    ds: &GroupedDataset,
    members: &[usize],
    k: usize,
    seed: u64,
) -> Result<BicriteriaSolution, CoresetError> {
    if members.is_empty() {
        return Err(CoresetError::InvalidInput("empty member set".into()));
    }
    if k == 0 {
        return Err(CoresetError::InvalidInput("k must be at least 1".into()));
    }
    let n = members.len();
    let sample_size = (SAMPLE_FACTOR * k).max(1);
    let mut centers: Vec<usize> = Vec::new();

    if n <= k {
        centers = members.to_vec();
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut remaining: Vec<usize> = members.to_vec();
        // min distance of each remaining member to the chosen centers
        let mut mind: BTreeMap<usize, f64> =
            remaining.iter().map(|&i| (i, f64::INFINITY)).collect();
        while remaining.len() > sample_size {
            // weight-proportional draw with replacement, deduplicated
            let total_w: f64 = remaining.iter().map(|&i| ds.points()[i].weight).sum();
            let mut drawn: Vec<usize> = Vec::with_capacity(sample_size);
            for _ in 0..sample_size {
                let mut target = rng.gen::<f64>() * total_w;
                let mut pick = *remaining.last().unwrap();
                for &i in &remaining {
                    target -= ds.points()[i].weight;
                    if target <= 0.0 {
                        pick = i;
                        break;
                    }
                }
                drawn.push(pick);
            }
            drawn.sort_unstable();
            drawn.dedup();
            for &c in &drawn {
                if !centers.contains(&c) {
                    centers.push(c);
                }
            }
            // update distances against the new centers only
            let updates: Vec<(usize, f64)> = remaining
                .par_iter()
                .map(|&i| {
                    let mut d = mind[&i];
                    for &c in &drawn {
                        let dc = ds.d_pp(i, c);
                        if dc < d {
                            d = dc;
                        }
                    }
                    (i, d)
                })
                .collect();
            for (i, d) in updates {
                mind.insert(i, d);
            }
            // drop the closer half (they are served), keep the farther half
            let mut order: Vec<usize> = remaining.clone();
            order.sort_by(|&a, &b| mind[&a].partial_cmp(&mind[&b]).unwrap().then(a.cmp(&b)));
            let keep_from = remaining.len() / 2;
            remaining = order[keep_from..].to_vec();
            remaining.sort_unstable();
        }
        for &i in &remaining {
            if !centers.contains(&i) {
                centers.push(i);
            }
        }
    }
    centers.sort_unstable();

    let rows: Vec<(usize, f64)> = members
        .par_iter()
        .map(|&i| {
            let mut best = (0usize, f64::INFINITY);
            for (ci, &c) in centers.iter().enumerate() {
                let d = ds.d_pp(i, c);
                if d < best.1 {
                    best = (ci, d);
                }
            }
            best
        })
        .collect();
    let mut dist_to_seed = Vec::with_capacity(n);
    let mut cluster_of = Vec::with_capacity(n);
    let mut cost = 0.0;
    for (idx, (ci, d)) in rows.into_iter().enumerate() {
        cost += ds.points()[members[idx]].weight * d;
        dist_to_seed.push(d);
        cluster_of.push(ci);
    }
    Ok(BicriteriaSolution {
        centers,
        dist_to_seed,
        cluster_of,
        cost,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoresetConfig {
    pub epsilon: f64,
    pub delta: f64,
    /// The size constant in (c/eps^2)(k ln n + ln 1/delta).
    pub c: f64,
    /// Force a specific sample count instead of the formula, e.g. for
    /// fidelity-versus-size studies.
    pub target_override: Option<usize>,
    /// Operational per-group cap on the sample count, so downstream LP sizes
    /// stay workable on large inputs. Fidelity is certified empirically
    /// either way.
    pub max_size: Option<usize>,
}

impl Default for CoresetConfig {
    fn default() -> Self {
        CoresetConfig {
            epsilon: 0.2,
            delta: 0.1,
            c: 10.0,
            target_override: None,
            max_size: None,
        }
    }
}

impl CoresetConfig {
    fn validate(&self) -> Result<(), CoresetError> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(CoresetError::InvalidInput(format!(
                "epsilon must be in (0,1), got {}",
                self.epsilon
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(CoresetError::InvalidInput(format!(
                "delta must be in (0,1), got {}",
                self.delta
            )));
        }
        if !(self.c > 0.0) {
            return Err(CoresetError::InvalidInput("c must be positive".into()));
        }
        Ok(())
    }

    pub fn target_size(&self, n: usize, k: usize) -> usize {
        let formula = match self.target_override {
            Some(t) => t,
            None => {
                let nf = n.max(2) as f64;
                let size = (self.c / (self.epsilon * self.epsilon))
                    * (k as f64 * nf.ln() + (1.0 / self.delta).ln());
                size.ceil() as usize
            }
        };
        match self.max_size {
            Some(cap) => formula.min(cap),
            None => formula,
        }
    }
}

/// One weighted coreset point referencing its source point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoresetPoint {
    pub source_index: usize,
    pub weight: f64,
    pub group: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoresetProvenance {
    pub epsilon: f64,
    pub delta: f64,
    pub c: f64,
    pub k: usize,
    pub seed: u64,
    pub group_sizes: Vec<usize>,
    pub group_weights: Vec<f64>,
    pub target_sizes: Vec<usize>,
    /// Largest relative cost deviation observed by [`certify_coreset`], when
    /// a certification pass has run.
    pub observed_epsilon: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Coreset {
    pub points: Vec<CoresetPoint>,
    pub provenance: CoresetProvenance,
}

impl Coreset {
    pub fn group_weight(&self, group: usize) -> f64 {
        self.points
            .iter()
            .filter(|p| p.group == group)
            .map(|p| p.weight)
            .sum()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Coreset for one group. Identity (original points, original weights) when
/// the target size formula reaches the group size.
pub fn fl_coreset(
    ds: &GroupedDataset,
    members: &[usize],
    k: usize,
    cfg: &CoresetConfig,
    seed: u64,
) -> Result<Vec<CoresetPoint>, CoresetError> {
    cfg.validate()?;
    if members.is_empty() {
        return Err(CoresetError::InvalidInput("empty group".into()));
    }
    let n = members.len();
    let target = cfg.target_size(n, k);
    let group = ds.points()[members[0]].group;
    if target >= n {
        return Ok(members
            .iter()
            .map(|&i| CoresetPoint {
                source_index: i,
                weight: ds.points()[i].weight,
                group,
            })
            .collect());
    }

    let bic = bicriteria_seed(ds, members, k, derive_seed(seed, 0xB1C))?;
    let n_clusters = bic.centers.len();
    let mut cluster_cost = vec![0.0; n_clusters];
    let mut cluster_weight = vec![0.0; n_clusters];
    for (idx, &i) in members.iter().enumerate() {
        let w = ds.points()[i].weight;
        cluster_cost[bic.cluster_of[idx]] += w * bic.dist_to_seed[idx];
        cluster_weight[bic.cluster_of[idx]] += w;
    }

    // sensitivity surrogate: distance share of the cluster cost plus the
    // uniform in-cluster term
    let scores: Vec<f64> = members
        .iter()
        .enumerate()
        .map(|(idx, &i)| {
            let w = ds.points()[i].weight;
            let cl = bic.cluster_of[idx];
            let dist_term = if cluster_cost[cl] > 0.0 {
                w * bic.dist_to_seed[idx] / cluster_cost[cl]
            } else {
                0.0
            };
            dist_term + w / cluster_weight[cl]
        })
        .collect();
    let score_total: f64 = scores.iter().sum();

    // cumulative table for O(log n) draws
    let mut cumulative = Vec::with_capacity(n);
    let mut acc = 0.0;
    for s in &scores {
        acc += s;
        cumulative.push(acc);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5A11));
    let mut draw_count: BTreeMap<usize, usize> = BTreeMap::new();
    for _ in 0..target {
        let x = rng.gen::<f64>() * score_total;
        let pos = cumulative.partition_point(|&cum| cum < x).min(n - 1);
        *draw_count.entry(pos).or_insert(0) += 1;
    }

    // estimator weight per sampled member, merged over duplicate draws
    let mut sampled_weight: BTreeMap<usize, f64> = BTreeMap::new();
    for (&pos, &count) in &draw_count {
        let q = scores[pos] / score_total;
        let w = ds.points()[members[pos]].weight;
        sampled_weight.insert(pos, count as f64 * w / (target as f64 * q));
    }

    // per-cluster mass repair: centers absorb the residual; oversampled
    // clusters are rescaled so every cluster's total is exact
    let mut sampled_mass = vec![0.0; n_clusters];
    for (&pos, &w) in &sampled_weight {
        sampled_mass[bic.cluster_of[pos]] += w;
    }
    let mut out: BTreeMap<usize, f64> = BTreeMap::new();
    for cl in 0..n_clusters {
        let residual = cluster_weight[cl] - sampled_mass[cl];
        if residual >= 0.0 {
            if residual > 0.0 {
                *out.entry(bic.centers[cl]).or_insert(0.0) += residual;
            }
            for (&pos, &w) in sampled_weight.iter() {
                if bic.cluster_of[pos] == cl {
                    *out.entry(members[pos]).or_insert(0.0) += w;
                }
            }
        } else {
            let scale = cluster_weight[cl] / sampled_mass[cl];
            for (&pos, &w) in sampled_weight.iter() {
                if bic.cluster_of[pos] == cl {
                    *out.entry(members[pos]).or_insert(0.0) += w * scale;
                }
            }
        }
    }

    Ok(out
        .into_iter()
        .map(|(source_index, weight)| CoresetPoint {
            source_index,
            weight,
            group,
        })
        .collect())
}

/// Union of per-group coresets, with per-group seeds derived from the master
/// seed so groups build independently (and in parallel).
pub fn grouped_coreset(
    ds: &GroupedDataset,
    k: usize,
    cfg: &CoresetConfig,
    seed: u64,
) -> Result<Coreset, CoresetError> {
    cfg.validate()?;
    let members = ds.group_members();
    for (g, m) in members.iter().enumerate() {
        if m.is_empty() {
            return Err(CoresetError::InvalidInput(format!("group {g} is empty")));
        }
    }
    let per_group: Vec<Result<Vec<CoresetPoint>, CoresetError>> = members
        .par_iter()
        .enumerate()
        .map(|(g, m)| fl_coreset(ds, m, k, cfg, derive_seed(seed, g as u64)))
        .collect();
    let mut points = Vec::new();
    let mut target_sizes = Vec::new();
    for (g, r) in per_group.into_iter().enumerate() {
        let pts = r?;
        target_sizes.push(cfg.target_size(members[g].len(), k));
        points.extend(pts);
    }
    let group_weights = ds.group_weights();
    Ok(Coreset {
        points,
        provenance: CoresetProvenance {
            epsilon: cfg.epsilon,
            delta: cfg.delta,
            c: cfg.c,
            k,
            seed,
            group_sizes: members.iter().map(Vec::len).collect(),
            group_weights,
            target_sizes,
            observed_epsilon: None,
        },
    })
}

/// Weighted k-median cost of a center set (facility indices) on the full
/// dataset and on the coreset, per group. Used for fidelity checks.
pub fn group_costs_full_and_coreset(
    ds: &GroupedDataset,
    coreset: &Coreset,
    centers: &[usize],
) -> (Vec<f64>, Vec<f64>) {
    let m = ds.n_groups();
    let mut full = vec![0.0; m];
    for (i, p) in ds.points().iter().enumerate() {
        let d = centers
            .iter()
            .map(|&c| ds.d_pf(i, c))
            .fold(f64::INFINITY, f64::min);
        full[p.group] += p.weight * d;
    }
    let mut cs = vec![0.0; m];
    for cp in &coreset.points {
        let d = centers
            .iter()
            .map(|&c| ds.d_pf(cp.source_index, c))
            .fold(f64::INFINITY, f64::min);
        cs[cp.group] += cp.weight * d;
    }
    (full, cs)
}

/// Fair objective (max of per-group averages) on full data vs coreset for
/// one center set.
pub fn fair_costs_full_and_coreset(
    ds: &GroupedDataset,
    coreset: &Coreset,
    centers: &[usize],
) -> (f64, f64) {
    let (full, cs) = group_costs_full_and_coreset(ds, coreset, centers);
    let gw = ds.group_weights();
    let fair_full = full
        .iter()
        .zip(&gw)
        .map(|(c, w)| c / w)
        .fold(0.0, f64::max);
    let mut cw = vec![0.0; ds.n_groups()];
    for cp in &coreset.points {
        cw[cp.group] += cp.weight;
    }
    let fair_cs = cs
        .iter()
        .zip(&cw)
        .map(|(c, w)| if *w > 0.0 { c / w } else { 0.0 })
        .fold(0.0, f64::max);
    (fair_full, fair_cs)
}

#[derive(Debug, Clone, Serialize)]
pub struct CoresetCertificate {
    pub sampled_center_sets: usize,
    pub max_rel_deviation: f64,
    pub median_rel_deviation: f64,
    pub fraction_within_epsilon: f64,
}

/// Empirical fidelity certificate: sample random k-subsets of the candidate
/// facilities and compare the fair objective on the coreset against the
/// full data.
pub fn certify_coreset(
    ds: &GroupedDataset,
    coreset: &Coreset,
    k: usize,
    n_center_sets: usize,
    seed: u64,
) -> CoresetCertificate {
    let nf = ds.n_facilities();
    let k = k.min(nf);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center_sets: Vec<Vec<usize>> = (0..n_center_sets)
        .map(|_| {
            let mut centers: Vec<usize> = Vec::with_capacity(k);
            while centers.len() < k {
                let c = rng.gen_range(0..nf);
                if !centers.contains(&c) {
                    centers.push(c);
                }
            }
            centers
        })
        .collect();
    let deviations: Vec<f64> = center_sets
        .par_iter()
        .map(|centers| {
            let (full, cs) = fair_costs_full_and_coreset(ds, coreset, centers);
            if full > 0.0 {
                (cs - full).abs() / full
            } else {
                cs.abs()
            }
        })
        .collect();
    let max = deviations.iter().copied().fold(0.0, f64::max);
    let med = crate::measure::median(&deviations);
    let within = deviations
        .iter()
        .filter(|&&d| d <= coreset.provenance.epsilon)
        .count() as f64
        / n_center_sets.max(1) as f64;
    CoresetCertificate {
        sampled_center_sets: n_center_sets,
        max_rel_deviation: max,
        median_rel_deviation: med,
        fraction_within_epsilon: within,
    }
}

/// Dataset whose points are the coreset points (weights applied). When
/// `facilities_include_points` is set, the coreset points are appended to
/// the facility list, which is the default candidate policy of the planning
/// pipeline.
pub fn coreset_dataset(
    ds: &GroupedDataset,
    coreset: &Coreset,
    facilities_include_points: bool,
) -> Result<(GroupedDataset, Vec<Option<usize>>), CoresetError> {
    let points: Vec<DataPoint> = coreset
        .points
        .iter()
        .map(|cp| {
            let src = &ds.points()[cp.source_index];
            DataPoint {
                coords: src.coords.clone(),
                weight: cp.weight,
                group: cp.group,
                entity: src.entity,
            }
        })
        .collect();
    // facility j of the new dataset maps to Some(original facility index)
    // or None when it is a promoted coreset point
    let mut facility_origin: Vec<Option<usize>> = (0..ds.n_facilities()).map(Some).collect();
    let facilities = match ds.facilities() {
        Facilities::Coords(cs) => {
            let mut all = cs.clone();
            if facilities_include_points {
                for cp in &coreset.points {
                    all.push(ds.points()[cp.source_index].coords.clone());
                    facility_origin.push(None);
                }
            }
            Facilities::Coords(all)
        }
        Facilities::Entities(es) => {
            let mut all = es.clone();
            if facilities_include_points {
                for cp in &coreset.points {
                    all.push(ds.points()[cp.source_index].entity);
                    facility_origin.push(None);
                }
            }
            Facilities::Entities(all)
        }
    };
    let metric = match ds.metric() {
        MetricSource::Kernel(k) => MetricSource::Kernel(*k),
        MetricSource::Matrix { n, dist } => MetricSource::Matrix {
            n: *n,
            dist: dist.clone(),
        },
    };
    let new_ds = GroupedDataset::new(
        points,
        ds.group_labels().to_vec(),
        facilities,
        metric,
    )
    .map_err(|e| CoresetError::InvalidInput(e.to_string()))?;
    Ok((new_ds, facility_origin))
}

/// CSV serialization: source_index, group, weight plus coordinates.
pub fn coreset_csv(ds: &GroupedDataset, coreset: &Coreset) -> String {
    let dim = match ds.metric() {
        MetricSource::Kernel(k) => k.dim(),
        MetricSource::Matrix { .. } => 0,
    };
    let mut out = String::from("source_index,group,weight");
    for d in 0..dim {
        out.push_str(&format!(",x{d}"));
    }
    out.push('\n');
    for cp in &coreset.points {
        out.push_str(&format!(
            "{},{},{}",
            cp.source_index,
            ds.group_labels()[cp.group],
            cp.weight
        ));
        for d in 0..dim {
            out.push_str(&format!(",{}", ds.points()[cp.source_index].coords[d]));
        }
        out.push('\n');
    }
    out
}
