//! Access-disparity statistics: raw distance and load per group, the two
//! distance normalizations (nearest school/library and precinct density),
//! load normalization against the majority group, and the worst-decile
//! breakdown.

use crate::dataset::{Site, SiteKind, VoterRecord};
use crate::geo::{distance_unchecked, MetricKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("voters reference unknown site ids: {}", .0.join(", "))]
    DanglingSites(Vec<String>),
    #[error("invalid state: {0}")]
    InvalidState(String),
}

#[derive(Debug, Clone)]
pub struct MeasureConfig {
    pub metric: MetricKind,
    /// Precincts up to this many members get exact per-voter pairwise
    /// medians; larger ones are sampled.
    pub density_exact_threshold: usize,
    /// Number of sampled peers per voter above the threshold.
    pub density_sample_pairs: usize,
    pub seed: u64,
    /// Floor for the nearest-reference distance in the school/library
    /// normalization, so voters living at a reference site do not divide
    /// by zero.
    pub school_lib_floor: f64,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        MeasureConfig {
            metric: MetricKind::haversine_miles(),
            density_exact_threshold: 2000,
            density_sample_pairs: 2000,
            seed: 0,
            school_lib_floor: 1e-9,
        }
    }
}

/// Per-voter raw measures plus the group index. Everything downstream
/// (normalizations, deciles, report rows) reads from this.
#[derive(Debug, Clone)]
pub struct RawAccess {
    pub dist: Vec<f64>,
    pub load: Vec<f64>,
    pub group_of: Vec<usize>,
    pub group_labels: Vec<String>,
    pub group_counts: Vec<usize>,
    pub majority_group: usize,
    /// Voter ids, kept for the decile tie-break.
    pub ids: Vec<String>,
}

/// Median with the usual mean-of-middles convention for even counts.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Group labels in first-appearance order and each voter's group index.
fn index_groups(voters: &[VoterRecord]) -> (Vec<String>, Vec<usize>) {
    let mut labels: Vec<String> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut group_of = Vec::with_capacity(voters.len());
    for v in voters {
        let g = *index.entry(v.group.as_str()).or_insert_with(|| {
            labels.push(v.group.clone());
            labels.len() - 1
        });
        group_of.push(g);
    }
    (labels, group_of)
}

/// Resolve each voter's assigned site id to a site index, reporting every
/// dangling id at once.
pub fn resolve_assignment(
    voters: &[VoterRecord],
    sites: &[Site],
) -> Result<Vec<usize>, MeasureError> {
    let by_id: HashMap<&str, usize> = sites
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.as_str(), i))
        .collect();
    let mut dangling: Vec<String> = Vec::new();
    let mut out = Vec::with_capacity(voters.len());
    for v in voters {
        match v.assigned_site.as_deref() {
            Some(sid) => match by_id.get(sid) {
                Some(&i) => out.push(i),
                None => dangling.push(sid.to_string()),
            },
            None => dangling.push(format!("<voter {} has no assignment>", v.id)),
        }
    }
    if !dangling.is_empty() {
        dangling.sort();
        dangling.dedup();
        return Err(MeasureError::DanglingSites(dangling));
    }
    Ok(out)
}

/// Raw distances and loads. A voter's load is the number of voters assigned
/// to the same site.
pub fn access_stats(
    voters: &[VoterRecord],
    sites: &[Site],
    site_of: &[usize],
    metric: &MetricKind,
) -> Result<RawAccess, MeasureError> {
    if voters.is_empty() {
        return Err(MeasureError::InvalidInput("no voters".into()));
    }
    if site_of.len() != voters.len() {
        return Err(MeasureError::InvalidInput(
            "assignment length does not match voters".into(),
        ));
    }
    if let Some(&bad) = site_of.iter().find(|&&s| s >= sites.len()) {
        return Err(MeasureError::InvalidInput(format!(
            "assignment references site index {bad} out of range"
        )));
    }
    let dist: Vec<f64> = voters
        .par_iter()
        .zip(site_of.par_iter())
        .map(|(v, &s)| {
            distance_unchecked(&v.location.coords(), &sites[s].location.coords(), metric)
        })
        .collect();
    let mut site_counts = vec![0usize; sites.len()];
    for &s in site_of {
        site_counts[s] += 1;
    }
    let load: Vec<f64> = site_of.iter().map(|&s| site_counts[s] as f64).collect();
    let (group_labels, group_of) = index_groups(voters);
    let mut group_counts = vec![0usize; group_labels.len()];
    for &g in &group_of {
        group_counts[g] += 1;
    }
    let majority_group = group_counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap();
    Ok(RawAccess {
        dist,
        load,
        group_of,
        group_labels,
        group_counts,
        majority_group,
        ids: voters.iter().map(|v| v.id.clone()).collect(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupRow {
    pub group: String,
    pub count: usize,
    pub mean_distance: f64,
    pub median_distance: f64,
    pub max_distance: f64,
    pub mean_load: f64,
    pub median_load: f64,
}

fn group_values<'a>(raw: &'a RawAccess, values: &'a [f64]) -> Vec<Vec<f64>> {
    let mut per_group = vec![Vec::new(); raw.group_labels.len()];
    for (&g, &v) in raw.group_of.iter().zip(values) {
        per_group[g].push(v);
    }
    per_group
}

/// Per-group raw rows plus the unweighted overall row.
pub fn raw_rows(raw: &RawAccess) -> (Vec<GroupRow>, GroupRow) {
    let dists = group_values(raw, &raw.dist);
    let loads = group_values(raw, &raw.load);
    let rows = raw
        .group_labels
        .iter()
        .enumerate()
        .map(|(g, label)| GroupRow {
            group: label.clone(),
            count: raw.group_counts[g],
            mean_distance: mean(&dists[g]),
            median_distance: median(&dists[g]),
            max_distance: dists[g].iter().copied().fold(0.0, f64::max),
            mean_load: mean(&loads[g]),
            median_load: median(&loads[g]),
        })
        .collect();
    let overall = GroupRow {
        group: "overall".into(),
        count: raw.dist.len(),
        mean_distance: mean(&raw.dist),
        median_distance: median(&raw.dist),
        max_distance: raw.dist.iter().copied().fold(0.0, f64::max),
        mean_load: mean(&raw.load),
        median_load: median(&raw.load),
    };
    (rows, overall)
}

#[derive(Debug, Clone, Serialize)]
pub struct NormStats {
    pub mean: f64,
    pub median: f64,
    pub included: usize,
}

/// Distance to the assigned site divided by distance to the nearest
/// reference site (schools and libraries).
pub fn normalize_school_lib(
    raw: &RawAccess,
    voters: &[VoterRecord],
    reference_sites: &[Site],
    cfg: &MeasureConfig,
) -> Result<Vec<NormStats>, MeasureError> {
    if reference_sites.is_empty() {
        return Err(MeasureError::InvalidInput("no reference sites".into()));
    }
    let refs: Vec<[f64; 2]> = reference_sites
        .iter()
        .map(|s| s.location.coords())
        .collect();
    let ratios: Vec<f64> = voters
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            let vc = v.location.coords();
            let nearest = refs
                .iter()
                .map(|r| distance_unchecked(&vc, r, &cfg.metric))
                .fold(f64::INFINITY, f64::min);
            raw.dist[i] / nearest.max(cfg.school_lib_floor)
        })
        .collect();
    let per_group = group_values(raw, &ratios);
    Ok(per_group
        .iter()
        .map(|vals| NormStats {
            mean: mean(vals),
            median: median(vals),
            included: vals.len(),
        })
        .collect())
}

/// Voters excluded from the density normalization, per group.
#[derive(Debug, Clone, Default, Serialize)]
pub struct DensityExclusions {
    pub no_precinct: Vec<usize>,
    pub singleton_precinct: Vec<usize>,
    pub zero_median: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityNorm {
    pub stats: Vec<NormStats>,
    pub exclusions: DensityExclusions,
}

/// Distance to the assigned site divided by the voter's median distance to
/// the other voters of their precinct. Exact up to the configured precinct
/// size, seeded uniform sampling above it. Voters with no precinct, a
/// singleton precinct, or a zero median are excluded and counted — no floor
/// is applied to the denominator.
pub fn normalize_density(
    raw: &RawAccess,
    voters: &[VoterRecord],
    cfg: &MeasureConfig,
) -> Result<DensityNorm, MeasureError> {
    let m = raw.group_labels.len();
    let mut exclusions = DensityExclusions {
        no_precinct: vec![0; m],
        singleton_precinct: vec![0; m],
        zero_median: vec![0; m],
    };
    let mut precincts: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, v) in voters.iter().enumerate() {
        match v.precinct.as_deref() {
            Some(p) => precincts.entry(p).or_default().push(i),
            None => exclusions.no_precinct[raw.group_of[i]] += 1,
        }
    }
    for (_, members) in precincts.iter() {
        if members.len() < 2 {
            for &i in members {
                exclusions.singleton_precinct[raw.group_of[i]] += 1;
            }
        }
    }

    let precinct_list: Vec<(usize, &Vec<usize>)> = precincts
        .values()
        .enumerate()
        .filter(|(_, members)| members.len() >= 2)
        .collect();

    // (voter, ratio-or-None) per eligible precinct, precinct order fixed by
    // the BTreeMap so the parallel pass is deterministic
    let results: Vec<Vec<(usize, Option<f64>)>> = precinct_list
        .par_iter()
        .map(|(pidx, members)| {
            let coords: Vec<[f64; 2]> = members
                .iter()
                .map(|&i| voters[i].location.coords())
                .collect();
            let s = members.len();
            members
                .iter()
                .enumerate()
                .map(|(local, &i)| {
                    let med = if s <= cfg.density_exact_threshold {
                        let ds: Vec<f64> = (0..s)
                            .filter(|&j| j != local)
                            .map(|j| distance_unchecked(&coords[local], &coords[j], &cfg.metric))
                            .collect();
                        median(&ds)
                    } else {
                        let mut rng = ChaCha8Rng::seed_from_u64(
                            cfg.seed ^ ((*pidx as u64) << 32) ^ local as u64,
                        );
                        let ds: Vec<f64> = (0..cfg.density_sample_pairs)
                            .map(|_| {
                                let mut j = rng.gen_range(0..s - 1);
                                if j >= local {
                                    j += 1;
                                }
                                distance_unchecked(&coords[local], &coords[j], &cfg.metric)
                            })
                            .collect();
                        median(&ds)
                    };
                    if med > 0.0 {
                        (i, Some(raw.dist[i] / med))
                    } else {
                        (i, None)
                    }
                })
                .collect()
        })
        .collect();

    let mut per_group: Vec<Vec<f64>> = vec![Vec::new(); m];
    for chunk in results {
        for (i, ratio) in chunk {
            match ratio {
                Some(r) => per_group[raw.group_of[i]].push(r),
                None => exclusions.zero_median[raw.group_of[i]] += 1,
            }
        }
    }
    let stats = per_group
        .iter()
        .map(|vals| {
            if vals.is_empty() {
                NormStats {
                    mean: f64::NAN,
                    median: f64::NAN,
                    included: 0,
                }
            } else {
                NormStats {
                    mean: mean(vals),
                    median: median(vals),
                    included: vals.len(),
                }
            }
        })
        .collect();
    Ok(DensityNorm { stats, exclusions })
}

/// Each group's median load divided by the majority group's median load;
/// the majority group maps to exactly 1.
pub fn normalize_load(raw: &RawAccess) -> Result<Vec<f64>, MeasureError> {
    let loads = group_values(raw, &raw.load);
    let majority_median = median(&loads[raw.majority_group]);
    if !(majority_median > 0.0) {
        return Err(MeasureError::InvalidState(format!(
            "majority group `{}` has zero median load",
            raw.group_labels[raw.majority_group]
        )));
    }
    Ok(loads
        .iter()
        .enumerate()
        .map(|(g, vals)| {
            if g == raw.majority_group {
                1.0
            } else {
                median(vals) / majority_median
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DecileBy {
    Distance,
    Load,
}

#[derive(Debug, Clone, Serialize)]
pub struct WorstDecileRow {
    pub group: String,
    pub share: f64,
    pub median_value: f64,
    pub cohort_count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct WorstDecileReport {
    pub by: DecileBy,
    pub cohort_size: usize,
    pub rows: Vec<WorstDecileRow>,
}

/// The ceil(0.1 n) voters with the largest value of the chosen measure.
/// Ties at the cutoff break by ascending voter id.
pub fn worst_decile(raw: &RawAccess, by: DecileBy) -> Result<WorstDecileReport, MeasureError> {
    let n = raw.dist.len();
    if n < 10 {
        return Err(MeasureError::InvalidInput(format!(
            "worst-decile needs at least 10 voters, got {n}"
        )));
    }
    let values = match by {
        DecileBy::Distance => &raw.dist,
        DecileBy::Load => &raw.load,
    };
    let cohort_size = n.div_ceil(10);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap()
            .then(raw.ids[a].cmp(&raw.ids[b]))
    });
    let cohort = &order[..cohort_size];
    let m = raw.group_labels.len();
    let mut group_vals: Vec<Vec<f64>> = vec![Vec::new(); m];
    for &i in cohort {
        group_vals[raw.group_of[i]].push(values[i]);
    }
    let rows = raw
        .group_labels
        .iter()
        .enumerate()
        .map(|(g, label)| WorstDecileRow {
            group: label.clone(),
            share: group_vals[g].len() as f64 / cohort_size as f64,
            median_value: if group_vals[g].is_empty() {
                f64::NAN
            } else {
                median(&group_vals[g])
            },
            cohort_count: group_vals[g].len(),
        })
        .collect();
    Ok(WorstDecileReport {
        by,
        cohort_size,
        rows,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NormalizedRow {
    pub group: String,
    pub school_lib_mean: f64,
    pub school_lib_median: f64,
    pub density_mean: f64,
    pub density_median: f64,
    pub normalized_load: f64,
}

/// The full report: raw rows, normalized rows, and both worst-decile tables.
#[derive(Debug, Clone, Serialize)]
pub struct DisparityReport {
    pub groups: Vec<GroupRow>,
    pub overall: GroupRow,
    pub normalized: Vec<NormalizedRow>,
    pub majority_group: String,
    pub density_exclusions: DensityExclusions,
    pub worst_decile_distance: WorstDecileReport,
    pub worst_decile_load: WorstDecileReport,
}

/// Compute every table at once. Reference sites for the school/library
/// normalization are the school and library entries of `sites`; when there
/// are none, every site serves as a reference.
pub fn full_report(
    voters: &[VoterRecord],
    sites: &[Site],
    site_of: &[usize],
    cfg: &MeasureConfig,
) -> Result<DisparityReport, MeasureError> {
    let raw = access_stats(voters, sites, site_of, &cfg.metric)?;
    let (groups, overall) = raw_rows(&raw);
    let refs: Vec<Site> = sites
        .iter()
        .filter(|s| matches!(s.kind, SiteKind::School | SiteKind::Library))
        .cloned()
        .collect();
    let refs = if refs.is_empty() { sites.to_vec() } else { refs };
    let school_lib = normalize_school_lib(&raw, voters, &refs, cfg)?;
    let density = normalize_density(&raw, voters, cfg)?;
    let norm_load = normalize_load(&raw)?;
    let normalized = raw
        .group_labels
        .iter()
        .enumerate()
        .map(|(g, label)| NormalizedRow {
            group: label.clone(),
            school_lib_mean: school_lib[g].mean,
            school_lib_median: school_lib[g].median,
            density_mean: density.stats[g].mean,
            density_median: density.stats[g].median,
            normalized_load: norm_load[g],
        })
        .collect();
    let worst_decile_distance = worst_decile(&raw, DecileBy::Distance)?;
    let worst_decile_load = worst_decile(&raw, DecileBy::Load)?;
    Ok(DisparityReport {
        groups,
        overall,
        normalized,
        majority_group: raw.group_labels[raw.majority_group].clone(),
        density_exclusions: density.exclusions,
        worst_decile_distance,
        worst_decile_load,
    })
}

/// CSV rendering rounds to 2 decimals, matching the published tables; the
/// JSON rendering keeps full precision.
pub fn raw_csv(report: &DisparityReport) -> String {
    let mut out =
        String::from("group,count,mean_distance,median_distance,max_distance,mean_load,median_load\n");
    for r in report.groups.iter().chain(std::iter::once(&report.overall)) {
        out.push_str(&format!(
            "{},{},{:.2},{:.2},{:.2},{:.2},{:.2}\n",
            r.group,
            r.count,
            r.mean_distance,
            r.median_distance,
            r.max_distance,
            r.mean_load,
            r.median_load
        ));
    }
    out
}

/// Load ratios truncate to 2 decimals rather than round: the published
/// tables show 3824/4272 as 0.89.
fn trunc2(x: f64) -> f64 {
    (x * 100.0).floor() / 100.0
}

pub fn normalized_csv(report: &DisparityReport) -> String {
    let mut out = String::from(
        "group,school_lib_mean,school_lib_median,density_mean,density_median,normalized_load\n",
    );
    for r in &report.normalized {
        out.push_str(&format!(
            "{},{:.2},{:.2},{:.2},{:.2},{:.2}\n",
            r.group,
            r.school_lib_mean,
            r.school_lib_median,
            r.density_mean,
            r.density_median,
            trunc2(r.normalized_load)
        ));
    }
    out
}

pub fn worst_decile_csv(report: &DisparityReport) -> String {
    let mut out =
        String::from("group,distance_share,distance_median,load_share,load_median\n");
    for (d, l) in report
        .worst_decile_distance
        .rows
        .iter()
        .zip(&report.worst_decile_load.rows)
    {
        out.push_str(&format!(
            "{},{:.4},{:.2},{:.4},{:.2}\n",
            d.group, d.share, d.median_value, l.share, l.median_value
        ));
    }
    out
}
