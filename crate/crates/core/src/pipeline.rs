//! End-to-end planning: per-group coresets, the fair LP, a rounding stage,
//! an optional capacity stage, and the full-population assignment, with
//! every stage's parameters and certificates logged into a run manifest.

use crate::balance::{
    audit_split, capacity_sweep, l_balanced_split, CapacityMode, CenterLoc, SweepRow,
};
use crate::baseline::{kmed_approx, LocalSearchOpts, LOCAL_SEARCH_NOMINAL_RHO};
use crate::coreset::{certify_coreset, coreset_dataset, grouped_coreset, Coreset, CoresetConfig};
use crate::dataset::{dataset_from_voters, GroupedDataset, Site, SiteKind, VoterRecord};
use crate::fairlp::{solve_fair_lp, FairLpInstance, FairMode};
use crate::geo::{distance_unchecked, GeoPoint, MetricKind};
use crate::measure::{full_report, median, resolve_assignment, DisparityReport, MeasureConfig};
use crate::rounding::{audit_filtering, dependent_round, filtering_round, relerror_round};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Dataset(#[from] crate::dataset::DatasetError),
    #[error(transparent)]
    Measure(#[from] crate::measure::MeasureError),
    #[error(transparent)]
    Coreset(#[from] crate::coreset::CoresetError),
    #[error(transparent)]
    Lp(#[from] crate::fairlp::LpError),
    #[error(transparent)]
    Rounding(#[from] crate::rounding::RoundingError),
    #[error(transparent)]
    Balance(#[from] crate::balance::BalanceError),
    #[error(transparent)]
    Baseline(#[from] crate::baseline::BaselineError),
    #[error("lp did not converge")]
    LpNotConverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RoundingKind {
    Filter,
    Dependent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FacilityPolicy {
    /// 2020-style polling sites only.
    SitesOnly,
    /// Polling sites plus schools and libraries.
    SchoolsLibrariesPolling,
    /// Open anywhere people live: the coreset points act as candidates.
    AllPoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanObjective {
    AbsError,
    RelError,
}

#[derive(Debug, Clone, Serialize)]
pub struct PlanConfig {
    pub k: Option<usize>,
    pub metric: MetricKind,
    pub epsilon: f64,
    pub rounding: RoundingKind,
    pub trials: usize,
    pub objective: PlanObjective,
    pub coreset: CoresetConfig,
    pub facility_policy: FacilityPolicy,
    pub lp_neighbors: usize,
    pub eps_cap: Option<f64>,
    /// Export the solved LP model in the plain-text sparse format.
    pub dump_lp: bool,
    pub seed: u64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            k: None,
            metric: MetricKind::haversine_miles(),
            epsilon: 0.5,
            rounding: RoundingKind::Filter,
            trials: 64,
            objective: PlanObjective::AbsError,
            // the LP solve is superlinear in points x neighbors; these
            // defaults keep a 100k-voter plan in the seconds range
            coreset: CoresetConfig {
                max_size: Some(150),
                ..CoresetConfig::default()
            },
            facility_policy: FacilityPolicy::SchoolsLibrariesPolling,
            lp_neighbors: 12,
            eps_cap: None,
            dump_lp: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageLog {
    pub stage: String,
    pub details: serde_json::Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub stages: Vec<StageLog>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config: serde_json::Value) -> Self {
        RunManifest {
            schema_version: 1,
            command: command.to_string(),
            seed,
            config,
            stages: Vec::new(),
        }
    }

    pub fn log(&mut self, stage: &str, details: serde_json::Value) {
        self.stages.push(StageLog {
            stage: stage.to_string(),
            details,
        });
    }
}

/// A planned polling location.
#[derive(Debug, Clone, Serialize)]
pub struct PlannedSite {
    pub id: String,
    pub location: GeoPoint,
    /// Original site id when the center is an existing site.
    pub source_site: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionGapRow {
    pub region: String,
    pub gap_before: f64,
    pub gap_after: f64,
}

#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub planned_sites: Vec<PlannedSite>,
    /// Voter -> position in `planned_sites`.
    pub assignment: Vec<usize>,
    pub before: DisparityReport,
    pub after: DisparityReport,
    pub region_gaps: Vec<RegionGapRow>,
    pub manifest: RunManifest,
    pub coreset: Coreset,
    /// The coreset in its CSV caching format.
    pub coreset_csv: String,
    /// Text export of the solved LP when requested.
    pub lp_export: Option<String>,
    /// Centers in full-dataset space, before any capacity stage; the sweep
    /// command reuses them.
    pub unconstrained_centers: Vec<CenterLoc>,
    pub k: usize,
}

/// Stage timing to stderr when FAIRSITE_TIMING is set; stderr is not part
/// of any byte-compared output.
fn timing(stage: &str, start: std::time::Instant) {
    if std::env::var_os("FAIRSITE_TIMING").is_some() {
        eprintln!("[timing] {stage}: {:.2?}", start.elapsed());
    }
}

fn facility_sites(sites: &[Site], policy: FacilityPolicy) -> Vec<usize> {
    match policy {
        FacilityPolicy::SitesOnly => sites
            .iter()
            .enumerate()
            .filter(|(_, s)| s.kind == SiteKind::Polling)
            .map(|(i, _)| i)
            .collect(),
        FacilityPolicy::SchoolsLibrariesPolling => (0..sites.len()).collect(),
        FacilityPolicy::AllPoints => Vec::new(),
    }
}

/// Map a center of the coreset dataset back to the full dataset: original
/// facilities keep their index, promoted coreset points and filtered points
/// become full-data point centers.
fn center_to_full(
    coreset: &Coreset,
    facility_origin: &[Option<usize>],
    site_index_of_facility: &[usize],
    c: CenterLoc,
) -> CenterLoc {
    match c {
        CenterLoc::Point(p) => CenterLoc::Point(coreset.points[p].source_index),
        CenterLoc::Facility(f) => match facility_origin[f] {
            Some(orig) => CenterLoc::Facility(site_index_of_facility[orig]),
            None => {
                // promoted coreset point: facilities beyond the originals
                // follow coreset order
                let extra = f - facility_origin.iter().filter(|o| o.is_some()).count();
                CenterLoc::Point(coreset.points[extra].source_index)
            }
        },
    }
}

/// Nearest-center assignment of the full population, optionally respecting
/// a uniform capacity. The capacitated variant processes voters in
/// ascending order of their nearest-center distance and takes the nearest
/// center with room.
pub fn assign_population(
    ds: &GroupedDataset,
    centers: &[CenterLoc],
    capacity: Option<f64>,
) -> Vec<usize> {
    let n = ds.n_points();
    let nearest: Vec<(usize, f64)> = (0..n)
        .into_par_iter()
        .map(|u| {
            let mut best = (0usize, f64::INFINITY);
            for (ci, &c) in centers.iter().enumerate() {
                let d = crate::balance::d_point_center(ds, u, c);
                if d < best.1 {
                    best = (ci, d);
                }
            }
            best
        })
        .collect();
    match capacity {
        None => nearest.into_iter().map(|(ci, _)| ci).collect(),
        Some(cap) => {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                nearest[a]
                    .1
                    .partial_cmp(&nearest[b].1)
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let mut load = vec![0.0; centers.len()];
            let mut out = vec![usize::MAX; n];
            for &u in &order {
                let w = ds.points()[u].weight;
                let mut best = (usize::MAX, f64::INFINITY);
                for (ci, &c) in centers.iter().enumerate() {
                    if load[ci] + w > cap {
                        continue;
                    }
                    let d = crate::balance::d_point_center(ds, u, c);
                    if d < best.1 {
                        best = (ci, d);
                    }
                }
                let ci = if best.0 == usize::MAX {
                    // every center full: fall back to the least loaded
                    let mut least = 0usize;
                    for c in 1..centers.len() {
                        if load[c] < load[least] {
                            least = c;
                        }
                    }
                    least
                } else {
                    best.0
                };
                out[u] = ci;
                load[ci] += w;
            }
            out
        }
    }
}

fn region_of(precinct: Option<&str>) -> String {
    match precinct {
        Some(p) => p.split('-').next().unwrap_or(p).to_string(),
        None => "unknown".to_string(),
    }
}

fn region_gap_rows(
    voters: &[VoterRecord],
    dist_before: &[f64],
    dist_after: &[f64],
) -> Vec<RegionGapRow> {
    use std::collections::BTreeMap;
    let mut by_region_group: BTreeMap<String, BTreeMap<&str, (Vec<f64>, Vec<f64>)>> =
        BTreeMap::new();
    for (i, v) in voters.iter().enumerate() {
        let region = region_of(v.precinct.as_deref());
        let entry = by_region_group
            .entry(region)
            .or_default()
            .entry(v.group.as_str())
            .or_default();
        entry.0.push(dist_before[i]);
        entry.1.push(dist_after[i]);
    }
    by_region_group
        .into_iter()
        .map(|(region, groups)| {
            let mut before_meds = Vec::new();
            let mut after_meds = Vec::new();
            for (_, (b, a)) in groups {
                before_meds.push(median(&b));
                after_meds.push(median(&a));
            }
            let gap = |m: &[f64]| {
                m.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                    - m.iter().copied().fold(f64::INFINITY, f64::min)
            };
            RegionGapRow {
                region,
                gap_before: gap(&before_meds),
                gap_after: gap(&after_meds),
            }
        })
        .collect()
}

pub fn region_gaps_csv(rows: &[RegionGapRow]) -> String {
    let mut out = String::from("region,gap_before,gap_after\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.2},{:.2}\n",
            r.region, r.gap_before, r.gap_after
        ));
    }
    out
}

pub fn planned_sites_csv(sites: &[PlannedSite]) -> String {
    let mut out = String::from("id,lat,lon,source_site\n");
    for s in sites {
        out.push_str(&format!(
            "{},{},{},{}\n",
            s.id,
            s.location.lat(),
            s.location.lon(),
            s.source_site.as_deref().unwrap_or("")
        ));
    }
    out
}

pub fn assignment_csv(voters: &[VoterRecord], sites: &[PlannedSite], assignment: &[usize]) -> String {
    let mut out = String::from("voter_id,site_id\n");
    for (v, &s) in voters.iter().zip(assignment) {
        out.push_str(&format!("{},{}\n", v.id, sites[s].id));
    }
    out
}

/// Run the full planning pipeline.
pub fn plan(
    voters: &[VoterRecord],
    sites: &[Site],
    cfg: &PlanConfig,
) -> Result<PlanOutcome, PipelineError> {
    let mut manifest = RunManifest::new(
        "plan",
        cfg.seed,
        serde_json::to_value(cfg).unwrap_or(json!({})),
    );
    let n_polling = sites.iter().filter(|s| s.kind == SiteKind::Polling).count();
    let k = cfg.k.unwrap_or(n_polling.max(1));

    // full dataset with the policy's candidate sites as facilities
    let site_indices = facility_sites(sites, cfg.facility_policy);
    let policy_sites: Vec<Site> = site_indices.iter().map(|&i| sites[i].clone()).collect();
    let ds_full = dataset_from_voters(voters, &policy_sites, cfg.metric)?;

    // stage 1: per-group coresets
    let t0 = std::time::Instant::now();
    let mut coreset = grouped_coreset(&ds_full, k, &cfg.coreset, cfg.seed)?;
    timing("coreset", t0);
    let t0 = std::time::Instant::now();
    let certificate = certify_coreset(
        &ds_full,
        &coreset,
        k,
        50,
        crate::coreset::derive_seed(cfg.seed, 0xCE27),
    );
    coreset.provenance.observed_epsilon = Some(certificate.max_rel_deviation);
    timing("coreset certificate", t0);
    manifest.log(
        "coreset",
        json!({
            "points": coreset.len(),
            "provenance": serde_json::to_value(&coreset.provenance).unwrap(),
            "certificate": serde_json::to_value(&certificate).unwrap(),
        }),
    );

    // stage 2: LP on the coreset. Site policies keep the candidate pool to
    // the sites themselves; all-points promotes the coreset points instead.
    let include_points = matches!(cfg.facility_policy, FacilityPolicy::AllPoints);
    let (cds, facility_origin) = coreset_dataset(&ds_full, &coreset, include_points)?;
    let mode = match cfg.objective {
        PlanObjective::AbsError => FairMode::AbsError,
        PlanObjective::RelError => {
            let opts = LocalSearchOpts {
                seed: crate::coreset::derive_seed(cfg.seed, 0x5CA1E),
                ..LocalSearchOpts::default()
            };
            let scales: Vec<f64> = (0..cds.n_groups())
                .map(|g| kmed_approx(&cds, g, k, &opts))
                .collect::<Result<_, _>>()?;
            FairMode::RelError { scales }
        }
    };
    let inst = FairLpInstance {
        ds: &cds,
        k,
        mode: mode.clone(),
        neighbors: cfg.lp_neighbors,
    };
    let t0 = std::time::Instant::now();
    let (frac, solve_log) = solve_fair_lp(&inst)?;
    timing("lp solve", t0);
    manifest.log(
        "lp",
        json!({
            "lambda": frac.lambda,
            "open_mass": frac.open_mass(),
            "converged": frac.converged,
            "solve": serde_json::to_value(&solve_log).unwrap(),
        }),
    );
    if !frac.converged {
        return Err(PipelineError::LpNotConverged);
    }
    let lp_export = if cfg.dump_lp {
        let model = crate::fairlp::build_fair_lp(&FairLpInstance {
            ds: &cds,
            k,
            mode: mode.clone(),
            neighbors: solve_log.final_neighbors,
        })?;
        Some(crate::fairlp::export_lp(&model))
    } else {
        None
    };

    // stage 3: rounding to centers of the coreset dataset
    let t0 = std::time::Instant::now();
    let centers_cds: Vec<CenterLoc> = match cfg.rounding {
        RoundingKind::Filter => {
            let res = filtering_round(&cds, &frac, k, cfg.epsilon)?;
            let audit = audit_filtering(&cds, &frac, &res);
            manifest.log(
                "filtering",
                json!({
                    "opened": res.opened,
                    "epsilon": res.epsilon,
                    "audit": serde_json::to_value(&audit).unwrap(),
                }),
            );
            if let FairMode::RelError { scales } = &mode {
                let (_, cert) = relerror_round(
                    &cds,
                    &frac,
                    scales,
                    LOCAL_SEARCH_NOMINAL_RHO,
                    k,
                    cfg.epsilon,
                )?;
                manifest.log("relerror_certificate", serde_json::to_value(&cert).unwrap());
            }
            res.centers.into_iter().map(CenterLoc::Point).collect()
        }
        RoundingKind::Dependent => {
            let out = dependent_round(&cds, &frac, k, cfg.trials.max(1), cfg.seed)?;
            // keep the trial with the best fair objective
            let best = out
                .trials
                .iter()
                .enumerate()
                .min_by(|(i, a), (j, b)| {
                    a.max_group_average
                        .partial_cmp(&b.max_group_average)
                        .unwrap()
                        .then(i.cmp(j))
                })
                .map(|(i, _)| i)
                .unwrap();
            manifest.log(
                "dependent_rounding",
                json!({
                    "trials": out.trials.len(),
                    "chosen_trial": best,
                    "group_mean": out.group_mean,
                    "group_stderr": out.group_stderr,
                    "lambda": frac.lambda,
                    "four_lambda": 4.0 * frac.lambda,
                }),
            );
            out.trials[best]
                .centers
                .iter()
                .map(|&f| CenterLoc::Facility(f))
                .collect()
        }
    };

    timing("rounding", t0);
    // map to full-data space
    let site_index_of_facility: Vec<usize> = site_indices.clone();
    let mut centers_full: Vec<CenterLoc> = centers_cds
        .iter()
        .map(|&c| center_to_full(&coreset, &facility_origin, &site_index_of_facility, c))
        .collect();
    centers_full.dedup();
    let unconstrained_centers = centers_full.clone();

    // stage 4: optional capacity stage on the full population
    let ds_pop = dataset_from_voters(voters, sites, cfg.metric)?;
    let mut capacity = None;
    if let Some(eps_cap) = cfg.eps_cap {
        let cap = CapacityMode::Derived { eps_cap }
            .capacity(voters.len() as f64, n_polling.max(1))?;
        let balanced = l_balanced_split(&ds_pop, &centers_full, cap)?;
        let audit = audit_split(&ds_pop, &centers_full, &balanced);
        manifest.log(
            "balance",
            json!({
                "capacity": cap,
                "extra_sites": balanced.extra_sites,
                "load_mean": balanced.load_mean,
                "load_std": balanced.load_std,
                "audit": serde_json::to_value(&audit).unwrap(),
            }),
        );
        centers_full = balanced.centers;
        capacity = Some(cap);
    }

    // stage 5: materialize planned sites and assign everyone
    let planned_sites: Vec<PlannedSite> = centers_full
        .iter()
        .enumerate()
        .map(|(i, &c)| match c {
            CenterLoc::Facility(f) => PlannedSite {
                id: format!("plan{:04}", i),
                location: sites[f].location,
                source_site: Some(sites[f].id.clone()),
            },
            CenterLoc::Point(p) => PlannedSite {
                id: format!("plan{:04}", i),
                location: voters[p].location,
                source_site: None,
            },
        })
        .collect();
    let t0 = std::time::Instant::now();
    let assignment = assign_population(&ds_pop, &centers_full, capacity);
    timing("population assignment", t0);
    manifest.log(
        "assignment",
        json!({
            "planned_sites": planned_sites.len(),
            "capacity": capacity,
        }),
    );

    // stage 6: before/after measurement
    let mcfg = MeasureConfig {
        metric: cfg.metric,
        seed: cfg.seed,
        ..MeasureConfig::default()
    };
    let t0 = std::time::Instant::now();
    let site_of_before = resolve_assignment(voters, sites)?;
    let before = full_report(voters, sites, &site_of_before, &mcfg)?;
    timing("before report", t0);
    let planned_as_sites: Vec<Site> = planned_sites
        .iter()
        .map(|p| Site {
            id: p.id.clone(),
            kind: SiteKind::Polling,
            location: p.location,
        })
        .collect();
    let t0 = std::time::Instant::now();
    let after = full_report(voters, &planned_as_sites, &assignment, &mcfg)?;
    timing("after report", t0);

    let dist_before: Vec<f64> = voters
        .iter()
        .zip(&site_of_before)
        .map(|(v, &s)| {
            distance_unchecked(
                &v.location.coords(),
                &sites[s].location.coords(),
                &cfg.metric,
            )
        })
        .collect();
    let dist_after: Vec<f64> = voters
        .iter()
        .zip(&assignment)
        .map(|(v, &s)| {
            distance_unchecked(
                &v.location.coords(),
                &planned_sites[s].location.coords(),
                &cfg.metric,
            )
        })
        .collect();
    let region_gaps = region_gap_rows(voters, &dist_before, &dist_after);

    Ok(PlanOutcome {
        planned_sites,
        assignment,
        before,
        after,
        region_gaps,
        manifest,
        coreset_csv: crate::coreset::coreset_csv(&ds_full, &coreset),
        coreset,
        lp_export,
        unconstrained_centers,
        k,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepOutcome {
    pub balanced_rows: Vec<SweepRow>,
    pub kcenter_rows: Vec<KcenterSweepRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct KcenterSweepRow {
    pub eps_cap: f64,
    pub capacity: u64,
    pub radius: f64,
    pub load_mean: f64,
    pub load_std: f64,
}

pub fn kcenter_sweep_csv(rows: &[KcenterSweepRow]) -> String {
    let mut out = String::from("eps_cap,capacity,radius,mean_load,std_load\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.4},{:.2},{:.2}\n",
            r.eps_cap, r.capacity, r.radius, r.load_mean, r.load_std
        ));
    }
    out
}

/// Capacity sweep over the splitting stage (balanced fair k-median) and the
/// capacitated k-center, sharing the plan's unconstrained centers.
pub fn sweep(
    voters: &[VoterRecord],
    sites: &[Site],
    plan_outcome: &PlanOutcome,
    cfg: &PlanConfig,
    eps_caps: &[f64],
    kcenter_chunks: usize,
) -> Result<SweepOutcome, PipelineError> {
    let ds_pop = dataset_from_voters(voters, sites, cfg.metric)?;
    let n_polling = sites.iter().filter(|s| s.kind == SiteKind::Polling).count();
    let balanced_rows = capacity_sweep(
        &ds_pop,
        &plan_outcome.unconstrained_centers,
        n_polling.max(1),
        eps_caps,
    )?;

    // capacitated k-center on a chunked coreset of the population
    let k = plan_outcome.k;
    let cs = crate::balance::kcenter_coreset(
        &ds_pop,
        k,
        kcenter_chunks,
        crate::coreset::derive_seed(cfg.seed, 0x4C),
    )?;
    let total: u64 = cs.iter().map(|p| p.1).sum();
    let mut kcenter_rows = Vec::new();
    for &eps_cap in eps_caps {
        let capacity =
            CapacityMode::Derived { eps_cap }.capacity(total as f64, n_polling.max(1))? as u64;
        let res = crate::balance::capacitated_kcenter(&ds_pop, &cs, k, capacity)?;
        kcenter_rows.push(KcenterSweepRow {
            eps_cap,
            capacity,
            radius: res.radius,
            load_mean: res.load_mean,
            load_std: res.load_std,
        });
    }
    Ok(SweepOutcome {
        balanced_rows,
        kcenter_rows,
    })
}
