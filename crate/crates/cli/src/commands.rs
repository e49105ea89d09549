//! Command implementations: file IO, pipeline orchestration, exit-code
//! mapping. All stochastic stages take their seeds from the --seed flag, so
//! identical invocations produce byte-identical outputs.

use fairsite_core::balance::audit_split;
use fairsite_core::baseline::{local_search_kmedian, LocalSearchOpts, SwapObjective};
use fairsite_core::coreset::CoresetConfig;
use fairsite_core::dataset::{
    integrality_gap_instance, load_sites, load_voters, local_search_trap_instance, synth_state,
    write_sites, write_voters, CsvSchema, SynthConfig, VoterRecord,
};
use fairsite_core::fairlp::{solve_fair_lp, FairLpInstance, FairMode};
use fairsite_core::geo::MetricKind;
use fairsite_core::measure::{
    full_report, normalized_csv, raw_csv, resolve_assignment, worst_decile_csv, MeasureConfig,
};
use fairsite_core::pipeline::{
    self, assignment_csv, kcenter_sweep_csv, planned_sites_csv, region_gaps_csv, FacilityPolicy,
    PlanConfig, PlanObjective, RoundingKind, RunManifest,
};
use fairsite_core::rounding::{audit_filtering, filtering_round};
use serde_json::json;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug)]
pub struct CliError {
    message: String,
    code: u8,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        self.code
    }

    fn input<E: std::fmt::Display>(e: E) -> Self {
        CliError {
            message: e.to_string(),
            code: 2,
        }
    }

    fn solver<E: std::fmt::Display>(e: E) -> Self {
        CliError {
            message: e.to_string(),
            code: 3,
        }
    }

    fn regression(msg: String) -> Self {
        CliError { message: msg, code: 4 }
    }
}

fn from_pipeline(e: pipeline::PipelineError) -> CliError {
    match e {
        pipeline::PipelineError::LpNotConverged => CliError::solver(e),
        other => CliError::input(other),
    }
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(CliError::input)?;
    std::fs::write(dir.join(name), content).map_err(CliError::input)?;
    println!("wrote {}", dir.join(name).display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn plan_config(
    k: Option<usize>,
    metric: MetricKind,
    epsilon: f64,
    dependent: bool,
    trials: usize,
    relerror: bool,
    coreset_eps: f64,
    coreset_delta: f64,
    coreset_c: f64,
    coreset_max_size: usize,
    facility_policy: FacilityPolicy,
    eps_cap: Option<f64>,
    dump_lp: bool,
    seed: u64,
) -> PlanConfig {
    PlanConfig {
        k,
        metric,
        epsilon,
        rounding: if dependent {
            RoundingKind::Dependent
        } else {
            RoundingKind::Filter
        },
        trials,
        objective: if relerror {
            PlanObjective::RelError
        } else {
            PlanObjective::AbsError
        },
        coreset: CoresetConfig {
            epsilon: coreset_eps,
            delta: coreset_delta,
            c: coreset_c,
            target_override: None,
            max_size: Some(coreset_max_size),
        },
        facility_policy,
        lp_neighbors: 12,
        eps_cap,
        dump_lp,
        seed,
    }
}

pub fn cmd_synth(seed: u64, voters: usize, preset: &str, out: &Path) -> Result<(), CliError> {
    let config = match preset {
        "reference" => SynthConfig::reference(voters),
        "two-region" => SynthConfig::two_region(voters, 10.0),
        other => {
            return Err(CliError::input(format!(
                "unknown preset `{other}` (expected reference or two-region)"
            )))
        }
    };
    let (voters, sites) = synth_state(seed, &config).map_err(CliError::input)?;
    std::fs::create_dir_all(out).map_err(CliError::input)?;
    write_voters(out.join("voters.csv"), &voters, &CsvSchema::default())
        .map_err(CliError::input)?;
    write_sites(out.join("sites.csv"), &sites).map_err(CliError::input)?;
    let mut manifest = RunManifest::new("synth", seed, json!({"preset": preset, "n": voters.len()}));
    manifest.log(
        "synth",
        json!({"voters": voters.len(), "sites": sites.len()}),
    );
    write_file(
        out,
        "manifest.json",
        &serde_json::to_string_pretty(&manifest).map_err(CliError::input)?,
    )?;
    println!("wrote {}", out.join("voters.csv").display());
    println!("wrote {}", out.join("sites.csv").display());
    Ok(())
}

fn load_inputs(
    voters_path: &Path,
    sites_path: &Path,
    assignment: Option<&Path>,
) -> Result<(Vec<VoterRecord>, Vec<fairsite_core::dataset::Site>), CliError> {
    let outcome = load_voters(voters_path, &CsvSchema::default()).map_err(|e| {
        CliError::input(format!("{}: {e}", voters_path.display()))
    })?;
    let dropped = outcome.total_dropped();
    let dropped_by_group = outcome.dropped_by_group;
    let mut voters = outcome.voters;
    if voters.is_empty() {
        return Err(CliError::input(format!(
            "{}: no usable voter rows ({dropped} dropped)",
            voters_path.display()
        )));
    }
    if dropped > 0 {
        eprintln!("note: dropped {dropped} rows with unparseable coordinates: {dropped_by_group:?}");
    }
    let sites = load_sites(sites_path)
        .map_err(|e| CliError::input(format!("{}: {e}", sites_path.display())))?;
    if let Some(path) = assignment {
        let text = std::fs::read_to_string(path).map_err(CliError::input)?;
        let mut map = std::collections::HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 {
                continue; // header
            }
            if let Some((vid, sid)) = line.split_once(',') {
                map.insert(vid.trim().to_string(), sid.trim().to_string());
            }
        }
        for v in &mut voters {
            if let Some(sid) = map.get(&v.id) {
                v.assigned_site = Some(sid.clone());
            }
        }
    }
    Ok((voters, sites))
}

pub fn cmd_measure(
    voters_path: &Path,
    sites_path: &Path,
    assignment: Option<&Path>,
    metric: MetricKind,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let (voters, sites) = load_inputs(voters_path, sites_path, assignment)?;
    let cfg = MeasureConfig {
        metric,
        seed,
        ..MeasureConfig::default()
    };
    let site_of = resolve_assignment(&voters, &sites).map_err(CliError::input)?;
    let report = full_report(&voters, &sites, &site_of, &cfg).map_err(CliError::input)?;
    write_file(out, "raw.csv", &raw_csv(&report))?;
    write_file(out, "normalized.csv", &normalized_csv(&report))?;
    write_file(out, "worst_decile.csv", &worst_decile_csv(&report))?;
    write_file(
        out,
        "report.json",
        &serde_json::to_string_pretty(&report).map_err(CliError::input)?,
    )?;
    let mut manifest = RunManifest::new(
        "measure",
        seed,
        json!({"voters": voters.len(), "sites": sites.len()}),
    );
    manifest.log("measure", json!({"majority_group": report.majority_group}));
    write_file(
        out,
        "manifest.json",
        &serde_json::to_string_pretty(&manifest).map_err(CliError::input)?,
    )?;
    Ok(())
}

pub fn cmd_plan(
    voters_path: &Path,
    sites_path: &Path,
    cfg: &PlanConfig,
    out: &Path,
) -> Result<(), CliError> {
    let (voters, sites) = load_inputs(voters_path, sites_path, None)?;
    let outcome = pipeline::plan(&voters, &sites, cfg).map_err(from_pipeline)?;
    write_file(out, "before_raw.csv", &raw_csv(&outcome.before))?;
    write_file(out, "before_normalized.csv", &normalized_csv(&outcome.before))?;
    write_file(
        out,
        "before_worst_decile.csv",
        &worst_decile_csv(&outcome.before),
    )?;
    write_file(out, "after_raw.csv", &raw_csv(&outcome.after))?;
    write_file(out, "after_normalized.csv", &normalized_csv(&outcome.after))?;
    write_file(
        out,
        "after_worst_decile.csv",
        &worst_decile_csv(&outcome.after),
    )?;
    write_file(out, "planned_sites.csv", &planned_sites_csv(&outcome.planned_sites))?;
    write_file(
        out,
        "assignment.csv",
        &assignment_csv(&voters, &outcome.planned_sites, &outcome.assignment),
    )?;
    write_file(out, "region_gaps.csv", &region_gaps_csv(&outcome.region_gaps))?;
    write_file(out, "coreset.csv", &outcome.coreset_csv)?;
    if let Some(lp) = &outcome.lp_export {
        write_file(out, "lp.txt", lp)?;
    }
    write_file(
        out,
        "report_before.json",
        &serde_json::to_string_pretty(&outcome.before).map_err(CliError::input)?,
    )?;
    write_file(
        out,
        "report_after.json",
        &serde_json::to_string_pretty(&outcome.after).map_err(CliError::input)?,
    )?;
    write_file(
        out,
        "manifest.json",
        &serde_json::to_string_pretty(&outcome.manifest).map_err(CliError::input)?,
    )?;
    Ok(())
}

pub fn cmd_sweep(
    voters_path: &Path,
    sites_path: &Path,
    cfg: &PlanConfig,
    eps_caps: &[f64],
    kcenter_chunks: usize,
    out: &Path,
) -> Result<(), CliError> {
    let (voters, sites) = load_inputs(voters_path, sites_path, None)?;
    let outcome = pipeline::plan(&voters, &sites, cfg).map_err(from_pipeline)?;
    let sweep = pipeline::sweep(&voters, &sites, &outcome, cfg, eps_caps, kcenter_chunks)
        .map_err(from_pipeline)?;
    write_file(
        out,
        "sweep_balanced.csv",
        &fairsite_core::balance::sweep_csv(&sweep.balanced_rows),
    )?;
    write_file(out, "sweep_kcenter.csv", &kcenter_sweep_csv(&sweep.kcenter_rows))?;
    // monotonicity audit: extra sites cannot grow with looser capacity
    for w in sweep.balanced_rows.windows(2) {
        if w[1].extra_sites > w[0].extra_sites {
            return Err(CliError::regression(format!(
                "extra_sites increased from {} to {} as eps_cap rose",
                w[0].extra_sites, w[1].extra_sites
            )));
        }
    }
    // soft trend report: load spread widening with looser capacity
    for w in sweep.balanced_rows.windows(2) {
        if w[1].load_std + 1e-9 < w[0].load_std {
            eprintln!(
                "note: load std dipped from {:.2} to {:.2} at eps_cap {}",
                w[0].load_std, w[1].load_std, w[1].eps_cap
            );
        }
    }
    let mut manifest = RunManifest::new(
        "sweep",
        cfg.seed,
        serde_json::to_value(cfg).map_err(CliError::input)?,
    );
    manifest.log(
        "sweep",
        json!({
            "balanced": serde_json::to_value(&sweep.balanced_rows).unwrap(),
            "kcenter": serde_json::to_value(&sweep.kcenter_rows).unwrap(),
        }),
    );
    write_file(
        out,
        "manifest.json",
        &serde_json::to_string_pretty(&manifest).map_err(CliError::input)?,
    )?;
    Ok(())
}

pub fn cmd_compare(before: &Path, after: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let load = |p: &Path| -> Result<serde_json::Value, CliError> {
        let text = std::fs::read_to_string(p)
            .map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", p.display())))
    };
    let b = load(before)?;
    let a = load(after)?;
    let rows = |v: &serde_json::Value| -> Vec<(String, f64, f64)> {
        v["normalized"]
            .as_array()
            .map(|arr| {
                arr.iter()
                    .map(|r| {
                        (
                            r["group"].as_str().unwrap_or("?").to_string(),
                            r["school_lib_median"].as_f64().unwrap_or(f64::NAN),
                            r["normalized_load"].as_f64().unwrap_or(f64::NAN),
                        )
                    })
                    .collect()
            })
            .unwrap_or_default()
    };
    let before_rows = rows(&b);
    let after_rows = rows(&a);
    let mut table = String::from(
        "group,school_lib_median_before,school_lib_median_after,norm_load_before,norm_load_after\n",
    );
    for (group, med_b, load_b) in &before_rows {
        let (med_a, load_a) = after_rows
            .iter()
            .find(|(g, _, _)| g == group)
            .map(|(_, m, l)| (*m, *l))
            .unwrap_or((f64::NAN, f64::NAN));
        writeln!(table, "{group},{med_b:.2},{med_a:.2},{load_b:.2},{load_a:.2}")
            .map_err(CliError::input)?;
    }
    let max_med = |rows: &[(String, f64, f64)]| {
        rows.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max)
    };
    print!("{table}");
    println!(
        "max-group school/lib median: before {:.3}, after {:.3}",
        max_med(&before_rows),
        max_med(&after_rows)
    );
    if let Some(dir) = out {
        write_file(dir, "compare.csv", &table)?;
    }
    Ok(())
}

/// Adversarial-instance regression checks: LP gap, filtering bounds,
/// splitting bounds, and the local-search trap. Prints one PASS/FAIL line
/// per check; any FAIL exits with code 4.
pub fn cmd_theorems() -> Result<(), CliError> {
    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool, detail: String| {
        println!("{}: {name} — {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failures.push(name.to_string());
        }
    };

    // integrality gap: LP at D/m, integral at D, ratio >= m
    for m in 2..=6usize {
        for d in [1.0, 7.0] {
            let (ds, k) = integrality_gap_instance(m, d).map_err(CliError::input)?;
            let inst = FairLpInstance {
                ds: &ds,
                k,
                mode: FairMode::AbsError,
                neighbors: usize::MAX,
            };
            let (sol, _) = solve_fair_lp(&inst).map_err(CliError::input)?;
            let (_, integral) = fairsite_core::exhaustive::exhaustive_fair_kmedian(&ds, k);
            let ratio = integral / sol.lambda;
            let ok = sol.lambda <= d / m as f64 + 1e-6
                && (integral - d).abs() < 1e-9
                && ratio >= m as f64 * (1.0 - 1e-5);
            check(
                "integrality-gap",
                ok,
                format!("m={m} D={d}: lambda={:.6}, integral={integral:.6}, ratio={ratio:.4}", sol.lambda),
            );
        }
    }

    // filtering bounds on seeded random instances
    for seed in 0..3u64 {
        let (ds, k) = random_line_instance(seed, 24, 3, 3);
        let inst = FairLpInstance {
            ds: &ds,
            k,
            mode: FairMode::AbsError,
            neighbors: usize::MAX,
        };
        let (sol, _) = solve_fair_lp(&inst).map_err(CliError::input)?;
        let res = filtering_round(&ds, &sol, k, 0.5).map_err(CliError::input)?;
        let audit = audit_filtering(&ds, &sol, &res);
        check(
            "filtering-bounds",
            audit.ok,
            format!(
                "seed={seed}: opened {} <= {}, max pointwise excess {:.2e}",
                audit.opened, audit.open_bound, audit.max_pointwise_excess
            ),
        );
    }

    // balanced splitting bounds; capacity at n/k so the 2k bound applies
    for seed in 0..3u64 {
        let (ds, _) = random_line_instance(seed + 10, 40, 2, 2);
        let centers = vec![
            fairsite_core::balance::CenterLoc::Point(0),
            fairsite_core::balance::CenterLoc::Point(1),
        ];
        let res = fairsite_core::balance::l_balanced_split(&ds, &centers, 20.0)
            .map_err(CliError::input)?;
        let audit = audit_split(&ds, &centers, &res);
        check(
            "balanced-split",
            audit.ok,
            format!(
                "seed={seed}: centers {} -> {}, max load {:.0}, inflation {:.3}",
                audit.centers_before, audit.centers_after, audit.max_load, audit.max_inflation
            ),
        );
    }

    // local-search trap: started at {a1, b1} the fair-objective search stays
    for t in [10usize, 50] {
        let trap = local_search_trap_instance(t, 1.0, 0.01, None).map_err(CliError::input)?;
        let opts = LocalSearchOpts {
            initial: Some(vec![trap.a1, trap.b1]),
            ..LocalSearchOpts::default()
        };
        let out = local_search_kmedian(&trap.dataset, 2, SwapObjective::FairAbsError, &opts)
            .map_err(CliError::input)?;
        let mut got = out.centers.centers.clone();
        got.sort_unstable();
        let stuck = got == vec![trap.a1, trap.b1] && out.cost_trace.len() == 1;
        let ratio = trap.trap_cost / trap.constructed_optimum_cost;
        let ok = stuck && ratio >= t as f64 / 2.0;
        check(
            "local-search-trap",
            ok,
            format!("t={t}: stuck={stuck}, trap/optimum ratio {ratio:.2}"),
        );
    }

    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::regression(format!(
            "{} theorem check(s) failed: {}",
            failures.len(),
            failures.join(", ")
        )))
    }
}

/// Deterministic pseudo-random 1-d instance for the regression checks.
fn random_line_instance(
    seed: u64,
    n: usize,
    m: usize,
    k: usize,
) -> (fairsite_core::dataset::GroupedDataset, usize) {
    use fairsite_core::dataset::{DataPoint, Facilities, GroupedDataset, MetricSource};
    let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let xs: Vec<f64> = (0..n).map(|_| next() * 50.0).collect();
    let points = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| DataPoint {
            coords: vec![x],
            weight: 1.0,
            group: i % m,
            entity: i,
        })
        .collect();
    let ds = GroupedDataset::new(
        points,
        (0..m).map(|g| format!("g{g}")).collect(),
        Facilities::Coords(xs.iter().map(|&x| vec![x]).collect()),
        MetricSource::Kernel(MetricKind::Euclidean { dim: 1 }),
    )
    .unwrap();
    (ds, k)
}
