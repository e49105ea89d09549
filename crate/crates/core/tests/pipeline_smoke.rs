//! Pipeline-level checks that are cheap enough to run on every build: the
//! trivial all-sites plan, the planted-disparity reduction at small scale,
//! and the shape of the per-region gap table.

use fairsite_core::dataset::{synth_state, SynthConfig};
use fairsite_core::pipeline::{plan, PlanConfig, RoundingKind};

#[test]
fn opening_every_site_reproduces_nearest_site_distances() {
    let cfg_synth = SynthConfig::reference(900);
    let (voters, sites) = synth_state(21, &cfg_synth).unwrap();
    let cfg = PlanConfig {
        k: Some(sites.len()),
        rounding: RoundingKind::Dependent,
        trials: 4,
        seed: 21,
        ..PlanConfig::default()
    };
    let outcome = plan(&voters, &sites, &cfg).unwrap();
    assert_eq!(outcome.planned_sites.len(), sites.len());
    // every voter sits at their true nearest site
    let metric = cfg.metric;
    for (v, &s) in voters.iter().zip(&outcome.assignment) {
        let assigned = fairsite_core::geo::distance_unchecked(
            &v.location.coords(),
            &outcome.planned_sites[s].location.coords(),
            &metric,
        );
        let nearest = sites
            .iter()
            .map(|site| {
                fairsite_core::geo::distance_unchecked(
                    &v.location.coords(),
                    &site.location.coords(),
                    &metric,
                )
            })
            .fold(f64::INFINITY, f64::min);
        assert!(
            (assigned - nearest).abs() < 1e-12,
            "voter {} assigned at {assigned}, nearest is {nearest}",
            v.id
        );
    }
}

#[test]
fn planted_disparity_shrinks_after_planning() {
    let cfg_synth = SynthConfig::reference(3000);
    let (voters, sites) = synth_state(7, &cfg_synth).unwrap();
    let cfg = PlanConfig {
        seed: 7,
        ..PlanConfig::default()
    };
    let outcome = plan(&voters, &sites, &cfg).unwrap();
    let max_med = |r: &fairsite_core::measure::DisparityReport| {
        r.normalized
            .iter()
            .map(|row| row.school_lib_median)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let before = max_med(&outcome.before);
    let after = max_med(&outcome.after);
    assert!(
        after <= before + 1e-12,
        "max-group normalized median rose: {before} -> {after}"
    );

    // region gap table covers every region and gaps are finite
    assert_eq!(outcome.region_gaps.len(), 4);
    for row in &outcome.region_gaps {
        assert!(row.gap_before.is_finite() && row.gap_after.is_finite());
        assert!(row.gap_before >= 0.0 && row.gap_after >= 0.0);
    }

    // the manifest records every stage of this run
    let stages: Vec<&str> = outcome
        .manifest
        .stages
        .iter()
        .map(|s| s.stage.as_str())
        .collect();
    assert_eq!(stages, vec!["coreset", "lp", "filtering", "assignment"]);
}
