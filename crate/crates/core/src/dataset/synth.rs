//! Synthetic state generator: Gaussian population blobs with configurable
//! density and per-region group mix, plus polling/school/library sites and a
//! precinct-based original assignment. Deterministic under a seed, which is
//! what makes desk-scale pipeline runs reproducible.

use super::{DatasetError, Site, SiteKind, VoterRecord};
use crate::geo::GeoPoint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One population blob.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionSpec {
    /// Blob center (lat, lon).
    pub center: (f64, f64),
    /// Relative share of voters landing in this region.
    pub density_weight: f64,
    /// Std-dev of voter offsets from the center, in degrees.
    pub std_deg: f64,
    /// Group distribution inside the region; must sum to 1.
    pub group_mix: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_voters: usize,
    pub group_labels: Vec<String>,
    pub regions: Vec<RegionSpec>,
    pub n_polling: usize,
    pub n_schools: usize,
    pub n_libraries: usize,
    /// Polling sites are allocated to regions proportionally to
    /// population^site_skew. Values below 1 underserve dense regions,
    /// which is how a planted disparity is controlled.
    pub site_skew: f64,
    pub n_precincts: usize,
}

impl SynthConfig {
    /// Two blobs with a given density ratio and a single group; used for
    /// density-calibration checks.
    pub fn two_region(n_voters: usize, density_ratio: f64) -> Self {
        SynthConfig {
            n_voters,
            group_labels: vec!["A".into()],
            regions: vec![
                RegionSpec {
                    center: (27.9, -82.4),
                    density_weight: density_ratio,
                    std_deg: 0.05,
                    group_mix: vec![1.0],
                },
                RegionSpec {
                    center: (27.1, -81.0),
                    density_weight: 1.0,
                    std_deg: 0.15,
                    group_mix: vec![1.0],
                },
            ],
            n_polling: 20,
            n_schools: 14,
            n_libraries: 6,
            site_skew: 1.0,
            n_precincts: 20,
        }
    }

    /// The seeded reference state used by the end-to-end pipeline checks:
    /// three groups, four regions, group/geography correlation, and polling
    /// sites skewed away from the dense minority-heavy regions.
    pub fn reference(n_voters: usize) -> Self {
        SynthConfig {
            n_voters,
            group_labels: vec!["alpha".into(), "beta".into(), "gamma".into()],
            regions: vec![
                // dense urban core, minority-heavy, underserved by skew
                RegionSpec {
                    center: (27.95, -82.46),
                    density_weight: 6.0,
                    std_deg: 0.06,
                    group_mix: vec![0.25, 0.55, 0.20],
                },
                RegionSpec {
                    center: (28.54, -81.38),
                    density_weight: 4.0,
                    std_deg: 0.08,
                    group_mix: vec![0.45, 0.30, 0.25],
                },
                RegionSpec {
                    center: (27.20, -80.85),
                    density_weight: 1.5,
                    std_deg: 0.18,
                    group_mix: vec![0.75, 0.10, 0.15],
                },
                RegionSpec {
                    center: (29.10, -82.10),
                    density_weight: 1.0,
                    std_deg: 0.22,
                    group_mix: vec![0.85, 0.05, 0.10],
                },
            ],
            n_polling: 24,
            n_schools: 18,
            n_libraries: 8,
            site_skew: 0.55,
            n_precincts: 52,
        }
    }
}

/// Largest-remainder apportionment of `total` items over `weights`.
fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        let mut out = vec![0; weights.len()];
        if !out.is_empty() {
            out[0] = total;
        }
        return out;
    }
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    // largest fractional remainder first, index as tie-break
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for i in 0..(total - assigned) {
        counts[order[i % order.len()]] += 1;
    }
    counts
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; one value per call keeps the stream layout simple.
    loop {
        let u1: f64 = rng.gen::<f64>();
        let u2: f64 = rng.gen::<f64>();
        if u1 > f64::MIN_POSITIVE {
            return (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        }
    }
}

fn blob_point(rng: &mut ChaCha8Rng, center: (f64, f64), std_deg: f64) -> GeoPoint {
    let lat = (center.0 + gaussian(rng) * std_deg).clamp(-89.9, 89.9);
    let lon = (center.1 + gaussian(rng) * std_deg).clamp(-179.9, 179.9);
    GeoPoint::new(lat, lon).expect("clamped coordinates are valid")
}

fn validate(config: &SynthConfig) -> Result<(), DatasetError> {
    let m = config.group_labels.len();
    if m == 0 {
        return Err(DatasetError::InvalidInput("need at least one group".into()));
    }
    if config.n_voters < m {
        return Err(DatasetError::InvalidInput(format!(
            "n_voters={} smaller than number of groups {m}",
            config.n_voters
        )));
    }
    if config.regions.is_empty() {
        return Err(DatasetError::InvalidInput("need at least one region".into()));
    }
    if config.n_polling == 0 {
        return Err(DatasetError::InvalidInput("need at least one polling site".into()));
    }
    if config.n_precincts == 0 {
        return Err(DatasetError::InvalidInput("need at least one precinct".into()));
    }
    for (r, spec) in config.regions.iter().enumerate() {
        if spec.group_mix.len() != m {
            return Err(DatasetError::InvalidInput(format!(
                "region {r} mix has {} entries, expected {m}",
                spec.group_mix.len()
            )));
        }
        if spec.group_mix.iter().any(|&p| p < 0.0) {
            return Err(DatasetError::InvalidInput(format!(
                "region {r} mix has a negative entry"
            )));
        }
        let s: f64 = spec.group_mix.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(DatasetError::InvalidInput(format!(
                "region {r} group mix sums to {s}, expected 1"
            )));
        }
        if !(spec.density_weight > 0.0) {
            return Err(DatasetError::InvalidInput(format!(
                "region {r} density weight must be positive"
            )));
        }
        if !(spec.std_deg > 0.0) {
            return Err(DatasetError::InvalidInput(format!(
                "region {r} std_deg must be positive"
            )));
        }
    }
    Ok(())
}

/// Generate a synthetic state. Identical (seed, config) inputs produce
/// identical outputs byte for byte.
pub fn synth_state(
    seed: u64,
    config: &SynthConfig,
) -> Result<(Vec<VoterRecord>, Vec<Site>), DatasetError> {
    validate(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let density: Vec<f64> = config.regions.iter().map(|r| r.density_weight).collect();
    let voters_per_region = apportion(config.n_voters, &density);

    // sites: polling allocation skewed, schools and libraries follow population
    let skewed: Vec<f64> = density.iter().map(|w| w.powf(config.site_skew)).collect();
    let polling_per_region = apportion(config.n_polling, &skewed);
    let schools_per_region = apportion(config.n_schools, &density);
    let libraries_per_region = apportion(config.n_libraries, &density);

    let mut sites = Vec::new();
    let mut polling_indices = Vec::new();
    for (r, spec) in config.regions.iter().enumerate() {
        for _ in 0..polling_per_region[r] {
            polling_indices.push(sites.len());
            sites.push(Site {
                id: format!("poll{:04}", polling_indices.len() - 1),
                kind: SiteKind::Polling,
                location: blob_point(&mut rng, spec.center, spec.std_deg * 1.2),
            });
        }
    }
    let mut school_count = 0usize;
    for (r, spec) in config.regions.iter().enumerate() {
        for _ in 0..schools_per_region[r] {
            sites.push(Site {
                id: format!("sch{:04}", school_count),
                kind: SiteKind::School,
                location: blob_point(&mut rng, spec.center, spec.std_deg),
            });
            school_count += 1;
        }
    }
    let mut library_count = 0usize;
    for (r, spec) in config.regions.iter().enumerate() {
        for _ in 0..libraries_per_region[r] {
            sites.push(Site {
                id: format!("lib{:04}", library_count),
                kind: SiteKind::Library,
                location: blob_point(&mut rng, spec.center, spec.std_deg),
            });
            library_count += 1;
        }
    }

    // precinct seeds follow population; each precinct is served by the
    // polling site nearest to its seed, which is what makes the original
    // assignment realistically suboptimal at the voter level
    let precincts_per_region = apportion(config.n_precincts, &density);
    let mut precinct_seeds: Vec<(usize, GeoPoint)> = Vec::new();
    for (r, spec) in config.regions.iter().enumerate() {
        for _ in 0..precincts_per_region[r] {
            precinct_seeds.push((r, blob_point(&mut rng, spec.center, spec.std_deg)));
        }
    }
    let metric = crate::geo::MetricKind::haversine_miles();
    let designated: Vec<usize> = precinct_seeds
        .iter()
        .map(|(_, seed_pt)| {
            let mut best = (0usize, f64::INFINITY);
            for &pi in &polling_indices {
                let d = crate::geo::distance_unchecked(
                    &seed_pt.coords(),
                    &sites[pi].location.coords(),
                    &metric,
                );
                if d < best.1 {
                    best = (pi, d);
                }
            }
            best.0
        })
        .collect();

    let mut voters = Vec::with_capacity(config.n_voters);
    let mut voter_index = 0usize;
    for (r, spec) in config.regions.iter().enumerate() {
        let group_counts = apportion(voters_per_region[r], &spec.group_mix);
        for (g, &count) in group_counts.iter().enumerate() {
            for _ in 0..count {
                let location = blob_point(&mut rng, spec.center, spec.std_deg);
                // nearest precinct seed, restricted to this region's seeds
                // when it has any (regions always get >= 0 seeds; fall back
                // to the global nearest otherwise)
                let mut best = (usize::MAX, f64::INFINITY);
                for (pi, (pr, seed_pt)) in precinct_seeds.iter().enumerate() {
                    if *pr != r {
                        continue;
                    }
                    let d = crate::geo::distance_unchecked(
                        &location.coords(),
                        &seed_pt.coords(),
                        &metric,
                    );
                    if d < best.1 {
                        best = (pi, d);
                    }
                }
                if best.0 == usize::MAX {
                    for (pi, (_, seed_pt)) in precinct_seeds.iter().enumerate() {
                        let d = crate::geo::distance_unchecked(
                            &location.coords(),
                            &seed_pt.coords(),
                            &metric,
                        );
                        if d < best.1 {
                            best = (pi, d);
                        }
                    }
                }
                let precinct_idx = best.0;
                voters.push(VoterRecord {
                    id: format!("v{:07}", voter_index),
                    group: config.group_labels[g].clone(),
                    location,
                    precinct: Some(format!("r{r}-p{precinct_idx:04}")),
                    assigned_site: Some(sites[designated[precinct_idx]].id.clone()),
                });
                voter_index += 1;
            }
        }
    }
    Ok((voters, sites))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_under_seed() {
        let cfg = SynthConfig::two_region(500, 4.0);
        let a = synth_state(1, &cfg).unwrap();
        let b = synth_state(1, &cfg).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn pure_mix_yields_single_group() {
        let mut cfg = SynthConfig::two_region(200, 2.0);
        cfg.group_labels = vec!["A".into()];
        for r in &mut cfg.regions {
            r.group_mix = vec![1.0];
        }
        let (voters, _) = synth_state(7, &cfg).unwrap();
        assert!(voters.iter().all(|v| v.group == "A"));
    }

    #[test]
    fn density_ratio_controls_region_counts() {
        let cfg = SynthConfig::two_region(10_000, 10.0);
        let (voters, _) = synth_state(3, &cfg).unwrap();
        let in_r0 = voters
            .iter()
            .filter(|v| v.precinct.as_deref().map(|p| p.starts_with("r0-")).unwrap_or(false))
            .count();
        let in_r1 = voters.len() - in_r0;
        let ratio = in_r0 as f64 / in_r1 as f64;
        assert!(
            (ratio - 10.0).abs() / 10.0 < 0.15,
            "expected ~10:1, got {ratio:.2}:1"
        );
    }

    #[test]
    fn bad_mix_sum_is_rejected() {
        let mut cfg = SynthConfig::two_region(100, 2.0);
        cfg.regions[0].group_mix = vec![0.7];
        assert!(synth_state(1, &cfg).is_err());
    }

    #[test]
    fn apportion_is_exact() {
        let counts = apportion(10_000, &[10.0, 1.0]);
        assert_eq!(counts.iter().sum::<usize>(), 10_000);
        assert_eq!(counts, vec![9091, 909]);
    }
}
