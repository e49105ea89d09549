//! End-to-end checks of the binary: exit codes, file outputs, and
//! seed-for-seed determinism.

use std::path::Path;
use std::process::{Command, Output};

fn fairsite(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairsite"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

#[test]
fn synth_measure_plan_sweep_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let out = path_str(dir.path());
    let synth = fairsite(&[
        "synth", "--seed", "5", "--voters", "800", "--out", &out,
    ]);
    assert!(synth.status.success(), "{}", String::from_utf8_lossy(&synth.stderr));
    let voters = format!("{out}/voters.csv");
    let sites = format!("{out}/sites.csv");
    assert!(Path::new(&voters).exists());
    assert!(Path::new(&sites).exists());

    let mdir = format!("{out}/measure");
    let measure = fairsite(&[
        "measure", "--voters", &voters, "--sites", &sites, "--out", &mdir,
    ]);
    assert!(measure.status.success(), "{}", String::from_utf8_lossy(&measure.stderr));
    for f in ["raw.csv", "normalized.csv", "worst_decile.csv", "report.json", "manifest.json"] {
        assert!(Path::new(&format!("{mdir}/{f}")).exists(), "missing {f}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(format!("{mdir}/report.json")).unwrap())
            .unwrap();
    assert!(report["groups"].is_array());
    assert!(report["worst_decile_distance"]["rows"].is_array());

    let pdir = format!("{out}/plan");
    let plan = fairsite(&[
        "plan", "--voters", &voters, "--sites", &sites, "--seed", "5", "--dump-lp", "--out", &pdir,
    ]);
    assert!(plan.status.success(), "{}", String::from_utf8_lossy(&plan.stderr));
    for f in [
        "before_raw.csv",
        "after_raw.csv",
        "before_normalized.csv",
        "after_normalized.csv",
        "planned_sites.csv",
        "assignment.csv",
        "region_gaps.csv",
        "manifest.json",
        "lp.txt",
    ] {
        assert!(Path::new(&format!("{pdir}/{f}")).exists(), "missing {f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(format!("{pdir}/manifest.json")).unwrap())
            .unwrap();
    let stages: Vec<&str> = manifest["stages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["stage"].as_str().unwrap())
        .collect();
    assert!(stages.contains(&"coreset"));
    assert!(stages.contains(&"lp"));
    assert!(stages.contains(&"filtering"));
    assert!(Path::new(&format!("{pdir}/lp.txt")).exists());

    let sdir = format!("{out}/sweep");
    let sweep = fairsite(&[
        "sweep", "--voters", &voters, "--sites", &sites, "--seed", "5", "--out", &sdir,
    ]);
    assert!(sweep.status.success(), "{}", String::from_utf8_lossy(&sweep.stderr));
    let table = std::fs::read_to_string(format!("{sdir}/sweep_balanced.csv")).unwrap();
    assert_eq!(table.lines().count(), 4, "header + 3 rows:\n{table}");
    let extra: Vec<i64> = table
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert!(extra.windows(2).all(|w| w[1] <= w[0]), "{extra:?}");

    // compare before/after reports
    let compare = fairsite(&[
        "compare",
        "--before",
        &format!("{pdir}/report_before.json"),
        "--after",
        &format!("{pdir}/report_after.json"),
    ]);
    assert!(compare.status.success());
    let text = String::from_utf8_lossy(&compare.stdout);
    assert!(text.contains("max-group school/lib median"));
}

#[test]
fn single_group_input_normalized_load_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = path_str(dir.path());
    let synth = fairsite(&[
        "synth", "--seed", "2", "--voters", "300", "--preset", "two-region", "--out", &out,
    ]);
    assert!(synth.status.success());
    let mdir = format!("{out}/m");
    let measure = fairsite(&[
        "measure",
        "--voters",
        &format!("{out}/voters.csv"),
        "--sites",
        &format!("{out}/sites.csv"),
        "--out",
        &mdir,
    ]);
    assert!(measure.status.success());
    let norm = std::fs::read_to_string(format!("{mdir}/normalized.csv")).unwrap();
    let row = norm.lines().nth(1).unwrap();
    assert!(row.ends_with("1.00"), "normalized load not 1.00: {row}");
}

#[test]
fn empty_voter_file_exits_two_naming_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let voters = dir.path().join("empty.csv");
    std::fs::write(&voters, "").unwrap();
    let sites = dir.path().join("sites.csv");
    std::fs::write(&sites, "id,kind,lat,lon\ns0,polling,27.0,-81.0\n").unwrap();
    let out = fairsite(&[
        "measure",
        "--voters",
        &path_str(&voters),
        "--sites",
        &path_str(&sites),
        "--out",
        &path_str(&dir.path().join("m")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("empty.csv"), "stderr should name the file: {err}");
}

#[test]
fn dangling_site_reference_exits_two_listing_ids() {
    let dir = tempfile::tempdir().unwrap();
    let voters = dir.path().join("v.csv");
    std::fs::write(
        &voters,
        "id,group,lat,lon,precinct,site_id\nv1,A,27.0,-81.0,p0,missing-site\n",
    )
    .unwrap();
    let sites = dir.path().join("s.csv");
    std::fs::write(&sites, "id,kind,lat,lon\ns0,polling,27.0,-81.0\n").unwrap();
    let out = fairsite(&[
        "measure",
        "--voters",
        &path_str(&voters),
        "--sites",
        &path_str(&sites),
        "--out",
        &path_str(&dir.path().join("m")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("missing-site"), "{err}");
}

#[test]
fn theorem_regressions_exit_zero() {
    let out = fairsite(&["theorems"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("PASS: integrality-gap"));
    assert!(text.contains("PASS: local-search-trap"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn identical_seeds_give_byte_identical_outputs() {
    let run = |tag: &str| {
        let dir = tempfile::tempdir().unwrap();
        let out = path_str(dir.path());
        assert!(fairsite(&["synth", "--seed", "9", "--voters", "600", "--out", &out])
            .status
            .success());
        let pdir = format!("{out}/plan{tag}");
        assert!(fairsite(&[
            "plan",
            "--voters",
            &format!("{out}/voters.csv"),
            "--sites",
            &format!("{out}/sites.csv"),
            "--seed",
            "9",
            "--out",
            &pdir,
        ])
        .status
        .success());
        let mut blobs = Vec::new();
        let mut names: Vec<_> = std::fs::read_dir(&pdir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        names.sort();
        for p in names {
            blobs.push((p.file_name().unwrap().to_owned(), std::fs::read(p).unwrap()));
        }
        (dir, blobs)
    };
    let (_d1, a) = run("A");
    let (_d2, b) = run("B");
    assert_eq!(a.len(), b.len());
    for ((name_a, bytes_a), (name_b, bytes_b)) in a.iter().zip(&b) {
        assert_eq!(name_a, name_b);
        assert_eq!(bytes_a, bytes_b, "{name_a:?} differs across runs");
    }
}

#[test]
fn dependent_rounding_plan_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = path_str(dir.path());
    assert!(fairsite(&["synth", "--seed", "3", "--voters", "500", "--out", &out])
        .status
        .success());
    let pdir = format!("{out}/plan");
    let plan = fairsite(&[
        "plan",
        "--voters",
        &format!("{out}/voters.csv"),
        "--sites",
        &format!("{out}/sites.csv"),
        "--rounding",
        "dependent",
        "--trials",
        "32",
        "--eps-cap",
        "0.5",
        "--seed",
        "3",
        "--out",
        &pdir,
    ]);
    assert!(plan.status.success(), "{}", String::from_utf8_lossy(&plan.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(format!("{pdir}/manifest.json")).unwrap())
            .unwrap();
    let stages: Vec<&str> = manifest["stages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["stage"].as_str().unwrap())
        .collect();
    assert!(stages.contains(&"dependent_rounding"));
    assert!(stages.contains(&"balance"));
}
