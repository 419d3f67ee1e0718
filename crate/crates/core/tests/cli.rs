use std::path::Path;
use std::process::{Command, Output};

use hsunmix::io::{read_cube, read_report, read_spectral_library};

fn hsunmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hsunmix")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, seed: &str) {
    let out = hsunmix(&[
        "synth", "--c", "3", "--width", "8", "--height", "6", "--patch", "3", "--filter", "3", "--snr", "30",
        "--seed", seed, "--out", path(dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn help_is_available_for_every_subcommand() {
    for sub in ["synth", "cluster", "unmix", "eval", "experiment"] {
        let out = hsunmix(&[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{sub}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"));
    }
}

#[test]
fn usage_and_io_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let even = hsunmix(&["synth", "--filter", "4", "--out", path(dir.path())]);
    assert_eq!(even.status.code(), Some(2));
    let missing = hsunmix(&["unmix", path(&dir.path().join("nope.cube")), "--out", path(dir.path())]);
    assert_eq!(missing.status.code(), Some(2));
    let unknown = hsunmix(&["unmix", "x.cube", "--variant", "pca", "--out", "y"]);
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn synth_unmix_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene");
    let result = dir.path().join("result");
    synth(&scene, "4");
    let y = read_cube(scene.join("Y.cube")).unwrap();
    assert_eq!((y.width(), y.height(), y.bands()), (8, 6, 224));
    assert_eq!(read_spectral_library(scene.join("A_true.csv")).unwrap().signatures.endmembers(), 3);

    let out = hsunmix(&[
        "unmix", path(&scene.join("Y.cube")), "--c", "3", "--clusters", "2", "--max-iter", "50",
        "--truth", path(&scene), "--out", path(&result),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for file in ["A.csv", "S.cube", "run.json", "labels.cube", "report.json"] {
        assert!(result.join(file).exists(), "{file} missing");
    }
    let from_unmix = read_report(result.join("report.json")).unwrap();
    assert_eq!(from_unmix.cost_trace.len(), 50);
    assert_eq!(from_unmix.config.clusters, 2);

    let eval_path = dir.path().join("eval.json");
    let out = hsunmix(&["eval", "--truth", path(&scene), "--result", path(&result), "--out", path(&eval_path)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read(eval_path).unwrap(), std::fs::read(result.join("report.json")).unwrap());
}

#[test]
fn clusters_flag_is_ignored_with_a_warning_for_unclustered_variants() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene");
    synth(&scene, "5");
    let out = hsunmix(&[
        "unmix", path(&scene.join("Y.cube")), "--variant", "nmf", "--c", "3", "--clusters", "4", "--max-iter", "5",
        "--out", path(&dir.path().join("r")),
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("ignoring --clusters"));
    assert!(!dir.path().join("r/labels.cube").exists());
}

#[test]
fn cluster_subcommand_writes_labels_and_memberships() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene");
    synth(&scene, "6");
    let out_dir = dir.path().join("clusters");
    let out = hsunmix(&["cluster", path(&scene.join("Y.cube")), "--clusters", "3", "--out", path(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let labels = read_cube(out_dir.join("labels.cube")).unwrap();
    assert_eq!(labels.bands(), 1);
    assert!(labels.data().iter().all(|&l| l == l.trunc() && (0.0..3.0).contains(&l)));
    let memberships = read_cube(out_dir.join("memberships.cube")).unwrap();
    for col in memberships.data().columns() {
        assert!((col.sum() - 1.0).abs() < 1e-9);
    }
    assert_eq!(read_spectral_library(out_dir.join("centers.csv")).unwrap().signatures.endmembers(), 3);
}

fn parse_csv(text: &str) -> Vec<Vec<String>> {
    text.lines().map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

#[test]
fn experiment_is_deterministic_and_aggregates_match_cells() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("exp.txt");
    std::fs::write(
        &spec,
        "# tiny sweep\nvariants = fcls, nmf, proposed\nsnr_levels = 20, inf\ncluster_counts = 1..2\nruns = 2\n\
         width = 10\nheight = 8\nendmembers = 3\npatch = 2\nfilter = 3\nmax_iter = 20\nseed = 9\n",
    )
    .unwrap();
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = hsunmix(&["experiment", path(&spec), "--out", path(&out_dir)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        (
            std::fs::read_to_string(out_dir.join("results.csv")).unwrap(),
            std::fs::read_to_string(out_dir.join("aggregate.csv")).unwrap(),
        )
    };
    let (results, agg) = run("a");
    assert_eq!(run("b"), (results.clone(), agg.clone()));

    let rows = parse_csv(&results);
    assert_eq!(rows[0], ["variant", "snr_db", "clusters", "run", "rms_sad", "rms_aad", "iterations", "stop_reason"]);
    // fcls and nmf once per (snr, run), proposed once per cluster count as well
    assert_eq!(rows.len() - 1, 2 * 2 + 2 * 2 + 2 * 2 * 2);

    let agg_rows = parse_csv(&agg);
    assert_eq!(agg_rows[0], ["variant", "snr_db", "clusters", "runs", "rms_sad", "rms_aad", "iterations"]);
    for row in &agg_rows[1..] {
        let members: Vec<&Vec<String>> = rows[1..]
            .iter()
            .filter(|r| r[0] == row[0] && r[1] == row[1] && r[2] == row[2])
            .collect();
        assert_eq!(members.len().to_string(), row[3]);
        for (col, agg_col) in [(4, 4), (5, 5), (6, 6)] {
            let mean = members.iter().map(|r| r[col].parse::<f64>().unwrap()).sum::<f64>() / members.len() as f64;
            let reported: f64 = row[agg_col].parse().unwrap();
            assert!((mean - reported).abs() <= 1e-12 * mean.abs().max(1.0), "{row:?}");
        }
    }
}

#[test]
fn experiment_rejects_malformed_specs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.txt");
    std::fs::write(&spec, "runs = 2\nbogus = 1\n").unwrap();
    let out = hsunmix(&["experiment", path(&spec), "--out", path(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}
