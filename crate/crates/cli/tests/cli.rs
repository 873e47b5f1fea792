use std::path::Path;
use std::process::{Command, Output};

use lidar_sr::eval::{generate_scene, SceneSpec};
use lidar_sr::io;
use lidar_sr::rangeview::ProjectionConfig;
use lidar_sr::sampling::RowSelection;
use lidar_sr::solver::{superresolve, SolverConfig};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lidar-sr")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn every_flag_in_help_shows_a_default() {
    for sub in ["project", "downsample", "sr", "segment", "eval", "run", "bench"] {
        let out = cli(&[sub, "--help"]);
        assert!(out.status.success());
        let text = String::from_utf8(out.stdout).unwrap();
        let options = text.split("Options:").nth(1).unwrap();
        // one entry per flag: a shallowly indented "-" line plus its
        // continuation; deeper "-" lines list possible values
        let mut entries: Vec<String> = Vec::new();
        for line in options.lines() {
            let body = line.trim_start();
            if body.starts_with('-') && line.len() - body.len() < 8 {
                entries.push(line.to_string());
            } else if let Some(last) = entries.last_mut() {
                last.push_str(line);
            }
        }
        for e in entries {
            if e.contains("--help") || e.contains("--version") || e.contains("--config") {
                continue;
            }
            assert!(e.contains("[default:"), "{sub}: {e}");
        }
    }
    let sr = String::from_utf8(cli(&["sr", "--help"]).stdout).unwrap();
    for d in ["[default: 0.5]", "[default: 5]", "[default: tv-prox]", "[default: interpolate-rows]"] {
        assert!(sr.contains(d), "{d}");
    }
}

#[test]
fn exit_codes_follow_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&["bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error: kind=usage message=\""));

    let missing = dir.path().join("missing.bin");
    let out = cli(&["project", p(&missing), p(&dir.path().join("o.png"))]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).starts_with("error: kind=io"));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[solver]\nwarp_speed = 9\n").unwrap();
    let out = cli(&["--config", p(&bad), "bench", "--scans", "1"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).starts_with("error: kind=config"));

    let out = cli(&["bench", "--scans", "1", "--b", "-1"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    let out = cli(&["bench", "--scans", "1", "--prior-strength", "-0.5"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));

    let out = cli(&["bench", "--scans", "1", "--median-window", "5"]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}

#[test]
fn sr_matches_the_library_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let hi = ProjectionConfig::high_res();
    let (cloud, _) = generate_scene(&SceneSpec::urban(4, 0.02), &hi);
    let scan = dir.path().join("scan.bin");
    io::write_kitti_bin(&cloud, &scan).unwrap();
    let low = dir.path().join("low.png");
    let out = cli(&["downsample", p(&scan), p(&low)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let sr_png = dir.path().join("sr.png");
    let out = cli(&["sr", p(&low), p(&sr_png)]);
    assert!(out.status.success(), "{}", stderr(&out));

    let s = io::import_range_png(&low, &ProjectionConfig::low_res()).unwrap();
    let sel = RowSelection::uniform(64, 16, 0).unwrap();
    let (t, _) = superresolve(&s, &sel, &SolverConfig::default()).unwrap();
    assert_eq!(std::fs::read(&sr_png).unwrap(), io::encode_range_png(&t).unwrap());
}

#[test]
fn eval_of_identical_scans_is_zero_error() {
    let dir = tempfile::tempdir().unwrap();
    let (cloud, _) = generate_scene(&SceneSpec::urban(1, 0.02), &ProjectionConfig::high_res());
    let scan = dir.path().join("scan.bin");
    io::write_kitti_bin(&cloud, &scan).unwrap();
    let labels = dir.path().join("scan.label");
    let out = cli(&["segment", p(&scan), p(&labels)]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(io::read_labels(&labels).unwrap().len(), cloud.len());

    let report = dir.path().join("report.json");
    let out = cli(&[
        "eval",
        p(&scan),
        p(&scan),
        "-o",
        p(&report),
        "--pred-labels",
        p(&labels),
        "--gt-labels",
        p(&labels),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(v["mae"].as_f64(), Some(0.0));
    assert_eq!(v["rmse"].as_f64(), Some(0.0));
    for (_, iou) in v["iou_per_class"].as_object().unwrap() {
        assert_eq!(iou.as_f64(), Some(1.0));
    }
}

#[test]
fn synthetic_run_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("run.json");
    let scans = dir.path().join("out");
    let out = cli(&["run", "--synthetic", "10", "--report", p(&report), "--out-dir", p(&scans)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(v["scans_produced"].as_u64(), Some(10));
    assert_eq!(v["scans_completed"].as_u64(), Some(10));
    assert_eq!(v["drop_policy"].as_str(), Some("block"));
    assert!(v["fps"].as_f64().unwrap() > 0.0);
    assert_eq!(io::list_scans(&scans).unwrap().len(), 10);
}

#[test]
fn config_file_values_apply_unless_overridden() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[pipeline]\nqueue_capacity = 3\n").unwrap();
    let report = dir.path().join("run.json");
    let run = |extra: &[&str]| {
        let mut args = vec!["--config", p(&cfg), "run", "--synthetic", "2", "--report", p(&report)];
        args.extend_from_slice(extra);
        let out = cli(&args);
        assert!(out.status.success(), "{}", stderr(&out));
        let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
        v["queue_capacity"].as_u64().unwrap()
    };
    assert_eq!(run(&[]), 3);
    assert_eq!(run(&["--queue-capacity", "5"]), 5);
}
