mod common;

use common::{arg, sketchkit, snapshot, two_drawing_dataset};
use sketchkit::fixtures::{tracing, warped_drawing, SmoothWarp};
use sketchkit::pixreg::RegistrationSummary;
use sketchkit::{load_sketch, save_sketch, Group};

#[test]
fn register_writes_scores_and_registered_sketch() {
    let dir = tempfile::tempdir().unwrap();
    let t = tracing(5);
    let s = warped_drawing(&t, &SmoothWarp::sinusoidal(10.0, 900.0), "u", Group::Novice);
    let (tp, sp) = (dir.path().join("t.json"), dir.path().join("s.json"));
    save_sketch(&t, &tp).unwrap();
    save_sketch(&s, &sp).unwrap();
    let out = dir.path().join("out");
    let o = sketchkit(&[
        "register",
        "--sketch",
        arg(&sp),
        "--tracing",
        arg(&tp),
        "--out-dir",
        arg(&out),
        "--snapshots",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: RegistrationSummary =
        serde_json::from_slice(&std::fs::read(out.join("s.reg.json")).unwrap()).unwrap();
    assert_eq!(summary.format_version, 1);
    assert_eq!(summary.iterations.len(), 10);
    let best = summary
        .iterations
        .iter()
        .map(|s| s.overlap.e)
        .fold(f64::MIN, f64::max);
    assert_eq!(summary.e_star(), Some(best));
    let registered = load_sketch(out.join("s.registered.json")).unwrap();
    assert!(registered.same_topology(&s));
    assert!(out.join("s.iter10.png").exists());
    assert!(out.join("effective-config.json").exists());
    assert!(String::from_utf8_lossy(&o.stderr).contains("chosen="));
}

#[test]
fn dataset_pipeline_produces_two_row_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = two_drawing_dataset(dir.path());
    let o = sketchkit(&[
        "register",
        "--dataset",
        arg(&data),
        "--out-dir",
        arg(&data),
        "--jobs",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["prompt-3-u1", "prompt-3-u2"] {
        for suffix in [".reg.json", ".registered.json", ".levels.json"] {
            assert!(
                data.join(format!("{name}{suffix}")).exists(),
                "{name}{suffix}"
            );
        }
    }
    let report = dir.path().join("report");
    let o = sketchkit(&["analyze", "--dataset", arg(&data), "--out", arg(&report)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for table in ["drawings.csv", "temporal.csv", "ordering.csv"] {
        let text = std::fs::read_to_string(report.join(table)).unwrap();
        assert_eq!(text.lines().count(), 3, "{table}");
    }
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(report.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["format_version"], 1);
    let config: serde_json::Value =
        serde_json::from_slice(&std::fs::read(report.join("effective-config.json")).unwrap())
            .unwrap();
    assert_eq!(config["analysis"]["rho"], 3.0);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let data = two_drawing_dataset(dir.path());
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"registration": {"iterations": 2, "omega": 1.3}}"#).unwrap();
    let out = dir.path().join("reg");
    let o = sketchkit(&[
        "register",
        "--config",
        arg(&cfg),
        "--dataset",
        arg(&data),
        "--out-dir",
        arg(&out),
        "--omega",
        "1.2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let echo: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("effective-config.json")).unwrap()).unwrap();
    assert_eq!(echo["registration"]["iterations"], 2);
    assert_eq!(echo["registration"]["omega"], 1.2);
    let summary: RegistrationSummary =
        serde_json::from_slice(&std::fs::read(out.join("prompt-3-u1.reg.json")).unwrap()).unwrap();
    assert_eq!(summary.iterations.len(), 2);
    assert_eq!(summary.omega, 1.2);
}

#[test]
fn inputs_are_left_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let data = two_drawing_dataset(dir.path());
    let before = snapshot(&data);
    let out = dir.path().join("reg");
    let o = sketchkit(&[
        "register",
        "--dataset",
        arg(&data),
        "--out-dir",
        arg(&out),
        "--iters",
        "1",
    ]);
    assert!(o.status.success());
    assert_eq!(snapshot(&data), before);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = sketchkit(&["register", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));

    let missing = dir.path().join("missing.json");
    let o = sketchkit(&[
        "export-svg",
        "--sketch",
        arg(&missing),
        "--out",
        arg(&dir.path().join("o.svg")),
    ]);
    assert_eq!(o.status.code(), Some(2));

    let t = dir.path().join("t.json");
    save_sketch(&tracing(1), &t).unwrap();
    let models = dir.path().join("models");
    let o = sketchkit(&[
        "train-disturbers",
        "--statistical",
        "--style",
        "N",
        "--out",
        arg(&models),
    ]);
    assert!(o.status.success());
    let o = sketchkit(&[
        "synthesize",
        "--tracing",
        arg(&t),
        "--style",
        "N",
        "--n1",
        "1.5",
        "--models",
        arg(&models),
        "--out",
        arg(&dir.path().join("s.json")),
    ]);
    assert_eq!(o.status.code(), Some(1));

    let o = sketchkit(&["--version"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("format version 1"));
}

#[test]
fn synthesize_rasterize_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.json");
    save_sketch(&tracing(2), &t).unwrap();
    let models = dir.path().join("models");
    assert!(sketchkit(&[
        "train-disturbers",
        "--statistical",
        "--style",
        "P",
        "--out",
        arg(&models)
    ])
    .status
    .success());
    assert!(models.join("professional-extrinsic.json").exists());
    let out = dir.path().join("syn").join("s.json");
    let svg = dir.path().join("syn").join("s.svg");
    let o = sketchkit(&[
        "synthesize",
        "--tracing",
        arg(&t),
        "--style",
        "P",
        "--n1",
        "0.1",
        "--n2",
        "0.1",
        "--seed",
        "3",
        "--models",
        arg(&models),
        "--out",
        arg(&out),
        "--svg",
        arg(&svg),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = load_sketch(&out).unwrap();
    assert_eq!(s.group, Group::Synthetic);
    assert_eq!(s.strokes.len(), tracing(2).strokes.len());
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));

    let png = dir.path().join("r.png");
    let o = sketchkit(&[
        "rasterize",
        "--sketch",
        arg(&out),
        "--out",
        arg(&png),
        "--width",
        "2",
    ]);
    assert!(o.status.success());
    let img = sketchkit::raster::RasterImage::load(&png).unwrap();
    assert_eq!(img.dims(), s.canvas);
    assert!(!img.is_blank());
}

#[test]
fn compare_synthetic_rows_per_drawing() {
    let dir = tempfile::tempdir().unwrap();
    let data = two_drawing_dataset(dir.path());
    assert!(sketchkit(&[
        "register",
        "--dataset",
        arg(&data),
        "--out-dir",
        arg(&data),
        "--iters",
        "2"
    ])
    .status
    .success());
    let png = dir.path().join("edges.png");
    let t = data.join("tracings").join("prompt-3.json");
    assert!(
        sketchkit(&["rasterize", "--sketch", arg(&t), "--out", arg(&png)])
            .status
            .success()
    );
    let csv = dir.path().join("cmp").join("cmp.csv");
    let o = sketchkit(&[
        "compare-synthetic",
        "--image",
        arg(&png),
        "--registered",
        arg(&data),
        "--level",
        "stroke",
        "--out",
        arg(&csv),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "name,prompt_id,user_id,group,level,precision,recall"
    );
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("prompt-3-u1,prompt-3,u1,novice,stroke,"));
    let bad = sketchkit(&[
        "compare-synthetic",
        "--image",
        arg(&png),
        "--registered",
        arg(&data),
        "--level",
        "original",
        "--out",
        arg(&csv),
    ]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn training_from_a_dataset_without_enough_drawings_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("empty");
    std::fs::create_dir_all(data.join("tracings")).unwrap();
    let o = sketchkit(&[
        "train-disturbers",
        "--dataset",
        arg(&data),
        "--style",
        "N",
        "--out",
        arg(&dir.path().join("m")),
    ]);
    assert_eq!(o.status.code(), Some(1));
}
