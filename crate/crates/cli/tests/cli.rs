//! Command-level integration tests driving the installed binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dyngraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dyngraph"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_sine_wav(path: &Path, freq: f64) {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: 22_050,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).unwrap();
    for t in 0..22_050 {
        let s = (2.0 * std::f64::consts::PI * freq * t as f64 / 22_050.0).sin();
        writer.write_sample((s * 20_000.0) as i16).unwrap();
    }
    writer.finalize().unwrap();
}

const SMALL_CONFIG: &str = r#"{
  "dataset": {"kind": "synthetic", "n_per_class": 6, "classes": 3, "frames": 12, "dim": 4, "noise": 0.2},
  "window": 6,
  "hop": 6,
  "train": {"lr": 0.01, "batch_size": 8, "max_epochs": 6, "early_stop_patience": 3, "folds": 3, "hidden_dim": 8},
  "seed": 7
}"#;

#[test]
fn train_writes_all_artifacts_and_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(&config, SMALL_CONFIG).unwrap();
    let out = dir.path().join("run");
    let result = dyngraph(&[
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "train",
    ]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    for artifact in ["metrics.json", "model.bin", "curves.csv", "config.json", "edges.txt"] {
        assert!(out.join(artifact).exists(), "{artifact} missing");
    }
    // The exported topology feeds straight back into inspect-similarity.
    let inspect = dyngraph(&[
        "inspect-similarity",
        "--edges",
        out.join("edges.txt").to_str().unwrap(),
        "--nodes",
        "6",
    ]);
    assert!(inspect.status.success());
    assert_eq!(String::from_utf8_lossy(&inspect.stdout).lines().count(), 6);
    // The echoed config parses and carries the seed that was used.
    let echoed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(echoed["seed"], 7);
    // Curves CSV has the advertised header.
    let curves = fs::read_to_string(out.join("curves.csv")).unwrap();
    assert!(curves.starts_with("fold,epoch,train_loss,val_accuracy\n"));

    // The saved model evaluates against the same dataset config.
    let eval = dyngraph(&[
        "--config",
        config.to_str().unwrap(),
        "evaluate",
        "--model",
        out.join("model.bin").to_str().unwrap(),
    ]);
    assert!(eval.status.success());
    let stdout = String::from_utf8_lossy(&eval.stdout);
    assert!(stdout.contains("accuracy"), "{stdout}");
}

#[test]
fn train_variant_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(&config, SMALL_CONFIG).unwrap();
    let out = dir.path().join("run");
    let result = dyngraph(&[
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "train",
        "--variant",
        "learn_only",
    ]);
    assert!(result.status.success());
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["variant"], "learn_only");
}

#[test]
fn invalid_config_types_exit_2_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(&config, r#"{"train": {"lambda1": "high"}}"#).unwrap();
    let result = dyngraph(&[
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("x").to_str().unwrap(),
        "train",
    ]);
    assert_eq!(result.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("lambda1"), "{stderr}");
}

#[test]
fn ablate_emits_matching_json_and_text_tables() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(&config, SMALL_CONFIG).unwrap();
    let out = dir.path().join("abl");
    let result = dyngraph(&[
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "ablate",
    ]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("ablation.json")).unwrap()).unwrap();
    let rows = json["rows"].as_array().unwrap();
    let names: Vec<&str> = rows.iter().map(|r| r["variant"].as_str().unwrap()).collect();
    assert_eq!(names, ["binary", "weighted", "learn_only", "dice_only", "full"]);

    let text = fs::read_to_string(out.join("ablation.txt")).unwrap();
    for row in rows {
        let name = row["variant"].as_str().unwrap();
        let acc = row["mean_accuracy"].as_f64().unwrap();
        let line = text
            .lines()
            .find(|l| l.starts_with(name))
            .unwrap_or_else(|| panic!("row {name} missing from text table"));
        assert!(
            line.contains(&format!("{acc:.4}")),
            "text row '{line}' does not show {acc:.4}"
        );
    }
    // Shared folds across variants.
    let checksums: Vec<&str> = rows
        .iter()
        .map(|r| r["fold_checksum"].as_str().unwrap())
        .collect();
    assert!(checksums.windows(2).all(|w| w[0] == w[1]));
    // Stdout shows the same table.
    assert_eq!(String::from_utf8_lossy(&result.stdout), text);
}

#[test]
fn inspect_similarity_prints_expected_matrices() {
    let dir = tempfile::tempdir().unwrap();
    let edges = dir.path().join("chain.txt");
    fs::write(&edges, "0 1\n1 2\n").unwrap();

    let proposed = dyngraph(&[
        "inspect-similarity",
        "--edges",
        edges.to_str().unwrap(),
        "--nodes",
        "3",
        "--kind",
        "proposed",
    ]);
    assert!(proposed.status.success());
    let rows: Vec<Vec<f64>> = String::from_utf8_lossy(&proposed.stdout)
        .lines()
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    assert!((rows[0][2] - 0.5).abs() < 1e-12);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row.len(), 3);
        assert_eq!(row[i], 0.0);
    }

    let classic = dyngraph(&[
        "inspect-similarity",
        "--edges",
        edges.to_str().unwrap(),
        "--nodes",
        "3",
        "--kind",
        "classic",
    ]);
    assert!(classic.status.success());
    let rows: Vec<Vec<f64>> = String::from_utf8_lossy(&classic.stdout)
        .lines()
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows[0][2], 1.0);
    assert_eq!(rows[0][1], 0.0);

    let malformed = dir.path().join("bad.txt");
    fs::write(&malformed, "0 one\n").unwrap();
    let bad = dyngraph(&[
        "inspect-similarity",
        "--edges",
        malformed.to_str().unwrap(),
        "--nodes",
        "3",
    ]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn extract_wav_directory_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let wavs = dir.path().join("wavs");
    fs::create_dir(&wavs).unwrap();
    write_sine_wav(&wavs.join("03-01-01-01-01-01-01.wav"), 220.0);
    write_sine_wav(&wavs.join("03-01-03-01-01-01-02.wav"), 440.0);
    write_sine_wav(&wavs.join("03-01-05-01-01-01-03.wav"), 880.0);

    let out1 = dir.path().join("f1");
    let result = dyngraph(&[
        "--out",
        out1.to_str().unwrap(),
        "extract",
        "--input",
        wavs.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out1.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["entries"].as_array().unwrap().len(), 3);
    assert_eq!(manifest["dim"], 40);
    assert_eq!(manifest["entries"][1]["label"], 2);

    // Re-running overwrites in place; a fresh directory gets identical bytes.
    let rerun_in_place = dyngraph(&[
        "--out",
        out1.to_str().unwrap(),
        "extract",
        "--input",
        wavs.to_str().unwrap(),
    ]);
    assert!(rerun_in_place.status.success());
    let out2 = dir.path().join("f2");
    let rerun = dyngraph(&[
        "--out",
        out2.to_str().unwrap(),
        "extract",
        "--input",
        wavs.to_str().unwrap(),
    ]);
    assert!(rerun.status.success());
    for entry in fs::read_dir(&out1).unwrap() {
        let name = entry.unwrap().file_name();
        let a = fs::read(out1.join(&name)).unwrap();
        let b = fs::read(out2.join(&name)).unwrap();
        assert_eq!(a, b, "{name:?} differs between runs");
    }
}

#[test]
fn extract_empty_directory_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let result = dyngraph(&[
        "--out",
        dir.path().join("out").to_str().unwrap(),
        "extract",
        "--input",
        empty.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&result.stderr).contains("no .wav or .csv"));
}

#[test]
fn extract_records_per_file_errors_but_continues() {
    let dir = tempfile::tempdir().unwrap();
    let wavs = dir.path().join("wavs");
    fs::create_dir(&wavs).unwrap();
    write_sine_wav(&wavs.join("03-01-02-01-01-01-01.wav"), 440.0);
    // Unparseable name: no RAVDESS label.
    write_sine_wav(&wavs.join("mystery.wav"), 440.0);

    let out = dir.path().join("out");
    let result = dyngraph(&[
        "--out",
        out.to_str().unwrap(),
        "extract",
        "--input",
        wavs.to_str().unwrap(),
    ]);
    assert!(result.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["entries"].as_array().unwrap().len(), 1);
}

#[test]
fn extract_csv_passthrough_with_target_frames_trains_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    fs::create_dir(&raw).unwrap();
    // Precomputed feature files of ragged lengths with a sidecar manifest.
    let mut entries = Vec::new();
    for (idx, (frames, label)) in [(30usize, 0usize), (45, 1), (38, 0), (44, 1), (40, 0), (41, 1)]
        .iter()
        .enumerate()
    {
        let name = format!("clip{idx}.csv");
        let rows: Vec<String> = (0..*frames)
            .map(|t| {
                (0..5)
                    .map(|j| format!("{}", (t * 5 + j) as f64 * 0.01 + *label as f64))
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect();
        fs::write(raw.join(&name), rows.join("\n") + "\n").unwrap();
        entries.push(serde_json::json!({"file": name, "label": label}));
    }
    fs::write(
        raw.join("manifest.json"),
        serde_json::json!({"dim": 5, "entries": entries}).to_string(),
    )
    .unwrap();

    let features = dir.path().join("features");
    let config = dir.path().join("config.json");
    fs::write(
        &config,
        format!(
            r#"{{
  "dataset": {{"kind": "manifest", "path": "{}"}},
  "target_frames": 40,
  "window": 20,
  "hop": 20,
  "train": {{"lr": 0.01, "batch_size": 4, "max_epochs": 5, "early_stop_patience": 3, "folds": 3, "hidden_dim": 6}},
  "seed": 3
}}"#,
            features.join("manifest.json").display()
        ),
    )
    .unwrap();

    let extract = dyngraph(&[
        "--config",
        config.to_str().unwrap(),
        "--out",
        features.to_str().unwrap(),
        "extract",
        "--input",
        raw.to_str().unwrap(),
    ]);
    assert!(extract.status.success(), "{}", String::from_utf8_lossy(&extract.stderr));
    // Every emitted file is fixed to 40 frames.
    let fixed = fs::read_to_string(features.join("clip0.csv")).unwrap();
    assert_eq!(fixed.lines().count(), 40);

    let out = dir.path().join("run");
    let train = dyngraph(&[
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "train",
    ]);
    assert!(train.status.success(), "{}", String::from_utf8_lossy(&train.stderr));
    assert!(out.join("model.bin").exists());
}

#[test]
fn divergent_training_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(&config, SMALL_CONFIG.replace("\"lr\": 0.01", "\"lr\": 1e150")).unwrap();
    let result = dyngraph(&[
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("x").to_str().unwrap(),
        "train",
    ]);
    assert_eq!(result.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&result.stderr).contains("diverged"));
}

#[test]
fn evaluate_rejects_mismatched_model_and_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(&config, SMALL_CONFIG).unwrap();
    let out = dir.path().join("run");
    assert!(dyngraph(&[
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "train",
    ])
    .status
    .success());

    // Same model, different window: node counts no longer match.
    let other = dir.path().join("other.json");
    fs::write(
        &other,
        SMALL_CONFIG.replace("\"window\": 6", "\"window\": 8"),
    )
    .unwrap();
    let eval = dyngraph(&[
        "--config",
        other.to_str().unwrap(),
        "evaluate",
        "--model",
        out.join("model.bin").to_str().unwrap(),
    ]);
    assert_eq!(eval.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&eval.stderr).contains("model expects"));
}
