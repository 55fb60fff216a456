//! The five subcommands: extract, train, evaluate, ablate,
//! inspect-similarity.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};

use dyngraph_core::features::{mfcc, pad_or_crop, synth_dataset};
use dyngraph_core::graph::{FrameSequence, SegmentGraph};
use dyngraph_core::matrix::Matrix;
use dyngraph_core::model::{forward_with_dice, AdjacencyVariant};
use dyngraph_core::similarity::{classic_dice_matrix, dice_matrix};
use dyngraph_core::training::{
    evaluate, fold_checksum, kfold_split, prepare, run_ablation, train_fold, AblationReport,
    AblationRow, Fold, PreparedDataset, TrainConfig, TrainReport,
};

use crate::config::{DatasetConfig, RunConfig};
use crate::dataset::{
    edges_from_text, files_with_extensions, load_dataset, load_manifest, ravdess_label,
    read_feature_csv, save_manifest, write_feature_csv, Manifest, ManifestEntry, MANIFEST_NAME,
};
use crate::model_io::{load_model, save_model};
use crate::report::{
    ablation_table, metrics_table, train_table, write_curves_csv, write_json, AblationJson,
    MetricsJson,
};
use crate::wav::read_wav;
use crate::{CliError, CliResult};

fn ensure_out_dir(out: &Path) -> CliResult<()> {
    fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))
        .map_err(CliError::usage)
}

/// Echoes the fully defaulted config next to the artifacts it produced.
fn echo_config(out: &Path, cfg: &RunConfig) -> CliResult<()> {
    write_json(&out.join("config.json"), cfg).map_err(CliError::runtime)
}

/// Materializes the configured dataset as frame sequences.
pub fn load_samples(cfg: &RunConfig) -> CliResult<Vec<FrameSequence>> {
    let mut samples = match &cfg.dataset {
        DatasetConfig::Synthetic {
            n_per_class,
            classes,
            frames,
            dim,
            noise,
        } => synth_dataset(*n_per_class, *classes, *frames, *dim, *noise, cfg.seed)
            .map_err(|e| CliError::usage(anyhow!("synthetic dataset: {e}")))?,
        DatasetConfig::Manifest { path } => load_dataset(path).map_err(CliError::usage)?,
    };
    if let Some(target) = cfg.target_frames {
        samples = samples
            .iter()
            .map(|s| pad_or_crop(s, target))
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::usage(anyhow!("target_frames: {e}")))?;
    }
    Ok(samples)
}

/// Fold-parallel cross-validation: identical results to the sequential path
/// because every fold derives its randomness from (seed, fold) alone.
fn train_parallel(
    data: &PreparedDataset,
    folds: &[Fold],
    cfg: &TrainConfig,
    jobs: usize,
) -> CliResult<TrainReport> {
    let checksum = fold_checksum(folds);
    let mut reports: Vec<Option<dyngraph_core::training::FoldReport>> = Vec::new();
    reports.resize_with(folds.len(), || None);
    let indices: Vec<usize> = (0..folds.len()).collect();
    for wave in indices.chunks(jobs.max(1)) {
        let wave_reports: Vec<_> = std::thread::scope(|scope| {
            let handles: Vec<_> = wave
                .iter()
                .map(|&f| scope.spawn(move || train_fold(data, folds, f, cfg)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("fold worker panicked"))
                .collect()
        });
        for (&f, report) in wave.iter().zip(wave_reports) {
            reports[f] = Some(report.map_err(CliError::runtime)?);
        }
    }
    Ok(TrainReport::from_folds(
        reports.into_iter().map(|r| r.expect("fold completed")).collect(),
        checksum,
    ))
}

/// `extract`: WAV directory -> MFCC feature CSVs + manifest, or CSV
/// directory -> normalized copies + manifest. Deterministic and idempotent.
pub fn cmd_extract(cfg: &RunConfig, input: &Path, out: &Path) -> CliResult<()> {
    ensure_out_dir(out)?;
    echo_config(out, cfg)?;
    let wavs = files_with_extensions(input, &["wav"]).map_err(CliError::usage)?;
    let csvs = files_with_extensions(input, &["csv"]).map_err(CliError::usage)?;
    if wavs.is_empty() && csvs.is_empty() {
        return Err(CliError::usage(anyhow!(
            "{}: no .wav or .csv files to extract",
            input.display()
        )));
    }
    // Labels for CSV inputs come from a manifest next to them.
    let input_manifest = if csvs.is_empty() {
        None
    } else {
        Some(load_manifest(&input.join(MANIFEST_NAME)).map_err(CliError::usage)?)
    };

    let mfcc_cfg = cfg.to_mfcc_config();
    let mut entries = Vec::new();
    let mut dim: Option<usize> = None;
    let mut failures = 0usize;
    let total = wavs.len() + csvs.len();

    for path in &wavs {
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        let result = (|| -> anyhow::Result<(String, usize, Matrix)> {
            let label = ravdess_label(&name)
                .ok_or_else(|| anyhow!("{name}: cannot infer label from filename"))?;
            let mut clip = read_wav(path)?;
            if clip.sample_rate() != mfcc_cfg.sample_rate {
                log::info!(
                    "{name}: resampling {} Hz -> {} Hz",
                    clip.sample_rate(),
                    mfcc_cfg.sample_rate
                );
                clip = crate::wav::resample(&clip, mfcc_cfg.sample_rate)?;
            }
            let mut features = mfcc(&clip, &mfcc_cfg).map_err(|e| anyhow!("{name}: {e}"))?;
            if let Some(target) = cfg.target_frames {
                let seq = FrameSequence::new(features, label, name.clone())
                    .map_err(|e| anyhow!("{name}: {e}"))?;
                features = pad_or_crop(&seq, target)
                    .map_err(|e| anyhow!("{name}: {e}"))?
                    .features()
                    .clone();
            }
            let stem = path.file_stem().unwrap().to_string_lossy().to_string();
            Ok((format!("{stem}.csv"), label, features))
        })();
        match result {
            Ok((file, label, features)) => {
                write_feature_csv(&out.join(&file), &features).map_err(CliError::runtime)?;
                dim.get_or_insert(features.cols());
                entries.push(ManifestEntry { file, label });
            }
            Err(e) => {
                log::error!("extract: {e:#}");
                failures += 1;
            }
        }
    }

    for path in &csvs {
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        let result = (|| -> anyhow::Result<(String, usize, Matrix)> {
            let label = input_manifest
                .as_ref()
                .and_then(|m| m.entries.iter().find(|e| e.file == name))
                .map(|e| e.label)
                .ok_or_else(|| anyhow!("{name}: no label in input manifest"))?;
            let mut features = read_feature_csv(path)?;
            if let Some(target) = cfg.target_frames {
                let seq = FrameSequence::new(features, label, name.clone())
                    .map_err(|e| anyhow!("{name}: {e}"))?;
                features = pad_or_crop(&seq, target)
                    .map_err(|e| anyhow!("{name}: {e}"))?
                    .features()
                    .clone();
            }
            Ok((name.clone(), label, features))
        })();
        match result {
            Ok((file, label, features)) => {
                write_feature_csv(&out.join(&file), &features).map_err(CliError::runtime)?;
                dim.get_or_insert(features.cols());
                entries.push(ManifestEntry { file, label });
            }
            Err(e) => {
                log::error!("extract: {e:#}");
                failures += 1;
            }
        }
    }

    if entries.is_empty() {
        return Err(CliError::runtime(anyhow!(
            "extract: every one of the {total} input files failed"
        )));
    }
    let manifest = Manifest {
        dim: dim.unwrap(),
        entries,
    };
    save_manifest(&out.join(MANIFEST_NAME), &manifest).map_err(CliError::runtime)?;
    println!(
        "extracted {} of {total} files into {} (dim {})",
        manifest.entries.len(),
        out.display(),
        manifest.dim
    );
    if failures > 0 {
        log::warn!("extract: {failures} file(s) failed; see errors above");
    }
    Ok(())
}

/// `train`: cross-validated training; writes metrics.json, model.bin (best
/// fold), curves.csv, and the echoed config.
pub fn cmd_train(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    ensure_out_dir(out)?;
    echo_config(out, cfg)?;
    let samples = load_samples(cfg)?;
    let train_cfg = cfg.to_train_config();
    let data = prepare(&samples, &cfg.graph_build_config()).map_err(CliError::usage)?;
    let folds = kfold_split(&data.labels, train_cfg.folds, train_cfg.seed)
        .map_err(CliError::usage)?;
    let report = train_parallel(&data, &folds, &train_cfg, cfg.jobs)?;

    let metrics = MetricsJson::from_report(&report, train_cfg.variant.name(), cfg.seed);
    write_json(&out.join("metrics.json"), &metrics).map_err(CliError::runtime)?;
    write_curves_csv(&out.join("curves.csv"), &report).map_err(CliError::runtime)?;
    save_model(&out.join("model.bin"), &report.best_fold().params).map_err(CliError::runtime)?;
    // The run topology, in the edge-list format inspect-similarity reads.
    fs::write(
        out.join("edges.txt"),
        crate::dataset::edges_to_text(data.template().edges()),
    )
    .with_context(|| format!("writing {}", out.join("edges.txt").display()))
    .map_err(CliError::runtime)?;

    print!("{}", train_table(&report));
    println!("artifacts written to {}", out.display());
    Ok(())
}

/// `evaluate`: a saved model against the configured dataset.
pub fn cmd_evaluate(cfg: &RunConfig, model_path: &Path, out: Option<&Path>) -> CliResult<()> {
    let params = load_model(model_path).map_err(CliError::usage)?;
    let samples = load_samples(cfg)?;
    let data = prepare(&samples, &cfg.graph_build_config()).map_err(CliError::usage)?;
    if params.nodes() != data.nodes() || params.input_dim() != data.dim() {
        return Err(CliError::usage(anyhow!(
            "model expects m={} p={} but the dataset yields m={} p={}",
            params.nodes(),
            params.input_dim(),
            data.nodes(),
            data.dim()
        )));
    }
    let adjacency = cfg.to_train_config().adjacency(cfg.graph_build_config().positional_mode);
    let mut predictions = Vec::with_capacity(data.len());
    for graph in &data.graphs {
        let state = forward_with_dice(graph, &data.dice, &params, &adjacency)
            .map_err(CliError::runtime)?;
        predictions.push(state.logits.argmax_row(0));
    }
    let classes = data.num_classes.max(params.classes());
    let metrics = evaluate(&predictions, &data.labels, classes).map_err(CliError::runtime)?;
    print!("{}", metrics_table(&metrics));
    if let Some(out) = out {
        ensure_out_dir(out)?;
        echo_config(out, cfg)?;
        #[derive(serde::Serialize)]
        struct EvalJson {
            accuracy: f64,
            weighted_f1: f64,
            per_class_f1: Vec<f64>,
            confusion: Vec<Vec<usize>>,
        }
        write_json(
            &out.join("evaluation.json"),
            &EvalJson {
                accuracy: metrics.accuracy,
                weighted_f1: metrics.weighted_f1,
                per_class_f1: metrics.per_class_f1.clone(),
                confusion: metrics.confusion.clone(),
            },
        )
        .map_err(CliError::runtime)?;
    }
    Ok(())
}

/// `ablate`: all five adjacency variants against shared folds.
pub fn cmd_ablate(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    ensure_out_dir(out)?;
    echo_config(out, cfg)?;
    let samples = load_samples(cfg)?;
    let train_cfg = cfg.to_train_config();
    let report = if cfg.jobs <= 1 {
        run_ablation(&samples, &cfg.graph_build_config(), &train_cfg).map_err(CliError::runtime)?
    } else {
        // Parallel folds inside each variant; the folds themselves are
        // shared across variants.
        let data = prepare(&samples, &cfg.graph_build_config()).map_err(CliError::usage)?;
        let folds = kfold_split(&data.labels, train_cfg.folds, train_cfg.seed)
            .map_err(CliError::usage)?;
        let mut rows = Vec::new();
        for variant in AdjacencyVariant::ALL {
            let variant_cfg = TrainConfig {
                variant,
                ..train_cfg.clone()
            };
            let report = train_parallel(&data, &folds, &variant_cfg, cfg.jobs)?;
            log::info!(
                "ablation {variant}: mean accuracy {:.4}, fold checksum {:016x}",
                report.mean_accuracy,
                report.fold_checksum
            );
            rows.push(AblationRow { variant, report });
        }
        AblationReport { rows }
    };

    let json = AblationJson::from_report(&report, cfg.seed);
    write_json(&out.join("ablation.json"), &json).map_err(CliError::runtime)?;
    let table = ablation_table(&json);
    fs::write(out.join("ablation.txt"), &table)
        .with_context(|| format!("writing {}", out.join("ablation.txt").display()))
        .map_err(CliError::runtime)?;
    print!("{table}");
    Ok(())
}

/// `inspect-similarity`: Dice matrix of an edge-list topology as CSV on
/// stdout.
pub fn cmd_inspect_similarity(
    edges_path: &Path,
    nodes: usize,
    kind: &str,
) -> CliResult<()> {
    if nodes < 2 {
        return Err(CliError::usage(anyhow!("--nodes must be at least 2")));
    }
    let text = fs::read_to_string(edges_path)
        .with_context(|| format!("reading {}", edges_path.display()))
        .map_err(CliError::usage)?;
    let edges = edges_from_text(&text).map_err(CliError::usage)?;
    let graph = SegmentGraph::new(nodes, edges, Matrix::zeros(nodes, 1), 0)
        .map_err(|e| CliError::usage(anyhow!("edge list: {e}")))?;
    let matrix = match kind {
        "classic" => classic_dice_matrix(&graph),
        "proposed" => dice_matrix(&graph),
        other => {
            return Err(CliError::usage(anyhow!(
                "--kind must be 'classic' or 'proposed', got '{other}'"
            )))
        }
    };
    let values = matrix.values();
    let mut stdout = String::new();
    for i in 0..values.rows() {
        let row: Vec<String> = values.row(i).iter().map(|v| format!("{v:?}")).collect();
        stdout.push_str(&row.join(","));
        stdout.push('\n');
    }
    print!("{stdout}");
    Ok(())
}

/// Output directory resolution: flag beats config; train/ablate require one.
pub fn resolve_out(cfg: &RunConfig, flag: Option<PathBuf>, command: &str) -> CliResult<PathBuf> {
    flag.or_else(|| cfg.out_dir.clone()).ok_or_else(|| {
        CliError::usage(anyhow!(
            "{command} needs an output directory: pass --out DIR or set out_dir in the config"
        ))
    })
}
