use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use pulsegan::cyclegan::{
    load_checkpoint, preprocess_with, save_checkpoint, train as train_model, training_windows, translate_with,
    write_loss_history, PatModel, PreprocessConfig,
};
use pulsegan::dsp::NormParams;
use pulsegan::eval::{run_protocol, write_protocol_outputs, Protocol, ProtocolOptions};
use pulsegan::signal_io::{
    generate_synthetic_pair, load_record_with, make_folds, write_record, LoadOptions, SignalRecord,
};
use serde::{Deserialize, Serialize};

use crate::config::{ProtocolChoice, RunConfig};
use crate::CliError;

const CODE_VERSION: &str = concat!("pulsegan ", env!("CARGO_PKG_VERSION"));
const RUN_FILE: &str = "run.json";

/// Written next to every run's outputs; with the same code version it reproduces the run.
#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    code_version: &'a str,
    config_hash: String,
    seed: u64,
    subjects: Vec<String>,
    config: &'a RunConfig,
}

/// Inference settings stored inside a checkpoint directory.
#[derive(Debug, Serialize, Deserialize)]
struct TranslateSettings {
    preprocess: PreprocessConfig,
    sample_rate_hz: f64,
    /// Mean filtered-ABP range over the training subjects, used when an input
    /// record carries no usable ABP channel.
    fallback_abp_norm: NormParams,
    config_hash: String,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::runtime(e.to_string()))?;
    fs::write(path, text).map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::runtime(format!("cannot create {}: {e}", dir.display())))
}

fn write_manifest(dir: &Path, command: &str, cfg: &RunConfig, records: &[SignalRecord]) -> Result<(), CliError> {
    let manifest = RunManifest {
        command,
        code_version: CODE_VERSION,
        config_hash: cfg.hash(),
        seed: cfg.seed,
        subjects: records.iter().map(|r| r.subject_id.clone()).collect(),
        config: cfg,
    };
    write_json(&dir.join("manifest.json"), &manifest)
}

fn expand_paths(paths: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| CliError::runtime(format!("cannot list {}: {e}", p.display())))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "csv"))
                .collect();
            files.sort();
            out.extend(files);
        } else if p.exists() {
            out.push(p.clone());
        } else {
            return Err(CliError::runtime(format!("data path {} does not exist", p.display())));
        }
    }
    Ok(out)
}

fn synthetic_records(cfg: &RunConfig) -> Result<Vec<SignalRecord>, CliError> {
    let s = cfg
        .data
        .synthetic
        .as_ref()
        .ok_or_else(|| CliError::usage("config has no [data.synthetic] section"))?;
    (0..s.subjects as u64)
        .map(|i| generate_synthetic_pair(s.first_seed + i, s.samples, &s.generator).map_err(CliError::usage_from))
        .collect()
}

fn load_dataset(cfg: &RunConfig) -> Result<Vec<SignalRecord>, CliError> {
    if cfg.data.paths.is_empty() {
        return synthetic_records(cfg);
    }
    let opts = LoadOptions {
        required_rate_hz: Some(cfg.data.sample_rate_hz),
    };
    let files = expand_paths(&cfg.data.paths)?;
    if files.is_empty() {
        return Err(CliError::runtime("data paths contain no .csv records"));
    }
    files
        .iter()
        .map(|f| load_record_with(f, opts).map_err(|e| CliError::runtime(format!("{}: {e}", f.display()))))
        .collect()
}

pub fn train(config: &Path) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let records = load_dataset(&cfg)?;
    let filters = cfg.preprocess.filters();
    let prepped = records
        .iter()
        .map(|r| preprocess_with(r, &filters))
        .collect::<pulsegan::Result<Vec<_>>>()?;
    let (x, y) = training_windows::<f32>(&prepped)?;
    info!("training on {} windows from {} subjects", x.len(), records.len());
    let mut model = PatModel::<f32>::new(&cfg.train)?;
    let history = train_model(&mut model, &x, &y, &cfg.train, |m| {
        if m.step % 100 == 0 {
            info!(
                "step {} cycle {:.4} gan_G {:.4} gan_F {:.4} D_X {:.4} D_Y {:.4}",
                m.step, m.loss_cyc, m.loss_gan_g, m.loss_gan_f, m.loss_d_x, m.loss_d_y
            );
        }
    })?;

    let out = &cfg.output_dir;
    let ckpt = out.join("checkpoint");
    create_dir(&ckpt)?;
    save_checkpoint(&ckpt, &model, &cfg.train, &history)?;
    let n = prepped.len() as f64;
    let fallback = NormParams::new(
        prepped.iter().map(|p| p.abp_norm.min_val).sum::<f64>() / n,
        prepped.iter().map(|p| p.abp_norm.max_val).sum::<f64>() / n,
    )?;
    let settings = TranslateSettings {
        preprocess: filters,
        sample_rate_hz: cfg.data.sample_rate_hz,
        fallback_abp_norm: fallback,
        config_hash: cfg.hash(),
    };
    write_json(&ckpt.join(RUN_FILE), &settings)?;
    write_loss_history(out.join("loss.csv"), &history)?;
    write_manifest(out, "train", &cfg, &records)?;
    info!("wrote checkpoint to {}", ckpt.display());
    Ok(())
}

pub fn translate(checkpoint: &Path, input: &Path, output: &Path) -> Result<(), CliError> {
    let settings_path = checkpoint.join(RUN_FILE);
    let text = fs::read_to_string(&settings_path)
        .map_err(|e| CliError::runtime(format!("cannot read {}: {e}", settings_path.display())))?;
    let settings: TranslateSettings =
        serde_json::from_str(&text).map_err(|e| CliError::runtime(format!("{}: {e}", settings_path.display())))?;
    let (model, _) = load_checkpoint::<f32>(checkpoint)?;
    let opts = LoadOptions {
        required_rate_hz: Some(settings.sample_rate_hz),
    };
    let record = load_record_with(input, opts).map_err(|e| CliError::runtime(format!("{}: {e}", input.display())))?;
    let abp_norm = match preprocess_with(&record, &settings.preprocess) {
        Ok(p) => p.abp_norm,
        Err(pulsegan::Error::DegenerateRange(_)) => settings.fallback_abp_norm,
        Err(e) => return Err(e.into()),
    };
    let out = translate_with(&model, &record, &abp_norm, &settings.preprocess)?;
    write_record(output, &out)?;
    info!("wrote {} samples to {}", out.len(), output.display());
    Ok(())
}

pub fn evaluate(config: &Path) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let records = load_dataset(&cfg)?;
    let protocol = match cfg.protocol {
        ProtocolChoice::CrossSubject { folds } => {
            let ids: Vec<String> = records.iter().map(|r| r.subject_id.clone()).collect();
            Protocol::CrossSubject {
                plan: make_folds(&ids, folds, cfg.seed).map_err(CliError::usage_from)?,
            }
        }
        ProtocolChoice::PerSubject { train_fraction } => Protocol::PerSubject { train_fraction },
    };
    let opts = ProtocolOptions {
        beat: cfg.beats,
        preprocess: cfg.preprocess.filters(),
        config_hash: Some(cfg.hash()),
    };
    let run = run_protocol::<f32>(&records, &protocol, &cfg.train, &opts)?;
    let out = cfg.output_dir.join("evaluate");
    write_protocol_outputs(&out, &run)?;
    write_json(&out.join("protocol.json"), &protocol)?;
    write_manifest(&out, "evaluate", &cfg, &records)?;
    let ok = run.report.folds.iter().filter(|f| f.is_ok()).count();
    info!("{ok} of {} folds succeeded; reports in {}", run.report.folds.len(), out.display());
    if ok == 0 {
        return Err(CliError::runtime("every fold failed"));
    }
    Ok(())
}

pub fn synth(config: &Path, out_dir: &Path) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let records = synthetic_records(&cfg)?;
    create_dir(out_dir)?;
    for r in &records {
        write_record(out_dir.join(format!("{}.csv", r.subject_id)), r)?;
    }
    write_manifest(out_dir, "synth", &cfg, &records)?;
    info!("wrote {} records to {}", records.len(), out_dir.display());
    Ok(())
}
