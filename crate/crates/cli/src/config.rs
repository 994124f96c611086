use std::fs;
use std::path::{Path, PathBuf};

use pulsegan::bp_extract::BeatConfig;
use pulsegan::cyclegan::{PreprocessConfig, TrainConfig};
use pulsegan::signal_io::SynthConfig;
use pulsegan::{HOP_LEN, WINDOW_LEN};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Where the records come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Record files or directories of `*.csv` records.
    #[serde(default)]
    pub paths: Vec<PathBuf>,
    /// Generated subjects, used when `paths` is empty.
    pub synthetic: Option<SyntheticData>,
    /// Sample rate every record must carry.
    #[serde(default = "default_rate")]
    pub sample_rate_hz: f64,
}

fn default_rate() -> f64 {
    pulsegan::signal_io::DEFAULT_SAMPLE_RATE_HZ
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticData {
    pub subjects: usize,
    pub samples: usize,
    /// Seed of the first subject; subject `i` uses `first_seed + i`.
    #[serde(default)]
    pub first_seed: u64,
    #[serde(default)]
    pub generator: SynthConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSection {
    pub ppg_band_hz: (f64, f64),
    pub abp_lowpass_hz: f64,
    pub window: usize,
    pub hop: usize,
}

impl Default for PreprocessSection {
    fn default() -> Self {
        let p = PreprocessConfig::default();
        PreprocessSection {
            ppg_band_hz: p.ppg_band_hz,
            abp_lowpass_hz: p.abp_lowpass_hz,
            window: WINDOW_LEN,
            hop: HOP_LEN,
        }
    }
}

impl PreprocessSection {
    pub fn filters(&self) -> PreprocessConfig {
        PreprocessConfig {
            ppg_band_hz: self.ppg_band_hz,
            abp_lowpass_hz: self.abp_lowpass_hz,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum ProtocolChoice {
    CrossSubject { folds: usize },
    PerSubject { train_fraction: f64 },
}

impl Default for ProtocolChoice {
    fn default() -> Self {
        ProtocolChoice::CrossSubject { folds: 5 }
    }
}

/// Everything that influences a run's numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Global seed for fold assignment and training; it overrides `train.seed`.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub data: DataConfig,
    #[serde(default)]
    pub preprocess: PreprocessSection,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub protocol: ProtocolChoice,
    #[serde(default)]
    pub beats: BeatConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))?;
        if let Some(dir) = path.parent() {
            cfg.resolve_relative(dir);
        }
        cfg.train.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Interprets relative paths against the config file's directory.
    fn resolve_relative(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        self.data.paths.iter_mut().for_each(fix);
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::usage(m));
        if self.preprocess.window != WINDOW_LEN || self.preprocess.hop != HOP_LEN {
            return bad(format!(
                "preprocess: only window = {WINDOW_LEN} and hop = {HOP_LEN} are supported, got {} and {}",
                self.preprocess.window, self.preprocess.hop
            ));
        }
        if self.data.paths.is_empty() && self.data.synthetic.is_none() {
            return bad("data: set `paths` or a `synthetic` section".into());
        }
        if let Some(s) = &self.data.synthetic {
            if s.subjects == 0 || s.samples < WINDOW_LEN {
                return bad("data.synthetic: need at least one subject of one window".into());
            }
        }
        self.train.validate().map_err(CliError::usage_from)?;
        self.beats.validate().map_err(CliError::usage_from)?;
        match self.protocol {
            ProtocolChoice::CrossSubject { folds } if folds < 2 => bad("protocol: folds must be at least 2".into()),
            ProtocolChoice::PerSubject { train_fraction } if !(train_fraction > 0.0 && train_fraction < 1.0) => {
                bad("protocol: train_fraction must lie in (0, 1)".into())
            }
            _ => Ok(()),
        }
    }

    /// SHA-256 of the canonical JSON rendering of the config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}
