use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::sub_seed;
use super::{PatModel, StepMetrics, TrainConfig};
use crate::autodiff::{read_params, write_params, AdamState, ParamSet, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;
pub const LOSS_HISTORY_HEADER: &str = "step,loss_gan_G,loss_gan_F,loss_cyc,loss_D_X,loss_D_Y";

const MANIFEST_FILE: &str = "manifest.json";
const NETWORKS: [&str; 4] = ["G", "F", "D_X", "D_Y"];

/// JSON sidecar describing a checkpoint directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub config: TrainConfig,
    pub seed: u64,
    pub step: usize,
    /// Adam step counters for G, F, D_X, D_Y.
    pub optimizer_steps: [u64; 4],
    pub loss_history: Vec<StepMetrics>,
}

pub fn format_loss_history(history: &[StepMetrics]) -> String {
    let mut out = String::from(LOSS_HISTORY_HEADER);
    out.push('\n');
    for m in history {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            m.step, m.loss_gan_g, m.loss_gan_f, m.loss_cyc, m.loss_d_x, m.loss_d_y
        );
    }
    out
}

pub fn write_loss_history(path: impl AsRef<Path>, history: &[StepMetrics]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_loss_history(history)).map_err(|e| Error::io(path, e))
}

fn moments_as_params<T: Scalar>(like: &ParamSet<T>, moments: &[Vec<T>]) -> Result<ParamSet<T>> {
    let mut out = ParamSet::new();
    for ((name, t), m) in like.iter().zip(moments) {
        out.push(name, Tensor::new(t.shape().to_vec(), m.clone())?);
    }
    Ok(out)
}

fn params_as_moments<T: Scalar>(like: &ParamSet<T>, stored: &ParamSet<T>, what: &str) -> Result<Vec<Vec<T>>> {
    check_layout(like, stored, what)?;
    Ok(stored.iter().map(|(_, t)| t.data().to_vec()).collect())
}

fn check_layout<T: Scalar>(like: &ParamSet<T>, stored: &ParamSet<T>, what: &str) -> Result<()> {
    let same = like.len() == stored.len()
        && like
            .iter()
            .zip(stored.iter())
            .all(|((a, ta), (b, tb))| a == b && ta.shape() == tb.shape());
    if same {
        Ok(())
    } else {
        Err(Error::Checkpoint(format!(
            "{what} does not match the network layout in the manifest config"
        )))
    }
}

fn parts<T>(model: &PatModel<T>) -> [(&ParamSet<T>, &AdamState<T>); 4] {
    [
        (&model.g.params, &model.adam_g),
        (&model.f.params, &model.adam_f),
        (&model.d_x.params, &model.adam_dx),
        (&model.d_y.params, &model.adam_dy),
    ]
}

/// Writes one parameter file per network, Adam moments, `manifest.json` and `loss.csv`.
///
/// Values are stored as 32-bit floats. Replay buffers are not persisted.
pub fn save_checkpoint<T: Scalar>(
    dir: impl AsRef<Path>,
    model: &PatModel<T>,
    config: &TrainConfig,
    history: &[StepMetrics],
) -> Result<CheckpointManifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut optimizer_steps = [0u64; 4];
    for (i, (net, (params, adam))) in NETWORKS.iter().zip(parts(model)).enumerate() {
        write_params(dir.join(format!("{net}.params")), params)?;
        write_params(dir.join(format!("{net}.adam_m")), &moments_as_params(params, &adam.m)?)?;
        write_params(dir.join(format!("{net}.adam_v")), &moments_as_params(params, &adam.v)?)?;
        optimizer_steps[i] = adam.step;
    }
    let manifest = CheckpointManifest {
        format_version: CHECKPOINT_FORMAT_VERSION,
        config: config.clone(),
        seed: config.seed,
        step: model.step,
        optimizer_steps,
        loss_history: history.to_vec(),
    };
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    write_loss_history(dir.join("loss.csv"), history)?;
    Ok(manifest)
}

/// Rebuilds a model from a directory written by [`save_checkpoint`].
pub fn load_checkpoint<T: Scalar>(dir: impl AsRef<Path>) -> Result<(PatModel<T>, CheckpointManifest)> {
    let dir = dir.as_ref();
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: CheckpointManifest = serde_json::from_str(&text)?;
    if manifest.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint format version {}",
            manifest.format_version
        )));
    }
    let mut model = PatModel::<T>::new(&manifest.config)?;
    let mut slots: [(&mut ParamSet<T>, &mut AdamState<T>); 4] = [
        (&mut model.g.params, &mut model.adam_g),
        (&mut model.f.params, &mut model.adam_f),
        (&mut model.d_x.params, &mut model.adam_dx),
        (&mut model.d_y.params, &mut model.adam_dy),
    ];
    for ((net, (params, adam)), steps) in NETWORKS.iter().zip(slots.iter_mut()).zip(manifest.optimizer_steps) {
        let stored: ParamSet<T> = read_params(dir.join(format!("{net}.params")))?;
        check_layout(params, &stored, &format!("{net}.params"))?;
        let m = params_as_moments(params, &read_params(dir.join(format!("{net}.adam_m")))?, "adam_m")?;
        let v = params_as_moments(params, &read_params(dir.join(format!("{net}.adam_v")))?, "adam_v")?;
        **params = stored;
        **adam = AdamState { step: steps, m, v };
    }
    model.step = manifest.step;
    model.rng = ChaCha8Rng::seed_from_u64(sub_seed(manifest.seed ^ manifest.step as u64, 6));
    Ok((model, manifest))
}
