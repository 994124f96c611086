use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{GanForm, DEFAULT_LAMBDA_CYC};
use super::ReplayBuffer;
use crate::autodiff::{Adam, AdamState};
use crate::error::{Error, Result};
use crate::nets::{Discriminator, DiscriminatorSpec, Generator, GeneratorSpec};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Stop after this many steps even if epochs remain.
    pub max_steps: Option<usize>,
    pub batch_size: usize,
    pub lr: f64,
    /// When set, the learning rate stays constant for this fraction of the
    /// planned steps and then decays linearly to zero.
    pub decay_start_fraction: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub seed: u64,
    pub buffer_size: usize,
    pub gan_form: GanForm,
    pub lambda_cyc: f64,
    pub generator: GeneratorSpec,
    pub discriminator: DiscriminatorSpec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = Adam::default();
        TrainConfig {
            epochs: 200,
            max_steps: None,
            batch_size: 1,
            lr: adam.lr,
            decay_start_fraction: None,
            beta1: adam.beta1,
            beta2: adam.beta2,
            seed: 0,
            buffer_size: 50,
            gan_form: GanForm::Log,
            lambda_cyc: DEFAULT_LAMBDA_CYC,
            generator: GeneratorSpec::default(),
            discriminator: DiscriminatorSpec::default(),
        }
    }
}

impl TrainConfig {
    /// Narrow networks and a short schedule that train on one CPU core in a
    /// few minutes.
    pub fn toy() -> Self {
        TrainConfig {
            epochs: 1000,
            max_steps: Some(5000),
            batch_size: 4,
            decay_start_fraction: Some(0.0),
            generator: GeneratorSpec {
                base_channels: 8,
                res_blocks: 9,
            },
            discriminator: DiscriminatorSpec {
                base_channels: 8,
                ..DiscriminatorSpec::default()
            },
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Validation(format!("train config: {what}")));
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return bad("lr must be non-negative");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("betas must lie in [0, 1)");
        }
        if !(self.lambda_cyc.is_finite() && self.lambda_cyc > 0.0) {
            return bad("lambda_cyc must be positive");
        }
        if self.generator.base_channels == 0 || self.discriminator.base_channels == 0 {
            return bad("network widths must be positive");
        }
        if self.decay_start_fraction.is_some_and(|f| !(0.0..1.0).contains(&f)) {
            return bad("decay_start_fraction must lie in [0, 1)");
        }
        if self.max_steps == Some(0) {
            return bad("max_steps must be positive when set");
        }
        Ok(())
    }

    pub fn adam(&self) -> Adam {
        Adam {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            ..Adam::default()
        }
    }

    /// Learning rate for 1-based `step` out of `total_steps` planned steps.
    pub fn lr_at(&self, step: usize, total_steps: usize) -> f64 {
        match self.decay_start_fraction {
            None => self.lr,
            Some(f) => {
                let start = (f * total_steps as f64).floor();
                let span = total_steps as f64 - start;
                let done = (step as f64 - start).max(0.0);
                self.lr * (1.0 - done / (span + 1.0)).max(0.0)
            }
        }
    }

    /// Discriminator spec with the output layer matching the GAN form.
    pub fn discriminator_spec(&self) -> DiscriminatorSpec {
        DiscriminatorSpec {
            sigmoid_output: self.gan_form != GanForm::LeastSquares,
            ..self.discriminator
        }
    }
}

/// Independent parameter streams per network, derived from the run seed.
pub(crate) fn sub_seed(seed: u64, tag: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(tag.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Both generators (G: PPG to ABP, F: ABP to PPG), both discriminators and
/// their training state.
#[derive(Debug, Clone)]
pub struct PatModel<T> {
    pub g: Generator<T>,
    pub f: Generator<T>,
    pub d_x: Discriminator<T>,
    pub d_y: Discriminator<T>,
    pub lambda_cyc: f64,
    pub gan_form: GanForm,
    pub buffer_x: ReplayBuffer<T>,
    pub buffer_y: ReplayBuffer<T>,
    pub adam_g: AdamState<T>,
    pub adam_f: AdamState<T>,
    pub adam_dx: AdamState<T>,
    pub adam_dy: AdamState<T>,
    /// Completed training steps.
    pub step: usize,
    pub(crate) rng: ChaCha8Rng,
}

impl<T: Scalar> PatModel<T> {
    pub fn new(cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let d_spec = cfg.discriminator_spec();
        let g = Generator::init(cfg.generator, sub_seed(cfg.seed, 1));
        let f = Generator::init(cfg.generator, sub_seed(cfg.seed, 2));
        let d_x = Discriminator::init(d_spec, sub_seed(cfg.seed, 3));
        let d_y = Discriminator::init(d_spec, sub_seed(cfg.seed, 4));
        Ok(PatModel {
            adam_g: AdamState::for_params(&g.params),
            adam_f: AdamState::for_params(&f.params),
            adam_dx: AdamState::for_params(&d_x.params),
            adam_dy: AdamState::for_params(&d_y.params),
            g,
            f,
            d_x,
            d_y,
            lambda_cyc: cfg.lambda_cyc,
            gan_form: cfg.gan_form,
            buffer_x: ReplayBuffer::new(cfg.buffer_size),
            buffer_y: ReplayBuffer::new(cfg.buffer_size),
            step: 0,
            rng: ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, 5)),
        })
    }
}
