use log::{debug, info};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::loss::{adversarial_loss, cycle_loss, total_objective, ObjectiveParts, Side};
use super::{PatModel, TrainConfig, WindowSet};
use crate::autodiff::{optimizer_step, Graph, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::WINDOW_LEN;

/// Loss components reported for one training step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: usize,
    pub loss_gan_g: f64,
    pub loss_gan_f: f64,
    pub loss_cyc: f64,
    pub loss_d_x: f64,
    pub loss_d_y: f64,
}

impl StepMetrics {
    fn check(&self) -> Result<()> {
        let fields = [
            ("loss_gan_G", self.loss_gan_g),
            ("loss_gan_F", self.loss_gan_f),
            ("loss_cyc", self.loss_cyc),
            ("loss_D_X", self.loss_d_x),
            ("loss_D_Y", self.loss_d_y),
        ];
        match fields.iter().find(|(_, v)| !v.is_finite()) {
            Some((name, _)) => Err(Error::Diverged {
                step: self.step,
                what: (*name).to_string(),
            }),
            None => Ok(()),
        }
    }
}

fn batch_len(batch: &[impl Sized], what: &str) -> Result<usize> {
    if batch.is_empty() || batch.len() % WINDOW_LEN != 0 {
        return Err(Error::Argument(format!(
            "{what} batch must hold a positive number of {WINDOW_LEN}-sample windows, got {} values",
            batch.len()
        )));
    }
    Ok(batch.len() / WINDOW_LEN)
}

/// One alternating update: the generators against frozen discriminators,
/// then the discriminators on real windows versus replayed fakes.
///
/// `batch_x` (PPG) and `batch_y` (ABP) are flat runs of 256-sample windows and
/// need not be paired.
pub fn train_step<T: Scalar>(
    model: &mut PatModel<T>,
    batch_x: &[T],
    batch_y: &[T],
    cfg: &TrainConfig,
) -> Result<StepMetrics> {
    let nx = batch_len(batch_x, "x")?;
    let ny = batch_len(batch_y, "y")?;
    let adam = cfg.adam();
    let form = model.gan_form;
    let step = model.step + 1;

    // generators
    let mut g = Graph::new();
    let gv = model.g.bind(&mut g);
    let fv = model.f.bind(&mut g);
    let dxv = model.d_x.bind_frozen(&mut g);
    let dyv = model.d_y.bind_frozen(&mut g);
    let x = g.constant(vec![nx, 1, WINDOW_LEN], batch_x.to_vec());
    let y = g.constant(vec![ny, 1, WINDOW_LEN], batch_y.to_vec());

    let fake_y = model.g.forward(&mut g, &gv, x)?;
    let rec_x = model.f.forward(&mut g, &fv, fake_y)?;
    let fake_x = model.f.forward(&mut g, &fv, y)?;
    let rec_y = model.g.forward(&mut g, &gv, fake_x)?;
    let dy_fake = model.d_y.forward(&mut g, &dyv, fake_y)?;
    let dx_fake = model.d_x.forward(&mut g, &dxv, fake_x)?;
    let gan_g = adversarial_loss(&mut g, None, dy_fake, Side::Generator, form)?;
    let gan_f = adversarial_loss(&mut g, None, dx_fake, Side::Generator, form)?;
    let cyc = cycle_loss(&mut g, x, rec_x, y, rec_y)?;
    let total = total_objective(&mut g, ObjectiveParts { gan_g, gan_f, cyc }, model.lambda_cyc)?;

    let mut metrics = StepMetrics {
        step,
        loss_gan_g: g.item(gan_g).to_f64_lossy(),
        loss_gan_f: g.item(gan_f).to_f64_lossy(),
        loss_cyc: g.item(cyc).to_f64_lossy(),
        loss_d_x: 0.0,
        loss_d_y: 0.0,
    };
    metrics.check()?;

    let grads = g.backward(total)?;
    model.g.params.zero_grads();
    model.g.params.accumulate_grads(&grads, &gv)?;
    model.f.params.zero_grads();
    model.f.params.accumulate_grads(&grads, &fv)?;
    optimizer_step(&mut model.g.params, &mut model.adam_g, &adam)?;
    optimizer_step(&mut model.f.params, &mut model.adam_f, &adam)?;

    let split = |v: Var| -> Vec<Vec<T>> { g.value(v).chunks(WINDOW_LEN).map(<[T]>::to_vec).collect() };
    let fakes_y = split(fake_y);
    let fakes_x = split(fake_x);
    drop(grads);
    drop(g);
    let pool_y: Vec<T> = model.buffer_y.query(fakes_y, &mut model.rng).concat();
    let pool_x: Vec<T> = model.buffer_x.query(fakes_x, &mut model.rng).concat();

    // discriminators
    let mut g = Graph::new();
    let dxv = model.d_x.bind(&mut g);
    let dyv = model.d_y.bind(&mut g);
    let real_x = g.constant(vec![nx, 1, WINDOW_LEN], batch_x.to_vec());
    let real_y = g.constant(vec![ny, 1, WINDOW_LEN], batch_y.to_vec());
    let fake_x = g.constant(vec![ny, 1, WINDOW_LEN], pool_x);
    let fake_y = g.constant(vec![nx, 1, WINDOW_LEN], pool_y);
    let dx_real = model.d_x.forward(&mut g, &dxv, real_x)?;
    let dx_fake = model.d_x.forward(&mut g, &dxv, fake_x)?;
    let dy_real = model.d_y.forward(&mut g, &dyv, real_y)?;
    let dy_fake = model.d_y.forward(&mut g, &dyv, fake_y)?;
    let loss_dx = adversarial_loss(&mut g, Some(dx_real), dx_fake, Side::Discriminator, form)?;
    let loss_dy = adversarial_loss(&mut g, Some(dy_real), dy_fake, Side::Discriminator, form)?;
    metrics.loss_d_x = g.item(loss_dx).to_f64_lossy();
    metrics.loss_d_y = g.item(loss_dy).to_f64_lossy();
    metrics.check()?;
    let total_d = g.add(loss_dx, loss_dy)?;
    let grads = g.backward(total_d)?;
    model.d_x.params.zero_grads();
    model.d_x.params.accumulate_grads(&grads, &dxv)?;
    model.d_y.params.zero_grads();
    model.d_y.params.accumulate_grads(&grads, &dyv)?;
    optimizer_step(&mut model.d_x.params, &mut model.adam_dx, &adam)?;
    optimizer_step(&mut model.d_y.params, &mut model.adam_dy, &adam)?;

    model.step = step;
    Ok(metrics)
}

/// Runs `cfg.epochs` passes over the PPG windows (capped by `cfg.max_steps`).
///
/// Each epoch shuffles the PPG and ABP window orders independently, so the
/// batches seen by the two domains are unpaired.
pub fn train<T: Scalar>(
    model: &mut PatModel<T>,
    x: &WindowSet<T>,
    y: &WindowSet<T>,
    cfg: &TrainConfig,
    mut on_step: impl FnMut(&StepMetrics),
) -> Result<Vec<StepMetrics>> {
    cfg.validate()?;
    if x.is_empty() || y.is_empty() {
        return Err(Error::Argument("training needs at least one window per domain".into()));
    }
    let bs = cfg.batch_size;
    let per_epoch = x.len().div_ceil(bs);
    let planned = cfg
        .max_steps
        .map_or(per_epoch * cfg.epochs, |m| m.min(per_epoch * cfg.epochs));
    let mut step_cfg = cfg.clone();
    let mut history = Vec::new();
    let mut y_order: Vec<usize> = (0..y.len()).collect();
    let mut y_pos = y.len();
    'epochs: for epoch in 0..cfg.epochs {
        let mut x_order: Vec<usize> = (0..x.len()).collect();
        x_order.shuffle(&mut model.rng);
        for chunk in x_order.chunks(bs) {
            if cfg.max_steps.is_some_and(|m| history.len() >= m) {
                break 'epochs;
            }
            let mut bx = Vec::with_capacity(chunk.len() * WINDOW_LEN);
            let mut by = Vec::with_capacity(chunk.len() * WINDOW_LEN);
            for &i in chunk {
                bx.extend_from_slice(x.window(i));
                if y_pos == y.len() {
                    y_order.shuffle(&mut model.rng);
                    y_pos = 0;
                }
                by.extend_from_slice(y.window(y_order[y_pos]));
                y_pos += 1;
            }
            step_cfg.lr = cfg.lr_at(history.len() + 1, planned);
            let m = train_step(model, &bx, &by, &step_cfg)?;
            debug!(
                "step {} cyc {:.4} gG {:.4} gF {:.4} dX {:.4} dY {:.4}",
                m.step, m.loss_cyc, m.loss_gan_g, m.loss_gan_f, m.loss_d_x, m.loss_d_y
            );
            on_step(&m);
            history.push(m);
        }
        info!("epoch {} done after {} steps", epoch + 1, history.len());
    }
    Ok(history)
}
