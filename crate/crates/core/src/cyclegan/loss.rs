//! Adversarial, cycle-consistency and combined objectives, both as graph
//! nodes (for training) and as plain evaluations (for reporting and tests).

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Probabilities are clamped into `[EPS, 1 - EPS]` before taking logs.
pub const LOG_EPS: f64 = 1e-7;

pub const DEFAULT_LAMBDA_CYC: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GanForm {
    /// Log-likelihood discriminator loss; generator minimizes `-log D(G(x))`.
    #[default]
    Log,
    /// Log-likelihood with the generator literally minimizing `log(1 - D(G(x)))`.
    LogMinimax,
    /// Squared-error targets 1 (real) and 0 (fake).
    LeastSquares,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Generator,
    Discriminator,
}

fn mean_log<T: Scalar>(g: &mut Graph<T>, p: Var, complement: bool) -> Var {
    let eps = T::lit(LOG_EPS);
    let c = g.clamp(p, eps, T::one() - eps);
    let arg = if complement {
        let neg = g.scale(c, -T::one());
        g.add_scalar(neg, T::one())
    } else {
        c
    };
    let l = g.log(arg);
    g.mean(l)
}

fn mean_sq_to<T: Scalar>(g: &mut Graph<T>, p: Var, target: T) -> Result<Var> {
    let d = g.add_scalar(p, -target);
    let sq = g.mul(d, d)?;
    Ok(g.mean(sq))
}

/// Discriminator side needs `d_real`; the generator side only looks at `d_fake`.
pub fn adversarial_loss<T: Scalar>(
    g: &mut Graph<T>,
    d_real: Option<Var>,
    d_fake: Var,
    side: Side,
    form: GanForm,
) -> Result<Var> {
    match side {
        Side::Discriminator => {
            let real = d_real.ok_or_else(|| Error::Usage("discriminator loss needs the real patch map".into()))?;
            match form {
                GanForm::Log | GanForm::LogMinimax => {
                    let a = mean_log(g, real, false);
                    let b = mean_log(g, d_fake, true);
                    let s = g.add(a, b)?;
                    Ok(g.scale(s, -T::one()))
                }
                GanForm::LeastSquares => {
                    let a = mean_sq_to(g, real, T::one())?;
                    let b = mean_sq_to(g, d_fake, T::zero())?;
                    g.add(a, b)
                }
            }
        }
        Side::Generator => match form {
            GanForm::Log => {
                let a = mean_log(g, d_fake, false);
                Ok(g.scale(a, -T::one()))
            }
            GanForm::LogMinimax => Ok(mean_log(g, d_fake, true)),
            GanForm::LeastSquares => mean_sq_to(g, d_fake, T::one()),
        },
    }
}

fn check_probs(p: &[f64], what: &str) -> Result<()> {
    if p.is_empty() {
        return Err(Error::Argument(format!("{what}: empty patch map")));
    }
    if let Some(v) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Argument(format!("{what}: value {v} outside [0, 1]")));
    }
    Ok(())
}

/// Plain evaluation of [`adversarial_loss`] in `f64`.
pub fn adversarial_loss_value(d_real: &[f64], d_fake: &[f64], side: Side, form: GanForm) -> Result<f64> {
    if form != GanForm::LeastSquares {
        check_probs(d_fake, "d_fake")?;
        if side == Side::Discriminator {
            check_probs(d_real, "d_real")?;
        }
    }
    let mean = |v: &[f64], f: &dyn Fn(f64) -> f64| v.iter().map(|&x| f(x)).sum::<f64>() / v.len() as f64;
    let clamp = |x: f64| x.clamp(LOG_EPS, 1.0 - LOG_EPS);
    Ok(match (side, form) {
        (Side::Discriminator, GanForm::Log | GanForm::LogMinimax) => {
            -(mean(d_real, &|x| clamp(x).ln()) + mean(d_fake, &|x| (1.0 - clamp(x)).ln()))
        }
        (Side::Discriminator, GanForm::LeastSquares) => {
            mean(d_real, &|x| (x - 1.0).powi(2)) + mean(d_fake, &|x| x * x)
        }
        (Side::Generator, GanForm::Log) => -mean(d_fake, &|x| clamp(x).ln()),
        (Side::Generator, GanForm::LogMinimax) => mean(d_fake, &|x| (1.0 - clamp(x)).ln()),
        (Side::Generator, GanForm::LeastSquares) => mean(d_fake, &|x| (x - 1.0).powi(2)),
    })
}

/// `mean|x_rec - x| + mean|y_rec - y|`
pub fn cycle_loss<T: Scalar>(g: &mut Graph<T>, x: Var, x_rec: Var, y: Var, y_rec: Var) -> Result<Var> {
    let dx = g.sub(x_rec, x)?;
    let ax = g.abs(dx);
    let mx = g.mean(ax);
    let dy = g.sub(y_rec, y)?;
    let ay = g.abs(dy);
    let my = g.mean(ay);
    g.add(mx, my)
}

pub fn cycle_loss_value(x: &[f64], x_rec: &[f64], y: &[f64], y_rec: &[f64]) -> Result<f64> {
    if x.len() != x_rec.len() || y.len() != y_rec.len() {
        return Err(Error::Shape("cycle loss: reconstruction shapes differ from inputs".into()));
    }
    if x.is_empty() || y.is_empty() {
        return Err(Error::Argument("cycle loss: empty input".into()));
    }
    let l1 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q).abs()).sum::<f64>() / a.len() as f64;
    Ok(l1(x, x_rec) + l1(y, y_rec))
}

/// The three loss components of one generator update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveParts<V> {
    pub gan_g: V,
    pub gan_f: V,
    pub cyc: V,
}

/// `gan_G + gan_F + lambda * cyc`
pub fn total_objective<T: Scalar>(g: &mut Graph<T>, parts: ObjectiveParts<Var>, lambda_cyc: f64) -> Result<Var> {
    check_lambda(lambda_cyc)?;
    let gan = g.add(parts.gan_g, parts.gan_f)?;
    let cyc = g.scale(parts.cyc, T::lit(lambda_cyc));
    g.add(gan, cyc)
}

pub fn total_objective_value(parts: ObjectiveParts<f64>, lambda_cyc: f64) -> Result<f64> {
    check_lambda(lambda_cyc)?;
    Ok(parts.gan_g + parts.gan_f + lambda_cyc * parts.cyc)
}

fn check_lambda(lambda_cyc: f64) -> Result<()> {
    if !(lambda_cyc.is_finite() && lambda_cyc > 0.0) {
        return Err(Error::Argument(format!("lambda_cyc must be positive, got {lambda_cyc}")));
    }
    Ok(())
}
