//! Trains a reduced-width translator on synthetic subjects and reports
//! held-out beat errors.
//!
//! Usage: `toy_train [ngf] [res_blocks] [ndf] [batch] [steps] [lr] [log|ls] [decay_start] [lambda] [amp_jitter]`

use std::time::Instant;

use pulsegan::bp_extract::{align_beats, detect_beats, extract_sbp_dbp};
use pulsegan::cyclegan::{preprocess, train, training_windows, translate, GanForm, PatModel, TrainConfig};
use pulsegan::nets::{DiscriminatorSpec, GeneratorSpec};
use pulsegan::signal_io::{generate_synthetic_pair, SynthConfig};

fn arg<T: std::str::FromStr>(i: usize, default: T) -> T {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> pulsegan::Result<()> {
    let cfg = TrainConfig {
        epochs: 10_000,
        max_steps: Some(arg(5, 2000)),
        batch_size: arg(4, 4),
        lr: arg(6, 2e-4),
        gan_form: if arg(7, String::from("log")) == "ls" {
            GanForm::LeastSquares
        } else {
            GanForm::Log
        },
        lambda_cyc: arg(9, 10.0),
        decay_start_fraction: Some(arg(8, -1.0f64)).filter(|f| *f >= 0.0),
        generator: GeneratorSpec {
            base_channels: arg(1, 8),
            res_blocks: arg(2, 9),
        },
        discriminator: DiscriminatorSpec {
            base_channels: arg(3, 8),
            ..DiscriminatorSpec::default()
        },
        ..TrainConfig::default()
    };
    let synth = SynthConfig {
        amplitude_jitter: arg(10, SynthConfig::default().amplitude_jitter),
        ..SynthConfig::default()
    };
    let records: Vec<_> = (0..10)
        .map(|s| generate_synthetic_pair(s, 4096, &synth))
        .collect::<pulsegan::Result<_>>()?;
    let prepped: Vec<_> = records[..8].iter().map(preprocess).collect::<pulsegan::Result<_>>()?;
    let (x, y) = training_windows::<f32>(&prepped)?;
    let mut model = PatModel::<f32>::new(&cfg)?;
    let t0 = Instant::now();
    let hist = train(&mut model, &x, &y, &cfg, |m| {
        if m.step % 250 == 0 || (m.step <= 200 && m.step % 40 == 0) {
            eprintln!(
                "{:5} {:7.1}s cyc {:.4} gG {:.3} gF {:.3} dX {:.3} dY {:.3}",
                m.step,
                t0.elapsed().as_secs_f64(),
                m.loss_cyc,
                m.loss_gan_g,
                m.loss_gan_f,
                m.loss_d_x,
                m.loss_d_y
            );
        }
    })?;
    let n = hist.len();
    let mean = |s: &[pulsegan::cyclegan::StepMetrics]| s.iter().map(|m| m.loss_cyc).sum::<f64>() / s.len() as f64;
    let first = mean(&hist[..200.min(n)]);
    let last = mean(&hist[n.saturating_sub(2000)..]);
    println!("steps {n} time {:.1}s first {first:.4} last {last:.4} ratio {:.3}", t0.elapsed().as_secs_f64(), last / first);
    for rec in &records[8..] {
        let p = preprocess(rec)?;
        let out = translate(&model, rec, &p.abp_norm)?;
        let fs = rec.sample_rate_hz;
        let reference = &p.abp_filtered[..out.len()];
        let truth = extract_sbp_dbp(reference, &detect_beats(reference, fs)?)?;
        let pred = extract_sbp_dbp(&out.abp, &detect_beats(&out.abp, fs)?)?;
        let pairs = align_beats(&truth, &pred, fs)?;
        let k = pairs.len() as f64;
        let sbp = pairs.iter().map(|(t, p)| (truth.sbp[*t] - pred.sbp[*p]).abs()).sum::<f64>() / k;
        let dbp = pairs.iter().map(|(t, p)| (truth.dbp[*t] - pred.dbp[*p]).abs()).sum::<f64>() / k;
        let wave = reference.iter().zip(&out.abp).map(|(a, b)| (a - b).abs()).sum::<f64>() / out.len() as f64;
        println!(
            "{}: beats {}/{} matched {} sbp mae {sbp:.2} dbp mae {dbp:.2} wave mae {wave:.2}",
            rec.subject_id,
            truth.len(),
            pred.len(),
            pairs.len()
        );
    }
    Ok(())
}
