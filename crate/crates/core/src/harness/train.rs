//! Training loop and evaluation.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use super::dataset::{Dataset, Split};
use super::model::{argmax, ToyNet, ToyNetConfig, TrainNoise};
use crate::augment::{eval_transform, ChannelStats, ImageBuffer, TrainPipeline};
use crate::error::{Error, Result};
use crate::mix::{bce_loss, build_targets, ce_loss, mix_batch, LossKind, MixOutcome};
use crate::optim::{agc_clip, Optimizer, ParamSlot, UnitShape};
use crate::recipe::{validate, Recipe};
use crate::regularize::{EmaState, RepeatedAugSampler};
use crate::rng::{Purpose, RngKey};
use crate::schedule::lr_for_step;
use crate::tensor::Tape;

/// Images per evaluation forward pass.
const EVAL_CHUNK: usize = 250;

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub seed: u64,
    /// Threads used for per-sample augmentation; results do not depend on it.
    pub workers: usize,
}

impl TrainOptions {
    pub fn new(seed: u64) -> Self {
        TrainOptions { seed, workers: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_top1: f64,
    /// Rate used by the first step of the epoch.
    pub lr: f64,
    pub ema_val_top1: Option<f64>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub recipe: String,
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    /// Top-1 on the test split from the final weights.
    pub test_top1: f64,
    pub ema_test_top1: Option<f64>,
}

impl TrainReport {
    pub fn final_val_top1(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.val_top1)
    }

    /// Bitwise equality of every reported number except wall time.
    pub fn same_metrics(&self, other: &TrainReport) -> bool {
        let bits = |v: f64| v.to_bits();
        let obits = |v: Option<f64>| v.map(f64::to_bits);
        self.recipe == other.recipe
            && self.seed == other.seed
            && bits(self.test_top1) == bits(other.test_top1)
            && obits(self.ema_test_top1) == obits(other.ema_test_top1)
            && self.epochs.len() == other.epochs.len()
            && self.epochs.iter().zip(&other.epochs).all(|(a, b)| {
                a.epoch == b.epoch
                    && bits(a.train_loss) == bits(b.train_loss)
                    && bits(a.val_top1) == bits(b.val_top1)
                    && bits(a.lr) == bits(b.lr)
                    && obits(a.ema_val_top1) == obits(b.ema_val_top1)
            })
    }

    /// Per-epoch rows followed by a `# test` trailer.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("#epoch\ttrain_loss\tval_top1\tlr\tema_val_top1\twall_s\n");
        for e in &self.epochs {
            let ema = e.ema_val_top1.map_or("-".to_string(), |v| format!("{v:.4}"));
            let _ =
                writeln!(s, "{}\t{:.6}\t{:.4}\t{:.6e}\t{}\t{:.2}", e.epoch, e.train_loss, e.val_top1, e.lr, ema, e.wall_seconds);
        }
        let ema = self.ema_test_top1.map_or("-".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(
            s,
            "# test_top1\t{:.4}\tema_test_top1\t{}\trecipe\t{}\tseed\t{}",
            self.test_top1, ema, self.recipe, self.seed
        );
        s
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub report: TrainReport,
    pub model: ToyNet,
    pub ema_model: Option<ToyNet>,
    pub stats: ChannelStats,
}

/// Builds the training pipeline; RandAugment fills with the dataset mean.
pub fn train_pipeline(recipe: &Recipe, stats: &ChannelStats) -> TrainPipeline {
    TrainPipeline {
        crop: recipe.rrc_config(),
        flip_prob: recipe.flip_prob,
        randaugment: recipe.randaugment_config(stats.mean.clone()),
        stats: stats.clone(),
        erasing: recipe.erasing_config(),
    }
}

fn network_config(recipe: &Recipe, data: &Dataset) -> ToyNetConfig {
    ToyNetConfig {
        canvas: data.train.height.max(data.train.width),
        channels: data.train.channels,
        width: recipe.model_width,
        depth: recipe.model_depth,
        classes: data.num_classes(),
    }
}

fn with_step(e: Error, epoch: usize, step: usize) -> Error {
    match e {
        Error::Numeric(m) => Error::Numeric(format!("epoch {epoch} step {step}: {m}")),
        other => other,
    }
}

/// Runs `recipe` on `data`. The dataset is only read; every random draw is
/// keyed by `(opts.seed, epoch, sample or step)`.
pub fn train(recipe: &Recipe, data: &Dataset, opts: &TrainOptions) -> Result<TrainOutcome> {
    let problems = validate(recipe);
    if !problems.is_empty() {
        return Err(Error::config(problems.join("; ")));
    }
    if opts.workers == 0 {
        return Err(Error::config("workers must be positive"));
    }
    let seed = opts.seed;
    let stats = data.train.channel_stats()?;
    let pipeline = train_pipeline(recipe, &stats);
    let net_cfg = network_config(recipe, data);
    let init = ToyNet::init(net_cfg, seed)?;
    let classes = net_cfg.classes;

    let mut slots: Vec<ParamSlot> = init
        .params
        .iter()
        .map(|(n, t)| {
            let s = ParamSlot::new(n.clone(), t.clone());
            if t.rank() == 2 {
                s.with_unit(UnitShape::Columns)
            } else {
                s
            }
        })
        .collect();
    let mut optimizer = Optimizer::new(recipe.optimizer_config())?;
    let mut ema = match recipe.ema {
        Some(d) => Some(EmaState::new(d, slots.iter().map(|s| &s.value))?),
        None => None,
    };
    let agc = recipe.agc_config();
    let mix = recipe.mix_config();
    let sampler = RepeatedAugSampler::new(data.train.len(), recipe.batch_size, recipe.repeated_aug.unwrap_or(1), seed)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;

    let mut records = Vec::with_capacity(recipe.epochs);
    let mut model = init.clone();
    let mut global_step = 0u64;
    if recipe.epochs > 0 {
        let schedule = recipe.schedule_config(seed);
        schedule.validate()?;
        for epoch in 0..recipe.epochs {
            let start = Instant::now();
            let batches = sampler.batches(epoch as u64);
            if batches.is_empty() {
                return Err(Error::config(format!(
                    "batch size {} exceeds the {} training samples",
                    recipe.batch_size,
                    data.train.len()
                )));
            }
            let mut loss_sum = 0.0;
            let mut first_lr = None;
            for (step, batch) in batches.iter().enumerate() {
                let images: Vec<ImageBuffer> = pool.install(|| {
                    batch
                        .par_iter()
                        .map(|s| {
                            let key = RngKey::new(seed, epoch as u64, s.index as u64, Purpose::Crop).with_lane(s.repeat as u64);
                            pipeline.run(&data.train.image(s.index), key)
                        })
                        .collect::<Result<_>>()
                })?;
                let labels: Vec<usize> = batch.iter().map(|s| data.train.label(s.index)).collect();
                let flat = model.input_batch(&images)?;
                let (input, outcome) = match &mix {
                    Some(cfg) => {
                        let c = net_cfg.canvas;
                        let x4 = flat.reshape(vec![labels.len(), net_cfg.channels, c, c])?;
                        let mut rng = RngKey::new(seed, epoch as u64, step as u64, Purpose::Mix).stream();
                        let (mixed, outcome) = mix_batch(&x4, &labels, cfg, &mut rng)?;
                        let rows = outcome.len();
                        (mixed.reshape(vec![rows, net_cfg.input_dim()])?, outcome)
                    }
                    None => (flat, MixOutcome::unmixed(labels.len())),
                };
                let targets = build_targets(&labels, &outcome, classes, recipe.loss, recipe.smoothing, recipe.bce_style)?;

                let mut tape = Tape::new();
                let noise = TrainNoise {
                    drop_path: recipe.drop_path,
                    dropout: recipe.dropout,
                    key: RngKey::new(seed, global_step, 0, Purpose::DropPath),
                };
                let step_result = (|| -> Result<f64> {
                    let (logits, vars) = model.forward(&mut tape, input, Some(noise))?;
                    let loss = match recipe.loss {
                        LossKind::Ce => ce_loss(&mut tape, logits, &targets)?,
                        LossKind::Bce => bce_loss(&mut tape, logits, &targets)?,
                    };
                    let value = tape.value(loss).item()?;
                    tape.backward(loss)?;
                    for (slot, v) in slots.iter_mut().zip(&vars) {
                        let g = tape.take_grad(*v).unwrap_or_else(|| vec![0.0; slot.value.numel()]);
                        slot.set_grad(g)?;
                    }
                    if let Some(cfg) = &agc {
                        agc_clip(&mut slots, cfg)?;
                    }
                    let lr = lr_for_step(&schedule, epoch, step, batches.len())?;
                    first_lr.get_or_insert(lr);
                    optimizer.step(&mut slots, lr)?;
                    Ok(value)
                })();
                let value = step_result.map_err(|e| with_step(e, epoch, step))?;
                loss_sum += value;
                if let Some(ema) = ema.as_mut() {
                    ema.update(slots.iter().map(|s| &s.value))?;
                }
                for ((_, t), s) in model.params.iter_mut().zip(&slots) {
                    t.data_mut().copy_from_slice(s.value.data());
                }
                global_step += 1;
            }
            let val_top1 = evaluate(&model, &data.val, recipe.test_res, recipe.test_crop_ratio, &stats)?;
            let ema_val_top1 = match &ema {
                Some(e) => {
                    Some(evaluate(&model.with_values(&e.shadow)?, &data.val, recipe.test_res, recipe.test_crop_ratio, &stats)?)
                }
                None => None,
            };
            records.push(EpochRecord {
                epoch,
                train_loss: loss_sum / batches.len() as f64,
                val_top1,
                lr: first_lr.unwrap_or(0.0),
                ema_val_top1,
                wall_seconds: start.elapsed().as_secs_f64(),
            });
        }
    }
    let ema_model = match &ema {
        Some(e) => Some(model.with_values(&e.shadow)?),
        None => None,
    };
    let test_top1 = evaluate(&model, &data.test, recipe.test_res, recipe.test_crop_ratio, &stats)?;
    let ema_test_top1 = match &ema_model {
        Some(m) => Some(evaluate(m, &data.test, recipe.test_res, recipe.test_crop_ratio, &stats)?),
        None => None,
    };
    let report = TrainReport { recipe: recipe.name.clone(), seed, epochs: records, test_top1, ema_test_top1 };
    Ok(TrainOutcome { report, model, ema_model, stats })
}

/// Eval-mode predictions over a split after the test-time transform.
pub fn predict(model: &ToyNet, split: &Split, test_res: usize, crop_ratio: f64, stats: &ChannelStats) -> Result<Vec<usize>> {
    if !(crop_ratio > 0.0 && crop_ratio <= 1.0) || test_res == 0 {
        return Err(Error::config(format!("test resolution {test_res} / crop ratio {crop_ratio} invalid")));
    }
    let mut out = Vec::with_capacity(split.len());
    let indices: Vec<usize> = (0..split.len()).collect();
    for chunk in indices.chunks(EVAL_CHUNK) {
        let images = chunk
            .par_iter()
            .map(|&i| eval_transform(&split.image(i), test_res, crop_ratio, stats))
            .collect::<Result<Vec<_>>>()?;
        let logits = model.logits(model.input_batch(&images)?)?;
        out.extend(logits.rows().map(argmax));
    }
    Ok(out)
}

/// Top-1 accuracy over `split`; an empty split scores 0.
pub fn evaluate(model: &ToyNet, split: &Split, test_res: usize, crop_ratio: f64, stats: &ChannelStats) -> Result<f64> {
    let preds = predict(model, split, test_res, crop_ratio, stats)?;
    Ok(top1(&preds, &split.labels))
}

pub fn top1(preds: &[usize], labels: &[u16]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = preds.iter().zip(labels).filter(|(p, l)| **p == **l as usize).count();
    hits as f64 / labels.len() as f64
}

/// One row of a crop-ratio / resolution sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPoint {
    pub test_res: usize,
    pub crop_ratio: f64,
    pub resize: usize,
    pub top1: f64,
}

pub fn eval_sweep(
    model: &ToyNet,
    split: &Split,
    resolutions: &[usize],
    ratios: &[f64],
    stats: &ChannelStats,
) -> Result<Vec<EvalPoint>> {
    let mut out = Vec::new();
    for &test_res in resolutions {
        for &crop_ratio in ratios {
            out.push(EvalPoint {
                test_res,
                crop_ratio,
                resize: crate::augment::eval_resize_size(test_res, crop_ratio),
                top1: evaluate(model, split, test_res, crop_ratio, stats)?,
            });
        }
    }
    Ok(out)
}

pub fn eval_sweep_tsv(points: &[EvalPoint]) -> String {
    let mut s = String::from("#test_res\tcrop_ratio\tresize\ttop1\n");
    for p in points {
        let _ = writeln!(s, "{}\t{}\t{}\t{:.4}", p.test_res, p.crop_ratio, p.resize, p.top1);
    }
    s
}
