use super::augment::{mixup, random_conv_augment, Sample};
use super::{argmax, Architecture, Classifier, ClassifierConfig, CLASSES};
use crate::corpus::{Dataset, LabelMode, StoredClip};
use crate::error::{Error, Result};
use crate::seeding::stream_rng;
use crate::skill::Skill;
use crate::tensor::{average_checkpoints, lr_at, AdamHyper, OptState};
use rand::seq::SliceRandom;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use std::fmt::Write as _;

/// Clips per gradient work unit; fixed so results do not depend on the
/// thread count.
const CHUNK: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_acc: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation accuracy.
    pub classifier: Classifier,
    pub log: Vec<EpochLog>,
    pub best_val_acc: f64,
}

impl TrainOutcome {
    pub fn log_csv(&self) -> String {
        let mut out = String::from("epoch,lr,train_loss,val_acc\n");
        for e in &self.log {
            let _ = writeln!(out, "{},{:.6e},{:.6},{:.4}", e.epoch, e.lr, e.train_loss, e.val_acc);
        }
        out
    }
}

/// Top-1 accuracy, confusion counts (rows: true class) and mean score
/// vectors per true class.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub confusion: [[usize; CLASSES]; CLASSES],
    pub mean_scores: [[f64; CLASSES]; CLASSES],
    pub count: usize,
}

impl Evaluation {
    /// Tallies `(scores, label mask)` pairs; the row of a clip is its lowest
    /// label and a prediction counts as correct if it hits any label.
    pub fn from_scores<'a>(items: impl IntoIterator<Item = (&'a [f32], u8)>) -> Evaluation {
        let mut confusion = [[0usize; CLASSES]; CLASSES];
        let mut sums = [[0.0f64; CLASSES]; CLASSES];
        let mut correct = 0;
        let mut count = 0;
        for (scores, labels) in items {
            let pred = argmax(scores);
            let row = (0..CLASSES).find(|&k| labels & (1 << k) != 0).unwrap_or(0);
            confusion[row][pred] += 1;
            for k in 0..CLASSES {
                sums[row][k] += f64::from(scores[k]);
            }
            correct += usize::from(labels & (1 << pred) != 0);
            count += 1;
        }
        let mut mean_scores = [[0.0; CLASSES]; CLASSES];
        for r in 0..CLASSES {
            let support: usize = confusion[r].iter().sum();
            if support > 0 {
                for k in 0..CLASSES {
                    mean_scores[r][k] = sums[r][k] / support as f64;
                }
            }
        }
        Evaluation {
            accuracy: if count == 0 { 0.0 } else { correct as f64 / count as f64 },
            confusion,
            mean_scores,
            count,
        }
    }

    pub fn support(&self) -> [usize; CLASSES] {
        std::array::from_fn(|r| self.confusion[r].iter().sum())
    }

    pub fn report(&self) -> String {
        let mut out = format!("accuracy {:.4} over {} clips\n", self.accuracy, self.count);
        let _ = writeln!(out, "{:>12} {}", "true\\pred", Skill::ALL.map(|s| format!("{:>11}", s.name())).join(""));
        for s in Skill::ALL {
            let row: String = self.confusion[s.index()].iter().map(|c| format!("{c:>11}")).collect();
            let _ = writeln!(out, "{:>12} {row}", s.name());
        }
        out
    }
}

/// Scores labelled pixel clips (frame-major, 8 x 4096 each).
pub fn eval_classifier(c: &Classifier, clips: &[(Vec<f32>, u8)]) -> Result<Evaluation> {
    let scores: Vec<Vec<f32>> = clips
        .par_iter()
        .map(|(p, _)| c.scores_pixels(p))
        .collect::<Result<_>>()?;
    Ok(Evaluation::from_scores(scores.iter().zip(clips).map(|(s, (_, l))| (s.as_slice(), *l))))
}

pub fn eval_stored<'a>(c: &Classifier, clips: impl IntoIterator<Item = &'a StoredClip>) -> Result<Evaluation> {
    let clips: Vec<&StoredClip> = clips.into_iter().collect();
    let scores: Vec<Vec<f32>> = clips
        .par_iter()
        .map(|s| c.scores_pixels(&s.pixels_f32().collect::<Vec<_>>()))
        .collect::<Result<_>>()?;
    Ok(Evaluation::from_scores(scores.iter().zip(&clips).map(|(s, c)| (s.as_slice(), c.labels))))
}

fn target_of(labels: u8, mode: LabelMode) -> Vec<f32> {
    let hits: Vec<bool> = (0..CLASSES).map(|k| labels & (1 << k) != 0).collect();
    let n = hits.iter().filter(|&&h| h).count().max(1) as f32;
    hits.iter()
        .map(|&h| match (h, mode) {
            (false, _) => 0.0,
            (true, LabelMode::Curated) => 1.0 / n,
            (true, LabelMode::MultiLabel) => 1.0,
        })
        .collect()
}

/// Optimisation schedule for one call of [`fit`].
struct Phase<'a> {
    cfg: &'a ClassifierConfig,
    head_only: bool,
    /// Seed-path tag so phases sharing a config seed draw distinct streams.
    tag: u64,
}

fn fit(data: &Dataset, start: Classifier, phase: Phase<'_>) -> Result<TrainOutcome> {
    let cfg = phase.cfg;
    cfg.validate()?;
    let train: Vec<&StoredClip> = data.train().collect();
    if train.is_empty() {
        return Err(Error::Invalid("training split is empty".into()));
    }
    let val: Vec<&StoredClip> = data.val().collect();
    let mode = start.mode();
    let mut model = start;
    let offset = if phase.head_only { model.encoder_len() } else { 0 };
    let n_params = model.params.len() - offset;
    let mut opt = OptState::new(
        n_params,
        AdamHyper {
            lr: cfg.lr,
            weight_decay: cfg.weight_decay,
            ..AdamHyper::default()
        },
    );
    let steps_per_epoch = train.len().div_ceil(cfg.batch_size);
    let total = steps_per_epoch * cfg.epochs;
    let warmup = (cfg.warmup_frac * total as f64).round() as usize;
    let beta = (cfg.mixup_alpha > 0.0)
        .then(|| Beta::new(cfg.mixup_alpha, cfg.mixup_alpha))
        .transpose()
        .map_err(|e| Error::Config(format!("mixup alpha: {e}")))?;

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, Vec<f32>)> = None;
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        let mut rng = stream_rng(cfg.seed, &[phase.tag, epoch as u64]);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut lr = cfg.lr;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let samples: Vec<Sample> = batch
                .par_iter()
                .enumerate()
                .map(|(i, &idx)| {
                    let clip = train[idx];
                    let mut pixels: Vec<f32> = clip.pixels_f32().collect();
                    let mut srng = stream_rng(cfg.seed, &[phase.tag, epoch as u64, b as u64, i as u64]);
                    random_conv_augment(&mut pixels, &mut srng, cfg.aug_prob)?;
                    Ok(Sample {
                        pixels,
                        target: target_of(clip.labels, mode),
                    })
                })
                .collect::<Result<_>>()?;
            let samples = match &beta {
                Some(beta) => {
                    let mut partner: Vec<usize> = (0..samples.len()).collect();
                    partner.shuffle(&mut rng);
                    let others: Vec<Sample> = partner.iter().map(|&j| samples[j].clone()).collect();
                    let lambdas: Vec<f64> = (0..samples.len()).map(|_| beta.sample(&mut rng)).collect();
                    mixup(&samples, &others, &lambdas)?
                }
                None => samples,
            };

            let parts: Vec<(f64, Vec<f32>)> = samples
                .par_chunks(CHUNK)
                .map(|chunk| {
                    let mut g = vec![0.0f32; model.params.len()];
                    let mut loss = 0.0;
                    for s in chunk {
                        loss += model.loss_and_grad(&s.pixels, &s.target, &mut g, !phase.head_only)?;
                    }
                    Ok((loss, g))
                })
                .collect::<Result<_>>()?;
            let scale = 1.0 / samples.len() as f32;
            let mut grad = vec![0.0f32; n_params];
            let mut batch_loss = 0.0;
            for (loss, g) in &parts {
                batch_loss += loss;
                for (a, &v) in grad.iter_mut().zip(&g[offset..]) {
                    *a += v * scale;
                }
            }
            batch_loss /= samples.len() as f64;
            if !batch_loss.is_finite() {
                return Err(Error::TrainingDiverged {
                    context: format!("seed {} epoch {epoch} batch {b}: loss {batch_loss}; config {cfg:?}", cfg.seed),
                });
            }
            lr = lr_at(step, total, warmup, cfg.lr);
            opt.step(&mut model.params[offset..], &grad, lr).map_err(|e| Error::TrainingDiverged {
                context: format!("seed {} epoch {epoch} batch {b}: {e}; config {cfg:?}", cfg.seed),
            })?;
            loss_sum += batch_loss;
            step += 1;
        }
        let val_acc = if val.is_empty() {
            0.0
        } else {
            eval_stored(&model, val.iter().copied())?.accuracy
        };
        log.push(EpochLog {
            epoch,
            lr,
            train_loss: loss_sum / steps_per_epoch as f64,
            val_acc,
        });
        if best.as_ref().is_none_or(|(acc, _)| val_acc > *acc) {
            best = Some((val_acc, model.params.clone()));
        }
    }
    let (best_val_acc, params) = best.expect("at least one epoch");
    model.params = params;
    Ok(TrainOutcome {
        classifier: model,
        log,
        best_val_acc,
    })
}

/// Trains from a fresh initialisation; returns the best-validation model.
pub fn train_classifier(data: &Dataset, cfg: &ClassifierConfig) -> Result<TrainOutcome> {
    if data.is_empty() {
        return Err(Error::Invalid("corpus is empty".into()));
    }
    let init = Classifier::init(Architecture::of(cfg), &mut stream_rng(cfg.seed, &[100]))?;
    fit(data, init, Phase { cfg, head_only: false, tag: 101 })
}

/// Warm start, then fine-tuning runs over weight decay x epochs, averaged.
#[derive(Clone, Debug, PartialEq)]
pub struct SoupConfig {
    pub base: ClassifierConfig,
    /// Full training that stands in for a pretrained backbone.
    pub warm_epochs: usize,
    pub head_epochs: usize,
    pub weight_decays: Vec<f64>,
    pub member_epochs: Vec<usize>,
    /// Learning rate of the fine-tuning runs relative to the base rate.
    pub finetune_lr_scale: f64,
}

impl Default for SoupConfig {
    fn default() -> Self {
        SoupConfig {
            base: ClassifierConfig::default(),
            warm_epochs: 4,
            head_epochs: 1,
            weight_decays: vec![0.01, 0.05, 0.1],
            member_epochs: vec![1, 2],
            finetune_lr_scale: 0.5,
        }
    }
}

impl SoupConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.weight_decays.len() * self.member_epochs.len() < 2 {
            return Err(Error::Config("a soup needs at least two runs".into()));
        }
        if self.weight_decays.iter().any(|&w| !(w >= 0.0)) || self.member_epochs.contains(&0) {
            return Err(Error::Config("soup weight decays must be >= 0 and member epochs positive".into()));
        }
        if !(self.finetune_lr_scale > 0.0) {
            return Err(Error::Config("soup fine-tune lr scale must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SoupReport {
    pub soup: Classifier,
    pub warm_val_acc: f64,
    /// `(weight decay, epochs, val accuracy)` per member.
    pub members: Vec<(f64, usize, f64)>,
    pub soup_val_acc: f64,
}

impl SoupReport {
    pub fn min_member_acc(&self) -> f64 {
        self.members.iter().map(|m| m.2).fold(f64::INFINITY, f64::min)
    }
}

pub fn make_soup(data: &Dataset, cfg: &SoupConfig) -> Result<SoupReport> {
    cfg.validate()?;
    let runs = cfg.weight_decays.len() * cfg.member_epochs.len();
    let base = &cfg.base;
    let init = Classifier::init(Architecture::of(base), &mut stream_rng(base.seed, &[100]))?;
    let warm_cfg = ClassifierConfig {
        epochs: cfg.warm_epochs.max(1),
        ..base.clone()
    };
    let warm = fit(data, init, Phase { cfg: &warm_cfg, head_only: false, tag: 101 })?;
    let head_cfg = ClassifierConfig {
        epochs: cfg.head_epochs.max(1),
        aug_prob: 0.0,
        ..base.clone()
    };
    let warm = fit(data, warm.classifier, Phase { cfg: &head_cfg, head_only: true, tag: 102 })?;
    let warm_val_acc = warm.best_val_acc;

    let mut members = Vec::with_capacity(runs);
    let mut checkpoints = Vec::with_capacity(runs);
    for (i, &wd) in cfg.weight_decays.iter().enumerate() {
        for (j, &epochs) in cfg.member_epochs.iter().enumerate() {
            let member_cfg = ClassifierConfig {
                weight_decay: wd,
                epochs,
                lr: base.lr * cfg.finetune_lr_scale,
                ..base.clone()
            };
            let out = fit(
                data,
                warm.classifier.clone(),
                Phase {
                    cfg: &member_cfg,
                    head_only: false,
                    tag: 200 + (i * cfg.member_epochs.len() + j) as u64,
                },
            )?;
            members.push((wd, epochs, out.best_val_acc));
            checkpoints.push(out.classifier.to_checkpoint());
        }
    }
    let mut soup = Classifier::from_checkpoint(&average_checkpoints(&checkpoints)?)?;
    soup.extra_meta = format!("members={runs}");
    let val: Vec<&StoredClip> = data.val().collect();
    let soup_val_acc = if val.is_empty() { 0.0 } else { eval_stored(&soup, val)?.accuracy };
    Ok(SoupReport {
        soup,
        warm_val_acc,
        members,
        soup_val_acc,
    })
}
