//! Clip classifier: a per-frame conv encoder, temporal pooling of the frame
//! embeddings (mean and mean absolute change) and an MLP head.

mod augment;
mod train;

pub use augment::{apply_kernel, mixup, random_conv_augment, renormalize, ConvKernel, Sample, KERNEL_SIZES};
pub use train::{
    eval_classifier, eval_stored, make_soup, train_classifier, EpochLog, Evaluation, SoupConfig, SoupReport,
    TrainOutcome,
};

use crate::camera::{Clip, CLIP_LEN, FRAME_PIXELS, FRAME_SIZE};
use crate::corpus::LabelMode;
use crate::error::{Error, Result};
use crate::skill::Skill;
use crate::tensor::{binary_cross_entropy, softmax, softmax_cross_entropy, Checkpoint, Layer, ManifestEntry, Network, Real};
use rand::Rng;

pub const CLASSES: usize = Skill::COUNT;

/// Architecture and optimisation settings.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierConfig {
    pub channels: [usize; 3],
    pub embed: usize,
    pub head_hidden: Vec<usize>,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    /// Linear warm-up length as a fraction of all steps.
    pub warmup_frac: f64,
    pub aug_prob: f64,
    pub mixup_alpha: f64,
    pub mode: LabelMode,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            channels: [4, 8, 16],
            embed: 64,
            head_hidden: vec![64],
            batch_size: 64,
            lr: 1e-3,
            weight_decay: 0.05,
            epochs: 6,
            warmup_frac: 0.05,
            aug_prob: 0.95,
            mixup_alpha: 0.2,
            mode: LabelMode::Curated,
            seed: 0,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels.contains(&0) || self.embed == 0 || self.head_hidden.contains(&0) {
            return Err(Error::Config("classifier widths must be positive".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch size and epochs must be positive".into()));
        }
        if !(self.lr > 0.0) || self.weight_decay < 0.0 || !(0.0..=1.0).contains(&self.aug_prob) {
            return Err(Error::Config("lr > 0, weight decay >= 0, aug prob in [0, 1] required".into()));
        }
        if !(self.mixup_alpha >= 0.0) || !(0.0..1.0).contains(&self.warmup_frac) {
            return Err(Error::Config("mixup alpha >= 0 and warm-up fraction in [0, 1) required".into()));
        }
        Ok(())
    }
}

/// Network structure shared by every checkpoint with the same widths.
#[derive(Clone, Debug, PartialEq)]
pub struct Architecture {
    pub channels: [usize; 3],
    pub embed: usize,
    pub head_hidden: Vec<usize>,
    pub mode: LabelMode,
}

impl Architecture {
    pub fn of(cfg: &ClassifierConfig) -> Architecture {
        Architecture {
            channels: cfg.channels,
            embed: cfg.embed,
            head_hidden: cfg.head_hidden.clone(),
            mode: cfg.mode,
        }
    }

    fn meta(&self) -> String {
        let list = |v: &[usize]| v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
        format!(
            "kind=classifier;mode={};channels={};embed={};head={}",
            self.mode,
            list(&self.channels),
            self.embed,
            list(&self.head_hidden)
        )
    }

    fn from_meta(meta: &str) -> Result<Architecture> {
        let field = |key: &str| {
            meta_field(meta, key).ok_or_else(|| Error::ManifestMismatch(format!("checkpoint meta lacks `{key}`")))
        };
        let list = |s: &str| -> Result<Vec<usize>> {
            s.split(',')
                .filter(|t| !t.is_empty())
                .map(|t| t.parse().map_err(|_| Error::ManifestMismatch(format!("bad width `{t}`"))))
                .collect()
        };
        if field("kind")? != "classifier" {
            return Err(Error::ManifestMismatch("checkpoint is not a classifier".into()));
        }
        let channels = list(field("channels")?)?;
        let channels: [usize; 3] = channels
            .try_into()
            .map_err(|_| Error::ManifestMismatch("expected three conv widths".into()))?;
        Ok(Architecture {
            channels,
            embed: field("embed")?.parse().map_err(|_| Error::ManifestMismatch("bad embed width".into()))?,
            head_hidden: list(field("head")?)?,
            mode: field("mode")?.parse()?,
        })
    }
}

/// Value of `key` in a `k=v;k=v` metadata string.
pub fn meta_field<'a>(meta: &'a str, key: &str) -> Option<&'a str> {
    meta.split(';').find_map(|kv| kv.split_once('=').filter(|(k, _)| *k == key).map(|(_, v)| v))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Classifier {
    arch: Architecture,
    encoder: Network,
    head: Network,
    /// Encoder parameters followed by head parameters.
    pub params: Vec<f32>,
    /// Free-form `k=v` pairs carried into checkpoints (e.g. soup members).
    pub extra_meta: String,
}

/// Per-frame embeddings and pooled features of one clip.
#[derive(Clone, Debug, PartialEq)]
pub struct ClipFeatures {
    pub embeddings: Vec<Vec<f32>>,
    pub pooled: Vec<f32>,
}

impl Classifier {
    pub fn new(arch: Architecture) -> Result<Classifier> {
        let [c1, c2, c3] = arch.channels;
        let s = FRAME_SIZE;
        let conv = |i, o, h| Layer::Conv {
            in_ch: i,
            out_ch: o,
            kernel: 3,
            height: h,
            width: h,
        };
        let pool = |c, h| Layer::AvgPool {
            channels: c,
            height: h,
            width: h,
        };
        let encoder = Network::new(
            "encoder",
            FRAME_PIXELS,
            vec![
                conv(1, c1, s),
                Layer::Relu,
                pool(c1, s),
                conv(c1, c2, s / 2),
                Layer::Relu,
                pool(c2, s / 2),
                conv(c2, c3, s / 4),
                Layer::Relu,
                pool(c3, s / 4),
                Layer::Dense {
                    inputs: c3 * (s / 8) * (s / 8),
                    outputs: arch.embed,
                },
                Layer::Relu,
            ],
        )?;
        let head = Network::mlp("head", 2 * arch.embed, &arch.head_hidden, CLASSES, Layer::Relu)?;
        let params = vec![0.0; encoder.param_len() + head.param_len()];
        Ok(Classifier {
            arch,
            encoder,
            head,
            params,
            extra_meta: String::new(),
        })
    }

    pub fn init<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Result<Classifier> {
        let mut c = Classifier::new(arch)?;
        let mut p: Vec<f32> = c.encoder.init(rng);
        p.extend(c.head.init::<f32, _>(rng));
        c.params = p;
        Ok(c)
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn mode(&self) -> LabelMode {
        self.arch.mode
    }

    pub fn encoder(&self) -> &Network {
        &self.encoder
    }

    pub fn head(&self) -> &Network {
        &self.head
    }

    pub fn encoder_len(&self) -> usize {
        self.encoder.param_len()
    }

    pub fn encoder_params(&self) -> &[f32] {
        &self.params[..self.encoder.param_len()]
    }

    pub fn head_params(&self) -> &[f32] {
        &self.params[self.encoder.param_len()..]
    }

    pub fn manifest(&self) -> Vec<ManifestEntry> {
        let mut m = self.encoder.manifest();
        m.extend(self.head.manifest());
        m
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut meta = self.arch.meta();
        if !self.extra_meta.is_empty() {
            meta.push(';');
            meta.push_str(&self.extra_meta);
        }
        Checkpoint::new(self.manifest(), self.params.clone(), meta).expect("manifest matches parameters")
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Classifier> {
        let arch = Architecture::from_meta(&ckpt.meta)?;
        let mut c = Classifier::new(arch)?;
        if ckpt.manifest != c.manifest() {
            return Err(Error::ManifestMismatch("checkpoint layers do not match the classifier".into()));
        }
        c.params = ckpt.values.clone();
        let base = c.arch.meta();
        c.extra_meta = ckpt.meta.strip_prefix(&base).unwrap_or("").trim_start_matches(';').to_string();
        Ok(c)
    }

    /// Embedding of one 64x64 frame.
    pub fn embed_frame(&self, pixels: &[f32]) -> Result<Vec<f32>> {
        self.encoder.forward(self.encoder_params(), pixels)
    }

    /// Mean embedding followed by mean absolute frame-to-frame change.
    pub fn pool<S: Real>(embeddings: &[Vec<S>]) -> Vec<S> {
        let n = embeddings.len();
        let d = embeddings[0].len();
        let mut out = vec![S::zero(); 2 * d];
        for j in 0..d {
            let mean: f64 = embeddings.iter().map(|e| e[j].f64()).sum::<f64>() / n as f64;
            let change: f64 = embeddings.windows(2).map(|w| (w[1][j] - w[0][j]).abs().f64()).sum::<f64>() / (n - 1) as f64;
            out[j] = S::of(mean);
            out[d + j] = S::of(change);
        }
        out
    }

    /// Gradient of [`Classifier::pool`] pushed back to each embedding.
    fn unpool<S: Real>(embeddings: &[Vec<S>], d_pooled: &[S]) -> Vec<Vec<S>> {
        let n = embeddings.len();
        let d = embeddings[0].len();
        let mut grads = vec![vec![S::zero(); d]; n];
        for j in 0..d {
            let gm = d_pooled[j] / S::of(n as f64);
            let gc = d_pooled[d + j] / S::of((n - 1) as f64);
            for g in grads.iter_mut() {
                g[j] += gm;
            }
            for i in 0..n - 1 {
                let diff = embeddings[i + 1][j] - embeddings[i][j];
                let s = if diff > S::zero() {
                    gc
                } else if diff < S::zero() {
                    -gc
                } else {
                    S::zero()
                };
                grads[i + 1][j] += s;
                grads[i][j] -= s;
            }
        }
        grads
    }

    pub fn logits_from_embeddings(&self, embeddings: &[Vec<f32>]) -> Result<Vec<f32>> {
        if embeddings.len() != CLIP_LEN {
            return Err(Error::Shape(format!("{} embeddings for an {CLIP_LEN}-frame clip", embeddings.len())));
        }
        self.head.forward(self.head_params(), &Self::pool(embeddings))
    }

    /// Class scores: softmax in curated mode, independent sigmoids otherwise.
    pub fn scores_from_logits(&self, logits: &[f32]) -> Vec<f32> {
        match self.arch.mode {
            LabelMode::Curated => softmax(logits),
            LabelMode::MultiLabel => logits.iter().map(|&z| (1.0 / (1.0 + (-f64::from(z)).exp())) as f32).collect(),
        }
    }

    pub fn scores_from_embeddings(&self, embeddings: &[Vec<f32>]) -> Result<Vec<f32>> {
        Ok(self.scores_from_logits(&self.logits_from_embeddings(embeddings)?))
    }

    /// Frame-major pixels (8 x 4096).
    pub fn features(&self, pixels: &[f32]) -> Result<ClipFeatures> {
        if pixels.len() != CLIP_LEN * FRAME_PIXELS {
            return Err(Error::Shape(format!("clip needs {} pixels, got {}", CLIP_LEN * FRAME_PIXELS, pixels.len())));
        }
        let embeddings = pixels
            .chunks_exact(FRAME_PIXELS)
            .map(|f| self.embed_frame(f))
            .collect::<Result<Vec<_>>>()?;
        let pooled = Self::pool(&embeddings);
        Ok(ClipFeatures { embeddings, pooled })
    }

    pub fn scores_pixels(&self, pixels: &[f32]) -> Result<Vec<f32>> {
        let f = self.features(pixels)?;
        let logits = self.head.forward(self.head_params(), &f.pooled)?;
        Ok(self.scores_from_logits(&logits))
    }

    pub fn probs(&self, clip: &Clip) -> Result<Vec<f32>> {
        let pixels: Vec<f32> = clip.frames().iter().flat_map(|f| f.pixels.iter().copied()).collect();
        self.scores_pixels(&pixels)
    }

    /// Loss and parameter gradient (added into `grads`) for one clip
    /// against a soft target. `train_encoder = false` leaves encoder
    /// gradients untouched.
    pub fn loss_and_grad(&self, pixels: &[f32], target: &[f32], grads: &mut [f32], train_encoder: bool) -> Result<f64> {
        self.loss_and_grad_at(&self.params, pixels, target, grads, train_encoder)
    }

    /// [`Classifier::loss_and_grad`] at an explicit parameter vector of any
    /// precision.
    pub fn loss_and_grad_at<S: Real>(
        &self,
        params: &[S],
        pixels: &[S],
        target: &[S],
        grads: &mut [S],
        train_encoder: bool,
    ) -> Result<f64> {
        if params.len() != self.params.len() || grads.len() != self.params.len() {
            return Err(Error::Shape(format!("{} parameters expected", self.params.len())));
        }
        if pixels.len() != CLIP_LEN * FRAME_PIXELS {
            return Err(Error::Shape(format!("clip needs {} pixels, got {}", CLIP_LEN * FRAME_PIXELS, pixels.len())));
        }
        let ne = self.encoder.param_len();
        let (enc, head) = params.split_at(ne);
        let mut tapes = Vec::with_capacity(CLIP_LEN);
        let mut embeddings = Vec::with_capacity(CLIP_LEN);
        for frame in pixels.chunks_exact(FRAME_PIXELS) {
            let (e, tape) = self.encoder.forward_taped(enc, frame)?;
            embeddings.push(e);
            tapes.push(tape);
        }
        let pooled = Self::pool(&embeddings);
        let (logits, mut head_tape) = self.head.forward_taped(head, &pooled)?;
        let (loss, dlogits) = match self.arch.mode {
            LabelMode::Curated => softmax_cross_entropy(&logits, target)?,
            LabelMode::MultiLabel => binary_cross_entropy(&logits, target)?,
        };
        let (genc, ghead) = grads.split_at_mut(ne);
        let dpooled = head_tape.backward(&self.head, head, &dlogits, ghead)?;
        if train_encoder {
            let demb = Self::unpool(&embeddings, &dpooled);
            for (mut tape, de) in tapes.into_iter().zip(demb) {
                tape.backward(&self.encoder, enc, &de, genc)?;
            }
        }
        Ok(loss)
    }
}

/// Index of the largest score, first on ties.
pub fn argmax(v: &[f32]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Scores a checkpoint on one clip.
pub fn classifier_forward(ckpt: &Checkpoint, clip: &Clip) -> Result<Vec<f32>> {
    Classifier::from_checkpoint(ckpt)?.probs(clip)
}

#[cfg(test)]
mod tests;
