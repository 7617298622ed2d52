use super::gae::{compute_gae, normalize_advantages};
use super::net::{gaussian_log_prob, symmetry_term, Policy, ACTION_SCALE, LOG_STD_MAX, LOG_STD_MIN};
use super::rollout::RolloutBatch;
use crate::error::{Error, Result};
use crate::sim::{ACTION_LEN, OBS_LEN};
use crate::tensor::OptState;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

/// Samples per gradient work unit.
const CHUNK: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub sym_weight: f64,
    pub max_grad_norm: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub target_kl: f64,
    pub epochs: usize,
    pub minibatches: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            value_coef: 0.5,
            entropy_coef: 0.005,
            sym_weight: 0.1,
            max_grad_norm: 1.0,
            lr: 3e-4,
            weight_decay: 0.0,
            target_kl: 0.1,
            epochs: 4,
            minibatches: 4,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.gamma) || !unit(self.lambda) || !(self.clip > 0.0) {
            return Err(Error::Config("ppo: gamma and lambda in [0, 1], clip > 0 required".into()));
        }
        if self.epochs == 0 || self.minibatches == 0 || !(self.lr > 0.0) || !(self.max_grad_norm > 0.0) {
            return Err(Error::Config("ppo: epochs, minibatches, lr and max grad norm must be positive".into()));
        }
        if self.value_coef < 0.0 || self.entropy_coef < 0.0 || self.sym_weight < 0.0 || self.weight_decay < 0.0 {
            return Err(Error::Config("ppo: loss weights must be non-negative".into()));
        }
        Ok(())
    }
}

/// One training example for the update.
#[derive(Clone, Debug, PartialEq)]
pub struct PpoSample {
    pub obs: [f32; OBS_LEN],
    pub action: [f64; ACTION_LEN],
    pub log_prob: f64,
    pub advantage: f64,
    pub ret: f64,
}

/// Flattens a batch in environment order, with advantages normalised over
/// the whole batch.
pub fn prepare_samples(batch: &RolloutBatch, cfg: &PpoConfig) -> Result<Vec<PpoSample>> {
    let mut adv = Vec::with_capacity(batch.steps());
    let mut ret = Vec::with_capacity(batch.steps());
    for e in &batch.envs {
        let (a, r) = compute_gae(&e.traj, cfg.gamma, cfg.lambda)?;
        adv.extend(a);
        ret.extend(r);
    }
    normalize_advantages(&mut adv);
    let mut out = Vec::with_capacity(adv.len());
    let mut i = 0;
    for e in &batch.envs {
        for t in 0..e.obs.len() {
            out.push(PpoSample {
                obs: e.obs[t],
                action: e.actions[t],
                log_prob: e.log_probs[t],
                advantage: adv[i],
                ret: ret[i],
            });
            i += 1;
        }
    }
    Ok(out)
}

/// Per-sample loss terms, before weighting.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossTerms {
    /// Clipped surrogate objective (to be maximised).
    pub surrogate: f64,
    pub value_se: f64,
    pub symmetry: f64,
    /// `(r − 1) − ln r`, a non-negative KL estimate.
    pub kl: f64,
    pub clipped: bool,
}

impl std::ops::AddAssign for LossTerms {
    fn add_assign(&mut self, o: LossTerms) {
        self.surrogate += o.surrogate;
        self.value_se += o.value_se;
        self.symmetry += o.symmetry;
        self.kl += o.kl;
    }
}

/// `min(r A, clip(r, 1 − ε, 1 + ε) A)` and whether the unclipped branch is
/// the active one.
pub fn clipped_surrogate(ratio: f64, adv: f64, eps: f64) -> (f64, bool) {
    let unclipped = ratio * adv;
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
    if unclipped <= clipped {
        (unclipped, true)
    } else {
        (clipped, false)
    }
}

/// Loss terms of one sample; when `grads` is given, adds the gradient of
/// `(−surrogate + c_v·value_se + w_sym·symmetry) · scale` into it.
pub fn sample_terms(
    policy: &Policy,
    s: &PpoSample,
    cfg: &PpoConfig,
    scale: f32,
    grads: Option<&mut [f32]>,
) -> Result<LossTerms> {
    let na = policy.actor_len();
    let actor = policy.actor();
    let (out, actor_tape) = actor.forward_taped(policy.actor_params(), &s.obs)?;
    let ls = policy.log_std();
    let mean: Vec<f64> = (0..ACTION_LEN)
        .map(|k| policy.q_default[k] + ACTION_SCALE * f64::from(out[k]))
        .collect();
    let logp = gaussian_log_prob(&s.action, &mean, &ls);
    let ratio = (logp - s.log_prob).exp();
    let (surrogate, active) = clipped_surrogate(ratio, s.advantage, cfg.clip);
    let (value_out, critic_tape) = policy.critic().forward_taped(policy.critic_params(), &s.obs)?;
    let v = f64::from(value_out[0]);
    let value_se = (v - s.ret).powi(2);
    let mut terms = LossTerms {
        surrogate,
        value_se,
        symmetry: 0.0,
        kl: (ratio - 1.0) - (logp - s.log_prob),
        clipped: !active,
    };
    let Some(grads) = grads else {
        terms.symmetry = symmetry_term(actor, policy.actor_params(), &s.obs, 0.0, None)?;
        return Ok(terms);
    };
    let scale = f64::from(scale);
    // d(−surrogate)/d logp on the active branch
    let dlogp = if active { -ratio * s.advantage } else { 0.0 };
    let (ga, rest) = grads.split_at_mut(na);
    let (gls, gc) = rest.split_at_mut(ACTION_LEN);
    let ls_raw = &policy.params[policy.log_std_range()];
    let mut dout = vec![0.0f32; ACTION_LEN];
    for k in 0..ACTION_LEN {
        let sigma = ls[k].exp();
        let z = (s.action[k] - mean[k]) / sigma;
        dout[k] = (scale * dlogp * ACTION_SCALE * z / sigma) as f32;
        let raw = f64::from(ls_raw[k]);
        if (LOG_STD_MIN..=LOG_STD_MAX).contains(&raw) {
            gls[k] += (scale * dlogp * (z * z - 1.0)) as f32;
        }
    }
    let mut tape = actor_tape;
    tape.backward(actor, policy.actor_params(), &dout, ga)?;
    if cfg.sym_weight > 0.0 {
        let w = (scale * cfg.sym_weight) as f32;
        terms.symmetry = symmetry_term(actor, policy.actor_params(), &s.obs, w, Some(ga))?;
    } else {
        terms.symmetry = symmetry_term(actor, policy.actor_params(), &s.obs, 0.0, None)?;
    }
    let dv = (scale * cfg.value_coef * 2.0 * (v - s.ret)) as f32;
    let mut ct = critic_tape;
    ct.backward(policy.critic(), policy.critic_params(), &[dv], gc)?;
    Ok(terms)
}

/// Mean loss terms over a set of samples.
pub fn evaluate_terms(policy: &Policy, samples: &[PpoSample], cfg: &PpoConfig) -> Result<LossTerms> {
    let parts: Vec<LossTerms> = samples
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = LossTerms::default();
            for s in chunk {
                acc += sample_terms(policy, s, cfg, 0.0, None)?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = LossTerms::default();
    for p in parts {
        total += p;
    }
    let n = samples.len().max(1) as f64;
    Ok(LossTerms {
        surrogate: total.surrogate / n,
        value_se: total.value_se / n,
        symmetry: total.symmetry / n,
        kl: total.kl / n,
        clipped: false,
    })
}

/// Mean terms and summed gradient over a minibatch, with a deterministic
/// chunked reduction.
fn minibatch_grad(policy: &Policy, samples: &[&PpoSample], cfg: &PpoConfig) -> Result<(LossTerms, usize, Vec<f32>)> {
    let scale = 1.0 / samples.len() as f32;
    let parts: Vec<(LossTerms, usize, Vec<f32>)> = samples
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = vec![0.0f32; policy.params.len()];
            let mut acc = LossTerms::default();
            let mut clipped = 0;
            for s in chunk {
                let t = sample_terms(policy, s, cfg, scale, Some(&mut g))?;
                clipped += usize::from(t.clipped);
                acc += t;
            }
            Ok((acc, clipped, g))
        })
        .collect::<Result<_>>()?;
    let mut grad = vec![0.0f32; policy.params.len()];
    let mut terms = LossTerms::default();
    let mut clipped = 0;
    for (t, c, g) in parts {
        terms += t;
        clipped += c;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    // entropy bonus acts only on the log-std entries
    let ls_raw = &policy.params[policy.log_std_range()];
    for (k, i) in policy.log_std_range().enumerate() {
        if (LOG_STD_MIN..=LOG_STD_MAX).contains(&f64::from(ls_raw[k])) {
            grad[i] -= cfg.entropy_coef as f32;
        }
    }
    let n = samples.len() as f64;
    terms.surrogate /= n;
    terms.value_se /= n;
    terms.symmetry /= n;
    terms.kl /= n;
    Ok((terms, clipped, grad))
}

/// Rescales `grad` so its Euclidean norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_grad_norm(grad: &mut [f32], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|&g| f64::from(g) * f64::from(g)).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = (max_norm / norm) as f32;
        for g in grad {
            *g *= s;
        }
    }
    norm
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub surrogate: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub symmetry: f64,
    pub kl: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
    pub epochs_run: usize,
    pub early_stop: bool,
    pub steps: usize,
}

/// Clipped-surrogate epochs over shuffled minibatches. Stops before any
/// step whose minibatch KL estimate exceeds the target.
pub fn ppo_update<R: Rng + ?Sized>(
    policy: &mut Policy,
    opt: &mut OptState,
    samples: &[PpoSample],
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<UpdateStats> {
    cfg.validate()?;
    if samples.is_empty() {
        return Ok(UpdateStats::default());
    }
    let mut stats = UpdateStats::default();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mb = samples.len().div_ceil(cfg.minibatches);
    let mut seen = 0usize;
    let mut clipped = 0usize;
    'epochs: for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for idx in order.chunks(mb) {
            let batch: Vec<&PpoSample> = idx.iter().map(|&i| &samples[i]).collect();
            let (terms, c, mut grad) = minibatch_grad(policy, &batch, cfg)?;
            stats.kl = terms.kl;
            if terms.kl > cfg.target_kl {
                stats.early_stop = true;
                break 'epochs;
            }
            stats.surrogate = terms.surrogate;
            stats.value_loss = terms.value_se;
            stats.symmetry = terms.symmetry;
            clipped += c;
            seen += batch.len();
            stats.grad_norm = clip_grad_norm(&mut grad, cfg.max_grad_norm);
            opt.step(&mut policy.params, &grad, cfg.lr).map_err(|e| Error::TrainingDiverged {
                context: format!("policy update: {e}"),
            })?;
            policy.clamp_log_std();
            stats.steps += 1;
        }
        stats.epochs_run += 1;
    }
    stats.entropy = policy.entropy();
    stats.clip_fraction = if seen == 0 { 0.0 } else { clipped as f64 / seen as f64 };
    Ok(stats)
}
