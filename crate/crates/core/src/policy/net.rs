use crate::error::{Error, Result};
use crate::sim::{sym_action, sym_obs, RobotConfig, ACTION_LEN, OBS_LEN};
use crate::tensor::{Checkpoint, Layer, ManifestEntry, Network, Real, Tape};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

pub const LOG_STD_MIN: f64 = -4.0;
pub const LOG_STD_MAX: f64 = 1.0;
/// Radians of joint offset per unit of network output.
pub const ACTION_SCALE: f64 = 0.25;

/// Actor and critic widths and the initial exploration noise.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyConfig {
    pub hidden: Vec<usize>,
    pub init_std: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            hidden: vec![256, 128, 64],
            init_std: 0.1,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config("policy hidden widths must be non-empty and positive".into()));
        }
        let ls = self.init_std.ln();
        if !(LOG_STD_MIN..=LOG_STD_MAX).contains(&ls) {
            return Err(Error::Config(format!("initial std {} outside the log-std clamp", self.init_std)));
        }
        Ok(())
    }
}

/// Gaussian actor with a global log-std vector, plus a separate critic.
///
/// Parameters are one flat vector: actor weights, then log-std, then critic.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    hidden: Vec<usize>,
    actor: Network,
    critic: Network,
    pub params: Vec<f32>,
    pub q_default: [f64; ACTION_LEN],
    pub q_min: [f64; ACTION_LEN],
    pub q_max: [f64; ACTION_LEN],
}

/// A drawn action: the clamped joint targets sent to the robot and the raw
/// Gaussian sample whose log-density is recorded.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionSample {
    pub target: [f64; ACTION_LEN],
    pub raw: [f64; ACTION_LEN],
    pub log_prob: f64,
}

impl Policy {
    fn networks(hidden: &[usize]) -> Result<(Network, Network)> {
        Ok((
            Network::mlp("actor", OBS_LEN, hidden, ACTION_LEN, Layer::Elu)?,
            Network::mlp("critic", OBS_LEN, hidden, 1, Layer::Elu)?,
        ))
    }

    pub fn init<R: Rng + ?Sized>(cfg: &PolicyConfig, robot: &RobotConfig, rng: &mut R) -> Result<Policy> {
        cfg.validate()?;
        let (actor, critic) = Self::networks(&cfg.hidden)?;
        let mut params: Vec<f32> = actor.init(rng);
        // a small output layer keeps the initial mean near the default pose
        let last = actor.layer_params(actor.layers().len() - 1);
        for p in &mut params[last] {
            *p *= 0.01;
        }
        params.extend(std::iter::repeat_n(cfg.init_std.ln() as f32, ACTION_LEN));
        params.extend(critic.init::<f32, _>(rng));
        Ok(Policy {
            hidden: cfg.hidden.clone(),
            actor,
            critic,
            params,
            q_default: robot.q_default,
            q_min: robot.q_min,
            q_max: robot.q_max,
        })
    }

    pub fn hidden(&self) -> &[usize] {
        &self.hidden
    }

    pub fn actor(&self) -> &Network {
        &self.actor
    }

    pub fn critic(&self) -> &Network {
        &self.critic
    }

    pub fn actor_len(&self) -> usize {
        self.actor.param_len()
    }

    /// Index range of the log-std entries in [`Policy::params`].
    pub fn log_std_range(&self) -> std::ops::Range<usize> {
        self.actor_len()..self.actor_len() + ACTION_LEN
    }

    pub fn critic_range(&self) -> std::ops::Range<usize> {
        self.actor_len() + ACTION_LEN..self.params.len()
    }

    pub fn actor_params(&self) -> &[f32] {
        &self.params[..self.actor_len()]
    }

    pub fn critic_params(&self) -> &[f32] {
        &self.params[self.critic_range()]
    }

    /// Effective log-std after clamping.
    pub fn log_std(&self) -> [f64; ACTION_LEN] {
        let r = self.log_std_range();
        std::array::from_fn(|k| f64::from(self.params[r.start + k]).clamp(LOG_STD_MIN, LOG_STD_MAX))
    }

    /// Keeps the stored log-std inside its clamp range.
    pub fn clamp_log_std(&mut self) {
        let r = self.log_std_range();
        for p in &mut self.params[r] {
            *p = p.clamp(LOG_STD_MIN as f32, LOG_STD_MAX as f32);
        }
    }

    /// Raw actor output (offsets in units of [`ACTION_SCALE`]).
    pub fn actor_out(&self, obs: &[f32]) -> Result<Vec<f32>> {
        self.actor.forward(self.actor_params(), obs)
    }

    /// Mean joint targets before clamping.
    pub fn mean_action(&self, obs: &[f32]) -> Result<[f64; ACTION_LEN]> {
        let out = self.actor_out(obs)?;
        Ok(std::array::from_fn(|k| self.q_default[k] + ACTION_SCALE * f64::from(out[k])))
    }

    pub fn clamp_target(&self, a: &[f64; ACTION_LEN]) -> [f64; ACTION_LEN] {
        std::array::from_fn(|k| a[k].clamp(self.q_min[k], self.q_max[k]))
    }

    /// Deterministic action: clamped mean.
    pub fn act_deterministic(&self, obs: &[f32]) -> Result<[f64; ACTION_LEN]> {
        Ok(self.clamp_target(&self.mean_action(obs)?))
    }

    pub fn sample_action<R: Rng + ?Sized>(&self, obs: &[f32], rng: &mut R) -> Result<ActionSample> {
        let mean = self.mean_action(obs)?;
        let ls = self.log_std();
        let raw: [f64; ACTION_LEN] = std::array::from_fn(|k| {
            let n: f64 = StandardNormal.sample(rng);
            mean[k] + ls[k].exp() * n
        });
        Ok(ActionSample {
            target: self.clamp_target(&raw),
            log_prob: gaussian_log_prob(&raw, &mean, &ls),
            raw,
        })
    }

    pub fn value(&self, obs: &[f32]) -> Result<f32> {
        Ok(self.critic.forward(self.critic_params(), obs)?[0])
    }

    /// Entropy of the action distribution (independent of the observation).
    pub fn entropy(&self) -> f64 {
        self.log_std().iter().map(|ls| 0.5 + 0.5 * (2.0 * PI).ln() + ls).sum()
    }

    pub fn manifest(&self) -> Vec<ManifestEntry> {
        let mut m = self.actor.manifest();
        m.push(ManifestEntry {
            name: "actor.log_std".into(),
            shape: vec![ACTION_LEN],
        });
        m.extend(self.critic.manifest());
        m
    }

    fn meta(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",");
        format!(
            "kind=policy;hidden={};q_default={};q_min={};q_max={}",
            self.hidden.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(","),
            join(&self.q_default),
            join(&self.q_min),
            join(&self.q_max),
        )
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::new(self.manifest(), self.params.clone(), self.meta()).expect("manifest matches parameters")
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Policy> {
        let field = |key: &str| {
            crate::classifier::meta_field(&ckpt.meta, key)
                .ok_or_else(|| Error::ManifestMismatch(format!("policy checkpoint lacks `{key}`")))
        };
        if field("kind")? != "policy" {
            return Err(Error::ManifestMismatch("not a policy checkpoint".into()));
        }
        let bad = |key: &str| Error::ManifestMismatch(format!("unreadable `{key}` in policy checkpoint"));
        let hidden: Vec<usize> = field("hidden")?
            .split(',')
            .map(|s| s.parse().map_err(|_| bad("hidden")))
            .collect::<Result<_>>()?;
        let joints = |key: &str| -> Result<[f64; ACTION_LEN]> {
            let v: Vec<f64> = field(key)?
                .split(',')
                .map(|s| s.parse().map_err(|_| bad(key)))
                .collect::<Result<_>>()?;
            v.try_into().map_err(|_| bad(key))
        };
        let (actor, critic) = Self::networks(&hidden)?;
        let policy = Policy {
            hidden,
            actor,
            critic,
            params: ckpt.values.clone(),
            q_default: joints("q_default")?,
            q_min: joints("q_min")?,
            q_max: joints("q_max")?,
        };
        if policy.manifest() != ckpt.manifest {
            return Err(Error::ManifestMismatch("checkpoint layers do not match the policy".into()));
        }
        Ok(policy)
    }
}

/// Log-density of a diagonal Gaussian.
pub fn gaussian_log_prob(x: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    x.iter()
        .zip(mean)
        .zip(log_std)
        .map(|((&x, &m), &ls)| {
            let z = (x - m) / ls.exp();
            -0.5 * z * z - ls - 0.5 * (2.0 * PI).ln()
        })
        .sum()
}

/// `‖μ(s) − sym(μ(sym(s)))‖²` for one observation, on raw actor outputs,
/// with the gradient added into `grads` (an actor-sized slice) scaled by
/// `weight`.
pub fn symmetry_term<S: Real>(
    actor: &Network,
    params: &[S],
    obs: &[S],
    weight: S,
    grads: Option<&mut [S]>,
) -> Result<f64> {
    let (mu, tape_a) = actor.forward_taped(params, obs)?;
    let mirrored_obs = sym_obs(obs);
    let (mu_m, tape_b) = actor.forward_taped(params, &mirrored_obs)?;
    let back = sym_action(&mu_m);
    let diff: Vec<S> = mu.iter().zip(&back).map(|(&a, &b)| a - b).collect();
    let loss: f64 = diff.iter().map(|d| d.f64() * d.f64()).sum();
    if let Some(grads) = grads {
        let two = S::of(2.0) * weight;
        let da: Vec<S> = diff.iter().map(|&d| two * d).collect();
        // d/dμ_m of −2 d·sym(μ_m) is −2 sym(d); sym is its own inverse
        let db: Vec<S> = sym_action(&da).into_iter().map(|v| -v).collect();
        backward(tape_a, actor, params, &da, grads)?;
        backward(tape_b, actor, params, &db, grads)?;
    }
    Ok(loss)
}

fn backward<S: Real>(mut tape: Tape<S>, net: &Network, params: &[S], up: &[S], grads: &mut [S]) -> Result<()> {
    tape.backward(net, params, up, grads).map(|_| ())
}

/// Mean symmetry loss over a batch of observations.
pub fn symmetry_loss(policy: &Policy, obs: &[Vec<f32>]) -> Result<f64> {
    if obs.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for o in obs {
        total += symmetry_term(&policy.actor, policy.actor_params(), o, 1.0, None)?;
    }
    Ok(total / obs.len() as f64)
}
