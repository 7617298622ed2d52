use super::metrics::{EvalConfig, TransferConfig};
use crate::camera::{CameraConfig, CameraPreset};
use crate::classifier::{ClassifierConfig, SoupConfig};
use crate::corpus::LabelMode;
use crate::error::{Error, Result};
use crate::policy::RlConfig;
use crate::sim::ConstraintGroup;
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

/// Named experiment variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Preset {
    Rlwav,
    NoSoup,
    NoCurating,
    NoSym,
    Update8,
    Cam1,
    Cam2,
    Cam3,
    Cam4,
    NoAirtime,
    NoOrientation,
    Frac50,
    Frac25,
    Frac12_5,
}

impl Preset {
    pub const ALL: [Preset; 14] = [
        Preset::Rlwav,
        Preset::NoSoup,
        Preset::NoCurating,
        Preset::NoSym,
        Preset::Update8,
        Preset::Cam1,
        Preset::Cam2,
        Preset::Cam3,
        Preset::Cam4,
        Preset::NoAirtime,
        Preset::NoOrientation,
        Preset::Frac50,
        Preset::Frac25,
        Preset::Frac12_5,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Rlwav => "rlwav",
            Preset::NoSoup => "no_soup",
            Preset::NoCurating => "no_curating",
            Preset::NoSym => "no_sym",
            Preset::Update8 => "update8",
            Preset::Cam1 => "cam1",
            Preset::Cam2 => "cam2",
            Preset::Cam3 => "cam3",
            Preset::Cam4 => "cam4",
            Preset::NoAirtime => "no_airtime",
            Preset::NoOrientation => "no_orientation",
            Preset::Frac50 => "frac50",
            Preset::Frac25 => "frac25",
            Preset::Frac12_5 => "frac12_5",
        }
    }

    /// The overrides this preset applies on top of the defaults.
    pub fn overrides(self) -> &'static [(&'static str, &'static str)] {
        match self {
            Preset::Rlwav => &[],
            Preset::NoSoup => &[("soup.enabled", "false")],
            Preset::NoCurating => &[("corpus.mode", "multilabel"), ("classifier.mode", "multilabel")],
            Preset::NoSym => &[("rl.sym_weight", "0")],
            Preset::Update8 => &[("rl.render_interval", "8")],
            Preset::Cam1 => &[("camera.preset", "cam1")],
            Preset::Cam2 => &[("camera.preset", "cam2")],
            Preset::Cam3 => &[("camera.preset", "cam3")],
            Preset::Cam4 => &[("camera.preset", "cam4")],
            Preset::NoAirtime => &[("cat.disabled", "foot_air_time")],
            Preset::NoOrientation => &[("cat.disabled", "pitch")],
            Preset::Frac50 => &[("corpus.fraction", "0.5")],
            Preset::Frac25 => &[("corpus.fraction", "0.25")],
            Preset::Frac12_5 => &[("corpus.fraction", "0.125")],
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown preset '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusConfig {
    pub per_class: usize,
    pub mode: LabelMode,
    pub seed: u64,
    /// Share of the training split kept; validation is never reduced.
    pub fraction: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            per_class: 2000,
            mode: LabelMode::Curated,
            seed: 0,
            fraction: 1.0,
        }
    }
}

/// Everything one experiment needs, fully resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub seeds: Vec<u64>,
    pub corpus: CorpusConfig,
    pub classifier: ClassifierConfig,
    pub soup_enabled: bool,
    /// `soup.base` is ignored; the classifier section is used instead.
    pub soup: SoupConfig,
    pub camera_preset: CameraPreset,
    pub rl: RlConfig,
    pub eval: EvalConfig,
    pub transfer: TransferConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            preset: Preset::Rlwav,
            seeds: vec![0, 1, 2, 3],
            corpus: CorpusConfig::default(),
            classifier: ClassifierConfig::default(),
            soup_enabled: true,
            soup: SoupConfig::default(),
            camera_preset: CameraPreset::Base,
            rl: RlConfig::default(),
            eval: EvalConfig::default(),
            transfer: TransferConfig::default(),
        }
    }
}

/// Text form of a config value.
trait Value: Sized {
    fn parse(s: &str) -> Result<Self, String>;
    fn show(&self) -> String;
}

macro_rules! plain_value {
    ($($t:ty),*) => {$(
        impl Value for $t {
            fn parse(s: &str) -> Result<Self, String> {
                s.parse().map_err(|e| format!("{e}"))
            }
            fn show(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

plain_value!(f64, usize, u64, bool, LabelMode, CameraPreset, Preset);

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty())
}

impl<T: Value> Value for Vec<T> {
    fn parse(s: &str) -> Result<Self, String> {
        split_list(s).map(T::parse).collect()
    }
    fn show(&self) -> String {
        self.iter().map(Value::show).collect::<Vec<_>>().join(",")
    }
}

impl Value for [usize; 3] {
    fn parse(s: &str) -> Result<Self, String> {
        let v: Vec<usize> = Value::parse(s)?;
        v.try_into().map_err(|v: Vec<usize>| format!("expected 3 values, got {}", v.len()))
    }
    fn show(&self) -> String {
        self.to_vec().show()
    }
}

impl Value for ConstraintGroup {
    fn parse(s: &str) -> Result<Self, String> {
        ConstraintGroup::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| format!("unknown constraint group '{s}'"))
    }
    fn show(&self) -> String {
        self.name().to_string()
    }
}

macro_rules! schema {
    ($($key:literal => $($field:ident).+;)*) => {
        /// Every settable key, in snapshot order.
        pub const KEYS: &[&str] = &[$($key),*];

        impl ExperimentConfig {
            fn set_field(&mut self, key: &str, value: &str) -> Result<bool> {
                match key {
                    $($key => {
                        self.$($field).+ = Value::parse(value)
                            .map_err(|e| Error::Config(format!("{key} = {value}: {e}")))?;
                    })*
                    _ => return Ok(false),
                }
                Ok(true)
            }

            fn field_entries(&self) -> Vec<(&'static str, String)> {
                vec![$(($key, self.$($field).+.show())),*]
            }
        }
    };
}

schema! {
    "experiment.seeds" => seeds;
    "corpus.per_class" => corpus.per_class;
    "corpus.mode" => corpus.mode;
    "corpus.seed" => corpus.seed;
    "corpus.fraction" => corpus.fraction;
    "classifier.channels" => classifier.channels;
    "classifier.embed" => classifier.embed;
    "classifier.head_hidden" => classifier.head_hidden;
    "classifier.batch_size" => classifier.batch_size;
    "classifier.lr" => classifier.lr;
    "classifier.weight_decay" => classifier.weight_decay;
    "classifier.epochs" => classifier.epochs;
    "classifier.warmup_frac" => classifier.warmup_frac;
    "classifier.aug_prob" => classifier.aug_prob;
    "classifier.mixup_alpha" => classifier.mixup_alpha;
    "classifier.mode" => classifier.mode;
    "classifier.seed" => classifier.seed;
    "soup.enabled" => soup_enabled;
    "soup.warm_epochs" => soup.warm_epochs;
    "soup.head_epochs" => soup.head_epochs;
    "soup.weight_decays" => soup.weight_decays;
    "soup.member_epochs" => soup.member_epochs;
    "soup.finetune_lr_scale" => soup.finetune_lr_scale;
    "camera.offset" => rl.rollout.camera.offset;
    "camera.height" => rl.rollout.camera.height;
    "camera.zoom" => rl.rollout.camera.zoom;
    "camera.tick_spacing" => rl.rollout.camera.tick_spacing;
    "rl.envs" => rl.envs;
    "rl.iterations" => rl.iterations;
    "rl.horizon" => rl.rollout.horizon;
    "rl.render_interval" => rl.rollout.render_interval;
    "rl.reward_polyak" => rl.reward_polyak;
    "rl.hidden" => rl.policy.hidden;
    "rl.init_std" => rl.policy.init_std;
    "rl.gamma" => rl.ppo.gamma;
    "rl.lambda" => rl.ppo.lambda;
    "rl.clip" => rl.ppo.clip;
    "rl.value_coef" => rl.ppo.value_coef;
    "rl.entropy_coef" => rl.ppo.entropy_coef;
    "rl.sym_weight" => rl.ppo.sym_weight;
    "rl.max_grad_norm" => rl.ppo.max_grad_norm;
    "rl.lr" => rl.ppo.lr;
    "rl.weight_decay" => rl.ppo.weight_decay;
    "rl.target_kl" => rl.ppo.target_kl;
    "rl.epochs" => rl.ppo.epochs;
    "rl.minibatches" => rl.ppo.minibatches;
    "cat.soft_delta_max" => rl.cat.soft_delta_max;
    "cat.air_time_delta_max" => rl.cat.air_time_delta_max;
    "cat.polyak" => rl.cat.polyak;
    "cat.disabled" => rl.cat.disabled;
    "robot.kp" => rl.robot.kp;
    "robot.kd" => rl.robot.kd;
    "robot.torque_limit" => rl.robot.torque_limit;
    "robot.velocity_limit" => rl.robot.velocity_limit;
    "robot.action_rate_limit" => rl.robot.action_rate_limit;
    "robot.foot_force_limit" => rl.robot.foot_force_limit;
    "robot.air_time_target" => rl.robot.air_time_target;
    "robot.pitch_limit" => rl.robot.pitch_limit;
    "robot.friction_coef" => rl.robot.friction_coef;
    "robot.dt" => rl.robot.dt;
    "robot.substeps" => rl.robot.substeps;
    "robot.reset_noise" => rl.robot.reset_noise;
    "robot.episode_steps" => rl.robot.episode_steps;
    "eval.episodes" => eval.episodes;
    "eval.steps" => eval.steps;
    "eval.window" => eval.window;
    "eval.transfer_clips" => transfer.clips_per_skill;
    "eval.transfer_warmup_min" => transfer.warmup.start;
    "eval.transfer_warmup_max" => transfer.warmup.end;
}

impl ExperimentConfig {
    pub fn from_preset(preset: Preset) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        for (k, v) in preset.overrides() {
            cfg.set(k, v).expect("preset overrides are valid keys");
        }
        cfg.preset = preset;
        cfg
    }

    /// Sets one dotted key. `camera.preset` replaces the whole camera.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "experiment.preset" => {
                return Err(Error::Config("experiment.preset must come first and only once".into()));
            }
            "camera.preset" => {
                let p: CameraPreset = value.parse().map_err(|e| Error::Config(format!("{key}: {e}")))?;
                self.camera_preset = p;
                self.rl.rollout.camera = CameraConfig::preset(p);
                Ok(())
            }
            _ if self.set_field(key, value)? => Ok(()),
            _ => Err(Error::Config(format!("unknown key '{key}'"))),
        }
    }

    /// Parses `section.key = value` lines. `#` starts a comment. The preset
    /// named by `experiment.preset` (anywhere in the text) is expanded
    /// first; every other line then applies in order.
    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            pairs.push((n + 1, k.trim().to_string(), v.trim().to_string()));
        }
        let presets: Vec<&(usize, String, String)> = pairs.iter().filter(|p| p.1 == "experiment.preset").collect();
        if presets.len() > 1 {
            return Err(Error::Config("experiment.preset given more than once".into()));
        }
        let mut cfg = match presets.first() {
            Some((_, _, v)) => ExperimentConfig::from_preset(v.parse()?),
            None => ExperimentConfig::default(),
        };
        for (n, k, v) in &pairs {
            if k == "experiment.preset" {
                continue;
            }
            cfg.set(k, v).map_err(|e| Error::Config(format!("line {n}: {e}")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Resolved snapshot; parsing it gives back the same config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "experiment.preset = {}", self.preset);
        let _ = writeln!(out, "camera.preset = {}", self.camera_preset);
        for (k, v) in self.field_entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("experiment.seeds is empty".into()));
        }
        if self.corpus.per_class == 0 {
            return Err(Error::Config("corpus.per_class must be positive".into()));
        }
        if !(self.corpus.fraction > 0.0 && self.corpus.fraction <= 1.0) {
            return Err(Error::Config(format!("corpus.fraction must lie in (0, 1], got {}", self.corpus.fraction)));
        }
        if self.corpus.mode != self.classifier.mode {
            return Err(Error::Config("corpus.mode and classifier.mode differ".into()));
        }
        if self.transfer.clips_per_skill == 0 || self.transfer.warmup.is_empty() {
            return Err(Error::Config("eval: transfer clips must be positive and the warm-up range non-empty".into()));
        }
        self.classifier.validate()?;
        self.soup_config().validate()?;
        self.rl.validate()?;
        self.eval.validate()
    }

    /// Soup settings built on the classifier section.
    pub fn soup_config(&self) -> SoupConfig {
        SoupConfig {
            base: self.classifier.clone(),
            ..self.soup.clone()
        }
    }

    /// Resolved config for one RL seed.
    pub fn rl_for_seed(&self, seed: u64) -> RlConfig {
        RlConfig {
            seed,
            ..self.rl.clone()
        }
    }
}
