//! Procedural "creature" clips labelled by motion, the stand-in for wild
//! animal footage, and the on-disk clip dataset.

mod creature;
mod dataset;
mod motion;

pub use creature::{
    gen_creature, robot_signature, CreatureSpec, GaitParams, GeometrySignature, LimbSpec, Palette, MAX_LIMBS, MIN_LIMBS,
};
pub use dataset::{Dataset, StoredClip, CLIP_BYTES};
pub use motion::{animate, creature_primitives, LimbPose, Pose};

use crate::camera::{draw_all, draw_ground, Clip, Frame, View, CLIP_LEN};
use crate::error::{Error, Result};
use crate::seeding::stream_rng;
use crate::skill::Skill;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use std::fmt;
use std::str::FromStr;

/// Time between consecutive frames of a creature clip (s); equals the
/// robot's render spacing at the default interval.
pub const FRAME_DT: f64 = 0.1;
pub const PIXEL_NOISE: f64 = 0.02;
/// Chance that a multi-label clip switches to a second behaviour.
pub const SECOND_BEHAVIOUR_PROB: f64 = 0.3;
/// Creatures with `id % 20 < 3` form the validation split.
pub const VAL_MODULUS: u32 = 20;
pub const VAL_RESIDUES: u32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LabelMode {
    Curated,
    MultiLabel,
}

impl fmt::Display for LabelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelMode::Curated => "curated",
            LabelMode::MultiLabel => "multilabel",
        })
    }
}

impl FromStr for LabelMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "curated" => Ok(LabelMode::Curated),
            "multilabel" | "multi_label" => Ok(LabelMode::MultiLabel),
            _ => Err(Error::Invalid(format!("unknown label mode '{s}'"))),
        }
    }
}

pub fn is_val_creature(id: u32) -> bool {
    id % VAL_MODULUS < VAL_RESIDUES
}

/// Ground-truth motion statistics of a clip, in body units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MotionSummary {
    /// Mean forward speed, body lengths per second.
    pub speed: f64,
    /// Peak-to-trough body height, in standing heights.
    pub bounce: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledClip {
    pub clip: Clip,
    /// Bit `k` set for `Skill::from_index(k)`.
    pub labels: u8,
    pub creature: u32,
    pub motion: MotionSummary,
}

impl LabeledClip {
    pub fn skills(&self) -> Vec<Skill> {
        Skill::ALL.into_iter().filter(|s| self.labels & s.bit() != 0).collect()
    }
}

/// Per-clip rendering randomisation.
struct Style {
    offset: f64,
    height: f64,
    zoom: f64,
    tick_spacing: f64,
    background: f32,
    ground: f32,
}

fn draw_style<R: Rng + ?Sized>(c: &CreatureSpec, rng: &mut R) -> Style {
    let size = (c.body_length + 0.3 * c.leg_length()).max(1.6 * c.hip_height);
    let jitter = |rng: &mut R| rng.random_range(0.75..1.25);
    Style {
        offset: -0.2 * size * jitter(rng),
        height: 0.85 * c.hip_height * jitter(rng),
        zoom: 1.1 * size * jitter(rng),
        tick_spacing: 0.5 * c.body_length * rng.random_range(0.7..1.4),
        background: rng.random_range(0.0..0.15),
        ground: rng.random_range(0.15..0.45),
    }
}

/// Renders one clip of `creature` doing `skill`. In multi-label mode the
/// clip may switch to a second behaviour part-way and carries both labels.
pub fn gen_clip<R: Rng + ?Sized>(creature: &CreatureSpec, skill: Skill, mode: LabelMode, rng: &mut R) -> LabeledClip {
    let style = draw_style(creature, rng);
    let phase = rng.random_range(0.0..1.0);
    let t0 = rng.random_range(0.0..2.0);
    let mut schedule = [skill; CLIP_LEN];
    let mut labels = skill.bit();
    if mode == LabelMode::MultiLabel && rng.random_bool(SECOND_BEHAVIOUR_PROB) {
        let others: Vec<Skill> = Skill::ALL.into_iter().filter(|&s| s != skill).collect();
        let second = others[rng.random_range(0..others.len())];
        let switch_at = rng.random_range(2..=6);
        for s in &mut schedule[switch_at..] {
            *s = second;
        }
        labels |= second.bit();
    }

    let noise = Normal::new(0.0, PIXEL_NOISE).expect("valid sigma");
    let mut frames = Vec::with_capacity(CLIP_LEN);
    let mut x = 0.0;
    let mut heights = Vec::with_capacity(CLIP_LEN);
    for (i, &active) in schedule.iter().enumerate() {
        let t = t0 + i as f64 * FRAME_DT;
        if i > 0 {
            // integrate forward travel so a behaviour switch stays continuous
            let prev = animate(creature, active, t - FRAME_DT, phase).center[0];
            x += animate(creature, active, t, phase).center[0] - prev;
        }
        let raw = animate(creature, active, t, phase);
        let pose = raw.clone().shifted(x - raw.center[0]);
        heights.push(pose.center[1]);
        let view = View {
            center: [pose.center[0] + style.offset, style.height],
            half_width: style.zoom,
        };
        let mut frame = Frame::filled(style.background);
        draw_ground(&mut frame, &view, style.ground, style.tick_spacing);
        draw_all(&mut frame, &creature_primitives(creature, &pose), &view);
        for p in &mut frame.pixels {
            *p = (*p + noise.sample(rng) as f32).clamp(0.0, 1.0);
        }
        frames.push(frame);
    }
    let span = (CLIP_LEN - 1) as f64 * FRAME_DT;
    let (lo, hi) = heights.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &z| (a.min(z), b.max(z)));
    LabeledClip {
        clip: Clip::new(frames).expect("eight frames"),
        labels,
        creature: 0,
        motion: MotionSummary {
            speed: x / span / creature.body_length,
            bounce: (hi - lo) / creature.hip_height,
        },
    }
}

/// Creature `id` of the corpus drawn from `seed`.
pub fn corpus_creature(seed: u64, id: u32) -> CreatureSpec {
    gen_creature(&mut stream_rng(seed, &[1, u64::from(id)]))
}

/// The clip of creature `id` for `skill`; independent of every other clip.
pub fn corpus_clip(seed: u64, id: u32, skill: Skill, mode: LabelMode) -> LabeledClip {
    let creature = corpus_creature(seed, id);
    let mut rng = stream_rng(seed, &[2, u64::from(id), skill.index() as u64]);
    let mut clip = gen_clip(&creature, skill, mode, &mut rng);
    clip.creature = id;
    clip
}

/// `n_per_class` creatures, each contributing one clip per class.
pub fn build_corpus(n_per_class: usize, mode: LabelMode, seed: u64) -> Result<Dataset> {
    if n_per_class == 0 {
        return Err(Error::Invalid("n_per_class must be at least 1".into()));
    }
    let n = u32::try_from(n_per_class).map_err(|_| Error::Invalid("n_per_class too large".into()))?;
    let clips: Vec<StoredClip> = (0..n)
        .into_par_iter()
        .flat_map_iter(|id| {
            Skill::ALL
                .into_iter()
                .map(move |skill| StoredClip::from_labeled(&corpus_clip(seed, id, skill, mode)))
        })
        .collect();
    Ok(Dataset { clips })
}
