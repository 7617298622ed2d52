use crate::sim::RobotConfig;
use rand::Rng;

pub const MIN_LIMBS: usize = 2;
pub const MAX_LIMBS: usize = 6;

/// One two-segment limb hanging from the underside of the body.
#[derive(Clone, Debug, PartialEq)]
pub struct LimbSpec {
    /// Attachment along the body axis from the body centre (m).
    pub attach: f64,
    pub upper: f64,
    pub lower: f64,
    pub radius: f64,
    /// Drawn on the camera side of the body.
    pub near: bool,
    /// +1 bends the joint forward, -1 backward.
    pub bend: f64,
    /// Neutral foot position relative to the attachment (m).
    pub foot_offset: f64,
    /// Gait phase lag in cycles, for walking and running.
    pub walk_lag: f64,
    pub run_lag: f64,
}

/// Per-class motion parameters of one creature.
#[derive(Clone, Debug, PartialEq)]
pub struct GaitParams {
    pub sway_amp: f64,
    pub sway_freq: f64,
    pub walk_freq: f64,
    /// Body lengths per second.
    pub walk_speed: f64,
    pub walk_duty: f64,
    pub run_freq: f64,
    pub run_speed: f64,
    pub run_duty: f64,
    /// Fraction of hip height.
    pub run_bounce: f64,
    pub jump_freq: f64,
    /// Apex above standing height, in standing heights.
    pub jump_apex: f64,
    /// Crouch depth before take-off, in standing heights.
    pub jump_crouch: f64,
    pub jump_flight: f64,
    /// Swing-foot lift, in standing heights.
    pub lift: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Palette {
    pub body: f32,
    pub near: f32,
    pub far: f32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CreatureSpec {
    /// Overall scale: body ellipse length (m).
    pub body_length: f64,
    pub body_thickness: f64,
    /// Standing height of the limb attachments (m).
    pub hip_height: f64,
    pub limbs: Vec<LimbSpec>,
    /// Head radius, if the creature has one.
    pub head: Option<f64>,
    /// Tail length, if any.
    pub tail: Option<f64>,
    pub palette: Palette,
    pub gait: GaitParams,
}

/// Coarse morphology descriptor: limb count, upper/lower length ratio,
/// leg length over body length and attachment spread, rounded.
#[derive(Clone, Debug, PartialEq)]
pub struct GeometrySignature {
    pub limbs: usize,
    pub segment_ratio: f64,
    pub leg_to_body: f64,
    pub attach_spread: f64,
}

impl GeometrySignature {
    /// Same descriptor up to 5% on each continuous entry.
    pub fn matches(&self, other: &GeometrySignature) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 0.05 * a.abs().max(b.abs()).max(1e-9);
        self.limbs == other.limbs
            && close(self.segment_ratio, other.segment_ratio)
            && close(self.leg_to_body, other.leg_to_body)
            && close(self.attach_spread, other.attach_spread)
    }
}

pub fn robot_signature(cfg: &RobotConfig) -> GeometrySignature {
    GeometrySignature {
        limbs: 4,
        segment_ratio: cfg.thigh_length / cfg.shank_length,
        leg_to_body: (cfg.thigh_length + cfg.shank_length) / cfg.body_length,
        attach_spread: 1.0,
    }
}

impl CreatureSpec {
    pub fn signature(&self) -> GeometrySignature {
        let n = self.limbs.len() as f64;
        let ratio = self.limbs.iter().map(|l| l.upper / l.lower).sum::<f64>() / n;
        let leg = self.limbs.iter().map(|l| l.upper + l.lower).sum::<f64>() / n;
        let (lo, hi) = self
            .limbs
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), l| (lo.min(l.attach), hi.max(l.attach)));
        GeometrySignature {
            limbs: self.limbs.len(),
            segment_ratio: ratio,
            leg_to_body: leg / self.body_length,
            attach_spread: (hi - lo) / self.body_length,
        }
    }

    pub fn leg_length(&self) -> f64 {
        self.limbs.iter().map(|l| l.upper + l.lower).fold(0.0, f64::max)
    }

    pub fn is_valid(&self) -> bool {
        (MIN_LIMBS..=MAX_LIMBS).contains(&self.limbs.len())
            && self.body_length > 0.0
            && self.body_thickness > 0.0
            && self.hip_height > 0.0
            && self.limbs.iter().all(|l| l.upper > 0.0 && l.lower > 0.0 && l.radius > 0.0)
    }
}

fn draw_limbs<R: Rng + ?Sized>(rng: &mut R, body_length: f64, leg: f64) -> Vec<LimbSpec> {
    let count = rng.random_range(MIN_LIMBS..=MAX_LIMBS);
    let stations = count.div_ceil(2);
    let spread = rng.random_range(0.5..0.95) * body_length;
    let ratio = rng.random_range(0.6..1.6);
    let radius = rng.random_range(0.025..0.06) * body_length;
    let front_bend = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let rear_bend = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let bound = rng.random_bool(0.5);
    let mut limbs = Vec::with_capacity(count);
    for s in 0..stations {
        let attach = if stations == 1 {
            0.0
        } else {
            spread * (s as f64 / (stations - 1) as f64 - 0.5)
        };
        let length = leg * rng.random_range(0.9..1.1);
        let upper = length * ratio / (1.0 + ratio);
        let bend = if attach >= 0.0 { front_bend } else { rear_bend };
        let walk_lag = rng.random_range(0.0..1.0);
        let run_lag = if bound { 0.0 } else { 0.5 * s as f64 };
        for near in [true, false] {
            if limbs.len() == count {
                break;
            }
            let shift = if near { 0.0 } else { 0.5 };
            limbs.push(LimbSpec {
                attach,
                upper,
                lower: length - upper,
                radius,
                near,
                bend,
                foot_offset: rng.random_range(-0.1..0.1) * length,
                walk_lag: (walk_lag + shift) % 1.0,
                run_lag: (run_lag + shift) % 1.0,
            });
        }
    }
    limbs
}

fn draw_gait<R: Rng + ?Sized>(rng: &mut R) -> GaitParams {
    GaitParams {
        sway_amp: rng.random_range(0.005..0.03),
        sway_freq: rng.random_range(0.2..0.8),
        walk_freq: rng.random_range(1.0..2.0),
        walk_speed: rng.random_range(0.2..0.5),
        walk_duty: rng.random_range(0.6..0.75),
        run_freq: rng.random_range(2.5..4.0),
        run_speed: rng.random_range(0.8..1.5),
        run_duty: rng.random_range(0.3..0.45),
        run_bounce: rng.random_range(0.06..0.15),
        jump_freq: rng.random_range(1.4..2.0),
        jump_apex: rng.random_range(0.2..0.5),
        jump_crouch: rng.random_range(0.1..0.2),
        jump_flight: rng.random_range(0.55..0.7),
        lift: rng.random_range(0.08..0.2),
    }
}

/// Random morphology, palette and gait. Never reproduces the robot's
/// geometry signature.
pub fn gen_creature<R: Rng + ?Sized>(rng: &mut R) -> CreatureSpec {
    let robot = robot_signature(&RobotConfig::default());
    loop {
        let body_length = rng.random_range(0.2..1.5);
        let leg = body_length * rng.random_range(0.35..1.2);
        let body = rng.random_range(0.6..1.0f32);
        let near = rng.random_range(0.45..0.95f32);
        let spec = CreatureSpec {
            body_length,
            body_thickness: body_length * rng.random_range(0.15..0.45),
            hip_height: leg * rng.random_range(0.7..0.9),
            limbs: draw_limbs(rng, body_length, leg),
            head: rng.random_bool(0.6).then(|| body_length * rng.random_range(0.08..0.18)),
            tail: rng.random_bool(0.4).then(|| body_length * rng.random_range(0.2..0.6)),
            palette: Palette {
                body,
                near,
                far: near * rng.random_range(0.5..0.8f32),
            },
            gait: draw_gait(rng),
        };
        if !spec.signature().matches(&robot) {
            return spec;
        }
    }
}
