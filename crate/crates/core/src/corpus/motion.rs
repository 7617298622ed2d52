use super::creature::{CreatureSpec, LimbSpec};
use crate::camera::{rotate, Primitive, Shape};
use crate::skill::Skill;
use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq)]
pub struct LimbPose {
    pub hip: [f64; 2],
    pub knee: [f64; 2],
    pub foot: [f64; 2],
    /// Foot is in a support phase.
    pub support: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pose {
    pub center: [f64; 2],
    pub pitch: f64,
    pub limbs: Vec<LimbPose>,
}

impl Pose {
    pub fn shifted(mut self, dx: f64) -> Pose {
        self.center[0] += dx;
        for l in &mut self.limbs {
            for p in [&mut l.hip, &mut l.knee, &mut l.foot] {
                p[0] += dx;
            }
        }
        self
    }

    pub fn airborne(&self) -> bool {
        !self.limbs.iter().any(|l| l.support)
    }
}

fn smoothstep(u: f64) -> f64 {
    u * u * (3.0 - 2.0 * u)
}

fn frac(x: f64) -> f64 {
    x - x.floor()
}

/// Two-link inverse kinematics from `hip` towards `target`; unreachable
/// targets are approached as closely as the limb allows.
fn solve_knee(limb: &LimbSpec, hip: [f64; 2], target: [f64; 2]) -> ([f64; 2], [f64; 2]) {
    let (a, b) = (limb.upper, limb.lower);
    let d = [target[0] - hip[0], target[1] - hip[1]];
    let raw = d[0].hypot(d[1]);
    let dist = raw.clamp((a - b).abs() + 1e-6, a + b - 1e-6);
    let dir = if raw > 1e-12 { [d[0] / raw, d[1] / raw] } else { [0.0, -1.0] };
    let foot = [hip[0] + dir[0] * dist, hip[1] + dir[1] * dist];
    let cos_a = ((a * a + dist * dist - b * b) / (2.0 * a * dist)).clamp(-1.0, 1.0);
    // rotating the hip->foot direction towards +x bends the joint forward
    let knee_dir = rotate(dir, limb.bend * cos_a.acos());
    ([hip[0] + a * knee_dir[0], hip[1] + a * knee_dir[1]], foot)
}

/// Body trajectory sample for one behaviour.
struct Motion {
    x: f64,
    z: f64,
    pitch: f64,
}

/// Pose at time `t` (s); `phase` shifts the gait cycle (in cycles).
pub fn animate(c: &CreatureSpec, skill: Skill, t: f64, phase: f64) -> Pose {
    let g = &c.gait;
    let (l, h) = (c.body_length, c.hip_height);
    let body = match skill {
        Skill::KeepStill => Motion {
            x: 0.0,
            z: h * (1.0 + 0.004 * (2.0 * PI * (g.sway_freq * t + phase)).sin()),
            pitch: 0.0,
        },
        Skill::Walk => {
            let p = g.walk_freq * t + phase;
            Motion {
                x: g.walk_speed * l * t,
                z: h * (1.0 + 0.015 * (4.0 * PI * p).sin()),
                pitch: 0.02 * (2.0 * PI * p).sin(),
            }
        }
        Skill::Run => {
            let p = g.run_freq * t + phase;
            let u = frac(2.0 * p - g.run_duty);
            Motion {
                x: g.run_speed * l * t,
                z: h * (1.0 - 0.5 * g.run_bounce + g.run_bounce * 0.5 * (1.0 - (2.0 * PI * u).cos())),
                pitch: 0.06 * (2.0 * PI * p).sin(),
            }
        }
        Skill::Jump => {
            let p = frac(g.jump_freq * t + phase);
            let stance = 1.0 - g.jump_flight;
            if p < stance {
                let u = p / stance;
                Motion {
                    x: 0.0,
                    z: h * (1.0 - g.jump_crouch * (PI * u).sin()),
                    pitch: 0.0,
                }
            } else {
                let u = (p - stance) / g.jump_flight;
                Motion {
                    x: 0.0,
                    z: h * (1.0 + g.jump_apex * 4.0 * u * (1.0 - u)),
                    pitch: -0.05 * (PI * u).sin(),
                }
            }
        }
    };

    let axis = rotate([1.0, 0.0], body.pitch);
    let down = rotate([0.0, -0.25 * c.body_thickness], body.pitch);
    let limbs = c
        .limbs
        .iter()
        .enumerate()
        .map(|(i, limb)| {
            let hip = [
                body.x + limb.attach * axis[0] + down[0],
                body.z + limb.attach * axis[1] + down[1],
            ];
            let neutral_x = body.x + limb.attach + limb.foot_offset;
            let (target, support) = foot_target(c, limb, skill, t, phase, i, neutral_x, hip, body.z);
            let (knee, foot) = solve_knee(limb, hip, target);
            LimbPose { hip, knee, foot, support }
        })
        .collect();
    Pose {
        center: [body.x, body.z],
        pitch: body.pitch,
        limbs,
    }
}

#[allow(clippy::too_many_arguments)]
fn foot_target(
    c: &CreatureSpec,
    limb: &LimbSpec,
    skill: Skill,
    t: f64,
    phase: f64,
    index: usize,
    neutral_x: f64,
    hip: [f64; 2],
    body_z: f64,
) -> ([f64; 2], bool) {
    let g = &c.gait;
    let h = c.hip_height;
    match skill {
        Skill::KeepStill => {
            let sway = g.sway_amp * (2.0 * PI * (g.sway_freq * t + phase + 0.37 * index as f64)).sin();
            let rel = rotate([neutral_x - hip[0], -hip[1]], sway);
            ([hip[0] + rel[0], hip[1] + rel[1]], true)
        }
        Skill::Walk | Skill::Run => {
            let (freq, speed, duty, lag) = if skill == Skill::Walk {
                (g.walk_freq, g.walk_speed, g.walk_duty, limb.walk_lag)
            } else {
                (g.run_freq, g.run_speed, g.run_duty, limb.run_lag)
            };
            let p = frac(freq * t + phase + lag);
            // foot travel relative to the body during one stance phase
            let stride = speed * c.body_length * duty / freq;
            let body_x = speed * c.body_length * t;
            let rel_neutral = neutral_x - body_x;
            if p < duty {
                let rel = rel_neutral + 0.5 * stride - stride * p / duty;
                ([body_x + rel, 0.0], true)
            } else {
                let u = (p - duty) / (1.0 - duty);
                let rel = rel_neutral - 0.5 * stride + stride * smoothstep(u);
                ([body_x + rel, g.lift * h * (PI * u).sin()], false)
            }
        }
        Skill::Jump => {
            let p = frac(g.jump_freq * t + phase);
            let stance = 1.0 - g.jump_flight;
            if p < stance {
                ([neutral_x, 0.0], true)
            } else {
                let u = (p - stance) / g.jump_flight;
                // legs tuck at the top of the flight
                let reach = h * (1.0 - 0.35 * (PI * u).sin());
                ([neutral_x, body_z - 0.25 * c.body_thickness - reach], false)
            }
        }
    }
}

/// Far limbs, tail, body, head, then near limbs.
pub fn creature_primitives(c: &CreatureSpec, pose: &Pose) -> Vec<Primitive> {
    let mut prims = Vec::with_capacity(2 * c.limbs.len() + 3);
    let limb_prims = |prims: &mut Vec<Primitive>, near: bool| {
        for (spec, lp) in c.limbs.iter().zip(&pose.limbs).filter(|(s, _)| s.near == near) {
            let intensity = if near { c.palette.near } else { c.palette.far };
            prims.push(Primitive {
                shape: Shape::Capsule {
                    a: lp.hip,
                    b: lp.knee,
                    radius: spec.radius,
                },
                intensity,
            });
            prims.push(Primitive {
                shape: Shape::Capsule {
                    a: lp.knee,
                    b: lp.foot,
                    radius: 0.8 * spec.radius,
                },
                intensity,
            });
        }
    };
    limb_prims(&mut prims, false);
    let axis = rotate([1.0, 0.0], pose.pitch);
    let half = 0.5 * c.body_length;
    if let Some(len) = c.tail {
        let root = [pose.center[0] - half * axis[0], pose.center[1] - half * axis[1]];
        let tip = rotate([-len, 0.3 * len], pose.pitch);
        prims.push(Primitive {
            shape: Shape::Capsule {
                a: root,
                b: [root[0] + tip[0], root[1] + tip[1]],
                radius: 0.02 * c.body_length,
            },
            intensity: c.palette.body,
        });
    }
    prims.push(Primitive {
        shape: Shape::Ellipse {
            center: pose.center,
            axes: [half, 0.5 * c.body_thickness],
            angle: pose.pitch,
        },
        intensity: c.palette.body,
    });
    if let Some(r) = c.head {
        let at = rotate([half + 0.5 * r, 0.5 * c.body_thickness], pose.pitch);
        prims.push(Primitive {
            shape: Shape::Ellipse {
                center: [pose.center[0] + at[0], pose.center[1] + at[1]],
                axes: [r, r],
                angle: 0.0,
            },
            intensity: c.palette.body,
        });
    }
    limb_prims(&mut prims, true);
    prims
}
