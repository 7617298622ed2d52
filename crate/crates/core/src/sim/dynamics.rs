use super::constraints::{measure_constraints, ConstraintValues};
use super::RobotConfig;
use nalgebra::{SMatrix, SVector};
use rand::Rng;

/// Generalised coordinates: x, z, pitch, then the 8 joints.
pub(crate) const DOF: usize = 11;
type Mat = SMatrix<f64, DOF, DOF>;
type Vector = SVector<f64, DOF>;
type Jac = SMatrix<f64, 2, DOF>;

/// Per-step maxima and events gathered over the PD substeps.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepStats {
    pub max_abs_qd: [f64; 8],
    /// Largest PD output before clamping.
    pub max_raw_torque: [f64; 8],
    pub max_foot_force: [f64; 4],
    /// Air time that ended with a touchdown during the step.
    pub touchdown_air_time: [Option<f64>; 4],
    pub knee_collision: bool,
    pub base_collision: bool,
}

/// Full planar state of the robot.
#[derive(Clone, Debug, PartialEq)]
pub struct RobotState {
    pub x: f64,
    pub z: f64,
    pub pitch: f64,
    pub vx: f64,
    pub vz: f64,
    pub pitch_rate: f64,
    pub q: [f64; 8],
    pub qd: [f64; 8],
    pub air_time: [f64; 4],
    pub contact: [bool; 4],
    pub prev_action: [f64; 8],
    pub time: f64,
    /// Static-friction anchor x of each grounded foot.
    pub anchors: [Option<f64>; 4],
    pub last: StepStats,
}

/// The integrator produced a non-finite state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Diverged;

/// Points of interest for rendering and collision checks.
#[derive(Clone, Debug, PartialEq)]
pub struct Skeleton {
    pub base: [f64; 2],
    pub pitch: f64,
    pub hips: [[f64; 2]; 4],
    pub knees: [[f64; 2]; 4],
    pub feet: [[f64; 2]; 4],
}

#[inline]
fn dir(phi: f64) -> [f64; 2] {
    [phi.sin(), -phi.cos()]
}

#[inline]
fn dir_prime(phi: f64) -> [f64; 2] {
    [phi.cos(), phi.sin()]
}

impl RobotState {
    pub(crate) fn coords(&self) -> (Vector, Vector) {
        let mut g = Vector::zeros();
        let mut gd = Vector::zeros();
        g[0] = self.x;
        g[1] = self.z;
        g[2] = self.pitch;
        gd[0] = self.vx;
        gd[1] = self.vz;
        gd[2] = self.pitch_rate;
        for k in 0..8 {
            g[3 + k] = self.q[k];
            gd[3 + k] = self.qd[k];
        }
        (g, gd)
    }

    fn set_coords(&mut self, g: &Vector, gd: &Vector) {
        self.x = g[0];
        self.z = g[1];
        self.pitch = g[2];
        self.vx = gd[0];
        self.vz = gd[1];
        self.pitch_rate = gd[2];
        for k in 0..8 {
            self.q[k] = g[3 + k];
            self.qd[k] = gd[3 + k];
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.x, self.z, self.pitch, self.vx, self.vz, self.pitch_rate, self.time]
            .iter()
            .chain(&self.q)
            .chain(&self.qd)
            .chain(&self.air_time)
            .all(|v| v.is_finite())
    }

    pub fn skeleton(&self, cfg: &RobotConfig) -> Skeleton {
        let (s, c) = self.pitch.sin_cos();
        let mut sk = Skeleton {
            base: [self.x, self.z],
            pitch: self.pitch,
            hips: [[0.0; 2]; 4],
            knees: [[0.0; 2]; 4],
            feet: [[0.0; 2]; 4],
        };
        for leg in 0..4 {
            let rx = cfg.hip_offset(leg);
            let hip = [self.x + rx * c, self.z + rx * s];
            let phi1 = self.pitch + self.q[2 * leg];
            let phi2 = phi1 + self.q[2 * leg + 1];
            let (d1, d2) = (dir(phi1), dir(phi2));
            let knee = [hip[0] + cfg.thigh_length * d1[0], hip[1] + cfg.thigh_length * d1[1]];
            let foot = [knee[0] + cfg.shank_length * d2[0], knee[1] + cfg.shank_length * d2[1]];
            sk.hips[leg] = hip;
            sk.knees[leg] = knee;
            sk.feet[leg] = foot;
        }
        sk
    }

    /// Corners of the base box in world coordinates.
    pub fn base_corners(&self, cfg: &RobotConfig) -> [[f64; 2]; 4] {
        let (s, c) = self.pitch.sin_cos();
        let (hx, hz) = (0.5 * cfg.body_length, 0.5 * cfg.body_height);
        [(-hx, -hz), (hx, -hz), (hx, hz), (-hx, hz)].map(|(bx, bz)| [self.x + bx * c - bz * s, self.z + bx * s + bz * c])
    }

    /// Left-right mirror: swaps FL<->FR and RL<->RR bookkeeping.
    pub fn mirrored(&self) -> RobotState {
        let mut m = self.clone();
        for (a, b) in [(0usize, 1usize), (2, 3)] {
            for off in 0..2 {
                m.q.swap(2 * a + off, 2 * b + off);
                m.qd.swap(2 * a + off, 2 * b + off);
                m.prev_action.swap(2 * a + off, 2 * b + off);
                m.last.max_abs_qd.swap(2 * a + off, 2 * b + off);
                m.last.max_raw_torque.swap(2 * a + off, 2 * b + off);
            }
            m.air_time.swap(a, b);
            m.contact.swap(a, b);
            m.anchors.swap(a, b);
            m.last.max_foot_force.swap(a, b);
            m.last.touchdown_air_time.swap(a, b);
        }
        m
    }
}

/// A point rigidly attached to leg `leg`: `along_thigh` metres down the
/// thigh then `along_shank` metres down the shank.
struct ChainPoint {
    pos: [f64; 2],
    jac: Jac,
    /// Velocity-product acceleration `J̇ ġ`.
    bias: [f64; 2],
}

fn chain_point(cfg: &RobotConfig, g: &Vector, gd: &Vector, leg: usize, along_thigh: f64, along_shank: f64) -> ChainPoint {
    let theta = g[2];
    let (s, c) = theta.sin_cos();
    let rx = cfg.hip_offset(leg);
    let (hi, ki) = (3 + 2 * leg, 4 + 2 * leg);
    let phi1 = theta + g[hi];
    let phi2 = phi1 + g[ki];
    let w1 = gd[2] + gd[hi];
    let w2 = w1 + gd[ki];
    let (d1, d2) = (dir(phi1), dir(phi2));
    let (p1, p2) = (dir_prime(phi1), dir_prime(phi2));

    let pos = [
        g[0] + rx * c + along_thigh * d1[0] + along_shank * d2[0],
        g[1] + rx * s + along_thigh * d1[1] + along_shank * d2[1],
    ];
    let mut jac = Jac::zeros();
    jac[(0, 0)] = 1.0;
    jac[(1, 1)] = 1.0;
    for r in 0..2 {
        let knee_col = along_shank * p2[r];
        let hip_col = along_thigh * p1[r] + knee_col;
        let rot = if r == 0 { -rx * s } else { rx * c };
        jac[(r, 2)] = rot + hip_col;
        jac[(r, hi)] = hip_col;
        jac[(r, ki)] = knee_col;
    }
    let wt = gd[2] * gd[2];
    let bias = [
        -wt * rx * c - along_thigh * w1 * w1 * d1[0] - along_shank * w2 * w2 * d2[0],
        -wt * rx * s - along_thigh * w1 * w1 * d1[1] - along_shank * w2 * w2 * d2[1],
    ];
    ChainPoint { pos, jac, bias }
}

/// Mass matrix and generalised force from gravity and velocity products.
fn mass_and_forces(cfg: &RobotConfig, g: &Vector, gd: &Vector) -> (Mat, Vector) {
    let mut m = Mat::zeros();
    let mut f = Vector::zeros();
    // base
    let ib = cfg.body_mass * (cfg.body_length.powi(2) + cfg.body_height.powi(2)) / 12.0;
    m[(0, 0)] += cfg.body_mass;
    m[(1, 1)] += cfg.body_mass;
    m[(2, 2)] += ib;
    f[1] -= cfg.body_mass * cfg.gravity;

    let links = [
        (cfg.thigh_mass, cfg.thigh_length, 0.5 * cfg.thigh_length, 0.0, false),
        (cfg.shank_mass, cfg.shank_length, cfg.thigh_length, 0.5 * cfg.shank_length, true),
    ];
    for leg in 0..4 {
        let (hi, ki) = (3 + 2 * leg, 4 + 2 * leg);
        for &(mass, len, a1, a2, is_shank) in &links {
            let p = chain_point(cfg, g, gd, leg, a1, a2);
            m += mass * p.jac.transpose() * p.jac;
            let inertia = mass * len * len / 12.0;
            let cols: &[usize] = if is_shank { &[2, hi, ki] } else { &[2, hi] };
            for &i in cols {
                for &j in cols {
                    m[(i, j)] += inertia;
                }
            }
            let force = nalgebra::Vector2::new(-mass * p.bias[0], -mass * (cfg.gravity + p.bias[1]));
            f += p.jac.transpose() * force;
        }
    }
    for k in 0..8 {
        m[(3 + k, 3 + k)] += cfg.armature;
        f[3 + k] -= cfg.joint_damping * gd[3 + k];
    }
    (m, f)
}

/// Kinetic + gravitational + contact-spring energy.
pub fn mechanical_energy(cfg: &RobotConfig, state: &RobotState) -> f64 {
    let (g, gd) = state.coords();
    let (m, _) = mass_and_forces(cfg, &g, &gd);
    let kinetic = 0.5 * gd.dot(&(m * gd));
    let mut potential = cfg.body_mass * cfg.gravity * state.z;
    for leg in 0..4 {
        let thigh = chain_point(cfg, &g, &gd, leg, 0.5 * cfg.thigh_length, 0.0);
        let shank = chain_point(cfg, &g, &gd, leg, cfg.thigh_length, 0.5 * cfg.shank_length);
        potential += cfg.gravity * (cfg.thigh_mass * thigh.pos[1] + cfg.shank_mass * shank.pos[1]);
        let foot = chain_point(cfg, &g, &gd, leg, cfg.thigh_length, cfg.shank_length);
        if foot.pos[1] <= 0.0 {
            potential += 0.5 * cfg.ground_stiffness * foot.pos[1].powi(2);
            if let Some(anchor) = state.anchors[leg] {
                potential += 0.5 * cfg.friction_stiffness * (foot.pos[0] - anchor).powi(2);
            }
        }
    }
    kinetic + potential
}

/// PD law `clamp(Kp (target - q) - Kd q̇, ±τlim)`.
pub fn pd_torque(target: &[f64; 8], q: &[f64; 8], qd: &[f64; 8], cfg: &RobotConfig) -> [f64; 8] {
    let mut tau = raw_pd(target, q, qd, cfg);
    for t in &mut tau {
        *t = t.clamp(-cfg.torque_limit, cfg.torque_limit);
    }
    tau
}

fn raw_pd(target: &[f64; 8], q: &[f64; 8], qd: &[f64; 8], cfg: &RobotConfig) -> [f64; 8] {
    std::array::from_fn(|k| cfg.kp * (target[k] - q[k]) - cfg.kd * qd[k])
}

/// Base height that puts the lowest foot exactly on the ground.
pub fn standing_height(cfg: &RobotConfig, q: &[f64; 8]) -> f64 {
    (0..4)
        .map(|leg| {
            let (h, k) = (q[2 * leg], q[2 * leg + 1]);
            cfg.thigh_length * h.cos() + cfg.shank_length * (h + k).cos()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Stationary robot at the given joint angles with its lowest foot grounded.
pub fn stand(cfg: &RobotConfig, q: [f64; 8]) -> RobotState {
    let mut state = RobotState {
        x: 0.0,
        z: standing_height(cfg, &q),
        pitch: 0.0,
        vx: 0.0,
        vz: 0.0,
        pitch_rate: 0.0,
        q,
        qd: [0.0; 8],
        air_time: [0.0; 4],
        contact: [false; 4],
        prev_action: cfg.q_default,
        time: 0.0,
        anchors: [None; 4],
        last: StepStats::default(),
    };
    let sk = state.skeleton(cfg);
    for leg in 0..4 {
        let z = sk.feet[leg][1];
        state.contact[leg] = z <= CONTACT_TOLERANCE;
        if state.contact[leg] {
            state.anchors[leg] = Some(sk.feet[leg][0]);
        }
    }
    state
}

/// Feet within this height of the ground count as touching.
const CONTACT_TOLERANCE: f64 = 1e-9;

/// Episode start: default pose plus uniform joint noise, feet on the ground.
pub fn reset<R: Rng + ?Sized>(cfg: &RobotConfig, rng: &mut R) -> RobotState {
    let mut q = cfg.q_default;
    if cfg.reset_noise > 0.0 {
        for k in 0..8 {
            q[k] = (q[k] + rng.random_range(-cfg.reset_noise..=cfg.reset_noise)).clamp(cfg.q_min[k], cfg.q_max[k]);
        }
    }
    stand(cfg, q)
}

/// Advances one policy period with PD substeps and returns the step's
/// constraint measurements.
pub fn step(state: &mut RobotState, action: &[f64; 8], cfg: &RobotConfig) -> Result<ConstraintValues, Diverged> {
    if action.iter().any(|a| !a.is_finite()) {
        return Err(Diverged);
    }
    let before = state.clone();
    let target = cfg.clamp_action(action);
    let h = cfg.substep_dt();
    let mut stats = StepStats::default();
    let (mut g, mut gd) = state.coords();

    for _ in 0..cfg.substeps {
        let q: [f64; 8] = std::array::from_fn(|k| g[3 + k]);
        let qd: [f64; 8] = std::array::from_fn(|k| gd[3 + k]);
        let raw = raw_pd(&target, &q, &qd, cfg);
        let (mut m, mut f) = mass_and_forces(cfg, &g, &gd);
        // Stiff springs and dampers enter the solve linearly implicitly:
        // (M + h D + h² K) Δv = h f.
        let (hd, hk) = (h, h * h);
        for k in 0..8 {
            stats.max_raw_torque[k] = stats.max_raw_torque[k].max(raw[k].abs());
            let saturated = cfg.clamp_torque && raw[k].abs() > cfg.torque_limit;
            f[3 + k] += if saturated {
                raw[k].clamp(-cfg.torque_limit, cfg.torque_limit)
            } else {
                m[(3 + k, 3 + k)] += hd * cfg.kd + hk * cfg.kp;
                raw[k]
            };
            m[(3 + k, 3 + k)] += hd * cfg.joint_damping;
        }

        for leg in 0..4 {
            let foot = chain_point(cfg, &g, &gd, leg, cfg.thigh_length, cfg.shank_length);
            if foot.pos[1] > CONTACT_TOLERANCE {
                state.anchors[leg] = None;
                continue;
            }
            let vel = foot.jac * gd;
            let pen = -foot.pos[1];
            let normal = (cfg.ground_stiffness * pen - cfg.ground_damping * vel[1]).max(0.0);
            if normal > 0.0 {
                let jn = foot.jac.row(1);
                m += (hd * cfg.ground_damping + hk * cfg.ground_stiffness) * jn.transpose() * jn;
            }
            let anchor = *state.anchors[leg].get_or_insert(foot.pos[0]);
            let mut tangential = -cfg.friction_stiffness * (foot.pos[0] - anchor) - cfg.friction_damping * vel[0];
            let cap = cfg.friction_coef * normal;
            if tangential.abs() > cap {
                tangential = tangential.signum() * cap;
                state.anchors[leg] = Some(foot.pos[0] + tangential / cfg.friction_stiffness);
            } else {
                let jt = foot.jac.row(0);
                m += (hd * cfg.friction_damping + hk * cfg.friction_stiffness) * jt.transpose() * jt;
            }
            stats.max_foot_force[leg] = stats.max_foot_force[leg].max(normal.hypot(tangential));
            f += foot.jac.transpose() * nalgebra::Vector2::new(tangential, normal);
        }

        // symmetric positive definite; Cholesky only fails on a broken state
        let dv = match m.cholesky() {
            Some(chol) => chol.solve(&(f * h)),
            None => return Err(Diverged),
        };
        gd += dv;
        g += gd * h;
        if g.iter().chain(gd.iter()).any(|v| !v.is_finite()) {
            return Err(Diverged);
        }

        state.set_coords(&g, &gd);
        let sk = state.skeleton(cfg);
        for leg in 0..4 {
            let grounded = sk.feet[leg][1] <= CONTACT_TOLERANCE;
            if grounded {
                if !state.contact[leg] {
                    stats.touchdown_air_time[leg] = Some(state.air_time[leg]);
                }
                state.air_time[leg] = 0.0;
            } else {
                state.air_time[leg] += h;
                state.anchors[leg] = None;
            }
            state.contact[leg] = grounded;
            if sk.knees[leg][1] < 0.0 {
                stats.knee_collision = true;
            }
        }
        if state.base_corners(cfg).iter().any(|c| c[1] < 0.0) {
            stats.base_collision = true;
        }
        for k in 0..8 {
            stats.max_abs_qd[k] = stats.max_abs_qd[k].max(gd[3 + k].abs());
        }
    }

    state.time = before.time + cfg.dt;
    state.last = stats;
    let values = measure_constraints(&before, state, &target, cfg);
    state.prev_action = target;
    Ok(values)
}
