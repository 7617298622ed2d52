use crate::error::{Error, Result};
use crate::sim::{ConstraintGroup, ConstraintValues, CONSTRAINT_COUNT};

/// Floor on the running violation scale.
pub const SCALE_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct CatConfig {
    /// Maximum termination probability of a soft constraint.
    pub soft_delta_max: f64,
    pub air_time_delta_max: f64,
    /// Decay of the running violation scale.
    pub polyak: f64,
    /// Groups that never contribute to termination.
    pub disabled: Vec<ConstraintGroup>,
}

impl Default for CatConfig {
    fn default() -> Self {
        CatConfig {
            soft_delta_max: 0.25,
            air_time_delta_max: 0.5,
            polyak: 0.995,
            disabled: Vec::new(),
        }
    }
}

impl CatConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("soft_delta_max", self.soft_delta_max), ("air_time_delta_max", self.air_time_delta_max)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("cat.{name} must lie in (0, 1], got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.polyak) {
            return Err(Error::Config(format!("cat.polyak must lie in [0, 1), got {}", self.polyak)));
        }
        Ok(())
    }
}

/// Per-constraint termination parameters and running violation scales.
#[derive(Clone, Debug, PartialEq)]
pub struct CatState {
    pub scale: [f64; CONSTRAINT_COUNT],
    pub delta_max: [f64; CONSTRAINT_COUNT],
    pub hard: [bool; CONSTRAINT_COUNT],
    pub enabled: [bool; CONSTRAINT_COUNT],
    pub polyak: f64,
}

impl CatState {
    pub fn new(cfg: &CatConfig) -> Result<CatState> {
        cfg.validate()?;
        let group = ConstraintGroup::of_index;
        Ok(CatState {
            scale: [1.0; CONSTRAINT_COUNT],
            delta_max: std::array::from_fn(|i| match group(i) {
                ConstraintGroup::FootAirTime => cfg.air_time_delta_max,
                g if g.is_hard() => 1.0,
                _ => cfg.soft_delta_max,
            }),
            hard: std::array::from_fn(|i| group(i).is_hard()),
            enabled: std::array::from_fn(|i| !cfg.disabled.contains(&group(i))),
            polyak: cfg.polyak,
        })
    }

    /// Termination probability of constraint `i` at violation `v`.
    pub fn delta_of(&self, i: usize, v: f64) -> f64 {
        if !self.enabled[i] || !(v > 0.0) {
            0.0
        } else if self.hard[i] {
            1.0
        } else {
            self.delta_max[i] * (v / self.scale[i]).clamp(0.0, 1.0)
        }
    }

    /// Overall termination probability: the largest per-constraint value.
    pub fn delta(&self, cv: &ConstraintValues) -> f64 {
        cv.0.iter().enumerate().map(|(i, &v)| self.delta_of(i, v)).fold(0.0, f64::max)
    }

    /// Moves every scale toward the batch maximum of its positive
    /// violations (zero when none occurred).
    pub fn update(&mut self, batch_max: &[f64; CONSTRAINT_COUNT]) {
        for i in 0..CONSTRAINT_COUNT {
            let target = batch_max[i].max(0.0);
            self.scale[i] = (self.polyak * self.scale[i] + (1.0 - self.polyak) * target).max(SCALE_FLOOR);
        }
    }
}

/// Running per-constraint maxima over a batch.
#[derive(Clone, Debug, PartialEq)]
pub struct ViolationStats {
    pub max: [f64; CONSTRAINT_COUNT],
    pub violated: [usize; CONSTRAINT_COUNT],
    pub steps: usize,
}

impl Default for ViolationStats {
    fn default() -> Self {
        ViolationStats {
            max: [0.0; CONSTRAINT_COUNT],
            violated: [0; CONSTRAINT_COUNT],
            steps: 0,
        }
    }
}

impl ViolationStats {
    pub fn record(&mut self, cv: &ConstraintValues) {
        for (i, &v) in cv.0.iter().enumerate() {
            if v > 0.0 {
                self.max[i] = self.max[i].max(v);
                self.violated[i] += 1;
            }
        }
        self.steps += 1;
    }

    pub fn merge(&mut self, other: &ViolationStats) {
        for i in 0..CONSTRAINT_COUNT {
            self.max[i] = self.max[i].max(other.max[i]);
            self.violated[i] += other.violated[i];
        }
        self.steps += other.steps;
    }

    /// Mean per-entry violation rate of `group`.
    pub fn group_rate(&self, group: ConstraintGroup) -> f64 {
        if self.steps == 0 {
            return 0.0;
        }
        let r = group.range();
        let n = r.len();
        self.violated[r].iter().sum::<usize>() as f64 / (n * self.steps) as f64
    }
}

/// One-shot form: δ for `cv` and the state after folding in `cv` as a
/// batch of one.
pub fn cat_termination(cv: &ConstraintValues, state: &CatState) -> (f64, CatState) {
    let delta = state.delta(cv);
    let mut stats = ViolationStats::default();
    stats.record(cv);
    let mut next = state.clone();
    next.update(&stats.max);
    (delta, next)
}
