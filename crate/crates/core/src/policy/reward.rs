use crate::skill::Skill;

/// Added to the score range so a constant score cannot divide by zero.
pub const RANGE_EPS: f64 = 1e-3;

/// Running per-skill score extrema mapping raw classifier scores to [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct RewardNorm {
    pub min: [f64; Skill::COUNT],
    pub max: [f64; Skill::COUNT],
    pub polyak: f64,
}

impl RewardNorm {
    /// Starts from the full score range [0, 1].
    pub fn new(polyak: f64) -> RewardNorm {
        RewardNorm {
            min: [0.0; Skill::COUNT],
            max: [1.0; Skill::COUNT],
            polyak,
        }
    }

    /// `(α, β)` of the affine map for `skill`.
    pub fn coefficients(&self, skill: Skill) -> (f64, f64) {
        let k = skill.index();
        let alpha = 1.0 / (self.max[k] - self.min[k] + RANGE_EPS);
        (alpha, -self.min[k] * alpha)
    }

    pub fn normalize(&self, skill: Skill, raw: f64) -> f64 {
        let (a, b) = self.coefficients(skill);
        (a * raw + b).clamp(0.0, 1.0)
    }

    /// Moves the extrema of `skill` toward a batch's observed range.
    pub fn update(&mut self, skill: Skill, batch_min: f64, batch_max: f64) {
        if !(batch_min <= batch_max) {
            return;
        }
        let k = skill.index();
        let p = self.polyak;
        self.min[k] = p * self.min[k] + (1.0 - p) * batch_min;
        self.max[k] = (p * self.max[k] + (1.0 - p) * batch_max).max(self.min[k]);
    }
}

/// Per-skill extrema and sums of raw scores within one batch.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreStats {
    pub min: [f64; Skill::COUNT],
    pub max: [f64; Skill::COUNT],
    pub raw_sum: [f64; Skill::COUNT],
    pub reward_sum: [f64; Skill::COUNT],
    pub count: [usize; Skill::COUNT],
}

impl Default for ScoreStats {
    fn default() -> Self {
        ScoreStats {
            min: [f64::INFINITY; Skill::COUNT],
            max: [f64::NEG_INFINITY; Skill::COUNT],
            raw_sum: [0.0; Skill::COUNT],
            reward_sum: [0.0; Skill::COUNT],
            count: [0; Skill::COUNT],
        }
    }
}

impl ScoreStats {
    pub fn record(&mut self, skill: Skill, raw: f64, reward: f64) {
        let k = skill.index();
        self.min[k] = self.min[k].min(raw);
        self.max[k] = self.max[k].max(raw);
        self.raw_sum[k] += raw;
        self.reward_sum[k] += reward;
        self.count[k] += 1;
    }

    pub fn merge(&mut self, o: &ScoreStats) {
        for k in 0..Skill::COUNT {
            self.min[k] = self.min[k].min(o.min[k]);
            self.max[k] = self.max[k].max(o.max[k]);
            self.raw_sum[k] += o.raw_sum[k];
            self.reward_sum[k] += o.reward_sum[k];
            self.count[k] += o.count[k];
        }
    }

    pub fn mean_raw(&self, skill: Skill) -> f64 {
        let k = skill.index();
        if self.count[k] == 0 { 0.0 } else { self.raw_sum[k] / self.count[k] as f64 }
    }

    pub fn mean_reward(&self, skill: Skill) -> f64 {
        let k = skill.index();
        if self.count[k] == 0 { 0.0 } else { self.reward_sum[k] / self.count[k] as f64 }
    }

    pub fn apply(&self, norm: &mut RewardNorm) {
        for s in Skill::ALL {
            if self.count[s.index()] > 0 {
                norm.update(s, self.min[s.index()], self.max[s.index()]);
            }
        }
    }
}
