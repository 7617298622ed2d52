use crate::error::{Error, Result};

/// One environment's contiguous stretch of steps.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    /// Probability of not being terminated after each step, `1 − δ`.
    pub survival: Vec<f64>,
    /// The episode ended after this step; the next stored step belongs to a
    /// fresh episode.
    pub done: Vec<bool>,
    /// Value of the successor state on `done` steps (0 after a termination,
    /// the critic's estimate after a time-out).
    pub terminal_value: Vec<f64>,
    /// Value of the state following the last step.
    pub bootstrap: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    fn check(&self) -> Result<()> {
        let n = self.rewards.len();
        if [self.values.len(), self.survival.len(), self.done.len(), self.terminal_value.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err(Error::Shape("trajectory columns differ in length".into()));
        }
        Ok(())
    }
}

/// Advantages and returns (`advantage + value`) without normalisation.
///
/// `δ_t = r_t + γ s_t V(x_{t+1}) − V(x_t)`, `A_t = δ_t + γ λ s_t A_{t+1}`,
/// with the recursion cut at episode ends.
pub fn compute_gae(traj: &Trajectory, gamma: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    traj.check()?;
    let n = traj.len();
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = traj.bootstrap;
    for t in (0..n).rev() {
        let s = traj.survival[t];
        let (v_next, a_next) = if traj.done[t] {
            (traj.terminal_value[t], 0.0)
        } else {
            (next_value, next_adv)
        };
        let td = traj.rewards[t] + gamma * s * v_next - traj.values[t];
        adv[t] = td + gamma * lambda * s * a_next;
        next_adv = adv[t];
        next_value = traj.values[t];
    }
    let returns = adv.iter().zip(&traj.values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Zero mean, unit variance; a constant batch becomes all zeros.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    for a in adv {
        *a = if std > 1e-12 { (*a - mean) / std } else { 0.0 };
    }
}
