use super::{ConstraintValues, RobotState};
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub time: f64,
    pub x: f64,
    pub z: f64,
    pub pitch: f64,
    pub q: [f64; 8],
    pub contact: [bool; 4],
    pub violations: usize,
}

/// Collects one CSV row per simulated step.
#[derive(Clone, Debug, Default)]
pub struct TrajectoryRecorder {
    pub rows: Vec<TrajectoryRow>,
}

impl TrajectoryRecorder {
    pub fn record(&mut self, state: &RobotState, cv: &ConstraintValues) {
        self.rows.push(TrajectoryRow {
            time: state.time,
            x: state.x,
            z: state.z,
            pitch: state.pitch,
            q: state.q,
            contact: state.contact,
            violations: cv.violations(),
        });
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,x,z,pitch");
        for name in super::JOINT_NAMES {
            out.push(',');
            out.push_str(name);
        }
        for leg in super::LEG_NAMES {
            let _ = write!(out, ",contact_{leg}");
        }
        out.push_str(",violations\n");
        for r in &self.rows {
            let _ = write!(out, "{:.4},{:.6},{:.6},{:.6}", r.time, r.x, r.z, r.pitch);
            for q in r.q {
                let _ = write!(out, ",{q:.6}");
            }
            for c in r.contact {
                let _ = write!(out, ",{}", c as u8);
            }
            let _ = writeln!(out, ",{}", r.violations);
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}
