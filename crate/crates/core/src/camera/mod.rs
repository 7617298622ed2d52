//! Tracking side camera, software rasterizer and the clip ring buffer.

mod buffer;
mod raster;

pub use buffer::ClipBuffer;
pub use raster::{draw, draw_all, draw_ground, Primitive, Shape, View};
pub(crate) use raster::rotate;

use crate::error::{Error, Result};
use crate::sim::{RobotConfig, RobotState};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

pub const FRAME_SIZE: usize = 64;
pub const FRAME_PIXELS: usize = FRAME_SIZE * FRAME_SIZE;
pub const CLIP_LEN: usize = 8;

pub const BACKGROUND: f32 = 0.05;
pub const GROUND: f32 = 0.3;
pub const RIGHT_LEG: f32 = 0.5;
pub const LEFT_LEG: f32 = 0.8;
pub const BASE: f32 = 1.0;

/// Spacing of the ground tick marks (m); they make forward motion visible
/// to a camera that follows the base.
pub const TICK_SPACING: f64 = 0.2;

const THIGH_RADIUS: f64 = 0.016;
const SHANK_RADIUS: f64 = 0.012;

/// Row-major 64x64 grayscale image with values in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub pixels: Vec<f32>,
}

impl Frame {
    pub fn filled(value: f32) -> Frame {
        Frame {
            pixels: vec![value; FRAME_PIXELS],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * FRAME_SIZE + col]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.pixels.iter().map(|&v| quantize(v)).collect()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Frame> {
        if bytes.len() != FRAME_PIXELS {
            return Err(Error::Shape(format!("frame needs {FRAME_PIXELS} bytes, got {}", bytes.len())));
        }
        Ok(Frame {
            pixels: bytes.iter().map(|&b| f32::from(b) / 255.0).collect(),
        })
    }

    /// Binary greymap (P5, maxval 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{FRAME_SIZE} {FRAME_SIZE}\n255\n").into_bytes();
        out.extend(self.to_bytes());
        out
    }

    pub fn save_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_pgm()).map_err(|e| Error::io(path, e))
    }

    pub fn load_pgm(path: impl AsRef<Path>) -> Result<Frame> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let header = format!("P5\n{FRAME_SIZE} {FRAME_SIZE}\n255\n");
        match bytes.strip_prefix(header.as_bytes()) {
            Some(body) => Frame::from_bytes(body).map_err(|e| Error::format(path, e.to_string())),
            None => Err(Error::format(path, "not a 64x64 P5 image")),
        }
    }
}

pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Eight frames, oldest first.
#[derive(Clone, Debug, PartialEq)]
pub struct Clip {
    frames: Vec<Frame>,
}

impl Clip {
    pub fn new(frames: Vec<Frame>) -> Result<Clip> {
        if frames.len() != CLIP_LEN {
            return Err(Error::Shape(format!("a clip holds {CLIP_LEN} frames, got {}", frames.len())));
        }
        if let Some(f) = frames.iter().find(|f| f.pixels.len() != FRAME_PIXELS) {
            return Err(Error::Shape(format!("frame with {} pixels", f.pixels.len())));
        }
        Ok(Clip { frames })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    /// Writes `<prefix>_<index>.pgm` for each frame, indices `first_step`,
    /// `first_step + spacing`, ...
    pub fn save_pgms(&self, dir: impl AsRef<Path>, prefix: &str, first_step: u64, spacing: u64) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (i, f) in self.frames.iter().enumerate() {
            f.save_pgm(dir.join(frame_file_name(prefix, first_step + spacing * i as u64)))?;
        }
        Ok(())
    }
}

pub fn frame_file_name(prefix: &str, step: u64) -> String {
    format!("{prefix}_{step:08}.pgm")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CameraPreset {
    Base,
    Cam1,
    Cam2,
    Cam3,
    Cam4,
}

impl CameraPreset {
    pub const ALL: [CameraPreset; 5] = [
        CameraPreset::Base,
        CameraPreset::Cam1,
        CameraPreset::Cam2,
        CameraPreset::Cam3,
        CameraPreset::Cam4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CameraPreset::Base => "base",
            CameraPreset::Cam1 => "cam1",
            CameraPreset::Cam2 => "cam2",
            CameraPreset::Cam3 => "cam3",
            CameraPreset::Cam4 => "cam4",
        }
    }
}

impl fmt::Display for CameraPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CameraPreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        CameraPreset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown camera preset '{s}'")))
    }
}

/// Side camera that follows the base horizontally.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraConfig {
    /// Horizontal offset of the view centre from the base (m); negative is
    /// behind the robot.
    pub offset: f64,
    /// Height of the view centre above the ground (m).
    pub height: f64,
    /// World half-width of the image (m).
    pub zoom: f64,
    pub tick_spacing: f64,
}

impl CameraConfig {
    pub fn preset(p: CameraPreset) -> CameraConfig {
        let (offset, height, zoom) = match p {
            CameraPreset::Base => (-0.1, 0.2, 0.55),
            CameraPreset::Cam1 => (-0.3, 0.25, 0.8),
            CameraPreset::Cam2 => (0.0, 0.45, 0.6),
            CameraPreset::Cam3 => (0.25, 0.05, 0.5),
            CameraPreset::Cam4 => (0.35, 0.2, 0.3),
        };
        CameraConfig {
            offset,
            height,
            zoom,
            tick_spacing: TICK_SPACING,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.zoom > 0.0 && self.zoom.is_finite()) {
            return Err(Error::Invalid(format!("camera zoom must be positive, got {}", self.zoom)));
        }
        if !(self.offset.is_finite() && self.height.is_finite() && self.tick_spacing >= 0.0) {
            return Err(Error::Invalid("camera offset, height and tick spacing must be finite".into()));
        }
        Ok(())
    }

    pub fn view(&self, base_x: f64) -> View {
        View {
            center: [base_x + self.offset, self.height],
            half_width: self.zoom,
        }
    }
}

impl Default for CameraConfig {
    fn default() -> Self {
        CameraConfig::preset(CameraPreset::Base)
    }
}

/// Robot drawn back to front: right legs, base, left legs.
pub fn robot_primitives(state: &RobotState, cfg: &RobotConfig) -> Vec<Primitive> {
    let sk = state.skeleton(cfg);
    let leg = |i: usize, intensity: f32| {
        [
            Primitive {
                shape: Shape::Capsule {
                    a: sk.hips[i],
                    b: sk.knees[i],
                    radius: THIGH_RADIUS,
                },
                intensity,
            },
            Primitive {
                shape: Shape::Capsule {
                    a: sk.knees[i],
                    b: sk.feet[i],
                    radius: SHANK_RADIUS,
                },
                intensity,
            },
        ]
    };
    let mut prims = Vec::with_capacity(9);
    for i in [1, 3] {
        prims.extend(leg(i, RIGHT_LEG));
    }
    prims.push(Primitive {
        shape: Shape::Rect {
            center: sk.base,
            half: [0.5 * cfg.body_length, 0.5 * cfg.body_height],
            angle: sk.pitch,
        },
        intensity: BASE,
    });
    for i in [0, 2] {
        prims.extend(leg(i, LEFT_LEG));
    }
    prims
}

pub fn render_frame(state: &RobotState, robot: &RobotConfig, cam: &CameraConfig) -> Frame {
    let view = cam.view(state.x);
    let mut frame = Frame::filled(BACKGROUND);
    draw_ground(&mut frame, &view, GROUND, cam.tick_spacing);
    draw_all(&mut frame, &robot_primitives(state, robot), &view);
    frame
}

/// Robot only, on a blank background.
pub fn render_robot_only(state: &RobotState, robot: &RobotConfig, cam: &CameraConfig) -> Frame {
    let mut frame = Frame::filled(BACKGROUND);
    draw_all(&mut frame, &robot_primitives(state, robot), &cam.view(state.x));
    frame
}

/// Time covered by a clip rendered every `interval` policy steps.
pub fn clip_span(interval: u64, dt: f64) -> f64 {
    (CLIP_LEN - 1) as f64 * interval as f64 * dt
}

#[cfg(test)]
mod tests;
