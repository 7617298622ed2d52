use super::{Frame, FRAME_SIZE};

/// Filled shapes in world coordinates (metres, z up).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    /// Segment `a`-`b` swept by a disc of radius `radius`.
    Capsule { a: [f64; 2], b: [f64; 2], radius: f64 },
    Ellipse { center: [f64; 2], axes: [f64; 2], angle: f64 },
    Rect { center: [f64; 2], half: [f64; 2], angle: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Primitive {
    pub shape: Shape,
    pub intensity: f32,
}

/// Orthographic view: world point `center` maps to the image centre and
/// `half_width` metres span half the image.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct View {
    pub center: [f64; 2],
    pub half_width: f64,
}

impl View {
    pub fn scale(&self) -> f64 {
        0.5 * FRAME_SIZE as f64 / self.half_width
    }

    /// World -> pixel (column, row) with continuous coordinates.
    pub fn project(&self, p: [f64; 2]) -> [f64; 2] {
        let s = self.scale();
        let h = 0.5 * FRAME_SIZE as f64;
        [h + (p[0] - self.center[0]) * s, h - (p[1] - self.center[1]) * s]
    }
}

pub(crate) fn rotate(v: [f64; 2], angle: f64) -> [f64; 2] {
    let (s, c) = angle.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

/// Shape in pixel space with a signed distance function (pixels).
enum PixelShape {
    Capsule { a: [f64; 2], b: [f64; 2], r: f64 },
    Ellipse { c: [f64; 2], ax: [f64; 2], cos: f64, sin: f64 },
    Rect { c: [f64; 2], half: [f64; 2], cos: f64, sin: f64 },
}

impl PixelShape {
    fn from_world(shape: &Shape, view: &View) -> PixelShape {
        let s = view.scale();
        match *shape {
            Shape::Capsule { a, b, radius } => PixelShape::Capsule {
                a: view.project(a),
                b: view.project(b),
                r: radius * s,
            },
            // image rows grow downwards, so angles flip sign
            Shape::Ellipse { center, axes, angle } => PixelShape::Ellipse {
                c: view.project(center),
                ax: [axes[0] * s, axes[1] * s],
                cos: angle.cos(),
                sin: -angle.sin(),
            },
            Shape::Rect { center, half, angle } => PixelShape::Rect {
                c: view.project(center),
                half: [half[0] * s, half[1] * s],
                cos: angle.cos(),
                sin: -angle.sin(),
            },
        }
    }

    /// Pixel-space bounding box `[x0, y0, x1, y1]`.
    fn bounds(&self) -> [f64; 4] {
        match *self {
            PixelShape::Capsule { a, b, r } => [a[0].min(b[0]) - r, a[1].min(b[1]) - r, a[0].max(b[0]) + r, a[1].max(b[1]) + r],
            PixelShape::Ellipse { c, ax, .. } => {
                let r = ax[0].max(ax[1]);
                [c[0] - r, c[1] - r, c[0] + r, c[1] + r]
            }
            PixelShape::Rect { c, half, .. } => {
                let r = half[0].hypot(half[1]);
                [c[0] - r, c[1] - r, c[0] + r, c[1] + r]
            }
        }
    }

    fn distance(&self, p: [f64; 2]) -> f64 {
        match *self {
            PixelShape::Capsule { a, b, r } => {
                let (pa, ba) = ([p[0] - a[0], p[1] - a[1]], [b[0] - a[0], b[1] - a[1]]);
                let len2 = ba[0] * ba[0] + ba[1] * ba[1];
                let t = if len2 > 0.0 {
                    ((pa[0] * ba[0] + pa[1] * ba[1]) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                (pa[0] - t * ba[0]).hypot(pa[1] - t * ba[1]) - r
            }
            PixelShape::Ellipse { c, ax, cos, sin } => {
                let d = [p[0] - c[0], p[1] - c[1]];
                let local = [cos * d[0] + sin * d[1], -sin * d[0] + cos * d[1]];
                let k0 = (local[0] / ax[0]).hypot(local[1] / ax[1]);
                let k1 = (local[0] / (ax[0] * ax[0])).hypot(local[1] / (ax[1] * ax[1]));
                if k1 == 0.0 {
                    -ax[0].min(ax[1])
                } else {
                    k0 * (k0 - 1.0) / k1
                }
            }
            PixelShape::Rect { c, half, cos, sin } => {
                let d = [p[0] - c[0], p[1] - c[1]];
                let local = [cos * d[0] + sin * d[1], -sin * d[0] + cos * d[1]];
                let q = [local[0].abs() - half[0], local[1].abs() - half[1]];
                q[0].max(0.0).hypot(q[1].max(0.0)) + q[0].max(q[1]).min(0.0)
            }
        }
    }
}

/// Alpha-blends one anti-aliased primitive into `frame`.
pub fn draw(frame: &mut Frame, prim: &Primitive, view: &View) {
    let shape = PixelShape::from_world(&prim.shape, view);
    let [x0, y0, x1, y1] = shape.bounds();
    let n = FRAME_SIZE as f64;
    if x1 < -1.0 || y1 < -1.0 || x0 > n + 1.0 || y0 > n + 1.0 {
        return;
    }
    let c0 = (x0 - 1.0).floor().max(0.0) as usize;
    let r0 = (y0 - 1.0).floor().max(0.0) as usize;
    let c1 = ((x1 + 1.0).ceil().min(n) as usize).min(FRAME_SIZE);
    let r1 = ((y1 + 1.0).ceil().min(n) as usize).min(FRAME_SIZE);
    let value = prim.intensity;
    for row in r0..r1 {
        for col in c0..c1 {
            let d = shape.distance([col as f64 + 0.5, row as f64 + 0.5]);
            let alpha = (0.5 - d).clamp(0.0, 1.0) as f32;
            if alpha > 0.0 {
                let px = &mut frame.pixels[row * FRAME_SIZE + col];
                *px += alpha * (value - *px);
            }
        }
    }
}

/// Ground line at z = 0 with world-fixed tick marks every `tick_spacing`
/// metres hanging below it.
pub fn draw_ground(frame: &mut Frame, view: &View, intensity: f32, tick_spacing: f64) {
    let s = view.scale();
    let row = view.project([0.0, 0.0])[1];
    let thickness = 0.75;
    for r in 0..FRAME_SIZE {
        let d = ((r as f64 + 0.5) - row).abs() - thickness;
        let alpha = (0.5 - d).clamp(0.0, 1.0) as f32;
        if alpha > 0.0 {
            for px in &mut frame.pixels[r * FRAME_SIZE..(r + 1) * FRAME_SIZE] {
                *px += alpha * (intensity - *px);
            }
        }
    }
    if tick_spacing <= 0.0 {
        return;
    }
    let half_span = 0.5 * FRAME_SIZE as f64 / s + tick_spacing;
    let first = ((view.center[0] - half_span) / tick_spacing).floor() as i64;
    let last = ((view.center[0] + half_span) / tick_spacing).ceil() as i64;
    let tick_len = 3.0 / s;
    let radius = 0.5 / s;
    for n in first..=last {
        let x = n as f64 * tick_spacing;
        let tick = Primitive {
            shape: Shape::Capsule {
                a: [x, 0.0],
                b: [x, -tick_len],
                radius,
            },
            intensity,
        };
        draw(frame, &tick, view);
    }
}

/// Draws primitives in order, later ones on top.
pub fn draw_all(frame: &mut Frame, prims: &[Primitive], view: &View) {
    for p in prims {
        draw(frame, p, view);
    }
}
