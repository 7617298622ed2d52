use crate::camera::{FRAME_PIXELS, FRAME_SIZE};
use crate::error::{Error, Result};
use crate::tensor::conv2d_same;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub const KERNEL_SIZES: [usize; 4] = [1, 3, 5, 7];

/// A random k x k filter and the clip-wide rescaling applied after it.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvKernel {
    pub size: usize,
    pub weights: Vec<f32>,
    /// Minimum and maximum of the filtered clip, mapped to 0 and 1.
    pub range: (f32, f32),
}

/// Filters one frame with `kernel` (no rescaling).
pub fn apply_kernel(kernel: &ConvKernel, frame: &[f32]) -> Result<Vec<f32>> {
    conv2d_same(&kernel.weights, kernel.size, frame, FRAME_SIZE, FRAME_SIZE)
}

/// Affine map of `pixels` so that `range` becomes [0, 1]; a flat range
/// maps everything to 0.
pub fn renormalize(pixels: &mut [f32], range: (f32, f32)) {
    let (lo, hi) = range;
    let span = hi - lo;
    for p in pixels {
        *p = if span > 1e-12 { ((*p - lo) / span).clamp(0.0, 1.0) } else { 0.0 };
    }
}

/// With probability `p`, filters every frame of the clip with one shared
/// random kernel and rescales the clip to [0, 1]. Returns the kernel used.
pub fn random_conv_augment<R: Rng + ?Sized>(pixels: &mut [f32], rng: &mut R, p: f64) -> Result<Option<ConvKernel>> {
    if pixels.len() % FRAME_PIXELS != 0 {
        return Err(Error::Shape(format!("{} pixels is not a whole number of frames", pixels.len())));
    }
    if p <= 0.0 || !rng.random_bool(p.min(1.0)) {
        return Ok(None);
    }
    let size = KERNEL_SIZES[rng.random_range(0..KERNEL_SIZES.len())];
    let weights: Vec<f32> = (0..size * size).map(|_| StandardNormal.sample(rng)).collect();
    let mut kernel = ConvKernel {
        size,
        weights,
        range: (0.0, 0.0),
    };
    let mut filtered = Vec::with_capacity(pixels.len());
    for frame in pixels.chunks_exact(FRAME_PIXELS) {
        filtered.extend(apply_kernel(&kernel, frame)?);
    }
    let lo = filtered.iter().copied().fold(f32::INFINITY, f32::min);
    let hi = filtered.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    kernel.range = (lo, hi);
    renormalize(&mut filtered, kernel.range);
    pixels.copy_from_slice(&filtered);
    Ok(Some(kernel))
}

/// One training example: clip pixels and a soft target.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub pixels: Vec<f32>,
    pub target: Vec<f32>,
}

/// Convex combination `λ a + (1 - λ) b` of paired samples, pixels and
/// targets alike.
pub fn mixup(a: &[Sample], b: &[Sample], lambdas: &[f64]) -> Result<Vec<Sample>> {
    if a.len() != b.len() || a.len() != lambdas.len() {
        return Err(Error::Shape(format!(
            "mixup of {} and {} samples with {} weights",
            a.len(),
            b.len(),
            lambdas.len()
        )));
    }
    a.iter()
        .zip(b)
        .zip(lambdas)
        .map(|((x, y), &lam)| {
            if x.pixels.len() != y.pixels.len() || x.target.len() != y.target.len() {
                return Err(Error::Shape("mixup pair shapes differ".into()));
            }
            let (l, m) = (lam as f32, 1.0 - lam as f32);
            let mix = |u: &[f32], v: &[f32]| u.iter().zip(v).map(|(&p, &q)| (l * p + m * q).clamp(0.0, 1.0)).collect();
            Ok(Sample {
                pixels: mix(&x.pixels, &y.pixels),
                target: mix(&x.target, &y.target),
            })
        })
        .collect()
}
