use super::Real;
use crate::error::{Error, Result};

/// One stage of a feed-forward chain. Parameters live in the owning
/// network's flat vector; a layer only knows its slice layout.
#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    /// `y = W x + b`, weights row-major `[outputs][inputs]`, bias after.
    Dense { inputs: usize, outputs: usize },
    /// Same-padded stride-1 convolution, kernel `[out][in][k][k]`, bias after.
    Conv {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        height: usize,
        width: usize,
    },
    /// 2x2 average pooling, halves both spatial dimensions.
    AvgPool {
        channels: usize,
        height: usize,
        width: usize,
    },
    Relu,
    Elu,
}

impl Layer {
    pub fn param_count(&self) -> usize {
        match *self {
            Layer::Dense { inputs, outputs } => inputs * outputs + outputs,
            Layer::Conv {
                in_ch,
                out_ch,
                kernel,
                ..
            } => out_ch * in_ch * kernel * kernel + out_ch,
            _ => 0,
        }
    }

    /// Named parameter tensors in storage order.
    pub fn param_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        match *self {
            Layer::Dense { inputs, outputs } => {
                vec![("weight", vec![outputs, inputs]), ("bias", vec![outputs])]
            }
            Layer::Conv {
                in_ch,
                out_ch,
                kernel,
                ..
            } => vec![
                ("weight", vec![out_ch, in_ch, kernel, kernel]),
                ("bias", vec![out_ch]),
            ],
            _ => Vec::new(),
        }
    }

    /// Weight count and (fan_in, fan_out) for uniform fan-based init.
    pub(crate) fn weight_fans(&self) -> Option<(usize, usize, usize)> {
        match *self {
            Layer::Dense { inputs, outputs } => Some((inputs * outputs, inputs, outputs)),
            Layer::Conv {
                in_ch,
                out_ch,
                kernel,
                ..
            } => {
                let kk = kernel * kernel;
                Some((out_ch * in_ch * kk, in_ch * kk, out_ch * kk))
            }
            _ => None,
        }
    }

    pub fn output_len(&self, input_len: usize) -> Result<usize> {
        let check = |expected: usize| {
            if expected == input_len {
                Ok(())
            } else {
                Err(Error::Shape(format!(
                    "{self:?} expects input length {expected}, got {input_len}"
                )))
            }
        };
        match *self {
            Layer::Dense { inputs, outputs } => {
                check(inputs)?;
                Ok(outputs)
            }
            Layer::Conv {
                in_ch,
                out_ch,
                kernel,
                height,
                width,
            } => {
                if kernel % 2 == 0 {
                    return Err(Error::Invalid(format!("conv kernel {kernel} must be odd")));
                }
                if kernel > height.min(width) {
                    return Err(Error::Invalid(format!(
                        "conv kernel {kernel} larger than {height}x{width} image"
                    )));
                }
                check(in_ch * height * width)?;
                Ok(out_ch * height * width)
            }
            Layer::AvgPool {
                channels,
                height,
                width,
            } => {
                if height % 2 != 0 || width % 2 != 0 {
                    return Err(Error::Invalid(format!(
                        "avg-pool needs even dimensions, got {height}x{width}"
                    )));
                }
                check(channels * height * width)?;
                Ok(channels * height * width / 4)
            }
            Layer::Relu | Layer::Elu => Ok(input_len),
        }
    }

    pub(crate) fn forward<S: Real>(&self, p: &[S], x: &[S], y: &mut Vec<S>) {
        match *self {
            Layer::Dense { inputs, outputs } => {
                let (w, b) = p.split_at(inputs * outputs);
                y.clear();
                y.extend((0..outputs).map(|o| {
                    let row = &w[o * inputs..(o + 1) * inputs];
                    S::of(dot64(row, x) + b[o].f64())
                }));
            }
            Layer::Conv {
                in_ch,
                out_ch,
                kernel,
                height,
                width,
            } => {
                y.clear();
                y.resize(out_ch * height * width, S::zero());
                conv_forward(in_ch, out_ch, kernel, height, width, p, x, y);
            }
            Layer::AvgPool {
                channels,
                height,
                width,
            } => {
                let (oh, ow) = (height / 2, width / 2);
                let quarter = S::of(0.25);
                y.clear();
                y.reserve(channels * oh * ow);
                for c in 0..channels {
                    let plane = &x[c * height * width..(c + 1) * height * width];
                    for r in 0..oh {
                        let top = &plane[2 * r * width..(2 * r + 1) * width];
                        let bot = &plane[(2 * r + 1) * width..(2 * r + 2) * width];
                        for col in 0..ow {
                            let s = top[2 * col] + top[2 * col + 1] + bot[2 * col] + bot[2 * col + 1];
                            y.push(s * quarter);
                        }
                    }
                }
            }
            Layer::Relu => {
                y.clear();
                y.extend(x.iter().map(|&v| if v > S::zero() { v } else { S::zero() }));
            }
            Layer::Elu => {
                y.clear();
                y.extend(x.iter().map(|&v| elu(v)));
            }
        }
    }

    /// Accumulates parameter gradients into `dp` and writes the input
    /// gradient into `dx`. `x` is the input recorded during forward.
    pub(crate) fn backward<S: Real>(
        &self,
        p: &[S],
        x: &[S],
        dy: &[S],
        dp: &mut [S],
        dx: &mut Vec<S>,
    ) {
        dx.clear();
        dx.resize(x.len(), S::zero());
        match *self {
            Layer::Dense { inputs, outputs } => {
                let (w, _) = p.split_at(inputs * outputs);
                let (dw, db) = dp.split_at_mut(inputs * outputs);
                let mut acc = vec![0.0f64; inputs];
                for o in 0..outputs {
                    let g = dy[o];
                    db[o] += g;
                    if g == S::zero() {
                        continue;
                    }
                    let row = &w[o * inputs..(o + 1) * inputs];
                    let drow = &mut dw[o * inputs..(o + 1) * inputs];
                    let g64 = g.f64();
                    for i in 0..inputs {
                        drow[i] += g * x[i];
                        acc[i] += g64 * row[i].f64();
                    }
                }
                for (d, a) in dx.iter_mut().zip(&acc) {
                    *d = S::of(*a);
                }
            }
            Layer::Conv {
                in_ch,
                out_ch,
                kernel,
                height,
                width,
            } => conv_backward(in_ch, out_ch, kernel, height, width, p, x, dy, dp, dx),
            Layer::AvgPool {
                channels,
                height,
                width,
            } => {
                let (oh, ow) = (height / 2, width / 2);
                let quarter = S::of(0.25);
                for c in 0..channels {
                    for r in 0..oh {
                        for col in 0..ow {
                            let g = dy[(c * oh + r) * ow + col] * quarter;
                            let base = c * height * width + 2 * r * width + 2 * col;
                            dx[base] = g;
                            dx[base + 1] = g;
                            dx[base + width] = g;
                            dx[base + width + 1] = g;
                        }
                    }
                }
            }
            Layer::Relu => {
                for ((d, &v), &g) in dx.iter_mut().zip(x).zip(dy) {
                    *d = if v > S::zero() { g } else { S::zero() };
                }
            }
            Layer::Elu => {
                for ((d, &v), &g) in dx.iter_mut().zip(x).zip(dy) {
                    *d = if v > S::zero() { g } else { g * v.exp() };
                }
            }
        }
    }
}

#[inline]
fn elu<S: Real>(v: S) -> S {
    if v > S::zero() {
        v
    } else {
        v.exp() - S::one()
    }
}

#[inline]
pub(crate) fn dot64<S: Real>(a: &[S], b: &[S]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.f64() * y.f64()).sum()
}

/// Range of output indices `o` such that `o + shift` lies in `[0, len)`.
#[inline]
fn valid_range(len: usize, shift: isize) -> (usize, usize) {
    let lo = (-shift).max(0) as usize;
    let hi = (len as isize - shift).min(len as isize).max(0) as usize;
    (lo, hi.max(lo))
}

#[allow(clippy::too_many_arguments)]
fn conv_forward<S: Real>(
    in_ch: usize,
    out_ch: usize,
    k: usize,
    h: usize,
    w: usize,
    p: &[S],
    x: &[S],
    y: &mut [S],
) {
    let (kern, bias) = p.split_at(out_ch * in_ch * k * k);
    let pad = (k / 2) as isize;
    let plane = h * w;
    for co in 0..out_ch {
        let out = &mut y[co * plane..(co + 1) * plane];
        out.fill(bias[co]);
        for ci in 0..in_ch {
            let img = &x[ci * plane..(ci + 1) * plane];
            for ky in 0..k {
                let sy = ky as isize - pad;
                let (r0, r1) = valid_range(h, sy);
                for kx in 0..k {
                    let wv = kern[((co * in_ch + ci) * k + ky) * k + kx];
                    let sx = kx as isize - pad;
                    let (c0, c1) = valid_range(w, sx);
                    for r in r0..r1 {
                        let ir = (r as isize + sy) as usize;
                        let orow = &mut out[r * w + c0..r * w + c1];
                        let start = (c0 as isize + sx) as usize;
                        let irow = &img[ir * w + start..ir * w + start + (c1 - c0)];
                        for (o, &i) in orow.iter_mut().zip(irow) {
                            *o += wv * i;
                        }
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_backward<S: Real>(
    in_ch: usize,
    out_ch: usize,
    k: usize,
    h: usize,
    w: usize,
    p: &[S],
    x: &[S],
    dy: &[S],
    dp: &mut [S],
    dx: &mut [S],
) {
    let nk = out_ch * in_ch * k * k;
    let kern = &p[..nk];
    let (dkern, dbias) = dp.split_at_mut(nk);
    let pad = (k / 2) as isize;
    let plane = h * w;
    for co in 0..out_ch {
        let g = &dy[co * plane..(co + 1) * plane];
        dbias[co] += S::of(g.iter().map(|v| v.f64()).sum::<f64>());
        for ci in 0..in_ch {
            let img = &x[ci * plane..(ci + 1) * plane];
            let dimg = &mut dx[ci * plane..(ci + 1) * plane];
            for ky in 0..k {
                let sy = ky as isize - pad;
                let (r0, r1) = valid_range(h, sy);
                for kx in 0..k {
                    let idx = ((co * in_ch + ci) * k + ky) * k + kx;
                    let wv = kern[idx];
                    let sx = kx as isize - pad;
                    let (c0, c1) = valid_range(w, sx);
                    let start = (c0 as isize + sx) as usize;
                    let mut acc = 0.0f64;
                    for r in r0..r1 {
                        let ir = (r as isize + sy) as usize;
                        let grow = &g[r * w + c0..r * w + c1];
                        let span = ir * w + start..ir * w + start + (c1 - c0);
                        let irow = &img[span.clone()];
                        let mut row_acc = S::zero();
                        for (&gv, &iv) in grow.iter().zip(irow) {
                            row_acc += gv * iv;
                        }
                        acc += row_acc.f64();
                        for (d, &gv) in dimg[span].iter_mut().zip(grow) {
                            *d += wv * gv;
                        }
                    }
                    dkern[idx] += S::of(acc);
                }
            }
        }
    }
}

/// `weights · input + bias` for a row-major `[rows][cols]` matrix.
pub fn dense_forward<S: Real>(weights: &[S], bias: &[S], input: &[S]) -> Result<Vec<S>> {
    let rows = bias.len();
    if rows == 0 || weights.len() != rows * input.len() {
        return Err(Error::Shape(format!(
            "dense: {} weights for {} outputs and {} inputs",
            weights.len(),
            rows,
            input.len()
        )));
    }
    let cols = input.len();
    Ok((0..rows)
        .map(|r| S::of(dot64(&weights[r * cols..(r + 1) * cols], input) + bias[r].f64()))
        .collect())
}

/// Single-channel same-padded convolution of an `h`×`w` image with a
/// `k`×`k` kernel (zero padding, stride 1).
pub fn conv2d_same<S: Real>(kernel: &[S], k: usize, image: &[S], h: usize, w: usize) -> Result<Vec<S>> {
    if kernel.len() != k * k || image.len() != h * w {
        return Err(Error::Shape(format!(
            "conv2d: kernel {} for k={k}, image {} for {h}x{w}",
            kernel.len(),
            image.len()
        )));
    }
    let layer = Layer::Conv {
        in_ch: 1,
        out_ch: 1,
        kernel: k,
        height: h,
        width: w,
    };
    layer.output_len(h * w)?;
    let mut params = kernel.to_vec();
    params.push(S::zero());
    let mut out = Vec::new();
    layer.forward(&params, image, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_conv(kernel: &[f64], k: usize, img: &[f64], h: usize, w: usize) -> Vec<f64> {
        let p = (k / 2) as isize;
        let mut out = vec![0.0; h * w];
        for r in 0..h as isize {
            for c in 0..w as isize {
                let mut s = 0.0;
                for ky in 0..k as isize {
                    for kx in 0..k as isize {
                        let (ir, ic) = (r + ky - p, c + kx - p);
                        if ir >= 0 && ir < h as isize && ic >= 0 && ic < w as isize {
                            s += kernel[(ky * k as isize + kx) as usize]
                                * img[(ir * w as isize + ic) as usize];
                        }
                    }
                }
                out[(r * w as isize + c) as usize] = s;
            }
        }
        out
    }

    #[test]
    fn dense_identity_and_zero() {
        let y = dense_forward(&[1.0f64, 0.0, 0.0, 1.0], &[0.0, 0.0], &[1.0, 2.0]).unwrap();
        assert_eq!(y, vec![1.0, 2.0]);
        let y = dense_forward(&[0.0f64, 0.0], &[3.0], &[7.0, -4.0]).unwrap();
        assert_eq!(y, vec![3.0]);
    }

    #[test]
    fn dense_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = dense_forward(&w, &b, &x).unwrap();
        for r in 0..3 {
            let mut s = b[r];
            for c in 0..2 {
                s += w[r * 2 + c] * x[c];
            }
            assert!((y[r] - s).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_shape_mismatch() {
        assert!(matches!(
            dense_forward(&[1.0f32; 5], &[0.0; 2], &[1.0; 2]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn conv_identity_zero_and_box() {
        let img: Vec<f64> = (0..25).map(|i| i as f64).collect();
        assert_eq!(conv2d_same(&[1.0], 1, &img, 5, 5).unwrap(), img);
        let z = conv2d_same(&[0.0; 9], 3, &img, 5, 5).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
        let boxed = conv2d_same(&[1.0; 9], 3, &img, 5, 5).unwrap();
        let oracle = naive_conv(&[1.0; 9], 3, &img, 5, 5);
        assert_eq!(boxed, oracle);
        // interior pixel (2,2) sums 6..8 + 11..13 + 16..18
        assert_eq!(boxed[12], 108.0);
    }

    #[test]
    fn conv_random_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for &(k, h, w) in &[(3, 6, 7), (5, 9, 5), (7, 8, 8)] {
            let kern: Vec<f64> = (0..k * k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let img: Vec<f64> = (0..h * w).map(|_| rng.random_range(0.0..1.0)).collect();
            let a = conv2d_same(&kern, k, &img, h, w).unwrap();
            let b = naive_conv(&kern, k, &img, h, w);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv_rejects_even_and_oversized_kernels() {
        let img = vec![0.0f32; 16];
        assert!(matches!(conv2d_same(&[0.0; 4], 2, &img, 4, 4), Err(Error::Invalid(_))));
        assert!(matches!(conv2d_same(&[0.0; 25], 5, &img, 4, 4), Err(Error::Invalid(_))));
    }
}
