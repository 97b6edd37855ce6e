//! Dense CHW layer kernels with hand-written backward passes.
//!
//! Tensors are `Array3<f64>` in standard (C, H, W) layout. Weights are flat
//! slices in `[out, in, k, k]` order.

use ndarray::Array3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Conv {
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub stride: usize,
}

impl Conv {
    pub const fn new(in_c: usize, out_c: usize, k: usize, stride: usize) -> Self {
        Self {
            in_c,
            out_c,
            k,
            stride,
        }
    }

    pub fn weight_len(&self) -> usize {
        self.out_c * self.in_c * self.k * self.k
    }

    fn pad(&self) -> usize {
        self.k / 2
    }

    pub fn out_dims(&self, h: usize, w: usize) -> (usize, usize) {
        let p = self.pad();
        ((h + 2 * p - self.k) / self.stride + 1, (w + 2 * p - self.k) / self.stride + 1)
    }

    /// Output columns `x` whose input column `x·s + kx − p` lies in `[0, n)`.
    fn valid_range(&self, tap: usize, n_in: usize, n_out: usize) -> (usize, usize) {
        let p = self.pad();
        let s = self.stride;
        // x·s + tap >= p
        let lo = if tap >= p { 0 } else { (p - tap).div_ceil(s) };
        // x·s + tap - p <= n_in - 1
        let hi = if n_in + p < tap + 1 {
            0
        } else {
            ((n_in + p - tap - 1) / s + 1).min(n_out)
        };
        (lo, hi.max(lo))
    }

    pub fn forward(&self, weight: &[f64], bias: &[f64], input: &Array3<f64>) -> Array3<f64> {
        let (c, h, w) = input.dim();
        debug_assert_eq!(c, self.in_c);
        let (oh, ow) = self.out_dims(h, w);
        let mut out = Array3::<f64>::zeros((self.out_c, oh, ow));
        let src = input.as_slice().expect("standard layout");
        let dst = out.as_slice_mut().expect("standard layout");
        let (k, s, p) = (self.k, self.stride, self.pad());
        for o in 0..self.out_c {
            let plane = &mut dst[o * oh * ow..(o + 1) * oh * ow];
            plane.fill(bias[o]);
            for i in 0..self.in_c {
                let inp = &src[i * h * w..(i + 1) * h * w];
                for ky in 0..k {
                    let (y0, y1) = self.valid_range(ky, h, oh);
                    for kx in 0..k {
                        let wv = weight[((o * self.in_c + i) * k + ky) * k + kx];
                        if wv == 0.0 {
                            continue;
                        }
                        let (x0, x1) = self.valid_range(kx, w, ow);
                        for y in y0..y1 {
                            let iy = y * s + ky - p;
                            let row_in = &inp[iy * w..(iy + 1) * w];
                            let row_out = &mut plane[y * ow..(y + 1) * ow];
                            if s == 1 {
                                let off = kx as isize - p as isize;
                                for x in x0..x1 {
                                    row_out[x] += wv * row_in[(x as isize + off) as usize];
                                }
                            } else {
                                for x in x0..x1 {
                                    row_out[x] += wv * row_in[x * s + kx - p];
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Accumulates weight/bias gradients and, when requested, the input gradient.
    pub fn backward(
        &self,
        weight: &[f64],
        input: &Array3<f64>,
        dout: &Array3<f64>,
        dweight: &mut [f64],
        dbias: &mut [f64],
        mut dinput: Option<&mut Array3<f64>>,
    ) {
        let (_, h, w) = input.dim();
        let (_, oh, ow) = dout.dim();
        let src = input.as_slice().expect("standard layout");
        let g = dout.as_slice().expect("standard layout");
        let (k, s, p) = (self.k, self.stride, self.pad());
        let mut din = dinput.as_mut().map(|a| a.as_slice_mut().expect("standard layout"));
        for o in 0..self.out_c {
            let gplane = &g[o * oh * ow..(o + 1) * oh * ow];
            dbias[o] += gplane.iter().sum::<f64>();
            for i in 0..self.in_c {
                let inp = &src[i * h * w..(i + 1) * h * w];
                for ky in 0..k {
                    let (y0, y1) = self.valid_range(ky, h, oh);
                    for kx in 0..k {
                        let widx = ((o * self.in_c + i) * k + ky) * k + kx;
                        let wv = weight[widx];
                        let (x0, x1) = self.valid_range(kx, w, ow);
                        let mut acc = 0.0;
                        for y in y0..y1 {
                            let iy = y * s + ky - p;
                            let row_in = &inp[iy * w..(iy + 1) * w];
                            let row_g = &gplane[y * ow..(y + 1) * ow];
                            for x in x0..x1 {
                                acc += row_g[x] * row_in[x * s + kx - p];
                            }
                            if let Some(din) = din.as_deref_mut() {
                                let row_d = &mut din[i * h * w + iy * w..i * h * w + (iy + 1) * w];
                                for x in x0..x1 {
                                    row_d[x * s + kx - p] += wv * row_g[x];
                                }
                            }
                        }
                        dweight[widx] += acc;
                    }
                }
            }
        }
    }
}

/// Source indices and weights for a 2× bilinear resize along one axis
/// (half-pixel centers, edge clamped).
fn upsample_taps(n_in: usize) -> Vec<(usize, usize, f64, f64)> {
    (0..2 * n_in)
        .map(|o| {
            let src = ((o as f64 + 0.5) / 2.0 - 0.5).max(0.0);
            let i0 = (src.floor() as usize).min(n_in - 1);
            let i1 = (i0 + 1).min(n_in - 1);
            let t = src - i0 as f64;
            (i0, i1, 1.0 - t, t)
        })
        .collect()
}

pub(crate) fn upsample2(input: &Array3<f64>) -> Array3<f64> {
    let (c, h, w) = input.dim();
    let (ty, tx) = (upsample_taps(h), upsample_taps(w));
    let mut out = Array3::<f64>::zeros((c, 2 * h, 2 * w));
    let src = input.as_slice().expect("standard layout");
    let dst = out.as_slice_mut().expect("standard layout");
    let mut row = vec![0.0; 2 * w];
    for ch in 0..c {
        let inp = &src[ch * h * w..(ch + 1) * h * w];
        let outp = &mut dst[ch * 4 * h * w..(ch + 1) * 4 * h * w];
        for (oy, &(y0, y1, wy0, wy1)) in ty.iter().enumerate() {
            for (ox, &(x0, x1, wx0, wx1)) in tx.iter().enumerate() {
                let a = wy0 * inp[y0 * w + x0] + wy1 * inp[y1 * w + x0];
                let b = wy0 * inp[y0 * w + x1] + wy1 * inp[y1 * w + x1];
                row[ox] = wx0 * a + wx1 * b;
            }
            outp[oy * 2 * w..(oy + 1) * 2 * w].copy_from_slice(&row);
        }
    }
    out
}

pub(crate) fn upsample2_backward(dout: &Array3<f64>) -> Array3<f64> {
    let (c, oh, ow) = dout.dim();
    let (h, w) = (oh / 2, ow / 2);
    let (ty, tx) = (upsample_taps(h), upsample_taps(w));
    let mut din = Array3::<f64>::zeros((c, h, w));
    let g = dout.as_slice().expect("standard layout");
    let d = din.as_slice_mut().expect("standard layout");
    for ch in 0..c {
        let gp = &g[ch * oh * ow..(ch + 1) * oh * ow];
        let dp = &mut d[ch * h * w..(ch + 1) * h * w];
        for (oy, &(y0, y1, wy0, wy1)) in ty.iter().enumerate() {
            for (ox, &(x0, x1, wx0, wx1)) in tx.iter().enumerate() {
                let v = gp[oy * ow + ox];
                dp[y0 * w + x0] += wy0 * wx0 * v;
                dp[y1 * w + x0] += wy1 * wx0 * v;
                dp[y0 * w + x1] += wy0 * wx1 * v;
                dp[y1 * w + x1] += wy1 * wx1 * v;
            }
        }
    }
    din
}

pub(crate) fn relu_inplace(t: &mut Array3<f64>) {
    t.mapv_inplace(|v| v.max(0.0));
}

/// Zero the gradient wherever the forward activation was clipped.
pub(crate) fn relu_backward_inplace(grad: &mut Array3<f64>, activated: &Array3<f64>) {
    ndarray::Zip::from(grad).and(activated).for_each(|g, a| {
        if *a <= 0.0 {
            *g = 0.0;
        }
    });
}

pub(crate) fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z
    } else {
        z.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Stack two tensors along the channel axis.
pub(crate) fn concat(a: &Array3<f64>, b: &Array3<f64>) -> Array3<f64> {
    ndarray::concatenate(ndarray::Axis(0), &[a.view(), b.view()])
        .expect("matching spatial dims")
        .as_standard_layout()
        .into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: (usize, usize, usize), rng: &mut ChaCha8Rng) -> Array3<f64> {
        Array3::from_shape_fn(shape, |_| rng.gen_range(-1.0..1.0))
    }

    /// Direct definition with explicit zero padding.
    fn conv_reference(conv: &Conv, w: &[f64], b: &[f64], x: &Array3<f64>) -> Array3<f64> {
        let (_, h, wd) = x.dim();
        let (oh, ow) = conv.out_dims(h, wd);
        let p = conv.k as isize / 2;
        Array3::from_shape_fn((conv.out_c, oh, ow), |(o, y, xx)| {
            let mut acc = b[o];
            for i in 0..conv.in_c {
                for ky in 0..conv.k {
                    for kx in 0..conv.k {
                        let iy = (y * conv.stride) as isize + ky as isize - p;
                        let ix = (xx * conv.stride) as isize + kx as isize - p;
                        if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < wd {
                            acc += w[((o * conv.in_c + i) * conv.k + ky) * conv.k + kx]
                                * x[[i, iy as usize, ix as usize]];
                        }
                    }
                }
            }
            acc
        })
    }

    #[test]
    fn conv_matches_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for conv in [Conv::new(3, 4, 3, 2), Conv::new(2, 3, 3, 1), Conv::new(5, 2, 1, 1)] {
            for (h, w) in [(8, 12), (7, 5)] {
                let x = random((conv.in_c, h, w), &mut rng);
                let wt: Vec<f64> = (0..conv.weight_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let b: Vec<f64> = (0..conv.out_c).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let got = conv.forward(&wt, &b, &x);
                let want = conv_reference(&conv, &wt, &b, &x);
                assert_eq!(got.dim(), want.dim());
                for (a, b) in got.iter().zip(want.iter()) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn conv_backward_is_adjoint() {
        // <dout, conv(x)> is linear in x and w: check gradients via the
        // adjoint identity and finite differences on the weights.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let conv = Conv::new(3, 2, 3, 2);
        let x = random((3, 9, 10), &mut rng);
        let wt: Vec<f64> = (0..conv.weight_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = vec![0.1, -0.2];
        let y = conv.forward(&wt, &b, &x);
        let g = random(y.dim(), &mut rng);
        let mut dw = vec![0.0; wt.len()];
        let mut db = vec![0.0; 2];
        let mut dx = Array3::zeros(x.dim());
        conv.backward(&wt, &x, &g, &mut dw, &mut db, Some(&mut dx));

        let objective = |wt: &[f64], x: &Array3<f64>| (&conv.forward(wt, &b, x) * &g).sum();
        let h = 1e-6;
        for idx in [0, 7, 20, wt.len() - 1] {
            let mut up = wt.clone();
            up[idx] += h;
            let mut dn = wt.clone();
            dn[idx] -= h;
            let fd = (objective(&up, &x) - objective(&dn, &x)) / (2.0 * h);
            assert!((fd - dw[idx]).abs() < 1e-7, "w[{idx}]: {fd} vs {}", dw[idx]);
        }
        for idx in [[0, 0, 0], [1, 4, 5], [2, 8, 9]] {
            let mut up = x.clone();
            up[idx] += h;
            let mut dn = x.clone();
            dn[idx] -= h;
            let fd = (objective(&wt, &up) - objective(&wt, &dn)) / (2.0 * h);
            assert!((fd - dx[idx]).abs() < 1e-7);
        }
        assert!((db[0] - g.index_axis(ndarray::Axis(0), 0).sum()).abs() < 1e-12);
    }

    #[test]
    fn upsample_preserves_constants_and_is_adjoint() {
        let c = Array3::from_elem((2, 3, 4), 1.5);
        assert!(upsample2(&c).iter().all(|v| (v - 1.5).abs() < 1e-15));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random((2, 3, 4), &mut rng);
        let g = random((2, 6, 8), &mut rng);
        let lhs = (&upsample2(&x) * &g).sum();
        let rhs = (&x * &upsample2_backward(&g)).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn stable_activations() {
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(softplus(100.0), 100.0);
        assert!(softplus(-800.0) >= 0.0);
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }
}
