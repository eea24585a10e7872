//! Independent reference implementations used by the integration suites.
#![allow(dead_code)]

use echoseg::data::image::Mask;
use echoseg::geometry::Point;
use rand::Rng;

/// Direct-sum 2-D convolution over `[c][h][w]` data.
#[allow(clippy::too_many_arguments)]
pub fn conv_reference(
    x: &[f64],
    (cin, h, w): (usize, usize, usize),
    weight: &[f64],
    bias: &[f64],
    cout: usize,
    k: usize,
    stride: usize,
    dilation: usize,
    padding: usize,
) -> (Vec<f64>, usize, usize) {
    let ext = (k - 1) * dilation + 1;
    let oh = (h + 2 * padding - ext) / stride + 1;
    let ow = (w + 2 * padding - ext) / stride + 1;
    let mut y = vec![0.0; cout * oh * ow];
    for o in 0..cout {
        for i in 0..oh {
            for j in 0..ow {
                let mut acc = bias[o];
                for c in 0..cin {
                    for u in 0..k {
                        for v in 0..k {
                            let r = (i * stride + u * dilation) as isize - padding as isize;
                            let s = (j * stride + v * dilation) as isize - padding as isize;
                            if r < 0 || s < 0 || r >= h as isize || s >= w as isize {
                                continue;
                            }
                            acc += x[(c * h + r as usize) * w + s as usize]
                                * weight[((o * cin + c) * k + u) * k + v];
                        }
                    }
                }
                y[(o * oh + i) * ow + j] = acc;
            }
        }
    }
    (y, oh, ow)
}

/// Kernel with `dilation − 1` zeros between taps.
pub fn inflate_kernel(weight: &[f64], cout: usize, cin: usize, k: usize, dilation: usize) -> (Vec<f64>, usize) {
    let kk = (k - 1) * dilation + 1;
    let mut out = vec![0.0; cout * cin * kk * kk];
    for o in 0..cout {
        for c in 0..cin {
            for u in 0..k {
                for v in 0..k {
                    out[((o * cin + c) * kk + u * dilation) * kk + v * dilation] =
                        weight[((o * cin + c) * k + u) * k + v];
                }
            }
        }
    }
    (out, kk)
}

pub fn random_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn random_mask<R: Rng>(rng: &mut R, w: usize, h: usize, density: f64) -> Mask {
    let data = (0..w * h).map(|_| rng.random_bool(density) as u8).collect();
    Mask::new(w, h, data).unwrap()
}

/// Foreground pixel sets compared element by element.
pub fn dice_oracle(a: &Mask, b: &Mask) -> f64 {
    let sa: Vec<(usize, usize)> = a.foreground().collect();
    let sb: Vec<(usize, usize)> = b.foreground().collect();
    let inter = sa.iter().filter(|p| sb.contains(p)).count();
    if sa.is_empty() && sb.is_empty() {
        1.0
    } else {
        2.0 * inter as f64 / (sa.len() + sb.len()) as f64
    }
}

pub fn jaccard_oracle(a: &Mask, b: &Mask) -> f64 {
    let sa: Vec<(usize, usize)> = a.foreground().collect();
    let sb: Vec<(usize, usize)> = b.foreground().collect();
    let inter = sa.iter().filter(|p| sb.contains(p)).count();
    let union = sa.len() + sb.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

fn min_dist(p: Point, set: &[Point]) -> f64 {
    set.iter()
        .map(|q| ((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt())
        .fold(f64::INFINITY, f64::min)
}

pub fn hausdorff_oracle(a: &[Point], b: &[Point]) -> f64 {
    let ab = a.iter().map(|&p| min_dist(p, b)).fold(0.0, f64::max);
    let ba = b.iter().map(|&p| min_dist(p, a)).fold(0.0, f64::max);
    ab.max(ba)
}

pub fn mad_oracle(a: &[Point], b: &[Point]) -> f64 {
    a.iter().map(|&p| min_dist(p, b)).sum::<f64>() / a.len() as f64
}

/// Composite Simpson rule with `n` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Upper tail of the F distribution by numeric integration of
/// `t^(a−1) (1−t)^(b−1)` with `a = d2/2`, `b = d1/2`, split at ½ and
/// substituted `t = s^(1/a)` (resp. `1 − t = s^(1/b)`) to remove endpoint
/// singularities. Normalized by the same integral over `[0, 1]`.
pub fn f_sf_oracle(f: f64, d1: f64, d2: f64) -> f64 {
    let (a, b) = (d2 / 2.0, d1 / 2.0);
    let n = 20_000;
    // ∫_0^x t^(a−1)(1−t)^(b−1) dt with t = s^(1/a): (1/a) ∫_0^{x^a} (1 − s^(1/a))^(b−1) ds
    let lower = |x: f64| simpson(|s: f64| (1.0 - s.powf(1.0 / a)).powf(b - 1.0), 0.0, x.powf(a), n) / a;
    // ∫_x^1 with 1 − t = s^(1/b): (1/b) ∫_0^{(1−x)^b} (1 − s^(1/b))^(a−1) ds
    let upper = |x: f64| simpson(|s: f64| (1.0 - s.powf(1.0 / b)).powf(a - 1.0), 0.0, (1.0 - x).powf(b), n) / b;
    let total = lower(0.5) + upper(0.5);
    let x = d2 / (d2 + d1 * f);
    let part = if x <= 0.5 { lower(x) } else { total - upper(x) };
    part / total
}

/// Smallest triangle with one side flush to a hull edge and the other two
/// sides on support lines, by grid search over the two support directions
/// followed by local zooming around the best cell. Every candidate encloses
/// the hull, so the result bounds the optimum from above.
pub fn triangle_grid_oracle(hull: &[Point], steps: usize) -> f64 {
    use std::f64::consts::PI;
    let n = hull.len();
    let support = |nx: f64, ny: f64| hull.iter().map(|p| p.x * nx + p.y * ny).fold(f64::NEG_INFINITY, f64::max);
    let intersect = |(a1, b1, c1): (f64, f64, f64), (a2, b2, c2): (f64, f64, f64)| {
        let det = a1 * b2 - a2 * b1;
        ((c1 * b2 - c2 * b1) / det, (a1 * c2 - a2 * c1) / det)
    };
    let mut best = f64::INFINITY;
    for i in 0..n {
        let (p, q) = (hull[i], hull[(i + 1) % n]);
        let (ex, ey) = (q.x - p.x, q.y - p.y);
        let len = (ex * ex + ey * ey).sqrt();
        // outward normal of a counterclockwise edge
        let (n0x, n0y) = (ey / len, -ex / len);
        let l0 = (n0x, n0y, support(n0x, n0y));
        let base = n0y.atan2(n0x);
        // the other two normals sit at base + a and base − b, a, b ∈ (0, π)
        let area = |a: f64, b: f64| {
            // bounded only when the three normals positively span the plane
            if a <= 0.0 || b <= 0.0 || a >= PI || b >= PI || a + b <= PI {
                return f64::INFINITY;
            }
            let (t1, t2) = (base + a, base - b);
            let l1 = (t1.cos(), t1.sin(), support(t1.cos(), t1.sin()));
            let l2 = (t2.cos(), t2.sin(), support(t2.cos(), t2.sin()));
            let u = intersect(l0, l1);
            let v = intersect(l1, l2);
            let w = intersect(l2, l0);
            ((v.0 - u.0) * (w.1 - u.1) - (w.0 - u.0) * (v.1 - u.1)).abs() / 2.0
        };
        let h = PI / steps as f64;
        let mut cell = (f64::INFINITY, 0.0, 0.0);
        for s1 in 1..steps {
            for s2 in 1..steps {
                let (a, b) = (s1 as f64 * h, s2 as f64 * h);
                let v = area(a, b);
                if v < cell.0 {
                    cell = (v, a, b);
                }
            }
        }
        let mut span = h;
        for _ in 0..12 {
            let (_, ca, cb) = cell;
            for u in -10..=10 {
                for v in -10..=10 {
                    let (a, b) = (ca + span * u as f64 / 5.0, cb + span * v as f64 / 5.0);
                    let val = area(a, b);
                    if val < cell.0 {
                        cell = (val, a, b);
                    }
                }
            }
            span /= 3.0;
        }
        best = best.min(cell.0);
    }
    best
}

pub mod grads {
    use echoseg::arch::{Architecture, Model, ModelConfig};
    use echoseg::autograd::{grad_check_params, ParamId, ParamStore, Tape, Var};
    use echoseg::nn::ConvSpec;
    use echoseg::{Result, Tensor};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Small enough that a probe rarely straddles a ReLU kink.
    pub const EPS: f64 = 1e-7;

    fn tensor<R: Rng>(rng: &mut R, shape: Vec<usize>) -> Tensor<f64> {
        let n = shape.iter().product();
        Tensor::new(shape, super::random_vec(rng, n)).unwrap()
    }

    /// Values bounded away from zero so ReLU kinks sit far from any probe.
    fn tensor_off_zero<R: Rng>(rng: &mut R, shape: Vec<usize>) -> Tensor<f64> {
        let n = shape.iter().product();
        let data = (0..n)
            .map(|_| {
                let m = rng.random_range(0.1..1.0);
                if rng.random_bool(0.5) { m } else { -m }
            })
            .collect();
        Tensor::new(shape, data).unwrap()
    }

    fn all_coords(store: &ParamStore<f64>) -> Vec<(ParamId, usize)> {
        store
            .iter()
            .flat_map(|(id, p)| (0..p.tensor.len()).map(move |i| (id, i)))
            .collect()
    }

    /// Contracts `y` with a fixed random tensor of the same shape.
    fn project(tape: &mut Tape<f64>, y: Var, r: &Tensor<f64>) -> Result<Var> {
        let rv = tape.input(r);
        let p = tape.mul(y, rv)?;
        Ok(tape.sum(p))
    }

    fn check_op<F>(store: &mut ParamStore<f64>, out_shape: Vec<usize>, seed: u64, f: F) -> Result<f64>
    where
        F: Fn(&mut Tape<f64>, &ParamStore<f64>) -> Result<Var>,
    {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa5a5);
        let r = tensor(&mut rng, out_shape);
        let coords = all_coords(store);
        grad_check_params(
            |tape, s| {
                let y = f(tape, s)?;
                project(tape, y, &r)
            },
            store,
            EPS,
            &coords,
        )
    }

    fn conv_case(seed: u64, spec: ConvSpec, hw: usize, transposed: bool) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let x = store.add("x", tensor(&mut rng, vec![spec.in_channels, hw, hw]))?;
        let wshape = if transposed { spec.transposed_weight_shape() } else { spec.weight_shape() };
        let w = store.add("w", tensor(&mut rng, wshape))?;
        let b = store.add("b", tensor(&mut rng, vec![spec.out_channels]))?;
        let oh = if transposed { spec.transposed_output_extent(hw)? } else { spec.output_extent(hw)? };
        check_op(&mut store, vec![spec.out_channels, oh, oh], seed, |tape, s| {
            let (xv, wv, bv) = (tape.param(s, x), tape.param(s, w), tape.param(s, b));
            if transposed {
                tape.conv_transpose2d(xv, wv, bv, spec)
            } else {
                tape.conv2d(xv, wv, bv, spec)
            }
        })
    }

    /// Worst relative gradient error of every primitive, labelled.
    pub fn primitive_errors(seed: u64) -> Result<Vec<(&'static str, f64)>> {
        let mut out = Vec::new();
        out.push(("conv2d", conv_case(seed, ConvSpec::new(2, 3, 3), 6, false)?));
        out.push(("conv2d same d=2", conv_case(seed, ConvSpec::same(2, 2, 3, 2), 7, false)?));
        out.push((
            "conv2d stride 2 pad 1",
            conv_case(seed, ConvSpec::new(2, 2, 3).with_stride(2).with_padding(1), 7, false)?,
        ));
        out.push(("conv2d 1x1", conv_case(seed, ConvSpec::new(3, 2, 1), 4, false)?));
        out.push((
            "conv_transpose2d 2x2 stride 2",
            conv_case(seed, ConvSpec::new(3, 2, 2).with_stride(2), 4, true)?,
        ));
        out.push(("conv_transpose2d 3x3", conv_case(seed, ConvSpec::new(2, 2, 3), 4, true)?));

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let x = store.add("x", tensor_off_zero(&mut rng, vec![2, 4, 4]))?;
        out.push(("relu", check_op(&mut store, vec![2, 4, 4], seed, |t, s| {
            let v = t.param(s, x);
            Ok(t.relu(v))
        })?));

        let mut store = ParamStore::new();
        let x = store.add("x", tensor(&mut rng, vec![2, 6, 6]))?;
        out.push(("max_pool2d", check_op(&mut store, vec![2, 3, 3], seed, |t, s| {
            let v = t.param(s, x);
            t.max_pool2d(v)
        })?));

        let mut store = ParamStore::new();
        let x = store.add("x", tensor(&mut rng, vec![2, 3, 3]))?;
        out.push(("upsample_nearest", check_op(&mut store, vec![2, 9, 9], seed, |t, s| {
            let v = t.param(s, x);
            t.upsample_nearest(v, 3)
        })?));

        let mut store = ParamStore::new();
        let a = store.add("a", tensor(&mut rng, vec![1, 3, 3]))?;
        let b = store.add("b", tensor(&mut rng, vec![2, 3, 3]))?;
        out.push(("concat_channels", check_op(&mut store, vec![3, 3, 3], seed, |t, s| {
            let (av, bv) = (t.param(s, a), t.param(s, b));
            t.concat_channels(&[av, bv])
        })?));

        let mut store = ParamStore::new();
        let x = store.add("x", tensor(&mut rng, vec![4, 3, 3]))?;
        out.push(("slice_channels", check_op(&mut store, vec![2, 3, 3], seed, |t, s| {
            let v = t.param(s, x);
            t.slice_channels(v, 1, 2)
        })?));

        let mut store = ParamStore::new();
        let a = store.add("a", tensor(&mut rng, vec![2, 3]))?;
        let b = store.add("b", tensor(&mut rng, vec![2, 3]))?;
        out.push(("add mul scale", check_op(&mut store, vec![2, 3], seed, |t, s| {
            let (av, bv) = (t.param(s, a), t.param(s, b));
            let p = t.mul(av, bv)?;
            let q = t.scale(p, 1.7);
            t.add(q, av)
        })?));

        let mut store = ParamStore::new();
        let x = store.add("x", tensor(&mut rng, vec![2, 4, 4]))?;
        let target: Vec<u8> = (0..16).map(|_| rng.random_range(0..2u8)).collect();
        let coords = all_coords(&store);
        out.push((
            "softmax_cross_entropy",
            grad_check_params(
                |t, s| {
                    let v = t.param(s, x);
                    t.softmax_cross_entropy(v, &target)
                },
                &mut store,
                EPS,
                &coords,
            )?,
        ));
        Ok(out)
    }

    /// Gradient error of a full network loss at N=16, B=2 on sampled
    /// coordinates (`per_tensor` per parameter tensor).
    pub fn architecture_error(arch: Architecture, seed: u64, per_tensor: usize) -> Result<f64> {
        let n = 16;
        let mut model = Model::<f64>::build(ModelConfig::new(arch, n, 2, 2), seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x77);
        // nonzero biases so that every bias path is exercised
        for p in model.params.iter_mut() {
            if p.name.ends_with(".bias") {
                for v in p.tensor.data_mut() {
                    *v = rng.random_range(-0.1..0.1);
                }
            }
        }
        let input = Tensor::new(
            vec![2, n, n],
            (0..2 * n * n).map(|_| rng.random_range(0.0..1.0)).collect(),
        )?;
        let target: Vec<u8> = (0..n * n).map(|_| rng.random_range(0..2u8)).collect();
        let coords: Vec<(ParamId, usize)> = model
            .params
            .iter()
            .flat_map(|(id, p)| {
                let len = p.tensor.len();
                (0..per_tensor).map(|_| (id, rng.random_range(0..len))).collect::<Vec<_>>()
            })
            .collect();
        let mut store = model.params.clone();
        grad_check_params(
            |tape, s| {
                let mut m = model.clone();
                m.params = s.clone();
                let x = tape.input(&input);
                let out = m.forward(tape, x)?;
                tape.softmax_cross_entropy(out.logits, &target)
            },
            &mut store,
            EPS,
            &coords,
        )
    }
}
