//! ReLU, 2×2 max pooling and nearest-neighbour upsampling.

use crate::autograd::{Op, Tape, Var};
use crate::error::{ensure, Result};
use crate::tensor::{chw, Real};

pub(crate) fn upsample_nearest_backward<T: Real>(shape: &[usize], factor: usize, g: &[T]) -> Vec<T> {
    let (c, h, w) = (shape[0], shape[1], shape[2]);
    let (ho, wo) = (h * factor, w * factor);
    let mut d = vec![T::zero(); c * h * w];
    for ch in 0..c {
        for i in 0..ho {
            let src = &g[(ch * ho + i) * wo..(ch * ho + i + 1) * wo];
            let dst = &mut d[(ch * h + i / factor) * w..(ch * h + i / factor + 1) * w];
            for (j, &gv) in src.iter().enumerate() {
                dst[j / factor] += gv;
            }
        }
    }
    d
}

impl<T: Real> Tape<T> {
    /// Elementwise `max(0, x)`. The subgradient at 0 is taken as 0.
    pub fn relu(&mut self, x: Var) -> Var {
        let value = self
            .value(x)
            .iter()
            .map(|&v| if v > T::zero() { v } else { T::zero() })
            .collect();
        self.push(self.shape(x).to_vec(), value, Op::Relu(x))
    }

    /// Non-overlapping 2×2 max pooling. Ties resolve to the first element in
    /// row-major order, which also receives the gradient.
    pub fn max_pool2d(&mut self, x: Var) -> Result<Var> {
        let (c, h, w) = chw(self.shape(x))?;
        ensure!(
            h % 2 == 0 && w % 2 == 0,
            "max_pool2d: extents {h}×{w} are not divisible by 2"
        );
        let (ho, wo) = (h / 2, w / 2);
        let xs = self.value(x);
        let mut out = Vec::with_capacity(c * ho * wo);
        let mut argmax = Vec::with_capacity(c * ho * wo);
        for ch in 0..c {
            for i in 0..ho {
                for j in 0..wo {
                    let base = ch * h * w;
                    let candidates = [
                        base + 2 * i * w + 2 * j,
                        base + 2 * i * w + 2 * j + 1,
                        base + (2 * i + 1) * w + 2 * j,
                        base + (2 * i + 1) * w + 2 * j + 1,
                    ];
                    let mut best = candidates[0];
                    for &k in &candidates[1..] {
                        if xs[k] > xs[best] {
                            best = k;
                        }
                    }
                    out.push(xs[best]);
                    argmax.push(best);
                }
            }
        }
        Ok(self.push(vec![c, ho, wo], out, Op::MaxPool2 { x, argmax }))
    }

    /// Replicates every pixel into a `factor×factor` block.
    pub fn upsample_nearest(&mut self, x: Var, factor: usize) -> Result<Var> {
        ensure!(factor >= 1, "upsample factor must be at least 1");
        let (c, h, w) = chw(self.shape(x))?;
        let (ho, wo) = (h * factor, w * factor);
        let xs = self.value(x);
        let mut out = vec![T::zero(); c * ho * wo];
        for ch in 0..c {
            for i in 0..ho {
                let src = &xs[(ch * h + i / factor) * w..(ch * h + i / factor + 1) * w];
                let dst = &mut out[(ch * ho + i) * wo..(ch * ho + i + 1) * wo];
                for (j, v) in dst.iter_mut().enumerate() {
                    *v = src[j / factor];
                }
            }
        }
        Ok(self.push(vec![c, ho, wo], out, Op::Upsample { x, factor }))
    }
}
