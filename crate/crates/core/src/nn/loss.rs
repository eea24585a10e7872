//! Pixelwise softmax cross-entropy over a two-channel logit map.

use crate::autograd::{Op, Tape, Var};
use crate::error::{ensure, Result};
use crate::tensor::{chw, Real};

impl<T: Real> Tape<T> {
    /// Mean over pixels of `−log softmax(logits)[target]`.
    ///
    /// `target` is an `H×W` row-major mask with values in `{0, 1}`; class 1
    /// is the foreground channel.
    pub fn softmax_cross_entropy(&mut self, logits: Var, target: &[u8]) -> Result<Var> {
        let (c, h, w) = chw(self.shape(logits))?;
        ensure!(c == 2, "softmax_cross_entropy expects 2 channels, got {c}");
        ensure!(
            target.len() == h * w,
            "target has {} pixels, logits have {}",
            target.len(),
            h * w
        );
        ensure!(
            target.iter().all(|&t| t <= 1),
            "softmax_cross_entropy target must be binary"
        );
        let n = h * w;
        let inv_n = T::one() / T::from_usize(n).expect("pixel count fits");
        let z = self.value(logits);
        let mut loss = T::zero();
        let mut dlogits = vec![T::zero(); 2 * n];
        for p in 0..n {
            let (z0, z1) = (z[p], z[n + p]);
            let m = z0.max(z1);
            let (e0, e1) = ((z0 - m).exp(), (z1 - m).exp());
            let lse = m + (e0 + e1).ln();
            let (p0, p1) = (e0 / (e0 + e1), e1 / (e0 + e1));
            let t = target[p];
            loss += lse - if t == 1 { z1 } else { z0 };
            dlogits[p] = (p0 - if t == 0 { T::one() } else { T::zero() }) * inv_n;
            dlogits[n + p] = (p1 - if t == 1 { T::one() } else { T::zero() }) * inv_n;
        }
        Ok(self.push(
            vec![1],
            vec![loss * inv_n],
            Op::SoftmaxCrossEntropy { logits, dlogits },
        ))
    }
}
