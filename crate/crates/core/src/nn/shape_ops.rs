//! Channel concatenation and slicing.

use crate::autograd::{Op, Tape, Var};
use crate::error::{ensure, Result};
use crate::tensor::{chw, Real};

pub(crate) fn slice_channels_backward<T: Real>(shape: &[usize], start: usize, g: &[T]) -> Vec<T> {
    let plane = shape[1] * shape[2];
    let mut d = vec![T::zero(); shape.iter().product()];
    d[start * plane..start * plane + g.len()].copy_from_slice(g);
    d
}

impl<T: Real> Tape<T> {
    /// Stacks `C×H×W` maps along the channel axis, preserving input order.
    pub fn concat_channels(&mut self, xs: &[Var]) -> Result<Var> {
        ensure!(!xs.is_empty(), "concat_channels needs at least one input");
        let (_, h, w) = chw(self.shape(xs[0]))?;
        let mut channels = 0;
        for &v in xs {
            let (c, hv, wv) = chw(self.shape(v))?;
            ensure!(
                (hv, wv) == (h, w),
                "concat_channels: spatial mismatch {hv}×{wv} vs {h}×{w}"
            );
            channels += c;
        }
        let mut out = Vec::with_capacity(channels * h * w);
        for &v in xs {
            out.extend_from_slice(self.value(v));
        }
        Ok(self.push(vec![channels, h, w], out, Op::Concat(xs.to_vec())))
    }

    /// Channels `start..start + len` of a `C×H×W` map.
    pub fn slice_channels(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (c, h, w) = chw(self.shape(x))?;
        ensure!(
            len > 0 && start + len <= c,
            "slice_channels: range {start}..{} out of {c} channels",
            start + len
        );
        let out = self.value(x)[start * h * w..(start + len) * h * w].to_vec();
        Ok(self.push(vec![len, h, w], out, Op::SliceChannels { x, start }))
    }
}

#[cfg(test)]
mod tests {
    use crate::autograd::Tape;
    use crate::tensor::Tensor;

    #[test]
    fn single_input_is_identity() {
        let mut tape = Tape::<f64>::new();
        let a = tape.input(&Tensor::from_f64(vec![1, 1, 2], &[1., 2.]).unwrap());
        let c = tape.concat_channels(&[a]).unwrap();
        assert_eq!(tape.value(c), tape.value(a));
    }

    #[test]
    fn four_sixteen_channel_maps() {
        let mut tape = Tape::<f64>::new();
        let maps: Vec<_> = (0..4)
            .map(|_| tape.input(&Tensor::zeros(vec![16, 4, 4])))
            .collect();
        let c = tape.concat_channels(&maps).unwrap();
        assert_eq!(tape.shape(c), &[64, 4, 4]);
    }

    #[test]
    fn concat_then_slice_recovers_inputs() {
        let mut tape = Tape::<f64>::new();
        let a = tape.input(&Tensor::from_f64(vec![2, 1, 2], &[1., 2., 3., 4.]).unwrap());
        let b = tape.input(&Tensor::from_f64(vec![1, 1, 2], &[5., 6.]).unwrap());
        let c = tape.concat_channels(&[a, b]).unwrap();
        let sa = tape.slice_channels(c, 0, 2).unwrap();
        let sb = tape.slice_channels(c, 2, 1).unwrap();
        assert_eq!(tape.value(sa), tape.value(a));
        assert_eq!(tape.value(sb), tape.value(b));
    }

    #[test]
    fn spatial_mismatch_is_rejected() {
        let mut tape = Tape::<f64>::new();
        let a = tape.input(&Tensor::zeros(vec![1, 2, 2]));
        let b = tape.input(&Tensor::zeros(vec![1, 2, 3]));
        assert!(tape.concat_channels(&[a, b]).is_err());
    }
}
