//! Dilated 2-D convolution and its transpose.
//!
//! Weights of a forward convolution are `out×in×m×m`; weights of a transposed
//! convolution are `in×out×m×m`, so a transposed convolution sharing its
//! weight array with a forward convolution of swapped channel roles is that
//! convolution's exact adjoint.

use crate::autograd::{Op, Tape, Var};
use crate::error::{ensure, Result};
use crate::tensor::{chw, Real};

/// Geometry of a square-kernel convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    /// Kernel extent `m` (kernels are `m×m`).
    pub kernel: usize,
    pub stride: usize,
    pub dilation: usize,
    /// Zero padding on every side.
    pub padding: usize,
}

impl ConvSpec {
    /// Stride 1, dilation 1, no padding.
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        ConvSpec {
            in_channels,
            out_channels,
            kernel,
            stride: 1,
            dilation: 1,
            padding: 0,
        }
    }

    /// Stride 1 with padding chosen so that spatial extent is preserved.
    /// Requires an odd kernel.
    pub fn same(in_channels: usize, out_channels: usize, kernel: usize, dilation: usize) -> Self {
        ConvSpec {
            padding: dilation * (kernel - 1) / 2,
            dilation,
            ..Self::new(in_channels, out_channels, kernel)
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn with_dilation(mut self, dilation: usize) -> Self {
        self.dilation = dilation;
        self
    }

    pub fn with_padding(mut self, padding: usize) -> Self {
        self.padding = padding;
        self
    }

    /// `d·(m−1)+1`.
    pub fn effective_extent(&self) -> usize {
        self.dilation * (self.kernel - 1) + 1
    }

    pub fn weight_shape(&self) -> Vec<usize> {
        vec![self.out_channels, self.in_channels, self.kernel, self.kernel]
    }

    /// Weight shape when used as a transposed convolution.
    pub fn transposed_weight_shape(&self) -> Vec<usize> {
        vec![self.in_channels, self.out_channels, self.kernel, self.kernel]
    }

    pub fn param_count(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel * self.kernel + self.out_channels
    }

    fn validate(&self) -> Result<()> {
        ensure!(
            self.in_channels > 0 && self.out_channels > 0,
            "convolution channel counts must be positive: {self:?}"
        );
        ensure!(
            self.kernel > 0 && self.stride > 0 && self.dilation > 0,
            "kernel, stride and dilation must be positive: {self:?}"
        );
        Ok(())
    }

    /// `floor((in + 2·pad − d·(m−1) − 1)/stride) + 1`, or a contract
    /// violation when the dilated kernel does not fit the padded input.
    pub fn output_extent(&self, input: usize) -> Result<usize> {
        self.validate()?;
        let padded = input + 2 * self.padding;
        let ext = self.effective_extent();
        ensure!(
            ext <= padded,
            "effective kernel extent {ext} exceeds padded input extent {padded}"
        );
        Ok((padded - ext) / self.stride + 1)
    }

    /// Output extent of the transposed convolution: `(in − 1)·stride + m`.
    pub fn transposed_output_extent(&self, input: usize) -> Result<usize> {
        self.validate()?;
        ensure!(
            self.dilation == 1 && self.padding == 0,
            "transposed convolution supports dilation 1 and no padding only"
        );
        Ok((input - 1) * self.stride + self.kernel)
    }
}

/// Output indices `j` with `0 <= j·stride + offset < in_len`, clipped to `out_len`.
#[inline]
fn valid_range(out_len: usize, in_len: usize, stride: usize, offset: isize) -> (usize, usize) {
    let s = stride as isize;
    let lo = if offset >= 0 { 0 } else { ((-offset) + s - 1) / s };
    let last = in_len as isize - 1 - offset;
    let hi = if last < 0 { 0 } else { last / s + 1 };
    let hi = (hi as usize).min(out_len);
    let lo = (lo as usize).min(hi);
    (lo, hi)
}

pub(crate) fn conv2d_forward<T: Real>(
    spec: &ConvSpec,
    x: &[T],
    (h, w): (usize, usize),
    weight: &[T],
    bias: &[T],
) -> Result<(Vec<T>, usize, usize)> {
    let ho = spec.output_extent(h)?;
    let wo = spec.output_extent(w)?;
    let (ci, co, m) = (spec.in_channels, spec.out_channels, spec.kernel);
    let (s, d, p) = (spec.stride, spec.dilation as isize, spec.padding as isize);
    let mut out = vec![T::zero(); co * ho * wo];
    for o in 0..co {
        let plane = &mut out[o * ho * wo..(o + 1) * ho * wo];
        plane.iter_mut().for_each(|v| *v = bias[o]);
        for c in 0..ci {
            let xin = &x[c * h * w..(c + 1) * h * w];
            for a in 0..m {
                let (i0, i1) = valid_range(ho, h, s, a as isize * d - p);
                for b in 0..m {
                    let wv = weight[((o * ci + c) * m + a) * m + b];
                    if wv == T::zero() {
                        continue;
                    }
                    let col_off = b as isize * d - p;
                    let (j0, j1) = valid_range(wo, w, s, col_off);
                    if j0 == j1 {
                        continue;
                    }
                    for i in i0..i1 {
                        let yi = (i * s) as isize + a as isize * d - p;
                        let row = &xin[yi as usize * w..(yi as usize + 1) * w];
                        let orow = &mut plane[i * wo..(i + 1) * wo];
                        if s == 1 {
                            let start = (j0 as isize + col_off) as usize;
                            let src = &row[start..start + (j1 - j0)];
                            for (ov, &xv) in orow[j0..j1].iter_mut().zip(src) {
                                *ov += wv * xv;
                            }
                        } else {
                            for j in j0..j1 {
                                let xj = ((j * s) as isize + col_off) as usize;
                                orow[j] += wv * row[xj];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok((out, ho, wo))
}

pub(crate) struct ConvGrads<T> {
    pub dx: Option<Vec<T>>,
    pub dw: Vec<T>,
    pub db: Vec<T>,
}

pub(crate) fn conv2d_backward<T: Real>(
    spec: &ConvSpec,
    x: &[T],
    (h, w): (usize, usize),
    weight: &[T],
    g: &[T],
    want_dx: bool,
) -> ConvGrads<T> {
    let ho = spec.output_extent(h).expect("validated in forward");
    let wo = spec.output_extent(w).expect("validated in forward");
    let (ci, co, m) = (spec.in_channels, spec.out_channels, spec.kernel);
    let (s, d, p) = (spec.stride, spec.dilation as isize, spec.padding as isize);
    let mut dx = want_dx.then(|| vec![T::zero(); ci * h * w]);
    let mut dw = vec![T::zero(); weight.len()];
    let db = (0..co)
        .map(|o| g[o * ho * wo..(o + 1) * ho * wo].iter().copied().sum())
        .collect();
    for o in 0..co {
        let gplane = &g[o * ho * wo..(o + 1) * ho * wo];
        for c in 0..ci {
            let xin = &x[c * h * w..(c + 1) * h * w];
            for a in 0..m {
                let (i0, i1) = valid_range(ho, h, s, a as isize * d - p);
                for b in 0..m {
                    let widx = ((o * ci + c) * m + a) * m + b;
                    let wv = weight[widx];
                    let col_off = b as isize * d - p;
                    let (j0, j1) = valid_range(wo, w, s, col_off);
                    if j0 == j1 {
                        continue;
                    }
                    let mut acc = T::zero();
                    for i in i0..i1 {
                        let yi = ((i * s) as isize + a as isize * d - p) as usize;
                        let grow = &gplane[i * wo..(i + 1) * wo];
                        if s == 1 {
                            let start = (j0 as isize + col_off) as usize;
                            let xr = &xin[yi * w + start..yi * w + start + (j1 - j0)];
                            acc += grow[j0..j1].iter().zip(xr).map(|(&gv, &xv)| gv * xv).sum::<T>();
                            if let Some(dx) = dx.as_mut() {
                                let dr = &mut dx[c * h * w + yi * w + start
                                    ..c * h * w + yi * w + start + (j1 - j0)];
                                for (dv, &gv) in dr.iter_mut().zip(&grow[j0..j1]) {
                                    *dv += wv * gv;
                                }
                            }
                        } else {
                            for j in j0..j1 {
                                let xj = ((j * s) as isize + col_off) as usize;
                                acc += grow[j] * xin[yi * w + xj];
                                if let Some(dx) = dx.as_mut() {
                                    dx[c * h * w + yi * w + xj] += wv * grow[j];
                                }
                            }
                        }
                    }
                    dw[widx] += acc;
                }
            }
        }
    }
    ConvGrads { dx, dw, db }
}

pub(crate) fn conv_transpose2d_forward<T: Real>(
    spec: &ConvSpec,
    x: &[T],
    (h, w): (usize, usize),
    weight: &[T],
    bias: &[T],
) -> Result<(Vec<T>, usize, usize)> {
    let ho = spec.transposed_output_extent(h)?;
    let wo = spec.transposed_output_extent(w)?;
    let (ci, co, m, s) = (spec.in_channels, spec.out_channels, spec.kernel, spec.stride);
    let mut out = vec![T::zero(); co * ho * wo];
    for o in 0..co {
        out[o * ho * wo..(o + 1) * ho * wo]
            .iter_mut()
            .for_each(|v| *v = bias[o]);
    }
    for c in 0..ci {
        let xin = &x[c * h * w..(c + 1) * h * w];
        for o in 0..co {
            let plane = &mut out[o * ho * wo..(o + 1) * ho * wo];
            for a in 0..m {
                for b in 0..m {
                    let wv = weight[((c * co + o) * m + a) * m + b];
                    for i in 0..h {
                        let orow = &mut plane[(i * s + a) * wo..(i * s + a + 1) * wo];
                        for j in 0..w {
                            orow[j * s + b] += wv * xin[i * w + j];
                        }
                    }
                }
            }
        }
    }
    Ok((out, ho, wo))
}

pub(crate) fn conv_transpose2d_backward<T: Real>(
    spec: &ConvSpec,
    x: &[T],
    (h, w): (usize, usize),
    weight: &[T],
    g: &[T],
    want_dx: bool,
) -> ConvGrads<T> {
    let ho = (h - 1) * spec.stride + spec.kernel;
    let wo = (w - 1) * spec.stride + spec.kernel;
    let (ci, co, m, s) = (spec.in_channels, spec.out_channels, spec.kernel, spec.stride);
    let mut dx = want_dx.then(|| vec![T::zero(); ci * h * w]);
    let mut dw = vec![T::zero(); weight.len()];
    let db = (0..co)
        .map(|o| g[o * ho * wo..(o + 1) * ho * wo].iter().copied().sum())
        .collect();
    for c in 0..ci {
        let xin = &x[c * h * w..(c + 1) * h * w];
        for o in 0..co {
            let gplane = &g[o * ho * wo..(o + 1) * ho * wo];
            for a in 0..m {
                for b in 0..m {
                    let widx = ((c * co + o) * m + a) * m + b;
                    let wv = weight[widx];
                    let mut acc = T::zero();
                    for i in 0..h {
                        let grow = &gplane[(i * s + a) * wo..(i * s + a + 1) * wo];
                        for j in 0..w {
                            let gv = grow[j * s + b];
                            acc += gv * xin[i * w + j];
                            if let Some(dx) = dx.as_mut() {
                                dx[c * h * w + i * w + j] += wv * gv;
                            }
                        }
                    }
                    dw[widx] += acc;
                }
            }
        }
    }
    ConvGrads { dx, dw, db }
}

impl<T: Real> Tape<T> {
    /// `out[o,i,j] = bias[o] + Σ_c Σ_{a,b} w[o,c,a,b]·x[c, i·s + a·d, j·s + b·d]`
    /// over the zero-padded input.
    pub fn conv2d(&mut self, x: Var, weight: Var, bias: Var, spec: ConvSpec) -> Result<Var> {
        let (c, h, w) = chw(self.shape(x))?;
        ensure!(
            c == spec.in_channels,
            "conv2d: input has {c} channels, spec expects {}",
            spec.in_channels
        );
        ensure!(
            self.shape(weight) == spec.weight_shape().as_slice(),
            "conv2d: weight shape {:?} does not match {:?}",
            self.shape(weight),
            spec.weight_shape()
        );
        ensure!(
            self.shape(bias) == [spec.out_channels],
            "conv2d: bias shape {:?}, expected [{}]",
            self.shape(bias),
            spec.out_channels
        );
        let (out, ho, wo) = conv2d_forward(
            &spec,
            self.value(x),
            (h, w),
            self.value(weight),
            self.value(bias),
        )?;
        Ok(self.push(
            vec![spec.out_channels, ho, wo],
            out,
            Op::Conv2d {
                x,
                w: weight,
                b: bias,
                spec,
            },
        ))
    }

    /// Each input element scatters `weight·value` into its output window;
    /// overlapping windows sum.
    pub fn conv_transpose2d(
        &mut self,
        x: Var,
        weight: Var,
        bias: Var,
        spec: ConvSpec,
    ) -> Result<Var> {
        let (c, h, w) = chw(self.shape(x))?;
        ensure!(
            c == spec.in_channels,
            "conv_transpose2d: input has {c} channels, spec expects {}",
            spec.in_channels
        );
        ensure!(
            self.shape(weight) == spec.transposed_weight_shape().as_slice(),
            "conv_transpose2d: weight shape {:?} does not match {:?}",
            self.shape(weight),
            spec.transposed_weight_shape()
        );
        ensure!(
            self.shape(bias) == [spec.out_channels],
            "conv_transpose2d: bias shape {:?}, expected [{}]",
            self.shape(bias),
            spec.out_channels
        );
        let (out, ho, wo) = conv_transpose2d_forward(
            &spec,
            self.value(x),
            (h, w),
            self.value(weight),
            self.value(bias),
        )?;
        Ok(self.push(
            vec![spec.out_channels, ho, wo],
            out,
            Op::ConvTranspose2d {
                x,
                w: weight,
                b: bias,
                spec,
            },
        ))
    }
}
