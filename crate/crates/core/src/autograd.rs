//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Every node records its forward value and the operation that produced it.
//! Nodes may only reference nodes recorded before them, so the tape is a
//! topological order by construction and backward is a single reverse sweep.
//! Parameters live in a [`ParamStore`]; a backward pass adds into their
//! gradient slots, so several passes accumulate until the optimizer clears them.

use std::collections::HashMap;

use crate::error::{ensure, Error, Result};
use crate::nn::conv::{self, ConvSpec};
use crate::nn::{pool, shape_ops};
use crate::tensor::{Real, Tensor};

/// Index of a parameter inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
pub struct Param<T> {
    pub name: String,
    pub tensor: Tensor<T>,
}

/// Named parameter tensors in insertion order. Names are unique.
#[derive(Clone, Debug, Default)]
pub struct ParamStore<T> {
    params: Vec<Param<T>>,
    index: HashMap<String, ParamId>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore {
            params: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor<T>) -> Result<ParamId> {
        let name = name.into();
        ensure!(
            !self.index.contains_key(&name),
            "duplicate parameter name {name:?}"
        );
        let id = ParamId(self.params.len());
        self.index.insert(name.clone(), id);
        self.params.push(Param { name, tensor });
        Ok(id)
    }

    pub fn get(&self, id: ParamId) -> &Param<T> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param<T> {
        &mut self.params[id.0]
    }

    pub fn tensor(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].tensor
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param<T>)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param<T>> {
        self.params.iter_mut()
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.tensor.len()).sum()
    }

    pub fn clear_grads(&mut self) {
        self.params.iter_mut().for_each(|p| p.tensor.clear_grad());
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
pub(crate) enum Op<T> {
    Input,
    Param(ParamId),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Sum(Var),
    Relu(Var),
    Conv2d {
        x: Var,
        w: Var,
        b: Var,
        spec: ConvSpec,
    },
    ConvTranspose2d {
        x: Var,
        w: Var,
        b: Var,
        spec: ConvSpec,
    },
    MaxPool2 {
        x: Var,
        argmax: Vec<usize>,
    },
    Upsample {
        x: Var,
        factor: usize,
    },
    Concat(Vec<Var>),
    SliceChannels {
        x: Var,
        start: usize,
    },
    /// Gradient of the loss w.r.t. the logits is fixed at forward time.
    SoftmaxCrossEntropy {
        logits: Var,
        dlogits: Vec<T>,
    },
}

struct Node<T> {
    shape: Vec<usize>,
    value: Vec<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// A single forward pass. Confined to one thread; drop it after `backward`.
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub(crate) fn push(&mut self, shape: Vec<usize>, value: Vec<T>, op: Op<T>) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        let requires_grad = match &op {
            Op::Input => false,
            Op::Param(_) => true,
            other => inputs_of(other).iter().any(|v| self.nodes[v.0].requires_grad),
        };
        self.nodes.push(Node {
            shape,
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records a constant. Constants never receive gradients.
    pub fn input(&mut self, t: &Tensor<T>) -> Var {
        self.push(t.shape().to_vec(), t.data().to_vec(), Op::Input)
    }

    /// Records the current value of a parameter.
    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        let t = store.tensor(id);
        self.push(t.shape().to_vec(), t.data().to_vec(), Op::Param(id))
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn value(&self, v: Var) -> &[T] {
        &self.nodes[v.0].value
    }

    pub fn tensor(&self, v: Var) -> Tensor<T> {
        let n = &self.nodes[v.0];
        Tensor::new(n.shape.clone(), n.value.clone()).expect("tape nodes are well formed")
    }

    /// Scalar value of a single-element node.
    pub fn scalar(&self, v: Var) -> Result<T> {
        let n = &self.nodes[v.0];
        ensure!(
            n.value.len() == 1,
            "expected a scalar, got shape {:?}",
            n.shape
        );
        Ok(n.value[0])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        ensure!(
            self.shape(a) == self.shape(b),
            "add: shape mismatch {:?} vs {:?}",
            self.shape(a),
            self.shape(b)
        );
        let value = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| x + y)
            .collect();
        Ok(self.push(self.shape(a).to_vec(), value, Op::Add(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        ensure!(
            self.shape(a) == self.shape(b),
            "mul: shape mismatch {:?} vs {:?}",
            self.shape(a),
            self.shape(b)
        );
        let value = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| x * y)
            .collect();
        Ok(self.push(self.shape(a).to_vec(), value, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, k: T) -> Var {
        let value = self.value(a).iter().map(|&x| x * k).collect();
        self.push(self.shape(a).to_vec(), value, Op::Scale(a, k))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().copied().sum();
        self.push(vec![1], vec![s], Op::Sum(a))
    }

    /// Fills the gradient slot of every parameter reachable from `loss`.
    ///
    /// Gradients are added to whatever the slots already hold.
    pub fn backward(&self, loss: Var, store: &mut ParamStore<T>) -> Result<()> {
        ensure!(
            self.nodes[loss.0].value.len() == 1,
            "backward needs a scalar loss, got shape {:?}",
            self.nodes[loss.0].shape
        );
        let mut grads: Vec<Option<Vec<T>>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(vec![T::one()]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            for v in inputs_of(&node.op) {
                if v.0 >= idx {
                    return Err(Error::contract(format!(
                        "internal: tape node {idx} references later node {}",
                        v.0
                    )));
                }
            }
            self.backward_node(node, &g, &mut grads, store)?;
        }
        Ok(())
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn backward_node(
        &self,
        node: &Node<T>,
        g: &[T],
        grads: &mut [Option<Vec<T>>],
        store: &mut ParamStore<T>,
    ) -> Result<()> {
        match &node.op {
            Op::Input => {}
            Op::Param(id) => store.get_mut(*id).tensor.accumulate_grad(g),
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if self.wants(v) {
                        accumulate(grads, v, g);
                    }
                }
            }
            Op::Mul(a, b) => {
                if self.wants(*a) {
                    let d: Vec<T> = g.iter().zip(self.value(*b)).map(|(&g, &y)| g * y).collect();
                    accumulate(grads, *a, &d);
                }
                if self.wants(*b) {
                    let d: Vec<T> = g.iter().zip(self.value(*a)).map(|(&g, &x)| g * x).collect();
                    accumulate(grads, *b, &d);
                }
            }
            Op::Scale(a, k) => {
                let d: Vec<T> = g.iter().map(|&g| g * *k).collect();
                accumulate(grads, *a, &d);
            }
            Op::Sum(a) => {
                let d = vec![g[0]; self.value(*a).len()];
                accumulate(grads, *a, &d);
            }
            Op::Relu(a) => {
                let d: Vec<T> = g
                    .iter()
                    .zip(self.value(*a))
                    .map(|(&g, &x)| if x > T::zero() { g } else { T::zero() })
                    .collect();
                accumulate(grads, *a, &d);
            }
            Op::Conv2d { x, w, b, spec } => {
                let (_, h, wd) = crate::tensor::chw(self.shape(*x))?;
                let grads_out = conv::conv2d_backward(
                    spec,
                    self.value(*x),
                    (h, wd),
                    self.value(*w),
                    g,
                    self.wants(*x),
                );
                if let Some(dx) = grads_out.dx {
                    accumulate(grads, *x, &dx);
                }
                if self.wants(*w) {
                    accumulate(grads, *w, &grads_out.dw);
                }
                if self.wants(*b) {
                    accumulate(grads, *b, &grads_out.db);
                }
            }
            Op::ConvTranspose2d { x, w, b, spec } => {
                let (_, h, wd) = crate::tensor::chw(self.shape(*x))?;
                let grads_out = conv::conv_transpose2d_backward(
                    spec,
                    self.value(*x),
                    (h, wd),
                    self.value(*w),
                    g,
                    self.wants(*x),
                );
                if let Some(dx) = grads_out.dx {
                    accumulate(grads, *x, &dx);
                }
                if self.wants(*w) {
                    accumulate(grads, *w, &grads_out.dw);
                }
                if self.wants(*b) {
                    accumulate(grads, *b, &grads_out.db);
                }
            }
            Op::MaxPool2 { x, argmax } => {
                let mut d = vec![T::zero(); self.value(*x).len()];
                for (&src, &gv) in argmax.iter().zip(g) {
                    d[src] += gv;
                }
                accumulate(grads, *x, &d);
            }
            Op::Upsample { x, factor } => {
                let d = pool::upsample_nearest_backward(self.shape(*x), *factor, g);
                accumulate(grads, *x, &d);
            }
            Op::Concat(xs) => {
                let mut offset = 0;
                for v in xs {
                    let n = self.value(*v).len();
                    if self.wants(*v) {
                        accumulate(grads, *v, &g[offset..offset + n]);
                    }
                    offset += n;
                }
            }
            Op::SliceChannels { x, start } => {
                let d = shape_ops::slice_channels_backward(self.shape(*x), *start, g);
                accumulate(grads, *x, &d);
            }
            Op::SoftmaxCrossEntropy { logits, dlogits } => {
                let d: Vec<T> = dlogits.iter().map(|&v| v * g[0]).collect();
                accumulate(grads, *logits, &d);
            }
        }
        Ok(())
    }
}

fn accumulate<T: Real>(grads: &mut [Option<Vec<T>>], v: Var, d: &[T]) {
    match &mut grads[v.0] {
        Some(slot) => slot.iter_mut().zip(d).for_each(|(s, &x)| *s += x),
        slot @ None => *slot = Some(d.to_vec()),
    }
}

fn inputs_of<T>(op: &Op<T>) -> Vec<Var> {
    match op {
        Op::Input | Op::Param(_) => vec![],
        Op::Add(a, b) | Op::Mul(a, b) => vec![*a, *b],
        Op::Scale(a, _) | Op::Sum(a) | Op::Relu(a) => vec![*a],
        Op::Conv2d { x, w, b, .. } | Op::ConvTranspose2d { x, w, b, .. } => vec![*x, *w, *b],
        Op::MaxPool2 { x, .. } | Op::Upsample { x, .. } | Op::SliceChannels { x, .. } => vec![*x],
        Op::Concat(xs) => xs.clone(),
        Op::SoftmaxCrossEntropy { logits, .. } => vec![*logits],
    }
}

/// Largest relative discrepancy between taped gradients and central finite
/// differences, over the given `(parameter, flat index)` coordinates.
///
/// `f` builds the scalar loss from the store's current values. The error per
/// coordinate is `|g_ad - g_fd| / max(1, |g_ad|, |g_fd|)`.
pub fn grad_check_params<F>(
    f: F,
    store: &mut ParamStore<f64>,
    eps: f64,
    coords: &[(ParamId, usize)],
) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, &ParamStore<f64>) -> Result<Var>,
{
    ensure!(eps > 0.0, "finite-difference step must be positive, got {eps}");
    store.clear_grads();
    let mut tape = Tape::new();
    let loss = f(&mut tape, store)?;
    tape.backward(loss, store)?;
    let analytic: Vec<f64> = coords
        .iter()
        .map(|&(id, i)| store.tensor(id).grad().map_or(0.0, |g| g[i]))
        .collect();
    store.clear_grads();

    let eval = |store: &ParamStore<f64>| -> Result<f64> {
        let mut tape = Tape::new();
        let loss = f(&mut tape, store)?;
        tape.scalar(loss)
    };

    let mut worst = 0.0_f64;
    for (&(id, i), &g_ad) in coords.iter().zip(&analytic) {
        let original = store.tensor(id).data()[i];
        store.get_mut(id).tensor.data_mut()[i] = original + eps;
        let plus = eval(store)?;
        store.get_mut(id).tensor.data_mut()[i] = original - eps;
        let minus = eval(store)?;
        store.get_mut(id).tensor.data_mut()[i] = original;
        let g_fd = (plus - minus) / (2.0 * eps);
        let err = (g_ad - g_fd).abs() / 1f64.max(g_ad.abs()).max(g_fd.abs());
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Gradient check of a scalar function of a single tensor, over every coordinate.
pub fn grad_check<F>(f: F, theta: &Tensor<f64>, eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, Var) -> Result<Var>,
{
    let mut store = ParamStore::new();
    let id = store.add("theta", theta.clone())?;
    let coords: Vec<_> = (0..theta.len()).map(|i| (id, i)).collect();
    grad_check_params(
        |tape, store| {
            let v = tape.param(store, id);
            f(tape, v)
        },
        &mut store,
        eps,
        &coords,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(values: &[f64]) -> (ParamStore<f64>, ParamId) {
        let mut s = ParamStore::new();
        let id = s
            .add("w", Tensor::from_f64(vec![values.len()], values).unwrap())
            .unwrap();
        (s, id)
    }

    #[test]
    fn sum_gives_all_ones() {
        let (mut s, id) = store_with(&[0.3, -1.0, 7.0, 2.0]);
        let mut tape = Tape::new();
        let w = tape.param(&s, id);
        let loss = tape.sum(w);
        tape.backward(loss, &mut s).unwrap();
        assert_eq!(s.tensor(id).grad().unwrap(), &[1.0; 4]);
    }

    #[test]
    fn square_gives_twice_w() {
        let (mut s, id) = store_with(&[2.0, -3.0]);
        let mut tape = Tape::new();
        let w = tape.param(&s, id);
        let sq = tape.mul(w, w).unwrap();
        let loss = tape.sum(sq);
        tape.backward(loss, &mut s).unwrap();
        assert_eq!(s.tensor(id).grad().unwrap(), &[4.0, -6.0]);
    }

    #[test]
    fn fan_out_accumulates() {
        let (mut s, id) = store_with(&[1.0, 5.0, -2.0]);
        let mut tape = Tape::new();
        let w = tape.param(&s, id);
        let a = tape.sum(w);
        let b = tape.sum(w);
        let loss = tape.add(a, b).unwrap();
        tape.backward(loss, &mut s).unwrap();
        assert_eq!(s.tensor(id).grad().unwrap(), &[2.0; 3]);
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let (mut s, id) = store_with(&[1.0, 2.0]);
        let mut tape = Tape::new();
        let w = tape.param(&s, id);
        assert!(matches!(
            tape.backward(w, &mut s),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn inputs_receive_no_gradient_slot() {
        let (mut s, id) = store_with(&[1.0, 2.0]);
        let c = Tensor::from_f64(vec![2], &[3.0, 4.0]).unwrap();
        let mut tape = Tape::new();
        let w = tape.param(&s, id);
        let x = tape.input(&c);
        let p = tape.mul(w, x).unwrap();
        let loss = tape.sum(p);
        tape.backward(loss, &mut s).unwrap();
        assert_eq!(s.tensor(id).grad().unwrap(), &[3.0, 4.0]);
    }

    #[test]
    fn grad_check_of_linear_function_is_exact() {
        let theta = Tensor::from_f64(vec![2, 3], &[0.1, -0.4, 2.0, 3.5, -7.0, 0.0]).unwrap();
        let err = grad_check(|t, v| Ok(t.sum(v)), &theta, 1e-5).unwrap();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn grad_check_rejects_non_positive_step() {
        let theta = Tensor::from_f64(vec![1], &[1.0]).unwrap();
        assert!(grad_check(|t, v| Ok(t.sum(v)), &theta, 0.0).is_err());
    }
}
