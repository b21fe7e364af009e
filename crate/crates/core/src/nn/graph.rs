//! Reverse-mode automatic differentiation over CHW tensors.
//!
//! A [`Graph`] records every operation applied during a forward pass; calling
//! [`Graph::backward`] on a scalar node walks the record in reverse and
//! accumulates parameter gradients. Parameters live in a [`ParamStore`] that
//! the graph only borrows, so any number of graphs may run against the same
//! weights concurrently.

use std::f64::consts::{LN_2, SQRT_2};

use super::conv::{self, ConvGeometry};
use super::tensor::{Scalar, Tensor};

/// Probability floor used by the discretized Gaussian rate term.
pub const LIKELIHOOD_FLOOR: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Clone, Debug)]
pub struct ParamEntry<T> {
    pub name: String,
    pub value: Tensor<T>,
}

/// Named, ordered parameter storage.
#[derive(Clone, Debug, Default)]
pub struct ParamStore<T> {
    entries: Vec<ParamEntry<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self { entries: Vec::new() }
    }

    /// Registers a parameter. Names must be unique.
    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>) -> ParamId {
        let name = name.into();
        assert!(
            self.find(&name).is_none(),
            "duplicate parameter name {name}"
        );
        self.entries.push(ParamEntry { name, value });
        ParamId(self.entries.len() - 1)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|e| e.name == name).map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.entries[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.entries[id.0].value
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn entries(&self) -> &[ParamEntry<T>] {
        &self.entries
    }

    pub fn total_elements(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            entries: self
                .entries
                .iter()
                .map(|e| ParamEntry {
                    name: e.name.clone(),
                    value: e.value.cast(),
                })
                .collect(),
        }
    }
}

/// Parameter gradients produced by [`Graph::backward`], indexed like the store.
#[derive(Clone, Debug)]
pub struct Gradients<T> {
    params: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(store: &ParamStore<T>) -> Self {
        Self {
            params: store.entries.iter().map(|_| None).collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&Tensor<T>> {
        self.params.get(id.0).and_then(|g| g.as_ref())
    }

    /// Adds `other` into `self`, parameter by parameter.
    pub fn accumulate(&mut self, other: &Gradients<T>) {
        for (dst, src) in self.params.iter_mut().zip(&other.params) {
            if let Some(src) = src {
                match dst {
                    Some(d) => d.add_assign(src),
                    None => *dst = Some(src.clone()),
                }
            }
        }
    }

    pub fn scale(&mut self, factor: T) {
        for g in self.params.iter_mut().flatten() {
            for v in g.data_mut() {
                *v *= factor;
            }
        }
    }

    /// Euclidean norm over the selected parameters.
    pub fn norm(&self, include: impl Fn(ParamId) -> bool) -> f64 {
        self.params
            .iter()
            .enumerate()
            .filter(|(i, _)| include(ParamId(*i)))
            .filter_map(|(_, g)| g.as_ref())
            .flat_map(|g| g.data().iter())
            .map(|v| v.to_f64() * v.to_f64())
            .sum::<f64>()
            .sqrt()
    }
}

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op {
    Input,
    Param(ParamId),
    Conv {
        x: Var,
        w: Var,
        b: Option<Var>,
        g: ConvGeometry,
    },
    ConvTranspose {
        x: Var,
        w: Var,
        b: Option<Var>,
        g: ConvGeometry,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Relu(Var),
    LeakyRelu(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Softsign(Var),
    Softplus(Var),
    LowerBound(Var, f64),
    Gdn {
        x: Var,
        gamma: Var,
        beta: Var,
        inverse: bool,
    },
    BroadcastChannels(Var),
    SliceChannels {
        src: Var,
        start: usize,
    },
    Sum(Var),
    Mean(Var),
    GaussianBits {
        values: Var,
        means: Var,
        scales: Var,
    },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op,
    needs_grad: bool,
}

/// A forward-pass record. See the module docs.
pub struct Graph<'p, T: Scalar> {
    store: &'p ParamStore<T>,
    nodes: Vec<Node<T>>,
    frozen: Option<&'p dyn Fn(ParamId) -> bool>,
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Probability mass of the unit-width bin centred at `|value - mean|` under
/// a Gaussian of the given scale, evaluated on the stable tail side.
pub fn gaussian_bin_probability(value: f64, mean: f64, scale: f64) -> f64 {
    let d = (value - mean).abs();
    std_normal_cdf((0.5 - d) / scale) - std_normal_cdf((-0.5 - d) / scale)
}

impl<'p, T: Scalar> Graph<'p, T> {
    pub fn new(store: &'p ParamStore<T>) -> Self {
        Self {
            store,
            nodes: Vec::new(),
            frozen: None,
        }
    }

    /// Parameters for which `frozen` returns true receive no gradient and are
    /// treated as constants.
    pub fn with_frozen(store: &'p ParamStore<T>, frozen: &'p dyn Fn(ParamId) -> bool) -> Self {
        Self {
            store,
            nodes: Vec::new(),
            frozen: Some(frozen),
        }
    }

    pub fn store(&self) -> &ParamStore<T> {
        self.store
    }

    fn push(&mut self, value: Tensor<T>, op: Op, parents: &[Var]) -> Var {
        let needs_grad = parents.iter().any(|p| self.nodes[p.0].needs_grad);
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> [usize; 3] {
        self.nodes[v.0].value.shape()
    }

    pub fn input(&mut self, t: Tensor<T>) -> Var {
        self.nodes.push(Node {
            value: t,
            op: Op::Input,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        let needs_grad = !self.frozen.is_some_and(|f| f(id));
        self.nodes.push(Node {
            value: self.store.get(id).clone(),
            op: Op::Param(id),
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, g: ConvGeometry) -> Var {
        let out = conv::conv2d(self.value(x), self.value(w), b.map(|b| self.value(b)), g);
        let mut parents = vec![x, w];
        parents.extend(b);
        self.push(out, Op::Conv { x, w, b, g }, &parents)
    }

    pub fn conv_transpose2d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        g: ConvGeometry,
        output_padding: usize,
    ) -> Var {
        let out = conv::conv_transpose2d(
            self.value(x),
            self.value(w),
            b.map(|b| self.value(b)),
            g,
            output_padding,
        );
        let mut parents = vec![x, w];
        parents.extend(b);
        self.push(out, Op::ConvTranspose { x, w, b, g }, &parents)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push(out, Op::Add(a, b), &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push(out, Op::Sub(a, b), &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(out, Op::Mul(a, b), &[a, b])
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.mul(a, a)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let f = T::from_f64(factor);
        let out = self.value(a).map(|x| x * f);
        self.push(out, Op::Scale(a, factor), &[a])
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let c = T::from_f64(c);
        let out = self.value(a).map(|x| x + c);
        self.push(out, Op::AddScalar(a), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(T::ZERO));
        self.push(out, Op::Relu(a), &[a])
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let s = T::from_f64(slope);
        let out = self.value(a).map(|x| if x > T::ZERO { x } else { x * s });
        self.push(out, Op::LeakyRelu(a, slope), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        self.push(out, Op::Sigmoid(a), &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.tanh());
        self.push(out, Op::Tanh(a), &[a])
    }

    /// `x / (1 + |x|)`.
    pub fn softsign(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x / (T::ONE + x.abs()));
        self.push(out, Op::Softsign(a), &[a])
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let out = self.value(a).map(softplus);
        self.push(out, Op::Softplus(a), &[a])
    }

    /// `max(x, bound)`; the gradient still flows below the bound when it
    /// points upward, so clamped values can recover.
    pub fn lower_bound(&mut self, a: Var, bound: f64) -> Var {
        let b = T::from_f64(bound);
        let out = self.value(a).map(|x| x.max(b));
        self.push(out, Op::LowerBound(a, bound), &[a])
    }

    /// Generalized divisive normalization (or its inverse):
    /// `x / sqrt(beta + gamma * x^2)` over channels.
    pub fn gdn(&mut self, x: Var, gamma: Var, beta: Var, inverse: bool) -> Var {
        let xv = self.value(x);
        let norm = gdn_norm(xv, self.value(gamma), self.value(beta));
        let out = xv.zip_map(&norm, |a, n| if inverse { a * n.sqrt() } else { a / n.sqrt() });
        self.push(
            out,
            Op::Gdn {
                x,
                gamma,
                beta,
                inverse,
            },
            &[x, gamma, beta],
        )
    }

    /// Broadcasts a `[C, 1, 1]` node to `[C, height, width]`.
    pub fn broadcast_channels(&mut self, src: Var, height: usize, width: usize) -> Var {
        let s = self.value(src);
        assert_eq!(&s.shape()[1..], &[1, 1], "broadcast source must be [C,1,1]");
        let out = Tensor::from_fn([s.channels(), height, width], |c, _, _| s.data()[c]);
        self.push(out, Op::BroadcastChannels(src), &[src])
    }

    pub fn slice_channels(&mut self, src: Var, start: usize, end: usize) -> Var {
        let out = self.value(src).slice_channels(start, end);
        self.push(out, Op::SliceChannels { src, start }, &[src])
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).sum());
        self.push(out, Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let out = Tensor::scalar(v.sum() / T::from_f64(v.len() as f64));
        self.push(out, Op::Mean(a), &[a])
    }

    /// Total information content, in bits, of `values` under independent
    /// discretized Gaussians: `sum -log2 P(v)` with
    /// `P(v) = Phi((v - mu + 0.5)/s) - Phi((v - mu - 0.5)/s)`, floored at
    /// [`LIKELIHOOD_FLOOR`].
    pub fn gaussian_bits(&mut self, values: Var, means: Var, scales: Var) -> Var {
        let (v, m, s) = (self.value(values), self.value(means), self.value(scales));
        assert_eq!(v.shape(), m.shape(), "gaussian_bits: mean shape mismatch");
        assert_eq!(v.shape(), s.shape(), "gaussian_bits: scale shape mismatch");
        let bits: f64 = v
            .data()
            .iter()
            .zip(m.data())
            .zip(s.data())
            .map(|((&v, &m), &s)| {
                let p = gaussian_bin_probability(v.to_f64(), m.to_f64(), s.to_f64());
                -p.max(LIKELIHOOD_FLOOR).log2()
            })
            .sum();
        self.push(
            Tensor::scalar(T::from_f64(bits)),
            Op::GaussianBits {
                values,
                means,
                scales,
            },
            &[values, means, scales],
        )
    }

    /// Reverse pass from the scalar node `loss`.
    pub fn backward(&self, loss: Var) -> Gradients<T> {
        assert_eq!(self.shape(loss), [1, 1, 1], "backward requires a scalar loss");
        let mut grads: Vec<Option<Tensor<T>>> = self.nodes.iter().map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(T::ONE));
        let mut out = Gradients {
            params: (0..self.store.len()).map(|_| None).collect(),
        };

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(grad) = grads[idx].take() else {
                continue;
            };
            let send = |v: Var, g: Tensor<T>, grads: &mut Vec<Option<Tensor<T>>>| {
                if !self.nodes[v.0].needs_grad {
                    return;
                }
                match &mut grads[v.0] {
                    Some(existing) => existing.add_assign(&g),
                    slot @ None => *slot = Some(g),
                }
            };
            let needs = |v: Var| self.nodes[v.0].needs_grad;
            match &node.op {
                Op::Input => {}
                Op::Param(id) => match &mut out.params[id.0] {
                    Some(existing) => existing.add_assign(&grad),
                    slot @ None => *slot = Some(grad),
                },
                Op::Conv { x, w, b, g } => {
                    let (dx, dw, db) = conv::conv2d_backward(
                        self.value(*x),
                        self.value(*w),
                        &grad,
                        *g,
                        (needs(*x), needs(*w)),
                    );
                    if let Some(dx) = dx {
                        send(*x, dx, &mut grads);
                    }
                    if let Some(dw) = dw {
                        send(*w, dw, &mut grads);
                    }
                    if let Some(b) = b {
                        send(*b, db, &mut grads);
                    }
                }
                Op::ConvTranspose { x, w, b, g } => {
                    let (dx, dw, db) = conv::conv_transpose2d_backward(
                        self.value(*x),
                        self.value(*w),
                        &grad,
                        *g,
                        (needs(*x), needs(*w)),
                    );
                    if let Some(dx) = dx {
                        send(*x, dx, &mut grads);
                    }
                    if let Some(dw) = dw {
                        send(*w, dw, &mut grads);
                    }
                    if let Some(b) = b {
                        send(*b, db, &mut grads);
                    }
                }
                Op::Add(a, b) => {
                    if needs(*a) {
                        send(*a, grad.clone(), &mut grads);
                    }
                    send(*b, grad, &mut grads);
                }
                Op::Sub(a, b) => {
                    if needs(*a) {
                        send(*a, grad.clone(), &mut grads);
                    }
                    send(*b, grad.map(|g| -g), &mut grads);
                }
                Op::Mul(a, b) => {
                    if needs(*a) {
                        send(*a, grad.zip_map(self.value(*b), |g, y| g * y), &mut grads);
                    }
                    if needs(*b) {
                        send(*b, grad.zip_map(self.value(*a), |g, x| g * x), &mut grads);
                    }
                }
                Op::Scale(a, f) => {
                    let f = T::from_f64(*f);
                    send(*a, grad.map(|g| g * f), &mut grads);
                }
                Op::AddScalar(a) => send(*a, grad, &mut grads),
                Op::Relu(a) => {
                    let d = grad.zip_map(self.value(*a), |g, x| if x > T::ZERO { g } else { T::ZERO });
                    send(*a, d, &mut grads);
                }
                Op::LeakyRelu(a, slope) => {
                    let s = T::from_f64(*slope);
                    let d = grad.zip_map(self.value(*a), |g, x| if x > T::ZERO { g } else { g * s });
                    send(*a, d, &mut grads);
                }
                Op::Sigmoid(a) => {
                    let d = grad.zip_map(&node.value, |g, y| g * y * (T::ONE - y));
                    send(*a, d, &mut grads);
                }
                Op::Tanh(a) => {
                    let d = grad.zip_map(&node.value, |g, y| g * (T::ONE - y * y));
                    send(*a, d, &mut grads);
                }
                Op::Softsign(a) => {
                    let d = grad.zip_map(self.value(*a), |g, x| {
                        let den = T::ONE + x.abs();
                        g / (den * den)
                    });
                    send(*a, d, &mut grads);
                }
                Op::Softplus(a) => {
                    let d = grad.zip_map(self.value(*a), |g, x| g * sigmoid(x));
                    send(*a, d, &mut grads);
                }
                Op::LowerBound(a, bound) => {
                    let b = T::from_f64(*bound);
                    let d = grad.zip_map(self.value(*a), |g, x| {
                        if x >= b || g < T::ZERO {
                            g
                        } else {
                            T::ZERO
                        }
                    });
                    send(*a, d, &mut grads);
                }
                Op::Gdn {
                    x,
                    gamma,
                    beta,
                    inverse,
                } => {
                    let (dx, dgamma, dbeta) = gdn_backward(
                        self.value(*x),
                        self.value(*gamma),
                        self.value(*beta),
                        &grad,
                        *inverse,
                    );
                    send(*x, dx, &mut grads);
                    send(*gamma, dgamma, &mut grads);
                    send(*beta, dbeta, &mut grads);
                }
                Op::BroadcastChannels(src) => {
                    let c = grad.channels();
                    let d = Tensor::from_vec(
                        [c, 1, 1],
                        (0..c).map(|ci| grad.channel(ci).iter().copied().sum()).collect(),
                    );
                    send(*src, d, &mut grads);
                }
                Op::SliceChannels { src, start } => {
                    let shape = self.shape(*src);
                    let mut d = Tensor::zeros(shape);
                    let plane = shape[1] * shape[2];
                    d.data_mut()[start * plane..start * plane + grad.len()]
                        .copy_from_slice(grad.data());
                    send(*src, d, &mut grads);
                }
                Op::Sum(a) => {
                    let g = grad.data()[0];
                    send(*a, Tensor::full(self.shape(*a), g), &mut grads);
                }
                Op::Mean(a) => {
                    let shape = self.shape(*a);
                    let n = T::from_f64(shape.iter().product::<usize>() as f64);
                    send(*a, Tensor::full(shape, grad.data()[0] / n), &mut grads);
                }
                Op::GaussianBits {
                    values,
                    means,
                    scales,
                } => {
                    let (dv, dm, ds) = gaussian_bits_backward(
                        self.value(*values),
                        self.value(*means),
                        self.value(*scales),
                        grad.data()[0].to_f64(),
                    );
                    send(*values, dv, &mut grads);
                    send(*means, dm, &mut grads);
                    send(*scales, ds, &mut grads);
                }
            }
        }
        out
    }
}

#[inline]
fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::ZERO {
        T::ONE / (T::ONE + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::ONE + e)
    }
}

#[inline]
fn softplus<T: Scalar>(x: T) -> T {
    let t = T::from_f64(20.0);
    if x > t {
        x
    } else {
        (T::ONE + x.exp()).ln()
    }
}

fn gdn_norm<T: Scalar>(x: &Tensor<T>, gamma: &Tensor<T>, beta: &Tensor<T>) -> Tensor<T> {
    let [c, h, w] = x.shape();
    let plane = h * w;
    let sq = x.map(|v| v * v);
    let mut norm = vec![T::ZERO; c * plane];
    for (ci, chunk) in norm.chunks_mut(plane).enumerate() {
        chunk.fill(beta.data()[ci]);
    }
    T::gemm(c, c, plane, gamma.data(), (c as isize, 1), sq.data(), (plane as isize, 1), T::ONE, &mut norm);
    Tensor::from_vec([c, h, w], norm)
}

fn gdn_backward<T: Scalar>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    grad: &Tensor<T>,
    inverse: bool,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let [c, h, w] = x.shape();
    let plane = h * w;
    let norm = gdn_norm(x, gamma, beta);
    let half = T::from_f64(0.5);
    let mut dx = Vec::with_capacity(x.len());
    let mut dnorm = Vec::with_capacity(x.len());
    for ((&g, &xv), &n) in grad.data().iter().zip(x.data()).zip(norm.data()) {
        let r = n.sqrt();
        if inverse {
            dx.push(g * r);
            dnorm.push(g * xv * half / r);
        } else {
            dx.push(g / r);
            dnorm.push(-(g * xv * half) / (n * r));
        }
    }
    // d(norm)/d(x^2) = gamma^T
    let mut dsq = vec![T::ZERO; c * plane];
    T::gemm(c, c, plane, gamma.data(), (1, c as isize), &dnorm, (plane as isize, 1), T::ZERO, &mut dsq);
    for ((d, &s), &xv) in dx.iter_mut().zip(&dsq).zip(x.data()) {
        *d += T::from_f64(2.0) * xv * s;
    }
    let sq = x.map(|v| v * v);
    let mut dgamma = vec![T::ZERO; c * c];
    T::gemm(c, plane, c, &dnorm, (plane as isize, 1), sq.data(), (1, plane as isize), T::ZERO, &mut dgamma);
    let dbeta: Vec<T> = dnorm.chunks(plane).map(|ch| ch.iter().copied().sum()).collect();
    (
        Tensor::from_vec([c, h, w], dx),
        Tensor::from_vec(gamma.shape(), dgamma),
        Tensor::from_vec([c, 1, 1], dbeta),
    )
}

fn gaussian_bits_backward<T: Scalar>(
    values: &Tensor<T>,
    means: &Tensor<T>,
    scales: &Tensor<T>,
    upstream: f64,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let n = values.len();
    let (mut dv, mut dm, mut ds) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for ((&v, &m), &s) in values.data().iter().zip(means.data()).zip(scales.data()) {
        let (v, m, s) = (v.to_f64(), m.to_f64(), s.to_f64());
        let diff = v - m;
        let d = diff.abs();
        let a = (0.5 - d) / s;
        let b = (-0.5 - d) / s;
        let p = (std_normal_cdf(a) - std_normal_cdf(b)).max(LIKELIHOOD_FLOOR);
        let (pa, pb) = (std_normal_pdf(a), std_normal_pdf(b));
        let dp_dd = (pb - pa) / s;
        let dp_ds = (b * pb - a * pa) / s;
        // d bits / dP = -1 / (P ln 2)
        let dbits_dp = -upstream / (p * LN_2);
        let sign = if diff > 0.0 {
            1.0
        } else if diff < 0.0 {
            -1.0
        } else {
            0.0
        };
        let gd = dbits_dp * dp_dd * sign;
        dv.push(T::from_f64(gd));
        dm.push(T::from_f64(-gd));
        ds.push(T::from_f64(dbits_dp * dp_ds));
    }
    let shape = values.shape();
    (
        Tensor::from_vec(shape, dv),
        Tensor::from_vec(shape, dm),
        Tensor::from_vec(shape, ds),
    )
}
