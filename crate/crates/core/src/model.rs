//! Node-level predictor with softmax output, the supervised plus
//! neighbor-consistency loss, its analytic gradient and an Adam step.
//!
//! Cross-entropy is always `CE(p, t) = -sum_c t_c * ln(max(p_c, 1e-12))`
//! with the prediction first and the target second. In the consistency
//! term the neighbor's prediction takes the target slot, and unless the
//! target is detached the gradient flows through both sides.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NormalizedAdjacency};
use crate::scalar::Scalar;

pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Backbone {
    Linear,
    Mlp { hidden: usize },
}

/// Affine map `x -> x·W + b` with `W` stored as `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Scalar> Layer<T> {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }

    fn zeros_like(&self) -> Self {
        Self::zeros(self.weight.nrows(), self.weight.ncols())
    }

    fn apply(&self, x: ArrayView2<'_, T>) -> Array2<T> {
        x.dot(&self.weight) + &self.bias
    }
}

/// Linear model, or two-layer MLP with a rectifier between the layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    layers: Vec<Layer<T>>,
}

/// Parameter-shaped gradient buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<Layer<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.layers.iter().flat_map(|l| l.weight.iter().chain(l.bias.iter()))
    }
}

impl<T: Scalar> Model<T> {
    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn new<R: Rng + ?Sized>(backbone: Backbone, input_dim: usize, num_classes: usize, rng: &mut R) -> Self {
        let widths = match backbone {
            Backbone::Linear => vec![input_dim, num_classes],
            Backbone::Mlp { hidden } => vec![input_dim, hidden, num_classes],
        };
        let mut model = Self::zeros(&widths);
        for layer in &mut model.layers {
            let bound = 1.0 / (layer.weight.nrows().max(1) as f64).sqrt();
            layer.weight.mapv_inplace(|_| T::lit(rng.random_range(-bound..=bound)));
        }
        model
    }

    /// All-zero model for the given layer widths (`[in, out]` or `[in, hidden, out]`).
    pub fn zeros(widths: &[usize]) -> Self {
        assert!((2..=3).contains(&widths.len()), "a model has one or two layers");
        let layers = widths.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect();
        Self { layers }
    }

    pub fn from_layers(layers: Vec<Layer<T>>) -> Result<Self> {
        if layers.is_empty() || layers.len() > 2 {
            return Err(Error::Checkpoint(format!("{} layers", layers.len())));
        }
        for l in &layers {
            if l.bias.len() != l.weight.ncols() {
                return Err(Error::DimensionMismatch {
                    what: "bias length".into(),
                    expected: l.weight.ncols(),
                    found: l.bias.len(),
                });
            }
        }
        for pair in layers.windows(2) {
            if pair[0].weight.ncols() != pair[1].weight.nrows() {
                return Err(Error::DimensionMismatch {
                    what: "layer chaining".into(),
                    expected: pair[0].weight.ncols(),
                    found: pair[1].weight.nrows(),
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim()];
        w.extend(self.layers.iter().map(|l| l.weight.ncols()));
        w
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().expect("non-empty").weight.ncols()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn params(&self) -> impl Iterator<Item = &T> {
        self.layers.iter().flat_map(|l| l.weight.iter().chain(l.bias.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weight.iter_mut().chain(l.bias.iter_mut()))
    }

    fn check_width(&self, x: ArrayView2<'_, T>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                what: "feature width vs model input".into(),
                expected: self.input_dim(),
                found: x.ncols(),
            });
        }
        Ok(())
    }

    /// Pre-softmax scores.
    pub fn logits(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        self.check_width(x)?;
        Ok(self.run(x).logits)
    }

    /// Row-wise class distributions.
    pub fn forward(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        let mut z = self.logits(x)?;
        softmax_rows_inplace(&mut z);
        Ok(z)
    }

    fn run(&self, x: ArrayView2<'_, T>) -> Activations<T> {
        match self.layers.as_slice() {
            [out] => Activations {
                hidden_pre: None,
                hidden: None,
                logits: out.apply(x),
            },
            [first, out] => {
                let pre = first.apply(x);
                let hidden = pre.mapv(|v| v.max(T::zero()));
                let logits = out.apply(hidden.view());
                Activations {
                    hidden_pre: Some(pre),
                    hidden: Some(hidden),
                    logits,
                }
            }
            _ => unreachable!("models have one or two layers"),
        }
    }

    /// Loss terms at the current parameters.
    pub fn loss(
        &self,
        x: ArrayView2<'_, T>,
        g: &Graph,
        targets: &Targets<T>,
        opts: &LossOptions,
    ) -> Result<LossBreakdown<T>> {
        let pred = self.forward(x)?;
        loss_total(pred.view(), g, targets, opts)
    }

    /// Exact gradient of [`Model::loss`] with respect to every parameter.
    pub fn backward(
        &self,
        x: ArrayView2<'_, T>,
        g: &Graph,
        targets: &Targets<T>,
        opts: &LossOptions,
    ) -> Result<(LossBreakdown<T>, Gradients<T>)> {
        self.check_width(x)?;
        check_graph(x.nrows(), g)?;
        targets.check(x.nrows(), self.num_classes())?;
        let act = self.run(x);
        let mut probs = act.logits;
        softmax_rows_inplace(&mut probs);
        let a_hat = g.row_normalize::<T>();
        let (breakdown, dlogits) = loss_and_logit_grad(probs.view(), &a_hat, targets, opts);

        let grads = match (self.layers.as_slice(), act.hidden, act.hidden_pre) {
            ([_], None, None) => vec![layer_grad(x, &dlogits)],
            ([_, out], Some(hidden), Some(pre)) => {
                let out_grad = layer_grad(hidden.view(), &dlogits);
                let mut dhidden = dlogits.dot(&out.weight.t());
                Zip::from(&mut dhidden).and(&pre).for_each(|d, &p| {
                    if p <= T::zero() {
                        *d = T::zero();
                    }
                });
                vec![layer_grad(x, &dhidden), out_grad]
            }
            _ => unreachable!("activation cache matches layer count"),
        };
        Ok((breakdown, Gradients { layers: grads }))
    }

    pub fn zero_gradients(&self) -> Gradients<T> {
        Gradients {
            layers: self.layers.iter().map(Layer::zeros_like).collect(),
        }
    }
}

struct Activations<T> {
    hidden_pre: Option<Array2<T>>,
    hidden: Option<Array2<T>>,
    logits: Array2<T>,
}

fn layer_grad<T: Scalar>(input: ArrayView2<'_, T>, dout: &Array2<T>) -> Layer<T> {
    Layer {
        weight: input.t().dot(dout),
        bias: dout.sum_axis(Axis(0)),
    }
}

fn check_graph(n: usize, g: &Graph) -> Result<()> {
    if g.num_nodes() != n {
        return Err(Error::DimensionMismatch {
            what: "graph nodes vs prediction rows".into(),
            expected: n,
            found: g.num_nodes(),
        });
    }
    Ok(())
}

/// Anything that maps feature rows to class distributions.
pub trait Predictor<T> {
    fn input_dim(&self) -> usize;
    fn predict(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>>;
}

impl<T: Scalar> Predictor<T> for Model<T> {
    fn input_dim(&self) -> usize {
        Model::input_dim(self)
    }

    fn predict(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        self.forward(x)
    }
}

/// Numerically stable row softmax.
pub fn softmax_rows_inplace<T: Scalar>(z: &mut Array2<T>) {
    for mut row in z.rows_mut() {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        row.mapv_inplace(|v| (v - max).exp());
        let s: T = row.iter().copied().sum();
        row.mapv_inplace(|v| v / s);
    }
}

/// Training targets: a set of member nodes, each with a target distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Targets<T> {
    nodes: Vec<usize>,
    rows: Array2<T>,
}

impl<T: Scalar> Targets<T> {
    pub fn new(nodes: Vec<usize>, rows: Array2<T>) -> Result<Self> {
        if nodes.len() != rows.nrows() {
            return Err(Error::DimensionMismatch {
                what: "target rows vs member nodes".into(),
                expected: nodes.len(),
                found: rows.nrows(),
            });
        }
        Ok(Self { nodes, rows })
    }

    pub fn empty(num_classes: usize) -> Self {
        Self {
            nodes: Vec::new(),
            rows: Array2::zeros((0, num_classes)),
        }
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn rows(&self) -> ArrayView2<'_, T> {
        self.rows.view()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, ArrayView1<'_, T>)> {
        self.nodes.iter().copied().zip(self.rows.rows())
    }

    fn check(&self, n: usize, c: usize) -> Result<()> {
        if self.rows.ncols() != c {
            return Err(Error::DimensionMismatch {
                what: "target width vs classes".into(),
                expected: c,
                found: self.rows.ncols(),
            });
        }
        if let Some(&bad) = self.nodes.iter().find(|&&i| i >= n) {
            return Err(Error::NodeOutOfRange {
                context: "training target".into(),
                index: bad,
                n,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossOptions {
    pub gamma: f64,
    /// Treat the neighbor prediction in the consistency term as a constant.
    pub detach_target: bool,
}

impl Default for LossOptions {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            detach_target: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown<T> {
    pub gt_term: T,
    pub consistency_term: T,
    pub total: T,
    pub gamma: T,
    /// Set when the supervised member set was empty.
    pub gt_empty: bool,
}

#[inline]
fn clamped_ln<T: Scalar>(p: T) -> T {
    p.max(T::lit(LOG_CLAMP)).ln()
}

pub fn cross_entropy<T: Scalar>(pred: ArrayView1<'_, T>, target: ArrayView1<'_, T>) -> T {
    pred.iter().zip(target.iter()).map(|(&p, &t)| -t * clamped_ln(p)).sum()
}

/// Sum of `CE(pred_i, t_i)` over the target members.
pub fn loss_gt<T: Scalar>(pred: ArrayView2<'_, T>, targets: &Targets<T>) -> T {
    if targets.is_empty() {
        log::warn!("supervised loss evaluated on an empty member set");
    }
    targets.iter().map(|(i, t)| cross_entropy(pred.row(i), t)).sum()
}

/// `sum_i (1/|N(i)|) sum_{j in N(i)} CE(pred_i, pred_j)`; isolated nodes add 0.
pub fn loss_consistency<T: Scalar>(pred: ArrayView2<'_, T>, g: &Graph) -> T {
    let a_hat = g.row_normalize::<T>();
    consistency_with(pred, &a_hat)
}

fn consistency_with<T: Scalar>(pred: ArrayView2<'_, T>, a_hat: &NormalizedAdjacency<T>) -> T {
    // <(ÂP)_i, -ln p_i> summed over i
    let mean_nbr = a_hat.matmul(pred);
    Zip::from(mean_nbr.rows())
        .and(pred.rows())
        .fold(T::zero(), |acc, m, p| acc + cross_entropy(p, m))
}

/// Both loss terms and their weighted total for a fixed prediction matrix.
pub fn loss_total<T: Scalar>(
    pred: ArrayView2<'_, T>,
    g: &Graph,
    targets: &Targets<T>,
    opts: &LossOptions,
) -> Result<LossBreakdown<T>> {
    check_graph(pred.nrows(), g)?;
    targets.check(pred.nrows(), pred.ncols())?;
    let gamma = T::lit(opts.gamma);
    let gt_term = loss_gt(pred, targets);
    let consistency_term = if opts.gamma == 0.0 {
        T::zero()
    } else {
        loss_consistency(pred, g)
    };
    Ok(LossBreakdown {
        gt_term,
        consistency_term,
        total: gt_term + gamma * consistency_term,
        gamma,
        gt_empty: targets.is_empty(),
    })
}

/// Gradient of `CE(softmax(z), t)` with respect to `z`, accumulated into
/// `out` with weight `w`. Entries below the log clamp contribute nothing.
fn add_prediction_path<T: Scalar>(
    mut out: ndarray::ArrayViewMut1<'_, T>,
    p: ArrayView1<'_, T>,
    t: ArrayView1<'_, T>,
    w: T,
) {
    let eps = T::lit(LOG_CLAMP);
    let active_mass: T = p
        .iter()
        .zip(t.iter())
        .filter(|(&pc, _)| pc > eps)
        .map(|(_, &tc)| tc)
        .sum();
    for ((o, &pk), &tk) in out.iter_mut().zip(p.iter()).zip(t.iter()) {
        let own = if pk > eps { tk } else { T::zero() };
        *o += w * (pk * active_mass - own);
    }
}

fn loss_and_logit_grad<T: Scalar>(
    probs: ArrayView2<'_, T>,
    a_hat: &NormalizedAdjacency<T>,
    targets: &Targets<T>,
    opts: &LossOptions,
) -> (LossBreakdown<T>, Array2<T>) {
    let gamma = T::lit(opts.gamma);
    let mut dz = Array2::zeros(probs.raw_dim());

    let mut gt_term = T::zero();
    for (i, t) in targets.iter() {
        gt_term += cross_entropy(probs.row(i), t);
        add_prediction_path(dz.row_mut(i), probs.row(i), t, T::one());
    }

    let mut consistency_term = T::zero();
    if opts.gamma != 0.0 {
        let mean_nbr = a_hat.matmul(probs);
        for (i, m) in mean_nbr.rows().into_iter().enumerate() {
            if a_hat.is_isolated(i) {
                continue;
            }
            consistency_term += cross_entropy(probs.row(i), m);
            add_prediction_path(dz.row_mut(i), probs.row(i), m, gamma);
        }
        if !opts.detach_target {
            // Target pathway: CE(p_i, p_j) = <p_j, -ln p_i>, so node j
            // receives sum over neighbors i of (gamma/deg_i)·(-ln p_i).
            let neg_log = probs.mapv(|p| -clamped_ln(p));
            let n = probs.nrows();
            let c = probs.ncols();
            let mut pulled = Array2::<T>::zeros((n, c));
            for i in 0..n {
                for (j, w) in a_hat.row(i) {
                    pulled.row_mut(j).scaled_add(w, &neg_log.row(i));
                }
            }
            for j in 0..n {
                let p = probs.row(j);
                let gsum = pulled.row(j);
                let inner: T = p.dot(&gsum);
                let mut out = dz.row_mut(j);
                for k in 0..c {
                    out[k] += gamma * p[k] * (gsum[k] - inner);
                }
            }
        }
    }

    let breakdown = LossBreakdown {
        gt_term,
        consistency_term,
        total: gt_term + gamma * consistency_term,
        gamma,
        gt_empty: targets.is_empty(),
    };
    (breakdown, dz)
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    first: Vec<T>,
    second: Vec<T>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> i32 {
        self.step
    }

    pub fn step(&mut self, model: &mut Model<T>, grads: &Gradients<T>) {
        let count = model.num_params();
        if self.first.len() != count {
            self.first = vec![T::zero(); count];
            self.second = vec![T::zero(); count];
        }
        self.step += 1;
        let (b1, b2) = (T::lit(self.beta1), T::lit(self.beta2));
        let one = T::one();
        let correct1 = one - b1.powi(self.step);
        let correct2 = one - b2.powi(self.step);
        let lr = T::lit(self.lr);
        let eps = T::lit(self.eps);
        let slots = self.first.iter_mut().zip(self.second.iter_mut());
        for ((p, &g), (m, v)) in model.params_mut().zip(grads.iter()).zip(slots) {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let m_hat = *m / correct1;
            let v_hat = *v / correct2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}
