use rand::Rng;
use serde::{Deserialize, Serialize};

use super::AnnotationTensor;
use crate::error::{Error, Result};
use crate::rng::{rng_from, stream};

pub const DEFAULT_ALPHA: f64 = 0.7;
const FREQ_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Constant,
    Glm,
    Network,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub hidden: usize,
    pub func_channels: usize,
    pub pred_channels: usize,
}

impl NetworkSpec {
    /// Parameter count by layer: embed, two hidden layers, output.
    pub fn param_count(&self) -> usize {
        let (h, d, p) = (self.hidden, self.func_channels, self.pred_channels);
        d * h + h + (h + p) * h + h + h * h + h + h + 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Constant,
    Glm {
        func_channels: usize,
        pred_channels: usize,
    },
    Network {
        hidden: usize,
        func_channels: usize,
        pred_channels: usize,
    },
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Constant => ModelKind::Constant,
            ModelSpec::Glm { .. } => ModelKind::Glm,
            ModelSpec::Network { .. } => ModelKind::Network,
        }
    }

    pub fn network(spec: &NetworkSpec) -> Self {
        ModelSpec::Network {
            hidden: spec.hidden,
            func_channels: spec.func_channels,
            pred_channels: spec.pred_channels,
        }
    }

    pub fn param_count(&self) -> usize {
        match *self {
            ModelSpec::Constant => 1,
            ModelSpec::Glm {
                func_channels,
                pred_channels,
            } => func_channels + pred_channels + 1,
            ModelSpec::Network {
                hidden,
                func_channels,
                pred_channels,
            } => NetworkSpec {
                hidden,
                func_channels,
                pred_channels,
            }
            .param_count(),
        }
    }

    /// Index of the additive output offset in the weight layout.
    pub fn bias_index(&self) -> usize {
        self.param_count() - 1
    }

    fn channels(&self) -> Option<(usize, usize)> {
        match *self {
            ModelSpec::Constant => None,
            ModelSpec::Glm {
                func_channels,
                pred_channels,
            }
            | ModelSpec::Network {
                func_channels,
                pred_channels,
                ..
            } => Some((func_channels, pred_channels)),
        }
    }
}

/// Parameters of a prior `f = (p(1−p))^α · g_θ(C)`.
///
/// Layouts: constant `[w₀]` with `g = exp(w₀)`; glm `[w_func, w_pred, c]`
/// with `g = exp(w·mean_w C_func + w'·C_pred + c)`; network `[W_e, b_e, W₁,
/// b₁, W₂, b₂, w_o, b_o]` (row-major matrices) with `g = softplus(NN(C))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorParams {
    pub spec: ModelSpec,
    pub alpha: f64,
    /// When set, `alpha` is optimized as an extra trailing parameter.
    #[serde(default)]
    pub train_alpha: bool,
    pub weights: Vec<f64>,
}

impl PriorParams {
    pub fn constant(w0: f64) -> Self {
        Self {
            spec: ModelSpec::Constant,
            alpha: DEFAULT_ALPHA,
            train_alpha: false,
            weights: vec![w0],
        }
    }

    pub fn glm(func_channels: usize, pred_channels: usize) -> Self {
        let spec = ModelSpec::Glm {
            func_channels,
            pred_channels,
        };
        Self {
            weights: vec![0.0; spec.param_count()],
            spec,
            alpha: DEFAULT_ALPHA,
            train_alpha: false,
        }
    }

    pub fn model_kind(&self) -> ModelKind {
        self.spec.kind()
    }

    pub fn param_count(&self) -> usize {
        self.weights.len()
    }

    /// Optimizable parameters: the weights, then alpha when trainable.
    pub fn flat(&self) -> Vec<f64> {
        let mut v = self.weights.clone();
        if self.train_alpha {
            v.push(self.alpha);
        }
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let n = self.weights.len();
        self.weights.copy_from_slice(&flat[..n]);
        if self.train_alpha {
            self.alpha = flat[n];
        }
    }

    pub fn norm(&self) -> f64 {
        self.flat().iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    fn check(&self, annot: &AnnotationTensor) -> Result<()> {
        if self.weights.len() != self.spec.param_count() {
            return Err(Error::InvalidArgument(format!(
                "{} weights for a model with {} parameters",
                self.weights.len(),
                self.spec.param_count()
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite()) || !self.alpha.is_finite() {
            return Err(Error::numerical("non-finite prior parameter"));
        }
        if let Some((d, p)) = self.spec.channels() {
            if d != annot.func_channels() || p != annot.pred_channels() {
                return Err(Error::InvalidArgument(format!(
                    "model expects {d} functional and {p} prediction channels, annotations have {} and {}",
                    annot.func_channels(),
                    annot.pred_channels()
                )));
            }
        }
        Ok(())
    }
}

fn freq_log_factor(p: f64) -> f64 {
    let p = p.clamp(FREQ_CLAMP, 1.0 - FREQ_CLAMP);
    (p * (1.0 - p)).ln()
}

const GELU_C: f64 = 0.797_884_560_802_865_4;

/// GELU, tanh approximation.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

pub fn inverse_softplus(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Offsets of the network blocks in the flat layout.
struct NetLayout {
    h: usize,
    d: usize,
    p: usize,
    we: usize,
    be: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    wo: usize,
    bo: usize,
}

impl NetLayout {
    fn new(h: usize, d: usize, p: usize) -> Self {
        let we = 0;
        let be = we + h * d;
        let w1 = be + h;
        let b1 = w1 + h * (h + p);
        let w2 = b1 + h;
        let b2 = w2 + h * h;
        let wo = b2 + h;
        let bo = wo + h;
        Self { h, d, p, we, be, w1, b1, w2, b2, wo, bo }
    }
}

struct NetActivations {
    z: Vec<f64>,
    u1: Vec<f64>,
    h1: Vec<f64>,
    u2: Vec<f64>,
    h2: Vec<f64>,
    o: f64,
}

fn net_forward(l: &NetLayout, w: &[f64], x_func: &[f64], x_pred: &[f64]) -> NetActivations {
    let (h, d, p) = (l.h, l.d, l.p);
    // z = [W_e x + b_e; x_pred]
    let mut z = Vec::with_capacity(h + p);
    for i in 0..h {
        let row = &w[l.we + i * d..l.we + (i + 1) * d];
        z.push(w[l.be + i] + row.iter().zip(x_func).map(|(a, b)| a * b).sum::<f64>());
    }
    z.extend_from_slice(x_pred);
    let mut u1 = Vec::with_capacity(h);
    for i in 0..h {
        let row = &w[l.w1 + i * (h + p)..l.w1 + (i + 1) * (h + p)];
        u1.push(w[l.b1 + i] + row.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>());
    }
    let h1: Vec<f64> = u1.iter().map(|v| gelu(*v)).collect();
    let mut u2 = Vec::with_capacity(h);
    for i in 0..h {
        let row = &w[l.w2 + i * h..l.w2 + (i + 1) * h];
        u2.push(w[l.b2 + i] + row.iter().zip(&h1).map(|(a, b)| a * b).sum::<f64>());
    }
    let h2: Vec<f64> = u2.iter().map(|v| gelu(*v)).collect();
    let o = w[l.bo] + w[l.wo..l.wo + h].iter().zip(&h2).map(|(a, b)| a * b).sum::<f64>();
    NetActivations { z, u1, h1, u2, h2, o }
}

/// Accumulates `dout · ∂o/∂θ` into `grad`.
fn net_backward(l: &NetLayout, w: &[f64], x_func: &[f64], act: &NetActivations, dout: f64, grad: &mut [f64]) {
    let (h, d, p) = (l.h, l.d, l.p);
    grad[l.bo] += dout;
    let mut du2 = vec![0.0; h];
    for i in 0..h {
        grad[l.wo + i] += dout * act.h2[i];
        du2[i] = dout * w[l.wo + i] * gelu_grad(act.u2[i]);
    }
    let mut du1 = vec![0.0; h];
    for i in 0..h {
        grad[l.b2 + i] += du2[i];
        for j in 0..h {
            grad[l.w2 + i * h + j] += du2[i] * act.h1[j];
            du1[j] += w[l.w2 + i * h + j] * du2[i];
        }
    }
    for j in 0..h {
        du1[j] *= gelu_grad(act.u1[j]);
    }
    let mut de = vec![0.0; h];
    for i in 0..h {
        grad[l.b1 + i] += du1[i];
        for j in 0..h + p {
            grad[l.w1 + i * (h + p) + j] += du1[i] * act.z[j];
            if j < h {
                de[j] += w[l.w1 + i * (h + p) + j] * du1[i];
            }
        }
    }
    for i in 0..h {
        grad[l.be + i] += de[i];
        for j in 0..d {
            grad[l.we + i * d + j] += de[i] * x_func[j];
        }
    }
}

/// `log g` and, when `dlog` is `Some(c)`, accumulates `c · ∂g/∂θ` into `grad`.
fn model_output(params: &PriorParams, annot: &AnnotationTensor, m: usize, upstream_g: Option<(f64, &mut [f64])>) -> f64 {
    let w = &params.weights;
    match params.spec {
        ModelSpec::Constant => {
            let g = w[0].exp();
            if let Some((c, grad)) = upstream_g {
                grad[0] += c * g;
            }
            g
        }
        ModelSpec::Glm {
            func_channels: d,
            pred_channels: p,
        } => {
            let xf = annot.func_mean(m);
            let xp = annot.pred(m);
            let lin = w[d + p]
                + w[..d].iter().zip(xf).map(|(a, b)| a * b).sum::<f64>()
                + w[d..d + p].iter().zip(xp).map(|(a, b)| a * b).sum::<f64>();
            let g = lin.exp();
            if let Some((c, grad)) = upstream_g {
                let cg = c * g;
                for (k, x) in xf.iter().chain(xp).enumerate() {
                    grad[k] += cg * x;
                }
                grad[d + p] += cg;
            }
            g
        }
        ModelSpec::Network {
            hidden,
            func_channels,
            pred_channels,
        } => {
            let l = NetLayout::new(hidden, func_channels, pred_channels);
            let xf = annot.func_mean(m);
            let act = net_forward(&l, w, xf, annot.pred(m));
            let g = softplus(act.o);
            if let Some((c, grad)) = upstream_g {
                net_backward(&l, w, xf, &act, c * sigmoid(act.o), grad);
            }
            g
        }
    }
}

/// Prior variances `f` at `indices`.
pub fn prior_forward(params: &PriorParams, annot: &AnnotationTensor, indices: &[usize]) -> Result<Vec<f64>> {
    params.check(annot)?;
    indices
        .iter()
        .map(|&m| {
            if m >= annot.num_variants() {
                return Err(Error::InvalidArgument(format!("variant index {m} out of range")));
            }
            let g = model_output(params, annot, m, None);
            let f = (params.alpha * freq_log_factor(annot.freq()[m])).exp() * g;
            if !f.is_finite() {
                return Err(Error::numerical(format!("prior overflows at variant {m}")));
            }
            Ok(f)
        })
        .collect()
}

/// `∇_θ Σ_m upstream_m f_m`, laid out like [`PriorParams::flat`].
pub fn prior_backward(
    params: &PriorParams,
    annot: &AnnotationTensor,
    indices: &[usize],
    upstream: &[f64],
) -> Result<Vec<f64>> {
    params.check(annot)?;
    if upstream.len() != indices.len() {
        return Err(Error::InvalidArgument(format!(
            "{} upstream values for {} indices",
            upstream.len(),
            indices.len()
        )));
    }
    let n = params.weights.len();
    let mut grad = vec![0.0; n + params.train_alpha as usize];
    let (wgrad, agrad) = grad.split_at_mut(n);
    for (&m, &up) in indices.iter().zip(upstream) {
        if m >= annot.num_variants() {
            return Err(Error::InvalidArgument(format!("variant index {m} out of range")));
        }
        if up == 0.0 {
            continue;
        }
        let lf = freq_log_factor(annot.freq()[m]);
        let scale = (params.alpha * lf).exp();
        let g = model_output(params, annot, m, Some((up * scale, wgrad)));
        if let Some(a) = agrad.first_mut() {
            *a += up * scale * g * lf;
        }
    }
    Ok(grad)
}

/// Pre-softplus network outputs at `indices`.
pub fn network_logits(params: &PriorParams, annot: &AnnotationTensor, indices: &[usize]) -> Result<Vec<f64>> {
    params.check(annot)?;
    let ModelSpec::Network {
        hidden,
        func_channels,
        pred_channels,
    } = params.spec
    else {
        return Err(Error::InvalidArgument("logits are only defined for network models".into()));
    };
    let l = NetLayout::new(hidden, func_channels, pred_channels);
    indices
        .iter()
        .map(|&m| {
            if m >= annot.num_variants() {
                return Err(Error::InvalidArgument(format!("variant index {m} out of range")));
            }
            Ok(net_forward(&l, &params.weights, annot.func_mean(m), annot.pred(m)).o)
        })
        .collect()
}

/// Network with uniform `±1/√fan_in` initialization.
pub fn build_network(spec: &NetworkSpec, seed: u64) -> Result<PriorParams> {
    if spec.hidden == 0 {
        return Err(Error::InvalidArgument("hidden width must be positive".into()));
    }
    let l = NetLayout::new(spec.hidden, spec.func_channels, spec.pred_channels);
    let count = spec.param_count();
    debug_assert_eq!(l.bo + 1, count);
    let mut rng = rng_from(seed, &[stream::INIT]);
    let mut weights = vec![0.0; count];
    let blocks = [
        (l.we, l.w1, spec.func_channels),
        (l.w1, l.w2, spec.hidden + spec.pred_channels),
        (l.w2, l.wo, spec.hidden),
        (l.wo, count, spec.hidden),
    ];
    for (lo, hi, fan_in) in blocks {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        for w in &mut weights[lo..hi] {
            *w = rng.random_range(-bound..bound);
        }
    }
    Ok(PriorParams {
        spec: ModelSpec::network(spec),
        alpha: DEFAULT_ALPHA,
        train_alpha: false,
        weights,
    })
}

/// Sets the output offset so that the mean of `f` over `indices` equals
/// `target_mean`. `f` is increasing in the offset for every model kind.
pub fn calibrate_output_bias(
    params: &mut PriorParams,
    annot: &AnnotationTensor,
    indices: &[usize],
    target_mean: f64,
) -> Result<()> {
    if !(target_mean > 0.0) {
        return Err(Error::InvalidArgument("target mean must be positive".into()));
    }
    let k = params.spec.bias_index();
    let log_mean = |p: &PriorParams| -> Result<f64> {
        let f = prior_forward(p, annot, indices)?;
        Ok((f.iter().sum::<f64>() / f.len().max(1) as f64).ln())
    };
    let goal = target_mean.ln();
    let (mut lo, mut hi) = (-80.0, 80.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        params.weights[k] = mid;
        if log_mean(params)? < goal {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    params.weights[k] = 0.5 * (lo + hi);
    Ok(())
}
