//! Convex networks: a stack of activation-free affine layers followed by a
//! maximum (or LogSumExp) output reduction.
//!
//! Because the layers compose to a single affine map, the output is always a
//! maximum (or smoothed maximum) of `n` hyperplanes and therefore convex in
//! the input, whatever the parameter values.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::error::{check_dim, Error, Result};
use crate::rng::{self, domain};

/// Lower clamp applied to the trainable LogSumExp scale after each update.
pub const MIN_LAMBDA_TILDE: f64 = 1e-3;

/// One affine layer `x -> W x + b`, weights stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineLayer {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl AffineLayer {
    pub fn new(rows: usize, cols: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        check_dim("layer weights", rows * cols, weights.len())?;
        check_dim("layer bias", rows, bias.len())?;
        Ok(Self {
            rows,
            cols,
            weights,
            bias,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }

    fn identity(dim: usize) -> Self {
        let mut layer = Self::zeros(dim, dim);
        for i in 0..dim {
            layer.weights[i * dim + i] = 1.0;
        }
        layer
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.cols + j]
    }

    /// Row `i` of the weight matrix.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.cols..(i + 1) * self.cols]
    }

    /// Writes `W x + b` into `out`.
    #[inline]
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.weights[i * self.cols..(i + 1) * self.cols];
            *o = self.bias[i] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.apply_into(x, &mut out);
        out
    }

    /// The composition `self ∘ inner`.
    fn compose(&self, inner: &AffineLayer) -> AffineLayer {
        debug_assert_eq!(self.cols, inner.rows);
        let mut out = AffineLayer::zeros(self.rows, inner.cols);
        for i in 0..self.rows {
            let mut b = self.bias[i];
            for k in 0..self.cols {
                let w = self.weight(i, k);
                b += w * inner.bias[k];
                let dst = &mut out.weights[i * inner.cols..(i + 1) * inner.cols];
                for (d, s) in dst.iter_mut().zip(inner.row(k)) {
                    *d += w * s;
                }
            }
            out.bias[i] = b;
        }
        out
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }

    fn scale(&mut self, s: f64) {
        self.weights.iter_mut().chain(self.bias.iter_mut()).for_each(|v| *v *= s);
    }
}

/// The collapsed network: `n` hyperplanes `(w_i, w_i^0)` over `d` inputs.
pub type Hyperplanes = AffineLayer;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivationKind {
    Max,
    LogSumExp,
}

/// Output reduction. For LogSumExp the effective inverse temperature is
/// `c * lambda_tilde`, where only `lambda_tilde` is trained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Activation {
    pub kind: ActivationKind,
    pub c: f64,
    pub lambda_tilde: f64,
}

impl Activation {
    pub fn max() -> Self {
        Self {
            kind: ActivationKind::Max,
            c: 1.0,
            lambda_tilde: 1.0,
        }
    }

    pub fn log_sum_exp(c: f64) -> Self {
        Self {
            kind: ActivationKind::LogSumExp,
            c,
            lambda_tilde: 1.0,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.c * self.lambda_tilde
    }

    /// Reduces `z` to a scalar.
    pub fn apply(&self, z: &[f64]) -> f64 {
        match self.kind {
            ActivationKind::Max => z[argmax(z)],
            ActivationKind::LogSumExp => log_sum_exp(z, self.lambda()),
        }
    }

    /// Reduces `z` and writes `∂φ/∂z` into `weights`.
    pub fn apply_with_weights(&self, z: &[f64], weights: &mut [f64]) -> f64 {
        match self.kind {
            ActivationKind::Max => {
                let k = argmax(z);
                weights.iter_mut().for_each(|w| *w = 0.0);
                weights[k] = 1.0;
                z[k]
            }
            ActivationKind::LogSumExp => softmax_log_sum_exp(z, self.lambda(), weights),
        }
    }

    /// `∂φ/∂λ̃` given the pre-activations, the value and the weights from
    /// [`Activation::apply_with_weights`]. Zero for Max.
    pub fn lambda_tilde_derivative(&self, z: &[f64], value: f64, weights: &[f64]) -> f64 {
        match self.kind {
            ActivationKind::Max => 0.0,
            ActivationKind::LogSumExp => {
                let mean: f64 = z.iter().zip(weights).map(|(a, b)| a * b).sum();
                self.c * (mean - value) / self.lambda()
            }
        }
    }
}

/// Index of the largest entry; ties go to the lowest index.
#[inline]
pub fn argmax(z: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in z.iter().enumerate().skip(1) {
        if v > z[best] {
            best = i;
        }
    }
    best
}

/// Shifted exponents below this contribute less than 1e-17 and are dropped.
const EXP_CUTOFF: f64 = -40.0;

#[inline]
fn shifted_exp(a: f64) -> f64 {
    if a < EXP_CUTOFF {
        0.0
    } else {
        a.exp()
    }
}

/// `(1/λ) ln Σ exp(λ z_i)` in the max-shifted form.
pub fn log_sum_exp(z: &[f64], lambda: f64) -> f64 {
    let m = z[argmax(z)];
    let s: f64 = z.iter().map(|&v| shifted_exp(lambda * (v - m))).sum();
    m + s.ln() / lambda
}

/// LogSumExp value; `weights` receives the softmax of `λ z`.
pub fn softmax_log_sum_exp(z: &[f64], lambda: f64, weights: &mut [f64]) -> f64 {
    let m = z[argmax(z)];
    let mut s = 0.0;
    for (w, &v) in weights.iter_mut().zip(z) {
        *w = shifted_exp(lambda * (v - m));
        s += *w;
    }
    let inv = 1.0 / s;
    weights.iter_mut().for_each(|w| *w *= inv);
    m + s.ln() / lambda
}

/// Named architectures: LM / L2SE (one layer) and their scrambled variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    LinearMax,
    LinearLogSumExp,
    ScrambledLinearMax(usize),
    ScrambledLinearLogSumExp(usize),
}

impl Architecture {
    pub fn layers(&self) -> usize {
        match *self {
            Architecture::LinearMax | Architecture::LinearLogSumExp => 1,
            Architecture::ScrambledLinearMax(l) | Architecture::ScrambledLinearLogSumExp(l) => l,
        }
    }

    pub fn kind(&self) -> ActivationKind {
        match self {
            Architecture::LinearMax | Architecture::ScrambledLinearMax(_) => ActivationKind::Max,
            _ => ActivationKind::LogSumExp,
        }
    }

    /// The four architectures compared throughout the experiments.
    pub fn standard() -> [Architecture; 4] {
        [
            Architecture::LinearMax,
            Architecture::LinearLogSumExp,
            Architecture::ScrambledLinearMax(2),
            Architecture::ScrambledLinearLogSumExp(2),
        ]
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Architecture::LinearMax => write!(f, "LM"),
            Architecture::LinearLogSumExp => write!(f, "L2SE"),
            Architecture::ScrambledLinearMax(l) => write!(f, "{l}-SLM"),
            Architecture::ScrambledLinearLogSumExp(l) => write!(f, "{l}-SL2SE"),
        }
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        match upper.as_str() {
            "LM" => return Ok(Architecture::LinearMax),
            "L2SE" => return Ok(Architecture::LinearLogSumExp),
            _ => {}
        }
        let bad = || Error::InvalidSpec(format!("unknown architecture `{s}`"));
        let (layers, rest) = upper.split_once('-').ok_or_else(bad)?;
        let layers: usize = layers.parse().map_err(|_| bad())?;
        if layers < 2 {
            return Err(bad());
        }
        match rest {
            "SLM" => Ok(Architecture::ScrambledLinearMax(layers)),
            "SL2SE" => Ok(Architecture::ScrambledLinearLogSumExp(layers)),
            _ => Err(bad()),
        }
    }
}

/// Shape and initialization settings for a fresh network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetConfig {
    pub architecture: Architecture,
    /// Hyperplane count `n`, also the width of every hidden layer.
    pub width: usize,
    /// Fixed LogSumExp scale constant.
    pub c: f64,
}

/// A convex network `φ ∘ a_L ∘ … ∘ a_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexNet {
    layers: Vec<AffineLayer>,
    activation: Activation,
}

/// Parameter and input gradients of a scalar function of the network output.
#[derive(Debug, Clone, PartialEq)]
pub struct NetGradients {
    pub layers: Vec<AffineLayer>,
    pub lambda_tilde: f64,
    pub input: Vec<f64>,
}

impl NetGradients {
    pub fn zeros_like(net: &ConvexNet) -> Self {
        Self {
            layers: net.layers.iter().map(|l| AffineLayer::zeros(l.rows, l.cols)).collect(),
            lambda_tilde: 0.0,
            input: vec![0.0; net.input_dim()],
        }
    }

    /// Iterates over every parameter gradient in a fixed order (layer
    /// weights, layer bias, ..., then λ̃).
    pub fn parameters(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .chain(std::iter::once(self.lambda_tilde))
    }
}

/// Result of a convexity midpoint test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MidpointReport {
    pub passed: bool,
    pub trials: usize,
    /// Largest value of `f(tx+(1-t)y) - (t f(x) + (1-t) f(y))` observed.
    pub worst_violation: f64,
}

impl ConvexNet {
    pub fn new(layers: Vec<AffineLayer>, activation: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidSpec("a network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            check_dim("layer chaining", pair[0].rows, pair[1].cols)?;
        }
        if layers.iter().any(|l| !l.is_finite()) {
            return Err(Error::Numeric("non-finite network parameter".into()));
        }
        if activation.kind == ActivationKind::LogSumExp && !(activation.lambda() > 0.0) {
            return Err(Error::InvalidSpec("LogSumExp scale must be positive".into()));
        }
        Ok(Self { layers, activation })
    }

    /// Glorot-uniform weights, zero biases, λ̃ = 1.
    pub fn init(cfg: &NetConfig, input_dim: usize, seed: u64) -> Self {
        let activation = match cfg.architecture.kind() {
            ActivationKind::Max => Activation::max(),
            ActivationKind::LogSumExp => Activation::log_sum_exp(cfg.c),
        };
        let mut rng = rng::substream(seed, domain::INIT, 0);
        let mut layers = Vec::with_capacity(cfg.architecture.layers());
        let mut fan_in = input_dim;
        for _ in 0..cfg.architecture.layers() {
            let limit = (6.0 / (fan_in + cfg.width) as f64).sqrt();
            let weights = (0..cfg.width * fan_in)
                .map(|_| limit * (2.0 * rng::uniform_open(&mut rng) - 1.0))
                .collect();
            layers.push(AffineLayer {
                rows: cfg.width,
                cols: fan_in,
                weights,
                bias: vec![0.0; cfg.width],
            });
            fan_in = cfg.width;
        }
        Self { layers, activation }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    /// Number of hyperplanes `n`.
    pub fn width(&self) -> usize {
        self.layers[self.layers.len() - 1].rows
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[AffineLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [AffineLayer] {
        &mut self.layers
    }

    pub fn activation(&self) -> &Activation {
        &self.activation
    }

    pub fn activation_mut(&mut self) -> &mut Activation {
        &mut self.activation
    }

    /// Number of trainable scalars (λ̃ included for LogSumExp).
    pub fn parameter_count(&self) -> usize {
        let base: usize = self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum();
        base + usize::from(self.activation.kind == ActivationKind::LogSumExp)
    }

    /// Pre-activations `a_L ∘ … ∘ a_1 (x)`, computed layer by layer.
    pub fn pre_activations(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("input", self.input_dim(), x.len())?;
        let mut h = x.to_vec();
        for layer in &self.layers {
            h = layer.apply(&h);
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite pre-activation".into()));
        }
        Ok(h)
    }

    /// Network output at `x`.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        let z = self.pre_activations(x)?;
        let y = self.activation.apply(&z);
        if !y.is_finite() {
            return Err(Error::Numeric("non-finite network output".into()));
        }
        Ok(y)
    }

    /// Outputs for the rows of `xs` (row-major), through the collapsed map.
    pub fn forward_batch(&self, xs: &[f64]) -> Result<Vec<f64>> {
        let d = self.input_dim();
        check_dim("batch inputs", 0, xs.len() % d)?;
        let planes = self.collapse_to_affine();
        let mut z = vec![0.0; planes.rows()];
        xs.chunks(d)
            .map(|x| {
                planes.apply_into(x, &mut z);
                let y = self.activation.apply(&z);
                if y.is_finite() {
                    Ok(y)
                } else {
                    Err(Error::Numeric("non-finite network output".into()))
                }
            })
            .collect()
    }

    /// The single affine map equivalent to the layer stack; row `i` is
    /// hyperplane `i`.
    pub fn collapse_to_affine(&self) -> Hyperplanes {
        collapse(&self.layers)
    }

    /// Subgradient (Max) or gradient (LogSumExp) of the output in `x`.
    pub fn input_subgradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let planes = self.collapse_to_affine();
        check_dim("input", planes.cols, x.len())?;
        let z = planes.apply(x);
        let mut p = vec![0.0; z.len()];
        self.activation.apply_with_weights(&z, &mut p);
        Ok(weighted_rows(&planes, &p))
    }

    /// Gradients of `upstream * f(x)` with respect to every parameter and
    /// to the input. Max uses the lowest-index argmax subgradient.
    pub fn backward(&self, x: &[f64], upstream: f64) -> Result<NetGradients> {
        let planes = self.collapse_to_affine();
        check_dim("input", planes.cols, x.len())?;
        let z = planes.apply(x);
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite pre-activation".into()));
        }
        let mut p = vec![0.0; z.len()];
        let value = self.activation.apply_with_weights(&z, &mut p);
        let n = planes.rows;
        let d = planes.cols;
        let mut eff = AffineLayer::zeros(n, d);
        for i in 0..n {
            let s = upstream * p[i];
            eff.bias[i] = s;
            for j in 0..d {
                eff.weights[i * d + j] = s * x[j];
            }
        }
        let mut grads = self.chain_effective_gradient(&eff);
        grads.lambda_tilde = upstream * self.activation.lambda_tilde_derivative(&z, value, &p);
        grads.input = weighted_rows(&planes, &p).into_iter().map(|g| upstream * g).collect();
        Ok(grads)
    }

    /// Maps a gradient with respect to the collapsed map `(W_eff, b_eff)`
    /// back onto the layer parameters. λ̃ and input gradients are left at 0.
    ///
    /// With `(Ws, bs)` the composition of the layers above `ℓ` and
    /// `(Wp, bp)` the composition of the layers below it,
    /// `∂/∂W_ℓ = Wsᵀ (G Wpᵀ + g bpᵀ)` and `∂/∂b_ℓ = Wsᵀ g`.
    pub fn chain_effective_gradient(&self, eff: &AffineLayer) -> NetGradients {
        let depth = self.layers.len();
        let mut grads = NetGradients::zeros_like(self);
        // prefixes[l] = layers[0..l] composed (identity for l = 0)
        let mut prefixes = Vec::with_capacity(depth);
        prefixes.push(AffineLayer::identity(self.input_dim()));
        for l in 0..depth - 1 {
            let next = self.layers[l].compose(&prefixes[l]);
            prefixes.push(next);
        }
        // walk down from the top, carrying the suffix composition
        let mut suffix: Option<AffineLayer> = None;
        for l in (0..depth).rev() {
            let prefix = &prefixes[l];
            let layer = &self.layers[l];
            // M = G Wpᵀ + g bpᵀ  (n × cols_l)
            let n = eff.rows;
            let cols = layer.cols;
            let mut m = vec![0.0; n * cols];
            for i in 0..n {
                let grow = eff.row(i);
                for j in 0..cols {
                    let prow = prefix.row(j);
                    m[i * cols + j] =
                        grow.iter().zip(prow).map(|(a, b)| a * b).sum::<f64>() + eff.bias[i] * prefix.bias[j];
                }
            }
            let out = &mut grads.layers[l];
            match &suffix {
                None => {
                    out.weights.copy_from_slice(&m);
                    out.bias.copy_from_slice(&eff.bias);
                }
                Some(s) => {
                    // Wsᵀ M and Wsᵀ g; s is n × rows_l
                    for k in 0..n {
                        let g = eff.bias[k];
                        let mrow = &m[k * cols..(k + 1) * cols];
                        for r in 0..layer.rows {
                            let w = s.weight(k, r);
                            if w == 0.0 {
                                continue;
                            }
                            out.bias[r] += w * g;
                            let dst = &mut out.weights[r * cols..(r + 1) * cols];
                            for (d, v) in dst.iter_mut().zip(mrow) {
                                *d += w * v;
                            }
                        }
                    }
                }
            }
            suffix = Some(match suffix {
                None => layer.clone(),
                Some(s) => s.compose(layer),
            });
        }
        grads
    }

    /// Hyperplanes attaining the maximum (within `tol`) at some point of `xs`.
    pub fn activated_hyperplanes(&self, xs: &[Vec<f64>], tol: f64) -> Result<BTreeSet<usize>> {
        let planes = self.collapse_to_affine();
        let mut active = BTreeSet::new();
        for x in xs {
            check_dim("input", planes.cols, x.len())?;
            let z = planes.apply(x);
            let m = z[argmax(&z)];
            active.extend(z.iter().enumerate().filter(|(_, &v)| v >= m - tol).map(|(i, _)| i));
        }
        Ok(active)
    }

    /// Midpoint convexity test on the box `[lo, hi]`.
    pub fn convexity_midpoint_check(
        &self,
        trials: usize,
        lo: &[f64],
        hi: &[f64],
        rel_tol: f64,
        seed: u64,
    ) -> Result<MidpointReport> {
        midpoint_check(|x| self.forward(x), trials, lo, hi, rel_tol, seed)
    }

    /// Scales every hyperplane by `s` (weights and biases of the last layer).
    pub fn scale_output_layer(&mut self, s: f64) {
        if let Some(last) = self.layers.last_mut() {
            last.scale(s);
        }
    }

    /// Writes the self-describing text format. Floats use the shortest
    /// round-trip representation, so reading back is bit-exact.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "cvxnet 1")?;
        writeln!(w, "layers {}", self.depth())?;
        writeln!(w, "width {}", self.width())?;
        writeln!(w, "input_dim {}", self.input_dim())?;
        let kind = match self.activation.kind {
            ActivationKind::Max => "max",
            ActivationKind::LogSumExp => "logsumexp",
        };
        writeln!(w, "activation {kind}")?;
        writeln!(w, "c {:?}", self.activation.c)?;
        writeln!(w, "lambda_tilde {:?}", self.activation.lambda_tilde)?;
        for layer in &self.layers {
            writeln!(w, "layer {} {}", layer.rows, layer.cols)?;
            for i in 0..layer.rows {
                writeln!(w, "{}", join(layer.row(i)))?;
            }
            writeln!(w, "{}", join(&layer.bias))?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            match lines.next() {
                Some(line) => Ok(line?),
                None => Err(Error::Format("unexpected end of file".into())),
            }
        };
        let magic = next()?;
        if magic.trim() != "cvxnet 1" {
            return Err(Error::Format(format!("bad header `{magic}`")));
        }
        let depth: usize = parse_field(&next()?, "layers")?;
        let width: usize = parse_field(&next()?, "width")?;
        let input_dim: usize = parse_field(&next()?, "input_dim")?;
        let kind = match field(&next()?, "activation")?.as_str() {
            "max" => ActivationKind::Max,
            "logsumexp" => ActivationKind::LogSumExp,
            other => return Err(Error::Format(format!("unknown activation `{other}`"))),
        };
        let c: f64 = parse_field(&next()?, "c")?;
        let lambda_tilde: f64 = parse_field(&next()?, "lambda_tilde")?;
        let mut layers = Vec::with_capacity(depth);
        for _ in 0..depth {
            let header = next()?;
            let dims: Vec<usize> = field(&header, "layer")?
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::Format(format!("bad layer header `{header}`"))))
                .collect::<Result<_>>()?;
            if dims.len() != 2 {
                return Err(Error::Format(format!("bad layer header `{header}`")));
            }
            let (rows, cols) = (dims[0], dims[1]);
            let mut weights = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let row = parse_floats(&next()?)?;
                check_dim("weight row", cols, row.len())?;
                weights.extend(row);
            }
            let bias = parse_floats(&next()?)?;
            layers.push(AffineLayer::new(rows, cols, weights, bias)?);
        }
        let net = ConvexNet::new(
            layers,
            Activation {
                kind,
                c,
                lambda_tilde,
            },
        )?;
        check_dim("width", width, net.width())?;
        check_dim("input_dim", input_dim, net.input_dim())?;
        Ok(net)
    }
}

fn collapse(layers: &[AffineLayer]) -> AffineLayer {
    let mut acc = layers[0].clone();
    for layer in &layers[1..] {
        acc = layer.compose(&acc);
    }
    acc
}

fn weighted_rows(planes: &AffineLayer, p: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; planes.cols];
    for (i, &w) in p.iter().enumerate() {
        if w != 0.0 {
            for (gj, v) in g.iter_mut().zip(planes.row(i)) {
                *gj += w * v;
            }
        }
    }
    g
}

/// Midpoint convexity test for an arbitrary function on the box `[lo, hi]`.
///
/// Passes iff `f(tx+(1-t)y) <= t f(x) + (1-t) f(y) + rel_tol (1 + |rhs|)`
/// for every sampled triple. Evaluation errors propagate.
pub fn midpoint_check<F>(
    f: F,
    trials: usize,
    lo: &[f64],
    hi: &[f64],
    rel_tol: f64,
    seed: u64,
) -> Result<MidpointReport>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    check_dim("box", lo.len(), hi.len())?;
    let d = lo.len();
    let mut rng = rng::substream(seed, domain::MIDPOINT, 0);
    let draw = |rng: &mut _| -> Vec<f64> {
        (0..d).map(|j| lo[j] + (hi[j] - lo[j]) * rng::uniform_open(rng)).collect()
    };
    let mut passed = true;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials.max(1) {
        let x = draw(&mut rng);
        let y = draw(&mut rng);
        let t = rng::uniform_open(&mut rng);
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let rhs = t * f(&x)? + (1.0 - t) * f(&y)?;
        let lhs = f(&mid)?;
        let gap = lhs - rhs;
        worst = worst.max(gap);
        if gap > rel_tol * (1.0 + rhs.abs()) {
            passed = false;
        }
    }
    Ok(MidpointReport {
        passed,
        trials: trials.max(1),
        worst_violation: worst,
    })
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(" ")
}

fn field(line: &str, key: &str) -> Result<String> {
    line.trim()
        .strip_prefix(key)
        .map(|rest| rest.trim().to_string())
        .ok_or_else(|| Error::Format(format!("expected `{key}`, found `{line}`")))
}

fn parse_field<T: FromStr>(line: &str, key: &str) -> Result<T> {
    field(line, key)?
        .parse()
        .map_err(|_| Error::Format(format!("bad value for `{key}` in `{line}`")))
}

fn parse_floats(line: &str) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Format(format!("bad number `{t}`"))))
        .collect()
}
