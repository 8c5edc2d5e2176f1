//! Mean-squared-error training of convex networks with Adam.

use std::io::Write;

use crate::error::{check_dim, Error, Result};
use crate::net::{AffineLayer, ActivationKind, ConvexNet, NetGradients, MIN_LAMBDA_TILDE};

/// Warm-up then geometric decay: `γ_i = γ0` for `i <= warm_iters`, then
/// `γ_i = max(floor, decay * γ_{i-1})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub gamma0: f64,
    pub floor: f64,
    pub decay: f64,
    pub warm_iters: usize,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self {
            gamma0: 1e-3,
            floor: 1e-5,
            decay: 0.95,
            warm_iters: 100,
        }
    }
}

impl LrSchedule {
    /// Rate at iteration `i` (1-based) given the previous rate.
    pub fn rate(&self, i: usize, prev: f64) -> f64 {
        if i <= self.warm_iters {
            self.gamma0
        } else {
            self.floor.max(self.decay * prev)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    Decaying(LrSchedule),
    Constant(f64),
}

impl Schedule {
    /// The rate sequence for iterations `1..=iterations`.
    pub fn rates(&self, iterations: usize) -> Vec<f64> {
        match *self {
            Schedule::Constant(r) => vec![r; iterations],
            Schedule::Decaying(s) => {
                let mut out = Vec::with_capacity(iterations);
                let mut prev = s.gamma0;
                for i in 1..=iterations {
                    prev = s.rate(i, prev);
                    out.push(prev);
                }
                out
            }
        }
    }
}

/// Adam moment accumulators for a network plus `extra` free scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(parameter_count: usize) -> Self {
        Self {
            m: vec![0.0; parameter_count],
            v: vec![0.0; parameter_count],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn for_net(net: &ConvexNet, extra: usize) -> Self {
        Self::new(net.parameter_count() + extra)
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update of the network parameters (λ̃
    /// included) and of `extra` scalars with gradients `extra_grads`.
    pub fn step(
        &mut self,
        net: &mut ConvexNet,
        grads: &NetGradients,
        extra: &mut [f64],
        extra_grads: &[f64],
        rate: f64,
    ) -> Result<()> {
        check_dim("adam state", self.m.len(), net.parameter_count() + extra.len())?;
        check_dim("extra gradients", extra.len(), extra_grads.len())?;
        check_dim("gradient layers", net.depth(), grads.layers.len())?;
        let lse = net.activation().kind == ActivationKind::LogSumExp;
        let finite = grads.layers.iter().all(|l| {
            l.weights().iter().chain(l.bias()).all(|g| g.is_finite())
        }) && grads.lambda_tilde.is_finite()
            && extra_grads.iter().all(|g| g.is_finite());
        if !finite {
            return Err(Error::Numeric("non-finite gradient".into()));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let (m, v) = (&mut self.m, &mut self.v);
        let mut idx = 0;
        let mut update = |p: &mut f64, g: f64| {
            m[idx] = b1 * m[idx] + (1.0 - b1) * g;
            v[idx] = b2 * v[idx] + (1.0 - b2) * g * g;
            *p -= rate * (m[idx] / c1) / ((v[idx] / c2).sqrt() + eps);
            idx += 1;
        };
        for (layer, glayer) in net.layers_mut().iter_mut().zip(&grads.layers) {
            check_dim("gradient shape", layer.weights().len(), glayer.weights().len())?;
            for (p, &g) in layer.weights_mut().iter_mut().zip(glayer.weights()) {
                update(p, g);
            }
            for (p, &g) in layer.bias_mut().iter_mut().zip(glayer.bias()) {
                update(p, g);
            }
        }
        if lse {
            let act = net.activation_mut();
            update(&mut act.lambda_tilde, grads.lambda_tilde);
            act.lambda_tilde = act.lambda_tilde.max(MIN_LAMBDA_TILDE);
        }
        for (p, &g) in extra.iter_mut().zip(extra_grads) {
            update(p, g);
        }
        Ok(())
    }
}

/// Single Adam update of every network parameter.
pub fn adam_step(state: &mut AdamState, net: &mut ConvexNet, grads: &NetGradients, rate: f64) -> Result<()> {
    state.step(net, grads, &mut [], &[], rate)
}

/// Mini-batch loss and gradient.
#[derive(Debug, Clone)]
pub struct BatchGradient {
    /// Mean squared error over the batch.
    pub loss: f64,
    pub grads: NetGradients,
    /// `prediction - target` per sample.
    pub residuals: Vec<f64>,
}

/// MSE of `net(x_b) + offset_b` against `y_b` and its parameter gradient.
///
/// `xs` is row-major with `net.input_dim()` columns. The gradient is routed
/// through the collapsed affine map, so each sample costs `O(n d)`.
pub fn batch_loss_and_grad(
    net: &ConvexNet,
    xs: &[f64],
    ys: &[f64],
    offsets: Option<&[f64]>,
) -> Result<BatchGradient> {
    let d = net.input_dim();
    let batch = ys.len();
    check_dim("batch inputs", batch * d, xs.len())?;
    if let Some(o) = offsets {
        check_dim("batch offsets", batch, o.len())?;
    }
    if batch == 0 {
        return Err(Error::InvalidSpec("empty batch".into()));
    }
    let planes = net.collapse_to_affine();
    let n = planes.rows();
    let act = *net.activation();
    let mut gw = vec![0.0; n * d];
    let mut gb = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut lambda_grad = 0.0;
    let mut loss = 0.0;
    let mut residuals = Vec::with_capacity(batch);
    let inv = 1.0 / batch as f64;
    for b in 0..batch {
        let x = &xs[b * d..(b + 1) * d];
        planes.apply_into(x, &mut z);
        let value = act.apply_with_weights(&z, &mut p);
        let pred = value + offsets.map_or(0.0, |o| o[b]);
        let r = pred - ys[b];
        if !r.is_finite() {
            return Err(Error::Numeric("non-finite prediction during training".into()));
        }
        residuals.push(r);
        loss += r * r;
        let s = 2.0 * r * inv;
        lambda_grad += s * act.lambda_tilde_derivative(&z, value, &p);
        for i in 0..n {
            let si = s * p[i];
            if si == 0.0 {
                continue;
            }
            gb[i] += si;
            for (g, xj) in gw[i * d..(i + 1) * d].iter_mut().zip(x) {
                *g += si * xj;
            }
        }
    }
    let eff = AffineLayer::new(n, d, gw, gb)?;
    let mut grads = net.chain_effective_gradient(&eff);
    grads.lambda_tilde = lambda_grad;
    Ok(BatchGradient {
        loss: loss * inv,
        grads,
        residuals,
    })
}

/// Per-iteration training record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossTrace {
    pub rows: Vec<TraceRow>,
}

impl LossTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Mean loss over the last `k` recorded iterations.
    pub fn tail_mean(&self, k: usize) -> f64 {
        let k = k.min(self.rows.len()).max(1);
        self.rows[self.rows.len() - k..].iter().map(|r| r.loss).sum::<f64>() / k as f64
    }

    /// `iter,loss,lr` CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iter,loss,lr")?;
        for r in &self.rows {
            writeln!(w, "{},{:?},{:?}", r.iter, r.loss, r.lr)?;
        }
        Ok(())
    }
}

/// Supplier of regression batches.
pub trait BatchSource {
    /// Fills `xs` (row-major) and `ys` with batch number `index`.
    fn fill(&mut self, index: u64, batch_size: usize, xs: &mut Vec<f64>, ys: &mut Vec<f64>) -> Result<()>;
}

/// Freshly sampled batches: `sample(seed_for_batch, batch_size, xs, ys)`.
pub struct FreshSampler<F> {
    seed: u64,
    sample: F,
}

impl<F> FreshSampler<F>
where
    F: FnMut(u64, usize, &mut Vec<f64>, &mut Vec<f64>) -> Result<()>,
{
    pub fn new(seed: u64, sample: F) -> Self {
        Self { seed, sample }
    }
}

impl<F> BatchSource for FreshSampler<F>
where
    F: FnMut(u64, usize, &mut Vec<f64>, &mut Vec<f64>) -> Result<()>,
{
    fn fill(&mut self, index: u64, batch_size: usize, xs: &mut Vec<f64>, ys: &mut Vec<f64>) -> Result<()> {
        xs.clear();
        ys.clear();
        let seed = self.seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        (self.sample)(seed, batch_size, xs, ys)
    }
}

/// A fixed dataset consumed in order, wrapping around at the end.
#[derive(Debug, Clone)]
pub struct CyclingDataset {
    inputs: Vec<f64>,
    targets: Vec<f64>,
    dim: usize,
    cursor: usize,
}

impl CyclingDataset {
    pub fn new(inputs: Vec<f64>, targets: Vec<f64>, dim: usize) -> Result<Self> {
        check_dim("dataset inputs", targets.len() * dim, inputs.len())?;
        if targets.is_empty() {
            return Err(Error::InvalidSpec("empty dataset".into()));
        }
        Ok(Self {
            inputs,
            targets,
            dim,
            cursor: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

impl BatchSource for CyclingDataset {
    fn fill(&mut self, _index: u64, batch_size: usize, xs: &mut Vec<f64>, ys: &mut Vec<f64>) -> Result<()> {
        xs.clear();
        ys.clear();
        for _ in 0..batch_size {
            let i = self.cursor;
            xs.extend_from_slice(&self.inputs[i * self.dim..(i + 1) * self.dim]);
            ys.push(self.targets[i]);
            self.cursor = (self.cursor + 1) % self.targets.len();
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub iterations: usize,
    /// Optimizer steps (batches) per iteration; the rate changes per iteration.
    pub batches_per_iteration: usize,
    pub schedule: Schedule,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.batches_per_iteration == 0 {
            return Err(Error::InvalidSpec("batch size and batches per iteration must be >= 1".into()));
        }
        Ok(())
    }
}

/// Runs `cfg.iterations` iterations of Adam on the MSE loss. On error the
/// trace keeps every iteration completed before the failure.
pub fn train_regression<S: BatchSource>(
    net: &mut ConvexNet,
    source: &mut S,
    cfg: &TrainConfig,
    trace: &mut LossTrace,
) -> Result<()> {
    cfg.validate()?;
    let mut adam = AdamState::for_net(net, 0);
    let rates = cfg.schedule.rates(cfg.iterations);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut batch_index = 0u64;
    for (it, &rate) in rates.iter().enumerate() {
        let mut loss = 0.0;
        for _ in 0..cfg.batches_per_iteration {
            source.fill(batch_index, cfg.batch_size, &mut xs, &mut ys)?;
            batch_index += 1;
            let bg = batch_loss_and_grad(net, &xs, &ys, None)?;
            adam_step(&mut adam, net, &bg.grads, rate)?;
            loss += bg.loss;
        }
        trace.rows.push(TraceRow {
            iter: it + 1,
            loss: loss / cfg.batches_per_iteration as f64,
            lr: rate,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Activation, Architecture, NetConfig};

    #[test]
    fn schedule_values() {
        let s = LrSchedule::default();
        assert_eq!(s.rate(1, 0.0), 1e-3);
        assert_eq!(s.rate(100, 5.0), 1e-3);
        assert!((s.rate(101, 1e-3) - 9.5e-4).abs() < 1e-18);
        let rates = Schedule::Decaying(s).rates(1000);
        assert_eq!(*rates.last().unwrap(), 1e-5);
        assert!(rates.windows(2).skip(100).all(|w| w[1] <= w[0]));
        assert!(rates.iter().all(|&r| r >= 1e-5));
    }

    fn scalar_net(w: f64) -> ConvexNet {
        ConvexNet::new(vec![AffineLayer::new(1, 1, vec![w], vec![0.0]).unwrap()], Activation::max()).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut net = scalar_net(0.7);
        let before = net.clone();
        let mut adam = AdamState::for_net(&net, 0);
        let g = NetGradients::zeros_like(&net);
        adam_step(&mut adam, &mut net, &g, 1e-2).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn first_adam_step_moves_by_rate() {
        let mut net = scalar_net(0.7);
        let mut adam = AdamState::for_net(&net, 0);
        let g = net.backward(&[1.0], 1.0).unwrap();
        adam_step(&mut adam, &mut net, &g, 1e-2).unwrap();
        let moved = net.layers()[0].weights()[0] - 0.7;
        assert!((moved + 1e-2).abs() < 1e-9, "{moved}");
    }

    #[test]
    fn nan_gradient_aborts() {
        let mut net = scalar_net(0.7);
        let mut adam = AdamState::for_net(&net, 0);
        let mut g = NetGradients::zeros_like(&net);
        g.layers[0].bias_mut()[0] = f64::NAN;
        assert!(matches!(adam_step(&mut adam, &mut net, &g, 1e-2), Err(Error::Numeric(_))));
        assert_eq!(adam.steps_taken(), 0);
    }

    #[test]
    fn batch_gradient_matches_per_sample_backward() {
        let cfg = NetConfig {
            architecture: Architecture::ScrambledLinearLogSumExp(3),
            width: 6,
            c: 3.0,
        };
        let net = ConvexNet::init(&cfg, 2, 5);
        let xs = [0.1, 0.9, -0.4, 0.3, 0.7, 0.2];
        let ys = [0.5, -1.0, 2.0];
        let bg = batch_loss_and_grad(&net, &xs, &ys, None).unwrap();
        let mut expected = NetGradients::zeros_like(&net);
        for b in 0..3 {
            let x = &xs[2 * b..2 * b + 2];
            let r = net.forward(x).unwrap() - ys[b];
            let g = net.backward(x, 2.0 * r / 3.0).unwrap();
            for (e, s) in expected.layers.iter_mut().zip(&g.layers) {
                e.weights_mut().iter_mut().zip(s.weights()).for_each(|(a, b)| *a += b);
                e.bias_mut().iter_mut().zip(s.bias()).for_each(|(a, b)| *a += b);
            }
            expected.lambda_tilde += g.lambda_tilde;
        }
        for (a, b) in bg.grads.parameters().zip(expected.parameters()) {
            assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn zero_iterations_is_identity() {
        let cfg = NetConfig {
            architecture: Architecture::LinearMax,
            width: 3,
            c: 1.0,
        };
        let mut net = ConvexNet::init(&cfg, 1, 1);
        let before = net.clone();
        let mut data = CyclingDataset::new(vec![0.0, 1.0], vec![1.0, 2.0], 1).unwrap();
        let tc = TrainConfig {
            batch_size: 2,
            iterations: 0,
            batches_per_iteration: 1,
            schedule: Schedule::Constant(1e-2),
            seed: 0,
        };
        let mut trace = LossTrace::default();
        train_regression(&mut net, &mut data, &tc, &mut trace).unwrap();
        assert_eq!(net, before);
        assert!(trace.is_empty());
    }

    #[test]
    fn trace_csv() {
        let trace = LossTrace {
            rows: vec![TraceRow { iter: 1, loss: 0.5, lr: 1e-3 }],
        };
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "iter,loss,lr\n1,0.5,0.001\n");
    }
}
