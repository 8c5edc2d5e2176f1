//! Best-of Bermudan calls by backward dynamic programming, one convex
//! network per exercise date for the continuation value.

use std::io::Write;

use crate::error::{check_dim, Error, Result};
use crate::market::{BlackScholesModel, PathGrid, Paths};
use crate::net::{ConvexNet, NetConfig};
use crate::rng::{self, domain};
use crate::scaling::{CompiledNet, InputMap, OutputMap, ScaledNet};
use crate::train::{batch_loss_and_grad, AdamState, LossTrace, TraceRow, TrainConfig};

/// Best-of call `e^{-r t_k} (max_i s_i - K)_+` exercisable on the grid dates.
#[derive(Debug, Clone, PartialEq)]
pub struct BermudanSpec {
    pub strike: f64,
    pub grid: PathGrid,
    /// Discount rate used in the payoff; must match the model.
    pub rate: f64,
}

impl BermudanSpec {
    pub fn new(strike: f64, grid: PathGrid, rate: f64) -> Result<Self> {
        if !(strike > 0.0) {
            return Err(Error::InvalidSpec("strike must be positive".into()));
        }
        if !rate.is_finite() {
            return Err(Error::InvalidSpec("rate must be finite".into()));
        }
        Ok(Self { strike, grid, rate })
    }

    /// `t_k = k T / N`.
    pub fn uniform(strike: f64, maturity: f64, dates: usize, rate: f64) -> Result<Self> {
        Self::new(strike, PathGrid::uniform(maturity, dates)?, rate)
    }

    /// Number of steps `N`; exercise dates are `0..=N`.
    pub fn steps(&self) -> usize {
        self.grid.steps()
    }
}

/// Discounted best-of call payoff at date `k`.
pub fn payoff(spec: &BermudanSpec, k: usize, s: &[f64]) -> f64 {
    let best = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (-spec.rate * spec.grid.times()[k]).exp() * (best - spec.strike).max(0.0)
}

/// Continuation value model for one date.
#[derive(Debug, Clone)]
pub enum Continuation {
    Net(ScaledNet),
    Constant(f64),
}

/// Continuation values for dates `0..N`. Date `k` exercises when the
/// payoff is positive and at least the continuation value.
#[derive(Debug, Clone)]
pub struct StoppingPolicy {
    pub spec: BermudanSpec,
    pub dates: Vec<Continuation>,
}

impl StoppingPolicy {
    pub fn new(spec: BermudanSpec, dates: Vec<Continuation>) -> Result<Self> {
        check_dim("continuation models", spec.steps(), dates.len())?;
        Ok(Self { spec, dates })
    }

    /// Exercises at the first date with a positive payoff.
    pub fn always_exercise(spec: BermudanSpec) -> Self {
        let dates = vec![Continuation::Constant(f64::NEG_INFINITY); spec.steps()];
        Self { spec, dates }
    }

    /// Holds to maturity.
    pub fn never_exercise_early(spec: BermudanSpec) -> Self {
        let dates = vec![Continuation::Constant(f64::INFINITY); spec.steps()];
        Self { spec, dates }
    }

    pub fn continuation(&self, k: usize, s: &[f64]) -> Result<f64> {
        match &self.dates[k] {
            Continuation::Net(net) => net.eval(s),
            Continuation::Constant(c) => Ok(*c),
        }
    }

    fn compile(&self) -> Vec<CompiledContinuation> {
        self.dates
            .iter()
            .map(|c| match c {
                Continuation::Net(net) => CompiledContinuation::Net(CompiledNet::new(net)),
                Continuation::Constant(v) => CompiledContinuation::Constant(*v),
            })
            .collect()
    }
}

enum CompiledContinuation {
    Net(CompiledNet),
    Constant(f64),
}

impl CompiledContinuation {
    fn eval(&self, s: &[f64], scratch: &mut Vec<f64>) -> f64 {
        match self {
            CompiledContinuation::Net(net) => net.eval_with(s, scratch),
            CompiledContinuation::Constant(v) => *v,
        }
    }
}

#[inline]
fn exercise(g: f64, c: f64) -> bool {
    g > 0.0 && g >= c
}

/// Output of [`train_policy`].
#[derive(Debug, Clone)]
pub struct TrainedPolicy {
    pub policy: StoppingPolicy,
    /// In-sample `v̂_0` of every iteration.
    pub value_trace: Vec<f64>,
    /// Mean continuation loss over dates per iteration.
    pub loss: LossTrace,
}

impl TrainedPolicy {
    /// Mean in-sample `v̂_0` over the last `k` iterations.
    pub fn in_sample_value(&self, k: usize) -> f64 {
        let k = k.clamp(1, self.value_trace.len().max(1));
        let tail = &self.value_trace[self.value_trace.len().saturating_sub(k)..];
        tail.iter().sum::<f64>() / tail.len().max(1) as f64
    }
}

fn check_inputs(m: &BlackScholesModel, spec: &BermudanSpec, x0: &[f64]) -> Result<()> {
    check_dim("initial prices", m.dim(), x0.len())?;
    if x0.iter().any(|x| !(*x > 0.0)) {
        return Err(Error::InvalidSpec("initial prices must be positive".into()));
    }
    if (m.r - spec.rate).abs() > 1e-15 {
        return Err(Error::InvalidSpec("payoff discount rate differs from the model rate".into()));
    }
    Ok(())
}

fn simulate(m: &BlackScholesModel, x0: &[f64], grid: &PathGrid, count: usize, seed: u64) -> Result<Paths> {
    m.simulate_paths(x0, grid, count, seed)
}

/// Per-date input quantile boxes and target scales from a pilot run under
/// the hold-to-maturity rule.
fn pilot_maps(
    m: &BlackScholesModel,
    spec: &BermudanSpec,
    x0: &[f64],
    count: usize,
    seed: u64,
) -> Result<(Vec<InputMap>, Vec<OutputMap>)> {
    let n = spec.steps();
    let d = m.dim();
    let paths = simulate(m, x0, &spec.grid, count, rng::child_seed(seed, u64::MAX))?;
    let terminal: Vec<f64> = (0..count).map(|b| payoff(spec, n, paths.state(b, n))).collect();
    let out = OutputMap::standardize(&terminal, 1e-3 * spec.strike.max(1.0));
    let mut inputs = Vec::with_capacity(n);
    for k in 0..n {
        let states: Vec<f64> = (0..count).flat_map(|b| paths.state(b, k).to_vec()).collect();
        inputs.push(if k == 0 { InputMap::identity(d) } else { InputMap::from_quantiles(&states, d, 0.01, 0.99) });
    }
    Ok((inputs, vec![out; n]))
}

/// Backward training of the continuation networks. Each iteration draws
/// `batch_size * batches_per_iteration` fresh paths; for `k = N-1, …, 1`
/// net `k` takes `batches_per_iteration` Adam steps against the realized
/// downstream value, then the exercise decision updates that value
/// pathwise. Date 0 uses the sample mean of the downstream value.
pub fn train_policy(
    m: &BlackScholesModel,
    spec: &BermudanSpec,
    x0: &[f64],
    net_cfg: &NetConfig,
    cfg: &TrainConfig,
) -> Result<TrainedPolicy> {
    check_inputs(m, spec, x0)?;
    cfg.validate()?;
    let n = spec.steps();
    let d = m.dim();
    let per_iter = cfg.batch_size * cfg.batches_per_iteration;
    let (input_maps, output_maps) = pilot_maps(m, spec, x0, per_iter.max(4096), cfg.seed)?;

    let mut nets: Vec<ConvexNet> = (0..n)
        .map(|k| ConvexNet::init(net_cfg, d, rng::child_seed(cfg.seed, k as u64)))
        .collect();
    let mut adams: Vec<AdamState> = nets.iter().map(|net| AdamState::for_net(net, 0)).collect();
    let rates = cfg.schedule.rates(cfg.iterations);

    let mut value = vec![0.0; per_iter];
    let mut xs = vec![0.0; per_iter * d];
    let mut ys = vec![0.0; per_iter];
    let mut value_trace = Vec::with_capacity(cfg.iterations);
    let mut loss = LossTrace::default();
    let mut c0 = 0.0;
    let g0 = payoff(spec, 0, x0);

    for (it, &rate) in rates.iter().enumerate() {
        let paths = simulate(m, x0, &spec.grid, per_iter, rng::child_seed(cfg.seed, it as u64))?;
        for (b, v) in value.iter_mut().enumerate() {
            *v = payoff(spec, n, paths.state(b, n));
        }
        let mut iter_loss = 0.0;
        for k in (1..n).rev() {
            let (imap, omap) = (&input_maps[k], &output_maps[k]);
            for b in 0..per_iter {
                imap.apply_into(paths.state(b, k), &mut xs[b * d..(b + 1) * d]);
                ys[b] = omap.to_net(value[b]);
            }
            // C_k is read off the forward pass that precedes each update
            for j in 0..cfg.batches_per_iteration {
                let rows = j * cfg.batch_size..(j + 1) * cfg.batch_size;
                let bg = batch_loss_and_grad(
                    &nets[k],
                    &xs[rows.start * d..rows.end * d],
                    &ys[rows.clone()],
                    None,
                )?;
                adams[k].step(&mut nets[k], &bg.grads, &mut [], &[], rate)?;
                iter_loss += bg.loss;
                for (b, r) in rows.zip(&bg.residuals) {
                    let g = payoff(spec, k, paths.state(b, k));
                    if exercise(g, omap.from_net(ys[b] + r)) {
                        value[b] = g;
                    }
                }
            }
        }
        c0 = value.iter().sum::<f64>() / per_iter as f64;
        value_trace.push(if exercise(g0, c0) { g0 } else { c0 });
        loss.rows.push(TraceRow {
            iter: it + 1,
            loss: iter_loss / ((n - 1).max(1) * cfg.batches_per_iteration) as f64,
            lr: rate,
        });
    }

    let mut dates = Vec::with_capacity(n);
    dates.push(Continuation::Constant(c0));
    for (k, net) in nets.into_iter().enumerate().skip(1) {
        dates.push(Continuation::Net(ScaledNet {
            net,
            input: input_maps[k].clone(),
            output: output_maps[k],
        }));
    }
    Ok(TrainedPolicy {
        policy: StoppingPolicy::new(spec.clone(), dates)?,
        value_trace,
        loss,
    })
}

/// Out-of-sample value of the stopping rule induced by `policy` on fresh
/// paths: a lower bound for the Bermudan price in expectation.
pub fn lower_bound_price(
    policy: &StoppingPolicy,
    m: &BlackScholesModel,
    x0: &[f64],
    paths: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let spec = &policy.spec;
    check_inputs(m, spec, x0)?;
    if paths == 0 {
        return Err(Error::InvalidSpec("need at least one evaluation path".into()));
    }
    let n = spec.steps();
    let d = m.dim();
    let compiled = policy.compile();
    let mut path = vec![0.0; (n + 1) * d];
    let mut z = vec![0.0; d];
    let mut scratch = Vec::new();
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for b in 0..paths {
        let mut rng = rng::substream(seed, domain::PATHS, b as u64);
        m.path_into(x0, &spec.grid, &mut rng, &mut path, &mut z);
        let mut realized = payoff(spec, n, &path[n * d..]);
        for k in 0..n {
            let s = &path[k * d..(k + 1) * d];
            let g = payoff(spec, k, s);
            if g > 0.0 && exercise(g, compiled[k].eval(s, &mut scratch)) {
                realized = g;
                break;
            }
        }
        sum += realized;
        sum_sq += realized * realized;
    }
    let count = paths as f64;
    let mean = sum / count;
    let var = if paths > 1 { ((sum_sq - count * mean * mean) / (count - 1.0)).max(0.0) } else { 0.0 };
    if !mean.is_finite() {
        return Err(Error::Numeric("non-finite lower bound".into()));
    }
    Ok((mean, (var / count).sqrt()))
}

/// Reference lower/upper bounds for the symmetric two-asset case
/// (`σ = 0.2`, `δ = 0.1`, `r = 0.05`, `K = 100`, `T = 3`, `N = 9`).
pub fn reference_bounds(s0: f64) -> Option<(f64, f64)> {
    [(90.0, 8.072, 8.075), (100.0, 13.895, 13.903), (110.0, 21.353, 21.346)]
        .iter()
        .find(|r| r.0 == s0)
        .map(|r| (r.1, r.2))
}

/// One row of the Bermudan report.
#[derive(Debug, Clone, PartialEq)]
pub struct BermudanRow {
    pub d: usize,
    pub s0: f64,
    pub case: String,
    pub price: f64,
    pub std_error: f64,
    pub reference: Option<(f64, f64)>,
}

/// `d,s0,case,price,std_error,paper_dos_lower,paper_dos_upper` CSV.
pub fn write_report<W: Write>(rows: &[BermudanRow], mut w: W) -> Result<()> {
    writeln!(w, "d,s0,case,price,std_error,paper_dos_lower,paper_dos_upper")?;
    for r in rows {
        let (lo, hi) = match r.reference {
            Some((lo, hi)) => (format!("{lo}"), format!("{hi}")),
            None => (String::new(), String::new()),
        };
        writeln!(w, "{},{},{},{:.6},{:.6},{},{}", r.d, r.s0, r.case, r.price, r.std_error, lo, hi)?;
    }
    Ok(())
}
