//! Swing (take-or-pay) contracts priced by volume-constrained backward
//! dynamic programming with convex continuation networks.

use std::io::Write;

use rand_chacha::rand_core::RngCore;

use crate::error::{Error, Result};
use crate::market::{GasForwardModel, PathGrid};
use crate::net::{ConvexNet, NetConfig};
use crate::rng::{self, domain, norm_cdf};
use crate::scaling::{CompiledNet, InputMap, OutputMap, ScaledNet};
use crate::train::{batch_loss_and_grad, AdamState, LossTrace, TraceRow, TrainConfig};

const VOL_TOL: f64 = 1e-9;

/// Volume constraints: `q_min ≤ q_k ≤ q_max` on each of the `dates`
/// exercise dates and `total_min ≤ Σ q_k ≤ total_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwingSpec {
    pub dates: usize,
    pub strike: f64,
    pub q_min: f64,
    pub q_max: f64,
    pub total_min: f64,
    pub total_max: f64,
}

impl SwingSpec {
    pub fn new(dates: usize, strike: f64, q_min: f64, q_max: f64, total_min: f64, total_max: f64) -> Result<Self> {
        let s = Self {
            dates,
            strike,
            q_min,
            q_max,
            total_min,
            total_max,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dates as f64;
        let bad = |m: &str| Err(Error::InvalidSpec(m.into()));
        if self.dates == 0 {
            return bad("need at least one exercise date");
        }
        if !(self.q_min >= 0.0 && self.q_min <= self.q_max) {
            return bad("need 0 <= q_min <= q_max");
        }
        if !(self.total_min >= 0.0 && self.total_min <= self.total_max) {
            return bad("need 0 <= total_min <= total_max");
        }
        if n * self.q_min > self.total_max + VOL_TOL || self.total_min > n * self.q_max + VOL_TOL {
            return bad("volume constraints are infeasible");
        }
        if self.total_min == self.total_max && self.total_max == 0.0 {
            return bad("volume normalization undefined for total_min = total_max = 0");
        }
        if !(self.strike.is_finite()) {
            return bad("strike must be finite");
        }
        Ok(())
    }
}

/// Normalized cumulative volume fed to the adjustment term.
pub fn volume_transform(spec: &SwingSpec, q: f64) -> f64 {
    if spec.total_min != spec.total_max {
        (q - spec.total_min) / (spec.total_max - spec.total_min)
    } else {
        (q - spec.total_min) / spec.total_max
    }
}

/// Admissible purchases `[ℓ, u]` at date `k` after buying `q` so far: every
/// choice in the interval leaves the global constraint attainable.
pub fn admissible_interval(spec: &SwingSpec, k: usize, q: f64) -> Result<(f64, f64)> {
    let rest = (spec.dates - 1 - k) as f64;
    let lo = spec.q_min.max(spec.total_min - q - rest * spec.q_max);
    let hi = spec.q_max.min(spec.total_max - q - rest * spec.q_min);
    if lo > hi + VOL_TOL {
        return Err(Error::InvalidSpec(format!("no admissible purchase at date {k} with volume {q}")));
    }
    Ok((lo, hi.max(lo)))
}

fn endpoints(lo: f64, hi: f64) -> ([f64; 2], usize) {
    if hi - lo <= VOL_TOL {
        ([lo, lo], 1)
    } else {
        ([lo, hi], 2)
    }
}

/// Reachable cumulative volumes `𝒬_0 = {0}, …, 𝒬_N` under endpoint controls.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeGrid {
    pub levels: Vec<Vec<f64>>,
}

impl VolumeGrid {
    /// Index of `q` in `𝒬_k`.
    pub fn index(&self, k: usize, q: f64) -> Option<usize> {
        let level = &self.levels[k];
        let i = level.partition_point(|&v| v < q - VOL_TOL);
        (i < level.len() && (level[i] - q).abs() <= VOL_TOL).then_some(i)
    }
}

pub fn reachable_volumes(spec: &SwingSpec) -> Result<VolumeGrid> {
    spec.validate()?;
    let mut levels = vec![vec![0.0]];
    for k in 0..spec.dates {
        let mut next = Vec::new();
        for &q in &levels[k] {
            let (lo, hi) = admissible_interval(spec, k, q)?;
            let (ends, count) = endpoints(lo, hi);
            next.extend(ends[..count].iter().map(|e| q + e));
        }
        next.sort_by(f64::total_cmp);
        next.dedup_by(|a, b| (*a - *b).abs() <= VOL_TOL);
        levels.push(next);
    }
    Ok(VolumeGrid { levels })
}

/// Exercise grid `t_k = k / days_per_year`, `k = 0..=N`.
pub fn daily_grid(dates: usize, days_per_year: f64) -> Result<PathGrid> {
    PathGrid::new((0..=dates).map(|k| k as f64 / days_per_year).collect())
}

/// How continuation networks are shared across volumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwingMode {
    /// One network per date plus `κ_k ℒ(Q)`.
    Shared,
    /// One network per date and reachable volume.
    PerVolume,
}

/// Continuation model at one date, as a function of the factor and of the
/// volume held after the current purchase.
#[derive(Debug, Clone)]
pub enum DateContinuation {
    /// Constant per volume in `𝒬_{k+1}` (deterministic state).
    Table(Vec<f64>),
    Shared { net: ScaledNet, kappa: f64 },
    PerVolume(Vec<ScaledNet>),
}

/// Trained continuation models for dates `0..N-1`; date `N-1` has none.
#[derive(Debug, Clone)]
pub struct SwingNets {
    pub spec: SwingSpec,
    pub model: GasForwardModel,
    pub grid: PathGrid,
    pub volumes: VolumeGrid,
    pub dates: Vec<DateContinuation>,
}

enum CompiledDate {
    Terminal,
    Table(Vec<f64>),
    Shared { net: CompiledNet, kappa: f64, out: OutputMap },
    PerVolume(Vec<CompiledNet>),
}

impl SwingNets {
    /// Continuation value at date `k` for factor `x` and post-purchase volume `q`.
    pub fn continuation(&self, k: usize, x: f64, q: f64) -> Result<f64> {
        if k + 1 >= self.spec.dates {
            return Ok(0.0);
        }
        let j = self.volume_index(k, q)?;
        match &self.dates[k] {
            DateContinuation::Table(t) => Ok(t[j]),
            DateContinuation::Shared { net, kappa } => {
                let c = net.net.forward(&net.input.apply(&[x]))?;
                Ok(net.output.from_net(c + kappa * volume_transform(&self.spec, q)))
            }
            DateContinuation::PerVolume(nets) => nets[j].eval(&[x]),
        }
    }

    fn volume_index(&self, k: usize, q: f64) -> Result<usize> {
        self.volumes
            .index(k + 1, q)
            .ok_or_else(|| Error::InvalidSpec(format!("volume {q} unreachable after date {k}")))
    }

    fn compile(&self) -> Vec<CompiledDate> {
        (0..self.spec.dates)
            .map(|k| match self.dates.get(k) {
                None => CompiledDate::Terminal,
                Some(DateContinuation::Table(t)) => CompiledDate::Table(t.clone()),
                Some(DateContinuation::Shared { net, kappa }) => {
                    // the adjustment is added in network units, before the output map
                    let mut raw = net.clone();
                    raw.output = OutputMap::identity();
                    CompiledDate::Shared {
                        net: CompiledNet::new(&raw),
                        kappa: *kappa,
                        out: net.output,
                    }
                }
                Some(DateContinuation::PerVolume(nets)) => CompiledDate::PerVolume(nets.iter().map(CompiledNet::new).collect()),
            })
            .collect()
    }

    /// The two candidate purchases at date `k` and their continuation
    /// values, evaluated lazily.
    fn decide(&self, compiled: &[CompiledDate], k: usize, x: f64, f: f64, q: f64, scratch: &mut Vec<f64>) -> Result<f64> {
        let (lo, hi) = admissible_interval(&self.spec, k, q)?;
        let (ends, count) = endpoints(lo, hi);
        if count == 1 {
            return Ok(lo);
        }
        let gain = f - self.spec.strike;
        let value = |purchase: f64, scratch: &mut Vec<f64>| -> Result<f64> {
            let next = q + purchase;
            let c = match &compiled[k] {
                CompiledDate::Terminal => 0.0,
                CompiledDate::Table(t) => t[self.volume_index(k, next)?],
                CompiledDate::Shared { net, kappa, out } => {
                    out.from_net(net.eval_with(&[x], scratch) + kappa * volume_transform(&self.spec, next))
                }
                CompiledDate::PerVolume(nets) => nets[self.volume_index(k, next)?].eval_with(&[x], scratch),
            };
            Ok(purchase * gain + c)
        };
        let v_lo = value(ends[0], scratch)?;
        let v_hi = value(ends[1], scratch)?;
        Ok(if v_hi >= v_lo { ends[1] } else { ends[0] })
    }
}

/// Training output.
#[derive(Debug, Clone)]
pub struct TrainedSwing {
    pub nets: SwingNets,
    /// In-sample date-0 value per iteration.
    pub value_trace: Vec<f64>,
    pub loss: LossTrace,
}

/// Simulated factor and price paths at the exercise dates, row-major `P x N`.
struct GasSample {
    x: Vec<f64>,
    f: Vec<f64>,
}

fn simulate_gas(m: &GasForwardModel, grid: &PathGrid, dates: usize, count: usize, seed: u64, dom: u64) -> GasSample {
    let points = grid.times().len();
    let mut row = vec![0.0; points];
    let mut x = Vec::with_capacity(count * dates);
    let mut f = Vec::with_capacity(count * dates);
    for b in 0..count {
        let mut rng = rng::substream(seed, dom, b as u64);
        m.factor_path_into(grid, &mut rng, &mut row);
        for (k, &xk) in row[..dates].iter().enumerate() {
            x.push(xk);
            f.push(m.price(grid.times()[k], xk));
        }
    }
    GasSample { x, f }
}

fn check_grid(spec: &SwingSpec, grid: &PathGrid) -> Result<()> {
    if grid.steps() < spec.dates {
        return Err(Error::InvalidSpec(format!(
            "grid has {} steps but the contract has {} exercise dates",
            grid.steps(),
            spec.dates
        )));
    }
    Ok(())
}

/// Greedy rule used by the pilot run: buy the most when the price is at
/// least the strike.
fn greedy_value(spec: &SwingSpec, f: &[f64], from: usize, mut q: f64) -> Result<f64> {
    let mut total = 0.0;
    for (k, &fk) in f.iter().enumerate().skip(from) {
        let (lo, hi) = admissible_interval(spec, k, q)?;
        let buy = if fk >= spec.strike { hi } else { lo };
        total += buy * (fk - spec.strike);
        q += buy;
    }
    Ok(total)
}

/// Per-date input quantile maps of the factor and target scales from a
/// pilot run of the greedy rule: one scale per volume of `𝒬_{k+1}`, or a
/// pooled one when the date has a single shared network.
fn pilot_maps(
    m: &GasForwardModel,
    spec: &SwingSpec,
    grid: &PathGrid,
    volumes: &VolumeGrid,
    mode: SwingMode,
    count: usize,
    seed: u64,
) -> Result<(Vec<InputMap>, Vec<Vec<OutputMap>>)> {
    let n = spec.dates;
    let sample = simulate_gas(m, grid, n, count, rng::child_seed(seed, u64::MAX), domain::GAS);
    let mut pick = rng::substream(seed, domain::BATCH, u64::MAX);
    let floor = 1e-3 * spec.strike.abs().max(1.0);
    let mut inputs = Vec::with_capacity(n);
    let mut outputs = Vec::with_capacity(n);
    for k in 0..n {
        let col: Vec<f64> = (0..count).map(|b| sample.x[b * n + k]).collect();
        inputs.push(InputMap::from_quantiles(&col, 1, 0.01, 0.99));
        let level = &volumes.levels[k + 1];
        let path = |b: usize| &sample.f[b * n..(b + 1) * n];
        let maps = match mode {
            SwingMode::Shared => {
                let values = (0..count)
                    .map(|b| greedy_value(spec, path(b), k + 1, level[pick.next_u64() as usize % level.len()]))
                    .collect::<Result<Vec<_>>>()?;
                vec![OutputMap::standardize(&values, floor)]
            }
            SwingMode::PerVolume => level
                .iter()
                .map(|&q| {
                    let values = (0..count).map(|b| greedy_value(spec, path(b), k + 1, q)).collect::<Result<Vec<_>>>()?;
                    Ok(OutputMap::standardize(&values, floor))
                })
                .collect::<Result<Vec<_>>>()?,
        };
        outputs.push(maps);
    }
    Ok((inputs, outputs))
}

/// Backward training of the continuation models. Each iteration draws
/// `batch_size * batches_per_iteration` fresh paths and carries, per path,
/// the realized cash flow from date `k+1` on for every volume in
/// `𝒬_{k+1}`. Going back from date `N-2`, the date-`k` model is fitted to
/// those realized values on `X_k`; its endpoint decisions then extend the
/// realized values to date `k`. Date 0 is deterministic and uses sample
/// means.
pub fn train_swing(
    m: &GasForwardModel,
    spec: &SwingSpec,
    grid: &PathGrid,
    net_cfg: &NetConfig,
    cfg: &TrainConfig,
    mode: SwingMode,
) -> Result<TrainedSwing> {
    spec.validate()?;
    check_grid(spec, grid)?;
    cfg.validate()?;
    let n = spec.dates;
    let volumes = reachable_volumes(spec)?;
    let per_iter = cfg.batch_size * cfg.batches_per_iteration;
    let (input_maps, output_maps) = pilot_maps(m, spec, grid, &volumes, mode, per_iter.max(4096), cfg.seed)?;

    // nets[k][j]: date k (1..=N-2), volume j of 𝒬_{k+1} (a single net when shared)
    let mut nets: Vec<Vec<ConvexNet>> = (0..n)
        .map(|k| {
            let count = match (k, mode) {
                (0, _) => 0,
                _ if k + 1 >= n => 0,
                (_, SwingMode::Shared) => 1,
                (_, SwingMode::PerVolume) => volumes.levels[k + 1].len(),
            };
            // volumes at one date share their initial weights
            let init = ConvexNet::init(net_cfg, 1, rng::child_seed(cfg.seed, k as u64));
            vec![init; count]
        })
        .collect();
    let mut adams: Vec<Vec<AdamState>> =
        nets.iter().map(|row| row.iter().map(|net| AdamState::for_net(net, 1)).collect()).collect();
    let mut kappas = vec![0.0; n];
    let mut table = vec![0.0; volumes.levels.get(1).map_or(0, Vec::len)];
    let rates = cfg.schedule.rates(cfg.iterations);

    let mut value_trace = Vec::with_capacity(cfg.iterations);
    let mut loss = LossTrace::default();
    let mut xs = vec![0.0; per_iter];
    let mut ys = vec![0.0; per_iter];
    let mut offsets = vec![0.0; per_iter];
    let mut picks = vec![0.0; per_iter];
    // realized[b * width + j]: cash from date k+1 on, starting with volume j of 𝒬_{k+1}
    let mut realized: Vec<f64> = Vec::new();
    let mut extended: Vec<f64> = Vec::new();
    let mut cont: Vec<f64> = Vec::new();

    for (it, &rate) in rates.iter().enumerate() {
        let sample = simulate_gas(m, grid, n, per_iter, rng::child_seed(cfg.seed, it as u64), domain::GAS);
        let mut pick = rng::substream(rng::child_seed(cfg.seed, it as u64), domain::BATCH, 0);
        let mut iter_loss = 0.0;
        let mut steps = 0usize;
        realized.clear();
        realized.resize(per_iter * volumes.levels[n].len(), 0.0);
        for k in (0..n).rev() {
            let level = &volumes.levels[k + 1];
            let width = level.len();
            // continuation C_k(X_k, Q') for every path and every Q' in 𝒬_{k+1}
            cont.clear();
            cont.resize(per_iter * width, 0.0);
            if k == 0 {
                for (j, c) in table.iter_mut().enumerate() {
                    *c = (0..per_iter).map(|b| realized[b * width + j]).sum::<f64>() / per_iter as f64;
                }
                for b in 0..per_iter {
                    cont[b * width..(b + 1) * width].copy_from_slice(&table);
                }
            } else if k + 1 < n {
                let (imap, omaps) = (&input_maps[k], &output_maps[k]);
                for b in 0..per_iter {
                    xs[b] = (sample.x[b * n + k] - imap.lo[0]) / imap.span[0];
                }
                let groups: Vec<(usize, Option<usize>)> = match mode {
                    SwingMode::Shared => vec![(0, None)],
                    SwingMode::PerVolume => (0..width).map(|j| (j, Some(j))).collect(),
                };
                for (g, fixed) in groups {
                    for b in 0..per_iter {
                        let j = fixed.unwrap_or_else(|| pick.next_u64() as usize % width);
                        picks[b] = volume_transform(spec, level[j]);
                        ys[b] = omaps[fixed.unwrap_or(0)].to_net(realized[b * width + j]);
                    }
                    for s in 0..cfg.batches_per_iteration {
                        let rows = s * cfg.batch_size..(s + 1) * cfg.batch_size;
                        let kappa = kappas[k];
                        let shared = mode == SwingMode::Shared;
                        if shared {
                            for r in rows.clone() {
                                offsets[r] = kappa * picks[r];
                            }
                        }
                        let bg = batch_loss_and_grad(
                            &nets[k][g],
                            &xs[rows.clone()],
                            &ys[rows.clone()],
                            shared.then(|| &offsets[rows.clone()]),
                        )?;
                        let kappa_grad = if shared {
                            2.0 * bg.residuals.iter().zip(&picks[rows]).map(|(r, l)| r * l).sum::<f64>()
                                / cfg.batch_size as f64
                        } else {
                            0.0
                        };
                        let mut extra = [kappa];
                        adams[k][g].step(&mut nets[k][g], &bg.grads, &mut extra, &[kappa_grad], rate)?;
                        if shared {
                            kappas[k] = extra[0];
                        }
                        iter_loss += bg.loss;
                        steps += 1;
                    }
                }
                match mode {
                    SwingMode::Shared => {
                        let c = nets[k][0].forward_batch(&xs)?;
                        for b in 0..per_iter {
                            for (j, &q) in level.iter().enumerate() {
                                cont[b * width + j] = omaps[0].from_net(c[b] + kappas[k] * volume_transform(spec, q));
                            }
                        }
                    }
                    SwingMode::PerVolume => {
                        for j in 0..width {
                            let c = nets[k][j].forward_batch(&xs)?;
                            for b in 0..per_iter {
                                cont[b * width + j] = omaps[j].from_net(c[b]);
                            }
                        }
                    }
                }
            }
            // extend realized values to date k for every Q in 𝒬_k
            let here = &volumes.levels[k];
            extended.clear();
            extended.resize(per_iter * here.len(), 0.0);
            for (i, &q) in here.iter().enumerate() {
                let (lo, hi) = admissible_interval(spec, k, q)?;
                let (ends, count) = endpoints(lo, hi);
                let mut idx = [0usize; 2];
                for (slot, &e) in idx.iter_mut().zip(&ends[..count]) {
                    *slot = volumes
                        .index(k + 1, q + e)
                        .ok_or_else(|| Error::Numeric("volume grid is not closed".into()))?;
                }
                for b in 0..per_iter {
                    let gain = sample.f[b * n + k] - spec.strike;
                    let mut choice = 0;
                    if count == 2 {
                        let v_lo = ends[0] * gain + cont[b * width + idx[0]];
                        let v_hi = ends[1] * gain + cont[b * width + idx[1]];
                        if v_hi >= v_lo {
                            choice = 1;
                        }
                    }
                    extended[b * here.len() + i] = ends[choice] * gain + realized[b * width + idx[choice]];
                }
            }
            std::mem::swap(&mut realized, &mut extended);
        }
        value_trace.push(realized.iter().sum::<f64>() / per_iter as f64);
        loss.rows.push(TraceRow {
            iter: it + 1,
            loss: iter_loss / steps.max(1) as f64,
            lr: rate,
        });
    }

    let mut dates = Vec::with_capacity(n.saturating_sub(1));
    for (k, row) in nets.into_iter().enumerate().take(n.saturating_sub(1)) {
        let wrap = |(j, net): (usize, ConvexNet)| ScaledNet {
            net,
            input: input_maps[k].clone(),
            output: output_maps[k][j],
        };
        dates.push(if k == 0 {
            DateContinuation::Table(table.clone())
        } else {
            match mode {
                SwingMode::Shared => DateContinuation::Shared {
                    net: wrap((0, row.into_iter().next().expect("shared net"))),
                    kappa: kappas[k],
                },
                SwingMode::PerVolume => DateContinuation::PerVolume(row.into_iter().enumerate().map(wrap).collect()),
            }
        });
    }
    Ok(TrainedSwing {
        nets: SwingNets {
            spec: *spec,
            model: *m,
            grid: grid.clone(),
            volumes,
            dates,
        },
        value_trace,
        loss,
    })
}

/// Monte Carlo price with standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwingEstimate {
    pub price: f64,
    pub std_error: f64,
}

/// Out-of-sample value of the purchase rule induced by the trained
/// continuation models, on fresh paths. Every path's strategy is checked
/// against the volume constraints.
pub fn evaluate_swing(nets: &SwingNets, paths: usize, seed: u64) -> Result<SwingEstimate> {
    let spec = &nets.spec;
    let n = spec.dates;
    if paths == 0 {
        return Err(Error::InvalidSpec("need at least one evaluation path".into()));
    }
    let compiled = nets.compile();
    let mut row = vec![0.0; nets.grid.times().len()];
    let mut scratch = Vec::new();
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for b in 0..paths {
        let mut rng = rng::substream(seed, domain::NOISE, b as u64);
        nets.model.factor_path_into(&nets.grid, &mut rng, &mut row);
        let mut q = 0.0;
        let mut cash = 0.0;
        for (k, &x) in row[..n].iter().enumerate() {
            let f = nets.model.price(nets.grid.times()[k], x);
            let buy = nets.decide(&compiled, k, x, f, q, &mut scratch)?;
            if buy < spec.q_min - VOL_TOL || buy > spec.q_max + VOL_TOL {
                return Err(Error::Numeric(format!("purchase {buy} outside local bounds at date {k}")));
            }
            cash += buy * (f - spec.strike);
            q += buy;
        }
        if q < spec.total_min - VOL_TOL || q > spec.total_max + VOL_TOL {
            return Err(Error::Numeric(format!("total volume {q} violates the global constraint")));
        }
        sum += cash;
        sum_sq += cash * cash;
    }
    let count = paths as f64;
    let mean = sum / count;
    let var = if paths > 1 { ((sum_sq - count * mean * mean) / (count - 1.0)).max(0.0) } else { 0.0 };
    Ok(SwingEstimate {
        price: mean,
        std_error: (var / count).sqrt(),
    })
}

/// `Σ_k q_max E(F_{t_k} - K)_+`, the value when the global constraint
/// never binds.
pub fn unconstrained_value(m: &GasForwardModel, spec: &SwingSpec, grid: &PathGrid) -> f64 {
    grid.times()[..spec.dates]
        .iter()
        .map(|&t| {
            let lam = m.lambda_sq(t).sqrt();
            let (f, k) = (m.f0, spec.strike);
            if lam < 1e-14 || k <= 0.0 {
                return (f - k).max(0.0);
            }
            let d1 = ((f / k).ln() + 0.5 * lam * lam) / lam;
            f * norm_cdf(d1) - k * norm_cdf(d1 - lam)
        })
        .sum::<f64>()
        * spec.q_max
}

/// One row of the swing report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwingRow {
    pub total_min: f64,
    pub total_max: f64,
    pub estimate: SwingEstimate,
    pub benchmark: Option<f64>,
}

/// Reference values for the 31-date contract with `K = F_0 = 20`.
pub fn reference_value(total_min: f64, total_max: f64) -> Option<f64> {
    [(20.0, 25.0, 8.36), (20.0, 30.0, 14.01), (20.0, 22.0, 4.50)]
        .iter()
        .find(|(lo, hi, _)| *lo == total_min && *hi == total_max)
        .map(|r| r.2)
}

/// `Q_lo,Q_hi,price,std_error,benchmark` CSV.
pub fn write_report<W: Write>(rows: &[SwingRow], mut w: W) -> Result<()> {
    writeln!(w, "Q_lo,Q_hi,price,std_error,benchmark")?;
    for r in rows {
        let bench = r.benchmark.map(|b| format!("{b}")).unwrap_or_default();
        writeln!(
            w,
            "{},{},{:.6},{:.6},{}",
            r.total_min, r.total_max, r.estimate.price, r.estimate.std_error, bench
        )?;
    }
    Ok(())
}
