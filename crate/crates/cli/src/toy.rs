//! The noisy one-dimensional toy regression.

use std::io::Write;

use cvxnet::net::{ConvexNet, NetConfig};
use cvxnet::rng;
use cvxnet::scaling::{InputMap, OutputMap, ScaledNet};
use cvxnet::train::{train_regression, FreshSampler, LossTrace, TraceRow, TrainConfig};
use cvxnet::Result;

pub const LOWER: f64 = -7.0;
pub const UPPER: f64 = 7.0;

/// `f(x) = x² + 10((eˣ − 1) 1_{x<0} + x 1_{x>0})`.
pub fn toy_function(x: f64) -> f64 {
    let tail = if x < 0.0 {
        x.exp_m1()
    } else if x > 0.0 {
        x
    } else {
        0.0
    };
    x * x + 10.0 * tail
}

/// `x̃ = (x + 7) / 14`.
pub fn input_map() -> InputMap {
    InputMap::from_box(&[LOWER], &[UPPER])
}

#[derive(Debug, Clone)]
pub struct ToyFit {
    pub net: ScaledNet,
    /// Losses in the units of `f`.
    pub trace: LossTrace,
}

/// Trains on fresh uniform draws from `[-7, 7]` with targets
/// `f(x) + sigma_xi · ξ`.
pub fn fit_toy(net_cfg: &NetConfig, cfg: &TrainConfig, sigma_xi: f64) -> Result<ToyFit> {
    let input = input_map();
    // f spans roughly [-10, 119] on the interval
    let grid: Vec<f64> = (0..=140).map(|i| toy_function(LOWER + 0.1 * i as f64)).collect();
    let output = OutputMap::standardize(&grid, 1e-8);
    let mut source = FreshSampler::new(cfg.seed, |seed, batch, xs: &mut Vec<f64>, ys: &mut Vec<f64>| {
        let mut r = rng::substream(seed, rng::domain::NOISE, 0);
        for _ in 0..batch {
            let u = rng::uniform_open(&mut r);
            let x = LOWER + (UPPER - LOWER) * u;
            xs.push(u);
            ys.push(output.to_net(toy_function(x) + sigma_xi * rng::std_normal(&mut r)));
        }
        Ok(())
    });
    let mut net = ConvexNet::init(net_cfg, 1, cfg.seed);
    let mut trace = LossTrace::default();
    train_regression(&mut net, &mut source, cfg, &mut trace)?;
    let scale = output.scale * output.scale;
    trace.rows = trace.rows.iter().map(|r| TraceRow { loss: r.loss * scale, ..*r }).collect();
    Ok(ToyFit {
        net: ScaledNet { net, input, output },
        trace,
    })
}

/// Test grid of `count` points strictly inside the interval, offset from
/// the training draws' lattice.
pub fn test_grid(count: usize) -> Vec<f64> {
    let h = (UPPER - LOWER) / count as f64;
    (0..count).map(|i| LOWER + (i as f64 + 0.5) * h).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyRow {
    pub x: f64,
    pub f: f64,
    pub f_hat: f64,
    pub rel_err: f64,
}

pub fn evaluate(fit: &ToyFit, xs: &[f64]) -> Result<Vec<ToyRow>> {
    xs.iter()
        .map(|&x| {
            let f = toy_function(x);
            let f_hat = fit.net.eval(&[x])?;
            Ok(ToyRow {
                x,
                f,
                f_hat,
                rel_err: (f_hat - f).abs() / f.abs(),
            })
        })
        .collect()
}

/// `x,f,f_hat,rel_err` CSV.
pub fn write_rows<W: Write>(rows: &[ToyRow], mut w: W) -> Result<()> {
    writeln!(w, "x,f,f_hat,rel_err")?;
    for r in rows {
        writeln!(w, "{:.6},{:.9},{:.9},{:.9}", r.x, r.f, r.f_hat, r.rel_err)?;
    }
    Ok(())
}
