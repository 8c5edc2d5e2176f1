//! Basket call price surfaces: control-variate Monte Carlo targets and a
//! convex network fitted over a box of initial prices.

use std::io::Write;

use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::market::BlackScholesModel;
use crate::net::{midpoint_check, ConvexNet, MidpointReport, NetConfig};
use crate::rng::{self, domain, norm_cdf};
use crate::scaling::{InputMap, OutputMap, ScaledNet};
use crate::train::{train_regression, CyclingDataset, LossTrace, TrainConfig};

/// Call on `Σ α_i S_T^i` with strike `K` and maturity `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasketSpec {
    pub weights: Vec<f64>,
    pub strike: f64,
    pub maturity: f64,
}

impl BasketSpec {
    pub fn new(weights: Vec<f64>, strike: f64, maturity: f64) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::InvalidSpec("basket weights must be positive".into()));
        }
        if (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSpec("basket weights must sum to 1".into()));
        }
        if !(strike > 0.0) || !(maturity > 0.0) {
            return Err(Error::InvalidSpec("strike and maturity must be positive".into()));
        }
        Ok(Self {
            weights,
            strike,
            maturity,
        })
    }

    pub fn equal_weights(d: usize, strike: f64, maturity: f64) -> Result<Self> {
        Self::new(vec![1.0 / d.max(1) as f64; d], strike, maturity)
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }
}

/// The box `∏ [x0_i - R, x0_i + R]` of initial prices.
#[derive(Debug, Clone, PartialEq)]
pub struct InputBox {
    pub center: Vec<f64>,
    pub half_width: f64,
}

impl InputBox {
    pub fn new(center: Vec<f64>, half_width: f64) -> Result<Self> {
        if !(half_width >= 0.0) || center.iter().any(|c| !(c - half_width > 0.0)) {
            return Err(Error::InvalidSpec("input box must stay within positive prices".into()));
        }
        Ok(Self { center, half_width })
    }

    pub fn lower(&self) -> Vec<f64> {
        self.center.iter().map(|c| c - self.half_width).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.center.iter().map(|c| c + self.half_width).collect()
    }

    pub fn contains(&self, s0: &[f64]) -> bool {
        s0.len() == self.center.len()
            && s0.iter().zip(&self.center).all(|(s, c)| (s - c).abs() <= self.half_width)
    }
}

/// Monte Carlo price with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub price: f64,
    pub std_error: f64,
}

impl McEstimate {
    /// 95% normal confidence interval.
    pub fn ci95(&self) -> (f64, f64) {
        (self.price - 1.96 * self.std_error, self.price + 1.96 * self.std_error)
    }
}

fn require_no_dividends(m: &BlackScholesModel) -> Result<()> {
    if m.delta.iter().any(|&d| d != 0.0) {
        return Err(Error::InvalidModel("basket pricing assumes zero dividend rates".into()));
    }
    Ok(())
}

/// Closed-form price of the call on the geometric mean `exp(Σ α_i ln S_T^i)`.
pub fn geometric_basket_price(m: &BlackScholesModel, spec: &BasketSpec, s0: &[f64]) -> Result<f64> {
    require_no_dividends(m)?;
    let d = m.dim();
    check_dim("basket weights", d, spec.dim())?;
    check_dim("initial prices", d, s0.len())?;
    let t = spec.maturity;
    let rho = m.correlation();
    let mut var = 0.0;
    for i in 0..d {
        for j in 0..d {
            var += spec.weights[i] * spec.weights[j] * m.sigma[i] * m.sigma[j] * rho[i * d + j];
        }
    }
    let sigma = (t * var.max(0.0)).sqrt();
    let a: f64 = (0..d)
        .map(|i| spec.weights[i] * (s0[i].ln() + (m.r - 0.5 * m.sigma[i] * m.sigma[i]) * t))
        .sum();
    let discount = (-m.r * t).exp();
    let k = spec.strike;
    if sigma < 1e-14 {
        return Ok(discount * (a.exp() - k).max(0.0));
    }
    let kappa = (a - k.ln()) / sigma;
    Ok(discount * ((a + 0.5 * sigma * sigma).exp() * norm_cdf(kappa + sigma) - k * norm_cdf(kappa)))
}

/// Precomputed per-asset constants for terminal sampling.
struct TerminalSampler<'a> {
    model: &'a BlackScholesModel,
    log_drift: Vec<f64>,
    vol: Vec<f64>,
}

impl<'a> TerminalSampler<'a> {
    fn new(model: &'a BlackScholesModel, maturity: f64) -> Self {
        let d = model.dim();
        Self {
            model,
            log_drift: (0..d)
                .map(|i| (model.r - model.delta[i] - 0.5 * model.sigma[i] * model.sigma[i]) * maturity)
                .collect(),
            vol: model.sigma.iter().map(|s| s * maturity.sqrt()).collect(),
        }
    }

    /// Fills `log_s` with `ln S_T` started from `ln_s0`.
    #[inline]
    fn draw(&self, ln_s0: &[f64], rng: &mut ChaCha8Rng, z: &mut [f64], log_s: &mut [f64]) {
        let d = z.len();
        let chol = self.model.cholesky_factor();
        for zi in z.iter_mut() {
            *zi = rng::std_normal(rng);
        }
        for i in 0..d {
            let w: f64 = chol[i * d..i * d + i + 1].iter().zip(z.iter()).map(|(l, zj)| l * zj).sum();
            log_s[i] = ln_s0[i] + self.log_drift[i] + self.vol[i] * w;
        }
    }
}

/// Control-variate estimator driven by an explicit generator.
pub fn mc_cv_with_rng(
    m: &BlackScholesModel,
    spec: &BasketSpec,
    s0: &[f64],
    paths: usize,
    rng: &mut ChaCha8Rng,
) -> Result<McEstimate> {
    let pi0 = geometric_basket_price(m, spec, s0)?;
    if paths < 2 {
        return Err(Error::InvalidSpec("control-variate estimator needs at least 2 paths".into()));
    }
    let d = m.dim();
    let sampler = TerminalSampler::new(m, spec.maturity);
    let ln_s0: Vec<f64> = s0.iter().map(|s| s.ln()).collect();
    let mut z = vec![0.0; d];
    let mut log_s = vec![0.0; d];
    let k = spec.strike;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..paths {
        sampler.draw(&ln_s0, rng, &mut z, &mut log_s);
        let mut arith = 0.0;
        let mut log_geo = 0.0;
        for i in 0..d {
            arith += spec.weights[i] * log_s[i].exp();
            log_geo += spec.weights[i] * log_s[i];
        }
        let diff = (arith - k).max(0.0) - (log_geo.exp() - k).max(0.0);
        sum += diff;
        sum_sq += diff * diff;
    }
    let n = paths as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    let discount = (-m.r * spec.maturity).exp();
    Ok(McEstimate {
        price: discount * mean + pi0,
        std_error: discount * (var / n).sqrt(),
    })
}

/// `v̂_M`: discounted mean of arithmetic minus geometric payoff plus the
/// geometric closed form. Both payoff legs share each normal draw.
pub fn mc_cv_estimate(m: &BlackScholesModel, spec: &BasketSpec, s0: &[f64], paths: usize, seed: u64) -> Result<McEstimate> {
    check_dim("initial prices", m.dim(), s0.len())?;
    let mut rng = rng::substream(seed, domain::TARGETS, 0);
    mc_cv_with_rng(m, spec, s0, paths, &mut rng)
}

/// Plain Monte Carlo estimate of the basket call (no control variate).
pub fn mc_plain_estimate(m: &BlackScholesModel, spec: &BasketSpec, s0: &[f64], paths: usize, seed: u64) -> Result<McEstimate> {
    check_dim("initial prices", m.dim(), s0.len())?;
    check_dim("basket weights", m.dim(), spec.dim())?;
    let d = m.dim();
    let mut rng = rng::substream(seed, domain::TARGETS, 0);
    let sampler = TerminalSampler::new(m, spec.maturity);
    let ln_s0: Vec<f64> = s0.iter().map(|s| s.ln()).collect();
    let mut z = vec![0.0; d];
    let mut log_s = vec![0.0; d];
    let payoffs: Vec<f64> = (0..paths)
        .map(|_| {
            sampler.draw(&ln_s0, &mut rng, &mut z, &mut log_s);
            let arith: f64 = (0..d).map(|i| spec.weights[i] * log_s[i].exp()).sum();
            (arith - spec.strike).max(0.0)
        })
        .collect();
    let (mean, se) = rng::mean_and_stderr(&payoffs);
    let discount = (-m.r * spec.maturity).exp();
    Ok(McEstimate {
        price: discount * mean,
        std_error: discount * se,
    })
}

/// `count` i.i.d. uniform draws on the box, row-major.
pub fn sample_initial_prices(b: &InputBox, count: usize, seed: u64) -> Vec<f64> {
    let d = b.center.len();
    let mut rng = rng::substream(seed, domain::INPUTS, 0);
    let mut out = Vec::with_capacity(count * d);
    for _ in 0..count {
        for c in &b.center {
            out.push(c - b.half_width + 2.0 * b.half_width * rng::uniform_open(&mut rng));
        }
    }
    out
}

/// Settings for fitting a basket price surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceConfig {
    pub net: NetConfig,
    /// Size of the fixed pool of training inputs.
    pub pool_size: usize,
    /// Monte Carlo paths per training target.
    pub mc_paths: usize,
    pub train: TrainConfig,
}

/// A fitted price surface over an input box.
#[derive(Debug, Clone)]
pub struct PriceSurface {
    pub net: ScaledNet,
    pub spec: BasketSpec,
    pub model: BlackScholesModel,
    pub domain: InputBox,
    pub trace: LossTrace,
}

impl PriceSurface {
    /// Surface price at `s0`. Points outside the training box are
    /// extrapolated; see [`PriceSurface::in_domain`].
    pub fn price_at(&self, s0: &[f64]) -> Result<f64> {
        self.net.eval(s0)
    }

    pub fn in_domain(&self, s0: &[f64]) -> bool {
        self.domain.contains(s0)
    }

    /// Subgradient of the price in the initial prices (the deltas).
    pub fn deltas(&self, s0: &[f64]) -> Result<Vec<f64>> {
        self.net.input_subgradient(s0)
    }

    pub fn convexity_check(&self, trials: usize, rel_tol: f64, seed: u64) -> Result<MidpointReport> {
        midpoint_check(|x| self.price_at(x), trials, &self.domain.lower(), &self.domain.upper(), rel_tol, seed)
    }
}

/// Control-variate targets for a pool of initial prices; input `b` uses
/// substream `b` of `seed`.
pub fn pool_targets(m: &BlackScholesModel, spec: &BasketSpec, inputs: &[f64], paths: usize, seed: u64) -> Result<Vec<f64>> {
    let d = m.dim();
    inputs
        .chunks(d)
        .enumerate()
        .map(|(b, s0)| {
            let mut rng = rng::substream(seed, domain::TARGETS, b as u64);
            mc_cv_with_rng(m, spec, s0, paths, &mut rng).map(|e| e.price)
        })
        .collect()
}

/// Fits a convex surface to control-variate prices over the box. The pool
/// of inputs is drawn once and cycled in mini-batches.
pub fn train_price_surface(
    m: &BlackScholesModel,
    spec: &BasketSpec,
    domain_box: &InputBox,
    cfg: &SurfaceConfig,
) -> Result<PriceSurface> {
    let d = m.dim();
    check_dim("basket weights", d, spec.dim())?;
    check_dim("input box", d, domain_box.center.len())?;
    let seed = cfg.train.seed;
    let inputs = sample_initial_prices(domain_box, cfg.pool_size, seed);
    let targets = pool_targets(m, spec, &inputs, cfg.mc_paths, seed)?;
    fit_surface(m, spec, domain_box, cfg, inputs, targets)
}

/// Fits the surface on precomputed `(inputs, targets)`.
pub fn fit_surface(
    m: &BlackScholesModel,
    spec: &BasketSpec,
    domain_box: &InputBox,
    cfg: &SurfaceConfig,
    inputs: Vec<f64>,
    targets: Vec<f64>,
) -> Result<PriceSurface> {
    let d = m.dim();
    let input = InputMap::from_box(&domain_box.lower(), &domain_box.upper());
    let output = OutputMap::standardize(&targets, 1e-8);
    let scaled_inputs: Vec<f64> = inputs.chunks(d).flat_map(|x| input.apply(x)).collect();
    let scaled_targets: Vec<f64> = targets.iter().map(|&y| output.to_net(y)).collect();
    let mut data = CyclingDataset::new(scaled_inputs, scaled_targets, d)?;
    let mut net = ConvexNet::init(&cfg.net, d, cfg.train.seed);
    let mut trace = LossTrace::default();
    train_regression(&mut net, &mut data, &cfg.train, &mut trace)?;
    Ok(PriceSurface {
        net: ScaledNet { net, input, output },
        spec: spec.clone(),
        model: m.clone(),
        domain: domain_box.clone(),
        trace,
    })
}

/// Reference setup: `x0_i = 100 - i`, `σ_i = 0.2 + 0.008 i`, `α_i = 1/d`,
/// `r = 0.06`, `K = 80`, `T = 0.5`, equicorrelation `ρ`, box half-width 20.
pub fn reference_case(d: usize, rho: f64) -> Result<(BlackScholesModel, BasketSpec, InputBox)> {
    let sigma = (1..=d).map(|i| 0.2 + 0.008 * i as f64).collect();
    let model = BlackScholesModel::equicorrelated(0.06, sigma, vec![0.0; d], rho)?;
    let spec = BasketSpec::equal_weights(d, 80.0, 0.5)?;
    let domain_box = InputBox::new((1..=d).map(|i| 100.0 - i as f64).collect(), 20.0)?;
    Ok((model, spec, domain_box))
}

/// Test point `s0_i = 85 - i + 6 j`.
pub fn reference_point(d: usize, j: usize) -> Vec<f64> {
    (1..=d).map(|i| 85.0 - i as f64 + 6.0 * j as f64).collect()
}

/// One row of the price table CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceRow {
    pub d: usize,
    pub rho: f64,
    pub j: usize,
    pub net_price: f64,
    pub mc: McEstimate,
}

/// `d,rho,j,net_price,mc_price,mc_ci_lo,mc_ci_hi` CSV.
pub fn write_price_table<W: Write>(rows: &[PriceRow], mut w: W) -> Result<()> {
    writeln!(w, "d,rho,j,net_price,mc_price,mc_ci_lo,mc_ci_hi")?;
    for r in rows {
        let (lo, hi) = r.mc.ci95();
        writeln!(w, "{},{},{},{:.6},{:.6},{:.6},{:.6}", r.d, r.rho, r.j, r.net_price, r.mc.price, lo, hi)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs_call(s: f64, k: f64, r: f64, q: f64, sigma: f64, t: f64) -> f64 {
        let sd = sigma * t.sqrt();
        let d1 = ((s / k).ln() + (r - q + 0.5 * sigma * sigma) * t) / sd;
        s * (-q * t).exp() * norm_cdf(d1) - k * (-r * t).exp() * norm_cdf(d1 - sd)
    }

    #[test]
    fn single_asset_geometric_is_black_scholes() {
        let m = BlackScholesModel::equicorrelated(0.06, vec![0.2], vec![0.0], 0.0).unwrap();
        let spec = BasketSpec::new(vec![1.0], 80.0, 0.5).unwrap();
        let p = geometric_basket_price(&m, &spec, &[100.0]).unwrap();
        assert!((p - bs_call(100.0, 80.0, 0.06, 0.0, 0.2, 0.5)).abs() < 1e-12);
    }

    #[test]
    fn small_strike_limit_is_discounted_forward_of_geometric_mean() {
        let m = BlackScholesModel::equicorrelated(0.06, vec![0.2, 0.3], vec![0.0; 2], 0.4).unwrap();
        let spec = BasketSpec::new(vec![0.5, 0.5], 1e-12, 1.0).unwrap();
        let s0 = [90.0, 110.0];
        let var = 0.25 * (0.04 + 0.09 + 2.0 * 0.4 * 0.06);
        let a = 0.5 * (90f64.ln() + 0.06 - 0.02) + 0.5 * (110f64.ln() + 0.06 - 0.045);
        let expected = (-0.06f64).exp() * (a + 0.5 * var).exp();
        let p = geometric_basket_price(&m, &spec, &s0).unwrap();
        assert!((p - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn degenerate_basket_has_zero_variance() {
        let m = BlackScholesModel::equicorrelated(0.06, vec![0.2], vec![0.0], 0.0).unwrap();
        let spec = BasketSpec::new(vec![1.0], 80.0, 0.5).unwrap();
        let est = mc_cv_estimate(&m, &spec, &[95.0], 1000, 3).unwrap();
        assert_eq!(est.std_error, 0.0);
        assert_eq!(est.price, geometric_basket_price(&m, &spec, &[95.0]).unwrap());
    }

    #[test]
    fn dividends_are_rejected() {
        let m = BlackScholesModel::equicorrelated(0.06, vec![0.2], vec![0.01], 0.0).unwrap();
        let spec = BasketSpec::new(vec![1.0], 80.0, 0.5).unwrap();
        assert!(geometric_basket_price(&m, &spec, &[95.0]).is_err());
    }

    #[test]
    fn zero_width_box_repeats_center() {
        let b = InputBox::new(vec![99.0, 98.0], 0.0).unwrap();
        let s = sample_initial_prices(&b, 10, 1);
        assert!(s.chunks(2).all(|x| x == [99.0, 98.0]));
    }

    #[test]
    fn spec_validation() {
        assert!(BasketSpec::new(vec![0.5, 0.4], 80.0, 0.5).is_err());
        assert!(BasketSpec::new(vec![1.0], 0.0, 0.5).is_err());
        assert!(InputBox::new(vec![10.0], 20.0).is_err());
        for d in [2, 3, 5, 7, 20, 30] {
            assert!(BasketSpec::equal_weights(d, 80.0, 0.5).is_ok());
        }
    }

    #[test]
    fn reference_points() {
        assert_eq!(reference_point(2, 1), vec![90.0, 89.0]);
        let (_, _, b) = reference_case(2, 0.0).unwrap();
        for j in 1..=5 {
            assert!(b.contains(&reference_point(2, j)));
        }
    }
}
