//! Experiment drivers: each writes a manifest, runs the module and emits
//! its CSV reports into the output directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use cvxnet::analysis::{self, Holder};
use cvxnet::basket::{self, PriceRow, SurfaceConfig};
use cvxnet::bermudan::{self, BermudanRow, BermudanSpec};
use cvxnet::market::{BlackScholesModel, GasForwardModel};
use cvxnet::rng;
use cvxnet::swing::{self, SwingMode, SwingRow, SwingSpec};
use cvxnet::train::LossTrace;
use cvxnet::Error;
use sha2::{Digest, Sha256};

use crate::config::{ConfigError, Experiment, ExperimentConfig, SwingModeName};
use crate::toy;

/// Failure of a run, classified for the exit code.
#[derive(Debug)]
pub enum RunError {
    Config(String),
    Numeric(String),
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numeric(_) => 3,
            RunError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "configuration error: {m}"),
            RunError::Numeric(m) => write!(f, "numeric failure: {m}"),
            RunError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e.0)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::Numeric(m) => RunError::Numeric(m),
            Error::Io(m) => RunError::Io(m),
            other => RunError::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

type RunResult<T> = std::result::Result<T, RunError>;

/// SHA-256 of the effective configuration, hex encoded.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    Sha256::digest(cfg.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn write_manifest(dir: &Path, cfg: &ExperimentConfig, status: &str, wall: Option<f64>) -> RunResult<()> {
    let mut text = format!(
        "experiment = \"{}\"\nseed = {}\nconfig_sha256 = \"{}\"\nstatus = \"{status}\"\n",
        cfg.experiment,
        cfg.seed(),
        config_hash(cfg)
    );
    if let Some(w) = wall {
        text.push_str(&format!("wall_time_s = {w:.3}\n"));
    }
    text.push_str("\n[config]\n");
    for line in cfg.to_toml().lines() {
        text.push_str("# ");
        text.push_str(line);
        text.push('\n');
    }
    fs::write(dir.join("manifest.toml"), text)?;
    Ok(())
}

fn create(dir: &Path, name: &str) -> RunResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_trace(dir: &Path, name: &str, trace: &LossTrace) -> RunResult<()> {
    let mut w = create(dir, name)?;
    trace.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Runs the configured experiment into `out` (default: the config's `out`
/// or `./out`). Returns the output directory.
pub fn run(cfg: &ExperimentConfig, out: Option<PathBuf>) -> RunResult<PathBuf> {
    cfg.validate()?;
    let dir = out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir)?;
    write_manifest(&dir, cfg, "running", None)?;
    let start = Instant::now();
    let result = match cfg.experiment {
        Experiment::Toy => run_toy(cfg, &dir),
        Experiment::Basket => run_basket(cfg, &dir),
        Experiment::Bermudan => run_bermudan(cfg, &dir),
        Experiment::Swing => run_swing(cfg, &dir),
        Experiment::Rates => run_rates(cfg, &dir),
    };
    let wall = start.elapsed().as_secs_f64();
    let status = if result.is_ok() { "ok" } else { "failed" };
    write_manifest(&dir, cfg, status, Some(wall))?;
    result.map(|_| dir)
}

pub fn run_toy(cfg: &ExperimentConfig, dir: &Path) -> RunResult<()> {
    let net = cfg.net_config()?;
    let train = cfg.train_config()?;
    eprintln!("toy: {} n={} for {} iterations", net.architecture, net.width, train.iterations);
    let fit = toy::fit_toy(&net, &train, cfg.toy_sigma())?;
    write_trace(dir, "toy_loss.csv", &fit.trace)?;
    let rows = toy::evaluate(&fit, &toy::test_grid(cfg.toy.test_points.unwrap_or(100)))?;
    let mut w = create(dir, "toy_fit.csv")?;
    toy::write_rows(&rows, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn run_basket(cfg: &ExperimentConfig, dir: &Path) -> RunResult<()> {
    let b = &cfg.basket;
    let d = b.d.unwrap_or(2);
    let rho = b.rho.unwrap_or(0.0);
    let (model, spec, domain_box) = basket::reference_case(d, rho)?;
    let surface_cfg = SurfaceConfig {
        net: cfg.net_config()?,
        pool_size: b.pool_size.unwrap_or(38_400),
        mc_paths: b.mc_paths.unwrap_or(4096),
        train: cfg.train_config()?,
    };
    eprintln!("basket: d={d} rho={rho}, {} training targets", surface_cfg.pool_size);
    let surface = basket::train_price_surface(&model, &spec, &domain_box, &surface_cfg)?;
    write_trace(dir, "basket_loss.csv", &surface.trace)?;
    let bench_paths = b.benchmark_paths.unwrap_or(1_000_000);
    let points = b.points.clone().unwrap_or_else(|| vec![1, 2, 3, 4, 5]);
    let mut rows = Vec::with_capacity(points.len());
    for j in points {
        let s0 = basket::reference_point(d, j);
        let mc = basket::mc_cv_estimate(&model, &spec, &s0, bench_paths, rng::child_seed(cfg.seed(), j as u64))?;
        rows.push(PriceRow {
            d,
            rho,
            j,
            net_price: surface.price_at(&s0)?,
            mc,
        });
    }
    let mut w = create(dir, "basket_prices.csv")?;
    basket::write_price_table(&rows, &mut w)?;
    w.flush()?;
    Ok(())
}

fn bermudan_model(cfg: &ExperimentConfig) -> RunResult<(BlackScholesModel, BermudanSpec, usize, String)> {
    let b = &cfg.bermudan;
    let d = b.d.unwrap_or(2);
    let asymmetric = b.asymmetric.unwrap_or(false);
    let sigma: Vec<f64> = if asymmetric {
        (1..=d)
            .map(|i| {
                if d == 1 {
                    0.08
                } else if d <= 5 {
                    0.08 + 0.32 * (i - 1) as f64 / (d - 1) as f64
                } else {
                    0.1 + i as f64 / (2.0 * d as f64)
                }
            })
            .collect()
    } else {
        match b.sigma.as_deref() {
            None => vec![0.2; d],
            Some([s]) => vec![*s; d],
            Some(s) => s.to_vec(),
        }
    };
    let rate = b.rate.unwrap_or(0.05);
    let model = BlackScholesModel::equicorrelated(rate, sigma, vec![b.dividend.unwrap_or(0.1); d], 0.0)?;
    let spec = BermudanSpec::uniform(b.strike.unwrap_or(100.0), b.maturity.unwrap_or(3.0), b.dates.unwrap_or(9), rate)?;
    let case = if asymmetric { "asymmetric" } else { "symmetric" };
    Ok((model, spec, d, case.to_string()))
}

pub fn run_bermudan(cfg: &ExperimentConfig, dir: &Path) -> RunResult<()> {
    let (model, spec, d, case) = bermudan_model(cfg)?;
    let net = cfg.net_config()?;
    let train = cfg.train_config()?;
    let eval_paths = cfg.bermudan.eval_paths.unwrap_or(1_000_000);
    let mut rows = Vec::new();
    for s0 in cfg.bermudan.s0.clone().unwrap_or_else(|| vec![90.0, 100.0, 110.0]) {
        eprintln!("bermudan: d={d} {case} s0={s0}");
        let x0 = vec![s0; d];
        let trained = bermudan::train_policy(&model, &spec, &x0, &net, &train)?;
        write_trace(dir, &format!("bermudan_loss_s0_{s0}.csv"), &trained.loss)?;
        let (price, std_error) =
            bermudan::lower_bound_price(&trained.policy, &model, &x0, eval_paths, rng::child_seed(cfg.seed(), 1_000 + s0 as u64))?;
        let reference = if d == 2 && case == "symmetric" { bermudan::reference_bounds(s0) } else { None };
        rows.push(BermudanRow {
            d,
            s0,
            case: case.clone(),
            price,
            std_error,
            reference,
        });
    }
    let mut w = create(dir, "bermudan.csv")?;
    bermudan::write_report(&rows, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn run_swing(cfg: &ExperimentConfig, dir: &Path) -> RunResult<()> {
    let s = &cfg.swing;
    let dates = s.dates.unwrap_or(31);
    let model = GasForwardModel::new(s.alpha.unwrap_or(4.0), s.sigma.unwrap_or(0.7), s.f0.unwrap_or(20.0))?;
    let grid = swing::daily_grid(dates, s.days_per_year.unwrap_or(360.0))?;
    let mode = match s.mode.unwrap_or(SwingModeName::PerVolume) {
        SwingModeName::Shared => SwingMode::Shared,
        SwingModeName::PerVolume => SwingMode::PerVolume,
    };
    let net = cfg.net_config()?;
    let train = cfg.train_config()?;
    let eval_paths = s.eval_paths.unwrap_or(2_000_000);
    let bands = s.bands.clone().unwrap_or_else(|| vec![[20.0, 25.0], [20.0, 30.0], [20.0, 22.0]]);
    let mut rows = Vec::with_capacity(bands.len());
    for (i, [lo, hi]) in bands.into_iter().enumerate() {
        let spec = SwingSpec::new(dates, s.strike.unwrap_or(20.0), s.q_min.unwrap_or(0.0), s.q_max.unwrap_or(1.0), lo, hi)?;
        eprintln!("swing: Q in [{lo}, {hi}]");
        let trained = swing::train_swing(&model, &spec, &grid, &net, &train, mode)?;
        write_trace(dir, &format!("swing_loss_{lo}_{hi}.csv"), &trained.loss)?;
        let est = swing::evaluate_swing(&trained.nets, eval_paths, rng::child_seed(cfg.seed(), 2_000 + i as u64))?;
        rows.push(SwingRow {
            total_min: lo,
            total_max: hi,
            estimate: est,
            benchmark: swing::reference_value(lo, hi),
        });
    }
    let mut w = create(dir, "swing.csv")?;
    swing::write_report(&rows, &mut w)?;
    w.flush()?;
    Ok(())
}

fn square(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn square_grad(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| 2.0 * v).collect()
}

/// Sup-norm rate of `x²` on `[0, 1]` and the quantization bound of its L¹
/// error under the uniform law.
pub fn run_rates(cfg: &ExperimentConfig, dir: &Path) -> RunResult<()> {
    let r = &cfg.rates;
    let n_list = r.n_list.clone().unwrap_or_else(|| vec![1, 2, 4, 8, 16, 32, 64]);
    let rows = analysis::sup_rate_check(square, square_grad, 0.0, 1.0, &n_list, r.eval_points.unwrap_or(100_001))?;
    let mut w = create(dir, "rates_sup.csv")?;
    analysis::write_rate_table(&rows, &mut w)?;
    w.flush()?;

    let sample_size = r.sample_size.unwrap_or(200_000);
    let mut eval_rng = rng::substream(cfg.seed(), rng::domain::QUANTIZER, 1);
    let eval: Vec<f64> = (0..sample_size).map(|_| rng::uniform_open(&mut eval_rng)).collect();
    let holder = Holder { alpha: 1.0, constant: 2.0 };
    let mut bounds = Vec::new();
    for n in r.quantizer_sizes.clone().unwrap_or_else(|| vec![1, 2, 4, 8, 16]) {
        let q = analysis::quantization_error(|g, x| x[0] = rng::uniform_open(g), 1, n, sample_size, cfg.seed())?;
        bounds.push(analysis::lr_bound_check(square, square_grad, holder, &q, &eval, 1.0)?);
    }
    let mut w = create(dir, "rates_bound.csv")?;
    analysis::write_bound_table(&bounds, &mut w)?;
    w.flush()?;
    Ok(())
}
