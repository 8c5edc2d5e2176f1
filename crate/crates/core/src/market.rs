//! Exact simulation of the correlated Black–Scholes model and of the
//! one-factor gas forward model.

use std::io::Write;

use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::rng::{self, domain};

/// Strictly increasing date grid starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGrid {
    times: Vec<f64>,
}

impl PathGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.first() != Some(&0.0) {
            return Err(Error::InvalidSpec("time grid must start at 0".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidSpec("time grid must be strictly increasing".into()));
        }
        Ok(Self { times })
    }

    /// `t_k = k T / N`, `k = 0..=N`.
    pub fn uniform(maturity: f64, steps: usize) -> Result<Self> {
        if steps == 0 || !(maturity > 0.0) {
            return Err(Error::InvalidSpec("uniform grid needs N >= 1 and T > 0".into()));
        }
        Self::new((0..=steps).map(|k| maturity * k as f64 / steps as f64).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of steps `N` (dates minus one).
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn maturity(&self) -> f64 {
        self.times[self.times.len() - 1]
    }
}

/// Multi-asset Black–Scholes model with constant correlation.
#[derive(Debug, Clone, PartialEq)]
pub struct BlackScholesModel {
    pub r: f64,
    pub sigma: Vec<f64>,
    pub delta: Vec<f64>,
    rho: Vec<f64>,
    chol: Vec<f64>,
}

impl BlackScholesModel {
    /// `rho` is the row-major `d x d` correlation matrix.
    pub fn new(r: f64, sigma: Vec<f64>, delta: Vec<f64>, rho: Vec<f64>) -> Result<Self> {
        let d = sigma.len();
        check_dim("dividend rates", d, delta.len())?;
        check_dim("correlation matrix", d * d, rho.len())?;
        if d == 0 {
            return Err(Error::InvalidModel("model needs at least one asset".into()));
        }
        if sigma.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(Error::InvalidModel("volatilities must be finite and non-negative".into()));
        }
        for i in 0..d {
            if (rho[i * d + i] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidModel("correlation diagonal must be 1".into()));
            }
            for j in 0..i {
                if (rho[i * d + j] - rho[j * d + i]).abs() > 1e-12 {
                    return Err(Error::InvalidModel("correlation matrix must be symmetric".into()));
                }
            }
        }
        let chol = cholesky(&rho, d)?;
        Ok(Self {
            r,
            sigma,
            delta,
            rho,
            chol,
        })
    }

    /// `ρ_ij = ρ` off the diagonal.
    pub fn equicorrelated(r: f64, sigma: Vec<f64>, delta: Vec<f64>, rho: f64) -> Result<Self> {
        let d = sigma.len();
        let m = (0..d * d).map(|k| if k / d == k % d { 1.0 } else { rho }).collect();
        Self::new(r, sigma, delta, m)
    }

    pub fn dim(&self) -> usize {
        self.sigma.len()
    }

    pub fn correlation(&self) -> &[f64] {
        &self.rho
    }

    /// Lower-triangular factor `L` with `L Lᵀ = ρ`, row-major.
    pub fn cholesky_factor(&self) -> &[f64] {
        &self.chol
    }

    /// Advances `state` by `dt` using one vector of independent normals
    /// drawn from `rng`.
    #[inline]
    pub fn step_into(&self, state: &mut [f64], dt: f64, rng: &mut ChaCha8Rng, z: &mut [f64]) {
        let d = self.dim();
        for zi in z.iter_mut() {
            *zi = rng::std_normal(rng);
        }
        let sq = dt.sqrt();
        for i in 0..d {
            let row = &self.chol[i * d..i * d + i + 1];
            let w: f64 = row.iter().zip(z.iter()).map(|(l, zj)| l * zj).sum();
            let s = self.sigma[i];
            state[i] *= ((self.r - self.delta[i] - 0.5 * s * s) * dt + s * sq * w).exp();
        }
    }

    /// `count` exact draws of `S_T`, row-major `count x d`. Draw `b` uses
    /// substream `b` of `seed`.
    pub fn simulate_terminal(&self, s0: &[f64], maturity: f64, count: usize, seed: u64) -> Result<Vec<f64>> {
        self.check_spot(s0)?;
        let d = self.dim();
        let mut out = Vec::with_capacity(count * d);
        let mut z = vec![0.0; d];
        for b in 0..count {
            let mut rng = rng::substream(seed, domain::TERMINAL, b as u64);
            let start = out.len();
            out.extend_from_slice(s0);
            self.step_into(&mut out[start..], maturity, &mut rng, &mut z);
        }
        Ok(out)
    }

    /// Writes one path (`(N+1) x d`, row-major) into `out`.
    pub fn path_into(&self, s0: &[f64], grid: &PathGrid, rng: &mut ChaCha8Rng, out: &mut [f64], z: &mut [f64]) {
        let d = self.dim();
        out[..d].copy_from_slice(s0);
        for k in 1..grid.times.len() {
            let dt = grid.times[k] - grid.times[k - 1];
            let (prev, next) = out[(k - 1) * d..(k + 1) * d].split_at_mut(d);
            next.copy_from_slice(prev);
            self.step_into(next, dt, rng, z);
        }
    }

    /// `count` exact paths on `grid`; path `b` uses substream `b` of `seed`.
    pub fn simulate_paths(&self, s0: &[f64], grid: &PathGrid, count: usize, seed: u64) -> Result<Paths> {
        self.check_spot(s0)?;
        let d = self.dim();
        let stride = grid.times.len() * d;
        let mut data = vec![0.0; count * stride];
        let mut z = vec![0.0; d];
        for (b, path) in data.chunks_mut(stride).enumerate() {
            let mut rng = rng::substream(seed, domain::PATHS, b as u64);
            self.path_into(s0, grid, &mut rng, path, &mut z);
        }
        Ok(Paths {
            count,
            dates: grid.times.len(),
            dim: d,
            data,
        })
    }

    fn check_spot(&self, s0: &[f64]) -> Result<()> {
        check_dim("initial prices", self.dim(), s0.len())?;
        if s0.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidSpec("initial prices must be positive".into()));
        }
        Ok(())
    }
}

/// Lower Cholesky factor of a symmetric positive semi-definite matrix.
pub fn cholesky(a: &[f64], d: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * d + k] * l[j * d + k]).sum();
            if i == j {
                let pivot = a[i * d + i] - s;
                if pivot < -1e-12 {
                    return Err(Error::InvalidModel("correlation matrix is not positive semi-definite".into()));
                }
                l[i * d + i] = pivot.max(0.0).sqrt();
            } else {
                let diag = l[j * d + j];
                l[i * d + j] = if diag > 1e-14 { (a[i * d + j] - s) / diag } else { 0.0 };
            }
        }
    }
    // semi-definite factors must still reproduce the matrix
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..=j).map(|k| l[i * d + k] * l[j * d + k]).sum();
            if (s - a[i * d + j]).abs() > 1e-9 {
                return Err(Error::InvalidModel("correlation matrix is not positive semi-definite".into()));
            }
        }
    }
    Ok(l)
}

/// Simulated paths, indexed `(path, date, asset)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Paths {
    pub count: usize,
    pub dates: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Paths {
    pub fn state(&self, path: usize, date: usize) -> &[f64] {
        let start = (path * self.dates + date) * self.dim;
        &self.data[start..start + self.dim]
    }

    /// `path_id,t_index,asset,value` CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "path_id,t_index,asset,value")?;
        for p in 0..self.count {
            for k in 0..self.dates {
                for (a, v) in self.state(p, k).iter().enumerate() {
                    writeln!(w, "{p},{k},{a},{v:?}")?;
                }
            }
        }
        Ok(())
    }
}

/// One-factor mean-reverting forward model:
/// `F_{t_k} = F_0 exp(σ X_{t_k} - λ_k²/2)`, `X_t = ∫_0^t e^{-α(t-s)} dW_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasForwardModel {
    pub alpha: f64,
    pub sigma: f64,
    pub f0: f64,
}

impl GasForwardModel {
    pub fn new(alpha: f64, sigma: f64, f0: f64) -> Result<Self> {
        if !(alpha > 0.0) || !(sigma >= 0.0) || !(f0 > 0.0) {
            return Err(Error::InvalidModel("need alpha > 0, sigma >= 0, f0 > 0".into()));
        }
        Ok(Self { alpha, sigma, f0 })
    }

    /// `Var(X_t) = (1 - e^{-2αt}) / (2α)`.
    pub fn factor_variance(&self, t: f64) -> f64 {
        -(-2.0 * self.alpha * t).exp_m1() / (2.0 * self.alpha)
    }

    /// `λ² = σ² (1 - e^{-2αt}) / (2α)`, the log-variance of `F_t`.
    pub fn lambda_sq(&self, t: f64) -> f64 {
        self.sigma * self.sigma * self.factor_variance(t)
    }

    /// Spot price at time `t` given the factor value.
    #[inline]
    pub fn price(&self, t: f64, x: f64) -> f64 {
        self.f0 * (self.sigma * x - 0.5 * self.lambda_sq(t)).exp()
    }

    /// Exact AR(1) transition of the factor from `t0` to `t1`.
    #[inline]
    pub fn factor_step(&self, x: f64, t0: f64, t1: f64, z: f64) -> f64 {
        let dt = t1 - t0;
        (-self.alpha * dt).exp() * x + self.factor_variance(dt).sqrt() * z
    }

    /// Writes the factor `X_{t_0..t_N}` (with `X_0 = 0`) into `out`.
    pub fn factor_path_into(&self, grid: &PathGrid, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        let t = grid.times();
        out[0] = 0.0;
        for k in 1..t.len() {
            out[k] = self.factor_step(out[k - 1], t[k - 1], t[k], rng::std_normal(rng));
        }
    }

    /// Writes `F_{t_0..t_N}` along one path into `out`.
    pub fn path_into(&self, grid: &PathGrid, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        self.factor_path_into(grid, rng, out);
        for (x, &t) in out.iter_mut().zip(grid.times()) {
            *x = self.price(t, *x);
        }
    }

    /// `count x (N+1)` matrix of prices; path `b` uses substream `b`.
    pub fn simulate_gas_paths(&self, grid: &PathGrid, count: usize, seed: u64) -> Vec<f64> {
        let dates = grid.times().len();
        let mut out = vec![0.0; count * dates];
        for (b, row) in out.chunks_mut(dates).enumerate() {
            let mut rng = rng::substream(seed, domain::GAS, b as u64);
            self.path_into(grid, &mut rng, row);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(PathGrid::new(vec![0.0, 1.0, 1.0]).is_err());
        assert!(PathGrid::new(vec![0.5, 1.0]).is_err());
        let g = PathGrid::uniform(3.0, 9).unwrap();
        assert_eq!(g.steps(), 9);
        assert_eq!(g.times()[3], 1.0);
    }

    #[test]
    fn cholesky_reproduces_correlation() {
        let m = BlackScholesModel::equicorrelated(0.0, vec![0.2; 5], vec![0.0; 5], 0.4).unwrap();
        let l = m.cholesky_factor();
        for i in 0..5 {
            for j in 0..5 {
                let s: f64 = (0..5).map(|k| l[i * 5 + k] * l[j * 5 + k]).sum();
                assert!((s - m.correlation()[i * 5 + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_non_psd() {
        let err = BlackScholesModel::equicorrelated(0.0, vec![0.2; 3], vec![0.0; 3], -0.9);
        assert!(matches!(err, Err(Error::InvalidModel(_))));
        let perfectly_correlated = BlackScholesModel::equicorrelated(0.0, vec![0.2; 2], vec![0.0; 2], 1.0);
        assert!(perfectly_correlated.is_ok());
    }

    #[test]
    fn zero_volatility_is_deterministic() {
        let m = BlackScholesModel::new(0.05, vec![0.0, 0.0], vec![0.01, 0.02], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let s = m.simulate_terminal(&[100.0, 50.0], 2.0, 3, 9).unwrap();
        for row in s.chunks(2) {
            assert!((row[0] - 100.0 * (0.04f64 * 2.0).exp()).abs() < 1e-12);
            assert!((row[1] - 50.0 * (0.03f64 * 2.0).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn paths_start_at_spot_and_repeat() {
        let m = BlackScholesModel::equicorrelated(0.05, vec![0.2, 0.3], vec![0.1, 0.1], 0.3).unwrap();
        let g = PathGrid::uniform(1.0, 4).unwrap();
        let a = m.simulate_paths(&[90.0, 110.0], &g, 10, 1).unwrap();
        let b = m.simulate_paths(&[90.0, 110.0], &g, 10, 1).unwrap();
        assert_eq!(a, b);
        for p in 0..10 {
            assert_eq!(a.state(p, 0), &[90.0, 110.0]);
        }
    }

    #[test]
    fn gas_lambda_and_start() {
        let m = GasForwardModel::new(4.0, 0.7, 20.0).unwrap();
        let expected = 0.49 * (1.0 - (-8.0f64).exp()) / 8.0;
        assert!((m.lambda_sq(1.0) - expected).abs() < 1e-15);
        let g = PathGrid::uniform(1.0, 5).unwrap();
        let paths = m.simulate_gas_paths(&g, 4, 3);
        for row in paths.chunks(6) {
            assert_eq!(row[0], 20.0);
        }
    }

    #[test]
    fn path_csv_header() {
        let m = BlackScholesModel::equicorrelated(0.0, vec![0.2], vec![0.0], 0.0).unwrap();
        let g = PathGrid::uniform(1.0, 1).unwrap();
        let p = m.simulate_paths(&[1.0], &g, 1, 0).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("path_id,t_index,asset,value\n0,0,0,1.0\n"));
        assert_eq!(text.lines().count(), 3);
    }
}
