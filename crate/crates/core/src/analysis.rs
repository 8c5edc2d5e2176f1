//! Numerical counterparts of the approximation results: tangent-plane
//! max-affine constructions, sup-norm rates, quantization errors and the
//! quantization bound on the L^r error.

use std::io::Write;

use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::net::{log_sum_exp, Activation, AffineLayer, ConvexNet};
use crate::rng::{self, domain, mean_and_stderr};

const LLOYD_MAX_ITERS: usize = 200;
const LLOYD_REL_TOL: f64 = 1e-10;

/// Max of the tangent planes of `f` at `points` (row-major, `dim` columns),
/// as a single-layer Max network. The result never exceeds a convex `f`.
pub fn tangent_construction<F, G>(f: F, grad: G, points: &[f64], dim: usize) -> Result<ConvexNet>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    if dim == 0 || points.is_empty() {
        return Err(Error::InvalidSpec("need at least one tangent point".into()));
    }
    check_dim("tangent points", 0, points.len() % dim)?;
    let n = points.len() / dim;
    let mut weights = Vec::with_capacity(n * dim);
    let mut bias = Vec::with_capacity(n);
    for x in points.chunks(dim) {
        let g = grad(x);
        check_dim("gradient", dim, g.len())?;
        let fx = f(x);
        if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite value or gradient at a tangent point".into()));
        }
        bias.push(fx - g.iter().zip(x).map(|(a, b)| a * b).sum::<f64>());
        weights.extend(g);
    }
    ConvexNet::new(vec![AffineLayer::new(n, dim, weights, bias)?], Activation::max())
}

/// `n` cell midpoints of `[lo, hi]`.
pub fn midpoint_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / n as f64;
    (0..n).map(|i| lo + (i as f64 + 0.5) * h).collect()
}

/// `count` equispaced points of `[lo, hi]`, endpoints included.
pub fn dense_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub n: usize,
    pub sup_error: f64,
}

/// Sup error of the tangent construction on `n` cell midpoints of
/// `[lo, hi]`, measured on a dense grid of `eval_points` points, for every
/// `n` in `n_list`. One-dimensional.
pub fn sup_rate_check<F, G>(f: F, grad: G, lo: f64, hi: f64, n_list: &[usize], eval_points: usize) -> Result<Vec<RateRow>>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    if !(lo < hi) || eval_points < 2 {
        return Err(Error::InvalidSpec("need lo < hi and at least two evaluation points".into()));
    }
    let dense = dense_grid(lo, hi, eval_points);
    n_list
        .iter()
        .map(|&n| {
            if n == 0 {
                return Err(Error::InvalidSpec("n must be at least 1".into()));
            }
            let net = tangent_construction(&f, &grad, &midpoint_grid(lo, hi, n), 1)?;
            let approx = net.forward_batch(&dense)?;
            let sup_error = dense.iter().zip(&approx).map(|(&x, a)| (f(&[x]) - a).abs()).fold(0.0, f64::max);
            Ok(RateRow { n, sup_error })
        })
        .collect()
}

/// Sup errors of the Max and the LogSumExp (temperature `lambda`) readouts
/// of the same `n` tangent planes, on the dense grid.
pub fn lse_sup_errors<F, G>(f: F, grad: G, lo: f64, hi: f64, n: usize, lambda: f64, eval_points: usize) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    if !(lambda > 0.0) {
        return Err(Error::InvalidSpec("lambda must be positive".into()));
    }
    let net = tangent_construction(&f, &grad, &midpoint_grid(lo, hi, n.max(1)), 1)?;
    let planes = net.collapse_to_affine();
    let mut max_err: f64 = 0.0;
    let mut lse_err: f64 = 0.0;
    for x in dense_grid(lo, hi, eval_points) {
        let z = planes.apply(&[x]);
        let fx = f(&[x]);
        max_err = max_err.max((fx - Activation::max().apply(&z)).abs());
        lse_err = lse_err.max((fx - log_sum_exp(&z, lambda)).abs());
    }
    Ok((max_err, lse_err))
}

/// `n` points and their empirical quadratic distortion `e₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantizer {
    pub dim: usize,
    pub points: Vec<f64>,
    pub distortion: f64,
}

impl Quantizer {
    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(points: &[f64], dim: usize, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, p) in points.chunks(dim).enumerate() {
        let d2 = sq_dist(p, x);
        if d2 < best.1 {
            best = (i, d2);
        }
    }
    best
}

/// Lloyd's fixed point on an empirical sample (row-major, `dim` columns).
/// Starts from `n` quantiles of the sample ordered by its first
/// coordinate. An empty cell is re-seeded at the sample point farthest
/// from its centroid.
pub fn lloyd(sample: &[f64], dim: usize, n: usize) -> Result<Quantizer> {
    if dim == 0 || n == 0 {
        return Err(Error::InvalidSpec("need dim >= 1 and n >= 1".into()));
    }
    check_dim("sample", 0, sample.len() % dim)?;
    let size = sample.len() / dim;
    if size < n {
        return Err(Error::InvalidSpec(format!("sample of {size} points cannot support {n} centroids")));
    }
    let row = |i: usize| &sample[i * dim..(i + 1) * dim];
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&a, &b| row(a)[0].total_cmp(&row(b)[0]));
    let mut points = Vec::with_capacity(n * dim);
    for i in 0..n {
        let pos = ((i as f64 + 0.5) * size as f64 / n as f64) as usize;
        points.extend_from_slice(row(order[pos.min(size - 1)]));
    }

    let mut sums = vec![0.0; n * dim];
    let mut counts = vec![0usize; n];
    let mut prev = f64::INFINITY;
    for _ in 0..LLOYD_MAX_ITERS {
        sums.iter_mut().for_each(|s| *s = 0.0);
        counts.iter_mut().for_each(|c| *c = 0);
        let mut total = 0.0;
        let mut farthest = (0, -1.0);
        for i in 0..size {
            let x = row(i);
            let (j, d2) = nearest(&points, dim, x);
            total += d2;
            if d2 > farthest.1 {
                farthest = (i, d2);
            }
            counts[j] += 1;
            for (s, v) in sums[j * dim..(j + 1) * dim].iter_mut().zip(x) {
                *s += v;
            }
        }
        let distortion = total / size as f64;
        for j in 0..n {
            let dst = &mut points[j * dim..(j + 1) * dim];
            if counts[j] == 0 {
                dst.copy_from_slice(row(farthest.0));
                farthest.1 = -1.0;
            } else {
                for (p, s) in dst.iter_mut().zip(&sums[j * dim..(j + 1) * dim]) {
                    *p = s / counts[j] as f64;
                }
            }
        }
        if prev.is_finite() && prev - distortion <= LLOYD_REL_TOL * prev {
            break;
        }
        prev = distortion;
    }
    // distortion of the final centroids
    let total: f64 = (0..size).map(|i| nearest(&points, dim, row(i)).1).sum();
    Ok(Quantizer {
        dim,
        points,
        distortion: (total / size as f64).sqrt(),
    })
}

/// Empirical `e₂` of an `n`-point Lloyd quantizer for `mu`, from
/// `sample_size` draws of `sampler`.
pub fn quantization_error<S>(mut sampler: S, dim: usize, n: usize, sample_size: usize, seed: u64) -> Result<Quantizer>
where
    S: FnMut(&mut ChaCha8Rng, &mut [f64]),
{
    let mut rng = rng::substream(seed, domain::QUANTIZER, 0);
    let mut sample = vec![0.0; sample_size * dim];
    for x in sample.chunks_mut(dim.max(1)) {
        sampler(&mut rng, x);
    }
    lloyd(&sample, dim, n)
}

/// Hölder regularity of a gradient: `|∇f(x) − ∇f(y)| ≤ constant · |x − y|^alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Holder {
    pub alpha: f64,
    pub constant: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundRow {
    pub n: usize,
    /// `‖f − f_n‖_{L^r(µ)}` of the tangent construction at the quantizer.
    pub lhs: f64,
    /// Standard error of the Monte Carlo mean behind `lhs` (for `r = 1`,
    /// of `lhs` itself).
    pub lhs_se: f64,
    /// `[∇f] · e₂^{α+1}`.
    pub rhs: f64,
}

impl BoundRow {
    pub fn holds(&self, slack_se: f64) -> bool {
        self.lhs <= self.rhs + slack_se * self.lhs_se
    }
}

/// L^r error of the tangent construction at the points of `quantizer`,
/// estimated on `eval` (draws from the same law), against the quantization
/// bound.
pub fn lr_bound_check<F, G>(f: F, grad: G, holder: Holder, quantizer: &Quantizer, eval: &[f64], r: f64) -> Result<BoundRow>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    if !(holder.alpha > 0.0 && holder.constant >= 0.0) {
        return Err(Error::InvalidSpec("need alpha > 0 and a non-negative Hölder constant".into()));
    }
    if !(r > 0.0 && r <= 2.0 / (holder.alpha + 1.0) + 1e-12) {
        return Err(Error::InvalidSpec(format!("r must lie in (0, 2/(alpha+1)], got {r}")));
    }
    let dim = quantizer.dim;
    check_dim("evaluation sample", 0, eval.len() % dim)?;
    if eval.is_empty() {
        return Err(Error::InvalidSpec("empty evaluation sample".into()));
    }
    let net = tangent_construction(&f, &grad, &quantizer.points, dim)?;
    let approx = net.forward_batch(eval)?;
    let gaps: Vec<f64> = eval.chunks(dim).zip(&approx).map(|(x, a)| (f(x) - a).abs().powf(r)).collect();
    let (mean, se) = mean_and_stderr(&gaps);
    let lhs = mean.powf(1.0 / r);
    // delta method for the r-th root
    let lhs_se = if mean > 0.0 { se * lhs / (r * mean) } else { 0.0 };
    Ok(BoundRow {
        n: quantizer.len(),
        lhs,
        lhs_se,
        rhs: holder.constant * quantizer.distortion.powf(holder.alpha + 1.0),
    })
}

pub fn write_rate_table<W: Write>(rows: &[RateRow], mut w: W) -> Result<()> {
    writeln!(w, "n,sup_error")?;
    for r in rows {
        writeln!(w, "{},{:.12e}", r.n, r.sup_error)?;
    }
    Ok(())
}

pub fn write_bound_table<W: Write>(rows: &[BoundRow], mut w: W) -> Result<()> {
    writeln!(w, "n,lhs,rhs")?;
    for r in rows {
        writeln!(w, "{},{:.12e},{:.12e}", r.n, r.lhs, r.rhs)?;
    }
    Ok(())
}
