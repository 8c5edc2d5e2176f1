//! Affine input/output maps stored alongside a trained network.
//!
//! Inputs are mapped coordinate-wise to roughly `[0, 1]` and regression
//! targets are standardized before training. Both maps are increasing affine
//! transformations, so the wrapped function stays convex in the raw input.

use crate::error::{check_dim, Result};
use crate::net::{Activation, AffineLayer, ConvexNet};

/// Coordinate-wise map `x_i -> (x_i - lo_i) / span_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputMap {
    pub lo: Vec<f64>,
    pub span: Vec<f64>,
}

impl InputMap {
    pub fn identity(dim: usize) -> Self {
        Self {
            lo: vec![0.0; dim],
            span: vec![1.0; dim],
        }
    }

    /// Maps the box `[lo, hi]` onto the unit cube. Degenerate coordinates
    /// (`hi == lo`) get unit span.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Self {
        let span = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| if b > a { b - a } else { 1.0 })
            .collect();
        Self { lo: lo.to_vec(), span }
    }

    /// Per-coordinate empirical quantile box of `samples` (row-major, `dim` columns).
    pub fn from_quantiles(samples: &[f64], dim: usize, lower: f64, upper: f64) -> Self {
        let mut lo = Vec::with_capacity(dim);
        let mut hi = Vec::with_capacity(dim);
        for j in 0..dim {
            let mut col: Vec<f64> = samples.iter().skip(j).step_by(dim).copied().collect();
            col.sort_by(f64::total_cmp);
            lo.push(quantile_sorted(&col, lower));
            hi.push(quantile_sorted(&col, upper));
        }
        Self::from_box(&lo, &hi)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    #[inline]
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for ((o, v), (lo, span)) in out.iter_mut().zip(x).zip(self.lo.iter().zip(&self.span)) {
            *o = (v - lo) / span;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.apply_into(x, &mut out);
        out
    }
}

/// Target standardization `y = shift + scale * y_net`, with `scale > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputMap {
    pub shift: f64,
    pub scale: f64,
}

impl OutputMap {
    pub fn identity() -> Self {
        Self { shift: 0.0, scale: 1.0 }
    }

    /// Mean/standard-deviation standardization; the scale is floored at
    /// `min_scale` so constant targets stay well defined.
    pub fn standardize(targets: &[f64], min_scale: f64) -> Self {
        let n = targets.len().max(1) as f64;
        let mean = targets.iter().sum::<f64>() / n;
        let var = targets.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n;
        Self {
            shift: mean,
            scale: var.sqrt().max(min_scale),
        }
    }

    #[inline]
    pub fn to_net(&self, y: f64) -> f64 {
        (y - self.shift) / self.scale
    }

    #[inline]
    pub fn from_net(&self, y: f64) -> f64 {
        self.shift + self.scale * y
    }
}

/// A network together with its input and output maps.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledNet {
    pub net: ConvexNet,
    pub input: InputMap,
    pub output: OutputMap,
}

impl ScaledNet {
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim("input", self.input.dim(), x.len())?;
        let xs = self.input.apply(x);
        Ok(self.output.from_net(self.net.forward(&xs)?))
    }

    /// Outputs for the rows of `xs` (row-major, raw inputs).
    pub fn eval_batch(&self, xs: &[f64]) -> Result<Vec<f64>> {
        let d = self.input.dim();
        let scaled: Vec<f64> = xs.chunks(d).flat_map(|x| self.input.apply(x)).collect();
        Ok(self
            .net
            .forward_batch(&scaled)?
            .into_iter()
            .map(|y| self.output.from_net(y))
            .collect())
    }

    /// Subgradient with respect to the raw (unscaled) input.
    pub fn input_subgradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("input", self.input.dim(), x.len())?;
        let g = self.net.input_subgradient(&self.input.apply(x))?;
        Ok(g.iter()
            .zip(&self.input.span)
            .map(|(g, s)| self.output.scale * g / s)
            .collect())
    }
}

/// A scaled network with its layers collapsed, for repeated evaluation.
#[derive(Debug, Clone)]
pub struct CompiledNet {
    planes: AffineLayer,
    activation: Activation,
    input: InputMap,
    output: OutputMap,
}

impl CompiledNet {
    pub fn new(net: &ScaledNet) -> Self {
        Self {
            planes: net.net.collapse_to_affine(),
            activation: *net.net.activation(),
            input: net.input.clone(),
            output: net.output,
        }
    }

    /// Output at `x`; `scratch` is resized as needed.
    pub fn eval_with(&self, x: &[f64], scratch: &mut Vec<f64>) -> f64 {
        let d = self.input.dim();
        let n = self.planes.rows();
        scratch.resize(d + n, 0.0);
        let (xs, z) = scratch.split_at_mut(d);
        self.input.apply_into(x, xs);
        self.planes.apply_into(xs, z);
        self.output.from_net(self.activation.apply(z))
    }
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}
