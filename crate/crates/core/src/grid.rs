//! Logarithmic radial mesh.
//!
//! Nodes are uniform in `theta = ln x`. Quadrature integrates the
//! piecewise-linear-in-theta interpolant of the integrand against the exact
//! Jacobian `dx = e^theta dtheta`, so the weights are positive, second order
//! in the theta step, and reproduce `x_max - x_min` exactly for `f = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_len, Error, Result};

pub const MIN_NODES: usize = 16;

/// Grid parameters as they appear in configs and snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub theta_min: f64,
    pub theta_max: f64,
    pub n_nodes: usize,
}

impl GridSpec {
    pub fn new(theta_min: f64, theta_max: f64, n_nodes: usize) -> Self {
        Self {
            theta_min,
            theta_max,
            n_nodes,
        }
    }

    /// x in [1e-6, 40] with 2000 nodes.
    pub fn standard() -> Self {
        Self::new(1e-6_f64.ln(), 40_f64.ln(), 2000)
    }

    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.theta_min, self.theta_max, self.n_nodes)
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::standard()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    theta_min: f64,
    theta_max: f64,
    step: f64,
    theta: Vec<f64>,
    x: Vec<f64>,
    weights: Vec<f64>,
    // per-interval weights of the left / right endpoint
    left: Vec<f64>,
    right: Vec<f64>,
}

impl Grid {
    pub fn new(theta_min: f64, theta_max: f64, n_nodes: usize) -> Result<Self> {
        if !(theta_min.is_finite() && theta_max.is_finite()) {
            return Err(Error::InvalidConfig("grid bounds must be finite".into()));
        }
        if theta_min >= theta_max {
            return Err(Error::InvalidConfig(format!(
                "theta_min ({theta_min}) must be below theta_max ({theta_max})"
            )));
        }
        if n_nodes < MIN_NODES {
            return Err(Error::InvalidConfig(format!(
                "grid needs at least {MIN_NODES} nodes, got {n_nodes}"
            )));
        }
        Ok(Self::build_unchecked(theta_min, theta_max, n_nodes))
    }

    /// Same construction without the node-count floor. Used for tiny
    /// illustrative meshes in tests.
    pub(crate) fn build_unchecked(theta_min: f64, theta_max: f64, n_nodes: usize) -> Self {
        let step = (theta_max - theta_min) / (n_nodes - 1) as f64;
        let theta: Vec<f64> = (0..n_nodes)
            .map(|i| {
                if i + 1 == n_nodes {
                    theta_max
                } else {
                    theta_min + step * i as f64
                }
            })
            .collect();
        let x: Vec<f64> = theta.iter().map(|t| t.exp()).collect();

        // int_0^h (1 - s/h) e^s ds and int_0^h (s/h) e^s ds
        let em1 = step.exp_m1();
        let left_factor = (em1 - step) / step;
        let right_factor = (step * (em1 + 1.0) - em1) / step;

        let left: Vec<f64> = x[..n_nodes - 1].iter().map(|xi| xi * left_factor).collect();
        let right: Vec<f64> = x[..n_nodes - 1]
            .iter()
            .map(|xi| xi * right_factor)
            .collect();
        let mut weights = vec![0.0; n_nodes];
        for i in 0..n_nodes - 1 {
            weights[i] += left[i];
            weights[i + 1] += right[i];
        }

        Self {
            theta_min,
            theta_max,
            step,
            theta,
            x,
            weights,
            left,
            right,
        }
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec::new(self.theta_min, self.theta_max, self.len())
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn theta_min(&self) -> f64 {
        self.theta_min
    }

    pub fn theta_max(&self) -> f64 {
        self.theta_max
    }

    /// Uniform spacing in theta.
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn x_min(&self) -> f64 {
        self.x[0]
    }

    pub fn x_max(&self) -> f64 {
        self.x[self.len() - 1]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Geometric midpoint of interval `i`, i.e. `exp` of the theta midpoint.
    pub fn x_mid(&self, i: usize) -> f64 {
        (self.x[i] * self.x[i + 1]).sqrt()
    }

    /// `sum_i w_i f_i`.
    pub fn integrate(&self, samples: &[f64]) -> Result<f64> {
        check_len(self.len(), samples.len())?;
        check_finite("integrand", samples)?;
        Ok(self.integrate_unchecked(samples))
    }

    pub(crate) fn integrate_unchecked(&self, samples: &[f64]) -> f64 {
        self.weights.iter().zip(samples).map(|(w, f)| w * f).sum()
    }

    /// Running integral `int_{x_min}^{x_i} f dx` for every node.
    pub fn cumulative(&self, samples: &[f64]) -> Result<Vec<f64>> {
        check_len(self.len(), samples.len())?;
        check_finite("integrand", samples)?;
        Ok(self.cumulative_unchecked(samples))
    }

    pub(crate) fn cumulative_unchecked(&self, samples: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        out.push(acc);
        for i in 0..self.len() - 1 {
            acc += self.left[i] * samples[i] + self.right[i] * samples[i + 1];
            out.push(acc);
        }
        out
    }

    /// Running tail integral `int_{x_i}^{x_max} f dx` for every node.
    pub(crate) fn tail_cumulative_unchecked(&self, samples: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        let mut acc = 0.0;
        for i in (0..n - 1).rev() {
            acc += self.left[i] * samples[i] + self.right[i] * samples[i + 1];
            out[i] = acc;
        }
        out
    }

    /// df/dx from the three-point Lagrange stencil on the (non-uniform) x
    /// nodes: centered in the interior, one-sided at the two ends. Exact for
    /// quadratics in x, second order in the theta step.
    pub fn differentiate(&self, samples: &[f64]) -> Result<Vec<f64>> {
        check_len(self.len(), samples.len())?;
        Ok(self.differentiate_unchecked(samples))
    }

    pub(crate) fn differentiate_unchecked(&self, f: &[f64]) -> Vec<f64> {
        let x = &self.x;
        let n = self.len();
        let mut df = vec![0.0; n];
        for i in 1..n - 1 {
            let dm = x[i] - x[i - 1];
            let dp = x[i + 1] - x[i];
            df[i] = -dp / (dm * (dm + dp)) * f[i - 1]
                + (dp - dm) / (dm * dp) * f[i]
                + dm / (dp * (dm + dp)) * f[i + 1];
        }
        df[0] = three_point_end(x[0], x[1], x[2], f[0], f[1], f[2]);
        df[n - 1] = three_point_end(x[n - 1], x[n - 2], x[n - 3], f[n - 1], f[n - 2], f[n - 3]);
        df
    }
}

/// Derivative at `x0` of the quadratic through three points.
fn three_point_end(x0: f64, x1: f64, x2: f64, f0: f64, f1: f64, f2: f64) -> f64 {
    let d1 = x1 - x0;
    let d2 = x2 - x0;
    let c0 = -(d1 + d2) / (d1 * d2);
    let c1 = d2 / (d1 * (d2 - d1));
    let c2 = -d1 / (d2 * (d2 - d1));
    c0 * f0 + c1 * f1 + c2 * f2
}
