//! Spinor pair, density, self-generated potential and the analytic
//! ingredients of the reduced radial problem.
//!
//! The radial system solved throughout the crate is
//!
//! ```text
//! u' - u/x - (p(k) - phi) v = 0
//! v' + v/x - (q(k) + phi) u = 0,     phi = a * phi0[u^2 + v^2]
//! ```
//!
//! with `p = 2k^2/(1+k^2)` and `q = 2/(1+k^2)`. At `k = 1` both reduce to
//! unity and the system is the zero-energy problem whose coupling `a0` is
//! sought; away from `k = 1` it is a unit-mass problem at energy
//! `(k^2-1)/(k^2+1)`, which keeps `k(a)` well defined.

use crate::error::{check_finite, check_len, Error, Result};
use crate::grid::Grid;

/// Radial functions `(u, v)` sampled on a grid. The pair does not hold the
/// grid; every operation takes it explicitly and checks lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorPair {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl SpinorPair {
    pub fn new(u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        check_len(u.len(), v.len())?;
        Ok(Self { u, v })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            u: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub(crate) fn check(&self, grid: &Grid) -> Result<()> {
        check_len(grid.len(), self.u.len())?;
        check_len(grid.len(), self.v.len())?;
        check_finite("u", &self.u)?;
        check_finite("v", &self.v)
    }

    /// `int (u^2 + v^2) dx`.
    pub fn norm(&self, grid: &Grid) -> Result<f64> {
        self.check(grid)?;
        Ok(grid.integrate_unchecked(&density_values(self)))
    }

    pub fn scale(&mut self, factor: f64) {
        self.u.iter_mut().for_each(|u| *u *= factor);
        self.v.iter_mut().for_each(|v| *v *= factor);
    }

    /// Rescales to unit norm and returns the norm found before scaling.
    pub fn normalize(&mut self, grid: &Grid) -> Result<f64> {
        let norm = self.norm(grid)?;
        if !(norm > 0.0) {
            return Err(Error::InvalidInput("cannot normalize a zero pair".into()));
        }
        self.scale(norm.sqrt().recip());
        Ok(norm)
    }

    /// Sign changes of `u`, ignoring samples below `1e-10 * max|u|` where
    /// the decaying tail is pure rounding noise.
    pub fn u_sign_changes(&self) -> usize {
        count_sign_changes(&self.u, 1e-10)
    }
}

pub(crate) fn count_sign_changes(values: &[f64], relative_floor: f64) -> usize {
    let peak = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return 0;
    }
    let floor = relative_floor * peak;
    let mut last = 0.0_f64;
    let mut changes = 0;
    for &v in values.iter().filter(|v| v.abs() > floor) {
        if last != 0.0 && v.signum() != last.signum() {
            changes += 1;
        }
        last = v;
    }
    changes
}

#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    pub rho: Vec<f64>,
}

/// `rho_i = u_i^2 + v_i^2`.
pub fn density(pair: &SpinorPair) -> Density {
    Density {
        rho: density_values(pair),
    }
}

fn density_values(pair: &SpinorPair) -> Vec<f64> {
    pair.u
        .iter()
        .zip(&pair.v)
        .map(|(u, v)| u * u + v * v)
        .collect()
}

/// Unit-strength potential `phi0` plus the coupling that scales it.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfField {
    pub phi0: Vec<f64>,
    pub a: f64,
    pub phi: Vec<f64>,
}

impl SelfField {
    pub fn new(phi0: Vec<f64>, a: f64) -> Self {
        let phi = phi0.iter().map(|p| a * p).collect();
        Self { phi0, a, phi }
    }

    pub fn from_pair(pair: &SpinorPair, a: f64, grid: &Grid) -> Result<Self> {
        Ok(Self::new(potential(&density(pair), grid)?, a))
    }

    pub fn with_coupling(mut self, a: f64) -> Self {
        self.a = a;
        self.phi = self.phi0.iter().map(|p| a * p).collect();
        self
    }

    pub fn at_origin(&self) -> f64 {
        self.phi[0]
    }
}

/// Shell potential of a radial charge density:
/// `phi0(x) = int_x^inf rho(y)/y dy + (1/x) int_0^x rho(y) dy`.
///
/// One forward and one backward cumulative sweep. The sliver `[0, x_min]`
/// is closed with `rho ~ x^2`, the outer integral is truncated at `x_max`.
pub fn potential(rho: &Density, grid: &Grid) -> Result<Vec<f64>> {
    check_len(grid.len(), rho.rho.len())?;
    check_finite("density", &rho.rho)?;
    if let Some(i) = rho.rho.iter().position(|r| *r < 0.0) {
        return Err(Error::InvalidInput(format!(
            "negative density {} at node {i}",
            rho.rho[i]
        )));
    }
    Ok(potential_unchecked(&rho.rho, grid))
}

pub(crate) fn potential_unchecked(rho: &[f64], grid: &Grid) -> Vec<f64> {
    let x = grid.x();
    let over_y: Vec<f64> = rho.iter().zip(x).map(|(r, x)| r / x).collect();
    let inner = grid.cumulative_unchecked(rho);
    let outer = grid.tail_cumulative_unchecked(&over_y);
    let sliver = rho[0] * x[0] / 3.0;
    (0..grid.len())
        .map(|i| outer[i] + (inner[i] + sliver) / x[i])
        .collect()
}

const TRIAL_A: f64 = 0.534_522_483_824_848_8; // sqrt(2/7)
const TRIAL_B: f64 = 0.816_496_580_927_726; // sqrt(2/3)

/// Trial pair `u = A x (1 + b x) e^{-bx}`, `v = B x^2 e^{-bx}` with
/// `A = sqrt(2/7) b^{3/2}`, `B = sqrt(2/3) b^{5/2}`. The u part carries
/// `7A^2/(4b^3) = 1/2` of the norm and the v part `3B^2/(4b^5) = 1/2`, so
/// the pair has unit norm on `[0, inf)` for every `b`.
pub fn trial_functions(b: f64, grid: &Grid) -> Result<SpinorPair> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "trial scale b must be positive, got {b}"
        )));
    }
    let (amp_u, amp_v) = trial_amplitudes(b);
    let (u, v) = grid
        .x()
        .iter()
        .map(|&x| {
            let e = (-b * x).exp();
            (amp_u * x * (1.0 + b * x) * e, amp_v * x * x * e)
        })
        .unzip();
    Ok(SpinorPair { u, v })
}

pub fn trial_amplitudes(b: f64) -> (f64, f64) {
    let s = b.powf(1.5);
    (TRIAL_A * s, TRIAL_B * s * b)
}

/// `(p(k), q(k))`: the spectral terms that stand where the unit mass sits in
/// the `k = 1` system.
pub fn spectral_terms(k: f64) -> (f64, f64) {
    let s = 1.0 + k * k;
    (2.0 * k * k / s, 2.0 / s)
}

/// `(dp/dk, dq/dk)`.
pub fn spectral_derivatives(k: f64) -> (f64, f64) {
    let s = 1.0 + k * k;
    let d = 4.0 * k / (s * s);
    (d, -d)
}

/// Decay rate of the tail solution, `sqrt(p q) = 2k/(1+k^2)`; equals 1 at
/// `k = 1`.
pub fn tail_decay(k: f64) -> f64 {
    2.0 * k / (1.0 + k * k)
}

/// Where an asymptotic form applies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    /// `u ~ A x [1 + P Q x^2 / 6]`, `v ~ A Q x^2 / 3` with
    /// `P = p(k) - phi(0)`, `Q = q(k) + phi(0)`.
    Origin { amplitude: f64 },
    /// `u ~ k A1 e^{-kappa x}`, `v ~ -A1 e^{-kappa x}`, so `u/v = -k`.
    Tail { amplitude: f64 },
}

/// Leading asymptotic pair at one end of the interval.
pub fn boundary_asymptotics(boundary: Boundary, k: f64, phi_at_0: f64, x: f64) -> (f64, f64) {
    let (p, q) = spectral_terms(k);
    match boundary {
        Boundary::Origin { amplitude } => {
            let big_p = p - phi_at_0;
            let big_q = q + phi_at_0;
            (
                amplitude * x * (1.0 + big_p * big_q * x * x / 6.0),
                amplitude * big_q * x * x / 3.0,
            )
        }
        Boundary::Tail { amplitude } => {
            let e = (-tail_decay(k) * x).exp();
            (k * amplitude * e, -amplitude * e)
        }
    }
}

/// Coefficient `c` of the origin relation `v = c x u`.
pub fn origin_ratio(k: f64, phi_at_0: f64) -> f64 {
    (spectral_terms(k).1 + phi_at_0) / 3.0
}
