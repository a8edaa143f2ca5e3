//! Kinetic and potential integrals, the energy report and the coupling
//! relations built on them.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::grid::Grid;
use crate::model::{density, SelfField, SpinorPair};

/// Pairs whose norm is further than this from 1 are rejected by
/// [`kinetic_t`].
pub const NORM_TOLERANCE: f64 = 1e-6;

/// `T = int [(u'v - v'u) - 2uv/x + u^2 - v^2] dx` for a unit-norm pair.
pub fn kinetic_t(pair: &SpinorPair, grid: &Grid) -> Result<f64> {
    let norm = pair.norm(grid)?;
    if (norm - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::Unnormalized { norm });
    }
    Ok(kinetic_t_unchecked(pair, grid))
}

/// [`kinetic_t`] without the norm precondition. Shapes are still checked by
/// the caller's responsibility; mismatched lengths panic.
pub fn kinetic_t_unchecked(pair: &SpinorPair, grid: &Grid) -> f64 {
    let du = grid.differentiate_unchecked(&pair.u);
    let dv = grid.differentiate_unchecked(&pair.v);
    let integrand: Vec<f64> = (0..grid.len())
        .map(|i| {
            let (u, v, x) = (pair.u[i], pair.v[i], grid.x()[i]);
            (du[i] * v - dv[i] * u) - 2.0 * u * v / x + u * u - v * v
        })
        .collect();
    grid.integrate_unchecked(&integrand)
}

/// `Pi = int phi0 (u^2 + v^2) dx`.
pub fn potential_pi(pair: &SpinorPair, field: &SelfField, grid: &Grid) -> Result<f64> {
    pair.check(grid)?;
    check_len(grid.len(), field.phi0.len())?;
    let rho = density(pair).rho;
    let integrand: Vec<f64> = rho.iter().zip(&field.phi0).map(|(r, p)| r * p).collect();
    Ok(grid.integrate_unchecked(&integrand))
}

/// `<x> = int x rho dx`.
pub fn localization_radius(pair: &SpinorPair, grid: &Grid) -> Result<f64> {
    pair.check(grid)?;
    let rho = density(pair).rho;
    let integrand: Vec<f64> = rho.iter().zip(grid.x()).map(|(r, x)| r * x).collect();
    Ok(grid.integrate_unchecked(&integrand))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "Pi")]
    pub pi: f64,
    pub a: f64,
    pub alpha0: f64,
    pub delta: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "E0_over_m0")]
    pub e0_over_m0: f64,
    pub e_times_e0: f64,
    pub localization_radius: f64,
}

/// Fills an [`EnergyReport`]. `E(0)/m0 = -T a / (2 alpha0)`; the radius is
/// the first moment of the pair's density.
pub fn energy_report(
    t: f64,
    pi: f64,
    a: f64,
    alpha0: f64,
    pair: &SpinorPair,
    grid: &Grid,
) -> Result<EnergyReport> {
    let c = mixing_ratio(a, alpha0)?;
    Ok(EnergyReport {
        t,
        pi,
        a,
        alpha0,
        delta: a / alpha0,
        c,
        e0_over_m0: -t * a / (2.0 * alpha0),
        e_times_e0: charge_product(a),
        localization_radius: localization_radius(pair, grid)?,
    })
}

/// `C = (alpha0 - a)/(alpha0 + a)`, defined for `|a| < alpha0`.
pub fn mixing_ratio(a: f64, alpha0: f64) -> Result<f64> {
    if !(alpha0 > 0.0) || !a.is_finite() || a.abs() >= alpha0 {
        return Err(Error::UnphysicalMixing { a, alpha0 });
    }
    Ok((alpha0 - a) / (alpha0 + a))
}

/// `delta = (1 - C)/(1 + C)`.
pub fn delta_from_c(c: f64) -> f64 {
    (1.0 - c) / (1.0 + c)
}

/// `C = (1 - delta)/(1 + delta)`; the map is its own inverse.
pub fn c_from_delta(delta: f64) -> f64 {
    (1.0 - delta) / (1.0 + delta)
}

pub fn charge_product(a: f64) -> f64 {
    4.0 * std::f64::consts::PI * a
}

/// Observed charge `e` and the product `e e0 = 4 pi a`.
pub fn charge_relation(a: f64, e0: f64) -> Result<(f64, f64)> {
    if !(e0 > 0.0 && e0.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "bare charge e0 must be positive, got {e0}"
        )));
    }
    let product = charge_product(a);
    Ok((product / e0, product))
}

/// `-T/Pi`, the coupling at which the functional is stationary.
pub fn extremum_coupling(t: f64, pi: f64) -> f64 {
    -t / pi
}
