//! Closed-form spectrum and mixing amplitudes of the moving excitation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionPoint {
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "E0")]
    pub e0: f64,
    pub e_electron: f64,
    pub e_positron: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "K1")]
    pub k1: f64,
    #[serde(rename = "Lp")]
    pub lp: f64,
    #[serde(rename = "Kp")]
    pub kp: f64,
    pub velocity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mixing {
    pub l: f64,
    pub k: f64,
    pub l1: f64,
    pub k1: f64,
    pub lp: f64,
    pub kp: f64,
}

fn check_nonnegative(name: &str, value: f64) -> Result<()> {
    if !(value >= 0.0 && value.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "{name} must be finite and nonnegative, got {value}"
        )));
    }
    Ok(())
}

/// `(+sqrt(E0^2 + P^2), -sqrt(E0^2 + P^2))`.
pub fn spectrum(e0: f64, p: f64) -> Result<(f64, f64)> {
    check_nonnegative("E0", e0)?;
    check_nonnegative("P", p)?;
    let e = e0.hypot(p);
    Ok((e, -e))
}

/// Electron amplitudes `L = P/N`, `K = (E_e - E0)/N` with
/// `N = sqrt(P^2 + (E_e - E0)^2)`; positron-branch amplitudes the same with
/// `E_e + E0` and `Kp` negative; `L1 = -K`, `K1 = L`. At `P = 0` the 0/0
/// is replaced by its limit.
pub fn mixing_coefficients(e0: f64, p: f64) -> Result<Mixing> {
    check_nonnegative("E0", e0)?;
    check_nonnegative("P", p)?;
    if e0 == 0.0 && p == 0.0 {
        return Err(Error::UndefinedState(
            "mixing amplitudes are undefined at E0 = 0, P = 0".into(),
        ));
    }
    let (l, k, lp, kp) = if p == 0.0 {
        (1.0, 0.0, 0.0, -1.0)
    } else {
        let ee = e0.hypot(p);
        // E_e - E0 written without cancellation
        let gap = p * p / (ee + e0);
        let n = p.hypot(gap);
        let sum = ee + e0;
        let np = p.hypot(sum);
        (p / n, gap / n, p / np, -sum / np)
    };
    Ok(Mixing {
        l,
        k,
        l1: -k,
        k1: l,
        lp,
        kp,
    })
}

/// `dE_e/dP = P / sqrt(E0^2 + P^2)`.
pub fn group_velocity(e0: f64, p: f64) -> Result<f64> {
    if !(e0 > 0.0 && e0.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "E0 must be positive, got {e0}"
        )));
    }
    check_nonnegative("P", p)?;
    Ok(p / e0.hypot(p))
}

pub fn point(e0: f64, p: f64) -> Result<DispersionPoint> {
    let (e_electron, e_positron) = spectrum(e0, p)?;
    let m = mixing_coefficients(e0, p)?;
    Ok(DispersionPoint {
        p,
        e0,
        e_electron,
        e_positron,
        l: m.l,
        k: m.k,
        l1: m.l1,
        k1: m.k1,
        lp: m.lp,
        kp: m.kp,
        velocity: group_velocity(e0, p)?,
    })
}

/// Evenly spaced momenta from `p_min` to `p_max` inclusive.
pub fn momentum_range(p_min: f64, p_max: f64, count: usize) -> Result<Vec<f64>> {
    check_nonnegative("P_min", p_min)?;
    check_nonnegative("P_max", p_max)?;
    if p_min > p_max || count == 0 {
        return Err(Error::InvalidInput(format!(
            "bad momentum range [{p_min}, {p_max}] with {count} points"
        )));
    }
    if count == 1 {
        return Ok(vec![p_min]);
    }
    let step = (p_max - p_min) / (count - 1) as f64;
    Ok((0..count)
        .map(|i| {
            if i + 1 == count {
                p_max
            } else {
                p_min + step * i as f64
            }
        })
        .collect())
}

pub fn table(e0: f64, momenta: &[f64]) -> Result<Vec<DispersionPoint>> {
    momenta.iter().map(|&p| point(e0, p)).collect()
}
