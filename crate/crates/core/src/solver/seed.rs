//! Self-consistent seed for the Newton polish.
//!
//! For a frozen potential the ground level is bracketed by outward
//! marching with the same box recurrence the solver uses and a node count
//! on `u`; its eigenvector becomes the next density, and potentials are
//! mixed until they stop moving. The level `eps` maps to `k` through
//! `eps = (k^2 - 1)/(k^2 + 1)`.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{density, potential_unchecked, SpinorPair};

const MIX: f64 = 0.5;
const PHI_TOLERANCE: f64 = 1e-3;
const MAX_CYCLES: usize = 200;
const SCAN_POINTS: usize = 400;
const BISECTIONS: usize = 60;
const EDGE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub pair: SpinorPair,
    pub k: f64,
    pub eps: f64,
    pub cycles: usize,
}

/// Marches `(u, v)` outward for level `eps` in potential `phi`. Returns the
/// number of sign changes of `u`, and the profile when asked.
fn march(eps: f64, phi: &[f64], grid: &Grid, keep: bool) -> (usize, Option<SpinorPair>) {
    let x = grid.x();
    let h = grid.step();
    let n = grid.len();
    let (p, q) = (1.0 + eps, 1.0 - eps);
    let mut u = x[0];
    let mut v = (q + phi[0]) / 3.0 * x[0] * x[0];
    let mut nodes = 0;
    let mut out = keep.then(|| SpinorPair {
        u: Vec::with_capacity(n),
        v: Vec::with_capacity(n),
    });
    if let Some(o) = out.as_mut() {
        o.u.push(u);
        o.v.push(v);
    }
    let hh = 0.5 * h;
    for i in 0..n - 1 {
        let (bp0, bq0) = (x[i] * (p - phi[i]), x[i] * (q + phi[i]));
        let (bp1, bq1) = (x[i + 1] * (p - phi[i + 1]), x[i + 1] * (q + phi[i + 1]));
        let r1 = (1.0 + hh) * u + hh * bp0 * v;
        let r2 = hh * bq0 * u + (1.0 - hh) * v;
        let (a11, a12, a21, a22) = (1.0 - hh, -hh * bp1, -hh * bq1, 1.0 + hh);
        let det = a11 * a22 - a12 * a21;
        let un = (r1 * a22 - a12 * r2) / det;
        let vn = (a11 * r2 - a21 * r1) / det;
        if un * u < 0.0 {
            nodes += 1;
        }
        u = un;
        v = vn;
        if let Some(o) = out.as_mut() {
            o.u.push(u);
            o.v.push(v);
        }
    }
    (nodes, out)
}

/// Lowest level in `(-1, 1)` of the frozen-potential problem, found where
/// the node count first rises above its value at `eps -> -1`.
pub fn ground_level(phi: &[f64], grid: &Grid) -> Result<f64> {
    let mut lo = -1.0 + EDGE;
    let (base, _) = march(lo, phi, grid, false);
    let mut hi = None;
    for j in 1..SCAN_POINTS {
        let e = -1.0 + EDGE + (2.0 - 2.0 * EDGE) * j as f64 / (SCAN_POINTS - 1) as f64;
        if march(e, phi, grid, false).0 > base {
            hi = Some(e);
            break;
        }
        lo = e;
    }
    let mut hi = hi.ok_or_else(|| Error::Seed("no bound level in (-1, 1)".into()))?;
    for _ in 0..BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if march(mid, phi, grid, false).0 > base {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Normalised eigenvector at level `eps`: the marched profile up to the
/// amplitude minimum past its first maximum, continued by the decaying
/// exponential. Past that minimum the march is dominated by the growing
/// solution, which rounding alone excites to order one over the interval.
fn eigenvector(eps: f64, phi: &[f64], grid: &Grid) -> Result<SpinorPair> {
    let (_, pair) = march(eps, phi, grid, true);
    let mut pair = pair.expect("profile requested");
    let amp: Vec<f64> = pair
        .u
        .iter()
        .zip(&pair.v)
        .map(|(u, v)| u.hypot(*v))
        .collect();
    let peak = amp
        .windows(2)
        .position(|w| w[1] < w[0])
        .unwrap_or(amp.len() - 1);
    let cut = peak + argmin(&amp[peak..]);
    let kappa = (1.0 - eps * eps).sqrt();
    let x = grid.x();
    let (uc, vc) = (pair.u[cut], pair.v[cut]);
    for i in cut..grid.len() {
        let e = (-kappa * (x[i] - x[cut])).exp();
        pair.u[i] = uc * e;
        pair.v[i] = vc * e;
    }
    let ipeak = argmax(&pair.u.iter().map(|u| u.abs()).collect::<Vec<_>>());
    if pair.u[ipeak] < 0.0 {
        pair.scale(-1.0);
    }
    pair.normalize(grid)?;
    Ok(pair)
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |b, (i, &x)| if x > b.1 { (i, x) } else { b },
        )
        .0
}

fn argmin(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |b, (i, &x)| if x < b.1 { (i, x) } else { b },
        )
        .0
}

/// Self-consistent ground state at coupling `a` starting from the density
/// of `init`.
pub fn seed_state(a: f64, init: &SpinorPair, grid: &Grid) -> Result<SeedOutcome> {
    init.check(grid)?;
    let scaled = |pair: &SpinorPair| -> Vec<f64> {
        potential_unchecked(&density(pair).rho, grid)
            .into_iter()
            .map(|p| a * p)
            .collect()
    };
    let mut phi = scaled(init);
    for cycle in 1..=MAX_CYCLES {
        let eps = ground_level(&phi, grid)?;
        let pair = eigenvector(eps, &phi, grid)?;
        let next = scaled(&pair);
        let change = phi
            .iter()
            .zip(&next)
            .fold(0.0_f64, |m, (p, q)| m.max((p - q).abs()));
        if change < PHI_TOLERANCE {
            let k = ((1.0 + eps) / (1.0 - eps)).sqrt();
            return Ok(SeedOutcome {
                pair,
                k,
                eps,
                cycles: cycle,
            });
        }
        for (p, q) in phi.iter_mut().zip(&next) {
            *p = (1.0 - MIX) * *p + MIX * q;
        }
    }
    Err(Error::Seed(format!(
        "potential still moving after {MAX_CYCLES} cycles"
    )))
}
