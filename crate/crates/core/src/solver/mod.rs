//! Damped Newton (continuous-analog) iteration at fixed coupling `a`.
//!
//! Each step freezes `phi`, solves two linear boundary-value problems by a
//! box scheme in theta, picks the eigenvalue correction `mu` that keeps the
//! norm stationary to first order, and renormalises exactly.

mod seed;

pub use seed::{ground_level, seed_state, SeedOutcome};

use serde::{Deserialize, Serialize};

use crate::banded::{BandLu, BandMatrix};
use crate::error::{check_len, Error, Result};
use crate::grid::Grid;
use crate::model::{origin_ratio, spectral_derivatives, spectral_terms, SelfField, SpinorPair};

/// How a solve at fixed `a` gets its first iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SeedPolicy {
    /// Seed when the initial residual exceeds `warm_threshold`, and fall
    /// back to seeding when a warm start fails.
    #[default]
    Auto,
    Always,
    Never,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub tau: f64,
    pub tol_residual: f64,
    pub tol_norm: f64,
    pub max_iterations: usize,
    pub seed: SeedPolicy,
    pub warm_threshold: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tau: 0.5,
            tol_residual: 1e-8,
            tol_norm: 1e-10,
            max_iterations: 500,
            seed: SeedPolicy::Auto,
            warm_threshold: 0.2,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "tau must lie in (0, 1], got {}",
                self.tau
            )));
        }
        if !(self.tol_residual > 0.0) || !(self.tol_norm > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "max_iterations must be positive".into(),
            ));
        }
        if !(self.warm_threshold > 0.0) {
            return Err(Error::InvalidConfig(
                "warm_threshold must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationState {
    pub pair: SpinorPair,
    pub k: f64,
    pub field: SelfField,
    pub a: f64,
    pub residual_norm: f64,
    pub norm_error: f64,
    pub iteration: usize,
}

impl IterationState {
    /// Builds a consistent state: `phi` from the pair's own density and the
    /// residual and norm fields refreshed.
    pub fn new(pair: SpinorPair, k: f64, a: f64, grid: &Grid) -> Result<Self> {
        pair.check(grid)?;
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidInput(format!("k must be positive, got {k}")));
        }
        if !a.is_finite() {
            return Err(Error::InvalidInput("coupling a is not finite".into()));
        }
        let field = SelfField::from_pair(&pair, a, grid)?;
        let norm = pair.norm(grid)?;
        let mut state = Self {
            pair,
            k,
            field,
            a,
            residual_norm: 0.0,
            norm_error: (norm - 1.0).abs(),
            iteration: 0,
        };
        state.residual_norm = residual_max(&state, grid);
        Ok(state)
    }

    pub fn sign_changes(&self) -> usize {
        self.pair.u_sign_changes()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionSet {
    pub psi: Vec<f64>,
    pub psi1: Vec<f64>,
    pub psi_mu: Vec<f64>,
    pub psi1_mu: Vec<f64>,
    /// NaN until [`mu_update`] has been applied.
    pub mu: f64,
    /// Renormalisation amplitude of the step built from this set; NaN
    /// until [`CorrectionSet::with_amplitude`] records it.
    pub a_norm: f64,
}

impl CorrectionSet {
    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_amplitude(mut self, a_norm: f64) -> Self {
        self.a_norm = a_norm;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub k: f64,
    pub residual_norm: f64,
    pub mu: f64,
    pub tau: f64,
}

/// Theta-form box residuals on each interval:
/// `(u_{i+1}-u_i)/h - <u + x P v>` and `(v_{i+1}-v_i)/h - <-v + x Q u>`,
/// `<.>` the interval average, `P = p(k) - phi`, `Q = q(k) + phi`.
fn box_residual(pair: &SpinorPair, k: f64, phi: &[f64], grid: &Grid) -> (Vec<f64>, Vec<f64>) {
    let (p, q) = spectral_terms(k);
    let x = grid.x();
    let h = grid.step();
    let (u, v) = (&pair.u, &pair.v);
    let n = grid.len();
    let g = |i: usize| u[i] + x[i] * (p - phi[i]) * v[i];
    let f = |i: usize| -v[i] + x[i] * (q + phi[i]) * u[i];
    let mut ru = Vec::with_capacity(n - 1);
    let mut rv = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        ru.push((u[i + 1] - u[i]) / h - 0.5 * (g(i) + g(i + 1)));
        rv.push((v[i + 1] - v[i]) / h - 0.5 * (f(i) + f(i + 1)));
    }
    (ru, rv)
}

/// Residuals of
/// `u' - u/x - (p(k) - phi) v` and `v' + v/x - (q(k) + phi) u`
/// at the interval midpoints, using the derivative implied by the box
/// scheme (theta residual divided by the midpoint radius). Length `n - 1`.
pub fn ode_residual(state: &IterationState, grid: &Grid) -> Result<(Vec<f64>, Vec<f64>)> {
    state.pair.check(grid)?;
    check_len(grid.len(), state.field.phi.len())?;
    let (mut ru, mut rv) = box_residual(&state.pair, state.k, &state.field.phi, grid);
    for i in 0..ru.len() {
        let xm = grid.x_mid(i);
        ru[i] /= xm;
        rv[i] /= xm;
    }
    Ok((ru, rv))
}

fn residual_max(state: &IterationState, grid: &Grid) -> f64 {
    let (ru, rv) = box_residual(&state.pair, state.k, &state.field.phi, grid);
    (0..ru.len()).fold(0.0_f64, |m, i| {
        let xm = grid.x_mid(i);
        m.max(ru[i].abs() / xm).max(rv[i].abs() / xm)
    })
}

/// Jacobian of the discrete system with respect to `(u, v)` at frozen
/// `phi`, unknowns interleaved `[u0, v0, u1, v1, ...]`. Row 0 is the origin
/// relation `v - c x u`, the last row the tail relation `u + k v`.
pub(crate) fn assemble(k: f64, phi: &[f64], grid: &Grid) -> BandMatrix {
    let n = grid.len();
    let dim = 2 * n;
    let (p, q) = spectral_terms(k);
    let x = grid.x();
    let h = grid.step();
    let mut m = BandMatrix::zeros(dim, 2, 2);
    m.set(0, 0, -origin_ratio(k, phi[0]) * x[0]);
    m.set(0, 1, 1.0);
    for i in 0..n - 1 {
        let (r, c) = (2 * i + 1, 2 * i);
        let big_p = |j: usize| x[j] * (p - phi[j]);
        let big_q = |j: usize| x[j] * (q + phi[j]);
        m.set(r, c, -1.0 / h - 0.5);
        m.set(r, c + 1, -0.5 * big_p(i));
        m.set(r, c + 2, 1.0 / h - 0.5);
        m.set(r, c + 3, -0.5 * big_p(i + 1));
        m.set(r + 1, c, -0.5 * big_q(i));
        m.set(r + 1, c + 1, -1.0 / h + 0.5);
        m.set(r + 1, c + 2, -0.5 * big_q(i + 1));
        m.set(r + 1, c + 3, 1.0 / h + 0.5);
    }
    m.set(dim - 1, dim - 2, 1.0);
    m.set(dim - 1, dim - 1, k);
    m
}

fn boundary_residuals(pair: &SpinorPair, k: f64, phi0_origin: f64, x0: f64) -> (f64, f64) {
    let n = pair.len();
    (
        pair.v[0] - origin_ratio(k, phi0_origin) * x0 * pair.u[0],
        pair.u[n - 1] + k * pair.v[n - 1],
    )
}

fn split(y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (
        y.iter().step_by(2).copied().collect(),
        y.iter().skip(1).step_by(2).copied().collect(),
    )
}

/// Right-hand sides `-F` and `-dF/dk` of the two linear problems.
fn right_hand_sides(state: &IterationState, grid: &Grid) -> (Vec<f64>, Vec<f64>) {
    let n = grid.len();
    let x = grid.x();
    let (u, v) = (&state.pair.u, &state.pair.v);
    let phi = &state.field.phi;
    let (ru, rv) = box_residual(&state.pair, state.k, phi, grid);
    let (bc0, bc1) = boundary_residuals(&state.pair, state.k, phi[0], x[0]);
    let (dp, dq) = spectral_derivatives(state.k);

    let mut rhs = vec![0.0; 2 * n];
    let mut rhs_mu = vec![0.0; 2 * n];
    rhs[0] = -bc0;
    rhs_mu[0] = dq / 3.0 * x[0] * u[0];
    for i in 0..n - 1 {
        rhs[2 * i + 1] = -ru[i];
        rhs[2 * i + 2] = -rv[i];
        rhs_mu[2 * i + 1] = 0.5 * dp * (x[i] * v[i] + x[i + 1] * v[i + 1]);
        rhs_mu[2 * i + 2] = 0.5 * dq * (x[i] * u[i] + x[i + 1] * u[i + 1]);
    }
    rhs[2 * n - 1] = -bc1;
    rhs_mu[2 * n - 1] = -v[n - 1];
    (rhs, rhs_mu)
}

fn factorize(state: &IterationState, grid: &Grid) -> Result<BandLu> {
    assemble(state.k, &state.field.phi, grid).factorize()
}

/// Solves for `(psi, psi1)` driven by the current residual and
/// `(psi_mu, psi1_mu)` driven by the `k`-derivative of the equations, both
/// against the same frozen-`phi` Jacobian.
pub fn solve_corrections(state: &IterationState, grid: &Grid) -> Result<CorrectionSet> {
    state.pair.check(grid)?;
    check_len(grid.len(), state.field.phi.len())?;
    let lu = factorize(state, grid)?;
    let (mut rhs, mut rhs_mu) = right_hand_sides(state, grid);
    lu.solve_in_place(&mut rhs);
    lu.solve_in_place(&mut rhs_mu);
    if rhs.iter().chain(&rhs_mu).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateLinearization);
    }
    let (psi, psi1) = split(&rhs);
    let (psi_mu, psi1_mu) = split(&rhs_mu);
    Ok(CorrectionSet {
        psi,
        psi1,
        psi_mu,
        psi1_mu,
        mu: f64::NAN,
        a_norm: f64::NAN,
    })
}

/// Smallest `|I_mu|` accepted by [`mu_update`].
pub const MIN_OVERLAP: f64 = 1e-14;

/// `mu = -I_s / I_mu` with `I_s = int (u psi + v psi1)` and
/// `I_mu = int (u psi_mu + v psi1_mu)`.
pub fn mu_update(state: &IterationState, corr: &CorrectionSet, grid: &Grid) -> Result<f64> {
    state.pair.check(grid)?;
    for len in [
        corr.psi.len(),
        corr.psi1.len(),
        corr.psi_mu.len(),
        corr.psi1_mu.len(),
    ] {
        check_len(grid.len(), len)?;
    }
    let (u, v) = (&state.pair.u, &state.pair.v);
    let overlap = |a: &[f64], b: &[f64]| {
        let f: Vec<f64> = (0..grid.len()).map(|i| u[i] * a[i] + v[i] * b[i]).collect();
        grid.integrate_unchecked(&f)
    };
    let i_s = overlap(&corr.psi, &corr.psi1);
    let i_mu = overlap(&corr.psi_mu, &corr.psi1_mu);
    if !(i_mu.abs() >= MIN_OVERLAP) {
        return Err(Error::StalledUpdate { i_mu });
    }
    Ok(-i_s / i_mu)
}

/// Smallest damping step tried before a step is declared divergent.
pub const MIN_TAU: f64 = 1e-6;

/// One damped update
/// `u <- A (u + tau (psi + mu psi_mu))`, `k <- k + tau mu`, with `A` the
/// exact renormalisation. A candidate with `k <= 0` or non-finite values is
/// rejected and retried at half the step.
pub fn newton_step(
    state: &IterationState,
    corr: &CorrectionSet,
    tau: f64,
    grid: &Grid,
) -> Result<StepOutcome> {
    let mu = corr.mu;
    if !mu.is_finite() {
        return Err(Error::Divergence(format!("eigenvalue correction is {mu}")));
    }
    let mut tau = tau;
    while tau >= MIN_TAU {
        if let Some((next, a_norm)) = try_step(state, corr, tau, grid)? {
            return Ok(StepOutcome {
                state: next,
                tau,
                a_norm,
            });
        }
        tau *= 0.5;
    }
    Err(Error::Divergence(format!(
        "step rejected down to tau = {tau:e} (k = {}, mu = {mu:e})",
        state.k
    )))
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: IterationState,
    /// Damping actually used after any halving.
    pub tau: f64,
    /// Renormalisation amplitude `A`.
    pub a_norm: f64,
}

fn try_step(
    state: &IterationState,
    corr: &CorrectionSet,
    tau: f64,
    grid: &Grid,
) -> Result<Option<(IterationState, f64)>> {
    let mu = corr.mu;
    let k = state.k + tau * mu;
    if !(k > 0.0 && k.is_finite()) {
        return Ok(None);
    }
    let n = grid.len();
    let u: Vec<f64> = (0..n)
        .map(|i| state.pair.u[i] + tau * (corr.psi[i] + mu * corr.psi_mu[i]))
        .collect();
    let v: Vec<f64> = (0..n)
        .map(|i| state.pair.v[i] + tau * (corr.psi1[i] + mu * corr.psi1_mu[i]))
        .collect();
    if u.iter().chain(&v).any(|x| !x.is_finite()) {
        return Ok(None);
    }
    let mut pair = SpinorPair { u, v };
    let norm = grid.integrate_unchecked(&crate::model::density(&pair).rho);
    if !(norm > 0.0 && norm.is_finite()) {
        return Ok(None);
    }
    let a_norm = norm.sqrt().recip();
    pair.scale(a_norm);
    let mut next = IterationState::new(pair, k, state.a, grid)?;
    if !next.residual_norm.is_finite() {
        return Ok(None);
    }
    next.iteration = state.iteration + 1;
    Ok(Some((next, a_norm)))
}

/// Result of a traced solve.
#[derive(Debug, Clone)]
pub struct Solved {
    pub state: IterationState,
    pub trace: Vec<TraceRow>,
    /// Whether the seed phase ran before the Newton polish.
    pub seeded: bool,
}

/// Starting pairs within this distance of unit norm are rescaled exactly;
/// sampling a normalized analytic pair on the grid is only second-order
/// accurate.
pub const INIT_NORM_SLACK: f64 = 1e-3;

/// Solves at coupling `a` from `init`, `k_init`; see [`solve_fixed_a_traced`].
pub fn solve_fixed_a(
    a: f64,
    init: &SpinorPair,
    k_init: f64,
    cfg: &SolverConfig,
    grid: &Grid,
) -> Result<IterationState> {
    solve_fixed_a_traced(a, init, k_init, cfg, grid).map(|s| s.state)
}

/// Iterates to `residual_norm < tol_residual` and `|mu| < tol_residual`.
/// Far from a solution (per [`SeedPolicy`]) the start is first replaced by
/// a self-consistent ground state of the frozen-potential problem. The
/// converged `u` must be nodeless.
pub fn solve_fixed_a_traced(
    a: f64,
    init: &SpinorPair,
    k_init: f64,
    cfg: &SolverConfig,
    grid: &Grid,
) -> Result<Solved> {
    cfg.validate()?;
    let norm = init.norm(grid)?;
    if (norm - 1.0).abs() > INIT_NORM_SLACK {
        return Err(Error::Unnormalized { norm });
    }
    let mut init = init.clone();
    init.normalize(grid)?;
    let start = IterationState::new(init, k_init, a, grid)?;
    let warm_ok = start.residual_norm <= cfg.warm_threshold;
    match cfg.seed {
        SeedPolicy::Never => polish(start, cfg, grid, false),
        SeedPolicy::Always => polish(seeded(&start, grid)?, cfg, grid, true),
        SeedPolicy::Auto if !warm_ok => polish(seeded(&start, grid)?, cfg, grid, true),
        SeedPolicy::Auto => match polish(start.clone(), cfg, grid, false) {
            Ok(s) => Ok(s),
            Err(Error::InvalidConfig(m)) => Err(Error::InvalidConfig(m)),
            Err(_) => polish(seeded(&start, grid)?, cfg, grid, true),
        },
    }
}

fn seeded(start: &IterationState, grid: &Grid) -> Result<IterationState> {
    let out = seed_state(start.a, &start.pair, grid)?;
    IterationState::new(out.pair, out.k, start.a, grid)
}

fn polish(
    mut state: IterationState,
    cfg: &SolverConfig,
    grid: &Grid,
    seeded: bool,
) -> Result<Solved> {
    let mut trace = Vec::new();
    let mut history = Vec::new();
    let mut tau = cfg.tau;
    let mut accepted_since_cut = 0usize;
    loop {
        let corr = solve_corrections(&state, grid)?;
        let mu = mu_update(&state, &corr, grid)?;
        let corr = corr.with_mu(mu);
        history.push(state.residual_norm);
        trace.push(TraceRow {
            iteration: state.iteration,
            k: state.k,
            residual_norm: state.residual_norm,
            mu,
            tau,
        });
        if state.residual_norm < cfg.tol_residual && mu.abs() < cfg.tol_residual {
            break;
        }
        if state.iteration >= cfg.max_iterations {
            return Err(Error::NonConvergence {
                iterations: state.iteration,
                residual_history: history,
            });
        }
        let StepOutcome {
            state: mut next,
            tau: used,
            ..
        } = newton_step(&state, &corr, tau, grid)?;
        if used < tau {
            tau = used;
            accepted_since_cut = 0;
        } else if tau < cfg.tau {
            accepted_since_cut += 1;
            if accepted_since_cut >= 2 {
                tau = cfg.tau;
                accepted_since_cut = 0;
            }
        }
        if next.norm_error > cfg.tol_norm {
            return Err(Error::Divergence(format!(
                "norm drifted by {:e} after renormalisation",
                next.norm_error
            )));
        }
        next.iteration = state.iteration + 1;
        state = next;
    }
    let sign_changes = state.sign_changes();
    if sign_changes > 0 {
        return Err(Error::WrongBranch { sign_changes });
    }
    Ok(Solved {
        state,
        trace,
        seeded,
    })
}
