//! Root-find over the coupling `a` for `k(a)^2 = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{energy_report, kinetic_t, potential_pi, EnergyReport};
use crate::grid::Grid;
use crate::model::{trial_functions, SpinorPair};
use crate::solver::{solve_fixed_a, IterationState, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanConfig {
    pub a_start: f64,
    pub delta_a: f64,
    pub tol_k: f64,
    pub max_evals: usize,
    /// Largest single change of `a` a secant step may take.
    pub max_step: f64,
    /// Start each inner solve from the previous converged state rather
    /// than from the trial pair.
    pub warm_start: bool,
    pub trial_b: f64,
    pub alpha0: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            a_start: -3.3,
            delta_a: 0.05,
            tol_k: 1e-6,
            max_evals: 40,
            max_step: 0.5,
            warm_start: true,
            trial_b: 1.0,
            alpha0: 10.0,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !self.a_start.is_finite() {
            return bad("a_start must be finite");
        }
        if !(self.delta_a.is_finite() && self.delta_a != 0.0) {
            return bad("delta_a must be finite and nonzero");
        }
        if !(self.tol_k > 0.0) {
            return bad("tol_k must be positive");
        }
        if self.max_evals < 2 {
            return bad("max_evals must be at least 2");
        }
        if !(self.max_step > 0.0) {
            return bad("max_step must be positive");
        }
        if !(self.trial_b > 0.0 && self.trial_b.is_finite()) {
            return bad("trial_b must be positive");
        }
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return bad("alpha0 must be positive");
        }
        Ok(())
    }
}

/// One inner solve as seen by the scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KSample {
    pub a: f64,
    pub k: f64,
    pub iterations: usize,
    pub residual: f64,
}

impl KSample {
    pub fn g(&self) -> f64 {
        self.k * self.k - 1.0
    }
}

/// Anything that maps a coupling to `k(a)`.
pub trait CouplingEvaluator {
    fn evaluate(&mut self, a: f64) -> Result<KSample>;
}

impl<F: FnMut(f64) -> Result<KSample>> CouplingEvaluator for F {
    fn evaluate(&mut self, a: f64) -> Result<KSample> {
        self(a)
    }
}

#[derive(Debug, Clone)]
pub struct RootOutcome {
    pub a0: f64,
    pub history: Vec<KSample>,
    /// False when the sampled `k` values are not ordered with `a`.
    pub monotone: bool,
}

/// Consecutive failed evaluations tolerated before giving up.
const MAX_FAILED_HALVINGS: usize = 6;

/// Secant iteration on `g(a) = k(a)^2 - 1` with a bisection fallback once
/// a sign change brackets the root. A failed evaluation pulls the trial
/// point halfway back toward the last good coupling, or toward `a = 0`
/// before any evaluation has succeeded.
pub fn find_root<E: CouplingEvaluator>(cfg: &ScanConfig, eval: &mut E) -> Result<RootOutcome> {
    cfg.validate()?;
    let mut history: Vec<KSample> = Vec::new();
    let mut evals = 0usize;
    let fail = |reason: String, history: &[KSample]| Error::ScanFailure {
        reason,
        history: history.to_vec(),
    };

    // With no good coupling yet, a failed start retreats toward the
    // decoupled limit a = 0.
    let mut target = cfg.a_start;
    let mut failures = 0;
    let first = loop {
        evals += 1;
        match eval.evaluate(target) {
            Ok(s) => break s,
            Err(e) => {
                failures += 1;
                if failures > MAX_FAILED_HALVINGS || evals >= cfg.max_evals {
                    return Err(fail(
                        format!("inner solve failed from a_start = {}: {e}", cfg.a_start),
                        &history,
                    ));
                }
                target *= 0.5;
            }
        }
    };
    history.push(first);
    if first.g().abs() <= cfg.tol_k {
        return Ok(finish(first.a, history));
    }

    let mut prev = first;
    target = first.a + cfg.delta_a;
    let mut bracket: Option<(KSample, KSample)> = None;
    loop {
        let mut failures = 0;
        let cur = loop {
            if evals >= cfg.max_evals {
                return Err(fail(format!("no root after {evals} evaluations"), &history));
            }
            evals += 1;
            match eval.evaluate(target) {
                Ok(s) => break s,
                Err(e) => {
                    failures += 1;
                    if failures > MAX_FAILED_HALVINGS {
                        return Err(fail(
                            format!("inner solve keeps failing near a = {target}: {e}"),
                            &history,
                        ));
                    }
                    target = 0.5 * (target + prev.a);
                }
            }
        };
        history.push(cur);
        if cur.g().abs() <= cfg.tol_k {
            return Ok(finish(cur.a, history));
        }

        if cur.g().signum() != prev.g().signum() {
            bracket = Some(order(prev, cur));
        } else if let Some((lo, hi)) = bracket {
            bracket = Some(if cur.g().signum() == lo.g().signum() {
                (cur, hi)
            } else {
                (lo, cur)
            });
        }

        let dg = cur.g() - prev.g();
        let mut next = if dg != 0.0 {
            cur.a - cur.g() * (cur.a - prev.a) / dg
        } else {
            f64::NAN
        };
        if !next.is_finite() {
            next = cur.a + (cur.a - prev.a);
        }
        let step = (next - cur.a).clamp(-cfg.max_step, cfg.max_step);
        next = cur.a + step;
        if let Some((lo, hi)) = bracket {
            let (l, h) = (lo.a.min(hi.a), lo.a.max(hi.a));
            if !(next > l && next < h) {
                next = 0.5 * (lo.a + hi.a);
            }
        }
        prev = cur;
        target = next;
    }
}

fn order(a: KSample, b: KSample) -> (KSample, KSample) {
    if a.a <= b.a {
        (a, b)
    } else {
        (b, a)
    }
}

fn finish(a0: f64, history: Vec<KSample>) -> RootOutcome {
    let monotone = is_monotone(&history);
    RootOutcome {
        a0,
        history,
        monotone,
    }
}

/// Whether `k` is strictly ordered with `a` across the samples.
pub fn is_monotone(history: &[KSample]) -> bool {
    let mut s: Vec<(f64, f64)> = history.iter().map(|h| (h.a, h.k)).collect();
    s.sort_by(|x, y| x.0.total_cmp(&y.0));
    s.dedup_by(|x, y| x.0 == y.0);
    let up = s.windows(2).all(|w| w[1].1 > w[0].1);
    let down = s.windows(2).all(|w| w[1].1 < w[0].1);
    up || down
}

/// Inner solves chained by warm starts, with a cold restart from the trial
/// pair when a warm start fails.
pub struct SolverEvaluator<'g> {
    grid: &'g Grid,
    solver: SolverConfig,
    trial: SpinorPair,
    warm_start: bool,
    last: Option<IterationState>,
}

impl<'g> SolverEvaluator<'g> {
    pub fn new(
        grid: &'g Grid,
        solver: SolverConfig,
        trial_b: f64,
        warm_start: bool,
    ) -> Result<Self> {
        let mut trial = trial_functions(trial_b, grid)?;
        trial.normalize(grid)?;
        Ok(Self {
            grid,
            solver,
            trial,
            warm_start,
            last: None,
        })
    }

    pub fn last(&self) -> Option<&IterationState> {
        self.last.as_ref()
    }

    pub fn into_last(self) -> Option<IterationState> {
        self.last
    }
}

impl CouplingEvaluator for SolverEvaluator<'_> {
    fn evaluate(&mut self, a: f64) -> Result<KSample> {
        let warm = self.last.as_ref().filter(|_| self.warm_start);
        let solved = match warm {
            Some(w) => solve_fixed_a(a, &w.pair, w.k, &self.solver, self.grid)
                .or_else(|_| solve_fixed_a(a, &self.trial, 1.0, &self.solver, self.grid)),
            None => solve_fixed_a(a, &self.trial, 1.0, &self.solver, self.grid),
        }?;
        let sample = KSample {
            a,
            k: solved.k,
            iterations: solved.iteration,
            residual: solved.residual_norm,
        };
        self.last = Some(solved);
        Ok(sample)
    }
}

#[derive(Debug, Clone)]
pub struct ScanResult {
    pub a0: f64,
    pub solution: IterationState,
    pub k_history: Vec<KSample>,
    pub report: EnergyReport,
    pub monotone: bool,
}

/// Locates `a0` with `|k(a0)^2 - 1| <= tol_k`.
pub fn find_a0(cfg: &ScanConfig, solver: &SolverConfig, grid: &Grid) -> Result<ScanResult> {
    cfg.validate()?;
    solver.validate()?;
    let mut eval = SolverEvaluator::new(grid, solver.clone(), cfg.trial_b, cfg.warm_start)?;
    let root = find_root(cfg, &mut eval)?;
    let solution = eval
        .into_last()
        .expect("a successful root-find evaluated at least once");
    let t = kinetic_t(&solution.pair, grid)?;
    let pi = potential_pi(&solution.pair, &solution.field, grid)?;
    let report = energy_report(t, pi, root.a0, cfg.alpha0, &solution.pair, grid)?;
    Ok(ScanResult {
        a0: root.a0,
        solution,
        k_history: root.history,
        report,
        monotone: root.monotone,
    })
}

/// `|a0 + T/Pi| / |a0|` from the converged profiles.
pub fn verify_extremum(result: &ScanResult, grid: &Grid) -> Result<f64> {
    let s = &result.solution;
    let t = kinetic_t(&s.pair, grid)?;
    let pi = potential_pi(&s.pair, &s.field, grid)?;
    Ok(extremum_mismatch(result.a0, t, pi))
}

pub fn extremum_mismatch(a0: f64, t: f64, pi: f64) -> f64 {
    (a0 + t / pi).abs() / a0.abs()
}

/// Independent cold-started solves at each coupling, run concurrently.
/// Results come back in the order of `couplings`.
pub fn map_k(
    couplings: &[f64],
    solver: &SolverConfig,
    grid: &Grid,
    trial_b: f64,
) -> Vec<Result<KSample>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = couplings
            .iter()
            .map(|&a| {
                scope.spawn(move || {
                    SolverEvaluator::new(grid, solver.clone(), trial_b, false)?.evaluate(a)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::Divergence("worker panicked".into())))
            })
            .collect()
    })
}
