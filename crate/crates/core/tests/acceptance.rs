//! Acceptance suite: one test per criterion, named `cNN_*`.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use sle_core::dispersion::{group_velocity, mixing_coefficients, spectrum};
use sle_core::error::exit;
use sle_core::functional::{charge_product, localization_radius};
use sle_core::io::{k_history_csv, profiles_csv, RunConfig, Snapshot};
use sle_core::scan::{find_a0, verify_extremum, ScanConfig, ScanResult};
use sle_core::solver::{solve_fixed_a, SeedPolicy, SolverConfig};
use sle_core::{kinetic_t, potential_pi, trial_functions, Error, Grid, GridSpec, SelfField};

fn default_run() -> &'static (ScanResult, Grid, Duration) {
    static RUN: OnceLock<(ScanResult, Grid, Duration)> = OnceLock::new();
    RUN.get_or_init(|| {
        let cfg = RunConfig::default();
        let grid = cfg.grid.build().unwrap();
        let t0 = Instant::now();
        let r = find_a0(&cfg.scan, &cfg.solver, &grid).expect("default scan");
        (r, grid, t0.elapsed())
    })
}

fn within(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol
}

#[test]
fn c01_soliton_coupling() {
    let (r, _, elapsed) = default_run();
    let ok = within(r.a0, -3.296, 0.005) && elapsed.as_secs_f64() < 60.0;
    assert!(
        ok,
        "a0 = {:.6} (target -3.296 +- 0.005), scan took {:.2?}",
        r.a0, elapsed
    );
}

#[test]
fn c02_kinetic_integral() {
    let (r, _, _) = default_run();
    assert!(
        within(r.report.t, 0.749, 0.003),
        "T = {:.6} (target 0.749 +- 0.003)",
        r.report.t
    );
}

#[test]
fn c03_intermediate_anchor() {
    let grid = GridSpec::standard().build().unwrap();
    let init = trial_functions(1.0, &grid).unwrap();
    let cfg = SolverConfig {
        tau: 0.5,
        ..SolverConfig::default()
    };
    match solve_fixed_a(-3.3, &init, 1.0, &cfg, &grid) {
        Ok(s) => assert!(
            within(s.k, 1.05, 0.01),
            "k(-3.3) = {:.6} (target 1.05 +- 0.01)",
            s.k
        ),
        Err(e) => panic!("k(-3.3) not obtained (target 1.05 +- 0.01): {e}"),
    }
}

#[test]
fn c04_charge_product() {
    let (r, _, _) = default_run();
    let p = charge_product(r.a0);
    assert_eq!(p, r.report.e_times_e0);
    assert!(
        within(p, -41.42, 0.07),
        "e e0 = {p:.4} (target -41.42 +- 0.07)"
    );
}

#[test]
fn c05_extremum_identity() {
    let (r, grid, _) = default_run();
    let m = verify_extremum(r, grid).unwrap();
    assert!(m < 1e-3, "|a0 + T/Pi|/|a0| = {m:e}");
}

#[test]
fn c06_solution_quality() {
    let (r, grid, _) = default_run();
    let s = &r.solution;
    let x = grid.x();
    let n = grid.len();
    let mut failed = Vec::new();

    if !(s.residual_norm < 1e-8) {
        failed.push(format!("residual {:e}", s.residual_norm));
    }
    let norm = s.pair.norm(grid).unwrap();
    if !((norm - 1.0).abs() < 1e-10) {
        failed.push(format!("norm {norm}"));
    }
    if s.sign_changes() != 0 {
        failed.push(format!("{} sign changes in u", s.sign_changes()));
    }
    let worst_tail = (0..n)
        .filter(|&i| x[i] > 10.0)
        .map(|i| (s.pair.u[i] / s.pair.v[i] + s.k).abs())
        .fold(0.0_f64, f64::max);
    if !(worst_tail < 5e-2) {
        failed.push(format!("max |u/v + k| on x > 10 is {worst_tail:.4}"));
    }
    let field = SelfField::from_pair(&s.pair, s.a, grid).unwrap();
    let coulomb = x[n - 1] * field.phi0[n - 1];
    if !((coulomb - 1.0).abs() < 1e-3) {
        failed.push(format!("x phi0(x_max) = {coulomb}"));
    }
    let radius = localization_radius(&s.pair, grid).unwrap();
    if !(radius > 0.1 && radius < 10.0) {
        failed.push(format!("<x> = {radius}"));
    }
    assert!(failed.is_empty(), "failed checks: {}", failed.join("; "));
}

#[test]
fn c07_robustness() {
    let (base, _, _) = default_run();
    let doubled = GridSpec {
        n_nodes: 4000,
        ..GridSpec::standard()
    }
    .build()
    .unwrap();
    let grid = GridSpec::standard().build().unwrap();
    let mut cases = Vec::new();
    for b in [0.7, 1.0, 1.4] {
        for tau in [0.3, 0.5, 0.8] {
            cases.push((b, tau));
        }
    }
    let (fine, perturbed) = std::thread::scope(|scope| {
        let fine = scope.spawn(|| {
            find_a0(&ScanConfig::default(), &SolverConfig::default(), &doubled).map(|r| r.a0)
        });
        let handles: Vec<_> = cases
            .iter()
            .map(|&(b, tau)| {
                let grid = &grid;
                scope.spawn(move || {
                    let scan = ScanConfig {
                        trial_b: b,
                        ..ScanConfig::default()
                    };
                    let solver = SolverConfig {
                        tau,
                        ..SolverConfig::default()
                    };
                    find_a0(&scan, &solver, grid).map(|r| r.a0)
                })
            })
            .collect();
        (
            fine.join().unwrap(),
            handles
                .into_iter()
                .map(|h| h.join().unwrap())
                .collect::<Vec<_>>(),
        )
    });
    let fine = fine.expect("doubled-grid scan");
    let shift = (fine - base.a0).abs();
    assert!(shift < 1e-3, "grid doubling moves a0 by {shift:e}");
    for ((b, tau), a0) in cases.iter().zip(perturbed) {
        let a0 = a0.unwrap_or_else(|e| panic!("b = {b}, tau = {tau}: {e}"));
        let d = (a0 - base.a0).abs();
        assert!(d < 1e-4, "b = {b}, tau = {tau} moves a0 by {d:e}");
    }
}

#[test]
fn c08_dispersion() {
    for e0 in [0.1, 1.0, 10.0] {
        for i in 0..=60 {
            let p = e0 * 10f64.powf(-3.0 + 0.1 * i as f64);
            let (ee, ep) = spectrum(e0, p).unwrap();
            assert_eq!(ep, -ee);
            // relative to E^2, the scale of both sides
            let gap = (ee * ee - p * p - e0 * e0).abs() / (ee * ee);
            assert!(gap <= 1e-12, "E0 = {e0}, P = {p}: {gap:e}");

            let m = mixing_coefficients(e0, p).unwrap();
            assert!((m.l * m.l + m.k * m.k - 1.0).abs() <= 1e-12);
            assert!((m.lp * m.lp + m.kp * m.kp - 1.0).abs() <= 1e-12);

            // five-point central difference
            let h = (1e-3 * ee).min(0.25 * p);
            let e = |q: f64| spectrum(e0, q).unwrap().0;
            let d = (e(p - 2.0 * h) - 8.0 * e(p - h) + 8.0 * e(p + h) - e(p + 2.0 * h)) / (12.0 * h);
            let v = group_velocity(e0, p).unwrap();
            assert!(
                (d - v).abs() <= 1e-8 * v,
                "E0 = {e0}, P = {p}: {d} vs {v}"
            );
        }
        let m = mixing_coefficients(e0, 0.0).unwrap();
        assert_eq!((m.l, m.k), (1.0, 0.0));
    }
}

/// Polynomial in x, lowest power first.
#[derive(Clone, Debug)]
struct Poly(Vec<f64>);

impl Poly {
    fn mul(&self, o: &Poly) -> Poly {
        let mut c = vec![0.0; self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Poly(c)
    }
    fn add(&self, o: &Poly, s: f64) -> Poly {
        let n = self.0.len().max(o.0.len());
        Poly(
            (0..n)
                .map(|i| {
                    self.0.get(i).copied().unwrap_or(0.0) + s * o.0.get(i).copied().unwrap_or(0.0)
                })
                .collect(),
        )
    }
    fn deriv(&self) -> Poly {
        Poly(
            (1..self.0.len())
                .map(|i| i as f64 * self.0[i])
                .collect::<Vec<_>>(),
        )
    }
    fn div_x(&self) -> Poly {
        assert_eq!(self.0[0], 0.0);
        Poly(self.0[1..].to_vec())
    }
}

fn fact(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// `int_0^inf x^n e^{-r x} dx`.
fn moment(n: usize, r: f64) -> f64 {
    fact(n) / r.powi(n as i32 + 1)
}

/// `int_x^inf y^n e^{-r y} dy`.
fn upper(n: usize, r: f64, x: f64) -> f64 {
    let s: f64 = (0..=n).map(|j| (r * x).powi(j as i32) / fact(j)).sum();
    moment(n, r) * (-r * x).exp() * s
}

/// `int_0^x y^n e^{-r y} dy`, by its series below `r x = 1`.
fn lower(n: usize, r: f64, x: f64) -> f64 {
    if r * x >= 1.0 {
        return moment(n, r) - upper(n, r, x);
    }
    let s: f64 = (n + 1..n + 40)
        .map(|j| (r * x).powi(j as i32) / fact(j))
        .sum();
    moment(n, r) * (-r * x).exp() * s
}

/// Closed forms for the trial pair `u = P_u e^{-bx}`, `v = P_v e^{-bx}`.
struct TrialOracle {
    pu: Poly,
    pv: Poly,
    rho: Poly,
    r: f64,
}

impl TrialOracle {
    fn new(b: f64) -> Self {
        let a = (2.0f64 / 7.0).sqrt() * b.powf(1.5);
        let bb = (2.0f64 / 3.0).sqrt() * b.powf(2.5);
        let pu = Poly(vec![0.0, a, a * b]);
        let pv = Poly(vec![0.0, 0.0, bb]);
        let rho = pu.mul(&pu).add(&pv.mul(&pv), 1.0);
        Self {
            pu,
            pv,
            rho,
            r: 2.0 * b,
        }
    }

    fn integral(&self, p: &Poly) -> f64 {
        p.0.iter()
            .enumerate()
            .map(|(n, c)| c * moment(n, self.r))
            .sum()
    }

    fn norm(&self) -> f64 {
        self.integral(&self.rho)
    }

    /// `int [(u'v - v'u) - 2uv/x + u^2 - v^2]`; the exponential factors of
    /// `u'v` and `v'u` cancel in the difference.
    fn kinetic(&self) -> f64 {
        let (pu, pv) = (&self.pu, &self.pv);
        let cross = pu.deriv().mul(pv).add(&pv.deriv().mul(pu), -1.0);
        let uv = pu.mul(pv).div_x();
        let sq = pu.mul(pu).add(&pv.mul(pv), -1.0);
        self.integral(&cross.add(&uv, -2.0).add(&sq, 1.0))
    }

    /// `phi0(x) = int_x^inf rho/y + (1/x) int_0^x rho`.
    fn phi0(&self, x: f64) -> f64 {
        let c = &self.rho.0;
        let outer: f64 = (1..c.len()).map(|m| c[m] * upper(m - 1, self.r, x)).sum();
        let inner: f64 = (0..c.len()).map(|n| c[n] * lower(n, self.r, x)).sum();
        outer + inner / x
    }

    /// `Pi = 2 int (rho(x)/x) int_0^x rho`, with the inner integral in
    /// closed form and the products of exponentials integrated exactly.
    fn pi(&self) -> f64 {
        let c = &self.rho.0;
        let r = self.r;
        let mut total = 0.0;
        for m in 1..c.len() {
            total += c[m] * moment(m - 1, r);
            for n in 0..c.len() {
                for j in 0..=n {
                    total -= c[m] * c[n] * moment(n, r) * r.powi(j as i32) / fact(j)
                        * moment(m - 1 + j, 2.0 * r);
                }
            }
        }
        2.0 * total
    }
}

#[test]
fn c09_oracle_equivalence() {
    let grid = GridSpec::standard().build().unwrap();
    let x = grid.x();
    let rel = |got: f64, want: f64| ((got - want) / want).abs();
    for b in [0.7, 1.0, 1.4] {
        let o = TrialOracle::new(b);
        assert!((o.norm() - 1.0).abs() < 1e-14, "oracle norm at b = {b}");
        let mut pair = trial_functions(b, &grid).unwrap();
        pair.normalize(&grid).unwrap();
        let field = SelfField::from_pair(&pair, -3.3, &grid).unwrap();

        let t = kinetic_t(&pair, &grid).unwrap();
        assert!(rel(t, o.kinetic()) < 1e-5, "b = {b}: T {t} vs {}", o.kinetic());
        let pi = potential_pi(&pair, &field, &grid).unwrap();
        assert!(rel(pi, o.pi()) < 1e-5, "b = {b}: Pi {pi} vs {}", o.pi());
        for i in (0..grid.len()).filter(|&i| x[i] <= 30.0).step_by(7) {
            let want = o.phi0(x[i]);
            assert!(
                rel(field.phi0[i], want) < 1e-5,
                "b = {b}: phi0({}) = {} vs {want}",
                x[i],
                field.phi0[i]
            );
        }
    }
    // the b = 1 values
    let o = TrialOracle::new(1.0);
    assert!((o.kinetic() + 21f64.sqrt() / 7.0).abs() < 1e-14);
    assert!((o.pi() - 4929.0 / 12544.0).abs() < 1e-14, "{:.17}", o.pi());
    assert!((o.phi0(1e-12) - 4.0 / 7.0).abs() < 1e-10);
}

#[test]
fn c10_plumbing() {
    let (r, grid, _) = default_run();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a0.json");
    let snap = Snapshot::from_state(&r.solution, grid);
    snap.save(&path).unwrap();
    let back = Snapshot::load(&path).unwrap();
    assert_eq!(back.a.to_bits(), r.solution.a.to_bits());
    assert_eq!(back.k.to_bits(), r.solution.k.to_bits());
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&back.u), bits(&r.solution.pair.u));
    assert_eq!(bits(&back.v), bits(&r.solution.pair.v));

    let render = |r: &ScanResult| {
        let field = SelfField::from_pair(&r.solution.pair, r.a0, grid).unwrap();
        [
            profiles_csv(grid, &r.solution.pair, &field),
            k_history_csv(&r.k_history),
            Snapshot::from_state(&r.solution, grid).to_json().unwrap(),
            serde_json::to_string(&r.report).unwrap(),
        ]
    };
    let again = find_a0(&ScanConfig::default(), &SolverConfig::default(), grid).unwrap();
    assert_eq!(render(r), render(&again));

    let mut cfg = RunConfig::default();
    let usage = cfg.apply_text("n_nodes = many").unwrap_err();
    let strict = SolverConfig {
        max_iterations: 2,
        seed: SeedPolicy::Never,
        ..SolverConfig::default()
    };
    let init = trial_functions(1.0, grid).unwrap();
    let convergence = solve_fixed_a(-2.3, &init, 1.0, &strict, grid).unwrap_err();
    let short = ScanConfig {
        a_start: -1.0,
        max_evals: 2,
        ..ScanConfig::default()
    };
    let scan = find_a0(&short, &SolverConfig::default(), grid).unwrap_err();
    let text = snap.to_json().unwrap();
    let io = Snapshot::from_json(&text[..text.len() / 3]).unwrap_err();
    let codes: Vec<u8> = [&usage, &convergence, &scan, &io]
        .iter()
        .map(|e: &&Error| e.exit_code())
        .collect();
    assert_eq!(
        codes,
        [exit::USAGE, exit::CONVERGENCE, exit::SCAN, exit::IO]
    );
    assert_eq!(codes, [2, 3, 4, 5]);
    assert_eq!(exit::SUCCESS, 0);
}
