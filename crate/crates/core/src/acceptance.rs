//! Acceptance report: runs both Van der Pol scenarios plus the numerical
//! property checks and collects one verdict per criterion.

use std::collections::BTreeSet;
use std::fmt;

use crate::closedloop::{run_scenario, RunResult};
use crate::codec::{bits_per_component, pack_frame, unpack_frame, SymbolVector};
use crate::config::{BuiltScenario, ScenarioConfig, SecondLevelConfig};
use crate::error::Result;
use crate::region::{distance, BoxRegion};
use crate::regulator::{PhiC, Regulator};
use crate::sim::{integrate_flow, FnField};
use crate::sweep::{run_sweep, threads_from_env, GridAxis, SweepKey};
use crate::vdp::VanDerPol;

/// Comparison applied to a measured value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    AtMost(f64),
    LessThan(f64),
    Within(f64, f64),
}

impl Bound {
    pub fn holds(self, v: f64) -> bool {
        match self {
            Bound::AtMost(t) => v <= t,
            Bound::LessThan(t) => v < t,
            Bound::Within(lo, hi) => lo <= v && v <= hi,
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::AtMost(t) => write!(f, "<= {t:e}"),
            Bound::LessThan(t) => write!(f, "< {t:e}"),
            Bound::Within(lo, hi) => write!(f, "in [{lo}, {hi}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub bound: Bound,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, measured: f64, bound: Bound) -> Self {
        Self {
            name: name.into(),
            measured,
            passed: bound.holds(measured),
            bound,
        }
    }

    /// Check that could not be evaluated.
    pub fn errored(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            measured: f64::NAN,
            bound: Bound::AtMost(0.0),
            passed: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Criterion {
    pub id: u32,
    pub title: String,
    pub checks: Vec<Check>,
    pub error: Option<String>,
}

impl Criterion {
    pub fn passed(&self) -> bool {
        self.error.is_none() && !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    fn failed(id: u32, title: &str, err: impl fmt::Display) -> Self {
        Self {
            id,
            title: title.into(),
            checks: vec![Check::errored(title)],
            error: Some(err.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AcceptanceReport {
    pub criteria: Vec<Criterion>,
}

impl AcceptanceReport {
    pub fn passed(&self) -> bool {
        !self.criteria.is_empty() && self.criteria.iter().all(Criterion::passed)
    }

    pub fn criterion(&self, id: u32) -> Option<&Criterion> {
        self.criteria.iter().find(|c| c.id == id)
    }
}

impl fmt::Display for AcceptanceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.criteria {
            let verdict = if c.passed() { "PASS" } else { "FAIL" };
            writeln!(f, "[{verdict}] {:>2}. {}", c.id, c.title)?;
            for ch in &c.checks {
                let mark = if ch.passed { "ok " } else { "BAD" };
                writeln!(f, "        {mark} {}: {:e} {}", ch.name, ch.measured, ch.bound)?;
            }
            if let Some(e) = &c.error {
                writeln!(f, "        error: {e}")?;
            }
        }
        let overall = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "overall: {overall}")
    }
}

/// Inputs of the acceptance run; tests tamper with these.
#[derive(Debug, Clone)]
pub struct AcceptanceSuite {
    pub scenario1: ScenarioConfig,
    pub scenario2: ScenarioConfig,
    /// Gains swept on scenario 1; at least one must pass.
    pub sweep_gains: Vec<f64>,
    pub threads: usize,
}

impl Default for AcceptanceSuite {
    fn default() -> Self {
        Self {
            scenario1: ScenarioConfig::builtin("scenario1").expect("built-in"),
            scenario2: ScenarioConfig::builtin("scenario2").expect("built-in"),
            sweep_gains: vec![1.0, 2.0, 4.0, 8.0, 16.0],
            threads: threads_from_env(),
        }
    }
}

struct Run {
    built: BuiltScenario,
    result: RunResult,
}

fn build_and_run(cfg: &ScenarioConfig) -> Result<Run> {
    let built = cfg.build()?;
    let result = run_scenario(&built.scenario)?;
    Ok(Run { built, result })
}

/// `sup |ü_ss + φ(u_ss, u̇_ss)|` along the limit cycle, derivatives by central
/// differences with step `h`.
pub fn immersion_residual(model: &VanDerPol, h: f64) -> Result<f64> {
    let w0 = limit_cycle_point(model, h)?;
    let traj = integrate_flow(model, &w0, 0.0, 10.0, h)?;
    let phi = model.phi();
    let u: Vec<f64> = traj.iter().map(|(_, _, w)| model.steady_state_input(w)).collect();
    let mut worst: f64 = 0.0;
    for i in 1..u.len() - 1 {
        let du = (u[i + 1] - u[i - 1]) / (2.0 * h);
        let ddu = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h);
        worst = worst.max((ddu + phi(&[u[i], du])).abs());
    }
    Ok(worst)
}

/// A point on the Van der Pol limit cycle (after a 50 s transient from (1, 0)).
pub fn limit_cycle_point(model: &VanDerPol, h: f64) -> Result<Vec<f64>> {
    let warm = integrate_flow(model, &[1.0, 0.0], 0.0, 50.0, h)?;
    Ok(warm.last_state().expect("nonempty").to_vec())
}

/// Open-loop observer driven by the exact `u_ss`, from `ξ(0) = 0`.
/// Returns `(first time |ξ − τ(w)| < tol, sup of the error over t ≥ settle)`.
pub fn observer_tracking(
    model: &VanDerPol,
    regulator: &Regulator,
    horizon: f64,
    settle: f64,
    tol: f64,
    h: f64,
) -> Result<(Option<f64>, f64)> {
    let w0 = limit_cycle_point(model, h)?;
    let m = *model;
    let field = FnField::new(4, move |x: &[f64], dx: &mut [f64]| {
        use crate::sim::VectorField;
        m.eval(&x[..2], &mut dx[..2]);
        regulator.observer_rhs(&x[2..], m.steady_state_input(&x[..2]), &mut dx[2..]);
    });
    let traj = integrate_flow(&field, &[w0[0], w0[1], 0.0, 0.0], 0.0, horizon, h)?;
    let mut first = None;
    let mut tail: f64 = 0.0;
    for (t, _, x) in traj.iter() {
        let err = distance(&x[2..], &model.tau(&x[..2]));
        if first.is_none() && err < tol {
            first = Some(t);
        }
        if t >= settle {
            tail = tail.max(err);
        }
    }
    Ok((first, tail))
}

/// Samples `count` points strictly outside `phi_c.outer()` and `count` points
/// inside `phi_c.support()`. Returns `(nonzero outside, mismatches inside)`.
pub fn phi_c_support_check(phi_c: &PhiC, phi: &dyn Fn(&[f64]) -> f64, count: usize, seed: u64) -> (usize, usize) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let outer = phi_c.outer();
    let far = outer.scale_about_center(2.0);
    let mut nonzero = 0;
    let mut sampled = 0;
    while sampled < count {
        let p = far.sample(&mut rng);
        if outer.contains(&p) {
            continue;
        }
        sampled += 1;
        if phi_c.eval(&p) != 0.0 {
            nonzero += 1;
        }
    }
    let mut mismatch = 0;
    for _ in 0..count {
        let p: Vec<f64> = phi_c
            .support()
            .intervals()
            .iter()
            .map(|[lo, hi]| rng.gen_range(*lo..=*hi))
            .collect();
        if phi_c.eval(&p) != phi(&p) {
            mismatch += 1;
        }
    }
    (nonzero, mismatch)
}

/// Exhaustive pack/unpack over `N ∈ {2,3,4,8}`, `r ∈ {1,2,3}`.
/// Returns `(mismatches, frames whose bit length differs from r·⌈log2 N⌉)`.
pub fn codec_bijection_check() -> (usize, usize) {
    let mut mismatches = 0;
    let mut oversize = 0;
    for levels in [2u32, 3, 4, 8] {
        for r in 1..=3usize {
            let total = (levels as usize).pow(r as u32);
            for code in 0..total {
                let mut c = code;
                let indices: Vec<u32> = (0..r)
                    .map(|_| {
                        let j = (c % levels as usize) as u32;
                        c /= levels as usize;
                        j
                    })
                    .collect();
                let symbols = SymbolVector::new(levels, indices).expect("in range");
                let frame = pack_frame(&symbols, code as u64);
                if frame.bit_len != r * bits_per_component(levels) as usize {
                    oversize += 1;
                }
                match unpack_frame(&frame, levels, r) {
                    Ok(back) if back == symbols => {}
                    _ => mismatches += 1,
                }
            }
        }
    }
    (mismatches, oversize)
}

/// Endpoint-error ratios `err(h)/err(h/2)` for `ẋ = −x` on `[0, 1]`,
/// for `h = 1e-2, 5e-3` (halved once each down to `2.5e-3`).
pub fn rk4_order_factors() -> Result<Vec<f64>> {
    let field = FnField::new(1, |x: &[f64], dx: &mut [f64]| dx[0] = -x[0]);
    let exact = (-1.0f64).exp();
    let err = |h: f64| -> Result<f64> {
        let traj = integrate_flow(&field, &[1.0], 0.0, 1.0, h)?;
        Ok((traj.last_state().expect("nonempty")[0] - exact).abs())
    };
    let errs = [err(1e-2)?, err(5e-3)?, err(2.5e-3)?];
    Ok(vec![errs[0] / errs[1], errs[1] / errs[2]])
}

/// Symbols sent during a run, doubled so both parities are integers.
pub fn symbol_set(result: &RunResult) -> BTreeSet<i64> {
    result
        .samples
        .iter()
        .flat_map(|s| s.symbols.iter().map(|v| (2.0 * v) as i64))
        .collect()
}

fn dead_beat_violations(result: &RunResult) -> usize {
    let r = result.layout.r as f64;
    let n = result.levels as f64;
    result
        .samples
        .iter()
        .filter(|s| s.error_after > r.sqrt() * s.zoom / (2.0 * n))
        .count()
}

fn containment_violations(run: &Run) -> usize {
    let w_box: BoxRegion = run.built.scenario.exo.invariant_box();
    let wd = run.result.layout.w_d();
    run.result
        .trajectory
        .iter()
        .filter(|(_, _, x)| !w_box.contains(&x[wd.clone()]))
        .count()
}

fn max_zoom_law_deviation(result: &RunResult) -> f64 {
    result
        .samples
        .iter()
        .map(|s| ((s.zoom_next / s.zoom) - result.contraction).abs() / result.contraction)
        .fold(0.0, f64::max)
}

/// Compares two runs on every composite component except `w_d′` and on all
/// diagnostics. Returns the number of differing records.
fn second_level_differences(first: &RunResult, second: &RunResult) -> usize {
    if first.trajectory.len() != second.trajectory.len() {
        return usize::MAX;
    }
    let (a, b) = (first.layout, second.layout);
    let pick = |l: &crate::closedloop::Layout, x: &[f64]| -> Vec<f64> {
        let mut v = x[..3 * l.r].to_vec();
        v.extend_from_slice(&x[l.z().start..]);
        v
    };
    let mut diff = 0;
    for i in 0..first.trajectory.len() {
        let same = first.trajectory.time(i) == second.trajectory.time(i)
            && pick(&a, first.trajectory.state(i)) == pick(&b, second.trajectory.state(i))
            && first.diagnostics.e_hat[i] == second.diagnostics.e_hat[i]
            && first.diagnostics.u[i] == second.diagnostics.u[i];
        if !same {
            diff += 1;
        }
    }
    diff + (first.frames != second.frames) as usize
}

impl AcceptanceSuite {
    pub fn run(&self) -> AcceptanceReport {
        let s1 = build_and_run(&self.scenario1);
        let s2 = build_and_run(&self.scenario2);
        let mut criteria = Vec::new();

        for (id, label, run) in [(1, "Scenario 1 (N = 2, T = 0.15 s)", &s1), (2, "Scenario 2 (N = 4, T = 0.5 s)", &s2)] {
            criteria.push(match run {
                Ok(run) => {
                    let th = &run.built.thresholds;
                    let t_tail = run.built.t_tail;
                    Criterion {
                        id,
                        title: format!("{label}: tail tracking and decoder error"),
                        checks: vec![
                            Check::new("sup |e(t)|, t >= t_tail", run.result.tracking_tail(t_tail), Bound::AtMost(th.tracking_tail)),
                            Check::new("sup |w - w_d|, t >= t_tail", run.result.decoder_tail(t_tail), Bound::AtMost(th.decoder_tail)),
                            Check::new("max composite state norm", run.result.max_state_norm(), Bound::AtMost(run.built.scenario.divergence_ceiling)),
                        ],
                        error: None,
                    }
                }
                Err(e) => Criterion::failed(id, label, e),
            });
        }

        criteria.push(match (&s1, &s2) {
            (Ok(a), Ok(b)) => {
                let mut checks = Vec::new();
                for (name, run, alphabet) in [("scenario 1", a, vec![-1, 1]), ("scenario 2", b, vec![-3, -1, 1, 3])] {
                    let alphabet: BTreeSet<i64> = alphabet.into_iter().collect();
                    let sent = symbol_set(&run.result);
                    checks.push(Check::new(format!("{name} symbols outside alphabet"), sent.difference(&alphabet).count() as f64, Bound::AtMost(0.0)));
                    checks.push(Check::new(format!("{name} alphabet symbols never sent"), alphabet.difference(&sent).count() as f64, Bound::AtMost(0.0)));
                }
                Criterion {
                    id: 3,
                    title: "Symbol alphabets {±1/2} and {±1/2, ±3/2}".into(),
                    checks,
                    error: None,
                }
            }
            (Err(e), _) | (_, Err(e)) => Criterion::failed(3, "Symbol alphabets", e),
        });

        criteria.push(match (&s1, &s2) {
            (Ok(a), Ok(b)) => {
                let mut checks = Vec::new();
                for (name, run) in [("scenario 1", a), ("scenario 2", b)] {
                    checks.push(Check::new(format!("{name} max relative zoom-ratio deviation"), max_zoom_law_deviation(&run.result), Bound::AtMost(1e-12)));
                    checks.push(Check::new(format!("{name} rate condition holds"), run.result.rate_condition as u8 as f64, Bound::Within(1.0, 1.0)));
                    checks.push(Check::new(format!("{name} zoom ratio"), run.result.contraction, Bound::LessThan(1.0)));
                }
                Criterion { id: 4, title: "Zoom law L(k)/L(k-1) = sqrt(2)·M/N < 1".into(), checks, error: None }
            }
            (Err(e), _) | (_, Err(e)) => Criterion::failed(4, "Zoom law", e),
        });

        criteria.push(match (&s1, &s2) {
            (Ok(a), Ok(b)) => Criterion {
                id: 5,
                title: "Dead-beat bound |w(kT) - w_d(kT)| <= sqrt(2)·L(k)/(2N)".into(),
                checks: vec![
                    Check::new("scenario 1 violations", dead_beat_violations(&a.result) as f64, Bound::AtMost(0.0)),
                    Check::new("scenario 2 violations", dead_beat_violations(&b.result) as f64, Bound::AtMost(0.0)),
                    Check::new("saturated symbols", (a.result.saturations() + b.result.saturations()) as f64, Bound::AtMost(0.0)),
                ],
                error: None,
            },
            (Err(e), _) | (_, Err(e)) => Criterion::failed(5, "Dead-beat bound", e),
        });

        criteria.push(match (&s1, &s2) {
            (Ok(a), Ok(b)) => Criterion {
                id: 6,
                title: "Decoder containment w_d(t) in W".into(),
                checks: vec![
                    Check::new("scenario 1 records outside W", containment_violations(a) as f64, Bound::AtMost(0.0)),
                    Check::new("scenario 2 records outside W", containment_violations(b) as f64, Bound::AtMost(0.0)),
                ],
                error: None,
            },
            (Err(e), _) | (_, Err(e)) => Criterion::failed(6, "Decoder containment", e),
        });

        criteria.push(self.internal_model_criterion());

        let (mismatch, oversize) = codec_bijection_check();
        let mut frame_checks = vec![
            Check::new("exhaustive round-trip mismatches", mismatch as f64, Bound::AtMost(0.0)),
            Check::new("frames with wrong bit length", oversize as f64, Bound::AtMost(0.0)),
        ];
        for (name, run) in [("scenario 1", &s1), ("scenario 2", &s2)] {
            if let Ok(run) = run {
                let over = run.result.frames.iter().filter(|f| f.bit_len > run.result.bits as usize).count();
                frame_checks.push(Check::new(format!("{name} frames over N_b"), over as f64, Bound::AtMost(0.0)));
            } else {
                frame_checks.push(Check::errored(format!("{name} frames over N_b")));
            }
        }
        criteria.push(Criterion { id: 8, title: "Codec bijection and frame budget".into(), checks: frame_checks, error: None });

        criteria.push(match &s1 {
            Ok(a) => self.equivalence_criterion(a),
            Err(e) => Criterion::failed(9, "Equivalence oracle", e),
        });

        criteria.push(match &s1 {
            Ok(a) => self.numerics_criterion(a),
            Err(e) => Criterion::failed(10, "Determinism and numerics", e),
        });

        criteria.sort_by_key(|c| c.id);
        AcceptanceReport { criteria }
    }

    fn internal_model_criterion(&self) -> Criterion {
        const TITLE: &str = "Internal model: immersion residual, observer tracking, phi_c support";
        let res = (|| -> Result<Vec<Check>> {
            let built = self.scenario1.build()?;
            let model = built.model;
            let regulator = Regulator::new(&built.scenario.internal_model, built.scenario.gains.clone())?;
            let h = 1e-3;
            let residual = immersion_residual(&model, h)?;
            let (first, tail) = observer_tracking(&model, &regulator, 20.0, 10.0, 1e-2, h)?;
            let phi = model.phi();
            let (outside, inside) = phi_c_support_check(regulator.phi_c(), phi.as_ref(), 10_000, 7);
            Ok(vec![
                Check::new("immersion residual sup-norm", residual, Bound::AtMost(1e-2)),
                Check::new("first time |xi - tau(w)| < 1e-2 (s)", first.unwrap_or(f64::INFINITY), Bound::AtMost(10.0)),
                Check::new("sup |xi - tau(w)| for t >= 10 s", tail, Bound::LessThan(1e-2)),
                Check::new("phi_c nonzero outside support", outside as f64, Bound::AtMost(0.0)),
                Check::new("phi_c != phi inside S", inside as f64, Bound::AtMost(0.0)),
            ])
        })();
        match res {
            Ok(checks) => Criterion { id: 7, title: TITLE.into(), checks, error: None },
            Err(e) => Criterion::failed(7, TITLE, e),
        }
    }

    fn equivalence_criterion(&self, base: &Run) -> Criterion {
        const TITLE: &str = "Equivalence: encoder = decoder; second level (ell = 1, T_bar = T) = first level";
        let l = base.result.layout;
        let enc_dec = base
            .result
            .trajectory
            .iter()
            .filter(|(_, _, x)| x[l.w_e()] != x[l.w_d()])
            .count();
        let mut cfg = self.scenario1.clone();
        cfg.second_level = Some(SecondLevelConfig {
            t_bar: cfg.channel.period,
            ell: Some(1),
            t_star: None,
        });
        match build_and_run(&cfg) {
            Ok(second) => Criterion {
                id: 9,
                title: TITLE.into(),
                checks: vec![
                    Check::new("records with w_e != w_d", enc_dec as f64, Bound::AtMost(0.0)),
                    Check::new("records differing with second level", second_level_differences(&base.result, &second.result) as f64, Bound::AtMost(0.0)),
                ],
                error: None,
            },
            Err(e) => Criterion::failed(9, TITLE, e),
        }
    }

    fn numerics_criterion(&self, base: &Run) -> Criterion {
        const TITLE: &str = "Determinism, RK4 order, and a passing gain in the k sweep";
        let res = (|| -> Result<Vec<Check>> {
            let again = run_scenario(&self.scenario1.build()?.scenario)?;
            let mut checks = vec![Check::new("repeat run differs", (again != base.result) as u8 as f64, Bound::AtMost(0.0))];
            for (i, f) in rk4_order_factors()?.into_iter().enumerate() {
                checks.push(Check::new(format!("RK4 halving factor #{}", i + 1), f, Bound::Within(14.0, 18.0)));
            }
            let grid = [GridAxis { key: SweepKey::Gain, values: self.sweep_gains.clone() }];
            let rows = run_sweep(&self.scenario1, &grid, self.threads)?;
            let passing = rows.iter().filter(|r| r.passed).count();
            checks.push(Check::new("passing gains in sweep", passing as f64, Bound::Within(1.0, f64::INFINITY)));
            Ok(checks)
        })();
        match res {
            Ok(checks) => Criterion { id: 10, title: TITLE.into(), checks, error: None },
            Err(e) => Criterion::failed(10, TITLE, e),
        }
    }
}

/// Runs the default suite.
pub fn run_acceptance() -> AcceptanceReport {
    AcceptanceSuite::default().run()
}
