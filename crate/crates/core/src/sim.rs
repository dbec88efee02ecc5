//! Fixed-step hybrid execution: classical RK4 flow interleaved with
//! time-scheduled state jumps.
//!
//! Every jump instant lands exactly on a step boundary, so the integrator
//! never straddles a reset. At each jump instant the trajectory stores two
//! records sharing one timestamp: the pre-jump value (`kT⁻`) and the
//! post-jump value (`kT`).

use crate::error::{Error, Result};

/// Tolerance used when checking that an interval is an integer number of steps.
pub const ALIGN_TOL: f64 = 1e-9;

/// A smooth autonomous vector field on ℝⁿ.
pub trait VectorField {
    fn dim(&self) -> usize;

    /// Writes the derivative at `x` into `dx`. Both slices have length `dim()`.
    fn eval(&self, x: &[f64], dx: &mut [f64]);
}

impl<T: VectorField + ?Sized> VectorField for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[f64], dx: &mut [f64]) {
        (**self).eval(x, dx)
    }
}

impl<T: VectorField + ?Sized> VectorField for std::sync::Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[f64], dx: &mut [f64]) {
        (**self).eval(x, dx)
    }
}

/// Adapts a closure `|x, dx|` into a [`VectorField`].
#[derive(Clone)]
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(&[f64], &mut [f64]),
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> VectorField for FnField<F>
where
    F: Fn(&[f64], &mut [f64]),
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64], dx: &mut [f64]) {
        (self.f)(x, dx)
    }
}

/// ẋ = 0.
#[derive(Debug, Clone, Copy)]
pub struct ZeroField(pub usize);

impl VectorField for ZeroField {
    fn dim(&self) -> usize {
        self.0
    }
    fn eval(&self, _x: &[f64], dx: &mut [f64]) {
        dx.fill(0.0);
    }
}

/// Which side of the hybrid execution produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RecordKind {
    /// Ordinary integration step (or the initial state).
    Flow,
    /// Value just before a jump, `kT⁻`.
    PreJump,
    /// Value just after a jump, `kT`.
    PostJump,
}

impl RecordKind {
    pub fn label(self) -> &'static str {
        match self {
            RecordKind::Flow => "flow",
            RecordKind::PreJump => "pre",
            RecordKind::PostJump => "post",
        }
    }
}

/// Time-stamped states, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dim: usize,
    times: Vec<f64>,
    kinds: Vec<RecordKind>,
    data: Vec<f64>,
}

impl Trajectory {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            times: Vec::new(),
            kinds: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn with_capacity(dim: usize, records: usize) -> Self {
        Self {
            dim,
            times: Vec::with_capacity(records),
            kinds: Vec::with_capacity(records),
            data: Vec::with_capacity(records * dim),
        }
    }

    pub fn push(&mut self, t: f64, kind: RecordKind, state: &[f64]) {
        debug_assert_eq!(state.len(), self.dim);
        self.times.push(t);
        self.kinds.push(kind);
        self.data.extend_from_slice(state);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    pub fn kind(&self, i: usize) -> RecordKind {
        self.kinds[i]
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn last_state(&self) -> Option<&[f64]> {
        if self.is_empty() {
            None
        } else {
            Some(self.state(self.len() - 1))
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, RecordKind, &[f64])> + '_ {
        self.times
            .iter()
            .zip(&self.kinds)
            .zip(self.data.chunks_exact(self.dim.max(1)))
            .map(|((&t, &k), x)| (t, k, x))
    }

    /// Post-jump records only, in order.
    pub fn post_jumps(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.iter()
            .filter(|(_, k, _)| *k == RecordKind::PostJump)
            .map(|(t, _, x)| (t, x))
    }
}

/// Reusable RK4 stage buffers.
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    /// Advances `x` by one classical Runge–Kutta step of size `h`.
    pub fn step<F: VectorField + ?Sized>(&mut self, field: &F, x: &mut [f64], h: f64) {
        let half = 0.5 * h;
        field.eval(x, &mut self.k1);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + half * self.k1[i];
        }
        field.eval(&self.tmp, &mut self.k2);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + half * self.k2[i];
        }
        field.eval(&self.tmp, &mut self.k3);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + h * self.k3[i];
        }
        field.eval(&self.tmp, &mut self.k4);
        let sixth = h / 6.0;
        for i in 0..x.len() {
            x[i] += sixth * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// Number of steps of size `step` spanning `span`, or `StepMisaligned`.
pub fn aligned_steps(span: f64, step: f64) -> Result<u64> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    if !(span >= 0.0) || !span.is_finite() {
        return Err(Error::InvalidArgument(format!("span must be nonnegative, got {span}")));
    }
    let q = span / step;
    let n = q.round();
    if (q - n).abs() > ALIGN_TOL {
        return Err(Error::StepMisaligned { span, step });
    }
    Ok(n as u64)
}

fn check_finite(x: &[f64], t: f64) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteState { t })
    }
}

/// Integrates `field` from `t0` to `t1` with fixed RK4 steps of size `h`,
/// recording every step.
pub fn integrate_flow<F: VectorField + ?Sized>(
    field: &F,
    x0: &[f64],
    t0: f64,
    t1: f64,
    h: f64,
) -> Result<Trajectory> {
    if field.dim() != x0.len() {
        return Err(Error::InvalidArgument(format!(
            "initial state has {} components, field expects {}",
            x0.len(),
            field.dim()
        )));
    }
    if !(t1 > t0) {
        return Err(Error::InvalidArgument(format!("need t1 > t0, got [{t0}, {t1}]")));
    }
    let n = aligned_steps(t1 - t0, h)?;
    check_finite(x0, t0)?;

    let mut traj = Trajectory::with_capacity(x0.len(), n as usize + 1);
    let mut rk = Rk4::new(x0.len());
    let mut x = x0.to_vec();
    traj.push(t0, RecordKind::Flow, &x);
    for i in 1..=n {
        rk.step(field, &mut x, h);
        let t = if i == n { t1 } else { t0 + i as f64 * h };
        check_finite(&x, t)?;
        traj.push(t, RecordKind::Flow, &x);
    }
    Ok(traj)
}

/// Endpoint of [`integrate_flow`] without storing the intermediate states.
pub fn flow_endpoint<F: VectorField + ?Sized>(
    field: &F,
    x0: &[f64],
    span: f64,
    h: f64,
) -> Result<Vec<f64>> {
    let n = aligned_steps(span, h)?;
    let mut rk = Rk4::new(x0.len());
    let mut x = x0.to_vec();
    for i in 1..=n {
        rk.step(field, &mut x, h);
        check_finite(&x, i as f64 * h)?;
    }
    Ok(x)
}

/// Identifies one firing of a [`JumpSchedule`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    /// Jump time.
    pub t: f64,
    /// Index of this firing within its own schedule, starting at 0.
    pub k: u64,
}

type JumpAction<'a> = Box<dyn FnMut(JumpEvent, &mut [f64]) -> Result<()> + 'a>;

/// Periodic reset fired at `phase + k·period`, `k ≥ 0`.
pub struct JumpSchedule<'a> {
    pub period: f64,
    pub phase: f64,
    /// Rank used to order jumps that coincide with another schedule's.
    /// Coinciding schedules without a rank raise `ScheduleConflict`.
    pub order: Option<u32>,
    action: JumpAction<'a>,
}

impl<'a> JumpSchedule<'a> {
    pub fn new<A>(period: f64, phase: f64, action: A) -> Self
    where
        A: FnMut(JumpEvent, &mut [f64]) -> Result<()> + 'a,
    {
        Self {
            period,
            phase,
            order: None,
            action: Box::new(action),
        }
    }

    /// Declares this schedule's rank among coinciding jumps (lower fires first).
    pub fn ordered(mut self, rank: u32) -> Self {
        self.order = Some(rank);
        self
    }
}

struct StepSchedule {
    period: u64,
    phase: u64,
    fired: u64,
}

impl StepSchedule {
    fn due(&self, n: u64) -> bool {
        n >= self.phase && (n - self.phase).is_multiple_of(self.period)
    }
}

/// Runs the hybrid system from `t = 0` to `t_end`, flowing with RK4 and
/// applying scheduled jumps on step boundaries.
pub fn run_hybrid<F: VectorField + ?Sized>(
    field: &F,
    x0: &[f64],
    schedules: &mut [JumpSchedule<'_>],
    t_end: f64,
    h: f64,
) -> Result<Trajectory> {
    if field.dim() != x0.len() {
        return Err(Error::InvalidArgument(format!(
            "initial state has {} components, field expects {}",
            x0.len(),
            field.dim()
        )));
    }
    let n_steps = aligned_steps(t_end, h)?;
    let mut plan = Vec::with_capacity(schedules.len());
    for s in schedules.iter() {
        let period = aligned_steps(s.period, h)?;
        if period == 0 {
            return Err(Error::InvalidArgument("jump period must be positive".into()));
        }
        plan.push(StepSchedule {
            period,
            phase: aligned_steps(s.phase, h)?,
            fired: 0,
        });
    }
    check_finite(x0, 0.0)?;

    let dim = x0.len();
    let jumps: u64 = plan
        .iter()
        .map(|p| if n_steps >= p.phase { (n_steps - p.phase) / p.period + 1 } else { 0 })
        .sum();
    let mut traj = Trajectory::with_capacity(dim, (n_steps + 1 + jumps) as usize);
    let mut rk = Rk4::new(dim);
    let mut x = x0.to_vec();
    let mut due: Vec<usize> = Vec::with_capacity(plan.len());

    for n in 0..=n_steps {
        let t = if n == n_steps { t_end } else { n as f64 * h };
        due.clear();
        due.extend((0..plan.len()).filter(|&i| plan[i].due(n)));

        if due.is_empty() {
            traj.push(t, RecordKind::Flow, &x);
        } else {
            if due.len() > 1 {
                if let Some(&lone) = due.iter().find(|&&i| schedules[i].order.is_none()) {
                    let other = *due.iter().find(|&&i| i != lone).unwrap_or(&lone);
                    return Err(Error::ScheduleConflict {
                        t,
                        first: lone.min(other),
                        second: lone.max(other),
                    });
                }
                due.sort_by_key(|&i| (schedules[i].order, i));
            }
            traj.push(t, RecordKind::PreJump, &x);
            for &i in &due {
                let ev = JumpEvent { t, k: plan[i].fired };
                (schedules[i].action)(ev, &mut x)?;
                plan[i].fired += 1;
            }
            check_finite(&x, t)?;
            traj.push(t, RecordKind::PostJump, &x);
        }

        if n < n_steps {
            rk.step(field, &mut x, h);
            check_finite(&x, (n + 1) as f64 * h)?;
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay() -> FnField<impl Fn(&[f64], &mut [f64])> {
        FnField::new(1, |x: &[f64], dx: &mut [f64]| dx[0] = -x[0])
    }

    fn rotation() -> FnField<impl Fn(&[f64], &mut [f64])> {
        FnField::new(2, |x: &[f64], dx: &mut [f64]| {
            dx[0] = x[1];
            dx[1] = -x[0];
        })
    }

    #[test]
    fn zero_field_is_constant() {
        let traj = integrate_flow(&ZeroField(2), &[1.0, 0.0], 0.0, 1.0, 0.01).unwrap();
        assert_eq!(traj.len(), 101);
        for (_, _, x) in traj.iter() {
            assert_eq!(x, &[1.0, 0.0]);
        }
        assert_eq!(traj.time(traj.len() - 1), 1.0);
    }

    #[test]
    fn exponential_decay_matches_closed_form() {
        let traj = integrate_flow(&decay(), &[1.0], 0.0, 1.0, 0.001).unwrap();
        let end = traj.last_state().unwrap()[0];
        assert!((end - (-1.0f64).exp()).abs() < 1e-9, "{end}");
    }

    #[test]
    fn harmonic_oscillator_returns_after_one_period() {
        let period = 2.0 * std::f64::consts::PI;
        // 2π is not a multiple of 1e-3, so pick the nearest aligned step.
        let n = (period / 0.001).round();
        let h = period / n;
        let traj = integrate_flow(&rotation(), &[1.0, 0.0], 0.0, period, h).unwrap();
        let x = traj.last_state().unwrap();
        assert!((x[0] - 1.0).abs() < 1e-6 && x[1].abs() < 1e-6, "{x:?}");
    }

    #[test]
    fn misaligned_interval_rejected() {
        let err = integrate_flow(&decay(), &[1.0], 0.0, 1.0, 0.3).unwrap_err();
        assert!(matches!(err, Error::StepMisaligned { .. }));
    }

    #[test]
    fn non_finite_state_detected() {
        let blowup = FnField::new(1, |x: &[f64], dx: &mut [f64]| dx[0] = x[0] * x[0]);
        let err = integrate_flow(&blowup, &[1.0], 0.0, 2.0, 0.01).unwrap_err();
        assert!(matches!(err, Error::NonFiniteState { .. }));
    }

    #[test]
    fn halving_jumps_on_zero_field() {
        let mut sched = [JumpSchedule::new(1.0, 1.0, |_, x: &mut [f64]| {
            x[0] /= 2.0;
            Ok(())
        })];
        let traj = run_hybrid(&ZeroField(1), &[5.0], &mut sched, 3.0, 0.1).unwrap();
        let posts: Vec<(f64, f64)> = traj.post_jumps().map(|(t, x)| (t, x[0])).collect();
        assert_eq!(posts.len(), 3);
        for ((t, v), (te, ve)) in posts.iter().zip([(1.0, 2.5), (2.0, 1.25), (3.0, 0.625)]) {
            assert!((t - te).abs() < 1e-12);
            assert_eq!(*v, ve);
        }
    }

    #[test]
    fn integrate_and_reset_is_a_sawtooth() {
        let ramp = FnField::new(1, |_: &[f64], dx: &mut [f64]| dx[0] = 1.0);
        let mut sched = [JumpSchedule::new(1.0, 0.0, |_, x: &mut [f64]| {
            x[0] = 0.0;
            Ok(())
        })];
        let traj = run_hybrid(&ramp, &[0.0], &mut sched, 2.5, 0.01).unwrap();
        for (t, kind, x) in traj.iter() {
            if kind == RecordKind::PreJump {
                continue;
            }
            let expect = t - t.floor();
            assert!((x[0] - expect).abs() < 1e-9, "t={t} x={}", x[0]);
        }
    }

    #[test]
    fn jump_records_come_in_pairs() {
        let ramp = FnField::new(1, |_: &[f64], dx: &mut [f64]| dx[0] = 1.0);
        let mut sched = [JumpSchedule::new(0.25, 0.0, |_, x: &mut [f64]| {
            x[0] = 0.0;
            Ok(())
        })];
        let traj = run_hybrid(&ramp, &[0.0], &mut sched, 1.0, 0.05).unwrap();
        let mut jumps = 0;
        for i in 1..traj.len() {
            let (t0, t1) = (traj.time(i - 1), traj.time(i));
            if traj.kind(i) == RecordKind::PostJump {
                assert_eq!(traj.kind(i - 1), RecordKind::PreJump);
                assert_eq!(t0, t1);
                jumps += 1;
            } else {
                assert!(t1 > t0);
            }
        }
        assert_eq!(jumps, 5);
    }

    #[test]
    fn coinciding_jumps_need_order() {
        let mut sched = [
            JumpSchedule::new(1.0, 0.0, |_, _: &mut [f64]| Ok(())),
            JumpSchedule::new(2.0, 0.0, |_, _: &mut [f64]| Ok(())),
        ];
        let err = run_hybrid(&ZeroField(1), &[0.0], &mut sched, 2.0, 0.5).unwrap_err();
        assert!(matches!(err, Error::ScheduleConflict { first: 0, second: 1, .. }));
    }

    #[test]
    fn coinciding_jumps_follow_declared_order() {
        let mut sched = [
            JumpSchedule::new(1.0, 0.0, |_, x: &mut [f64]| {
                x[0] *= 3.0;
                Ok(())
            })
            .ordered(1),
            JumpSchedule::new(1.0, 0.0, |_, x: &mut [f64]| {
                x[0] += 1.0;
                Ok(())
            })
            .ordered(0),
        ];
        let traj = run_hybrid(&ZeroField(1), &[0.0], &mut sched, 1.0, 0.5).unwrap();
        // (0 + 1)·3 = 3, then (3 + 1)·3 = 12
        let posts: Vec<f64> = traj.post_jumps().map(|(_, x)| x[0]).collect();
        assert_eq!(posts, vec![3.0, 12.0]);
    }

    #[test]
    fn misaligned_period_rejected() {
        let mut sched = [JumpSchedule::new(0.15, 0.0, |_, _: &mut [f64]| Ok(()))];
        let err = run_hybrid(&ZeroField(1), &[0.0], &mut sched, 1.0, 0.1).unwrap_err();
        assert!(matches!(err, Error::StepMisaligned { .. }));
    }
}
