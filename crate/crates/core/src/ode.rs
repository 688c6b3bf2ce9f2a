//! Runge-Kutta integration with per-point trajectory monitors.
//!
//! Two steppers are provided: the classic fixed-step RK4 and the adaptive
//! Dormand-Prince 4(5) pair. Both record every accepted grid point together
//! with the values of any attached [`Monitor`]s, so Lyapunov-style channels
//! (divergences, free energies, conserved quantities) can be inspected after
//! the fact without re-running the integration.

use thiserror::Error;

/// Stepper selection for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Classic fixed-step fourth-order Runge-Kutta.
    Rk4,
    /// Dormand-Prince embedded 4(5) pair with adaptive step control.
    Rk45,
}

/// Integration settings.
///
/// `step` is the fixed step for [`Method::Rk4`] and the initial trial step
/// for [`Method::Rk45`]. `state_floor > 0` enables nonnegativity clamping:
/// any component pushed below zero by an accepted step is reset to zero and
/// the event counted in [`RunStats::clamp_events`].
#[derive(Debug, Clone)]
pub struct IntegratorConfig {
    pub method: Method,
    pub step: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    pub state_floor: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::Rk45,
            step: 1e-2,
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_steps: 1_000_000,
            state_floor: 0.0,
        }
    }
}

/// A named scalar function of the state, evaluated at every recorded point.
///
/// Monitors may return `+inf` (e.g. a divergence against a reference with
/// smaller support); the serializers in [`crate::output`] keep that value
/// intact.
type MonitorFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

pub struct Monitor {
    name: String,
    func: MonitorFn,
}

impl Monitor {
    pub fn new(name: impl Into<String>, func: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), func: Box::new(func) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, state: &[f64]) -> f64 {
        (self.func)(state)
    }
}

impl std::fmt::Debug for Monitor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Monitor").field("name", &self.name).finish()
    }
}

/// Bookkeeping accumulated during a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunStats {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub clamp_events: usize,
}

/// A recorded solution: strictly increasing times, one state row per time,
/// and one value series per monitor.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub channels: Vec<(String, Vec<f64>)>,
    pub stats: RunStats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> Option<&[f64]> {
        self.states.last().map(Vec::as_slice)
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }
}

#[derive(Debug, Error)]
pub enum OdeError {
    #[error("invalid integration input: {0}")]
    Invalid(String),
    #[error("non-finite derivative or state at t = {t}")]
    NonFinite { t: f64 },
    /// The step budget ran out. The partial trajectory integrated so far is
    /// carried along for inspection.
    #[error("step budget of {max_steps} exhausted at t = {t} (target {t_end})")]
    BudgetExhausted {
        max_steps: usize,
        t: f64,
        t_end: f64,
        partial: Box<Trajectory>,
    },
}

struct Recorder<'m> {
    monitors: &'m [Monitor],
    traj: Trajectory,
}

impl<'m> Recorder<'m> {
    fn new(monitors: &'m [Monitor]) -> Self {
        let channels = monitors.iter().map(|m| (m.name.clone(), Vec::new())).collect();
        Self { monitors, traj: Trajectory { times: Vec::new(), states: Vec::new(), channels, stats: RunStats::default() } }
    }

    fn push(&mut self, t: f64, state: &[f64]) {
        self.traj.times.push(t);
        self.traj.states.push(state.to_vec());
        for (m, (_, series)) in self.monitors.iter().zip(self.traj.channels.iter_mut()) {
            series.push(m.eval(state));
        }
    }
}

fn clamp_floor(state: &mut [f64], config: &IntegratorConfig, stats: &mut RunStats) {
    if config.state_floor <= 0.0 {
        return;
    }
    for x in state.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
            stats.clamp_events += 1;
        }
    }
}

/// Integrates `dx/dt = field(t, x)` from `t = 0` to `t_end`, recording every
/// accepted step. Fails fast on non-finite values, carrying the failing time;
/// when the step budget runs out the partial trajectory is returned inside
/// the error.
pub fn integrate<F>(
    mut field: F,
    x0: &[f64],
    t_end: f64,
    config: &IntegratorConfig,
    monitors: &[Monitor],
) -> Result<Trajectory, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    if x0.is_empty() {
        return Err(OdeError::Invalid("empty initial state".into()));
    }
    if !t_end.is_finite() || t_end < 0.0 {
        return Err(OdeError::Invalid(format!("t_end must be finite and >= 0, got {t_end}")));
    }
    if x0.iter().any(|x| !x.is_finite()) {
        return Err(OdeError::NonFinite { t: 0.0 });
    }
    if config.rel_tol <= 0.0 || config.abs_tol <= 0.0 {
        return Err(OdeError::Invalid("tolerances must be positive".into()));
    }
    if config.step <= 0.0 || !config.step.is_finite() {
        return Err(OdeError::Invalid(format!("step must be positive and finite, got {}", config.step)));
    }

    match config.method {
        Method::Rk4 => rk4(&mut field, x0, t_end, config, monitors),
        Method::Rk45 => rk45(&mut field, x0, t_end, config, monitors),
    }
}

fn rk4<F>(
    field: &mut F,
    x0: &[f64],
    t_end: f64,
    config: &IntegratorConfig,
    monitors: &[Monitor],
) -> Result<Trajectory, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = x0.len();
    let mut rec = Recorder::new(monitors);
    let mut x = x0.to_vec();
    let mut t = 0.0_f64;
    rec.push(t, &x);

    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut scratch = vec![0.0; n];

    while t < t_end {
        if rec.traj.stats.accepted_steps >= config.max_steps {
            return Err(OdeError::BudgetExhausted {
                max_steps: config.max_steps,
                t,
                t_end,
                partial: Box::new(rec.traj),
            });
        }
        let h = config.step.min(t_end - t);

        field(t, &x, &mut k1);
        for i in 0..n {
            scratch[i] = x[i] + 0.5 * h * k1[i];
        }
        field(t + 0.5 * h, &scratch, &mut k2);
        for i in 0..n {
            scratch[i] = x[i] + 0.5 * h * k2[i];
        }
        field(t + 0.5 * h, &scratch, &mut k3);
        for i in 0..n {
            scratch[i] = x[i] + h * k3[i];
        }
        field(t + h, &scratch, &mut k4);

        for i in 0..n {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(OdeError::NonFinite { t: t + h });
        }
        clamp_floor(&mut x, config, &mut rec.traj.stats);

        t += h;
        rec.traj.stats.accepted_steps += 1;
        rec.push(t, &x);
    }
    Ok(rec.traj)
}

// Dormand-Prince 4(5) coefficients.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Fifth-order weights (the propagated solution) minus the embedded
// fourth-order weights; used for the local error estimate.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn rk45<F>(
    field: &mut F,
    x0: &[f64],
    t_end: f64,
    config: &IntegratorConfig,
    monitors: &[Monitor],
) -> Result<Trajectory, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = x0.len();
    let mut rec = Recorder::new(monitors);
    let mut x = x0.to_vec();
    let mut t = 0.0_f64;
    rec.push(t, &x);
    if t_end == 0.0 {
        return Ok(rec.traj);
    }

    let mut k = vec![vec![0.0; n]; 7];
    let mut stage = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut h = config.step.min(t_end);
    let mut k1_fresh = false;

    loop {
        let stats = &rec.traj.stats;
        if stats.accepted_steps + stats.rejected_steps >= config.max_steps {
            return Err(OdeError::BudgetExhausted {
                max_steps: config.max_steps,
                t,
                t_end,
                partial: Box::new(rec.traj),
            });
        }
        let h_here = h.min(t_end - t);

        // FSAL: the last stage of an accepted step is the first of the next.
        if !k1_fresh {
            let (k1, rest) = k.split_at_mut(1);
            let _ = rest;
            field(t, &x, &mut k1[0]);
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                stage[i] = x[i] + h_here * acc;
            }
            let (head, tail) = k.split_at_mut(s);
            let _ = head;
            field(t + C[s] * h_here, &stage, &mut tail[0]);
        }
        // Stage 7 is evaluated at the candidate solution itself.
        for i in 0..n {
            x_new[i] = x[i] + h_here * (A[6][0] * k[0][i] + A[6][2] * k[2][i] + A[6][3] * k[3][i] + A[6][4] * k[4][i] + A[6][5] * k[5][i]);
        }

        if x_new.iter().any(|v| !v.is_finite()) || k.iter().any(|ks| ks.iter().any(|v| !v.is_finite())) {
            return Err(OdeError::NonFinite { t: t + h_here });
        }

        let mut err: f64 = 0.0;
        for i in 0..n {
            let e_i = h_here
                * (E[0] * k[0][i] + E[2] * k[2][i] + E[3] * k[3][i] + E[4] * k[4][i] + E[5] * k[5][i] + E[6] * k[6][i]);
            let scale = config.abs_tol + config.rel_tol * x[i].abs().max(x_new[i].abs());
            err = err.max((e_i / scale).abs());
        }

        if err <= 1.0 {
            t += h_here;
            std::mem::swap(&mut x, &mut x_new);
            // k7 was computed at (t, x) by construction, so reuse it.
            k.swap(0, 6);
            k1_fresh = true;
            clamp_floor(&mut x, config, &mut rec.traj.stats);
            if rec.traj.stats.clamp_events > 0 && config.state_floor > 0.0 {
                // The clamped state invalidates the FSAL derivative.
                k1_fresh = false;
            }
            rec.traj.stats.accepted_steps += 1;
            rec.push(t, &x);
            if t >= t_end {
                return Ok(rec.traj);
            }
        } else {
            rec.traj.stats.rejected_steps += 1;
            k1_fresh = false;
        }

        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h_here * factor).min(t_end);
        // `h > 0.0` is false for NaN as well, which is exactly the intent:
        // a poisoned step size must abort rather than loop forever.
        let step_advances = h > 0.0 && t + h != t;
        if !step_advances {
            // Step size underflowed; no further progress is possible.
            return Err(OdeError::NonFinite { t });
        }
    }
}
