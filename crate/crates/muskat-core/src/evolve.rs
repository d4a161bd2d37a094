//! Explicit Runge–Kutta time stepping with a CFL-type step and stride snapshots.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::certificates::{MonitorRecord, MonitorSet, StrideContext};
use crate::error::{Error, Result};
use crate::grid::{
    beta_of, slope, DiffScheme, EllipticityBounds, InterfaceState, ScenarioSpec, SlopeField,
};
use crate::nonlocal::Prepared;
use crate::quadrature::QuadratureSpec;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepScheme {
    Rk2Heun,
    #[default]
    Rk4,
}

fn default_cfl() -> f64 {
    0.4
}
fn default_stride() -> usize {
    10
}
fn default_dt_min() -> f64 {
    1e-9
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperConfig {
    #[serde(default)]
    pub scheme: StepScheme,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    pub t_end: f64,
    /// Steps between snapshots; the final time is always recorded.
    #[serde(default = "default_stride")]
    pub output_stride: usize,
    #[serde(default = "default_dt_min")]
    pub dt_min: f64,
}

impl StepperConfig {
    pub fn new(t_end: f64) -> Self {
        StepperConfig {
            scheme: StepScheme::Rk4,
            cfl: default_cfl(),
            t_end,
            output_stride: default_stride(),
            dt_min: default_dt_min(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::InvalidStepper(format!(
                "cfl = {} outside (0, 1]",
                self.cfl
            )));
        }
        if !(self.dt_min > 0.0) || !self.dt_min.is_finite() {
            return Err(Error::InvalidStepper(format!("dt_min = {}", self.dt_min)));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::InvalidStepper(format!("t_end = {}", self.t_end)));
        }
        if self.output_stride == 0 {
            return Err(Error::InvalidStepper(
                "output_stride must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn axpy(base: &[f64], k: &[f64], c: f64) -> Vec<f64> {
    base.iter().zip(k).map(|(b, k)| b + c * k).collect()
}

fn rhs(state: &InterfaceState, q: &QuadratureSpec) -> Result<Vec<f64>> {
    Prepared::new(state, q)?.muskat_rhs()
}

fn stage(state: &InterfaceState, f: Vec<f64>, t: f64) -> Result<InterfaceState> {
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("stage values".into()));
    }
    // compact mode: the far-field limits follow the evolving end values
    InterfaceState::new(*state.grid(), f, t)
}

fn step_from(
    state: &InterfaceState,
    k1: Vec<f64>,
    dt: f64,
    scheme: StepScheme,
    q: &QuadratureSpec,
) -> Result<InterfaceState> {
    let f0 = state.f();
    let t0 = state.t();
    let f = match scheme {
        StepScheme::Rk2Heun => {
            let s1 = stage(state, axpy(f0, &k1, dt), t0 + dt)?;
            let k2 = rhs(&s1, q)?;
            f0.iter()
                .zip(k1.iter().zip(&k2))
                .map(|(f, (a, b))| f + 0.5 * dt * (a + b))
                .collect::<Vec<f64>>()
        }
        StepScheme::Rk4 => {
            let s2 = stage(state, axpy(f0, &k1, 0.5 * dt), t0 + 0.5 * dt)?;
            let k2 = rhs(&s2, q)?;
            let s3 = stage(state, axpy(f0, &k2, 0.5 * dt), t0 + 0.5 * dt)?;
            let k3 = rhs(&s3, q)?;
            let s4 = stage(state, axpy(f0, &k3, dt), t0 + dt)?;
            let k4 = rhs(&s4, q)?;
            (0..f0.len())
                .map(|i| f0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                .collect()
        }
    };
    stage(state, f, t0 + dt)
}

/// One explicit step of size dt.
pub fn step(
    state: &InterfaceState,
    dt: f64,
    scheme: StepScheme,
    q: &QuadratureSpec,
) -> Result<InterfaceState> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("dt = {dt}")));
    }
    let k1 = rhs(state, q)?;
    step_from(state, k1, dt, scheme, q)
}

fn dt_formula(dx: f64, cfl: f64, bounds: &EllipticityBounds) -> f64 {
    cfl * dx / (PI * bounds.big_lambda)
}

/// cfl·dx/(π·Λ), clamped below by dt_min.
pub fn auto_dt(state: &InterfaceState, cfg: &StepperConfig) -> Result<f64> {
    let slopes = slope(state, DiffScheme::default_for(state.grid().mode()))?;
    Ok(dt_formula(state.grid().dx(), cfg.cfl, &beta_of(&slopes)).max(cfg.dt_min))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrideStats {
    pub t: f64,
    pub step: usize,
    /// Step size that led to this snapshot (0 for the initial state).
    pub dt: f64,
    pub sup_fx: f64,
    pub inf_fx: f64,
    pub beta: f64,
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    pub max_fxx: f64,
}

impl StrideStats {
    pub fn from_slopes(t: f64, step: usize, dt: f64, slopes: &SlopeField) -> Self {
        let b = beta_of(slopes);
        StrideStats {
            t,
            step,
            dt,
            sup_fx: b.sup_fx,
            inf_fx: b.inf_fx,
            beta: b.beta,
            lambda: b.lambda,
            big_lambda: b.big_lambda,
            max_fxx: slopes.fxx.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    pub fn bounds(&self) -> EllipticityBounds {
        EllipticityBounds::from_extrema(self.sup_fx, self.inf_fx)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub stats: StrideStats,
    pub state: InterfaceState,
    pub monitors: Vec<MonitorRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub scenario: Option<ScenarioSpec>,
    pub quadrature: QuadratureSpec,
    pub stepper: StepperConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub meta: RunMeta,
    pub snapshots: Vec<Snapshot>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.stats.t).collect()
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots
            .last()
            .expect("trajectory holds the initial state")
    }

    /// Slope scheme used by the run.
    pub fn scheme(&self) -> DiffScheme {
        self.meta
            .quadrature
            .scheme_for(self.snapshots[0].state.grid())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SimError {
    Invalid(Error),
    /// The run stopped; `trajectory` ends with the last finite state.
    BlowUp {
        t: f64,
        reason: String,
        trajectory: Box<Trajectory>,
    },
}

impl std::fmt::Display for SimError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SimError::Invalid(e) => write!(f, "{e}"),
            SimError::BlowUp { t, reason, .. } => write!(f, "blow-up at t = {t}: {reason}"),
        }
    }
}

impl std::error::Error for SimError {}

impl From<Error> for SimError {
    fn from(e: Error) -> Self {
        SimError::Invalid(e)
    }
}

/// Run to `cfg.t_end`, evaluating `monitors` at every output stride.
pub fn simulate(
    initial: &InterfaceState,
    cfg: &StepperConfig,
    q: &QuadratureSpec,
    monitors: &MonitorSet,
) -> std::result::Result<Trajectory, SimError> {
    simulate_with_meta(initial, cfg, q, monitors, None)
}

pub fn simulate_with_meta(
    initial: &InterfaceState,
    cfg: &StepperConfig,
    q: &QuadratureSpec,
    monitors: &MonitorSet,
    scenario: Option<ScenarioSpec>,
) -> std::result::Result<Trajectory, SimError> {
    cfg.validate()?;
    q.validate(initial.grid())?;
    if initial.f().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial state".into()).into());
    }
    let mut traj = Trajectory {
        meta: RunMeta {
            scenario,
            quadrature: *q,
            stepper: *cfg,
        },
        snapshots: Vec::new(),
    };
    let dx = initial.grid().dx();
    let mut state = initial.clone();
    let mut steps = 0usize;
    let mut last_dt = 0.0;
    let mut first: Option<StrideStats> = None;
    let mut prev_out: Option<StrideStats> = None;
    let mut prev_sup_abs = f64::INFINITY;

    loop {
        let prep = Prepared::new(&state, q)?;
        let k1 = match prep.muskat_rhs() {
            Ok(v) => v,
            Err(e) => {
                return Err(blow_up(traj, state.t(), format!("right-hand side: {e}")));
            }
        };
        let stats = StrideStats::from_slopes(state.t(), steps, last_dt, prep.slopes());
        let done = state.t() >= cfg.t_end;
        if steps.is_multiple_of(cfg.output_stride) || done {
            let init = *first.get_or_insert(stats);
            let ctx = StrideContext {
                prepared: &prep,
                stats: &stats,
                initial: &init,
                previous: prev_out.as_ref(),
                ft: &k1,
            };
            let records = monitors.evaluate(&ctx).map_err(SimError::Invalid)?;
            traj.snapshots.push(Snapshot {
                stats,
                state: state.clone(),
                monitors: records,
            });
            prev_out = Some(stats);
        }
        if done {
            break;
        }

        let sup_abs = stats.sup_fx.abs().max(stats.inf_fx.abs());
        let formula = dt_formula(dx, cfg.cfl, &stats.bounds());
        if formula < cfg.dt_min && sup_abs > prev_sup_abs {
            return Err(blow_up(
                traj,
                state.t(),
                format!("step {formula:e} below dt_min with growing slope {sup_abs:e}"),
            ));
        }
        prev_sup_abs = sup_abs;
        let mut dt = formula.max(cfg.dt_min);
        let remaining = cfg.t_end - state.t();
        if dt >= remaining {
            dt = remaining;
        }
        drop(prep);
        let next = match step_from(&state, k1, dt, cfg.scheme, q) {
            Ok(s) => s,
            Err(e) => return Err(blow_up(traj, state.t(), e.to_string())),
        };
        state = if dt == remaining {
            InterfaceState::new(*next.grid(), next.f().to_vec(), cfg.t_end)?
        } else {
            next
        };
        steps += 1;
        last_dt = dt;
    }
    Ok(traj)
}

fn blow_up(mut traj: Trajectory, t: f64, reason: String) -> SimError {
    traj.snapshots.shrink_to_fit();
    SimError::BlowUp {
        t,
        reason,
        trajectory: Box::new(traj),
    }
}
