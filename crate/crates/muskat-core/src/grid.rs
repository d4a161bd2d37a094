//! Sampled interfaces, finite-difference slopes and slope statistics.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance between compact-mode endpoint values and stored limits.
pub const DEFAULT_BOUNDARY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryMode {
    /// f is extended by constant limits outside the grid.
    Compact,
    /// f has period `n * dx`.
    Periodic,
}

impl BoundaryMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryMode::Compact => "compact",
            BoundaryMode::Periodic => "periodic",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
    dx: f64,
    x0: f64,
    mode: BoundaryMode,
}

impl Grid {
    pub fn new(n: usize, dx: f64, x0: f64, mode: BoundaryMode) -> Result<Self> {
        if n < 8 {
            return Err(Error::InvalidGrid(format!(
                "n = {n}, need at least 8 nodes"
            )));
        }
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "dx = {dx}, need a positive finite spacing"
            )));
        }
        if !x0.is_finite() {
            return Err(Error::InvalidGrid("origin is not finite".into()));
        }
        Ok(Grid { n, dx, x0, mode })
    }

    /// Compact grid with nodes at both ends of `[a, b]`.
    pub fn compact(a: f64, b: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGrid(format!(
                "n = {n}, need at least 8 nodes"
            )));
        }
        Grid::new(n, (b - a) / (n - 1) as f64, a, BoundaryMode::Compact)
    }

    /// Periodic grid of `n` nodes covering `[a, a + period)`.
    pub fn periodic(a: f64, period: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGrid("n = 0, need at least 8 nodes".into()));
        }
        Grid::new(n, period / n as f64, a, BoundaryMode::Periodic)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn mode(&self) -> BoundaryMode {
        self.mode
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Distance between the first and last node.
    pub fn span(&self) -> f64 {
        (self.n - 1) as f64 * self.dx
    }

    pub fn period(&self) -> Option<f64> {
        match self.mode {
            BoundaryMode::Periodic => Some(self.n as f64 * self.dx),
            BoundaryMode::Compact => None,
        }
    }

    /// Same node count and mode with every length multiplied by `r`.
    pub fn scaled(&self, r: f64) -> Result<Self> {
        Grid::new(self.n, self.dx * r, self.x0 * r, self.mode)
    }

    /// Wrap a signed node index into `0..n` (periodic) or `None` if off-grid (compact).
    #[inline]
    pub(crate) fn wrap(&self, j: isize) -> Option<usize> {
        let n = self.n as isize;
        match self.mode {
            BoundaryMode::Periodic => Some(j.rem_euclid(n) as usize),
            BoundaryMode::Compact => (0..n).contains(&j).then_some(j as usize),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub left: f64,
    pub right: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterfaceState {
    grid: Grid,
    f: Vec<f64>,
    t: f64,
    limits: Option<Limits>,
}

impl InterfaceState {
    /// State whose compact-mode limits are the endpoint values.
    pub fn new(grid: Grid, f: Vec<f64>, t: f64) -> Result<Self> {
        let limits = match grid.mode {
            BoundaryMode::Compact if !f.is_empty() => Some(Limits {
                left: f[0],
                right: f[f.len() - 1],
            }),
            _ => None,
        };
        Self::build(grid, f, t, limits, 0.0)
    }

    pub fn with_limits(grid: Grid, f: Vec<f64>, t: f64, limits: Limits, tol: f64) -> Result<Self> {
        if grid.mode == BoundaryMode::Periodic {
            return Err(Error::InvalidState(
                "periodic states carry no limits".into(),
            ));
        }
        Self::build(grid, f, t, Some(limits), tol)
    }

    fn build(grid: Grid, f: Vec<f64>, t: f64, limits: Option<Limits>, tol: f64) -> Result<Self> {
        if f.len() != grid.n {
            return Err(Error::InvalidState(format!(
                "{} values for a grid of {} nodes",
                f.len(),
                grid.n
            )));
        }
        if let Some(i) = f.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidState(format!("f[{i}] is not finite")));
        }
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidState(format!("t = {t}")));
        }
        if let Some(l) = limits {
            if !l.left.is_finite() || !l.right.is_finite() {
                return Err(Error::InvalidState("limits must be finite".into()));
            }
            let (dl, dr) = ((f[0] - l.left).abs(), (f[grid.n - 1] - l.right).abs());
            if dl > tol || dr > tol {
                return Err(Error::InvalidState(format!(
                    "endpoints differ from limits by {:e} / {:e} (tolerance {tol:e}); widen the window",
                    dl, dr
                )));
            }
        }
        Ok(InterfaceState { grid, f, t, limits })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn limits(&self) -> Option<Limits> {
        self.limits
    }

    /// f at a signed node index, using the boundary extension.
    #[inline]
    pub fn at(&self, j: isize) -> f64 {
        match self.grid.wrap(j) {
            Some(k) => self.f[k],
            None => {
                let l = self.limits.expect("compact state has limits");
                if j < 0 {
                    l.left
                } else {
                    l.right
                }
            }
        }
    }

    /// f̃(x) = r·f(x/r) at time r·t on the scaled grid.
    pub fn rescaled(&self, r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::InvalidArgument(format!("scale factor {r}")));
        }
        let grid = self.grid.scaled(r)?;
        let f = self.f.iter().map(|v| r * v).collect();
        let limits = self.limits.map(|l| Limits {
            left: r * l.left,
            right: r * l.right,
        });
        Self::build(grid, f, r * self.t, limits, f64::INFINITY)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiffScheme {
    Central2,
    Central4,
    Spectral,
}

impl DiffScheme {
    pub fn default_for(mode: BoundaryMode) -> Self {
        match mode {
            BoundaryMode::Compact => DiffScheme::Central4,
            BoundaryMode::Periodic => DiffScheme::Spectral,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlopeField {
    pub grid: Grid,
    pub scheme: DiffScheme,
    pub fx: Vec<f64>,
    pub fxx: Vec<f64>,
    /// Third derivative, used by center-cell limits of the slope equation.
    pub fxxx: Vec<f64>,
}

pub fn slope(state: &InterfaceState, scheme: DiffScheme) -> Result<SlopeField> {
    let g = state.grid;
    let n = g.n;
    let (fx, fxx, fxxx) = match scheme {
        DiffScheme::Spectral => {
            if g.mode != BoundaryMode::Periodic {
                return Err(Error::Unsupported(
                    "spectral differences need periodic mode".into(),
                ));
            }
            spectral_derivatives(&state.f, g.dx)
        }
        DiffScheme::Central2 => {
            let (h, h2, h3) = (g.dx, g.dx * g.dx, g.dx * g.dx * g.dx);
            let mut fx = vec![0.0; n];
            let mut fxx = vec![0.0; n];
            let mut fxxx = vec![0.0; n];
            for i in 0..n {
                let j = i as isize;
                let u = |k: isize| state.at(j + k);
                let d = |k: isize| u(k) - u(0);
                fx[i] = (u(1) - u(-1)) / (2.0 * h);
                fxx[i] = (d(1) + d(-1)) / h2;
                fxxx[i] = ((u(2) - u(-2)) - 2.0 * (u(1) - u(-1))) / (2.0 * h3);
            }
            (fx, fxx, fxxx)
        }
        DiffScheme::Central4 => {
            let (h, h2, h3) = (g.dx, g.dx * g.dx, g.dx * g.dx * g.dx);
            let mut fx = vec![0.0; n];
            let mut fxx = vec![0.0; n];
            let mut fxxx = vec![0.0; n];
            for i in 0..n {
                let j = i as isize;
                let u = |k: isize| state.at(j + k);
                let d = |k: isize| u(k) - u(0);
                let o = |k: isize| u(k) - u(-k);
                fx[i] = (8.0 * o(1) - o(2)) / (12.0 * h);
                fxx[i] = (16.0 * (d(1) + d(-1)) - (d(2) + d(-2))) / (12.0 * h2);
                fxxx[i] = (13.0 * o(1) - 8.0 * o(2) + o(3)) / (-8.0 * h3);
            }
            (fx, fxx, fxxx)
        }
    };
    for (name, v) in [("fx", &fx), ("fxx", &fxx), ("fxxx", &fxxx)] {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(name.into()));
        }
    }
    Ok(SlopeField {
        grid: g,
        scheme,
        fx,
        fxx,
        fxxx,
    })
}

fn spectral_derivatives(f: &[f64], dx: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = f.len();
    let period = n as f64 * dx;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut hat: Vec<Complex<f64>> = f.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fwd.process(&mut hat);
    let wave = |m: usize| -> (f64, bool) {
        let s = if m <= n / 2 {
            m as f64
        } else {
            m as f64 - n as f64
        };
        (2.0 * PI * s / period, n.is_multiple_of(2) && m == n / 2)
    };
    let mut out = Vec::with_capacity(3);
    for order in 1..=3 {
        let mut d: Vec<Complex<f64>> = hat
            .iter()
            .enumerate()
            .map(|(m, &c)| {
                let (k, nyquist) = wave(m);
                if nyquist && order % 2 == 1 {
                    return Complex::new(0.0, 0.0);
                }
                c * Complex::new(0.0, k).powi(order)
            })
            .collect();
        inv.process(&mut d);
        out.push(d.iter().map(|c| c.re / n as f64).collect::<Vec<f64>>());
    }
    let fxxx = out.pop().unwrap();
    let fxx = out.pop().unwrap();
    let fx = out.pop().unwrap();
    (fx, fxx, fxxx)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipticityBounds {
    pub beta: f64,
    pub slope_sup: f64,
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    pub sup_fx: f64,
    pub inf_fx: f64,
}

impl EllipticityBounds {
    /// Bounds from extremal slopes.
    pub fn from_extrema(sup_fx: f64, inf_fx: f64) -> Self {
        let beta = sup_fx * (-inf_fx);
        let slope_sup = sup_fx.abs().max(inf_fx.abs());
        let c = 1.0 + slope_sup * slope_sup;
        EllipticityBounds {
            beta,
            slope_sup,
            lambda: (1.0 - beta) / (c * c),
            big_lambda: c,
            sup_fx,
            inf_fx,
        }
    }
}

pub fn beta_of(slopes: &SlopeField) -> EllipticityBounds {
    let sup = slopes.fx.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let inf = slopes.fx.iter().copied().fold(f64::INFINITY, f64::min);
    EllipticityBounds::from_extrema(sup, inf)
}

/// Quintic Hermite interpolant built from (f, fx, fxx) at the nodes.
pub struct Interpolant<'a> {
    state: &'a InterfaceState,
    slopes: &'a SlopeField,
}

impl<'a> Interpolant<'a> {
    pub fn new(state: &'a InterfaceState, slopes: &'a SlopeField) -> Self {
        Interpolant { state, slopes }
    }

    fn node(&self, j: isize) -> (f64, f64, f64) {
        match self.state.grid.wrap(j) {
            Some(k) => (self.state.f[k], self.slopes.fx[k], self.slopes.fxx[k]),
            None => (self.state.at(j), 0.0, 0.0),
        }
    }

    /// (f, f_x, f_xx) at position x.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let g = &self.state.grid;
        let u = (x - g.x0) / g.dx;
        let r = u.round();
        let c = if (u - r).abs() < 1e-10 { r } else { u.floor() };
        let t = if c == r && (u - r).abs() < 1e-10 {
            0.0
        } else {
            u - c
        };
        let j = c as isize;
        if g.mode == BoundaryMode::Compact {
            let last = g.n as isize - 1;
            if j < 0 {
                return (self.state.at(-1), 0.0, 0.0);
            }
            if j > last || (j == last && t > 0.0) {
                return (self.state.at(last + 1), 0.0, 0.0);
            }
        }
        let (p0, d0, s0) = self.node(j);
        if t == 0.0 {
            return (p0, d0, s0);
        }
        let (p1, d1, s1) = self.node(j + 1);
        let h = g.dx;
        let (d0, d1, s0, s1) = (d0 * h, d1 * h, s0 * h * h, s1 * h * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let t4 = t3 * t;
        let t5 = t4 * t;
        let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
        let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
        let h2 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5;
        let h3 = 0.5 * t3 - t4 + 0.5 * t5;
        let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
        let h5 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
        let v = p0 * h0 + d0 * h1 + s0 * h2 + s1 * h3 + d1 * h4 + p1 * h5;
        let dh0 = -30.0 * t2 + 60.0 * t3 - 30.0 * t4;
        let dh1 = 1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4;
        let dh2 = t - 4.5 * t2 + 6.0 * t3 - 2.5 * t4;
        let dh3 = 1.5 * t2 - 4.0 * t3 + 2.5 * t4;
        let dh4 = -12.0 * t2 + 28.0 * t3 - 15.0 * t4;
        let dh5 = -dh0;
        let dv = (p0 * dh0 + d0 * dh1 + s0 * dh2 + s1 * dh3 + d1 * dh4 + p1 * dh5) / h;
        let ddh0 = -60.0 * t + 180.0 * t2 - 120.0 * t3;
        let ddh1 = -36.0 * t + 96.0 * t2 - 60.0 * t3;
        let ddh2 = 1.0 - 9.0 * t + 18.0 * t2 - 10.0 * t3;
        let ddh3 = 3.0 * t - 12.0 * t2 + 10.0 * t3;
        let ddh4 = -24.0 * t + 84.0 * t2 - 60.0 * t3;
        let ddh5 = -ddh0;
        let ddv = (p0 * ddh0 + d0 * ddh1 + s0 * ddh2 + s1 * ddh3 + d1 * ddh4 + p1 * ddh5) / (h * h);
        (v, dv, ddv)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x).0
    }
}

pub type Params = BTreeMap<String, serde_json::Value>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default)]
    pub params: Params,
}

/// A closed-form initial profile.
#[derive(Clone, Debug, PartialEq)]
pub enum Scenario {
    Gaussian {
        amplitude: f64,
        width: f64,
        center: f64,
    },
    TanhStep {
        amplitude: f64,
        width: f64,
        center: f64,
    },
    Tent {
        amplitude: f64,
        width: f64,
        center: f64,
    },
    Sine {
        amplitude: f64,
        wavenumber: f64,
        phase: f64,
    },
    CustomTable {
        xs: Vec<f64>,
        fs: Vec<f64>,
    },
}

fn real(params: &Params, key: &str, default: f64) -> Result<f64> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| Error::InvalidParam(format!("`{key}` must be a finite number"))),
    }
}

fn reals(params: &Params, key: &str) -> Result<Vec<f64>> {
    let arr = params
        .get(key)
        .and_then(|v| v.as_array())
        .ok_or_else(|| Error::InvalidParam(format!("`{key}` must be an array of numbers")))?;
    arr.iter()
        .map(|v| {
            v.as_f64()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::InvalidParam(format!("`{key}` must hold finite numbers")))
        })
        .collect()
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidParam(format!(
            "`{name}` must be positive, got {v}"
        )))
    }
}

impl Scenario {
    pub fn parse(name: &str, params: &Params) -> Result<Self> {
        let known: &[&str] = match name {
            "gaussian" | "tanh-step" | "tent" => &["amplitude", "width", "center"],
            "sine" => &["amplitude", "wavenumber", "phase"],
            "custom-table" => &["x", "f"],
            _ => return Err(Error::UnknownScenario(name.into())),
        };
        if let Some(k) = params.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Error::InvalidParam(format!(
                "unknown parameter `{k}` for {name}"
            )));
        }
        let amplitude = real(params, "amplitude", 1.0)?;
        Ok(match name {
            "gaussian" => Scenario::Gaussian {
                amplitude,
                width: positive("width", real(params, "width", 1.0)?)?,
                center: real(params, "center", 0.0)?,
            },
            "tanh-step" => Scenario::TanhStep {
                amplitude,
                width: positive("width", real(params, "width", 1.0)?)?,
                center: real(params, "center", 0.0)?,
            },
            "tent" => Scenario::Tent {
                amplitude,
                width: positive("width", real(params, "width", 1.0)?)?,
                center: real(params, "center", 0.0)?,
            },
            "sine" => Scenario::Sine {
                amplitude,
                wavenumber: positive("wavenumber", real(params, "wavenumber", 1.0)?)?,
                phase: real(params, "phase", 0.0)?,
            },
            _ => {
                let xs = reals(params, "x")?;
                let fs = reals(params, "f")?;
                if xs.len() != fs.len() || xs.len() < 2 {
                    return Err(Error::InvalidParam(
                        "`x` and `f` need equal lengths of at least 2".into(),
                    ));
                }
                if xs.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::InvalidParam(
                        "`x` must be strictly increasing".into(),
                    ));
                }
                Scenario::CustomTable { xs, fs }
            }
        })
    }

    pub fn profile(&self, x: f64) -> f64 {
        match self {
            Scenario::Gaussian {
                amplitude,
                width,
                center,
            } => {
                let u = (x - center) / width;
                amplitude * (-u * u).exp()
            }
            Scenario::TanhStep {
                amplitude,
                width,
                center,
            } => amplitude * ((x - center) / width).tanh(),
            Scenario::Tent {
                amplitude,
                width,
                center,
            } => amplitude * (1.0 - (x - center).abs() / width).max(0.0),
            Scenario::Sine {
                amplitude,
                wavenumber,
                phase,
            } => amplitude * (wavenumber * x + phase).sin(),
            Scenario::CustomTable { xs, fs } => {
                let k = xs.partition_point(|&v| v <= x);
                if k == 0 {
                    fs[0]
                } else if k == xs.len() {
                    fs[k - 1]
                } else {
                    let w = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
                    fs[k - 1] + w * (fs[k] - fs[k - 1])
                }
            }
        }
    }

    /// Limits at −∞ and +∞, if the profile has them.
    pub fn limits(&self) -> Option<Limits> {
        match self {
            Scenario::Gaussian { .. } | Scenario::Tent { .. } => Some(Limits {
                left: 0.0,
                right: 0.0,
            }),
            Scenario::TanhStep { amplitude, .. } => Some(Limits {
                left: -amplitude,
                right: *amplitude,
            }),
            Scenario::Sine { amplitude, .. } => (*amplitude == 0.0).then_some(Limits {
                left: 0.0,
                right: 0.0,
            }),
            Scenario::CustomTable { fs, .. } => Some(Limits {
                left: fs[0],
                right: fs[fs.len() - 1],
            }),
        }
    }

    pub fn sample(&self, grid: &Grid, boundary_tol: f64) -> Result<InterfaceState> {
        let f: Vec<f64> = (0..grid.n).map(|i| self.profile(grid.x(i))).collect();
        match grid.mode {
            BoundaryMode::Compact => {
                let limits = self.limits().ok_or_else(|| {
                    Error::InvalidParam("sine data has no limits; use periodic mode".into())
                })?;
                InterfaceState::with_limits(*grid, f, 0.0, limits, boundary_tol)
            }
            BoundaryMode::Periodic => {
                match self {
                    Scenario::TanhStep { .. } => {
                        return Err(Error::InvalidParam("tanh-step is not periodic".into()))
                    }
                    Scenario::Sine {
                        wavenumber,
                        amplitude,
                        ..
                    } if *amplitude != 0.0 => {
                        let cycles = wavenumber * grid.n as f64 * grid.dx / (2.0 * PI);
                        if (cycles - cycles.round()).abs() > 1e-9 * cycles.max(1.0) {
                            return Err(Error::InvalidParam(format!(
                                "sine with wavenumber {wavenumber} does not fit the period ({cycles} cycles)"
                            )));
                        }
                    }
                    _ => {}
                }
                InterfaceState::new(*grid, f, 0.0)
            }
        }
    }
}

/// Sample a named scenario at the grid nodes, at t = 0.
pub fn sample_scenario(name: &str, params: &Params, grid: &Grid) -> Result<InterfaceState> {
    Scenario::parse(name, params)?.sample(grid, DEFAULT_BOUNDARY_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(pairs: &[(&str, f64)]) -> Params {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), serde_json::json!(v)))
            .collect()
    }

    #[test]
    fn grid_rejects_degenerate_input() {
        assert!(Grid::new(7, 0.1, 0.0, BoundaryMode::Compact).is_err());
        assert!(Grid::new(8, 0.0, 0.0, BoundaryMode::Compact).is_err());
        assert!(Grid::new(8, -1.0, 0.0, BoundaryMode::Periodic).is_err());
    }

    #[test]
    fn central2_exact_on_quadratics() {
        let g = Grid::compact(-1.0, 1.0, 41).unwrap();
        let f: Vec<f64> = g.xs().iter().map(|x| 3.0 * x * x - x + 2.0).collect();
        let s = InterfaceState::new(g, f, 0.0).unwrap();
        let sl = slope(&s, DiffScheme::Central2).unwrap();
        for i in 1..40 {
            let x = g.x(i);
            assert!((sl.fx[i] - (6.0 * x - 1.0)).abs() < 1e-12);
            assert!((sl.fxx[i] - 6.0).abs() < 1e-9);
        }
    }

    #[test]
    fn gaussian_central2_error_below_ten_dx_squared() {
        let g = Grid::compact(-10.0, 10.0, 2001).unwrap();
        let s = sample_scenario("gaussian", &Params::new(), &g).unwrap();
        let sl = slope(&s, DiffScheme::Central2).unwrap();
        let err = (0..g.n())
            .map(|i| {
                let x = g.x(i);
                (sl.fx[i] + 2.0 * x * (-x * x).exp()).abs()
            })
            .fold(0.0, f64::max);
        assert!(err <= 10.0 * g.dx() * g.dx(), "err {err}");
    }

    #[test]
    fn spectral_differentiates_sine() {
        let g = Grid::periodic(0.0, 2.0 * PI, 64).unwrap();
        let s = sample_scenario("sine", &params(&[("wavenumber", 3.0)]), &g).unwrap();
        let sl = slope(&s, DiffScheme::Spectral).unwrap();
        for i in 0..64 {
            let x = g.x(i);
            assert!((sl.fx[i] - 3.0 * (3.0 * x).cos()).abs() < 1e-12);
            assert!((sl.fxx[i] + 9.0 * (3.0 * x).sin()).abs() < 1e-11);
            assert!((sl.fxxx[i] + 27.0 * (3.0 * x).cos()).abs() < 1e-10);
        }
        assert!(slope(
            &sample_scenario(
                "gaussian",
                &Params::new(),
                &Grid::compact(-20.0, 20.0, 64).unwrap()
            )
            .unwrap(),
            DiffScheme::Spectral
        )
        .is_err());
    }

    #[test]
    fn beta_examples() {
        let g = Grid::compact(-20.0, 20.0, 4001).unwrap();
        let s = sample_scenario("gaussian", &Params::new(), &g).unwrap();
        let b = beta_of(&slope(&s, DiffScheme::Central4).unwrap());
        // sup |f'| = sqrt(2/e) at x = ±1/sqrt(2)
        let oracle = 2.0 / std::f64::consts::E;
        assert!(
            (b.beta - oracle).abs() < 10.0 * g.dx() * g.dx(),
            "{}",
            b.beta
        );

        let s = sample_scenario("tanh-step", &Params::new(), &g).unwrap();
        let b = beta_of(&slope(&s, DiffScheme::Central4).unwrap());
        assert!(b.beta.abs() < 1e-12);
        let c = 1.0 + b.slope_sup * b.slope_sup;
        assert!((b.lambda - (1.0 - b.beta) / (c * c)).abs() < 1e-15);

        let z = sample_scenario("sine", &params(&[("amplitude", 0.0)]), &g).unwrap();
        assert!(z.f().iter().all(|&v| v == 0.0));
        let b = beta_of(&slope(&z, DiffScheme::Central4).unwrap());
        assert_eq!((b.beta, b.lambda, b.big_lambda), (0.0, 1.0, 1.0));
    }

    #[test]
    fn monotone_increasing_data_gives_negative_beta() {
        let b = EllipticityBounds::from_extrema(2.0, 0.5);
        assert_eq!(b.beta, -1.0);
        assert!(b.lambda > 0.0 && b.lambda <= b.big_lambda);
    }

    #[test]
    fn scenario_errors() {
        let g = Grid::compact(-5.0, 5.0, 101).unwrap();
        assert!(matches!(
            sample_scenario("wave", &Params::new(), &g),
            Err(Error::UnknownScenario(_))
        ));
        assert!(sample_scenario("gaussian", &params(&[("width", -1.0)]), &g).is_err());
        assert!(sample_scenario("sine", &params(&[("amplitude", 1.0)]), &g).is_err());
        // e^{-25} is far above the boundary tolerance
        assert!(sample_scenario("gaussian", &params(&[("width", 2.0)]), &g).is_err());
    }

    #[test]
    fn interpolant_reproduces_nodes_and_quintics() {
        let g = Grid::compact(-1.0, 1.0, 21).unwrap();
        let p = |x: f64| 0.3 * x.powi(5) - x.powi(3) + 0.5 * x;
        let f: Vec<f64> = g.xs().iter().map(|&x| p(x)).collect();
        let s = InterfaceState::new(g, f, 0.0).unwrap();
        let mut sl = slope(&s, DiffScheme::Central2).unwrap();
        for i in 0..21 {
            let x = g.x(i);
            sl.fx[i] = 1.5 * x.powi(4) - 3.0 * x * x + 0.5;
            sl.fxx[i] = 6.0 * x.powi(3) - 6.0 * x;
        }
        let it = Interpolant::new(&s, &sl);
        for i in 0..21 {
            assert_eq!(it.value(g.x(i)), s.f()[i]);
        }
        for k in 0..200 {
            let x = -0.99 + 1.98 * k as f64 / 199.0;
            let (v, d, dd) = it.eval(x);
            assert!((v - p(x)).abs() < 1e-13);
            assert!((d - (1.5 * x.powi(4) - 3.0 * x * x + 0.5)).abs() < 1e-11);
            assert!((dd - (6.0 * x.powi(3) - 6.0 * x)).abs() < 1e-9);
        }
    }
}
