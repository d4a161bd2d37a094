//! Nonlocal operators of the interface equation and of the slope equation.
//!
//! All principal-value integrals are summed over exact ±h pairs. In compact mode
//! the node lattice runs past the window (off-grid offsets take the stored limits),
//! so every node is paired out to the same radius and the remaining tails, where
//! f is constant, are added in closed form.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{slope, BoundaryMode, InterfaceState, Interpolant, SlopeField};
use crate::quadrature::{
    atanc, gauss_legendre, i2, j2, visit_paired, CenterTreatment, InnerRule, QuadratureSpec,
    TailMode,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSample {
    pub x: f64,
    pub h: f64,
    pub k_value: f64,
    #[serde(rename = "K_value")]
    pub big_k_value: f64,
}

/// Local data at the evaluation point.
#[derive(Clone, Copy, Debug)]
struct Probe {
    x: f64,
    node: Option<usize>,
    f0: f64,
    m: f64,
    a: f64,
    b: f64,
}

/// A state with its derivatives, ready for operator evaluation.
pub struct Prepared<'a> {
    state: &'a InterfaceState,
    slopes: SlopeField,
    q: QuadratureSpec,
    jcap: usize,
    periodic: Option<Periodic>,
}

struct Periodic {
    period: f64,
    mean: f64,
    /// second-difference lattice weights (π/L)²/sin²(πh/L) at the rule's offsets
    w2: Vec<f64>,
    /// first-difference lattice weights (π/L)cot(πh/L)
    w1: Vec<f64>,
}

impl<'a> Prepared<'a> {
    pub fn new(state: &'a InterfaceState, q: &QuadratureSpec) -> Result<Self> {
        let g = state.grid();
        q.validate(g)?;
        let slopes = slope(state, q.scheme_for(g))?;
        Ok(Self::assemble(state, slopes, q))
    }

    pub fn with_slopes(
        state: &'a InterfaceState,
        slopes: SlopeField,
        q: &QuadratureSpec,
    ) -> Result<Self> {
        q.validate(state.grid())?;
        if slopes.grid != *state.grid() {
            return Err(Error::InvalidArgument(
                "slope field belongs to another grid".into(),
            ));
        }
        Ok(Self::assemble(state, slopes, q))
    }

    fn assemble(state: &'a InterfaceState, slopes: SlopeField, q: &QuadratureSpec) -> Self {
        let g = state.grid();
        let jcap = q.radius_nodes(g);
        let periodic = g.period().map(|period| {
            let n = g.n();
            let offs: Vec<f64> = match q.inner_rule {
                InnerRule::SymmetricTrapezoid => (1..n).map(|j| j as f64 * g.dx()).collect(),
                InnerRule::SymmetricMidpoint => (0..n).map(|j| (j as f64 + 0.5) * g.dx()).collect(),
            };
            let k = PI / period;
            Periodic {
                period,
                mean: state.f().iter().sum::<f64>() / n as f64,
                w2: offs.iter().map(|h| k * k / (k * h).sin().powi(2)).collect(),
                w1: offs.iter().map(|h| k / (k * h).tan()).collect(),
            }
        });
        Prepared {
            state,
            slopes,
            q: *q,
            jcap,
            periodic,
        }
    }

    pub fn state(&self) -> &InterfaceState {
        self.state
    }

    pub fn slopes(&self) -> &SlopeField {
        &self.slopes
    }

    pub fn quadrature(&self) -> QuadratureSpec {
        self.q
    }

    fn interp(&self) -> Interpolant<'_> {
        Interpolant::new(self.state, &self.slopes)
    }

    fn node_probe(&self, i: usize) -> Probe {
        Probe {
            x: self.state.grid().x(i),
            node: Some(i),
            f0: self.state.f()[i],
            m: self.slopes.fx[i],
            a: self.slopes.fxx[i],
            b: self.slopes.fxxx[i],
        }
    }

    fn point_probe(&self, x: f64) -> Probe {
        let (f0, m, a) = self.interp().eval(x);
        Probe {
            x,
            node: None,
            f0,
            m,
            a,
            b: 0.0,
        }
    }

    /// Nodes per side for a probe.
    fn reach(&self, p: &Probe) -> usize {
        let g = self.state.grid();
        match g.mode() {
            BoundaryMode::Periodic => self.jcap,
            BoundaryMode::Compact => {
                let far = match p.node {
                    Some(i) => i.max(g.n() - 1 - i),
                    None => {
                        let d = (p.x - g.x0()).max(g.x(g.n() - 1) - p.x);
                        (d / g.dx()).ceil() as usize
                    }
                };
                far.min(self.jcap).max(1)
            }
        }
    }

    #[inline]
    fn f_at(&self, p: &Probe, h: f64, off: Option<isize>) -> f64 {
        match (p.node, off) {
            (Some(i), Some(j)) => self.state.at(i as isize + j),
            _ => self.interp().value(p.x + h),
        }
    }

    #[inline]
    fn fx_at(&self, p: &Probe, h: f64, off: Option<isize>) -> f64 {
        match (p.node, off) {
            (Some(i), Some(j)) => match self.state.grid().wrap(i as isize + j) {
                Some(k) => self.slopes.fx[k],
                None => 0.0,
            },
            _ => self.interp().eval(p.x + h).1,
        }
    }

    fn taylor(&self) -> bool {
        self.q.center_cell_treatment == CenterTreatment::TaylorLimit
    }

    fn tails(&self) -> bool {
        self.q.tail_mode == TailMode::AnalyticConstantTail
    }

    /// Paired sum of `g(h) + g(−h)` plus the center contribution.
    fn paired(&self, j: usize, center: f64, mut g: impl FnMut(f64, Option<isize>) -> f64) -> f64 {
        let mut s = 0.0;
        let wc = visit_paired(
            self.q.inner_rule,
            self.state.grid().dx(),
            self.q.refinement,
            j,
            |h, w, off| {
                let off = off.map(|o| o as isize);
                s += w * (g(h, off) + g(-h, off.map(|o| -o)));
            },
        );
        if self.taylor() {
            s += wc * center;
        }
        s
    }

    /// Differences D = f(x ± a) − f(x) at the truncation radius, where f is held constant beyond.
    fn edge_differences(&self, p: &Probe, j: usize) -> (f64, f64, f64) {
        let a = j as f64 * self.state.grid().dx();
        let jj = j as isize;
        let dl = self.f_at(p, -a, Some(-jj)) - p.f0;
        let dr = self.f_at(p, a, Some(jj)) - p.f0;
        (dl, dr, a)
    }

    /// Sum over lattice offsets of (f(x+h) − f(x))·w(h) across one period.
    fn lattice(&self, weights: &[f64], values: impl Fn(f64, Option<isize>) -> f64) -> f64 {
        let dx = self.state.grid().dx();
        match self.q.inner_rule {
            InnerRule::SymmetricTrapezoid => weights
                .iter()
                .enumerate()
                .map(|(k, w)| {
                    let j = k as isize + 1;
                    dx * values(j as f64 * dx, Some(j)) * w
                })
                .sum(),
            InnerRule::SymmetricMidpoint => weights
                .iter()
                .enumerate()
                .map(|(k, w)| dx * values((k as f64 + 0.5) * dx, None) * w)
                .sum(),
        }
    }

    fn center_weight_lattice(&self) -> f64 {
        match (self.q.inner_rule, self.taylor()) {
            (InnerRule::SymmetricTrapezoid, true) => self.state.grid().dx(),
            _ => 0.0,
        }
    }

    fn mean_power(&self, p: &Probe, k: i32) -> f64 {
        let f = self.state.f();
        f.iter().map(|v| (v - p.f0).powi(k)).sum::<f64>() / f.len() as f64
    }

    fn rhs_at(&self, p: &Probe) -> f64 {
        let j = self.reach(p);
        let (m, a) = (p.m, p.a);
        let c = 1.0 + m * m;
        match &self.periodic {
            None => {
                let mut s = self.paired(j, a / (2.0 * c), |h, off| {
                    let d = self.f_at(p, h, off) - p.f0;
                    (d - h * m) / (d * d + h * h)
                });
                if self.tails() {
                    let (dl, dr, r) = self.edge_differences(p, j);
                    s += (dr / r).atan()
                        + (dl / r).atan()
                        + 0.5 * m * ((dr * dr + r * r) / (dl * dl + r * r)).ln();
                }
                s
            }
            Some(per) => {
                let lin = self.lattice(&per.w2, |h, off| self.f_at(p, h, off) - p.f0)
                    + self.center_weight_lattice() * 0.5 * a;
                let mut s = self.paired(j, a / (2.0 * c) - 0.5 * a, |h, off| {
                    let d = self.f_at(p, h, off) - p.f0;
                    -(d - h * m) * d * d / (h * h * (d * d + h * h))
                });
                if self.tails() {
                    let r = j as f64 * self.state.grid().dx();
                    s += -2.0 * self.mean_power(p, 3) / (3.0 * r * r * r);
                }
                lin + s
            }
        }
    }

    fn rhs_original_at(&self, p: &Probe) -> f64 {
        let j = self.reach(p);
        let (m, a) = (p.m, p.a);
        let c = 1.0 + m * m;
        match &self.periodic {
            None => {
                let mut s = self.paired(j, a / c, |h, off| {
                    let d = self.f_at(p, h, off) - p.f0;
                    let e = self.fx_at(p, h, off) - m;
                    e * h / (d * d + h * h)
                });
                if self.tails() {
                    let (dl, dr, r) = self.edge_differences(p, j);
                    s += 0.5 * m * ((dr * dr + r * r) / (dl * dl + r * r)).ln();
                }
                s
            }
            Some(per) => {
                let lin = self.lattice(&per.w1, |h, off| self.fx_at(p, h, off) - m)
                    + self.center_weight_lattice() * a;
                let s = self.paired(j, a / c - a, |h, off| {
                    let d = self.f_at(p, h, off) - p.f0;
                    let e = self.fx_at(p, h, off) - m;
                    -e * d * d / (h * (d * d + h * h))
                });
                lin + s
            }
        }
    }

    fn drift_at(&self, p: &Probe) -> f64 {
        let j = self.reach(p);
        let (m, a) = (p.m, p.a);
        let c = 1.0 + m * m;
        let mut s = self.paired(j, m * a / (c * c), |h, off| {
            let d = self.f_at(p, h, off) - p.f0;
            -h / (d * d + h * h)
        });
        if self.periodic.is_none() && self.tails() {
            let (dl, dr, r) = self.edge_differences(p, j);
            s += 0.5 * ((dr * dr + r * r) / (dl * dl + r * r)).ln();
        }
        s
    }

    fn preibp_integral_at(&self, p: &Probe) -> f64 {
        let j = self.reach(p);
        let (m, a, b) = (p.m, p.a, p.b);
        let c = 1.0 + m * m;
        let mut s = self.paired(j, (b / 3.0 - 1.5 * m * a * a / c) / c, |h, off| {
            let d = self.f_at(p, h, off) - p.f0;
            let r2 = d * d + h * h;
            2.0 * (d - h * m) * (d * m + h) / (r2 * r2)
        });
        if self.tails() {
            let r = j as f64 * self.state.grid().dx();
            match &self.periodic {
                None => {
                    let (dl, dr, _) = self.edge_differences(p, j);
                    let side = |d: f64, sign: f64| {
                        2.0 * (2.0 * d * d * m * i2(d, r)
                            + sign * d * (1.0 - m * m) / (2.0 * (d * d + r * r))
                            - m * atanc(d, r))
                    };
                    s += side(dr, 1.0) + side(dl, -1.0);
                }
                Some(_) => {
                    s += -4.0 * m / r + 4.0 * m * self.mean_power(p, 2) / (r * r * r);
                }
            }
        }
        s
    }

    /// K(x, ·) at the node lattice of one probe.
    fn kernel_profile(&self, p: &Probe) -> KernelProfile {
        let j = self.reach(p);
        let dx = self.state.grid().dx();
        let model = KernelModel::new(p, dx);
        let m = p.m;
        let r = j as f64 * dx;
        let mut right = vec![0.0; j + 1];
        let mut left = vec![0.0; j + 1];
        for k in 1..=j {
            let s = k as f64 * dx;
            let kk = k as isize;
            let dp = self.f_at(p, s, Some(kk)) - p.f0;
            let dm = self.f_at(p, -s, Some(-kk)) - p.f0;
            right[k] = model.remainder(dp, s, 1.0);
            left[k] = model.remainder(dm, s, -1.0);
        }
        let (tail_r, tail_l) = if !self.tails() {
            (0.0, 0.0)
        } else if let Some(per) = &self.periodic {
            let mu = per.mean - p.f0;
            let base = 1.0 / (r * r);
            let corr = 2.0 * m * mu / (3.0 * r * r * r);
            (base + corr, base - corr)
        } else {
            let (dl, dr, _) = self.edge_differences(p, j);
            (
                1.0 / (dr * dr + r * r) + 2.0 * dr * m * i2(dr, r),
                1.0 / (dl * dl + r * r) - 2.0 * dl * m * i2(dl, r),
            )
        };
        let mut cum_r = vec![0.0; j + 1];
        let mut cum_l = vec![0.0; j + 1];
        cum_r[j] = tail_r - model.integral(r, 1.0);
        cum_l[j] = tail_l - model.integral(r, -1.0);
        for k in (1..j).rev() {
            cum_r[k] = cum_r[k + 1] + 0.5 * dx * (right[k] + right[k + 1]);
            cum_l[k] = cum_l[k + 1] + 0.5 * dx * (left[k] + left[k + 1]);
        }
        KernelProfile {
            dx,
            model,
            j,
            cum_r,
            cum_l,
        }
    }

    fn slope_integral_at(&self, p: &Probe) -> f64 {
        let prof = self.kernel_profile(p);
        let j = prof.j;
        let dx = prof.dx;
        let (m, a, b, c) = (p.m, p.a, p.b, prof.model.c);
        let mut s = 0.0;
        for k in 1..=j {
            let h = k as f64 * dx;
            let kk = k as isize;
            let w = if k == j { 0.5 * dx } else { dx };
            let ep = self.fx_at(p, h, Some(kk)) - m;
            let em = self.fx_at(p, -h, Some(-kk)) - m;
            s += w * (ep * prof.at_node(k as isize) + em * prof.at_node(-kk));
        }
        if self.taylor() {
            s += dx * (b / (2.0 * c) - 3.0 * m * a * a / (c * c));
        }
        if self.tails() {
            let r = j as f64 * dx;
            match &self.periodic {
                None => {
                    let (dl, dr, _) = self.edge_differences(p, j);
                    s += -m * (atanc(dr, r) + 2.0 * dr * m * j2(dr, r));
                    s += -m * (atanc(dl, r) - 2.0 * dl * m * j2(dl, r));
                }
                Some(_) => s += -2.0 * m / r,
            }
        }
        s
    }

    /// K(x_i, h) at an arbitrary offset.
    fn big_k_at(&self, p: &Probe, prof: &KernelProfile, h: f64) -> f64 {
        let v = h.abs();
        let side = h.signum();
        let j0 = (v / prof.dx * (1.0 - 1e-12)).ceil() as usize;
        let m = p.m;
        if j0 > prof.j {
            if !self.tails() {
                return 0.0;
            }
            if self.periodic.is_some() {
                return 1.0 / (v * v);
            }
            let (dl, dr, _) = self.edge_differences(p, prof.j);
            let d = if h > 0.0 { dr } else { dl };
            return 1.0 / (d * d + v * v) + side * 2.0 * d * m * i2(d, v);
        }
        let node = j0 as f64 * prof.dx;
        let cum = if h > 0.0 {
            prof.cum_r[j0]
        } else {
            prof.cum_l[j0]
        };
        let gap = if node > v {
            let interp = self.interp();
            let model = &prof.model;
            let mut g = 0.0;
            // the cell may straddle the model cutoff
            let mut cuts = vec![v, node];
            if model.ell > v && model.ell < node {
                cuts.insert(1, model.ell);
            }
            for w in cuts.windows(2) {
                g += gauss_legendre(
                    |s| model.remainder(interp.value(p.x + side * s) - p.f0, s, side),
                    w[0],
                    w[1],
                );
            }
            g
        } else {
            0.0
        };
        prof.model.integral(v, side) + cum + gap
    }
}

/// Leading behavior of k(x, ±v) as v → 0, integrated exactly.
struct KernelModel {
    m: f64,
    c: f64,
    /// coefficient of 1/v² in side·k(x, side·v)
    q2: f64,
    /// coefficient of 1/v, tapered to zero at ell
    q1: f64,
    ell: f64,
}

impl KernelModel {
    fn new(p: &Probe, dx: f64) -> Self {
        let (m, a, b) = (p.m, p.a, p.b);
        let c = 1.0 + m * m;
        KernelModel {
            m,
            c,
            q2: -3.0 * m * a / (c * c),
            q1: 2.0 * (-0.5 * m * b + 2.0 * m * m * a * a / c - 0.5 * a * a) / (c * c),
            ell: 8.0 * dx,
        }
    }

    /// side·k(x, side·v) minus the model, v > 0.
    #[inline]
    fn remainder(&self, d: f64, v: f64, side: f64) -> f64 {
        side * kernel_value(d, side * v, self.m) - self.density(v, side)
    }

    #[inline]
    fn density(&self, v: f64, side: f64) -> f64 {
        let mut s = 2.0 / (self.c * v * v * v) + side * self.q2 / (v * v);
        if v < self.ell {
            s += self.q1 * (1.0 / v - 1.0 / self.ell);
        }
        s
    }

    /// ∫_v^∞ density.
    fn integral(&self, v: f64, side: f64) -> f64 {
        let mut s = 1.0 / (self.c * v * v) + side * self.q2 / v;
        if v < self.ell {
            s += self.q1 * ((self.ell / v).ln() - 1.0 + v / self.ell);
        }
        s
    }
}

struct KernelProfile {
    dx: f64,
    model: KernelModel,
    j: usize,
    cum_r: Vec<f64>,
    cum_l: Vec<f64>,
}

impl KernelProfile {
    fn at_node(&self, k: isize) -> f64 {
        let v = k.unsigned_abs() as f64 * self.dx;
        if k > 0 {
            self.model.integral(v, 1.0) + self.cum_r[k as usize]
        } else {
            self.model.integral(v, -1.0) + self.cum_l[(-k) as usize]
        }
    }
}

/// k(x, s) with δ_s f = d.
#[inline]
pub fn kernel_value(d: f64, s: f64, m: f64) -> f64 {
    let r2 = d * d + s * s;
    2.0 * (d * m + s) / (r2 * r2)
}

fn check_finite(name: &str, v: Vec<f64>) -> Result<Vec<f64>> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(name.into()));
    }
    Ok(v)
}

fn check_node(state: &InterfaceState, i: usize) -> Result<()> {
    if i >= state.grid().n() {
        return Err(Error::InvalidArgument(format!(
            "node {i} outside grid of {} nodes",
            state.grid().n()
        )));
    }
    Ok(())
}

impl Prepared<'_> {
    pub fn muskat_rhs(&self) -> Result<Vec<f64>> {
        let n = self.state.grid().n();
        let v = (0..n)
            .into_par_iter()
            .map(|i| self.rhs_at(&self.node_probe(i)))
            .collect();
        check_finite("muskat_rhs", v)
    }

    pub fn muskat_rhs_original(&self) -> Result<Vec<f64>> {
        let n = self.state.grid().n();
        let v = (0..n)
            .into_par_iter()
            .map(|i| self.rhs_original_at(&self.node_probe(i)))
            .collect();
        check_finite("muskat_rhs_original", v)
    }

    pub fn drift_integral(&self, i: usize) -> Result<f64> {
        check_node(self.state, i)?;
        Ok(self.drift_at(&self.node_probe(i)))
    }

    pub fn slope_rhs(&self) -> Result<Vec<f64>> {
        let n = self.state.grid().n();
        let v = (0..n)
            .into_par_iter()
            .map(|i| {
                let p = self.node_probe(i);
                p.a * self.drift_at(&p) + self.slope_integral_at(&p)
            })
            .collect();
        check_finite("slope_rhs", v)
    }

    pub fn slope_rhs_preibp(&self) -> Result<Vec<f64>> {
        let n = self.state.grid().n();
        let v = (0..n)
            .into_par_iter()
            .map(|i| {
                let p = self.node_probe(i);
                p.a * self.drift_at(&p) + self.preibp_integral_at(&p)
            })
            .collect();
        check_finite("slope_rhs_preibp", v)
    }

    pub fn kernel_k(&self, i: usize, s: f64) -> Result<f64> {
        check_node(self.state, i)?;
        if s == 0.0 || !s.is_finite() {
            return Err(Error::InvalidArgument(format!("kernel offset s = {s}")));
        }
        let p = self.node_probe(i);
        let d = self.interp().value(p.x + s) - p.f0;
        Ok(kernel_value(d, s, p.m))
    }

    pub fn kernel_big_k(&self, i: usize, h: f64) -> Result<f64> {
        Ok(self.kernel_big_k_many(i, &[h])?[0])
    }

    /// K(x_i, h) for several offsets sharing one node profile.
    pub fn kernel_big_k_many(&self, i: usize, hs: &[f64]) -> Result<Vec<f64>> {
        check_node(self.state, i)?;
        if let Some(h) = hs.iter().find(|h| **h == 0.0 || !h.is_finite()) {
            return Err(Error::InvalidArgument(format!("kernel offset h = {h}")));
        }
        let p = self.node_probe(i);
        let prof = self.kernel_profile(&p);
        check_finite(
            "kernel_K",
            hs.iter().map(|&h| self.big_k_at(&p, &prof, h)).collect(),
        )
    }

    pub fn kernel_samples(&self, nodes: &[usize], hs: &[f64]) -> Result<Vec<KernelSample>> {
        let rows: Result<Vec<Vec<KernelSample>>> = nodes
            .par_iter()
            .map(|&i| {
                let big = self.kernel_big_k_many(i, hs)?;
                hs.iter()
                    .zip(big)
                    .map(|(&h, kv)| {
                        Ok(KernelSample {
                            x: self.state.grid().x(i),
                            h,
                            k_value: self.kernel_k(i, h)?,
                            big_k_value: kv,
                        })
                    })
                    .collect()
            })
            .collect();
        Ok(rows?.into_iter().flatten().collect())
    }

    pub fn ft_pointwise(&self, x: f64) -> Result<f64> {
        let g = self.state.grid();
        let hi = match g.mode() {
            BoundaryMode::Compact => g.x(g.n() - 1),
            BoundaryMode::Periodic => g.x0() + self.periodic.as_ref().unwrap().period,
        };
        if !(x >= g.x0() && x <= hi) {
            return Err(Error::InvalidArgument(format!(
                "x = {x} outside [{}, {hi}]",
                g.x0()
            )));
        }
        let v = self.rhs_at(&self.point_probe(x));
        if !v.is_finite() {
            return Err(Error::NonFinite("ft_pointwise".into()));
        }
        Ok(v)
    }
}

pub fn muskat_rhs(state: &InterfaceState, q: &QuadratureSpec) -> Result<Vec<f64>> {
    Prepared::new(state, q)?.muskat_rhs()
}

pub fn muskat_rhs_original(state: &InterfaceState, q: &QuadratureSpec) -> Result<Vec<f64>> {
    Prepared::new(state, q)?.muskat_rhs_original()
}

pub fn drift_integral(state: &InterfaceState, x_index: usize, q: &QuadratureSpec) -> Result<f64> {
    Prepared::new(state, q)?.drift_integral(x_index)
}

pub fn kernel_k(state: &InterfaceState, x_index: usize, s: f64) -> Result<f64> {
    Prepared::new(state, &QuadratureSpec::default())?.kernel_k(x_index, s)
}

pub fn kernel_big_k(
    state: &InterfaceState,
    x_index: usize,
    h: f64,
    q: &QuadratureSpec,
) -> Result<f64> {
    Prepared::new(state, q)?.kernel_big_k(x_index, h)
}

pub fn slope_rhs(state: &InterfaceState, q: &QuadratureSpec) -> Result<Vec<f64>> {
    Prepared::new(state, q)?.slope_rhs()
}

pub fn slope_rhs_preibp(state: &InterfaceState, q: &QuadratureSpec) -> Result<Vec<f64>> {
    Prepared::new(state, q)?.slope_rhs_preibp()
}

pub fn ft_pointwise(state: &InterfaceState, x: f64, q: &QuadratureSpec) -> Result<f64> {
    Prepared::new(state, q)?.ft_pointwise(x)
}

/// −π(−Δ)^{1/2} f through the Fourier symbol −π|ξ|.
pub fn linearized_rhs(state: &InterfaceState) -> Result<Vec<f64>> {
    let g = state.grid();
    let period = g
        .period()
        .ok_or_else(|| Error::Unsupported("linearized_rhs needs periodic mode".into()))?;
    let n = g.n();
    let mut planner = FftPlanner::<f64>::new();
    let mut hat: Vec<Complex<f64>> = state.f().iter().map(|&v| Complex::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut hat);
    for (m, c) in hat.iter_mut().enumerate() {
        let s = if m <= n / 2 {
            m as f64
        } else {
            n as f64 - m as f64
        };
        *c *= -PI * 2.0 * PI * s / period;
    }
    planner.plan_fft_inverse(n).process(&mut hat);
    Ok(hat.iter().map(|c| c.re / n as f64).collect())
}
