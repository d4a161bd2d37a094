//! Monitors that test the theorem-level claims on concrete states and runs.
//!
//! Every monitor reports a signed margin (positive means the inequality holds)
//! and passes when `margin ≥ −tolerance`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::evolve::{StrideStats, Trajectory};
use crate::grid::{slope, BoundaryMode, DiffScheme, Grid, InterfaceState, SlopeField};
use crate::modulus::ModulusSpec;
use crate::nonlocal::Prepared;
use crate::quadrature::QuadratureSpec;
use crate::serde_num;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MonitorId {
    MaxPrinciple,
    Ellipticity,
    Modulus,
    CurvatureDecay,
    FtRegularity,
    DifferenceBounds,
}

impl MonitorId {
    pub const ALL: [MonitorId; 6] = [
        MonitorId::MaxPrinciple,
        MonitorId::Ellipticity,
        MonitorId::Modulus,
        MonitorId::CurvatureDecay,
        MonitorId::FtRegularity,
        MonitorId::DifferenceBounds,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MonitorId::MaxPrinciple => "max-principle",
            MonitorId::Ellipticity => "ellipticity",
            MonitorId::Modulus => "modulus",
            MonitorId::CurvatureDecay => "curvature-decay",
            MonitorId::FtRegularity => "ft-regularity",
            MonitorId::DifferenceBounds => "difference-bounds",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Skipped => "skipped",
        }
    }
}

/// Location of the extremal sample.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorRecord {
    #[serde(with = "serde_num::real")]
    pub t: f64,
    pub name: MonitorId,
    pub status: Status,
    #[serde(with = "serde_num::real")]
    pub margin: f64,
    #[serde(with = "serde_num::real")]
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(default, with = "serde_num::real_map")]
    pub diagnostics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl MonitorRecord {
    fn judged(t: f64, name: MonitorId, margin: f64, tolerance: f64) -> Self {
        let status = if margin >= -tolerance {
            Status::Pass
        } else {
            Status::Fail
        };
        MonitorRecord {
            t,
            name,
            status,
            margin,
            tolerance,
            witness: None,
            diagnostics: BTreeMap::new(),
            note: None,
        }
    }

    fn skipped(t: f64, name: MonitorId, note: impl Into<String>) -> Self {
        MonitorRecord {
            t,
            name,
            status: Status::Skipped,
            margin: f64::NAN,
            tolerance: f64::NAN,
            witness: None,
            diagnostics: BTreeMap::new(),
            note: Some(note.into()),
        }
    }

    fn failed(t: f64, name: MonitorId, note: impl Into<String>) -> Self {
        MonitorRecord {
            status: Status::Fail,
            ..Self::skipped(t, name, note)
        }
    }

    /// Keeps the margin but marks the record as not applicable.
    fn demote(mut self, note: impl Into<String>) -> Self {
        self.status = Status::Skipped;
        self.note = Some(note.into());
        self
    }

    fn with(mut self, key: &str, v: f64) -> Self {
        self.diagnostics.insert(key.into(), v);
        self
    }

    fn rejudged(mut self, tolerance: f64) -> Self {
        if self.status != Status::Skipped {
            self.tolerance = tolerance;
            self.status = if self.margin >= -tolerance {
                Status::Pass
            } else {
                Status::Fail
            };
        }
        self
    }

    pub fn pass(&self) -> bool {
        self.status == Status::Pass
    }
}

// ---------------------------------------------------------------- max principle

/// Margin min(sup decrease, inf increase, β₀ − β) between two strides.
pub fn max_principle_record(
    cur: &StrideStats,
    prev: &StrideStats,
    initial: &StrideStats,
    tol: f64,
) -> MonitorRecord {
    let d_sup = prev.sup_fx - cur.sup_fx;
    let d_inf = cur.inf_fx - prev.inf_fx;
    let d_beta = initial.beta - cur.beta;
    let margin = d_sup.min(d_inf).min(d_beta);
    let rec = MonitorRecord::judged(cur.t, MonitorId::MaxPrinciple, margin, tol)
        .with("sup_decrease", d_sup)
        .with("inf_increase", d_inf)
        .with("beta_slack", d_beta)
        .with("sup_fx", cur.sup_fx)
        .with("inf_fx", cur.inf_fx)
        .with("beta", cur.beta);
    if initial.beta > 1.0 {
        rec.demote("initial beta > 1: the slope maximum principle is not guaranteed")
    } else {
        rec
    }
}

/// One record per stride; the first stride compares with itself.
pub fn max_principle_check(traj: &Trajectory, tol: f64) -> Vec<MonitorRecord> {
    let s = &traj.snapshots;
    (0..s.len())
        .map(|k| max_principle_record(&s[k].stats, &s[k.saturating_sub(1)].stats, &s[0].stats, tol))
        .collect()
}

// ---------------------------------------------------------------- ellipticity

/// Sample lattice for h²K: `nx` nodes spread over the grid and `nh` log-spaced
/// offsets on each side of every node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelLattice {
    pub nx: usize,
    pub nh: usize,
    /// Smallest offset in cells.
    pub h_min_cells: f64,
    /// Largest offset as a fraction of the truncation radius.
    pub h_max_fraction: f64,
}

impl Default for KernelLattice {
    fn default() -> Self {
        KernelLattice {
            nx: 64,
            nh: 64,
            h_min_cells: 1.0,
            h_max_fraction: 0.25,
        }
    }
}

impl KernelLattice {
    pub fn nodes(&self, grid: &Grid) -> Vec<usize> {
        spread(grid.n(), self.nx.max(1))
    }

    pub fn offsets(&self, grid: &Grid, q: &QuadratureSpec) -> Vec<f64> {
        let lo = self.h_min_cells * grid.dx();
        let hi = (self.h_max_fraction * q.radius(grid)).max(lo);
        let m = self.nh.max(1);
        let pos: Vec<f64> = (0..m)
            .map(|k| {
                if m == 1 {
                    lo
                } else {
                    (lo.ln() + (hi / lo).ln() * k as f64 / (m - 1) as f64).exp()
                }
            })
            .collect();
        pos.iter()
            .map(|h| -h)
            .rev()
            .chain(pos.iter().copied())
            .collect()
    }
}

/// `count` indices spread evenly over 0..n, endpoints included.
fn spread(n: usize, count: usize) -> Vec<usize> {
    if count >= n {
        return (0..n).collect();
    }
    if count == 1 {
        return vec![n / 2];
    }
    let mut v: Vec<usize> = (0..count)
        .map(|k| ((k as f64) * (n - 1) as f64 / (count - 1) as f64).round() as usize)
        .collect();
    v.dedup();
    v
}

/// Relative sandwich margin min(h²K/λ − 1, 1 − h²K/Λ) over the lattice.
pub fn ellipticity_record(
    prep: &Prepared<'_>,
    lattice: &KernelLattice,
    tol: f64,
) -> Result<MonitorRecord> {
    let state = prep.state();
    let t = state.t();
    let b = crate::grid::beta_of(prep.slopes());
    if b.beta >= 1.0 {
        return Ok(MonitorRecord::skipped(
            t,
            MonitorId::Ellipticity,
            "beta >= 1: no ellipticity bound",
        )
        .with("beta", b.beta));
    }
    let g = state.grid();
    let nodes = lattice.nodes(g);
    let hs = lattice.offsets(g, &prep.quadrature());
    // (margin, x, h, min h²K, max h²K) per node
    type Row = (f64, f64, f64, f64, f64);
    let rows: Result<Vec<Row>> = nodes
        .par_iter()
        .map(|&i| {
            let ks = prep.kernel_big_k_many(i, &hs)?;
            let mut best = (f64::INFINITY, 0.0, 0.0, f64::INFINITY, f64::NEG_INFINITY);
            for (&h, k) in hs.iter().zip(ks) {
                let v = h * h * k;
                let m = (v / b.lambda - 1.0).min(1.0 - v / b.big_lambda);
                if m < best.0 {
                    best = (m, g.x(i), h, best.3, best.4);
                }
                best.3 = best.3.min(v);
                best.4 = best.4.max(v);
            }
            Ok(best)
        })
        .collect();
    let rows = rows?;
    let mut worst = (f64::INFINITY, 0.0, 0.0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in rows {
        if r.0 < worst.0 {
            worst = (r.0, r.1, r.2);
        }
        lo = lo.min(r.3);
        hi = hi.max(r.4);
    }
    let mut rec = MonitorRecord::judged(t, MonitorId::Ellipticity, worst.0, tol)
        .with("h2K_min", lo)
        .with("h2K_max", hi)
        .with("lambda", b.lambda)
        .with("Lambda", b.big_lambda);
    rec.witness = Some(Witness {
        x: Some(worst.1),
        h: Some(worst.2),
        ..Witness::default()
    });
    Ok(rec)
}

pub fn ellipticity_check(
    state: &InterfaceState,
    lattice: &KernelLattice,
    q: &QuadratureSpec,
) -> Result<MonitorRecord> {
    let prep = Prepared::new(state, q)?;
    ellipticity_record(&prep, lattice, q.tolerance)
}

// ---------------------------------------------------------------- modulus

pub const PAIR_SUBSAMPLE: usize = 512;

fn pair_distance(grid: &Grid, i: usize, j: usize) -> f64 {
    let d = (grid.x(i) - grid.x(j)).abs();
    match grid.period() {
        Some(p) => d.min(p - d),
        None => d,
    }
}

/// ρ(|x_i − x_j|/t) − |f_x(x_i) − f_x(x_j)|.
pub fn modulus_pair_margin(
    fx: &[f64],
    grid: &Grid,
    rho: &ModulusSpec,
    t: f64,
    i: usize,
    j: usize,
) -> f64 {
    rho.rho(pair_distance(grid, i, j) / t) - (fx[i] - fx[j]).abs()
}

/// Worst pair over all pairs of a ≤512-node subsample plus every adjacent pair.
/// Ties keep the first pair in scan order.
pub fn modulus_scan(fx: &[f64], grid: &Grid, rho: &ModulusSpec, t: f64) -> (f64, usize, usize) {
    let n = grid.n();
    let sub = spread(n, PAIR_SUBSAMPLE);
    let rows: Vec<(f64, usize, usize)> = (0..sub.len())
        .into_par_iter()
        .map(|a| {
            let mut best = (f64::INFINITY, sub[a], sub[a]);
            for &j in &sub[a + 1..] {
                let m = modulus_pair_margin(fx, grid, rho, t, sub[a], j);
                if m < best.0 {
                    best = (m, sub[a], j);
                }
            }
            best
        })
        .collect();
    let mut adjacent: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
    if grid.mode() == BoundaryMode::Periodic {
        adjacent.push((n - 1, 0));
    }
    let adj = adjacent
        .iter()
        .map(|&(i, j)| (modulus_pair_margin(fx, grid, rho, t, i, j), i, j));
    rows.into_iter().chain(adj).fold(
        (f64::INFINITY, 0, 0),
        |acc, v| if v.0 < acc.0 { v } else { acc },
    )
}

pub fn modulus_record(slopes: &SlopeField, rho: &ModulusSpec, t: f64, tol: f64) -> MonitorRecord {
    if !(t > 0.0) {
        return MonitorRecord::skipped(t, MonitorId::Modulus, "needs t > 0");
    }
    let g = &slopes.grid;
    let (m, i, j) = modulus_scan(&slopes.fx, g, rho, t);
    let mut rec = MonitorRecord::judged(t, MonitorId::Modulus, m, tol)
        .with("i", i as f64)
        .with("j", j as f64);
    rec.witness = Some(Witness {
        x: Some(g.x(i)),
        y: Some(g.x(j)),
        h: Some(pair_distance(g, i, j)),
        xi: None,
    });
    rec
}

/// Modulus check with the default slope scheme and tolerance 10·dx².
pub fn modulus_check(state: &InterfaceState, rho: &ModulusSpec, t: f64) -> Result<MonitorRecord> {
    let slopes = slope(state, DiffScheme::default_for(state.grid().mode()))?;
    let dx = state.grid().dx();
    Ok(modulus_record(&slopes, rho, t, 10.0 * dx * dx))
}

// ---------------------------------------------------------------- curvature decay

/// ρ′(0)/t − max|f_xx|, with tolerance `rel_tol·ρ′(0)/t`.
pub fn curvature_record(t: f64, max_fxx: f64, rho: &ModulusSpec, rel_tol: f64) -> MonitorRecord {
    if !(t > 0.0) {
        return MonitorRecord::skipped(t, MonitorId::CurvatureDecay, "needs t > 0");
    }
    let bound = rho.rho_prime_zero() / t;
    MonitorRecord::judged(
        t,
        MonitorId::CurvatureDecay,
        bound - max_fxx,
        rel_tol * bound,
    )
    .with("max_fxx", max_fxx)
    .with("bound", bound)
    .with("t_max_fxx", t * max_fxx)
}

pub fn curvature_decay_check(
    traj: &Trajectory,
    rho: &ModulusSpec,
    rel_tol: f64,
) -> Vec<MonitorRecord> {
    let mut prev: Option<f64> = None;
    traj.snapshots
        .iter()
        .map(|s| {
            let mut r = curvature_record(s.stats.t, s.stats.max_fxx, rho, rel_tol);
            if let Some(p) = prev {
                r.diagnostics
                    .insert("max_fxx_change".into(), s.stats.max_fxx - p);
            }
            prev = Some(s.stats.max_fxx);
            r
        })
        .collect()
}

// ---------------------------------------------------------------- breakthrough

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Breakthrough {
    pub t: f64,
    pub margin: f64,
    pub witness: Witness,
}

/// First stride whose modulus margin is ≤ 0.
pub fn breakthrough_detect(traj: &Trajectory, rho: &ModulusSpec) -> Result<Option<Breakthrough>> {
    let scheme = traj.scheme();
    for s in &traj.snapshots {
        let t = s.stats.t;
        if !(t > 0.0) {
            continue;
        }
        let slopes = slope(&s.state, scheme)?;
        let rec = modulus_record(&slopes, rho, t, 0.0);
        if rec.margin <= 0.0 {
            return Ok(Some(Breakthrough {
                t,
                margin: rec.margin,
                witness: rec.witness.unwrap_or_default(),
            }));
        }
    }
    Ok(None)
}

// ---------------------------------------------------------------- f_t regularity

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FtRegularityConfig {
    /// Total pair budget, split evenly between the two separation ranges.
    pub pairs: usize,
    pub ranges: [(f64, f64); 2],
    /// Allowed ratio between the constants fitted on the two ranges.
    pub factor: f64,
}

impl Default for FtRegularityConfig {
    fn default() -> Self {
        FtRegularityConfig {
            pairs: 256,
            ranges: [(1e-3, 1e-2), (1e-2, 1e-1)],
            factor: 2.0,
        }
    }
}

const SEPARATIONS_PER_RANGE: usize = 8;

/// Fit of C in |f_t(x) − f_t(y)| ≤ C·(−ln|x−y|)·|x−y|·(1 + 1/t) on one range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogLipschitzFit {
    /// Geometric-mean (least-squares in log) constant.
    pub c_fit: f64,
    /// Largest ratio seen.
    pub c_max: f64,
    pub pairs: usize,
}

fn fit_range(
    prep: &Prepared<'_>,
    xs: &[f64],
    range: (f64, f64),
    t: f64,
) -> Result<LogLipschitzFit> {
    let ds: Vec<f64> = (0..SEPARATIONS_PER_RANGE)
        .map(|k| {
            let u = k as f64 / (SEPARATIONS_PER_RANGE - 1) as f64;
            (range.0.ln() + u * (range.1 / range.0).ln()).exp()
        })
        .collect();
    let rows: Result<Vec<Vec<f64>>> = xs
        .par_iter()
        .map(|&x| {
            let fx = prep.ft_pointwise(x)?;
            ds.iter()
                .map(|&d| {
                    let fy = prep.ft_pointwise(x + d)?;
                    let scale = (-d.ln()) * d * (1.0 + 1.0 / t);
                    Ok((fy - fx).abs() / scale)
                })
                .collect()
        })
        .collect();
    let ratios: Vec<f64> = rows?.into_iter().flatten().collect();
    let nz: Vec<f64> = ratios.iter().copied().filter(|r| *r > 0.0).collect();
    let c_fit = if nz.is_empty() {
        0.0
    } else {
        (nz.iter().map(|r| r.ln()).sum::<f64>() / nz.len() as f64).exp()
    };
    Ok(LogLipschitzFit {
        c_fit,
        c_max: ratios.iter().copied().fold(0.0, f64::max),
        pairs: ratios.len(),
    })
}

/// Stability of the fitted log-Lipschitz constant across two separation ranges:
/// margin = factor − ratio of the two fits.
pub fn ft_regularity_record(
    prep: &Prepared<'_>,
    ft_nodes: &[f64],
    cfg: &FtRegularityConfig,
) -> Result<MonitorRecord> {
    let state = prep.state();
    let t = state.t();
    if !(t > 0.0) {
        return Ok(MonitorRecord::skipped(
            t,
            MonitorId::FtRegularity,
            "needs t > 0",
        ));
    }
    let g = state.grid();
    let d_max = cfg.ranges[0].1.max(cfg.ranges[1].1);
    let (lo, hi) = match g.period() {
        Some(p) => (g.x0(), g.x0() + p - d_max),
        None => {
            let q = 0.25 * g.span();
            (g.x0() + q, g.x(g.n() - 1) - q - d_max)
        }
    };
    if !(hi > lo) {
        return Ok(MonitorRecord::skipped(
            t,
            MonitorId::FtRegularity,
            "domain shorter than the separation ranges",
        ));
    }
    let per_range = (cfg.pairs / 2).max(SEPARATIONS_PER_RANGE);
    let nx = (per_range / SEPARATIONS_PER_RANGE).max(1);
    let xs: Vec<f64> = (0..nx)
        .map(|k| lo + (hi - lo) * (k as f64 + 0.5) / nx as f64)
        .collect();
    let a = fit_range(prep, &xs, cfg.ranges[0], t)?;
    let b = fit_range(prep, &xs, cfg.ranges[1], t)?;
    let ratio = if a.c_fit == 0.0 && b.c_fit == 0.0 {
        1.0
    } else {
        a.c_fit.max(b.c_fit) / a.c_fit.min(b.c_fit)
    };
    let ft_sup = ft_nodes.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    Ok(
        MonitorRecord::judged(t, MonitorId::FtRegularity, cfg.factor - ratio, 0.0)
            .with("c_fit_small", a.c_fit)
            .with("c_fit_large", b.c_fit)
            .with("c_max_small", a.c_max)
            .with("c_max_large", b.c_max)
            .with("ratio", ratio)
            .with("ft_sup", ft_sup)
            .with("ft_sup_over_log", ft_sup / (-t.ln()).max(1.0)),
    )
}

pub fn ft_regularity_check(
    state: &InterfaceState,
    q: &QuadratureSpec,
    pair_budget: usize,
) -> Result<MonitorRecord> {
    let prep = Prepared::new(state, q)?;
    let ft = prep.muskat_rhs()?;
    let cfg = FtRegularityConfig {
        pairs: pair_budget,
        ..FtRegularityConfig::default()
    };
    ft_regularity_record(&prep, &ft, &cfg)
}

// ---------------------------------------------------------------- time Hölder

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeHoelderDiag {
    pub t_center: f64,
    /// (Δ, ‖f_x(t+Δ) − f_x(t)‖∞) for snapshots in (t/2, 3t/2).
    pub samples: Vec<(f64, f64)>,
    /// Log-log slope; `None` when differences vanish or fewer than two usable samples.
    pub alpha_hat: Option<f64>,
    /// 95% interval from the regression standard error (needs ≥ 3 samples).
    pub confidence: Option<(f64, f64)>,
}

/// Hölder-in-time fit of f_x around the snapshot nearest the middle of the run.
pub fn time_hoelder_diag(traj: &Trajectory) -> Result<TimeHoelderDiag> {
    let s = &traj.snapshots;
    let t_mid = 0.5 * s.last().map_or(0.0, |l| l.stats.t);
    let c = s
        .iter()
        .enumerate()
        .filter(|(_, v)| v.stats.t > 0.0)
        .min_by(|a, b| {
            (a.1.stats.t - t_mid)
                .abs()
                .total_cmp(&(b.1.stats.t - t_mid).abs())
        })
        .map(|(k, _)| k);
    let Some(c) = c else {
        return Ok(TimeHoelderDiag {
            t_center: 0.0,
            samples: vec![],
            alpha_hat: None,
            confidence: None,
        });
    };
    time_hoelder_at(traj, c)
}

pub fn time_hoelder_at(traj: &Trajectory, center: usize) -> Result<TimeHoelderDiag> {
    let scheme = traj.scheme();
    let s = &traj.snapshots;
    let tc = s[center].stats.t;
    let fc = slope(&s[center].state, scheme)?.fx;
    let mut samples = Vec::new();
    for (k, snap) in s.iter().enumerate() {
        let t = snap.stats.t;
        if k == center || !(t > 0.5 * tc && t < 1.5 * tc) {
            continue;
        }
        let fx = slope(&snap.state, scheme)?.fx;
        let d = fx
            .iter()
            .zip(&fc)
            .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
        samples.push(((t - tc).abs(), d));
    }
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(dt, d)| *dt > 0.0 && *d > 0.0)
        .map(|(dt, d)| (dt.ln(), d.ln()))
        .collect();
    let (alpha_hat, confidence) = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        if sxx > 0.0 {
            let a = sxy / sxx;
            let ci = (pts.len() >= 3).then(|| {
                let res: f64 = pts
                    .iter()
                    .map(|p| (p.1 - my - a * (p.0 - mx)).powi(2))
                    .sum();
                let se = (res / (n - 2.0) / sxx).sqrt();
                (a - 1.96 * se, a + 1.96 * se)
            });
            (Some(a), ci)
        } else {
            (None, None)
        }
    } else {
        (None, None)
    };
    Ok(TimeHoelderDiag {
        t_center: tc,
        samples,
        alpha_hat,
        confidence,
    })
}

// ---------------------------------------------------------------- difference bounds

/// Checks |δ_h f + δ_{−h} f| ≤ ω(|h|)|h| and |δ_h f(c+ξ/2) − δ_h f(c−ξ/2)| ≤ ξω(|h|)
/// on node triples, for a state whose slope passes the modulus check with ω.
/// Margins are normalised by |h| and ξ respectively.
pub fn difference_bounds_check(
    state: &InterfaceState,
    omega: &ModulusSpec,
    samples: usize,
) -> Result<MonitorRecord> {
    let g = state.grid();
    let dx = g.dx();
    let tol = 10.0 * dx * dx;
    let t = state.t();
    let mut bare = *omega;
    bare.rescale = None;
    let slopes = slope(state, DiffScheme::default_for(g.mode()))?;
    let pre = modulus_record(&slopes, &bare, 1.0, tol);
    if !pre.pass() {
        return Ok(MonitorRecord::skipped(
            t,
            MonitorId::DifferenceBounds,
            "slope does not satisfy the modulus",
        )
        .with("modulus_margin", pre.margin));
    }
    let n = g.n();
    let side = (samples as f64).sqrt().ceil().max(2.0) as usize;
    let centers = spread(n, side);
    let kmax = (n / 4).max(1);
    let offsets: Vec<isize> = spread(kmax, side)
        .into_iter()
        .map(|k| k as isize + 1)
        .collect();
    let f = |j: isize| state.at(j);
    let mut worst = (f64::INFINITY, Witness::default());
    for &c in &centers {
        let c = c as isize;
        for &k in &offsets {
            for sgn in [1isize, -1] {
                let hk = sgn * k;
                let h = hk as f64 * dx;
                let w = bare.omega(h.abs());
                let second = (f(c + hk) + f(c - hk) - 2.0 * f(c)).abs();
                let m1 = w - second / h.abs();
                if m1 < worst.0 {
                    worst = (
                        m1,
                        Witness {
                            x: Some(g.x(c as usize)),
                            h: Some(h),
                            ..Witness::default()
                        },
                    );
                }
                for &l in &offsets {
                    let xi = 2.0 * l as f64 * dx;
                    let (p, q) = (c + l, c - l);
                    let lhs = (f(p + hk) - f(p) - f(q + hk) + f(q)).abs();
                    let m2 = w - lhs / xi;
                    if m2 < worst.0 {
                        worst = (
                            m2,
                            Witness {
                                x: Some(g.x(c as usize)),
                                h: Some(h),
                                xi: Some(xi),
                                ..Witness::default()
                            },
                        );
                    }
                }
            }
        }
    }
    let mut rec = MonitorRecord::judged(t, MonitorId::DifferenceBounds, worst.0, tol)
        .with("modulus_margin", pre.margin);
    rec.witness = Some(worst.1);
    Ok(rec)
}

// ---------------------------------------------------------------- monitor sets

/// Where the time-rescaled modulus ρ comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RhoSource {
    Spec {
        spec: ModulusSpec,
    },
    /// The theorem does not apply (β ≥ 1); dependent monitors are skipped.
    Inapplicable {
        reason: String,
    },
    /// The search found no admissible modulus; dependent monitors fail.
    Infeasible {
        reason: String,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonitorSet {
    pub enabled: Vec<MonitorId>,
    /// Overrides of the default tolerances.
    pub tolerances: BTreeMap<MonitorId, f64>,
    pub rho: RhoSource,
    /// ω for the difference-bounds monitor.
    pub omega: Option<ModulusSpec>,
    pub lattice: KernelLattice,
    pub ft: FtRegularityConfig,
    pub difference_samples: usize,
}

impl Default for MonitorSet {
    fn default() -> Self {
        MonitorSet {
            enabled: Vec::new(),
            tolerances: BTreeMap::new(),
            rho: RhoSource::Inapplicable {
                reason: "no modulus configured".into(),
            },
            omega: None,
            lattice: KernelLattice::default(),
            ft: FtRegularityConfig::default(),
            difference_samples: 4096,
        }
    }
}

/// Everything a per-stride monitor may read.
pub struct StrideContext<'a> {
    pub prepared: &'a Prepared<'a>,
    pub stats: &'a StrideStats,
    pub initial: &'a StrideStats,
    pub previous: Option<&'a StrideStats>,
    /// f_t at the nodes.
    pub ft: &'a [f64],
}

impl MonitorSet {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn with(mut self, id: MonitorId) -> Self {
        if !self.enabled.contains(&id) {
            self.enabled.push(id);
        }
        self
    }

    /// Default tolerance: relative for ellipticity (the quadrature tolerance) and
    /// curvature decay (0.1), the ratio slack for f_t regularity (0), and
    /// max(10·dx², quadrature tolerance) otherwise.
    pub fn tolerance(&self, id: MonitorId, grid: &Grid, q: &QuadratureSpec) -> f64 {
        if let Some(v) = self.tolerances.get(&id) {
            return *v;
        }
        let dx = grid.dx();
        match id {
            MonitorId::Ellipticity => q.tolerance,
            MonitorId::CurvatureDecay => 0.1,
            MonitorId::FtRegularity => 0.0,
            MonitorId::DifferenceBounds => 10.0 * dx * dx,
            _ => (10.0 * dx * dx).max(q.tolerance),
        }
    }

    pub fn evaluate(&self, ctx: &StrideContext<'_>) -> Result<Vec<MonitorRecord>> {
        let prep = ctx.prepared;
        let state = prep.state();
        let g = state.grid();
        let q = prep.quadrature();
        let t = ctx.stats.t;
        let mut out = Vec::with_capacity(self.enabled.len());
        for &id in &self.enabled {
            let tol = self.tolerance(id, g, &q);
            let rec = match id {
                MonitorId::MaxPrinciple => max_principle_record(
                    ctx.stats,
                    ctx.previous.unwrap_or(ctx.stats),
                    ctx.initial,
                    tol,
                ),
                MonitorId::Ellipticity => ellipticity_record(prep, &self.lattice, tol)?,
                MonitorId::Modulus | MonitorId::CurvatureDecay => match &self.rho {
                    RhoSource::Spec { spec } => {
                        if id == MonitorId::Modulus {
                            modulus_record(prep.slopes(), spec, t, tol)
                        } else {
                            curvature_record(t, ctx.stats.max_fxx, spec, tol)
                        }
                    }
                    RhoSource::Inapplicable { reason } => {
                        MonitorRecord::skipped(t, id, reason.clone())
                    }
                    RhoSource::Infeasible { reason } => {
                        MonitorRecord::failed(t, id, reason.clone())
                    }
                },
                MonitorId::FtRegularity => {
                    ft_regularity_record(prep, ctx.ft, &self.ft)?.rejudged(tol)
                }
                MonitorId::DifferenceBounds => match &self.omega {
                    Some(w) => {
                        let mut r = difference_bounds_check(state, w, self.difference_samples)?;
                        r.t = t;
                        r
                    }
                    None => MonitorRecord::skipped(t, id, "no modulus configured"),
                },
            };
            out.push(rec);
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------- summaries

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorSummary {
    pub name: MonitorId,
    pub status: Status,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    #[serde(with = "serde_num::opt_real")]
    pub worst_margin: Option<f64>,
    #[serde(with = "serde_num::opt_real")]
    pub worst_t: Option<f64>,
    pub worst_witness: Option<Witness>,
}

/// Folds per-stride records by monitor; the worst margin is taken over
/// non-skipped records.
pub fn summarize(records: &[MonitorRecord]) -> Vec<MonitorSummary> {
    let mut by: BTreeMap<MonitorId, Vec<&MonitorRecord>> = BTreeMap::new();
    for r in records {
        by.entry(r.name).or_default().push(r);
    }
    by.into_iter()
        .map(|(name, rs)| {
            let count = |s: Status| rs.iter().filter(|r| r.status == s).count();
            let (passed, failed, skipped) = (
                count(Status::Pass),
                count(Status::Fail),
                count(Status::Skipped),
            );
            let status = if failed > 0 {
                Status::Fail
            } else if passed > 0 {
                Status::Pass
            } else {
                Status::Skipped
            };
            let worst = rs
                .iter()
                .filter(|r| r.status != Status::Skipped && !r.margin.is_nan())
                .min_by(|a, b| a.margin.total_cmp(&b.margin));
            MonitorSummary {
                name,
                status,
                passed,
                failed,
                skipped,
                worst_margin: worst.map(|r| r.margin),
                worst_t: worst.map(|r| r.t),
                worst_witness: worst.and_then(|r| r.witness),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn spread_covers_endpoints() {
        assert_eq!(spread(10, 3), vec![0, 5, 9]);
        assert_eq!(spread(4, 10), vec![0, 1, 2, 3]);
    }

    #[test]
    fn modulus_touching_profile_is_found() {
        // f_x = ω(x) for x ≥ 0 and 0 below, so pairs (0, x) touch ω exactly;
        // a bump at one pair makes that pair the unique minimiser.
        let g = Grid::compact(-1.0, 1.0, 201).unwrap();
        let w = ModulusSpec::kiselev(0.1, 0.01, 1.0, 1.0, 1.0, 0.0);
        let mut fx: Vec<f64> = (0..201).map(|i| w.omega(g.x(i).max(0.0))).collect();
        fx[150] += 1e-3;
        let (m, i, j) = modulus_scan(&fx, &g, &w, 1.0);
        assert!(m < 0.0 && (m + 1e-3).abs() < 1e-12, "{m}");
        assert_eq!((i.min(j), i.max(j)), (100, 150));
        assert_eq!(modulus_pair_margin(&fx, &g, &w, 1.0, i, j), m);
    }

    #[test]
    fn flat_state_monitors_pass() {
        let s = InterfaceState::new(Grid::compact(-5.0, 5.0, 101).unwrap(), vec![0.0; 101], 0.5)
            .unwrap();
        let w = ModulusSpec::kiselev(0.1, 0.01, 1.0, 1.0, 1.0, 0.0);
        let r = modulus_check(&s, &w, 0.5).unwrap();
        assert!(r.pass());
        let q = QuadratureSpec::default();
        let e = ellipticity_check(
            &s,
            &KernelLattice {
                nx: 8,
                nh: 8,
                ..Default::default()
            },
            &q,
        )
        .unwrap();
        assert!(e.pass() && e.margin.abs() < 1e-6, "{e:?}");
        let f = ft_regularity_check(&s, &q, 64).unwrap();
        assert!(f.pass());
    }
}
