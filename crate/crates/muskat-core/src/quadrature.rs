//! Quadrature building blocks: the symmetric node rules used by the nonlocal
//! operators, adaptive Gauss–Kronrod for the modulus toolkit, and the closed-form
//! tail integrals of the constant extension.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BoundaryMode, DiffScheme, Grid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnerRule {
    SymmetricMidpoint,
    SymmetricTrapezoid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CenterTreatment {
    TaylorLimit,
    Skip,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailMode {
    AnalyticConstantTail,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    #[serde(default = "default_rule")]
    pub inner_rule: InnerRule,
    /// `None` means the whole window in compact mode and half the period in periodic mode.
    #[serde(default)]
    pub truncation_radius: Option<f64>,
    #[serde(default = "default_center")]
    pub center_cell_treatment: CenterTreatment,
    #[serde(default = "default_tail")]
    pub tail_mode: TailMode,
    #[serde(default = "default_refinement")]
    pub refinement: usize,
    /// Declared relative tolerance τ of the discretized operators.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Difference scheme for f_x, f_xx; `None` picks the mode default.
    #[serde(default)]
    pub scheme: Option<DiffScheme>,
}

fn default_rule() -> InnerRule {
    InnerRule::SymmetricTrapezoid
}
fn default_center() -> CenterTreatment {
    CenterTreatment::TaylorLimit
}
fn default_tail() -> TailMode {
    TailMode::AnalyticConstantTail
}
fn default_refinement() -> usize {
    1
}
fn default_tolerance() -> f64 {
    1e-2
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            inner_rule: default_rule(),
            truncation_radius: None,
            center_cell_treatment: default_center(),
            tail_mode: default_tail(),
            refinement: default_refinement(),
            tolerance: default_tolerance(),
            scheme: None,
        }
    }
}

impl QuadratureSpec {
    pub fn with_scheme(mut self, scheme: DiffScheme) -> Self {
        self.scheme = Some(scheme);
        self
    }

    pub fn scheme_for(&self, grid: &Grid) -> DiffScheme {
        self.scheme
            .unwrap_or_else(|| DiffScheme::default_for(grid.mode()))
    }

    pub fn radius(&self, grid: &Grid) -> f64 {
        match (self.truncation_radius, grid.mode()) {
            (Some(r), _) => r,
            (None, BoundaryMode::Compact) => grid.span(),
            (None, BoundaryMode::Periodic) => 0.5 * grid.n() as f64 * grid.dx(),
        }
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let r = self.radius(grid);
        if !(r >= 10.0 * grid.dx()) || !r.is_finite() {
            return Err(Error::InvalidQuadrature(format!(
                "truncation radius {r} is below 10·dx = {}",
                10.0 * grid.dx()
            )));
        }
        if self.refinement < 1 {
            return Err(Error::InvalidQuadrature(
                "refinement must be at least 1".into(),
            ));
        }
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            return Err(Error::InvalidQuadrature(format!(
                "tolerance {}",
                self.tolerance
            )));
        }
        if self.scheme == Some(DiffScheme::Spectral) && grid.mode() != BoundaryMode::Periodic {
            return Err(Error::InvalidQuadrature(
                "spectral scheme needs periodic mode".into(),
            ));
        }
        Ok(())
    }

    /// Nodes per side covered by the truncation radius.
    pub fn radius_nodes(&self, grid: &Grid) -> usize {
        (self.radius(grid) / grid.dx() * (1.0 + 1e-12)).floor() as usize
    }
}

/// Offsets below this many cells get the refined sub-lattice.
pub(crate) const NEAR_CELLS: usize = 4;

/// Visit the positive offsets of a symmetric rule on (0, j_max·dx].
/// The callback receives (h, weight, node offset if h is a grid offset).
/// Returns the weight attached to the center value.
pub(crate) fn visit_paired(
    rule: InnerRule,
    dx: f64,
    refinement: usize,
    j_max: usize,
    mut visit: impl FnMut(f64, f64, Option<usize>),
) -> f64 {
    let r = refinement.max(1);
    let near = NEAR_CELLS.min(j_max);
    match rule {
        InnerRule::SymmetricTrapezoid => {
            if j_max == 0 {
                return 0.0;
            }
            if r == 1 {
                for j in 1..=j_max {
                    let w = if j == j_max { 0.5 * dx } else { dx };
                    visit(j as f64 * dx, w, Some(j));
                }
                return dx;
            }
            let hf = dx / r as f64;
            let kmax = near * r;
            for k in 1..=kmax {
                let mut w = if k == kmax { 0.5 * hf } else { hf };
                if k == kmax && j_max > near {
                    w += 0.5 * dx;
                }
                let node = (k % r == 0).then_some(k / r);
                let h = match node {
                    Some(j) => j as f64 * dx,
                    None => k as f64 * hf,
                };
                visit(h, w, node);
            }
            for j in near + 1..=j_max {
                let w = if j == j_max { 0.5 * dx } else { dx };
                visit(j as f64 * dx, w, Some(j));
            }
            hf
        }
        InnerRule::SymmetricMidpoint => {
            let hf = dx / r as f64;
            for j in 0..j_max {
                if j < near && r > 1 {
                    for k in 0..r {
                        visit(j as f64 * dx + (k as f64 + 0.5) * hf, hf, None);
                    }
                } else {
                    visit((j as f64 + 0.5) * dx, dx, None);
                }
            }
            0.0
        }
    }
}

/// Result of an adaptive quadrature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dxi = h * XGK[i];
        let s = f(c - dxi) + f(c + dxi);
        kron += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Globally adaptive Gauss–Kronrod (7/15) on [a, b].
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Integral {
    integrate_with_breaks(f, &[a, b], abs_tol, rel_tol)
}

/// As [`integrate`], with the interval pre-split at the given sorted break points.
pub fn integrate_with_breaks(
    f: impl Fn(f64) -> f64,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Integral {
    const MAX_INTERVALS: usize = 2000;
    let mut pieces: Vec<(f64, f64, f64, f64)> = Vec::new();
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let (v, e) = gk15(&f, w[0], w[1]);
            pieces.push((w[0], w[1], v, e));
        }
    }
    loop {
        let value: f64 = pieces.iter().map(|p| p.2).sum();
        let error: f64 = pieces.iter().map(|p| p.3).sum();
        if !value.is_finite() {
            return Integral {
                value,
                error,
                converged: false,
            };
        }
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return Integral {
                value,
                error,
                converged: true,
            };
        }
        if pieces.len() >= MAX_INTERVALS {
            return Integral {
                value,
                error,
                converged: false,
            };
        }
        let (k, _) =
            pieces.iter().enumerate().fold(
                (0, -1.0),
                |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc },
            );
        let (a, b, _, _) = pieces[k];
        let m = 0.5 * (a + b);
        if !(m > a && m < b) {
            return Integral {
                value,
                error,
                converged: false,
            };
        }
        let (v1, e1) = gk15(&f, a, m);
        let (v2, e2) = gk15(&f, m, b);
        pieces[k] = (a, m, v1, e1);
        pieces.push((m, b, v2, e2));
    }
}

/// Gauss–Legendre nodes and weights on [−1, 1], 8 points.
pub(crate) const GL8: [(f64, f64); 8] = [
    (
        -0.960289856497536231683560868569473,
        0.101228536290376259152531354309962,
    ),
    (
        -0.796666477413626739591553936475830,
        0.222381034453374470544355994426241,
    ),
    (
        -0.525532409916328985817739049189254,
        0.313706645877887287337962201986601,
    ),
    (
        -0.183434642495649804939476142360184,
        0.362683783378361982965150449277196,
    ),
    (
        0.183434642495649804939476142360184,
        0.362683783378361982965150449277196,
    ),
    (
        0.525532409916328985817739049189254,
        0.313706645877887287337962201986601,
    ),
    (
        0.796666477413626739591553936475830,
        0.222381034453374470544355994426241,
    ),
    (
        0.960289856497536231683560868569473,
        0.101228536290376259152531354309962,
    ),
];

pub(crate) fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    GL8.iter().map(|&(x, w)| w * f(c + h * x)).sum::<f64>() * h
}

/// e^x·E₁(x) for x > 0.
pub fn scaled_exp1(x: f64) -> f64 {
    assert!(x > 0.0, "scaled_exp1 needs x > 0");
    if x < 1.0 {
        const EULER: f64 = 0.577_215_664_901_532_9;
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..60 {
            term *= -x / k as f64;
            sum += term / k as f64;
        }
        return x.exp() * (-EULER - x.ln() - sum);
    }
    // modified Lentz on the continued fraction 1/(x+1- 1/(x+3- 4/(x+5- ...)))
    let tiny = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// atan(d/a)/d, continuous at d = 0.
pub(crate) fn atanc(d: f64, a: f64) -> f64 {
    let u = d / a;
    if u.abs() < 1e-4 {
        (1.0 - u * u / 3.0) / a
    } else {
        u.atan() / d
    }
}

/// ∫_a^∞ (d² + s²)⁻² ds for a > 0.
pub(crate) fn i2(d: f64, a: f64) -> f64 {
    let u = d / a;
    if u.abs() < 0.3 {
        let u2 = u * u;
        let mut sum = 0.0;
        let mut p = 1.0;
        for k in 0..40 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * (k + 1) as f64 * p / (2 * k + 3) as f64;
            p *= u2;
        }
        sum / (a * a * a)
    } else {
        let ad = d.abs();
        (ad / a).atan() / (2.0 * ad * ad * ad) - a / (2.0 * d * d * (d * d + a * a))
    }
}

/// ∫_a^∞ i2(d, h) dh.
pub(crate) fn j2(d: f64, a: f64) -> f64 {
    0.5 / (d * d + a * a) - a * i2(d, a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gk_integrates_smooth_and_singular_endpoints() {
        let r = integrate(|x| x.sin(), 0.0, std::f64::consts::PI, 0.0, 1e-13);
        assert!(r.converged && (r.value - 2.0).abs() < 1e-13);
        let r = integrate(|x| x.sqrt().ln(), 0.0, 1.0, 0.0, 1e-10);
        assert!((r.value + 0.5).abs() < 1e-9);
    }

    #[test]
    fn exp1_matches_known_values() {
        // E1(1) = 0.219383934395520, E1(0.5) = 0.559773594776161, E1(10) = 4.15696892968532e-6
        assert!((scaled_exp1(1.0) * (-1.0f64).exp() - 0.219383934395520).abs() < 1e-14);
        assert!((scaled_exp1(0.5) * (-0.5f64).exp() - 0.559773594776161).abs() < 1e-14);
        assert!((scaled_exp1(10.0) * (-10.0f64).exp() / 4.15696892968532e-6 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tail_closed_forms_match_quadrature() {
        for &(d, a) in &[
            (0.0, 1.0),
            (0.1, 2.0),
            (1.5, 0.7),
            (-3.0, 0.2),
            (1e-9, 5.0),
            (0.5, 1.0),
        ] {
            let oracle = integrate(
                |t| {
                    let s = a / t;
                    (a / (t * t)) / (d * d + s * s).powi(2)
                },
                0.0,
                1.0,
                0.0,
                1e-13,
            );
            assert!((i2(d, a) / oracle.value - 1.0).abs() < 1e-10, "i2 {d} {a}");
            let oracle = integrate(
                |t| {
                    let s = a / t;
                    (a / (t * t)) / (d * d + s * s)
                },
                0.0,
                1.0,
                0.0,
                1e-13,
            );
            assert!(
                (atanc(d, a) / oracle.value - 1.0).abs() < 1e-10,
                "atanc {d} {a}"
            );
            let oracle = integrate(
                |t| {
                    let s = a / t;
                    (a / (t * t)) * i2(d, s)
                },
                0.0,
                1.0,
                0.0,
                1e-12,
            );
            assert!((j2(d, a) / oracle.value - 1.0).abs() < 1e-8, "j2 {d} {a}");
        }
    }

    #[test]
    fn paired_rules_integrate_polynomials() {
        // ∫_0^3 h² dh with trapezoid refinement on the first cells
        for rule in [InnerRule::SymmetricTrapezoid, InnerRule::SymmetricMidpoint] {
            for r in [1, 2, 5] {
                let dx = 0.01;
                let mut s = 0.0;
                visit_paired(rule, dx, r, 300, |h, w, _| s += w * h * h);
                assert!((s - 9.0).abs() < 1e-3, "{rule:?} {r} {s}");
                let mut w_sum = visit_paired(rule, dx, r, 300, |_, _, _| {}) / 2.0;
                visit_paired(rule, dx, r, 300, |_, w, _| w_sum += w);
                assert!((w_sum - 3.0).abs() < 1e-12);
            }
        }
    }
}
