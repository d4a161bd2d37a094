//! Moduli of continuity ω, ω^(ε) and ρ(h) = ω(Ch), the five-term inequality
//! whose margin certifies that ω is preserved, and the (δ, γ) feasibility search.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_with_breaks, scaled_exp1, Integral};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// ξ − ξ^{3/2} below δ, logarithmic above.
    Kiselev,
    /// ξ^ε below δ, logarithmic above.
    HoelderEps,
}

/// The factor C in ρ(h) = ω(Ch).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Rescale {
    Finite {
        c: f64,
    },
    /// C overflows a double. `z = (2‖f′‖∞ − ω(δ))/γ`, so that
    /// ρ(h) = 2‖f′‖∞ + γ·ln(1 + e^{−z}·ln(h/(2‖f′‖∞))/4).
    Extreme {
        z: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusSpec {
    pub family: Family,
    pub delta: f64,
    pub gamma: f64,
    /// Hölder exponent, used by the hoelder-eps family.
    pub eps: f64,
    /// Set by [`rho_from_omega`]; `None` means C = 1.
    pub rescale: Option<Rescale>,
    pub slope_sup: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
}

/// Smallest admissible M for the given constants.
pub fn m_required(a: f64, slope_sup: f64, lambda: f64) -> f64 {
    (32.0 * a * slope_sup / lambda).max(1.0)
}

impl ModulusSpec {
    /// Kiselev-family spec with M = max(1, 32·A·s/λ).
    pub fn kiselev(
        delta: f64,
        gamma: f64,
        a: f64,
        lambda: f64,
        big_lambda: f64,
        slope_sup: f64,
    ) -> Self {
        ModulusSpec {
            family: Family::Kiselev,
            delta,
            gamma,
            eps: 1.0,
            rescale: None,
            slope_sup,
            a,
            m: m_required(a, slope_sup, lambda),
            lambda,
            big_lambda,
        }
    }

    pub fn hoelder(
        eps: f64,
        delta: f64,
        gamma: f64,
        a: f64,
        lambda: f64,
        big_lambda: f64,
        slope_sup: f64,
    ) -> Self {
        ModulusSpec {
            family: Family::HoelderEps,
            eps,
            ..Self::kiselev(delta, gamma, a, lambda, big_lambda, slope_sup)
        }
    }

    pub fn with_rescale(mut self, c: f64) -> Self {
        self.rescale = Some(Rescale::Finite { c });
        self
    }

    /// Upper bound on γ for concavity across ξ = δ.
    pub fn concavity_bound(&self) -> f64 {
        match self.family {
            Family::Kiselev => 4.0 * self.delta * (1.0 - 1.5 * self.delta.sqrt()),
            Family::HoelderEps => 4.0 * self.eps * self.delta.powf(self.eps),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidModulus(msg));
        let finite = [
            self.delta,
            self.gamma,
            self.eps,
            self.slope_sup,
            self.a,
            self.m,
            self.lambda,
            self.big_lambda,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("non-finite parameter".into());
        }
        if !(self.delta > 0.0) || !(self.gamma > 0.0) {
            return bad(format!(
                "δ = {}, γ = {} must be positive",
                self.delta, self.gamma
            ));
        }
        if self.family == Family::Kiselev && !(self.delta < 4.0 / 9.0) {
            return bad(format!(
                "δ = {} makes ξ − ξ^(3/2) non-increasing",
                self.delta
            ));
        }
        if self.family == Family::HoelderEps && !(self.eps > 0.0 && self.eps <= 1.0) {
            return bad(format!("ε = {} outside (0, 1]", self.eps));
        }
        if !(self.gamma < 4.0 * self.delta) {
            return bad(format!("γ = {} violates γ < 4δ", self.gamma));
        }
        if self.gamma > self.concavity_bound() {
            return bad(format!(
                "γ = {} exceeds the concavity bound {}",
                self.gamma,
                self.concavity_bound()
            ));
        }
        if !(self.a > 0.0)
            || !(self.lambda > 0.0)
            || self.big_lambda < self.lambda
            || self.slope_sup < 0.0
        {
            return bad("need A > 0, 0 < λ ≤ Λ and ‖f′‖ ≥ 0".into());
        }
        if self.m < m_required(self.a, self.slope_sup, self.lambda) * (1.0 - 1e-12) {
            return bad(format!("M = {} is below 32·A·‖f′‖/λ", self.m));
        }
        if let Some(Rescale::Finite { c }) = self.rescale {
            if !(c > 0.0) || !c.is_finite() {
                return bad(format!("rescale factor {c}"));
            }
        }
        Ok(())
    }

    fn small(&self, x: f64) -> f64 {
        match self.family {
            Family::Kiselev => x - x * x.sqrt(),
            Family::HoelderEps => x.powf(self.eps),
        }
    }

    pub fn omega_delta(&self) -> f64 {
        self.small(self.delta)
    }

    /// ω(ξ) for ξ ≥ 0 (no rescaling).
    pub fn omega(&self, xi: f64) -> f64 {
        if xi <= self.delta {
            self.small(xi)
        } else {
            self.omega_delta() + self.gamma * ((xi / self.delta).ln() / 4.0).ln_1p()
        }
    }

    /// ω′(ξ), left derivative at ξ = δ.
    pub fn omega_prime(&self, xi: f64) -> f64 {
        if xi <= self.delta {
            match self.family {
                Family::Kiselev => 1.0 - 1.5 * xi.sqrt(),
                Family::HoelderEps => self.eps * xi.powf(self.eps - 1.0),
            }
        } else {
            self.gamma / (xi * (4.0 + (xi / self.delta).ln()))
        }
    }

    pub fn omega_second(&self, xi: f64) -> f64 {
        if xi <= self.delta {
            match self.family {
                Family::Kiselev => -0.75 / xi.sqrt(),
                Family::HoelderEps => self.eps * (self.eps - 1.0) * xi.powf(self.eps - 2.0),
            }
        } else {
            let l = 4.0 + (xi / self.delta).ln();
            -self.gamma * (l + 1.0) / (xi * xi * l * l)
        }
    }

    /// ω(b) − ω(a) for 0 ≤ a ≤ b without cancellation.
    pub fn omega_diff(&self, a: f64, b: f64) -> f64 {
        let d = self.delta;
        if b <= d {
            match self.family {
                Family::Kiselev => {
                    let (sa, sb) = (a.sqrt(), b.sqrt());
                    if sa + sb == 0.0 {
                        return 0.0;
                    }
                    (b - a) * (1.0 - (a + sa * sb + b) / (sa + sb))
                }
                Family::HoelderEps => {
                    if a == 0.0 {
                        b.powf(self.eps)
                    } else {
                        a.powf(self.eps) * (self.eps * (b / a).ln()).exp_m1()
                    }
                }
            }
        } else if a >= d {
            let la = 4.0 + (a / d).ln();
            self.gamma * ((b / a).ln() / la).ln_1p()
        } else {
            self.omega_diff(a, d) + self.omega_diff(d, b)
        }
    }

    /// ∫₀^ξ ω(h)/h dh.
    pub fn int_over_h(&self, xi: f64) -> f64 {
        let small = |x: f64| match self.family {
            Family::Kiselev => x - 2.0 / 3.0 * x * x.sqrt(),
            Family::HoelderEps => x.powf(self.eps) / self.eps,
        };
        if xi <= self.delta {
            small(xi)
        } else {
            let v = (xi / self.delta).ln();
            small(self.delta)
                + self.omega_delta() * v
                + self.gamma * ((4.0 + v) * (v / 4.0).ln_1p() - v)
        }
    }

    /// ∫_a^∞ ω(h)/h² dh for a > 0.
    pub fn int_over_h2(&self, a: f64) -> f64 {
        let d = self.delta;
        if a >= d {
            let u = 4.0 + (a / d).ln();
            (self.omega(a) + self.gamma * scaled_exp1(u)) / a
        } else {
            let body = match self.family {
                Family::Kiselev => (d / a).ln() - 2.0 * (d.sqrt() - a.sqrt()),
                Family::HoelderEps if self.eps == 1.0 => (d / a).ln(),
                Family::HoelderEps => {
                    (a.powf(self.eps - 1.0) - d.powf(self.eps - 1.0)) / (1.0 - self.eps)
                }
            };
            body + self.int_over_h2(d)
        }
    }

    /// The rescale factor C as a finite number (∞ for the extreme case).
    pub fn c(&self) -> f64 {
        match self.rescale {
            None => 1.0,
            Some(Rescale::Finite { c }) => c,
            Some(Rescale::Extreme { .. }) => f64::INFINITY,
        }
    }

    /// ρ(h) = ω(C·h).
    pub fn rho(&self, h: f64) -> f64 {
        match self.rescale {
            None => self.omega(h),
            Some(Rescale::Finite { c }) => self.omega(c * h),
            Some(Rescale::Extreme { z }) => {
                if h <= 0.0 {
                    return 0.0;
                }
                let s2 = 2.0 * self.slope_sup;
                let arg = (-z).exp() * (h / s2).ln() / 4.0;
                if arg <= -1.0 {
                    return 0.0;
                }
                s2 + self.gamma * arg.ln_1p()
            }
        }
    }

    /// ρ′(0) = C·ω′(0).
    pub fn rho_prime_zero(&self) -> f64 {
        let w0 = match self.family {
            Family::Kiselev => 1.0,
            Family::HoelderEps if self.eps == 1.0 => 1.0,
            Family::HoelderEps => f64::INFINITY,
        };
        self.c() * w0
    }
}

/// ω(ξ); errors for ξ < 0.
pub fn omega(spec: &ModulusSpec, xi: f64) -> Result<f64> {
    if !(xi >= 0.0) {
        return Err(Error::InvalidArgument(format!("ω needs ξ ≥ 0, got {xi}")));
    }
    Ok(spec.omega(xi))
}

/// ω^(ε)(ξ); errors unless the spec is of the hoelder-eps family.
pub fn omega_eps(spec: &ModulusSpec, xi: f64) -> Result<f64> {
    if spec.family != Family::HoelderEps {
        return Err(Error::InvalidModulus(
            "omega_eps needs the hoelder-eps family".into(),
        ));
    }
    omega(spec, xi)
}

/// Root of ω(z) = target by bisection (on ln z above δ).
pub fn omega_inverse(spec: &ModulusSpec, target: f64) -> Result<f64> {
    if target <= 0.0 {
        return Ok(0.0);
    }
    let wd = spec.omega_delta();
    if target <= wd {
        let (mut lo, mut hi) = (0.0, spec.delta);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if spec.omega(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        return Ok(0.5 * (lo + hi));
    }
    let (mut lo, mut hi) = (spec.delta.ln(), f64::MAX.ln());
    if spec.omega(hi.exp()) < target {
        return Err(Error::OmegaRange {
            target,
            attained: spec.omega(f64::MAX),
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if spec.omega(mid.exp()) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Sets C = ω⁻¹(2‖f′‖∞)/(2‖f′‖∞), so that ρ(h) = ω(Ch) ≥ h up to ρ⁻¹(2‖f′‖∞).
pub fn rho_from_omega(spec: &ModulusSpec) -> Result<ModulusSpec> {
    spec.validate()?;
    let s2 = 2.0 * spec.slope_sup;
    let mut out = *spec;
    if s2 == 0.0 {
        // limit of ω⁻¹(y)/y as y → 0
        let c = match spec.family {
            Family::Kiselev => 1.0,
            Family::HoelderEps if spec.eps == 1.0 => 1.0,
            Family::HoelderEps => {
                return Err(Error::InvalidModulus("ρ needs ‖f′‖ > 0 for ε < 1".into()))
            }
        };
        out.rescale = Some(Rescale::Finite { c });
        return Ok(out);
    }
    let wd = spec.omega_delta();
    if s2 > wd {
        let z = (s2 - wd) / spec.gamma;
        // ln ω⁻¹(2s) = ln δ + 4·(e^z − 1)
        let ln_root = spec.delta.ln() + 4.0 * z.exp_m1();
        if !ln_root.is_finite() || ln_root - s2.ln() > 700.0 {
            out.rescale = Some(Rescale::Extreme { z });
            return Ok(out);
        }
    }
    let root = omega_inverse(spec, s2)?;
    out.rescale = Some(Rescale::Finite { c: root / s2 });
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginBreakdown {
    pub xi: f64,
    #[serde(rename = "M")]
    pub m: f64,
    /// A·ω′(ξ)(∫₀^ξ ω/h + ξ∫_ξ^∞ ω/h² + ln(M+1)·ω(ξ))
    pub t1: f64,
    /// A·ω(ξ)∫_{Mξ}^∞ ω/h²
    pub t2: f64,
    /// 2(Λ−λ)∫_ξ^{Mξ} (ω(h−ξ) − ω(ξ))₊/h²
    pub t3: f64,
    /// 2λ∫₀^ξ (ω(ξ+h) + ω(ξ−h) − 2ω(ξ))/h²
    pub t4: f64,
    /// 2λ∫_ξ^∞ (ω(h+ξ) − ω(h) − ω(ξ))/h²
    pub t5: f64,
    /// −ω′(ξ)ω(ξ)
    pub target: f64,
    pub total_margin: f64,
    /// Summed error estimates of the quadratures.
    pub quad_error: f64,
}

impl MarginBreakdown {
    /// Margin exceeds the quadrature error estimate.
    pub fn certified(&self) -> bool {
        self.total_margin > self.quad_error
    }

    pub fn terms(&self) -> [f64; 5] {
        [self.t1, self.t2, self.t3, self.t4, self.t5]
    }
}

const QUAD_REL: f64 = 1e-11;

/// Unconverged results are kept; their error estimate enters `quad_error`.
fn checked(name: &str, r: Integral) -> Result<Integral> {
    if r.value.is_finite() && r.error.is_finite() {
        Ok(r)
    } else {
        Err(Error::Quadrature {
            integral: name.into(),
            estimate: r.value,
            error: r.error,
        })
    }
}

/// Effective modulus w(h) = ω(C·h) used by the inequality.
struct Scaled<'a> {
    s: &'a ModulusSpec,
    c: f64,
}

impl Scaled<'_> {
    fn diff(&self, a: f64, b: f64) -> f64 {
        self.s.omega_diff(self.c * a, self.c * b)
    }
    fn second(&self, x: f64) -> f64 {
        self.c * self.c * self.s.omega_second(self.c * x)
    }
    fn kink(&self) -> f64 {
        self.s.delta / self.c
    }
}

/// The five right-hand-side terms at ξ with the spec's M.
pub fn margin_terms(spec: &ModulusSpec, xi: f64) -> Result<MarginBreakdown> {
    terms_with_m(spec, xi, spec.m)
}

/// Margin with M = 1 for ξ ≤ δ and the spec's M otherwise (δ/C for a rescaled ω).
pub fn margin_at(spec: &ModulusSpec, xi: f64) -> Result<MarginBreakdown> {
    let c = spec.c();
    if !c.is_finite() {
        return Err(Error::InvalidModulus(
            "margin needs a finite rescale factor".into(),
        ));
    }
    let m = if xi <= spec.delta / c { 1.0 } else { spec.m };
    terms_with_m(spec, xi, m)
}

fn terms_with_m(spec: &ModulusSpec, xi: f64, m: f64) -> Result<MarginBreakdown> {
    if !(xi > 0.0) || !xi.is_finite() {
        return Err(Error::InvalidArgument(format!("ξ = {xi} must be positive")));
    }
    spec.validate()?;
    let c = spec.c();
    if !c.is_finite() {
        return Err(Error::InvalidModulus(
            "terms need a finite rescale factor".into(),
        ));
    }
    let sc = Scaled { s: spec, c };
    let x = c * xi;
    let (lam, big) = (spec.lambda, spec.big_lambda);
    let w_xi = spec.omega(x);
    let wp = c * spec.omega_prime(x);
    let mut err = 0.0;
    // absolute floor on the natural scale ω(ξ)/ξ of the integral terms
    let abs = 1e-13 * w_xi / xi;

    let t1 = spec.a * wp * (spec.int_over_h(x) + x * spec.int_over_h2(x) + (m + 1.0).ln() * w_xi);
    let t2 = spec.a * w_xi * c * spec.int_over_h2(m * x);

    let kink = sc.kink();
    let t3 = if m > 2.0 && big > lam {
        let mut br = vec![2.0 * xi];
        if xi + kink > 2.0 * xi && xi + kink < m * xi {
            br.push(xi + kink);
        }
        br.push(m * xi);
        let r = checked(
            "t3",
            integrate_with_breaks(|h| sc.diff(xi, h - xi) / (h * h), &br, abs, QUAD_REL),
        )?;
        err += 2.0 * (big - lam) * r.error;
        2.0 * (big - lam) * r.value
    } else {
        0.0
    };

    let t4 = {
        // ω′ jumps at the kink; closer than 1e-8·ξ the kink is treated as sitting
        // at ξ and the logarithmically divergent part below h_t is dropped,
        // which understates the margin.
        let gap = (xi - kink).abs();
        let gap = if gap < 1e-8 * xi { 0.0 } else { gap };
        let h_t = if gap > 0.0 {
            1e-3 * gap.min(xi)
        } else {
            1e-8 * xi
        };
        let w2 = sc.second(xi);
        let f = |h: f64| {
            if h < h_t {
                w2
            } else {
                (sc.diff(xi, xi + h) - sc.diff(xi - h, xi)) / (h * h)
            }
        };
        let mut br = vec![0.0, h_t];
        if gap > h_t && gap < xi {
            br.push(gap);
        }
        br.push(xi);
        let r = checked("t4", integrate_with_breaks(f, &br, abs, QUAD_REL))?;
        err += 2.0 * lam * r.error;
        2.0 * lam * r.value
    };

    let t5 = {
        let big_h = 1e3 * xi.max(kink);
        let mut br = vec![xi];
        for p in [kink - xi, kink] {
            if p > xi && p < big_h {
                br.push(p);
            }
        }
        br.sort_by(f64::total_cmp);
        br.push(big_h);
        let near = checked(
            "t5",
            integrate_with_breaks(|h| sc.diff(h, h + xi) / (h * h), &br, abs, QUAD_REL),
        )?;
        // beyond H both points lie on the logarithmic branch; map h = H/u onto (0, 1]
        let far = checked(
            "t5 tail",
            integrate(
                |u| {
                    if u <= 0.0 {
                        return 0.0;
                    }
                    let h = big_h / u;
                    sc.diff(h, h + xi) / big_h
                },
                0.0,
                1.0,
                abs,
                QUAD_REL,
            ),
        )?;
        err += 2.0 * lam * (near.error + far.error);
        2.0 * lam * (near.value + far.value - w_xi / xi)
    };

    let target = -wp * w_xi;
    let total = target - (t1 + t2 + t3 + t4 + t5);
    Ok(MarginBreakdown {
        xi,
        m,
        t1,
        t2,
        t3,
        t4,
        t5,
        target,
        total_margin: total,
        quad_error: err,
    })
}

/// 200 log-spaced points on [10⁻⁶δ, 10⁶δ] plus δ and its floating-point neighbors.
pub fn verification_grid(delta: f64) -> Vec<f64> {
    let (lo, hi) = ((1e-6 * delta).ln(), (1e6 * delta).ln());
    let mut v: Vec<f64> = (0..200)
        .map(|k| (lo + (hi - lo) * k as f64 / 199.0).exp())
        .collect();
    v.push(delta);
    v.push(f64::from_bits(delta.to_bits() - 1));
    v.push(f64::from_bits(delta.to_bits() + 1));
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Margins on the verification grid, in grid order.
pub fn margin_sweep(spec: &ModulusSpec) -> Result<Vec<MarginBreakdown>> {
    verification_grid(spec.delta / spec.c())
        .par_iter()
        .map(|&xi| margin_at(spec, xi))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    /// γ must stay below this value.
    pub bound: f64,
}

/// Closed-form upper bounds on γ at a given δ.
pub fn gamma_constraints(
    family: Family,
    eps: f64,
    delta: f64,
    a: f64,
    lambda: f64,
    big_lambda: f64,
    slope_sup: f64,
) -> Vec<Constraint> {
    let probe = ModulusSpec {
        family,
        eps,
        ..ModulusSpec::kiselev(delta, 0.0, a, lambda, big_lambda, slope_sup)
    };
    let wd = probe.omega_delta();
    let m = probe.m;
    let mut v = vec![
        Constraint {
            name: "gamma < 4 delta".into(),
            bound: 4.0 * delta,
        },
        Constraint {
            name: "concavity at delta".into(),
            bound: probe.concavity_bound(),
        },
    ];
    if big_lambda > lambda {
        v.push(Constraint {
            name: "gamma <= lambda omega(delta) / (8 (Lambda - lambda))".into(),
            bound: lambda * wd / (8.0 * (big_lambda - lambda)),
        });
    }
    if slope_sup > 0.0 {
        v.push(Constraint {
            name: "(2 s A / M) gamma <= (lambda / 8) omega(delta)".into(),
            bound: lambda * wd * m / (16.0 * slope_sup * a),
        });
    }
    if m > 1.0 {
        v.push(Constraint {
            name: "gamma ln M <= omega(delta)".into(),
            bound: wd / m.ln(),
        });
    }
    v.push(Constraint {
        name: "(A ln(M+1) + 1) gamma < lambda / 4".into(),
        bound: lambda / (4.0 * (a * (m + 1.0).ln() + 1.0)),
    });
    v
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchRow {
    pub delta: f64,
    pub gamma_bound: f64,
    pub binding: String,
    /// Largest γ with positive margins, if any.
    pub gamma: Option<f64>,
    /// Smallest margin seen at the accepted γ (or at the smallest γ tried).
    #[serde(with = "crate::serde_num::real")]
    pub min_margin: f64,
    #[serde(with = "crate::serde_num::real")]
    pub min_margin_xi: f64,
    pub skipped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    #[serde(rename = "A")]
    pub a: f64,
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    pub slope_sup: f64,
    pub family: Family,
    pub eps: f64,
    pub spec: Option<ModulusSpec>,
    /// Constraint that limits γ at the chosen δ, or the reason for infeasibility.
    pub binding: String,
    pub trace: Vec<SearchRow>,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.spec.is_some()
    }
}

/// Smallest margin net of quadrature error, and where it occurs.
fn min_margin(spec: &ModulusSpec) -> Result<(f64, f64)> {
    let sweep = margin_sweep(spec)?;
    Ok(sweep
        .iter()
        .map(|b| (b.total_margin - b.quad_error, b.xi))
        .fold(
            (f64::INFINITY, 0.0),
            |acc, v| if v.0 < acc.0 { v } else { acc },
        ))
}

/// Search dyadic δ ∈ [2⁻³⁰, 2⁻²] for the largest γ meeting every closed-form
/// constraint with positive margins on the verification grid.
pub fn feasibility_search(
    a: f64,
    lambda: f64,
    big_lambda: f64,
    slope_sup: f64,
) -> Result<FeasibilityReport> {
    feasibility_search_family(Family::Kiselev, 1.0, a, lambda, big_lambda, slope_sup)
}

pub fn feasibility_search_family(
    family: Family,
    eps: f64,
    a: f64,
    lambda: f64,
    big_lambda: f64,
    slope_sup: f64,
) -> Result<FeasibilityReport> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "λ = {lambda}; the search needs λ > 0 (β < 1)"
        )));
    }
    if !(big_lambda >= lambda) || !(a > 0.0) || !(slope_sup >= 0.0) {
        return Err(Error::InvalidArgument("need Λ ≥ λ, A > 0, ‖f′‖ ≥ 0".into()));
    }
    let mut trace = Vec::new();
    let mut best: Option<(ModulusSpec, String)> = None;
    for k in 2..=30 {
        let delta = (0.5f64).powi(k);
        let cons = gamma_constraints(family, eps, delta, a, lambda, big_lambda, slope_sup);
        let binding = cons
            .iter()
            .min_by(|x, y| x.bound.total_cmp(&y.bound))
            .cloned()
            .unwrap();
        let bound = binding.bound;
        let mk = |gamma: f64| ModulusSpec {
            family,
            eps,
            ..ModulusSpec::kiselev(delta, gamma, a, lambda, big_lambda, slope_sup)
        };
        if let Some((b, _)) = &best {
            if bound <= b.gamma {
                trace.push(SearchRow {
                    delta,
                    gamma_bound: bound,
                    binding: binding.name.clone(),
                    gamma: None,
                    min_margin: f64::NAN,
                    min_margin_xi: f64::NAN,
                    skipped: true,
                });
                continue;
            }
        }
        let g_hi = bound * (1.0 - 1e-9);
        let (mm, mx) = min_margin(&mk(g_hi))?;
        if mm > 0.0 {
            trace.push(SearchRow {
                delta,
                gamma_bound: bound,
                binding: binding.name.clone(),
                gamma: Some(g_hi),
                min_margin: mm,
                min_margin_xi: mx,
                skipped: false,
            });
            best = Some((mk(g_hi), binding.name.clone()));
            continue;
        }
        let g_lo = g_hi * 1e-6;
        let (lo_m, lo_x) = min_margin(&mk(g_lo))?;
        if !(lo_m > 0.0) {
            trace.push(SearchRow {
                delta,
                gamma_bound: bound,
                binding: binding.name.clone(),
                gamma: None,
                min_margin: lo_m,
                min_margin_xi: lo_x,
                skipped: false,
            });
            continue;
        }
        let (mut lo, mut hi) = (g_lo.ln(), g_hi.ln());
        let mut at_lo = (lo_m, lo_x);
        for _ in 0..20 {
            let mid = 0.5 * (lo + hi);
            let r = min_margin(&mk(mid.exp()))?;
            if r.0 > 0.0 {
                lo = mid;
                at_lo = r;
            } else {
                hi = mid;
            }
        }
        let gamma = lo.exp();
        trace.push(SearchRow {
            delta,
            gamma_bound: bound,
            binding: "positive margin".into(),
            gamma: Some(gamma),
            min_margin: at_lo.0,
            min_margin_xi: at_lo.1,
            skipped: false,
        });
        if best.as_ref().is_none_or(|(b, _)| gamma > b.gamma) {
            best = Some((mk(gamma), "positive margin".into()));
        }
    }
    let (spec, binding) = match best {
        Some((s, b)) => (Some(s), b),
        None => (
            None,
            "no dyadic delta in [2^-30, 2^-2] gives positive margins".into(),
        ),
    };
    Ok(FeasibilityReport {
        a,
        lambda,
        big_lambda,
        slope_sup,
        family,
        eps,
        spec,
        binding,
        trace,
    })
}
