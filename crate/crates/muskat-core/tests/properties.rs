use std::f64::consts::PI;

use muskat::certificates::*;
use muskat::grid::*;
use muskat::modulus::*;
use muskat::nonlocal::*;
use muskat::quadrature::QuadratureSpec;
use proptest::prelude::*;

/// Periodic state on [0, 2π) from a few Fourier modes.
fn fourier(n: usize, modes: &[(f64, f64)]) -> InterfaceState {
    let g = Grid::periodic(0.0, 2.0 * PI, n).unwrap();
    let f = g
        .xs()
        .iter()
        .map(|x| {
            modes
                .iter()
                .enumerate()
                .map(|(k, (a, b))| {
                    let k = (k + 1) as f64;
                    a * (k * x).cos() + b * (k * x).sin()
                })
                .sum()
        })
        .collect();
    InterfaceState::new(g, f, 0.0).unwrap()
}

fn modes(amp: f64) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-amp..amp, -amp..amp), 1..4)
}

fn bounds_of(s: &InterfaceState) -> EllipticityBounds {
    beta_of(&slope(s, DiffScheme::default_for(s.grid().mode())).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn beta_is_bounded_by_squared_slope(m in modes(1.0)) {
        let b = bounds_of(&fourier(64, &m));
        prop_assert!(b.beta <= b.slope_sup * b.slope_sup * (1.0 + 1e-14));
        prop_assert!(b.lambda <= b.big_lambda);
    }

    #[test]
    fn slope_statistics_are_scale_invariant(m in modes(0.5), r in 0.25f64..4.0) {
        let s = fourier(64, &m);
        let a = bounds_of(&s);
        let b = bounds_of(&s.rescaled(r).unwrap());
        prop_assert!((a.beta - b.beta).abs() <= 1e-12 * (1.0 + a.beta.abs()));
        prop_assert!((a.slope_sup - b.slope_sup).abs() <= 1e-12 * (1.0 + a.slope_sup));
    }

    #[test]
    fn omega_is_concave_and_continuous(
        delta in 0.01f64..0.4,
        frac in 0.01f64..0.99,
        x in prop::collection::vec(1e-6f64..50.0, 3),
    ) {
        let gamma = frac * ModulusSpec::kiselev(delta, 1e-9, 1.0, 1.0, 1.0, 0.0).concavity_bound().min(4.0 * delta);
        let w = ModulusSpec::kiselev(delta, gamma, 1.0, 1.0, 1.0, 0.0);
        w.validate().unwrap();
        let mut x = x;
        x.sort_by(f64::total_cmp);
        prop_assume!(x[1] - x[0] > 1e-9 && x[2] - x[1] > 1e-9);
        let s1 = w.omega_diff(x[0], x[1]) / (x[1] - x[0]);
        let s2 = w.omega_diff(x[1], x[2]) / (x[2] - x[1]);
        prop_assert!(s2 <= s1 * (1.0 + 1e-9) + 1e-15);
        for xi in &x {
            prop_assert!((w.omega_diff(0.0, *xi) - w.omega(*xi)).abs() <= 1e-14 * w.omega(*xi));
        }
        let (lo, hi) = (w.omega(delta * (1.0 - 1e-10)), w.omega(delta * (1.0 + 1e-10)));
        prop_assert!((hi - lo).abs() <= 1e-9 * delta);
    }

    #[test]
    fn margin_is_monotone_in_a_lambda_and_gamma(
        a in 0.2f64..3.0,
        lam in 0.05f64..1.0,
        k in 0usize..40,
        grow in 1.05f64..2.0,
    ) {
        // slope_sup = 0 keeps M = 1, so only the monotone terms remain
        let base = ModulusSpec::kiselev(0.2, 0.01, a, lam, 2.0, 0.0);
        let xi = base.delta / 2.0 * 10f64.powf(-(k as f64) / 8.0);
        let m0 = margin_at(&base, xi).unwrap().total_margin;
        let more_a = ModulusSpec { a: a * grow, ..base };
        let more_lam = ModulusSpec { lambda: (lam * grow).min(2.0), ..base };
        let more_gamma = ModulusSpec { gamma: base.gamma * grow, ..base };
        prop_assert!(margin_at(&more_a, xi).unwrap().total_margin <= m0);
        prop_assert!(margin_at(&more_lam, xi).unwrap().total_margin >= m0);
        prop_assert!(margin_at(&more_gamma, xi).unwrap().total_margin <= m0);
    }

    #[test]
    fn modulus_scan_witness_is_a_real_pair(m in modes(0.3), c in 0.5f64..5.0, t in 0.05f64..2.0) {
        let s = fourier(128, &m);
        let sl = slope(&s, DiffScheme::default_for(BoundaryMode::Periodic)).unwrap();
        let rho = ModulusSpec::kiselev(0.25, 0.03, 1.0, 1.0, 2.0, 0.0).with_rescale(c);
        let (margin, i, j) = modulus_scan(&sl.fx, s.grid(), &rho, t);
        prop_assert_eq!(margin, modulus_pair_margin(&sl.fx, s.grid(), &rho, t, i, j));
        prop_assert!(i != j);
        // shrinking ρ can only lower the worst margin
        let smaller = rho.with_rescale(c * 0.5);
        prop_assert!(modulus_scan(&sl.fx, s.grid(), &smaller, t).0 <= margin);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn kernel_is_sandwiched_by_ellipticity_constants(m in modes(0.25)) {
        let s = fourier(128, &m);
        let b = bounds_of(&s);
        prop_assume!(b.beta < 1.0);
        let q = QuadratureSpec::default();
        let lattice = KernelLattice { nx: 16, nh: 16, ..KernelLattice::default() };
        let prep = Prepared::new(&s, &q).unwrap();
        let tau = 1e-2;
        for k in prep.kernel_samples(&lattice.nodes(s.grid()), &lattice.offsets(s.grid(), &q)).unwrap() {
            let v = k.h * k.h * k.big_k_value;
            prop_assert!(v >= b.lambda * (1.0 - tau) && v <= b.big_lambda * (1.0 + tau), "h²K = {} at {:?}", v, k);
        }
    }

    #[test]
    fn periodic_operators_commute_with_translation(m in modes(0.4), shift in 1usize..64) {
        let s = fourier(64, &m);
        let g = *s.grid();
        let mut rolled = s.f().to_vec();
        rolled.rotate_right(shift);
        let t = InterfaceState::new(g, rolled, 0.0).unwrap();
        let q = QuadratureSpec::default();
        let mut a = muskat_rhs(&s, &q).unwrap();
        a.rotate_right(shift);
        let b = muskat_rhs(&t, &q).unwrap();
        let scale = a.iter().fold(1e-300f64, |m, v| m.max(v.abs()));
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12 * scale);
        }
    }
}
