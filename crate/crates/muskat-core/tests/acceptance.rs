//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails.

use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use muskat::certificates::*;
use muskat::cli;
use muskat::config::RunConfig;
use muskat::evolve::*;
use muskat::grid::*;
use muskat::modulus::*;
use muskat::nonlocal::*;
use muskat::quadrature::QuadratureSpec;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn params(pairs: &[(&str, f64)]) -> Params {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), serde_json::json!(v)))
        .collect()
}

fn gaussian(n: usize, half: f64, amplitude: f64) -> InterfaceState {
    let g = Grid::compact(-half, half, n).unwrap();
    sample_scenario(
        "gaussian",
        &params(&[("amplitude", amplitude), ("width", 1.0)]),
        &g,
    )
    .unwrap()
}

fn tent(n: usize, amplitude: f64) -> InterfaceState {
    let g = Grid::compact(-10.0, 10.0, n).unwrap();
    sample_scenario(
        "tent",
        &params(&[("amplitude", amplitude), ("width", 1.0)]),
        &g,
    )
    .unwrap()
}

fn bounds(s: &InterfaceState, q: &QuadratureSpec) -> EllipticityBounds {
    beta_of(&slope(s, q.scheme_for(s.grid())).unwrap())
}

fn sup_diff(a: &[f64], b: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| (a[i] - b[i]).abs()).fold(0.0, f64::max)
}

/// Five-point derivative at interior nodes.
fn d_dx(v: &[f64], dx: f64) -> Vec<f64> {
    let n = v.len();
    let mut o = vec![f64::NAN; n];
    for i in 2..n - 2 {
        o[i] = (8.0 * (v[i + 1] - v[i - 1]) - (v[i + 2] - v[i - 2])) / (12.0 * dx);
    }
    o
}

/// ρ from the feasibility search on the state's own constants.
fn rho_for(s: &InterfaceState, q: &QuadratureSpec) -> Result<ModulusSpec, String> {
    let b = bounds(s, q);
    let rep =
        feasibility_search(1.0, b.lambda, b.big_lambda, b.slope_sup).map_err(|e| e.to_string())?;
    let w = rep
        .spec
        .ok_or_else(|| format!("infeasible: {}", rep.binding))?;
    rho_from_omega(&w).map_err(|e| e.to_string())
}

fn rho_label(rho: &ModulusSpec) -> String {
    match rho.rescale {
        Some(Rescale::Finite { c }) => format!("C = {c:.4e}"),
        Some(Rescale::Extreme { z }) => format!("extreme rescale z = {z:.1}"),
        None => "unscaled".into(),
    }
}

fn run(s: &InterfaceState, t_end: f64, monitors: MonitorSet) -> Trajectory {
    simulate(
        s,
        &StepperConfig::new(t_end),
        &QuadratureSpec::default(),
        &monitors,
    )
    .unwrap()
}

fn records(traj: &Trajectory, id: MonitorId) -> Vec<&MonitorRecord> {
    traj.snapshots
        .iter()
        .flat_map(|s| s.monitors.iter())
        .filter(|r| r.name == id)
        .collect()
}

fn worst(recs: &[&MonitorRecord]) -> String {
    match recs.iter().min_by(|a, b| a.margin.total_cmp(&b.margin)) {
        Some(r) => {
            let w = r.witness.unwrap_or_default();
            let f = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
            format!(
                "worst margin {:.3e} at t = {:.3}, x = {}, y = {}",
                r.margin,
                r.t,
                f(w.x),
                f(w.y)
            )
        }
        None => "no records".into(),
    }
}

fn c1_linear_rate() -> Outcome {
    let n = 512;
    let eps = 1e-3;
    let g = Grid::periodic(0.0, 2.0 * PI, n).unwrap();
    let s = InterfaceState::new(g, g.xs().iter().map(|x| eps * x.sin()).collect(), 0.0).unwrap();
    let last = run(&s, 1.0, MonitorSet::none()).last().state.clone();
    // first sine coefficient
    let amp = 2.0 / n as f64 * (0..n).map(|i| last.f()[i] * g.x(i).sin()).sum::<f64>();
    let ratio = amp / eps;
    let rel = ratio / (-PI).exp() - 1.0;
    outcome(
        rel.abs() <= 0.02,
        format!(
            "ratio {ratio:.8} vs e^-pi {:.8}, rel err {rel:.2e}",
            (-PI).exp()
        ),
    )
}

fn c2_kernel_closed_forms() -> Outcome {
    let q = QuadratureSpec::default();
    let lattice = KernelLattice::default();
    let mut flat_err: f64 = 0.0;
    for g in [
        Grid::compact(-10.0, 10.0, 401).unwrap(),
        Grid::periodic(0.0, 2.0 * PI, 256).unwrap(),
    ] {
        let s = InterfaceState::new(g, vec![0.0; g.n()], 0.0).unwrap();
        let prep = Prepared::new(&s, &q).unwrap();
        for k in prep
            .kernel_samples(&lattice.nodes(&g), &lattice.offsets(&g, &q))
            .unwrap()
        {
            flat_err = flat_err.max((k.h * k.h * k.big_k_value - 1.0).abs());
        }
    }
    // Linear data on a compact window is flat beyond it, which shifts K by about
    // 1/R² at every h. Offsets stay ≤ 10 so h²/R² is far below the tolerance.
    let g = Grid::compact(-1000.0, 1000.0, 2001).unwrap();
    let mut lin_err: f64 = 0.0;
    for m in [0.3, 0.8, -1.5] {
        let s = InterfaceState::new(g, g.xs().iter().map(|x| m * x).collect(), 0.0).unwrap();
        let prep = Prepared::new(&s, &q).unwrap();
        let nodes: Vec<usize> = (0..16).map(|k| 900 + 13 * k).collect();
        let hs: Vec<f64> = (0..32)
            .map(|k| 0.05 * (200.0f64).powf(k as f64 / 31.0))
            .flat_map(|h| [h, -h])
            .collect();
        for k in prep.kernel_samples(&nodes, &hs).unwrap() {
            lin_err = lin_err.max((k.h * k.h * k.big_k_value - 1.0 / (1.0 + m * m)).abs());
        }
    }
    outcome(
        flat_err <= 1e-6 && lin_err <= 1e-4,
        format!(
            "flat max|h^2K - 1| = {flat_err:.2e}, linear max|h^2K - 1/(1+m^2)| = {lin_err:.2e}"
        ),
    )
}

fn c3_ellipticity() -> Outcome {
    let q = QuadratureSpec::default();
    let s = gaussian(401, 20.0, 1.0);
    let b = bounds(&s, &q);
    let tau = 1e-2;
    let lattice = KernelLattice::default();
    let prep = Prepared::new(&s, &q).unwrap();
    let nodes = lattice.nodes(s.grid());
    let hs = lattice.offsets(s.grid(), &q);
    let samples = prep.kernel_samples(&nodes, &hs).unwrap();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in &samples {
        let v = k.h * k.h * k.big_k_value;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let consts_ok = (b.lambda - 0.0879).abs() < 5e-4 && (b.big_lambda - 1.736).abs() < 1e-3;
    let pass = consts_ok && lo >= b.lambda * (1.0 - tau) && hi <= b.big_lambda * (1.0 + tau);
    outcome(
        pass,
        format!(
            "lambda {:.4}, Lambda {:.4}; h^2K in [{lo:.4}, {hi:.4}] over {}x{} lattice",
            b.lambda,
            b.big_lambda,
            nodes.len(),
            hs.len()
        ),
    )
}

fn c4_ibp() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, half) in [("gaussian", 20.0), ("tent", 10.0)] {
        let mut errs = Vec::new();
        for n in [801usize, 1601] {
            let g = Grid::compact(-half, half, n).unwrap();
            let s = if name == "tent" {
                sample_scenario("tent", &Params::new(), &g).unwrap()
            } else {
                sample_scenario("gaussian", &Params::new(), &g).unwrap()
            };
            let q = QuadratureSpec::default();
            let a = slope_rhs(&s, &q).unwrap();
            let b = slope_rhs_preibp(&s, &q).unwrap();
            let d = d_dx(&muskat_rhs(&s, &q).unwrap(), g.dx());
            // f_x jumps at the tent's corners; compare away from them
            let idx: Vec<usize> = (2..n - 2)
                .filter(|&i| {
                    let x = g.x(i).abs();
                    name != "tent" || (x > 0.5 && (x - 1.0).abs() > 0.5 && x < 0.8 * half)
                })
                .collect();
            let e = sup_diff(&a, &b, &idx)
                .max(sup_diff(&a, &d, &idx))
                .max(sup_diff(&b, &d, &idx));
            let tol = (10.0 * g.dx() * g.dx()).max(1e-4);
            pass &= e <= tol;
            errs.push(e);
        }
        let shrink = errs[0] / errs[1];
        pass &= shrink >= 3.0;
        parts.push(format!(
            "{name}: {:.2e} -> {:.2e} (x{shrink:.2})",
            errs[0], errs[1]
        ));
    }
    outcome(pass, parts.join("; "))
}

fn max_principle_run(
    s: &InterfaceState,
    t_end: f64,
    extra: &[MonitorId],
    rho: Option<ModulusSpec>,
) -> Trajectory {
    let dx = s.grid().dx();
    let mut ms = MonitorSet::none().with(MonitorId::MaxPrinciple);
    for id in extra {
        ms = ms.with(*id);
    }
    ms.tolerances
        .insert(MonitorId::MaxPrinciple, 10.0 * dx * dx);
    if let Some(r) = rho {
        ms.rho = RhoSource::Spec { spec: r };
    }
    run(s, t_end, ms)
}

fn max_principle_ok(traj: &Trajectory, tol: f64) -> (bool, String) {
    let init = &traj.snapshots[0].stats;
    let mut ok = true;
    let mut worst = f64::INFINITY;
    for w in traj.snapshots.windows(2) {
        let (p, c) = (&w[0].stats, &w[1].stats);
        let m = (p.sup_fx - c.sup_fx)
            .min(c.inf_fx - p.inf_fx)
            .min(init.beta - c.beta);
        worst = worst.min(m);
        ok &= m >= -tol;
    }
    (
        ok,
        format!(
            "beta0 {:.4}, worst margin {worst:.2e} (tol {tol:.1e})",
            init.beta
        ),
    )
}

fn c5_max_principle() -> Outcome {
    let q = QuadratureSpec::default();
    let gs = gaussian(401, 20.0, 1.0);
    let g_traj = max_principle_run(&gs, 1.0, &[], None);
    let (ok_g, dg) = max_principle_ok(&g_traj, 10.0 * gs.grid().dx().powi(2));

    let grid = Grid::periodic(0.0, 2.0 * PI, 256).unwrap();
    let ss = sample_scenario("sine", &params(&[("amplitude", 0.99)]), &grid).unwrap();
    let s_traj = max_principle_run(&ss, 1.0, &[], None);
    let (ok_s, ds) = max_principle_ok(&s_traj, 10.0 * grid.dx().powi(2));

    let beta_ok =
        (bounds(&gs, &q).beta - 0.736).abs() < 1e-3 && (bounds(&ss, &q).beta - 0.98).abs() < 1e-3;
    let monitor_ok = [&g_traj, &s_traj].iter().all(|t| {
        records(t, MonitorId::MaxPrinciple)
            .iter()
            .all(|r| r.status == Status::Pass)
    });
    outcome(
        ok_g && ok_s && beta_ok && monitor_ok,
        format!("gaussian: {dg}; sine 0.99: {ds}"),
    )
}

fn modulus_run(name: &str, s: &InterfaceState) -> (bool, String) {
    let q = QuadratureSpec::default();
    let rho = match rho_for(s, &q) {
        Ok(r) => r,
        Err(e) => return (false, format!("{name}: {e}")),
    };
    let traj = max_principle_run(s, 1.0, &[MonitorId::Modulus], Some(rho));
    let recs: Vec<&MonitorRecord> = records(&traj, MonitorId::Modulus)
        .into_iter()
        .filter(|r| r.t >= 0.05 - 1e-12)
        .collect();
    let ok = !recs.is_empty() && recs.iter().all(|r| r.status == Status::Pass);
    (
        ok,
        format!(
            "{name} ({}): {} strides, {}",
            rho_label(&rho),
            recs.len(),
            worst(&recs)
        ),
    )
}

// Unit-size data drives the searched γ so low that ρ is in the extreme regime and
// the check is nearly vacuous; the small-amplitude runs keep C finite.
fn c6_modulus() -> Outcome {
    let runs = [
        ("gaussian", gaussian(401, 20.0, 1.0)),
        ("tent", tent(401, 0.5)),
        ("gaussian 0.05", gaussian(401, 20.0, 0.05)),
        ("tent 0.05", tent(401, 0.05)),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, s) in &runs {
        let (p, d) = modulus_run(name, s);
        ok &= p;
        parts.push(d);
    }
    outcome(ok, parts.join("; "))
}

fn curvature_run(s: &InterfaceState) -> (bool, String) {
    let q = QuadratureSpec::default();
    let b = bounds(s, &q);
    let rho = match rho_for(s, &q) {
        Ok(r) => r,
        Err(e) => return (false, e),
    };
    let traj = run(s, 1.0, MonitorSet::none());
    let bound = rho.rho_prime_zero();
    let mut ok = b.beta < 1.0;
    let mut worst = f64::INFINITY;
    let mut count = 0;
    for snap in traj.snapshots.iter().filter(|sn| sn.stats.t >= 0.1 - 1e-12) {
        let lim = 1.1 * bound / snap.stats.t;
        worst = worst.min(1.0 - snap.stats.max_fxx / lim);
        ok &= snap.stats.max_fxx <= lim;
        count += 1;
    }
    ok &= count > 0;
    let d = format!(
        "amplitude {:.2}: beta {:.4}, rho'(0) = {bound:.4e} ({}), {count} strides, min relative slack {worst:.3}",
        s.f().iter().copied().fold(0.0, f64::max),
        b.beta,
        rho_label(&rho)
    );
    (ok, d)
}

fn c7_curvature() -> Outcome {
    let (a, da) = curvature_run(&tent(401, 0.5));
    let (b, db) = curvature_run(&tent(401, 0.05));
    outcome(a && b, format!("{da}; {db}"))
}

fn c8_certificate() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for lam in [1.0, 0.1, 0.01] {
        let out = dir.path().join(format!("l{lam}"));
        let text = serde_json::json!({
            "modulus": {"A": 1.0, "lambda": lam, "Lambda": 2.0, "slope_sup": 1.0},
            "output": {"dir": out}
        })
        .to_string();
        let cfg = RunConfig::from_json(&text).unwrap();
        let code = cli::certify_config(&cfg).unwrap();
        let doc: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("modulus.json")).unwrap()).unwrap();
        let margins = fs::read_to_string(out.join("margins.csv")).unwrap();
        let rows: Vec<f64> = margins
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(8).unwrap().parse().unwrap())
            .collect();
        let all_pos = rows.iter().all(|m| *m > 0.0);
        ok &= code == cli::EXIT_OK && rows.len() >= 200 && all_pos;
        parts.push(format!(
            "lambda {lam}: delta {}, gamma {:.3e}, {} points, min margin {:.3e}",
            doc["omega"]["delta"],
            doc["omega"]["gamma"].as_f64().unwrap_or(f64::NAN),
            rows.len(),
            rows.iter().copied().fold(f64::INFINITY, f64::min)
        ));
    }
    // margin(ω_r, ξ) = r·margin(ω, rξ)
    let w = ModulusSpec::kiselev(0.25, 0.036, 1.0, 1.0, 2.0, 1.0);
    let mut worst: f64 = 0.0;
    for r in [0.5, 3.0, 17.0] {
        let wr = w.with_rescale(r);
        for xi in [1e-4, 3e-3, 0.01, 0.2, 1.0, 40.0] {
            let a = margin_at(&wr, xi).unwrap().total_margin;
            let b = r * margin_at(&w, r * xi).unwrap().total_margin;
            worst = worst.max((a - b).abs() / b.abs());
        }
    }
    ok &= worst <= 1e-6;
    parts.push(format!("rescaling identity rel err {worst:.2e}"));
    outcome(ok, parts.join("; "))
}

fn c9_difference_bounds() -> Outcome {
    let w = ModulusSpec::kiselev(0.25, 0.2, 1.0, 1.0, 2.0, 0.1);
    if let Err(e) = w.validate() {
        return outcome(false, e.to_string());
    }
    let s0 = gaussian(401, 20.0, 0.1);
    let s1 = run(&s0, 0.25, MonitorSet::none()).last().state.clone();
    let mut ok = true;
    let mut parts = Vec::new();
    for s in [&s0, &s1] {
        let pre = modulus_check(s, &w, 1.0).unwrap();
        let rec = difference_bounds_check(s, &w, 4096).unwrap();
        ok &= pre.pass() && rec.status == Status::Pass;
        parts.push(format!(
            "t = {}: modulus margin {:.3e}, difference margin {:.3e}",
            s.t(),
            pre.margin,
            rec.margin
        ));
    }
    outcome(ok, parts.join("; "))
}

fn c10_ft_regularity() -> Outcome {
    let s = run(&gaussian(801, 20.0, 1.0), 0.5, MonitorSet::none())
        .last()
        .state
        .clone();
    let rec = ft_regularity_check(&s, &QuadratureSpec::default(), 256).unwrap();
    let ratio = rec.diagnostics.get("ratio").copied().unwrap_or(f64::NAN);
    outcome(
        rec.status == Status::Pass && (s.t() - 0.5).abs() < 1e-12,
        format!(
            "constant ratio {ratio:.3} (factor 2, margin {:.3})",
            rec.margin
        ),
    )
}

fn c11_scaling() -> Outcome {
    let base = gaussian(401, 20.0, 1.0);
    let t = 0.5;
    let ref_state = run(&base, t, MonitorSet::none()).last().state.clone();
    let mut ok = true;
    let mut parts = Vec::new();
    for r in [0.5, 2.0] {
        let scaled = base.rescaled(r).unwrap();
        let evolved = run(&scaled, r * t, MonitorSet::none()).last().state.clone();
        let expect = ref_state.rescaled(r).unwrap();
        let err = evolved
            .f()
            .iter()
            .zip(expect.f())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let tol = 10.0 * scaled.grid().dx().powi(2);
        ok &= err <= tol && (evolved.t() - r * t).abs() < 1e-12;
        parts.push(format!("r = {r}: sup err {err:.2e} (tol {tol:.2e})"));
    }
    outcome(ok, parts.join("; "))
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

fn c12_determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let out = root.path().join("out");
    let configs = [
        serde_json::json!({
            "scenario": {"name": "gaussian"},
            "grid": {"n": 201, "x0": -10.0, "x1": 10.0, "boundary_mode": "compact"},
            "stepper": {"t_end": 0.2, "output_stride": 5},
            "modulus": "auto",
            "output": {"dir": out}
        }),
        serde_json::json!({
            "modulus": {"lambda": 0.5, "Lambda": 2.0, "slope_sup": 1.0},
            "output": {"dir": out}
        }),
    ];
    let mut ok = true;
    let mut files = 0;
    for (k, body) in configs.iter().enumerate() {
        let cfg = RunConfig::from_json(&body.to_string()).unwrap();
        let mut outs = Vec::new();
        for _ in 0..2 {
            let _ = fs::remove_dir_all(&out);
            let code = if k == 0 {
                cli::simulate_config(&cfg)
            } else {
                cli::certify_config(&cfg)
            }
            .unwrap();
            ok &= code == cli::EXIT_OK;
            outs.push(dir_bytes(&out));
        }
        ok &= !outs[0].is_empty() && outs[0] == outs[1];
        files += outs[0].len();
    }
    outcome(
        ok,
        format!("{files} output files byte-identical across repeated runs"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 12] = [
        ("linear decay rate", c1_linear_rate),
        ("kernel closed forms", c2_kernel_closed_forms),
        ("ellipticity sandwich", c3_ellipticity),
        ("integration by parts", c4_ibp),
        ("maximum principle", c5_max_principle),
        ("modulus generation", c6_modulus),
        ("curvature decay", c7_curvature),
        ("modulus certificate", c8_certificate),
        ("difference bounds", c9_difference_bounds),
        ("f_t regularity", c10_ft_regularity),
        ("scaling covariance", c11_scaling),
        ("determinism", c12_determinism),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let tag = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failed += 1;
        }
        println!(
            "{tag} {:>2} {name}: {} [{:.1}s]",
            k + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
