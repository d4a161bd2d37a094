//! The `simulate`, `certify-modulus` and `inspect` commands.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::certificates::{
    breakthrough_detect, summarize, time_hoelder_diag, Breakthrough, KernelLattice, MonitorSummary,
    RhoSource, Status, TimeHoelderDiag,
};
use crate::config::{Constants, ModulusConfig, RunConfig, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::evolve::{simulate_with_meta, SimError, Trajectory};
use crate::grid::{beta_of, slope, EllipticityBounds};
use crate::io;
use crate::modulus::{
    feasibility_search_family, margin_sweep, rho_from_omega, FeasibilityReport, ModulusSpec,
};
use crate::nonlocal::Prepared;
use crate::quadrature::QuadratureSpec;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_BLOWUP: i32 = 3;

/// Sets the global thread pool from `MUSKAT_THREADS` (0 or unset: automatic).
pub fn init_threads() {
    if let Some(n) = std::env::var("MUSKAT_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
    {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
}

/// The modulus resolved for a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusOutcome {
    pub constants: Option<Constants>,
    /// ω before time rescaling.
    pub omega: Option<ModulusSpec>,
    pub rho: RhoSource,
    pub feasibility: Option<FeasibilityReport>,
}

fn resolve_modulus(
    cfg: &ModulusConfig,
    initial: Option<&EllipticityBounds>,
) -> Result<ModulusOutcome> {
    let c = cfg.constants(initial)?;
    if !(c.lambda > 0.0) {
        return Ok(ModulusOutcome {
            constants: Some(c),
            omega: None,
            rho: RhoSource::Inapplicable {
                reason: format!(
                    "beta >= 1 (lambda = {:e}): no modulus is guaranteed",
                    c.lambda
                ),
            },
            feasibility: None,
        });
    }
    let (omega, feasibility) = match cfg.fixed_spec(&c)? {
        Some(s) => (Some(s), None),
        None => {
            let rep = feasibility_search_family(
                cfg.family,
                cfg.eps,
                cfg.a,
                c.lambda,
                c.big_lambda,
                c.slope_sup,
            )?;
            (rep.spec, Some(rep))
        }
    };
    let rho = match &omega {
        Some(w) => match rho_from_omega(w) {
            Ok(spec) => RhoSource::Spec { spec },
            Err(e) => RhoSource::Infeasible {
                reason: e.to_string(),
            },
        },
        None => RhoSource::Infeasible {
            reason: feasibility
                .as_ref()
                .map_or_else(String::new, |r| r.binding.clone()),
        },
    };
    Ok(ModulusOutcome {
        constants: Some(c),
        omega,
        rho,
        feasibility,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub snapshots: usize,
    pub steps: usize,
    pub t_final: f64,
    #[serde(default)]
    pub blow_up: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub schema_version: u32,
    pub command: String,
    pub version: String,
    pub config: RunConfig,
    pub initial: Option<EllipticityBounds>,
    pub modulus: Option<ModulusOutcome>,
    pub run: Option<RunSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub schema_version: u32,
    pub exit_code: i32,
    pub status: Status,
    pub monitors: Vec<MonitorSummary>,
    pub breakthrough: Option<Breakthrough>,
    pub time_hoelder: Option<TimeHoelderDiag>,
    #[serde(default)]
    pub blow_up: Option<String>,
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))
}

fn report(e: &dyn std::fmt::Display) {
    eprintln!("error: {e}");
}

pub fn cmd_simulate(config_path: &Path) -> i32 {
    let cfg = match RunConfig::load(config_path).and_then(|c| c.validate_common().map(|_| c)) {
        Ok(c) => c,
        Err(e) => {
            report(&e);
            return EXIT_INVALID;
        }
    };
    match simulate_config(&cfg) {
        Ok(code) => code,
        Err(e) => {
            report(&e);
            EXIT_INVALID
        }
    }
}

/// Runs a validated configuration and writes all artifacts; returns the exit code.
pub fn simulate_config(cfg: &RunConfig) -> Result<i32> {
    let stepper = cfg
        .stepper
        .ok_or_else(|| Error::Config("simulate needs a stepper block".into()))?;
    let initial = cfg
        .initial_state()?
        .ok_or_else(|| Error::Config("simulate needs scenario and grid blocks".into()))?;
    let q = cfg.quadrature;
    let dir = cfg.output.dir.clone();
    prepare_dir(&dir)?;

    let bounds = beta_of(&slope(&initial, q.scheme_for(initial.grid()))?);
    let outcome = match &cfg.modulus {
        Some(m) => Some(resolve_modulus(&m.config(), Some(&bounds))?),
        None => None,
    };
    let rho = outcome.as_ref().map_or(
        RhoSource::Inapplicable {
            reason: "no modulus block".into(),
        },
        |o| o.rho.clone(),
    );
    let omega = outcome.as_ref().and_then(|o| o.omega);
    let monitors = cfg.monitors.monitor_set(rho.clone(), omega);

    let (traj, blow_up) =
        match simulate_with_meta(&initial, &stepper, &q, &monitors, cfg.scenario.clone()) {
            Ok(t) => (t, None),
            Err(SimError::BlowUp {
                t,
                reason,
                trajectory,
            }) => (*trajectory, Some(format!("t = {t}: {reason}"))),
            Err(SimError::Invalid(e)) => return Err(e),
        };

    let records: Vec<_> = traj
        .snapshots
        .iter()
        .flat_map(|s| s.monitors.iter().cloned())
        .collect();
    let any_fail = records.iter().any(|r| r.status == Status::Fail);
    let exit_code = if blow_up.is_some() {
        EXIT_BLOWUP
    } else if any_fail {
        EXIT_FAIL
    } else {
        EXIT_OK
    };

    let breakthrough = match &rho {
        RhoSource::Spec { spec } if !traj.snapshots.is_empty() => breakthrough_detect(&traj, spec)?,
        _ => None,
    };
    let time_hoelder = if traj.snapshots.len() >= 3 {
        Some(time_hoelder_diag(&traj)?)
    } else {
        None
    };
    let cert = Certificate {
        schema_version: SCHEMA_VERSION,
        exit_code,
        status: if exit_code == EXIT_OK {
            Status::Pass
        } else {
            Status::Fail
        },
        monitors: summarize(&records),
        breakthrough,
        time_hoelder,
        blow_up: blow_up.clone(),
    };
    let last = traj.snapshots.last();
    let meta = Meta {
        schema_version: SCHEMA_VERSION,
        command: "simulate".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        initial: Some(bounds),
        modulus: outcome.clone(),
        run: Some(RunSummary {
            snapshots: traj.snapshots.len(),
            steps: last.map_or(0, |s| s.stats.step),
            t_final: last.map_or(0.0, |s| s.stats.t),
            blow_up,
        }),
    };
    write_trajectory(&dir, &traj, cfg)?;
    io::write(
        &dir,
        "monitors.csv",
        &io::monitors_csv(&traj, &monitors.enabled),
    )?;
    io::write(&dir, "certificate.json", &io::to_json(&cert))?;
    if let Some(o) = &outcome {
        if let RhoSource::Spec { spec } = &o.rho {
            io::write(&dir, "modulus.json", &io::to_json(spec))?;
        }
        if let Some(f) = &o.feasibility {
            io::write(&dir, "feasibility.json", &io::to_json(f))?;
        }
    }
    io::write(&dir, "meta.json", &io::to_json(&meta))?;
    Ok(exit_code)
}

fn write_trajectory(dir: &Path, traj: &Trajectory, cfg: &RunConfig) -> Result<()> {
    let n = traj.snapshots.len();
    for (k, s) in traj.snapshots.iter().enumerate() {
        if k % cfg.output.stride == 0 || k + 1 == n {
            io::write(dir, &io::state_file_name(k), &io::state_csv(&s.state, k))?;
        }
    }
    Ok(())
}

pub fn cmd_certify_modulus(config_path: &Path) -> i32 {
    let cfg = match RunConfig::load(config_path).and_then(|c| c.validate_common().map(|_| c)) {
        Ok(c) => c,
        Err(e) => {
            report(&e);
            return EXIT_INVALID;
        }
    };
    match certify_config(&cfg) {
        Ok(code) => code,
        Err(e) => {
            report(&e);
            EXIT_INVALID
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub points: usize,
    pub positive: usize,
    pub certified: usize,
    #[serde(with = "crate::serde_num::real")]
    pub min_margin: f64,
    #[serde(with = "crate::serde_num::real")]
    pub min_margin_xi: f64,
}

/// Feasibility search (or the fixed ω) plus the full margin sweep.
pub fn certify_config(cfg: &RunConfig) -> Result<i32> {
    let m = cfg
        .modulus
        .as_ref()
        .ok_or_else(|| Error::Config("certify-modulus needs a modulus block".into()))?
        .config();
    let initial = cfg.initial_state()?;
    let bounds = match &initial {
        Some(s) => Some(beta_of(&slope(s, cfg.quadrature.scheme_for(s.grid()))?)),
        None => None,
    };
    let c = m.constants(bounds.as_ref())?;
    if !(c.lambda > 0.0) {
        return Err(Error::Config(format!(
            "lambda = {:e}: beta >= 1 carries no modulus guarantee",
            c.lambda
        )));
    }
    let dir = cfg.output.dir.clone();
    prepare_dir(&dir)?;
    let outcome = resolve_modulus(&m, bounds.as_ref())?;
    if let Some(f) = &outcome.feasibility {
        io::write(&dir, "feasibility.json", &io::to_json(f))?;
    }
    let mut code = EXIT_FAIL;
    let mut sweep_summary = None;
    if let Some(w) = &outcome.omega {
        let sweep = margin_sweep(w)?;
        io::write(&dir, "margins.csv", &io::margins_csv(&sweep))?;
        let worst = sweep
            .iter()
            .min_by(|a, b| a.total_margin.total_cmp(&b.total_margin))
            .expect("non-empty sweep");
        let s = SweepSummary {
            points: sweep.len(),
            positive: sweep.iter().filter(|b| b.total_margin > 0.0).count(),
            certified: sweep.iter().filter(|b| b.certified()).count(),
            min_margin: worst.total_margin,
            min_margin_xi: worst.xi,
        };
        if s.certified == s.points {
            code = EXIT_OK;
        }
        sweep_summary = Some(s);
        let doc = serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "omega": w,
            "rho": &outcome.rho,
            "sweep": sweep_summary,
        });
        io::write(&dir, "modulus.json", &io::to_json(&doc))?;
    } else {
        eprintln!(
            "infeasible: {}",
            outcome
                .feasibility
                .as_ref()
                .map_or("", |f| f.binding.as_str())
        );
    }
    let meta = Meta {
        schema_version: SCHEMA_VERSION,
        command: "certify-modulus".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        initial: bounds,
        modulus: Some(outcome),
        run: None,
    };
    io::write(&dir, "meta.json", &io::to_json(&meta))?;
    if let Some(s) = sweep_summary {
        println!(
            "{} of {} margins certified; min margin {:e} at xi = {:e}",
            s.certified, s.points, s.min_margin, s.min_margin_xi
        );
    }
    Ok(code)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InspectMode {
    Summary,
    Kernel,
    Rhs,
}

pub fn cmd_inspect(path: &Path, mode: InspectMode, out: &mut dyn Write) -> i32 {
    match inspect(path, mode, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            report(&e);
            EXIT_INVALID
        }
    }
}

fn inspect(path: &Path, mode: InspectMode, out: &mut dyn Write) -> Result<()> {
    let state = io::read_state_csv(path)?;
    let q = QuadratureSpec::default();
    let prep = Prepared::new(&state, &q)?;
    let b = beta_of(prep.slopes());
    let max_fxx = prep
        .slopes()
        .fxx
        .iter()
        .fold(0.0, |m: f64, v| m.max(v.abs()));
    let mut s = String::new();
    for (k, v) in [
        ("t", state.t()),
        ("beta", b.beta),
        ("lambda", b.lambda),
        ("Lambda", b.big_lambda),
        ("sup_fx", b.sup_fx),
        ("inf_fx", b.inf_fx),
        ("max_fxx", max_fxx),
    ] {
        s.push_str(&format!("# {k} = {}\n", io::num(v)));
    }
    match mode {
        InspectMode::Summary => {}
        InspectMode::Kernel => {
            let lat = KernelLattice::default();
            let g = state.grid();
            let samples = prep.kernel_samples(&lat.nodes(g), &lat.offsets(g, &q))?;
            s.push_str("x,h,k_value,K_value\n");
            for k in samples {
                s.push_str(&format!(
                    "{},{},{},{}\n",
                    io::num(k.x),
                    io::num(k.h),
                    io::num(k.k_value),
                    io::num(k.big_k_value)
                ));
            }
        }
        InspectMode::Rhs => {
            let a = prep.muskat_rhs()?;
            let o = prep.muskat_rhs_original()?;
            let diff = a
                .iter()
                .zip(&o)
                .fold(0.0, |m: f64, (x, y)| m.max((x - y).abs()));
            s.push_str(&format!("# max_abs_difference = {}\n", io::num(diff)));
            s.push_str(&format!("# tolerance = {}\n", io::num(q.tolerance)));
            s.push_str("x,rhs,rhs_original,difference\n");
            for i in 0..a.len() {
                s.push_str(&format!(
                    "{},{},{},{}\n",
                    io::num(state.grid().x(i)),
                    io::num(a[i]),
                    io::num(o[i]),
                    io::num(a[i] - o[i])
                ));
            }
        }
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}
