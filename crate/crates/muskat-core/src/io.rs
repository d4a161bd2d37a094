//! Artifact files: state CSVs with a JSON header line, monitors.csv and JSON documents.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::certificates::MonitorId;
use crate::config::SCHEMA_VERSION;
use crate::error::{Error, Result};
use crate::evolve::Trajectory;
use crate::grid::{BoundaryMode, Grid, InterfaceState, Limits};
use crate::modulus::MarginBreakdown;
use crate::serde_num;

/// Decimal with 17 significant digits; non-finite values as inf, -inf, nan.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        serde_num::fmt(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateHeader {
    pub schema_version: u32,
    pub k: usize,
    pub t: f64,
    pub n: usize,
    pub dx: f64,
    pub x0: f64,
    pub boundary_mode: BoundaryMode,
    #[serde(default)]
    pub limits: Option<Limits>,
}

pub fn state_csv(state: &InterfaceState, k: usize) -> String {
    let g = state.grid();
    let header = StateHeader {
        schema_version: SCHEMA_VERSION,
        k,
        t: state.t(),
        n: g.n(),
        dx: g.dx(),
        x0: g.x0(),
        boundary_mode: g.mode(),
        limits: state.limits(),
    };
    let mut s = String::with_capacity(48 * g.n() + 256);
    s.push_str("# ");
    s.push_str(&serde_json::to_string(&header).expect("header serializes"));
    s.push_str("\nx,f\n");
    for (i, v) in state.f().iter().enumerate() {
        let _ = writeln!(s, "{},{}", num(g.x(i)), num(*v));
    }
    s
}

pub fn parse_state_csv(text: &str) -> Result<(StateHeader, InterfaceState)> {
    let bad = |m: String| Error::InvalidState(m);
    let mut lines = text.lines();
    let first = lines.next().ok_or_else(|| bad("empty state file".into()))?;
    let json = first
        .strip_prefix('#')
        .ok_or_else(|| bad("first line must be `# {json header}`".into()))?;
    let h: StateHeader =
        serde_json::from_str(json.trim()).map_err(|e| bad(format!("state header: {e}")))?;
    if h.schema_version != SCHEMA_VERSION {
        return Err(bad(format!("state schema_version {}", h.schema_version)));
    }
    if lines.next().map(str::trim) != Some("x,f") {
        return Err(bad("second line must be `x,f`".into()));
    }
    let grid = Grid::new(h.n, h.dx, h.x0, h.boundary_mode)?;
    let mut f = Vec::with_capacity(h.n);
    for (i, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
        let mut it = line.split(',');
        let (Some(xs), Some(fs), None) = (it.next(), it.next(), it.next()) else {
            return Err(bad(format!("row {i}: expected `x,f`")));
        };
        let x = serde_num::parse(xs).ok_or_else(|| bad(format!("row {i}: x = `{xs}`")))?;
        let v = serde_num::parse(fs).ok_or_else(|| bad(format!("row {i}: f = `{fs}`")))?;
        if i >= h.n || (x - grid.x(i)).abs() > 1e-9 * h.dx.max(x.abs()) {
            return Err(bad(format!("row {i}: x = {x} is off the grid")));
        }
        f.push(v);
    }
    let state = match (h.boundary_mode, h.limits) {
        (BoundaryMode::Compact, Some(l)) => {
            InterfaceState::with_limits(grid, f, h.t, l, f64::INFINITY)?
        }
        _ => InterfaceState::new(grid, f, h.t)?,
    };
    Ok((h, state))
}

pub fn read_state_csv(path: &Path) -> Result<InterfaceState> {
    let text = fs::read_to_string(path)?;
    Ok(parse_state_csv(&text)?.1)
}

pub fn state_file_name(k: usize) -> String {
    format!("state_{k}.csv")
}

/// One row per stride: the stride statistics, the modulus margin and a
/// status/margin column pair for every monitor in `ids`.
pub fn monitors_csv(traj: &Trajectory, ids: &[MonitorId]) -> String {
    let mut s = String::from("t,step,dt,sup_fx,inf_fx,beta,lambda,Lambda,max_fxx,modulus_margin");
    for id in ids {
        let _ = write!(s, ",status_{0},margin_{0}", id.as_str());
    }
    s.push('\n');
    for snap in &traj.snapshots {
        let st = &snap.stats;
        let find = |id: MonitorId| snap.monitors.iter().find(|r| r.name == id);
        let modulus = find(MonitorId::Modulus).map_or(f64::NAN, |r| r.margin);
        let cols = [
            st.t,
            st.step as f64,
            st.dt,
            st.sup_fx,
            st.inf_fx,
            st.beta,
            st.lambda,
            st.big_lambda,
            st.max_fxx,
            modulus,
        ];
        let mut row: Vec<String> = cols.iter().map(|v| num(*v)).collect();
        row[1] = st.step.to_string();
        for id in ids {
            match find(*id) {
                Some(r) => {
                    row.push(r.status.as_str().into());
                    row.push(num(r.margin));
                }
                None => {
                    row.push("absent".into());
                    row.push("nan".into());
                }
            }
        }
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn margins_csv(rows: &[MarginBreakdown]) -> String {
    let mut s = String::from("xi,M,t1,t2,t3,t4,t5,target,total_margin,quad_error\n");
    for b in rows {
        let v = [
            b.xi,
            b.m,
            b.t1,
            b.t2,
            b.t3,
            b.t4,
            b.t5,
            b.target,
            b.total_margin,
            b.quad_error,
        ];
        s.push_str(&v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    s
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("document serializes");
    s.push('\n');
    s
}

pub fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::write(dir.join(name), contents)
        .map_err(|e| Error::Io(format!("{}: {e}", dir.join(name).display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_round_trip_is_exact() {
        let g = Grid::compact(-1.0, 1.0, 21).unwrap();
        let f: Vec<f64> = g.xs().iter().map(|x| (3.0 * x).sin() / 7.0).collect();
        let s = InterfaceState::new(g, f, 0.125).unwrap();
        let text = state_csv(&s, 3);
        let (h, back) = parse_state_csv(&text).unwrap();
        assert_eq!(h.k, 3);
        assert_eq!(back, s);
        assert_eq!(state_csv(&back, 3), text);
    }

    #[test]
    fn malformed_state_is_rejected() {
        assert!(parse_state_csv("").is_err());
        assert!(parse_state_csv("x,f\n0,1\n").is_err());
        let g = Grid::periodic(0.0, 1.0, 8).unwrap();
        let s = InterfaceState::new(g, vec![0.0; 8], 0.0).unwrap();
        let text = state_csv(&s, 0).replacen("0.0000000000000000e0\n", "oops\n", 1);
        assert!(parse_state_csv(&text).is_err());
        let short: String = state_csv(&s, 0)
            .lines()
            .take(5)
            .map(|l| format!("{l}\n"))
            .collect();
        assert!(parse_state_csv(&short).is_err());
    }
}
