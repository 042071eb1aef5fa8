//! CSV writers. Every file starts with `# `-prefixed header lines carrying
//! the schema version and the caller's configuration echo.

use std::io::{self, Write};

use crate::atlas::{DriftRun, RegionScan};
use crate::continuation::{EquilibriumBranch, ParamCurve};
use crate::dynamics::Trajectory;
use crate::model::{exchange, ModelParams};
use crate::periodic::PeriodicOrbit;
use crate::zone::{classify_rho, SwitchingZone, ZoneTag};

pub const SCHEMA_VERSION: u32 = 1;

/// Header lines, each written as `# line`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Header {
    pub lines: Vec<String>,
}

impl Header {
    pub fn new(kind: &str) -> Self {
        Self {
            lines: vec![format!("schema = welander/{kind}"), format!("schema_version = {SCHEMA_VERSION}")],
        }
    }

    pub fn with(mut self, line: impl Into<String>) -> Self {
        self.lines.push(line.into());
        self
    }

    /// Append a multi-line block, e.g. a serialized configuration.
    pub fn with_block(mut self, block: &str) -> Self {
        self.lines.extend(block.lines().map(str::to_owned));
        self
    }

    fn write(&self, w: &mut dyn Write) -> io::Result<()> {
        for l in &self.lines {
            if l.is_empty() {
                writeln!(w, "#")?;
            } else {
                writeln!(w, "# {l}")?;
            }
        }
        Ok(())
    }
}

fn zone_name(zone: &SwitchingZone, rho: f64) -> &'static str {
    match classify_rho(zone, rho) {
        ZoneTag::R1 => "R1",
        ZoneTag::R2 => "R2",
        _ => "S",
    }
}

/// Columns `t,x,y,rho,kappa,zone`.
pub fn write_trajectory(w: &mut dyn Write, header: &Header, params: &ModelParams, zone: &SwitchingZone, traj: &Trajectory) -> io::Result<()> {
    header.write(w)?;
    writeln!(w, "t,x,y,rho,kappa,zone")?;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let rho = s.rho();
        writeln!(w, "{t},{},{},{rho},{},{}", s.x, s.y, exchange(params, rho), zone_name(zone, rho))?;
    }
    Ok(())
}

/// Columns `t,kind,x,y`.
pub fn write_events(w: &mut dyn Write, header: &Header, traj: &Trajectory) -> io::Result<()> {
    header.write(w)?;
    writeln!(w, "t,kind,x,y")?;
    for e in &traj.events {
        writeln!(w, "{},{},{},{}", e.t, e.kind.as_str(), e.state.x, e.state.y)?;
    }
    Ok(())
}

/// Trajectory columns plus `mu`.
pub fn write_drift(w: &mut dyn Write, header: &Header, run: &DriftRun) -> io::Result<()> {
    header.write(w)?;
    writeln!(w, "t,x,y,rho,kappa,zone,mu")?;
    let traj = &run.trajectory;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let rho = s.rho();
        writeln!(
            w,
            "{t},{},{},{rho},{},{},{}",
            s.x,
            s.y,
            exchange(&run.params, rho),
            zone_name(&run.zone, rho),
            run.mu_at(*t)
        )?;
    }
    Ok(())
}

/// Columns `label,mu,t`.
pub fn write_transitions(w: &mut dyn Write, header: &Header, run: &DriftRun) -> io::Result<()> {
    header.write(w)?;
    writeln!(w, "label,mu,t")?;
    for tr in &run.transitions {
        writeln!(w, "{},{},{}", tr.label, tr.mu, tr.t)?;
    }
    Ok(())
}

/// Columns `t,x,y,rho,kappa,zone` over `[0, T]` sampled uniformly.
pub fn write_samples(w: &mut dyn Write, header: &Header, params: &ModelParams, zone: &SwitchingZone, times: &[f64], states: &[crate::State]) -> io::Result<()> {
    header.write(w)?;
    writeln!(w, "t,x,y,rho,kappa,zone")?;
    for (t, s) in times.iter().zip(states) {
        let rho = s.rho();
        writeln!(w, "{t},{},{},{rho},{},{}", s.x, s.y, exchange(params, rho), zone_name(zone, rho))?;
    }
    Ok(())
}

/// Columns `tau,t,x,y,rho,kappa,zone`, `per_interval` samples per mesh
/// interval.
pub fn write_orbit(w: &mut dyn Write, header: &Header, orbit: &PeriodicOrbit, zone: &SwitchingZone, per_interval: usize) -> io::Result<()> {
    header.write(w)?;
    writeln!(w, "tau,t,x,y,rho,kappa,zone")?;
    for (tau, s) in orbit.sample(per_interval) {
        let rho = s.rho();
        writeln!(
            w,
            "{tau},{},{},{},{rho},{},{}",
            tau * orbit.period,
            s.x,
            s.y,
            exchange(&orbit.params, rho),
            zone_name(zone, rho)
        )?;
    }
    Ok(())
}

/// Columns `mu,x,y,rho,stability,detJ,trJ`; markers go to a second file
/// with columns `kind,mu,x,y,rho`.
pub fn write_branch(w: &mut dyn Write, header: &Header, branch: &EquilibriumBranch) -> io::Result<()> {
    header.write(w)?;
    writeln!(w, "mu,x,y,rho,stability,detJ,trJ")?;
    for p in &branch.points {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            p.mu,
            p.state.x,
            p.state.y,
            p.state.rho(),
            p.stability.as_str(),
            p.det,
            p.trace
        )?;
    }
    Ok(())
}

pub fn write_branch_markers(w: &mut dyn Write, header: &Header, branch: &EquilibriumBranch) -> io::Result<()> {
    header.write(w)?;
    writeln!(w, "kind,mu,x,y,rho")?;
    for (kind, list) in [("fold", &branch.folds), ("hopf", &branch.hopfs)] {
        for p in list {
            writeln!(w, "{kind},{},{},{},{}", p.mu, p.state.x, p.state.y, p.state.rho())?;
        }
    }
    Ok(())
}

/// Columns `kind,mu,eta,aux1,aux2`; fold points flagged as SNIC carry the
/// kind `SNIC`.
pub fn write_curves(w: &mut dyn Write, header: &Header, curves: &[ParamCurve]) -> io::Result<()> {
    header.write(w)?;
    writeln!(w, "kind,mu,eta,aux1,aux2")?;
    for c in curves {
        for p in &c.points {
            let kind = if p.snic { "SNIC" } else { c.kind.as_str() };
            writeln!(w, "{kind},{},{},{},{}", p.mu, p.eta, p.aux1, p.aux2)?;
        }
    }
    Ok(())
}

/// Columns `kind,mu,eta`.
pub fn write_special_points(w: &mut dyn Write, header: &Header, curves: &[ParamCurve]) -> io::Result<()> {
    header.write(w)?;
    writeln!(w, "kind,mu,eta")?;
    let mut seen: Vec<(String, f64, f64)> = Vec::new();
    for c in curves {
        for s in &c.special_points {
            let key = (s.kind.as_str().to_owned(), s.mu, s.eta);
            if seen.iter().any(|k| k.0 == key.0 && (k.1 - key.1).abs() < 1e-9 && (k.2 - key.2).abs() < 1e-9) {
                continue;
            }
            writeln!(w, "{},{},{}", key.0, key.1, key.2)?;
            seen.push(key);
        }
    }
    Ok(())
}

/// Columns `mu,eta,tag,rho_min,rho_max`; failed nodes have empty extrema.
pub fn write_scan(w: &mut dyn Write, header: &Header, scan: &RegionScan) -> io::Result<()> {
    header.write(w)?;
    writeln!(w, "mu,eta,tag,rho_min,rho_max")?;
    for n in &scan.nodes {
        match &n.class {
            Some(c) => writeln!(w, "{},{},{},{},{}", n.mu, n.eta, n.tag, c.rho_min, c.rho_max)?,
            None => writeln!(w, "{},{},{},,", n.mu, n.eta, n.tag)?,
        }
    }
    Ok(())
}

/// Columns `tag,polyline,mu,eta`.
pub fn write_boundaries(w: &mut dyn Write, header: &Header, scan: &RegionScan) -> io::Result<()> {
    header.write(w)?;
    writeln!(w, "tag,polyline,mu,eta")?;
    for (i, b) in scan.boundaries.iter().enumerate() {
        for (mu, eta) in &b.points {
            writeln!(w, "{},{i},{mu},{eta}", b.tag)?;
        }
    }
    Ok(())
}

/// Generic numeric table.
pub fn write_table(w: &mut dyn Write, header: &Header, columns: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
    header.write(w)?;
    writeln!(w, "{}", columns.join(","))?;
    for r in rows {
        writeln!(w, "{}", r.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::{OscTag, ScanNode};

    #[test]
    fn header_lines_are_commented() {
        let h = Header::new("scan").with("epsilon = 0.009").with_block("[model]\nmu = 0.1\n");
        let mut buf = Vec::new();
        h.write(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().all(|l| l.starts_with('#')));
        assert!(text.contains("# schema_version = 1"));
        assert!(text.contains("# [model]"));
    }

    #[test]
    fn scan_rows_keep_full_precision() {
        let scan = RegionScan {
            epsilon: 0.009,
            mu: vec![0.1],
            eta: vec![-0.17],
            nodes: vec![ScanNode {
                mu: 0.1 + 1e-16,
                eta: -1.0 / 3.0,
                tag: OscTag::Unknown,
                class: None,
                error: Some("x".into()),
            }],
            boundaries: vec![],
        };
        let mut buf = Vec::new();
        write_scan(&mut buf, &Header::new("scan"), &scan).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let row = text.lines().last().unwrap();
        let eta: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(eta, -1.0 / 3.0);
        assert!(row.ends_with("UNKNOWN,,"));
    }
}
