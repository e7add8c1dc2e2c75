//! Files written for a finished run.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use super::engine::World;
use super::metrics::{AgentReport, RunReport};

/// Rounds to nine significant digits.
pub fn sig9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

/// Float formatted the way all output files use.
pub fn fmt9(x: f64) -> String {
    format!("{}", sig9(x))
}

impl AgentReport {
    pub fn rounded(&self) -> Self {
        Self {
            l: sig9(self.l),
            t: sig9(self.t),
            vbar: sig9(self.vbar),
            vmax: sig9(self.vmax),
            dmin: self.dmin.map(sig9),
            domin: self.domin.map(sig9),
            ..self.clone()
        }
    }
}

impl RunReport {
    pub fn rounded(&self) -> Self {
        Self {
            seed: self.seed,
            tau: self.tau.map(sig9),
            duration: sig9(self.duration),
            agents: self.agents.iter().map(AgentReport::rounded).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.rounded()).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    s.push('\n');
    fs::write(path, s)
}

/// `report.json` plus one `traj_<agent>.csv` per robot and, when asked,
/// `map_<agent>.csv` with the occupied cells.
pub fn write_run(dir: &Path, report: &RunReport, world: &World, maps: bool) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), report.to_json())?;
    for (i, tr) in world.trackers.iter().enumerate() {
        let mut out = io::BufWriter::new(fs::File::create(dir.join(format!("traj_{i}.csv")))?);
        writeln!(out, "t,x,y,z,vx,vy,vz,ax,ay,az,yaw")?;
        for s in &tr.trajectory {
            let vals = [s.t, s.p.x, s.p.y, s.p.z, s.v.x, s.v.y, s.v.z, s.a.x, s.a.y, s.a.z, s.yaw];
            let line: Vec<String> = vals.iter().map(|v| fmt9(*v)).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        out.flush()?;
    }
    if maps {
        for (i, a) in world.agents.iter().enumerate() {
            let mut out = io::BufWriter::new(fs::File::create(dir.join(format!("map_{i}.csv")))?);
            writeln!(out, "ix,iy,iz")?;
            for c in a.grid.occupied() {
                writeln!(out, "{},{},{}", c[0], c[1], c[2])?;
            }
            out.flush()?;
        }
    }
    Ok(())
}
