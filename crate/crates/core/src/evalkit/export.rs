use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{triage_efficiency, utilization};
use super::runner::{EpisodeRecord, PatientFate};
use super::scenarios::{AblationTable, StressGrid};
use crate::error::{Error, Result};

/// One line of `episodes.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub seed: u64,
    pub steps: u32,
    pub reward0: f64,
    pub reward1: f64,
    pub delivered: usize,
    pub expired: usize,
    pub landed0: bool,
    pub landed1: bool,
    #[serde(rename = "bothLanded")]
    pub both_landed: bool,
    pub battery0: f64,
    pub battery1: f64,
    pub collisions: usize,
    #[serde(rename = "U")]
    pub u: Option<f64>,
    pub eta: Option<f64>,
    pub d_w1: usize,
    pub d_w2: usize,
    pub d_w3: usize,
    pub u_w1: usize,
    pub u_w2: usize,
    pub u_w3: usize,
}

pub const EPISODES_HEADER: &str = "seed,steps,reward0,reward1,delivered,expired,landed0,landed1,bothLanded,battery0,battery1,collisions,U,eta,d_w1,d_w2,d_w3,u_w1,u_w2,u_w3";

impl From<&EpisodeRecord> for EpisodeRow {
    fn from(r: &EpisodeRecord) -> Self {
        EpisodeRow {
            seed: r.seed,
            steps: r.steps,
            reward0: r.rewards[0],
            reward1: r.rewards[1],
            delivered: r.delivered(),
            expired: r.expired(),
            landed0: r.landed[0],
            landed1: r.landed[1],
            both_landed: r.both_landed(),
            battery0: r.battery[0],
            battery1: r.battery[1],
            collisions: r.collisions[0] + r.collisions[1],
            u: utilization(r),
            eta: triage_efficiency(r),
            d_w1: r.count(PatientFate::Delivered, 1),
            d_w2: r.count(PatientFate::Delivered, 2),
            d_w3: r.count(PatientFate::Delivered, 3),
            u_w1: r.count(PatientFate::Expired, 1),
            u_w2: r.count(PatientFate::Expired, 2),
            u_w3: r.count(PatientFate::Expired, 3),
        }
    }
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(|e| Error::csv(path, e))
}

pub fn write_episode_rows(rows: &[EpisodeRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.write_record(EPISODES_HEADER.split(',')).map_err(|e| Error::csv(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_episodes_csv(records: &[EpisodeRecord], path: impl AsRef<Path>) -> Result<()> {
    let rows: Vec<EpisodeRow> = records.iter().map(EpisodeRow::from).collect();
    write_episode_rows(&rows, path)
}

pub fn read_episodes_csv(path: impl AsRef<Path>) -> Result<Vec<EpisodeRow>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let header = r.headers().map_err(|e| Error::csv(path, e))?;
    if header.iter().collect::<Vec<_>>().join(",") != EPISODES_HEADER {
        return Err(Error::Config(format!("{}: unexpected episodes.csv header", path.display())));
    }
    r.deserialize().collect::<std::result::Result<_, _>>().map_err(|e| Error::csv(path, e))
}

pub fn write_stress_csv(grid: &StressGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    let err = |e| Error::csv(path, e);
    w.write_record(["stress", "p_fail", "eta", "both_landed", "w3_expiries"]).map_err(err)?;
    for c in &grid.cells {
        w.write_record([
            c.stress.to_string(),
            c.p_fail.to_string(),
            c.eta.to_string(),
            c.both_landed.to_string(),
            c.w3_expiries.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_ablation_csv(table: &AblationTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    let err = |e| Error::csv(path, e);
    w.write_record(["condition", "eta", "both_landed", "deliveries", "end_battery", "w3_expiries"]).map_err(err)?;
    for r in &table.rows {
        w.write_record([
            r.condition.to_string(),
            r.eta.to_string(),
            r.both_landed.to_string(),
            r.deliveries.to_string(),
            r.end_battery.to_string(),
            r.w3_expiries.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

const CELL: f64 = 12.0;
const AGENT_COLORS: [&str; 2] = ["#1f77b4", "#d62728"];

fn triage_color(w: u8) -> &'static str {
    match w {
        1 => "#2ca02c",
        2 => "#ff9f1c",
        _ => "#c1121f",
    }
}

fn center(c: crate::world::Cell) -> (f64, f64) {
    ((c.x as f64 + 0.5) * CELL, (c.y as f64 + 0.5) * CELL)
}

fn star(s: &mut String, (cx, cy): (f64, f64), r: f64, fill: &str) {
    let mut pts = Vec::with_capacity(10);
    for k in 0..10 {
        let rad = if k % 2 == 0 { r } else { r * 0.45 };
        let a = std::f64::consts::PI * (k as f64 / 5.0) - std::f64::consts::FRAC_PI_2;
        pts.push(format!("{:.2},{:.2}", cx + rad * a.cos(), cy + rad * a.sin()));
    }
    let _ = writeln!(s, r#"<polygon points="{}" fill="{fill}" stroke="black" stroke-width="0.6"/>"#, pts.join(" "));
}

/// Renders obstacles, accumulated hazard exposure, both paths (opacity rising
/// with time), patients colored by final triage class, and delivery stars.
pub fn trajectory_svg(r: &EpisodeRecord) -> Result<String> {
    let t =
        r.trace.as_ref().ok_or_else(|| Error::Argument("episode was recorded without a trajectory trace".into()))?;
    let (w, h) = (t.width as f64 * CELL, t.height as f64 * CELL);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let peak = t.wind_steps.iter().chain(&t.lowsig_steps).copied().max().unwrap_or(0).max(1) as f64;
    for (layer, color) in [(&t.wind_steps, "#7fb3d5"), (&t.lowsig_steps, "#c39bd3")] {
        for (i, &n) in layer.iter().enumerate().filter(|(_, &n)| n > 0) {
            let (x, y) = ((i % t.width) as f64 * CELL, (i / t.width) as f64 * CELL);
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{color}" fill-opacity="{:.3}"/>"#,
                0.15 + 0.6 * n as f64 / peak
            );
        }
    }
    for c in &t.obstacles {
        let _ = writeln!(
            s,
            r##"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="#444"/>"##,
            c.x as f64 * CELL,
            c.y as f64 * CELL
        );
    }
    for (agent, zone) in t.landing_zones.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="none" stroke="{}" stroke-width="2"/>"#,
            zone.x as f64 * CELL,
            zone.y as f64 * CELL,
            AGENT_COLORS[agent]
        );
    }
    for p in &r.patients {
        let (cx, cy) = center(p.loc);
        let _ = writeln!(
            s,
            r#"<circle cx="{cx}" cy="{cy}" r="{:.1}" fill="{}" fill-opacity="0.8"/>"#,
            CELL * 0.35,
            triage_color(p.terminal_weight)
        );
    }
    let n = t.positions.len().max(2) as f64;
    for agent in 0..2 {
        let pts: Vec<String> = t
            .positions
            .iter()
            .map(|p| {
                let (x, y) = center(p[agent]);
                format!("{x},{y}")
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="agent{agent}" points="{}" fill="none" stroke="{}" stroke-width="1.5" stroke-opacity="0.35"/>"#,
            pts.join(" "),
            AGENT_COLORS[agent]
        );
        // time-opacity overlay: later segments drawn darker
        for (k, seg) in t.positions.windows(2).enumerate().filter(|(_, s)| s[0][agent] != s[1][agent]) {
            let (x1, y1) = center(seg[0][agent]);
            let (x2, y2) = center(seg[1][agent]);
            let _ = writeln!(
                s,
                r#"<line x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}" stroke="{}" stroke-width="2" stroke-opacity="{:.3}"/>"#,
                AGENT_COLORS[agent],
                0.2 + 0.8 * (k as f64 + 1.0) / n
            );
        }
    }
    for &(loc, agent, _) in &t.deliveries {
        star(&mut s, center(loc), CELL * 0.6, AGENT_COLORS[agent]);
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn export_trajectory_svg(r: &EpisodeRecord, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let svg = trajectory_svg(r)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}
