//! Evaluation metrics: wirelength, cut, bin overflow, utilization, power.

use crate::design::{Design, Die};
use crate::error::{Error, Result};
use crate::geom::{overlap_1d, Dbu};
use crate::tech::Library;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Default area power density, W/mm^2.
pub const POWER_DENSITY_W_PER_MM2: f64 = 0.05;

/// Component name to watts.
pub type PowerMap = BTreeMap<String, f64>;

/// Flat evaluation report. Any `None` field has an entry in `null_reasons`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub design: String,
    pub flow: String,
    /// Single-die footprint.
    pub area_mm2: f64,
    pub hpwl_um: f64,
    pub cut_nets: usize,
    pub hbt_estimate: usize,
    pub overflow_um2: f64,
    pub util_top: Option<f64>,
    pub util_bottom: f64,
    pub power_w: f64,
    pub t_max_c: Option<f64>,
    pub runtime_s: Option<BTreeMap<String, f64>>,
    pub null_reasons: BTreeMap<String, String>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Half-perimeter wirelength in um, all dies projected onto one plane.
pub fn hpwl(design: &Design, lib: &Library) -> Result<f64> {
    let per_net: Vec<Result<i128>> = design
        .nets
        .par_iter()
        .map(|n| {
            let mut bb: Option<(Dbu, Dbu, Dbu, Dbu)> = None;
            for p in &n.pins {
                let (x, y) = design.pin_position2(lib, p)?;
                bb = Some(match bb {
                    None => (x, y, x, y),
                    Some((a, b, c, d)) => (a.min(x), b.min(y), c.max(x), d.max(y)),
                });
            }
            Ok(bb.map_or(0, |(a, b, c, d)| (c - a) as i128 + (d - b) as i128))
        })
        .collect();
    let mut total: i128 = 0;
    for v in per_net {
        total += v?;
    }
    Ok(total as f64 / 2000.0)
}

/// Nets with pins on both dies: one bond terminal each at minimum.
pub fn hbt_estimate(design: &Design) -> usize {
    design
        .nets
        .iter()
        .filter(|n| {
            let mut mask = 0u8;
            for p in &n.pins {
                mask |= match design.pin_die(p) {
                    Die::Bottom => 1,
                    Die::Top => 2,
                };
            }
            mask == 3
        })
        .count()
}

fn dies(design: &Design) -> Vec<Die> {
    if design.stacked {
        vec![Die::Bottom, Die::Top]
    } else {
        vec![Die::Bottom]
    }
}

fn on_die(design: &Design, ci: usize, die: Die) -> bool {
    !design.stacked || design.components[ci].die == die
}

/// Per-bin occupied area of one die, `grid_n x grid_n`, row-major with x
/// fastest.
pub fn bin_usage(design: &Design, lib: &Library, die: Die, grid_n: usize) -> Result<Vec<f64>> {
    bin_usage_where(design, lib, die, grid_n, |_| true)
}

pub(crate) fn bin_usage_where(design: &Design, lib: &Library, die: Die, grid_n: usize, keep: impl Fn(usize) -> bool) -> Result<Vec<f64>> {
    let r = design.die;
    let (bw, bh) = (r.width() as f64 / grid_n as f64, r.height() as f64 / grid_n as f64);
    let mut usage = vec![0.0; grid_n * grid_n];
    for ci in 0..design.components.len() {
        if !on_die(design, ci, die) || !design.components[ci].status.is_placed() || !keep(ci) {
            continue;
        }
        let c = design.rect(lib, ci)?;
        let (lx, ly, ux, uy) = ((c.lx - r.lx) as f64, (c.ly - r.ly) as f64, (c.ux - r.lx) as f64, (c.uy - r.ly) as f64);
        let i0 = ((lx / bw).floor().max(0.0) as usize).min(grid_n);
        let i1 = ((ux / bw).ceil().max(0.0) as usize).min(grid_n);
        let j0 = ((ly / bh).floor().max(0.0) as usize).min(grid_n);
        let j1 = ((uy / bh).ceil().max(0.0) as usize).min(grid_n);
        for j in j0..j1 {
            let oy = overlap_1d(ly, uy, j as f64 * bh, (j + 1) as f64 * bh);
            for i in i0..i1 {
                usage[j * grid_n + i] += overlap_1d(lx, ux, i as f64 * bw, (i + 1) as f64 * bw) * oy / 1e6;
            }
        }
    }
    Ok(usage)
}

/// Sum over bins and dies of `max(0, usage - target * capacity)`, um^2.
pub fn overflow(design: &Design, lib: &Library, grid_n: usize, target: f64) -> Result<f64> {
    if grid_n == 0 {
        return Err(Error::InvalidParam("grid_n must be positive".into()));
    }
    let cap = design.die.area_um2() / (grid_n * grid_n) as f64;
    let mut total = 0.0;
    for die in dies(design) {
        total += bin_usage(design, lib, die, grid_n)?.iter().map(|u| (u - target * cap).max(0.0)).sum::<f64>();
    }
    Ok(total)
}

/// Full-size component area in um^2, looking through shrunk variants.
pub(crate) fn full_area_um2(design: &Design, lib: &Library, ci: usize) -> Result<f64> {
    let m = design.master(lib, ci)?;
    let (w, h) = lib.pin_frame(m);
    Ok(w as f64 * h as f64 / 1e6)
}

/// Area on each die over die area: (bottom, top).
pub fn utilization(design: &Design, lib: &Library) -> Result<(f64, Option<f64>)> {
    let die = design.die.area_um2();
    let (mut b, mut t) = (0.0, 0.0);
    for ci in 0..design.components.len() {
        let a = full_area_um2(design, lib, ci)?;
        if on_die(design, ci, Die::Bottom) {
            b += a;
        } else {
            t += a;
        }
    }
    let f = |a: f64| if die > 0.0 { a / die } else { 0.0 };
    Ok((f(b), design.stacked.then(|| f(t))))
}

/// Per-component power in watts: from `power` when given (every component
/// needs an entry), else proportional to area.
pub fn component_power(design: &Design, lib: &Library, power: Option<&PowerMap>) -> Result<Vec<f64>> {
    match power {
        Some(map) => {
            let index = design.component_index();
            if let Some(name) = map.keys().find(|n| !index.contains_key(n.as_str())) {
                return Err(Error::UnknownPowerComponent(name.clone()));
            }
            design
                .components
                .iter()
                .map(|c| {
                    let &w = map.get(&c.name).ok_or_else(|| Error::MissingPower(c.name.clone()))?;
                    if !(w >= 0.0 && w.is_finite()) {
                        return Err(Error::InvalidParam(format!("power for `{}` must be a finite non-negative number", c.name)));
                    }
                    Ok(w)
                })
                .collect()
        }
        None => (0..design.components.len())
            .map(|ci| Ok(full_area_um2(design, lib, ci)? / 1e6 * POWER_DENSITY_W_PER_MM2))
            .collect(),
    }
}

pub fn power_proxy(design: &Design, lib: &Library, power: Option<&PowerMap>) -> Result<f64> {
    Ok(component_power(design, lib, power)?.iter().sum())
}

/// Report for a placed design; `t_max_c` and `runtime_s` are left null.
pub fn evaluate(design: &Design, lib: &Library, flow: &str, grid_n: usize, target: f64, power: Option<&PowerMap>) -> Result<Report> {
    let (util_bottom, util_top) = utilization(design, lib)?;
    let cut = hbt_estimate(design);
    let mut null_reasons = BTreeMap::new();
    if util_top.is_none() {
        null_reasons.insert("util_top".into(), "single-die design".into());
    }
    null_reasons.insert("t_max_c".into(), "thermal analysis not run".into());
    null_reasons.insert("runtime_s".into(), "wall-clock times are written to timing.json to keep this report deterministic".into());
    Ok(Report {
        design: design.name.clone(),
        flow: flow.into(),
        area_mm2: design.die.area_um2() / 1e6,
        hpwl_um: hpwl(design, lib)?,
        cut_nets: cut,
        hbt_estimate: cut,
        overflow_um2: overflow(design, lib, grid_n, target)?,
        util_top,
        util_bottom,
        power_w: power_proxy(design, lib, power)?,
        t_max_c: None,
        runtime_s: None,
        null_reasons,
    })
}
