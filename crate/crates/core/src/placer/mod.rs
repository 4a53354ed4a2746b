//! Mixed-size analytical placement.
//!
//! The global placer minimizes weighted-average wirelength plus a quadratic
//! bin-overflow penalty by momentum descent with backtracking. The pseudo-3D
//! flow in [`dmp`] drives it three times with different components shrunk
//! or projected so each 2D run sees the right obstacles.

pub mod density;
pub mod dmp;
pub mod global;
pub mod legalize;
pub mod wirelength;

pub use density::{density_penalty, DensityGrid};
pub use dmp::{restore_full_size, run_dmp, run_dmp_observed, scale_to_minimal, DmpStats, StageSnapshotFn};
pub use global::{global_place, global_place_observed, PlaceStats, SnapshotFn};
pub use legalize::{legalize, legalize_macros, LegalizeStats};
pub use wirelength::hpwl_smooth;

use crate::design::{pin_offset2, Design, NetPin};
use crate::error::Result;
use crate::geom::{dbu_to_um, Rect};
use crate::tech::Library;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlacerParams {
    /// Wirelength smoothing in um; `None` uses four bin widths.
    pub gamma: Option<f64>,
    /// Bins per axis; `None` picks up to 64 from the movable count.
    pub bins: Option<usize>,
    /// Initial density weight; `None` balances the gradient norms so the
    /// density term starts at 10% of the wirelength term.
    pub lambda0: Option<f64>,
    pub lambda_growth: f64,
    pub target_density: f64,
    pub max_iters: usize,
    pub min_iters: usize,
    pub overflow_stop: f64,
    pub momentum: f64,
    /// Initial step length, in bins.
    pub initial_step: f64,
    pub seed: u64,
}

impl Default for PlacerParams {
    fn default() -> Self {
        PlacerParams {
            gamma: None,
            bins: None,
            lambda0: None,
            lambda_growth: 1.05,
            target_density: 0.8,
            max_iters: 1000,
            min_iters: 30,
            overflow_stop: 0.07,
            momentum: 0.9,
            initial_step: 1.0,
            seed: 1,
        }
    }
}

impl PlacerParams {
    pub fn validate(&self) -> Result<()> {
        use crate::error::Error;
        if self.gamma.is_some_and(|g| !(g > 0.0)) {
            return Err(Error::InvalidParam("gamma must be positive".into()));
        }
        if !(self.target_density > 0.0 && self.target_density <= 1.0) {
            return Err(Error::InvalidParam("target_density must lie in (0, 1]".into()));
        }
        if !(self.overflow_stop > 0.0) {
            return Err(Error::InvalidParam("overflow_stop must be positive".into()));
        }
        if !(self.lambda_growth >= 1.0) || !(0.0..1.0).contains(&self.momentum) || !(self.initial_step > 0.0) {
            return Err(Error::InvalidParam("bad step parameters".into()));
        }
        if self.bins == Some(0) {
            return Err(Error::InvalidParam("bins must be positive".into()));
        }
        Ok(())
    }
}

/// A pin as seen by the optimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Term {
    /// Movable index and offset from its center, um.
    Mov(usize, f64, f64),
    /// Absolute position, um.
    Fixed(f64, f64),
}

/// Die rectangle in um.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Area {
    pub lx: f64,
    pub ly: f64,
    pub ux: f64,
    pub uy: f64,
}

impl From<Rect> for Area {
    fn from(r: Rect) -> Self {
        Area { lx: dbu_to_um(r.lx), ly: dbu_to_um(r.ly), ux: dbu_to_um(r.ux), uy: dbu_to_um(r.uy) }
    }
}

/// Optimizer view of one 2D plane: every component coexists in the plane;
/// the ones not in `movable` are obstacles at their current positions.
#[derive(Debug, Clone)]
pub(crate) struct Problem {
    pub movable: Vec<usize>,
    pub w: Vec<f64>,
    pub h: Vec<f64>,
    pub fixed_rects: Vec<Area>,
    /// Flattened terms; net `k` owns `terms[net_start[k]..net_start[k + 1]]`.
    pub terms: Vec<Term>,
    pub net_start: Vec<usize>,
    pub die: Area,
}

impl Problem {
    pub fn new(design: &Design, lib: &Library, movable: &[usize]) -> Result<Self> {
        let mut mov_of = vec![None; design.components.len()];
        for (k, &ci) in movable.iter().enumerate() {
            mov_of[ci] = Some(k);
        }
        let mut w = Vec::with_capacity(movable.len());
        let mut h = Vec::with_capacity(movable.len());
        for &ci in movable {
            let m = design.master(lib, ci)?;
            w.push(dbu_to_um(m.width));
            h.push(dbu_to_um(m.height));
        }
        let mut fixed_rects = Vec::new();
        for ci in 0..design.components.len() {
            if mov_of[ci].is_none() && design.components[ci].status.is_placed() {
                fixed_rects.push(Area::from(design.rect(lib, ci)?));
            }
        }
        let mut terms = Vec::new();
        let mut net_start = vec![0];
        for n in &design.nets {
            for p in &n.pins {
                let t = match p {
                    NetPin::Comp(ci, pin) => {
                        let c = &design.components[*ci];
                        let m = design.master(lib, *ci)?;
                        let (ox, oy) = pin_offset2(lib, m, pin, c.orient);
                        let (ox, oy) = (ox as f64 / 2000.0, oy as f64 / 2000.0);
                        match mov_of[*ci] {
                            Some(k) => Term::Mov(k, ox, oy),
                            None if c.status.is_placed() => {
                                let (cx, cy) = design.center2(lib, *ci)?;
                                Term::Fixed(cx as f64 / 2000.0 + ox, cy as f64 / 2000.0 + oy)
                            }
                            None => continue,
                        }
                    }
                    NetPin::Port(pi) => match design.ports[*pi].position {
                        Some((x, y)) => Term::Fixed(dbu_to_um(x), dbu_to_um(y)),
                        None => continue,
                    },
                };
                terms.push(t);
            }
            net_start.push(terms.len());
        }
        Ok(Problem { movable: movable.to_vec(), w, h, fixed_rects, terms, net_start, die: design.die.into() })
    }

    pub fn num_nets(&self) -> usize {
        self.net_start.len() - 1
    }

    /// Current centers of the movable components, um.
    pub fn centers(&self, design: &Design, lib: &Library) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut xs = Vec::with_capacity(self.movable.len());
        let mut ys = Vec::with_capacity(self.movable.len());
        for &ci in &self.movable {
            let (cx, cy) = design.center2(lib, ci)?;
            xs.push(cx as f64 / 2000.0);
            ys.push(cy as f64 / 2000.0);
        }
        Ok((xs, ys))
    }

    /// Clamps centers so outlines stay inside the die.
    pub fn clamp(&self, xs: &mut [f64], ys: &mut [f64]) {
        for k in 0..xs.len() {
            xs[k] = clamp_center(xs[k], self.w[k], self.die.lx, self.die.ux);
            ys[k] = clamp_center(ys[k], self.h[k], self.die.ly, self.die.uy);
        }
    }
}

pub(crate) fn clamp_center(c: f64, size: f64, lo: f64, hi: f64) -> f64 {
    let a = lo + size / 2.0;
    let b = hi - size / 2.0;
    if a > b {
        (lo + hi) / 2.0
    } else {
        c.clamp(a, b)
    }
}

/// Writes optimizer centers back as snapped lower-left corners inside the
/// die.
pub(crate) fn write_back(design: &mut Design, lib: &Library, movable: &[usize], xs: &[f64], ys: &[f64]) -> Result<()> {
    let die = design.die;
    for (k, &ci) in movable.iter().enumerate() {
        let c2 = ((xs[k] * 2000.0).round() as i64, (ys[k] * 2000.0).round() as i64);
        design.set_center2(lib, ci, c2)?;
        let m = design.master(lib, ci)?;
        let (w, h) = (m.width, m.height);
        let c = &mut design.components[ci];
        if w <= die.width() {
            c.x = c.x.clamp(die.lx, die.ux - w);
        }
        if h <= die.height() {
            c.y = c.y.clamp(die.ly, die.uy - h);
        }
        c.status = crate::design::Status::Placed;
    }
    Ok(())
}
