//! Skyline macro tiling with an adaptive halo.
//!
//! Macros are packed lowest-then-leftmost onto a skyline, each inflated by
//! a uniform halo. The halo grows on a fixed grid until the packing reaches
//! the height target, which spreads macros over the die and leaves channels
//! for the cells below them.

use crate::design::{Design, Die, Orient, Status};
use crate::error::{Error, Result};
use crate::geom::{um_to_dbu, Dbu};
use crate::placer::{global_place_observed, legalize, scale_to_minimal, LegalizeStats, PlaceStats, PlacerParams, SnapshotFn};
use crate::tech::Library;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TilingParams {
    pub height_target: f64,
    /// um
    pub halo_step: f64,
    /// um
    pub halo_max: f64,
}

impl Default for TilingParams {
    fn default() -> Self {
        TilingParams { height_target: 0.8, halo_step: 0.5, halo_max: 50.0 }
    }
}

impl TilingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.height_target > 0.0 && self.height_target < 1.0) {
            return Err(Error::InvalidParam("height_target must lie in (0, 1)".into()));
        }
        if !(self.halo_step > 0.0) || !(self.halo_max >= 0.0) {
            return Err(Error::InvalidParam("halo_step must be positive and halo_max non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Segment {
    pub x0: Dbu,
    pub x1: Dbu,
    pub height: Dbu,
}

/// Upper envelope of packed rectangles over `[0, width)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Skyline {
    pub segments: Vec<Segment>,
}

impl Skyline {
    pub fn new(width: Dbu) -> Self {
        Skyline { segments: vec![Segment { x0: 0, x1: width, height: 0 }] }
    }

    pub fn width(&self) -> Dbu {
        self.segments.last().map_or(0, |s| s.x1)
    }

    /// Highest point over `[x, x + w)`.
    pub fn height_over(&self, x: Dbu, w: Dbu) -> Dbu {
        self.segments.iter().filter(|s| s.x1 > x && s.x0 < x + w).map(|s| s.height).max().unwrap_or(0)
    }

    pub fn max_height(&self) -> Dbu {
        self.segments.iter().map(|s| s.height).max().unwrap_or(0)
    }

    /// Area under the envelope, DBU^2.
    pub fn area(&self) -> i128 {
        self.segments.iter().map(|s| (s.x1 - s.x0) as i128 * s.height as i128).sum()
    }

    /// Lowest, then leftmost, feasible position for a `w x h` rectangle
    /// under ceiling `max_h`, among segment left edges.
    pub fn find(&self, w: Dbu, h: Dbu, max_h: Dbu) -> Option<(Dbu, Dbu)> {
        let width = self.width();
        self.segments
            .iter()
            .map(|s| s.x0)
            .filter(|&x| x + w <= width)
            .map(|x| (x, self.height_over(x, w)))
            .filter(|&(_, y)| y + h <= max_h)
            .min_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)))
    }

    /// Raises `[x, x + w)` to `top`. The span must already be at most `top`.
    pub fn raise(&mut self, x: Dbu, w: Dbu, top: Dbu) {
        let mut out = Vec::with_capacity(self.segments.len() + 2);
        for s in &self.segments {
            if s.x1 <= x || s.x0 >= x + w {
                out.push(*s);
                continue;
            }
            if s.x0 < x {
                out.push(Segment { x0: s.x0, x1: x, height: s.height });
            }
            if s.x1 > x + w {
                out.push(Segment { x0: x + w, x1: s.x1, height: s.height });
            }
        }
        out.push(Segment { x0: x, x1: x + w, height: top });
        out.sort_by_key(|s| s.x0);
        let mut merged: Vec<Segment> = Vec::with_capacity(out.len());
        for s in out {
            match merged.last_mut() {
                Some(m) if m.height == s.height => m.x1 = s.x1,
                _ => merged.push(s),
            }
        }
        self.segments = merged;
    }

    /// Places one rectangle; `None` when it does not fit.
    pub fn place(&mut self, w: Dbu, h: Dbu, max_h: Dbu) -> Option<(Dbu, Dbu)> {
        let (x, y) = self.find(w, h, max_h)?;
        self.raise(x, w, y + h);
        Some((x, y))
    }

    /// Segments tile `[0, width)` contiguously with distinct neighbouring
    /// heights.
    pub fn is_valid(&self) -> bool {
        !self.segments.is_empty()
            && self.segments[0].x0 == 0
            && self.segments.windows(2).all(|p| p[0].x1 == p[1].x0 && p[0].height != p[1].height)
            && self.segments.iter().all(|s| s.x1 > s.x0 && s.height >= 0)
    }
}

/// A macro to tile: name, width, height (DBU).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacroShape {
    pub name: String,
    pub width: Dbu,
    pub height: Dbu,
}

fn shape_order(a: &MacroShape, b: &MacroShape) -> Ordering {
    let area = |m: &MacroShape| m.width as i128 * m.height as i128;
    area(b).cmp(&area(a)).then(b.height.cmp(&a.height)).then(a.name.cmp(&b.name))
}

/// Decreasing area, then decreasing height, then name.
pub fn order_macros(macros: &mut [MacroShape]) {
    macros.sort_by(shape_order);
}

/// Packs halo-inflated macros (in the given order) onto an empty skyline
/// over a `die_w x die_h` die. Returns the lower-left corner of each macro
/// proper (inside its halo) and the final skyline.
pub fn skyline_place(macros: &[MacroShape], die_w: Dbu, die_h: Dbu, halo: Dbu) -> Result<(Vec<(Dbu, Dbu)>, Skyline)> {
    let mut sky = Skyline::new(die_w);
    let mut out = Vec::with_capacity(macros.len());
    for m in macros {
        let (w, h) = (m.width + 2 * halo, m.height + 2 * halo);
        let (x, y) = sky
            .place(w, h, die_h)
            .ok_or_else(|| Error::Infeasible(format!("macro `{}` does not fit with halo {halo} DBU", m.name)))?;
        out.push((x + halo, y + halo));
    }
    Ok((out, sky))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TilingStats {
    pub halo_um: f64,
    pub max_height_um: f64,
    pub target_met: bool,
    pub bottom_macros: usize,
    pub place: PlaceStats,
    pub legalize: LegalizeStats,
}

fn shapes_on(design: &Design, lib: &Library, die: Die) -> Result<(Vec<usize>, Vec<MacroShape>)> {
    let mut idx: Vec<usize> = (0..design.components.len())
        .filter(|&i| design.components[i].die == die && design.is_macro(lib, i))
        .collect();
    let mut shapes = Vec::with_capacity(idx.len());
    for &i in &idx {
        let m = design.master(lib, i)?;
        shapes.push(MacroShape { name: design.components[i].name.clone(), width: m.width, height: m.height });
    }
    let mut pairs: Vec<(usize, MacroShape)> = idx.drain(..).zip(shapes).collect();
    pairs.sort_by(|a, b| shape_order(&a.1, &b.1));
    Ok(pairs.into_iter().unzip())
}

fn commit(design: &mut Design, idx: &[usize], pos: &[(Dbu, Dbu)]) {
    let (ox, oy) = (design.die.lx, design.die.ly);
    for (&i, &(x, y)) in idx.iter().zip(pos) {
        let c = &mut design.components[i];
        c.x = ox + x;
        c.y = oy + y;
        c.orient = Orient::N;
        c.status = Status::Fixed;
    }
}

/// Halo sweep on the TOP die. Returns the chosen halo (um), the reached
/// height (um) and whether the target was met.
pub fn tile_top_die(design: &mut Design, lib: &Library, params: &TilingParams) -> Result<(f64, f64, bool)> {
    params.validate()?;
    let (idx, shapes) = shapes_on(design, lib, Die::Top)?;
    let (w, h) = (design.die.width(), design.die.height());
    let goal = params.height_target * h as f64;
    let steps = (params.halo_max / params.halo_step + 1e-9).floor() as usize;
    let mut last = None;
    for k in 0..=steps {
        let halo_um = k as f64 * params.halo_step;
        match skyline_place(&shapes, w, h, um_to_dbu(halo_um)) {
            Ok((pos, sky)) => {
                let reached = sky.max_height() as f64 >= goal;
                last = Some((halo_um, pos, sky.max_height(), reached));
                if reached || shapes.is_empty() {
                    break;
                }
            }
            Err(e) if k == 0 => return Err(e),
            Err(_) => break,
        }
    }
    let (halo_um, pos, top, met) = last.expect("halo 0 handled");
    commit(design, &idx, &pos);
    Ok((halo_um, top as f64 / 1000.0, met))
}

/// With TOP macros fixed: shrinks them in place as pin-only projections,
/// places and legalizes the BOTTOM cells, then restores the TOP macros.
pub fn project_and_place_cells(design: &mut Design, lib: &Library, placer: &PlacerParams) -> Result<(PlaceStats, LegalizeStats)> {
    project_and_place_cells_observed(design, lib, placer, None)
}

fn project_and_place_cells_observed(
    design: &mut Design,
    lib: &Library,
    placer: &PlacerParams,
    observer: Option<(usize, SnapshotFn<'_>)>,
) -> Result<(PlaceStats, LegalizeStats)> {
    let n = design.components.len();
    let top_macros: Vec<usize> = (0..n).filter(|&i| design.components[i].die == Die::Top && design.is_macro(lib, i)).collect();
    let cells: Vec<usize> = (0..n).filter(|&i| design.components[i].die == Die::Bottom && !design.is_macro(lib, i)).collect();
    if cells.is_empty() {
        return Ok(Default::default());
    }
    let saved: Vec<_> = top_macros.iter().map(|&i| design.components[i].clone()).collect();
    for &i in &top_macros {
        scale_to_minimal(design, lib, i)?;
    }
    let result = global_place_observed(design, lib, &cells, placer, observer).and_then(|p| Ok((p, legalize(design, lib, Die::Bottom)?)));
    for (&i, c) in top_macros.iter().zip(saved) {
        design.components[i] = c;
    }
    result
}

/// TOP macros by halo sweep, BOTTOM macros packed without halo, then cell
/// placement under the projections.
pub fn run_tiling(design: &mut Design, lib: &Library, tiling: &TilingParams, placer: &PlacerParams) -> Result<TilingStats> {
    run_tiling_observed(design, lib, tiling, placer, None)
}

/// [`run_tiling`] with a snapshot every `observer.0` iterations of the cell
/// placement.
pub fn run_tiling_observed(
    design: &mut Design,
    lib: &Library,
    tiling: &TilingParams,
    placer: &PlacerParams,
    observer: Option<(usize, SnapshotFn<'_>)>,
) -> Result<TilingStats> {
    let (halo_um, max_height_um, target_met) = tile_top_die(design, lib, tiling)?;
    let (idx, shapes) = shapes_on(design, lib, Die::Bottom)?;
    let (pos, _) = skyline_place(&shapes, design.die.width(), design.die.height(), 0)?;
    commit(design, &idx, &pos);
    let (place, legalize) = project_and_place_cells_observed(design, lib, placer, observer)?;
    Ok(TilingStats { halo_um, max_height_um, target_met, bottom_macros: idx.len(), place, legalize })
}
