//! Three-stage pseudo-3D placement.
//!
//! a. Every BOTTOM component is shrunk to a site footprint and placed
//!    together with the TOP components in one plane; TOP macro positions
//!    are legalized and fixed, everything else is discarded.
//! b. TOP components are shrunk in place and act as pin-only obstacles;
//!    BOTTOM macros and cells are placed; BOTTOM macros are legalized and
//!    fixed.
//! c. BOTTOM cells are placed around the fixed macros and legalized; TOP
//!    components are restored to their exact saved state.
//!
//! Shrinking keeps the outline center, and shrunk masters keep the pin
//! frame of their full variant, so absolute pin positions never move.

use super::{global_place_observed, legalize, legalize_macros, LegalizeStats, PlaceStats, PlacerParams};
use crate::design::{Design, Die};
use crate::error::{Error, Result};
use crate::tech::{Library, Variant};
use serde::Serialize;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DmpStats {
    pub stage_a: PlaceStats,
    pub stage_b: PlaceStats,
    pub stage_c: PlaceStats,
    pub legalize: LegalizeStats,
    pub legalize_top: LegalizeStats,
}

/// Swaps a component to its shrunk variant, keeping its center. Already
/// shrunk components are left alone.
pub fn scale_to_minimal(design: &mut Design, lib: &Library, comp: usize) -> Result<()> {
    swap_variant(design, lib, comp, |v| v.shrunk())
}

/// Inverse of [`scale_to_minimal`].
pub fn restore_full_size(design: &mut Design, lib: &Library, comp: usize) -> Result<()> {
    swap_variant(design, lib, comp, |v| Some(v.unshrunk()))
}

fn swap_variant(design: &mut Design, lib: &Library, comp: usize, to: impl Fn(Variant) -> Option<Variant>) -> Result<()> {
    let m = design.master(lib, comp)?;
    let target = to(m.variant).ok_or_else(|| Error::MissingShrunkVariant(m.name.clone()))?;
    if target == m.variant {
        return Ok(());
    }
    let name = Library::variant_name(&m.name, target);
    if lib.master(&name).is_none() {
        return Err(Error::MissingShrunkVariant(m.name.clone()));
    }
    let c2 = design.center2(lib, comp)?;
    design.components[comp].master = name;
    design.set_center2(lib, comp, c2)
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage { stage: name.into(), source: Box::new(e) })
}

fn with_seed(params: &PlacerParams, offset: u64) -> PlacerParams {
    PlacerParams { seed: params.seed.wrapping_add(offset), ..params.clone() }
}

/// Receives the stage name, iteration and a snapshot of the design.
pub type StageSnapshotFn<'a> = &'a mut dyn FnMut(&str, usize, &Design) -> Result<()>;

/// Runs stages a to c on a partitioned stacked design.
pub fn run_dmp(design: &mut Design, lib: &Library, params: &PlacerParams) -> Result<DmpStats> {
    run_dmp_observed(design, lib, params, None)
}

/// [`run_dmp`] with a snapshot every `observer.0` global-placement
/// iterations of each stage.
pub fn run_dmp_observed(design: &mut Design, lib: &Library, params: &PlacerParams, mut observer: Option<(usize, StageSnapshotFn<'_>)>) -> Result<DmpStats> {
    params.validate()?;
    let mut place = |name: &str, design: &mut Design, movable: &[usize], params: &PlacerParams| -> Result<PlaceStats> {
        match observer.as_mut() {
            None => global_place_observed(design, lib, movable, params, None),
            Some((every, f)) => {
                let mut g = |it: usize, d: &Design| f(name, it, d);
                global_place_observed(design, lib, movable, params, Some((*every, &mut g)))
            }
        }
    };
    let n = design.components.len();
    let on = |d: &Design, die: Die| -> Vec<usize> { (0..n).filter(|&i| d.components[i].die == die).collect() };
    let top = on(design, Die::Top);
    let bottom = on(design, Die::Bottom);
    let top_macros: Vec<usize> = top.iter().copied().filter(|&i| design.is_macro(lib, i)).collect();
    let bottom_macros: Vec<usize> = bottom.iter().copied().filter(|&i| design.is_macro(lib, i)).collect();
    let bottom_cells: Vec<usize> = bottom.iter().copied().filter(|&i| !design.is_macro(lib, i)).collect();
    let top_cells: Vec<usize> = top.iter().copied().filter(|&i| !design.is_macro(lib, i)).collect();
    let mut stats = DmpStats::default();

    // a
    for &i in &bottom {
        stage("dmp-a", scale_to_minimal(design, lib, i))?;
    }
    let all: Vec<usize> = (0..n).collect();
    stats.stage_a = stage("dmp-a", place("dmp-a", design, &all, params))?;
    stage("dmp-a", legalize_macros(design, lib, Die::Top, &top_macros))?;
    for &i in &bottom {
        stage("dmp-a", restore_full_size(design, lib, i))?;
    }

    // b
    let saved_top: Vec<_> = top.iter().map(|&i| design.components[i].clone()).collect();
    for &i in &top {
        stage("dmp-b", scale_to_minimal(design, lib, i))?;
    }
    stats.stage_b = stage("dmp-b", place("dmp-b", design, &bottom, &with_seed(params, 1)))?;
    stage("dmp-b", legalize_macros(design, lib, Die::Bottom, &bottom_macros))?;

    // c
    stats.stage_c = stage("dmp-c", place("dmp-c", design, &bottom_cells, &with_seed(params, 2)))?;
    stats.legalize = stage("dmp-c", legalize(design, lib, Die::Bottom))?;
    for (k, &i) in top.iter().enumerate() {
        design.components[i] = saved_top[k].clone();
    }
    if !top_cells.is_empty() {
        stats.legalize_top = stage("dmp-c", legalize(design, lib, Die::Top))?;
    }
    Ok(stats)
}
