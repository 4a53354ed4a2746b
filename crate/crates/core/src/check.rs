//! Geometric legality checker.

use crate::design::{Design, Die, Status};
use crate::error::Result;
use crate::geom::Rect;
use crate::tech::Library;
use serde::Serialize;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    Unplaced,
    OutsideDie,
    Overlap,
    OffSite,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub components: Vec<String>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.components.join(", "))
    }
}

/// What to require beyond non-overlap inside the die.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckOptions {
    /// Every component must be placed.
    pub all_placed: bool,
    /// Standard-cell origins on the site grid and row boundaries.
    pub cells_on_sites: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { all_placed: true, cells_on_sites: true }
    }
}

/// Checks each die separately: every placed outline inside the die, no
/// two outlines with positive-area overlap, and (optionally) standard
/// cells on sites. Shrunk projections are ignored.
pub fn check_legality(design: &Design, lib: &Library, opts: CheckOptions) -> Result<Vec<Violation>> {
    let (sw, rh) = lib.site();
    let die = design.die;
    let mut out = Vec::new();
    let dies: &[Die] = if design.stacked { &[Die::Bottom, Die::Top] } else { &[Die::Bottom] };
    for &d in dies {
        let mut rects: Vec<(Rect, usize)> = Vec::new();
        for (ci, c) in design.components.iter().enumerate() {
            if design.stacked && c.die != d {
                continue;
            }
            let m = design.master(lib, ci)?;
            if m.variant.is_shrunk() {
                continue;
            }
            if c.status == Status::Unplaced {
                if opts.all_placed {
                    out.push(Violation { kind: ViolationKind::Unplaced, components: vec![c.name.clone()] });
                }
                continue;
            }
            let r = design.rect(lib, ci)?;
            if !die.contains(&r) {
                out.push(Violation { kind: ViolationKind::OutsideDie, components: vec![c.name.clone()] });
            }
            if opts.cells_on_sites && !m.is_macro() && ((r.lx - die.lx) % sw != 0 || (r.ly - die.ly) % rh != 0) {
                out.push(Violation { kind: ViolationKind::OffSite, components: vec![c.name.clone()] });
            }
            rects.push((r, ci));
        }
        rects.sort_by_key(|(r, ci)| (r.lx, *ci));
        for a in 0..rects.len() {
            for b in a + 1..rects.len() {
                if rects[b].0.lx >= rects[a].0.ux {
                    break;
                }
                if rects[a].0.overlaps(&rects[b].0) {
                    let mut names = vec![design.components[rects[a].1].name.clone(), design.components[rects[b].1].name.clone()];
                    names.sort();
                    out.push(Violation { kind: ViolationKind::Overlap, components: names });
                }
            }
        }
    }
    Ok(out)
}
