//! Greedy legalization.
//!
//! Macros go first: largest area first, each to the nearest site/row-aligned
//! position (among a finite candidate set) that clears the die edge and all
//! macros already placed. A stranded macro is promoted and the pass rerun.
//! Standard cells are then packed Tetris-style: in x order, each takes the
//! free site interval minimizing displacement. Rows
//! keep their free intervals, so gaps left behind stay usable. Rows
//! alternate N / FS.

use crate::design::{Design, Die, Orient, Status};
use crate::error::{Error, Result};
use crate::geom::{Dbu, Rect};
use crate::tech::Library;
use crate::tiling::{skyline_place, MacroShape};
use serde::Serialize;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LegalizeStats {
    pub cells: usize,
    /// Manhattan displacement, um.
    pub mean_displacement: f64,
    pub max_displacement: f64,
}

fn floor_to(v: Dbu, origin: Dbu, step: Dbu) -> Dbu {
    origin + (v - origin).div_euclid(step) * step
}

fn ceil_to(v: Dbu, origin: Dbu, step: Dbu) -> Dbu {
    origin + (v - origin + step - 1).div_euclid(step) * step
}

fn on_die(design: &Design, ci: usize, die: Die) -> bool {
    !design.stacked || design.components[ci].die == die
}

/// Legalizes the macros in `macros` (placed, on `die`) against each other
/// and against every FIXED macro already on `die`. Legalized macros become
/// FIXED. When the greedy pass strands a macro, it is retried first; with
/// no pre-existing obstacles a skyline packing is the last resort.
pub fn legalize_macros(design: &mut Design, lib: &Library, die: Die, macros: &[usize]) -> Result<()> {
    let mut keyed = Vec::with_capacity(macros.len());
    for &ci in macros {
        let m = design.master(lib, ci)?;
        keyed.push((std::cmp::Reverse(m.area()), design.components[ci].name.clone(), ci));
    }
    keyed.sort();
    let mut order: Vec<usize> = keyed.into_iter().map(|k| k.2).collect();

    let mut obstacles: Vec<Rect> = Vec::new();
    for ci in 0..design.components.len() {
        if on_die(design, ci, die)
            && !macros.contains(&ci)
            && design.is_macro(lib, ci)
            && design.components[ci].status == Status::Fixed
        {
            obstacles.push(design.rect(lib, ci)?);
        }
    }
    let mut stranded = None;
    for _ in 0..=order.len() {
        match greedy_macros(design, lib, &order, &obstacles)? {
            Ok(rects) => {
                commit_macros(design, &order, &rects);
                return Ok(());
            }
            Err(ci) => {
                stranded = Some(ci);
                let k = order.iter().position(|&o| o == ci).expect("stranded macro is in the order");
                if k == 0 {
                    break;
                }
                order[..=k].rotate_right(1);
            }
        }
    }
    if obstacles.is_empty() {
        if let Some(rects) = skyline_fallback(design, lib, &order)? {
            commit_macros(design, &order, &rects);
            return Ok(());
        }
    }
    let name = stranded.map_or_else(String::new, |ci| design.components[ci].name.clone());
    Err(Error::Infeasible(format!("no legal position for macro `{name}`")))
}

fn commit_macros(design: &mut Design, order: &[usize], rects: &[Rect]) {
    for (&ci, r) in order.iter().zip(rects) {
        let c = &mut design.components[ci];
        c.x = r.lx;
        c.y = r.ly;
        c.orient = Orient::N;
        c.status = Status::Fixed;
    }
}

/// One greedy pass in `order`: each macro takes the candidate nearest its
/// current position. Returns the rectangles, or the first stranded macro.
fn greedy_macros(design: &Design, lib: &Library, order: &[usize], obstacles: &[Rect]) -> Result<std::result::Result<Vec<Rect>, usize>> {
    let (sw, rh) = lib.site();
    let area = design.die;
    let mut placed: Vec<Rect> = obstacles.to_vec();
    let mut out = Vec::with_capacity(order.len());
    for &ci in order {
        let m = design.master(lib, ci)?;
        let (w, h) = (m.width, m.height);
        if w > area.width() || h > area.height() {
            return Err(Error::Infeasible(format!("macro `{}` larger than die", design.components[ci].name)));
        }
        let c = &design.components[ci];
        let (dx, dy) = (c.x, c.y);
        let max_x = floor_to(area.ux - w, area.lx, sw);
        let max_y = floor_to(area.uy - h, area.ly, rh);
        let sx = |v: Dbu| floor_to(v, area.lx, sw).clamp(area.lx, max_x);
        let sy = |v: Dbu| floor_to(v, area.ly, rh).clamp(area.ly, max_y);
        let mut xs = vec![sx(dx), ceil_to(dx, area.lx, sw).min(max_x), area.lx, max_x];
        let mut ys = vec![sy(dy), ceil_to(dy, area.ly, rh).min(max_y), area.ly, max_y];
        for r in &placed {
            xs.push(ceil_to(r.ux, area.lx, sw));
            xs.push(floor_to(r.lx - w, area.lx, sw));
            ys.push(ceil_to(r.uy, area.ly, rh));
            ys.push(floor_to(r.ly - h, area.ly, rh));
        }
        xs.retain(|&x| x >= area.lx && x <= max_x);
        ys.retain(|&y| y >= area.ly && y <= max_y);
        xs.sort_unstable();
        xs.dedup();
        ys.sort_unstable();
        ys.dedup();
        let mut cands: Vec<(Dbu, Dbu, Dbu)> = Vec::with_capacity(xs.len() * ys.len());
        for &x in &xs {
            for &y in &ys {
                cands.push(((x - dx).abs() + (y - dy).abs(), x, y));
            }
        }
        cands.sort_unstable();
        let pick = cands
            .into_iter()
            .map(|(_, x, y)| Rect::from_size(x, y, w, h))
            .find(|r| placed.iter().all(|o| !o.overlaps(r)));
        let Some(r) = pick else {
            return Ok(Err(ci));
        };
        placed.push(r);
        out.push(r);
    }
    Ok(Ok(out))
}

/// Bottom-left skyline packing on the site grid, in `order`.
fn skyline_fallback(design: &Design, lib: &Library, order: &[usize]) -> Result<Option<Vec<Rect>>> {
    let (sw, rh) = lib.site();
    let area = design.die;
    let mut shapes = Vec::with_capacity(order.len());
    for &ci in order {
        let m = design.master(lib, ci)?;
        // rounded up so packed corners stay on the grid
        let w = ceil_to(m.width, 0, sw);
        let h = ceil_to(m.height, 0, rh);
        shapes.push(MacroShape { name: design.components[ci].name.clone(), width: w, height: h });
    }
    let (w, h) = (floor_to(area.width(), 0, sw), floor_to(area.height(), 0, rh));
    match skyline_place(&shapes, w, h, 0) {
        Ok((pos, _)) => {
            let mut out = Vec::with_capacity(order.len());
            for (&ci, (x, y)) in order.iter().zip(pos) {
                let m = design.master(lib, ci)?;
                out.push(Rect::from_size(area.lx + x, area.ly + y, m.width, m.height));
            }
            Ok(Some(out))
        }
        Err(_) => Ok(None),
    }
}

/// Nearest site-aligned start for a cell of width `w` among a row's sorted
/// free intervals: (|x - dx|, interval index, x).
fn nearest_gap(gaps: &[(Dbu, Dbu)], dx: Dbu, w: Dbu, origin: Dbu, sw: Dbu) -> Option<(Dbu, usize, Dbu)> {
    let fit = |gi: usize| -> Option<(Dbu, usize, Dbu)> {
        let (s, e) = gaps[gi];
        let (lo, hi) = (ceil_to(s, origin, sw), floor_to(e - w, origin, sw));
        if hi < lo {
            return None;
        }
        let x = floor_to(dx, origin, sw).clamp(lo, hi);
        let x = if x + sw <= hi && (x + sw - dx).abs() < (x - dx).abs() { x + sw } else { x };
        Some(((x - dx).abs(), gi, x))
    };
    let split = gaps.partition_point(|g| g.0 <= dx);
    let mut best: Option<(Dbu, usize, Dbu)> = None;
    for gi in (0..split).rev() {
        // every later interval to the left ends further from dx
        if best.is_some_and(|b| dx - gaps[gi].1 >= b.0) {
            break;
        }
        if let Some(c) = fit(gi) {
            if best.is_none_or(|b| c.0 < b.0) {
                best = Some(c);
            }
        }
    }
    for gi in split..gaps.len() {
        if best.is_some_and(|b| gaps[gi].0 - dx >= b.0) {
            break;
        }
        if let Some(c) = fit(gi) {
            if best.is_none_or(|b| c.0 < b.0) {
                best = Some(c);
            }
        }
    }
    best
}

/// Row-based legalization of every non-FIXED standard cell on `die`.
/// Macros and FIXED cells on `die` are obstacles.
pub fn legalize(design: &mut Design, lib: &Library, die: Die) -> Result<LegalizeStats> {
    let (sw, rh) = lib.site();
    let area = design.die;
    let nrows = (area.height() / rh).max(0) as usize;

    let mut cells = Vec::new();
    let mut obstacles = Vec::new();
    for ci in 0..design.components.len() {
        if !on_die(design, ci, die) {
            continue;
        }
        let c = &design.components[ci];
        if design.is_macro(lib, ci) || c.status == Status::Fixed {
            if c.status.is_placed() {
                obstacles.push(design.rect(lib, ci)?);
            }
        } else {
            cells.push(ci);
        }
    }
    if cells.is_empty() {
        return Ok(LegalizeStats::default());
    }

    // Free intervals per row, sorted and disjoint.
    let mut rows: Vec<Vec<(Dbu, Dbu)>> = Vec::with_capacity(nrows);
    for r in 0..nrows {
        let y0 = area.ly + r as Dbu * rh;
        let mut blocked: Vec<(Dbu, Dbu)> =
            obstacles.iter().filter(|o| o.ly < y0 + rh && o.uy > y0).map(|o| (o.lx, o.ux)).collect();
        blocked.sort_unstable();
        let mut segs = Vec::new();
        let mut x = area.lx;
        for (b0, b1) in blocked.into_iter().chain(std::iter::once((area.ux, area.ux))) {
            let s = ceil_to(x, area.lx, sw);
            let e = floor_to(b0.min(area.ux), area.lx, sw);
            if e > s {
                segs.push((s, e));
            }
            x = x.max(b1);
        }
        rows.push(segs);
    }

    // Desired lower-left corners.
    let mut want = Vec::with_capacity(cells.len());
    for &ci in &cells {
        let m = design.master(lib, ci)?;
        let c = &design.components[ci];
        let (x, y) = if c.status.is_placed() {
            (c.x, c.y)
        } else {
            let (cx, cy) = area.center2();
            (cx / 2 - m.width / 2, cy / 2 - m.height / 2)
        };
        want.push((x, y, m.width, m.height, ci));
    }
    want.sort_by(|a, b| (a.0, a.1, &design.components[a.4].name).cmp(&(b.0, b.1, &design.components[b.4].name)));

    let (mut total, mut worst) = (0.0f64, 0.0f64);
    for &(dx, dy, w, h, ci) in &want {
        if h > rh {
            return Err(Error::InsufficientRowCapacity(format!(
                "cell `{}` is taller than a row",
                design.components[ci].name
            )));
        }
        let home = ((dy - area.ly) as f64 / rh as f64).round().clamp(0.0, nrows.saturating_sub(1) as f64) as usize;
        let mut best: Option<(Dbu, usize, usize, Dbu)> = None;
        for dist in 0..nrows {
            let mut visited = false;
            for r in [home.checked_sub(dist), (dist > 0).then_some(home + dist)].into_iter().flatten() {
                if r >= nrows {
                    continue;
                }
                visited = true;
                let ry = area.ly + r as Dbu * rh;
                let ycost = (ry - dy).abs();
                if best.is_some_and(|b| ycost >= b.0) {
                    continue;
                }
                if let Some((xcost, gi, x)) = nearest_gap(&rows[r], dx, w, area.lx, sw) {
                    if best.is_none_or(|b| xcost + ycost < b.0) {
                        best = Some((xcost + ycost, r, gi, x));
                    }
                }
            }
            let reach = dist as Dbu * rh;
            if !visited || best.is_some_and(|b| b.0 <= reach) {
                break;
            }
        }
        let Some((cost, r, si, x)) = best else {
            return Err(Error::InsufficientRowCapacity(format!(
                "no row room for cell `{}`",
                design.components[ci].name
            )));
        };
        let (s0, e0) = rows[r][si];
        let rest: Vec<(Dbu, Dbu)> = [(s0, x), (x + w, e0)].into_iter().filter(|g| g.1 > g.0).collect();
        rows[r].splice(si..=si, rest);
        let c = &mut design.components[ci];
        c.x = x;
        c.y = area.ly + r as Dbu * rh;
        c.orient = if r % 2 == 0 { Orient::N } else { Orient::FS };
        c.status = Status::Placed;
        let d = cost as f64 / 1000.0;
        total += d;
        worst = worst.max(d);
    }
    Ok(LegalizeStats { cells: want.len(), mean_displacement: total / want.len() as f64, max_displacement: worst })
}
