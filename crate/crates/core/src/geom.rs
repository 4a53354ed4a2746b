//! Integer database-unit geometry.
//!
//! All persistent coordinates are stored in database units (DBU) at a fixed
//! 1000 DBU per micron. Floating point only appears inside the optimizers,
//! which convert back through [`um_to_dbu`].

use serde::{Deserialize, Serialize};
use std::fmt;

/// Database units per micron used for every internal coordinate.
pub const DBU_PER_UM: i64 = 1000;

/// Distance in database units.
pub type Dbu = i64;

pub fn dbu_to_um(v: Dbu) -> f64 {
    v as f64 / DBU_PER_UM as f64
}

/// Rounds to the nearest database unit.
pub fn um_to_dbu(v: f64) -> Dbu {
    (v * DBU_PER_UM as f64).round() as Dbu
}

/// Parses a decimal micron literal (`"1.33"`, `"-0.07"`, `"2"`) into DBU
/// without going through floating point. Digits past the third decimal are
/// rounded half away from zero; `None` on malformed input.
pub fn parse_um(s: &str) -> Option<Dbu> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    if body.is_empty() {
        return None;
    }
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().all(|b| b.is_ascii_digit()) || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let int_val: i64 = if int_part.is_empty() { 0 } else { int_part.parse().ok()? };
    let mut frac_val: i64 = 0;
    for (i, b) in frac_part.bytes().enumerate() {
        let d = (b - b'0') as i64;
        match i {
            0 => frac_val += d * 100,
            1 => frac_val += d * 10,
            2 => frac_val += d,
            3
                if d >= 5 => {
                    frac_val += 1;
                }
            _ => {}
        }
    }
    let v = int_val.checked_mul(DBU_PER_UM)?.checked_add(frac_val)?;
    Some(if neg { -v } else { v })
}

/// Formats DBU as a micron literal with the fewest decimals that stay exact.
pub fn format_um(v: Dbu) -> String {
    let sign = if v < 0 { "-" } else { "" };
    let a = v.unsigned_abs();
    let int = a / DBU_PER_UM as u64;
    let frac = a % DBU_PER_UM as u64;
    if frac == 0 {
        format!("{sign}{int}")
    } else {
        let mut f = format!("{frac:03}");
        while f.ends_with('0') {
            f.pop();
        }
        format!("{sign}{int}.{f}")
    }
}

/// Axis-aligned rectangle in DBU with `lx <= ux` and `ly <= uy`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Rect {
    pub lx: Dbu,
    pub ly: Dbu,
    pub ux: Dbu,
    pub uy: Dbu,
}

impl Rect {
    /// Builds a rectangle from two arbitrary corners.
    pub fn new(x0: Dbu, y0: Dbu, x1: Dbu, y1: Dbu) -> Self {
        Rect { lx: x0.min(x1), ly: y0.min(y1), ux: x0.max(x1), uy: y0.max(y1) }
    }

    pub fn from_size(x: Dbu, y: Dbu, w: Dbu, h: Dbu) -> Self {
        Rect::new(x, y, x + w, y + h)
    }

    pub fn width(&self) -> Dbu {
        self.ux - self.lx
    }

    pub fn height(&self) -> Dbu {
        self.uy - self.ly
    }

    /// Area in DBU².
    pub fn area(&self) -> i128 {
        self.width() as i128 * self.height() as i128
    }

    pub fn area_um2(&self) -> f64 {
        dbu_to_um(self.width()) * dbu_to_um(self.height())
    }

    pub fn contains(&self, other: &Rect) -> bool {
        other.lx >= self.lx && other.ly >= self.ly && other.ux <= self.ux && other.uy <= self.uy
    }

    /// Intersection with positive area, if any.
    pub fn intersection(&self, other: &Rect) -> Option<Rect> {
        let lx = self.lx.max(other.lx);
        let ly = self.ly.max(other.ly);
        let ux = self.ux.min(other.ux);
        let uy = self.uy.min(other.uy);
        (lx < ux && ly < uy).then_some(Rect { lx, ly, ux, uy })
    }

    /// True when the interiors intersect; touching edges do not overlap.
    pub fn overlaps(&self, other: &Rect) -> bool {
        self.intersection(other).is_some()
    }

    pub fn translate(&self, dx: Dbu, dy: Dbu) -> Rect {
        Rect { lx: self.lx + dx, ly: self.ly + dy, ux: self.ux + dx, uy: self.uy + dy }
    }

    pub fn inflate(&self, d: Dbu) -> Rect {
        Rect { lx: self.lx - d, ly: self.ly - d, ux: self.ux + d, uy: self.uy + d }
    }

    /// Center in half-DBU, which keeps odd widths exact.
    pub fn center2(&self) -> (Dbu, Dbu) {
        (self.lx + self.ux, self.ly + self.uy)
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}) - ({}, {})",
            format_um(self.lx),
            format_um(self.ly),
            format_um(self.ux),
            format_um(self.uy)
        )
    }
}

/// Length of the overlap of `[a0, a1)` and `[b0, b1)`.
pub fn overlap_1d(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}
