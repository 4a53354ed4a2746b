//! Quadratic bin-overflow density.
//!
//! Each bin has `capacity` (its area) and `fixed` usage from obstacles. The
//! room left for movable area is `max(0, target * capacity - fixed)`; the
//! bin overflow is whatever movable usage exceeds that room, and the
//! penalty is the sum of squared overflows. Obstacles alone never overflow.
//!
//! Components narrower (shorter) than `sqrt(2)` bins are stretched to that
//! size with their density scaled down so the covered area is preserved.
//! Overlap is piecewise linear in the center, which makes the penalty
//! piecewise smooth with kinks where an edge crosses a bin boundary.

use super::{Area, Problem};
use crate::design::Design;
use crate::error::Result;
use crate::geom::overlap_1d;
use crate::tech::Library;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub nx: usize,
    pub ny: usize,
    pub bin_w: f64,
    pub bin_h: f64,
    pub(crate) origin: (f64, f64),
    /// Bin area, um^2, row-major with `x` fastest.
    pub capacity: Vec<f64>,
    /// Obstacle area clipped to each bin.
    pub fixed: Vec<f64>,
    /// Movable area from the last evaluation.
    pub usage: Vec<f64>,
}

/// Stretched footprint and density scale of one movable component.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Footprint {
    pub w: f64,
    pub h: f64,
    pub scale: f64,
}

impl DensityGrid {
    pub(crate) fn new(die: Area, nx: usize, ny: usize, obstacles: &[Area]) -> Self {
        let bin_w = (die.ux - die.lx) / nx as f64;
        let bin_h = (die.uy - die.ly) / ny as f64;
        let mut g = DensityGrid {
            nx,
            ny,
            bin_w,
            bin_h,
            origin: (die.lx, die.ly),
            capacity: vec![bin_w * bin_h; nx * ny],
            fixed: vec![0.0; nx * ny],
            usage: vec![0.0; nx * ny],
        };
        for r in obstacles {
            let (i0, i1) = g.span_x(r.lx, r.ux);
            let (j0, j1) = g.span_y(r.ly, r.uy);
            for j in j0..j1 {
                let (b0, b1) = g.bin_y(j);
                let oy = overlap_1d(r.ly, r.uy, b0, b1);
                for i in i0..i1 {
                    let (a0, a1) = g.bin_x(i);
                    g.fixed[j * nx + i] += overlap_1d(r.lx, r.ux, a0, a1) * oy;
                }
            }
        }
        g
    }

    /// Grid over the die with all placed components outside `movable` as
    /// obstacles.
    pub fn build(design: &Design, lib: &Library, movable: &[usize], bins: usize) -> Result<Self> {
        let p = Problem::new(design, lib, movable)?;
        Ok(DensityGrid::new(p.die, bins, bins, &p.fixed_rects))
    }

    fn bin_x(&self, i: usize) -> (f64, f64) {
        let a = self.origin.0 + i as f64 * self.bin_w;
        (a, a + self.bin_w)
    }

    fn bin_y(&self, j: usize) -> (f64, f64) {
        let a = self.origin.1 + j as f64 * self.bin_h;
        (a, a + self.bin_h)
    }

    fn span(lo: f64, hi: f64, origin: f64, step: f64, n: usize) -> (usize, usize) {
        let a = ((lo - origin) / step).floor().max(0.0) as usize;
        let b = ((hi - origin) / step).ceil().max(0.0) as usize;
        (a.min(n), b.min(n))
    }

    fn span_x(&self, lo: f64, hi: f64) -> (usize, usize) {
        Self::span(lo, hi, self.origin.0, self.bin_w, self.nx)
    }

    fn span_y(&self, lo: f64, hi: f64) -> (usize, usize) {
        Self::span(lo, hi, self.origin.1, self.bin_h, self.ny)
    }

    pub(crate) fn footprint(&self, w: f64, h: f64) -> Footprint {
        let s2 = std::f64::consts::SQRT_2;
        let fw = w.max(s2 * self.bin_w);
        let fh = h.max(s2 * self.bin_h);
        Footprint { w: fw, h: fh, scale: if fw * fh > 0.0 { w * h / (fw * fh) } else { 0.0 } }
    }

    /// Room for movable area in bin `b`.
    pub fn room(&self, b: usize, target: f64) -> f64 {
        (target * self.capacity[b] - self.fixed[b]).max(0.0)
    }

    /// Recomputes movable usage and returns the penalty; when `grad` is
    /// given it receives the derivative with respect to every center.
    pub(crate) fn evaluate(
        &mut self,
        fp: &[Footprint],
        xs: &[f64],
        ys: &[f64],
        target: f64,
        grad: Option<(&mut [f64], &mut [f64])>,
    ) -> f64 {
        self.usage.iter_mut().for_each(|u| *u = 0.0);
        for k in 0..xs.len() {
            let f = fp[k];
            let (lx, ux) = (xs[k] - f.w / 2.0, xs[k] + f.w / 2.0);
            let (ly, uy) = (ys[k] - f.h / 2.0, ys[k] + f.h / 2.0);
            let (i0, i1) = self.span_x(lx, ux);
            let (j0, j1) = self.span_y(ly, uy);
            for j in j0..j1 {
                let (b0, b1) = self.bin_y(j);
                let oy = overlap_1d(ly, uy, b0, b1);
                for i in i0..i1 {
                    let (a0, a1) = self.bin_x(i);
                    self.usage[j * self.nx + i] += f.scale * overlap_1d(lx, ux, a0, a1) * oy;
                }
            }
        }
        let over: Vec<f64> = (0..self.usage.len()).map(|b| (self.usage[b] - self.room(b, target)).max(0.0)).collect();
        let value = over.iter().map(|o| o * o).sum();
        if let Some((gx, gy)) = grad {
            for k in 0..xs.len() {
                let f = fp[k];
                let (lx, ux) = (xs[k] - f.w / 2.0, xs[k] + f.w / 2.0);
                let (ly, uy) = (ys[k] - f.h / 2.0, ys[k] + f.h / 2.0);
                let (i0, i1) = self.span_x(lx, ux);
                let (j0, j1) = self.span_y(ly, uy);
                let (mut dx, mut dy) = (0.0, 0.0);
                for j in j0..j1 {
                    let (b0, b1) = self.bin_y(j);
                    let oy = overlap_1d(ly, uy, b0, b1);
                    let doy = d_overlap(ly, uy, b0, b1);
                    for i in i0..i1 {
                        let o = over[j * self.nx + i];
                        if o == 0.0 {
                            continue;
                        }
                        let (a0, a1) = self.bin_x(i);
                        let ox = overlap_1d(lx, ux, a0, a1);
                        let dox = d_overlap(lx, ux, a0, a1);
                        dx += 2.0 * o * f.scale * dox * oy;
                        dy += 2.0 * o * f.scale * ox * doy;
                    }
                }
                gx[k] = dx;
                gy[k] = dy;
            }
        }
        value
    }

    /// Total movable overflow from the last evaluation, um^2.
    pub fn overflow(&self, target: f64) -> f64 {
        (0..self.usage.len()).map(|b| (self.usage[b] - self.room(b, target)).max(0.0)).sum()
    }
}

/// Derivative of `overlap_1d(c - w/2, c + w/2, b0, b1)` with respect to `c`.
fn d_overlap(lo: f64, hi: f64, b0: f64, b1: f64) -> f64 {
    if hi <= b0 || lo >= b1 {
        return 0.0;
    }
    let right = if hi < b1 { 1.0 } else { 0.0 };
    let left = if lo > b0 { 1.0 } else { 0.0 };
    right - left
}

/// Density penalty of the current placement on a `bins` x `bins` grid and
/// its gradient with respect to the center of each component in `movable`.
pub fn density_penalty(
    design: &Design,
    lib: &Library,
    movable: &[usize],
    bins: usize,
    target: f64,
) -> Result<(f64, Vec<(f64, f64)>)> {
    let p = Problem::new(design, lib, movable)?;
    let mut grid = DensityGrid::new(p.die, bins, bins, &p.fixed_rects);
    let fp: Vec<Footprint> = (0..p.movable.len()).map(|k| grid.footprint(p.w[k], p.h[k])).collect();
    let (xs, ys) = p.centers(design, lib)?;
    let mut gx = vec![0.0; xs.len()];
    let mut gy = vec![0.0; xs.len()];
    let v = grid.evaluate(&fp, &xs, &ys, target, Some((&mut gx, &mut gy)));
    Ok((v, gx.into_iter().zip(gy).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn die(s: f64) -> Area {
        Area { lx: 0.0, ly: 0.0, ux: s, uy: s }
    }

    #[test]
    fn empty_die_is_zero() {
        let mut g = DensityGrid::new(die(10.0), 4, 4, &[]);
        assert_eq!(g.evaluate(&[], &[], &[], 0.8, None), 0.0);
    }

    #[test]
    fn obstacles_alone_do_not_overflow() {
        let mut g = DensityGrid::new(die(10.0), 2, 2, &[die(10.0)]);
        assert_eq!(g.evaluate(&[], &[], &[], 0.8, None), 0.0);
        assert!((g.fixed.iter().sum::<f64>() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn overfilled_bin_matches_hand_value() {
        // A 20x20 block covers four 10x10 bins, each 20 over its room of 80.
        let mut g = DensityGrid::new(die(40.0), 4, 4, &[]);
        let fp = [g.footprint(20.0, 20.0)];
        let v = g.evaluate(&fp, &[10.0], &[10.0], 0.8, None);
        assert!((v - 1600.0).abs() < 1e-9);
        assert!((g.overflow(0.8) - 80.0).abs() < 1e-9);
    }

    #[test]
    fn stretch_preserves_area() {
        let g = DensityGrid::new(die(40.0), 4, 4, &[]);
        let f = g.footprint(1.0, 2.0);
        assert!((f.w * f.h * f.scale - 2.0).abs() < 1e-12);
        assert!(f.w >= std::f64::consts::SQRT_2 * 10.0);
    }
}
