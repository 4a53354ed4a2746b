//! Weighted-average wirelength.
//!
//! Per net and axis the smoothed extent is
//!
//! ```text
//!   WA+ = sum(x_i e^{x_i/g}) / sum(e^{x_i/g})
//!   WA- = sum(x_i e^{-x_i/g}) / sum(e^{-x_i/g})
//!   W   = WA+ - WA-
//! ```
//!
//! with exponents shifted by the net maximum (minimum) for stability. `W`
//! approaches the exact half-perimeter from below as `g -> 0`.

use super::{Problem, Term};
use crate::design::Design;
use crate::error::Result;
use crate::tech::Library;
use rayon::prelude::*;

/// Nets per parallel chunk. Fixed so the reduction order never depends on
/// the thread count.
const CHUNK_NETS: usize = 512;

/// Smoothed extent and per-coordinate derivatives of one axis.
fn wa_axis(v: &[f64], gamma: f64, grad: &mut [f64]) -> f64 {
    let n = v.len();
    if n < 2 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        return 0.0;
    }
    let (mut vmax, mut vmin) = (f64::NEG_INFINITY, f64::INFINITY);
    for &x in v {
        vmax = vmax.max(x);
        vmin = vmin.min(x);
    }
    let (mut sa, mut xa, mut sb, mut xb) = (0.0, 0.0, 0.0, 0.0);
    for &x in v {
        let a = ((x - vmax) / gamma).exp();
        let b = ((vmin - x) / gamma).exp();
        sa += a;
        xa += x * a;
        sb += b;
        xb += x * b;
    }
    let wa_plus = xa / sa;
    let wa_minus = xb / sb;
    for (i, &x) in v.iter().enumerate() {
        let a = ((x - vmax) / gamma).exp();
        let b = ((vmin - x) / gamma).exp();
        let dp = a / sa * (1.0 + (x - wa_plus) / gamma);
        let dm = b / sb * (1.0 - (x - wa_minus) / gamma);
        grad[i] = dp - dm;
    }
    wa_plus - wa_minus
}

/// Evaluates the smoothed wirelength of a problem at the given centers,
/// accumulating the gradient into `gx`/`gy` (which are overwritten).
pub(crate) fn evaluate(p: &Problem, xs: &[f64], ys: &[f64], gamma: f64, gx: &mut [f64], gy: &mut [f64]) -> f64 {
    let nterms = p.terms.len();
    let mut tgx = vec![0.0; nterms];
    let mut tgy = vec![0.0; nterms];

    // Carve the per-term buffers into chunk-aligned disjoint slices.
    let nnets = p.num_nets();
    let mut jobs = Vec::new();
    {
        let mut rest_x: &mut [f64] = &mut tgx;
        let mut rest_y: &mut [f64] = &mut tgy;
        let mut net = 0;
        while net < nnets {
            let end = (net + CHUNK_NETS).min(nnets);
            let len = p.net_start[end] - p.net_start[net];
            let (cx, rx) = std::mem::take(&mut rest_x).split_at_mut(len);
            let (cy, ry) = std::mem::take(&mut rest_y).split_at_mut(len);
            rest_x = rx;
            rest_y = ry;
            jobs.push((net, end, cx, cy));
            net = end;
        }
    }
    let totals: Vec<f64> = jobs
        .into_par_iter()
        .map(|(a, b, cx, cy)| {
            let base = p.net_start[a];
            let mut vx = Vec::new();
            let mut vy = Vec::new();
            let mut total = 0.0;
            for k in a..b {
                let (s, e) = (p.net_start[k], p.net_start[k + 1]);
                vx.clear();
                vy.clear();
                for t in &p.terms[s..e] {
                    match *t {
                        Term::Mov(m, ox, oy) => {
                            vx.push(xs[m] + ox);
                            vy.push(ys[m] + oy);
                        }
                        Term::Fixed(x, y) => {
                            vx.push(x);
                            vy.push(y);
                        }
                    }
                }
                total += wa_axis(&vx, gamma, &mut cx[s - base..e - base]);
                total += wa_axis(&vy, gamma, &mut cy[s - base..e - base]);
            }
            total
        })
        .collect();

    gx.iter_mut().for_each(|g| *g = 0.0);
    gy.iter_mut().for_each(|g| *g = 0.0);
    for (t, term) in p.terms.iter().enumerate() {
        if let Term::Mov(m, _, _) = *term {
            gx[m] += tgx[t];
            gy[m] += tgy[t];
        }
    }
    totals.iter().sum()
}

/// Smoothed half-perimeter wirelength (um) of the design and its gradient
/// with respect to the center of each component in `movable`.
pub fn hpwl_smooth(design: &Design, lib: &Library, movable: &[usize], gamma: f64) -> Result<(f64, Vec<(f64, f64)>)> {
    let p = Problem::new(design, lib, movable)?;
    let (xs, ys) = p.centers(design, lib)?;
    let mut gx = vec![0.0; xs.len()];
    let mut gy = vec![0.0; xs.len()];
    let v = evaluate(&p, &xs, &ys, gamma, &mut gx, &mut gy);
    Ok((v, gx.into_iter().zip(gy).collect()))
}
