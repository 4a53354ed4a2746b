use super::density::{DensityGrid, Footprint};
use super::{wirelength, write_back, PlacerParams, Problem};
use crate::design::Design;
use crate::error::{Error, Result};
use crate::tech::Library;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Retries per line search before falling back.
const MAX_HALVINGS: usize = 20;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PlaceStats {
    pub iterations: usize,
    pub bins: usize,
    pub gamma: f64,
    pub lambda: f64,
    /// Movable overflow over movable area at exit.
    pub overflow_ratio: f64,
    pub wirelength: f64,
    pub converged: bool,
    /// Objective before and after each accepted step, at that step's
    /// density weight.
    pub steps: Vec<(f64, f64)>,
}

/// About one movable object per bin, at most 64 per axis, and no bin
/// narrower than two median object heights (finer bins cannot resolve
/// row-height cells).
pub(crate) fn default_bins(n_movable: usize, die_side: f64, median_height: f64) -> usize {
    let side = (n_movable as f64).sqrt().ceil().max(1.0) as usize;
    let fit = if median_height > 0.0 { (die_side / (2.0 * median_height)).floor() as usize } else { usize::MAX };
    side.next_power_of_two().clamp(4, 64).min(fit.max(4))
}

struct Objective<'a> {
    p: &'a Problem,
    grid: DensityGrid,
    fp: Vec<Footprint>,
    gamma: f64,
    target: f64,
    // scratch
    gwx: Vec<f64>,
    gwy: Vec<f64>,
    gdx: Vec<f64>,
    gdy: Vec<f64>,
}

impl Objective<'_> {
    /// Returns (wirelength, density) and fills the term gradients.
    fn eval(&mut self, xs: &[f64], ys: &[f64]) -> (f64, f64) {
        let w = wirelength::evaluate(self.p, xs, ys, self.gamma, &mut self.gwx, &mut self.gwy);
        let d = self.grid.evaluate(&self.fp, xs, ys, self.target, Some((&mut self.gdx, &mut self.gdy)));
        (w, d)
    }

    fn value(&mut self, xs: &[f64], ys: &[f64], lambda: f64) -> f64 {
        let (w, d) = self.eval(xs, ys);
        w + lambda * d
    }
}

fn norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().chain(b).map(|v| v * v).sum::<f64>().sqrt()
}

/// Global placement of `movable` components; every other placed component
/// is an obstacle. Orientation is reset to N.
pub fn global_place(design: &mut Design, lib: &Library, movable: &[usize], params: &PlacerParams) -> Result<PlaceStats> {
    global_place_observed(design, lib, movable, params, None)
}

/// Receives a copy of the design with current positions written back.
pub type SnapshotFn<'a> = &'a mut dyn FnMut(usize, &Design) -> Result<()>;

/// [`global_place`] that hands a snapshot to `observer.1` every
/// `observer.0` iterations, starting at iteration 0.
pub fn global_place_observed(
    design: &mut Design,
    lib: &Library,
    movable: &[usize],
    params: &PlacerParams,
    mut observer: Option<(usize, SnapshotFn<'_>)>,
) -> Result<PlaceStats> {
    params.validate()?;
    if movable.is_empty() {
        return Ok(PlaceStats { converged: true, ..Default::default() });
    }
    for &ci in movable {
        design.components[ci].orient = crate::design::Orient::N;
    }
    let p = Problem::new(design, lib, movable)?;
    let n = movable.len();
    let bins = params.bins.unwrap_or_else(|| {
        let mut hs = p.h.clone();
        hs.sort_unstable_by(f64::total_cmp);
        default_bins(n, (p.die.ux - p.die.lx).min(p.die.uy - p.die.ly), hs[n / 2])
    });
    let grid = DensityGrid::new(p.die, bins, bins, &p.fixed_rects);
    let (bw, bh) = (grid.bin_w, grid.bin_h);
    let gamma = params.gamma.unwrap_or(4.0 * (bw + bh) / 2.0);
    let fp = (0..n).map(|k| grid.footprint(p.w[k], p.h[k])).collect();
    let mov_area: f64 = (0..n).map(|k| p.w[k] * p.h[k]).sum();
    let mut obj = Objective {
        p: &p,
        grid,
        fp,
        gamma,
        target: params.target_density,
        gwx: vec![0.0; n],
        gwy: vec![0.0; n],
        gdx: vec![0.0; n],
        gdy: vec![0.0; n],
    };

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let (cx, cy) = ((p.die.lx + p.die.ux) / 2.0, (p.die.ly + p.die.uy) / 2.0);
    let mut xs: Vec<f64> = Vec::with_capacity(n);
    let mut ys: Vec<f64> = Vec::with_capacity(n);
    for _ in 0..n {
        xs.push(cx + rng.gen_range(-1.0..=1.0) * bw);
        ys.push(cy + rng.gen_range(-1.0..=1.0) * bh);
    }
    p.clamp(&mut xs, &mut ys);

    let (mut w, mut d) = obj.eval(&xs, &ys);
    if !(w.is_finite() && d.is_finite()) {
        return Err(Error::Diverged("non-finite initial objective".into()));
    }
    let mut lambda = params.lambda0;
    let max_step = params.initial_step * bw.max(bh);
    let mut step = max_step;
    let (mut vx, mut vy) = (vec![0.0; n], vec![0.0; n]);
    let mut stats = PlaceStats { bins, gamma, ..Default::default() };
    let mut iter = 0;
    let mut ratio = obj.grid.overflow(params.target_density) / mov_area.max(f64::MIN_POSITIVE);
    while iter < params.max_iters {
        if let Some((every, f)) = observer.as_mut() {
            if *every > 0 && iter % *every == 0 {
                let mut snap = design.clone();
                write_back(&mut snap, lib, movable, &xs, &ys)?;
                f(iter, &snap)?;
            }
        }
        if iter >= params.min_iters && ratio <= params.overflow_stop {
            stats.converged = true;
            break;
        }
        if lambda.is_none() {
            let gd = norm(&obj.gdx, &obj.gdy);
            if gd > 0.0 {
                lambda = Some(0.1 * norm(&obj.gwx, &obj.gwy) / gd);
            }
        }
        let lam = lambda.unwrap_or(0.0);
        let f0 = w + lam * d;
        let gx: Vec<f64> = (0..n).map(|k| obj.gwx[k] + lam * obj.gdx[k]).collect();
        let gy: Vec<f64> = (0..n).map(|k| obj.gwy[k] + lam * obj.gdy[k]).collect();
        let gmax = gx.iter().chain(&gy).fold(0.0f64, |m, v| m.max(v.abs()));
        if gmax == 0.0 {
            stats.converged = ratio <= params.overflow_stop;
            break;
        }
        for k in 0..n {
            vx[k] = params.momentum * vx[k] - gx[k] / gmax;
            vy[k] = params.momentum * vy[k] - gy[k] / gmax;
        }
        let vmax = vx.iter().chain(&vy).fold(0.0f64, |m, v| m.max(v.abs()));

        let mut accepted = None;
        let mut any_finite = false;
        // Momentum direction first, then plain gradient.
        'search: for pass in 0..2 {
            let (dx, dy, scale): (&[f64], &[f64], f64) = if pass == 0 { (&vx, &vy, vmax.max(1.0)) } else { (&gx, &gy, -gmax) };
            let mut s = step;
            for _ in 0..=MAX_HALVINGS {
                let mut tx: Vec<f64> = (0..n).map(|k| xs[k] + s * dx[k] / scale).collect();
                let mut ty: Vec<f64> = (0..n).map(|k| ys[k] + s * dy[k] / scale).collect();
                p.clamp(&mut tx, &mut ty);
                let f1 = obj.value(&tx, &ty, lam);
                if f1.is_finite() {
                    any_finite = true;
                    if f1 <= f0 {
                        accepted = Some((tx, ty, f1, s));
                        break 'search;
                    }
                }
                s /= 2.0;
            }
            if pass == 0 {
                vx.iter_mut().chain(vy.iter_mut()).for_each(|v| *v = 0.0);
            }
        }
        if !any_finite {
            return Err(Error::Diverged(format!("objective not finite after {MAX_HALVINGS} halvings at iteration {iter}")));
        }
        match accepted {
            Some((tx, ty, f1, s)) => {
                xs = tx;
                ys = ty;
                stats.steps.push((f0, f1));
                step = (s * 1.25).min(max_step);
            }
            None => {
                step = (step / 2.0).max(max_step * 1e-6);
            }
        }
        (w, d) = obj.eval(&xs, &ys);
        ratio = obj.grid.overflow(params.target_density) / mov_area.max(f64::MIN_POSITIVE);
        if let Some(l) = lambda.as_mut() {
            *l *= params.lambda_growth;
        }
        iter += 1;
    }
    if iter >= params.max_iters && ratio <= params.overflow_stop {
        stats.converged = true;
    }
    stats.iterations = iter;
    stats.lambda = lambda.unwrap_or(0.0);
    stats.overflow_ratio = ratio;
    stats.wirelength = w;
    log::debug!("global_place: {n} movable, {iter} iterations, overflow ratio {ratio:.4}, wa {w:.1}");
    write_back(design, lib, movable, &xs, &ys)?;
    Ok(stats)
}
