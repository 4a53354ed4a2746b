//! Steady-state grid thermal model.
//!
//! Each die is an `n x n` grid of nodes joined by lateral resistances; the
//! two dies of a stack are joined node to node through the bond interface,
//! and the bottom die drains to ambient through the heat sink. Temperatures
//! solve `G * theta = P` with `theta = T - ambient`.
//!
//! Reference geometry is a 1 mm^2 die at 10 x 10: lateral resistances
//! scale with the cell aspect (sheet model); vertical and sink resistances
//! scale with the inverse of the cell area.

use crate::design::{Design, Die};
use crate::error::{Error, Result};
use crate::geom::{overlap_1d, Rect};
use crate::metrics::{component_power, PowerMap};
use crate::tech::Library;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Cell area of the reference geometry, mm^2.
const REF_CELL_MM2: f64 = 0.01;
/// Node count up to which the dense direct solver is used.
const DIRECT_LIMIT: usize = 1000;
const MAX_SWEEPS: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThermalParams {
    pub grid_n: usize,
    pub power_scale: f64,
    pub ambient_c: f64,
    /// K/W between adjacent square cells.
    pub r_lateral: f64,
    /// K/W between stacked cells at the reference cell area; 0 merges the
    /// two dies into one plane.
    pub r_vertical: f64,
    /// K/W from a bottom-die cell to ambient at the reference cell area.
    pub r_sink: f64,
    /// Same for the top die; `None` leaves the top die without a sink.
    pub r_sink_top: Option<f64>,
}

impl Default for ThermalParams {
    fn default() -> Self {
        ThermalParams {
            grid_n: 10,
            power_scale: 10.0,
            ambient_c: 45.0,
            r_lateral: 0.02,
            r_vertical: 0.5,
            r_sink: 2.0,
            r_sink_top: None,
        }
    }
}

impl ThermalParams {
    pub fn validate(&self) -> Result<()> {
        if self.grid_n == 0 {
            return Err(Error::InvalidParam("grid_n must be at least 1".into()));
        }
        if !(self.r_lateral > 0.0 && self.r_sink > 0.0 && self.r_vertical >= 0.0) {
            return Err(Error::InvalidParam("lateral and sink resistances must be positive, vertical non-negative".into()));
        }
        if self.r_sink_top.is_some_and(|r| !(r > 0.0)) {
            return Err(Error::InvalidParam("r_sink_top must be positive".into()));
        }
        if !(self.power_scale >= 0.0) || !self.ambient_c.is_finite() {
            return Err(Error::InvalidParam("power_scale must be non-negative".into()));
        }
        Ok(())
    }
}

/// Conductance graph over `planes * grid_n^2` nodes plus the implicit
/// ambient node.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalNetwork {
    pub grid_n: usize,
    pub planes: usize,
    /// Injected power per node, W.
    pub power: Vec<f64>,
    /// Conductance to ambient per node, W/K.
    pub sink: Vec<f64>,
    /// Symmetric off-diagonal couplings `(a, b, g)` with `a < b`.
    pub edges: Vec<(usize, usize, f64)>,
}

fn bin_rects(die: Rect, n: usize) -> (f64, f64) {
    (die.width() as f64 / n as f64, die.height() as f64 / n as f64)
}

/// Splits each component's power over the bins it overlaps, scaled by
/// `scale`; returns one `grid_n^2` plane per die (one for 2D designs).
pub fn aggregate_power(design: &Design, lib: &Library, power: &[f64], grid_n: usize, scale: f64) -> Result<Vec<f64>> {
    let planes = if design.stacked { 2 } else { 1 };
    let n = grid_n;
    let mut out = vec![0.0; planes * n * n];
    let die = design.die;
    let (bw, bh) = bin_rects(die, n);
    for ci in 0..design.components.len() {
        if power[ci] == 0.0 {
            continue;
        }
        if !design.components[ci].status.is_placed() {
            return Err(Error::UnplacedComponent(design.components[ci].name.clone()));
        }
        let r = design.rect(lib, ci)?;
        let plane = if design.stacked && design.components[ci].die == Die::Top { 1 } else { 0 };
        let (lx, ly, ux, uy) = ((r.lx - die.lx) as f64, (r.ly - die.ly) as f64, (r.ux - die.lx) as f64, (r.uy - die.ly) as f64);
        let area = (ux - lx) * (uy - ly);
        for j in 0..n {
            let oy = overlap_1d(ly, uy, j as f64 * bh, (j + 1) as f64 * bh);
            if oy == 0.0 {
                continue;
            }
            for i in 0..n {
                let ox = overlap_1d(lx, ux, i as f64 * bw, (i + 1) as f64 * bw);
                out[plane * n * n + j * n + i] += scale * power[ci] * ox * oy / area;
            }
        }
    }
    Ok(out)
}

impl ThermalNetwork {
    /// Network for a die outline with `power` laid out as from
    /// [`aggregate_power`]. With `r_vertical == 0` the planes are merged:
    /// powers add and lateral conductances add.
    pub fn build(die: Rect, params: &ThermalParams, power: &[f64]) -> Result<Self> {
        params.validate()?;
        let n = params.grid_n;
        let nn = n * n;
        if power.is_empty() || !power.len().is_multiple_of(nn) || power.len() / nn > 2 {
            return Err(Error::InvalidParam(format!("power vector of {} entries for a {n}x{n} grid", power.len())));
        }
        let mut planes = power.len() / nn;
        let mut power = power.to_vec();
        let mut lateral_planes = 1.0;
        if planes == 2 && params.r_vertical == 0.0 {
            let (b, t) = power.split_at(nn);
            power = b.iter().zip(t).map(|(a, b)| a + b).collect();
            planes = 1;
            lateral_planes = 2.0;
        }
        let (bw, bh) = bin_rects(die, n);
        if !(bw > 0.0 && bh > 0.0) {
            return Err(Error::InvalidParam("die outline is empty".into()));
        }
        let cell_mm2 = bw * bh / 1e12;
        let area_factor = cell_mm2 / REF_CELL_MM2;
        let gx = lateral_planes * (bh / bw) / params.r_lateral;
        let gy = lateral_planes * (bw / bh) / params.r_lateral;
        let mut edges = Vec::new();
        for p in 0..planes {
            for j in 0..n {
                for i in 0..n {
                    let a = p * nn + j * n + i;
                    if i + 1 < n {
                        edges.push((a, a + 1, gx));
                    }
                    if j + 1 < n {
                        edges.push((a, a + n, gy));
                    }
                }
            }
        }
        if planes == 2 {
            let gv = area_factor / params.r_vertical;
            for a in 0..nn {
                edges.push((a, nn + a, gv));
            }
        }
        let mut sink = vec![0.0; planes * nn];
        for s in sink.iter_mut().take(nn) {
            *s = area_factor / params.r_sink;
        }
        if planes == 2 {
            if let Some(r) = params.r_sink_top {
                for s in sink.iter_mut().skip(nn) {
                    *s = area_factor / r;
                }
            }
        }
        Ok(ThermalNetwork { grid_n: n, planes, power, sink, edges })
    }

    pub fn len(&self) -> usize {
        self.power.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power.is_empty()
    }

    /// Dense conductance matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut g = DMatrix::zeros(n, n);
        for (a, &s) in self.sink.iter().enumerate() {
            g[(a, a)] += s;
        }
        for &(a, b, c) in &self.edges {
            g[(a, a)] += c;
            g[(b, b)] += c;
            g[(a, b)] -= c;
            g[(b, a)] -= c;
        }
        g
    }

    fn adjacency(&self) -> (Vec<Vec<(usize, f64)>>, Vec<f64>) {
        let n = self.len();
        let mut adj = vec![Vec::new(); n];
        let mut diag = self.sink.clone();
        for &(a, b, c) in &self.edges {
            adj[a].push((b, c));
            adj[b].push((a, c));
            diag[a] += c;
            diag[b] += c;
        }
        (adj, diag)
    }

    /// `max |G * theta - P|`.
    pub fn residual(&self, theta: &[f64]) -> f64 {
        let (adj, diag) = self.adjacency();
        self.residual_with(&adj, &diag, theta)
    }

    fn residual_with(&self, adj: &[Vec<(usize, f64)>], diag: &[f64], theta: &[f64]) -> f64 {
        (0..self.len())
            .map(|a| {
                let mut r = diag[a] * theta[a] - self.power[a];
                for &(b, c) in &adj[a] {
                    r -= c * theta[b];
                }
                r.abs()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalResult {
    pub grid_n: usize,
    pub ambient_c: f64,
    pub t_max_c: f64,
    /// One row-major `grid_n x grid_n` field per plane, bottom first, in C.
    pub planes: Vec<Vec<f64>>,
    /// Heat leaving through the sink, W.
    pub heat_out_w: f64,
    pub residual: f64,
}

impl ThermalResult {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("thermal result serializes");
        s.push('\n');
        s
    }
}

/// Solves the network: dense Cholesky up to 1000 nodes, otherwise
/// Gauss-Seidel with over-relaxation to `1e-9 * max(1, max P)`.
pub fn solve_steady(net: &ThermalNetwork, ambient_c: f64) -> Result<ThermalResult> {
    let n = net.len();
    let pmax = net.power.iter().fold(0.0f64, |m, p| m.max(p.abs()));
    let tol = 1e-9 * pmax.max(1.0);
    if net.sink.iter().all(|&s| s == 0.0) {
        return Err(Error::InvalidParam("network has no path to ambient".into()));
    }
    let theta: Vec<f64> = if pmax == 0.0 {
        vec![0.0; n]
    } else if n <= DIRECT_LIMIT {
        let chol = net.matrix().cholesky().ok_or_else(|| Error::NonConvergence("conductance matrix is not positive definite".into()))?;
        chol.solve(&DVector::from_column_slice(&net.power)).iter().copied().collect()
    } else {
        let (adj, diag) = net.adjacency();
        let side = net.grid_n as f64;
        let omega = 2.0 / (1.0 + (std::f64::consts::PI / side).sin());
        let mut t = vec![0.0; n];
        let mut sweeps = 0;
        loop {
            for a in 0..n {
                let mut s = net.power[a];
                for &(b, c) in &adj[a] {
                    s += c * t[b];
                }
                t[a] += omega * (s / diag[a] - t[a]);
            }
            sweeps += 1;
            if sweeps % 16 == 0 && net.residual_with(&adj, &diag, &t) <= tol {
                break;
            }
            if sweeps >= MAX_SWEEPS {
                return Err(Error::NonConvergence(format!("residual above {tol:e} after {MAX_SWEEPS} sweeps")));
            }
        }
        t
    };
    let residual = net.residual(&theta);
    if residual > tol {
        return Err(Error::NonConvergence(format!("residual {residual:e} above {tol:e}")));
    }
    let heat_out_w = net.sink.iter().zip(&theta).map(|(g, t)| g * t).sum();
    let nn = net.grid_n * net.grid_n;
    let planes: Vec<Vec<f64>> = theta.chunks(nn).map(|p| p.iter().map(|t| t + ambient_c).collect()).collect();
    let t_max_c = theta.iter().fold(0.0f64, |m, &t| m.max(t)) + ambient_c;
    Ok(ThermalResult { grid_n: net.grid_n, ambient_c, t_max_c, planes, heat_out_w, residual })
}

/// Power aggregation, network construction and solve for a placed design.
pub fn analyze(design: &Design, lib: &Library, power: Option<&PowerMap>, params: &ThermalParams) -> Result<ThermalResult> {
    params.validate()?;
    let per_comp = component_power(design, lib, power)?;
    let p = aggregate_power(design, lib, &per_comp, params.grid_n, params.power_scale)?;
    let net = ThermalNetwork::build(design.die, params, &p)?;
    solve_steady(&net, params.ambient_c)
}

/// Peak temperatures of a 2D and a 3D implementation under identical
/// parameters: `(t_max_2d, t_max_3d)`.
pub fn compare_2d_3d(
    d2: (&Design, &Library, Option<&PowerMap>),
    d3: (&Design, &Library, Option<&PowerMap>),
    params: &ThermalParams,
) -> Result<(f64, f64)> {
    let a = analyze(d2.0, d2.1, d2.2, params)?;
    let b = analyze(d3.0, d3.1, d3.2, params)?;
    Ok((a.t_max_c, b.t_max_c))
}
