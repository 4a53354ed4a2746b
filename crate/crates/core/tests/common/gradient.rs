//! Central finite-difference oracle for the two placement objective terms.

use super::{close, random_instance, rng, Instance};
use open3d_flow::design::Design;
use open3d_flow::placer::{density_penalty, hpwl_smooth};
use open3d_flow::tech::Library;
use rand::Rng;

/// Step of 1e-3 um, one DBU.
pub const H_DBU: i64 = 1;
pub const H_UM: f64 = 1e-3;
pub const REL_TOL: f64 = 1e-3;
/// Third differences above this share of the gradient scale flag a kink
/// inside the stencil.
const KINK_TOL: f64 = 1e-5;

#[derive(Debug, Default, Clone)]
pub struct GradCheck {
    pub checked: usize,
    pub excluded: usize,
    pub failures: Vec<String>,
}

impl GradCheck {
    pub fn ok(&self) -> bool {
        self.failures.is_empty() && self.checked > 0
    }

    fn merge(&mut self, o: GradCheck) {
        self.checked += o.checked;
        self.excluded += o.excluded;
        self.failures.extend(o.failures);
    }
}

pub struct GradInstance {
    pub inst: Instance,
    pub movable: Vec<usize>,
    pub gamma: f64,
    pub bins: usize,
    pub target: f64,
}

/// Clustered, overfilled instance: cells gathered around one point, half
/// the macros fixed as obstacles.
pub fn instance(seed: u64) -> GradInstance {
    let mut r = rng(seed ^ 0x9e37_79b9);
    let cells = r.gen_range(60..150);
    let macros = r.gen_range(0..4);
    let mut inst = random_instance(seed, cells, macros, cells + 10, 6, 40);
    let side = inst.design.die.width();
    let (cx, cy) = (r.gen_range(side / 4..3 * side / 4), r.gen_range(side / 4..3 * side / 4));
    let spread = side / 8;
    let n = inst.design.components.len();
    let mut movable = Vec::new();
    for ci in 0..n {
        let m = inst.lib.master(&inst.design.components[ci].master).unwrap().clone();
        if m.is_macro() && r.gen_bool(0.5) {
            continue;
        }
        movable.push(ci);
        if !m.is_macro() {
            let c = &mut inst.design.components[ci];
            c.x = (cx + r.gen_range(-spread..spread)).clamp(0, side - m.width);
            c.y = (cy + r.gen_range(-spread..spread)).clamp(0, side - m.height);
        }
    }
    GradInstance { inst, movable, gamma: r.gen_range(0.5..5.0), bins: r.gen_range(4..=12), target: r.gen_range(0.1..0.5) }
}

fn shifted(d: &Design, ci: usize, axis: usize, dbu: i64) -> Design {
    let mut d = d.clone();
    let c = &mut d.components[ci];
    if axis == 0 {
        c.x += dbu;
    } else {
        c.y += dbu;
    }
    d
}

fn scale(g: &[(f64, f64)]) -> f64 {
    g.iter().fold(0.0f64, |m, &(a, b)| m.max(a.abs()).max(b.abs()))
}

/// Compares an analytic gradient against central differences coordinate by
/// coordinate. With `kinks`, stencils whose third difference shows a
/// gradient or curvature jump are skipped.
fn check_term(
    name: &str,
    d: &Design,
    movable: &[usize],
    grad: &[(f64, f64)],
    kinks: bool,
    f: &dyn Fn(&Design) -> f64,
) -> GradCheck {
    let mut out = GradCheck::default();
    let floor = 1e-4 * scale(grad).max(1e-9);
    for (k, &ci) in movable.iter().enumerate() {
        for axis in 0..2 {
            let at = |s: i64| f(&shifted(d, ci, axis, s * H_DBU));
            let (fp, fm) = (at(1), at(-1));
            let fd = (fp - fm) / (2.0 * H_UM);
            if kinks {
                let d3 = at(2) - 2.0 * fp + 2.0 * fm - at(-2);
                if (d3 / (2.0 * H_UM)).abs() > KINK_TOL * fd.abs().max(floor) {
                    out.excluded += 1;
                    continue;
                }
            }
            let ga = if axis == 0 { grad[k].0 } else { grad[k].1 };
            out.checked += 1;
            if !close(ga, fd, REL_TOL, floor) {
                out.failures.push(format!("{name} comp {ci} axis {axis}: analytic {ga:e} vs fd {fd:e}"));
            }
        }
    }
    out
}

pub fn check_wirelength(g: &GradInstance) -> GradCheck {
    let (d, lib) = (&g.inst.design, &g.inst.lib);
    let (_, grad) = hpwl_smooth(d, lib, &g.movable, g.gamma).unwrap();
    let f = |x: &Design| hpwl_smooth(x, lib, &g.movable, g.gamma).unwrap().0;
    check_term("wirelength", d, &g.movable, &grad, false, &f)
}

pub fn check_density(g: &GradInstance) -> GradCheck {
    let (d, lib): (&Design, &Library) = (&g.inst.design, &g.inst.lib);
    let (v, grad) = density_penalty(d, lib, &g.movable, g.bins, g.target).unwrap();
    let f = |x: &Design| density_penalty(x, lib, &g.movable, g.bins, g.target).unwrap().0;
    let mut out = check_term("density", d, &g.movable, &grad, true, &f);
    if v <= 0.0 {
        out.failures.push("instance is not overfilled".into());
    }
    out
}

pub fn check_seed(seed: u64) -> GradCheck {
    let g = instance(seed);
    let mut out = check_wirelength(&g);
    out.merge(check_density(&g));
    out
}
