//! Exhaustive and per-net oracles for the tier partition.

use super::random_instance;
use open3d_flow::design::{Design, Die, NetPin};
use open3d_flow::partition::PartitionParams;
use open3d_flow::tech::Library;

pub fn macros_of(d: &Design, lib: &Library) -> Vec<usize> {
    (0..d.components.len()).filter(|&i| d.is_macro(lib, i)).collect()
}

/// Die of every component: macros per `bits` in design order, everything
/// else on `cells`.
fn dies(d: &Design, lib: &Library, bits: &[bool], cells: Die) -> Vec<Die> {
    let mut k = 0;
    (0..d.components.len())
        .map(|i| {
            if d.is_macro(lib, i) {
                k += 1;
                if bits[k - 1] {
                    Die::Top
                } else {
                    Die::Bottom
                }
            } else {
                cells
            }
        })
        .collect()
}

/// Nets whose pins span both dies, re-scanned pin by pin.
pub fn cut(d: &Design, lib: &Library, bits: &[bool], cells: Die, ports: Option<Die>) -> usize {
    let die = dies(d, lib, bits, cells);
    d.nets
        .iter()
        .filter(|n| {
            let on: Vec<Die> = n
                .pins
                .iter()
                .map(|p| match p {
                    NetPin::Comp(ci, _) => die[*ci],
                    NetPin::Port(pi) => ports.unwrap_or(d.ports[*pi].die),
                })
                .collect();
            on.contains(&Die::Top) && on.contains(&Die::Bottom)
        })
        .count()
}

pub fn fitness(d: &Design, lib: &Library, bits: &[bool], p: &PartitionParams) -> f64 {
    let die = dies(d, lib, bits, Die::Bottom);
    let (mut top, mut bottom) = (0.0, 0.0);
    for (i, &side) in die.iter().enumerate() {
        let a = d.master(lib, i).unwrap().area_um2();
        match side {
            Die::Top => top += a,
            Die::Bottom => bottom += a,
        }
    }
    let area = d.die.area_um2();
    let nets = d.nets.len().max(1) as f64;
    p.w_cut * cut(d, lib, bits, Die::Bottom, None) as f64 / nets + p.w_util * ((top - bottom) / area).abs()
}

pub fn bits_of(mask: u32, n: usize) -> Vec<bool> {
    (0..n).map(|k| mask >> k & 1 == 1).collect()
}

/// Minimum fitness over all `2^n` assignments.
pub fn exhaustive(d: &Design, lib: &Library, p: &PartitionParams) -> f64 {
    let n = macros_of(d, lib).len();
    (0..1u32 << n).map(|m| fitness(d, lib, &bits_of(m, n), p)).fold(f64::INFINITY, f64::min)
}

/// Random unplaced design with `macros` macros, ports on the bottom die
/// and a die sized near 50% two-die utilization.
pub fn instance(seed: u64, macros: usize) -> (Design, Library) {
    let mut i = random_instance(seed, 60, macros, 90, 6, 60);
    let area: f64 = (0..i.design.components.len()).map(|c| i.design.master(&i.lib, c).unwrap().area_um2()).sum();
    let side = ((area * 1e6).sqrt().ceil() as i64).max(1000);
    i.design.die = open3d_flow::geom::Rect::new(0, 0, side, side);
    (i.design, i.lib)
}

/// Floorplanned generator design with 8 to 15 macros of 1 to 4 types.
pub fn generated_instance(seed: u64) -> (Design, Library) {
    use rand::Rng;
    let mut r = super::rng(seed + 77);
    let macros = r.gen_range(8..=15);
    let params = open3d_flow::gen::GenParams {
        name: format!("r{seed}"),
        macros,
        macro_types: r.gen_range(1..=4),
        cells: r.gen_range(100..400),
        ports: 16,
        seed,
        ..Default::default()
    };
    super::stack::floorplanned(&params, true)
}

/// Number of distinct fitness values strictly below `f`.
pub fn rank(d: &Design, lib: &Library, p: &PartitionParams, f: f64) -> usize {
    let n = macros_of(d, lib).len();
    let mut below: Vec<f64> = (0..1u32 << n).map(|m| fitness(d, lib, &bits_of(m, n), p)).filter(|&v| v < f - 1e-12).collect();
    below.sort_by(f64::total_cmp);
    below.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    below.len()
}
