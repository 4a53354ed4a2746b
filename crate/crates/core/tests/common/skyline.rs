//! Column-array oracle for skyline packing.

use super::rng;
use open3d_flow::check::{check_legality, CheckOptions};
use open3d_flow::design::{Component, Design, Status};
use open3d_flow::gen::macro_master;
use open3d_flow::tech::Library;
use open3d_flow::geom::{Dbu, Rect};
use open3d_flow::tiling::{order_macros, skyline_place, tile_top_die, MacroShape, Skyline, TilingParams};
use rand::Rng;

pub fn random_set(seed: u64) -> (Vec<MacroShape>, Dbu, Dbu) {
    let mut r = rng(seed);
    let (w, h) = (r.gen_range(40..200), r.gen_range(40..200));
    let n = r.gen_range(1..25);
    let mut v: Vec<MacroShape> = (0..n)
        .map(|i| MacroShape { name: format!("m{i:02}"), width: r.gen_range(1..w / 2), height: r.gen_range(1..h / 3) })
        .collect();
    order_macros(&mut v);
    (v, w, h)
}

fn columns(sky: &Skyline) -> Vec<Dbu> {
    sky.segments.iter().flat_map(|s| std::iter::repeat_n(s.height, (s.x1 - s.x0) as usize)).collect()
}

/// Lowest, then leftmost, feasible x over every integer position.
fn exhaustive(cols: &[Dbu], w: Dbu, h: Dbu, max_h: Dbu) -> Option<(Dbu, Dbu)> {
    let width = cols.len() as Dbu;
    (0..=width - w)
        .map(|x| (x, cols[x as usize..(x + w) as usize].iter().copied().max().unwrap_or(0)))
        .filter(|&(_, y)| y + h <= max_h)
        .min_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)))
}

/// Replays a packing step by step against the oracle. Returns a list of
/// discrepancies (empty when everything agrees).
pub fn check_set(shapes: &[MacroShape], die_w: Dbu, die_h: Dbu) -> Vec<String> {
    let mut errs = Vec::new();
    let mut sky = Skyline::new(die_w);
    let mut cols = vec![0 as Dbu; die_w as usize];
    let mut rects: Vec<Rect> = Vec::new();
    for m in shapes {
        let want = if m.width <= die_w { exhaustive(&cols, m.width, m.height, die_h) } else { None };
        let before = sky.area();
        let waste: i128 = match want {
            Some((x, y)) => cols[x as usize..(x + m.width) as usize].iter().map(|&c| (y - c) as i128).sum(),
            None => 0,
        };
        let got = sky.place(m.width, m.height, die_h);
        if got != want {
            errs.push(format!("{}: got {got:?}, oracle {want:?}", m.name));
            return errs;
        }
        let Some((x, y)) = got else { return errs };
        for c in &mut cols[x as usize..(x + m.width) as usize] {
            *c = y + m.height;
        }
        if sky.area() - before != m.width as i128 * m.height as i128 + waste {
            errs.push(format!("{}: area grew by {}, expected {}", m.name, sky.area() - before, m.width as i128 * m.height as i128 + waste));
        }
        if !sky.is_valid() || columns(&sky) != cols {
            errs.push(format!("{}: skyline does not match the column heights", m.name));
        }
        let r = Rect::from_size(x, y, m.width, m.height);
        if rects.iter().any(|o| o.overlaps(&r)) {
            errs.push(format!("{}: overlaps an earlier macro", m.name));
        }
        if !Rect::new(0, 0, die_w, die_h).contains(&r) {
            errs.push(format!("{}: outside the die", m.name));
        }
        rects.push(r);
    }
    errs
}

/// Smallest halo on the `step` grid up to `max` whose packing reaches
/// `target * die_h`, by trying every halo from zero.
pub fn minimal_halo(shapes: &[MacroShape], die_w: Dbu, die_h: Dbu, step: Dbu, max: Dbu, target: f64) -> Option<Dbu> {
    let mut halo = 0;
    while halo <= max {
        match skyline_place(shapes, die_w, die_h, halo) {
            Ok((_, sky)) if sky.max_height() as f64 >= target * die_h as f64 => return Some(halo),
            Ok(_) => {}
            Err(_) => return None,
        }
        halo += step;
    }
    None
}

/// Stacked design holding only `shapes` as top-die macros.
pub fn top_design(shapes: &[MacroShape], side_um: i64) -> (Design, Library) {
    let masters: Vec<_> = shapes.iter().map(|m| macro_master(&format!("{}_top", m.name), m.width, m.height, 1)).collect();
    let lib = Library::new(None, masters);
    let mut d = Design { die: Rect::new(0, 0, side_um * 1000, side_um * 1000), stacked: true, ..Default::default() };
    for m in shapes {
        d.components.push(Component::new(m.name.clone(), format!("{}_top", m.name)));
    }
    (d, lib)
}

/// Tiles a random top die and compares the chosen halo with an exhaustive
/// sweep. Returns whether the height target was met plus any discrepancy.
pub fn check_halo_sweep(seed: u64) -> (bool, Vec<String>) {
    let params = TilingParams::default();
    let step = (params.halo_step * 1000.0).round() as Dbu;
    let max = (params.halo_max * 1000.0).round() as Dbu;
    let mut r = rng(seed + 500);
    let side = 100;
    let n = r.gen_range(1..8);
    let shapes: Vec<MacroShape> =
        (0..n).map(|i| MacroShape { name: format!("M{i}"), width: r.gen_range(5..40) * 1000, height: r.gen_range(5..40) * 1000 }).collect();
    let (mut d, lib) = top_design(&shapes, side);
    let mut errs = Vec::new();
    let (halo_um, _, ok) = match tile_top_die(&mut d, &lib, &params) {
        Ok(v) => v,
        Err(e) => return (false, vec![e.to_string()]),
    };
    let halo = (halo_um * 1000.0).round() as Dbu;
    let mut ordered = shapes;
    order_macros(&mut ordered);
    match minimal_halo(&ordered, side * 1000, side * 1000, step, max, params.height_target) {
        Some(h) => {
            if !ok || halo != h {
                errs.push(format!("halo {halo} (met {ok}), minimal {h}"));
            }
        }
        None => {
            // target unreachable: the largest feasible halo on the grid
            let next = halo + step;
            if ok || (next <= max && skyline_place(&ordered, side * 1000, side * 1000, next).is_ok()) {
                errs.push(format!("halo {halo} (met {ok}) but the target is unreachable and {next} still fits"));
            }
        }
    }
    if !d.components.iter().all(|c| c.status == Status::Fixed) {
        errs.push("macros left movable".into());
    }
    match check_legality(&d, &lib, CheckOptions { all_placed: true, cells_on_sites: false }) {
        Ok(v) if v.is_empty() => {}
        Ok(v) => errs.push(format!("{} violations", v.len())),
        Err(e) => errs.push(e.to_string()),
    }
    (ok, errs)
}
