//! Deterministic SVG rendering of layouts and thermal maps.

use crate::design::{Design, Die};
use crate::error::Result;
use crate::metrics::bin_usage_where;
use crate::tech::Library;
use crate::thermal::ThermalResult;
use std::fmt::Write;

const PANEL: f64 = 400.0;
const MARGIN: f64 = 20.0;
const DENSITY_GRID: usize = 32;

fn header(out: &mut String, w: f64, h: f64) {
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#);
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
}

/// One panel per die, side by side: standard cells as a grey density map,
/// macros as outlined rectangles, ports as dots.
pub fn render_layout(design: &Design, lib: &Library) -> Result<String> {
    let dies: &[Die] = if design.stacked { &[Die::Bottom, Die::Top] } else { &[Die::Bottom] };
    let r = design.die;
    let (dw, dh) = (r.width().max(1) as f64, r.height().max(1) as f64);
    let s = PANEL / dw.max(dh);
    let (pw, ph) = (dw * s, dh * s);
    let width = MARGIN + dies.len() as f64 * (pw + MARGIN);
    let height = ph + 2.0 * MARGIN + 16.0;
    let mut out = String::new();
    header(&mut out, width, height);
    for (k, &die) in dies.iter().enumerate() {
        let ox = MARGIN + k as f64 * (pw + MARGIN);
        let oy = MARGIN + 16.0;
        // y grows downward in SVG
        let tx = |x: i64| ox + (x - r.lx) as f64 * s;
        let ty = |y: i64| oy + ph - (y - r.ly) as f64 * s;
        let label = if design.stacked { die.as_str() } else { "2D" };
        let _ = writeln!(out, r#"<text x="{ox:.2}" y="{:.2}" font-family="monospace" font-size="12">{label}</text>"#, MARGIN + 10.0);
        let _ = writeln!(out, r##"<rect x="{ox:.2}" y="{oy:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="#000" stroke-width="1"/>"##);

        let is_cell = |ci: usize| !design.is_macro(lib, ci);
        if (0..design.components.len()).any(is_cell) {
            let n = DENSITY_GRID;
            let usage = bin_usage_where(design, lib, die, n, is_cell)?;
            let cap = r.area_um2() / (n * n) as f64;
            for j in 0..n {
                for i in 0..n {
                    let u = (usage[j * n + i] / cap).min(1.0);
                    if u <= 0.0 {
                        continue;
                    }
                    let _ = writeln!(
                        out,
                        r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#4a4a4a" fill-opacity="{u:.3}"/>"##,
                        ox + i as f64 * pw / n as f64,
                        oy + ph - (j + 1) as f64 * ph / n as f64,
                        pw / n as f64,
                        ph / n as f64
                    );
                }
            }
        }
        for ci in 0..design.components.len() {
            let c = &design.components[ci];
            if (design.stacked && c.die != die) || !c.status.is_placed() || !design.is_macro(lib, ci) {
                continue;
            }
            let m = design.rect(lib, ci)?;
            let _ = writeln!(
                out,
                r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#9ecae1" fill-opacity="0.6" stroke="#08519c" stroke-width="1"><title>{}</title></rect>"##,
                tx(m.lx),
                ty(m.uy),
                m.width() as f64 * s,
                m.height() as f64 * s,
                c.name
            );
        }
        for p in &design.ports {
            if design.stacked && p.die != die {
                continue;
            }
            if let Some((x, y)) = p.position {
                let _ = writeln!(out, r##"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="#d62728"/>"##, tx(x), ty(y));
            }
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Blue-to-red ramp for `t` in `[0, 1]`.
fn ramp(t: f64) -> (u8, u8, u8) {
    let t = t.clamp(0.0, 1.0);
    let stops = [(49.0, 54.0, 149.0), (116.0, 173.0, 209.0), (254.0, 224.0, 144.0), (244.0, 109.0, 67.0), (165.0, 0.0, 38.0)];
    let x = t * (stops.len() - 1) as f64;
    let i = (x.floor() as usize).min(stops.len() - 2);
    let f = x - i as f64;
    let mix = |a: f64, b: f64| (a + (b - a) * f).round() as u8;
    (mix(stops[i].0, stops[i + 1].0), mix(stops[i].1, stops[i + 1].1), mix(stops[i].2, stops[i + 1].2))
}

/// One color-mapped grid per plane with a shared legend.
pub fn render_thermal(result: &ThermalResult) -> String {
    let n = result.grid_n.max(1);
    let planes = result.planes.len().max(1);
    let cell = (PANEL / n as f64).floor().max(4.0);
    let pw = cell * n as f64;
    let legend_w = 60.0;
    let width = MARGIN + planes as f64 * (pw + MARGIN) + legend_w;
    let height = pw + 2.0 * MARGIN + 16.0;
    let all = result.planes.iter().flatten();
    let lo = all.clone().fold(f64::INFINITY, |m, &t| m.min(t));
    let hi = all.fold(f64::NEG_INFINITY, |m, &t| m.max(t));
    let span = hi - lo;
    let norm = |t: f64| if span > 0.0 { (t - lo) / span } else { 0.0 };
    let mut out = String::new();
    header(&mut out, width, height);
    let names: Vec<&str> = if result.planes.len() == 2 { vec!["BOTTOM", "TOP"] } else { vec!["DIE"] };
    for (k, plane) in result.planes.iter().enumerate() {
        let ox = MARGIN + k as f64 * (pw + MARGIN);
        let oy = MARGIN + 16.0;
        let _ = writeln!(out, r#"<text x="{ox:.2}" y="{:.2}" font-family="monospace" font-size="12">{}</text>"#, MARGIN + 10.0, names.get(k).unwrap_or(&""));
        for j in 0..n {
            for i in 0..n {
                let t = plane[j * n + i];
                let (r, g, b) = ramp(norm(t));
                let _ = writeln!(
                    out,
                    r#"<rect x="{:.2}" y="{:.2}" width="{cell:.2}" height="{cell:.2}" fill="rgb({r},{g},{b})"><title>{t:.3}</title></rect>"#,
                    ox + i as f64 * cell,
                    oy + (n - 1 - j) as f64 * cell
                );
            }
        }
    }
    let lx = MARGIN + planes as f64 * (pw + MARGIN);
    let oy = MARGIN + 16.0;
    let steps = 10;
    for s in 0..steps {
        let (r, g, b) = ramp(1.0 - s as f64 / (steps - 1) as f64);
        let _ = writeln!(
            out,
            r#"<rect x="{lx:.2}" y="{:.2}" width="12" height="{:.2}" fill="rgb({r},{g},{b})"/>"#,
            oy + s as f64 * pw / steps as f64,
            pw / steps as f64
        );
    }
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" font-family="monospace" font-size="10">{hi:.2}</text>"#, lx + 16.0, oy + 10.0);
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" font-family="monospace" font-size="10">{lo:.2}</text>"#, lx + 16.0, oy + pw);
    out.push_str("</svg>\n");
    out
}
