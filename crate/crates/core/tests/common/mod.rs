//! Shared fixtures for the integration suites.

#![allow(dead_code)]

pub mod gradient;
pub mod io;
pub mod partition;
pub mod skyline;
pub mod stack;
pub mod thermal;

use open3d_flow::design::{Component, Design, Die, Net, NetPin, Port, Status};
use open3d_flow::flow::{FlowConfig, FlowKind};
use open3d_flow::gen::{macro_master, standard_cells, technology, GenParams, Preset};
use open3d_flow::geom::{Dbu, Rect};
use open3d_flow::tech::{CellMaster, Library, PinDirection};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SITE_W: Dbu = 190;
pub const ROW_H: Dbu = 1400;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard cells plus `macros` macro masters with even dimensions.
pub fn library_with_macros(macros: &[(String, Dbu, Dbu)]) -> Library {
    let mut masters: Vec<CellMaster> = standard_cells();
    for (name, w, h) in macros {
        masters.push(macro_master(name, *w, *h, 4));
    }
    Library::new(Some(technology(6)), masters)
}

fn pins_of(lib: &Library, master: &str) -> Vec<String> {
    lib.master(master).expect("known master").pins.iter().map(|p| p.name.clone()).collect()
}

/// Random mixed-size instance with every component placed at an arbitrary
/// (not legal) position inside a square die.
pub struct Instance {
    pub design: Design,
    pub lib: Library,
}

pub fn random_instance(seed: u64, cells: usize, macros: usize, nets: usize, ports: usize, die_um: Dbu) -> Instance {
    let mut r = rng(seed);
    let side = die_um * 1000;
    let shapes: Vec<(String, Dbu, Dbu)> = (0..macros)
        .map(|i| {
            let w = 2 * r.gen_range(2_000..side / 6);
            let h = 2 * r.gen_range(2_000..side / 6);
            (format!("MAC{i}"), w, h)
        })
        .collect();
    let lib = library_with_macros(&shapes);
    let cell_names: Vec<String> = standard_cells().iter().map(|m| m.name.clone()).collect();
    let mut d = Design { name: format!("rand{seed}"), die: Rect::new(0, 0, side, side), ..Default::default() };
    for i in 0..cells {
        let m = &cell_names[r.gen_range(0..cell_names.len())];
        d.components.push(Component::new(format!("c{i}"), m.as_str()));
    }
    for (i, s) in shapes.iter().enumerate() {
        d.components.push(Component::new(format!("m{i}"), s.0.as_str()));
    }
    for ci in 0..d.components.len() {
        let m = lib.master(&d.components[ci].master).unwrap();
        let (w, h) = (m.width, m.height);
        let c = &mut d.components[ci];
        c.x = r.gen_range(0..=side - w);
        c.y = r.gen_range(0..=side - h);
        c.status = Status::Placed;
    }
    for p in 0..ports {
        let t = r.gen_range(0..4 * side);
        let pos = match t / side {
            0 => (t, 0),
            1 => (side, t - side),
            2 => (3 * side - t, side),
            _ => (0, 4 * side - t),
        };
        d.ports.push(Port {
            name: format!("p{p}"),
            direction: if p % 2 == 0 { PinDirection::Input } else { PinDirection::Output },
            position: Some(pos),
            layer: Some("metal3".into()),
            die: Die::Bottom,
        });
    }
    let n = d.components.len();
    for k in 0..nets {
        let deg = r.gen_range(2..=5usize).min(n + ports);
        let mut pins = Vec::new();
        while pins.len() < deg {
            let pin = if ports > 0 && r.gen_bool(0.1) {
                NetPin::Port(r.gen_range(0..ports))
            } else {
                let ci = r.gen_range(0..n);
                let names = pins_of(&lib, &d.components[ci].master);
                NetPin::Comp(ci, names[r.gen_range(0..names.len())].clone())
            };
            if !pins.contains(&pin) {
                pins.push(pin);
            }
        }
        d.nets.push(Net { name: format!("n{k}"), pins });
    }
    d.validate(&lib).expect("fixture is well formed");
    Instance { design: d, lib }
}

/// Config running `kind` on the small memory-heavy preset.
pub fn small_config(kind: FlowKind, seed: u64) -> FlowConfig {
    FlowConfig { generate: Some(GenParams::preset(Preset::Small, seed)), flow: kind, seed, ..FlowConfig::default() }
}

/// Relative agreement with a floor: `|a - b| <= rel * max(|a|, |b|, floor)`.
pub fn close(a: f64, b: f64, rel: f64, floor: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(floor)
}
