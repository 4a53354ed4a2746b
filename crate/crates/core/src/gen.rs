//! Seeded synthetic designs.
//!
//! A small 45nm-style technology, a handful of standard cells, memory
//! macros with log-normal areas, and a netlist whose connections are local
//! in a linear cell order with a heavy-tailed reach, which gives a
//! Rent-like hierarchy without an explicit cluster tree.

use crate::design::{Component, Design, Net, NetPin, Port};
use crate::error::{Error, Result};
use crate::geom::{um_to_dbu, Dbu, Rect};
use crate::tech::{CellMaster, Direction, Layer, LayerKind, Library, MasterClass, Pin, PinDirection, Site, Technology, Variant, ViaDef};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

const SITE_W: Dbu = 190;
const ROW_H: Dbu = 1400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Small,
    ArianeLike,
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "small" => Ok(Preset::Small),
            "ariane-like" => Ok(Preset::ArianeLike),
            _ => Err(Error::InvalidParam(format!("unknown preset `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenParams {
    pub name: String,
    pub macros: usize,
    /// Distinct macro masters.
    pub macro_types: usize,
    pub cells: usize,
    pub ports: usize,
    /// Macro share of total component area.
    pub macro_area_fraction: f64,
    /// Data pins per macro side.
    pub macro_pins: usize,
    pub metal_layers: usize,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams::preset(Preset::Small, 1)
    }
}

impl GenParams {
    pub fn preset(p: Preset, seed: u64) -> Self {
        match p {
            Preset::Small => GenParams {
                name: "small".into(),
                macros: 8,
                macro_types: 3,
                cells: 2000,
                ports: 64,
                macro_area_fraction: 0.35,
                macro_pins: 16,
                metal_layers: 6,
                seed,
            },
            Preset::ArianeLike => GenParams {
                name: "ariane_like".into(),
                macros: 132,
                macro_types: 4,
                cells: 168_000,
                ports: 495,
                macro_area_fraction: 0.45,
                macro_pins: 32,
                metal_layers: 10,
                seed,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.macro_area_fraction) {
            return Err(Error::InvalidParam("macro_area_fraction must lie in [0, 1)".into()));
        }
        if self.metal_layers < 4 {
            return Err(Error::InvalidParam("need at least four metal layers".into()));
        }
        if self.macros > 0 && (self.macro_types == 0 || self.macro_pins == 0) {
            return Err(Error::InvalidParam("macros need at least one type and one pin".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub tech: Technology,
    pub masters: Vec<CellMaster>,
    pub design: Design,
}

impl Generated {
    pub fn library(&self) -> Library {
        Library::new(Some(self.tech.clone()), self.masters.iter().cloned())
    }
}

/// Nangate-like stack: `metal1, via1, ..., metalN` with alternating
/// directions, metal1 horizontal.
pub fn technology(metal_layers: usize) -> Technology {
    let mut layers = Vec::new();
    let mut vias = Vec::new();
    for k in 1..=metal_layers {
        let pitch = if k <= 3 { 190 } else if k <= 6 { 280 } else { 800 };
        let dir = if k % 2 == 1 { Direction::Horizontal } else { Direction::Vertical };
        layers.push(Layer {
            name: format!("metal{k}"),
            kind: LayerKind::Routing,
            direction: Some(dir),
            pitch,
            width: pitch * 7 / 19,
            die_side: crate::tech::DieSide::Bottom,
        });
        if k < metal_layers {
            layers.push(Layer {
                name: format!("via{k}"),
                kind: LayerKind::Cut,
                direction: None,
                pitch,
                width: pitch * 7 / 19,
                die_side: crate::tech::DieSide::Bottom,
            });
            let c = Rect::new(-35, -35, 35, 35);
            vias.push(ViaDef {
                name: format!("via{k}_1"),
                shapes: vec![
                    (format!("metal{k}"), Rect::new(-65, -35, 65, 35)),
                    (format!("via{k}"), c),
                    (format!("metal{}", k + 1), Rect::new(-35, -65, 35, 65)),
                ],
            });
        }
    }
    Technology {
        distance_units_per_micron: 1000,
        layers,
        vias,
        sites: vec![Site { name: "core".into(), width: SITE_W, height: ROW_H }],
    }
}

/// (name, width in sites, input count)
const CELLS: &[(&str, Dbu, usize)] = &[
    ("INV_X1", 2, 1),
    ("BUF_X1", 3, 1),
    ("NAND2_X1", 3, 2),
    ("NOR2_X1", 3, 2),
    ("AOI21_X1", 4, 3),
    ("OAI22_X1", 5, 4),
    ("DFF_X1", 17, 2),
];

/// Relative frequency of each entry of `CELLS`.
const CELL_WEIGHTS: &[u32] = &[20, 10, 25, 15, 10, 8, 12];

fn input_name(k: usize) -> String {
    format!("A{}", k + 1)
}

pub fn standard_cells() -> Vec<CellMaster> {
    CELLS
        .iter()
        .map(|&(name, sites, inputs)| {
            let w = sites * SITE_W;
            let mut pins = Vec::new();
            for k in 0..inputs {
                let x = (k as Dbu) * SITE_W + 60;
                pins.push(Pin {
                    name: input_name(k),
                    direction: PinDirection::Input,
                    rects: vec![("metal1".into(), Rect::new(x, 500, x + 70, 900))],
                });
            }
            pins.push(Pin {
                name: "ZN".into(),
                direction: PinDirection::Output,
                rects: vec![("metal1".into(), Rect::new(w - 130, 300, w - 60, 1100))],
            });
            CellMaster {
                name: name.into(),
                class: MasterClass::Core,
                width: w,
                height: ROW_H,
                pins,
                obstructions: vec![],
                variant: Variant::Base,
            }
        })
        .collect()
}

/// Memory macro with `pins` inputs on the left edge, `pins` outputs on the
/// right edge and a clock at the bottom, on metal4.
pub fn macro_master(name: &str, width: Dbu, height: Dbu, pins: usize) -> CellMaster {
    let layer = "metal4".to_string();
    let mut out = Vec::new();
    let step = height / (pins as Dbu + 1);
    for k in 0..pins {
        let y = step * (k as Dbu + 1);
        out.push(Pin {
            name: format!("din{k}"),
            direction: PinDirection::Input,
            rects: vec![(layer.clone(), Rect::new(0, y - 35, 140, y + 35))],
        });
        out.push(Pin {
            name: format!("dout{k}"),
            direction: PinDirection::Output,
            rects: vec![(layer.clone(), Rect::new(width - 140, y - 35, width, y + 35))],
        });
    }
    out.push(Pin {
        name: "clk".into(),
        direction: PinDirection::Input,
        rects: vec![(layer.clone(), Rect::new(width / 2 - 35, 0, width / 2 + 35, 140))],
    });
    CellMaster {
        name: name.into(),
        class: MasterClass::Block,
        width,
        height,
        pins: out,
        obstructions: ["metal1", "metal2", "metal3", "metal4"].iter().map(|l| (l.to_string(), Rect::new(0, 0, width, height))).collect(),
        variant: Variant::Base,
    }
}

/// Heavy-tailed offset in `[1, n)`: `n^u` for uniform `u`.
fn reach(rng: &mut ChaCha8Rng, n: usize) -> usize {
    if n <= 1 {
        return 0;
    }
    let u: f64 = rng.gen();
    ((n as f64).powf(u * 0.6) as usize).clamp(1, n - 1)
}

fn near(rng: &mut ChaCha8Rng, at: usize, n: usize) -> usize {
    let d = reach(rng, n);
    if rng.gen_bool(0.5) {
        (at + d) % n
    } else {
        (at + n - d % n) % n
    }
}

/// Builds an unplaced design with die outline unset.
pub fn generate(params: &GenParams) -> Result<Generated> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let tech = technology(params.metal_layers);
    let cells = standard_cells();
    let mut masters = cells.clone();

    let mut comps = Vec::new();
    let mut cell_kind = Vec::with_capacity(params.cells);
    let total_w: u32 = CELL_WEIGHTS.iter().sum();
    let mut cell_area = 0.0;
    for i in 0..params.cells {
        let mut t = rng.gen_range(0..total_w);
        let mut k = 0;
        while t >= CELL_WEIGHTS[k] {
            t -= CELL_WEIGHTS[k];
            k += 1;
        }
        cell_kind.push(k);
        cell_area += (CELLS[k].1 * SITE_W) as f64 * ROW_H as f64 / 1e6;
        comps.push(Component::new(format!("u{i}"), CELLS[k].0));
    }

    let mut macro_names = Vec::new();
    if params.macros > 0 {
        let f = params.macro_area_fraction;
        let target = if cell_area > 0.0 { cell_area * f / (1.0 - f) } else { 2500.0 * params.macros as f64 };
        let types = params.macro_types.min(params.macros);
        let ln = LogNormal::new(0.0, 0.5).map_err(|e| Error::InvalidParam(e.to_string()))?;
        let shapes: Vec<(f64, f64)> = (0..types).map(|_| (ln.sample(&mut rng), rng.gen_range(0.5..2.0))).collect();
        let inst: Vec<usize> = (0..params.macros).map(|i| if i < types { i } else { rng.gen_range(0..types) }).collect();
        let raw: f64 = inst.iter().map(|&t| shapes[t].0).sum();
        let unit = target / raw;
        let mut dims = Vec::new();
        for (t, &(a, aspect)) in shapes.iter().enumerate() {
            let area = a * unit;
            let w_um = (area * aspect).sqrt();
            let h_um = area / w_um;
            let w = ((um_to_dbu(w_um) + SITE_W - 1) / SITE_W).max(8) * SITE_W;
            let h = ((um_to_dbu(h_um) + ROW_H - 1) / ROW_H).max(4) * ROW_H;
            let name = format!("fakeram_{t}_{}x{}", w / SITE_W, h / ROW_H);
            masters.push(macro_master(&name, w, h, params.macro_pins));
            dims.push(name);
        }
        for (i, &t) in inst.iter().enumerate() {
            macro_names.push(comps.len());
            comps.push(Component::new(format!("ram{i}"), dims[t].clone()));
        }
    }

    // Each cell drives one net through ZN; inputs are claimed at most once.
    let n = params.cells;
    let mut free_inputs: Vec<Vec<usize>> = cell_kind.iter().map(|&k| (0..CELLS[k].2).rev().collect()).collect();
    let mut nets: Vec<Net> = Vec::new();
    let mut driven: Vec<usize> = Vec::with_capacity(n);
    let port_anchor = |p: usize| if n > 0 { p * n / params.ports.max(1) } else { 0 };
    // Falls back to the nearest free input when random reach keeps missing.
    let claim = |rng: &mut ChaCha8Rng, free: &mut Vec<Vec<usize>>, at: usize, net: &mut Net| {
        for _ in 0..8 {
            let c = near(rng, at, n);
            if let Some(k) = free[c].pop() {
                net.pins.push(NetPin::Comp(c, input_name(k)));
                return;
            }
        }
        for d in 1..n {
            for c in [at.checked_sub(d), Some(at + d).filter(|&c| c < n)].into_iter().flatten() {
                if let Some(k) = free[c].pop() {
                    net.pins.push(NetPin::Comp(c, input_name(k)));
                    return;
                }
            }
        }
    };

    // Input ports claim their sinks before the cells do.
    let mut ports = Vec::new();
    for p in 0..params.ports {
        let input = p % 2 == 0;
        ports.push(Port {
            name: format!("io{p}"),
            direction: if input { PinDirection::Input } else { PinDirection::Output },
            position: None,
            layer: Some(format!("metal{}", params.metal_layers.min(4))),
            die: crate::design::Die::Bottom,
        });
        if input && n > 0 {
            let mut net = Net { name: format!("io{p}"), pins: vec![NetPin::Port(p)] };
            claim(&mut rng, &mut free_inputs, port_anchor(p), &mut net);
            nets.push(net);
        }
    }
    for i in 0..n {
        let mut net = Net { name: format!("n{i}"), pins: vec![NetPin::Comp(i, "ZN".into())] };
        let fanout = match rng.gen_range(0..10) {
            0..=5 => 1,
            6..=7 => 2,
            8 => 3,
            _ => rng.gen_range(4..=7),
        };
        for _ in 0..fanout {
            claim(&mut rng, &mut free_inputs, i, &mut net);
        }
        driven.push(nets.len());
        nets.push(net);
    }

    for (mi, &ci) in macro_names.iter().enumerate() {
        let anchor = if n > 0 { rng.gen_range(0..n) } else { 0 };
        let pins = params.macro_pins;
        for k in 0..pins {
            if n > 0 {
                let src = near(&mut rng, anchor, n);
                nets[driven[src]].pins.push(NetPin::Comp(ci, format!("din{k}")));
            }
            let mut net = Net { name: format!("ram{mi}_q{k}"), pins: vec![NetPin::Comp(ci, format!("dout{k}"))] };
            if n > 0 {
                for _ in 0..rng.gen_range(1..=2) {
                    claim(&mut rng, &mut free_inputs, anchor, &mut net);
                }
            }
            nets.push(net);
        }
    }
    if !macro_names.is_empty() {
        let mut clk = Net { name: "clk".into(), pins: Vec::new() };
        for &ci in &macro_names {
            clk.pins.push(NetPin::Comp(ci, "clk".into()));
        }
        nets.push(clk);
    }

    for p in (1..params.ports).step_by(2) {
        if n > 0 {
            nets[driven[near(&mut rng, port_anchor(p), n)]].pins.push(NetPin::Port(p));
        }
    }
    nets.retain(|net| net.pins.len() >= 2);

    let design = Design { name: params.name.clone(), die: Rect::default(), stacked: false, components: comps, ports, nets };
    Ok(Generated { tech, masters, design })
}
