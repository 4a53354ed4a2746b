//! 3D technology synthesis from a 2D stack.
//!
//! The metal stack is duplicated and flipped above the top metal so the two
//! dies face each other across a bond cut layer:
//!
//! ```text
//!   metal_2n   (copy of metal_1)     top die
//!   ...
//!   metal_n+1  (copy of metal_n)
//!   hbt        bond layer
//!   metal_n                           bottom die
//!   ...
//!   metal_1
//! ```
//!
//! The resulting stack is a palindrome, so the mirror of the layer at stack
//! position `p` is the layer at `len - 1 - p`.

use crate::error::{Error, Result};
use crate::geom::{um_to_dbu, Rect};
use crate::lef::BOND_LAYER_NAME;
use crate::tech::{CellMaster, DieSide, Layer, LayerKind, Technology, Variant, ViaDef};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Bond terminal and shrunk-master geometry, in microns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Pdk3dConfig {
    pub hbt_size: f64,
    pub hbt_pitch: f64,
    pub shrunk_height: f64,
    pub shrunk_width: f64,
}

impl Default for Pdk3dConfig {
    fn default() -> Self {
        Pdk3dConfig { hbt_size: 0.5, hbt_pitch: 1.5, shrunk_height: 1.4, shrunk_width: 0.19 }
    }
}

impl Pdk3dConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [self.hbt_size, self.hbt_pitch, self.shrunk_height, self.shrunk_width];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidParam("pdk3d sizes must be positive".into()));
        }
        if self.hbt_pitch < self.hbt_size {
            return Err(Error::InvalidParam("hbt_pitch must be at least hbt_size".into()));
        }
        Ok(())
    }
}

fn split_index(name: &str) -> Option<(&str, usize)> {
    let digits = name.bytes().rev().take_while(|b| b.is_ascii_digit()).count();
    if digits == 0 || digits == name.len() {
        return None;
    }
    let (prefix, idx) = name.split_at(name.len() - digits);
    Some((prefix, idx.parse().ok()?))
}

/// Builds the mirrored 3D stack from a 2D technology whose layers run
/// `metal1, via1, metal2, ..., metalN` (any `<prefix><index>` naming).
pub fn mirror_metal_stack(tech2d: &Technology, config: &Pdk3dConfig) -> Result<Technology> {
    config.validate()?;
    if let Some(b) = tech2d.bond_layer() {
        return Err(Error::AlreadyMirrored(b.name.clone()));
    }
    if let Some(l) = tech2d.layers.iter().find(|l| l.name.eq_ignore_ascii_case(BOND_LAYER_NAME)) {
        return Err(Error::AlreadyMirrored(l.name.clone()));
    }
    tech2d.validate()?;
    let layers = &tech2d.layers;
    let n = layers.iter().filter(|l| l.kind == LayerKind::Routing).count();
    if n == 0 || layers.len() != 2 * n - 1 || layers[0].kind != LayerKind::Routing {
        return Err(Error::InvalidTechnology("stack must start and end with a routing layer".into()));
    }
    let (metal_prefix, _) =
        split_index(&layers[0].name).ok_or_else(|| Error::InvalidTechnology(format!("cannot index layer `{}`", layers[0].name)))?;
    let cut_prefix = match layers.get(1) {
        Some(l) => split_index(&l.name).ok_or_else(|| Error::InvalidTechnology(format!("cannot index layer `{}`", l.name)))?.0,
        None => "via",
    };
    for (p, l) in layers.iter().enumerate() {
        let (prefix, want) = if p % 2 == 0 { (metal_prefix, p / 2 + 1) } else { (cut_prefix, p / 2 + 1) };
        if split_index(&l.name) != Some((prefix, want)) {
            return Err(Error::InvalidTechnology(format!("layer `{}` is not `{prefix}{want}`", l.name)));
        }
    }

    let mut out: Vec<Layer> = layers.iter().map(|l| Layer { die_side: DieSide::Bottom, ..l.clone() }).collect();
    let hbt_size = um_to_dbu(config.hbt_size);
    out.push(Layer {
        name: BOND_LAYER_NAME.to_string(),
        kind: LayerKind::Cut,
        direction: None,
        pitch: um_to_dbu(config.hbt_pitch),
        width: hbt_size,
        die_side: DieSide::Bond,
    });
    // Position p of the top half copies source position len-1-p of the
    // bottom half; names continue the index sequence upward.
    for (offset, src) in layers.iter().rev().enumerate() {
        let p = offset;
        let name = if p % 2 == 0 { format!("{metal_prefix}{}", n + p / 2 + 1) } else { format!("{cut_prefix}{}", n + p / 2 + 1) };
        out.push(Layer { name, die_side: DieSide::Top, ..src.clone() });
    }

    let mut tech3d = Technology { distance_units_per_micron: tech2d.distance_units_per_micron, layers: out, vias: Vec::new(), sites: tech2d.sites.clone() };
    let mirror = LayerMirror::new(&tech3d);
    let mut vias = tech2d.vias.clone();
    for v in &tech2d.vias {
        let shapes = v
            .shapes
            .iter()
            .map(|(l, r)| mirror.map(l).map(|m| (m.to_string(), *r)).ok_or_else(|| Error::NoMirrorLayer(l.clone())))
            .collect::<Result<Vec<_>>>()?;
        vias.push(ViaDef { name: format!("{}_top", v.name), shapes });
    }
    let half = hbt_size / 2;
    let cut = Rect::new(-half, -half, hbt_size - half, hbt_size - half);
    vias.push(ViaDef {
        name: "HBT".to_string(),
        shapes: vec![
            (layers[2 * n - 2].name.clone(), cut),
            (BOND_LAYER_NAME.to_string(), cut),
            (format!("{metal_prefix}{}", n + 1), cut),
        ],
    });
    tech3d.vias = vias;
    Ok(tech3d)
}

/// Layer-name involution of a mirrored stack.
#[derive(Debug, Clone)]
pub struct LayerMirror {
    map: HashMap<String, String>,
}

impl LayerMirror {
    pub fn new(tech3d: &Technology) -> Self {
        let l = &tech3d.layers;
        let map = l.iter().enumerate().map(|(p, layer)| (layer.name.clone(), l[l.len() - 1 - p].name.clone())).collect();
        LayerMirror { map }
    }

    pub fn map(&self, layer: &str) -> Option<&str> {
        self.map.get(layer).map(String::as_str)
    }
}

fn remap(shapes: &[(String, Rect)], mirror: &LayerMirror) -> Result<Vec<(String, Rect)>> {
    shapes
        .iter()
        .map(|(l, r)| mirror.map(l).map(|m| (m.to_string(), *r)).ok_or_else(|| Error::NoMirrorLayer(l.clone())))
        .collect()
}

/// Splits each base master into bottom, top and the two shrunk variants.
/// Output is sorted by name.
pub fn split_library(masters: &[CellMaster], tech3d: &Technology, config: &Pdk3dConfig) -> Result<Vec<CellMaster>> {
    config.validate()?;
    if !tech3d.is_3d() {
        return Err(Error::InvalidTechnology("split_library needs a mirrored 3D technology".into()));
    }
    let mirror = LayerMirror::new(tech3d);
    let sw = um_to_dbu(config.shrunk_width);
    let sh = um_to_dbu(config.shrunk_height);
    let mut out = Vec::with_capacity(masters.len() * 4);
    for m in masters {
        if m.variant != Variant::Base {
            return Err(Error::InvalidParam(format!("master `{}` is already a die variant", m.name)));
        }
        let bottom = CellMaster { name: format!("{}{}", m.name, Variant::Bottom.suffix()), variant: Variant::Bottom, ..m.clone() };
        let mut top = CellMaster { name: format!("{}{}", m.name, Variant::Top.suffix()), variant: Variant::Top, ..m.clone() };
        for p in &mut top.pins {
            p.rects = remap(&p.rects, &mirror)?;
        }
        top.obstructions = remap(&m.obstructions, &mirror)?;
        let shrink = |full: &CellMaster, v: Variant| CellMaster {
            name: format!("{}{}", m.name, v.suffix()),
            class: full.class,
            width: sw,
            height: sh,
            pins: full.pins.clone(),
            obstructions: Vec::new(),
            variant: v,
        };
        out.push(shrink(&bottom, Variant::ShrunkBottom));
        out.push(shrink(&top, Variant::ShrunkTop));
        out.push(bottom);
        out.push(top);
    }
    out.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(out)
}
