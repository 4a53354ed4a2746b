//! Technology and cell library model.

use crate::error::{Error, Result};
use crate::geom::{Dbu, Rect};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LayerKind {
    Routing,
    Cut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Horizontal,
    Vertical,
}

/// Which die of a face-to-face stack a layer belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DieSide {
    Bottom,
    Top,
    Bond,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layer {
    pub name: String,
    pub kind: LayerKind,
    /// `None` for cut layers.
    pub direction: Option<Direction>,
    pub pitch: Dbu,
    pub width: Dbu,
    pub die_side: DieSide,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViaDef {
    pub name: String,
    pub shapes: Vec<(String, Rect)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Site {
    pub name: String,
    pub width: Dbu,
    pub height: Dbu,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Technology {
    pub distance_units_per_micron: i64,
    /// Stack order, bottom first.
    pub layers: Vec<Layer>,
    pub vias: Vec<ViaDef>,
    pub sites: Vec<Site>,
}

impl Default for Technology {
    fn default() -> Self {
        Technology { distance_units_per_micron: 1000, layers: Vec::new(), vias: Vec::new(), sites: Vec::new() }
    }
}

impl Technology {
    pub fn layer(&self, name: &str) -> Option<&Layer> {
        self.layers.iter().find(|l| l.name == name)
    }

    pub fn routing_layers(&self) -> impl Iterator<Item = &Layer> {
        self.layers.iter().filter(|l| l.kind == LayerKind::Routing)
    }

    pub fn bond_layer(&self) -> Option<&Layer> {
        self.layers.iter().find(|l| l.die_side == DieSide::Bond)
    }

    pub fn is_3d(&self) -> bool {
        self.bond_layer().is_some()
    }

    /// Checks the stack invariants: alternating routing/cut layers, positive
    /// routing geometry and sites, and at most one bond layer which must be a
    /// cut layer.
    pub fn validate(&self) -> Result<()> {
        for pair in self.layers.windows(2) {
            if pair[0].kind == pair[1].kind {
                return Err(Error::InvalidTechnology(format!(
                    "layers `{}` and `{}` do not alternate routing/cut",
                    pair[0].name, pair[1].name
                )));
            }
        }
        for l in &self.layers {
            if l.kind == LayerKind::Routing && (l.pitch <= 0 || l.width <= 0) {
                return Err(Error::InvalidTechnology(format!("routing layer `{}` needs pitch and width > 0", l.name)));
            }
            if l.die_side == DieSide::Bond && l.kind != LayerKind::Cut {
                return Err(Error::InvalidTechnology(format!("bond layer `{}` must be a cut layer", l.name)));
            }
        }
        let bonds = self.layers.iter().filter(|l| l.die_side == DieSide::Bond).count();
        if bonds > 1 {
            return Err(Error::InvalidTechnology(format!("{bonds} bond layers")));
        }
        for s in &self.sites {
            if s.width <= 0 || s.height <= 0 {
                return Err(Error::InvalidTechnology(format!("site `{}` needs positive size", s.name)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MasterClass {
    Core,
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    Base,
    Top,
    Bottom,
    ShrunkTop,
    ShrunkBottom,
}

impl Variant {
    pub fn suffix(self) -> &'static str {
        match self {
            Variant::Base => "",
            Variant::Top => "_top",
            Variant::Bottom => "_bottom",
            Variant::ShrunkTop => "_top_shrunk",
            Variant::ShrunkBottom => "_bottom_shrunk",
        }
    }

    pub fn is_shrunk(self) -> bool {
        matches!(self, Variant::ShrunkTop | Variant::ShrunkBottom)
    }

    /// Splits a master name into its base name and variant.
    pub fn split_name(name: &str) -> (&str, Variant) {
        for v in [Variant::ShrunkTop, Variant::ShrunkBottom, Variant::Top, Variant::Bottom] {
            if let Some(base) = name.strip_suffix(v.suffix()) {
                if !base.is_empty() {
                    return (base, v);
                }
            }
        }
        (name, Variant::Base)
    }

    /// Full-size counterpart of a shrunk variant.
    pub fn unshrunk(self) -> Variant {
        match self {
            Variant::ShrunkTop => Variant::Top,
            Variant::ShrunkBottom => Variant::Bottom,
            v => v,
        }
    }

    pub fn shrunk(self) -> Option<Variant> {
        match self {
            Variant::Top | Variant::ShrunkTop => Some(Variant::ShrunkTop),
            Variant::Bottom | Variant::ShrunkBottom => Some(Variant::ShrunkBottom),
            Variant::Base => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PinDirection {
    Input,
    Output,
    Inout,
}

impl PinDirection {
    pub fn as_str(self) -> &'static str {
        match self {
            PinDirection::Input => "INPUT",
            PinDirection::Output => "OUTPUT",
            PinDirection::Inout => "INOUT",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "INPUT" => Some(PinDirection::Input),
            "OUTPUT" => Some(PinDirection::Output),
            "INOUT" | "FEEDTHRU" => Some(PinDirection::Inout),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pin {
    pub name: String,
    pub direction: PinDirection,
    pub rects: Vec<(String, Rect)>,
}

impl Pin {
    /// Reference point of the pin in the master frame, in half-DBU: the
    /// center of the bounding box of all its shapes.
    pub fn anchor2(&self) -> Option<(Dbu, Dbu)> {
        let mut it = self.rects.iter().map(|(_, r)| *r);
        let first = it.next()?;
        let bb = it.fold(first, |a, r| Rect::new(a.lx.min(r.lx), a.ly.min(r.ly), a.ux.max(r.ux), a.uy.max(r.uy)));
        Some(bb.center2())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellMaster {
    pub name: String,
    pub class: MasterClass,
    pub width: Dbu,
    pub height: Dbu,
    pub pins: Vec<Pin>,
    pub obstructions: Vec<(String, Rect)>,
    pub variant: Variant,
}

impl CellMaster {
    pub fn is_macro(&self) -> bool {
        self.class == MasterClass::Block
    }

    pub fn base_name(&self) -> &str {
        Variant::split_name(&self.name).0
    }

    pub fn area(&self) -> i128 {
        self.width as i128 * self.height as i128
    }

    pub fn area_um2(&self) -> f64 {
        crate::geom::dbu_to_um(self.width) * crate::geom::dbu_to_um(self.height)
    }

    pub fn pin(&self, name: &str) -> Option<&Pin> {
        self.pins.iter().find(|p| p.name == name)
    }
}

/// Technology plus masters, keyed by name.
#[derive(Debug, Clone, Default)]
pub struct Library {
    pub tech: Option<Technology>,
    pub masters: BTreeMap<String, CellMaster>,
}

impl Library {
    pub fn new(tech: Option<Technology>, masters: impl IntoIterator<Item = CellMaster>) -> Self {
        Library { tech, masters: masters.into_iter().map(|m| (m.name.clone(), m)).collect() }
    }

    pub fn master(&self, name: &str) -> Option<&CellMaster> {
        self.masters.get(name)
    }

    pub fn insert(&mut self, m: CellMaster) {
        self.masters.insert(m.name.clone(), m);
    }

    /// Site used for rows: the first declared site, else the default
    /// 0.19 x 1.4 um core site.
    pub fn site(&self) -> (Dbu, Dbu) {
        self.tech
            .as_ref()
            .and_then(|t| t.sites.first())
            .map(|s| (s.width, s.height))
            .unwrap_or((190, 1400))
    }

    /// Name of the master with the same base but a different variant.
    pub fn variant_name(name: &str, variant: Variant) -> String {
        let (base, _) = Variant::split_name(name);
        format!("{base}{}", variant.suffix())
    }

    /// Full-size reference dimensions used to anchor pins: shrunk masters
    /// keep the pin frame of their full variant.
    pub fn pin_frame(&self, master: &CellMaster) -> (Dbu, Dbu) {
        if master.variant.is_shrunk() {
            let full = Library::variant_name(&master.name, master.variant.unshrunk());
            if let Some(f) = self.master(&full) {
                return (f.width, f.height);
            }
        }
        (master.width, master.height)
    }
}
