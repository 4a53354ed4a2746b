//! Netlist, die outlines and placement state.

use crate::error::{Error, Result};
use crate::geom::{Dbu, Rect};
use crate::tech::{CellMaster, Library, PinDirection, Variant};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Die {
    Bottom,
    Top,
}

impl Die {
    pub fn other(self) -> Die {
        match self {
            Die::Bottom => Die::Top,
            Die::Top => Die::Bottom,
        }
    }

    /// Die implied by a master name suffix; unsuffixed masters sit on the
    /// bottom die.
    pub fn from_master_name(name: &str) -> Die {
        match Variant::split_name(name).1 {
            Variant::Top | Variant::ShrunkTop => Die::Top,
            _ => Die::Bottom,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Die::Bottom => "BOTTOM",
            Die::Top => "TOP",
        }
    }
}

/// Supported DEF orientations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Orient {
    #[default]
    N,
    S,
    FN,
    FS,
}

impl Orient {
    pub fn as_str(self) -> &'static str {
        match self {
            Orient::N => "N",
            Orient::S => "S",
            Orient::FN => "FN",
            Orient::FS => "FS",
        }
    }

    pub fn parse(s: &str) -> Option<Orient> {
        match s {
            "N" => Some(Orient::N),
            "S" => Some(Orient::S),
            "FN" => Some(Orient::FN),
            "FS" => Some(Orient::FS),
            _ => None,
        }
    }

    /// Maps a point given in half-DBU inside a `w x h` frame.
    pub fn apply2(self, (px, py): (Dbu, Dbu), w: Dbu, h: Dbu) -> (Dbu, Dbu) {
        match self {
            Orient::N => (px, py),
            Orient::S => (2 * w - px, 2 * h - py),
            Orient::FN => (2 * w - px, py),
            Orient::FS => (px, 2 * h - py),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Status {
    #[default]
    Unplaced,
    Placed,
    Fixed,
}

impl Status {
    pub fn is_placed(self) -> bool {
        self != Status::Unplaced
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub name: String,
    pub master: String,
    /// Lower-left corner of the placed outline.
    pub x: Dbu,
    pub y: Dbu,
    pub orient: Orient,
    pub status: Status,
    pub die: Die,
}

impl Component {
    pub fn new(name: impl Into<String>, master: impl Into<String>) -> Self {
        let master = master.into();
        let die = Die::from_master_name(&master);
        Component { name: name.into(), master, x: 0, y: 0, orient: Orient::N, status: Status::Unplaced, die }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Port {
    pub name: String,
    pub direction: PinDirection,
    /// `None` while unplaced.
    pub position: Option<(Dbu, Dbu)>,
    pub layer: Option<String>,
    pub die: Die,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NetPin {
    /// Component index and pin name.
    Comp(usize, String),
    /// Port index.
    Port(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Net {
    pub name: String,
    pub pins: Vec<NetPin>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Design {
    pub name: String,
    /// Bottom die outline; the top die, when present, is identical.
    pub die: Rect,
    /// Two-die stack when true.
    pub stacked: bool,
    pub components: Vec<Component>,
    pub ports: Vec<Port>,
    pub nets: Vec<Net>,
}

impl Design {
    pub fn die_bottom(&self) -> Rect {
        self.die
    }

    pub fn die_top(&self) -> Option<Rect> {
        self.stacked.then_some(self.die)
    }

    pub fn component_index(&self) -> HashMap<&str, usize> {
        self.components.iter().enumerate().map(|(i, c)| (c.name.as_str(), i)).collect()
    }

    pub fn master<'l>(&self, lib: &'l Library, comp: usize) -> Result<&'l CellMaster> {
        let c = &self.components[comp];
        lib.master(&c.master).ok_or_else(|| Error::UnresolvedMaster { component: c.name.clone(), master: c.master.clone() })
    }

    pub fn is_macro(&self, lib: &Library, comp: usize) -> bool {
        self.master(lib, comp).map(|m| m.is_macro()).unwrap_or(false)
    }

    /// Placed outline of a component.
    pub fn rect(&self, lib: &Library, comp: usize) -> Result<Rect> {
        let m = self.master(lib, comp)?;
        let c = &self.components[comp];
        Ok(Rect::from_size(c.x, c.y, m.width, m.height))
    }

    /// Outline center in half-DBU.
    pub fn center2(&self, lib: &Library, comp: usize) -> Result<(Dbu, Dbu)> {
        Ok(self.rect(lib, comp)?.center2())
    }

    /// Moves a component so its outline center lands on `c2` (half-DBU).
    pub fn set_center2(&mut self, lib: &Library, comp: usize, (cx2, cy2): (Dbu, Dbu)) -> Result<()> {
        let m = self.master(lib, comp)?;
        let (w, h) = (m.width, m.height);
        let c = &mut self.components[comp];
        c.x = (cx2 - w).div_euclid(2);
        c.y = (cy2 - h).div_euclid(2);
        Ok(())
    }

    /// Absolute pin position in half-DBU.
    pub fn pin_position2(&self, lib: &Library, pin: &NetPin) -> Result<(Dbu, Dbu)> {
        match pin {
            NetPin::Comp(ci, pname) => {
                let c = &self.components[*ci];
                if !c.status.is_placed() {
                    return Err(Error::UnplacedComponent(c.name.clone()));
                }
                let m = self.master(lib, *ci)?;
                let (ox, oy) = pin_offset2(lib, m, pname, c.orient);
                let (cx, cy) = Rect::from_size(c.x, c.y, m.width, m.height).center2();
                Ok((cx + ox, cy + oy))
            }
            NetPin::Port(pi) => {
                let p = &self.ports[*pi];
                let (x, y) = p.position.ok_or_else(|| Error::UnplacedComponent(p.name.clone()))?;
                Ok((2 * x, 2 * y))
            }
        }
    }

    /// Die of a net pin under the current assignment.
    pub fn pin_die(&self, pin: &NetPin) -> Die {
        match pin {
            NetPin::Comp(ci, _) => self.components[*ci].die,
            NetPin::Port(pi) => self.ports[*pi].die,
        }
    }

    /// Checks the structural invariants: unique names, resolvable pins,
    /// placed components inside the die.
    pub fn validate(&self, lib: &Library) -> Result<()> {
        let mut seen = HashMap::new();
        for (i, c) in self.components.iter().enumerate() {
            if seen.insert(c.name.as_str(), i).is_some() {
                return Err(Error::DuplicateComponent(c.name.clone()));
            }
            let m = self.master(lib, i)?;
            if c.status.is_placed() && !m.variant.is_shrunk() && !self.die.contains(&self.rect(lib, i)?) {
                return Err(Error::Infeasible(format!("component `{}` lies outside the die", c.name)));
            }
        }
        for n in &self.nets {
            for p in &n.pins {
                match p {
                    NetPin::Comp(ci, pin) => {
                        let m = self
                            .components
                            .get(*ci)
                            .and_then(|c| lib.master(&c.master))
                            .ok_or_else(|| Error::MalformedNet { net: n.name.clone(), msg: format!("bad component index {ci}") })?;
                        if m.pin(pin).is_none() {
                            return Err(Error::MalformedNet {
                                net: n.name.clone(),
                                msg: format!("master `{}` has no pin `{pin}`", m.name),
                            });
                        }
                    }
                    NetPin::Port(pi) => {
                        if *pi >= self.ports.len() {
                            return Err(Error::MalformedNet { net: n.name.clone(), msg: format!("bad port index {pi}") });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Total area of all components (full-size masters) in um².
    pub fn component_area_um2(&self, lib: &Library) -> Result<f64> {
        let mut a = 0.0;
        for i in 0..self.components.len() {
            a += self.master(lib, i)?.area_um2();
        }
        Ok(a)
    }
}

/// Offset of a pin from the outline center, in half-DBU, for a master
/// placed with orientation `orient`. Shrunk masters use the frame of their
/// full-size variant so absolute pin positions survive the swap.
pub fn pin_offset2(lib: &Library, master: &CellMaster, pin: &str, orient: Orient) -> (Dbu, Dbu) {
    let (fw, fh) = lib.pin_frame(master);
    let anchor = master.pin(pin).and_then(|p| p.anchor2()).unwrap_or((fw, fh));
    let (ax, ay) = orient.apply2(anchor, fw, fh);
    (ax - fw, ay - fh)
}
