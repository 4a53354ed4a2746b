//! Memory-on-logic tier partitioning.
//!
//! Macros start on the top die and standard cells stay on the bottom die.
//! A (1+1) evolutionary search with bitwise mutation then relocates macros
//! to trade cut nets against the area-utilization gap between the dies.
//! Worse offspring survive with probability `exp(-delta / T_k)` under a
//! geometric temperature schedule `T_k = t0 * alpha^k`.

use crate::design::{Design, Die, NetPin};
use crate::error::{Error, Result};
use crate::lexer::Warning;
use crate::pdk3d::LayerMirror;
use crate::tech::{Library, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PartitionParams {
    pub w_cut: f64,
    pub w_util: f64,
    pub iterations: usize,
    pub t0: f64,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for PartitionParams {
    fn default() -> Self {
        PartitionParams { w_cut: 0.5, w_util: 0.5, iterations: 2000, t0: 0.1, alpha: 0.995, seed: 1 }
    }
}

impl PartitionParams {
    pub fn validate(&self) -> Result<()> {
        if (self.w_cut + self.w_util - 1.0).abs() > 1e-9 || self.w_cut < 0.0 || self.w_util < 0.0 {
            return Err(Error::InvalidParam("w_cut + w_util must equal 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParam("alpha must lie in (0, 1)".into()));
        }
        if !(self.t0 > 0.0) {
            return Err(Error::InvalidParam("t0 must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionAssignment {
    /// Macro component names, in design order; `macro_bits[i]` belongs to
    /// `macros[i]`.
    pub macros: Vec<String>,
    /// `true` places the macro on the top die.
    pub macro_bits: Vec<bool>,
    pub cut_nets: usize,
    pub util_top: f64,
    pub util_bottom: f64,
    pub fitness: f64,
}

/// Precomputed view of a design for fast repeated fitness evaluation.
#[derive(Debug, Clone)]
pub struct PartitionProblem {
    pub macro_components: Vec<usize>,
    macro_area: Vec<f64>,
    cell_area: f64,
    die_area: f64,
    /// Per net: die mask from cells and ports (bit 0 bottom, bit 1 top) and
    /// the macros it touches.
    nets: Vec<(u8, Vec<usize>)>,
}

fn mask(d: Die) -> u8 {
    match d {
        Die::Bottom => 1,
        Die::Top => 2,
    }
}

impl PartitionProblem {
    pub fn new(design: &Design, lib: &Library) -> Result<Self> {
        let mut macro_of = vec![None; design.components.len()];
        let mut macro_components = Vec::new();
        let mut macro_area = Vec::new();
        let mut cell_area = 0.0;
        for i in 0..design.components.len() {
            let m = design.master(lib, i)?;
            let full = if m.variant.is_shrunk() {
                lib.master(&Library::variant_name(&m.name, m.variant.unshrunk())).unwrap_or(m)
            } else {
                m
            };
            if m.is_macro() {
                macro_of[i] = Some(macro_components.len());
                macro_components.push(i);
                macro_area.push(full.area_um2());
            } else {
                cell_area += full.area_um2();
            }
        }
        let nets = design
            .nets
            .iter()
            .map(|n| {
                let mut fixed = 0u8;
                let mut macros = Vec::new();
                for p in &n.pins {
                    match p {
                        NetPin::Comp(ci, _) => match macro_of[*ci] {
                            Some(mi) => {
                                if !macros.contains(&mi) {
                                    macros.push(mi);
                                }
                            }
                            None => fixed |= mask(Die::Bottom),
                        },
                        NetPin::Port(pi) => fixed |= mask(design.ports[*pi].die),
                    }
                }
                (fixed, macros)
            })
            .collect();
        Ok(PartitionProblem { macro_components, macro_area, cell_area, die_area: design.die.area_um2(), nets })
    }

    pub fn num_macros(&self) -> usize {
        self.macro_components.len()
    }

    pub fn cut(&self, bits: &[bool]) -> usize {
        self.nets
            .iter()
            .filter(|(fixed, macros)| {
                let m = macros.iter().fold(*fixed, |acc, &mi| acc | if bits[mi] { 2 } else { 1 });
                m == 3
            })
            .count()
    }

    pub fn utilization(&self, bits: &[bool]) -> (f64, f64) {
        let mut top = 0.0;
        let mut bottom = self.cell_area;
        for (a, &b) in self.macro_area.iter().zip(bits) {
            if b {
                top += a;
            } else {
                bottom += a;
            }
        }
        if self.die_area > 0.0 {
            (top / self.die_area, bottom / self.die_area)
        } else {
            (0.0, 0.0)
        }
    }

    /// `w_cut * cut / |nets| + w_util * |util_top - util_bottom|`.
    pub fn fitness(&self, bits: &[bool], params: &PartitionParams) -> f64 {
        let cut = self.cut(bits) as f64;
        let (ut, ub) = self.utilization(bits);
        params.w_cut * cut / self.nets.len().max(1) as f64 + params.w_util * (ut - ub).abs()
    }

    pub fn assignment(&self, design: &Design, bits: Vec<bool>, params: &PartitionParams) -> PartitionAssignment {
        let (util_top, util_bottom) = self.utilization(&bits);
        PartitionAssignment {
            macros: self.macro_components.iter().map(|&i| design.components[i].name.clone()).collect(),
            cut_nets: self.cut(&bits),
            fitness: self.fitness(&bits, params),
            macro_bits: bits,
            util_top,
            util_bottom,
        }
    }
}

/// Nets with pins on both dies, with cells on the bottom die, macros per
/// `macro_bits` and ports on their current die.
pub fn cut_value(design: &Design, lib: &Library, macro_bits: &[bool]) -> Result<usize> {
    let p = PartitionProblem::new(design, lib)?;
    check_len(&p, macro_bits)?;
    Ok(p.cut(macro_bits))
}

pub fn fitness(design: &Design, lib: &Library, macro_bits: &[bool], params: &PartitionParams) -> Result<f64> {
    let p = PartitionProblem::new(design, lib)?;
    check_len(&p, macro_bits)?;
    Ok(p.fitness(macro_bits, params))
}

fn check_len(p: &PartitionProblem, bits: &[bool]) -> Result<()> {
    if bits.len() != p.num_macros() {
        return Err(Error::InvalidParam(format!("{} macro bits for {} macros", bits.len(), p.num_macros())));
    }
    Ok(())
}

/// Runs the evolutionary relocation and returns the best assignment seen.
pub fn partition_memory_on_logic(design: &Design, lib: &Library, params: &PartitionParams) -> Result<PartitionAssignment> {
    search(design, lib, params).map(|(a, _)| a)
}

/// Like [`partition_memory_on_logic`], also returning the best-so-far
/// fitness after every iteration.
pub fn search(design: &Design, lib: &Library, params: &PartitionParams) -> Result<(PartitionAssignment, Vec<f64>)> {
    params.validate()?;
    let problem = PartitionProblem::new(design, lib)?;
    let n = problem.num_macros();
    let mut current = vec![true; n];
    let mut current_f = problem.fitness(&current, params);
    let mut best = current.clone();
    let mut best_f = current_f;
    let mut trace = Vec::with_capacity(params.iterations);
    if n > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let p_flip = 1.0 / n as f64;
        let mut temp = params.t0;
        for _ in 0..params.iterations {
            let mut child = current.clone();
            loop {
                let mut flipped = false;
                for b in child.iter_mut() {
                    if rng.gen_bool(p_flip) {
                        *b = !*b;
                        flipped = true;
                    }
                }
                if flipped {
                    break;
                }
            }
            let f = problem.fitness(&child, params);
            let delta = f - current_f;
            if delta <= 0.0 || rng.gen::<f64>() < (-delta / temp).exp() {
                current = child;
                current_f = f;
                if f < best_f {
                    best_f = f;
                    best = current.clone();
                }
            }
            trace.push(best_f);
            temp *= params.alpha;
        }
    }
    Ok((problem.assignment(design, best, params), trace))
}

/// Moves macros to their assigned die and every standard cell to the
/// bottom die, renaming masters to the matching die variant.
pub fn apply_partition(design: &mut Design, lib: &Library, assignment: &PartitionAssignment) -> Result<()> {
    let by_name: BTreeMap<&str, bool> = assignment.macros.iter().map(String::as_str).zip(assignment.macro_bits.iter().copied()).collect();
    for c in design.components.iter_mut() {
        let die = match by_name.get(c.name.as_str()) {
            Some(true) => Die::Top,
            _ => Die::Bottom,
        };
        let variant = match die {
            Die::Top => Variant::Top,
            Die::Bottom => Variant::Bottom,
        };
        let name = Library::variant_name(&c.master, variant);
        if lib.master(&name).is_none() {
            return Err(Error::UnresolvedMaster { component: c.name.clone(), master: name });
        }
        c.master = name;
        c.die = die;
    }
    design.stacked = true;
    Ok(())
}

/// Gives every port the die of its connected component pins (majority;
/// ties and dangling ports go to the bottom die). Port layers follow the
/// die through the stack mirror when the library has a 3D technology.
pub fn assign_io_tiers(design: &mut Design, lib: &Library) -> Vec<Warning> {
    let mut votes = vec![(0usize, 0usize); design.ports.len()];
    let mut connected = vec![false; design.ports.len()];
    for n in &design.nets {
        let (mut top, mut bottom) = (0, 0);
        for p in &n.pins {
            if let NetPin::Comp(ci, _) = p {
                match design.components[*ci].die {
                    Die::Top => top += 1,
                    Die::Bottom => bottom += 1,
                }
            }
        }
        for p in &n.pins {
            if let NetPin::Port(pi) = p {
                votes[*pi].0 += top;
                votes[*pi].1 += bottom;
                connected[*pi] |= top + bottom > 0;
            }
        }
    }
    let mirror = lib.tech.as_ref().filter(|t| t.is_3d()).map(|t| (t, LayerMirror::new(t)));
    let mut warnings = Vec::new();
    for (pi, port) in design.ports.iter_mut().enumerate() {
        let die = if !connected[pi] {
            let message = format!("port `{}` has no component connection; kept on the bottom die", port.name);
            log::warn!("{message}");
            warnings.push(Warning { line: 0, message });
            Die::Bottom
        } else if votes[pi].0 > votes[pi].1 {
            Die::Top
        } else {
            Die::Bottom
        };
        port.die = die;
        if let (Some((tech, m)), Some(layer)) = (&mirror, &port.layer) {
            let side = tech.layer(layer).map(|l| l.die_side);
            let wrong = matches!((die, side), (Die::Top, Some(crate::tech::DieSide::Bottom)) | (Die::Bottom, Some(crate::tech::DieSide::Top)));
            if wrong {
                if let Some(mapped) = m.map(layer) {
                    port.layer = Some(mapped.to_string());
                }
            }
        }
    }
    warnings
}

/// On-disk form of a partition result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionFile {
    pub macros: BTreeMap<String, Die>,
    pub cut_nets: usize,
    pub util_top: f64,
    pub util_bottom: f64,
    pub fitness: f64,
}

impl From<&PartitionAssignment> for PartitionFile {
    fn from(a: &PartitionAssignment) -> Self {
        PartitionFile {
            macros: a.macros.iter().zip(&a.macro_bits).map(|(n, &b)| (n.clone(), if b { Die::Top } else { Die::Bottom })).collect(),
            cut_nets: a.cut_nets,
            util_top: a.util_top,
            util_bottom: a.util_bottom,
            fitness: a.fitness,
        }
    }
}

impl PartitionFile {
    /// Rebuilds the bit vector in design macro order.
    pub fn to_assignment(&self, design: &Design, lib: &Library, params: &PartitionParams) -> Result<PartitionAssignment> {
        let problem = PartitionProblem::new(design, lib)?;
        let bits = problem
            .macro_components
            .iter()
            .map(|&i| {
                let name = &design.components[i].name;
                self.macros
                    .get(name)
                    .map(|d| *d == Die::Top)
                    .ok_or_else(|| Error::InvalidParam(format!("partition has no entry for macro `{name}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(problem.assignment(design, bits, params))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{Component, Net, Port};
    use crate::geom::Rect;
    use crate::tech::{CellMaster, MasterClass, Pin, PinDirection};

    fn lib() -> Library {
        let pin = Pin { name: "A".into(), direction: PinDirection::Inout, rects: vec![] };
        let mk = |name: &str, class, w, h| CellMaster {
            name: name.into(),
            class,
            width: w,
            height: h,
            pins: vec![pin.clone()],
            obstructions: vec![],
            variant: Variant::split_name(name).1,
        };
        let mut ms = Vec::new();
        for v in ["", "_top", "_bottom"] {
            ms.push(mk(&format!("RAM{v}"), MasterClass::Block, 10_000, 10_000));
            ms.push(mk(&format!("INV{v}"), MasterClass::Core, 1_000, 1_000));
        }
        Library::new(None, ms)
    }

    fn port(name: &str) -> Port {
        Port { name: name.into(), direction: PinDirection::Input, position: None, layer: None, die: Die::Bottom }
    }

    fn design() -> Design {
        let mut d = Design { name: "p".into(), die: Rect::new(0, 0, 100_000, 100_000), ..Default::default() };
        d.components.push(Component::new("m0", "RAM"));
        d.components.push(Component::new("c0", "INV"));
        d.components.push(Component::new("m1", "RAM"));
        d.ports.push(port("p0"));
        d.ports.push(port("p1"));
        let a = |i: usize| NetPin::Comp(i, "A".into());
        d.nets.push(Net { name: "n0".into(), pins: vec![a(0), a(1), a(1)] });
        d.nets.push(Net { name: "n1".into(), pins: vec![a(1), NetPin::Port(0)] });
        d.nets.push(Net { name: "n2".into(), pins: vec![a(0), a(2), NetPin::Port(1)] });
        d
    }

    #[test]
    fn cut_counts_nets_once() {
        let (d, l) = (design(), lib());
        assert_eq!(cut_value(&d, &l, &[false, false]).unwrap(), 0);
        assert_eq!(cut_value(&d, &l, &[true, false]).unwrap(), 2);
        assert_eq!(cut_value(&d, &l, &[true, true]).unwrap(), 2);
    }

    #[test]
    fn fitness_arithmetic() {
        let (d, l) = (design(), lib());
        let p = PartitionParams::default();
        // Both macros on top: cut 2/3; util top 0.02, bottom 0.0001.
        let f = fitness(&d, &l, &[true, true], &p).unwrap();
        assert!((f - (0.5 * 2.0 / 3.0 + 0.5 * (0.02 - 0.0001))).abs() < 1e-15);
        let all_bottom = fitness(&d, &l, &[false, false], &PartitionParams { w_cut: 1.0, w_util: 0.0, ..p }).unwrap();
        assert_eq!(all_bottom, 0.0);
    }

    #[test]
    fn weighted_average_example() {
        // w = (0.5, 0.5), normalized cut 0.2, util diff 0.1
        let v: f64 = 0.5 * 0.2 + 0.5 * 0.1;
        assert!((v - 0.15).abs() < 1e-15);
    }

    #[test]
    fn no_macros_is_degenerate() {
        let l = lib();
        let mut d = design();
        d.components.retain(|c| c.master == "INV");
        d.nets.clear();
        let a = partition_memory_on_logic(&d, &l, &PartitionParams::default()).unwrap();
        assert!(a.macro_bits.is_empty());
        assert_eq!(a.cut_nets, 0);
        assert!(a.fitness.is_finite());
    }

    #[test]
    fn zero_nets_normalize_by_one() {
        let l = lib();
        let mut d = design();
        d.nets.clear();
        let f = fitness(&d, &l, &[true, false], &PartitionParams::default()).unwrap();
        assert!(f.is_finite());
    }

    #[test]
    fn io_tiers_follow_connections() {
        let l = lib();
        let mut d = design();
        d.ports.push(port("dangling"));
        d.ports.push(port("multi"));
        d.components.push(Component::new("m2", "RAM"));
        let a = PartitionAssignment {
            macros: vec!["m0".into(), "m1".into(), "m2".into()],
            macro_bits: vec![true, true, true],
            cut_nets: 0,
            util_top: 0.0,
            util_bottom: 0.0,
            fitness: 0.0,
        };
        let x = |i: usize| NetPin::Comp(i, "A".into());
        d.nets.push(Net { name: "n3".into(), pins: vec![NetPin::Port(3), x(0), x(2), x(1)] });
        apply_partition(&mut d, &l, &a).unwrap();
        let w = assign_io_tiers(&mut d, &l);
        assert_eq!(d.ports[0].die, Die::Bottom);
        assert_eq!(d.ports[1].die, Die::Top);
        assert_eq!(d.ports[2].die, Die::Bottom);
        assert_eq!(d.ports[3].die, Die::Top);
        assert_eq!(w.len(), 1);
        assert_eq!(d.components[1].master, "INV_bottom");
        assert_eq!(d.components[0].master, "RAM_top");
    }

    #[test]
    fn search_is_deterministic_and_monotone() {
        let (d, l) = (design(), lib());
        let p = PartitionParams { seed: 7, ..Default::default() };
        let (a, trace) = search(&d, &l, &p).unwrap();
        let (b, _) = search(&d, &l, &p).unwrap();
        assert_eq!(a, b);
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(trace.len(), 2000);
    }
}
