//! Reader and writer for the DEF subset: `UNITS`, `DIEAREA`, `COMPONENTS`,
//! `PINS` and `NETS`. Other sections are skipped with a warning.
//!
//! A design is read as a two-die stack when any component uses a
//! die-suffixed master or the library technology carries a bond layer.
//! Port dies follow the die side of their `LAYER`.

use crate::design::{Component, Design, Die, Net, NetPin, Orient, Port, Status};
use crate::error::{Error, Result};
use crate::geom::{Dbu, Rect, DBU_PER_UM};
use crate::lexer::{Tokens, Warning};
use crate::tech::{DieSide, Library, PinDirection, Variant};
use std::collections::HashMap;
use std::fmt::Write;

/// Which components and ports [`write_def`] emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DefMode {
    Combined,
    TopOnly,
    BottomOnly,
}

/// Parses DEF text against a library, discarding warnings.
pub fn parse_def(text: &str, lib: &Library) -> Result<Design> {
    read_def(text, lib).map(|(d, _)| d)
}

const SKIPPED_SECTIONS: &[&str] =
    &["SPECIALNETS", "VIAS", "BLOCKAGES", "REGIONS", "GROUPS", "NONDEFAULTRULES", "FILLS", "SCANCHAINS", "STYLES", "SLOTS"];

/// Parses DEF text and returns the design plus recorded warnings.
pub fn read_def(text: &str, lib: &Library) -> Result<(Design, Vec<Warning>)> {
    let mut tk = Tokens::new(text)?;
    let mut design = Design::default();
    let mut scale = Scale { num: 1, den: 1 };
    let mut die_seen = false;

    while let Some(t) = tk.peek() {
        tk.next()?;
        match t.text {
            "END" => {
                tk.expect("DESIGN")?;
                break;
            }
            "DESIGN" => {
                design.name = tk.ident()?.text.to_string();
                tk.expect(";")?;
            }
            "UNITS" => {
                tk.expect("DISTANCE")?;
                tk.expect("MICRONS")?;
                let u = tk.int()?;
                if u <= 0 {
                    return Err(Error::NonPositiveDimension { line: t.line, col: t.col, what: "UNITS DISTANCE MICRONS".into() });
                }
                let g = gcd(u, DBU_PER_UM);
                scale = Scale { num: DBU_PER_UM / g, den: u / g };
                tk.expect(";")?;
            }
            "DIEAREA" => {
                let mut pts = Vec::new();
                while tk.eat("(") {
                    let x = scale.apply(&mut tk, t.line)?;
                    let y = scale.apply(&mut tk, t.line)?;
                    tk.expect(")")?;
                    pts.push((x, y));
                }
                tk.expect(";")?;
                if pts.len() < 2 {
                    return Err(Error::syntax(t.line, t.col, "DIEAREA needs at least two points"));
                }
                let (mut lx, mut ly, mut ux, mut uy) = (Dbu::MAX, Dbu::MAX, Dbu::MIN, Dbu::MIN);
                for (x, y) in pts {
                    lx = lx.min(x);
                    ly = ly.min(y);
                    ux = ux.max(x);
                    uy = uy.max(y);
                }
                design.die = Rect::new(lx, ly, ux, uy);
                die_seen = true;
            }
            "COMPONENTS" => parse_components(&mut tk, &mut design, lib, scale)?,
            "PINS" => parse_pins(&mut tk, &mut design, lib, scale)?,
            "NETS" => parse_nets(&mut tk, &mut design, lib)?,
            kw if SKIPPED_SECTIONS.contains(&kw) => {
                tk.warn(t.line, format!("skipped section `{kw}`"));
                tk.skip_block(kw)?;
            }
            "PROPERTYDEFINITIONS" => {
                tk.warn(t.line, "skipped section `PROPERTYDEFINITIONS`".into());
                tk.skip_block("PROPERTYDEFINITIONS")?;
            }
            "VERSION" | "DIVIDERCHAR" | "BUSBITCHARS" => tk.skip_statement()?,
            kw => {
                tk.warn(t.line, format!("skipped statement `{kw}`"));
                tk.skip_statement()?;
            }
        }
    }
    if !die_seen {
        tk.warn(1, "no DIEAREA; using an empty die".into());
    }
    // tier variants decide; the technology only for component-free designs
    design.stacked = if design.components.is_empty() {
        lib.tech.as_ref().is_some_and(|t| t.is_3d())
    } else {
        design.components.iter().any(|c| Variant::split_name(&c.master).1 != Variant::Base)
    };
    Ok((design, std::mem::take(&mut tk.warnings)))
}

#[derive(Debug, Clone, Copy)]
struct Scale {
    num: i64,
    den: i64,
}

impl Scale {
    fn apply(&self, tk: &mut Tokens, line: usize) -> Result<Dbu> {
        let v = tk.int()? * self.num;
        if v % self.den != 0 {
            tk.warn(line, format!("coordinate {v}/{} is not a whole database unit; rounded", self.den));
        }
        Ok((v as f64 / self.den as f64).round() as Dbu)
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Skips the rest of a `+ KEYWORD ...` option up to the next `+` or `;`.
fn skip_option(tk: &mut Tokens) -> Result<()> {
    while let Some(t) = tk.peek() {
        if t.text == "+" || t.text == ";" {
            return Ok(());
        }
        tk.next()?;
    }
    Ok(())
}

fn parse_placement(tk: &mut Tokens, scale: Scale, line: usize) -> Result<((Dbu, Dbu), Orient)> {
    tk.expect("(")?;
    let x = scale.apply(tk, line)?;
    let y = scale.apply(tk, line)?;
    tk.expect(")")?;
    let o = tk.next()?;
    let orient = Orient::parse(o.text)
        .ok_or_else(|| Error::syntax(o.line, o.col, format!("unsupported orientation `{}` (only N, S, FN, FS)", o.text)))?;
    Ok(((x, y), orient))
}

fn parse_components(tk: &mut Tokens, design: &mut Design, lib: &Library, scale: Scale) -> Result<()> {
    tk.int()?;
    tk.expect(";")?;
    let mut seen: HashMap<String, ()> = HashMap::new();
    loop {
        let t = tk.next()?;
        match t.text {
            "END" => {
                tk.expect("COMPONENTS")?;
                return Ok(());
            }
            "-" => {
                let name = tk.ident()?.text.to_string();
                let master = tk.ident()?.text.to_string();
                if lib.master(&master).is_none() {
                    return Err(Error::UnresolvedMaster { component: name, master });
                }
                if seen.insert(name.clone(), ()).is_some() {
                    return Err(Error::DuplicateComponent(name));
                }
                let mut c = Component::new(name, master);
                loop {
                    let o = tk.next()?;
                    match o.text {
                        ";" => break,
                        "+" => {
                            let kw = tk.next()?;
                            match kw.text {
                                "PLACED" | "FIXED" | "COVER" => {
                                    let ((x, y), orient) = parse_placement(tk, scale, kw.line)?;
                                    c.x = x;
                                    c.y = y;
                                    c.orient = orient;
                                    c.status = if kw.text == "PLACED" { Status::Placed } else { Status::Fixed };
                                }
                                "UNPLACED" => c.status = Status::Unplaced,
                                other => {
                                    tk.warn(kw.line, format!("skipped component option `{other}`"));
                                    skip_option(tk)?;
                                }
                            }
                        }
                        other => return Err(Error::syntax(o.line, o.col, format!("unexpected `{other}` in component"))),
                    }
                }
                design.components.push(c);
            }
            other => return Err(Error::syntax(t.line, t.col, format!("expected `-` or END, found `{other}`"))),
        }
    }
}

fn parse_pins(tk: &mut Tokens, design: &mut Design, lib: &Library, scale: Scale) -> Result<()> {
    tk.int()?;
    tk.expect(";")?;
    loop {
        let t = tk.next()?;
        match t.text {
            "END" => {
                tk.expect("PINS")?;
                return Ok(());
            }
            "-" => {
                let name = tk.ident()?.text.to_string();
                let mut port = Port { name, direction: PinDirection::Inout, position: None, layer: None, die: Die::Bottom };
                loop {
                    let o = tk.next()?;
                    match o.text {
                        ";" => break,
                        "+" => {
                            let kw = tk.next()?;
                            match kw.text {
                                "NET" => {
                                    tk.ident()?;
                                }
                                "DIRECTION" => {
                                    let d = tk.next()?;
                                    port.direction = PinDirection::parse(d.text)
                                        .ok_or_else(|| Error::syntax(d.line, d.col, format!("unknown direction `{}`", d.text)))?;
                                }
                                "LAYER" => {
                                    let l = tk.ident()?;
                                    port.layer = Some(l.text.to_string());
                                    skip_option(tk)?;
                                }
                                "PLACED" | "FIXED" | "COVER" => {
                                    let (pos, _) = parse_placement(tk, scale, kw.line)?;
                                    port.position = Some(pos);
                                }
                                "USE" => skip_option(tk)?,
                                other => {
                                    tk.warn(kw.line, format!("skipped pin option `{other}`"));
                                    skip_option(tk)?;
                                }
                            }
                        }
                        other => return Err(Error::syntax(o.line, o.col, format!("unexpected `{other}` in pin"))),
                    }
                }
                if let (Some(l), Some(tech)) = (&port.layer, &lib.tech) {
                    if tech.layer(l).is_some_and(|l| l.die_side == DieSide::Top) {
                        port.die = Die::Top;
                    }
                }
                design.ports.push(port);
            }
            other => return Err(Error::syntax(t.line, t.col, format!("expected `-` or END, found `{other}`"))),
        }
    }
}

fn parse_nets(tk: &mut Tokens, design: &mut Design, lib: &Library) -> Result<()> {
    tk.int()?;
    tk.expect(";")?;
    let comps: HashMap<String, usize> = design.components.iter().enumerate().map(|(i, c)| (c.name.clone(), i)).collect();
    let ports: HashMap<String, usize> = design.ports.iter().enumerate().map(|(i, p)| (p.name.clone(), i)).collect();
    loop {
        let t = tk.next()?;
        match t.text {
            "END" => {
                tk.expect("NETS")?;
                return Ok(());
            }
            "-" => {
                let name = tk.ident()?.text.to_string();
                let mut pins = Vec::new();
                loop {
                    let o = tk.next()?;
                    match o.text {
                        ";" => break,
                        "(" => {
                            let a = tk.ident()?.text;
                            let b = tk.ident()?.text;
                            if b == ")" {
                                return Err(Error::MalformedNet { net: name, msg: format!("pin reference `( {a} )` lacks a pin name") });
                            }
                            if tk.next()?.text != ")" {
                                return Err(Error::MalformedNet { net: name, msg: "unbalanced parenthesis".into() });
                            }
                            if a == "PIN" {
                                let pi = *ports
                                    .get(b)
                                    .ok_or_else(|| Error::MalformedNet { net: name.clone(), msg: format!("unknown port `{b}`") })?;
                                pins.push(NetPin::Port(pi));
                            } else {
                                let ci = *comps
                                    .get(a)
                                    .ok_or_else(|| Error::MalformedNet { net: name.clone(), msg: format!("unknown component `{a}`") })?;
                                let m = lib.master(&design.components[ci].master).expect("checked in COMPONENTS");
                                if m.pin(b).is_none() {
                                    return Err(Error::MalformedNet {
                                        net: name,
                                        msg: format!("master `{}` has no pin `{b}`", m.name),
                                    });
                                }
                                pins.push(NetPin::Comp(ci, b.to_string()));
                            }
                        }
                        "+" => {
                            let kw = tk.next()?;
                            if kw.text != "USE" {
                                tk.warn(kw.line, format!("skipped net option `{}`", kw.text));
                            }
                            skip_option(tk)?;
                        }
                        other => {
                            return Err(Error::MalformedNet { net: name, msg: format!("unexpected `{other}` at line {}", o.line) })
                        }
                    }
                }
                design.nets.push(Net { name, pins });
            }
            other => return Err(Error::syntax(t.line, t.col, format!("expected `-` or END, found `{other}`"))),
        }
    }
}

/// Emits DEF text at 1000 DBU per micron. The per-die modes keep only that
/// die's components and ports, restore full-size masters in place of shrunk
/// ones, and trim nets to the pins that remain.
pub fn write_def(design: &Design, mode: DefMode) -> String {
    let keep_die = match mode {
        DefMode::Combined => None,
        DefMode::TopOnly => Some(Die::Top),
        DefMode::BottomOnly => Some(Die::Bottom),
    };
    let keep_comp: Vec<bool> = design.components.iter().map(|c| keep_die.is_none_or(|d| c.die == d)).collect();
    let keep_port: Vec<bool> = design.ports.iter().map(|p| keep_die.is_none_or(|d| p.die == d)).collect();

    let mut out = String::new();
    out.push_str("VERSION 5.8 ;\nDIVIDERCHAR \"/\" ;\nBUSBITCHARS \"[]\" ;\n");
    let name = if design.name.is_empty() { "top" } else { &design.name };
    let _ = writeln!(out, "DESIGN {name} ;");
    let _ = writeln!(out, "UNITS DISTANCE MICRONS {DBU_PER_UM} ;\n");
    let d = design.die;
    let _ = writeln!(out, "DIEAREA ( {} {} ) ( {} {} ) ;\n", d.lx, d.ly, d.ux, d.uy);

    let ncomp = keep_comp.iter().filter(|k| **k).count();
    let _ = writeln!(out, "COMPONENTS {ncomp} ;");
    for (c, _) in design.components.iter().zip(&keep_comp).filter(|(_, k)| **k) {
        let master = if keep_die.is_some() {
            let (_, v) = Variant::split_name(&c.master);
            if v.is_shrunk() {
                crate::tech::Library::variant_name(&c.master, v.unshrunk())
            } else {
                c.master.clone()
            }
        } else {
            c.master.clone()
        };
        let _ = write!(out, "  - {} {}", c.name, master);
        match c.status {
            Status::Unplaced => out.push_str(" + UNPLACED"),
            Status::Placed => {
                let _ = write!(out, " + PLACED ( {} {} ) {}", c.x, c.y, c.orient.as_str());
            }
            Status::Fixed => {
                let _ = write!(out, " + FIXED ( {} {} ) {}", c.x, c.y, c.orient.as_str());
            }
        }
        out.push_str(" ;\n");
    }
    out.push_str("END COMPONENTS\n\n");

    let mut port_net: HashMap<usize, &str> = HashMap::new();
    for n in &design.nets {
        for p in &n.pins {
            if let NetPin::Port(pi) = p {
                port_net.entry(*pi).or_insert(&n.name);
            }
        }
    }
    let nport = keep_port.iter().filter(|k| **k).count();
    let _ = writeln!(out, "PINS {nport} ;");
    for (pi, p) in design.ports.iter().enumerate().filter(|(i, _)| keep_port[*i]) {
        let net = port_net.get(&pi).copied().unwrap_or(&p.name);
        let _ = write!(out, "  - {} + NET {} + DIRECTION {} + USE SIGNAL", p.name, net, p.direction.as_str());
        if let Some(l) = &p.layer {
            let _ = write!(out, "\n    + LAYER {l} ( -70 -70 ) ( 70 70 )");
        }
        if let Some((x, y)) = p.position {
            let _ = write!(out, "\n    + PLACED ( {x} {y} ) N");
        }
        out.push_str(" ;\n");
    }
    out.push_str("END PINS\n\n");

    let kept = |p: &NetPin| match p {
        NetPin::Comp(ci, _) => keep_comp[*ci],
        NetPin::Port(pi) => keep_port[*pi],
    };
    let nets: Vec<&Net> = design.nets.iter().filter(|n| keep_die.is_none() || n.pins.iter().any(kept)).collect();
    let _ = writeln!(out, "NETS {} ;", nets.len());
    for n in nets {
        let _ = write!(out, "  - {}", n.name);
        for p in n.pins.iter().filter(|p| kept(p)) {
            match p {
                NetPin::Comp(ci, pin) => {
                    let _ = write!(out, " ( {} {} )", design.components[*ci].name, pin);
                }
                NetPin::Port(pi) => {
                    let _ = write!(out, " ( PIN {} )", design.ports[*pi].name);
                }
            }
        }
        out.push_str(" + USE SIGNAL ;\n");
    }
    out.push_str("END NETS\n\nEND DESIGN\n");
    out
}
