//! Reader and writer for the LEF subset used by the flow.
//!
//! Supported: `VERSION`, `UNITS`, `SITE`, `LAYER` (routing and cut), `VIA`
//! and `MACRO` with `CLASS`/`SIZE`/`PIN`/`PORT`/`RECT`/`OBS`. Everything
//! else is skipped and reported through [`LefData::warnings`].
//!
//! The bond (hybrid-bonding terminal) layer has no LEF keyword of its own; a
//! cut layer named `hbt` (any case) marks it, and every layer above it
//! belongs to the top die.

use crate::error::{Error, Result};
use crate::geom::{format_um, Rect};
use crate::lexer::{unquote, Tokens, Warning};
use crate::tech::{
    CellMaster, DieSide, Direction, Layer, LayerKind, MasterClass, Pin, PinDirection, Site, Technology, Variant, ViaDef,
};
use std::collections::BTreeSet;
use std::fmt::Write;

/// Name of the bond cut layer.
pub const BOND_LAYER_NAME: &str = "hbt";

#[derive(Debug, Clone, Default)]
pub struct LefData {
    /// Present when the text declares layers or sites.
    pub technology: Option<Technology>,
    pub masters: Vec<CellMaster>,
    pub warnings: Vec<Warning>,
}

/// Parses a LEF file; pin and obstruction layers are checked against the
/// layers declared in the same text, if any.
pub fn parse_lef(text: &str) -> Result<LefData> {
    parse(text, None)
}

/// Parses a cell LEF against a separately loaded technology.
pub fn parse_lef_with_tech(text: &str, tech: &Technology) -> Result<LefData> {
    parse(text, Some(tech))
}

const SKIPPED_BLOCKS: &[&str] = &["PROPERTYDEFINITIONS", "SPACING", "ARRAY", "NOISETABLE", "CORRECTIONTABLE", "IRDROP"];
const SKIPPED_NAMED_BLOCKS: &[&str] = &["VIARULE", "NONDEFAULTRULE"];
const SILENT: &[&str] = &["VERSION", "BUSBITCHARS", "DIVIDERCHAR", "NAMESCASESENSITIVE"];

fn parse(text: &str, external: Option<&Technology>) -> Result<LefData> {
    let mut tk = Tokens::new(text)?;
    let mut tech = Technology::default();
    let mut saw_tech = false;
    let mut declared: BTreeSet<String> = BTreeSet::new();
    if let Some(t) = external {
        declared.extend(t.layers.iter().map(|l| l.name.clone()));
    }
    let mut check_layers = external.is_some_and(|t| !t.layers.is_empty());
    let mut masters = Vec::new();

    while let Some(t) = tk.peek() {
        match t.text {
            "END" => {
                tk.next()?;
                tk.expect("LIBRARY")?;
                break;
            }
            "UNITS" => {
                tk.next()?;
                loop {
                    let s = tk.next()?;
                    match s.text {
                        "END" => {
                            tk.expect("UNITS")?;
                            break;
                        }
                        "DATABASE" => {
                            tk.expect("MICRONS")?;
                            let n = tk.int()?;
                            if n <= 0 {
                                return Err(Error::NonPositiveDimension { line: s.line, col: s.col, what: "DATABASE MICRONS".into() });
                            }
                            tech.distance_units_per_micron = n;
                            tk.expect(";")?;
                        }
                        _ => {
                            tk.warn(s.line, format!("skipped UNITS statement `{}`", s.text));
                            tk.skip_statement()?;
                        }
                    }
                }
            }
            "SITE" => {
                tk.next()?;
                saw_tech = true;
                tech.sites.push(parse_site(&mut tk)?);
            }
            "LAYER" => {
                tk.next()?;
                saw_tech = true;
                check_layers = true;
                let (name, layer) = parse_layer(&mut tk)?;
                declared.insert(name);
                if let Some(l) = layer {
                    tech.layers.push(l);
                }
            }
            "VIA" => {
                tk.next()?;
                saw_tech = true;
                tech.vias.push(parse_via(&mut tk, &declared, check_layers)?);
            }
            "MACRO" => {
                tk.next()?;
                masters.push(parse_macro(&mut tk, &declared, check_layers)?);
            }
            kw if SKIPPED_BLOCKS.contains(&kw) => {
                tk.next()?;
                tk.warn(t.line, format!("skipped block `{kw}`"));
                tk.skip_block(kw)?;
            }
            kw if SKIPPED_NAMED_BLOCKS.contains(&kw) => {
                tk.next()?;
                let name = tk.ident()?;
                tk.warn(t.line, format!("skipped block `{kw} {}`", name.text));
                tk.skip_block(name.text)?;
            }
            "BEGINEXT" => {
                tk.next()?;
                tk.warn(t.line, "skipped extension block".into());
                while tk.next()?.text != "ENDEXT" {}
            }
            kw => {
                tk.next()?;
                if !SILENT.contains(&kw) {
                    tk.warn(t.line, format!("skipped statement `{kw}`"));
                }
                tk.skip_statement()?;
            }
        }
    }

    assign_die_sides(&mut tech.layers);
    let technology = saw_tech.then_some(tech);
    Ok(LefData { technology, masters, warnings: std::mem::take(&mut tk.warnings) })
}

/// Layers up to the bond layer are bottom-die, layers past it top-die.
pub(crate) fn assign_die_sides(layers: &mut [Layer]) {
    let mut side = DieSide::Bottom;
    for l in layers.iter_mut() {
        if l.kind == LayerKind::Cut && l.name.eq_ignore_ascii_case(BOND_LAYER_NAME) {
            l.die_side = DieSide::Bond;
            side = DieSide::Top;
        } else {
            l.die_side = side;
        }
    }
}

fn positive(v: i64, line: usize, col: usize, what: &str) -> Result<()> {
    if v <= 0 {
        return Err(Error::NonPositiveDimension { line, col, what: what.to_string() });
    }
    Ok(())
}

fn parse_site(tk: &mut Tokens) -> Result<Site> {
    let name = tk.ident()?;
    let mut size = None;
    loop {
        let s = tk.next()?;
        match s.text {
            "END" => {
                tk.expect(name.text)?;
                break;
            }
            "SIZE" => {
                let w = tk.um()?;
                tk.expect("BY")?;
                let h = tk.um()?;
                tk.expect(";")?;
                positive(w.min(h), s.line, s.col, &format!("SITE {} SIZE", name.text))?;
                size = Some((w, h));
            }
            "CLASS" | "SYMMETRY" => tk.skip_statement()?,
            other => {
                tk.warn(s.line, format!("skipped SITE statement `{other}`"));
                tk.skip_statement()?;
            }
        }
    }
    let (width, height) =
        size.ok_or_else(|| Error::NonPositiveDimension { line: name.line, col: name.col, what: format!("SITE {} has no SIZE", name.text) })?;
    Ok(Site { name: name.text.to_string(), width, height })
}

fn parse_layer(tk: &mut Tokens) -> Result<(String, Option<Layer>)> {
    let name = tk.ident()?;
    let mut kind = None;
    let mut skipped_type = None;
    let mut direction = None;
    let mut pitch = None;
    let mut width = None;
    let mut spacing = None;
    loop {
        let s = tk.next()?;
        match s.text {
            "END" => {
                tk.expect(name.text)?;
                break;
            }
            "TYPE" => {
                let ty = tk.ident()?;
                match ty.text {
                    "ROUTING" => kind = Some(LayerKind::Routing),
                    "CUT" => kind = Some(LayerKind::Cut),
                    other => skipped_type = Some(other.to_string()),
                }
                tk.skip_statement()?;
            }
            "DIRECTION" => {
                let d = tk.ident()?;
                direction = match d.text {
                    "HORIZONTAL" => Some(Direction::Horizontal),
                    "VERTICAL" => Some(Direction::Vertical),
                    other => return Err(Error::syntax(d.line, d.col, format!("unknown direction `{other}`"))),
                };
                tk.expect(";")?;
            }
            "PITCH" => {
                let p = tk.um()?;
                positive(p, s.line, s.col, &format!("LAYER {} PITCH", name.text))?;
                pitch = Some(p);
                tk.skip_statement()?;
            }
            "WIDTH" => {
                let w = tk.um()?;
                positive(w, s.line, s.col, &format!("LAYER {} WIDTH", name.text))?;
                width = Some(w);
                tk.expect(";")?;
            }
            "SPACING" if spacing.is_none() => {
                let sp = tk.um()?;
                spacing = Some(sp);
                tk.skip_statement()?;
            }
            other => {
                tk.warn(s.line, format!("skipped LAYER statement `{other}`"));
                tk.skip_statement()?;
            }
        }
    }
    let Some(kind) = kind else {
        tk.warn(name.line, format!("layer `{}` of type {} is outside the stack model", name.text, skipped_type.unwrap_or_default()));
        return Ok((name.text.to_string(), None));
    };
    let width = width.unwrap_or(0);
    let layer = match kind {
        LayerKind::Routing => {
            let pitch = pitch.unwrap_or(0);
            positive(pitch, name.line, name.col, &format!("LAYER {} PITCH", name.text))?;
            positive(width, name.line, name.col, &format!("LAYER {} WIDTH", name.text))?;
            let direction = direction.or_else(|| {
                tk.warn(name.line, format!("routing layer `{}` has no DIRECTION, assuming HORIZONTAL", name.text));
                Some(Direction::Horizontal)
            });
            Layer { name: name.text.to_string(), kind, direction, pitch, width, die_side: DieSide::Bottom }
        }
        LayerKind::Cut => {
            let pitch = pitch.unwrap_or_else(|| spacing.map(|s| s + width).unwrap_or(0));
            Layer { name: name.text.to_string(), kind, direction: None, pitch, width, die_side: DieSide::Bottom }
        }
    };
    Ok((name.text.to_string(), Some(layer)))
}

fn check_layer(declared: &BTreeSet<String>, check: bool, line: usize, col: usize, layer: &str) -> Result<()> {
    if check && !declared.contains(layer) {
        return Err(Error::UndeclaredLayer { line, col, layer: layer.to_string() });
    }
    Ok(())
}

fn parse_rect(tk: &mut Tokens) -> Result<Rect> {
    if tk.eat("MASK") {
        tk.int()?;
    }
    let x0 = tk.um()?;
    let y0 = tk.um()?;
    let x1 = tk.um()?;
    let y1 = tk.um()?;
    tk.expect(";")?;
    Ok(Rect::new(x0, y0, x1, y1))
}

/// Parses `LAYER ... ; RECT ... ;` lists until `END`, which is consumed.
fn parse_shapes(tk: &mut Tokens, declared: &BTreeSet<String>, check: bool, what: &str) -> Result<Vec<(String, Rect)>> {
    let mut shapes = Vec::new();
    let mut layer: Option<String> = None;
    loop {
        let s = tk.next()?;
        match s.text {
            "END" => return Ok(shapes),
            "LAYER" => {
                let l = tk.ident()?;
                check_layer(declared, check, l.line, l.col, l.text)?;
                layer = Some(l.text.to_string());
                tk.skip_statement()?;
            }
            "RECT" => {
                let Some(l) = layer.clone() else {
                    return Err(Error::syntax(s.line, s.col, format!("RECT before LAYER in {what}")));
                };
                shapes.push((l, parse_rect(tk)?));
            }
            other => {
                tk.warn(s.line, format!("skipped {what} statement `{other}`"));
                tk.skip_statement()?;
            }
        }
    }
}

fn parse_via(tk: &mut Tokens, declared: &BTreeSet<String>, check: bool) -> Result<ViaDef> {
    let name = tk.ident()?;
    let _ = tk.eat("DEFAULT") || tk.eat("GENERATED");
    let mut shapes = Vec::new();
    let mut layer: Option<String> = None;
    loop {
        let s = tk.next()?;
        match s.text {
            "END" => {
                tk.expect(name.text)?;
                break;
            }
            "LAYER" => {
                let l = tk.ident()?;
                check_layer(declared, check, l.line, l.col, l.text)?;
                layer = Some(l.text.to_string());
                tk.skip_statement()?;
            }
            "RECT" => {
                let Some(l) = layer.clone() else {
                    return Err(Error::syntax(s.line, s.col, "RECT before LAYER in VIA"));
                };
                shapes.push((l, parse_rect(tk)?));
            }
            other => {
                tk.warn(s.line, format!("skipped VIA statement `{other}`"));
                tk.skip_statement()?;
            }
        }
    }
    Ok(ViaDef { name: name.text.to_string(), shapes })
}

fn parse_macro(tk: &mut Tokens, declared: &BTreeSet<String>, check: bool) -> Result<CellMaster> {
    let name = tk.ident()?;
    let mut class = MasterClass::Core;
    let mut size = None;
    let mut pins = Vec::new();
    let mut obstructions = Vec::new();
    loop {
        let s = tk.next()?;
        match s.text {
            "END" => {
                tk.expect(name.text)?;
                break;
            }
            "CLASS" => {
                let c = tk.ident()?;
                class = match c.text {
                    "BLOCK" => MasterClass::Block,
                    "CORE" => MasterClass::Core,
                    other => {
                        tk.warn(c.line, format!("macro class `{other}` treated as CORE"));
                        MasterClass::Core
                    }
                };
                tk.skip_statement()?;
            }
            "SIZE" => {
                let w = tk.um()?;
                tk.expect("BY")?;
                let h = tk.um()?;
                tk.expect(";")?;
                positive(w.min(h), s.line, s.col, &format!("MACRO {} SIZE", name.text))?;
                size = Some((w, h));
            }
            "PIN" => pins.push(parse_pin(tk, declared, check)?),
            "OBS" => obstructions.extend(parse_shapes(tk, declared, check, "OBS")?),
            other => {
                tk.warn(s.line, format!("skipped MACRO statement `{other}`"));
                tk.skip_statement()?;
            }
        }
    }
    let (width, height) =
        size.ok_or_else(|| Error::NonPositiveDimension { line: name.line, col: name.col, what: format!("MACRO {} has no SIZE", name.text) })?;
    let variant = Variant::split_name(name.text).1;
    Ok(CellMaster { name: name.text.to_string(), class, width, height, pins, obstructions, variant })
}

fn parse_pin(tk: &mut Tokens, declared: &BTreeSet<String>, check: bool) -> Result<Pin> {
    let name = tk.ident()?;
    let mut direction = PinDirection::Inout;
    let mut rects = Vec::new();
    loop {
        let s = tk.next()?;
        match s.text {
            "END" => {
                tk.expect(name.text)?;
                break;
            }
            "DIRECTION" => {
                let d = tk.ident()?;
                direction = PinDirection::parse(d.text)
                    .ok_or_else(|| Error::syntax(d.line, d.col, format!("unknown pin direction `{}`", d.text)))?;
                tk.skip_statement()?;
            }
            "PORT" => rects.extend(parse_shapes(tk, declared, check, "PORT")?),
            "USE" | "SHAPE" => tk.skip_statement()?,
            other => {
                tk.warn(s.line, format!("skipped PIN statement `{other}`"));
                tk.skip_statement()?;
            }
        }
    }
    Ok(Pin { name: unquote(name.text).to_string(), direction, rects })
}

fn write_rect(out: &mut String, indent: &str, r: &Rect) {
    let _ = writeln!(
        out,
        "{indent}RECT {} {} {} {} ;",
        format_um(r.lx),
        format_um(r.ly),
        format_um(r.ux),
        format_um(r.uy)
    );
}

fn write_shapes(out: &mut String, indent: &str, shapes: &[(String, Rect)]) {
    let mut current: Option<&str> = None;
    for (layer, r) in shapes {
        if current != Some(layer.as_str()) {
            let _ = writeln!(out, "{indent}LAYER {layer} ;");
            current = Some(layer);
        }
        write_rect(out, &format!("{indent}  "), r);
    }
}

/// Emits LEF text for an optional technology and a list of masters.
/// Output is deterministic for identical input.
pub fn write_lef(tech: Option<&Technology>, masters: &[CellMaster]) -> String {
    let mut out = String::new();
    out.push_str("VERSION 5.8 ;\nBUSBITCHARS \"[]\" ;\nDIVIDERCHAR \"/\" ;\n\n");
    if let Some(t) = tech {
        let _ = writeln!(out, "UNITS\n  DATABASE MICRONS {} ;\nEND UNITS\n", t.distance_units_per_micron);
        for s in &t.sites {
            let _ = writeln!(out, "SITE {}\n  CLASS CORE ;\n  SIZE {} BY {} ;\nEND {}\n", s.name, format_um(s.width), format_um(s.height), s.name);
        }
        for l in &t.layers {
            let _ = writeln!(out, "LAYER {}", l.name);
            match l.kind {
                LayerKind::Routing => {
                    out.push_str("  TYPE ROUTING ;\n");
                    let dir = match l.direction {
                        Some(Direction::Vertical) => "VERTICAL",
                        _ => "HORIZONTAL",
                    };
                    let _ = writeln!(out, "  DIRECTION {dir} ;");
                    let _ = writeln!(out, "  PITCH {} ;", format_um(l.pitch));
                    let _ = writeln!(out, "  WIDTH {} ;", format_um(l.width));
                }
                LayerKind::Cut => {
                    out.push_str("  TYPE CUT ;\n");
                    if l.width > 0 {
                        let _ = writeln!(out, "  WIDTH {} ;", format_um(l.width));
                    }
                    if l.pitch > 0 {
                        let _ = writeln!(out, "  PITCH {} ;", format_um(l.pitch));
                    }
                }
            }
            let _ = writeln!(out, "END {}\n", l.name);
        }
        for v in &t.vias {
            let _ = writeln!(out, "VIA {}", v.name);
            write_shapes(&mut out, "  ", &v.shapes);
            let _ = writeln!(out, "END {}\n", v.name);
        }
    }
    for m in masters {
        let _ = writeln!(out, "MACRO {}", m.name);
        let class = match m.class {
            MasterClass::Core => "CORE",
            MasterClass::Block => "BLOCK",
        };
        let _ = writeln!(out, "  CLASS {class} ;");
        let _ = writeln!(out, "  SIZE {} BY {} ;", format_um(m.width), format_um(m.height));
        for p in &m.pins {
            let _ = writeln!(out, "  PIN {}", p.name);
            let _ = writeln!(out, "    DIRECTION {} ;", p.direction.as_str());
            if !p.rects.is_empty() {
                out.push_str("    PORT\n");
                write_shapes(&mut out, "      ", &p.rects);
                out.push_str("    END\n");
            }
            let _ = writeln!(out, "  END {}", p.name);
        }
        if !m.obstructions.is_empty() {
            out.push_str("  OBS\n");
            write_shapes(&mut out, "    ", &m.obstructions);
            out.push_str("  END\n");
        }
        let _ = writeln!(out, "END {}\n", m.name);
    }
    out.push_str("END LIBRARY\n");
    out
}
