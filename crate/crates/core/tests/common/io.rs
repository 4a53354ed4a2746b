//! Random designs and libraries for the interchange round trips.

use super::rng;
use open3d_flow::def::{parse_def, read_def, write_def, DefMode};
use open3d_flow::design::{Design, Orient, Status};
use open3d_flow::flow::{library_with_variants, place_io, size_die};
use open3d_flow::gen::{generate, GenParams};
use open3d_flow::lef::{parse_lef, parse_lef_with_tech, write_lef};
use open3d_flow::partition::{apply_partition, assign_io_tiers, PartitionAssignment};
use open3d_flow::pdk3d::Pdk3dConfig;
use open3d_flow::placer::scale_to_minimal;
use open3d_flow::tech::{CellMaster, Library, Technology};
use rand::Rng;
use std::path::PathBuf;

pub struct Case {
    pub tech: Technology,
    /// Masters as they appear in the library LEF.
    pub masters: Vec<CellMaster>,
    pub lib: Library,
    pub design: Design,
}

/// Generator design with random sizes, a random status and orientation per
/// component and, when `stacked`, a random partition with some components
/// swapped to shrunk variants.
pub fn case(seed: u64, stacked: bool) -> Case {
    let mut r = rng(seed);
    let params = GenParams {
        name: format!("rt{seed}"),
        cells: r.gen_range(0..60),
        macros: r.gen_range(0..5),
        macro_types: r.gen_range(1..4),
        ports: r.gen_range(0..12),
        metal_layers: r.gen_range(4..9),
        seed,
        ..Default::default()
    };
    let g = generate(&params).expect("generator params are valid");
    let (tech, masters, lib) = if stacked {
        let lib = library_with_variants(&g.tech, &g.masters, &Pdk3dConfig::default()).unwrap();
        let tech = lib.tech.clone().expect("3D technology");
        let mut masters: Vec<CellMaster> = lib.masters.values().cloned().collect();
        masters.retain(|m| m.variant != open3d_flow::tech::Variant::Base);
        (tech, masters, lib)
    } else {
        (g.tech.clone(), g.masters.clone(), g.library())
    };
    let mut d = g.design;
    let spec = size_die(d.component_area_um2(&lib).unwrap().max(1.0), stacked, 0.5, 1.0, lib.site()).unwrap();
    d.die = spec.die;
    place_io(&spec, &mut d, seed);
    if stacked {
        let macros: Vec<String> = (0..d.components.len()).filter(|&i| d.is_macro(&lib, i)).map(|i| d.components[i].name.clone()).collect();
        let macro_bits = macros.iter().map(|_| r.gen_bool(0.5)).collect();
        let a = PartitionAssignment { macros, macro_bits, cut_nets: 0, util_top: 0.0, util_bottom: 0.0, fitness: 0.0 };
        apply_partition(&mut d, &lib, &a).unwrap();
    }
    let orients = [Orient::N, Orient::S, Orient::FN, Orient::FS];
    for i in 0..d.components.len() {
        let m = d.master(&lib, i).unwrap();
        let (w, h) = (m.width, m.height);
        let c = &mut d.components[i];
        c.status = [Status::Unplaced, Status::Placed, Status::Fixed][r.gen_range(0..3)];
        if c.status.is_placed() {
            c.x = r.gen_range(0..=(d.die.width() - w).max(0));
            c.y = r.gen_range(0..=(d.die.height() - h).max(0));
            c.orient = orients[r.gen_range(0..4)];
            if stacked && r.gen_bool(0.3) {
                scale_to_minimal(&mut d, &lib, i).unwrap();
            }
        }
    }
    if stacked {
        assign_io_tiers(&mut d, &lib);
    }
    Case { tech, masters, lib, design: d }
}

fn same<T: PartialEq>(what: &str, a: &T, b: &T) -> Result<(), String> {
    if a == b {
        Ok(())
    } else {
        Err(format!("{what} differs after the round trip"))
    }
}

/// Writes the technology, the masters and the design, parses them back and
/// compares structurally.
pub fn round_trip(c: &Case) -> Result<(), String> {
    let tech = parse_lef(&write_lef(Some(&c.tech), &[])).map_err(|e| e.to_string())?.technology.ok_or("technology lost")?;
    same("technology", &tech, &c.tech)?;
    let cells = parse_lef_with_tech(&write_lef(None, &c.masters), &tech).map_err(|e| e.to_string())?;
    same("masters", &cells.masters, &c.masters)?;
    if !cells.warnings.is_empty() {
        return Err(format!("LEF warnings: {:?}", cells.warnings));
    }
    let extra = c.lib.masters.values().filter(|m| !c.masters.contains(m)).cloned();
    let lib = Library::new(Some(tech), cells.masters.into_iter().chain(extra));
    let (back, warnings) = read_def(&write_def(&c.design, DefMode::Combined), &lib).map_err(|e| e.to_string())?;
    same("design", &back, &c.design)?;
    if !warnings.is_empty() {
        return Err(format!("DEF warnings: {warnings:?}"));
    }
    Ok(())
}

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

/// Seed of the stacked case frozen as the golden pair.
pub const GOLDEN_SEED: u64 = 2024;

/// Golden LEF and DEF text as generated now.
pub fn golden_text() -> (String, String) {
    let c = case(GOLDEN_SEED, true);
    (write_lef(Some(&c.tech), &c.masters), write_def(&c.design, DefMode::Combined))
}

/// The frozen files survive parse then write byte for byte.
pub fn golden_fixed_point() -> Result<(), String> {
    let read = |n: &str| std::fs::read_to_string(data(n)).map_err(|e| format!("{n}: {e}"));
    let (lef, def) = (read("golden.lef")?, read("golden.def")?);
    let parsed = parse_lef(&lef).map_err(|e| e.to_string())?;
    let tech = parsed.technology.ok_or("golden LEF has no technology")?;
    if write_lef(Some(&tech), &parsed.masters) != lef {
        return Err("golden LEF is not a fixed point".into());
    }
    let lib = Library::new(Some(tech), parsed.masters);
    let d = parse_def(&def, &lib).map_err(|e| e.to_string())?;
    if write_def(&d, DefMode::Combined) != def {
        return Err("golden DEF is not a fixed point".into());
    }
    Ok(())
}
