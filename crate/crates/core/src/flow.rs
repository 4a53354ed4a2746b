//! End-to-end flows: floorplan, I/O, PDK preparation, partition, placement,
//! legalization, metrics and thermal analysis.

use crate::check::{check_legality, CheckOptions};
use crate::def::{parse_def, write_def, DefMode};
use crate::design::{Design, Die, Status};
use crate::error::{Error, Result};
use crate::gen::{generate, GenParams};
use crate::geom::{Dbu, Rect};
use crate::lef::{parse_lef, parse_lef_with_tech, write_lef};
use crate::metrics::{evaluate, PowerMap, Report};
use crate::partition::{apply_partition, assign_io_tiers, partition_memory_on_logic, PartitionFile, PartitionParams};
use crate::pdk3d::{mirror_metal_stack, split_library, Pdk3dConfig};
use crate::placer::{global_place, legalize, legalize_macros, run_dmp, PlacerParams};
use crate::tech::{CellMaster, Library, Technology, Variant};
use crate::thermal::{analyze, ThermalParams};
use crate::tiling::{run_tiling, TilingParams};
use crate::{svg, Warning};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FlowKind {
    #[serde(rename = "FLOW_2D")]
    Flow2d,
    #[serde(rename = "FLOW_3D_TILING")]
    Flow3dTiling,
    #[serde(rename = "FLOW_3D_DMP")]
    Flow3dDmp,
}

impl FlowKind {
    pub fn is_3d(self) -> bool {
        self != FlowKind::Flow2d
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FlowKind::Flow2d => "FLOW_2D",
            FlowKind::Flow3dTiling => "FLOW_3D_TILING",
            FlowKind::Flow3dDmp => "FLOW_3D_DMP",
        }
    }
}

/// Flow configuration. Inputs are either the three files or a generator
/// block. The top-level `seed` overrides the module seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConfig {
    pub tech_lef: Option<PathBuf>,
    pub cells_lef: Option<PathBuf>,
    pub def: Option<PathBuf>,
    pub generate: Option<GenParams>,
    pub power: Option<PathBuf>,
    pub flow: FlowKind,
    pub utilization: f64,
    /// Die height over width.
    pub aspect: f64,
    pub seed: u64,
    /// Bins per axis for the overflow metric.
    pub metrics_grid: usize,
    pub pdk3d: Pdk3dConfig,
    pub partition: PartitionParams,
    pub tiling: TilingParams,
    pub placer: PlacerParams,
    pub thermal: ThermalParams,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            tech_lef: None,
            cells_lef: None,
            def: None,
            generate: None,
            power: None,
            flow: FlowKind::Flow3dDmp,
            utilization: 0.5,
            aspect: 1.0,
            seed: 1,
            metrics_grid: 32,
            pdk3d: Pdk3dConfig::default(),
            partition: PartitionParams::default(),
            tiling: TilingParams::default(),
            placer: PlacerParams::default(),
            thermal: ThermalParams::default(),
        }
    }
}

impl FlowConfig {
    /// Parses a config; relative paths resolve against `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<Self> {
        let mut c: FlowConfig = serde_json::from_str(text)?;
        for p in [&mut c.tech_lef, &mut c.cells_lef, &mut c.def, &mut c.power].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.utilization > 0.0 && self.utilization <= 1.0) {
            return Err(Error::InvalidParam("utilization must lie in (0, 1]".into()));
        }
        if !(self.aspect > 0.0 && self.aspect.is_finite()) {
            return Err(Error::InvalidParam("aspect must be positive".into()));
        }
        if self.metrics_grid == 0 {
            return Err(Error::InvalidParam("metrics_grid must be positive".into()));
        }
        match (&self.generate, &self.tech_lef, &self.cells_lef, &self.def) {
            (Some(g), None, None, None) => g.validate()?,
            (None, Some(_), Some(_), Some(_)) => {}
            _ => return Err(Error::InvalidParam("give either `generate` or all of `tech_lef`, `cells_lef`, `def`".into())),
        }
        for p in [&self.tech_lef, &self.cells_lef, &self.def, &self.power].into_iter().flatten() {
            if !p.exists() {
                return Err(Error::InvalidParam(format!("input `{}` does not exist", p.display())));
            }
        }
        self.pdk3d.validate()?;
        self.partition.validate()?;
        self.tiling.validate()?;
        self.placer.validate()?;
        self.thermal.validate()
    }
}

/// Die outline and row structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FloorplanSpec {
    pub die: Rect,
    pub site_width: Dbu,
    pub row_height: Dbu,
    pub rows: usize,
}

fn ceil_to(v: f64, step: Dbu) -> Dbu {
    ((v / step as f64).ceil() as Dbu).max(1) * step
}

/// Die for a total component area: `area / utilization` for 2D, half of
/// that per die for 3D, at `aspect = height / width`, each side rounded up
/// to the site grid.
pub fn size_die(total_area_um2: f64, three_d: bool, utilization: f64, aspect: f64, site: (Dbu, Dbu)) -> Result<FloorplanSpec> {
    if !(utilization > 0.0 && utilization <= 1.0) {
        return Err(Error::InvalidParam("utilization must lie in (0, 1]".into()));
    }
    if !(aspect > 0.0) || !(total_area_um2 >= 0.0) {
        return Err(Error::InvalidParam("aspect and area must be positive".into()));
    }
    let mut area = total_area_um2 / utilization * 1e6;
    if three_d {
        area /= 2.0;
    }
    let w = (area / aspect).sqrt();
    let h = w * aspect;
    let (sw, rh) = site;
    let die = Rect::new(0, 0, ceil_to(w, sw), ceil_to(h, rh));
    Ok(FloorplanSpec { die, site_width: sw, row_height: rh, rows: (die.height() / rh) as usize })
}

/// Boundary slots at one row-height pitch, counter-clockwise from the
/// lower-left corner.
fn io_slots(die: Rect, pitch: Dbu) -> Vec<(Dbu, Dbu)> {
    let mut out = Vec::new();
    let nx = (die.width() / pitch).max(0);
    let ny = (die.height() / pitch).max(0);
    for k in 0..nx {
        out.push((die.lx + pitch / 2 + k * pitch, die.ly));
    }
    for k in 0..ny {
        out.push((die.ux, die.ly + pitch / 2 + k * pitch));
    }
    for k in 0..nx {
        out.push((die.ux - pitch / 2 - k * pitch, die.uy));
    }
    for k in 0..ny {
        out.push((die.lx, die.uy - pitch / 2 - k * pitch));
    }
    out
}

/// Point at arc length `s` along the boundary, counter-clockwise from the
/// lower-left corner.
fn perimeter_point(die: Rect, s: Dbu) -> (Dbu, Dbu) {
    let (w, h) = (die.width(), die.height());
    let s = s.rem_euclid(2 * (w + h));
    if s < w {
        (die.lx + s, die.ly)
    } else if s < w + h {
        (die.ux, die.ly + s - w)
    } else if s < 2 * w + h {
        (die.ux - (s - w - h), die.uy)
    } else {
        (die.lx, die.uy - (s - 2 * w - h))
    }
}

/// Uniform seeded assignment of ports to boundary slots, all on the bottom
/// die. With more ports than slots, ports are spread evenly at sub-pitch
/// spacing and a warning is returned.
pub fn place_io(spec: &FloorplanSpec, design: &mut Design, seed: u64) -> Vec<Warning> {
    let mut warnings = Vec::new();
    let n = design.ports.len();
    if n == 0 {
        return warnings;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slots = io_slots(spec.die, spec.row_height);
    let positions: Vec<(Dbu, Dbu)> = if n <= slots.len() {
        sample(&mut rng, slots.len(), n).into_iter().map(|i| slots[i]).collect()
    } else {
        let message = format!("{n} ports exceed {} boundary slots; spacing relaxed below one row pitch", slots.len());
        log::warn!("{message}");
        warnings.push(Warning { line: 0, message });
        let perim = 2 * (spec.die.width() + spec.die.height());
        let offset = rng.gen_range(0..perim.max(1));
        (0..n as Dbu).map(|k| perimeter_point(spec.die, offset + k * perim / n as Dbu)).collect()
    };
    for (p, pos) in design.ports.iter_mut().zip(positions) {
        p.position = Some(pos);
        p.die = Die::Bottom;
    }
    warnings
}

/// Sizes the die when the design has none and places any unplaced ports;
/// used by the single-stage commands that start from a bare netlist.
pub fn ensure_floorplan(design: &mut Design, lib: &Library, three_d: bool, utilization: f64, aspect: f64, seed: u64) -> Result<Vec<Warning>> {
    let site = lib.site();
    let spec = if design.die.area() > 0 {
        FloorplanSpec { die: design.die, site_width: site.0, row_height: site.1, rows: (design.die.height() / site.1) as usize }
    } else {
        let spec = size_die(design.component_area_um2(lib)?, three_d, utilization, aspect, site)?;
        design.die = spec.die;
        spec
    };
    if design.ports.iter().any(|p| p.position.is_none()) {
        return Ok(place_io(&spec, design, seed));
    }
    Ok(Vec::new())
}

/// Everything a flow run produces. `files` maps relative output paths to
/// contents; all of them are deterministic for a given config.
#[derive(Debug, Clone)]
pub struct FlowOutput {
    pub report: Report,
    pub files: BTreeMap<String, String>,
    /// Stage wall-clock seconds; not part of `files`.
    pub timing: BTreeMap<String, f64>,
    pub design: Design,
    pub library: Library,
    pub warnings: Vec<Warning>,
}

impl FlowOutput {
    /// Writes `files` plus `timing.json` under `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        for (name, content) in &self.files {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, content)?;
        }
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("timing.json"), serde_json::to_string_pretty(&self.timing)? + "\n")?;
        Ok(())
    }
}

/// Inputs of a flow: 2D technology, 2D masters and an unplaced design.
#[derive(Debug, Clone)]
pub struct FlowInput {
    pub tech: Technology,
    pub masters: Vec<CellMaster>,
    pub design: Design,
    pub power: Option<PowerMap>,
}

pub fn load_inputs(config: &FlowConfig) -> Result<FlowInput> {
    config.validate()?;
    let power = match &config.power {
        Some(p) => Some(serde_json::from_str::<PowerMap>(&std::fs::read_to_string(p)?)?),
        None => None,
    };
    if let Some(g) = &config.generate {
        let g = generate(g)?;
        return Ok(FlowInput { tech: g.tech, masters: g.masters, design: g.design, power });
    }
    let read = |p: &Option<PathBuf>| -> Result<String> { Ok(std::fs::read_to_string(p.as_ref().expect("validated"))?) };
    let tech = parse_lef(&read(&config.tech_lef)?)?
        .technology
        .ok_or_else(|| Error::InvalidTechnology("technology LEF declares no layers".into()))?;
    let masters = parse_lef_with_tech(&read(&config.cells_lef)?, &tech)?.masters;
    let lib = Library::new(Some(tech.clone()), masters.iter().cloned());
    let design = parse_def(&read(&config.def)?, &lib)?;
    Ok(FlowInput { tech, masters, design, power })
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        e @ Error::Stage { .. } => e,
        e => Error::Stage { stage: name.into(), source: Box::new(e) },
    })
}

struct Timer {
    times: BTreeMap<String, f64>,
    order: usize,
}

impl Timer {
    fn run<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let r = stage(name, f());
        self.order += 1;
        self.times.insert(format!("{:02}_{name}", self.order), t.elapsed().as_secs_f64());
        r
    }
}

/// Fails with the first geometric violation.
fn ensure_legal(design: &Design, lib: &Library) -> Result<()> {
    let v = check_legality(design, lib, CheckOptions::default())?;
    match v.first() {
        None => Ok(()),
        Some(first) => Err(Error::Infeasible(format!("{} legality violations, first: {first}", v.len()))),
    }
}

/// Mixed-size placement on one die: global placement of everything, macro
/// legalization, cell re-placement around the fixed macros, legalization.
pub fn place_2d(design: &mut Design, lib: &Library, params: &PlacerParams) -> Result<()> {
    let n = design.components.len();
    let all: Vec<usize> = (0..n).collect();
    global_place(design, lib, &all, params)?;
    let macros: Vec<usize> = (0..n).filter(|&i| design.is_macro(lib, i)).collect();
    legalize_macros(design, lib, Die::Bottom, &macros)?;
    let cells: Vec<usize> = (0..n).filter(|&i| !design.is_macro(lib, i)).collect();
    global_place(design, lib, &cells, &PlacerParams { seed: params.seed.wrapping_add(1), ..params.clone() })?;
    legalize(design, lib, Die::Bottom)?;
    Ok(())
}

/// Runs a complete flow in memory.
pub fn run_flow(config: &FlowConfig) -> Result<FlowOutput> {
    let input = stage("load", load_inputs(config))?;
    run_flow_on(config, input)
}

/// Runs a complete flow on already loaded inputs.
pub fn run_flow_on(config: &FlowConfig, input: FlowInput) -> Result<FlowOutput> {
    let FlowInput { tech, masters, mut design, power } = input;
    let kind = config.flow;
    let mut timer = Timer { times: BTreeMap::new(), order: 0 };
    let mut files = BTreeMap::new();
    let mut warnings = Vec::new();
    let placer = PlacerParams { seed: config.seed, ..config.placer.clone() };
    let lib2d = Library::new(Some(tech.clone()), masters.iter().cloned());
    design.stacked = false;
    for c in design.components.iter_mut() {
        c.status = if c.status == Status::Fixed { Status::Fixed } else { Status::Unplaced };
    }
    if design.name.is_empty() {
        design.name = "top".into();
    }

    let spec = timer.run("floorplan", || {
        let area = design.component_area_um2(&lib2d)?;
        let spec = size_die(area, kind.is_3d(), config.utilization, config.aspect, lib2d.site())?;
        design.die = spec.die;
        Ok(spec)
    })?;
    warnings.extend(timer.run("io", || Ok(place_io(&spec, &mut design, config.seed)))?);
    files.insert("stages/floorplan.def".into(), write_def(&design, DefMode::Combined));

    let lib = if kind.is_3d() {
        let lib3d = timer.run("pdk3d", || {
            let tech3d = mirror_metal_stack(&tech, &config.pdk3d)?;
            let split = split_library(&masters, &tech3d, &config.pdk3d)?;
            files.insert("tech3d.lef".into(), write_lef(Some(&tech3d), &[]));
            files.insert("cells3d.lef".into(), write_lef(None, &split));
            let mut lib = Library::new(Some(tech3d), split);
            for m in &masters {
                lib.insert(m.clone());
            }
            Ok(lib)
        })?;
        let params = PartitionParams { seed: config.seed, ..config.partition };
        let assignment = timer.run("partition", || {
            let a = partition_memory_on_logic(&design, &lib3d, &params)?;
            apply_partition(&mut design, &lib3d, &a)?;
            Ok(a)
        })?;
        files.insert("partition.json".into(), serde_json::to_string_pretty(&PartitionFile::from(&assignment))? + "\n");
        files.insert("stages/partition.def".into(), write_def(&design, DefMode::Combined));
        match kind {
            FlowKind::Flow3dTiling => {
                timer.run("place_tiling", || run_tiling(&mut design, &lib3d, &config.tiling, &placer))?;
            }
            _ => {
                timer.run("place_dmp", || run_dmp(&mut design, &lib3d, &placer))?;
            }
        }
        warnings.extend(timer.run("io_tiers", || Ok(assign_io_tiers(&mut design, &lib3d)))?);
        lib3d
    } else {
        timer.run("place_2d", || place_2d(&mut design, &lib2d, &placer))?;
        lib2d
    };
    timer.run("check", || ensure_legal(&design, &lib))?;

    let mut report = timer.run("metrics", || {
        evaluate(&design, &lib, kind.as_str(), config.metrics_grid, config.placer.target_density, power.as_ref())
    })?;
    let thermal = timer.run("thermal", || analyze(&design, &lib, power.as_ref(), &config.thermal))?;
    report.t_max_c = Some(thermal.t_max_c);
    report.null_reasons.remove("t_max_c");

    files.insert("report.json".into(), report.to_json());
    files.insert("thermal.json".into(), thermal.to_json());
    files.insert("thermal.svg".into(), svg::render_thermal(&thermal));
    files.insert("layout.svg".into(), timer.run("render", || svg::render_layout(&design, &lib))?);
    files.insert("design.def".into(), write_def(&design, DefMode::Combined));
    if design.stacked {
        files.insert("design_top.def".into(), write_def(&design, DefMode::TopOnly));
        files.insert("design_bottom.def".into(), write_def(&design, DefMode::BottomOnly));
    }
    Ok(FlowOutput { report, files, timing: timer.times, design, library: lib, warnings })
}

/// Library for re-reading a flow's DEF output.
pub fn library_with_variants(tech: &Technology, masters: &[CellMaster], config: &Pdk3dConfig) -> Result<Library> {
    if masters.iter().any(|m| m.variant != Variant::Base) || tech.is_3d() {
        return Ok(Library::new(Some(tech.clone()), masters.iter().cloned()));
    }
    let tech3d = mirror_metal_stack(tech, config)?;
    let split = split_library(masters, &tech3d, config)?;
    let mut lib = Library::new(Some(tech3d), split);
    for m in masters {
        lib.insert(m.clone());
    }
    Ok(lib)
}
