//! `open3d`: command-line front end of the 3D backend flow.

use clap::{Args, Parser, Subcommand, ValueEnum};
use open3d_flow::def::{read_def, write_def, DefMode};
use open3d_flow::design::Design;
use open3d_flow::flow::{ensure_floorplan, library_with_variants, run_flow, FlowConfig};
use open3d_flow::gen::{generate, GenParams, Preset};
use open3d_flow::lef::{parse_lef, parse_lef_with_tech, write_lef};
use open3d_flow::metrics::{evaluate, PowerMap};
use open3d_flow::partition::{apply_partition, partition_memory_on_logic, PartitionFile, PartitionParams};
use open3d_flow::pdk3d::{mirror_metal_stack, split_library, Pdk3dConfig};
use open3d_flow::placer::{run_dmp_observed, PlacerParams};
use open3d_flow::svg::render_thermal;
use open3d_flow::tech::{CellMaster, Library, Technology};
use open3d_flow::thermal::{analyze, ThermalParams};
use open3d_flow::tiling::{run_tiling_observed, TilingParams};
use open3d_flow::{Error, Warning};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "open3d", version, about = "Desk-scale open 3D-IC backend flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mirror a 2D technology into a face-to-face stack and split the cells.
    Pdk3d {
        #[arg(long, visible_alias = "tech")]
        tech_lef: PathBuf,
        #[arg(long, visible_alias = "lib")]
        cells_lef: PathBuf,
        /// JSON file with 3D PDK parameters.
        #[arg(long)]
        config: Option<PathBuf>,
        /// HBT cut edge, um.
        #[arg(long)]
        hbt_size: Option<f64>,
        /// HBT pitch, um.
        #[arg(long)]
        hbt_pitch: Option<f64>,
        #[arg(long, visible_alias = "out-dir")]
        out: PathBuf,
    },
    /// Memory-on-logic tier partition of a 2D netlist.
    Partition {
        #[command(flatten)]
        input: Inputs,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// JSON file with partition parameters.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Cut weight; the utilization weight is `1 - w_cut`.
        #[arg(long)]
        w_cut: Option<f64>,
        #[arg(long)]
        iters: Option<usize>,
        #[command(flatten)]
        floorplan: FloorplanArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pseudo-3D placement of a partitioned design.
    Place {
        #[arg(value_enum)]
        method: PlaceMethod,
        #[command(flatten)]
        input: Inputs,
        /// Partition to apply when the DEF is still 2D.
        #[arg(long)]
        partition: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// JSON file with placer parameters.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Tiling height target as a fraction of the die height.
        #[arg(long)]
        target: Option<f64>,
        /// Write a DEF snapshot every N global-placement iterations.
        #[arg(long, value_name = "N")]
        dump_iters: Option<usize>,
        #[command(flatten)]
        floorplan: FloorplanArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Metrics report for a placed design.
    Eval {
        #[command(flatten)]
        input: Inputs,
        #[arg(long)]
        power: Option<PathBuf>,
        #[arg(long, default_value_t = 32)]
        grid: usize,
        #[arg(long, default_value_t = 0.8)]
        target_density: f64,
        /// Report path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Steady-state thermal analysis of a placed design.
    Thermal {
        #[command(flatten)]
        input: Inputs,
        #[arg(long)]
        power: Option<PathBuf>,
        /// JSON file with thermal parameters.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Grid cells per die side.
        #[arg(long)]
        grid: Option<usize>,
        /// Power multiplier.
        #[arg(long)]
        scale: Option<f64>,
        /// Output directory for thermal.json and thermal.svg.
        #[arg(long)]
        out: PathBuf,
    },
    /// End-to-end flows.
    Flow {
        #[command(subcommand)]
        command: FlowCommand,
    },
    /// Synthetic design generator.
    Gen {
        #[arg(long, default_value = "small")]
        preset: Preset,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum FlowCommand {
    /// Run the flow described by a JSON config.
    Run {
        config: PathBuf,
        /// Output directory; defaults to `out/` next to the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PlaceMethod {
    Tiling,
    Dmp,
}

#[derive(Args)]
struct Inputs {
    #[arg(long, visible_alias = "tech")]
    tech_lef: PathBuf,
    #[arg(long, visible_alias = "lib")]
    cells_lef: PathBuf,
    #[arg(long)]
    def: PathBuf,
    /// JSON file with 3D PDK parameters used to rebuild tier variants.
    #[arg(long)]
    pdk3d: Option<PathBuf>,
}

#[derive(Args)]
struct FloorplanArgs {
    /// Used only when the DEF has no die area.
    #[arg(long, default_value_t = 0.5)]
    utilization: f64,
    #[arg(long, default_value_t = 1.0)]
    aspect: f64,
}

type CliResult<T> = Result<T, Error>;

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| Error::InvalidParam(format!("cannot read `{}`: {e}", path.display())))
}

fn write(path: &Path, content: &str) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, content)?;
    Ok(())
}

fn json_or_default<T: serde::de::DeserializeOwned + Default>(path: &Option<PathBuf>) -> CliResult<T> {
    match path {
        Some(p) => Ok(serde_json::from_str(&read(p)?)?),
        None => Ok(T::default()),
    }
}

fn report_warnings(warnings: &[Warning]) {
    for w in warnings {
        if w.line > 0 {
            log::warn!("line {}: {}", w.line, w.message);
        } else {
            log::warn!("{}", w.message);
        }
    }
}

fn load_lefs(tech_lef: &Path, cells_lef: &Path) -> CliResult<(Technology, Vec<CellMaster>)> {
    let t = parse_lef(&read(tech_lef)?)?;
    report_warnings(&t.warnings);
    let tech = t.technology.ok_or_else(|| Error::InvalidTechnology("technology LEF declares no layers".into()))?;
    let cells = parse_lef_with_tech(&read(cells_lef)?, &tech)?;
    report_warnings(&cells.warnings);
    Ok((tech, cells.masters))
}

/// Loads LEFs and DEF; the library also holds every tier variant so both
/// 2D and partitioned DEFs resolve.
fn load(input: &Inputs) -> CliResult<(Library, Design)> {
    let (tech, masters) = load_lefs(&input.tech_lef, &input.cells_lef)?;
    let pdk: Pdk3dConfig = json_or_default(&input.pdk3d)?;
    let lib = library_with_variants(&tech, &masters, &pdk)?;
    let (design, warnings) = read_def(&read(&input.def)?, &lib)?;
    report_warnings(&warnings);
    Ok((lib, design))
}

fn load_power(path: &Option<PathBuf>) -> CliResult<Option<PowerMap>> {
    path.as_ref().map(|p| Ok(serde_json::from_str(&read(p)?)?)).transpose()
}

fn write_design_defs(out: &Path, design: &Design) -> CliResult<()> {
    write(&out.join("design.def"), &write_def(design, DefMode::Combined))?;
    if design.stacked {
        write(&out.join("design_top.def"), &write_def(design, DefMode::TopOnly))?;
        write(&out.join("design_bottom.def"), &write_def(design, DefMode::BottomOnly))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Pdk3d { tech_lef, cells_lef, config, hbt_size, hbt_pitch, out } => {
            let (tech, masters) = load_lefs(&tech_lef, &cells_lef)?;
            let mut cfg: Pdk3dConfig = json_or_default(&config)?;
            if let Some(v) = hbt_size {
                cfg.hbt_size = v;
            }
            if let Some(v) = hbt_pitch {
                cfg.hbt_pitch = v;
            }
            cfg.validate()?;
            let tech3d = mirror_metal_stack(&tech, &cfg)?;
            let split = split_library(&masters, &tech3d, &cfg)?;
            write(&out.join("tech3d.lef"), &write_lef(Some(&tech3d), &[]))?;
            write(&out.join("cells3d.lef"), &write_lef(None, &split))?;
            println!("{} layers, {} masters", tech3d.layers.len(), split.len());
        }
        Command::Partition { input, seed, params, w_cut, iters, floorplan, out } => {
            let (lib, mut design) = load(&input)?;
            report_warnings(&ensure_floorplan(&mut design, &lib, true, floorplan.utilization, floorplan.aspect, seed)?);
            let mut params = PartitionParams { seed, ..json_or_default(&params)? };
            if let Some(w) = w_cut {
                params.w_cut = w;
                params.w_util = 1.0 - w;
            }
            if let Some(n) = iters {
                params.iterations = n;
            }
            let a = partition_memory_on_logic(&design, &lib, &params)?;
            apply_partition(&mut design, &lib, &a)?;
            write(&out.join("partition.json"), &(serde_json::to_string_pretty(&PartitionFile::from(&a))? + "\n"))?;
            write_design_defs(&out, &design)?;
            println!("cut {} fitness {:.6}", a.cut_nets, a.fitness);
        }
        Command::Place { method, input, partition, seed, params, target, dump_iters, floorplan, out } => {
            let (lib, mut design) = load(&input)?;
            report_warnings(&ensure_floorplan(&mut design, &lib, true, floorplan.utilization, floorplan.aspect, seed)?);
            if !design.stacked {
                let path = partition.ok_or_else(|| Error::InvalidParam("2D DEF needs --partition".into()))?;
                let file: PartitionFile = serde_json::from_str(&read(&path)?)?;
                let a = file.to_assignment(&design, &lib, &PartitionParams::default())?;
                apply_partition(&mut design, &lib, &a)?;
            }
            let placer = PlacerParams { seed, ..json_or_default(&params)? };
            let snap_dir = out.join("iters");
            let mut dump = |stage: &str, iter: usize, d: &Design| write(&snap_dir.join(format!("{stage}_{iter:05}.def")), &write_def(d, DefMode::Combined));
            let stats = match method {
                PlaceMethod::Dmp => {
                    let obs = dump_iters.map(|n| (n, &mut dump as &mut dyn FnMut(&str, usize, &Design) -> CliResult<()>));
                    serde_json::to_string_pretty(&run_dmp_observed(&mut design, &lib, &placer, obs)?)?
                }
                PlaceMethod::Tiling => {
                    let mut tiling = TilingParams::default();
                    if let Some(t) = target {
                        tiling.height_target = t;
                    }
                    let mut g = |iter: usize, d: &Design| dump("tiling", iter, d);
                    let obs = dump_iters.map(|n| (n, &mut g as &mut dyn FnMut(usize, &Design) -> CliResult<()>));
                    serde_json::to_string_pretty(&run_tiling_observed(&mut design, &lib, &tiling, &placer, obs)?)?
                }
            };
            open3d_flow::partition::assign_io_tiers(&mut design, &lib);
            write(&out.join("place_stats.json"), &(stats + "\n"))?;
            write_design_defs(&out, &design)?;
        }
        Command::Eval { input, power, grid, target_density, out } => {
            let (lib, design) = load(&input)?;
            let power = load_power(&power)?;
            let flow = if design.stacked { "3D" } else { "2D" };
            let report = evaluate(&design, &lib, flow, grid, target_density, power.as_ref())?.to_json();
            match out {
                Some(p) => write(&p, &report)?,
                None => print!("{report}"),
            }
        }
        Command::Thermal { input, power, params, grid, scale, out } => {
            let (lib, design) = load(&input)?;
            let power = load_power(&power)?;
            let mut params: ThermalParams = json_or_default(&params)?;
            if let Some(n) = grid {
                params.grid_n = n;
            }
            if let Some(s) = scale {
                params.power_scale = s;
            }
            let result = analyze(&design, &lib, power.as_ref(), &params)?;
            write(&out.join("thermal.json"), &result.to_json())?;
            write(&out.join("thermal.svg"), &render_thermal(&result))?;
            println!("t_max_c {:.6}", result.t_max_c);
        }
        Command::Flow { command: FlowCommand::Run { config, out } } => {
            let base = config.parent().map(Path::to_path_buf).unwrap_or_default();
            let cfg = FlowConfig::from_json(&read(&config)?, &base)?;
            let output = run_flow(&cfg)?;
            report_warnings(&output.warnings);
            let dir = out.unwrap_or_else(|| base.join("out"));
            output.write_to(&dir)?;
            println!("{}", dir.join("report.json").display());
        }
        Command::Gen { preset, seed, out } => {
            let g = generate(&GenParams::preset(preset, seed))?;
            write(&out.join("tech.lef"), &write_lef(Some(&g.tech), &[]))?;
            write(&out.join("cells.lef"), &write_lef(None, &g.masters))?;
            write(&out.join("design.def"), &write_def(&g.design, DefMode::Combined))?;
            println!("{} components, {} nets", g.design.components.len(), g.design.nets.len());
        }
    }
    Ok(())
}

/// 1 usage, 2 parse error, 3 infeasible, 4 non-convergence.
fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Syntax { .. }
        | Error::UndeclaredLayer { .. }
        | Error::NonPositiveDimension { .. }
        | Error::UnresolvedMaster { .. }
        | Error::DuplicateComponent(_)
        | Error::MalformedNet { .. }
        | Error::InvalidTechnology(_)
        | Error::Json(_) => 2,
        Error::Infeasible(_) | Error::InsufficientRowCapacity(_) => 3,
        Error::NonConvergence(_) | Error::Diverged(_) => 4,
        _ => 1,
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("OPEN3D_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("OPEN3D_THREADS must be a positive integer, got `{v}`"))?;
    if n == 0 {
        return Err("OPEN3D_THREADS must be positive".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
