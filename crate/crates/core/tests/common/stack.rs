//! Floorplanned, partitioned stacked designs built from generator output.

use open3d_flow::design::Design;
use open3d_flow::flow::{library_with_variants, place_io, size_die};
use open3d_flow::gen::{generate, GenParams, Preset};
use open3d_flow::partition::{apply_partition, partition_memory_on_logic, PartitionAssignment, PartitionParams};
use open3d_flow::pdk3d::Pdk3dConfig;
use open3d_flow::tech::Library;

pub fn small_params(seed: u64, cells: usize, macros: usize) -> GenParams {
    GenParams { name: format!("g{seed}"), cells, macros, ports: 16, ..GenParams::preset(Preset::Small, seed) }
}

/// Die-sized 2D design and its 2D plus 3D library.
pub fn floorplanned(params: &GenParams, three_d: bool) -> (Design, Library) {
    let g = generate(params).unwrap();
    let lib = library_with_variants(&g.tech, &g.masters, &Pdk3dConfig::default()).unwrap();
    let mut d = g.design;
    let spec = size_die(d.component_area_um2(&lib).unwrap(), three_d, 0.5, 1.0, lib.site()).unwrap();
    d.die = spec.die;
    place_io(&spec, &mut d, params.seed);
    (d, lib)
}

/// Partitioned stack; `bits` overrides the search when given.
pub fn stacked(params: &GenParams, bits: Option<Vec<bool>>) -> (Design, Library, PartitionAssignment) {
    let (mut d, lib) = floorplanned(params, true);
    let pp = PartitionParams { seed: params.seed, ..Default::default() };
    let mut a = partition_memory_on_logic(&d, &lib, &pp).unwrap();
    if let Some(b) = bits {
        a.macro_bits = b;
    }
    apply_partition(&mut d, &lib, &a).unwrap();
    (d, lib, a)
}
