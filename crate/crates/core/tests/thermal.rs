mod common;

use common::thermal::{gauss_solve, mm_die, random_power};
use open3d_flow::design::{Component, Design, Die, Status};
use open3d_flow::gen::macro_master;
use open3d_flow::geom::Rect;
use open3d_flow::tech::Library;
use open3d_flow::thermal::{aggregate_power, solve_steady, ThermalNetwork, ThermalParams};
use rand::seq::SliceRandom;
use rand::Rng;
use std::time::Instant;

const AMBIENT: f64 = 45.0;

fn network(grid_n: usize, power: &[f64]) -> ThermalNetwork {
    ThermalNetwork::build(mm_die(), &ThermalParams { grid_n, ..Default::default() }, power).unwrap()
}

fn theta(net: &ThermalNetwork) -> Vec<f64> {
    solve_steady(net, AMBIENT).unwrap().planes.concat().iter().map(|t| t - AMBIENT).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn reference_geometry_has_unit_resistances() {
    let p = ThermalParams::default();
    let net = network(10, &[0.0; 200]);
    assert_eq!(net.edges.len(), 2 * 2 * 10 * 9 + 100);
    for &(a, b, g) in &net.edges {
        let expect = if b == a + 100 { 1.0 / p.r_vertical } else { 1.0 / p.r_lateral };
        assert!((g - expect).abs() <= 1e-12 * expect, "{a}-{b}: {g}");
    }
    assert!(net.sink[..100].iter().all(|&s| (s - 1.0 / p.r_sink).abs() <= 1e-12));
    assert!(net.sink[100..].iter().all(|&s| s == 0.0));
}

#[test]
fn direct_and_iterative_agree_with_elimination() {
    for (grid, seeds) in [(10, 0..10u64), (23, 10..13)] {
        for seed in seeds {
            let net = network(grid, &random_power(seed, 2 * grid * grid));
            let r = solve_steady(&net, AMBIENT).unwrap();
            let got: Vec<f64> = r.planes.concat().iter().map(|t| t - AMBIENT).collect();
            let want = gauss_solve(&net);
            assert!(max_diff(&got, &want) <= 1e-7, "grid {grid} seed {seed}");
            let pmax = net.power.iter().fold(1.0f64, |m, &p| m.max(p));
            assert!(r.residual <= 1e-9 * pmax);
            assert!(net.residual(&got) <= 1e-9 * pmax);
        }
    }
}

#[test]
fn heat_out_balances_power_in() {
    for (grid, seed) in [(10, 1), (10, 2), (23, 3)] {
        let mut p = ThermalParams { grid_n: grid, ..Default::default() };
        for top_sink in [None, Some(5.0)] {
            p.r_sink_top = top_sink;
            let power = random_power(seed, 2 * grid * grid);
            let total: f64 = power.iter().sum();
            let net = ThermalNetwork::build(mm_die(), &p, &power).unwrap();
            let r = solve_steady(&net, AMBIENT).unwrap();
            assert!((r.heat_out_w - total).abs() <= 1e-6 * total, "grid {grid}: {} vs {total}", r.heat_out_w);
        }
    }
}

#[test]
fn zero_power_is_exactly_ambient() {
    for grid in [1, 10, 23] {
        for planes in [1, 2] {
            let r = solve_steady(&network(grid, &vec![0.0; planes * grid * grid]), AMBIENT).unwrap();
            assert!(r.planes.iter().flatten().all(|&t| t == AMBIENT));
            assert_eq!(r.t_max_c, AMBIENT);
            assert_eq!(r.heat_out_w, 0.0);
        }
    }
}

#[test]
fn quarter_turn_rotates_the_field() {
    let n = 10;
    let nn = n * n;
    // (i, j) -> (n - 1 - j, i)
    let turn = |k: usize| {
        let (p, j, i) = (k / nn, k % nn / n, k % n);
        p * nn + i * n + (n - 1 - j)
    };
    for seed in 0..5 {
        let power = random_power(seed, 2 * nn);
        let mut turned = vec![0.0; 2 * nn];
        for (k, &w) in power.iter().enumerate() {
            turned[turn(k)] = w;
        }
        let (a, b) = (theta(&network(n, &power)), theta(&network(n, &turned)));
        for k in 0..2 * nn {
            assert!((a[k] - b[turn(k)]).abs() <= 1e-9, "seed {seed} node {k}");
        }
    }
}

#[test]
fn adding_power_never_cools_a_node() {
    let n = 10;
    let mut r = common::rng(44);
    let mut power = random_power(4, 2 * n * n);
    let mut before = theta(&network(n, &power));
    for _ in 0..20 {
        power[r.gen_range(0..2 * n * n)] += r.gen_range(0.001..0.1);
        let after = theta(&network(n, &power));
        assert!(after.iter().zip(&before).all(|(a, b)| *a >= *b - 1e-12));
        before = after;
    }
}

fn permuted(net: &ThermalNetwork, perm: &[usize]) -> ThermalNetwork {
    let mut out = net.clone();
    for (old, &new) in perm.iter().enumerate() {
        out.power[new] = net.power[old];
        out.sink[new] = net.sink[old];
    }
    out.edges = net.edges.iter().map(|&(a, b, g)| (perm[a].min(perm[b]), perm[a].max(perm[b]), g)).collect();
    out
}

#[test]
fn relabelling_nodes_permutes_the_solution() {
    for (grid, seed) in [(10, 7), (23, 8)] {
        let net = network(grid, &random_power(seed, 2 * grid * grid));
        let mut perm: Vec<usize> = (0..net.len()).collect();
        perm.shuffle(&mut common::rng(seed));
        let base = theta(&net);
        let other = solve_steady(&permuted(&net, &perm), AMBIENT).unwrap();
        let flat = other.planes.concat();
        for (old, &new) in perm.iter().enumerate() {
            assert!((base[old] - (flat[new] - AMBIENT)).abs() <= 1e-7, "grid {grid} node {old}");
        }
    }
}

#[test]
fn stiff_bond_approaches_a_merged_plane() {
    let n = 10;
    let power = random_power(9, 2 * n * n);
    let merged = theta(&ThermalNetwork::build(mm_die(), &ThermalParams { r_vertical: 0.0, ..Default::default() }, &power).unwrap());
    assert_eq!(merged.len(), n * n);
    let stiff = theta(&ThermalNetwork::build(mm_die(), &ThermalParams { r_vertical: 1e-7, ..Default::default() }, &power).unwrap());
    let scale = merged.iter().fold(0.0f64, |m, &t| m.max(t));
    assert!(max_diff(&stiff[..n * n], &merged) <= 1e-5 * scale);
    assert!(max_diff(&stiff[n * n..], &merged) <= 1e-5 * scale);
}

fn block_design(rects: &[(Rect, Die)], stacked: bool) -> (Design, Library) {
    let mut lib = Library::new(None, []);
    let mut d = Design { die: Rect::new(0, 0, 100_000, 80_000), stacked, ..Default::default() };
    for (k, (r, die)) in rects.iter().enumerate() {
        let name = format!("B{k}");
        lib.insert(macro_master(&name, r.width(), r.height(), 1));
        let mut c = Component::new(format!("b{k}"), name);
        (c.x, c.y, c.status, c.die) = (r.lx, r.ly, Status::Placed, *die);
        d.components.push(c);
    }
    (d, lib)
}

#[test]
fn power_splits_by_overlap_area() {
    let mut r = common::rng(12);
    for _ in 0..20 {
        let grid = r.gen_range(1..12usize);
        let rects: Vec<(Rect, Die)> = (0..6)
            .map(|_| {
                let (w, h) = (r.gen_range(1..60_000), r.gen_range(1..50_000));
                let die = if r.gen_bool(0.5) { Die::Top } else { Die::Bottom };
                (Rect::from_size(r.gen_range(0..=100_000 - w), r.gen_range(0..=80_000 - h), w, h), die)
            })
            .collect();
        let watts: Vec<f64> = (0..6).map(|_| r.gen_range(0.0..2.0)).collect();
        let (d, lib) = block_design(&rects, true);
        let got = aggregate_power(&d, &lib, &watts, grid, 3.0).unwrap();
        let mut want = vec![0.0; 2 * grid * grid];
        for ((rect, die), w) in rects.iter().zip(&watts) {
            let plane = if *die == Die::Top { 1 } else { 0 };
            for j in 0..grid {
                for i in 0..grid {
                    // bin edges in exact rational DBU: k * extent / grid
                    let ov = |lo: i64, hi: i64, k: usize, ext: i64| {
                        let (a, b) = (k as f64 * ext as f64 / grid as f64, (k + 1) as f64 * ext as f64 / grid as f64);
                        (hi as f64).min(b) - (lo as f64).max(a)
                    };
                    let (ox, oy) = (ov(rect.lx, rect.ux, i, 100_000).max(0.0), ov(rect.ly, rect.uy, j, 80_000).max(0.0));
                    want[plane * grid * grid + j * grid + i] += 3.0 * w * ox * oy / (rect.width() as f64 * rect.height() as f64);
                }
            }
        }
        assert!(max_diff(&got, &want) <= 1e-12);
        let total: f64 = watts.iter().sum::<f64>() * 3.0;
        assert!((got.iter().sum::<f64>() - total).abs() <= 1e-12 * total.max(1.0));
    }
}

#[test]
fn tenth_of_a_watt_scaled_tenfold_is_one_watt() {
    let (d, lib) = block_design(&[(Rect::from_size(5_000, 5_000, 33_000, 21_000), Die::Bottom)], false);
    let p = aggregate_power(&d, &lib, &[0.1], 10, 10.0).unwrap();
    assert_eq!(p.len(), 100);
    assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
}

#[test]
fn unplaced_powered_component_is_rejected() {
    let (mut d, lib) = block_design(&[(Rect::from_size(0, 0, 10_000, 10_000), Die::Bottom)], false);
    d.components[0].status = Status::Unplaced;
    assert!(aggregate_power(&d, &lib, &[0.0], 4, 1.0).is_ok());
    assert!(matches!(aggregate_power(&d, &lib, &[1.0], 4, 1.0), Err(open3d_flow::Error::UnplacedComponent(_))));
}

#[test]
fn bad_parameters_are_rejected() {
    for p in [
        ThermalParams { grid_n: 0, ..Default::default() },
        ThermalParams { r_lateral: 0.0, ..Default::default() },
        ThermalParams { r_sink: -1.0, ..Default::default() },
        ThermalParams { r_vertical: -0.1, ..Default::default() },
        ThermalParams { r_sink_top: Some(0.0), ..Default::default() },
        ThermalParams { power_scale: f64::NAN, ..Default::default() },
    ] {
        assert!(ThermalNetwork::build(mm_die(), &p, &[0.0; 200]).is_err(), "{p:?}");
    }
    assert!(ThermalNetwork::build(mm_die(), &ThermalParams::default(), &[0.0; 150]).is_err());
}

#[test]
fn ten_by_ten_by_two_solves_quickly() {
    let net = network(10, &random_power(5, 200));
    let t = Instant::now();
    solve_steady(&net, AMBIENT).unwrap();
    assert!(t.elapsed().as_secs_f64() < 5.0);
}
