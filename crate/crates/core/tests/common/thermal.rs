//! Dense Gaussian-elimination oracle for the thermal network.

use super::rng;
use open3d_flow::geom::Rect;
use open3d_flow::thermal::ThermalNetwork;
use rand::Rng;

pub fn mm_die() -> Rect {
    Rect::new(0, 0, 1_000_000, 1_000_000)
}

/// Node temperatures above ambient by partial-pivot elimination on the
/// assembled conductance matrix.
pub fn gauss_solve(net: &ThermalNetwork) -> Vec<f64> {
    let n = net.len();
    let mut a = vec![vec![0.0; n + 1]; n];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = net.sink[i];
        row[n] = net.power[i];
    }
    for &(i, j, g) in &net.edges {
        a[i][i] += g;
        a[j][j] += g;
        a[i][j] -= g;
        a[j][i] -= g;
    }
    for k in 0..n {
        let p = (k..n).max_by(|&x, &y| a[x][k].abs().total_cmp(&a[y][k].abs())).unwrap();
        a.swap(k, p);
        let (top, rest) = a.split_at_mut(k + 1);
        let pivot = &top[k];
        for row in rest.iter_mut() {
            let f = row[k] / pivot[k];
            if f != 0.0 {
                for c in k..=n {
                    row[c] -= f * pivot[c];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|c| a[k][c] * x[c]).sum();
        x[k] = (a[k][n] - s) / a[k][k];
    }
    x
}

/// Sparse random power map: about a quarter of the nodes draw up to 0.2 W.
pub fn random_power(seed: u64, nodes: usize) -> Vec<f64> {
    let mut r = rng(seed);
    (0..nodes).map(|_| if r.gen_bool(0.25) { r.gen_range(0.0..0.2) } else { 0.0 }).collect()
}
