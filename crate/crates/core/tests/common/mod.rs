//! Oracles shared by the integration tests. Nothing here calls the Newton
//! solver.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use shepwm::SwitchingAngleSet;

pub const GOLDEN: [(&[u32], &[f64], f64); 3] = [
    (&[3], &[37.33, 82.67], 0.01),
    (&[3, 5], &[30.45, 54.28, 67.09], 0.01),
    (&[3, 5, 7, 9], &[22.58, 33.60, 46.64, 68.50, 75.10], 0.05),
];

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Uniformly drawn, sorted, well separated angles in (0, 90°).
pub fn random_angles(rng: &mut StdRng, p: usize) -> SwitchingAngleSet {
    loop {
        let mut v: Vec<f64> = (0..p).map(|_| rng.gen_range(0.5..89.5)).collect();
        v.sort_by(f64::total_cmp);
        if v.windows(2).all(|w| w[1] - w[0] > 0.1) {
            return SwitchingAngleSet::from_degrees(&v).unwrap();
        }
    }
}

/// Exhaustive search over `0 < θ1 < θ2 < 90°` on a `resolution_deg` grid for
/// the point minimizing the Euclidean norm of the p = 2 system residual.
/// Returns `(θ1°, θ2°, residual_norm)`.
pub fn brute_force_p2(m: f64, resolution_deg: f64) -> (f64, f64, f64) {
    let steps = (90.0 / resolution_deg).round() as usize;
    let grid: Vec<f64> = (1..steps).map(|k| k as f64 * resolution_deg).collect();
    let c1: Vec<f64> = grid.iter().map(|d| d.to_radians().cos()).collect();
    let c3: Vec<f64> = grid.iter().map(|d| (3.0 * d.to_radians()).cos()).collect();
    let target = m * PI / 4.0;

    let mut best = (f64::INFINITY, 0, 0);
    for i in 0..grid.len() {
        for j in i + 1..grid.len() {
            let r1 = c1[i] - c1[j] - target;
            let r3 = c3[i] - c3[j];
            let norm = r1 * r1 + r3 * r3;
            if norm < best.0 {
                best = (norm, i, j);
            }
        }
    }
    (grid[best.1], grid[best.2], best.0.sqrt())
}

/// Whether the brute-force grid finds an ordered p = 2 point with residual
/// below `tol`.
pub fn p2_feasible(m: f64, resolution_deg: f64, tol: f64) -> bool {
    brute_force_p2(m, resolution_deg).2 < tol
}
