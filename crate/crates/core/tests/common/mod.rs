//! Independent oracles shared by the integration and acceptance tests. None of
//! them call into the library's solver or walk code.

#![allow(dead_code)]

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CAP_ORIGIN_3D: f64 = 0.659463;

fn norm2(p: &[i32]) -> i64 {
    p.iter().map(|&c| c as i64 * c as i64).sum()
}

fn ball_points(dim: usize, r2: i64) -> Vec<Vec<i32>> {
    let r = (r2 as f64).sqrt().floor() as i32;
    let mut out = Vec::new();
    let mut cur = vec![-r; dim];
    loop {
        if norm2(&cur) <= r2 {
            out.push(cur.clone());
        }
        let mut i = 0;
        loop {
            if i == dim {
                return out;
            }
            if cur[i] < r {
                cur[i] += 1;
                break;
            }
            cur[i] = -r;
            i += 1;
        }
    }
}

/// Escape field `h` for an arbitrary small set `k` by dense LU: harmonic on
/// `{|x|^2 <= radius^2} \ k`, zero on `k`, one outside the ball.
pub fn dense_field(dim: usize, k: &[Vec<i32>], radius: u32) -> HashMap<Vec<i32>, f64> {
    let r2 = radius as i64 * radius as i64;
    let unknowns: Vec<Vec<i32>> = ball_points(dim, r2).into_iter().filter(|p| !k.contains(p)).collect();
    let index: HashMap<&Vec<i32>, usize> = unknowns.iter().enumerate().map(|(i, p)| (p, i)).collect();
    let n = unknowns.len();
    let mut a = DMatrix::<f64>::identity(n, n);
    let mut b = DVector::<f64>::zeros(n);
    let w = 1.0 / (2 * dim) as f64;
    for (i, p) in unknowns.iter().enumerate() {
        for axis in 0..dim {
            for s in [-1, 1] {
                let mut y = p.clone();
                y[axis] += s;
                if k.contains(&y) {
                    continue;
                }
                match index.get(&y) {
                    Some(&j) => a[(i, j)] -= w,
                    None => b[i] += w,
                }
            }
        }
    }
    let h = a.lu().solve(&b).expect("nonsingular Dirichlet problem");
    let mut field: HashMap<Vec<i32>, f64> = unknowns.into_iter().zip(h.iter().copied()).collect();
    for p in k {
        field.insert(p.clone(), 0.0);
    }
    field
}

/// `e_K(x) = (1/2d) sum over neighbors of h`, from a dense field.
pub fn dense_equilibrium(dim: usize, k: &[Vec<i32>], radius: u32) -> Vec<f64> {
    let h = dense_field(dim, k, radius);
    k.iter()
        .map(|x| {
            let mut s = 0.0;
            for axis in 0..dim {
                for d in [-1, 1] {
                    let mut y = x.clone();
                    y[axis] += d;
                    s += h.get(&y).copied().unwrap_or(1.0);
                }
            }
            s / (2 * dim) as f64
        })
        .collect()
}

fn canon(p: &[i32]) -> Vec<i32> {
    let mut c: Vec<i32> = p.iter().map(|x| x.abs()).collect();
    c.sort_unstable_by(|a, b| b.cmp(a));
    c
}

/// `cap_R({0})` in dimension `dim` by dense LU on the system reduced by the
/// hyperoctahedral symmetry (one unknown per orbit of sorted absolute coordinates).
pub fn dense_origin_capacity(dim: usize, radius: u32) -> f64 {
    let r2 = radius as i64 * radius as i64;
    let mut reps: Vec<Vec<i32>> = ball_points(dim, r2)
        .into_iter()
        .filter(|p| norm2(p) > 0 && *p == canon(p))
        .collect();
    reps.sort();
    let index: HashMap<&Vec<i32>, usize> = reps.iter().enumerate().map(|(i, p)| (p, i)).collect();
    let n = reps.len();
    let mut a = DMatrix::<f64>::identity(n, n);
    let mut b = DVector::<f64>::zeros(n);
    let w = 1.0 / (2 * dim) as f64;
    for (i, p) in reps.iter().enumerate() {
        for axis in 0..dim {
            for s in [-1, 1] {
                let mut y = p.clone();
                y[axis] += s;
                let c = canon(&y);
                if norm2(&c) == 0 {
                    continue;
                }
                match index.get(&c) {
                    Some(&j) => a[(i, j)] -= w,
                    None => b[i] += w,
                }
            }
        }
    }
    let h = a.lu().solve(&b).expect("nonsingular Dirichlet problem");
    let mut e1 = vec![0; dim];
    e1[0] = 1;
    h[index[&e1]]
}

/// Extrapolation of `1/cap_R = 1/cap - c R^(2-d)` from `R` and `2R`.
pub fn richardson(dim: usize, cap_r: f64, cap_2r: f64) -> f64 {
    let w = 2f64.powi(dim as i32 - 2);
    (w - 1.0) / (w / cap_2r - 1.0 / cap_r)
}

/// `a_d` in `G(x) ~ a_d |x|^{2-d}`.
pub fn green_constant(dim: usize) -> f64 {
    let d = dim as f64;
    0.5 * d * statrs::function::gamma::gamma(0.5 * d - 1.0) * std::f64::consts::PI.powf(-0.5 * d)
}

pub struct ReturnEstimate {
    pub escape_fraction: f64,
    pub escape_se: f64,
    pub capacity: f64,
    pub capacity_se: f64,
    pub walks: u64,
}

/// Walks from the origin until they return or reach `|x| >= kill_radius`.
/// The escape fraction `E` is corrected for returns from beyond the kill
/// sphere by solving `cap = E (1 - cap a_d R^{2-d})`.
pub fn mc_origin_capacity(dim: usize, kill_radius: u32, walks: u64, seed: u64) -> ReturnEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kill2 = kill_radius as i64 * kill_radius as i64;
    let mut escaped = 0u64;
    for _ in 0..walks {
        let mut p = vec![0i32; dim];
        loop {
            let dir = rng.random_range(0..2 * dim);
            p[dir / 2] += if dir % 2 == 0 { 1 } else { -1 };
            let n2 = norm2(&p);
            if n2 == 0 {
                break;
            }
            if n2 >= kill2 {
                escaped += 1;
                break;
            }
        }
    }
    let e = escaped as f64 / walks as f64;
    let se = (e * (1.0 - e) / walks as f64).sqrt();
    let t = green_constant(dim) * (kill_radius as f64).powi(2 - dim as i32);
    let cap = e / (1.0 + e * t);
    let dcap = 1.0 / (1.0 + e * t).powi(2);
    ReturnEstimate { escape_fraction: e, escape_se: se, capacity: cap, capacity_se: se * dcap, walks }
}

/// Independent simple random walk from `start`; returns true if it visits a
/// point of `target` before reaching `|x| >= kill_radius`.
pub fn hits_before<R: Rng>(start: &[i32], target: &dyn Fn(&[i32]) -> bool, kill_radius: u32, rng: &mut R) -> bool {
    let dim = start.len();
    let kill2 = kill_radius as i64 * kill_radius as i64;
    let mut p = start.to_vec();
    if target(&p) {
        return true;
    }
    loop {
        let dir = rng.random_range(0..2 * dim);
        p[dir / 2] += if dir % 2 == 0 { 1 } else { -1 };
        if target(&p) {
            return true;
        }
        if norm2(&p) >= kill2 {
            return false;
        }
    }
}

pub fn print_line(pass: bool, name: &str, detail: &str) {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}
