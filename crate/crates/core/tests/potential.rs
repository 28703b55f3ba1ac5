mod common;

use std::sync::Arc;

use interlacement::lattice::{CompactSet, LatticePoint};
use interlacement::potential::{
    capacity, harmonic_measure_from_infinity, solve_escape_field, solve_window, sweep_check, SolverParams,
};
use interlacement::seed::SeedScheme;
use interlacement::walk::PolicyParams;

fn params(radius: u32) -> SolverParams {
    SolverParams { radius, ..SolverParams::default() }
}

fn set(points: &[[i32; 3]]) -> Arc<CompactSet> {
    Arc::new(CompactSet::from_points(3, points.iter().map(|p| LatticePoint::new(p))).unwrap())
}

#[test]
fn field_matches_dense_solve_on_small_domains() {
    let cases: [&[[i32; 3]]; 3] = [&[[0, 0, 0]], &[[0, 0, 0], [1, 0, 0]], &[[0, 0, 0], [1, 1, 0], [-1, 0, 2]]];
    for k in cases {
        let target = set(k);
        let field = solve_escape_field(&target, &params(6)).unwrap();
        let kv: Vec<Vec<i32>> = k.iter().map(|p| p.to_vec()).collect();
        let dense = common::dense_field(3, &kv, 6);
        let mut worst = 0.0f64;
        for (p, h) in &dense {
            worst = worst.max((field.value(&LatticePoint::new(p)) - h).abs());
        }
        assert!(worst < 1e-6, "{k:?}: max deviation {worst}");
        let e = common::dense_equilibrium(3, &kv, 6);
        let sol = solve_window(&target, &params(6)).unwrap();
        let cap_r = sol.capacity.cap_r;
        assert!((cap_r - e.iter().sum::<f64>()).abs() < 1e-6);
    }
}

#[test]
fn field_symmetry_and_boundary() {
    let field = solve_escape_field(&set(&[[0, 0, 0]]), &params(8)).unwrap();
    let h = |c: [i32; 3]| field.value(&LatticePoint::new(&c));
    for c in [[1, 2, 3], [4, 0, 1], [2, 2, 5]] {
        let v = h(c);
        for perm in [[c[1], c[0], c[2]], [c[2], c[1], c[0]], [-c[0], -c[1], -c[2]], [c[0], -c[2], c[1]]] {
            assert!((h(perm) - v).abs() < 1e-7, "{c:?} vs {perm:?}");
        }
    }
    assert_eq!(h([9, 0, 0]), 1.0);
    assert_eq!(h([0, 0, 0]), 0.0);
    assert!(h([8, 0, 0]) < 1.0 && h([8, 0, 0]) > h([1, 0, 0]));
}

#[test]
fn field_decreases_with_radius() {
    let k = set(&[[0, 0, 0]]);
    let small = solve_escape_field(&k, &params(8)).unwrap();
    let large = solve_escape_field(&k, &params(16)).unwrap();
    for c in [[1, 0, 0], [2, 1, 0], [3, 3, 3], [5, 0, 2]] {
        let p = LatticePoint::new(&c);
        let (a, b) = (small.value(&p), large.value(&p));
        assert!(b <= a + 1e-9, "{c:?}: h_2R = {b} > h_R = {a}");
        assert!(a - b < 1.0 / 8.0, "{c:?}: gap {} is not O(1/R)", a - b);
    }
}

#[test]
fn equilibrium_measure_examples() {
    // the domain ball is centered at 0, so the swap symmetry only holds as R grows
    let gap = |r| {
        let w = solve_window(&set(&[[0, 0, 0], [1, 0, 0]]), &params(r)).unwrap().measure.weights;
        (w[0] - w[1]).abs() / w[0]
    };
    let (g10, g20) = (gap(10), gap(20));
    assert!(g10 < 1e-3 && g20 < 0.5 * g10, "{g10} {g20}");

    let cube = Arc::new(CompactSet::cube(3, -1, 1));
    let sol = solve_window(&cube, &params(10)).unwrap();
    assert_eq!(sol.measure.weight(&LatticePoint::origin(3)), 0.0);
    for p in cube.points() {
        let w = sol.measure.weight(p);
        assert!(w >= 0.0);
        if p.coords().iter().any(|&c| c == 0) && p.squared_norm() == 1 {
            assert!(w > 0.0);
        }
    }
}

#[test]
fn capacity_is_monotone_and_subadditive() {
    let p = params(12);
    assert_eq!(capacity(&CompactSet::empty(3), &p).unwrap().cap_extrapolated, 0.0);
    let small = CompactSet::cube(3, 0, 1);
    let big = CompactSet::cube(3, -1, 2);
    let c_small = capacity(&small, &p).unwrap().cap_extrapolated;
    let c_big = capacity(&big, &p).unwrap().cap_extrapolated;
    assert!(c_small <= c_big, "{c_small} > {c_big}");
    let a = CompactSet::from_points(3, [LatticePoint::new(&[0, 0, 0])]).unwrap();
    let b = CompactSet::from_points(3, [LatticePoint::new(&[3, 0, 0])]).unwrap();
    let ab = a.union(&b).unwrap();
    let ca = capacity(&a, &p).unwrap().cap_extrapolated;
    let cab = capacity(&ab, &p).unwrap().cap_extrapolated;
    assert!(cab <= 2.0 * ca + 1e-9 && cab >= ca);
}

#[test]
fn origin_capacity_agrees_with_the_dense_oracle() {
    let dense_12 = common::dense_origin_capacity(3, 12);
    let dense_24 = common::dense_origin_capacity(3, 24);
    let oracle = common::richardson(3, dense_12, dense_24);
    assert!((oracle - common::CAP_ORIGIN_3D).abs() < 2e-3 * common::CAP_ORIGIN_3D, "{oracle}");
    let report = capacity(&CompactSet::from_points(3, [LatticePoint::origin(3)]).unwrap(), &params(12)).unwrap();
    assert!((report.cap_r - dense_12).abs() < 1e-6, "{} vs {dense_12}", report.cap_r);
    assert!((report.cap_r2 - dense_24).abs() < 1e-6, "{} vs {dense_24}", report.cap_r2);
    assert!((report.cap_extrapolated - oracle).abs() < 1e-5);
}

#[test]
fn harmonic_measure_of_a_point_and_a_symmetric_set() {
    let seeds = SeedScheme::new(3);
    let origin = set(&[[0, 0, 0]]);
    let est = harmonic_measure_from_infinity(&origin, 8, 200, &seeds, &PolicyParams::default(), &params(10), 1 << 20, 1)
        .unwrap();
    assert_eq!(est.hits, vec![200]);
    assert_eq!(est.tv, 0.0);

    // the segment {-1, 0, 1} e_1 is symmetric under x1 -> -x1
    let line = set(&[[-1, 0, 0], [0, 0, 0], [1, 0, 0]]);
    let est = harmonic_measure_from_infinity(&line, 10, 20_000, &seeds, &PolicyParams::default(), &params(10), 1 << 24, 1)
        .unwrap();
    let (l, r) = (est.hits[0] as f64, est.hits[2] as f64);
    let se = (l + r).sqrt();
    assert!((l - r).abs() < 4.0 * se, "{l} vs {r}");
    assert!(est.hits[1] < est.hits[0]);
}

#[test]
fn sweep_with_equal_sets_is_exact() {
    let k = Arc::new(CompactSet::cube(3, 0, 1));
    let est = sweep_check(&k, &k, 5000, &SeedScheme::new(8), &PolicyParams::default(), &params(10), 1).unwrap();
    assert_eq!(est.hits.iter().sum::<u64>(), 5000);
    assert!((est.hit_mass - est.outer_capacity).abs() < 1e-12);
    assert_eq!(est.hit_mass_se, 0.0);
}

#[test]
fn sweep_rejects_unnested_sets() {
    let a = set(&[[0, 0, 0]]);
    let b = set(&[[1, 0, 0]]);
    assert!(sweep_check(&a, &b, 10, &SeedScheme::new(1), &PolicyParams::default(), &params(10), 1).is_err());
}
