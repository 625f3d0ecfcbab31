use anisodiff::fields::{IslandField, IslandFieldParams};
use anisodiff::mesh::{build_circle_five_block, unit_square, MultiBlockDomain, Point};
use anisodiff::parallel::*;
use proptest::prelude::*;

fn circular() -> IslandField {
    IslandField(IslandFieldParams { delta: 0.0, r1: 0.7 })
}

fn cfg(substeps: usize) -> ParallelConfig {
    ParallelConfig { substeps, ..Default::default() }
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[test]
fn rk4_endpoint_error_is_fourth_order() {
    let f = circular();
    for p0 in [[0.5, 0.0], [0.0, -0.9]] {
        let reference = trace_point(&f, p0, 1.0, &cfg(4096)).unwrap();
        let e = |n| dist(trace_point(&f, p0, 1.0, &cfg(n)).unwrap(), reference);
        let rate = (e(64) / e(128)).log2();
        assert!((rate - 4.0).abs() < 0.2, "seed {p0:?}: rate {rate}");
    }
}

#[test]
fn circular_traces_stay_on_their_radius() {
    let f = circular();
    for r in [0.3, 0.5, 0.69, 0.9] {
        let path = trace_trajectory(&f, [0.0, r], 1.0, &cfg(64)).unwrap();
        for p in path {
            assert!((p[0].hypot(p[1]) - r).abs() < 1e-5, "r = {r}");
        }
    }
}

#[test]
fn forward_then_backward_returns_home() {
    let f = circular();
    let d = build_circle_five_block(9, 0.0, None, 2).unwrap();
    let err = |n: usize| {
        let c = cfg(n);
        let mut worst: f64 = 0.0;
        // Inner nodes rotate too fast for 64 steps to be asymptotic.
        for m in d.blocks.iter() {
            for (&x, &y) in m.x.iter().zip(&m.y) {
                if x.hypot(y) < 0.25 {
                    continue;
                }
                let there = trace_point(&f, [x, y], 1.0, &c).unwrap();
                let back = trace_point(&f, there, -1.0, &c).unwrap();
                worst = worst.max(dist(back, [x, y]));
            }
        }
        worst
    };
    let (e64, e128) = (err(64), err(128));
    assert!(e128 < e64 / 10.0, "{e64} -> {e128}");
    assert!(e64 < 1e-3, "{e64}");
}

fn square(order: usize, n: usize) -> MultiBlockDomain {
    MultiBlockDomain::single(unit_square(order, n, n).unwrap()).unwrap()
}

/// Max interpolation error of `sin(2x) cos(3y)` at shifted points on the unit square.
fn hermite_error(order: usize, n: usize) -> f64 {
    let d = square(order, n);
    let shift = |_p: Point| Ok([0.0123, -0.0217]);
    let c = ParallelConfig { delta_zeta: 1.0, substeps: 4, ..Default::default() };
    let map = trace_field_lines(&d, &shift, &c).unwrap();
    let exact = |p: Point| (2.0 * p[0]).sin() * (3.0 * p[1]).cos();
    let u = d.sample(|x, y| exact([x, y]));
    let vals = apply_parallel_map(&map, &d, &u, &|p| exact(p)).unwrap();
    map.forward
        .iter()
        .zip(&vals.wf)
        .filter(|(t, _)| !t.is_exit())
        .map(|(t, w)| (w - exact(t.point)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn hermite_interpolation_converges() {
    for order in [2, 4] {
        let rate = (hermite_error(order, 21) / hermite_error(order, 41)).log2();
        assert!(rate >= 1.8, "order {order}: rate {rate}");
    }
}

#[test]
fn constants_and_linears_reproduced_on_circle() {
    let d = build_circle_five_block(11, 0.1, None, 4).unwrap();
    let map = trace_field_lines(&d, &IslandField(IslandFieldParams::default()), &cfg(32)).unwrap();
    let u = d.sample(|_, _| 2.5);
    let v = apply_parallel_map(&map, &d, &u, &|_| 2.5).unwrap();
    assert!(v.w.iter().all(|w| (w - 2.5).abs() < 1e-12));
    let lin = |p: Point| 0.3 * p[0] - 1.2 * p[1] + 0.1;
    let u = d.sample(|x, y| lin([x, y]));
    let v = apply_parallel_map(&map, &d, &u, &|p| lin(p)).unwrap();
    for (t, w) in map.forward.iter().zip(&v.wf) {
        // Straight-sided square block: bilinear map, Hermite reproduces the linear exactly.
        if let Landing::Inside(s) = t.landing {
            if s.block == 0 {
                assert!((w - lin(t.point)).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn tau_substitution_values() {
    let c = ParallelConfig::default();
    let h = [0.5, 1.5];
    assert_eq!(compute_tau_parallel(&[1.0, 2.0], &[1.0, 2.0], &h, &c), 0.0);
    assert!((compute_tau_parallel(&[2.0, 2.0], &[1.0, 1.0], &h, &c) - 0.025).abs() < 1e-15);
    assert!((compute_tau_parallel(&[2.0, -4.0], &[0.0, 0.0], &h, &c) - 0.1).abs() < 1e-15);
    assert_eq!(compute_tau_parallel(&[0.0, 0.0], &[1.0, 1.0], &h, &c), 0.0);
}

#[test]
fn huge_penalty_limit() {
    let c = ParallelConfig { kappa_par: 1e12, ..Default::default() };
    let w = [0.3, -2.0, 7.0];
    let u = parallel_update(&[1.0, 1.0, 1.0], &w, 1.0, &c, &[1.0, 1.0, 1.0], 1.0);
    for (u, w) in u.iter().zip(&w) {
        assert!((u - w).abs() <= 1e-6 * w.abs());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn update_is_convex_combination(
        u in -1e3f64..1e3, w in -1e3f64..1e3, tau in 0.0f64..10.0, kp in 0.0f64..1e9, h in 1e-6f64..1.0, dt in 1e-6f64..1.0,
        with_dt in any::<bool>(),
    ) {
        let c = ParallelConfig { kappa_par: kp, include_dt_factor: with_dt, ..Default::default() };
        let v = parallel_update(&[u], &[w], tau, &c, &[h], dt)[0];
        let (lo, hi) = if u < w { (u, w) } else { (w, u) };
        prop_assert!(v >= lo - 1e-13 * hi.abs().max(1.0) && v <= hi + 1e-13 * hi.abs().max(1.0));
        prop_assert!((v - w).abs() <= (u - w).abs() * (1.0 + 1e-13));
    }
}
