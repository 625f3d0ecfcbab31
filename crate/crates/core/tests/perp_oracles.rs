use anisodiff::mesh::{build_circle_five_block, square_sector_pair, two_block_rectangle, MultiBlockDomain};
use anisodiff::perp::{PerpOperator, DENSE_CAP};
use std::sync::Arc;

fn sample_state(d: &MultiBlockDomain) -> Vec<f64> {
    d.sample(|x, y| (1.3 * x + 0.2).sin() * (0.7 * y - 0.4).cos() + x * y)
}

#[test]
fn operator_splits_into_volume_and_sats() {
    let d = Arc::new(square_sector_pair(4, 11, 0.1).unwrap());
    let op = PerpOperator::with_constant_kperp(d.clone(), 1.0).unwrap();
    let u = sample_state(&d);
    let g: Vec<f64> = u.iter().map(|v| 0.5 * v + 0.1).collect();
    let total = op.apply(&u, Some(&g)).unwrap();
    let sd = op.apply_sat_dirichlet(&u, Some(&g)).unwrap();
    let si = op.apply_sat_interface(&u).unwrap();
    let off = op.offsets().to_vec();
    for b in 0..d.blocks.len() {
        let vol = op.apply_dperp_block(b, &u[off[b]..off[b + 1]]).unwrap();
        for (k, v) in vol.iter().enumerate() {
            let i = off[b] + k;
            let sum = v + sd[i] + si[i];
            assert!((sum - total[i]).abs() < 1e-9 * total[i].abs().max(1.0), "node {i}: {sum} vs {}", total[i]);
        }
    }
}

#[test]
fn dense_assembly_matches_matrix_free() {
    let d = Arc::new(two_block_rectangle(2, 6, 0.0, 0.4, 1.0, 0.0, 0.7).unwrap());
    let op = PerpOperator::with_constant_kperp(d.clone(), 2.0).unwrap();
    let dense = op.assemble_dense(DENSE_CAP).unwrap();
    let u = sample_state(&d);
    let a = dense.matvec(&u);
    let b = op.apply(&u, None).unwrap();
    for (a, b) in a.iter().zip(&b) {
        assert!((a - b).abs() < 1e-10 * b.abs().max(1.0));
    }
}

#[test]
fn interior_perturbation_stays_local() {
    for (order, reach) in [(2usize, 2usize), (4, 4)] {
        let n = 21;
        let d = Arc::new(MultiBlockDomain::single(anisodiff::mesh::unit_square(order, n, n).unwrap()).unwrap());
        let op = PerpOperator::with_constant_kperp(d.clone(), 1.0).unwrap();
        let u = sample_state(&d);
        let base = op.apply(&u, None).unwrap();
        let (pi, pj) = (10, 10);
        let mut v = u.clone();
        v[pi * n + pj] += 1.0;
        let moved = op.apply(&v, None).unwrap();
        for i in 0..n {
            for j in 0..n {
                let far = i.abs_diff(pi) > reach || j.abs_diff(pj) > reach;
                let k = i * n + j;
                if far {
                    assert_eq!(base[k], moved[k], "order {order}: node ({i},{j}) changed");
                }
            }
        }
        assert_ne!(base[pi * n + pj], moved[pi * n + pj]);
    }
}

#[test]
fn tiny_diffusivity_scales_linearly() {
    let d = Arc::new(square_sector_pair(2, 9, 0.1).unwrap());
    let one = PerpOperator::with_constant_kperp(d.clone(), 1.0).unwrap();
    let tiny = PerpOperator::with_constant_kperp(d.clone(), 1e-14).unwrap();
    let u = sample_state(&d);
    let a = one.apply(&u, None).unwrap();
    let b = tiny.apply(&u, None).unwrap();
    for (a, b) in a.iter().zip(&b) {
        assert!((b - 1e-14 * a).abs() <= 1e-12 * (1e-14 * a).abs().max(1e-30), "{b} vs {}", 1e-14 * a);
    }
    let rep = tiny.check_energy_stability("tiny").unwrap();
    assert!(rep.passed(), "{rep:?}");
}

/// With exact boundary data, smooth polynomials are differentiated exactly.
#[test]
fn sats_vanish_on_consistent_data() {
    let cases: [(usize, fn(f64, f64) -> f64, f64); 2] = [(2, |x, y| 2.0 * x - y + 0.5, 0.0), (4, |x, y| x * x + y * y - x * y, 4.0)];
    for (order, f, lap) in cases {
        let d = Arc::new(two_block_rectangle(order, 12, -0.3, 0.2, 0.9, 0.0, 1.1).unwrap());
        let op = PerpOperator::with_constant_kperp(d.clone(), 1.0).unwrap();
        let u = d.sample(f);
        let mut pu = vec![0.0; u.len()];
        op.rate(&u, Some(&u), &mut pu).unwrap();
        for v in &pu {
            assert!((v - lap).abs() < 1e-9, "order {order}: {v}");
        }
        let si = op.apply_sat_interface(&u).unwrap();
        let sd = op.apply_sat_dirichlet(&u, Some(&u)).unwrap();
        assert!(si.iter().chain(&sd).all(|v| v.abs() < 1e-9));
    }
}

#[test]
fn larger_penalties_stay_stable() {
    let d = Arc::new(build_circle_five_block(9, 0.1, None, 2).unwrap());
    for s in [1.0, 2.0, 10.0] {
        let mut op = PerpOperator::with_constant_kperp(d.clone(), 1.0).unwrap();
        op.scale_penalties(s, s);
        let rep = op.check_energy_stability(&format!("scale {s}")).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert!(op.audit_lemma_matrices().passed());
    }
}

#[test]
fn penalties_grow_with_diffusivity() {
    let d = Arc::new(square_sector_pair(2, 9, 0.1).unwrap());
    let a = PerpOperator::with_constant_kperp(d.clone(), 1.0).unwrap();
    let b = PerpOperator::with_constant_kperp(d.clone(), 3.0).unwrap();
    let flat = |op: &PerpOperator| op.penalties.dirichlet.iter().chain(&op.penalties.interface).flatten().copied().collect::<Vec<_>>();
    for (x, y) in flat(&a).iter().zip(flat(&b)) {
        assert!((y - 3.0 * x).abs() < 1e-12 * y);
    }
}

#[test]
fn two_block_order_four_ten_by_ten() {
    let d = Arc::new(two_block_rectangle(4, 10, 0.0, 0.5, 1.0, 0.0, 1.0).unwrap());
    let op = PerpOperator::with_constant_kperp(d, 1.0).unwrap();
    let rep = op.check_energy_stability("two-block order 4").unwrap();
    assert!(rep.passed(), "{rep:?}");
    assert!(rep.symmetry_defect < 1e-12);
    assert!(op.audit_lemma_matrices().passed());
}

#[test]
fn hp_is_symmetric_on_curved_blocks() {
    for order in [2, 4] {
        let d = Arc::new(square_sector_pair(order, 10, 0.15).unwrap());
        let op = PerpOperator::with_constant_kperp(d, 1.0).unwrap();
        let p = op.assemble_dense(DENSE_CAP).unwrap();
        let h = op.h();
        let n = op.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..i {
                worst = worst.max((h[i] * p.get(i, j) - h[j] * p.get(j, i)).abs());
            }
        }
        assert!(worst < 1e-12, "order {order}: {worst}");
    }
}
