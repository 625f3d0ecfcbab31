use anisodiff::mesh::*;
use anisodiff::{Error, Side};
use proptest::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

// Reference values from a 25-digit evaluation of the sinh packing formula.
#[test]
fn packing_reference_values() {
    let p = PackingParams::new(0.1, 0.7).unwrap();
    for (s, want) in [(0.5, 0.6575335558942182584293035), (0.25, 0.4802853783289785159728846), (0.9, 0.8845213190114065895975911)] {
        assert!((pack_points(s, &p) - want).abs() < 1e-14, "s = {s}");
    }
}

#[test]
fn packing_rejects_tiny_alpha() {
    assert!(PackingParams::new(0.04, 0.5).is_err());
    assert!(PackingParams::new(0.1, 1.2).is_err());
    assert!(PackingParams::new(0.06, 0.5).is_ok());
}

fn sector(order: usize, n: usize) -> BlockMesh {
    let map = |q: f64, r: f64| {
        let (rho, phi) = (1.0 + q, r * PI / 2.0);
        [rho * phi.cos(), rho * phi.sin()]
    };
    BlockMesh::from_map(Arc::new(map), order, n, n, 0).unwrap()
}

/// Max Jacobian error on an annular sector, optionally skipping `skip` layers at each edge.
fn sector_jacobian_error(order: usize, n: usize, skip: usize) -> f64 {
    let m = sector(order, n);
    let mut err: f64 = 0.0;
    for i in skip..n - skip {
        for j in skip..n - skip {
            let q = i as f64 / (n - 1) as f64;
            let exact = (1.0 + q) * PI / 2.0;
            err = err.max((m.jac()[i * n + j] - exact).abs());
        }
    }
    err
}

#[test]
fn annular_sector_metrics_converge() {
    let rate = |order: usize, skip: fn(usize) -> usize| {
        let (a, b) = (41, 81);
        (sector_jacobian_error(order, a, skip(a)) / sector_jacobian_error(order, b, skip(b))).log2()
    };
    let interior = rate(2, |n| n / 4);
    assert!((interior - 2.0).abs() < 0.2, "order 2 interior rate {interior}");
    let global = rate(4, |_| 0);
    assert!((global - 2.0).abs() < 0.3, "order 4 rate {global}");
}

#[test]
fn polar_diffusion_coefficients() {
    let n = 81;
    let m = sector(4, n);
    let f = assemble_diffusion_field(&m, &vec![1.0; n * n]).unwrap();
    // Second-order boundary closures bound the nodal error by O(h^2).
    for k in (0..n * n).step_by(37) {
        let rho = 1.0 + (k / n) as f64 / (n - 1) as f64;
        assert!((f.kq[k] - rho * PI / 2.0).abs() < 2e-3);
        assert!((f.kr[k] - 2.0 / (PI * rho)).abs() < 2e-3);
        assert!(f.kqr[k].abs() < 2e-3);
    }
}

#[test]
fn rotated_and_sheared_affine_maps_are_exact() {
    let (a, b, th, s) = (2.0, 0.5, 0.3f64, 0.4);
    let map = move |q: f64, r: f64| {
        let (x, y) = (a * (q + s * r), b * r);
        [th.cos() * x - th.sin() * y, th.sin() * x + th.cos() * y]
    };
    for order in [2, 4] {
        let m = BlockMesh::from_map(Arc::new(map), order, 11, 13, 0).unwrap();
        let f = assemble_diffusion_field(&m, &vec![3.0; m.len()]).unwrap();
        // J = a b, grad q = (1/a, -s/b), grad r = (0, 1/b) in the unrotated frame.
        let j = a * b;
        for k in 0..m.len() {
            assert!((m.jac()[k] - j).abs() < 1e-12);
            assert!((f.kq[k] - 3.0 * j * (1.0 / (a * a) + s * s / (b * b))).abs() < 1e-11);
            assert!((f.kr[k] - 3.0 * j / (b * b)).abs() < 1e-11);
            assert!((f.kqr[k] + 3.0 * j * s / (b * b)).abs() < 1e-11);
        }
    }
}

#[test]
fn circle_interfaces_coincide() {
    let d = build_circle_five_block(13, 0.1, Some(PackingParams::new(0.1, 0.5).unwrap()), 4).unwrap();
    assert_eq!(d.interfaces.len(), 8);
    assert_eq!(d.exterior.len(), 4);
    for itf in &d.interfaces {
        let (ba, bb) = (&d.blocks[itf.a.block], &d.blocks[itf.b.block]);
        let len = ba.ops.side_len(itf.a.side);
        for t in 0..len {
            let ia = ba.ops.side_node(itf.a.side, t);
            let ib = bb.ops.side_node(itf.b.side, itf.partner(t, len));
            assert!((ba.x[ia] - bb.x[ib]).hypot(ba.y[ia] - bb.y[ib]) < 1e-12);
        }
    }
    for e in &d.exterior {
        let b = &d.blocks[e.at.block];
        for t in 0..13 {
            let k = b.ops.side_node(e.at.side, t);
            assert!((b.x[k].hypot(b.y[k]) - 1.0).abs() < 1e-14);
        }
    }
}

#[test]
fn misaligned_interface_rejected() {
    let block = |x0: f64, id| BlockMesh::from_map(Arc::new(move |q: f64, r: f64| [x0 + q, r]), 2, 5, 5, id).unwrap();
    let interfaces = vec![Interface { a: BlockSide::new(0, Side::QHigh), b: BlockSide::new(1, Side::QLow), reversed: false }];
    let exterior: Vec<ExteriorSide> = [(0, Side::QLow), (0, Side::RLow), (0, Side::RHigh), (1, Side::QHigh), (1, Side::RLow), (1, Side::RHigh)]
        .iter()
        .map(|&(b, s)| ExteriorSide { at: BlockSide::new(b, s), kind: BoundaryKind::Dirichlet })
        .collect();
    let ok = MultiBlockDomain::new(vec![block(0.0, 0), block(1.0, 1)], interfaces.clone(), exterior.clone(), None);
    assert!(ok.is_ok());
    let bad = MultiBlockDomain::new(vec![block(0.0, 0), block(1.001, 1)], interfaces, exterior, None);
    assert!(matches!(bad, Err(Error::BadInterface { .. })));
}

#[test]
fn circle_area_from_jacobian_quadrature() {
    for order in [2, 4] {
        let d = build_circle_five_block(41, 0.1, None, order).unwrap();
        let area: f64 = d.jh_weights().iter().sum();
        assert!((area - PI).abs() < 1e-3, "order {order}: {area}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn packing_is_monotone(alpha in 0.05f64..1.0, r_s in 0.0f64..1.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let p = PackingParams::new(alpha, r_s).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-9);
        prop_assert!(pack_points(lo, &p) < pack_points(hi, &p));
        prop_assert!(pack_points(0.0, &p).abs() < 1e-14 && (pack_points(1.0, &p) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn circle_tensor_minors_nonnegative(gamma in 0.0f64..0.25, n in 9usize..16, order in prop::sample::select(vec![2usize, 4])) {
        let d = build_circle_five_block(n, gamma, None, order).unwrap();
        for m in &d.blocks {
            let f = assemble_diffusion_field(m, &vec![1.0; m.len()]).unwrap();
            for k in 0..m.len() {
                prop_assert!(m.jac()[k] > 0.0);
                prop_assert!(f.kq[k] * f.kr[k] - f.kqr[k] * f.kqr[k] >= -1e-12 * f.kq[k] * f.kr[k]);
            }
        }
    }
}
