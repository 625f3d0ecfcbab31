use anisodiff::mesh::{square_sector_pair, two_block_rectangle};
use anisodiff::parallel::{trace_field_lines, ParallelConfig};
use anisodiff::perp::PerpOperator;
use anisodiff::solver::*;
use proptest::prelude::*;
use std::sync::Arc;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Scalar `u' = lambda u`: the theta-method amplification factor.
    #[test]
    fn scalar_amplification(lambda in -1e4f64..0.0, dt in 1e-6f64..1.0, theta in prop::sample::select(vec![0.5, 1.0]), u0 in -5.0f64..5.0) {
        let (u1, _) = theta_method_step(
            |x, out| { out[0] = lambda * x[0]; Ok(()) },
            &[u0], &[0.0], dt, theta, &[1.0], 1e-14, 10,
        ).unwrap();
        let g = (1.0 + (1.0 - theta) * dt * lambda) / (1.0 - theta * dt * lambda);
        prop_assert!((u1[0] - g * u0).abs() <= 1e-13 * u0.abs().max(1e-300));
        prop_assert!(g.abs() <= 1.0);
    }
}

/// Thomas algorithm for a symmetric tridiagonal system.
fn thomas(diag: &[f64], off: f64, rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = off / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - off * c[i - 1];
        c[i] = off / m;
        d[i] = (rhs[i] - off * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

#[test]
fn cg_matches_direct_solve_of_implicit_laplacian() {
    let n = 60;
    let h = 1.0 / (n + 1) as f64;
    let dt = 0.01;
    // (I - dt L) x = b with L the Dirichlet second difference.
    let apply = |x: &[f64], out: &mut [f64]| {
        for i in 0..n {
            let l = if i > 0 { x[i - 1] } else { 0.0 };
            let r = if i + 1 < n { x[i + 1] } else { 0.0 };
            out[i] = x[i] - dt * (l - 2.0 * x[i] + r) / (h * h);
        }
        Ok(())
    };
    let b: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.37).sin() + 0.2).collect();
    let res = cg_solve(apply, &b, &vec![0.0; n], &vec![1.0; n], 1e-13, 500).unwrap();
    let diag = vec![1.0 + 2.0 * dt / (h * h); n];
    let direct = thomas(&diag, -dt / (h * h), &b);
    for (a, d) in res.x.iter().zip(&direct) {
        assert!((a - d).abs() < 1e-11);
    }
    assert!(res.iterations <= n);
    assert!(res.residual <= 1e-13);
}

#[test]
fn energy_nonincreasing_across_time_steps() {
    let d = Arc::new(square_sector_pair(4, 11, 0.1).unwrap());
    let u0 = d.sample(|x, y| (3.0 * x).sin() * (2.0 * y).cos() + 1.0);
    for dt in [1e-6, 1e-3, 1.0] {
        let op = PerpOperator::with_constant_kperp(d.clone(), 1.0).unwrap();
        let solver = Solver::new(op, None, SolveConfig::new(dt, 10.0 * dt)).unwrap();
        let e0 = solver.energy_norm(&u0);
        let st = solver.run(u0.clone()).unwrap();
        let mut prev = e0;
        for dg in &st.diagnostics {
            assert!(dg.h_norm <= prev * (1.0 + 1e-12), "dt {dt}: {} > {prev}", dg.h_norm);
            prev = dg.h_norm;
        }
    }
}

#[test]
fn zero_parallel_diffusivity_matches_perpendicular_only_bitwise() {
    let d = Arc::new(two_block_rectangle(2, 9, -0.5, 0.0, 0.5, -0.5, 0.5).unwrap());
    let u0 = d.sample(|x, y| (1.0 - 4.0 * x * x) * (1.0 - 4.0 * y * y) + 0.3 * x);
    let field = |p: [f64; 2]| Ok([-p[1], p[0]]);
    let pc = ParallelConfig { kappa_par: 0.0, substeps: 16, ..Default::default() };
    let map = trace_field_lines(&d, &field, &pc).unwrap();
    let mut with = SolveConfig::new(1e-3, 5e-3);
    with.parallel = Some(pc);
    let without = SolveConfig::new(1e-3, 5e-3);
    let a = Solver::new(PerpOperator::with_constant_kperp(d.clone(), 1.0).unwrap(), Some(map), with).unwrap();
    let b = Solver::new(PerpOperator::with_constant_kperp(d.clone(), 1.0).unwrap(), None, without).unwrap();
    let (sa, sb) = (a.run(u0.clone()).unwrap(), b.run(u0).unwrap());
    assert_eq!(sa.u, sb.u);
    assert_eq!(sa.diagnostics.len(), 5);
}

#[test]
fn parallel_stage_requires_map() {
    let d = Arc::new(two_block_rectangle(2, 5, 0.0, 0.5, 1.0, 0.0, 1.0).unwrap());
    let mut cfg = SolveConfig::new(1e-3, 1e-2);
    cfg.parallel = Some(ParallelConfig::default());
    assert!(Solver::new(PerpOperator::with_constant_kperp(d, 1.0).unwrap(), None, cfg).is_err());
}

#[test]
fn snapshots_and_csv_outputs() {
    let d = Arc::new(two_block_rectangle(2, 5, 0.0, 0.5, 1.0, 0.0, 1.0).unwrap());
    let mut cfg = SolveConfig::new(0.01, 0.04);
    cfg.snapshot_every = 2;
    cfg.forcing = Some(Arc::new(|_, _, _| 1.0));
    let solver = Solver::new(PerpOperator::with_constant_kperp(d.clone(), 1.0).unwrap(), None, cfg).unwrap();
    let st = solver.run(vec![0.0; d.total_len()]).unwrap();
    assert_eq!(st.snapshots.len(), 2);
    assert!((st.t - 0.04).abs() < 1e-15);
    let mut buf = Vec::new();
    write_snapshot_csv(&mut buf, &d, &st.u, st.t).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some("block,i,j,x,y,u,t"));
    assert_eq!(text.lines().count(), 1 + d.total_len());
    let mut buf = Vec::new();
    write_diagnostics_csv(&mut buf, &st.diagnostics).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 5);
}

#[test]
fn linear_steady_state_drifts_only_by_truncation() {
    // u = x + 2y is a steady solution; with matching Dirichlet data it should barely move.
    let d = Arc::new(square_sector_pair(2, 9, 0.0).unwrap());
    let exact = |x: f64, y: f64| x + 2.0 * y;
    let u0 = d.sample(exact);
    let mut cfg = SolveConfig::new(0.05, 0.5);
    cfg.boundary_data = Some(Arc::new(move |x, y, _| exact(x, y)));
    let solver = Solver::new(PerpOperator::with_constant_kperp(d.clone(), 1.0).unwrap(), None, cfg).unwrap();
    let st = solver.run(u0.clone()).unwrap();
    // The curved sector differentiates the linear function only to truncation accuracy.
    let err = st.u.iter().zip(&u0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 2e-2, "{err}");
}
