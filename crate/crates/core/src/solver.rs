//! Operator-split time integration.
//!
//! Each step solves the theta-method for the perpendicular operator with
//! conjugate gradients, then applies the parallel penalty update. The
//! semi-discrete perpendicular system is `u_t = (J H)^-1 H (P u + G(g)) + F`,
//! so the implicit matrix is self-adjoint in the `J H` inner product.

use crate::error::{Error, Result};
use crate::mesh::{MultiBlockDomain, Point};
use crate::parallel::{apply_parallel_map, compute_tau_parallel, parallel_update, FieldLineMap, ParallelConfig};
use crate::perp::PerpOperator;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

/// Space-time scalar function `f(x, y, t)`.
pub type SpaceTimeFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct SolveConfig {
    pub dt: f64,
    pub t_final: f64,
    pub theta: f64,
    pub kperp: f64,
    pub parallel: Option<ParallelConfig>,
    pub cg_rel_tol: f64,
    /// Defaults to ten times the number of unknowns.
    pub cg_max_iter: Option<usize>,
    pub forcing: Option<SpaceTimeFn>,
    /// Dirichlet data; zero when absent.
    pub boundary_data: Option<SpaceTimeFn>,
    /// Keep a copy of the state every this many steps (0 disables).
    pub snapshot_every: usize,
}

impl fmt::Debug for SolveConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SolveConfig")
            .field("dt", &self.dt)
            .field("t_final", &self.t_final)
            .field("theta", &self.theta)
            .field("kperp", &self.kperp)
            .field("parallel", &self.parallel)
            .field("cg_rel_tol", &self.cg_rel_tol)
            .field("forcing", &self.forcing.is_some())
            .field("boundary_data", &self.boundary_data.is_some())
            .finish()
    }
}

impl SolveConfig {
    pub fn new(dt: f64, t_final: f64) -> Self {
        Self {
            dt,
            t_final,
            theta: 0.5,
            kperp: 1.0,
            parallel: None,
            cg_rel_tol: 1e-12,
            cg_max_iter: None,
            forcing: None,
            boundary_data: None,
            snapshot_every: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::InvalidParameter(format!("theta must lie in [0, 1], got {}", self.theta)));
        }
        if !(self.cg_rel_tol > 0.0) || !(self.t_final >= 0.0) {
            return Err(Error::InvalidParameter("cg_rel_tol must be positive and t_final non-negative".into()));
        }
        if let Some(p) = &self.parallel {
            p.validate()?;
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        ((self.t_final / self.dt) - 1e-9).ceil().max(0.0) as usize
    }
}

/// Outcome of a conjugate-gradient solve.
#[derive(Debug, Clone, PartialEq)]
pub struct CgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final relative residual `|b - A x|_W / |b|_W`.
    pub residual: f64,
    /// Relative residual after each iteration, starting with the initial guess.
    pub history: Vec<f64>,
}

fn dot_w(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    a.iter().zip(b).zip(w).map(|((a, b), w)| w * a * b).sum()
}

/// Conjugate gradients for `A x = b` with `A` self-adjoint and positive
/// definite in the inner product `<x, y> = sum w_i x_i y_i`.
pub fn cg_solve<F>(mut apply_a: F, b: &[f64], x0: &[f64], w: &[f64], tol: f64, max_iter: usize) -> Result<CgResult>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    let n = b.len();
    if x0.len() != n || w.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: x0.len().min(w.len()) });
    }
    let mut x = x0.to_vec();
    let mut ap = vec![0.0; n];
    apply_a(&x, &mut ap)?;
    let mut r: Vec<f64> = b.iter().zip(&ap).map(|(b, a)| b - a).collect();
    let bnorm = dot_w(b, b, w).sqrt();
    if bnorm == 0.0 {
        return Ok(CgResult { x: vec![0.0; n], iterations: 0, residual: 0.0, history: vec![0.0] });
    }
    let mut rr = dot_w(&r, &r, w);
    let mut history = vec![rr.sqrt() / bnorm];
    let mut p = r.clone();
    let mut it = 0;
    while rr.sqrt() > tol * bnorm {
        if it == max_iter {
            return Err(Error::CgNotConverged { iterations: it, residual: rr.sqrt() / bnorm });
        }
        apply_a(&p, &mut ap)?;
        let pap = dot_w(&p, &ap, w);
        if !(pap > 0.0) {
            return Err(Error::CgNotConverged { iterations: it, residual: rr.sqrt() / bnorm });
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot_w(&r, &r, w);
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
        it += 1;
        history.push(rr.sqrt() / bnorm);
    }
    Ok(CgResult { x, iterations: it, residual: rr.sqrt() / bnorm, history })
}

/// One theta-method step for `u' = L u + s`: solves
/// `(I - theta dt L) x = (I + (1 - theta) dt L) u + extra` by conjugate
/// gradients in the `w` inner product, in which `L` must be self-adjoint and
/// negative semi-definite. Returns the solution and the iteration count.
#[allow(clippy::too_many_arguments)]
pub fn theta_method_step<F>(
    mut apply_l: F,
    u: &[f64],
    extra: &[f64],
    dt: f64,
    theta: f64,
    w: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    let n = u.len();
    let mut lu = vec![0.0; n];
    apply_l(u, &mut lu)?;
    let rhs: Vec<f64> = (0..n).map(|i| u[i] + (1.0 - theta) * dt * lu[i] + extra[i]).collect();
    if theta == 0.0 {
        return Ok((rhs, 0));
    }
    let res = cg_solve(
        |x, out| {
            apply_l(x, out)?;
            for (o, x) in out.iter_mut().zip(x) {
                *o = x - theta * dt * *o;
            }
            Ok(())
        },
        &rhs,
        u,
        w,
        tol,
        max_iter,
    )?;
    Ok((res.x, res.iterations))
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t: f64,
    pub tau_par: f64,
    pub cg_iters: usize,
    /// `J H` norm of the state after the step.
    pub h_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub u: Vec<f64>,
    pub t: f64,
    pub diagnostics: Vec<StepDiagnostics>,
    pub snapshots: Vec<(f64, Vec<f64>)>,
}

impl SolverState {
    pub fn new(u: Vec<f64>, t: f64) -> Self {
        Self { u, t, diagnostics: Vec::new(), snapshots: Vec::new() }
    }
}

/// Perpendicular operator, optional field-line map and configuration.
pub struct Solver {
    pub op: PerpOperator,
    pub map: Option<FieldLineMap>,
    pub cfg: SolveConfig,
    boundary_nodes: Vec<usize>,
    points: Vec<Point>,
}

impl Solver {
    pub fn new(op: PerpOperator, map: Option<FieldLineMap>, cfg: SolveConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.parallel.is_some() && map.is_none() {
            return Err(Error::InvalidParameter("parallel configuration needs a field-line map".into()));
        }
        let mut boundary_nodes: Vec<usize> = op.exterior.iter().flat_map(|s| s.nodes.iter().cloned()).collect();
        boundary_nodes.sort_unstable();
        boundary_nodes.dedup();
        let points = op
            .domain
            .blocks
            .iter()
            .flat_map(|b| b.x.iter().zip(&b.y).map(|(&x, &y)| [x, y]).collect::<Vec<_>>())
            .collect();
        Ok(Self { op, map, cfg, boundary_nodes, points })
    }

    pub fn domain(&self) -> &MultiBlockDomain {
        &self.op.domain
    }

    pub fn energy_norm(&self, u: &[f64]) -> f64 {
        dot_w(u, u, self.op.jh()).sqrt()
    }

    fn boundary_vector(&self, t: f64) -> Option<Vec<f64>> {
        let g = self.cfg.boundary_data.as_ref()?;
        let mut v = vec![0.0; self.op.len()];
        for &k in &self.boundary_nodes {
            v[k] = g(self.points[k][0], self.points[k][1], t);
        }
        Some(v)
    }

    fn forcing_vector(&self, t: f64) -> Option<Vec<f64>> {
        let f = self.cfg.forcing.as_ref()?;
        Some(self.points.iter().map(|p| f(p[0], p[1], t)).collect())
    }

    /// `(I - theta dt L) u_half = (I + (1 - theta) dt L) u + dt [(1 - theta)(F^l + G^l) + theta (F^{l+1} + G^{l+1})]`,
    /// with `L = (J H)^-1 H P` and `G` the boundary-data part of the SATs.
    pub fn theta_step(&self, u: &[f64], t: f64) -> Result<(Vec<f64>, usize)> {
        let n = self.op.len();
        let (dt, th) = (self.cfg.dt, self.cfg.theta);
        let zero = vec![0.0; n];
        let mut extra = vec![0.0; n];
        let mut gl = vec![0.0; n];
        for (g, weight) in [(self.boundary_vector(t), 1.0 - th), (self.boundary_vector(t + dt), th)] {
            if let Some(g) = g {
                self.op.rate(&zero, Some(&g), &mut gl)?;
                extra.iter_mut().zip(&gl).for_each(|(e, v)| *e += weight * dt * v);
            }
        }
        if let (Some(f0), Some(f1)) = (self.forcing_vector(t), self.forcing_vector(t + dt)) {
            for i in 0..n {
                extra[i] += dt * ((1.0 - th) * f0[i] + th * f1[i]);
            }
        }
        theta_method_step(
            |x, out| self.op.rate(x, None, out),
            u,
            &extra,
            dt,
            th,
            self.op.jh(),
            self.cfg.cg_rel_tol,
            self.cfg.cg_max_iter.unwrap_or(10 * n),
        )
    }

    /// One split step: theta-method, then the parallel update when configured.
    pub fn step(&self, state: &mut SolverState) -> Result<()> {
        let (u_half, iters) = self.theta_step(&state.u, state.t)?;
        let t_next = state.t + self.cfg.dt;
        let mut tau_par = 0.0;
        state.u = match (&self.cfg.parallel, &self.map) {
            (Some(pc), Some(map)) => {
                let g = |p: Point| self.cfg.boundary_data.as_ref().map_or(0.0, |g| g(p[0], p[1], t_next));
                let pv = apply_parallel_map(map, self.domain(), &u_half, &g)?;
                tau_par = compute_tau_parallel(&u_half, &pv.w, self.op.h(), pc);
                parallel_update(&u_half, &pv.w, tau_par, pc, self.op.jh(), self.cfg.dt)
            }
            _ => u_half,
        };
        state.t = t_next;
        let step = state.diagnostics.len() + 1;
        state.diagnostics.push(StepDiagnostics {
            step,
            t: state.t,
            tau_par,
            cg_iters: iters,
            h_norm: self.energy_norm(&state.u),
        });
        if self.cfg.snapshot_every > 0 && step % self.cfg.snapshot_every == 0 {
            state.snapshots.push((state.t, state.u.clone()));
        }
        Ok(())
    }

    /// Step from `u0` at `t = 0` until `t_final`.
    pub fn run(&self, u0: Vec<f64>) -> Result<SolverState> {
        if u0.len() != self.op.len() {
            return Err(Error::LengthMismatch { expected: self.op.len(), got: u0.len() });
        }
        let mut state = SolverState::new(u0, 0.0);
        for _ in 0..self.cfg.n_steps() {
            self.step(&mut state)?;
        }
        Ok(state)
    }
}

/// Snapshot CSV with columns `block,i,j,x,y,u,t`.
pub fn write_snapshot_csv<W: Write>(mut w: W, domain: &MultiBlockDomain, u: &[f64], t: f64) -> Result<()> {
    writeln!(w, "block,i,j,x,y,u,t")?;
    let mut k = 0;
    for (b, m) in domain.blocks.iter().enumerate() {
        for i in 0..m.nq() {
            for j in 0..m.nr() {
                let l = m.ops.idx(i, j);
                writeln!(w, "{b},{i},{j},{:.12e},{:.12e},{:.12e},{t:.12e}", m.x[l], m.y[l], u[k])?;
                k += 1;
            }
        }
    }
    Ok(())
}

/// Diagnostics CSV with columns `step,t,tau_par,cg_iters,h_norm`.
pub fn write_diagnostics_csv<W: Write>(mut w: W, diag: &[StepDiagnostics]) -> Result<()> {
    writeln!(w, "step,t,tau_par,cg_iters,h_norm")?;
    for d in diag {
        writeln!(w, "{},{:.12e},{:.12e},{},{:.12e}", d.step, d.t, d.tau_par, d.cg_iters, d.h_norm)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::unit_square;

    #[test]
    fn cg_identity_one_iteration() {
        let b = [1.0, -2.0, 3.0];
        let r = cg_solve(
            |x, o| {
                o.copy_from_slice(x);
                Ok(())
            },
            &b,
            &[0.0; 3],
            &[1.0; 3],
            1e-14,
            10,
        )
        .unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.x, b.to_vec());
    }

    #[test]
    fn cg_diagonal_matches_direct() {
        let d = [1.0, 2.0, 3.0, 4.0];
        let b = [0.3, -1.2, 2.5, 0.7];
        let r = cg_solve(
            |x, o| {
                for i in 0..4 {
                    o[i] = d[i] * x[i];
                }
                Ok(())
            },
            &b,
            &[0.0; 4],
            &[1.0; 4],
            1e-14,
            10,
        )
        .unwrap();
        for i in 0..4 {
            assert!((r.x[i] - b[i] / d[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn cg_reports_non_convergence() {
        let r = cg_solve(
            |x, o| {
                o[0] = x[0];
                o[1] = 1e6 * x[1];
                o[2] = 1e-3 * x[2];
                Ok(())
            },
            &[1.0, 1.0, 1.0],
            &[0.0; 3],
            &[1.0; 3],
            1e-14,
            1,
        );
        assert!(matches!(r, Err(Error::CgNotConverged { iterations: 1, .. })));
    }

    fn square_solver(cfg: SolveConfig) -> Solver {
        let d = MultiBlockDomain::single(unit_square(2, 7, 7).unwrap()).unwrap();
        let op = PerpOperator::with_constant_kperp(Arc::new(d), cfg.kperp).unwrap();
        Solver::new(op, None, cfg).unwrap()
    }

    #[test]
    fn zero_final_time_returns_initial_state() {
        let s = square_solver(SolveConfig::new(0.1, 0.0));
        let u0 = vec![1.0; 49];
        let st = s.run(u0.clone()).unwrap();
        assert_eq!(st.u, u0);
        assert_eq!(st.t, 0.0);
    }

    #[test]
    fn vanishing_diffusion_is_identity() {
        let mut cfg = SolveConfig::new(0.01, 0.01);
        cfg.kperp = 1e-14;
        let s = square_solver(cfg);
        let u0: Vec<f64> = (0..49).map(|k| (k as f64 * 0.37).sin()).collect();
        let (u1, _) = s.theta_step(&u0, 0.0).unwrap();
        for (a, b) in u0.iter().zip(&u1) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn energy_decays_without_data() {
        let s = square_solver(SolveConfig::new(0.01, 0.05));
        let u0: Vec<f64> = (0..49).map(|k| (k as f64 * 0.37).sin()).collect();
        let e0 = s.energy_norm(&u0);
        let st = s.run(u0).unwrap();
        let mut prev = e0;
        for d in &st.diagnostics {
            assert!(d.h_norm <= prev);
            prev = d.h_norm;
        }
        assert_eq!(st.diagnostics.len(), 5);
    }

    #[test]
    fn validation() {
        assert!(SolveConfig::new(0.0, 1.0).validate().is_err());
        let mut c = SolveConfig::new(0.1, 1.0);
        c.theta = 1.5;
        assert!(c.validate().is_err());
        assert_eq!(SolveConfig::new(0.1, 1.0).n_steps(), 10);
        assert_eq!(SolveConfig::new(0.3, 1.0).n_steps(), 4);
    }
}
