//! Verification experiments: manufactured solutions, island self-convergence
//! and stability audits.

use crate::error::{Error, Result};
use crate::fields::{island_source, IslandField, IslandFieldParams};
use crate::mesh::{
    build_circle_five_block, default_packing_centre, square_sector_pair, MultiBlockDomain, PackingParams,
};
use crate::parallel::{trace_field_lines, HermiteData, HermiteStencil, ParallelConfig};
use crate::perp::{LemmaKind, PerpOperator, StabilityReport};
use crate::solver::{SolveConfig, Solver, SolverState};
use serde::Deserialize;
use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

/// Frequencies of the manufactured solution.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default)]
pub struct MmsParams {
    pub omega_x: f64,
    pub omega_y: f64,
    pub omega_t: f64,
}

impl Default for MmsParams {
    fn default() -> Self {
        Self { omega_x: 5.5, omega_y: 7.0, omega_t: 3.0 }
    }
}

/// `u = cos(2 pi wt t) sin(2 pi wx x) sin(2 pi wy y)` and its forcing for
/// constant `kperp`.
pub fn mms_manufactured(x: f64, y: f64, t: f64, p: &MmsParams, kperp: f64) -> (f64, f64) {
    let tp = 2.0 * PI;
    let s = (tp * p.omega_x * x).sin() * (tp * p.omega_y * y).sin();
    let u = (tp * p.omega_t * t).cos() * s;
    let ut = -tp * p.omega_t * (tp * p.omega_t * t).sin() * s;
    let f = ut + kperp * tp * tp * (p.omega_x * p.omega_x + p.omega_y * p.omega_y) * u;
    (u, f)
}

/// `|u - u*|_H / |u*|_H`.
pub fn relative_error(u: &[f64], u_star: &[f64], h: &[f64]) -> Result<f64> {
    if u.len() != u_star.len() || h.len() != u.len() {
        return Err(Error::LengthMismatch { expected: u_star.len(), got: u.len().min(h.len()) });
    }
    let den: f64 = u_star.iter().zip(h).map(|(v, h)| h * v * v).sum();
    if den == 0.0 {
        return Err(Error::ZeroReferenceNorm);
    }
    let num: f64 = u.iter().zip(u_star).zip(h).map(|((a, b), h)| h * (a - b) * (a - b)).sum();
    Ok((num / den).sqrt())
}

/// `rate_k = log(e_k / e_{k+1}) / log((n_{k+1} - 1) / (n_k - 1))`.
pub fn convergence_rates(errors: &[f64], ns: &[usize]) -> Result<Vec<f64>> {
    if errors.len() != ns.len() {
        return Err(Error::LengthMismatch { expected: ns.len(), got: errors.len() });
    }
    if errors.len() < 2 {
        return Err(Error::InvalidParameter("need at least two resolutions".into()));
    }
    if let Some(&e) = errors.iter().find(|&&e| !(e > 0.0)) {
        return Err(Error::NonPositiveError(e));
    }
    Ok(errors
        .windows(2)
        .zip(ns.windows(2))
        .map(|(e, n)| (e[0] / e[1]).ln() / ((n[1] - 1) as f64 / (n[0] - 1) as f64).ln())
        .collect())
}

/// One row of a convergence table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub order: usize,
    pub gamma: f64,
    pub kappa_par: f64,
    pub n: usize,
    /// Bare-norm relative error.
    pub error: f64,
    /// Rate against the previous row of the same series (absent for the first).
    pub rate: Option<f64>,
    /// Relative error in the Jacobian-weighted norm.
    pub error_jh: f64,
}

pub fn write_convergence_csv<W: Write>(mut w: W, rows: &[ConvergenceRow]) -> Result<()> {
    writeln!(w, "order,gamma,kappa_par,n,error,rate,error_jh")?;
    for r in rows {
        let rate = r.rate.map_or(String::new(), |v| format!("{v:.6}"));
        writeln!(w, "{},{},{:e},{},{:.12e},{},{:.12e}", r.order, r.gamma, r.kappa_par, r.n, r.error, rate, r.error_jh)?;
    }
    Ok(())
}

fn fill_rates(rows: &mut [ConvergenceRow]) {
    for k in 1..rows.len() {
        let (a, b) = (rows[k - 1], rows[k]);
        if a.order == b.order && a.gamma == b.gamma && a.kappa_par == b.kappa_par && a.error > 0.0 && b.error > 0.0 {
            rows[k].rate = Some((a.error / b.error).ln() / ((b.n - 1) as f64 / (a.n - 1) as f64).ln());
        }
    }
}

/// Manufactured-solution experiment settings.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MmsConfig {
    pub order: usize,
    pub gamma: Vec<f64>,
    pub n_list: Vec<usize>,
    pub kperp: f64,
    pub t_final: f64,
    /// Time step at `n = 21`; scaled by `(21 / n)^2`.
    pub dt_21: f64,
    #[serde(flatten)]
    pub params: MmsParams,
}

impl Default for MmsConfig {
    fn default() -> Self {
        Self {
            order: 2,
            gamma: vec![0.0, 0.1],
            n_list: vec![21, 31, 41, 51, 61],
            kperp: 1.0,
            t_final: 0.1,
            dt_21: 1e-3,
            params: MmsParams::default(),
        }
    }
}

impl MmsConfig {
    pub fn dt(&self, n: usize) -> f64 {
        self.dt_21 * (21.0 / n as f64).powi(2)
    }
}

/// Manufactured-solution run on the five-block circle at one resolution.
pub fn run_mms_case(cfg: &MmsConfig, gamma: f64, n: usize) -> Result<ConvergenceRow> {
    let domain = Arc::new(build_circle_five_block(n, gamma, None, cfg.order)?);
    let op = PerpOperator::with_constant_kperp(domain.clone(), cfg.kperp)?;
    let (p, k) = (cfg.params, cfg.kperp);
    let mut sc = SolveConfig::new(cfg.dt(n), cfg.t_final);
    sc.kperp = k;
    sc.forcing = Some(Arc::new(move |x, y, t| mms_manufactured(x, y, t, &p, k).1));
    sc.boundary_data = Some(Arc::new(move |x, y, t| mms_manufactured(x, y, t, &p, k).0));
    let solver = Solver::new(op, None, sc)?;
    let u0 = domain.sample(|x, y| mms_manufactured(x, y, 0.0, &p, k).0);
    let state = solver.run(u0)?;
    let exact = domain.sample(|x, y| mms_manufactured(x, y, state.t, &p, k).0);
    Ok(ConvergenceRow {
        order: cfg.order,
        gamma,
        kappa_par: 0.0,
        n,
        error: relative_error(&state.u, &exact, &domain.h_weights())?,
        rate: None,
        error_jh: relative_error(&state.u, &exact, &domain.jh_weights())?,
    })
}

pub fn run_mms_experiment(cfg: &MmsConfig) -> Result<Vec<ConvergenceRow>> {
    check_ladder(&cfg.n_list)?;
    let mut rows = Vec::new();
    for &gamma in &cfg.gamma {
        for &n in &cfg.n_list {
            let row = run_mms_case(cfg, gamma, n)?;
            log::info!("mms order {} gamma {gamma} n {n}: error {:.4e}", cfg.order, row.error);
            rows.push(row);
        }
    }
    fill_rates(&mut rows);
    Ok(rows)
}

fn check_ladder(ns: &[usize]) -> Result<()> {
    if ns.is_empty() || ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(format!("resolutions must be ascending and non-empty: {ns:?}")));
    }
    Ok(())
}

/// Island self-convergence settings.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IslandConfig {
    pub orders: Vec<usize>,
    pub gamma: f64,
    pub kappa_par: Vec<f64>,
    pub n_list: Vec<usize>,
    pub n_ref: usize,
    pub t_final: f64,
    /// Time step numerator: `dt = dt_scale / (n - 1)^2`.
    pub dt_scale: f64,
    pub delta: f64,
    pub r1: f64,
    pub pack_alpha: f64,
    /// Packing centre in the sector radial coordinate; defaults to the preimage of `r1`.
    pub pack_centre: Option<f64>,
    /// RK4 steps per trace. The island field winds like 1/r near the axis, so
    /// coarse traces spiral inward there.
    pub substeps: usize,
    pub alpha: f64,
    pub beta: f64,
    pub include_dt_factor: bool,
}

impl Default for IslandConfig {
    fn default() -> Self {
        Self {
            orders: vec![2, 4],
            gamma: 0.1,
            kappa_par: vec![1e6, 1e9],
            n_list: vec![21, 31, 41, 51],
            n_ref: 81,
            t_final: 2e-3,
            dt_scale: 1e-2,
            delta: 0.05,
            r1: 0.7,
            pack_alpha: 0.1,
            pack_centre: None,
            substeps: 1024,
            alpha: 0.1,
            beta: 2.0,
            include_dt_factor: false,
        }
    }
}

impl IslandConfig {
    pub fn parallel(&self, kappa_par: f64) -> ParallelConfig {
        ParallelConfig {
            kappa_par,
            alpha: self.alpha,
            beta: self.beta,
            substeps: self.substeps,
            include_dt_factor: self.include_dt_factor,
            ..ParallelConfig::default()
        }
    }

    pub fn domain(&self, n: usize, order: usize) -> Result<MultiBlockDomain> {
        let centre = self.pack_centre.unwrap_or_else(|| default_packing_centre(self.gamma, self.r1));
        let packing = PackingParams::new(self.pack_alpha, centre)?;
        build_circle_five_block(n, self.gamma, Some(packing), order)
    }

    pub fn dt(&self, n: usize) -> f64 {
        self.dt_scale / ((n - 1) as f64).powi(2)
    }
}

/// Island problem solution at `t_final` on an `n x n`-per-block circle.
/// `kappa_par = 0` skips the parallel stage.
pub fn run_island_case(cfg: &IslandConfig, order: usize, kappa_par: f64, n: usize) -> Result<(Arc<MultiBlockDomain>, SolverState)> {
    let domain = Arc::new(cfg.domain(n, order)?);
    let op = PerpOperator::with_constant_kperp(domain.clone(), 1.0)?;
    let mut sc = SolveConfig::new(cfg.dt(n), cfg.t_final);
    sc.forcing = Some(Arc::new(|x, y, _t| island_source(x, y)));
    let map = if kappa_par > 0.0 {
        let pc = cfg.parallel(kappa_par);
        sc.parallel = Some(pc);
        let field = IslandField(IslandFieldParams { delta: cfg.delta, r1: cfg.r1 });
        Some(trace_field_lines(&domain, &field, &pc)?)
    } else {
        None
    };
    let solver = Solver::new(op, map, sc)?;
    let state = solver.run(vec![0.0; domain.total_len()])?;
    Ok((domain, state))
}

/// Reference solution sampled at the nodes of a coarser grid of the same
/// block layout: restriction when the grids nest, bicubic Hermite otherwise.
pub fn restrict_to(reference: &MultiBlockDomain, u_ref: &[f64], coarse: &MultiBlockDomain) -> Result<Vec<f64>> {
    if reference.blocks.len() != coarse.blocks.len() {
        return Err(Error::InvalidParameter("block layouts differ".into()));
    }
    let data = HermiteData::new(reference, u_ref);
    let roff = reference.offsets();
    let mut out = Vec::with_capacity(coarse.total_len());
    for (b, (rm, cm)) in reference.blocks.iter().zip(&coarse.blocks).enumerate() {
        for i in 0..cm.nq() {
            for j in 0..cm.nr() {
                let fi = i * (rm.nq() - 1);
                let fj = j * (rm.nr() - 1);
                let (ci, cj) = (cm.nq() - 1, cm.nr() - 1);
                if fi % ci == 0 && fj % cj == 0 {
                    out.push(u_ref[roff[b] + rm.ops.idx(fi / ci, fj / cj)]);
                } else {
                    let s = HermiteStencil::new(reference, b, i as f64 / ci as f64, j as f64 / cj as f64);
                    out.push(data.eval(&s));
                }
            }
        }
    }
    Ok(out)
}

/// Self-convergence against a fine reference for each order and `kappa_par`.
pub fn run_island_self_convergence(cfg: &IslandConfig) -> Result<Vec<ConvergenceRow>> {
    run_island_self_convergence_with(cfg, &mut |_| Ok(()))
}

/// A finished island run, handed to the observer of
/// [`run_island_self_convergence_with`].
pub struct IslandRun<'a> {
    pub order: usize,
    pub kappa_par: f64,
    pub n: usize,
    pub is_reference: bool,
    pub domain: &'a MultiBlockDomain,
    pub state: &'a SolverState,
}

/// As [`run_island_self_convergence`], calling `observe` after every run
/// (reference included), e.g. to write snapshots.
pub fn run_island_self_convergence_with(
    cfg: &IslandConfig,
    observe: &mut dyn FnMut(&IslandRun) -> Result<()>,
) -> Result<Vec<ConvergenceRow>> {
    check_ladder(&cfg.n_list)?;
    let mut rows = Vec::new();
    for &order in &cfg.orders {
        for &kp in &cfg.kappa_par {
            let (rdom, rstate) = run_island_case(cfg, order, kp, cfg.n_ref)?;
            observe(&IslandRun { order, kappa_par: kp, n: cfg.n_ref, is_reference: true, domain: &rdom, state: &rstate })?;
            for &n in &cfg.n_list {
                let (dom, state) = run_island_case(cfg, order, kp, n)?;
                observe(&IslandRun { order, kappa_par: kp, n, is_reference: false, domain: &dom, state: &state })?;
                let reference = restrict_to(&rdom, &rstate.u, &dom)?;
                let row = ConvergenceRow {
                    order,
                    gamma: cfg.gamma,
                    kappa_par: kp,
                    n,
                    error: relative_error(&state.u, &reference, &dom.h_weights())?,
                    rate: None,
                    error_jh: relative_error(&state.u, &reference, &dom.jh_weights())?,
                };
                log::info!("island order {order} kappa_par {kp:e} n {n}: error {:.4e}", row.error);
                rows.push(row);
            }
        }
    }
    fill_rates(&mut rows);
    Ok(rows)
}

/// Stability-audit settings.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityConfig {
    pub orders: Vec<usize>,
    pub gamma: Vec<f64>,
    pub blocks: Vec<usize>,
    pub n: usize,
    /// Multiplier on every computed zeroth-order penalty (below 1 for negative controls).
    pub tau_scale: f64,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self { orders: vec![2, 4], gamma: vec![0.0, 0.1], blocks: vec![1, 2, 5], n: 11, tau_scale: 1.0 }
    }
}

/// One configuration of the stability audit.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditRow {
    pub stability: StabilityReport,
    pub lemma_passed: bool,
    pub lemma_min_boundary: f64,
    pub lemma_min_interface: Option<f64>,
}

impl AuditRow {
    pub fn passed(&self) -> bool {
        self.stability.passed() && self.lemma_passed
    }
}

/// Domain with 1 (dilated square), 2 (square plus one sector) or 5 blocks.
pub fn audit_domain(blocks: usize, order: usize, gamma: f64, n: usize) -> Result<MultiBlockDomain> {
    match blocks {
        1 => {
            let full = build_circle_five_block(n, gamma, None, order)?;
            MultiBlockDomain::single(full.blocks[0].clone())
        }
        2 => square_sector_pair(order, n, gamma),
        5 => build_circle_five_block(n, gamma, None, order),
        other => Err(Error::InvalidParameter(format!("no audit layout with {other} blocks"))),
    }
}

pub fn run_stability_audit(cfg: &StabilityConfig) -> Result<Vec<AuditRow>> {
    let mut rows = Vec::new();
    for &order in &cfg.orders {
        for &gamma in &cfg.gamma {
            for &nb in &cfg.blocks {
                let domain = Arc::new(audit_domain(nb, order, gamma, cfg.n)?);
                let mut op = PerpOperator::with_constant_kperp(domain, 1.0)?;
                op.scale_penalties(cfg.tau_scale, cfg.tau_scale);
                let id = format!("order{order}-gamma{gamma}-blocks{nb}-n{}-tau{}", cfg.n, cfg.tau_scale);
                let stability = op.check_energy_stability(&id)?;
                let lemma = op.audit_lemma_matrices();
                let lemma_min_boundary = lemma
                    .min_eig(LemmaKind::BoundaryQ)
                    .into_iter()
                    .chain(lemma.min_eig(LemmaKind::BoundaryR))
                    .fold(f64::INFINITY, f64::min);
                rows.push(AuditRow {
                    stability,
                    lemma_passed: lemma.passed(),
                    lemma_min_boundary,
                    lemma_min_interface: lemma.min_eig(LemmaKind::Interface),
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_audit_csv<W: Write>(mut w: W, rows: &[AuditRow]) -> Result<()> {
    writeln!(w, "config,eigmax,symmetry_defect,pass,lemma_pass,lemma_min_boundary,lemma_min_interface")?;
    for r in rows {
        let s = &r.stability;
        writeln!(
            w,
            "{},{:.6e},{:.6e},{},{},{:.6e},{}",
            s.config,
            s.eigmax,
            s.symmetry_defect,
            r.passed(),
            r.lemma_passed,
            r.lemma_min_boundary,
            r.lemma_min_interface.map_or(String::new(), |v| format!("{v:.6e}"))
        )?;
    }
    Ok(())
}

/// Field-line and Poincare dump settings.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    pub field: String,
    pub n: usize,
    pub order: usize,
    pub gamma: f64,
    pub delta: f64,
    pub r1: f64,
    pub substeps: usize,
    pub n_transits: usize,
    pub seeds: usize,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            field: "island".into(),
            n: 21,
            order: 2,
            gamma: 0.1,
            delta: 0.05,
            r1: 0.7,
            substeps: 64,
            n_transits: 200,
            seeds: 24,
        }
    }
}

/// Whole configuration file: one optional section per experiment.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mms: MmsConfig,
    pub island: IslandConfig,
    pub stability: StabilityConfig,
    pub trace: TraceConfig,
}

impl ExperimentConfig {
    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }
}
