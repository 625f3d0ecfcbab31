//! Field-line map, parallel penalty and the parallel update.

use crate::error::{Error, Result};
use crate::mesh::{MultiBlockDomain, Point};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::io::Write;

/// Poloidal magnetic field `(B_x, B_y)` with unit toroidal component.
pub trait MagneticField: Send + Sync {
    fn eval(&self, p: Point) -> Result<Point>;
}

impl<F: Fn(Point) -> Result<Point> + Send + Sync> MagneticField for F {
    fn eval(&self, p: Point) -> Result<Point> {
        self(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParallelConfig {
    pub kappa_par: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Trace length in the periodic coordinate.
    pub delta_zeta: f64,
    /// Fixed RK4 steps per trace.
    pub substeps: usize,
    /// Multiply the parallel penalty by the time step.
    pub include_dt_factor: bool,
}

impl Default for ParallelConfig {
    fn default() -> Self {
        Self { kappa_par: 1.0, alpha: 0.1, beta: 2.0, delta_zeta: 2.0 * PI, substeps: 64, include_dt_factor: false }
    }
}

impl ParallelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::InvalidParameter(format!("beta must be non-negative, got {}", self.beta)));
        }
        if self.substeps < 4 {
            return Err(Error::InvalidParameter(format!("need at least 4 substeps, got {}", self.substeps)));
        }
        if !(self.kappa_par >= 0.0) || !self.delta_zeta.is_finite() {
            return Err(Error::InvalidParameter("kappa_par and delta_zeta must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// RK4 trajectory of `dx/dzeta = B(x)` over `direction * delta_zeta`,
/// including the start point.
pub fn trace_trajectory(field: &dyn MagneticField, p0: Point, direction: f64, cfg: &ParallelConfig) -> Result<Vec<Point>> {
    let h = direction * cfg.delta_zeta / cfg.substeps as f64;
    let mut path = Vec::with_capacity(cfg.substeps + 1);
    let mut p = p0;
    path.push(p);
    let add = |p: Point, k: Point, s: f64| [p[0] + s * k[0], p[1] + s * k[1]];
    for _ in 0..cfg.substeps {
        let k1 = field.eval(p)?;
        let k2 = field.eval(add(p, k1, 0.5 * h))?;
        let k3 = field.eval(add(p, k2, 0.5 * h))?;
        let k4 = field.eval(add(p, k3, h))?;
        for d in 0..2 {
            p[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
        }
        path.push(p);
    }
    Ok(path)
}

/// End point of a single trace.
pub fn trace_point(field: &dyn MagneticField, p0: Point, direction: f64, cfg: &ParallelConfig) -> Result<Point> {
    Ok(*trace_trajectory(field, p0, direction, cfg)?.last().expect("non-empty"))
}

/// Bicubic Hermite stencil on a logical cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermiteStencil {
    pub block: usize,
    pub i: usize,
    pub j: usize,
    /// Local coordinates in `[0, 1]` within the cell.
    pub a: f64,
    pub b: f64,
}

impl HermiteStencil {
    pub fn new(domain: &MultiBlockDomain, block: usize, q: f64, r: f64) -> Self {
        let m = &domain.blocks[block];
        let (nq, nr) = (m.nq(), m.nr());
        let fq = q.clamp(0.0, 1.0) * (nq - 1) as f64;
        let fr = r.clamp(0.0, 1.0) * (nr - 1) as f64;
        let i = (fq.floor() as usize).min(nq - 2);
        let j = (fr.floor() as usize).min(nr - 2);
        Self { block, i, j, a: fq - i as f64, b: fr - j as f64 }
    }

    /// Basis weights `(value, q-slope, r-slope, twist)` for each corner
    /// `(di, dj)`, with slopes in cell units.
    fn basis(&self) -> [[[f64; 4]; 2]; 2] {
        let h = |t: f64| [2.0 * t.powi(3) - 3.0 * t * t + 1.0, -2.0 * t.powi(3) + 3.0 * t * t];
        let k = |t: f64| [t.powi(3) - 2.0 * t * t + t, t.powi(3) - t * t];
        let (ha, ka, hb, kb) = (h(self.a), k(self.a), h(self.b), k(self.b));
        let mut out = [[[0.0; 4]; 2]; 2];
        for di in 0..2 {
            for dj in 0..2 {
                out[di][dj] = [ha[di] * hb[dj], ka[di] * hb[dj], ha[di] * kb[dj], ka[di] * kb[dj]];
            }
        }
        out
    }
}

/// Where a traced point ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Landing {
    Inside(HermiteStencil),
    /// The trace left the domain; `exit` is the crossing point found by
    /// bisection on the trajectory.
    Exit { exit: Point },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub point: Point,
    pub landing: Landing,
}

impl Target {
    pub fn is_exit(&self) -> bool {
        matches!(self.landing, Landing::Exit { .. })
    }
}

/// Forward and backward traced targets of every node, in global layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldLineMap {
    pub forward: Vec<Target>,
    pub backward: Vec<Target>,
    block_sizes: Vec<(usize, usize)>,
}

fn block_sizes(domain: &MultiBlockDomain) -> Vec<(usize, usize)> {
    domain.blocks.iter().map(|b| (b.nq(), b.nr())).collect()
}

fn find(domain: &MultiBlockDomain, p: Point) -> Option<(usize, f64, f64)> {
    if let Some(c) = &domain.contains {
        if !c(p) {
            return None;
        }
    }
    domain.locate(p)
}

fn resolve(domain: &MultiBlockDomain, path: &[Point]) -> Target {
    let end = *path.last().expect("non-empty");
    // The cheap containment test screens the path; the block search runs at the end point.
    let mut first_out = path.iter().position(|&p| !domain.in_domain(p));
    let landing = if first_out.is_none() { find(domain, end) } else { None };
    if first_out.is_none() && landing.is_none() {
        first_out = path.iter().position(|&p| find(domain, p).is_none());
    }
    match first_out {
        None => {
            let (b, q, r) = landing.expect("checked");
            Target { point: end, landing: Landing::Inside(HermiteStencil::new(domain, b, q, r)) }
        }
        Some(0) => Target { point: end, landing: Landing::Exit { exit: path[0] } },
        Some(k) => {
            let (mut inside, mut outside) = (path[k - 1], path[k]);
            for _ in 0..60 {
                let mid = [0.5 * (inside[0] + outside[0]), 0.5 * (inside[1] + outside[1])];
                if find(domain, mid).is_some() {
                    inside = mid;
                } else {
                    outside = mid;
                }
            }
            Target { point: end, landing: Landing::Exit { exit: inside } }
        }
    }
}

/// Trace every node forward and backward by `delta_zeta`.
pub fn trace_field_lines(domain: &MultiBlockDomain, field: &dyn MagneticField, cfg: &ParallelConfig) -> Result<FieldLineMap> {
    cfg.validate()?;
    let points: Vec<Point> = domain.blocks.iter().flat_map(|b| b.x.iter().zip(&b.y).map(|(&x, &y)| [x, y])).collect();
    let traced: Vec<(Target, Target)> = points
        .par_iter()
        .map(|&p| {
            // A node where the field itself is undefined (e.g. a polar origin) is held fixed.
            if let Err(Error::FieldEvaluation { .. }) = field.eval(p) {
                log::debug!("field undefined at node ({}, {}); mapping it to itself", p[0], p[1]);
                return Ok((resolve(domain, &[p]), resolve(domain, &[p])));
            }
            let f = trace_trajectory(field, p, 1.0, cfg)?;
            let b = trace_trajectory(field, p, -1.0, cfg)?;
            Ok((resolve(domain, &f), resolve(domain, &b)))
        })
        .collect::<Result<_>>()?;
    let (forward, backward) = traced.into_iter().unzip();
    Ok(FieldLineMap { forward, backward, block_sizes: block_sizes(domain) })
}

/// Per-block `(u, D_q u, D_r u, D_q D_r u)` in cell units, for interpolation.
pub struct HermiteData {
    blocks: Vec<[Vec<f64>; 4]>,
    nr: Vec<usize>,
}

impl HermiteData {
    pub fn new(domain: &MultiBlockDomain, u: &[f64]) -> Self {
        let off = domain.offsets();
        let blocks = domain
            .blocks
            .iter()
            .enumerate()
            .map(|(b, m)| {
                let ub = u[off[b]..off[b + 1]].to_vec();
                let (dq, dr) = (1.0 / (m.nq() - 1) as f64, 1.0 / (m.nr() - 1) as f64);
                let mut uq = m.ops.dq(&ub);
                let mut ur = m.ops.dr(&ub);
                let mut uqr = m.ops.dq(&ur);
                uq.iter_mut().for_each(|v| *v *= dq);
                ur.iter_mut().for_each(|v| *v *= dr);
                uqr.iter_mut().for_each(|v| *v *= dq * dr);
                [ub, uq, ur, uqr]
            })
            .collect();
        Self { blocks, nr: domain.blocks.iter().map(|m| m.nr()).collect() }
    }

    pub fn eval(&self, s: &HermiteStencil) -> f64 {
        let data = &self.blocks[s.block];
        let nr = self.nr[s.block];
        let basis = s.basis();
        let mut acc = 0.0;
        for (di, row) in basis.iter().enumerate() {
            for (dj, w) in row.iter().enumerate() {
                let k = (s.i + di) * nr + s.j + dj;
                acc += w[0] * data[0][k] + w[1] * data[1][k] + w[2] * data[2][k] + w[3] * data[3][k];
            }
        }
        acc
    }
}

/// Interpolated forward/backward values and their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct ParallelValues {
    pub wf: Vec<f64>,
    pub wb: Vec<f64>,
    pub w: Vec<f64>,
}

/// `w = (P_f u + P_b u) / 2`; traces that leave the domain take `g` at the exit point.
pub fn apply_parallel_map(
    map: &FieldLineMap,
    domain: &MultiBlockDomain,
    u: &[f64],
    g: &(dyn Fn(Point) -> f64 + Sync),
) -> Result<ParallelValues> {
    if map.block_sizes != block_sizes(domain) {
        return Err(Error::StaleMap);
    }
    if u.len() != map.forward.len() {
        return Err(Error::LengthMismatch { expected: map.forward.len(), got: u.len() });
    }
    let data = HermiteData::new(domain, u);
    let value = |t: &Target| match t.landing {
        Landing::Inside(s) => data.eval(&s),
        Landing::Exit { exit } => g(exit),
    };
    let wf: Vec<f64> = map.forward.par_iter().map(value).collect();
    let wb: Vec<f64> = map.backward.par_iter().map(value).collect();
    let w = wf.iter().zip(&wb).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok(ParallelValues { wf, wb, w })
}

fn weighted_norm(v: impl Iterator<Item = f64>, h: &[f64]) -> f64 {
    v.zip(h).map(|(x, h)| h * x * x).sum::<f64>().sqrt()
}

/// `tau = alpha (|u - w|_H / |u|_H)^beta`, zero when `u` vanishes.
pub fn compute_tau_parallel(u: &[f64], w: &[f64], h: &[f64], cfg: &ParallelConfig) -> f64 {
    let nu = weighted_norm(u.iter().cloned(), h);
    if nu == 0.0 {
        return 0.0;
    }
    let nd = weighted_norm(u.iter().zip(w).map(|(a, b)| a - b), h);
    cfg.alpha * (nd / nu).powf(cfg.beta)
}

/// Pointwise solve of `(1 + c_i) u_i = u_half_i + c_i w_i`,
/// `c_i = f tau kappa_par / h_i` with `f = dt` only when configured.
pub fn parallel_update(u_half: &[f64], w: &[f64], tau: f64, cfg: &ParallelConfig, h: &[f64], dt: f64) -> Vec<f64> {
    let f = if cfg.include_dt_factor { dt } else { 1.0 };
    u_half
        .iter()
        .zip(w)
        .zip(h)
        .map(|((&u, &w), &h)| {
            let c = f * tau * cfg.kappa_par / h;
            if c.is_infinite() {
                w
            } else {
                (u + c * w) / (1.0 + c)
            }
        })
        .collect()
}

/// Map dump with columns `block,i,j,x_fwd,y_fwd,x_bwd,y_bwd,oob`.
pub fn write_map_csv<W: Write>(mut out: W, map: &FieldLineMap, domain: &MultiBlockDomain) -> Result<()> {
    writeln!(out, "block,i,j,x_fwd,y_fwd,x_bwd,y_bwd,oob")?;
    let mut k = 0;
    for (b, m) in domain.blocks.iter().enumerate() {
        for i in 0..m.nq() {
            for j in 0..m.nr() {
                let (f, bw) = (&map.forward[k], &map.backward[k]);
                let oob = f.is_exit() as u8 | ((bw.is_exit() as u8) << 1);
                writeln!(
                    out,
                    "{b},{i},{j},{:.12e},{:.12e},{:.12e},{:.12e},{oob}",
                    f.point[0], f.point[1], bw.point[0], bw.point[1]
                )?;
                k += 1;
            }
        }
    }
    Ok(())
}
