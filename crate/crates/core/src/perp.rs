//! Perpendicular diffusion operator with Dirichlet and interface SATs.
//!
//! The operator is applied in weak (norm-weighted) form, `y = H P u`, and
//! divided by the diagonal norm afterwards. In this form the volume part is
//! `-A u + sum_sides w s F(u)` with `A` symmetric positive semi-definite, and
//! the SATs are built so that `H P` is symmetric. Here `F = K_n D_n u +
//! K_qr D_t u` is the conormal flux at a side node, `s` the outward sign of the
//! side and `w` the tangential norm weight.
//!
//! Dirichlet side node `p` with data `g`, normal norm weight `h_n`:
//!
//! ```text
//! row p          -= tau0 w / h_n (u_p - g_p)
//! rows k in F    += s w f_k (u_p - g_p)
//! ```
//!
//! Interface node pair `(p_a, p_b)`, jump `j = u_a - u_b`, outward fluxes
//! `phi = s F`:
//!
//! ```text
//! row p_a        -= tauI0 w j + 1/2 w (phi_a + phi_b)
//! row p_b        += tauI0 w j - 1/2 w (phi_a + phi_b)
//! rows k in F_a  += 1/2 w s_a f_a,k j
//! rows k in F_b  -= 1/2 w s_b f_b,k j
//! ```
//!
//! Block corners belong to two sides, so the volume energy available at a
//! corner node is split between two SATs. Penalties at corner nodes carry a
//! factor 2 for this reason.

use crate::error::{Error, Result};
use crate::linalg::Dense;
use crate::mesh::{assemble_diffusion_field, BlockSide, DiffusionField, MultiBlockDomain};
use rayon::prelude::*;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

/// Multiplier applied to every penalty lower bound.
pub const SAFETY_FACTOR: f64 = 1.0 + 1e-8;
pub const DENSE_CAP: usize = 5000;

/// Precomputed geometry and flux stencils of one block side.
#[derive(Debug, Clone)]
pub struct SideData {
    pub at: BlockSide,
    /// Global index of each side node.
    pub nodes: Vec<usize>,
    /// Tangential norm weights.
    pub w: Vec<f64>,
    /// Normal-direction norm weight of the boundary node.
    pub hn: f64,
    pub sign: f64,
    pub kn: Vec<f64>,
    pub kx: Vec<f64>,
    pub kt: Vec<f64>,
    /// Coefficients `f_k` of the conormal flux `F = sum_k f_k u_k` per node (global indices).
    pub flux: Vec<Vec<(usize, f64)>>,
}

impl SideData {
    fn new(domain: &MultiBlockDomain, fields: &[DiffusionField], offsets: &[usize], at: BlockSide) -> Self {
        let mesh = &domain.blocks[at.block];
        let ops = &mesh.ops;
        let f = &fields[at.block];
        let off = offsets[at.block];
        let len = ops.side_len(at.side);
        let (normal, tangential) = ops.normal_tangential(at.side);
        let nn = normal.len();
        let boundary_row = if at.side.is_high() { nn - 1 } else { 0 };
        let (nstart, ncoef) = normal.d1_row_coefficients(boundary_row);
        let (kn_all, kt_all) = if at.side.is_q() { (&f.kq, &f.kr) } else { (&f.kr, &f.kq) };
        // Index of logical node (normal position a, tangential position t).
        let idx = |a: usize, t: usize| if at.side.is_q() { ops.idx(a, t) } else { ops.idx(t, a) };
        let mut sd = SideData {
            at,
            nodes: Vec::with_capacity(len),
            w: tangential.weights().to_vec(),
            hn: normal.weights()[0],
            sign: at.side.outward_sign(),
            kn: Vec::with_capacity(len),
            kx: Vec::with_capacity(len),
            kt: Vec::with_capacity(len),
            flux: Vec::with_capacity(len),
        };
        for t in 0..len {
            let p = idx(boundary_row, t);
            let (kn, kx) = (kn_all[p], f.kqr[p]);
            let mut st = Vec::new();
            for (m, c) in ncoef.iter().enumerate() {
                st.push((off + idx(nstart + m, t), kn * c));
            }
            let (tstart, tcoef) = tangential.d1_row_coefficients(t);
            for (m, c) in tcoef.iter().enumerate() {
                st.push((off + idx(boundary_row, tstart + m), kx * c));
            }
            sd.nodes.push(off + p);
            sd.kn.push(kn);
            sd.kx.push(kx);
            sd.kt.push(kt_all[p]);
            sd.flux.push(st);
        }
        sd
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Corner multiplicity of node `t`.
    pub fn corner_factor(&self, t: usize) -> f64 {
        if t == 0 || t + 1 == self.len() {
            2.0
        } else {
            1.0
        }
    }

    fn flux_value(&self, t: usize, u: &[f64]) -> f64 {
        self.flux[t].iter().map(|&(k, c)| c * u[k]).sum()
    }
}

/// SAT penalty parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltySet {
    /// Zeroth-order Dirichlet penalty per exterior side and node.
    pub dirichlet: Vec<Vec<f64>>,
    /// Zeroth-order interface penalty per interface and node (indexed along side `a`).
    pub interface: Vec<Vec<f64>>,
    /// First-order Dirichlet penalty (transpose-flux term); fixed.
    pub tau_1: f64,
    pub tau_i1: f64,
    pub tau_i2: f64,
}

/// Penalties meeting the energy-stability lower bounds:
///
/// - Dirichlet: `tau0 = s c max_side(K_n)`, with `c = 2` at corners;
/// - interface: `tauI0 = s/4 (c_a K_n,a / h_n,a + c_b K_n,b / h_n,b)` nodewise.
pub fn compute_penalties(exterior: &[SideData], interfaces: &[(SideData, SideData, bool)]) -> PenaltySet {
    let dirichlet = exterior
        .iter()
        .map(|sd| {
            let kmax = sd.kn.iter().cloned().fold(0.0, f64::max);
            (0..sd.len()).map(|t| SAFETY_FACTOR * sd.corner_factor(t) * kmax).collect()
        })
        .collect();
    let interface = interfaces
        .iter()
        .map(|(a, b, reversed)| {
            (0..a.len())
                .map(|t| {
                    let s = if *reversed { b.len() - 1 - t } else { t };
                    SAFETY_FACTOR
                        * 0.25
                        * (a.corner_factor(t) * a.kn[t] / a.hn + b.corner_factor(s) * b.kn[s] / b.hn)
                })
                .collect()
        })
        .collect();
    PenaltySet { dirichlet, interface, tau_1: -1.0, tau_i1: 0.5, tau_i2: -0.5 }
}

/// Perpendicular operator `P` on a multi-block domain.
#[derive(Clone)]
pub struct PerpOperator {
    pub domain: Arc<MultiBlockDomain>,
    pub fields: Vec<DiffusionField>,
    pub penalties: PenaltySet,
    pub exterior: Vec<SideData>,
    pub interfaces: Vec<(SideData, SideData, bool)>,
    offsets: Vec<usize>,
    h: Vec<f64>,
    jh: Vec<f64>,
}

impl fmt::Debug for PerpOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PerpOperator")
            .field("unknowns", &self.len())
            .field("blocks", &self.domain.blocks.len())
            .finish()
    }
}

impl PerpOperator {
    /// Operator for nodal `kperp` in global layout, with computed penalties.
    pub fn new(domain: Arc<MultiBlockDomain>, kperp: &[f64]) -> Result<Self> {
        let offsets = domain.offsets();
        let total = domain.total_len();
        if kperp.len() != total {
            return Err(Error::LengthMismatch { expected: total, got: kperp.len() });
        }
        let fields = domain
            .blocks
            .iter()
            .enumerate()
            .map(|(b, m)| assemble_diffusion_field(m, &kperp[offsets[b]..offsets[b + 1]]))
            .collect::<Result<Vec<_>>>()?;
        let exterior: Vec<SideData> =
            domain.exterior.iter().map(|e| SideData::new(&domain, &fields, &offsets, e.at)).collect();
        let interfaces: Vec<(SideData, SideData, bool)> = domain
            .interfaces
            .iter()
            .map(|i| {
                (
                    SideData::new(&domain, &fields, &offsets, i.a),
                    SideData::new(&domain, &fields, &offsets, i.b),
                    i.reversed,
                )
            })
            .collect();
        let penalties = compute_penalties(&exterior, &interfaces);
        let h = domain.h_weights();
        let jh = domain.jh_weights();
        Ok(Self { domain, fields, penalties, exterior, interfaces, offsets, h, jh })
    }

    pub fn with_constant_kperp(domain: Arc<MultiBlockDomain>, kperp: f64) -> Result<Self> {
        let n = domain.total_len();
        Self::new(domain, &vec![kperp; n])
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    /// Bare norm weights.
    pub fn h(&self) -> &[f64] {
        &self.h
    }

    /// Jacobian-weighted norm weights.
    pub fn jh(&self) -> &[f64] {
        &self.jh
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Replace the penalties (for negative controls and sensitivity studies).
    pub fn set_penalties(&mut self, p: PenaltySet) -> Result<()> {
        let ok = p.dirichlet.len() == self.exterior.len()
            && p.interface.len() == self.interfaces.len()
            && p.dirichlet.iter().zip(&self.exterior).all(|(v, s)| v.len() == s.len())
            && p.interface.iter().zip(&self.interfaces).all(|(v, s)| v.len() == s.0.len());
        if !ok {
            return Err(Error::InvalidParameter("penalty layout does not match operator".into()));
        }
        self.penalties = p;
        Ok(())
    }

    /// Scale every Dirichlet and interface zeroth-order penalty.
    pub fn scale_penalties(&mut self, dirichlet: f64, interface: f64) {
        self.penalties.dirichlet.iter_mut().flatten().for_each(|t| *t *= dirichlet);
        self.penalties.interface.iter_mut().flatten().for_each(|t| *t *= interface);
    }

    /// Weak-form volume term of one block: `-A u + sum_sides w s F(u)` is
    /// split; this returns `-A u` only.
    fn volume_block(&self, b: usize, u: &[f64], out: &mut [f64]) {
        let mesh = &self.domain.blocks[b];
        let ops = &mesh.ops;
        let f = &self.fields[b];
        let n = ops.len();
        let h = ops.weights();
        let mut a = vec![0.0; n];
        let mut c = vec![0.0; n];
        ops.dq_into(u, &mut a);
        ops.dr_into(u, &mut c);
        let mut fq = vec![0.0; n];
        let mut fr = vec![0.0; n];
        for k in 0..n {
            fq[k] = h[k] * (f.kq[k] * a[k] + f.kqr[k] * c[k]);
            fr[k] = h[k] * (f.kqr[k] * a[k] + f.kr[k] * c[k]);
        }
        ops.dqt_into(&fq, &mut a);
        ops.drt_into(&fr, &mut c);
        for k in 0..n {
            out[k] = a[k] + c[k];
        }
        ops.add_remainder_q(&f.kq, u, out);
        ops.add_remainder_r(&f.kr, u, out);
        for o in out.iter_mut() {
            *o = -*o;
        }
    }

    /// `y = H (P u + G(g))`. With `g = None` boundary data is zero.
    pub fn apply_weak(&self, u: &[f64], g: Option<&[f64]>, y: &mut [f64]) -> Result<()> {
        let n = self.len();
        if u.len() != n || y.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: u.len().min(y.len()) });
        }
        if let Some(g) = g {
            if g.len() != n {
                return Err(Error::MissingBoundaryData { block: 0, side: format!("expected {n} values, got {}", g.len()) });
            }
        }
        let off = &self.offsets;
        let mut parts: Vec<&mut [f64]> = Vec::with_capacity(self.domain.blocks.len());
        let mut rest = &mut *y;
        for b in 0..self.domain.blocks.len() {
            let (head, tail) = rest.split_at_mut(off[b + 1] - off[b]);
            parts.push(head);
            rest = tail;
        }
        parts.into_par_iter().enumerate().for_each(|(b, out)| {
            self.volume_block(b, &u[off[b]..off[b + 1]], out);
        });
        self.apply_boundary(u, g, y);
        Ok(())
    }

    fn apply_boundary(&self, u: &[f64], g: Option<&[f64]>, y: &mut [f64]) {
        let all_sides = self.exterior.iter().chain(self.interfaces.iter().flat_map(|(a, b, _)| [a, b]));
        for sd in all_sides {
            for t in 0..sd.len() {
                y[sd.nodes[t]] += sd.sign * sd.w[t] * sd.flux_value(t, u);
            }
        }
        self.apply_sat_dirichlet_into(u, g, y);
        self.apply_sat_interface_into(u, y);
    }

    fn apply_sat_dirichlet_into(&self, u: &[f64], g: Option<&[f64]>, y: &mut [f64]) {
        for (sd, tau) in self.exterior.iter().zip(&self.penalties.dirichlet) {
            for t in 0..sd.len() {
                let p = sd.nodes[t];
                let e = u[p] - g.map_or(0.0, |g| g[p]);
                y[p] -= tau[t] * sd.w[t] / sd.hn * e;
                let s = -self.penalties.tau_1 * sd.sign * sd.w[t] * e;
                for &(k, c) in &sd.flux[t] {
                    y[k] += s * c;
                }
            }
        }
    }

    fn apply_sat_interface_into(&self, u: &[f64], y: &mut [f64]) {
        let p = &self.penalties;
        for ((a, b, reversed), tau) in self.interfaces.iter().zip(&p.interface) {
            let len = a.len();
            for t in 0..len {
                let s = if *reversed { len - 1 - t } else { t };
                let (pa, pb) = (a.nodes[t], b.nodes[s]);
                let w = a.w[t];
                let jump = u[pa] - u[pb];
                let phi = a.sign * a.flux_value(t, u) + b.sign * b.flux_value(s, u);
                y[pa] += -tau[t] * w * jump - p.tau_i1 * w * phi;
                y[pb] += tau[t] * w * jump - p.tau_i1 * w * phi;
                let ca = -p.tau_i2 * w * a.sign * jump;
                for &(k, c) in &a.flux[t] {
                    y[k] += ca * c;
                }
                let cb = p.tau_i2 * w * b.sign * jump;
                for &(k, c) in &b.flux[s] {
                    y[k] += cb * c;
                }
            }
        }
    }

    /// `P u + G(g)`: weak form divided by the bare norm.
    pub fn apply(&self, u: &[f64], g: Option<&[f64]>) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.len()];
        self.apply_weak(u, g, &mut y)?;
        for (v, h) in y.iter_mut().zip(&self.h) {
            *v /= h;
        }
        Ok(y)
    }

    /// Time derivative of the semi-discretisation: `(J H)^-1 H (P u + G(g))`.
    pub fn rate(&self, u: &[f64], g: Option<&[f64]>, out: &mut [f64]) -> Result<()> {
        self.apply_weak(u, g, out)?;
        for (v, jh) in out.iter_mut().zip(&self.jh) {
            *v /= jh;
        }
        Ok(())
    }

    /// Interior operator alone (no boundary or interface terms), block `b`.
    pub fn apply_dperp_block(&self, b: usize, u: &[f64]) -> Result<Vec<f64>> {
        let mesh = &self.domain.blocks[b];
        if u.len() != mesh.len() {
            return Err(Error::LengthMismatch { expected: mesh.len(), got: u.len() });
        }
        let mut out = vec![0.0; u.len()];
        self.volume_block(b, u, &mut out);
        let off = self.offsets[b];
        let sides = self.exterior.iter().chain(self.interfaces.iter().flat_map(|(a, b, _)| [a, b]));
        for sd in sides.filter(|sd| sd.at.block == b) {
            for t in 0..sd.len() {
                let f: f64 = sd.flux[t].iter().map(|&(k, c)| c * u[k - off]).sum();
                out[sd.nodes[t] - off] += sd.sign * sd.w[t] * f;
            }
        }
        for (v, h) in out.iter_mut().zip(mesh.ops.weights()) {
            *v /= h;
        }
        Ok(out)
    }

    /// Increment of the Dirichlet SATs alone, `H^-1` applied.
    pub fn apply_sat_dirichlet(&self, u: &[f64], g: Option<&[f64]>) -> Result<Vec<f64>> {
        let n = self.len();
        if u.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: u.len() });
        }
        if let Some(g) = g {
            if g.len() != n {
                return Err(Error::MissingBoundaryData { block: 0, side: "all".into() });
            }
        }
        let mut y = vec![0.0; n];
        self.apply_sat_dirichlet_into(u, g, &mut y);
        y.iter_mut().zip(&self.h).for_each(|(v, h)| *v /= h);
        Ok(y)
    }

    /// Increment of the interface SATs alone, `H^-1` applied.
    pub fn apply_sat_interface(&self, u: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        if u.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: u.len() });
        }
        let mut y = vec![0.0; n];
        self.apply_sat_interface_into(u, &mut y);
        y.iter_mut().zip(&self.h).for_each(|(v, h)| *v /= h);
        Ok(y)
    }

    /// Dense `P` (zero boundary data).
    pub fn assemble_dense(&self, cap: usize) -> Result<Dense> {
        let n = self.len();
        if n > cap {
            return Err(Error::DenseCapExceeded { unknowns: n, cap });
        }
        Ok(Dense::from_operator(n, |u, out| {
            self.apply_weak(u, None, out).expect("sizes checked");
            out.iter_mut().zip(&self.h).for_each(|(v, h)| *v /= h);
        }))
    }

    /// Energy-stability audit of `H P + (H P)^T`.
    pub fn check_energy_stability(&self, config: &str) -> Result<StabilityReport> {
        let n = self.len();
        if n > DENSE_CAP {
            return Err(Error::DenseCapExceeded { unknowns: n, cap: DENSE_CAP });
        }
        let hp = Dense::from_operator(n, |u, out| self.apply_weak(u, None, out).expect("sizes checked"));
        let mut s = Dense::zeros(n);
        for i in 0..n {
            for j in 0..n {
                s.set(i, j, hp.get(i, j) + hp.get(j, i));
            }
        }
        let eig = s.symmetric_eigenvalues();
        let eigmax = *eig.last().unwrap_or(&0.0);
        let norm = eig.iter().fold(0.0f64, |a, e| a.max(e.abs()));
        Ok(StabilityReport {
            config: config.to_string(),
            eigmax,
            norm,
            symmetry_defect: hp.symmetry_defect() / hp.max_abs().max(f64::MIN_POSITIVE),
        })
    }

    /// Build the 3x3 boundary matrices and 5x5 interface matrices at every
    /// boundary and interface node and check them for semi-definiteness.
    ///
    /// In variables `(v / h_n, D_n u, D_t u)` the boundary quadratic is
    /// `[[tau, K_n, K_x], [K_n, K_n, K_x], [K_x, K_x, K_t]]`; at corners the
    /// penalty is divided by the corner multiplicity. The interface matrix in
    /// `(jump, D_n u_a, D_t u_a, D_n u_b, D_t u_b)` pairs the jump penalty with
    /// each side's share of volume energy.
    pub fn audit_lemma_matrices(&self) -> LemmaAudit {
        let mut audit = LemmaAudit::default();
        for (e, (sd, tau)) in self.exterior.iter().zip(&self.penalties.dirichlet).enumerate() {
            for t in 0..sd.len() {
                let c = sd.corner_factor(t);
                let (kn, kx, kt) = (sd.kn[t], sd.kx[t], sd.kt[t]);
                let m = [[tau[t] / c, kn, kx], [kn, kn, kx], [kx, kx, kt]];
                let d = dense_from(&m);
                audit.push(LemmaEntry {
                    kind: if sd.at.side.is_q() { LemmaKind::BoundaryQ } else { LemmaKind::BoundaryR },
                    index: e,
                    node: t,
                    eigmin: d.symmetric_eigenvalues()[0],
                    scale: d.max_abs(),
                });
            }
        }
        for (i, ((a, b, reversed), tau)) in self.interfaces.iter().zip(&self.penalties.interface).enumerate() {
            for t in 0..a.len() {
                let s = if *reversed { b.len() - 1 - t } else { t };
                let ha = a.hn / a.corner_factor(t);
                let hb = b.hn / b.corner_factor(s);
                let (sa, sb) = (a.sign, b.sign);
                let m = [
                    [tau[t], -0.5 * sa * a.kn[t], -0.5 * sa * a.kx[t], 0.5 * sb * b.kn[s], 0.5 * sb * b.kx[s]],
                    [-0.5 * sa * a.kn[t], ha * a.kn[t], ha * a.kx[t], 0.0, 0.0],
                    [-0.5 * sa * a.kx[t], ha * a.kx[t], ha * a.kt[t], 0.0, 0.0],
                    [0.5 * sb * b.kn[s], 0.0, 0.0, hb * b.kn[s], hb * b.kx[s]],
                    [0.5 * sb * b.kx[s], 0.0, 0.0, hb * b.kx[s], hb * b.kt[s]],
                ];
                let d = dense_from(&m);
                audit.push(LemmaEntry {
                    kind: LemmaKind::Interface,
                    index: i,
                    node: t,
                    eigmin: d.symmetric_eigenvalues()[0],
                    scale: d.max_abs(),
                });
            }
        }
        audit
    }
}

fn dense_from<const N: usize>(m: &[[f64; N]; N]) -> Dense {
    let mut d = Dense::zeros(N);
    for i in 0..N {
        for j in 0..N {
            d.set(i, j, m[i][j]);
        }
    }
    d
}

/// Result of [`PerpOperator::check_energy_stability`].
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub config: String,
    /// Largest eigenvalue of `H P + (H P)^T`.
    pub eigmax: f64,
    /// Spectral norm of `H P + (H P)^T`.
    pub norm: f64,
    /// `max |HP - (HP)^T| / max |HP|`.
    pub symmetry_defect: f64,
}

impl StabilityReport {
    pub const REL_TOL: f64 = 1e-10;

    pub fn passed(&self) -> bool {
        self.eigmax <= Self::REL_TOL * self.norm
    }

    pub fn csv_header() -> &'static str {
        "config,eigmax,symmetry_defect,pass"
    }

    pub fn csv_row(&self) -> String {
        format!("{},{:.6e},{:.6e},{}", self.config, self.eigmax, self.symmetry_defect, self.passed())
    }
}

pub fn write_stability_csv<W: Write>(mut w: W, reports: &[StabilityReport]) -> Result<()> {
    writeln!(w, "{}", StabilityReport::csv_header())?;
    for r in reports {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LemmaKind {
    BoundaryQ,
    BoundaryR,
    Interface,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaEntry {
    pub kind: LemmaKind,
    /// Exterior side or interface index.
    pub index: usize,
    pub node: usize,
    pub eigmin: f64,
    pub scale: f64,
}

impl LemmaEntry {
    pub const REL_TOL: f64 = 1e-12;

    pub fn passed(&self) -> bool {
        self.eigmin >= -Self::REL_TOL * self.scale.max(1.0)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LemmaAudit {
    pub entries: Vec<LemmaEntry>,
}

impl LemmaAudit {
    fn push(&mut self, e: LemmaEntry) {
        self.entries.push(e);
    }

    pub fn passed(&self) -> bool {
        self.entries.iter().all(LemmaEntry::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &LemmaEntry> {
        self.entries.iter().filter(|e| !e.passed())
    }

    pub fn count(&self, kind: LemmaKind) -> usize {
        self.entries.iter().filter(|e| e.kind == kind).count()
    }

    /// Smallest eigenvalue per kind.
    pub fn min_eig(&self, kind: LemmaKind) -> Option<f64> {
        self.entries.iter().filter(|e| e.kind == kind).map(|e| e.eigmin).reduce(f64::min)
    }
}
