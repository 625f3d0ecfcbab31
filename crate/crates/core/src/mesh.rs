//! Curvilinear block meshes, metric terms, diffusion coefficients and the
//! five-block circle.

use crate::error::{Error, Result};
use crate::sbp2d::{Sbp2D, Side};
use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

pub type Point = [f64; 2];

/// Parametric curve `s in [0, 1] -> (x, y)`.
#[derive(Clone)]
pub struct BoundaryCurve(Arc<dyn Fn(f64) -> Point + Send + Sync>);

impl BoundaryCurve {
    pub fn new<F: Fn(f64) -> Point + Send + Sync + 'static>(f: F) -> Self {
        Self(Arc::new(f))
    }

    pub fn line(a: Point, b: Point) -> Self {
        Self::new(move |s| [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])])
    }

    pub fn eval(&self, s: f64) -> Point {
        (self.0)(s)
    }

    /// Same curve traversed backwards.
    pub fn reversed(&self) -> Self {
        let f = self.0.clone();
        Self(Arc::new(move |s| f(1.0 - s)))
    }
}

impl fmt::Debug for BoundaryCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BoundaryCurve({:?} -> {:?})", self.eval(0.0), self.eval(1.0))
    }
}

/// Smooth map from the logical unit square to physical space.
pub trait BlockMap: Send + Sync {
    fn eval(&self, q: f64, r: f64) -> Point;

    /// `[[x_q, x_r], [y_q, y_r]]`, by central differences unless overridden.
    fn jacobian(&self, q: f64, r: f64) -> [[f64; 2]; 2] {
        let h = 1e-6;
        let (a, b) = (self.eval(q + h, r), self.eval(q - h, r));
        let (c, d) = (self.eval(q, r + h), self.eval(q, r - h));
        [
            [(a[0] - b[0]) / (2.0 * h), (c[0] - d[0]) / (2.0 * h)],
            [(a[1] - b[1]) / (2.0 * h), (c[1] - d[1]) / (2.0 * h)],
        ]
    }
}

impl<F: Fn(f64, f64) -> Point + Send + Sync> BlockMap for F {
    fn eval(&self, q: f64, r: f64) -> Point {
        self(q, r)
    }
}

/// Transfinite (Coons) interpolation of four boundary curves.
///
/// `c1` is the bottom edge (`r = 0`, parameter `q`), `c2` the right edge
/// (`q = 1`, parameter `r`), `c3` the top edge (`r = 1`, parameter `q`) and
/// `c4` the left edge (`q = 0`, parameter `r`).
#[derive(Debug, Clone)]
pub struct CoonsMap {
    c: [BoundaryCurve; 4],
    corners: [Point; 4],
}

pub const CORNER_TOL: f64 = 1e-12;

impl CoonsMap {
    pub fn new(c1: BoundaryCurve, c2: BoundaryCurve, c3: BoundaryCurve, c4: BoundaryCurve) -> Result<Self> {
        let pairs = [
            (c1.eval(0.0), c4.eval(0.0)),
            (c1.eval(1.0), c2.eval(0.0)),
            (c3.eval(0.0), c4.eval(1.0)),
            (c3.eval(1.0), c2.eval(1.0)),
        ];
        let mismatch = pairs
            .iter()
            .map(|(a, b)| (a[0] - b[0]).hypot(a[1] - b[1]))
            .fold(0.0, f64::max);
        if mismatch > CORNER_TOL {
            return Err(Error::CornerMismatch(mismatch));
        }
        let corners = [pairs[0].0, pairs[1].0, pairs[2].0, pairs[3].0];
        Ok(Self { c: [c1, c2, c3, c4], corners })
    }
}

impl BlockMap for CoonsMap {
    fn eval(&self, q: f64, r: f64) -> Point {
        let [c1, c2, c3, c4] = &self.c;
        let (b, rt, t, l) = (c1.eval(q), c2.eval(r), c3.eval(q), c4.eval(r));
        let [p00, p10, p01, p11] = self.corners;
        let mut out = [0.0; 2];
        for k in 0..2 {
            out[k] = (1.0 - r) * b[k] + r * t[k] + (1.0 - q) * l[k] + q * rt[k]
                - ((1.0 - q) * (1.0 - r) * p00[k]
                    + q * (1.0 - r) * p10[k]
                    + (1.0 - q) * r * p01[k]
                    + q * r * p11[k]);
        }
        out
    }
}

/// Coons-patch node coordinates on a uniform `nq x nr` logical grid.
pub fn coons_patch(
    c1: BoundaryCurve,
    c2: BoundaryCurve,
    c3: BoundaryCurve,
    c4: BoundaryCurve,
    nq: usize,
    nr: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if nq < 3 || nr < 3 {
        return Err(Error::InvalidParameter(format!("coons patch needs at least 3x3 nodes, got {nq}x{nr}")));
    }
    let map = CoonsMap::new(c1, c2, c3, c4)?;
    Ok(sample_map(&map, nq, nr))
}

fn sample_map(map: &dyn BlockMap, nq: usize, nr: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(nq * nr);
    let mut y = Vec::with_capacity(nq * nr);
    for i in 0..nq {
        for j in 0..nr {
            let p = map.eval(i as f64 / (nq - 1) as f64, j as f64 / (nr - 1) as f64);
            x.push(p[0]);
            y.push(p[1]);
        }
    }
    (x, y)
}

/// Parameters of the sinh grid-packing function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PackingParams {
    pub alpha: f64,
    pub r_s: f64,
}

impl PackingParams {
    pub const MIN_ALPHA: f64 = 0.05;
    pub const WARN_ALPHA: f64 = 0.08;

    pub fn new(alpha: f64, r_s: f64) -> Result<Self> {
        if !(alpha >= Self::MIN_ALPHA) {
            return Err(Error::InvalidParameter(format!(
                "packing alpha {alpha} below minimum {}",
                Self::MIN_ALPHA
            )));
        }
        if !(0.0..=1.0).contains(&r_s) {
            return Err(Error::InvalidParameter(format!("packing centre {r_s} outside [0, 1]")));
        }
        if alpha < Self::WARN_ALPHA {
            log::warn!("packing alpha {alpha} is tight; field-line interpolation may degrade");
        }
        Ok(Self { alpha, r_s })
    }
}

/// `u(s) = r_s + alpha sinh(asinh((1 - r_s)/alpha) s + asinh(-r_s/alpha) (1 - s))`.
pub fn pack_points(s: f64, p: &PackingParams) -> f64 {
    let a = ((1.0 - p.r_s) / p.alpha).asinh();
    let b = (-p.r_s / p.alpha).asinh();
    p.r_s + p.alpha * (a * s + b * (1.0 - s)).sinh()
}

/// A block map composed with packing of either logical coordinate.
pub struct PackedMap {
    pub inner: Arc<dyn BlockMap>,
    pub q: Option<PackingParams>,
    pub r: Option<PackingParams>,
}

impl BlockMap for PackedMap {
    fn eval(&self, q: f64, r: f64) -> Point {
        let q = self.q.as_ref().map_or(q, |p| pack_points(q, p));
        let r = self.r.as_ref().map_or(r, |p| pack_points(r, p));
        self.inner.eval(q, r)
    }
}

/// Metric terms on a block.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub jac: Vec<f64>,
    pub qx: Vec<f64>,
    pub qy: Vec<f64>,
    pub rx: Vec<f64>,
    pub ry: Vec<f64>,
}

/// Metrics via SBP differentiation of the coordinates.
pub fn compute_metrics(x: &[f64], y: &[f64], ops: &Sbp2D, block: usize) -> Result<Metrics> {
    let n = ops.len();
    for len in [x.len(), y.len()] {
        if len != n {
            return Err(Error::LengthMismatch { expected: n, got: len });
        }
    }
    let (xq, xr, yq, yr) = (ops.dq(x), ops.dr(x), ops.dq(y), ops.dr(y));
    let mut m = Metrics {
        jac: vec![0.0; n],
        qx: vec![0.0; n],
        qy: vec![0.0; n],
        rx: vec![0.0; n],
        ry: vec![0.0; n],
    };
    for k in 0..n {
        let j = xq[k] * yr[k] - xr[k] * yq[k];
        if !(j > 0.0) {
            let nr = ops.nr();
            return Err(Error::NonPositiveJacobian { block, i: k / nr, j: k % nr, value: j });
        }
        m.jac[k] = j;
        m.qx[k] = yr[k] / j;
        m.qy[k] = -xr[k] / j;
        m.rx[k] = -yq[k] / j;
        m.ry[k] = xq[k] / j;
    }
    Ok(m)
}

/// One logical block with coordinates, metrics and its SBP operators.
#[derive(Clone)]
pub struct BlockMesh {
    pub ops: Sbp2D,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub metrics: Metrics,
    pub map: Option<Arc<dyn BlockMap>>,
}

impl fmt::Debug for BlockMesh {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlockMesh")
            .field("nq", &self.nq())
            .field("nr", &self.nr())
            .field("analytic_map", &self.map.is_some())
            .finish()
    }
}

impl BlockMesh {
    pub fn from_coords(x: Vec<f64>, y: Vec<f64>, ops: Sbp2D, block: usize) -> Result<Self> {
        let metrics = compute_metrics(&x, &y, &ops, block)?;
        Ok(Self { ops, x, y, metrics, map: None })
    }

    pub fn from_map(map: Arc<dyn BlockMap>, order: usize, nq: usize, nr: usize, block: usize) -> Result<Self> {
        let ops = Sbp2D::unit(order, nq, nr)?;
        let (x, y) = sample_map(map.as_ref(), nq, nr);
        let mut mesh = Self::from_coords(x, y, ops, block)?;
        mesh.map = Some(map);
        Ok(mesh)
    }

    pub fn nq(&self) -> usize {
        self.ops.nq()
    }

    pub fn nr(&self) -> usize {
        self.ops.nr()
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn jac(&self) -> &[f64] {
        &self.metrics.jac
    }

    /// Physical position at logical `(q, r)`: the analytic map if present,
    /// bilinear interpolation of the nodes otherwise.
    pub fn position(&self, q: f64, r: f64) -> Point {
        match &self.map {
            Some(m) => m.eval(q, r),
            None => self.bilinear(q, r),
        }
    }

    fn bilinear(&self, q: f64, r: f64) -> Point {
        let (nq, nr) = (self.nq(), self.nr());
        let fq = (q * (nq - 1) as f64).clamp(0.0, (nq - 1) as f64);
        let fr = (r * (nr - 1) as f64).clamp(0.0, (nr - 1) as f64);
        let i = (fq.floor() as usize).min(nq - 2);
        let j = (fr.floor() as usize).min(nr - 2);
        let (a, b) = (q * (nq - 1) as f64 - i as f64, r * (nr - 1) as f64 - j as f64);
        let mut out = [0.0; 2];
        for (k, c) in [&self.x, &self.y].into_iter().enumerate() {
            let v = |ii: usize, jj: usize| c[ii * nr + jj];
            out[k] = (1.0 - a) * (1.0 - b) * v(i, j)
                + a * (1.0 - b) * v(i + 1, j)
                + (1.0 - a) * b * v(i, j + 1)
                + a * b * v(i + 1, j + 1);
        }
        out
    }

    fn position_jacobian(&self, q: f64, r: f64) -> [[f64; 2]; 2] {
        match &self.map {
            Some(m) => m.jacobian(q, r),
            None => {
                let h = 1e-7;
                let (a, b) = (self.bilinear(q + h, r), self.bilinear(q - h, r));
                let (c, d) = (self.bilinear(q, r + h), self.bilinear(q, r - h));
                [
                    [(a[0] - b[0]) / (2.0 * h), (c[0] - d[0]) / (2.0 * h)],
                    [(a[1] - b[1]) / (2.0 * h), (c[1] - d[1]) / (2.0 * h)],
                ]
            }
        }
    }

    /// Logical coordinates of the physical point `p`, if it lies in the block
    /// (up to `tol` in logical units).
    pub fn locate(&self, p: Point, tol: f64) -> Option<(f64, f64)> {
        let (nq, nr) = (self.nq(), self.nr());
        // Seed from a coarse sample of the nodes.
        let stride_q = ((nq - 1) / 8).max(1);
        let stride_r = ((nr - 1) / 8).max(1);
        let mut best = (f64::INFINITY, 0, 0);
        let mut i = 0;
        loop {
            let mut j = 0;
            loop {
                let k = i * nr + j;
                let d = (self.x[k] - p[0]).powi(2) + (self.y[k] - p[1]).powi(2);
                if d < best.0 {
                    best = (d, i, j);
                }
                if j == nr - 1 {
                    break;
                }
                j = (j + stride_r).min(nr - 1);
            }
            if i == nq - 1 {
                break;
            }
            i = (i + stride_q).min(nq - 1);
        }
        let mut q = best.1 as f64 / (nq - 1) as f64;
        let mut r = best.2 as f64 / (nr - 1) as f64;
        for _ in 0..60 {
            let x = self.position(q, r);
            let (fx, fy) = (x[0] - p[0], x[1] - p[1]);
            let jm = self.position_jacobian(q, r);
            let det = jm[0][0] * jm[1][1] - jm[0][1] * jm[1][0];
            if det.abs() < 1e-300 {
                return None;
            }
            let dq = (jm[1][1] * fx - jm[0][1] * fy) / det;
            let dr = (-jm[1][0] * fx + jm[0][0] * fy) / det;
            q = (q - dq).clamp(-0.5, 1.5);
            r = (r - dr).clamp(-0.5, 1.5);
            if dq.abs() + dr.abs() < 1e-15 {
                break;
            }
        }
        let x = self.position(q, r);
        let resid = (x[0] - p[0]).hypot(x[1] - p[1]);
        let inside = (-tol..=1.0 + tol).contains(&q) && (-tol..=1.0 + tol).contains(&r);
        if inside && resid < 1e-9 {
            Some((q.clamp(0.0, 1.0), r.clamp(0.0, 1.0)))
        } else {
            None
        }
    }
}

/// Nodewise curvilinear diffusion coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionField {
    pub kperp: Vec<f64>,
    pub kq: Vec<f64>,
    pub kr: Vec<f64>,
    pub kqr: Vec<f64>,
}

/// `K_q = J |grad q|^2 k`, `K_r = J |grad r|^2 k`, `K_qr = J (grad q . grad r) k`.
pub fn assemble_diffusion_field(mesh: &BlockMesh, kperp: &[f64]) -> Result<DiffusionField> {
    let n = mesh.len();
    if kperp.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: kperp.len() });
    }
    let m = &mesh.metrics;
    let mut f = DiffusionField { kperp: kperp.to_vec(), kq: vec![0.0; n], kr: vec![0.0; n], kqr: vec![0.0; n] };
    for k in 0..n {
        if !(kperp[k] > 0.0) {
            return Err(Error::NonPositiveCoefficient { index: k, value: kperp[k] });
        }
        let jk = m.jac[k] * kperp[k];
        f.kq[k] = jk * (m.qx[k] * m.qx[k] + m.qy[k] * m.qy[k]);
        f.kr[k] = jk * (m.rx[k] * m.rx[k] + m.ry[k] * m.ry[k]);
        f.kqr[k] = jk * (m.qx[k] * m.rx[k] + m.qy[k] * m.ry[k]);
        let minor = f.kq[k] * f.kr[k] - f.kqr[k] * f.kqr[k];
        if !(f.kq[k] > 0.0 && f.kr[k] > 0.0) || minor < -1e-12 * f.kq[k] * f.kr[k] {
            return Err(Error::InvalidParameter(format!("diffusion tensor not positive at node {k}")));
        }
    }
    Ok(f)
}

/// A side of a particular block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockSide {
    pub block: usize,
    pub side: Side,
}

impl BlockSide {
    pub fn new(block: usize, side: Side) -> Self {
        Self { block, side }
    }
}

/// Conforming interface: node `t` of `a` meets node `t` (or `len - 1 - t` when
/// `reversed`) of `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interface {
    pub a: BlockSide,
    pub b: BlockSide,
    pub reversed: bool,
}

impl Interface {
    pub fn partner(&self, t: usize, len: usize) -> usize {
        if self.reversed {
            len - 1 - t
        } else {
            t
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    Dirichlet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExteriorSide {
    pub at: BlockSide,
    pub kind: BoundaryKind,
}

pub type Containment = Arc<dyn Fn(Point) -> bool + Send + Sync>;

/// Blocks coupled through conforming interfaces.
#[derive(Clone)]
pub struct MultiBlockDomain {
    pub blocks: Vec<BlockMesh>,
    pub interfaces: Vec<Interface>,
    pub exterior: Vec<ExteriorSide>,
    /// Optional exact membership test for the physical domain.
    pub contains: Option<Containment>,
}

impl fmt::Debug for MultiBlockDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MultiBlockDomain")
            .field("blocks", &self.blocks)
            .field("interfaces", &self.interfaces)
            .field("exterior", &self.exterior)
            .finish()
    }
}

pub const INTERFACE_TOL: f64 = 1e-10;

impl MultiBlockDomain {
    /// Checks that every side is exactly one of interface/exterior and that
    /// interface nodes coincide.
    pub fn new(
        blocks: Vec<BlockMesh>,
        interfaces: Vec<Interface>,
        exterior: Vec<ExteriorSide>,
        contains: Option<Containment>,
    ) -> Result<Self> {
        let d = Self { blocks, interfaces, exterior, contains };
        d.validate()?;
        Ok(d)
    }

    pub fn single(block: BlockMesh) -> Result<Self> {
        let exterior = Side::ALL
            .iter()
            .map(|&s| ExteriorSide { at: BlockSide::new(0, s), kind: BoundaryKind::Dirichlet })
            .collect();
        Self::new(vec![block], Vec::new(), exterior, None)
    }

    fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashMap::new();
        let mut mark = |bs: BlockSide, what: &str| -> Result<()> {
            if bs.block >= self.blocks.len() {
                return Err(Error::InvalidParameter(format!("{what} refers to missing block {}", bs.block)));
            }
            if seen.insert(bs, ()).is_some() {
                return Err(Error::InvalidParameter(format!(
                    "block {} side {} assigned twice",
                    bs.block,
                    bs.side.name()
                )));
            }
            Ok(())
        };
        for (k, itf) in self.interfaces.iter().enumerate() {
            mark(itf.a, "interface")?;
            mark(itf.b, "interface")?;
            let (ba, bb) = (&self.blocks[itf.a.block], &self.blocks[itf.b.block]);
            let (la, lb) = (ba.ops.side_len(itf.a.side), bb.ops.side_len(itf.b.side));
            if la != lb {
                return Err(Error::BadInterface { index: k, reason: format!("side lengths {la} and {lb} differ") });
            }
            let (_, ta) = ba.ops.normal_tangential(itf.a.side);
            let (_, tb) = bb.ops.normal_tangential(itf.b.side);
            for t in 0..la {
                let s = itf.partner(t, la);
                let (ia, ib) = (ba.ops.side_node(itf.a.side, t), bb.ops.side_node(itf.b.side, s));
                let gap = (ba.x[ia] - bb.x[ib]).hypot(ba.y[ia] - bb.y[ib]);
                if gap > INTERFACE_TOL {
                    return Err(Error::BadInterface {
                        index: k,
                        reason: format!("node {t} separated by {gap:e}"),
                    });
                }
                let (wa, wb) = (ta.weights()[t], tb.weights()[s]);
                if (wa - wb).abs() > 1e-14 * wa.abs() {
                    return Err(Error::BadInterface { index: k, reason: "tangential norms differ".into() });
                }
            }
        }
        for e in &self.exterior {
            mark(e.at, "exterior boundary")?;
        }
        if seen.len() != 4 * self.blocks.len() {
            return Err(Error::InvalidParameter("some block sides have no boundary assignment".into()));
        }
        Ok(())
    }

    pub fn total_len(&self) -> usize {
        self.blocks.iter().map(|b| b.len()).sum()
    }

    /// Offset of each block in the concatenated global vector.
    pub fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.blocks.len() + 1);
        let mut acc = 0;
        off.push(0);
        for b in &self.blocks {
            acc += b.len();
            off.push(acc);
        }
        off
    }

    /// Bare tensor-product norm weights, concatenated over blocks.
    pub fn h_weights(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| b.ops.weights()).collect()
    }

    /// Jacobian-weighted norm weights `J h_q h_r`.
    pub fn jh_weights(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .flat_map(|b| b.ops.weights().into_iter().zip(b.jac().to_vec()).map(|(w, j)| w * j))
            .collect()
    }

    /// Evaluate `f(x, y)` at every node, in global layout.
    pub fn sample<F: Fn(f64, f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| b.x.iter().zip(&b.y).map(|(&x, &y)| f(x, y)).collect::<Vec<_>>()).collect()
    }

    pub fn in_domain(&self, p: Point) -> bool {
        match &self.contains {
            Some(c) => c(p),
            None => self.locate(p).is_some(),
        }
    }

    /// Block and logical coordinates containing `p`.
    pub fn locate(&self, p: Point) -> Option<(usize, f64, f64)> {
        const TOL: f64 = 1e-9;
        for (b, mesh) in self.blocks.iter().enumerate() {
            let (xmin, xmax) = min_max(&mesh.x);
            let (ymin, ymax) = min_max(&mesh.y);
            let pad = 0.05 * ((xmax - xmin) + (ymax - ymin));
            if p[0] < xmin - pad || p[0] > xmax + pad || p[1] < ymin - pad || p[1] > ymax + pad {
                continue;
            }
            if let Some((q, r)) = mesh.locate(p, TOL) {
                return Some((b, q, r));
            }
        }
        None
    }

    /// Mesh dump with columns `block,i,j,x,y,J`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "block,i,j,x,y,J")?;
        for (b, m) in self.blocks.iter().enumerate() {
            for i in 0..m.nq() {
                for j in 0..m.nr() {
                    let k = m.ops.idx(i, j);
                    writeln!(w, "{b},{i},{j},{:.16e},{:.16e},{:.16e}", m.x[k], m.y[k], m.jac()[k])?;
                }
            }
        }
        Ok(())
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}

/// The four edges of the dilated interior square: bottom, right, top, left.
pub fn dilated_square_edges(gamma: f64) -> [BoundaryCurve; 4] {
    let h = 0.25;
    [
        BoundaryCurve::new(move |u| [-h + 2.0 * h * u, -h - gamma * u * (1.0 - u)]),
        BoundaryCurve::new(move |v| [h + gamma * v * (1.0 - v), -h + 2.0 * h * v]),
        BoundaryCurve::new(move |u| [-h + 2.0 * h * u, h + gamma * u * (1.0 - u)]),
        BoundaryCurve::new(move |v| [-h - gamma * v * (1.0 - v), -h + 2.0 * h * v]),
    ]
}

fn arc(theta0: f64) -> BoundaryCurve {
    BoundaryCurve::new(move |s| {
        let t = theta0 + s * PI / 2.0;
        [t.cos(), t.sin()]
    })
}

/// Logical radial coordinate of physical radius `radius` on the sector midline.
pub fn default_packing_centre(gamma: f64, radius: f64) -> f64 {
    let inner = 0.25 + gamma / 4.0;
    (radius - inner) / (1.0 - inner)
}

/// Block ids of the circle domain.
pub mod circle {
    pub const SQUARE: usize = 0;
    pub const EAST: usize = 1;
    pub const NORTH: usize = 2;
    pub const WEST: usize = 3;
    pub const SOUTH: usize = 4;
}

/// Unit disk as one dilated square surrounded by four annular sectors.
///
/// In each sector `q` runs radially outward (the unit circle is the q-high
/// side) and `r` runs counter-clockwise. Packing, when given, acts on the
/// sector radial coordinate.
pub fn build_circle_five_block(
    n: usize,
    gamma: f64,
    packing: Option<PackingParams>,
    order: usize,
) -> Result<MultiBlockDomain> {
    if !(0.0..=0.25).contains(&gamma) {
        return Err(Error::InvalidParameter(format!("dilation {gamma} outside [0, 0.25]")));
    }
    let [c1, c2, c3, c4] = dilated_square_edges(gamma);
    let square: Arc<dyn BlockMap> = Arc::new(CoonsMap::new(c1.clone(), c2.clone(), c3.clone(), c4.clone())?);
    let inner = [c2, c3.reversed(), c4.reversed(), c1];
    let theta0 = [-PI / 4.0, PI / 4.0, 3.0 * PI / 4.0, 5.0 * PI / 4.0];
    let mut blocks = vec![BlockMesh::from_map(square, order, n, n, circle::SQUARE)?];
    for (k, (e, &t0)) in inner.into_iter().zip(&theta0).enumerate() {
        let a = arc(t0);
        let (e0, e1, a0, a1) = (e.eval(0.0), e.eval(1.0), a.eval(0.0), a.eval(1.0));
        let coons = CoonsMap::new(BoundaryCurve::line(e0, a0), a, BoundaryCurve::line(e1, a1), e)?;
        let map: Arc<dyn BlockMap> = match packing {
            Some(p) => Arc::new(PackedMap { inner: Arc::new(coons), q: Some(p), r: None }),
            None => Arc::new(coons),
        };
        blocks.push(BlockMesh::from_map(map, order, n, n, k + 1)?);
    }
    use circle::*;
    let itf = |a: usize, sa: Side, b: usize, sb: Side, reversed: bool| Interface {
        a: BlockSide::new(a, sa),
        b: BlockSide::new(b, sb),
        reversed,
    };
    let interfaces = vec![
        itf(SQUARE, Side::RLow, SOUTH, Side::QLow, false),
        itf(SQUARE, Side::QHigh, EAST, Side::QLow, false),
        itf(SQUARE, Side::RHigh, NORTH, Side::QLow, true),
        itf(SQUARE, Side::QLow, WEST, Side::QLow, true),
        itf(EAST, Side::RHigh, NORTH, Side::RLow, false),
        itf(NORTH, Side::RHigh, WEST, Side::RLow, false),
        itf(WEST, Side::RHigh, SOUTH, Side::RLow, false),
        itf(SOUTH, Side::RHigh, EAST, Side::RLow, false),
    ];
    let exterior = [EAST, NORTH, WEST, SOUTH]
        .iter()
        .map(|&b| ExteriorSide { at: BlockSide::new(b, Side::QHigh), kind: BoundaryKind::Dirichlet })
        .collect();
    let contains: Containment = Arc::new(|p: Point| p[0] * p[0] + p[1] * p[1] <= 1.0 + 1e-12);
    MultiBlockDomain::new(blocks, interfaces, exterior, Some(contains))
}

/// Unit square `[0, 1]^2` as a single block with the identity map.
pub fn unit_square(order: usize, nq: usize, nr: usize) -> Result<BlockMesh> {
    BlockMesh::from_map(Arc::new(|q: f64, r: f64| [q, r]), order, nq, nr, 0)
}

/// Rectangle `[x0, x1] x [y0, y1]` split into two blocks along `x = xm`.
pub fn two_block_rectangle(order: usize, n: usize, x0: f64, xm: f64, x1: f64, y0: f64, y1: f64) -> Result<MultiBlockDomain> {
    let left = BlockMesh::from_map(
        Arc::new(move |q: f64, r: f64| [x0 + q * (xm - x0), y0 + r * (y1 - y0)]),
        order,
        n,
        n,
        0,
    )?;
    let right = BlockMesh::from_map(
        Arc::new(move |q: f64, r: f64| [xm + q * (x1 - xm), y0 + r * (y1 - y0)]),
        order,
        n,
        n,
        1,
    )?;
    let interfaces = vec![Interface { a: BlockSide::new(0, Side::QHigh), b: BlockSide::new(1, Side::QLow), reversed: false }];
    let exterior = [(0, Side::QLow), (0, Side::RLow), (0, Side::RHigh), (1, Side::QHigh), (1, Side::RLow), (1, Side::RHigh)]
        .iter()
        .map(|&(b, s)| ExteriorSide { at: BlockSide::new(b, s), kind: BoundaryKind::Dirichlet })
        .collect();
    MultiBlockDomain::new(vec![left, right], interfaces, exterior, None)
}

/// Dilated square with its east annular sector: a curved two-block pair.
pub fn square_sector_pair(order: usize, n: usize, gamma: f64) -> Result<MultiBlockDomain> {
    let full = build_circle_five_block(n, gamma, None, order)?;
    let blocks = vec![full.blocks[circle::SQUARE].clone(), full.blocks[circle::EAST].clone()];
    let interfaces = vec![Interface { a: BlockSide::new(0, Side::QHigh), b: BlockSide::new(1, Side::QLow), reversed: false }];
    let exterior = [(0, Side::QLow), (0, Side::RLow), (0, Side::RHigh), (1, Side::QHigh), (1, Side::RLow), (1, Side::RHigh)]
        .iter()
        .map(|&(b, s)| ExteriorSide { at: BlockSide::new(b, s), kind: BoundaryKind::Dirichlet })
        .collect();
    MultiBlockDomain::new(blocks, interfaces, exterior, None)
}
