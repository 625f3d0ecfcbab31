//! Tensor-product application of 1D SBP operators on a logical `nq x nr` block.
//!
//! Block vectors are stored q-major: node `(i, j)` lives at `i * nr + j`.

use crate::error::Result;
use crate::sbp::SbpSet1D;

/// Logical side of a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    QLow,
    QHigh,
    RLow,
    RHigh,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::QLow, Side::QHigh, Side::RLow, Side::RHigh];

    /// True for the sides normal to the q direction.
    pub fn is_q(self) -> bool {
        matches!(self, Side::QLow | Side::QHigh)
    }

    pub fn is_high(self) -> bool {
        matches!(self, Side::QHigh | Side::RHigh)
    }

    /// Outward sign of the normal logical coordinate.
    pub fn outward_sign(self) -> f64 {
        if self.is_high() {
            1.0
        } else {
            -1.0
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::QLow => "q-low",
            Side::QHigh => "q-high",
            Side::RLow => "r-low",
            Side::RHigh => "r-high",
        }
    }
}

/// Pair of 1D operators for the two logical directions.
#[derive(Debug, Clone)]
pub struct Sbp2D {
    pub q: SbpSet1D,
    pub r: SbpSet1D,
}

impl Sbp2D {
    pub fn unit(order: usize, nq: usize, nr: usize) -> Result<Self> {
        Ok(Self { q: SbpSet1D::unit(order, nq)?, r: SbpSet1D::unit(order, nr)? })
    }

    pub fn nq(&self) -> usize {
        self.q.len()
    }

    pub fn nr(&self) -> usize {
        self.r.len()
    }

    pub fn len(&self) -> usize {
        self.nq() * self.nr()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.nr() + j
    }

    /// Number of nodes along a side.
    pub fn side_len(&self, side: Side) -> usize {
        if side.is_q() {
            self.nr()
        } else {
            self.nq()
        }
    }

    /// Block index of node `t` along `side`.
    pub fn side_node(&self, side: Side, t: usize) -> usize {
        match side {
            Side::QLow => self.idx(0, t),
            Side::QHigh => self.idx(self.nq() - 1, t),
            Side::RLow => self.idx(t, 0),
            Side::RHigh => self.idx(t, self.nr() - 1),
        }
    }

    /// 1D operator normal to `side` and the one tangential to it.
    pub fn normal_tangential(&self, side: Side) -> (&SbpSet1D, &SbpSet1D) {
        if side.is_q() {
            (&self.q, &self.r)
        } else {
            (&self.r, &self.q)
        }
    }

    /// Nodal weights `h_q[i] * h_r[j]`.
    pub fn weights(&self) -> Vec<f64> {
        let (hq, hr) = (self.q.weights(), self.r.weights());
        let mut w = Vec::with_capacity(self.len());
        for &a in hq {
            for &b in hr {
                w.push(a * b);
            }
        }
        w
    }

    /// `out = D_q u` (differentiation along i).
    pub fn dq_into(&self, u: &[f64], out: &mut [f64]) {
        self.q_lines(u, out, |line, res| self.q.d1_into(line, res));
    }

    /// `out = D_r u` (differentiation along j).
    pub fn dr_into(&self, u: &[f64], out: &mut [f64]) {
        let nr = self.nr();
        for (uc, oc) in u.chunks_exact(nr).zip(out.chunks_exact_mut(nr)) {
            self.r.d1_into(uc, oc);
        }
    }

    /// `out = D_q^T u`.
    pub fn dqt_into(&self, u: &[f64], out: &mut [f64]) {
        self.q_lines(u, out, |line, res| self.q.d1_transpose_into(line, res));
    }

    /// `out = D_r^T u`.
    pub fn drt_into(&self, u: &[f64], out: &mut [f64]) {
        let nr = self.nr();
        for (uc, oc) in u.chunks_exact(nr).zip(out.chunks_exact_mut(nr)) {
            self.r.d1_transpose_into(uc, oc);
        }
    }

    /// `out += (R_q(k) (x) H_r) u`: the q-direction remainder applied line by
    /// line with coefficient `k`, weighted by the tangential norm.
    pub fn add_remainder_q(&self, k: &[f64], u: &[f64], out: &mut [f64]) {
        let (nq, nr) = (self.nq(), self.nr());
        let hr = self.r.weights();
        let mut kl = vec![0.0; nq];
        let mut ul = vec![0.0; nq];
        let mut res = vec![0.0; nq];
        for j in 0..nr {
            for i in 0..nq {
                kl[i] = k[i * nr + j];
                ul[i] = u[i * nr + j];
            }
            self.q.remainder_into(&kl, &ul, &mut res);
            for i in 0..nq {
                out[i * nr + j] += hr[j] * res[i];
            }
        }
    }

    /// `out += (H_q (x) R_r(k)) u`.
    pub fn add_remainder_r(&self, k: &[f64], u: &[f64], out: &mut [f64]) {
        let nr = self.nr();
        let hq = self.q.weights();
        let mut res = vec![0.0; nr];
        for (i, ((kc, uc), oc)) in k.chunks_exact(nr).zip(u.chunks_exact(nr)).zip(out.chunks_exact_mut(nr)).enumerate() {
            self.r.remainder_into(kc, uc, &mut res);
            for (o, v) in oc.iter_mut().zip(&res) {
                *o += hq[i] * v;
            }
        }
    }

    fn q_lines<F: Fn(&[f64], &mut [f64])>(&self, u: &[f64], out: &mut [f64], f: F) {
        let (nq, nr) = (self.nq(), self.nr());
        let mut line = vec![0.0; nq];
        let mut res = vec![0.0; nq];
        for j in 0..nr {
            for i in 0..nq {
                line[i] = u[i * nr + j];
            }
            f(&line, &mut res);
            for i in 0..nq {
                out[i * nr + j] = res[i];
            }
        }
    }

    pub fn dq(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.dq_into(u, &mut out);
        out
    }

    pub fn dr(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.dr_into(u, &mut out);
        out
    }
}
