//! One-dimensional diagonal-norm summation-by-parts operators.
//!
//! Each [`SbpSet1D`] bundles a norm `H`, a first-derivative operator
//! `D1 = H^-1 Q` with `Q + Q^T = diag(-1, 0, .., 0, 1)`, and a fully compatible
//! variable-coefficient second-derivative operator
//!
//! ```text
//! D2(k) = H^-1 (-M(k) + B K D1),     M(k) = D1^T H K D1 + R(k)
//! ```
//!
//! The remainder `R(k)` is a sum of coefficient-weighted outer products of
//! undivided difference stencils, `R(k) = sum_j (c_j / dx) k_j d_j d_j^T`,
//! with every `c_j > 0`. It is therefore symmetric positive semi-definite for
//! any positive `k`, and it turns the wide interior stencil of `D1 K D1` into
//! the narrow one (3-point for order 2, 5-point for order 4).
//!
//! Order 2 uses `c = 1/4` on second differences. Order 4 uses `1/18` on third
//! differences and `1/144` on fourth differences in the interior; the first
//! three third-difference coefficients at each end are tuned so that `D2(1)`
//! differentiates cubics exactly on every closure row except the boundary
//! node itself (where the `B K D1` flux carries the one-sided error of `D1`).
//! The tuned values were generated with exact rational arithmetic from the
//! cubic-exactness conditions and are stored here as literals.
//!
//! Production code only applies these operators matrix-free. Dense matrices
//! are formed in [`SbpSet1D::dense_d1`] and friends for audits.

use crate::error::{Error, Result};
use crate::linalg;
use std::fmt;

const D1_INTERIOR_2: [f64; 3] = [-0.5, 0.0, 0.5];
const D1_CLOSURE_2: [&[f64]; 1] = [&[-1.0, 1.0]];
const H_CLOSURE_2: [f64; 1] = [0.5];

const D1_INTERIOR_4: [f64; 5] = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
#[rustfmt::skip]
const D1_CLOSURE_4: [&[f64]; 4] = [
    &[-24.0 / 17.0, 59.0 / 34.0, -4.0 / 17.0, -3.0 / 34.0],
    &[-1.0 / 2.0, 0.0, 1.0 / 2.0, 0.0],
    &[4.0 / 43.0, -59.0 / 86.0, 0.0, 59.0 / 86.0, -4.0 / 43.0],
    &[3.0 / 98.0, 0.0, -59.0 / 98.0, 0.0, 32.0 / 49.0, -4.0 / 49.0],
];
const H_CLOSURE_4: [f64; 4] = [17.0 / 48.0, 59.0 / 48.0, 43.0 / 48.0, 49.0 / 48.0];

const SECOND_DIFF: [f64; 3] = [1.0, -2.0, 1.0];
const THIRD_DIFF: [f64; 4] = [-1.0, 3.0, -3.0, 1.0];
const FOURTH_DIFF: [f64; 5] = [1.0, -4.0, 6.0, -4.0, 1.0];

// Cubic-exact boundary tuning of the third-difference weights (interior 1/18).
const THIRD_DIFF_BOUNDARY_4: [f64; 3] = [181507.0 / 1719312.0, 293.0 / 4214.0, 185.0 / 3528.0];

/// Minimum node count for which the two boundary closures do not overlap.
pub fn min_nodes(order: usize) -> Result<usize> {
    match order {
        2 => Ok(3),
        4 => Ok(9),
        _ => Err(Error::UnsupportedOrder(order)),
    }
}

/// A family of undivided difference stencils contributing to `R(k)`.
#[derive(Debug, Clone)]
struct DifferenceTerm {
    stencil: &'static [f64],
    interior_weight: f64,
    boundary_weights: &'static [f64],
}

impl DifferenceTerm {
    fn rows(&self, n: usize) -> usize {
        n + 1 - self.stencil.len()
    }

    fn weight(&self, row: usize, rows: usize) -> f64 {
        let from_end = rows - 1 - row;
        let nb = self.boundary_weights.len();
        if row < nb {
            self.boundary_weights[row]
        } else if from_end < nb {
            self.boundary_weights[from_end]
        } else {
            self.interior_weight
        }
    }

    /// Coefficient sample at the stencil centre (midpoint average for even widths).
    fn coefficient(&self, row: usize, k: &[f64]) -> f64 {
        let len = self.stencil.len();
        if len % 2 == 1 {
            k[row + len / 2]
        } else {
            0.5 * (k[row + len / 2 - 1] + k[row + len / 2])
        }
    }
}

/// SBP operator family along one grid direction.
#[derive(Debug, Clone)]
pub struct SbpSet1D {
    order: usize,
    n: usize,
    dx: f64,
    h: Vec<f64>,
    d1_interior: &'static [f64],
    d1_closure: &'static [&'static [f64]],
    remainder: Vec<DifferenceTerm>,
}

impl SbpSet1D {
    pub fn new(order: usize, n: usize, dx: f64) -> Result<Self> {
        let min = min_nodes(order)?;
        if n < min {
            return Err(Error::TooFewNodes { order, n, min });
        }
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::InvalidSpacing(dx));
        }
        let (d1_interior, d1_closure, h_closure, remainder): (
            &'static [f64],
            &'static [&'static [f64]],
            &'static [f64],
            Vec<DifferenceTerm>,
        ) = match order {
            2 => (
                &D1_INTERIOR_2,
                &D1_CLOSURE_2,
                &H_CLOSURE_2,
                vec![DifferenceTerm {
                    stencil: &SECOND_DIFF,
                    interior_weight: 0.25,
                    boundary_weights: &[],
                }],
            ),
            4 => (
                &D1_INTERIOR_4,
                &D1_CLOSURE_4,
                &H_CLOSURE_4,
                vec![
                    DifferenceTerm {
                        stencil: &THIRD_DIFF,
                        interior_weight: 1.0 / 18.0,
                        boundary_weights: &THIRD_DIFF_BOUNDARY_4,
                    },
                    DifferenceTerm {
                        stencil: &FOURTH_DIFF,
                        interior_weight: 1.0 / 144.0,
                        boundary_weights: &[],
                    },
                ],
            ),
            _ => unreachable!(),
        };
        let mut h = vec![dx; n];
        for (i, &w) in h_closure.iter().enumerate() {
            h[i] = w * dx;
            h[n - 1 - i] = w * dx;
        }
        Ok(Self { order, n, dx, h, d1_interior, d1_closure, remainder })
    }

    /// Same operator on `n` nodes of the unit interval.
    pub fn unit(order: usize, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewNodes { order, n, min: min_nodes(order)? });
        }
        Self::new(order, n, 1.0 / (n as f64 - 1.0))
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Diagonal norm weights (quadrature weights), including `dx`.
    pub fn weights(&self) -> &[f64] {
        &self.h
    }

    /// Replace one norm weight. Only useful for negative controls in audits:
    /// the result is no longer an SBP operator.
    pub fn with_weight(mut self, index: usize, weight: f64) -> Self {
        self.h[index] = weight;
        self
    }

    /// Number of rows at each end using a boundary closure of `D1`.
    pub fn closure_rows(&self) -> usize {
        self.d1_closure.len()
    }

    /// Row `i` of `D1` as `(first column, coefficients)`, without the `1/dx` factor.
    fn d1_row(&self, i: usize) -> (usize, RowCoeffs) {
        let nb = self.d1_closure.len();
        let n = self.n;
        if i < nb {
            (0, RowCoeffs::Left(self.d1_closure[i]))
        } else if n - 1 - i < nb {
            let row = self.d1_closure[n - 1 - i];
            (n - row.len(), RowCoeffs::Right(row))
        } else {
            let half = self.d1_interior.len() / 2;
            (i - half, RowCoeffs::Left(self.d1_interior))
        }
    }

    /// Coefficients of `D1` row `i` scaled by `1/dx`, with the index of the first column.
    pub fn d1_row_coefficients(&self, i: usize) -> (usize, Vec<f64>) {
        let (start, row) = self.d1_row(i);
        let inv = 1.0 / self.dx;
        (start, (0..row.len()).map(|k| row.get(k) * inv).collect())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::LengthMismatch { expected: self.n, got: len });
        }
        Ok(())
    }

    /// `out = D1 u`.
    pub fn d1_into(&self, u: &[f64], out: &mut [f64]) {
        debug_assert_eq!(u.len(), self.n);
        let inv = 1.0 / self.dx;
        let nb = self.d1_closure.len();
        let n = self.n;
        for (i, row) in self.d1_closure.iter().enumerate() {
            let mut acc = 0.0;
            for (k, &c) in row.iter().enumerate() {
                acc += c * u[k];
            }
            out[i] = acc * inv;
            let mut acc = 0.0;
            for (k, &c) in row.iter().enumerate() {
                acc -= c * u[n - 1 - k];
            }
            out[n - 1 - i] = acc * inv;
        }
        let half = self.d1_interior.len() / 2;
        for i in nb..n - nb {
            let mut acc = 0.0;
            for (k, &c) in self.d1_interior.iter().enumerate() {
                acc += c * u[i + k - half];
            }
            out[i] = acc * inv;
        }
    }

    /// `out = D1^T v`.
    pub fn d1_transpose_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.n);
        out.iter_mut().for_each(|o| *o = 0.0);
        let inv = 1.0 / self.dx;
        for i in 0..self.n {
            let (start, row) = self.d1_row(i);
            let vi = v[i] * inv;
            for k in 0..row.len() {
                out[start + k] += row.get(k) * vi;
            }
        }
    }

    pub fn apply_d1(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_len(u.len())?;
        let mut out = vec![0.0; self.n];
        self.d1_into(u, &mut out);
        Ok(out)
    }

    /// Boundary derivative `(D1 u)` at the first (`high = false`) or last node.
    pub fn boundary_derivative(&self, u: &[f64], high: bool) -> f64 {
        let i = if high { self.n - 1 } else { 0 };
        let (start, row) = self.d1_row(i);
        let mut acc = 0.0;
        for k in 0..row.len() {
            acc += row.get(k) * u[start + k];
        }
        acc / self.dx
    }

    /// `out = R(k) u`, the remainder of `M(k)`.
    pub fn remainder_into(&self, k: &[f64], u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        self.remainder_accumulate(k, u, out);
    }

    fn remainder_accumulate(&self, k: &[f64], u: &[f64], out: &mut [f64]) {
        let inv = 1.0 / self.dx;
        for term in &self.remainder {
            let rows = term.rows(self.n);
            for j in 0..rows {
                let mut du = 0.0;
                for (m, &c) in term.stencil.iter().enumerate() {
                    du += c * u[j + m];
                }
                let s = term.weight(j, rows) * term.coefficient(j, k) * inv * du;
                for (m, &c) in term.stencil.iter().enumerate() {
                    out[j + m] += s * c;
                }
            }
        }
    }

    /// `out = M(k) u = (D1^T H K D1 + R(k)) u`. `work` must have length `n`.
    pub fn m_into(&self, k: &[f64], u: &[f64], work: &mut [f64], out: &mut [f64]) {
        self.d1_into(u, work);
        for i in 0..self.n {
            work[i] *= self.h[i] * k[i];
        }
        self.d1_transpose_into(work, out);
        self.remainder_accumulate(k, u, out);
    }

    /// `out = D2(k) u = H^-1 (-M(k) u + B K D1 u)`.
    pub fn d2_into(&self, k: &[f64], u: &[f64], work: &mut [f64], out: &mut [f64]) {
        self.m_into(k, u, work, out);
        let n = self.n;
        let left = k[0] * self.boundary_derivative(u, false);
        let right = k[n - 1] * self.boundary_derivative(u, true);
        out[0] += left;
        out[n - 1] -= right;
        for i in 0..n {
            out[i] = -out[i] / self.h[i];
        }
    }

    pub fn apply_d2_variable(&self, k: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        self.check_len(k.len())?;
        self.check_len(u.len())?;
        if let Some((index, &value)) = k.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
            return Err(Error::NonPositiveCoefficient { index, value });
        }
        let mut work = vec![0.0; self.n];
        let mut out = vec![0.0; self.n];
        self.d2_into(k, u, &mut work, &mut out);
        Ok(out)
    }

    /// Quadrature `sum_i h_i u_i`.
    pub fn integrate(&self, u: &[f64]) -> f64 {
        self.h.iter().zip(u).map(|(h, u)| h * u).sum()
    }

    pub fn dense_d1(&self) -> linalg::Dense {
        linalg::Dense::from_operator(self.n, |u, out| self.d1_into(u, out))
    }

    pub fn dense_m(&self, k: &[f64]) -> linalg::Dense {
        let mut work = vec![0.0; self.n];
        linalg::Dense::from_operator(self.n, |u, out| self.m_into(k, u, &mut work, out))
    }

    pub fn dense_d2(&self, k: &[f64]) -> linalg::Dense {
        let mut work = vec![0.0; self.n];
        linalg::Dense::from_operator(self.n, |u, out| self.d2_into(k, u, &mut work, out))
    }

    /// Check the SBP and compatibility identities densely.
    pub fn verify(&self, k: &[f64]) -> VerificationReport {
        let n = self.n;
        let d1 = self.dense_d1();
        let mut q_defect: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let qij = self.h[i] * d1.get(i, j);
                let qji = self.h[j] * d1.get(j, i);
                let b = if i == j && i == 0 {
                    -1.0
                } else if i == j && i == n - 1 {
                    1.0
                } else {
                    0.0
                };
                q_defect = q_defect.max((qij + qji - b).abs());
            }
        }
        // R = M - D1^T H K D1, reconstructed densely.
        let m = self.dense_m(k);
        let mut r = m.clone();
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += d1.get(l, i) * self.h[l] * k[l] * d1.get(l, j);
                }
                r.set(i, j, m.get(i, j) - acc);
            }
        }
        let r_symmetry_defect = r.symmetry_defect();
        let eig = r.symmetric_eigenvalues();
        let r_norm = eig.iter().fold(0.0f64, |a, &e| a.max(e.abs()));
        let r_min_eigenvalue = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        VerificationReport {
            order: self.order,
            n,
            q_defect,
            r_symmetry_defect,
            r_min_eigenvalue,
            r_norm,
        }
    }
}

#[derive(Clone, Copy)]
enum RowCoeffs {
    Left(&'static [f64]),
    /// Mirrored closure: entry k equals `-row[len - 1 - k]`.
    Right(&'static [f64]),
}

impl RowCoeffs {
    fn len(&self) -> usize {
        match self {
            RowCoeffs::Left(r) | RowCoeffs::Right(r) => r.len(),
        }
    }

    fn get(&self, k: usize) -> f64 {
        match self {
            RowCoeffs::Left(r) => r[k],
            RowCoeffs::Right(r) => -r[r.len() - 1 - k],
        }
    }
}

/// Outcome of [`SbpSet1D::verify`].
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub order: usize,
    pub n: usize,
    /// `max |Q + Q^T - B|` entrywise.
    pub q_defect: f64,
    pub r_symmetry_defect: f64,
    pub r_min_eigenvalue: f64,
    /// Spectral norm of `R`.
    pub r_norm: f64,
}

impl VerificationReport {
    pub const ENTRY_TOL: f64 = 1e-12;
    pub const EIG_REL_TOL: f64 = 1e-10;

    pub fn passed(&self) -> bool {
        self.q_defect < Self::ENTRY_TOL
            && self.r_symmetry_defect < Self::ENTRY_TOL * self.r_norm.max(1.0)
            && self.r_min_eigenvalue >= -Self::EIG_REL_TOL * self.r_norm
    }

    pub fn header() -> &'static str {
        "order  n     |Q+Q^T-B|   R asym      eigmin(R)    |R|         pass"
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<6} {:<5} {:<11.3e} {:<11.3e} {:<12.4e} {:<11.4e} {}",
            self.order,
            self.n,
            self.q_defect,
            self.r_symmetry_defect,
            self.r_min_eigenvalue,
            self.r_norm,
            if self.passed() { "pass" } else { "FAIL" }
        )
    }
}
