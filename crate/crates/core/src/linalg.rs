//! Small dense-matrix helpers used by audits and tests.

use nalgebra::DMatrix;

/// Row-major dense square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    n: usize,
    data: Vec<f64>,
}

impl Dense {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    /// Build the matrix of a linear operator by applying it to unit vectors.
    pub fn from_operator<F>(n: usize, mut apply: F) -> Self
    where
        F: FnMut(&[f64], &mut [f64]),
    {
        let mut m = Self::zeros(n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            col.iter_mut().for_each(|c| *c = 0.0);
            apply(&e, &mut col);
            for i in 0..n {
                m.data[i * n + j] = col[i];
            }
            e[j] = 0.0;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.data[i * self.n..(i + 1) * self.n].iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `max |A - A^T|` entrywise.
    pub fn symmetry_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.n {
            for j in i + 1..self.n {
                d = d.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn symmetric_eigenvalues(&self) -> Vec<f64> {
        if self.n == 0 {
            return Vec::new();
        }
        let m = DMatrix::from_fn(self.n, self.n, |i, j| 0.5 * (self.get(i, j) + self.get(j, i)));
        let mut e: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().cloned().collect();
        e.sort_by(|a, b| a.total_cmp(b));
        e
    }

    /// Principal submatrix on the given indices.
    pub fn submatrix(&self, idx: &[usize]) -> Dense {
        let mut s = Dense::zeros(idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                s.set(a, b, self.get(i, j));
            }
        }
        s
    }
}
