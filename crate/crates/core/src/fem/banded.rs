//! Symmetric banded direct solver (LDL^T, no pivoting).
//!
//! The structured shell grid numbers nodes column-by-column along the
//! meridian, so the assembled tangent has a narrow band (a few hundred
//! equations at default resolution); a dense-band factorization is simpler
//! and faster here than a general sparse solver.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinearSolveError {
    #[error("singular stiffness matrix: near-zero pivot {pivot:.3e} at equation {equation} (diagonal scale {scale:.3e})")]
    SingularMatrix {
        equation: usize,
        pivot: f64,
        scale: f64,
    },
}

/// Lower-banded symmetric matrix: row i stores columns [i-bw, i].
#[derive(Clone, Debug)]
pub struct BandedMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn new(n: usize, bandwidth: usize) -> Self {
        let bw = bandwidth.min(n.saturating_sub(1));
        BandedMatrix {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (j + self.bw - i)
    }

    /// Accumulate into entry (i, j); only the lower triangle is stored, so
    /// callers pass each symmetric pair once with i >= j.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let at = self.idx(i, j);
        self.data[at] += v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    pub fn reset(&mut self) {
        self.data.fill(0.0);
    }

    /// In-place LDL^T factorization.
    pub fn factor(&mut self) -> Result<(), LinearSolveError> {
        let scale = (0..self.n)
            .map(|i| self.get(i, i).abs())
            .fold(0.0f64, f64::max)
            .max(1.0);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..i {
                let klo = lo.max(j.saturating_sub(self.bw));
                let mut s = self.data[self.idx(i, j)];
                for k in klo..j {
                    s -= self.data[self.idx(i, k)]
                        * self.data[self.idx(j, k)]
                        * self.data[self.idx(k, k)];
                }
                let at = self.idx(i, j);
                self.data[at] = s / self.data[self.idx(j, j)];
            }
            let mut d = self.data[self.idx(i, i)];
            for k in lo..i {
                let l = self.data[self.idx(i, k)];
                d -= l * l * self.data[self.idx(k, k)];
            }
            if d.abs() < 1e-14 * scale {
                return Err(LinearSolveError::SingularMatrix {
                    equation: i,
                    pivot: d,
                    scale,
                });
            }
            let at = self.idx(i, i);
            self.data[at] = d;
        }
        Ok(())
    }

    /// Solve with a previously factored matrix.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        // forward: L y = b
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            let mut s = x[i];
            for k in lo..i {
                s -= self.data[self.idx(i, k)] * x[k];
            }
            x[i] = s;
        }
        // diagonal
        for i in 0..self.n {
            x[i] /= self.data[self.idx(i, i)];
        }
        // backward: L^T x = y
        for i in (0..self.n).rev() {
            let hi = (i + self.bw).min(self.n - 1);
            let mut s = x[i];
            for k in (i + 1)..=hi {
                s -= self.data[self.idx(k, i)] * x[k];
            }
            x[i] = s;
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_spd_system() {
        // tridiagonal SPD: 2 on diagonal, -1 off
        let n = 50;
        let mut a = BandedMatrix::new(n, 1);
        for i in 0..n {
            a.add(i, i, 2.0);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                rhs[i] += a.get(i, j) * x_true[j];
            }
        }
        a.factor().unwrap();
        let x = a.solve(&rhs);
        for i in 0..n {
            assert!((x[i] - x_true[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn wide_band_dense_comparison() {
        // random-ish SPD via A = B^T B + n I, full bandwidth
        let n = 20;
        let b: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| ((i * 31 + j * 17) % 13) as f64 / 13.0 - 0.4)
                    .collect()
            })
            .collect();
        let mut a = BandedMatrix::new(n, n - 1);
        for i in 0..n {
            for j in 0..=i {
                let mut v = if i == j { n as f64 } else { 0.0 };
                for k in 0..n {
                    v += b[k][i] * b[k][j];
                }
                a.add(i, j, v);
            }
        }
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let unfactored = a.clone();
        a.factor().unwrap();
        let x = a.solve(&rhs);
        for i in 0..n {
            let mut r = rhs[i];
            for j in 0..n {
                r -= unfactored.get(i, j) * x[j];
            }
            assert!(r.abs() < 1e-10);
        }
    }

    #[test]
    fn detects_singularity() {
        let mut a = BandedMatrix::new(3, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, 0.0); // structurally singular
        a.add(2, 2, 1.0);
        match a.factor() {
            Err(LinearSolveError::SingularMatrix { equation, .. }) => assert_eq!(equation, 1),
            other => panic!("expected singularity, got {other:?}"),
        }
    }
}
