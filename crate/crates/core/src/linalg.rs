//! Banded LU factorisation without pivoting, for diagonally dominant M-matrices.

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row `i` stores columns `i - kl ..= i + ku`.
    band: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        BandedMatrix {
            n,
            kl,
            ku,
            band: vec![0.0; n * (kl + ku + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if j + self.kl < i || j > i + self.ku || i >= self.n || j >= self.n {
            return None;
        }
        Some(i * (self.kl + self.ku + 1) + (j + self.kl - i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.band[s])
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i},{j}) outside band"));
        self.band[s] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// In-place Doolittle factorisation.
    pub fn factor(mut self) -> Result<BandedLu> {
        let n = self.n;
        for k in 0..n {
            let pivot = self.get(k, k);
            if pivot.abs() < 1e-300 || !pivot.is_finite() {
                return Err(Error::Internal(format!("zero pivot at row {k}")));
            }
            let imax = (k + self.kl).min(n.saturating_sub(1));
            let jmax = (k + self.ku).min(n.saturating_sub(1));
            for i in k + 1..=imax {
                let si = self.slot(i, k).expect("in band");
                let l = self.band[si] / pivot;
                if l == 0.0 {
                    continue;
                }
                self.band[si] = l;
                for j in k + 1..=jmax {
                    let skj = self.slot(k, j).expect("in band");
                    let sij = self.slot(i, j).expect("in band");
                    self.band[sij] -= l * self.band[skj];
                }
            }
        }
        Ok(BandedLu { m: self })
    }
}

#[derive(Clone, Debug)]
pub struct BandedLu {
    m: BandedMatrix,
}

impl BandedLu {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let m = &self.m;
        let n = m.n;
        for i in 0..n {
            let lo = i.saturating_sub(m.kl);
            let mut acc = b[i];
            for (j, bj) in b.iter().enumerate().take(i).skip(lo) {
                acc -= m.get(i, j) * bj;
            }
            b[i] = acc;
        }
        for i in (0..n).rev() {
            let hi = (i + m.ku).min(n - 1);
            let mut acc = b[i];
            for (j, bj) in b.iter().enumerate().take(hi + 1).skip(i + 1) {
                acc -= m.get(i, j) * bj;
            }
            b[i] = acc / m.get(i, i);
        }
    }
}
