//! Square complex band matrices with equal lower and upper bandwidth, and
//! their LU factorization without pivoting.

use crate::error::{Error, Result};
use num_complex::Complex64 as C64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Row `i` stores columns `i - p ..= i + p` at offsets `0..=2p`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    p: usize,
    data: Vec<C64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, p: usize) -> Self {
        Self {
            n,
            p,
            data: vec![ZERO; n * (2 * p + 1)],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.p
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.n || j >= self.n || i.abs_diff(j) > self.p {
            None
        } else {
            Some(i * (2 * self.p + 1) + (j + self.p - i))
        }
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.slot(i, j).map_or(ZERO, |s| self.data[s])
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) -> Result<()> {
        match self.slot(i, j) {
            Some(s) => {
                self.data[s] = v;
                Ok(())
            }
            None if v == ZERO => Ok(()),
            None => Err(Error::IndexOutOfRange {
                index: i.max(j),
                len: self.n,
            }),
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: C64) -> Result<()> {
        let cur = self.get(i, j);
        self.set(i, j, cur + v)
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        let w = 2 * self.p + 1;
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.p);
                let hi = (i + self.p).min(self.n - 1);
                let row = &self.data[i * w..(i + 1) * w];
                (lo..=hi).map(|j| row[j + self.p - i] * x[j]).sum()
            })
            .collect()
    }
}

/// In-place LU factors (unit lower triangle implied).
#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
}

impl BandLu {
    pub fn factor(mut m: BandMatrix) -> Result<Self> {
        let (n, p) = (m.n, m.p);
        let w = 2 * p + 1;
        let scale = m.data.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        for k in 0..n {
            let piv = m.data[k * w + p];
            if !(piv.norm() > 1e-14 * scale) || !piv.is_finite() {
                return Err(Error::ZeroPivot {
                    solver: "banded",
                    row: k,
                });
            }
            let inv = piv.inv();
            let hi = (k + p).min(n - 1);
            for i in k + 1..=hi {
                let lik = m.data[i * w + (k + p - i)] * inv;
                m.data[i * w + (k + p - i)] = lik;
                if lik == ZERO {
                    continue;
                }
                for j in k + 1..=hi {
                    let ukj = m.data[k * w + (j + p - k)];
                    m.data[i * w + (j + p - i)] -= lik * ukj;
                }
            }
        }
        Ok(Self { m })
    }

    pub fn solve_in_place(&self, x: &mut [C64]) {
        let (n, p) = (self.m.n, self.m.p);
        let w = 2 * p + 1;
        let d = &self.m.data;
        for i in 0..n {
            let lo = i.saturating_sub(p);
            let mut acc = x[i];
            for j in lo..i {
                acc -= d[i * w + (j + p - i)] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let hi = (i + p).min(n - 1);
            let mut acc = x[i];
            for j in i + 1..=hi {
                acc -= d[i * w + (j + p - i)] * x[j];
            }
            x[i] = acc / d[i * w + p];
        }
    }
}
