//! Banded LU factorisation with partial pivoting.
//!
//! Storage follows the LAPACK `gbtrf` layout: column-major, `2 kl + ku + 1`
//! rows per column, the top `kl` rows reserved for fill-in.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    ab: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            ld,
            ab: vec![0.0; ld * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.ld + self.kl + self.ku + i - j
    }

    /// Sets `A[i][j]`. Panics outside the band.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(
            j + self.kl >= i && i + self.ku >= j,
            "({i}, {j}) outside band"
        );
        let k = self.idx(i, j);
        self.ab[k] = value;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl >= i && i + self.ku >= j {
            self.ab[self.idx(i, j)]
        } else {
            0.0
        }
    }

    /// `A x` using the unfactored entries.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Factorises in place. A pivot below `1e-14` times the largest entry
    /// is treated as singular.
    pub fn factorize(mut self) -> Result<BandLu> {
        let n = self.n;
        let kv = self.kl + self.ku;
        let scale = self.ab.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if !scale.is_finite() {
            return Err(Error::DegenerateLinearization);
        }
        let threshold = 1e-14 * scale;
        let mut ipiv = vec![0usize; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = self.kl.min(n - 1 - j);
            let col = j * self.ld;
            let mut jp = 0;
            let mut best = self.ab[col + kv].abs();
            for t in 1..=km {
                let v = self.ab[col + kv + t].abs();
                if v > best {
                    best = v;
                    jp = t;
                }
            }
            if best <= threshold {
                return Err(Error::DegenerateLinearization);
            }
            ipiv[j] = j + jp;
            ju = ju.max((j + self.ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let a = c * self.ld + kv + j - c;
                    self.ab.swap(a + jp, a);
                }
            }
            if km > 0 {
                let pivot = self.ab[col + kv];
                for t in 1..=km {
                    self.ab[col + kv + t] /= pivot;
                }
                for c in j + 1..=ju {
                    let base = c * self.ld + kv + j - c;
                    let f = self.ab[base];
                    if f != 0.0 {
                        for t in 1..=km {
                            self.ab[base + t] -= self.ab[col + kv + t] * f;
                        }
                    }
                }
            }
        }
        Ok(BandLu { m: self, ipiv })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    ipiv: Vec<usize>,
}

impl BandLu {
    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let m = &self.m;
        let n = m.n;
        let kv = m.kl + m.ku;
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(p, j);
            }
            let km = m.kl.min(n - 1 - j);
            let col = j * m.ld;
            let bj = b[j];
            for t in 1..=km {
                b[j + t] -= m.ab[col + kv + t] * bj;
            }
        }
        for j in (0..n).rev() {
            let col = j * m.ld;
            b[j] /= m.ab[col + kv];
            let bj = b[j];
            for i in j.saturating_sub(kv)..j {
                b[i] -= m.ab[col + kv + i - j] * bj;
            }
        }
    }
}
