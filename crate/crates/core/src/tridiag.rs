//! Complex tridiagonal systems: factor once, solve many right-hand sides.

use crate::error::{Error, Result};
use num_complex::Complex64 as C64;

/// LU factors of a tridiagonal matrix (Thomas algorithm, no pivoting).
///
/// Row `i` reads `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1]`; `sub[0]`
/// and `sup[n-1]` are ignored.
#[derive(Debug, Clone)]
pub struct TridiagLu {
    sub: Vec<C64>,
    /// Reciprocal pivots.
    inv_pivot: Vec<C64>,
    /// Eliminated super-diagonal `sup[i] / pivot[i]`.
    upper: Vec<C64>,
}

impl TridiagLu {
    pub fn factor(sub: &[C64], diag: &[C64], sup: &[C64]) -> Result<Self> {
        let n = diag.len();
        if sub.len() != n || sup.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: if sub.len() != n { sub.len() } else { sup.len() },
            });
        }
        let mut inv_pivot = vec![C64::new(0.0, 0.0); n];
        let mut upper = vec![C64::new(0.0, 0.0); n];
        let scale = diag.iter().map(|d| d.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        for i in 0..n {
            let p = if i == 0 {
                diag[0]
            } else {
                diag[i] - sub[i] * upper[i - 1]
            };
            if !(p.norm() > 1e-14 * scale) || !p.is_finite() {
                return Err(Error::ZeroPivot {
                    solver: "tridiagonal",
                    row: i,
                });
            }
            inv_pivot[i] = p.inv();
            if i + 1 < n {
                upper[i] = sup[i] * inv_pivot[i];
            }
        }
        Ok(Self {
            sub: sub.to_vec(),
            inv_pivot,
            upper,
        })
    }

    pub fn len(&self) -> usize {
        self.inv_pivot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_pivot.is_empty()
    }

    /// Overwrites `rhs` with the solution.
    pub fn solve_in_place(&self, rhs: &mut [C64]) {
        let n = self.len();
        debug_assert_eq!(rhs.len(), n);
        rhs[0] *= self.inv_pivot[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.sub[i] * rhs[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            let next = rhs[i + 1];
            rhs[i] -= self.upper[i] * next;
        }
    }
}

/// One-shot solve.
pub fn solve_tridiagonal(sub: &[C64], diag: &[C64], sup: &[C64], rhs: &[C64]) -> Result<Vec<C64>> {
    let lu = TridiagLu::factor(sub, diag, sup)?;
    if rhs.len() != lu.len() {
        return Err(Error::LengthMismatch {
            expected: lu.len(),
            found: rhs.len(),
        });
    }
    let mut x = rhs.to_vec();
    lu.solve_in_place(&mut x);
    Ok(x)
}
