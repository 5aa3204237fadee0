//! Per-mode tridiagonal Crank-Nicolson systems with transparent or Dirichlet ends.

use crate::error::{Error, Result};
use crate::mesh::Mesh2d;
use crate::model::SampledCoefficients;
use crate::tbc::{convolution_tail, ModeKernel};
use crate::tridiag::TridiagLu;
use num_complex::Complex64 as C64;
use std::sync::Arc;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Boundary treatment at one end of the x-interval for a single mode.
#[derive(Debug, Clone)]
pub enum ModeBoundary {
    /// Zero value; the boundary node is not an unknown.
    Dirichlet,
    /// Discrete transparent boundary with the mode's kernel.
    Transparent(ModeKernel),
}

/// Data of a transparent row that changes from step to step.
#[derive(Debug, Clone)]
pub struct TbcRow {
    /// `hbar^2 B1 / (2 h^2)`.
    pub d_half: f64,
    pub h: f64,
    pub kernel: Arc<Vec<C64>>,
}

/// Tridiagonal system of one mode, factored once.
///
/// Unknowns are the nodes `first..=last`. Row `i` (node `first + i`) reads
/// `sub a_{j-1} + diag a_j + sup a_{j+1} = rsub b_{j-1} + rdiag b_j + rsup b_{j+1} + F_j - d_half * tail`
/// where the last term only appears on transparent rows.
#[derive(Debug, Clone)]
pub struct ModeSystem {
    pub l: usize,
    pub first: usize,
    pub last: usize,
    pub sub: Vec<C64>,
    pub diag: Vec<C64>,
    pub sup: Vec<C64>,
    pub rsub: Vec<C64>,
    pub rdiag: Vec<C64>,
    pub rsup: Vec<C64>,
    pub left: Option<TbcRow>,
    pub right: Option<TbcRow>,
    /// `V~_l` on nodes `0..=J`.
    pub v_mode: Vec<f64>,
    lu: TridiagLu,
}

/// Inputs of [`assemble_mode_system`].
#[derive(Debug, Clone, Copy)]
pub struct ModeInputs<'a> {
    pub l: usize,
    pub lambda: f64,
    pub coeffs: &'a SampledCoefficients,
    pub mesh: &'a Mesh2d,
    pub tau: f64,
}

/// Builds rows for
/// `i hbar rho (a - b)/tau = -(hbar^2/2) hat(d)_x(B11 bar(d)_x s) + V~_l s + F`,
/// `s = (a + b)/2`, plus the boundary rows.
pub fn assemble_mode_system(
    inp: ModeInputs<'_>,
    left: &ModeBoundary,
    right: &ModeBoundary,
) -> Result<ModeSystem> {
    let ModeInputs {
        l,
        lambda,
        coeffs,
        mesh,
        tau,
    } = inp;
    if !(tau > 0.0) {
        return Err(Error::validation("time step must be positive"));
    }
    let nx = mesh.nx();
    let hbar = coeffs.hbar;
    let h2 = 0.5 * hbar * hbar;
    let kref = 1;
    let v_mode: Vec<f64> = (0..=nx)
        .map(|j| h2 * coeffs.b22[[j, kref]] * lambda + coeffs.v_tilde[j])
        .collect();
    let first = if matches!(left, ModeBoundary::Dirichlet) { 1 } else { 0 };
    let last = if matches!(right, ModeBoundary::Dirichlet) { nx - 1 } else { nx };
    let n = last - first + 1;
    let mut s = ModeSystem {
        l,
        first,
        last,
        sub: vec![ZERO; n],
        diag: vec![ZERO; n],
        sup: vec![ZERO; n],
        rsub: vec![ZERO; n],
        rdiag: vec![ZERO; n],
        rsup: vec![ZERO; n],
        left: None,
        right: None,
        v_mode,
        lu: TridiagLu::factor(&[ZERO], &[C64::new(1.0, 0.0)], &[ZERO])?,
    };

    for j in first..=last {
        let i = j - first;
        let iw = C64::new(0.0, hbar * coeffs.rho[[j, kref]] / tau);
        let vm = s.v_mode[j];
        let tbc = |b: &ModeBoundary, h: f64| -> Result<TbcRow> {
            match b {
                ModeBoundary::Transparent(k) => {
                    let p = &k.params;
                    let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1.0);
                    if !(close(p.h, h) && close(p.tau, tau) && close(p.v_mode, vm) && close(p.hbar, hbar)) {
                        return Err(Error::validation(format!(
                            "kernel of mode {l} was built for different boundary parameters"
                        )));
                    }
                    Ok(TbcRow {
                        d_half: h2 * coeffs.asymptotics.b1 / (h * h),
                        h,
                        kernel: Arc::clone(&k.r),
                    })
                }
                ModeBoundary::Dirichlet => unreachable!("Dirichlet ends carry no unknown"),
            }
        };
        if j == 0 || j == nx {
            let row = if j == 0 {
                tbc(left, mesh.x.step(1))?
            } else {
                tbc(right, mesh.x.step(nx))?
            };
            let d = row.d_half;
            let r0 = row.kernel[0];
            s.diag[i] = iw - d - 0.5 * vm + d * r0;
            s.rdiag[i] = iw + d + 0.5 * vm;
            if j == 0 {
                s.sup[i] = C64::new(d, 0.0);
                s.rsup[i] = C64::new(-d, 0.0);
                s.left = Some(row);
            } else {
                s.sub[i] = C64::new(d, 0.0);
                s.rsub[i] = C64::new(-d, 0.0);
                s.right = Some(row);
            }
            continue;
        }
        let hp = mesh.x.half_step(j);
        let cp = h2 * coeffs.b11[[j + 1, kref]] / (mesh.x.step(j + 1) * hp);
        let cm = h2 * coeffs.b11[[j, kref]] / (mesh.x.step(j) * hp);
        let centre = 0.5 * (cp + cm + vm);
        s.diag[i] = iw - centre;
        s.rdiag[i] = iw + centre;
        s.sub[i] = C64::new(0.5 * cm, 0.0);
        s.sup[i] = C64::new(0.5 * cp, 0.0);
        s.rsub[i] = C64::new(-0.5 * cm, 0.0);
        s.rsup[i] = C64::new(-0.5 * cp, 0.0);
    }
    s.lu = TridiagLu::factor(&s.sub, &s.diag, &s.sup)?;
    Ok(s)
}

impl ModeSystem {
    pub fn unknowns(&self) -> usize {
        self.diag.len()
    }

    /// Right-hand side from `b` (nodes `0..=J`) and optional forcing, with
    /// the known history part of the boundary convolutions subtracted.
    ///
    /// `left_past` / `right_past` hold boundary levels `0..m-1`.
    pub fn rhs(
        &self,
        b: &[C64],
        forcing: Option<&[C64]>,
        left_past: &[C64],
        right_past: &[C64],
        out: &mut [C64],
    ) {
        for (i, o) in out.iter_mut().enumerate() {
            let j = self.first + i;
            let mut acc = self.rdiag[i] * b[j];
            if j > 0 {
                acc += self.rsub[i] * b[j - 1];
            }
            if j + 1 < b.len() {
                acc += self.rsup[i] * b[j + 1];
            }
            if let Some(f) = forcing {
                acc += f[j];
            }
            *o = acc;
        }
        if let Some(row) = &self.left {
            out[0] -= row.d_half * convolution_tail(&row.kernel, left_past);
        }
        if let Some(row) = &self.right {
            let n = out.len();
            out[n - 1] -= row.d_half * convolution_tail(&row.kernel, right_past);
        }
    }

    /// Solves in place: `x` holds the right-hand side on entry.
    pub fn solve_in_place(&self, x: &mut [C64]) {
        self.lu.solve_in_place(x);
    }

    /// Dense matrix of the system (for tests and diagnostics).
    pub fn dense(&self) -> Vec<Vec<C64>> {
        let n = self.unknowns();
        let mut a = vec![vec![ZERO; n]; n];
        for i in 0..n {
            a[i][i] = self.diag[i];
            if i > 0 {
                a[i][i - 1] = self.sub[i];
            }
            if i + 1 < n {
                a[i][i + 1] = self.sup[i];
            }
        }
        a
    }
}
