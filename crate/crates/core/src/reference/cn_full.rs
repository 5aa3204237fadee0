//! Unsplit Crank-Nicolson scheme on the whole grid, solved as one banded
//! system. Slow but independent of the y-mode decoupling, so it checks the
//! splitting solver and handles coefficients that couple the modes.

use super::banded::{BandLu, BandMatrix};
use crate::error::{Error, Result};
use crate::mesh::{Mesh2d, TimeMesh};
use crate::model::{SampledCoefficients, Side};
use crate::parallel::Execution;
use crate::spectral::{apply_operator_y, SpectralBasis};
use crate::splitting::{truncate_initial, BoundaryKind, SolverOptions};
use crate::model::{apply_hamiltonian, WaveField};
use crate::tbc::{convolution_tail, BoundaryParams, KernelCache, KernelSet};
use ndarray::Array2;
use num_complex::Complex64 as C64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Transparent end of the full system.
#[derive(Debug, Clone)]
struct FullTbc {
    /// Node index of the boundary row and of its inner neighbour.
    j: usize,
    inner: usize,
    d_half: f64,
    kernels: KernelSet,
    /// Mode coefficients of past boundary traces, index `l - 1`.
    history: Vec<Vec<C64>>,
    /// `G = (hbar^2/2) B2 Lambda_y + V_inf` on the trace, dense `(K-1)^2`.
    g: Vec<Vec<C64>>,
}

/// Crank-Nicolson for `i hbar rho d_t psi = (H_0 + V) psi` with one banded
/// LU factorization reused at every level.
#[derive(Debug)]
pub struct CnFullSolver {
    mesh: Mesh2d,
    time: TimeMesh,
    coeffs: SampledCoefficients,
    potential: Array2<f64>,
    basis: SpectralBasis,
    first: usize,
    last: usize,
    lu: BandLu,
    /// Right-hand side operator `[i hbar rho/tau + (H + V)/2]` on interior rows.
    rhs_op: BandMatrix,
    tbc_left: Option<FullTbc>,
    tbc_right: Option<FullTbc>,
    psi: Array2<C64>,
    m: usize,
}

impl CnFullSolver {
    /// `potential` is the node potential used in the interior rows; the
    /// transparent rows use the asymptotic constant.
    pub fn new(
        coeffs: &SampledCoefficients,
        potential: Array2<f64>,
        mesh: &Mesh2d,
        time: &TimeMesh,
        psi0: &WaveField,
        options: SolverOptions,
    ) -> Result<Self> {
        mesh.check_shape(&potential)?;
        let (nx, ny) = mesh.shape();
        let (nx, ny) = (nx - 1, ny - 1);
        let transparent = options.left == BoundaryKind::Transparent || options.right == BoundaryKind::Transparent;
        if !time.is_uniform() && transparent {
            return Err(Error::validation("transparent boundaries require a uniform time mesh"));
        }
        if options.right == BoundaryKind::Transparent {
            coeffs.check_tail(mesh, Side::Right)?;
        }
        if options.left == BoundaryKind::Transparent {
            coeffs.check_tail(mesh, Side::Left)?;
        }
        let tau = time.step(1);
        let hbar = coeffs.hbar;
        let basis = SpectralBasis::new(&mesh.y)?;
        let first = if options.left == BoundaryKind::Transparent { 0 } else { 1 };
        let last = if options.right == BoundaryKind::Transparent { nx } else { nx - 1 };
        let width = ny - 1;
        let n = (last - first + 1) * width;
        let idx = |j: usize, k: usize| (j - first) * width + (k - 1);
        let p = ny;

        // H0 columns by probing with nine interleaved unit patterns.
        let mut lhs = BandMatrix::zeros(n, p);
        let mut rhs_op = BandMatrix::zeros(n, p);
        for cj in 0..3 {
            for ck in 0..3 {
                let mut probe = mesh.zeros();
                for j in (first..=last).filter(|j| j % 3 == cj) {
                    for k in (1..ny).filter(|k| k % 3 == ck) {
                        probe[[j, k]] = C64::new(1.0, 0.0);
                    }
                }
                let hp = apply_hamiltonian(coeffs, mesh, &probe);
                for j in 1..nx {
                    for k in 1..ny {
                        let v = hp[[j, k]];
                        if v == ZERO {
                            continue;
                        }
                        // The unique probed node within the 9-point stencil.
                        let src_j = (j - 1..=j + 1).find(|s| s % 3 == cj).expect("stencil");
                        let src_k = (k - 1..=k + 1).find(|s| s % 3 == ck).expect("stencil");
                        if src_j < first || src_j > last || src_k == 0 || src_k == ny {
                            continue;
                        }
                        lhs.add(idx(j, k), idx(src_j, src_k), -0.5 * v)?;
                        rhs_op.add(idx(j, k), idx(src_j, src_k), 0.5 * v)?;
                    }
                }
            }
        }
        for j in 1..nx {
            for k in 1..ny {
                let iw = C64::new(0.0, hbar * coeffs.rho[[j, k]] / tau);
                let v = 0.5 * potential[[j, k]];
                lhs.add(idx(j, k), idx(j, k), iw - v)?;
                rhs_op.add(idx(j, k), idx(j, k), iw + v)?;
            }
        }

        let (trimmed, _) = truncate_initial(psi0, mesh, &options)?;
        let psi = trimmed.psi;
        let a = coeffs.asymptotics;
        let m_max = time.levels();
        let mut build_tbc = |side: Side| -> Result<FullTbc> {
            let (j, inner, h) = match side {
                Side::Right => (nx, nx - 1, mesh.x.step(nx)),
                Side::Left => (0, 1, mesh.x.step(1)),
            };
            let bp = BoundaryParams {
                hbar,
                rho: a.rho,
                b1: a.b1,
                b2: a.b2,
                v_inf: a.v,
                h,
                tau,
            };
            let kernels = KernelSet::build(&bp, &basis, m_max.max(1), Execution::Sequential, Some(KernelCache::global()))?;
            let d_half = 0.5 * hbar * hbar * a.b1 / (h * h);
            let iw = C64::new(0.0, hbar * a.rho / tau);
            let mut g = vec![vec![ZERO; width]; width];
            for kc in 1..ny {
                let mut e = vec![ZERO; ny + 1];
                e[kc] = C64::new(1.0, 0.0);
                let ly = apply_operator_y(&mesh.y, &e);
                let fe = basis.forward(&e)?;
                let mut r0e = vec![ZERO; ny + 1];
                for l in 1..ny {
                    r0e[l] = kernels.mode(l).r[0] * fe[l];
                }
                let p0 = basis.inverse(&r0e)?;
                for kr in 1..ny {
                    let mut gv = 0.5 * hbar * hbar * a.b2 * ly[kr];
                    if kr == kc {
                        gv += a.v;
                    }
                    g[kr - 1][kc - 1] = gv;
                    let mut lv = -0.5 * gv + d_half * p0[kr];
                    if kr == kc {
                        lv += iw - d_half;
                    }
                    lhs.set(idx(j, kr), idx(j, kc), lv)?;
                }
                lhs.set(idx(j, kc), idx(inner, kc), C64::new(d_half, 0.0))?;
            }
            let trace = basis.forward(psi.row(j).as_slice().expect("contiguous"))?;
            let history = (1..ny)
                .map(|l| {
                    let mut v = Vec::with_capacity(m_max + 1);
                    v.push(trace[l]);
                    v
                })
                .collect();
            Ok(FullTbc {
                j,
                inner,
                d_half,
                kernels,
                history,
                g,
            })
        };
        let tbc_right = match options.right {
            BoundaryKind::Transparent => Some(build_tbc(Side::Right)?),
            BoundaryKind::Dirichlet => None,
        };
        let tbc_left = match options.left {
            BoundaryKind::Transparent => Some(build_tbc(Side::Left)?),
            BoundaryKind::Dirichlet => None,
        };
        let lu = BandLu::factor(lhs)?;
        Ok(Self {
            mesh: mesh.clone(),
            time: time.clone(),
            coeffs: coeffs.clone(),
            potential,
            basis,
            first,
            last,
            lu,
            rhs_op,
            tbc_left,
            tbc_right,
            psi,
            m: 0,
        })
    }

    pub fn psi(&self) -> &Array2<C64> {
        &self.psi
    }

    pub fn level(&self) -> usize {
        self.m
    }

    pub fn coefficients(&self) -> &SampledCoefficients {
        &self.coeffs
    }

    pub fn potential(&self) -> &Array2<f64> {
        &self.potential
    }

    /// `||sqrt(rho) Psi||` in the closed norm of the configured ends.
    pub fn mass(&self) -> f64 {
        let closure = match (self.tbc_left.is_some(), self.tbc_right.is_some()) {
            (false, false) => crate::mesh::Closure::Interior,
            (false, true) => crate::mesh::Closure::Right,
            (true, false) => crate::mesh::Closure::Left,
            (true, true) => crate::mesh::Closure::Both,
        };
        self.mesh.weighted_norm(&self.psi, &self.coeffs.rho, closure)
    }

    /// Advances one level from the stored field.
    pub fn step(&mut self) -> Result<()> {
        let b = self.psi.clone();
        self.psi = self.advance(&b)?;
        Ok(())
    }

    /// Advances one level starting from `b` instead of the stored field,
    /// keeping the boundary history of previous solutions.
    pub fn advance(&mut self, b: &Array2<C64>) -> Result<Array2<C64>> {
        self.mesh.check_shape(b)?;
        let m = self.m + 1;
        if m > self.time.levels() {
            return Err(Error::validation(format!("time mesh has only {} levels", self.time.levels())));
        }
        let ny = self.mesh.ny();
        let width = ny - 1;
        let first = self.first;
        let mut x = Vec::with_capacity((self.last - first + 1) * width);
        for j in first..=self.last {
            for k in 1..ny {
                x.push(b[[j, k]]);
            }
        }
        let mut rhs = self.rhs_op.mul_vec(&x);
        let iw = C64::new(0.0, self.coeffs.hbar * self.coeffs.asymptotics.rho / self.time.step(m));
        for t in [&self.tbc_left, &self.tbc_right].into_iter().flatten() {
            let mut tail = vec![ZERO; ny + 1];
            for l in 1..ny {
                tail[l] = convolution_tail(&t.kernels.mode(l).r, &t.history[l - 1]);
            }
            let tail = self.basis.inverse(&tail)?;
            for kr in 1..ny {
                let gb: C64 = (1..ny).map(|kc| t.g[kr - 1][kc - 1] * b[[t.j, kc]]).sum();
                rhs[(t.j - first) * width + kr - 1] = iw * b[[t.j, kr]]
                    + t.d_half * (b[[t.j, kr]] - b[[t.inner, kr]])
                    + 0.5 * gb
                    - t.d_half * tail[kr];
            }
        }
        self.lu.solve_in_place(&mut rhs);
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite solution at level {m}")));
        }
        let mut out = self.mesh.zeros();
        for j in first..=self.last {
            for k in 1..ny {
                out[[j, k]] = rhs[(j - first) * width + k - 1];
            }
        }
        for t in [&mut self.tbc_left, &mut self.tbc_right].into_iter().flatten() {
            let trace = self.basis.forward(out.row(t.j).as_slice().expect("contiguous"))?;
            for l in 1..ny {
                t.history[l - 1].push(trace[l]);
            }
        }
        self.m = m;
        Ok(out)
    }
}
