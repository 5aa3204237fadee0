//! Eigenbasis of the Dirichlet operator `-hat(d)_y bar(d)_y` and the
//! associated transforms between y-nodes and mode coefficients.
//!
//! Arrays on y-nodes have length `K + 1`. Coefficient arrays use the same
//! length with mode `l` stored at index `l`, `l = 1..K-1`; slots `0` and `K`
//! stay zero.

use crate::error::{Error, Result};
use crate::mesh::AxisMesh;
use crate::parallel::Execution;
use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone)]
struct SineFft {
    fft: Arc<dyn Fft<f64>>,
    forward_scale: f64,
    inverse_scale: f64,
}

impl SineFft {
    /// Unnormalized DST-I `S_l = sum_{k=1}^{K-1} v_k sin(pi l k / K)` through
    /// an FFT of the odd extension; `buf` has length `2K`.
    fn dst1(&self, v: &[C64], out: &mut [C64], buf: &mut [C64], scale: f64) {
        let k = v.len() - 1;
        buf[0] = ZERO;
        buf[k] = ZERO;
        for i in 1..k {
            buf[i] = v[i];
            buf[2 * k - i] = -v[i];
        }
        self.fft.process(buf);
        // FFT of the odd extension equals -2i S_l.
        let f = C64::new(0.0, 0.5 * scale);
        out[0] = ZERO;
        out[k] = ZERO;
        for l in 1..k {
            out[l] = buf[l] * f;
        }
    }
}

/// Orthonormal (in `(.,.)_{omega_delta}`) eigenvectors and eigenvalues of
/// `-hat(d)_y bar(d)_y` with zero values at `k = 0, K`.
#[derive(Clone)]
pub struct SpectralBasis {
    mesh: AxisMesh,
    eigenvalues: Vec<f64>,
    /// Row `l` holds `E_l` on nodes `0..=K`; row 0 is unused.
    vectors: Array2<f64>,
    fast: Option<SineFft>,
}

impl fmt::Debug for SpectralBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralBasis")
            .field("modes", &self.modes())
            .field("fast_path", &self.fast_path())
            .finish_non_exhaustive()
    }
}

/// Direction of a batched transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

impl SpectralBasis {
    /// Explicit sine basis on uniform meshes, numerical eigenpairs otherwise.
    pub fn new(mesh: &AxisMesh) -> Result<Self> {
        if mesh.cells() < 2 {
            return Err(Error::validation("y mesh needs at least two cells"));
        }
        if mesh.is_uniform() {
            Ok(Self::uniform(mesh))
        } else {
            Self::dense(mesh)
        }
    }

    /// Same eigenpairs without the FFT path; reference for the fast transform.
    pub fn new_dense(mesh: &AxisMesh) -> Result<Self> {
        let mut b = Self::new(mesh)?;
        b.fast = None;
        Ok(b)
    }

    fn uniform(mesh: &AxisMesh) -> Self {
        let n = mesh.cells();
        let y_len = mesh.last() - mesh.first();
        let delta = y_len / n as f64;
        let amp = (2.0 / y_len).sqrt();
        let mut eigenvalues = vec![0.0; n];
        let mut vectors = Array2::zeros((n, n + 1));
        for l in 1..n {
            eigenvalues[l] = (2.0 / delta * (PI * l as f64 / (2.0 * n as f64)).sin()).powi(2);
            for k in 1..n {
                vectors[[l, k]] = amp * (PI * (l * k) as f64 / n as f64).sin();
            }
        }
        let fft = FftPlanner::new().plan_fft_forward(2 * n);
        Self {
            mesh: mesh.clone(),
            eigenvalues,
            vectors,
            fast: Some(SineFft {
                fft,
                forward_scale: delta * amp,
                inverse_scale: amp,
            }),
        }
    }

    fn dense(mesh: &AxisMesh) -> Result<Self> {
        let n = mesh.cells();
        let m = n - 1;
        let w: Vec<f64> = (1..n).map(|k| mesh.half_step(k)).collect();
        let mut s = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            let k = i + 1;
            s[(i, i)] = (1.0 / mesh.step(k) + 1.0 / mesh.step(k + 1)) / w[i];
            if i + 1 < m {
                let off = -1.0 / (mesh.step(k + 1) * (w[i] * w[i + 1]).sqrt());
                s[(i, i + 1)] = off;
                s[(i + 1, i)] = off;
            }
        }
        let eig = SymmetricEigen::try_new(s, 1e-15, 10_000)
            .ok_or_else(|| Error::Eigen("symmetric eigen-solver did not converge".into()))?;
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let mut eigenvalues = vec![0.0; n];
        let mut vectors = Array2::zeros((n, n + 1));
        for (pos, &idx) in order.iter().enumerate() {
            let l = pos + 1;
            let lam = eig.eigenvalues[idx];
            if !(lam > 0.0) {
                return Err(Error::Eigen(format!("non-positive eigenvalue {lam}")));
            }
            eigenvalues[l] = lam;
            let col = eig.eigenvectors.column(idx);
            let sign = if col[0] < 0.0 { -1.0 } else { 1.0 };
            for i in 0..m {
                vectors[[l, i + 1]] = sign * col[i] / w[i].sqrt();
            }
        }
        Ok(Self {
            mesh: mesh.clone(),
            eigenvalues,
            vectors,
            fast: None,
        })
    }

    /// Number of y-cells `K`; modes are `1..K-1`.
    pub fn cells(&self) -> usize {
        self.mesh.cells()
    }

    pub fn modes(&self) -> usize {
        self.cells() - 1
    }

    pub fn fast_path(&self) -> bool {
        self.fast.is_some()
    }

    pub fn mesh(&self) -> &AxisMesh {
        &self.mesh
    }

    /// `lambda_l`, `l = 1..K-1`.
    pub fn eigenvalue(&self, l: usize) -> f64 {
        self.eigenvalues[l]
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues[1..]
    }

    /// `E_l` on nodes `0..=K`.
    pub fn vector(&self, l: usize) -> &[f64] {
        let w = self.vectors.ncols();
        &self.vectors.as_slice().expect("standard layout")[l * w..(l + 1) * w]
    }

    fn check_len(&self, n: usize) -> Result<()> {
        let want = self.cells() + 1;
        if n != want {
            return Err(Error::LengthMismatch {
                expected: want,
                found: n,
            });
        }
        Ok(())
    }

    fn buffer(&self) -> Vec<C64> {
        if self.fast.is_some() {
            vec![ZERO; 2 * self.cells()]
        } else {
            Vec::new()
        }
    }

    fn forward_with(&self, u: &[C64], out: &mut [C64], buf: &mut [C64]) {
        let n = self.cells();
        if let Some(f) = &self.fast {
            f.dst1(u, out, buf, f.forward_scale);
            return;
        }
        out[0] = ZERO;
        out[n] = ZERO;
        for l in 1..n {
            let e = self.vectors.row(l);
            let mut acc = ZERO;
            for k in 1..n {
                acc += u[k] * (e[k] * self.mesh.half_step(k));
            }
            out[l] = acc;
        }
    }

    fn inverse_with(&self, c: &[C64], out: &mut [C64], buf: &mut [C64]) {
        let n = self.cells();
        if let Some(f) = &self.fast {
            f.dst1(c, out, buf, f.inverse_scale);
            return;
        }
        out.fill(ZERO);
        for l in 1..n {
            let e = self.vectors.row(l);
            let cl = c[l];
            for k in 1..n {
                out[k] += cl * e[k];
            }
        }
    }

    /// `U^{(l)} = (U, E_l)_{omega_delta}`.
    pub fn forward(&self, u: &[C64]) -> Result<Vec<C64>> {
        self.check_len(u.len())?;
        let mut out = vec![ZERO; u.len()];
        self.forward_with(u, &mut out, &mut self.buffer());
        Ok(out)
    }

    /// `U = sum_l U^{(l)} E_l`.
    pub fn inverse(&self, c: &[C64]) -> Result<Vec<C64>> {
        self.check_len(c.len())?;
        let mut out = vec![ZERO; c.len()];
        self.inverse_with(c, &mut out, &mut self.buffer());
        Ok(out)
    }

    /// Transforms every row of a `(rows, K + 1)` array in place.
    pub fn transform_rows(&self, field: &mut Array2<C64>, dir: Direction, exec: Execution) -> Result<()> {
        let width = field.ncols();
        self.check_len(width)?;
        let rows = field.nrows();
        let data = field
            .as_slice_mut()
            .ok_or_else(|| Error::Numerical("field is not contiguous".into()))?;
        let per_chunk = (rows / 64).max(1);
        exec.for_each_chunk(data, per_chunk * width, |_, chunk| {
            let mut buf = self.buffer();
            let mut tmp = vec![ZERO; width];
            for row in chunk.chunks_mut(width) {
                match dir {
                    Direction::Forward => self.forward_with(row, &mut tmp, &mut buf),
                    Direction::Inverse => self.inverse_with(row, &mut tmp, &mut buf),
                }
                row.copy_from_slice(&tmp);
            }
        });
        Ok(())
    }
}

/// `-hat(d)_y bar(d)_y u` on interior nodes; zero at `k = 0, K`.
pub fn apply_operator_y(mesh: &AxisMesh, u: &[C64]) -> Vec<C64> {
    let n = mesh.cells();
    let mut out = vec![ZERO; n + 1];
    for k in 1..n {
        let right = (u[k + 1] - u[k]) / mesh.step(k + 1);
        let left = (u[k] - u[k - 1]) / mesh.step(k);
        out[k] = -(right - left) / mesh.half_step(k);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::inner_product_y;
    use proptest::prelude::*;

    fn nonuniform(n: usize) -> AxisMesh {
        AxisMesh::new((0..=n).map(|k| (k as f64 / n as f64).powf(1.3) * 2.0).collect()).unwrap()
    }

    fn real(v: &[f64]) -> Vec<C64> {
        v.iter().map(|&x| C64::new(x, 0.0)).collect()
    }

    fn random_row(n: usize, seed: u64) -> Vec<C64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<C64> = (0..=n)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        v[0] = ZERO;
        v[n] = ZERO;
        v
    }

    #[test]
    fn single_mode() {
        let mesh = AxisMesh::uniform(0.0, 1.5, 2).unwrap();
        let b = SpectralBasis::new(&mesh).unwrap();
        let d = 0.75;
        assert!((b.eigenvalue(1) - 2.0 / (d * d)).abs() < 1e-13);
        assert!((b.vector(1)[1] - (2.0f64 / 1.5).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn uniform_eigenvalues_sorted_and_bounded() {
        let mesh = AxisMesh::uniform(0.0, 2.8, 32).unwrap();
        let b = SpectralBasis::new(&mesh).unwrap();
        assert!(b.fast_path());
        let d = 2.8 / 32.0;
        for w in b.eigenvalues().windows(2) {
            assert!(w[0] < w[1]);
        }
        assert!(b.eigenvalue(31) < (2.0 / d) * (2.0 / d));
        assert!(b.eigenvalues()[0] > 0.0);
    }

    fn check_basis(b: &SpectralBasis, tol: f64) {
        let mesh = b.mesh().clone();
        for l in 1..=b.modes() {
            let el = real(b.vector(l));
            let le = apply_operator_y(&mesh, &el);
            for k in 0..=mesh.cells() {
                assert!((le[k] - el[k] * b.eigenvalue(l)).norm() <= 1e-11 * b.eigenvalue(l));
            }
            for n in 1..=b.modes() {
                let ip = inner_product_y(&el, &real(b.vector(n)), &mesh).unwrap();
                let want = if l == n { 1.0 } else { 0.0 };
                assert!((ip - want).norm() < tol, "({l},{n}) -> {ip}");
            }
            let c = b.forward(&el).unwrap();
            for (n, v) in c.iter().enumerate() {
                let want = if n == l { 1.0 } else { 0.0 };
                assert!((v - want).norm() < tol);
            }
        }
    }

    #[test]
    fn uniform_basis_orthonormal_and_diagonalizing() {
        for n in [2, 3, 7, 16, 30] {
            check_basis(&SpectralBasis::new(&AxisMesh::uniform(0.0, 2.8, n).unwrap()).unwrap(), 1e-12);
        }
    }

    #[test]
    fn nonuniform_basis_orthonormal_and_diagonalizing() {
        for n in [2, 5, 17] {
            let b = SpectralBasis::new(&nonuniform(n)).unwrap();
            assert!(!b.fast_path());
            check_basis(&b, 1e-12);
        }
    }

    #[test]
    fn dense_eigenpairs_match_formulas_on_uniform_mesh() {
        let mesh = AxisMesh::uniform(0.0, 2.0, 12).unwrap();
        let explicit = SpectralBasis::new(&mesh).unwrap();
        let numeric = SpectralBasis::dense(&mesh).unwrap();
        for l in 1..12 {
            assert!((explicit.eigenvalue(l) - numeric.eigenvalue(l)).abs() < 1e-11 * explicit.eigenvalue(l));
            for k in 0..=12 {
                assert!((explicit.vector(l)[k] - numeric.vector(l)[k]).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn zero_and_length_errors() {
        let b = SpectralBasis::new(&AxisMesh::uniform(0.0, 1.0, 8).unwrap()).unwrap();
        assert!(b.forward(&[ZERO; 9]).unwrap().iter().all(|v| *v == ZERO));
        assert!(b.inverse(&[ZERO; 9]).unwrap().iter().all(|v| *v == ZERO));
        assert!(matches!(b.forward(&[ZERO; 8]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(b.inverse(&[ZERO; 10]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn batched_rows_match_single_rows() {
        let mesh = AxisMesh::uniform(0.0, 1.0, 16).unwrap();
        let b = SpectralBasis::new(&mesh).unwrap();
        let mut field = Array2::from_shape_fn((130, 17), |(j, k)| random_row(16, j as u64)[k]);
        let orig = field.clone();
        for exec in [Execution::Sequential, Execution::Parallel] {
            let mut f = orig.clone();
            b.transform_rows(&mut f, Direction::Forward, exec).unwrap();
            for j in [0, 63, 129] {
                let want = b.forward(orig.row(j).as_slice().unwrap()).unwrap();
                for k in 0..17 {
                    assert!((f[[j, k]] - want[k]).norm() < 1e-15);
                }
            }
            b.transform_rows(&mut f, Direction::Inverse, exec).unwrap();
            field.assign(&f);
            for (a, o) in field.iter().zip(orig.iter()) {
                assert!((a - o).norm() < 1e-13);
            }
        }
    }

    proptest! {
        #[test]
        fn fast_and_dense_agree(n in 2usize..40, seed in any::<u64>()) {
            let mesh = AxisMesh::uniform(0.0, 2.8, n).unwrap();
            let fast = SpectralBasis::new(&mesh).unwrap();
            let dense = SpectralBasis::new_dense(&mesh).unwrap();
            let u = random_row(n, seed);
            let a = fast.forward(&u).unwrap();
            let b = dense.forward(&u).unwrap();
            let scale: f64 = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).norm() <= 1e-12 * scale);
            }
            let ia = fast.inverse(&a).unwrap();
            let ib = dense.inverse(&b).unwrap();
            for (x, y) in ia.iter().zip(&ib) {
                prop_assert!((x - y).norm() <= 1e-12 * scale);
            }
        }

        #[test]
        fn round_trip_and_parseval(n in 2usize..40, seed in any::<u64>(), uniform in any::<bool>()) {
            let mesh = if uniform { AxisMesh::uniform(0.0, 1.7, n).unwrap() } else { nonuniform(n) };
            let b = SpectralBasis::new(&mesh).unwrap();
            let u = random_row(n, seed);
            let c = b.forward(&u).unwrap();
            let back = b.inverse(&c).unwrap();
            let norm2 = inner_product_y(&u, &u, &mesh).unwrap().re;
            let coef2: f64 = c.iter().map(|v| v.norm_sqr()).sum();
            prop_assert!((norm2 - coef2).abs() <= 1e-12 * norm2);
            for (x, y) in back.iter().zip(&u) {
                prop_assert!((x - y).norm() <= 1e-12 * norm2.sqrt().max(1.0));
            }
        }
    }
}
