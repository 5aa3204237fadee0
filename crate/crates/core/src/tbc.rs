//! Discrete transparent boundary conditions: per-mode convolution kernels,
//! boundary histories and the reference boundary operator.
//!
//! For mode `l` the exterior Crank-Nicolson problem has constant
//! coefficients, and its solution with prescribed trace `Psi_J` satisfies
//! `Psi_{J+1} - Psi_{J-1}` (time-averaged) `= (R * Psi_J)^m`. The kernel `R`
//! is built from its generating function by a numerical inverse
//! Z-transform and cross-checked by marching the exterior problem directly.

use crate::error::{Error, Result};
use crate::parallel::Execution;
use crate::spectral::SpectralBasis;
use crate::tridiag::TridiagLu;
use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use std::collections::HashMap;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Constants of one exterior mode problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeParams {
    pub hbar: f64,
    pub rho: f64,
    pub b1: f64,
    /// Uniform exterior step.
    pub h: f64,
    pub tau: f64,
    /// `(hbar^2 / 2) B2 lambda_l + V_inf`.
    pub v_mode: f64,
}

impl ModeParams {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.hbar, self.rho, self.b1, self.h, self.tau]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0)
            && self.v_mode.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::validation(format!("invalid mode parameters {self:?}")))
        }
    }

    /// `hbar^2 B1 / (2 h^2)`.
    pub fn coupling(&self) -> f64 {
        self.hbar * self.hbar * self.b1 / (2.0 * self.h * self.h)
    }

    /// Upper bound on how many nodes a disturbance crosses per time step.
    pub fn nodes_per_step(&self) -> f64 {
        2.0 * self.coupling() * self.tau / (self.hbar * self.rho)
    }

    fn key(&self, m_max: usize) -> [u64; 7] {
        [
            self.hbar.to_bits(),
            self.rho.to_bits(),
            self.b1.to_bits(),
            self.h.to_bits(),
            self.tau.to_bits(),
            self.v_mode.to_bits(),
            m_max as u64,
        ]
    }
}

/// `R^0..R^M` for one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeKernel {
    pub params: ModeParams,
    pub r: Arc<Vec<C64>>,
}

impl ModeKernel {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Largest level the kernel supports.
    pub fn max_level(&self) -> usize {
        self.r.len() - 1
    }
}

/// Roots `(small, large)` of `kappa^2 - 2 beta kappa + 1 = 0` at `zeta = 1/z`.
pub fn characteristic_roots(p: &ModeParams, zeta: C64) -> Result<(C64, C64)> {
    let a = p.coupling();
    let w = C64::new(0.0, 2.0 * p.hbar * p.rho / p.tau) * (1.0 - zeta) / (1.0 + zeta);
    let beta = 1.0 + (p.v_mode - w) / (2.0 * a);
    let disc = ((beta - 1.0) * (beta + 1.0)).sqrt();
    let (k1, k2) = (beta + disc, beta - disc);
    let large = if k1.norm() >= k2.norm() { k1 } else { k2 };
    let small = large.inv();
    if !(small.norm() < 1.0 - 1e-14) || !small.is_finite() {
        let z = zeta.inv();
        return Err(Error::IllPosedFrequency {
            z_re: z.re,
            z_im: z.im,
        });
    }
    Ok((small, large))
}

/// Generating function `sum_m R^m zeta^m`, `|zeta| < 1`.
pub fn kernel_symbol(p: &ModeParams, zeta: C64) -> Result<C64> {
    let (small, large) = characteristic_roots(p, zeta)?;
    Ok(0.5 * (1.0 + zeta) * (small - large))
}

/// Samples on the circle `|zeta| = r_inv` for `N = 8 (M + 1)` points, with
/// `r_inv^N = 1e-14`, so aliasing enters at the `1e-14 |R|` level.
pub fn kernel_inverse_z(p: &ModeParams, m_max: usize) -> Result<ModeKernel> {
    kernel_inverse_z_with(p, m_max, (8 * (m_max + 1)).max(64))
}

/// Same as [`kernel_inverse_z`] with an explicit sample count.
pub fn kernel_inverse_z_with(p: &ModeParams, m_max: usize, samples: usize) -> Result<ModeKernel> {
    p.validate()?;
    if m_max < 1 {
        return Err(Error::validation("kernel needs M >= 1"));
    }
    if samples < 2 * m_max + 2 {
        return Err(Error::validation(format!(
            "{samples} samples cannot resolve {} kernel terms",
            m_max + 1
        )));
    }
    let n = samples;
    let radius = 10f64.powf(-14.0 / n as f64);
    let mut buf = Vec::with_capacity(n);
    for i in 0..n {
        let zeta = C64::from_polar(radius, 2.0 * std::f64::consts::PI * i as f64 / n as f64);
        buf.push(kernel_symbol(p, zeta)?);
    }
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mut r = Vec::with_capacity(m_max + 1);
    let mut scale = 1.0 / n as f64;
    for v in buf.iter().take(m_max + 1) {
        r.push(v * scale);
        scale /= radius;
    }
    Ok(ModeKernel {
        params: *p,
        r: Arc::new(r),
    })
}

/// Smallest exterior length accepted by the impulse oracle.
pub fn min_exterior_length(p: &ModeParams, m_max: usize) -> usize {
    (p.nodes_per_step() * (m_max + 1) as f64).ceil() as usize + 64
}

/// Marches the exterior problem on `J..J+j_ext` from a unit impulse of the
/// boundary trace at `m = 1` and reads off the boundary response.
///
/// `j_ext = None` uses twice the minimum length.
pub fn kernel_impulse_oracle(p: &ModeParams, m_max: usize, j_ext: Option<usize>) -> Result<ModeKernel> {
    p.validate()?;
    let min = min_exterior_length(p, m_max);
    let n_ext = j_ext.unwrap_or(2 * min);
    if n_ext < min {
        return Err(Error::validation(format!(
            "exterior length {n_ext} below {min}: far-end reflections would reach the boundary"
        )));
    }
    let trace: Vec<C64> = (0..=m_max + 1)
        .map(|m| if m == 1 { C64::new(1.0, 0.0) } else { ZERO })
        .collect();
    let response = exterior_response(p, &trace, n_ext)?;
    Ok(ModeKernel {
        params: *p,
        r: Arc::new(response[1..].to_vec()),
    })
}

/// Response `y^m = (Psi_{J+1} - Psi_{J-1})` (time-averaged) of the exterior
/// problem driven by `trace^m` (with `trace^0 = 0`), for `m = 0..trace.len()`.
pub fn exterior_response(p: &ModeParams, trace: &[C64], n_ext: usize) -> Result<Vec<C64>> {
    if trace.first().is_some_and(|t| *t != ZERO) {
        return Err(Error::validation("exterior initial data must vanish"));
    }
    let a = p.coupling();
    let iw = C64::new(0.0, p.hbar * p.rho / p.tau);
    let vm = p.v_mode;
    // Unknowns are nodes 1..n_ext-1; node 0 carries the trace, node n_ext is Dirichlet.
    let n = n_ext - 1;
    let diag = vec![iw - a - 0.5 * vm; n];
    let off = vec![C64::new(0.5 * a, 0.0); n];
    let lu = TridiagLu::factor(&off, &diag, &off)?;
    let mut old = vec![ZERO; n_ext + 1];
    let mut new = vec![ZERO; n_ext + 1];
    let mut rhs = vec![ZERO; n];
    let mut out = vec![ZERO; trace.len()];
    let bdiag = iw + a + 0.5 * vm;
    for m in 1..trace.len() {
        for i in 1..n_ext {
            rhs[i - 1] = bdiag * old[i] - 0.5 * a * (old[i - 1] + old[i + 1]);
        }
        new[0] = trace[m];
        rhs[0] -= 0.5 * a * new[0];
        lu.solve_in_place(&mut rhs);
        new[1..n_ext].copy_from_slice(&rhs);
        new[n_ext] = ZERO;
        let s0 = 0.5 * (new[0] + old[0]);
        let s1 = 0.5 * (new[1] + old[1]);
        out[m] = 2.0 * (s1 - s0) + (iw * (new[0] - old[0]) - vm * s0) / a;
        std::mem::swap(&mut old, &mut new);
    }
    Ok(out)
}

/// Process-wide kernel cache keyed by the exact mode parameters and `M`.
#[derive(Debug, Default)]
pub struct KernelCache {
    map: Mutex<HashMap<[u64; 7], Arc<Vec<C64>>>>,
}

impl KernelCache {
    pub fn global() -> &'static KernelCache {
        static CACHE: OnceLock<KernelCache> = OnceLock::new();
        CACHE.get_or_init(KernelCache::default)
    }

    pub fn get_or_build(&self, p: &ModeParams, m_max: usize) -> Result<ModeKernel> {
        let key = p.key(m_max);
        if let Some(r) = self.map.lock().expect("kernel cache poisoned").get(&key) {
            return Ok(ModeKernel {
                params: *p,
                r: Arc::clone(r),
            });
        }
        let k = kernel_inverse_z(p, m_max)?;
        self.map
            .lock()
            .expect("kernel cache poisoned")
            .insert(key, Arc::clone(&k.r));
        Ok(k)
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("kernel cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.map.lock().expect("kernel cache poisoned").clear();
    }
}

/// Kernels of all modes `l = 1..K-1` for one boundary.
#[derive(Debug, Clone)]
pub struct KernelSet {
    /// Index `l - 1` holds mode `l`.
    pub kernels: Vec<ModeKernel>,
    pub h: f64,
    pub m_max: usize,
}

/// Parameters shared by every mode of a boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryParams {
    pub hbar: f64,
    pub rho: f64,
    pub b1: f64,
    pub b2: f64,
    pub v_inf: f64,
    pub h: f64,
    pub tau: f64,
}

impl BoundaryParams {
    pub fn mode(&self, lambda: f64) -> ModeParams {
        ModeParams {
            hbar: self.hbar,
            rho: self.rho,
            b1: self.b1,
            h: self.h,
            tau: self.tau,
            v_mode: 0.5 * self.hbar * self.hbar * self.b2 * lambda + self.v_inf,
        }
    }
}

impl KernelSet {
    pub fn build(
        bp: &BoundaryParams,
        basis: &SpectralBasis,
        m_max: usize,
        exec: Execution,
        cache: Option<&KernelCache>,
    ) -> Result<Self> {
        let kernels = exec.map_range(basis.modes(), |i| {
            let p = bp.mode(basis.eigenvalue(i + 1));
            match cache {
                Some(c) => c.get_or_build(&p, m_max),
                None => kernel_inverse_z(&p, m_max),
            }
        });
        Ok(Self {
            kernels: kernels.into_iter().collect::<Result<_>>()?,
            h: bp.h,
            m_max,
        })
    }

    /// Mode `l`, `1 <= l <= K-1`.
    pub fn mode(&self, l: usize) -> &ModeKernel {
        &self.kernels[l - 1]
    }

    pub fn modes(&self) -> usize {
        self.kernels.len()
    }
}

/// Per-mode boundary coefficient sequences, levels `0..=m`, append-only.
#[derive(Debug, Clone)]
pub struct BoundaryHistory {
    /// Index `l - 1`.
    levels: Vec<Vec<C64>>,
}

impl BoundaryHistory {
    /// Starts every mode from level-0 value `initial[l]` (`initial` is indexed by mode).
    pub fn new(modes: usize, capacity: usize) -> Self {
        Self {
            levels: (0..modes)
                .map(|_| {
                    let mut v = Vec::with_capacity(capacity + 1);
                    v.push(ZERO);
                    v
                })
                .collect(),
        }
    }

    pub fn from_initial(initial: &[C64], capacity: usize) -> Self {
        let mut h = Self::new(initial.len(), capacity);
        for (seq, v) in h.levels.iter_mut().zip(initial) {
            seq[0] = *v;
        }
        h
    }

    /// Number of completed time steps.
    pub fn steps(&self) -> usize {
        self.levels.first().map_or(0, |v| v.len() - 1)
    }

    pub fn modes(&self) -> usize {
        self.levels.len()
    }

    /// Sequence of mode `l`, `1 <= l <= K-1`.
    pub fn mode(&self, l: usize) -> &[C64] {
        &self.levels[l - 1]
    }

    pub fn mode_mut(&mut self, l: usize) -> &mut Vec<C64> {
        &mut self.levels[l - 1]
    }

    /// Appends a full level (indexed by mode).
    pub fn push_level(&mut self, values: &[C64]) -> Result<()> {
        if values.len() != self.modes() {
            return Err(Error::LengthMismatch {
                expected: self.modes(),
                found: values.len(),
            });
        }
        for (seq, v) in self.levels.iter_mut().zip(values) {
            seq.push(*v);
        }
        Ok(())
    }
}

/// `sum_{q=1}^{m} R^q a^{m-q}`: the part of `(R * a)^m` fixed by past levels.
/// `past` holds levels `0..m`.
pub fn convolution_tail(r: &[C64], past: &[C64]) -> C64 {
    let m = past.len();
    let mut acc = ZERO;
    for q in 1..=m.min(r.len() - 1) {
        acc += r[q] * past[m - q];
    }
    acc
}

/// `(R * a)^m` with `a` holding levels `0..=m`.
pub fn convolution(r: &[C64], a: &[C64]) -> C64 {
    let m = a.len() - 1;
    r[0] * a[m] + convolution_tail(r, &a[..m])
}

/// `(1/2h) F^{-1}(R_l * (F Phi)^{(l)})^m` for `phi` holding physical boundary
/// traces at levels `0..=m`.
pub fn apply_s_ref(phi: &[Vec<C64>], kernels: &KernelSet, basis: &SpectralBasis) -> Result<Vec<C64>> {
    let coeffs = mode_histories(phi, kernels, basis)?;
    let m = phi.len() - 1;
    let mut out = vec![ZERO; basis.cells() + 1];
    for l in 1..=basis.modes() {
        out[l] = convolution(&kernels.mode(l).r[..=m], &coeffs[l - 1]) / (2.0 * kernels.h);
    }
    basis.inverse(&out)
}

fn mode_histories(phi: &[Vec<C64>], kernels: &KernelSet, basis: &SpectralBasis) -> Result<Vec<Vec<C64>>> {
    if phi.is_empty() {
        return Err(Error::validation("history needs at least level 0"));
    }
    let m = phi.len() - 1;
    if m > kernels.m_max {
        return Err(Error::LengthMismatch {
            expected: kernels.m_max + 1,
            found: phi.len(),
        });
    }
    if kernels.modes() != basis.modes() {
        return Err(Error::LengthMismatch {
            expected: basis.modes(),
            found: kernels.modes(),
        });
    }
    let mut per_mode = vec![Vec::with_capacity(m + 1); basis.modes()];
    for level in phi {
        let c = basis.forward(level)?;
        for (l, seq) in per_mode.iter_mut().enumerate() {
            seq.push(c[l + 1]);
        }
    }
    Ok(per_mode)
}

/// Per-mode terms of `Im sum_m (S^m Phi^m, s_t Phi^m) tau` for a coefficient sequence.
pub fn positivity_mode(r: &[C64], a: &[C64], h: f64, tau: f64) -> f64 {
    let mut acc = 0.0;
    for m in 1..a.len() {
        let s = convolution(&r[..=m], &a[..=m]) / (2.0 * h);
        let avg = 0.5 * (a[m] + a[m - 1]);
        acc += (s * avg.conj()).im * tau;
    }
    acc
}

/// `Im sum_{m=1}^{M} (S_ref^m Phi^m, s_t Phi^m)_{omega_delta} tau`, evaluated in
/// physical space; non-negative for the exact discrete boundary operator.
pub fn check_positivity(phi: &[Vec<C64>], kernels: &KernelSet, basis: &SpectralBasis, tau: f64) -> Result<f64> {
    let mut acc = 0.0;
    for m in 1..phi.len() {
        let s = apply_s_ref(&phi[..=m], kernels, basis)?;
        let avg: Vec<C64> = phi[m].iter().zip(&phi[m - 1]).map(|(a, b)| 0.5 * (a + b)).collect();
        acc += crate::mesh::inner_product_y(&s, &avg, basis.mesh())?.im * tau;
    }
    Ok(acc)
}

/// The same sum split by mode.
pub fn check_positivity_modes(
    phi: &[Vec<C64>],
    kernels: &KernelSet,
    basis: &SpectralBasis,
    tau: f64,
) -> Result<Vec<f64>> {
    let coeffs = mode_histories(phi, kernels, basis)?;
    Ok(coeffs
        .iter()
        .enumerate()
        .map(|(i, a)| positivity_mode(&kernels.kernels[i].r, a, kernels.h, tau))
        .collect())
}

const KERNEL_MAGIC: &[u8; 4] = b"QKRN";
const KERNEL_VERSION: u32 = 1;

/// Binary dump: magic, version, mode count, `M`, then `hbar, rho, B1, h, tau`
/// as `f64`, then per mode `V_l` and `M + 1` complex pairs (little endian).
pub fn write_kernels_binary(path: &Path, set: &KernelSet) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(KERNEL_MAGIC)?;
    w.write_all(&KERNEL_VERSION.to_le_bytes())?;
    w.write_all(&(set.modes() as u32).to_le_bytes())?;
    w.write_all(&(set.m_max as u32).to_le_bytes())?;
    let p = set
        .kernels
        .first()
        .map(|k| k.params)
        .ok_or_else(|| Error::validation("empty kernel set"))?;
    for v in [p.hbar, p.rho, p.b1, p.h, p.tau] {
        w.write_all(&v.to_le_bytes())?;
    }
    for k in &set.kernels {
        w.write_all(&k.params.v_mode.to_le_bytes())?;
        for c in k.r.iter() {
            w.write_all(&c.re.to_le_bytes())?;
            w.write_all(&c.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_kernels_binary(path: &Path) -> Result<KernelSet> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let bad = |what: &str| Error::Numerical(format!("malformed kernel file: {what}"));
    if bytes.len() < 16 + 40 || &bytes[..4] != KERNEL_MAGIC {
        return Err(bad("header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    if u32_at(4) != KERNEL_VERSION {
        return Err(bad("version"));
    }
    let modes = u32_at(8) as usize;
    let m_max = u32_at(12) as usize;
    let (hbar, rho, b1, h, tau) = (f64_at(16), f64_at(24), f64_at(32), f64_at(40), f64_at(48));
    let per_mode = 8 + 16 * (m_max + 1);
    if bytes.len() != 56 + modes * per_mode {
        return Err(bad("length"));
    }
    let mut kernels = Vec::with_capacity(modes);
    for l in 0..modes {
        let o = 56 + l * per_mode;
        let r = (0..=m_max)
            .map(|m| C64::new(f64_at(o + 8 + 16 * m), f64_at(o + 16 + 16 * m)))
            .collect();
        kernels.push(ModeKernel {
            params: ModeParams {
                hbar,
                rho,
                b1,
                h,
                tau,
                v_mode: f64_at(o),
            },
            r: Arc::new(r),
        });
    }
    Ok(KernelSet { kernels, h, m_max })
}

/// CSV with columns `mode,m,re,im`.
pub fn write_kernels_csv(path: &Path, set: &KernelSet) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "mode,m,re,im")?;
    for (i, k) in set.kernels.iter().enumerate() {
        for (m, c) in k.r.iter().enumerate() {
            writeln!(w, "{},{},{:.5e},{:.5e}", i + 1, m, c.re, c.im)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::AxisMesh;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    /// Free Laplacian at the default desk resolution: J = 300 on X = 3, M = 150 on T = 0.027.
    fn desk(v_mode: f64) -> ModeParams {
        ModeParams {
            hbar: 1.0,
            rho: 1.0,
            b1: 2.0,
            h: 0.01,
            tau: 0.027 / 150.0,
            v_mode,
        }
    }

    fn max_diff(a: &[C64], b: &[C64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn inverse_z_matches_impulse_oracle() {
        for v in [0.0, 50.0, 900.0, 2.0e4, 1.0e5] {
            let p = desk(v);
            let a = kernel_inverse_z(&p, 64).unwrap();
            let b = kernel_impulse_oracle(&p, 64, None).unwrap();
            assert_eq!(a.len(), 65);
            assert_eq!(b.len(), 65);
            let d = max_diff(&a.r, &b.r);
            assert!(d <= 1e-10, "v = {v}: max diff {d}");
            assert!(a.r[0].norm() > 0.0);
        }
    }

    #[test]
    fn inverse_z_matches_oracle_for_other_constants() {
        let p = ModeParams {
            hbar: 0.6,
            rho: 1.7,
            b1: 0.9,
            h: 0.03,
            tau: 2e-3,
            v_mode: 12.0,
        };
        let a = kernel_inverse_z(&p, 40).unwrap();
        let b = kernel_impulse_oracle(&p, 40, None).unwrap();
        assert!(max_diff(&a.r, &b.r) <= 1e-10);
    }

    #[test]
    fn leading_term_is_the_symbol_at_zero() {
        let p = desk(300.0);
        let a = p.coupling();
        let beta = 1.0 + (C64::new(p.v_mode, 0.0) - C64::new(0.0, 2.0 * p.hbar * p.rho / p.tau)) / (2.0 * a);
        let disc = (beta * beta - 1.0).sqrt();
        let k = [beta + disc, beta - disc];
        let small = if k[0].norm() < k[1].norm() { k[0] } else { k[1] };
        let want = 0.5 * (small - small.inv());
        let r = kernel_inverse_z(&p, 16).unwrap();
        assert!((r.r[0] - want).norm() < 1e-12 * want.norm());
    }

    #[test]
    fn roots_inside_unit_disc_near_circle() {
        let p = desk(10.0);
        let r = 1.0 / (1.0 + 1e-7);
        for i in 0..512 {
            let zeta = C64::from_polar(r, 2.0 * std::f64::consts::PI * i as f64 / 512.0);
            let (s, l) = characteristic_roots(&p, zeta).unwrap();
            assert!(s.norm() < 1.0);
            assert!(((s * l).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn undersampling_and_short_exterior_are_refused() {
        let p = desk(0.0);
        assert!(kernel_inverse_z_with(&p, 20, 41).is_err());
        assert!(kernel_inverse_z_with(&p, 20, 42).is_ok());
        assert!(kernel_inverse_z(&p, 0).is_err());
        let min = min_exterior_length(&p, 20);
        assert!(kernel_impulse_oracle(&p, 20, Some(min - 1)).is_err());
        assert!(kernel_impulse_oracle(&p, 20, Some(min)).is_ok());
    }

    #[test]
    fn oracle_zero_trace_and_causality() {
        let p = desk(5.0);
        let n = min_exterior_length(&p, 30);
        let zero = exterior_response(&p, &vec![ZERO; 31], n).unwrap();
        assert!(zero.iter().all(|v| *v == ZERO));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut t: Vec<C64> = (0..=30).map(|_| C64::new(rng.gen(), rng.gen())).collect();
        t[0] = ZERO;
        let base = exterior_response(&p, &t, n).unwrap();
        let mut t2 = t.clone();
        for v in t2.iter_mut().skip(20) {
            *v += C64::new(1.0, -2.0);
        }
        let changed = exterior_response(&p, &t2, n).unwrap();
        assert_eq!(&base[..20], &changed[..20]);
        // linear response is the convolution with the kernel
        let r = kernel_inverse_z(&p, 30).unwrap();
        for m in 1..=30 {
            assert!((convolution(&r.r[..=m], &t[..=m]) - base[m]).norm() < 1e-9);
        }
    }

    #[test]
    fn kernel_is_pure() {
        let p = desk(40.0);
        let mut q = p;
        q.v_mode *= 2.0;
        let a = kernel_inverse_z(&q, 20).unwrap();
        let _ = kernel_inverse_z(&p, 20).unwrap();
        let b = kernel_inverse_z(&q, 20).unwrap();
        assert_eq!(a, b);
        let cache = KernelCache::default();
        let c1 = cache.get_or_build(&q, 20).unwrap();
        let c2 = cache.get_or_build(&q, 20).unwrap();
        assert_eq!(cache.len(), 1);
        assert!(Arc::ptr_eq(&c1.r, &c2.r));
        assert_eq!(c1, a);
    }

    fn setup(k: usize, m_max: usize) -> (SpectralBasis, KernelSet) {
        let basis = SpectralBasis::new(&AxisMesh::uniform(0.0, 2.8, k).unwrap()).unwrap();
        let bp = BoundaryParams {
            hbar: 1.0,
            rho: 1.0,
            b1: 2.0,
            b2: 2.0,
            v_inf: 0.0,
            h: 0.01,
            tau: 0.027 / 150.0,
        };
        let set = KernelSet::build(&bp, &basis, m_max, Execution::Parallel, None).unwrap();
        (basis, set)
    }

    fn random_history(k: usize, m: usize, rng: &mut impl Rng) -> Vec<Vec<C64>> {
        (0..=m)
            .map(|lvl| {
                (0..=k)
                    .map(|i| {
                        if lvl == 0 || i == 0 || i == k {
                            ZERO
                        } else {
                            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                        }
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn s_ref_examples() {
        let (basis, set) = setup(8, 16);
        let zero = vec![vec![ZERO; 9]; 5];
        assert!(apply_s_ref(&zero, &set, &basis).unwrap().iter().all(|v| v.norm() == 0.0));

        // single mode history stays in that mode
        let e3: Vec<C64> = basis.vector(3).iter().map(|&v| C64::new(v, 0.0)).collect();
        let phi: Vec<Vec<C64>> = (0..=4)
            .map(|m| e3.iter().map(|v| v * C64::new(m as f64, 0.5 * m as f64)).collect())
            .collect();
        let out = apply_s_ref(&phi, &set, &basis).unwrap();
        let c = basis.forward(&out).unwrap();
        for (l, v) in c.iter().enumerate() {
            if l != 3 {
                assert!(v.norm() < 1e-12 * c[3].norm());
            }
        }

        // one step: (1/2h) F^-1(R^0 F Phi^1)
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let phi = random_history(8, 1, &mut rng);
        let out = apply_s_ref(&phi, &set, &basis).unwrap();
        let f = basis.forward(&phi[1]).unwrap();
        let mut want = vec![ZERO; 9];
        for l in 1..8 {
            want[l] = set.mode(l).r[0] * f[l] / (2.0 * set.h);
        }
        let want = basis.inverse(&want).unwrap();
        assert!(max_diff(&out, &want) < 1e-12);

        let too_long = vec![vec![ZERO; 9]; 18];
        assert!(apply_s_ref(&too_long, &set, &basis).is_err());
    }

    #[test]
    fn positivity_over_random_histories() {
        let (basis, set) = setup(16, 32);
        let tau = 0.027 / 150.0;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let zero = vec![vec![ZERO; 17]; 33];
        assert_eq!(check_positivity(&zero, &set, &basis, tau).unwrap(), 0.0);
        for _ in 0..200 {
            let phi = random_history(16, 32, &mut rng);
            let total = check_positivity(&phi, &set, &basis, tau).unwrap();
            let modes = check_positivity_modes(&phi, &set, &basis, tau).unwrap();
            assert!(total >= -1e-10, "{total}");
            assert!(modes.iter().all(|&v| v >= -1e-10));
            let sum: f64 = modes.iter().sum();
            assert!((sum - total).abs() <= 1e-10 * total.abs().max(1.0));
        }
    }

    #[test]
    fn history_bookkeeping() {
        let mut h = BoundaryHistory::new(3, 4);
        assert_eq!(h.steps(), 0);
        h.push_level(&[C64::new(1.0, 0.0); 3]).unwrap();
        assert_eq!(h.steps(), 1);
        assert_eq!(h.mode(2), &[ZERO, C64::new(1.0, 0.0)]);
        assert!(h.push_level(&[ZERO; 2]).is_err());
        let r = [C64::new(2.0, 0.0), C64::new(3.0, 0.0), C64::new(5.0, 0.0)];
        let a = [C64::new(1.0, 0.0), C64::new(10.0, 0.0), C64::new(100.0, 0.0)];
        assert_eq!(convolution(&r, &a), C64::new(200.0 + 30.0 + 5.0, 0.0));
        assert_eq!(convolution_tail(&r, &a[..2]), C64::new(30.0 + 5.0, 0.0));
    }

    #[test]
    fn kernel_dump_round_trip() {
        let (_, set) = setup(4, 6);
        let dir = tempfile::tempdir().unwrap();
        let bin = dir.path().join("k.bin");
        write_kernels_binary(&bin, &set).unwrap();
        let back = read_kernels_binary(&bin).unwrap();
        assert_eq!(back.modes(), 3);
        assert_eq!(back.m_max, 6);
        for l in 1..=3 {
            assert_eq!(back.mode(l), set.mode(l));
        }
        let len = std::fs::metadata(&bin).unwrap().len() as usize;
        assert_eq!(len, 56 + 3 * (8 + 16 * 7));
        let csv = dir.path().join("k.csv");
        write_kernels_csv(&csv, &set).unwrap();
        let text = std::fs::read_to_string(&csv).unwrap();
        assert_eq!(text.lines().next(), Some("mode,m,re,im"));
        assert_eq!(text.lines().count(), 1 + 3 * 7);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn single_mode_positivity(v in 0.0f64..5.0e4, tau_scale in 0.2f64..5.0, seed in any::<u64>()) {
            let mut p = desk(v);
            p.tau *= tau_scale;
            let r = kernel_inverse_z(&p, 24).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut a: Vec<C64> = (0..=24).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            a[0] = ZERO;
            prop_assert!(positivity_mode(&r.r, &a, p.h, p.tau) >= -1e-10);
        }
    }
}
