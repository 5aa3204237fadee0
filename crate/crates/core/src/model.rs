//! Physical coefficients, their sampling onto the mesh, potential kicks,
//! initial data and the mesh Hamiltonian.

use crate::error::{Error, Result};
use crate::mesh::{hat_mean, Mesh2d};
use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use std::fmt;
use std::sync::Arc;

pub type CoefFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type ProfileFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Constant values the coefficients take far from the scatterer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Asymptotics {
    pub rho: f64,
    pub b1: f64,
    pub b2: f64,
    pub v: f64,
}

/// Coefficients of `i hbar rho D_t psi = (H_0 + V) psi` on the strip.
///
/// `B` is symmetric, so only `b12` is stored. All coefficients must equal
/// their asymptotic constants for `x >= x0` (and, for problems posed on the
/// whole strip, for `x <= x0_left`).
#[derive(Clone)]
pub struct PhysicalModel {
    pub hbar: f64,
    pub rho: CoefFn,
    pub b11: CoefFn,
    pub b12: CoefFn,
    pub b22: CoefFn,
    pub potential: CoefFn,
    pub v_tilde: ProfileFn,
    pub asymptotics: Asymptotics,
    pub x0: f64,
    pub x0_left: f64,
}

impl fmt::Debug for PhysicalModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhysicalModel")
            .field("hbar", &self.hbar)
            .field("asymptotics", &self.asymptotics)
            .field("x0", &self.x0)
            .field("x0_left", &self.x0_left)
            .finish_non_exhaustive()
    }
}

fn constant(v: f64) -> CoefFn {
    Arc::new(move |_, _| v)
}

impl PhysicalModel {
    /// Constant `rho`, diagonal constant `B`, zero potential.
    pub fn constant(hbar: f64, rho: f64, b1: f64, b2: f64) -> Self {
        Self {
            hbar,
            rho: constant(rho),
            b11: constant(b1),
            b12: constant(0.0),
            b22: constant(b2),
            potential: constant(0.0),
            v_tilde: Arc::new(|_| 0.0),
            asymptotics: Asymptotics { rho, b1, b2, v: 0.0 },
            x0: f64::NEG_INFINITY,
            x0_left: f64::INFINITY,
        }
    }

    /// `hbar = 1`, `rho = 1`, `H_0 = -Laplacian`.
    pub fn free_laplacian() -> Self {
        Self::constant(1.0, 1.0, 2.0, 2.0)
    }

    /// Installs the potential; `[x0_left, x0]` must contain its support.
    pub fn with_potential(mut self, v: CoefFn, v_inf: f64, x0_left: f64, x0: f64) -> Self {
        self.potential = v;
        self.asymptotics.v = v_inf;
        self.v_tilde = Arc::new(move |_| v_inf);
        self.x0 = self.x0.max(x0);
        self.x0_left = self.x0_left.min(x0_left);
        self
    }

    pub fn with_barrier(self, barrier: &Barrier) -> Self {
        let b = *barrier;
        self.with_potential(Arc::new(move |x, y| b.value(x, y)), 0.0, b.a, b.b)
    }

    pub fn with_v_tilde(mut self, v_tilde: ProfileFn) -> Self {
        self.v_tilde = v_tilde;
        self
    }

    /// Whether the per-mode decoupling applies: `B` diagonal, and `B`, `rho` independent of `y`.
    pub fn check_asymptotic_region(&self) -> Result<()> {
        if !(self.hbar > 0.0) {
            return Err(Error::validation("hbar must be positive"));
        }
        let a = self.asymptotics;
        if !(a.rho > 0.0 && a.b1 > 0.0 && a.b2 > 0.0) {
            return Err(Error::validation("asymptotic rho, B1, B2 must be positive"));
        }
        Ok(())
    }
}

/// Rectangular barrier `V = Q` on `(a, b) x (c, d)`, zero elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Barrier {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub q: f64,
}

impl Barrier {
    pub fn new(a: f64, b: f64, c: f64, d: f64, q: f64) -> Result<Self> {
        if !(a < b && c < d) {
            return Err(Error::validation("barrier rectangle must satisfy a < b, c < d"));
        }
        if !(q >= 0.0) {
            return Err(Error::validation("barrier height must be non-negative"));
        }
        Ok(Self { a, b, c, d, q })
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        if x > self.a && x < self.b && y > self.c && y < self.d {
            self.q
        } else {
            0.0
        }
    }

    /// Indicator of `(a, b)` scaled by `Q`: the alternative splitting potential.
    pub fn slab(&self, x: f64) -> f64 {
        if x > self.a && x < self.b {
            self.q
        } else {
            0.0
        }
    }

    pub fn check_inside(&self, x_len: f64, y_len: f64) -> Result<()> {
        if self.a < 0.0 || self.b > x_len || self.c < 0.0 || self.d > y_len {
            return Err(Error::validation(format!(
                "barrier ({}, {}) x ({}, {}) lies outside (0, {x_len}) x (0, {y_len})",
                self.a, self.b, self.c, self.d
            )));
        }
        Ok(())
    }
}

/// Convenience constructor mirroring the operation name.
pub fn barrier_potential(a: f64, b: f64, c: f64, d: f64, q: f64) -> Result<Barrier> {
    Barrier::new(a, b, c, d, q)
}

/// Mesh coefficients obtained from midpoint samples followed by the
/// prescribed averagings.
///
/// Index conventions: `b11` and `b12` live on cells/edges `j = 0..=J+1`
/// (cell `j` spans `x_{j-1}..x_j`, with ghost cells at both ends); `b22`,
/// `rho`, `v`, `delta_v` live on nodes `j = 0..=J`. The y index is the node
/// index for `b11`, `rho`, `v` and the cell index for `b22`, `b12`.
#[derive(Debug, Clone)]
pub struct SampledCoefficients {
    pub hbar: f64,
    pub asymptotics: Asymptotics,
    pub b11: Array2<f64>,
    pub b12: Array2<f64>,
    pub b22: Array2<f64>,
    /// Raw midpoint samples `B11_-`, `B22_-` on cells `0..=J+1` x `1..=K`.
    pub b11_cell: Array2<f64>,
    pub b22_cell: Array2<f64>,
    pub rho: Array2<f64>,
    pub v: Array2<f64>,
    pub v_tilde: Array1<f64>,
    pub delta_v: Array2<f64>,
}

/// Boundary side of the strip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl SampledCoefficients {
    /// Same coefficients with a different splitting potential.
    pub fn with_v_tilde(&self, mesh: &Mesh2d, v_tilde: &dyn Fn(f64) -> f64) -> Result<Self> {
        let mut out = self.clone();
        let vt_mid = sample_profile(mesh, v_tilde)?;
        fill_v_tilde(mesh, &vt_mid, &mut out);
        Ok(out)
    }

    /// Checks that rows adjacent to a transparent boundary carry exactly the
    /// asymptotic constants and no potential difference.
    pub fn check_tail(&self, mesh: &Mesh2d, side: Side) -> Result<()> {
        let n = mesh.nx();
        let ky = mesh.ny();
        let a = self.asymptotics;
        let (nodes, edges, cells) = match side {
            Side::Right => ([n - 1, n], [n, n + 1], [n, n + 1]),
            Side::Left => ([0, 1], [0, 1], [0, 1]),
        };
        let bad = |what: &str, j: usize| {
            Err(Error::validation(format!(
                "{what} at x-row {j} differs from its asymptotic value; \
                 the transparent boundary requires constant coefficients there"
            )))
        };
        for &j in &nodes {
            for k in 1..ky {
                if self.delta_v[[j, k]] != 0.0 {
                    return bad("potential difference", j);
                }
            }
        }
        let j = nodes[if side == Side::Right { 1 } else { 0 }];
        for k in 1..ky {
            if self.rho[[j, k]] != a.rho {
                return bad("rho", j);
            }
            if self.v[[j, k]] != a.v {
                return bad("potential", j);
            }
        }
        for k in 1..=ky {
            if self.b22[[j, k]] != a.b2 {
                return bad("B22", j);
            }
        }
        for &e in &edges {
            for k in 1..ky {
                if self.b11[[e, k]] != a.b1 {
                    return bad("B11", e);
                }
            }
        }
        for &c in &cells {
            for k in 1..=ky {
                if self.b12[[c, k]] != 0.0 {
                    return bad("B12", c);
                }
            }
        }
        Ok(())
    }

    /// True when `B12 = 0` and `B11`, `B22`, `rho` do not vary along `y`.
    pub fn is_separable(&self, mesh: &Mesh2d) -> bool {
        let ky = mesh.ny();
        let rows_const = |a: &Array2<f64>, r0: usize, r1: usize, k0: usize, k1: usize| {
            (r0..r1).all(|j| (k0..k1).all(|k| a[[j, k]] == a[[j, k0]]))
        };
        self.b12.iter().all(|&b| b == 0.0)
            && rows_const(&self.b11, 1, mesh.nx() + 1, 1, ky)
            && rows_const(&self.b22, 0, mesh.nx() + 1, 1, ky + 1)
            && rows_const(&self.rho, 0, mesh.nx() + 1, 1, ky)
    }
}

fn finite(v: f64, what: &str, x: f64, y: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::validation(format!(
            "{what} evaluated to {v} at ({x}, {y}); coefficient undefined there"
        )))
    }
}

fn sample_mid(mesh: &Mesh2d, f: &CoefFn, what: &str) -> Result<Array2<f64>> {
    let (nx, ny) = (mesh.nx(), mesh.ny());
    let mut out = Array2::zeros((nx + 2, ny + 1));
    for j in 0..=nx + 1 {
        let x = mesh.x.midpoint(j);
        for k in 1..=ny {
            let y = mesh.y.midpoint(k);
            out[[j, k]] = finite(f(x, y), what, x, y)?;
        }
    }
    Ok(out)
}

fn sample_profile(mesh: &Mesh2d, f: &dyn Fn(f64) -> f64) -> Result<Array1<f64>> {
    let nx = mesh.nx();
    let mut out = Array1::zeros(nx + 2);
    for j in 0..=nx + 1 {
        let x = mesh.x.midpoint(j);
        out[j] = finite(f(x), "auxiliary potential", x, 0.0)?;
    }
    Ok(out)
}

/// `hat(s)_y` of a cell array, giving values at (cell j, node k).
fn hat_y(mesh: &Mesh2d, a: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(a.dim());
    for j in 0..a.nrows() {
        for k in 1..mesh.ny() {
            out[[j, k]] = hat_mean(a[[j, k]], mesh.y.step(k), a[[j, k + 1]], mesh.y.step(k + 1));
        }
    }
    out
}

/// `hat(s)_x` of a cell-indexed array (rows 0..=J+1), giving node rows 0..=J.
fn hat_x(mesh: &Mesh2d, a: &Array2<f64>) -> Array2<f64> {
    let nx = mesh.nx();
    let mut out = Array2::zeros((nx + 1, a.ncols()));
    for j in 0..=nx {
        for k in 0..a.ncols() {
            out[[j, k]] = hat_mean(a[[j, k]], mesh.x.step(j), a[[j + 1, k]], mesh.x.step(j + 1));
        }
    }
    out
}

fn fill_v_tilde(mesh: &Mesh2d, vt_mid: &Array1<f64>, c: &mut SampledCoefficients) {
    let nx = mesh.nx();
    c.v_tilde = Array1::from_shape_fn(nx + 1, |j| {
        hat_mean(vt_mid[j], mesh.x.step(j), vt_mid[j + 1], mesh.x.step(j + 1))
    });
    c.delta_v = Array2::zeros(c.v.dim());
    for j in 0..=nx {
        for k in 1..mesh.ny() {
            c.delta_v[[j, k]] = c.v[[j, k]] - c.v_tilde[j];
        }
    }
}

/// Samples every coefficient at cell midpoints and applies the averagings
/// `B11h = hat(s)_y B11`, `B22h = hat(s)_x B22`, `B12h = B12`,
/// `rho_h = hat(s)_x hat(s)_y rho`, `V_h = hat(s)_x hat(s)_y V`,
/// `V~_h = hat(s)_x V~`.
pub fn sample_coefficients(model: &PhysicalModel, mesh: &Mesh2d) -> Result<SampledCoefficients> {
    model.check_asymptotic_region()?;
    let rho_mid = sample_mid(mesh, &model.rho, "rho")?;
    let b11_mid = sample_mid(mesh, &model.b11, "B11")?;
    let b12_mid = sample_mid(mesh, &model.b12, "B12")?;
    let b22_mid = sample_mid(mesh, &model.b22, "B22")?;
    let v_mid = sample_mid(mesh, &model.potential, "V")?;
    let vt_mid = sample_profile(mesh, model.v_tilde.as_ref())?;

    for j in 0..rho_mid.nrows() {
        for k in 1..=mesh.ny() {
            let (r, p, q, s) = (
                rho_mid[[j, k]],
                b11_mid[[j, k]],
                b12_mid[[j, k]],
                b22_mid[[j, k]],
            );
            if r <= 0.0 {
                return Err(Error::validation(format!(
                    "non-positive rho = {r} in cell ({j}, {k})"
                )));
            }
            if !(p > 0.0 && p * s - q * q > 0.0) {
                return Err(Error::validation(format!(
                    "B is not positive definite in cell ({j}, {k})"
                )));
            }
        }
    }

    let rho = hat_x(mesh, &hat_y(mesh, &rho_mid));
    let v = hat_x(mesh, &hat_y(mesh, &v_mid));
    let mut out = SampledCoefficients {
        hbar: model.hbar,
        asymptotics: model.asymptotics,
        b11: hat_y(mesh, &b11_mid),
        b12: b12_mid,
        b22: hat_x(mesh, &b22_mid),
        b11_cell: b11_mid,
        b22_cell: b22_mid,
        rho,
        v,
        v_tilde: Array1::zeros(mesh.nx() + 1),
        delta_v: Array2::zeros((mesh.nx() + 1, mesh.ny() + 1)),
    };
    fill_v_tilde(mesh, &vt_mid, &mut out);
    Ok(out)
}

/// Potential-kick factor: rational (Cayley) or exact exponential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PropagatorVariant {
    #[default]
    Cayley,
    Exponential,
}

/// Pointwise unit-modulus multiplier applied before and after the
/// Crank-Nicolson stage.
#[derive(Debug, Clone)]
pub struct CayleyPropagator {
    pub variant: PropagatorVariant,
    pub tau: f64,
    pub values: Array2<C64>,
}

impl CayleyPropagator {
    pub fn apply(&self, field: &mut Array2<C64>) {
        field.zip_mut_with(&self.values, |p, e| *p *= e);
    }

    /// Multiplies by the conjugate, i.e. by the inverse.
    pub fn apply_inverse(&self, field: &mut Array2<C64>) {
        field.zip_mut_with(&self.values, |p, e| *p *= e.conj());
    }
}

pub fn build_propagator(
    coeffs: &SampledCoefficients,
    tau: f64,
    variant: PropagatorVariant,
) -> Result<CayleyPropagator> {
    if !(tau > 0.0) {
        return Err(Error::validation("time step must be positive"));
    }
    let hbar = coeffs.hbar;
    let values = Array2::from_shape_fn(coeffs.delta_v.dim(), |(j, k)| {
        let dv = coeffs.delta_v[[j, k]];
        if dv == 0.0 {
            return C64::new(1.0, 0.0);
        }
        let rho = coeffs.rho[[j, k]];
        match variant {
            PropagatorVariant::Cayley => {
                let theta = tau * dv / (4.0 * hbar * rho);
                C64::new(1.0, -theta) / C64::new(1.0, theta)
            }
            PropagatorVariant::Exponential => {
                C64::from_polar(1.0, -tau * dv / (2.0 * hbar * rho))
            }
        }
    });
    Ok(CayleyPropagator {
        variant,
        tau,
        values,
    })
}

/// Which stage of the split step a field represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stage {
    /// `Psi^m`.
    #[default]
    Main,
    /// After the first potential kick.
    Kicked,
    /// After the Crank-Nicolson stage.
    Intermediate,
}

/// Complex grid state over the closed mesh, shape `(J + 1, K + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    pub psi: Array2<C64>,
    pub stage: Stage,
}

impl WaveField {
    pub fn zeros(mesh: &Mesh2d) -> Self {
        Self {
            psi: mesh.zeros(),
            stage: Stage::Main,
        }
    }

    pub fn from_array(psi: Array2<C64>) -> Self {
        Self {
            psi,
            stage: Stage::Main,
        }
    }

    /// Zeroes the lateral walls `k = 0, K`.
    pub fn zero_lateral(&mut self) {
        let ky = self.psi.ncols() - 1;
        for mut row in self.psi.rows_mut() {
            row[0] = C64::new(0.0, 0.0);
            row[ky] = C64::new(0.0, 0.0);
        }
    }

    pub fn zero_row(&mut self, j: usize) {
        self.psi.row_mut(j).fill(C64::new(0.0, 0.0));
    }
}

/// Gaussian packet `exp{i sqrt(2) k (x - x0) - ((x - x0)^2 + (y - y0)^2) / (4 alpha)}`,
/// zeroed on `k = 0, K` and on `j = 0`.
pub fn gaussian_packet(mesh: &Mesh2d, k: f64, alpha: f64, x0: f64, y0: f64) -> WaveField {
    let sk = std::f64::consts::SQRT_2 * k;
    let psi = Array2::from_shape_fn(mesh.shape(), |(j, l)| {
        let dx = mesh.x.node(j) - x0;
        let dy = mesh.y.node(l) - y0;
        let env = -(dx * dx + dy * dy) / (4.0 * alpha);
        C64::from_polar(env.exp(), sk * dx)
    });
    let mut w = WaveField::from_array(psi);
    w.zero_lateral();
    w.zero_row(0);
    w
}

/// `H_0h W` on interior nodes `j = 1..J-1`, `k = 1..K-1`; zero elsewhere.
///
/// `W` is read on the whole closed mesh (including `j = 0, J`), so the same
/// routine serves rows adjacent to transparent boundaries.
pub fn apply_hamiltonian(coeffs: &SampledCoefficients, mesh: &Mesh2d, w: &Array2<C64>) -> Array2<C64> {
    let (nx, ny) = (mesh.nx(), mesh.ny());
    let hx = |j: usize| mesh.x.step(j);
    let hy = |k: usize| mesh.y.step(k);
    let zero = C64::new(0.0, 0.0);

    // Backward differences: gx on (edge j, node k), gy on (node j, edge k).
    let mut gx = Array2::from_elem((nx + 1, ny + 1), zero);
    for j in 1..=nx {
        for k in 0..=ny {
            gx[[j, k]] = (w[[j, k]] - w[[j - 1, k]]) / hx(j);
        }
    }
    let mut gy = Array2::from_elem((nx + 1, ny + 1), zero);
    for j in 0..=nx {
        for k in 1..=ny {
            gy[[j, k]] = (w[[j, k]] - w[[j, k - 1]]) / hy(k);
        }
    }

    let cross = coeffs.b12.iter().any(|&b| b != 0.0);
    // Cross fluxes on cells (j, k), j = 1..=J, k = 1..=K.
    let (mut fxy, mut fyx) = (
        Array2::from_elem((nx + 1, ny + 1), zero),
        Array2::from_elem((nx + 1, ny + 1), zero),
    );
    if cross {
        for j in 1..=nx {
            for k in 1..=ny {
                let b = coeffs.b12[[j, k]];
                fxy[[j, k]] = b * 0.5 * (gy[[j - 1, k]] + gy[[j, k]]);
                fyx[[j, k]] = b * 0.5 * (gx[[j, k - 1]] + gx[[j, k]]);
            }
        }
    }

    let mut out = Array2::from_elem((nx + 1, ny + 1), zero);
    let scale = -0.5 * coeffs.hbar * coeffs.hbar;
    for j in 1..nx {
        let hjp = mesh.x.half_step(j);
        for k in 1..ny {
            let dkp = mesh.y.half_step(k);
            let t1 = (coeffs.b11[[j + 1, k]] * gx[[j + 1, k]] - coeffs.b11[[j, k]] * gx[[j, k]]) / hjp;
            let t4 = (coeffs.b22[[j, k + 1]] * gy[[j, k + 1]] - coeffs.b22[[j, k]] * gy[[j, k]]) / dkp;
            let mut acc = t1 + t4;
            if cross {
                let sy = |e: usize| {
                    (hy(k) * fxy[[e, k]] + hy(k + 1) * fxy[[e, k + 1]]) / (2.0 * dkp)
                };
                let t2 = (sy(j + 1) - sy(j)) / hjp;
                let dy = |c: usize| (fyx[[c, k + 1]] - fyx[[c, k]]) / dkp;
                let t3 = (hx(j) * dy(j) + hx(j + 1) * dy(j + 1)) / (2.0 * hjp);
                acc += t2 + t3;
            }
            out[[j, k]] = scale * acc;
        }
    }
    out
}
