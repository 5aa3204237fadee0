//! Strang splitting in potential: potential kicks around a Crank-Nicolson
//! stage that decouples into independent tridiagonal problems per y-mode.

mod system;

pub use crate::tridiag::{solve_tridiagonal, TridiagLu};
pub use system::{assemble_mode_system, ModeBoundary, ModeInputs, ModeSystem, TbcRow};

use crate::error::{Error, Result};
use crate::mesh::{Closure, Mesh2d, TimeMesh};
use crate::model::{
    build_propagator, sample_coefficients, CayleyPropagator, PhysicalModel, PropagatorVariant,
    SampledCoefficients, Side, Stage, WaveField,
};
use crate::parallel::Execution;
use crate::spectral::{Direction, SpectralBasis};
use crate::tbc::{convolution, BoundaryParams, KernelCache, KernelSet};
use ndarray::Array2;
use num_complex::Complex64 as C64;
use std::time::{Duration, Instant};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Treatment of an x-end of the computational interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    Dirichlet,
    Transparent,
}

/// Solver configuration independent of the physics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub propagator: PropagatorVariant,
    pub execution: Execution,
    pub left: BoundaryKind,
    pub right: BoundaryKind,
}

impl Default for SolverOptions {
    /// Semi-infinite strip: wall at `x = 0`, transparent at `x = X`.
    fn default() -> Self {
        Self {
            propagator: PropagatorVariant::Cayley,
            execution: Execution::Parallel,
            left: BoundaryKind::Dirichlet,
            right: BoundaryKind::Transparent,
        }
    }
}

impl SolverOptions {
    /// Transparent at both `x = 0` and `x = X`.
    pub fn infinite_strip() -> Self {
        Self {
            left: BoundaryKind::Transparent,
            ..Self::default()
        }
    }

    /// Walls at both ends (used for the enlarged-domain reference).
    pub fn closed() -> Self {
        Self {
            right: BoundaryKind::Dirichlet,
            ..Self::default()
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn with_propagator(mut self, propagator: PropagatorVariant) -> Self {
        self.propagator = propagator;
        self
    }

    /// Norm closure matching the boundary kinds: transparent ends carry half-cell weight.
    pub fn closure(&self) -> Closure {
        match (self.left, self.right) {
            (BoundaryKind::Transparent, BoundaryKind::Transparent) => Closure::Both,
            (_, BoundaryKind::Transparent) => Closure::Right,
            (BoundaryKind::Transparent, BoundaryKind::Dirichlet) => Closure::Left,
            _ => Closure::Interior,
        }
    }
}

/// Per-level scalar record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub m: usize,
    pub t: f64,
    /// `||sqrt(rho) Psi^m||` in the closed norm.
    pub mass: f64,
    /// Squared mass that left through the left / right boundary during this step.
    pub flux_left: f64,
    pub flux_right: f64,
}

/// State on a requested level.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub m: usize,
    pub t: f64,
    pub psi: Array2<C64>,
}

#[derive(Debug, Clone)]
struct ModeState {
    system: ModeSystem,
    left: Vec<C64>,
    right: Vec<C64>,
    flux_left: f64,
    flux_right: f64,
    rhs: Vec<C64>,
    error: Option<String>,
}

/// The production solver.
#[derive(Debug)]
pub struct SplittingSolver {
    mesh: Mesh2d,
    time: TimeMesh,
    coeffs: SampledCoefficients,
    basis: SpectralBasis,
    propagator: CayleyPropagator,
    options: SolverOptions,
    kernels_left: Option<KernelSet>,
    kernels_right: Option<KernelSet>,
    modes: Vec<ModeState>,
    psi: WaveField,
    m: usize,
    rows: Array2<C64>,
    by_mode: Array2<C64>,
    forcing_rows: Array2<C64>,
    forcing_modes: Array2<C64>,
    trace: Vec<TraceRecord>,
    runtime: Duration,
    truncated: f64,
}

impl SplittingSolver {
    pub fn new(
        model: &PhysicalModel,
        mesh: &Mesh2d,
        time: &TimeMesh,
        psi0: &WaveField,
        options: SolverOptions,
    ) -> Result<Self> {
        let coeffs = sample_coefficients(model, mesh)?;
        Self::from_coefficients(coeffs, mesh, time, psi0, options)
    }

    pub fn from_coefficients(
        coeffs: SampledCoefficients,
        mesh: &Mesh2d,
        time: &TimeMesh,
        psi0: &WaveField,
        options: SolverOptions,
    ) -> Result<Self> {
        mesh.check_shape(&psi0.psi)?;
        if !coeffs.is_separable(mesh) {
            return Err(Error::validation(
                "coefficients couple the y-modes (B12 != 0 or B, rho depend on y); \
                 use the full Crank-Nicolson reference solver",
            ));
        }
        let transparent = options.left == BoundaryKind::Transparent || options.right == BoundaryKind::Transparent;
        if transparent && !time.is_uniform() {
            return Err(Error::validation(
                "transparent boundaries require a uniform time mesh",
            ));
        }
        if options.right == BoundaryKind::Transparent {
            coeffs.check_tail(mesh, Side::Right)?;
        }
        if options.left == BoundaryKind::Transparent {
            coeffs.check_tail(mesh, Side::Left)?;
        }
        let exec = options.execution;
        let basis = SpectralBasis::new(&mesh.y)?;
        let tau = time.step(1);
        let propagator = build_propagator(&coeffs, tau, options.propagator)?;
        let m_max = time.levels();
        let a = coeffs.asymptotics;
        let boundary = |h: f64| BoundaryParams {
            hbar: coeffs.hbar,
            rho: a.rho,
            b1: a.b1,
            b2: a.b2,
            v_inf: a.v,
            h,
            tau,
        };
        let build = |kind: BoundaryKind, h: f64| -> Result<Option<KernelSet>> {
            if kind == BoundaryKind::Transparent && m_max > 0 {
                Ok(Some(KernelSet::build(&boundary(h), &basis, m_max, exec, Some(KernelCache::global()))?))
            } else {
                Ok(None)
            }
        };
        let kernels_left = build(options.left, mesh.x.step(1))?;
        let kernels_right = build(options.right, mesh.x.step(mesh.nx()))?;

        let (psi, truncated) = truncate_initial(psi0, mesh, &options)?;

        let nx = mesh.nx();
        let modes = if m_max == 0 {
            Vec::new()
        } else {
            let built = exec.map_range(basis.modes(), |i| {
                let l = i + 1;
                let side = |set: &Option<KernelSet>| match set {
                    Some(k) => ModeBoundary::Transparent(k.mode(l).clone()),
                    None => ModeBoundary::Dirichlet,
                };
                let system = assemble_mode_system(
                    ModeInputs {
                        l,
                        lambda: basis.eigenvalue(l),
                        coeffs: &coeffs,
                        mesh,
                        tau,
                    },
                    &side(&kernels_left),
                    &side(&kernels_right),
                )?;
                let n = system.unknowns();
                Ok(ModeState {
                    system,
                    left: Vec::with_capacity(m_max + 1),
                    right: Vec::with_capacity(m_max + 1),
                    flux_left: 0.0,
                    flux_right: 0.0,
                    rhs: vec![ZERO; n],
                    error: None,
                })
            });
            built.into_iter().collect::<Result<Vec<_>>>()?
        };
        let shape = mesh.shape();
        let mut solver = Self {
            mesh: mesh.clone(),
            time: time.clone(),
            coeffs,
            basis,
            propagator,
            options,
            kernels_left,
            kernels_right,
            modes,
            psi,
            m: 0,
            rows: Array2::zeros(shape),
            by_mode: Array2::zeros((shape.1, nx + 1)),
            forcing_rows: Array2::zeros(shape),
            forcing_modes: Array2::zeros((shape.1, nx + 1)),
            trace: Vec::with_capacity(m_max + 1),
            runtime: Duration::ZERO,
            truncated,
        };
        solver.init_histories()?;
        let mass = solver.mass();
        solver.trace.push(TraceRecord {
            m: 0,
            t: 0.0,
            mass,
            flux_left: 0.0,
            flux_right: 0.0,
        });
        Ok(solver)
    }

    fn init_histories(&mut self) -> Result<()> {
        let nx = self.mesh.nx();
        let left = self.basis.forward(self.psi.psi.row(0).as_slice().expect("contiguous"))?;
        let right = self.basis.forward(self.psi.psi.row(nx).as_slice().expect("contiguous"))?;
        for (i, st) in self.modes.iter_mut().enumerate() {
            st.left.push(left[i + 1]);
            st.right.push(right[i + 1]);
        }
        Ok(())
    }

    pub fn mesh(&self) -> &Mesh2d {
        &self.mesh
    }

    pub fn time_mesh(&self) -> &TimeMesh {
        &self.time
    }

    pub fn coefficients(&self) -> &SampledCoefficients {
        &self.coeffs
    }

    pub fn basis(&self) -> &SpectralBasis {
        &self.basis
    }

    pub fn propagator(&self) -> &CayleyPropagator {
        &self.propagator
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    pub fn kernels(&self, side: Side) -> Option<&KernelSet> {
        match side {
            Side::Left => self.kernels_left.as_ref(),
            Side::Right => self.kernels_right.as_ref(),
        }
    }

    /// Current field `Psi^m`.
    pub fn field(&self) -> &WaveField {
        &self.psi
    }

    pub fn psi(&self) -> &Array2<C64> {
        &self.psi.psi
    }

    pub fn level(&self) -> usize {
        self.m
    }

    pub fn time(&self) -> f64 {
        self.time.time(self.m)
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn runtime(&self) -> Duration {
        self.runtime
    }

    /// Largest modulus removed from the rows next to transparent ends or walls.
    pub fn truncated_amplitude(&self) -> f64 {
        self.truncated
    }

    /// `||sqrt(rho_h) Psi^m||` in the closed norm of the configured ends.
    pub fn mass(&self) -> f64 {
        self.mesh
            .weighted_norm(&self.psi.psi, &self.coeffs.rho, self.options.closure())
    }

    /// Mode coefficients of the boundary trace at levels `0..=m`.
    pub fn boundary_history(&self, side: Side, l: usize) -> &[C64] {
        let st = &self.modes[l - 1];
        match side {
            Side::Left => &st.left,
            Side::Right => &st.right,
        }
    }

    /// Physical boundary trace `Psi_{J.}` (or `Psi_{0.}`) at level `m`.
    pub fn boundary_trace(&self, side: Side, m: usize) -> Result<Vec<C64>> {
        let mut c = vec![ZERO; self.mesh.ny() + 1];
        for l in 1..=self.basis.modes() {
            c[l] = self.boundary_history(side, l)[m];
        }
        self.basis.inverse(&c)
    }

    /// Advances one level. `forcing` is `F^m` on the closed mesh.
    pub fn step(&mut self, forcing: Option<&Array2<C64>>) -> Result<()> {
        let m = self.m + 1;
        if m > self.time.levels() {
            return Err(Error::validation(format!(
                "time mesh has only {} levels",
                self.time.levels()
            )));
        }
        if let Some(f) = forcing {
            self.mesh.check_shape(f)?;
        }
        let start = Instant::now();
        let exec = self.options.execution;
        let nx = self.mesh.nx();
        let width = nx + 1;
        let ky = self.mesh.ny();
        let tau = self.time.step(m);

        // 1. kick
        self.rows.assign(&self.psi.psi);
        kick(&mut self.rows, &self.propagator.values, exec);
        // 2. transform each x-row, regroup by mode
        self.basis.transform_rows(&mut self.rows, Direction::Forward, exec)?;
        self.by_mode.assign(&self.rows.t());
        if let Some(f) = forcing {
            self.forcing_rows.assign(f);
            self.basis.transform_rows(&mut self.forcing_rows, Direction::Forward, exec)?;
            self.forcing_modes.assign(&self.forcing_rows.t());
        }
        // 3. per-mode tridiagonal solves
        let hbar = self.coeffs.hbar;
        let b1 = self.coeffs.asymptotics.b1;
        let data = self.by_mode.as_slice_mut().expect("contiguous");
        let forcing_data = forcing.map(|_| self.forcing_modes.as_slice().expect("contiguous"));
        exec.for_each_zip(&mut self.modes, &mut data[width..ky * width], width, |i, st, row| {
            let f = forcing_data.map(|fd| &fd[(i + 1) * width..(i + 2) * width]);
            solve_mode(st, row, f, hbar, b1, tau);
        });
        if let Some(err) = self.modes.iter().find_map(|s| s.error.clone()) {
            return Err(Error::Numerical(err));
        }
        // 4. back to rows and physical space
        self.rows.assign(&self.by_mode.t());
        self.basis.transform_rows(&mut self.rows, Direction::Inverse, exec)?;
        // 5. kick
        kick(&mut self.rows, &self.propagator.values, exec);
        std::mem::swap(&mut self.psi.psi, &mut self.rows);
        self.psi.stage = Stage::Main;
        self.m = m;
        self.runtime += start.elapsed();

        let (flux_left, flux_right) = self
            .modes
            .iter()
            .fold((0.0, 0.0), |(a, b), s| (a + s.flux_left, b + s.flux_right));
        let mass = self.mass();
        self.trace.push(TraceRecord {
            m,
            t: self.time.time(m),
            mass,
            flux_left,
            flux_right,
        });
        if !mass.is_finite() {
            return Err(Error::Numerical(format!("non-finite mass at level {m}")));
        }
        Ok(())
    }

    /// Marches to the last level, collecting snapshots at the requested levels
    /// (level 0 included if requested).
    pub fn run(&mut self, snapshot_levels: &[usize]) -> Result<Vec<Snapshot>> {
        let mut out = Vec::new();
        let take = |s: &Self, out: &mut Vec<Snapshot>| {
            if snapshot_levels.contains(&s.m) {
                out.push(Snapshot {
                    m: s.m,
                    t: s.time(),
                    psi: s.psi.psi.clone(),
                });
            }
        };
        take(self, &mut out);
        while self.m < self.time.levels() {
            self.step(None)?;
            take(self, &mut out);
        }
        Ok(out)
    }
}

/// Runs the problem with transparent ends on both sides.
pub fn run_infinite_strip(
    model: &PhysicalModel,
    mesh: &Mesh2d,
    time: &TimeMesh,
    psi0: &WaveField,
    execution: Execution,
    snapshot_levels: &[usize],
) -> Result<(SplittingSolver, Vec<Snapshot>)> {
    let mut s = SplittingSolver::new(
        model,
        mesh,
        time,
        psi0,
        SolverOptions::infinite_strip().with_execution(execution),
    )?;
    let snaps = s.run(snapshot_levels)?;
    Ok((s, snaps))
}

fn solve_mode(st: &mut ModeState, row: &mut [C64], forcing: Option<&[C64]>, hbar: f64, b1: f64, tau: f64) {
    let sys = &st.system;
    let (first, last) = (sys.first, sys.last);
    let mut rhs = std::mem::take(&mut st.rhs);
    sys.rhs(row, forcing, &st.left, &st.right, &mut rhs);
    sys.solve_in_place(&mut rhs);
    if rhs.iter().any(|v| !v.is_finite()) {
        st.error = Some(format!("non-finite solution in mode {}", sys.l));
    }
    row.fill(ZERO);
    row[first..=last].copy_from_slice(&rhs);
    st.rhs = rhs;

    let flux = |hist: &mut Vec<C64>, tbc: &Option<TbcRow>, value: C64| -> f64 {
        hist.push(value);
        match tbc {
            Some(t) => {
                let m = hist.len() - 1;
                let s = convolution(&t.kernel[..=m], hist) / (2.0 * t.h);
                let avg = 0.5 * (hist[m] + hist[m - 1]);
                hbar * b1 * (s * avg.conj()).im * tau
            }
            None => 0.0,
        }
    };
    let n = row.len();
    st.flux_left = flux(&mut st.left, &sys.left, row[0]);
    st.flux_right = flux(&mut st.right, &sys.right, row[n - 1]);
}

fn kick(field: &mut Array2<C64>, e: &Array2<C64>, exec: Execution) {
    let width = field.ncols();
    let es = e.as_slice().expect("contiguous");
    let data = field.as_slice_mut().expect("contiguous");
    let rows_per = (data.len() / width / 64).max(1);
    exec.for_each_chunk(data, rows_per * width, |i, chunk| {
        let off = i * rows_per * width;
        for (p, q) in chunk.iter_mut().zip(&es[off..]) {
            *p *= q;
        }
    });
}

/// Zeroes the lateral walls, wall rows, and the two rows next to each
/// transparent end, as the boundary operator assumes vanishing exterior
/// data. Also returns the largest removed modulus.
pub fn truncate_initial(psi0: &WaveField, mesh: &Mesh2d, options: &SolverOptions) -> Result<(WaveField, f64)> {
    mesh.check_shape(&psi0.psi)?;
    let mut psi = psi0.clone();
    psi.stage = Stage::Main;
    let removed = zero_boundary_rows(&mut psi, mesh, options);
    Ok((psi, removed))
}

fn zero_boundary_rows(psi: &mut WaveField, mesh: &Mesh2d, options: &SolverOptions) -> f64 {
    let nx = mesh.nx();
    let ky = mesh.ny();
    let mut rows = Vec::new();
    match options.left {
        BoundaryKind::Dirichlet => rows.push(0),
        BoundaryKind::Transparent => rows.extend([0, 1]),
    }
    match options.right {
        BoundaryKind::Dirichlet => rows.push(nx),
        BoundaryKind::Transparent => rows.extend([nx - 1, nx]),
    }
    let mut removed: f64 = 0.0;
    for &j in &rows {
        for k in 0..=ky {
            removed = removed.max(psi.psi[[j, k]].norm());
        }
        psi.zero_row(j);
    }
    for j in 0..=nx {
        removed = removed.max(psi.psi[[j, 0]].norm()).max(psi.psi[[j, ky]].norm());
    }
    psi.zero_lateral();
    removed
}
