//! Reference trajectory on an enlarged domain with walls far away.
//!
//! Discrete transparent boundaries are exact: as long as nothing reflected
//! at the far walls has returned, the enlarged-domain solution restricted to
//! the original mesh coincides with the transparent-boundary solution.

use crate::error::{Error, Result};
use crate::mesh::{AxisMesh, Mesh2d, TimeMesh};
use crate::model::{PhysicalModel, WaveField};
use crate::parallel::Execution;
use crate::splitting::{truncate_initial, BoundaryKind, Snapshot, SolverOptions, SplittingSolver};
use ndarray::{s, Array2};

/// How the enlarged domain is built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedOptions {
    /// Padding of at least `(factor - 1) J` cells on every transparent side.
    pub factor: usize,
    pub execution: Execution,
}

impl Default for ExtendedOptions {
    fn default() -> Self {
        Self {
            factor: 4,
            execution: Execution::Parallel,
        }
    }
}

/// Enlarged-domain run restricted back to the original mesh.
#[derive(Debug, Clone)]
pub struct ExtendedRun {
    /// Restricted fields at the requested levels.
    pub snapshots: Vec<Snapshot>,
    /// `||sqrt(rho) Psi^m||^2` outside the original domain (half weight on
    /// the boundary rows), per level `0..=M`.
    pub exterior_mass: Vec<f64>,
    pub pad_left: usize,
    pub pad_right: usize,
    pub mesh: Mesh2d,
}

/// Cells a disturbance can cross and come back within `t_end`, using the
/// largest discrete group velocity `hbar B1 / (h rho)`.
pub fn required_padding(model: &PhysicalModel, h: f64, t_end: f64) -> usize {
    let a = model.asymptotics;
    let speed = model.hbar * a.b1 / (h * a.rho);
    (0.5 * speed * t_end / h).ceil() as usize + 16
}

/// Runs the splitting scheme with walls on a domain padded on each side
/// that `options` marks transparent, returning fields restricted to `mesh`.
pub fn run_extended_domain(
    model: &PhysicalModel,
    mesh: &Mesh2d,
    time: &TimeMesh,
    psi0: &WaveField,
    boundaries: SolverOptions,
    ext: ExtendedOptions,
    snapshot_levels: &[usize],
) -> Result<ExtendedRun> {
    if ext.factor < 2 {
        return Err(Error::validation("enlargement factor must be at least 2"));
    }
    let nx = mesh.nx();
    let t_end = time.time(time.levels());
    let pad_for = |kind: BoundaryKind, h: f64| match kind {
        BoundaryKind::Transparent => ((ext.factor - 1) * nx).max(required_padding(model, h, t_end)),
        BoundaryKind::Dirichlet => 0,
    };
    let pad_left = pad_for(boundaries.left, mesh.x.step(1));
    let pad_right = pad_for(boundaries.right, mesh.x.step(nx));
    let x: AxisMesh = mesh.x.extended(pad_left, pad_right)?;
    let big = Mesh2d::new(x, mesh.y.clone())?;

    // Same truncated start as the transparent run.
    let (trimmed, _) = truncate_initial(psi0, mesh, &boundaries)?;
    let mut start = big.zeros();
    start
        .slice_mut(s![pad_left..pad_left + nx + 1, ..])
        .assign(&trimmed.psi);

    let options = SolverOptions {
        left: BoundaryKind::Dirichlet,
        right: BoundaryKind::Dirichlet,
        execution: ext.execution,
        propagator: boundaries.propagator,
    };
    let mut solver = SplittingSolver::new(model, &big, time, &WaveField::from_array(start), options)?;
    let restrict = |a: &Array2<_>| a.slice(s![pad_left..pad_left + nx + 1, ..]).to_owned();
    let mut snapshots = Vec::new();
    let mut exterior_mass = Vec::with_capacity(time.levels() + 1);
    loop {
        let m = solver.level();
        exterior_mass.push(exterior(&solver, pad_left, nx, boundaries));
        if snapshot_levels.contains(&m) {
            snapshots.push(Snapshot {
                m,
                t: solver.time(),
                psi: restrict(solver.psi()),
            });
        }
        if m == time.levels() {
            break;
        }
        solver.step(None)?;
    }
    Ok(ExtendedRun {
        snapshots,
        exterior_mass,
        pad_left,
        pad_right,
        mesh: big,
    })
}

fn exterior(solver: &SplittingSolver, pad_left: usize, nx: usize, b: SolverOptions) -> f64 {
    let mesh = solver.mesh();
    let psi = solver.psi();
    let rho = &solver.coefficients().rho;
    let row = |j: usize, w: f64| -> f64 {
        (1..mesh.ny())
            .map(|k| rho[[j, k]] * psi[[j, k]].norm_sqr() * mesh.y.half_step(k))
            .sum::<f64>()
            * w
    };
    let mut acc = 0.0;
    if b.right == BoundaryKind::Transparent {
        let jr = pad_left + nx;
        acc += row(jr, 0.5 * mesh.x.step(jr));
        for j in jr + 1..mesh.nx() {
            acc += row(j, mesh.x.half_step(j));
        }
    }
    if b.left == BoundaryKind::Transparent {
        acc += row(pad_left, 0.5 * mesh.x.step(pad_left + 1));
        for j in 1..pad_left {
            acc += row(j, mesh.x.half_step(j));
        }
    }
    acc
}
