//! Checks that one splitting step equals `E (CN with V~) E`, the factorized
//! form of the scheme, with the unsplit solver as the Crank-Nicolson stage.

use super::cn_full::CnFullSolver;
use crate::error::Result;
use crate::mesh::{Mesh2d, TimeMesh};
use crate::model::{SampledCoefficients, WaveField};
use crate::splitting::{SolverOptions, SplittingSolver};
use ndarray::Array2;

/// Largest discrepancy between the splitting solver and the factorized
/// form over `steps` levels, relative to `max |Psi^m|`.
pub fn check_factorized_forms(
    coeffs: &SampledCoefficients,
    mesh: &Mesh2d,
    time: &TimeMesh,
    psi0: &WaveField,
    options: SolverOptions,
    steps: usize,
) -> Result<f64> {
    let mut split = SplittingSolver::from_coefficients(coeffs.clone(), mesh, time, psi0, options)?;
    let v_tilde = Array2::from_shape_fn(mesh.shape(), |(j, _)| coeffs.v_tilde[j]);
    let mut cn = CnFullSolver::new(coeffs, v_tilde, mesh, time, psi0, options)?;
    let e = split.propagator().clone();
    let mut worst: f64 = 0.0;
    for _ in 0..steps.min(time.levels()) {
        let mut b = split.psi().clone();
        e.apply(&mut b);
        let mut pred = cn.advance(&b)?;
        e.apply(&mut pred);
        split.step(None)?;
        let psi = split.psi();
        let scale = psi.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let diff = pred
            .iter()
            .zip(psi.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        worst = worst.max(diff / scale);
    }
    Ok(worst)
}
