//! Sesquilinear form of the discrete kinetic operator, written cell by cell.
//!
//! For grid functions vanishing on the boundary nodes, summation by parts
//! gives `(H_0h U, W) = form(U, W)`. The form is built from the raw midpoint
//! samples, independently of the node stencil in `apply_hamiltonian`.

use crate::error::Result;
use crate::mesh::Mesh2d;
use crate::model::SampledCoefficients;
use ndarray::Array2;
use num_complex::Complex64 as C64;

/// `(hbar^2/2) sum_cells { B11 bar(s)_y[d_x U d_x W*] + B12 (bar(s)_x d_y U)(d_x bar(s)_y W*)
///  + B21 (d_x bar(s)_y U)(bar(s)_x d_y W*) + B22 bar(s)_x[d_y U d_y W*] } h_j delta_k`,
/// summed over cells `j = 1..J`, `k = 1..K`.
pub fn kinetic_form(coeffs: &SampledCoefficients, mesh: &Mesh2d, u: &Array2<C64>, w: &Array2<C64>) -> Result<C64> {
    mesh.check_shape(u)?;
    mesh.check_shape(w)?;
    let (nx, ny) = (mesh.nx(), mesh.ny());
    let dx = |a: &Array2<C64>, j: usize, k: usize| (a[[j, k]] - a[[j - 1, k]]) / mesh.x.step(j);
    let dy = |a: &Array2<C64>, j: usize, k: usize| (a[[j, k]] - a[[j, k - 1]]) / mesh.y.step(k);
    let mut acc = C64::new(0.0, 0.0);
    for j in 1..=nx {
        for k in 1..=ny {
            let b11 = coeffs.b11_cell[[j, k]];
            let b22 = coeffs.b22_cell[[j, k]];
            let b12 = coeffs.b12[[j, k]];
            let xx = 0.5 * (dx(u, j, k - 1) * dx(w, j, k - 1).conj() + dx(u, j, k) * dx(w, j, k).conj());
            let yy = 0.5 * (dy(u, j - 1, k) * dy(w, j - 1, k).conj() + dy(u, j, k) * dy(w, j, k).conj());
            let mut cell = b11 * xx + b22 * yy;
            if b12 != 0.0 {
                let sx_dy = |a: &Array2<C64>| 0.5 * (dy(a, j - 1, k) + dy(a, j, k));
                let dx_sy = |a: &Array2<C64>| 0.5 * (dx(a, j, k - 1) + dx(a, j, k));
                cell += b12 * (sx_dy(u) * dx_sy(w).conj() + dx_sy(u) * sx_dy(w).conj());
            }
            acc += cell * mesh.x.step(j) * mesh.y.step(k);
        }
    }
    Ok(0.5 * coeffs.hbar * coeffs.hbar * acc)
}

/// `(U, W)` over interior nodes with weights `h_{j+1/2} delta_{k+1/2}`.
pub fn interior_inner(mesh: &Mesh2d, u: &Array2<C64>, w: &Array2<C64>) -> Result<C64> {
    mesh.inner(u, w, crate::mesh::Closure::Interior)
}
