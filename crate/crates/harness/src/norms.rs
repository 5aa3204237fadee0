//! Mesh errors against a reference solution, measured on joint nodes.

use crate::error::{HarnessError, Result};
use ndarray::Array2;
use num_complex::Complex64 as C64;
use schrostrip::mesh::{AxisMesh, Closure, Mesh2d};

/// Absolute and relative `C` and `L2` errors. Relative values are absent
/// when the reference vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorNorms {
    pub c: f64,
    pub l2: f64,
    pub c_rel: Option<f64>,
    pub l2_rel: Option<f64>,
}

impl ErrorNorms {
    /// Componentwise maximum, as used for "maximal in time" errors.
    pub fn max(self, o: ErrorNorms) -> ErrorNorms {
        let opt = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(x), Some(y)) => Some(x.max(y)),
            (x, None) => x,
            (None, y) => y,
        };
        ErrorNorms {
            c: self.c.max(o.c),
            l2: self.l2.max(o.l2),
            c_rel: opt(self.c_rel, o.c_rel),
            l2_rel: opt(self.l2_rel, o.l2_rel),
        }
    }
}

/// Indices of `coarse` nodes inside `fine`.
pub fn joint_indices(coarse: &AxisMesh, fine: &AxisMesh) -> Result<Vec<usize>> {
    let scale = fine.last().abs().max(fine.first().abs()).max(1.0);
    let nodes = fine.nodes();
    coarse
        .nodes()
        .iter()
        .map(|&x| {
            let i = nodes.partition_point(|&f| f < x - 1e-12 * scale);
            if i < nodes.len() && (nodes[i] - x).abs() <= 1e-12 * scale {
                Ok(i)
            } else {
                Err(HarnessError::config(format!(
                    "meshes are not nested: node {x} has no counterpart on the reference mesh"
                )))
            }
        })
        .collect()
}

/// Restriction of a reference field to the nodes of `mesh`.
pub fn restrict(reference: &Array2<C64>, ref_mesh: &Mesh2d, mesh: &Mesh2d) -> Result<Array2<C64>> {
    ref_mesh.check_shape(reference)?;
    let ix = joint_indices(&mesh.x, &ref_mesh.x)?;
    let iy = joint_indices(&mesh.y, &ref_mesh.y)?;
    Ok(Array2::from_shape_fn(mesh.shape(), |(j, k)| reference[[ix[j], iy[k]]]))
}

/// Errors of `psi` (on `mesh`) against `reference` (on a mesh containing
/// every node of `mesh`). The `L2` norm is the closed mesh norm of `mesh`.
pub fn error_norms(psi: &Array2<C64>, mesh: &Mesh2d, reference: &Array2<C64>, ref_mesh: &Mesh2d) -> Result<ErrorNorms> {
    mesh.check_shape(psi)?;
    let r = restrict(reference, ref_mesh, mesh)?;
    let diff = psi - &r;
    let c = diff.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let l2 = mesh.norm(&diff, Closure::Both);
    let rc = r.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let rl2 = mesh.norm(&r, Closure::Both);
    let rel = |e: f64, n: f64| (n > 0.0).then(|| e / n);
    Ok(ErrorNorms {
        c,
        l2,
        c_rel: rel(c, rc),
        l2_rel: rel(l2, rl2),
    })
}
