//! One-dimensional meshes, their tensor product, difference and averaging
//! operators, and the mesh inner products.
//!
//! Storage is 0-based and maps the node index `j = 0..=N` directly. Steps are
//! 1-based: `step(j) = x_j - x_{j-1}` for `j = 1..=N`. Beyond either end the
//! mesh is continued uniformly (`h_0 := h_1`, `h_{N+1} := h_N`), which is the
//! uniform-tail convention the transparent boundary rows rely on.

use crate::error::{Error, Result};
use ndarray::Array2;
use num_complex::Complex64 as C64;

#[derive(Debug, Clone, PartialEq)]
pub struct AxisMesh {
    nodes: Vec<f64>,
    steps: Vec<f64>,
}

impl AxisMesh {
    /// Builds a mesh from strictly increasing nodes (at least one cell).
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::validation("a mesh needs at least two nodes"));
        }
        if nodes.iter().any(|x| !x.is_finite()) {
            return Err(Error::validation("mesh nodes must be finite"));
        }
        let steps: Vec<f64> = nodes.windows(2).map(|w| w[1] - w[0]).collect();
        if let Some(i) = steps.iter().position(|&h| h <= 0.0) {
            return Err(Error::validation(format!(
                "mesh nodes must be strictly increasing (violated at node {})",
                i + 1
            )));
        }
        Ok(Self { nodes, steps })
    }

    /// `cells` equal steps on `[start, end]`; the last node equals `end` exactly.
    pub fn uniform(start: f64, end: f64, cells: usize) -> Result<Self> {
        if cells == 0 || end <= start {
            return Err(Error::validation("uniform mesh needs cells > 0 and end > start"));
        }
        let h = (end - start) / cells as f64;
        let mut nodes: Vec<f64> = (0..=cells).map(|j| start + h * j as f64).collect();
        nodes[cells] = end;
        Self::new(nodes)
    }

    /// Number of cells `N` (the last node index).
    pub fn cells(&self) -> usize {
        self.steps.len()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, j: usize) -> f64 {
        self.nodes[j]
    }

    pub fn first(&self) -> f64 {
        self.nodes[0]
    }

    pub fn last(&self) -> f64 {
        self.nodes[self.cells()]
    }

    /// `h_j` for `j = 0..=N+1`, with uniform continuation past both ends.
    pub fn step(&self, j: usize) -> f64 {
        let n = self.cells();
        self.steps[j.clamp(1, n) - 1]
    }

    /// `h_{j+1/2} = (h_j + h_{j+1}) / 2`, valid for `j = 0..=N`.
    pub fn half_step(&self, j: usize) -> f64 {
        0.5 * (self.step(j) + self.step(j + 1))
    }

    /// Midpoint `x_{j-1/2}` of cell `j`, for `j = 0..=N+1` (ghost cells included).
    pub fn midpoint(&self, j: usize) -> f64 {
        let n = self.cells();
        match j {
            0 => self.nodes[0] - 0.5 * self.step(1),
            j if j > n => self.nodes[n] + 0.5 * self.step(n),
            j => 0.5 * (self.nodes[j - 1] + self.nodes[j]),
        }
    }

    /// True when every step equals the first to `1e-12` relative.
    pub fn is_uniform(&self) -> bool {
        let h = self.steps[0];
        self.steps.iter().all(|s| (s - h).abs() <= 1e-12 * h)
    }

    /// Step used by the right boundary tail (`h = h_N`).
    pub fn tail_step(&self) -> f64 {
        self.step(self.cells())
    }

    /// Appends `extra` cells of the tail step on the right and `extra_left`
    /// cells of the first step on the left.
    pub fn extended(&self, extra_left: usize, extra: usize) -> Result<Self> {
        let hl = self.step(1);
        let hr = self.tail_step();
        let mut nodes = Vec::with_capacity(self.len() + extra + extra_left);
        nodes.extend((1..=extra_left).rev().map(|i| self.first() - hl * i as f64));
        nodes.extend_from_slice(&self.nodes);
        nodes.extend((1..=extra).map(|i| self.last() + hr * i as f64));
        Self::new(nodes)
    }

    /// Mesh obtained by keeping every `factor`-th node.
    pub fn coarsened(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.cells().is_multiple_of(factor) {
            return Err(Error::validation("meshes are not nested"));
        }
        Self::new(self.nodes.iter().step_by(factor).copied().collect())
    }
}

/// Uniform or non-uniform time mesh `t_0 = 0 < t_1 < ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeMesh {
    steps: Vec<f64>,
    uniform: bool,
}

impl TimeMesh {
    pub fn uniform(t_end: f64, levels: usize) -> Result<Self> {
        if !(t_end > 0.0) {
            return Err(Error::validation("final time must be positive"));
        }
        if levels == 0 {
            return Err(Error::validation("time mesh needs at least one level"));
        }
        Ok(Self {
            steps: vec![t_end / levels as f64; levels],
            uniform: true,
        })
    }

    pub fn from_steps(steps: Vec<f64>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::validation("time mesh needs at least one level"));
        }
        if steps.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::validation("time steps must be positive"));
        }
        let uniform = steps
            .first()
            .map(|&t0| steps.iter().all(|&s| (s - t0).abs() <= 1e-14 * t0))
            .unwrap_or(true);
        Ok(Self { steps, uniform })
    }

    pub fn levels(&self) -> usize {
        self.steps.len()
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// `tau_m`, `m = 1..=M`.
    pub fn step(&self, m: usize) -> f64 {
        self.steps[m - 1]
    }

    pub fn time(&self, m: usize) -> f64 {
        self.steps[..m].iter().sum()
    }
}

/// Which end rows of a closed x-mesh carry the half-cell weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Closure {
    /// `j = 1..J-1` only.
    Interior,
    /// Adds `j = J` with weight `h/2`.
    Right,
    /// Adds `j = 0` with weight `h/2`.
    Left,
    /// Adds `j = 0` and `j = J`, each with its half-cell weight.
    Both,
}

fn check(j: usize, lo: usize, hi: usize, len: usize) -> Result<()> {
    if j < lo || j > hi {
        Err(Error::IndexOutOfRange { index: j, len })
    } else {
        Ok(())
    }
}

fn check_len(w: &[C64], mesh: &AxisMesh) -> Result<()> {
    if w.len() != mesh.len() {
        return Err(Error::LengthMismatch {
            expected: mesh.len(),
            found: w.len(),
        });
    }
    Ok(())
}

/// `(W_j - W_{j-1}) / h_j`, `1 <= j <= N`.
pub fn diff_backward(w: &[C64], mesh: &AxisMesh, j: usize) -> Result<C64> {
    check_len(w, mesh)?;
    check(j, 1, mesh.cells(), w.len())?;
    Ok((w[j] - w[j - 1]) / mesh.step(j))
}

/// `(W_{j+1} - W_j) / h_{j+1/2}`, `1 <= j <= N-1`.
pub fn diff_forward_mod(w: &[C64], mesh: &AxisMesh, j: usize) -> Result<C64> {
    check_len(w, mesh)?;
    check(j, 1, mesh.cells().saturating_sub(1), w.len())?;
    Ok((w[j + 1] - w[j]) / mesh.half_step(j))
}

/// `(W_{j+1} - W_{j-1}) / (2 h_{j+1/2})`, `1 <= j <= N-1`.
pub fn diff_central(w: &[C64], mesh: &AxisMesh, j: usize) -> Result<C64> {
    check_len(w, mesh)?;
    check(j, 1, mesh.cells().saturating_sub(1), w.len())?;
    Ok((w[j + 1] - w[j - 1]) / (2.0 * mesh.half_step(j)))
}

/// `(W_{j-1} + W_j) / 2`, `1 <= j <= N`.
pub fn avg_bar(w: &[C64], mesh: &AxisMesh, j: usize) -> Result<C64> {
    check_len(w, mesh)?;
    check(j, 1, mesh.cells(), w.len())?;
    Ok(0.5 * (w[j - 1] + w[j]))
}

/// `(h_j W_j + h_{j+1} W_{j+1}) / (2 h_{j+1/2})`, `1 <= j <= N-1`.
pub fn avg_hat(w: &[C64], mesh: &AxisMesh, j: usize) -> Result<C64> {
    check_len(w, mesh)?;
    check(j, 1, mesh.cells().saturating_sub(1), w.len())?;
    Ok((mesh.step(j) * w[j] + mesh.step(j + 1) * w[j + 1]) / (2.0 * mesh.half_step(j)))
}

/// Weighted two-point average that returns `a` exactly when `a == b`.
///
/// Coefficient sampling depends on this: constant inputs must stay bitwise
/// constant so that the potential difference vanishes exactly near the
/// transparent boundaries.
pub(crate) fn hat_mean(a: f64, ha: f64, b: f64, hb: f64) -> f64 {
    if a == b {
        a
    } else {
        (ha * a + hb * b) / (ha + hb)
    }
}

/// Node weight of the 1D closed inner product for node `j`.
pub fn node_weight(mesh: &AxisMesh, j: usize, closure: Closure) -> f64 {
    let n = mesh.cells();
    if j == 0 {
        match closure {
            Closure::Both | Closure::Left => 0.5 * mesh.step(1),
            _ => 0.0,
        }
    } else if j == n {
        match closure {
            Closure::Interior | Closure::Left => 0.0,
            _ => 0.5 * mesh.step(n),
        }
    } else {
        mesh.half_step(j)
    }
}

/// `(U, W) = sum U_j conj(W_j) weight_j` over the rows selected by `closure`.
pub fn inner_product(u: &[C64], w: &[C64], mesh: &AxisMesh, closure: Closure) -> Result<C64> {
    check_len(u, mesh)?;
    check_len(w, mesh)?;
    Ok((0..mesh.len())
        .map(|j| u[j] * w[j].conj() * node_weight(mesh, j, closure))
        .sum())
}

/// The y-direction inner product on `k = 1..K-1` with weights `delta_{k+1/2}`.
pub fn inner_product_y(u: &[C64], w: &[C64], mesh: &AxisMesh) -> Result<C64> {
    inner_product(u, w, mesh, Closure::Interior)
}

/// Tensor-product mesh on the computational rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh2d {
    pub x: AxisMesh,
    pub y: AxisMesh,
}

impl Mesh2d {
    /// Rejects degenerate meshes: the transparent rows need `J >= 4` and the
    /// spectral basis needs `K >= 2`.
    pub fn new(x: AxisMesh, y: AxisMesh) -> Result<Self> {
        if x.cells() < 4 {
            return Err(Error::validation(format!("J = {} < 4", x.cells())));
        }
        if y.cells() < 2 {
            return Err(Error::validation(format!("K = {} < 2", y.cells())));
        }
        Ok(Self { x, y })
    }

    pub fn uniform(x_len: f64, j: usize, y_len: f64, k: usize) -> Result<Self> {
        Self::new(AxisMesh::uniform(0.0, x_len, j)?, AxisMesh::uniform(0.0, y_len, k)?)
    }

    /// `J`.
    pub fn nx(&self) -> usize {
        self.x.cells()
    }

    /// `K`.
    pub fn ny(&self) -> usize {
        self.y.cells()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx() + 1, self.ny() + 1)
    }

    pub fn zeros(&self) -> Array2<C64> {
        Array2::zeros(self.shape())
    }

    /// Weight of node `(j, k)`; zero on `k = 0, K`.
    pub fn weight(&self, j: usize, k: usize, closure: Closure) -> f64 {
        if k == 0 || k == self.ny() {
            return 0.0;
        }
        node_weight(&self.x, j, closure) * self.y.half_step(k)
    }

    /// 2D inner product `sum U conj(W) h_{j+1/2} delta_{k+1/2}` with the selected closure.
    pub fn inner(&self, u: &Array2<C64>, w: &Array2<C64>, closure: Closure) -> Result<C64> {
        self.check_shape(u)?;
        self.check_shape(w)?;
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..=self.nx() {
            let wx = node_weight(&self.x, j, closure);
            if wx == 0.0 {
                continue;
            }
            for k in 1..self.ny() {
                acc += u[[j, k]] * w[[j, k]].conj() * (wx * self.y.half_step(k));
            }
        }
        Ok(acc)
    }

    /// `sqrt(sum rho |W|^2 weight)`: the weighted mass norm.
    pub fn weighted_norm(&self, w: &Array2<C64>, rho: &Array2<f64>, closure: Closure) -> f64 {
        let mut acc = 0.0;
        for j in 0..=self.nx() {
            let wx = node_weight(&self.x, j, closure);
            if wx == 0.0 {
                continue;
            }
            for k in 1..self.ny() {
                acc += rho[[j, k]] * w[[j, k]].norm_sqr() * wx * self.y.half_step(k);
            }
        }
        acc.sqrt()
    }

    pub fn norm(&self, w: &Array2<C64>, closure: Closure) -> f64 {
        let mut acc = 0.0;
        for j in 0..=self.nx() {
            let wx = node_weight(&self.x, j, closure);
            for k in 1..self.ny() {
                acc += w[[j, k]].norm_sqr() * wx * self.y.half_step(k);
            }
        }
        acc.sqrt()
    }

    pub fn check_shape<T>(&self, a: &Array2<T>) -> Result<()> {
        let (r, c) = self.shape();
        if a.dim() != (r, c) {
            return Err(Error::LengthMismatch {
                expected: r * c,
                found: a.len(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn backward_difference_examples() {
        let m = AxisMesh::new(vec![0.0, 0.5, 1.5]).unwrap();
        let w = [c(0.0), c(1.0), c(4.0)];
        assert_eq!(diff_backward(&w, &m, 2).unwrap(), c(3.0));
        let constant = [c(2.5); 3];
        let slope: Vec<C64> = m.nodes().iter().map(|&x| c(x)).collect();
        for j in 1..=2 {
            assert_eq!(diff_backward(&constant, &m, j).unwrap(), c(0.0));
            assert!((diff_backward(&slope, &m, j).unwrap() - c(1.0)).norm() < 1e-15);
        }
        assert!(matches!(
            diff_backward(&w, &m, 0),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(diff_backward(&w, &m, 3).is_err());
    }

    #[test]
    fn averaging_examples() {
        let m = AxisMesh::new(vec![0.0, 1.0, 3.0]).unwrap();
        let w = [c(2.0), c(4.0), c(10.0)];
        assert_eq!(avg_hat(&w, &m, 1).unwrap(), c(8.0));

        let k = [c(7.0); 3];
        assert_eq!(avg_hat(&k, &m, 1).unwrap(), c(7.0));
        assert_eq!(avg_bar(&k, &m, 2).unwrap(), c(7.0));
        assert_eq!(diff_forward_mod(&k, &m, 1).unwrap(), c(0.0));
        assert_eq!(diff_central(&k, &m, 1).unwrap(), c(0.0));

        let u = AxisMesh::uniform(0.0, 1.0, 4).unwrap();
        let v = [c(1.0), c(2.0), c(5.0), c(3.0), c(0.0)];
        for j in 1..4 {
            assert!((avg_hat(&v, &u, j).unwrap() - 0.5 * (v[j] + v[j + 1])).norm() < 1e-15);
        }
        assert!(avg_hat(&v, &u, 4).is_err());
    }

    #[test]
    fn inner_product_examples() {
        let m = AxisMesh::uniform(0.0, 1.0, 2).unwrap();
        let z = [c(0.0); 3];
        assert_eq!(inner_product(&z, &z, &m, Closure::Right).unwrap(), c(0.0));
        let w = [c(0.0), c(1.0), c(1.0)];
        let interior = inner_product(&w, &w, &m, Closure::Interior).unwrap();
        let closed = inner_product(&w, &w, &m, Closure::Right).unwrap();
        assert!((interior - c(0.5)).norm() < 1e-15);
        assert!((closed - c(0.75)).norm() < 1e-15);
        assert!((closed - interior - w[2] * w[2].conj() * 0.25).norm() < 1e-15);
        assert!(matches!(
            inner_product(&w[..2], &w, &m, Closure::Right),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn degenerate_meshes_rejected() {
        let ok_y = AxisMesh::uniform(0.0, 1.0, 2).unwrap();
        assert!(Mesh2d::new(AxisMesh::uniform(0.0, 1.0, 3).unwrap(), ok_y.clone()).is_err());
        assert!(Mesh2d::new(
            AxisMesh::uniform(0.0, 1.0, 4).unwrap(),
            AxisMesh::uniform(0.0, 1.0, 1).unwrap()
        )
        .is_err());
        assert!(AxisMesh::new(vec![0.0, 1.0, 1.0]).is_err());
        assert_eq!(AxisMesh::uniform(0.0, 2.8, 7).unwrap().last(), 2.8);
    }

    #[test]
    fn second_difference_of_quadratic_is_exact() {
        let m = AxisMesh::uniform(-1.0, 2.0, 12).unwrap();
        let (a, b, c0) = (1.75, -0.3, 0.2);
        let w: Vec<C64> = m.nodes().iter().map(|&x| c(a * x * x + b * x + c0)).collect();
        for j in 1..12 {
            let left = diff_backward(&w, &m, j).unwrap();
            let right = diff_backward(&w, &m, j + 1).unwrap();
            let second = (right - left) / m.half_step(j);
            assert!((second - c(2.0 * a)).norm() < 1e-11, "{second}");
        }
    }

    fn mesh_strategy() -> impl Strategy<Value = AxisMesh> {
        prop::collection::vec(0.05f64..1.0, 4..12).prop_map(|steps| {
            let mut x = vec![0.0];
            for s in steps {
                x.push(x.last().unwrap() + s);
            }
            AxisMesh::new(x).unwrap()
        })
    }

    proptest! {
        #[test]
        fn summation_identity(mesh in mesh_strategy(), seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = mesh.cells();
            let mut rnd = || C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let w: Vec<C64> = (0..=n).map(|_| rnd()).collect();
            let u: Vec<C64> = (0..=n).map(|_| rnd()).collect();
            // (hat(s) W, U) on j = 1..N-1
            let lhs: C64 = (1..n)
                .map(|j| avg_hat(&w, &mesh, j).unwrap() * u[j].conj() * mesh.half_step(j))
                .sum();
            let mut rhs: C64 = (1..=n)
                .map(|j| w[j] * avg_bar(&u, &mesh, j).unwrap().conj() * mesh.step(j))
                .sum();
            rhs -= 0.5 * (w[1] * u[0].conj() * mesh.step(1) + w[n] * u[n].conj() * mesh.step(n));
            let scale = rhs.norm().max(lhs.norm()).max(1e-300);
            prop_assert!((lhs - rhs).norm() / scale <= 1e-13 || (lhs - rhs).norm() < 1e-14);
        }

        #[test]
        fn norm_is_positive(mesh in mesh_strategy(), vals in prop::collection::vec(-1.0f64..1.0, 24)) {
            let n = mesh.cells();
            let w: Vec<C64> = (0..=n).map(|j| C64::new(vals[j], vals[j + 12])).collect();
            let ip = inner_product(&w, &w, &mesh, Closure::Right).unwrap();
            prop_assert!(ip.im.abs() <= 1e-15 * ip.re.abs().max(1.0));
            prop_assert!(ip.re >= 0.0);
            let zero = vec![C64::new(0.0, 0.0); n + 1];
            prop_assert_eq!(inner_product(&zero, &zero, &mesh, Closure::Right).unwrap().re, 0.0);
        }
    }
}
