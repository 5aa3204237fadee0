use ndarray::Array2;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use schrostrip::mesh::{AxisMesh, Mesh2d, TimeMesh};
use schrostrip::model::{gaussian_packet, Barrier, PhysicalModel, WaveField};
use schrostrip::parallel::Execution;
use schrostrip::reference::{run_extended_domain, ExtendedOptions};
use schrostrip::splitting::{SolverOptions, SplittingSolver};

fn max_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn outflow(s: &SplittingSolver) -> (f64, f64) {
    s.trace().iter().fold((0.0, 0.0), |(l, r), t| (l + t.flux_left, r + t.flux_right))
}

#[test]
fn mirrored_packets_give_mirrored_solutions() {
    let mesh = Mesh2d::uniform(3.0, 120, 2.8, 16).unwrap();
    let time = TimeMesh::uniform(0.04, 120).unwrap();
    let model = PhysicalModel::free_laplacian();
    let right = gaussian_packet(&mesh, 30.0, 0.01, 1.5, 1.4);
    let mut left = gaussian_packet(&mesh, -30.0, 0.01, 1.5, 1.4);
    // gaussian_packet zeroes j = 0; mirror that on the other side
    left.zero_row(120);
    let opts = SolverOptions::infinite_strip();
    let mut a = SplittingSolver::new(&model, &mesh, &time, &right, opts).unwrap();
    let mut b = SplittingSolver::new(&model, &mesh, &time, &left, opts).unwrap();
    a.run(&[]).unwrap();
    b.run(&[]).unwrap();
    let mut flipped = b.psi().clone();
    flipped.invert_axis(ndarray::Axis(0));
    assert!(max_diff(a.psi(), &flipped) < 1e-11, "{}", max_diff(a.psi(), &flipped));
    let (al, ar) = outflow(&a);
    let (bl, br) = outflow(&b);
    assert!(ar > 1e-3, "{ar}");
    assert!((ar - bl).abs() < 1e-12 && (al - br).abs() < 1e-12, "{al} {ar} {bl} {br}");
}

#[test]
fn empty_time_meshes_are_rejected() {
    assert!(TimeMesh::uniform(0.01, 0).is_err());
    assert!(TimeMesh::from_steps(vec![]).is_err());
}

#[test]
fn parallel_and_sequential_runs_are_bitwise_equal() {
    let mesh = Mesh2d::uniform(3.0, 150, 2.8, 16).unwrap();
    let time = TimeMesh::uniform(0.02, 40).unwrap();
    let model = PhysicalModel::free_laplacian().with_barrier(&Barrier::new(1.6, 1.7, 0.7, 2.1, 1500.0).unwrap());
    let psi0 = gaussian_packet(&mesh, 30.0, 1.0 / 120.0, 1.0, 1.4);
    let run = |e| {
        let mut s = SplittingSolver::new(&model, &mesh, &time, &psi0, SolverOptions::infinite_strip().with_execution(e)).unwrap();
        s.run(&[]).unwrap();
        s.psi().clone()
    };
    assert_eq!(run(Execution::Parallel), run(Execution::Sequential));
}

#[test]
fn higher_barriers_transmit_less() {
    let mesh = Mesh2d::uniform(3.0, 300, 2.8, 32).unwrap();
    let time = TimeMesh::uniform(0.027, 150).unwrap();
    let psi0 = gaussian_packet(&mesh, 30.0, 1.0 / 120.0, 1.0, 1.4);
    let transmitted: Vec<f64> = [0.0, 1000.0, 1500.0, 4000.0]
        .iter()
        .map(|&q| {
            let model = PhysicalModel::free_laplacian().with_barrier(&Barrier::new(1.6, 1.7, 0.7, 2.1, q).unwrap());
            let mut s = SplittingSolver::new(&model, &mesh, &time, &psi0, SolverOptions::infinite_strip()).unwrap();
            s.run(&[]).unwrap();
            outflow(&s).1
        })
        .collect();
    for w in transmitted.windows(2) {
        assert!(w[0] > w[1], "{transmitted:?}");
    }
}

#[test]
fn nonuniform_interior_mesh_keeps_the_boundary_transparent() {
    // Graded cells around the barrier, uniform near both ends.
    let mut nodes = vec![0.0];
    while *nodes.last().unwrap() < 3.0 - 1e-9 {
        let x: f64 = *nodes.last().unwrap();
        let h = if (1.3..2.0).contains(&x) { 0.01 + 0.01 * ((x - 1.65) / 0.35).abs() } else { 0.02 };
        nodes.push((x + h).min(3.0));
    }
    let x = AxisMesh::new(nodes).unwrap();
    let mesh = Mesh2d::new(x, AxisMesh::uniform(0.0, 2.8, 16).unwrap()).unwrap();
    let time = TimeMesh::uniform(0.04, 160).unwrap();
    let model = PhysicalModel::free_laplacian().with_barrier(&Barrier::new(1.6, 1.7, 0.7, 2.1, 1500.0).unwrap());
    let psi0 = gaussian_packet(&mesh, 30.0, 1.0 / 120.0, 1.0, 1.4);
    let opts = SolverOptions::infinite_strip();
    let levels: Vec<usize> = (0..=160).step_by(8).collect();
    let mut s = SplittingSolver::new(&model, &mesh, &time, &psi0, opts).unwrap();
    let snaps = s.run(&levels).unwrap();
    let ext = run_extended_domain(&model, &mesh, &time, &psi0, opts, ExtendedOptions::default(), &levels).unwrap();
    let worst = snaps
        .iter()
        .zip(&ext.snapshots)
        .map(|(a, b)| max_diff(&a.psi, &b.psi))
        .fold(0.0, f64::max);
    assert!(worst < 1e-10, "{worst}");
    let (l, r) = outflow(&s);
    assert!(r > 1e-3, "the packet must reach the boundary, outflow {r}");
    let m0 = s.trace()[0].mass.powi(2);
    assert!((s.mass().powi(2) + l + r - m0).abs() < 1e-12 * m0);
}

#[test]
fn variable_y_coefficients_are_rejected_on_the_fast_path() {
    let mesh = Mesh2d::uniform(3.0, 60, 2.8, 8).unwrap();
    let time = TimeMesh::uniform(0.01, 5).unwrap();
    let mut model = PhysicalModel::free_laplacian();
    model.b12 = std::sync::Arc::new(|x, _| if x < 1.0 { 0.3 } else { 0.0 });
    let psi0 = WaveField::zeros(&mesh);
    let err = SplittingSolver::new(&model, &mesh, &time, &psi0, SolverOptions::default()).unwrap_err();
    assert!(err.to_string().contains("full Crank-Nicolson"), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mass_balance_holds_for_random_states(seed in any::<u64>(), q in 0.0f64..3000.0, infinite in any::<bool>()) {
        use rand::{Rng, SeedableRng};
        let mesh = Mesh2d::uniform(3.0, 40, 2.8, 8).unwrap();
        let time = TimeMesh::uniform(0.02, 25).unwrap();
        let model = PhysicalModel::free_laplacian().with_barrier(&Barrier::new(1.4, 1.8, 0.7, 2.1, q).unwrap());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let psi0 = WaveField::from_array(Array2::from_shape_fn(mesh.shape(), |_| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        }));
        let opts = if infinite { SolverOptions::infinite_strip() } else { SolverOptions::default() };
        let mut s = SplittingSolver::new(&model, &mesh, &time, &psi0, opts).unwrap();
        s.run(&[]).unwrap();
        let m0 = s.trace()[0].mass.powi(2);
        let mut cum = 0.0;
        for t in s.trace() {
            cum += t.flux_left + t.flux_right;
            prop_assert!((t.mass.powi(2) + cum - m0).abs() <= 1e-12 * m0);
            prop_assert!(t.mass <= s.trace()[0].mass * (1.0 + 1e-12));
        }
    }
}
