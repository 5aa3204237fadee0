//! Acceptance suite: ten properties of the solver at desk scale, one
//! PASS/FAIL line each, written to stderr.

use std::io::Write;

use harness::config::{ExecutionChoice, StripKind};
use harness::study::{convergence_study, runtime_study, Axis};
use harness::verify::{
    check_conservation, check_factorization, check_forcing_stability, check_positivity, check_tbc_exactness,
};
use harness::SolverConfig;
use schrostrip::model::sample_coefficients;
use schrostrip::reference::CnFullSolver;
use schrostrip::spectral::SpectralBasis;
use schrostrip::splitting::SplittingSolver;
use schrostrip::tbc::{kernel_impulse_oracle, kernel_inverse_z, BoundaryParams};
use std::time::Instant;

const MASS_DRIFT: f64 = 1e-10;
const MASS_GROWTH: f64 = 1e-12;
const DESK_RUNTIME_S: f64 = 10.0;
const TBC_EXACTNESS: f64 = 1e-8;
const KERNEL_AGREEMENT: f64 = 1e-10;
const POSITIVITY_FLOOR: f64 = -1e-10;
const ENERGY_IDENTITY: f64 = 1e-8;
const RATIO_RANGE: (f64, f64) = (3.0, 5.0);
const FACTORIZATION: f64 = 1e-13;
const RUNTIME_RATIO_RANGE: (f64, f64) = (1.6, 2.6);
const RUNTIME_REPEATS: usize = 5;

struct Line {
    id: usize,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn free_desk() -> SolverConfig {
    SolverConfig::default()
}

fn example_b() -> SolverConfig {
    let mut c = SolverConfig::default();
    c.domain.strip = StripKind::Infinite;
    c.barrier.q = 1500.0;
    c
}

fn conservation() -> Line {
    let start = Instant::now();
    let r = check_conservation(&free_desk().build().unwrap()).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    Line {
        id: 1,
        name: "conservation",
        passed: r.passed && r.tolerance == MASS_DRIFT && elapsed < DESK_RUNTIME_S,
        detail: format!("{r}; wall time {elapsed:.2} s (limit {DESK_RUNTIME_S} s, growth limit {MASS_GROWTH:e})"),
    }
}

fn tbc_and_energy() -> (Line, Line) {
    let mut worst_exact: f64 = 0.0;
    let mut worst_energy: f64 = 0.0;
    let mut details = Vec::new();
    for (label, cfg) in [("free, semi-infinite", free_desk()), ("barrier Q=1500, infinite", example_b())] {
        let (e, w) = check_tbc_exactness(&cfg.build().unwrap(), 4).unwrap();
        worst_exact = worst_exact.max(e.value);
        worst_energy = worst_energy.max(w.value);
        details.push(format!("{label}: E_C {:.3e}, identity {:.3e}", e.value, w.value));
    }
    (
        Line {
            id: 2,
            name: "tbc-exactness",
            passed: worst_exact <= TBC_EXACTNESS,
            detail: format!("max E_C {worst_exact:.3e} (limit {TBC_EXACTNESS:e}); {}", details.join("; ")),
        },
        Line {
            id: 5,
            name: "energy-identity",
            passed: worst_energy <= ENERGY_IDENTITY,
            detail: format!("max relative gap {worst_energy:.3e} (limit {ENERGY_IDENTITY:e})"),
        },
    )
}

fn kernels() -> Line {
    let p = example_b().build().unwrap();
    let c = sample_coefficients(&p.model, &p.mesh).unwrap();
    let a = c.asymptotics;
    let basis = SpectralBasis::new(&p.mesh.y).unwrap();
    let bp = BoundaryParams {
        hbar: c.hbar,
        rho: a.rho,
        b1: a.b1,
        b2: a.b2,
        v_inf: a.v,
        h: p.mesh.x.step(p.mesh.nx()),
        tau: p.time.step(1),
    };
    let mut worst: f64 = 0.0;
    for l in 1..=basis.modes() {
        let mp = bp.mode(basis.eigenvalue(l));
        let z = kernel_inverse_z(&mp, 64).unwrap();
        let o = kernel_impulse_oracle(&mp, 64, None).unwrap();
        for (x, y) in z.r.iter().zip(o.r.iter()) {
            worst = worst.max((x - y).norm());
        }
    }
    Line {
        id: 3,
        name: "kernel-cross-validation",
        passed: worst <= KERNEL_AGREEMENT,
        detail: format!("{} modes, M = 64, max |R_inverse_z - R_impulse| {worst:.3e} (limit {KERNEL_AGREEMENT:e})", basis.modes()),
    }
}

fn positivity() -> Line {
    let r = check_positivity(&example_b().build().unwrap(), 200, 32, 20260101).unwrap();
    Line {
        id: 4,
        name: "positivity",
        passed: r.value >= POSITIVITY_FLOOR,
        detail: r.to_string(),
    }
}

fn convergence() -> Line {
    let mut ok = true;
    let mut details = Vec::new();
    for (axis, (j, k, m)) in [(Axis::J, (300, 32, 150)), (Axis::K, (300, 32, 150)), (Axis::M, (300, 32, 160))] {
        let mut c = example_b();
        (c.mesh.j, c.mesh.k, c.mesh.m) = (j, k, m);
        let rep = convergence_study(&c, axis, 5).unwrap();
        println!("{axis}-refinement, barrier Q=1500:\n{}", rep.to_table());
        // Rows with a ratio, minus the last one, which is compared against
        // its immediate refinement and saturates.
        let n = rep.rows.len();
        for r in &rep.rows[1..n - 2] {
            for v in [r.ratio_c, r.ratio_l2] {
                let v = v.unwrap_or(f64::NAN);
                ok &= v >= RATIO_RANGE.0 && v <= RATIO_RANGE.1;
                details.push(format!("{axis}={}: {v:.2}", match axis {
                    Axis::J => r.j,
                    Axis::K => r.k,
                    Axis::M => r.m,
                }));
            }
        }
    }
    Line {
        id: 6,
        name: "second-order-convergence",
        passed: ok,
        detail: format!("R_C, R_L2 in [{}, {}]: {}", RATIO_RANGE.0, RATIO_RANGE.1, details.join(", ")),
    }
}

fn splitting_order() -> Line {
    let mut diffs = Vec::new();
    for m in [150, 300, 600] {
        let mut c = example_b();
        c.mesh.m = m;
        let p = c.build().unwrap();
        let co = sample_coefficients(&p.model, &p.mesh).unwrap();
        let mut cn = CnFullSolver::new(&co, co.v.clone(), &p.mesh, &p.time, &p.psi0, p.options).unwrap();
        for _ in 0..m {
            cn.step().unwrap();
        }
        let mut s = SplittingSolver::new(&p.model, &p.mesh, &p.time, &p.psi0, p.options).unwrap();
        s.run(&[]).unwrap();
        diffs.push((cn.psi() - s.psi()).iter().map(|v| v.norm()).fold(0.0, f64::max));
    }
    let ratios: Vec<f64> = diffs.windows(2).map(|w| w[0] / w[1]).collect();
    Line {
        id: 7,
        name: "splitting-error-order",
        passed: ratios.iter().all(|&r| r >= RATIO_RANGE.0 && r <= RATIO_RANGE.1),
        detail: format!("max |CN - splitting| at T for M = 150, 300, 600: [{}], ratios {ratios:.3?}", diffs.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>().join(", ")),
    }
}

fn factorization() -> Line {
    let r = check_factorization(&example_b().build().unwrap(), 10, 7).unwrap();
    Line {
        id: 8,
        name: "factorization-equivalence",
        passed: r.value <= FACTORIZATION,
        detail: r.to_string(),
    }
}

fn forcing() -> Line {
    let mut c = example_b();
    (c.mesh.j, c.mesh.k, c.mesh.m) = (150, 16, 75);
    let r = check_forcing_stability(&c.build().unwrap(), 100, 99).unwrap();
    Line {
        id: 9,
        name: "forcing-stability",
        passed: r.passed,
        detail: format!("{r}; mesh (150, 16, 75)"),
    }
}

fn runtime_scaling() -> Line {
    let mut c = free_desk();
    c.splitting.execution = ExecutionChoice::Sequential;
    let mut ok = true;
    let mut details = Vec::new();
    for axis in [Axis::J, Axis::K, Axis::M] {
        let rows = runtime_study(&c, axis, 3, RUNTIME_REPEATS).unwrap();
        let ratios: Vec<f64> = rows
            .windows(2)
            .map(|w| w[1].1.as_secs_f64() / w[0].1.as_secs_f64())
            .collect();
        ok &= ratios.iter().all(|&r| r >= RUNTIME_RATIO_RANGE.0 && r <= RUNTIME_RATIO_RANGE.1);
        details.push(format!("{axis}: {ratios:.2?}"));
    }
    Line {
        id: 10,
        name: "runtime-scaling",
        passed: ok,
        detail: format!(
            "sequential, best of {RUNTIME_REPEATS} interleaved, ratios per doubling in [{}, {}]: {}",
            RUNTIME_RATIO_RANGE.0,
            RUNTIME_RATIO_RANGE.1,
            details.join("; ")
        ),
    }
}

#[test]
fn acceptance() {
    let mut lines = vec![conservation()];
    let (tbc, energy) = tbc_and_energy();
    lines.extend([tbc, kernels(), positivity(), energy, convergence(), splitting_order(), factorization(), forcing()]);
    // Timing last, after the heavy runs have finished.
    lines.push(runtime_scaling());
    lines.sort_by_key(|l| l.id);
    // Straight to stderr so the summary survives libtest's output capture.
    let mut err = std::io::stderr().lock();
    writeln!(err).unwrap();
    for l in &lines {
        writeln!(
            err,
            "[{}] criterion {:>2} {}: {}",
            if l.passed { "PASS" } else { "FAIL" },
            l.id,
            l.name,
            l.detail
        )
        .unwrap();
    }
    let failed: Vec<usize> = lines.iter().filter(|l| !l.passed).map(|l| l.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
