//! Property checks run by `schrostrip verify` and by the acceptance suite.

use crate::config::Problem;
use crate::error::Result;
use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use schrostrip::mesh::Mesh2d;
use schrostrip::model::{sample_coefficients, WaveField};
use schrostrip::reference::{check_factorized_forms, run_extended_domain, ExtendedOptions};
use schrostrip::spectral::SpectralBasis;
use schrostrip::splitting::{BoundaryKind, SolverOptions, SplittingSolver};
use schrostrip::tbc::{check_positivity_modes, BoundaryParams, KernelCache, KernelSet};
use std::fmt;

/// Outcome of one property check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Measured quantity, compared against `tolerance`.
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckResult {
    fn at_most(name: &str, value: f64, tolerance: f64, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed: value <= tolerance,
            value,
            tolerance,
            detail,
        }
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {:.5e} (bound {:.1e}){}{}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.tolerance,
            if self.detail.is_empty() { "" } else { "; " },
            self.detail
        )
    }
}

/// Mass stays constant to `1e-10` relative until the flux through the
/// transparent ends becomes visible, and never grows by more than `1e-12`.
pub fn check_conservation(p: &Problem) -> Result<CheckResult> {
    let mut s = SplittingSolver::new(&p.model, &p.mesh, &p.time, &p.psi0, p.options)?;
    s.run(&[])?;
    let trace = s.trace();
    let m0 = trace[0].mass;
    let mut cum = 0.0;
    let mut drift: f64 = 0.0;
    let mut growth: f64 = 0.0;
    let mut contact = None;
    for r in trace {
        cum += r.flux_left + r.flux_right;
        if contact.is_none() && cum.abs() > 1e-10 * m0 * m0 {
            contact = Some(r.m);
        }
        if contact.is_none() {
            drift = drift.max((r.mass - m0).abs() / m0);
        }
        growth = growth.max((r.mass - m0) / m0);
    }
    let mut res = CheckResult::at_most(
        "conservation",
        drift,
        1e-10,
        format!(
            "boundary contact at level {}, max growth {growth:.2e} (limit 1e-12), final mass ratio {:.6}",
            contact.map_or_else(|| "none".to_string(), |m| m.to_string()),
            s.mass() / m0
        ),
    );
    res.passed &= growth <= 1e-12;
    Ok(res)
}

/// Transparent run against walls moved far away: the restricted solutions
/// must coincide, and the mass that left through the boundary must equal
/// the mass found outside the domain.
pub fn check_tbc_exactness(p: &Problem, factor: usize) -> Result<(CheckResult, CheckResult)> {
    let levels: Vec<usize> = (0..=p.time.levels()).collect();
    let mut s = SplittingSolver::new(&p.model, &p.mesh, &p.time, &p.psi0, p.options)?;
    let snaps = s.run(&levels)?;
    let ext = run_extended_domain(
        &p.model,
        &p.mesh,
        &p.time,
        &p.psi0,
        p.options,
        ExtendedOptions {
            factor,
            execution: p.options.execution,
        },
        &levels,
    )?;
    let e_c = snaps
        .iter()
        .zip(&ext.snapshots)
        .map(|(a, b)| (&a.psi - &b.psi).iter().map(|v| v.norm()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    let m0 = s.trace()[0].mass.powi(2);
    let mut cum = 0.0;
    let mut worst: f64 = 0.0;
    for (r, tail) in s.trace().iter().zip(&ext.exterior_mass) {
        cum += r.flux_left + r.flux_right;
        worst = worst.max((cum - tail).abs() / m0);
    }
    let exact = CheckResult::at_most(
        "tbc-exactness",
        e_c,
        1e-8,
        format!("padding {} + {} cells, {} levels", ext.pad_left, ext.pad_right, levels.len() - 1),
    );
    let energy = CheckResult::at_most(
        "energy-identity",
        worst,
        1e-8,
        format!("exterior mass at the end {:.5e}, outflow {:.5e}", ext.exterior_mass.last().unwrap_or(&0.0), cum),
    );
    Ok((exact, energy))
}

fn random_interior(mesh: &Mesh2d, rng: &mut ChaCha8Rng, rows: std::ops::RangeInclusive<usize>) -> Array2<C64> {
    let mut a = mesh.zeros();
    for j in rows {
        for k in 1..mesh.ny() {
            a[[j, k]] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    a
}

/// `Im sum (S Phi, s_t Phi) tau >= -1e-10` for random boundary histories,
/// mode by mode, with the kernels of the right boundary of `p`.
pub fn check_positivity(p: &Problem, trials: usize, levels: usize, seed: u64) -> Result<CheckResult> {
    let coeffs = sample_coefficients(&p.model, &p.mesh)?;
    let a = coeffs.asymptotics;
    let basis = SpectralBasis::new(&p.mesh.y)?;
    let tau = p.time.step(1);
    let bp = BoundaryParams {
        hbar: coeffs.hbar,
        rho: a.rho,
        b1: a.b1,
        b2: a.b2,
        v_inf: a.v,
        h: p.mesh.x.step(p.mesh.nx()),
        tau,
    };
    let set = KernelSet::build(&bp, &basis, levels, p.options.execution, Some(KernelCache::global()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ky = p.mesh.ny();
    let mut worst = f64::INFINITY;
    for _ in 0..trials {
        let phi: Vec<Vec<C64>> = (0..=levels)
            .map(|m| {
                (0..=ky)
                    .map(|k| {
                        if m == 0 || k == 0 || k == ky {
                            C64::new(0.0, 0.0)
                        } else {
                            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                        }
                    })
                    .collect()
            })
            .collect();
        let modes = check_positivity_modes(&phi, &set, &basis, tau)?;
        worst = worst.min(modes.iter().copied().fold(f64::INFINITY, f64::min));
    }
    Ok(CheckResult {
        name: "positivity".into(),
        passed: worst >= -1e-10,
        value: worst,
        tolerance: -1e-10,
        detail: format!("smallest per-mode sum over {trials} random histories of {levels} levels; must stay above the bound"),
    })
}

/// Splitting steps against `E (CN with V~) E` from random states.
pub fn check_factorization(p: &Problem, steps: usize, seed: u64) -> Result<CheckResult> {
    let coeffs = sample_coefficients(&p.model, &p.mesh)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nx = p.mesh.nx();
    let psi = WaveField::from_array(random_interior(&p.mesh, &mut rng, 1..=nx - 1));
    let mut worst: f64 = 0.0;
    for options in [p.options, p.options.with_propagator(other_variant(p.options))] {
        worst = worst.max(check_factorized_forms(&coeffs, &p.mesh, &p.time, &psi, options, steps)?);
    }
    Ok(CheckResult::at_most(
        "factorization",
        worst,
        1e-13,
        format!("{steps} steps from a random state, both propagator variants"),
    ))
}

fn other_variant(o: SolverOptions) -> schrostrip::model::PropagatorVariant {
    use schrostrip::model::PropagatorVariant::*;
    match o.propagator {
        Cayley => Exponential,
        Exponential => Cayley,
    }
}

/// With random forcing supported away from the transparent rows,
/// `max_m ||sqrt(rho) Psi^m|| <= ||sqrt(rho) Psi^0|| + (2/hbar) sum_m ||F^m / sqrt(rho)|| tau`.
/// Returns the largest ratio of the left side to the right side over the trials.
pub fn check_forcing_stability(p: &Problem, trials: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nx = p.mesh.nx();
    let first = if p.options.left == BoundaryKind::Transparent { 2 } else { 1 };
    let last = if p.options.right == BoundaryKind::Transparent { nx - 2 } else { nx - 1 };
    let closure = p.options.closure();
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..trials {
        let mut s = SplittingSolver::new(&p.model, &p.mesh, &p.time, &p.psi0, p.options)?;
        let rho = s.coefficients().rho.clone();
        let inv_rho = rho.mapv(|r| 1.0 / r);
        let hbar = s.coefficients().hbar;
        let amplitude = rng.gen_range(0.1..100.0);
        let mut bound = s.mass();
        let mut peak = s.mass();
        for m in 1..=p.time.levels() {
            let f = random_interior(&p.mesh, &mut rng, first..=last) * C64::new(amplitude, 0.0);
            bound += 2.0 / hbar * p.mesh.weighted_norm(&f, &inv_rho, closure) * p.time.step(m);
            s.step(Some(&f))?;
            peak = peak.max(s.mass());
        }
        let ratio = peak / bound;
        worst = worst.max(ratio);
        if ratio > 1.0 {
            failures += 1;
        }
    }
    Ok(CheckResult {
        name: "forcing-stability".into(),
        passed: failures == 0,
        value: worst,
        tolerance: 1.0,
        detail: format!("{}/{trials} trials within the bound", trials - failures),
    })
}

/// The `verify` suite on a configured problem.
pub fn verify_suite(p: &Problem) -> Result<Vec<CheckResult>> {
    let mut out = vec![check_conservation(p)?];
    if p.options.left == BoundaryKind::Transparent || p.options.right == BoundaryKind::Transparent {
        let (exact, energy) = check_tbc_exactness(p, 4)?;
        out.push(exact);
        out.push(energy);
        out.push(check_positivity(p, 200, p.time.levels().min(32), 1)?);
    }
    out.push(check_factorization(p, p.time.levels().min(10), 2)?);
    Ok(out)
}
