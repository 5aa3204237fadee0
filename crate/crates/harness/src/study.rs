//! Single runs, refinement studies and the comparison of splitting potentials.

use crate::config::{SolverConfig, VTildeChoice};
use crate::error::{HarnessError, Result};
use crate::norms::{error_norms, ErrorNorms};
use schrostrip::mesh::Mesh2d;
use schrostrip::splitting::{Snapshot, SplittingSolver, TraceRecord};
use std::fmt::Write as _;
use std::time::Duration;

/// Result of one simulation.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub mesh: Mesh2d,
    pub snapshots: Vec<Snapshot>,
    pub trace: Vec<TraceRecord>,
    /// Time spent stepping, excluding setup and kernel construction.
    pub runtime: Duration,
    pub truncated_amplitude: f64,
}

pub fn simulate(cfg: &SolverConfig) -> Result<RunOutput> {
    let p = cfg.build()?;
    let mut solver = SplittingSolver::new(&p.model, &p.mesh, &p.time, &p.psi0, p.options)?;
    let snapshots = solver.run(&p.snapshot_levels)?;
    Ok(RunOutput {
        mesh: p.mesh,
        snapshots,
        trace: solver.trace().to_vec(),
        runtime: solver.runtime(),
        truncated_amplitude: solver.truncated_amplitude(),
    })
}

/// Refinement direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    J,
    K,
    M,
}

impl std::str::FromStr for Axis {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "J" => Ok(Axis::J),
            "K" => Ok(Axis::K),
            "M" => Ok(Axis::M),
            _ => Err(HarnessError::config(format!("unknown axis `{s}`; expected J, K or M"))),
        }
    }
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Axis::J => "J",
            Axis::K => "K",
            Axis::M => "M",
        })
    }
}

/// `cfg` with `axis` multiplied by `2^r`; snapshot levels follow `M`.
pub fn refined(cfg: &SolverConfig, axis: Axis, r: u32) -> SolverConfig {
    let f = 1usize << r;
    let mut c = cfg.clone();
    c.output.snapshots = cfg.snapshot_levels();
    match axis {
        Axis::J => c.mesh.j *= f,
        Axis::K => c.mesh.k *= f,
        Axis::M => {
            c.mesh.m *= f;
            c.output.snapshots.iter_mut().for_each(|s| *s *= f);
        }
    }
    c
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub j: usize,
    pub k: usize,
    pub m: usize,
    /// Errors against the finest level; absent on the finest row.
    pub errors: Option<ErrorNorms>,
    pub ratio_c: Option<f64>,
    pub ratio_l2: Option<f64>,
    pub runtime: Duration,
    pub runtime_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub axis: Axis,
    pub rows: Vec<ConvergenceRow>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.5e}"))
}

impl ConvergenceReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("J,K,M,E_C,E_L2,E_C_rel,E_L2_rel,R_C,R_L2,runtime_s,runtime_ratio\n");
        for r in &self.rows {
            let e = r.errors;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{:.5e},{}",
                r.j,
                r.k,
                r.m,
                fmt_opt(e.map(|e| e.c)),
                fmt_opt(e.map(|e| e.l2)),
                fmt_opt(e.and_then(|e| e.c_rel)),
                fmt_opt(e.and_then(|e| e.l2_rel)),
                fmt_opt(r.ratio_c),
                fmt_opt(r.ratio_l2),
                r.runtime.as_secs_f64(),
                fmt_opt(r.runtime_ratio)
            );
        }
        s
    }

    pub fn to_table(&self) -> String {
        let fixed = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"));
        let mut s = format!(
            "{:>6} {:>5} {:>6} {:>12} {:>12} {:>7} {:>7} {:>11} {:>7}\n",
            "J", "K", "M", "E_C", "E_L2", "R_C", "R_L2", "runtime_s", "R_t"
        );
        for r in &self.rows {
            let e = r.errors;
            let _ = writeln!(
                s,
                "{:>6} {:>5} {:>6} {:>12} {:>12} {:>7} {:>7} {:>11.5e} {:>7}",
                r.j,
                r.k,
                r.m,
                fmt_opt(e.map(|e| e.c)),
                fmt_opt(e.map(|e| e.l2)),
                fixed(r.ratio_c),
                fixed(r.ratio_l2),
                r.runtime.as_secs_f64(),
                fixed(r.runtime_ratio)
            );
        }
        s
    }
}

fn max_over_snapshots(run: &RunOutput, reference: &RunOutput, levels: &[usize], ref_levels: &[usize]) -> Result<ErrorNorms> {
    fn find(o: &RunOutput, m: usize) -> Result<&Snapshot> {
        o.snapshots
            .iter()
            .find(|s| s.m == m)
            .ok_or_else(|| HarnessError::config(format!("missing snapshot at level {m}")))
    }
    let mut acc: Option<ErrorNorms> = None;
    for (&a, &b) in levels.iter().zip(ref_levels) {
        let e = error_norms(&find(run, a)?.psi, &run.mesh, &find(reference, b)?.psi, &reference.mesh)?;
        acc = Some(acc.map_or(e, |x| x.max(e)));
    }
    acc.ok_or_else(|| HarnessError::config("no snapshot levels to compare"))
}

/// Runs `levels` successive doublings along `axis` and compares every level
/// with the finest one at the snapshot times.
pub fn convergence_study(base: &SolverConfig, axis: Axis, levels: u32) -> Result<ConvergenceReport> {
    if levels < 2 {
        return Err(HarnessError::config("a convergence study needs at least 2 levels"));
    }
    base.validate()?;
    let cfgs: Vec<SolverConfig> = (0..levels).map(|r| refined(base, axis, r)).collect();
    let runs = cfgs.iter().map(simulate).collect::<Result<Vec<_>>>()?;
    let finest = runs.last().expect("levels >= 2");
    let fine_levels = cfgs.last().expect("levels >= 2").snapshot_levels();
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for (i, (cfg, run)) in cfgs.iter().zip(&runs).enumerate() {
        let errors = if i + 1 < runs.len() {
            Some(max_over_snapshots(run, finest, &cfg.snapshot_levels(), &fine_levels)?)
        } else {
            None
        };
        let prev = rows.last();
        let ratio = |f: fn(&ErrorNorms) -> f64| match (prev.and_then(|p| p.errors), errors) {
            (Some(a), Some(b)) if f(&b) > 0.0 => Some(f(&a) / f(&b)),
            _ => None,
        };
        let runtime_ratio = prev.map(|p| run.runtime.as_secs_f64() / p.runtime.as_secs_f64());
        rows.push(ConvergenceRow {
            j: cfg.mesh.j,
            k: cfg.mesh.k,
            m: cfg.mesh.m,
            errors,
            ratio_c: ratio(|e| e.c),
            ratio_l2: ratio(|e| e.l2),
            runtime: run.runtime,
            runtime_ratio,
        });
    }
    Ok(ConvergenceReport { axis, rows })
}

/// Stepping time per refinement level along `axis`, best of `repeats`.
pub fn runtime_study(base: &SolverConfig, axis: Axis, levels: u32, repeats: usize) -> Result<Vec<(SolverConfig, Duration)>> {
    let mut rows: Vec<(SolverConfig, Duration)> = (0..levels)
        .map(|r| {
            let mut cfg = refined(base, axis, r);
            cfg.output.snapshots = vec![cfg.mesh.m];
            (cfg, Duration::MAX)
        })
        .collect();
    // Round-robin so that a slow stretch of the machine hits every level.
    for _ in 0..repeats.max(1) {
        for (cfg, best) in rows.iter_mut() {
            *best = (*best).min(simulate(cfg)?.runtime);
        }
    }
    Ok(rows)
}

/// Effect of the splitting potential on the error against a pseudo-exact
/// solution computed with every mesh size doubled.
#[derive(Debug, Clone, PartialEq)]
pub struct VTildeComparison {
    /// Errors with `V~ = 0`.
    pub zero: ErrorNorms,
    /// Errors with `V~ = Q chi`.
    pub slab: ErrorNorms,
    /// Distance between the two solutions.
    pub between: ErrorNorms,
    /// `(E_zero / E_slab - 1) * 100`, absent when `E_slab = 0`.
    pub p_c: Option<f64>,
    pub p_l2: Option<f64>,
}

pub fn vtilde_comparison(cfg: &SolverConfig) -> Result<VTildeComparison> {
    let with = |v: VTildeChoice| {
        let mut c = cfg.clone();
        c.barrier.v_tilde = v;
        c.output.snapshots = cfg.snapshot_levels();
        c
    };
    let zero_cfg = with(VTildeChoice::Zero);
    let slab_cfg = with(VTildeChoice::Slab);
    let fine_cfg = refined(&refined(&refined(&zero_cfg, Axis::J, 1), Axis::K, 1), Axis::M, 1);
    let zero = simulate(&zero_cfg)?;
    let slab = simulate(&slab_cfg)?;
    let fine = simulate(&fine_cfg)?;
    let levels = zero_cfg.snapshot_levels();
    let fine_levels = fine_cfg.snapshot_levels();
    let e_zero = max_over_snapshots(&zero, &fine, &levels, &fine_levels)?;
    let e_slab = max_over_snapshots(&slab, &fine, &levels, &fine_levels)?;
    let between = max_over_snapshots(&zero, &slab, &levels, &levels)?;
    let pct = |a: f64, b: f64| (b > 0.0).then(|| (a / b - 1.0) * 100.0);
    Ok(VTildeComparison {
        zero: e_zero,
        slab: e_slab,
        between,
        p_c: pct(e_zero.c, e_slab.c),
        p_l2: pct(e_zero.l2, e_slab.l2),
    })
}
