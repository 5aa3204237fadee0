//! Command-line front end: `run`, `converge`, `vtilde`, `kernels`, `verify`.
//!
//! Exit codes: 0 success, 2 invalid input (bad or missing config, unknown
//! keys, bad arguments), 3 numerical failure or a failed verification.

use clap::{Parser, Subcommand, ValueEnum};
use harness::config::OutputFormat;
use harness::export::{write_csv, write_raw, write_trace_csv, SnapshotMeta};
use harness::study::{convergence_study, simulate, vtilde_comparison, Axis};
use harness::verify::verify_suite;
use harness::{HarnessError, SolverConfig};
use schrostrip::model::sample_coefficients;
use schrostrip::spectral::SpectralBasis;
use schrostrip::tbc::{write_kernels_binary, write_kernels_csv, BoundaryParams, KernelCache, KernelSet};
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "schrostrip", version, about = "Schrodinger equation on a strip with discrete transparent boundaries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct ConfigArgs {
    /// Configuration file (`key = value` with `[sections]`).
    #[arg(long, short)]
    config: PathBuf,
    /// Override a key, e.g. `--set mesh.j=600`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<SolverConfig, HarnessError> {
        let cfg = SolverConfig::load(&self.config, &self.overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KernelFormat {
    Csv,
    Raw,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SideArg {
    Left,
    Right,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one simulation and write snapshots and the mass/flux trace.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Refinement study along one axis against the finest level.
    Converge {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value = "J")]
        axis: String,
        /// Number of meshes, each twice as fine as the previous one.
        #[arg(long, default_value_t = 4)]
        levels: u32,
    },
    /// Errors with the zero and the slab splitting potential.
    Vtilde {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Write the boundary convolution kernels of every y-mode.
    Kernels {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_enum, default_value = "csv")]
        format: KernelFormat,
        #[arg(long, value_enum, default_value = "right")]
        side: SideArg,
        /// Output file; defaults to `kernels.csv` / `kernels.qkrn` in the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Conservation, transparency, positivity and factorization checks.
    Verify {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

/// Parses `args` (program name first) and runs the command.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32, HarnessError> {
    match cmd {
        Command::Run { cfg } => run(&cfg.load()?),
        Command::Converge { cfg, axis, levels } => {
            let c = cfg.load()?;
            let axis: Axis = axis.parse()?;
            let rep = convergence_study(&c, axis, levels)?;
            print!("{}", rep.to_table());
            let path = c.output.dir.join(format!("convergence_{axis}.csv"));
            write_text(&path, &rep.to_csv())?;
            println!("wrote {}", path.display());
            Ok(0)
        }
        Command::Vtilde { cfg } => {
            let c = cfg.load()?;
            let v = vtilde_comparison(&c)?;
            let pct = |p: Option<f64>| p.map_or_else(|| "-".to_string(), |x| format!("{x:.3}%"));
            println!("V~ = 0:     E_C {:.5e}  E_L2 {:.5e}", v.zero.c, v.zero.l2);
            println!("V~ = Q chi: E_C {:.5e}  E_L2 {:.5e}", v.slab.c, v.slab.l2);
            println!("P_C {}  P_L2 {}", pct(v.p_c), pct(v.p_l2));
            println!("difference between the two solutions: C {:.5e}  L2 {:.5e}", v.between.c, v.between.l2);
            Ok(0)
        }
        Command::Kernels { cfg, format, side, out } => {
            let c = cfg.load()?;
            kernels(&c, format, side, out)
        }
        Command::Verify { cfg } => {
            let c = cfg.load()?;
            let results = verify_suite(&c.build()?)?;
            for r in &results {
                println!("{r}");
            }
            Ok(if results.iter().all(|r| r.passed) { 0 } else { 3 })
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    if let Some(d) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(d).map_err(|e| HarnessError::Io {
            path: d.display().to_string(),
            source: e,
        })?;
    }
    std::fs::write(path, text).map_err(|e| HarnessError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn run(c: &SolverConfig) -> Result<i32, HarnessError> {
    let out = simulate(c)?;
    let dir = &c.output.dir;
    let (csv, raw) = match c.output.format {
        OutputFormat::Csv => (true, false),
        OutputFormat::Raw => (false, true),
        OutputFormat::Both => (true, true),
        OutputFormat::None => (false, false),
    };
    for s in &out.snapshots {
        if csv {
            write_csv(&dir.join(format!("snapshot_{:06}.csv", s.m)), &s.psi, &out.mesh)?;
        }
        if raw {
            let meta = SnapshotMeta {
                j: c.mesh.j,
                k: c.mesh.k,
                m_total: c.mesh.m,
                m: s.m,
            };
            write_raw(&dir.join(format!("snapshot_{:06}.qstr", s.m)), &s.psi, meta)?;
        }
    }
    if c.output.format != OutputFormat::None {
        write_trace_csv(&dir.join("trace.csv"), &out.trace)?;
    }
    let first = out.trace.first().map_or(0.0, |r| r.mass);
    let last = out.trace.last().map_or(0.0, |r| r.mass);
    println!(
        "J={} K={} M={}: stepping {:.3} s, mass {:.6e} -> {:.6e}, {} snapshots in {}",
        c.mesh.j,
        c.mesh.k,
        c.mesh.m,
        out.runtime.as_secs_f64(),
        first,
        last,
        out.snapshots.len(),
        dir.display()
    );
    if out.truncated_amplitude > 1e-8 {
        eprintln!(
            "warning: initial data of modulus up to {:.3e} was cut at the boundary rows",
            out.truncated_amplitude
        );
    }
    Ok(0)
}

fn kernels(c: &SolverConfig, format: KernelFormat, side: SideArg, out: Option<PathBuf>) -> Result<i32, HarnessError> {
    let p = c.build()?;
    let coeffs = sample_coefficients(&p.model, &p.mesh)?;
    let a = coeffs.asymptotics;
    let basis = SpectralBasis::new(&p.mesh.y)?;
    let h = match side {
        SideArg::Right => p.mesh.x.step(p.mesh.nx()),
        SideArg::Left => p.mesh.x.step(1),
    };
    let bp = BoundaryParams {
        hbar: coeffs.hbar,
        rho: a.rho,
        b1: a.b1,
        b2: a.b2,
        v_inf: a.v,
        h,
        tau: p.time.step(1),
    };
    let set = KernelSet::build(&bp, &basis, p.time.levels(), p.options.execution, Some(KernelCache::global()))?;
    let path = out.unwrap_or_else(|| {
        c.output.dir.join(match format {
            KernelFormat::Csv => "kernels.csv",
            KernelFormat::Raw => "kernels.qkrn",
        })
    });
    if let Some(d) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(d).map_err(|e| HarnessError::Io {
            path: d.display().to_string(),
            source: e,
        })?;
    }
    match format {
        KernelFormat::Csv => write_kernels_csv(&path, &set)?,
        KernelFormat::Raw => write_kernels_binary(&path, &set)?,
    }
    println!("wrote {} kernels of length {} to {}", set.modes(), set.m_max + 1, path.display());
    Ok(0)
}
