//! Experiment configuration: a plain-text `key = value` file with sections.
//!
//! ```text
//! [mesh]
//! j = 300
//! k = 32
//! ```
//!
//! Values use TOML syntax, so strings are quoted. Unknown sections or keys
//! are rejected with the offending line.

use crate::error::{HarnessError, Result};
use schrostrip::mesh::{Mesh2d, TimeMesh};
use schrostrip::model::{gaussian_packet, Barrier, PhysicalModel, PropagatorVariant, WaveField};
use schrostrip::parallel::Execution;
use schrostrip::splitting::SolverOptions;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StripKind {
    /// Wall at `x = 0`, transparent boundary at `x = X`.
    SemiInfinite,
    /// Transparent boundaries at both ends.
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VTildeChoice {
    Zero,
    /// `Q` times the indicator of the barrier's x-interval.
    Slab,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropagatorChoice {
    Cayley,
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExecutionChoice {
    Parallel,
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Raw,
    Both,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainSection {
    pub x_len: f64,
    pub y_len: f64,
    pub strip: StripKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshSection {
    pub j: usize,
    pub k: usize,
    pub m: usize,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsSection {
    pub hbar: f64,
    pub rho: f64,
    pub b1: f64,
    pub b2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BarrierSection {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub q: f64,
    pub v_tilde: VTildeChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PacketSection {
    pub k: f64,
    pub alpha: f64,
    pub x0: f64,
    pub y0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplittingSection {
    pub propagator: PropagatorChoice,
    pub execution: ExecutionChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub format: OutputFormat,
    /// Snapshot levels; empty means 0.3, 0.5, 0.7 and 1.0 of `M`.
    pub snapshots: Vec<usize>,
}

/// Everything needed to set up one simulation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub domain: DomainSection,
    pub mesh: MeshSection,
    pub physics: PhysicsSection,
    pub barrier: BarrierSection,
    pub packet: PacketSection,
    pub splitting: SplittingSection,
    pub output: OutputSection,
}

impl Default for DomainSection {
    fn default() -> Self {
        Self {
            x_len: 3.0,
            y_len: 2.8,
            strip: StripKind::SemiInfinite,
        }
    }
}

impl Default for MeshSection {
    fn default() -> Self {
        Self {
            j: 300,
            k: 32,
            m: 150,
            t_end: 0.027,
        }
    }
}

impl Default for PhysicsSection {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            rho: 1.0,
            b1: 2.0,
            b2: 2.0,
        }
    }
}

impl Default for BarrierSection {
    fn default() -> Self {
        Self {
            a: 1.6,
            b: 1.7,
            c: 0.7,
            d: 2.1,
            q: 0.0,
            v_tilde: VTildeChoice::Zero,
        }
    }
}

impl Default for PacketSection {
    fn default() -> Self {
        Self {
            k: 30.0,
            alpha: 1.0 / 120.0,
            x0: 1.0,
            y0: 1.4,
        }
    }
}

impl Default for SplittingSection {
    fn default() -> Self {
        Self {
            propagator: PropagatorChoice::Cayley,
            execution: ExecutionChoice::Parallel,
        }
    }
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            format: OutputFormat::Csv,
            snapshots: Vec::new(),
        }
    }
}

/// A configured problem, ready for the solvers.
#[derive(Debug, Clone)]
pub struct Problem {
    pub model: PhysicalModel,
    pub mesh: Mesh2d,
    pub time: TimeMesh,
    pub psi0: WaveField,
    pub options: SolverOptions,
    pub snapshot_levels: Vec<usize>,
}

impl SolverConfig {
    pub fn from_str_with(text: &str, overrides: &[String]) -> Result<Self> {
        let cfg: SolverConfig = toml::from_str(text).map_err(|e| HarnessError::config(e.to_string()))?;
        if overrides.is_empty() {
            return Ok(cfg);
        }
        let mut table: toml::Table = toml::from_str(text).map_err(|e| HarnessError::config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::config(format!("in --set overrides: {}", e.message())))
    }

    /// Reads a config file, then applies `section.key=value` overrides.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_str_with(&text, overrides).map_err(|e| match e {
            HarnessError::Config(m) => HarnessError::config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn barrier(&self) -> Result<Barrier> {
        let b = &self.barrier;
        Ok(Barrier::new(b.a, b.b, b.c, b.d, b.q)?)
    }

    /// Snapshot levels: explicit ones, or the default milestones.
    pub fn snapshot_levels(&self) -> Vec<usize> {
        if !self.output.snapshots.is_empty() {
            return self.output.snapshots.clone();
        }
        default_milestones(self.mesh.m)
    }

    pub fn solver_options(&self) -> SolverOptions {
        let base = match self.domain.strip {
            StripKind::SemiInfinite => SolverOptions::default(),
            StripKind::Infinite => SolverOptions::infinite_strip(),
        };
        base.with_execution(match self.splitting.execution {
            ExecutionChoice::Parallel => Execution::Parallel,
            ExecutionChoice::Sequential => Execution::Sequential,
        })
        .with_propagator(match self.splitting.propagator {
            PropagatorChoice::Cayley => PropagatorVariant::Cayley,
            PropagatorChoice::Exponential => PropagatorVariant::Exponential,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.domain;
        let m = &self.mesh;
        let positive = [
            ("domain.x_len", d.x_len),
            ("domain.y_len", d.y_len),
            ("mesh.t_end", m.t_end),
            ("physics.hbar", self.physics.hbar),
            ("physics.rho", self.physics.rho),
            ("physics.b1", self.physics.b1),
            ("physics.b2", self.physics.b2),
            ("packet.alpha", self.packet.alpha),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(HarnessError::config(format!("{name} must be positive, got {v}")));
            }
        }
        if m.j < 4 {
            return Err(HarnessError::config(format!("mesh.j must be at least 4, got {}", m.j)));
        }
        if m.k < 2 {
            return Err(HarnessError::config(format!("mesh.k must be at least 2, got {}", m.k)));
        }
        if m.m == 0 {
            return Err(HarnessError::config("mesh.m must be positive"));
        }
        if let Some(&s) = self.output.snapshots.iter().find(|&&s| s > m.m) {
            return Err(HarnessError::config(format!(
                "snapshot level {s} exceeds mesh.m = {}",
                m.m
            )));
        }
        let barrier = self.barrier()?;
        if barrier.q > 0.0 {
            barrier.check_inside(d.x_len, d.y_len)?;
            // The potential must vanish on the two rows next to each
            // transparent end.
            let h = d.x_len / m.j as f64;
            if barrier.b > d.x_len - 2.0 * h {
                return Err(HarnessError::config(format!(
                    "barrier end b = {} must not exceed x_(J-2) = {}",
                    barrier.b,
                    d.x_len - 2.0 * h
                )));
            }
            if d.strip == StripKind::Infinite && barrier.a < 2.0 * h {
                return Err(HarnessError::config(format!(
                    "barrier start a = {} must not precede x_2 = {}",
                    barrier.a,
                    2.0 * h
                )));
            }
        }
        Ok(())
    }

    pub fn model(&self) -> Result<PhysicalModel> {
        let p = &self.physics;
        let base = PhysicalModel::constant(p.hbar, p.rho, p.b1, p.b2);
        let barrier = self.barrier()?;
        if barrier.q == 0.0 {
            return Ok(base);
        }
        let model = base.with_barrier(&barrier);
        Ok(match self.barrier.v_tilde {
            VTildeChoice::Zero => model,
            VTildeChoice::Slab => model.with_v_tilde(Arc::new(move |x| barrier.slab(x))),
        })
    }

    pub fn build(&self) -> Result<Problem> {
        self.validate()?;
        let d = &self.domain;
        let m = &self.mesh;
        let mesh = Mesh2d::uniform(d.x_len, m.j, d.y_len, m.k)?;
        let time = TimeMesh::uniform(m.t_end, m.m)?;
        let p = &self.packet;
        let psi0 = gaussian_packet(&mesh, p.k, p.alpha, p.x0, p.y0);
        Ok(Problem {
            model: self.model()?,
            mesh,
            time,
            psi0,
            options: self.solver_options(),
            snapshot_levels: self.snapshot_levels(),
        })
    }
}

/// Levels `0.3 M`, `0.5 M`, `0.7 M`, `M`, rounded to the nearest level.
pub fn default_milestones(m: usize) -> Vec<usize> {
    let mut out: Vec<usize> = [3, 5, 7, 10]
        .iter()
        .map(|&n| ((n * m) as f64 / 10.0).round() as usize)
        .filter(|&l| l > 0)
        .collect();
    out.dedup();
    out
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| HarnessError::config(format!("override `{spec}` is not of the form section.key=value")))?;
    let (section, key) = path
        .trim()
        .split_once('.')
        .ok_or_else(|| HarnessError::config(format!("override key `{path}` must be section.key")))?;
    let raw = raw.trim();
    // Bare words are taken as strings so `--set domain.strip=infinite` works.
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    match entry {
        toml::Value::Table(t) => {
            t.insert(key.to_string(), value);
            Ok(())
        }
        _ => Err(HarnessError::config(format!("`{section}` is not a section"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = SolverConfig::from_str_with("", &[]).unwrap();
        assert_eq!(c, SolverConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn unknown_key_names_its_line() {
        let text = "[mesh]\nj = 100\nsteps = 4\n";
        let err = SolverConfig::from_str_with(text, &[]).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        assert!(err.contains("steps"), "{err}");
    }

    #[test]
    fn unknown_section_is_rejected() {
        let err = SolverConfig::from_str_with("[meshes]\nj = 1\n", &[]).unwrap_err();
        assert!(err.to_string().contains("meshes"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn overrides_take_precedence() {
        let text = "[mesh]\nj = 100\n";
        let c = SolverConfig::from_str_with(
            text,
            &["mesh.j=64".into(), "domain.strip=infinite".into(), "barrier.q = 1500".into()],
        )
        .unwrap();
        assert_eq!(c.mesh.j, 64);
        assert_eq!(c.domain.strip, StripKind::Infinite);
        assert_eq!(c.barrier.q, 1500.0);
        assert!(SolverConfig::from_str_with(text, &["mesh.jj=3".into()]).is_err());
        assert!(SolverConfig::from_str_with(text, &["nodot=3".into()]).is_err());
    }

    #[test]
    fn round_trips_through_text() {
        let mut c = SolverConfig::default();
        c.barrier.q = 4000.0;
        c.output.snapshots = vec![10, 20];
        let back = SolverConfig::from_str_with(&c.to_toml(), &[]).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn validation_catches_bad_geometry() {
        let mut c = SolverConfig::default();
        c.barrier.q = 100.0;
        c.barrier.b = 2.995;
        c.barrier.a = 2.9;
        assert!(c.validate().is_err());
        let mut c = SolverConfig::default();
        c.mesh.k = 1;
        assert!(c.validate().is_err());
        let mut c = SolverConfig::default();
        c.output.snapshots = vec![151];
        assert!(c.validate().is_err());
    }

    #[test]
    fn milestones_scale_with_m() {
        assert_eq!(default_milestones(600), vec![180, 300, 420, 600]);
        assert_eq!(default_milestones(150), vec![45, 75, 105, 150]);
    }
}
