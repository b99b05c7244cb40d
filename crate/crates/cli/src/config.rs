//! Run configuration: a TOML file with one level of sections, overridden by flags.

use std::path::{Path, PathBuf};

use beltrami_core::conditions::AuditConfig;
use beltrami_core::{Error, Result, SolverConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SolveMode {
    Linear,
    Quasilinear,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Subcommand)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Audit the coefficient hypotheses against majorants Q and Q1.
    Analyze,
    /// Solve the equation and write an archive with the ladder trace.
    Solve,
    /// Check a solution archive.
    Verify,
    /// Recompute the worked example end to end.
    Example,
    /// List built-in coefficient specs.
    Catalog,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Majorants {
    /// Majorant of the maximal dilatation; defaults to the sampled supremum.
    pub q: Option<String>,
    /// Majorant of the tangential dilatation at every probe; defaults to `q`.
    pub q1: Option<String>,
    /// Probe centres as `[re, im]`.
    pub z0: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyOptions {
    /// Inverse-dilatation exponent, `1 < p <= 2`.
    pub p: f64,
    pub image_grid: usize,
    /// Distance of the continuity compact from the support boundary.
    pub margin: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { p: 2.0, image_grid: 128, margin: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExampleOptions {
    /// Grid used by the example's solve step.
    pub grid: usize,
}

impl Default for ExampleOptions {
    fn default() -> Self {
        Self { grid: 128 }
    }
}

/// Everything a command needs; the file form omits `command`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip)]
    pub command: Option<Command>,
    /// Catalog name or path to a spec file.
    pub spec: Option<String>,
    pub params: Vec<f64>,
    pub out: PathBuf,
    pub format: Format,
    pub mode: SolveMode,
    /// Archive read by `verify`; `<out>/archive` when absent.
    pub archive: Option<PathBuf>,
    pub solver: SolverConfig,
    pub audit: AuditConfig,
    pub majorants: Majorants,
    pub verify: VerifyOptions,
    pub example: ExampleOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            spec: None,
            params: Vec::new(),
            out: PathBuf::from("beltrami-out"),
            format: Format::Json,
            mode: SolveMode::Auto,
            archive: None,
            solver: SolverConfig::default(),
            audit: AuditConfig::default(),
            majorants: Majorants::default(),
            verify: VerifyOptions::default(),
            example: ExampleOptions::default(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "beltrami-lab", version, about = "Solve and audit quasilinear Beltrami equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Default, Args)]
pub struct Flags {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Catalog name or spec file path.
    #[arg(long, global = true)]
    pub spec: Option<String>,
    /// Catalog parameters, comma separated.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    pub params: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Half-width L of the computational box [-L, L]^2.
    #[arg(long = "box", global = true)]
    pub half_width: Option<f64>,
    /// Truncation thresholds, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub ladder: Option<Vec<u32>>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<SolveMode>,
    #[arg(long, global = true)]
    pub archive: Option<PathBuf>,
    /// Majorant Q(z) of the maximal dilatation.
    #[arg(long, global = true)]
    pub q: Option<String>,
    /// Majorant Q1(z) of the tangential dilatation.
    #[arg(long, global = true)]
    pub q1: Option<String>,
    /// Probe centre `re,im`; repeatable.
    #[arg(long, global = true)]
    pub z0: Vec<String>,
    /// Largest |w| sampled by the audit.
    #[arg(long = "w-max", global = true)]
    pub w_max: Option<f64>,
    #[arg(long = "truncation-majorant", global = true)]
    pub truncation_majorant: Option<String>,
    #[arg(long, global = true)]
    pub p: Option<f64>,
    #[arg(long, global = true)]
    pub margin: Option<f64>,
    #[arg(long = "inner-tol", global = true)]
    pub inner_tol: Option<f64>,
    #[arg(long = "residual-tol", global = true)]
    pub residual_tol: Option<f64>,
    #[arg(long = "outer-tol", global = true)]
    pub outer_tol: Option<f64>,
    #[arg(long = "ladder-tol", global = true)]
    pub ladder_tol: Option<f64>,
    #[arg(long = "max-inner", global = true)]
    pub max_inner: Option<usize>,
    #[arg(long = "max-outer", global = true)]
    pub max_outer: Option<usize>,
    #[arg(long = "compact-margins", global = true, value_delimiter = ',')]
    pub compact_margins: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub damping: Option<f64>,
    #[arg(long = "circle-nodes", global = true)]
    pub circle_nodes: Option<usize>,
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    #[arg(long = "divergence-ladder", global = true, value_delimiter = ',')]
    pub divergence_ladder: Option<Vec<f64>>,
    #[arg(long = "fmo-ladder", global = true, value_delimiter = ',')]
    pub fmo_ladder: Option<Vec<f64>>,
    #[arg(long = "z-samples", global = true)]
    pub z_samples: Option<usize>,
    #[arg(long = "domain-radius", global = true)]
    pub domain_radius: Option<f64>,
    #[arg(long = "w-phases", global = true)]
    pub w_phases: Option<usize>,
    #[arg(long, global = true)]
    pub thetas: Option<usize>,
    #[arg(long = "image-grid", global = true)]
    pub image_grid: Option<usize>,
    /// Grid of the example's solve step only.
    #[arg(long = "example-grid", global = true)]
    pub example_grid: Option<usize>,
}

fn parse_point(text: &str) -> Result<[f64; 2]> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let bad = || Error::ParamOutOfRange(format!("point `{text}` must be `re,im`"));
    match parts.as_slice() {
        [re, im] => Ok([re.parse().map_err(|_| bad())?, im.parse().map_err(|_| bad())?]),
        [re] => Ok([re.parse().map_err(|_| bad())?, 0.0]),
        _ => Err(bad()),
    }
}

impl RunConfig {
    pub fn parse_file(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn load_file(path: &Path) -> Result<Self> {
        Self::parse_file(&std::fs::read_to_string(path)?)
    }

    /// File values (if any) with flags applied on top, then validated.
    pub fn from_cli(cli: Cli) -> Result<Self> {
        let f = cli.flags;
        let mut cfg = match &f.config {
            Some(path) => Self::load_file(path)?,
            None => Self::default(),
        };
        cfg.command = Some(cli.command);
        if let Some(v) = f.spec {
            cfg.spec = Some(v);
        }
        if let Some(v) = f.params {
            cfg.params = v;
        }
        if let Some(v) = f.grid {
            cfg.solver.grid = v;
            cfg.example.grid = v;
        }
        if let Some(v) = f.half_width {
            cfg.solver.half_width = v;
        }
        if let Some(v) = f.ladder {
            cfg.solver.ladder = v;
        }
        if let Some(v) = f.out {
            cfg.out = v;
        }
        if let Some(v) = f.format {
            cfg.format = v;
        }
        if let Some(v) = f.mode {
            cfg.mode = v;
        }
        if let Some(v) = f.archive {
            cfg.archive = Some(v);
        }
        if let Some(v) = f.q {
            cfg.majorants.q = Some(v);
        }
        if let Some(v) = f.q1 {
            cfg.majorants.q1 = Some(v);
        }
        if !f.z0.is_empty() {
            cfg.majorants.z0 = f.z0.iter().map(|s| parse_point(s)).collect::<Result<_>>()?;
        }
        if let Some(v) = f.w_max {
            cfg.audit.w_max = v;
        }
        if let Some(v) = f.truncation_majorant {
            cfg.solver.truncation_majorant = Some(v);
        }
        if let Some(v) = f.p {
            cfg.verify.p = v;
        }
        if let Some(v) = f.margin {
            cfg.verify.margin = v;
        }
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = f.$flag { cfg.$($field).+ = v; })*
            };
        }
        set! {
            inner_tol => solver.inner_tol,
            residual_tol => solver.residual_tol,
            outer_tol => solver.outer_tol,
            ladder_tol => solver.ladder_tol,
            max_inner => solver.max_inner,
            max_outer => solver.max_outer,
            compact_margins => solver.compact_margins,
            damping => solver.damping,
            circle_nodes => audit.circle_nodes,
            delta => audit.delta,
            divergence_ladder => audit.divergence_ladder,
            fmo_ladder => audit.fmo_ladder,
            z_samples => audit.z_samples,
            w_phases => audit.w_phases,
            thetas => audit.thetas,
            image_grid => verify.image_grid,
            example_grid => example.grid,
        }
        if let Some(v) = f.domain_radius {
            cfg.audit.domain_radius = Some(v);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        let mut ex = self.solver.clone();
        ex.grid = self.example.grid;
        ex.validate()?;
        if !(self.verify.p > 1.0 && self.verify.p <= 2.0) {
            return Err(Error::ParamOutOfRange(format!("p = {} must lie in (1, 2]", self.verify.p)));
        }
        if self.verify.image_grid < 4 {
            return Err(Error::ParamOutOfRange(format!("image_grid = {} must be at least 4", self.verify.image_grid)));
        }
        if !(self.verify.margin > 0.0) {
            return Err(Error::ParamOutOfRange(format!("margin = {} must be positive", self.verify.margin)));
        }
        if !(self.audit.w_max >= 0.0) || self.audit.circle_nodes < 16 || self.audit.z_samples < 2 {
            return Err(Error::ParamOutOfRange("audit: need w_max >= 0, circle_nodes >= 16, z_samples >= 2".into()));
        }
        let needs_spec = matches!(self.command, Some(Command::Analyze) | Some(Command::Solve));
        if needs_spec && self.spec.is_none() {
            return Err(Error::ParamOutOfRange("--spec is required for this command".into()));
        }
        Ok(())
    }

    pub fn probes(&self) -> Vec<Complex64> {
        if self.majorants.z0.is_empty() {
            vec![Complex64::new(0.0, 0.0)]
        } else {
            self.majorants.z0.iter().map(|p| Complex64::new(p[0], p[1])).collect()
        }
    }

    pub fn archive_dir(&self) -> PathBuf {
        self.archive.clone().unwrap_or_else(|| self.out.join("archive"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("beltrami-lab").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "spec = \"constant-disk\"\nparams = [0.5]\n[solver]\ngrid = 64\nhalf_width = 3.0\n")
            .unwrap();
        let cfg = RunConfig::from_cli(cli(&["solve", "--config", path.to_str().unwrap(), "--grid", "32"])).unwrap();
        assert_eq!(cfg.solver.grid, 32);
        assert_eq!(cfg.solver.half_width, 3.0);
        assert_eq!(cfg.params, vec![0.5]);
        assert_eq!(cfg.command, Some(Command::Solve));
    }

    #[test]
    fn flag_lists_and_points() {
        let cfg = RunConfig::from_cli(cli(&[
            "analyze",
            "--spec",
            "constant-disk",
            "--params",
            "0.5",
            "--ladder",
            "2,4",
            "--z0",
            "0.1,-0.2",
            "--z0",
            "0",
        ]))
        .unwrap();
        assert_eq!(cfg.solver.ladder, vec![2, 4]);
        assert_eq!(cfg.probes(), vec![Complex64::new(0.1, -0.2), Complex64::new(0.0, 0.0)]);
        let cfg = RunConfig::from_cli(cli(&[
            "example",
            "--example-grid",
            "64",
            "--max-outer",
            "7",
            "--fmo-ladder",
            "0.1,0.01",
        ]))
        .unwrap();
        assert_eq!((cfg.example.grid, cfg.solver.max_outer), (64, 7));
        assert_eq!(cfg.audit.fmo_ladder, vec![0.1, 0.01]);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::from_cli(cli(&["solve", "--spec", "constant-disk", "--grid", "100"])).is_err());
        assert!(RunConfig::from_cli(cli(&["solve"])).is_err());
        assert!(RunConfig::from_cli(cli(&["verify", "--p", "3"])).is_err());
        assert!(RunConfig::parse_file("bogus = 1").is_err());
    }
}
