use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use dgd_core::problems::{ProblemId, VortexForm};
use dgd_core::residual::FluxMode;
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    VerifyOperators,
    Run,
    Spectra,
    Convergence,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::VerifyOperators => "verify-operators",
            Command::Run => "run",
            Command::Spectra => "spectra",
            Command::Convergence => "convergence",
        }
    }
}

/// Options shared by every command; each may also come from the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// advection | entropy-wave | unsteady-vortex | sod
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Polynomial degree (1-4 in 1D, 1-2 in 2D).
    #[arg(long)]
    pub p: Option<usize>,
    /// Mesh size: K elements in 1D, N x N squares split into triangles in 2D.
    #[arg(long = "N", visible_alias = "K")]
    pub n: Option<usize>,
    /// conservative | stable
    #[arg(long)]
    pub flux: Option<String>,
    #[arg(long)]
    pub cfl: Option<f64>,
    /// Final time.
    #[arg(long = "T")]
    pub final_time: Option<f64>,
    /// Entropy relaxation of the midpoint step (true | false).
    #[arg(long)]
    pub relaxation: Option<bool>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for the random data of the operator checks.
    #[arg(long)]
    pub seed: Option<u64>,
    /// scaled | literal
    #[arg(long)]
    pub vortex_form: Option<String>,
    /// Mesh sequence for convergence studies, e.g. 16,32,64,128.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
}

/// Contents of a config file: flat `key = value` pairs with the flag names.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub command: Option<String>,
    pub problem: Option<String>,
    pub dim: Option<usize>,
    pub p: Option<usize>,
    #[serde(alias = "N", alias = "K")]
    pub n: Option<usize>,
    pub flux: Option<String>,
    pub cfl: Option<f64>,
    #[serde(alias = "T")]
    pub final_time: Option<f64>,
    pub relaxation: Option<bool>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub vortex_form: Option<String>,
    pub sizes: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub problem: ProblemId,
    pub dim: usize,
    pub p: usize,
    pub n: usize,
    pub flux: FluxMode,
    pub cfl: f64,
    pub final_time: f64,
    pub relaxation: bool,
    pub out: PathBuf,
    pub seed: u64,
    pub vortex_form: VortexForm,
    pub sizes: Vec<usize>,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn read_file(path: &Path) -> Result<FileConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
}

fn parse_flux(s: &str) -> Result<FluxMode, ConfigError> {
    match s {
        "conservative" => Ok(FluxMode::Conservative),
        "stable" => Ok(FluxMode::Stable),
        _ => Err(ConfigError(format!("unknown flux '{s}' (conservative, stable)"))),
    }
}

pub fn flux_name(f: FluxMode) -> &'static str {
    match f {
        FluxMode::Conservative => "conservative",
        FluxMode::Stable => "stable",
    }
}

/// Flags override the file; anything still missing takes the per-problem default.
pub fn resolve(command: Command, args: &CommonArgs, file: &FileConfig) -> Result<RunConfig, ConfigError> {
    if let Some(c) = &file.command {
        if c != command.name() {
            return Err(ConfigError(format!("config file is for '{c}', not '{}'", command.name())));
        }
    }
    let default_problem = match command {
        Command::Convergence => ProblemId::Advection,
        Command::VerifyOperators => ProblemId::Advection,
        _ => ProblemId::UnsteadyVortex,
    };
    let problem = match args.problem.as_ref().or(file.problem.as_ref()) {
        Some(s) => s.parse::<ProblemId>().map_err(ConfigError)?,
        None => default_problem,
    };
    let dim = args.dim.or(file.dim).unwrap_or(match command {
        Command::VerifyOperators => 1,
        _ => problem.default_dim(),
    });
    if dim != 1 && dim != 2 {
        return Err(ConfigError(format!("dimension must be 1 or 2, got {dim}")));
    }
    if command != Command::VerifyOperators && !problem.supports_dim(dim) {
        return Err(ConfigError(format!("problem '{}' is not defined in {dim}D", problem.name())));
    }
    match command {
        Command::Spectra if problem != ProblemId::UnsteadyVortex && problem != ProblemId::EntropyWave => {
            return Err(ConfigError("spectra needs a periodic Euler baseline (unsteady-vortex or entropy-wave)".into()));
        }
        Command::Convergence if problem != ProblemId::Advection && problem != ProblemId::EntropyWave => {
            return Err(ConfigError("convergence studies are available for advection and entropy-wave".into()));
        }
        Command::Convergence if dim != 1 => return Err(ConfigError("convergence studies are 1D".into())),
        _ => {}
    }
    let p = args.p.or(file.p).unwrap_or(1);
    let max_p = if dim == 1 { 4 } else { 2 };
    if p < 1 || p > max_p {
        return Err(ConfigError(format!("degree p = {p} is not supported in {dim}D (1..={max_p})")));
    }
    let n = args.n.or(file.n).unwrap_or(match (problem, dim) {
        (_, 2) => 8,
        (ProblemId::Sod, _) => 200,
        (ProblemId::EntropyWave, _) | (ProblemId::Advection, _) => 32,
        _ => 20,
    });
    if n < 2 {
        return Err(ConfigError(format!("mesh size must be at least 2, got {n}")));
    }
    let flux = match args.flux.as_ref().or(file.flux.as_ref()) {
        Some(s) => parse_flux(s)?,
        None => {
            if problem == ProblemId::Sod {
                FluxMode::Stable
            } else {
                FluxMode::Conservative
            }
        }
    };
    if problem == ProblemId::Sod && flux == FluxMode::Conservative {
        return Err(ConfigError("the shock tube needs --flux stable".into()));
    }
    let cfl = args.cfl.or(file.cfl).unwrap_or(problem.default_cfl());
    if !(cfl > 0.0 && cfl.is_finite()) {
        return Err(ConfigError(format!("CFL must be positive, got {cfl}")));
    }
    let final_time = args.final_time.or(file.final_time).unwrap_or(match (command, problem) {
        (Command::Convergence, ProblemId::EntropyWave) => 0.25,
        _ => problem.default_final_time(),
    });
    if !(final_time > 0.0 && final_time.is_finite()) {
        return Err(ConfigError(format!("final time must be positive, got {final_time}")));
    }
    let vortex_form = match args.vortex_form.as_ref().or(file.vortex_form.as_ref()) {
        Some(s) => s.parse::<VortexForm>().map_err(ConfigError)?,
        None => VortexForm::Scaled,
    };
    let sizes = args.sizes.clone().or(file.sizes.clone()).unwrap_or_else(|| vec![16, 32, 64, 128]);
    if command == Command::Convergence && (sizes.len() < 3 || sizes.iter().any(|&s| s < 2)) {
        return Err(ConfigError("convergence needs at least three mesh sizes, each at least 2".into()));
    }
    Ok(RunConfig {
        command,
        problem,
        dim,
        p,
        n,
        flux,
        cfl,
        final_time,
        relaxation: args.relaxation.or(file.relaxation).unwrap_or(true),
        out: args.out.clone().or(file.out.clone()).unwrap_or_else(|| PathBuf::from("out")),
        seed: args.seed.or(file.seed).unwrap_or(0),
        vortex_form,
        sizes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_problem() {
        let c = resolve(Command::Run, &CommonArgs::default(), &FileConfig::default()).unwrap();
        assert_eq!((c.problem, c.dim, c.n, c.cfl), (ProblemId::UnsteadyVortex, 2, 8, 10.0));
        assert!((c.final_time - 1.0 / 15.0).abs() < 1e-16);
        let args = CommonArgs { problem: Some("sod".into()), ..Default::default() };
        let c = resolve(Command::Run, &args, &FileConfig::default()).unwrap();
        assert_eq!((c.dim, c.flux, c.n, c.cfl), (1, FluxMode::Stable, 200, 0.5));
    }

    #[test]
    fn flags_override_file() {
        let file: FileConfig = toml::from_str("problem = \"sod\"\np = 2\nK = 100\ncfl = 0.25").unwrap();
        let args = CommonArgs { p: Some(1), ..Default::default() };
        let c = resolve(Command::Run, &args, &file).unwrap();
        assert_eq!((c.p, c.n, c.cfl), (1, 100, 0.25));
    }

    #[test]
    fn unsupported_combinations_are_rejected() {
        let bad = [
            CommonArgs { dim: Some(2), p: Some(3), ..Default::default() },
            CommonArgs { dim: Some(1), p: Some(5), problem: Some("entropy-wave".into()), ..Default::default() },
            CommonArgs { problem: Some("sod".into()), dim: Some(2), ..Default::default() },
            CommonArgs { problem: Some("vortex".into()), ..Default::default() },
            CommonArgs { flux: Some("upwind".into()), ..Default::default() },
            CommonArgs { p: Some(0), ..Default::default() },
        ];
        for a in bad {
            assert!(resolve(Command::Run, &a, &FileConfig::default()).is_err(), "{a:?}");
        }
        assert!(toml::from_str::<FileConfig>("colour = 3").is_err());
        let file: FileConfig = toml::from_str("command = \"spectra\"").unwrap();
        assert!(resolve(Command::Run, &CommonArgs::default(), &file).is_err());
    }
}
