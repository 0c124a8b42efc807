//! Flag parsing, config-file merging and validation into a [`Resolved`] spec.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rank1sense::{FinalFit, Method, SpectrumShape};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "rank1sense", version, about = "Reproducible rank-one matrix sensing experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// One recovery per seed in `seed..seed+trials` and per m; writes the trace and a summary.
    Run(Flags),
    /// Success fraction and contraction versus samples per block.
    SweepM(Flags),
    /// Empirical concentration of the initialization, B and G operators.
    CheckOperators(Flags),
    /// Block-matrix quantities of one alternating step from bases at a known distance.
    ProofDiagnostics(Flags),
    /// Naive and sketched least squares timed on identical problems.
    BenchRegression(Flags),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Run(_) => "run",
            Command::SweepM(_) => "sweep-m",
            Command::CheckOperators(_) => "check-operators",
            Command::ProofDiagnostics(_) => "proof-diagnostics",
            Command::BenchRegression(_) => "bench-regression",
        }
    }

    pub fn flags(&self) -> &Flags {
        match self {
            Command::Run(f)
            | Command::SweepM(f)
            | Command::CheckOperators(f)
            | Command::ProofDiagnostics(f)
            | Command::BenchRegression(f) => f,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Every parameter as given on the command line. The same shape, minus
/// `config`, is accepted as a JSON config file; flags win over the file.
#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Flags {
    /// Ambient dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Target rank.
    #[arg(long)]
    pub k: Option<usize>,
    /// Condition number σ₁/σ_k of the planted target [default: 2, or 1 when k = 1].
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Samples per block; a comma-separated list sweeps several values.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub m: Option<Vec<usize>>,
    /// Alternating iterations T [default: 10].
    #[arg(long)]
    pub iters: Option<usize>,
    /// Target relative error; `sweep-m` counts a trial as a success at or below it [default: 1e-6].
    #[arg(long)]
    pub eps0: Option<f64>,
    /// Inner least-squares solver [default: naive].
    #[arg(long)]
    pub method: Option<Method>,
    /// Relative accuracy of the sketched solver [default: 1e-6].
    #[arg(long)]
    pub sketch_eps: Option<f64>,
    /// Failure probability of the sketched solver [default: 0.01].
    #[arg(long)]
    pub sketch_delta: Option<f64>,
    /// Base seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seeds per configuration; repetitions for `bench-regression` [default: 1].
    #[arg(long)]
    pub trials: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// JSON file with any of these parameters.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// How the final estimate pairs the factors [default: extra-block].
    #[arg(long)]
    pub final_fit: Option<FinalFit>,
    /// Spacing of the planted singular values [default: geometric].
    #[arg(long)]
    pub spectrum: Option<SpectrumShape>,
    /// Tolerance ε of the operator and proof checks [default: 0.1].
    #[arg(long)]
    pub eps: Option<f64>,
    /// Random probe directions per operator check [default: 4].
    #[arg(long)]
    pub probes: Option<usize>,
    /// Largest subspace distance of the proof-diagnostic bases [default: 0.1].
    #[arg(long)]
    pub dist: Option<f64>,
    /// Blank every wall-clock field so output depends only on the inputs.
    #[arg(long)]
    pub no_timings: bool,
}

impl Flags {
    /// Field-wise `self` over `file`.
    fn over(self, file: Flags) -> Flags {
        Flags {
            d: self.d.or(file.d),
            k: self.k.or(file.k),
            kappa: self.kappa.or(file.kappa),
            m: self.m.or(file.m),
            iters: self.iters.or(file.iters),
            eps0: self.eps0.or(file.eps0),
            method: self.method.or(file.method),
            sketch_eps: self.sketch_eps.or(file.sketch_eps),
            sketch_delta: self.sketch_delta.or(file.sketch_delta),
            seed: self.seed.or(file.seed),
            trials: self.trials.or(file.trials),
            out: self.out.or(file.out),
            format: self.format.or(file.format),
            config: self.config,
            final_fit: self.final_fit.or(file.final_fit),
            spectrum: self.spectrum.or(file.spectrum),
            eps: self.eps.or(file.eps),
            probes: self.probes.or(file.probes),
            dist: self.dist.or(file.dist),
            no_timings: self.no_timings || file.no_timings,
        }
    }
}

/// The fully resolved experiment. Serialized verbatim as the echo block, so
/// it excludes the output path: the same inputs give the same bytes anywhere.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Resolved {
    pub command: &'static str,
    pub d: usize,
    pub k: usize,
    pub kappa: f64,
    pub m: Vec<usize>,
    pub iters: usize,
    pub eps0: f64,
    pub method: Method,
    pub sketch_eps: f64,
    pub sketch_delta: f64,
    pub seed: u64,
    pub trials: usize,
    pub final_fit: FinalFit,
    pub spectrum: SpectrumShape,
    pub eps: f64,
    pub probes: usize,
    pub dist: f64,
    pub timings: bool,
    pub format: Format,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

/// A problem with the request itself; reported as a usage error.
#[derive(Debug)]
pub struct UsageError(pub String);

fn usage<T>(msg: impl Into<String>) -> Result<T, UsageError> {
    Err(UsageError(msg.into()))
}

fn read_config(path: &Path) -> Result<Flags, UsageError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| UsageError(format!("bad config {}: {e}", path.display())))
}

pub fn resolve(command: &Command) -> Result<Resolved, UsageError> {
    let flags = command.flags().clone();
    let flags = match &flags.config {
        Some(path) => {
            let file = read_config(path)?;
            flags.over(file)
        }
        None => flags,
    };
    let Some(d) = flags.d else {
        return usage("missing required parameter --d");
    };
    let Some(k) = flags.k else {
        return usage("missing required parameter --k");
    };
    let Some(m) = flags.m else {
        return usage("missing required parameter --m");
    };
    let r = Resolved {
        command: command.name(),
        d,
        k,
        kappa: flags.kappa.unwrap_or(if k == 1 { 1.0 } else { 2.0 }),
        m,
        iters: flags.iters.unwrap_or(10),
        eps0: flags.eps0.unwrap_or(1e-6),
        method: flags.method.unwrap_or_default(),
        sketch_eps: flags.sketch_eps.unwrap_or(1e-6),
        sketch_delta: flags.sketch_delta.unwrap_or(0.01),
        seed: flags.seed.unwrap_or(0),
        trials: flags.trials.unwrap_or(1),
        final_fit: flags.final_fit.unwrap_or_default(),
        spectrum: flags.spectrum.unwrap_or_default(),
        eps: flags.eps.unwrap_or(0.1),
        probes: flags.probes.unwrap_or(4),
        dist: flags.dist.unwrap_or(0.1),
        timings: !flags.no_timings,
        format: flags.format.unwrap_or_default(),
        out: flags.out,
    };
    r.validate()?;
    Ok(r)
}

impl Resolved {
    /// Range checks shared by every command, plus the command's own needs.
    fn validate(&self) -> Result<(), UsageError> {
        if self.k == 0 || self.k > self.d {
            return usage(format!("--k {} must lie in 1..={}", self.k, self.d));
        }
        if self.m.is_empty() {
            return usage("--m needs at least one value");
        }
        if self.trials == 0 {
            return usage("--trials must be at least 1");
        }
        if self.seed.checked_add(self.trials as u64).is_none() {
            return usage("--seed plus --trials overflows");
        }
        if !(self.kappa >= 1.0 && self.kappa.is_finite()) {
            return usage(format!("--kappa {} must be a finite value >= 1", self.kappa));
        }
        if self.k == 1 && self.kappa != 1.0 {
            return usage("a rank-one target has kappa = 1");
        }
        if !(self.sketch_eps > 0.0 && self.sketch_eps < 1.0) {
            return usage(format!("--sketch-eps {} must lie in (0, 1)", self.sketch_eps));
        }
        if !(self.sketch_delta > 0.0 && self.sketch_delta < 1.0) {
            return usage(format!("--sketch-delta {} must lie in (0, 1)", self.sketch_delta));
        }
        let dk = self.d * self.k;
        match self.command {
            "run" | "sweep-m" => {
                if self.iters == 0 {
                    return usage("--iters must be at least 1");
                }
                if !(self.eps0 > 0.0 && self.eps0 < 0.1) {
                    return usage(format!("--eps0 {} must lie in (0, 0.1)", self.eps0));
                }
                if let Some(&m) = self.m.iter().find(|&&m| m < dk) {
                    return usage(format!("--m {m} is below d·k = {dk}"));
                }
            }
            "check-operators" => {
                if !(self.eps >= 0.0) {
                    return usage(format!("--eps {} must be non-negative", self.eps));
                }
                if self.probes == 0 {
                    return usage("--probes must be at least 1");
                }
                if self.m.contains(&0) {
                    return usage("--m values must be positive");
                }
            }
            "proof-diagnostics" => {
                if !(self.eps >= 0.0) {
                    return usage(format!("--eps {} must be non-negative", self.eps));
                }
                if self.d < 2 * self.k {
                    return usage(format!("proof diagnostics need d >= 2k, got d = {}, k = {}", self.d, self.k));
                }
                if !(self.dist > 0.0 && self.dist <= 1.0) {
                    return usage(format!("--dist {} must lie in (0, 1]", self.dist));
                }
                if dk > rank1sense::diagnostics::blocks::MAX_BLOCK_DIM {
                    return usage(format!("d·k = {dk} exceeds the block-matrix limit"));
                }
                if let Some(&m) = self.m.iter().find(|&&m| m < dk) {
                    return usage(format!("--m {m} is below d·k = {dk}"));
                }
            }
            _ => {
                if let Some(&m) = self.m.iter().find(|&&m| m < dk) {
                    return usage(format!("--m {m} is below d·k = {dk}"));
                }
            }
        }
        Ok(())
    }
}
