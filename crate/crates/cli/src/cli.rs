//! Subcommand implementations behind the `fairslot` binary.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use fairslot::audit::{audit_pair, Definition};
use fairslot::feasibility::{
    bvn_decompose, extend_doubly_stochastic, sample_matching, MatchingDistribution, DEFAULT_TOL,
};
use fairslot::oracles::numeric_payment;
use fairslot::payments::{click_allocation_curve, myerson_payment};
use fairslot::welfare::mechanism_welfare;
use fairslot::{generalized, AuctionInstance, Error, Family, MechanismConfig};

use crate::io::{self, ConfigFile, InstanceFile, MatchingFile, MatrixFile, PaymentReport, SampleFile};
use crate::sweep::{run_sweep, SweepSpec};

#[derive(Debug, Parser)]
#[command(name = "fairslot", version, about = "Individually fair multi-slot ad auctions")]
pub struct Cli {
    /// Check that FILE is a well-formed output of this tool and exit.
    #[arg(long, value_name = "FILE", global = true)]
    pub validate_output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Slot-allocation matrix and cumulative k-unit vectors.
    Allocate(MechArgs),
    /// Lottery over slot matchings realizing the allocation.
    Decompose {
        #[command(flatten)]
        mech: MechArgs,
        /// Support threshold for the matching graph.
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tolerance: f64,
    },
    /// Draw one matching from the decomposition.
    Sample {
        #[command(flatten)]
        mech: MechArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tolerance: f64,
    },
    /// Truthful per-impression payments.
    Pay {
        #[command(flatten)]
        mech: MechArgs,
        /// Only this advertiser (0-based).
        #[arg(long)]
        advertiser: Option<usize>,
        /// Also integrate numerically over mechanism runs and report the difference.
        #[arg(long)]
        oracle: bool,
        /// Grid size for `--oracle`.
        #[arg(long, default_value_t = 100_000)]
        grid: usize,
    },
    /// Compare the allocations of two instances against the stability bounds.
    Audit {
        #[command(flatten)]
        mech: MechArgs,
        /// The second user's instance.
        #[arg(long, value_name = "FILE")]
        other: PathBuf,
        /// Comma-separated subset of weak,ordered,tv,hetero.
        #[arg(long, default_value = "weak,ordered,tv,hetero")]
        definitions: String,
        /// Use this λ instead of the one computed from the instances.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Mechanism welfare against the unfair optimum.
    Welfare(MechArgs),
    /// Run a seeded experiment grid described by a JSON spec.
    Sweep {
        /// Sweep spec file.
        #[arg(long, value_name = "FILE")]
        spec: PathBuf,
        #[arg(short, long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct MechArgs {
    #[arg(short, long, value_name = "FILE")]
    pub instance: PathBuf,
    /// Config JSON; `--family` and `--ell` override its fields.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub ell: Option<f64>,
    #[arg(short, long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

/// A failure reported on stderr as `{"error": code, "message": ...}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub code: String,
    pub message: String,
}

impl Diagnostic {
    fn new(code: &str, message: impl Into<String>) -> Self {
        Self { code: code.into(), message: message.into() }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({"error": self.code, "message": self.message}).to_string()
    }
}

impl From<Error> for Diagnostic {
    fn from(e: Error) -> Self {
        Self::new(e.code(), e.to_string())
    }
}

/// How a successful command ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    /// An audit found a violated bound.
    Violation,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;

fn read(path: &Path) -> Result<String, Diagnostic> {
    fs::read_to_string(path).map_err(|e| Diagnostic::new("Io", format!("{}: {e}", path.display())))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Diagnostic> {
    serde_json::from_str(&read(path)?).map_err(|e| Diagnostic::new("Parse", format!("{}: {e}", path.display())))
}

pub fn load_instance(path: &Path) -> Result<AuctionInstance, Diagnostic> {
    Ok(parse_json::<InstanceFile>(path)?.validate()?)
}

impl MechArgs {
    pub fn config(&self) -> Result<MechanismConfig, Diagnostic> {
        let mut c = match &self.config {
            Some(p) => parse_json::<ConfigFile>(p)?,
            None => ConfigFile { family: "ipa".into(), ell: 1.0 },
        };
        if let Some(f) = &self.family {
            c.family = f.clone();
        }
        if let Some(l) = self.ell {
            c.ell = l;
        }
        let family: Family = c.family.parse().map_err(|e| Diagnostic::new("InvalidFamily", format!("{e}")))?;
        Ok(MechanismConfig::new(family, c.ell)?)
    }
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), Diagnostic> {
    match output {
        Some(p) => fs::write(p, text).map_err(|e| Diagnostic::new("Io", format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output types serialize");
    s.push('\n');
    s
}

/// Runs one command.
pub fn run(cli: Cli) -> Result<Outcome, Diagnostic> {
    if let Some(path) = &cli.validate_output {
        let kind = io::validate_output(&read(path)?).map_err(|m| Diagnostic::new("InvalidOutput", m))?;
        println!("{}", serde_json::json!({"valid": true, "kind": kind.as_str()}));
        return Ok(Outcome::Ok);
    }
    let Some(command) = cli.command else {
        return Err(Diagnostic::new("Usage", "a subcommand or --validate-output is required"));
    };
    match command {
        Command::Allocate(m) => {
            let (inst, config) = (load_instance(&m.instance)?, m.config()?);
            let matrix = generalized(&inst, &config)?;
            emit(m.output.as_deref(), &to_json(&MatrixFile::from(&matrix)))?;
        }
        Command::Decompose { mech, tolerance } => {
            let dist = decompose(&mech, tolerance)?;
            emit(mech.output.as_deref(), &to_json(&MatchingFile::from(&dist)))?;
        }
        Command::Sample { mech, seed, tolerance } => {
            let dist = decompose(&mech, tolerance)?;
            let perm = sample_matching(&dist, seed);
            emit(mech.output.as_deref(), &to_json(&SampleFile::new(seed, &dist, perm)))?;
        }
        Command::Pay { mech, advertiser, oracle, grid } => {
            let (inst, config) = (load_instance(&mech.instance)?, mech.config()?);
            let who: Vec<usize> = match advertiser {
                Some(i) if i >= inst.n() => return Err(Error::AdvertiserOutOfRange { advertiser: i, n: inst.n() }.into()),
                Some(i) => vec![i],
                None => (0..inst.n()).collect(),
            };
            let mut reports = Vec::with_capacity(who.len());
            for i in who {
                let curve = click_allocation_curve(&inst, i, config.ell, config.family)?;
                let p = myerson_payment(&curve, inst.values()[i])?;
                let mut r = PaymentReport::new(i, &p);
                if oracle {
                    let q = numeric_payment(&inst, i, &config, grid)?;
                    r.oracle_payment = Some(q);
                    r.oracle_delta = Some(p.payment - q);
                }
                reports.push(r);
            }
            emit(mech.output.as_deref(), &to_json(&reports))?;
        }
        Command::Audit { mech, other, definitions, lambda, format } => {
            let (a, b, config) = (load_instance(&mech.instance)?, load_instance(&other)?, mech.config()?);
            let defs = definitions
                .split(',')
                .map(|d| d.parse::<Definition>().map_err(|_| Diagnostic::new("InvalidDefinition", format!("unknown definition {d:?}"))))
                .collect::<Result<Vec<_>, _>>()?;
            if let Some(l) = lambda {
                fairslot::stability_bound(l, config.ell)?;
            }
            let report = audit_pair(&a, &b, &config, &defs, lambda)?;
            let text = match format {
                Format::Csv => io::audit_csv(&report),
                Format::Json => to_json(&io::audit_json(&report)),
            };
            emit(mech.output.as_deref(), &text)?;
            if !report.all_satisfied() {
                return Ok(Outcome::Violation);
            }
        }
        Command::Welfare(m) => {
            let (inst, config) = (load_instance(&m.instance)?, m.config()?);
            let w = mechanism_welfare(&inst, &config)?;
            let text = format!("{}\n{}\n", io::WELFARE_HEADER, io::welfare_row(inst.n(), inst.k(), config.ell, config.family, 0, &w));
            emit(m.output.as_deref(), &text)?;
        }
        Command::Sweep { spec, output } => {
            let spec: SweepSpec = parse_json(&spec)?;
            let text = run_sweep(&spec).map_err(|e| Diagnostic::new("InvalidSweep", e.0))?;
            emit(output.as_deref(), &text)?;
        }
    }
    Ok(Outcome::Ok)
}

fn decompose(m: &MechArgs, tol: f64) -> Result<MatchingDistribution, Diagnostic> {
    if !(tol > 0.0) {
        return Err(Diagnostic::new("InvalidTolerance", format!("tolerance must be positive, got {tol}")));
    }
    let (inst, config) = (load_instance(&m.instance)?, m.config()?);
    let ds = extend_doubly_stochastic(&generalized(&inst, &config)?)?;
    Ok(bvn_decompose(&ds, tol)?)
}

/// Parses arguments, runs, reports, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(Outcome::Ok) => EXIT_OK,
        Ok(Outcome::Violation) => EXIT_VIOLATION,
        Err(d) => {
            eprintln!("{}", d.to_json());
            EXIT_INPUT
        }
    }
}
