//! Command-line front end. Every number printed here comes from a library call.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::branch::{analyze, Analysis, BranchConfig};
use crate::error::{Error, Result};
use crate::exact::{parse_rational, Q};
use crate::network::{coalesce, load_network, load_spec, looks_like_spec, network_to_text, CoalescenceSpec, Network};
use crate::report::{verify, ClassifyReport, NetworkSummary, SpectrumReport, VerifyConfig};
use crate::spectral::{eigen_structure_with, spectrum_union_check, SpectralOptions};
use crate::system::parse_jet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    #[value(name = "json-like")]
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "ffcn", version, about = "Coalescence networks, Laplacian spectra and steady-state branches")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Require exact rational arithmetic throughout.
    #[arg(long, global = true, env = "FFCN_EXACT")]
    pub exact: bool,
    /// Tolerance for floating-point rank and clustering decisions.
    #[arg(long, global = true, env = "FFCN_TOL", default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, global = true, env = "FFCN_FORMAT", value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Upper end of the sampled |λ| window.
    #[arg(long, global = true, env = "FFCN_LAMBDA_MAX", default_value_t = 1e-2)]
    pub lambda_max: f64,
    /// Lower end of the sampled |λ| window.
    #[arg(long, global = true, env = "FFCN_LAMBDA_MIN", default_value_t = 1e-6)]
    pub lambda_min: f64,
    /// Fixed Newton seed amplitude.
    #[arg(long, global = true, env = "FFCN_SEED_DELTA", default_value_t = 1e-3)]
    pub seed_delta: f64,
    /// Allowed gap between fitted and predicted growth exponents.
    #[arg(long, global = true, env = "FFCN_EXPONENT_TOL", default_value_t = 0.05)]
    pub exponent_tol: f64,
    /// Truncation degree of the series computations.
    #[arg(long, global = true, env = "FFCN_DEGREE", default_value_t = 6)]
    pub degree: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Inspect or build networks.
    Net {
        #[command(subcommand)]
        action: NetAction,
    },
    /// Laplacian eigenvalues, multiplicities and Jordan chains.
    Spectrum {
        /// Network or coalescence spec file.
        input: PathBuf,
        /// Check the multiplicity identities of a feedforward coalescence.
        #[arg(long)]
        check_union: bool,
    },
    /// Case classification and branch predictions for every seed.
    Classify(Problem),
    /// Classification plus comparison with the continuation oracle.
    Verify(Problem),
}

#[derive(Debug, Subcommand)]
pub enum NetAction {
    /// Print W, D and L (of the coalescence, for a spec file).
    Show { input: PathBuf },
    /// Coalesce cell `merge_1` of `first` with cell `merge_2` of `second`.
    Coalesce {
        first: PathBuf,
        merge_1: usize,
        second: PathBuf,
        merge_2: usize,
        /// Write the coalescence here instead of printing a summary.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct Problem {
    /// Coalescence spec file.
    pub spec: PathBuf,
    /// Jet file; the bundled default is used when omitted.
    #[arg(long, env = "FFCN_JET")]
    pub jet: Option<PathBuf>,
    /// Bifurcation eigenvalue, fixing g_x = -mu h_1 when the jet omits g_x.
    #[arg(long, env = "FFCN_MU")]
    pub mu: Option<String>,
}

const DEFAULT_JET: &str = include_str!("../data/default.jet");

/// Parse arguments from the environment and run; returns the exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok((out, code)) => {
            print!("{out}");
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn emit<T: Serialize>(fmt: Format, value: &T, text: impl FnOnce() -> String) -> String {
    match fmt {
        Format::Text => text(),
        Format::Json => serde_json::to_string_pretty(value).expect("reports serialize") + "\n",
    }
}

fn load_input(path: &Path) -> Result<(Network, Option<CoalescenceSpec>)> {
    let text = std::fs::read_to_string(path)?;
    if looks_like_spec(&text) {
        let spec = load_spec(path)?;
        Ok((coalesce(&spec), Some(spec)))
    } else {
        Ok((load_network(path)?, None))
    }
}

fn branch_config(g: &Global) -> BranchConfig {
    let mut c = BranchConfig { degree: g.degree.max(4), ..BranchConfig::default() };
    c.oracle.lambda_max = g.lambda_max;
    c.oracle.lambda_min = g.lambda_min;
    c.oracle.seed_delta = g.seed_delta;
    c
}

fn load_analysis(g: &Global, p: &Problem) -> Result<Analysis> {
    let spec = load_spec(&p.spec)?;
    let mu: Option<Q> = p.mu.as_deref().map(parse_rational).transpose()?;
    let text = match &p.jet {
        Some(path) => std::fs::read_to_string(path)?,
        None => DEFAULT_JET.to_string(),
    };
    let jet = parse_jet(&text, mu.as_ref())?;
    let a = analyze(&spec, &jet, &branch_config(g))?;
    if g.exact && a.seeds.iter().any(|s| s.exact.is_none()) {
        return Err(Error::Inexact("a seed branch has no exact Taylor data".into()));
    }
    Ok(a)
}

/// Run a parsed command; returns the rendered output and the exit code.
pub fn execute(cli: &Cli) -> Result<(String, i32)> {
    let g = &cli.global;
    match &cli.command {
        Command::Net { action: NetAction::Show { input } } => {
            let (net, _) = load_input(input)?;
            let s = NetworkSummary::of(&net);
            Ok((emit(g.format, &s, || s.to_text()), 0))
        }
        Command::Net { action: NetAction::Coalesce { first, merge_1, second, merge_2, output } } => {
            let spec = CoalescenceSpec::new(load_network(first)?, *merge_1, load_network(second)?, *merge_2)?;
            let net = coalesce(&spec);
            if let Some(out) = output {
                std::fs::write(out, network_to_text(&net))?;
            }
            let s = NetworkSummary::of(&net);
            Ok((emit(g.format, &s, || s.to_text()), 0))
        }
        Command::Spectrum { input, check_union } => {
            let (net, spec) = load_input(input)?;
            let opts = SpectralOptions { tol: g.tol, exact_only: g.exact };
            let structure = eigen_structure_with(&net.laplacian(), opts)?;
            let union = if *check_union {
                let spec = spec.ok_or_else(|| Error::Precondition("--check-union needs a coalescence spec".into()))?;
                Some(spectrum_union_check(&spec, g.tol)?)
            } else {
                None
            };
            let r = SpectrumReport::new(&structure, union);
            let code = if r.union_check.as_ref().is_some_and(|u| !u.ok) { 4 } else { 0 };
            Ok((emit(g.format, &r, || r.to_text()), code))
        }
        Command::Classify(p) => {
            let a = load_analysis(g, p)?;
            let r = ClassifyReport::new(&a);
            Ok((emit(g.format, &r, || r.to_text()), 0))
        }
        Command::Verify(p) => {
            let a = load_analysis(g, p)?;
            let vc = VerifyConfig { exponent_tol: g.exponent_tol, ..VerifyConfig::default() };
            let r = verify(&a, &branch_config(g).oracle, &vc)?;
            let code = if r.agree { 0 } else { 4 };
            Ok((emit(g.format, &r, || r.to_text()), code))
        }
    }
}
