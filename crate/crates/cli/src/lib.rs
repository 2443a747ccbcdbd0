//! Command-line front end: `analyze`, `sweep` and `perturb`.
//!
//! Exit codes of `analyze` follow the certificate: 0 for a field in the
//! class, 3 outside it, 4 when inconclusive. Input and usage errors exit
//! with 1.

pub mod portrait;
pub mod report;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use ess_stab::certify::{density_experiment, CertifyOptions, DensityOptions, Overall};
use ess_stab::model::distance;
use ess_stab::perturb::{algebraic_cycle_perturbation, rotate_family};
use report::{AnalysisReport, Construction, PerturbReport, SweepReport, SCHEMA_VERSION};
use serde::Serialize;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

pub const EXIT_IN_PD: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_IN_PD: i32 = 3;
pub const EXIT_INCONCLUSIVE: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "ess-stab", version, about = "Structural stability of planar replicator fields")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Certify one field or game.
    Analyze(AnalyzeArgs),
    /// Monte-Carlo density experiment over random fields.
    Sweep(SweepArgs),
    /// Apply a rotation or algebraic-cycle perturbation to a field.
    Perturb(PerturbArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct Tuning {
    #[arg(long)]
    pub tol_hyperbolic: Option<f64>,
    #[arg(long)]
    pub tol_generic: Option<f64>,
    /// Samples per cycle-scan section.
    #[arg(long)]
    pub scan_sections: Option<usize>,
    /// Time cap for return maps and separatrix traces.
    #[arg(long)]
    pub tmax: Option<f64>,
}

impl Tuning {
    pub fn options(&self) -> CertifyOptions {
        let mut o = CertifyOptions::default();
        if let Some(t) = self.tol_hyperbolic {
            o.tol_hyperbolic = t;
        }
        if let Some(t) = self.tol_generic {
            o.tol_generic = t;
        }
        if let Some(n) = self.scan_sections {
            o.scan.samples = n;
        }
        if let Some(t) = self.tmax {
            o.scan.t_max = t;
            o.trace_t_max = t;
        }
        o
    }
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Field JSON: {"d": .., "f": poly, "g": poly}.
    #[arg(long, conflicts_with = "game", required_unless_present = "game")]
    pub field: Option<PathBuf>,
    /// Game JSON: {"n": .., "A": [[poly, poly], [poly, poly]], "B": ..}.
    #[arg(long)]
    pub game: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub portrait: Option<PathBuf>,
    /// Recorded in the report; the analysis itself is deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub tuning: Tuning,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(short = 'd', default_value_t = 1)]
    pub d: u32,
    #[arg(short = 'N', default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Openness-probe perturbations per eligible sample.
    #[arg(long, default_value_t = 20)]
    pub probes: usize,
    /// Output prefix; writes PREFIX.csv and PREFIX.json.
    #[arg(long, default_value = "sweep")]
    pub out: PathBuf,
    #[command(flatten)]
    pub tuning: Tuning,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("construction").required(true).args(["lambda", "curve"]))]
pub struct PerturbArgs {
    #[arg(long)]
    pub field: PathBuf,
    /// Perturbed field JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Delta report JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub eps: f64,
    /// Rotation parameter of the rotated family.
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// Invariant algebraic curve (polynomial JSON) for the cycle perturbation.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    #[arg(long, default_value_t = 1, allow_negative_numbers = true, value_parser = parse_sign)]
    pub delta1: i8,
    #[arg(long, default_value_t = 1, allow_negative_numbers = true, value_parser = parse_sign)]
    pub delta2: i8,
}

fn parse_sign(s: &str) -> Result<i8, String> {
    match s {
        "1" | "+1" => Ok(1),
        "-1" => Ok(-1),
        _ => Err(format!("expected 1 or -1, got {s}")),
    }
}

pub fn exit_code(overall: Overall) -> i32 {
    match overall {
        Overall::InPd => EXIT_IN_PD,
        Overall::NotInPd => EXIT_NOT_IN_PD,
        Overall::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
}

fn cmd_analyze(a: &AnalyzeArgs) -> anyhow::Result<i32> {
    let input = match (&a.field, &a.game) {
        (Some(p), _) => report::read_field(p)?,
        (None, Some(p)) => report::read_game(p)?,
        (None, None) => unreachable!("clap enforces one input"),
    };
    let rep = AnalysisReport::run(input, a.tuning.options(), a.seed);
    let cert = &rep.analysis.certificate;
    for (name, v) in cert.conditions() {
        log::info!("{name}: {v:?}");
    }
    println!("{:?}", cert.overall);
    if let Some(p) = &a.report {
        write_json(p, &rep)?;
    }
    if let Some(p) = &a.portrait {
        std::fs::write(p, portrait::render_portrait(&rep)).with_context(|| format!("cannot write {}", p.display()))?;
    }
    Ok(exit_code(cert.overall))
}

#[derive(Serialize)]
struct CsvRow<'a> {
    index: usize,
    overall: String,
    a_prime: &'a str,
    b_prime: &'a str,
    c: &'a str,
    d_prime: &'a str,
    cycles: usize,
    non_generic: bool,
    probe_eligible: bool,
    probe_held: Option<bool>,
    coefficients: String,
}

fn status(v: &str) -> &str {
    v.split(':').next().unwrap_or(v)
}

fn cmd_sweep(a: &SweepArgs) -> anyhow::Result<i32> {
    let mut o = DensityOptions::new(a.d, a.samples as usize, a.seed, a.radius);
    o.certify = a.tuning.options();
    o.probes = a.probes;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = a.jobs {
        pool = pool.num_threads(j.max(1));
    }
    let pool = pool.build()?;
    let stats = pool.install(|| density_experiment(&o)).map_err(anyhow::Error::msg)?;
    let csv_path = a.out.with_extension("csv");
    let mut w = csv::Writer::from_path(&csv_path).with_context(|| format!("cannot write {}", csv_path.display()))?;
    for r in &stats.records {
        w.serialize(CsvRow {
            index: r.index,
            overall: format!("{:?}", r.overall),
            a_prime: status(&r.verdicts[0]),
            b_prime: status(&r.verdicts[1]),
            c: status(&r.verdicts[2]),
            d_prime: status(&r.verdicts[3]),
            cycles: r.cycles,
            non_generic: r.non_generic,
            probe_eligible: r.probe_eligible,
            probe_held: r.probe_held,
            coefficients: r.coefficients.iter().map(|c| format!("{c:e}")).collect::<Vec<_>>().join(" "),
        })?;
    }
    w.flush()?;
    println!(
        "InPd {:.4}  NotInPd {:.4}  Inconclusive {:.4}",
        stats.fraction_in_pd, stats.fraction_not_in_pd, stats.fraction_inconclusive
    );
    write_json(
        &a.out.with_extension("json"),
        &SweepReport {
            schema_version: SCHEMA_VERSION,
            stats,
        },
    )?;
    Ok(0)
}

fn cmd_perturb(a: &PerturbArgs) -> anyhow::Result<i32> {
    let src = report::read_field(&a.field)?.field;
    let (perturbed, construction) = match (a.lambda, &a.curve) {
        (Some(lambda), _) => (rotate_family(&src, a.eps, lambda), Construction::Rotation { eps: a.eps, lambda }),
        (None, Some(path)) => {
            let curve = report::read_poly(path)?;
            let y = algebraic_cycle_perturbation(&src, &curve, a.eps, a.delta1, a.delta2)?;
            (
                y,
                Construction::AlgebraicCycle {
                    eps: a.eps,
                    delta1: a.delta1,
                    delta2: a.delta2,
                },
            )
        }
        (None, None) => unreachable!("clap enforces one construction"),
    };
    write_json(&a.out, &perturbed)?;
    if let Some(p) = &a.report {
        write_json(
            p,
            &PerturbReport {
                schema_version: SCHEMA_VERSION,
                construction,
                distance: distance(&src, &perturbed)?,
                lambda_invariant: perturbed.lambda_invariant(),
                source: src,
                perturbed,
            },
        )?;
    }
    Ok(0)
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter("ESS_STAB_LOG")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => EXIT_ERROR,
            };
        }
    };
    let res = match &cli.command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Perturb(a) => cmd_perturb(a),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}
