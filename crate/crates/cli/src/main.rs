//! `ineqforge`: certify, verify, convert, sweep and baseline commands.

mod parse;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use ineqforge::baseline::BaselineBeta;
use ineqforge::certificates::{
    certify_baseline, certify_distance, certify_general, certify_logdensity, certify_route_one, certify_route_two,
    classify, Certificate, LogDensityVariant, ShapeConstants,
};
use ineqforge::conversions::{detect_dlsi, fsob_from_beta, DlsiReport};
use ineqforge::io::{canonical_json, pretty_json, sha256_hex, sweep_csv, table_csv, Artifact};
use ineqforge::lyapunov::{fit_witness, WitnessSearch};
use ineqforge::potential::{Family, PotentialSpec};
use ineqforge::verify::{build_model, check_certificate, CheckMode, SoundnessReport, TestBattery};

#[derive(Parser, Debug)]
#[command(name = "ineqforge", version, about = "Functional-inequality certificates for Gibbs measures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a certificate for a potential.
    Certify(CertifyArgs),
    /// Check a certificate against the finite-difference oracle.
    Verify(VerifyArgs),
    /// Convert a certified rate into an F-Sobolev table and a DLSI fit.
    Convert(ConvertArgs),
    /// Tabulate a certified rate as `s,beta`.
    Sweep(SweepArgs),
    /// Tabulate a baseline rate and optionally certify it.
    Baseline(BaselineArgs),
}

#[derive(Args, Debug, Serialize)]
struct CertifyArgs {
    /// Potential JSON file, or inline JSON.
    #[arg(long)]
    potential: String,
    /// main1, main2, level, general, logdensity1, logdensity2, distance1..distance4.
    #[arg(long)]
    route: String,
    /// expaV:a or expdist:a:b.
    #[arg(long, default_value = "expaV:0.5")]
    witness: String,
    /// radial:coef:p or potential:coef:q; derived from the drift when absent.
    #[arg(long)]
    phi: Option<String>,
    /// balls, levels[:metric|:level|:local] or hlevels:c0[:...].
    #[arg(long)]
    sets: Option<String>,
    /// lebesgue or bord:theta[:c_n].
    #[arg(long, default_value = "lebesgue")]
    baseline: String,
    /// Local rate of the general route: lebesgue or bord[:c_n].
    #[arg(long, default_value = "lebesgue")]
    local: String,
    /// ε grid of the first route, from:to:steps (linear).
    #[arg(long)]
    eps_grid: Option<String>,
    /// Use the exact chaining constant in the general route.
    #[arg(long)]
    exact_chaining: bool,
    /// Drift constant of the log-density routes.
    #[arg(long, default_value_t = 0.5)]
    a0: f64,
    /// η of the log-density routes.
    #[arg(long, default_value = "pow:1:1.5")]
    eta: String,
    /// γ or θ of the log-density routes.
    #[arg(long, default_value = "pow:1:1")]
    shape: String,
    /// Lower growth exponent of the curvature routes.
    #[arg(long)]
    b: Option<f64>,
    /// Upper growth exponent of the curvature routes.
    #[arg(long)]
    b_prime: Option<f64>,
    /// Value of the constant c, when known.
    #[arg(long)]
    c: Option<f64>,
    /// Value of the constant C, when known.
    #[arg(long)]
    big_c: Option<f64>,
    /// Also classify the certificate (DLSI or F-Sobolev shape).
    #[arg(long)]
    classify: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct VerifyArgs {
    #[arg(long)]
    cert: PathBuf,
    /// L:m of the finite-difference model.
    #[arg(long, default_value = "8:2001")]
    grid: String,
    /// from:to:steps[:log|:lin].
    #[arg(long, default_value = "0.01:1:20:log")]
    s: String,
    /// absolute or shape.
    #[arg(long, default_value = "absolute")]
    mode: String,
    /// Fixed κ for shape mode; fitted when absent.
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    /// CSV mirror of the report.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct ConvertArgs {
    #[arg(long)]
    cert: PathBuf,
    /// u grid for F, from:to:steps[:log|:lin].
    #[arg(long, default_value = "10:10000:20:log")]
    u: String,
    /// s grid for the DLSI fit.
    #[arg(long, default_value = "0.0001:0.01:21:log")]
    s: String,
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    #[arg(long, default_value_t = 1.0)]
    c2: f64,
    #[arg(long)]
    out: PathBuf,
    /// `u,F` table.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct SweepArgs {
    #[arg(long)]
    cert: PathBuf,
    #[arg(long, default_value = "0.01:1:20:log")]
    s: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct BaselineArgs {
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// lebesgue or bord:theta[:c_n].
    #[arg(long, default_value = "lebesgue")]
    kind: String,
    #[arg(long, default_value = "0.01:1:20:log")]
    s: String,
    /// `s,beta` table.
    #[arg(long)]
    out: PathBuf,
    /// Baseline certificate JSON.
    #[arg(long)]
    cert_out: Option<PathBuf>,
}

/// Body of a certificate artifact: the certificate and the potential it is about.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct CertifiedPotential {
    potential: Option<PotentialSpec<f64>>,
    certificate: Certificate<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Conversion {
    certificate_id: String,
    c1: f64,
    c2: f64,
    /// `(u, F(u))`; `null` where `F` is not finite.
    fsob: Vec<(f64, Option<f64>)>,
    dlsi: Option<DlsiReport<f64>>,
}

/// Files produced by a command, written only once everything succeeded.
struct Outputs(Vec<(PathBuf, String)>);

impl Outputs {
    fn push(&mut self, path: &PathBuf, body: String) {
        self.0.push((path.clone(), body));
    }

    fn write(self) -> Result<()> {
        let distinct: BTreeSet<_> = self.0.iter().map(|(p, _)| p).collect();
        ensure!(distinct.len() == self.0.len(), "output paths must be distinct");
        for (path, body) in self.0 {
            std::fs::write(&path, body).with_context(|| format!("cannot write {}", path.display()))?;
        }
        Ok(())
    }
}

/// Configuration stamp: the command's arguments plus the hash of every input.
fn config_text(command: &str, args: &impl Serialize, inputs: &[&str]) -> Result<String> {
    let hashes: Vec<String> = inputs.iter().map(|t| sha256_hex(t.as_bytes())).collect();
    Ok(canonical_json(&(command, args, hashes))?)
}

fn read_certificate(path: &PathBuf) -> Result<(CertifiedPotential, String)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let body = match Artifact::<CertifiedPotential>::parse(&text) {
        Ok(a) => a.body,
        Err(_) => match serde_json::from_str::<Certificate<f64>>(&text) {
            Ok(certificate) => CertifiedPotential { potential: None, certificate },
            Err(e) => bail!("{} is not a certificate: {e}", path.display()),
        },
    };
    ensure!(body.certificate.id_is_valid()?, "{}: certificate id does not match its content", path.display());
    Ok((body, text))
}

/// Default growth exponent of a potential family.
fn growth_exponent(family: &Family<f64>) -> Option<f64> {
    match family {
        Family::Gaussian { .. } => Some(2.0),
        Family::Power { b_pow, .. } => Some(*b_pow),
        Family::DoubleWell { .. } => Some(4.0),
        Family::Sum { terms } => terms.iter().filter_map(growth_exponent).reduce(f64::max),
    }
}

fn certify(args: &CertifyArgs, out: &mut Outputs) -> Result<()> {
    let (spec, spec_text) = parse::potential(&args.potential)?;
    let n = spec.dim();
    let witness = || -> Result<_> {
        let search = WitnessSearch {
            candidates: args.phi.as_deref().map(parse::phi).transpose()?.map(|p| vec![p]),
            ..WitnessSearch::default()
        };
        Ok(fit_witness(&spec, parse::witness(&args.witness)?, &search)?)
    };
    let sets_or = |default: &str| parse::sets(args.sets.as_deref().unwrap_or(default));
    let constants = ShapeConstants { c: args.c, big_c: args.big_c };
    let cert = match args.route.as_str() {
        "main1" | "level" => {
            let sets = sets_or(if args.route == "level" { "levels:level" } else { "balls" })?;
            let eps = args.eps_grid.as_deref().map(|g| parse::s_grid(&format!("{g}:lin"))).transpose()?;
            certify_route_one(&witness()?, &parse::baseline(&args.baseline, n)?, sets, eps)?
        }
        "main2" => certify_route_two(&witness()?, &parse::baseline(&args.baseline, n)?, sets_or("balls")?)?,
        "general" => certify_general(&witness()?, sets_or("levels:local")?, parse::local(&args.local, n)?, args.exact_chaining)?,
        "logdensity1" | "logdensity2" => {
            let variant = if args.route.ends_with('1') { LogDensityVariant::Gradient } else { LogDensityVariant::Hessian };
            certify_logdensity(&spec, variant, args.a0, parse::scalar_fn(&args.eta)?, parse::scalar_fn(&args.shape)?, constants)?
        }
        r if r.starts_with("distance") => {
            let case: u8 = r["distance".len()..].parse().with_context(|| format!("unknown route `{r}`"))?;
            let grow = growth_exponent(spec.family());
            let b = args.b.or(grow).context("--b is required for this potential")?;
            let b_prime = args.b_prime.or(grow).context("--b-prime is required for this potential")?;
            certify_distance(&spec, case, b, b_prime, constants)?
        }
        other => bail!("unknown route `{other}`"),
    };
    let certificate = if args.classify { classify(&cert)? } else { cert };
    let body = CertifiedPotential { potential: Some(spec), certificate };
    let config = config_text("certify", args, &[&spec_text])?;
    out.push(&args.out, pretty_json(&Artifact::new(body, &config))?);
    Ok(())
}

fn report_csv(report: &SoundnessReport<f64>) -> String {
    let scale = report.kappa.unwrap_or(1.0);
    let rows: Vec<Vec<f64>> = report
        .s_grid
        .iter()
        .zip(&report.empirical)
        .zip(&report.certified)
        .map(|((&s, &e), &c)| vec![s, e, c, if scale * c >= e { 0.0 } else { 1.0 }])
        .collect();
    table_csv(&["s", "empirical", "certified", "violation"], &rows)
}

/// Returns whether the report has violations.
fn verify(args: &VerifyArgs, out: &mut Outputs) -> Result<bool> {
    let (body, cert_text) = read_certificate(&args.cert)?;
    let spec = body.potential.context("the certificate artifact carries no potential")?;
    let (half, m) = parse::model_grid(&args.grid)?;
    let s_grid = parse::s_grid(&args.s)?;
    let mode = match args.mode.as_str() {
        "absolute" => CheckMode::Absolute,
        "shape" => CheckMode::ShapeUpToConstant { kappa: args.kappa },
        other => bail!("mode `{other}` must be absolute or shape"),
    };
    let model = build_model(&spec, half, m)?;
    let battery = TestBattery::standard(&model)?;
    let report = check_certificate(&body.certificate, &model, &battery, &s_grid, mode)?;
    let config = config_text("verify", args, &[&cert_text])?;
    if let Some(csv) = &args.csv {
        out.push(csv, report_csv(&report));
    }
    let failed = !report.passed();
    out.push(&args.out, pretty_json(&Artifact::new(report, &config))?);
    Ok(failed)
}

fn convert(args: &ConvertArgs, out: &mut Outputs) -> Result<()> {
    let (body, cert_text) = read_certificate(&args.cert)?;
    let rate = body.certificate.rate.as_ref().context("the certificate carries no rate")?;
    let eval = rate.evaluator();
    let fsob: Vec<(f64, Option<f64>)> = parse::s_grid(&args.u)?
        .into_iter()
        .map(|u| (u, fsob_from_beta(&eval, args.c1, args.c2, u).ok().filter(|f| f.is_finite())))
        .collect();
    let samples: Vec<(f64, f64)> = parse::s_grid(&args.s)?.into_iter().map(|s| (s, eval.value(s))).collect();
    let dlsi = detect_dlsi(&samples).ok();
    let conv = Conversion { certificate_id: body.certificate.id.clone(), c1: args.c1, c2: args.c2, fsob, dlsi };
    if let Some(csv) = &args.csv {
        let rows: Vec<Vec<f64>> = conv.fsob.iter().map(|(u, f)| vec![*u, f.unwrap_or(f64::NAN)]).collect();
        out.push(csv, table_csv(&["u", "F"], &rows));
    }
    let config = config_text("convert", args, &[&cert_text])?;
    out.push(&args.out, pretty_json(&Artifact::new(conv, &config))?);
    Ok(())
}

fn sweep(args: &SweepArgs, out: &mut Outputs) -> Result<()> {
    let (body, _) = read_certificate(&args.cert)?;
    let rate = body.certificate.rate.as_ref().context("the certificate carries no rate")?;
    let eval = rate.evaluator();
    let rows: Vec<(f64, f64)> = parse::s_grid(&args.s)?.into_iter().map(|s| (s, eval.value(s))).collect();
    out.push(&args.out, sweep_csv(&rows));
    Ok(())
}

fn baseline(args: &BaselineArgs, out: &mut Outputs) -> Result<()> {
    ensure!(args.n >= 1, "dimension must be positive");
    let base: BaselineBeta<f64> = parse::baseline(&args.kind, args.n)?;
    let rows: Vec<(f64, f64)> = parse::s_grid(&args.s)?.into_iter().map(|s| (s, base.value(s))).collect();
    out.push(&args.out, sweep_csv(&rows));
    if let Some(path) = &args.cert_out {
        let body = CertifiedPotential { potential: None, certificate: certify_baseline(&base)? };
        out.push(path, pretty_json(&Artifact::new(body, &config_text("baseline", args, &[])?))?);
    }
    Ok(())
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("INEQFORGE_THREADS") {
        let n: usize = v.parse().with_context(|| format!("INEQFORGE_THREADS=`{v}` is not a count"))?;
        ensure!(n >= 1, "INEQFORGE_THREADS must be at least 1");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    configure_threads()?;
    let mut out = Outputs(Vec::new());
    let violated = match &cli.command {
        Command::Certify(a) => certify(a, &mut out).map(|_| false),
        Command::Verify(a) => verify(a, &mut out),
        Command::Convert(a) => convert(a, &mut out).map(|_| false),
        Command::Sweep(a) => sweep(a, &mut out).map(|_| false),
        Command::Baseline(a) => baseline(a, &mut out).map(|_| false),
    }?;
    out.write()?;
    Ok(violated)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("ineqforge: certificate violates the empirical rate");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("ineqforge: {e:#}");
            ExitCode::from(1)
        }
    }
}
