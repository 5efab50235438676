//! `fdmimo`: runs rate experiments and writes CSV or JSON results.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use fdmimo::config::{HomogeneousConfig, Link, Purpose, SystemConfig, SystemConfigFile};
use fdmimo::experiments::{self, ExperimentResult, OutputFormat};
use fdmimo::profile::LargeScaleProfile;
use fdmimo::rates::{self, Csi, McSettings, Plan, RateReport, System};
use fdmimo::scenario::ScenarioParams;
use fdmimo::bounds;

#[derive(Parser, Debug)]
#[command(name = "fdmimo", version, about = "Full-duplex multi-cell massive MIMO rate experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo rates against closed-form bounds in the homogeneous network.
    Tightness(HomogeneousArgs),
    /// FD over TDD gains versus M, with and without power scaling.
    PowerScaling(ScalingArgs),
    /// Spectral-efficiency gain versus antenna-reduction tradeoff.
    Tradeoff(TradeoffArgs),
    /// Small-cell drops: gains versus the number of BS antennas.
    GainVsM(DropArgs),
    /// Small-cell drops: gains versus the dynamic-range parameter.
    GainVsKappa(DropArgs),
    /// Per-user rates of a single configuration.
    Rates(RatesArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CsiArg {
    Perfect,
    Imperfect,
}

impl From<CsiArg> for Csi {
    fn from(c: CsiArg) -> Self {
        match c {
            CsiArg::Perfect => Csi::Perfect,
            CsiArg::Imperfect => Csi::Imperfect,
        }
    }
}

#[derive(Args, Debug)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Monte Carlo trials per evaluation.
    #[arg(long)]
    trials: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Debug)]
struct HomogeneousArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated BS antenna counts.
    #[arg(long, value_delimiter = ',')]
    m_list: Option<Vec<usize>>,
}

#[derive(Args, Debug)]
struct ScalingArgs {
    #[command(flatten)]
    inner: HomogeneousArgs,
    #[arg(long, value_enum, default_value_t = CsiArg::Perfect)]
    csi: CsiArg,
}

#[derive(Args, Debug)]
struct TradeoffArgs {
    #[command(flatten)]
    inner: HomogeneousArgs,
    #[arg(long, value_enum, default_value_t = CsiArg::Perfect)]
    csi: CsiArg,
    /// Comma-separated target spectral-efficiency gains.
    #[arg(long, value_delimiter = ',')]
    gains: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct DropArgs {
    #[command(flatten)]
    common: Common,
    /// Number of random drops.
    #[arg(long)]
    drops: Option<usize>,
    /// Comma-separated BS antenna counts (gain-vs-m).
    #[arg(long, value_delimiter = ',')]
    m_list: Option<Vec<usize>>,
    /// Comma-separated dynamic ranges in dB (gain-vs-kappa).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    kappa_db_list: Option<Vec<f64>>,
    /// Desk-scale preset: 20 drops, M <= 100, 200 trials.
    #[arg(long)]
    desk: bool,
}

#[derive(Args, Debug)]
struct RatesArgs {
    #[command(flatten)]
    common: Common,
    /// Monte Carlo ergodic rates or closed-form lower bounds (needs M >= 3).
    #[arg(long, value_enum, default_value_t = Method::Mc)]
    method: Method,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Mc,
    ClosedForm,
}

/// Large-scale gains of a `rates` configuration.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ProfileSpec {
    Uniform {
        same_cell: f64,
        cross_cell: f64,
        #[serde(default)]
        bs_self: f64,
        #[serde(default)]
        bs_cross: f64,
        #[serde(default)]
        ue_ue: f64,
        #[serde(default)]
        ue_ue_cross: f64,
    },
    Explicit(LargeScaleProfile),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RatesConfig {
    system: SystemConfigFile,
    profile: ProfileSpec,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn homogeneous(common: &Common) -> Result<HomogeneousConfig> {
    let h = match &common.config {
        Some(p) => read_json(p)?,
        None => HomogeneousConfig::benchmark(100),
    };
    h.validate()?;
    Ok(h)
}

fn scenario(common: &Common) -> Result<ScenarioParams> {
    let p: ScenarioParams = match &common.config {
        Some(path) => read_json(path)?,
        None => ScenarioParams::default(),
    };
    p.validate()?;
    Ok(p)
}

fn settings(common: &Common, default_trials: usize) -> McSettings {
    McSettings::new(common.trials.unwrap_or(default_trials), common.seed)
}

fn writer(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(io::BufWriter::new(
            fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_result(result: &ExperimentResult, common: &Common) -> Result<()> {
    experiments::emit(result, common.format.into(), writer(&common.out)?)?;
    Ok(())
}

fn drop_params(args: &DropArgs, sweep_kappa: bool) -> Result<(ScenarioParams, usize, usize)> {
    let mut params = scenario(&args.common)?;
    if let Some(m) = &args.m_list {
        params.m_list = m.clone();
    }
    if let Some(k) = &args.kappa_db_list {
        params.kappa_db_list = k.clone();
    }
    let (mut drops, mut trials) = (100, 1000);
    if args.desk {
        drops = 20;
        trials = 200;
        params.m_list.retain(|&m| m <= 100);
        if params.m_list.is_empty() && !sweep_kappa {
            bail!("--desk keeps only M <= 100, and no such M was requested");
        }
    }
    params.validate()?;
    Ok((
        params,
        args.drops.unwrap_or(drops),
        args.common.trials.unwrap_or(trials),
    ))
}

fn mc_reports(profile: &LargeScaleProfile, cfg: &SystemConfig, s: McSettings) -> Result<Vec<RateReport>> {
    let plan = Plan {
        fd_perfect: true,
        tdd_perfect: true,
        fd_imperfect_ul: true,
        fd_imperfect_dl: false,
        tdd_imperfect: true,
    };
    let out = rates::simulate(profile, cfg, plan, s)?;
    let mut fd_imperfect = out.fd_imperfect.context("missing full-duplex imperfect-CSI rates")?;
    fd_imperfect.dl = rates::dl_rate_fd_imperfect(profile, cfg)?.dl;
    Ok(vec![
        out.fd_perfect.context("missing full-duplex perfect-CSI rates")?,
        fd_imperfect,
        out.tdd_perfect.context("missing TDD perfect-CSI rates")?,
        out.tdd_imperfect.context("missing TDD imperfect-CSI rates")?,
    ])
}

fn run_rates(args: &RatesArgs) -> Result<()> {
    let Some(path) = &args.common.config else {
        bail!("`rates` needs --config <file> with `system` and `profile` sections");
    };
    let rc: RatesConfig = read_json(path)?;
    let cfg = rc.system.resolve()?;
    for w in cfg.validate(Purpose::Simulation).warnings {
        eprintln!("warning: {w}");
    }
    let profile = match rc.profile {
        ProfileSpec::Explicit(p) => p,
        ProfileSpec::Uniform {
            same_cell,
            cross_cell,
            bs_self,
            bs_cross,
            ue_ue,
            ue_ue_cross,
        } => LargeScaleProfile::from_fn(
            &cfg,
            |j, l, _| if j == l { same_cell } else { cross_cell },
            |j, l, _| if j == l { same_cell } else { cross_cell },
            |j, l| if j == l { bs_self } else { bs_cross },
            |l, _, j, _| if j == l { ue_ue } else { ue_ue_cross },
        ),
    };
    let reports = match args.method {
        Method::Mc => mc_reports(&profile, &cfg, settings(&args.common, 10_000))?,
        Method::ClosedForm => {
            let cf = bounds::ClosedForms::new(&profile, &cfg)?;
            let mut out = Vec::with_capacity(4);
            for system in [System::FullDuplex, System::Tdd] {
                for csi in [Csi::Perfect, Csi::Imperfect] {
                    out.push(cf.report(system, csi)?);
                }
            }
            out
        }
    };
    for r in &reports {
        for link in [Link::Uplink, Link::Downlink] {
            eprintln!(
                "{} {} {link}: {:.4} bits/s/Hz (network)",
                r.system,
                r.csi,
                r.sum_se(link)
            );
        }
    }
    let mut w = writer(&args.common.out)?;
    match args.common.format {
        Format::Csv => rates::write_rate_csv(&reports, &mut w)?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, &reports)?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Tightness(a) => {
            let h = homogeneous(&a.common)?;
            let m = a.m_list.clone().unwrap_or_else(|| vec![50, 100, 200, 300, 400, 500]);
            let r = experiments::tightness(&h, &m, settings(&a.common, 5000))?;
            write_result(&r, &a.common)
        }
        Command::PowerScaling(a) => {
            let h = homogeneous(&a.inner.common)?;
            let m = a.inner.m_list.clone().unwrap_or_else(|| vec![16, 32, 64, 128, 256, 512]);
            let r = experiments::power_scaling(&h, &m, a.csi.into(), settings(&a.inner.common, 2000))?;
            write_result(&r, &a.inner.common)
        }
        Command::Tradeoff(a) => {
            let h = homogeneous(&a.inner.common)?;
            let m = a.inner.m_list.clone().unwrap_or_else(|| vec![50, 100, 200, 300, 500]);
            let gains = a.gains.clone().unwrap_or_else(|| vec![1.0, 1.2, 1.4, 1.6, 1.8]);
            let r = experiments::tradeoff(&h, &m, &gains, a.csi.into(), settings(&a.inner.common, 1000))?;
            write_result(&r, &a.inner.common)
        }
        Command::GainVsM(a) => {
            let (params, drops, trials) = drop_params(&a, false)?;
            let r = experiments::gain_vs_m(&params, drops, a.common.seed, trials)?;
            write_result(&r, &a.common)
        }
        Command::GainVsKappa(a) => {
            let (params, drops, trials) = drop_params(&a, true)?;
            let r = experiments::gain_vs_kappa(&params, drops, a.common.seed, trials)?;
            write_result(&r, &a.common)
        }
        Command::Rates(a) => run_rates(&a),
    }
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
