use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use alphaduplex::config::load_config;
use alphaduplex::harness::{write_drops_csv, write_histogram_csv, write_records_csv};
use alphaduplex::schemes::run_schemes;
use alphaduplex::{
    alpha_histogram, run_sweep, Error, ExperimentConfig, NetworkRealization, PulseOverlapProfile,
    SchemeKind, UtilityKind,
};
use clap::{Args, Parser, Subcommand};

const THREADS_ENV: &str = "ALPHADUPLEX_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "alphaduplex",
    version,
    about = "Partial-overlap duplex cellular simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate the cross-direction leakage factors over α.
    Factors {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output CSV file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimize a single network realization.
    Run(RunArgs),
    /// Monte-Carlo sweep over the power-ratio grid.
    Sweep(SweepArgs),
    /// Sweep the α-duplex scheme only and report the α histograms.
    Hist(SweepArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Restrict to one scheme (alpha_duplex, half_duplex, full_duplex, fixed_alpha).
    #[arg(long)]
    scheme: Option<SchemeKind>,
    /// Restrict to one utility (sum_rate, sum_log_rate).
    #[arg(long)]
    utility: Option<UtilityKind>,
    /// Write per-cell allocations to this CSV file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    drops: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    scheme: Option<SchemeKind>,
    #[arg(long)]
    utility: Option<UtilityKind>,
}

fn load(path: Option<&Path>) -> Result<ExperimentConfig, Error> {
    let mut cfg = match path {
        Some(p) => load_config(p)?,
        None => ExperimentConfig::default(),
    };
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let cap: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            Error::Config(format!(
                "{THREADS_ENV} must be a positive integer, got '{raw}'"
            ))
        })?;
        cfg.workers = Some(cfg.workers.map_or(cap, |w| w.min(cap)));
    }
    Ok(cfg)
}

fn write_to(
    path: Option<&Path>,
    f: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> Result<(), Error> {
    let io_err = |p: &Path, e: io::Error| Error::Io {
        path: p.to_path_buf(),
        source: e,
    };
    match path {
        Some(p) => {
            let mut buf = Vec::new();
            f(&mut buf).map_err(|e| io_err(p, e))?;
            fs::write(p, buf).map_err(|e| io_err(p, e))
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock).map_err(|e| io_err(Path::new("<stdout>"), e))
        }
    }
}

fn factors(config: Option<&Path>, out: Option<&Path>) -> Result<(), Error> {
    let cfg = load(config)?;
    let profile = PulseOverlapProfile::standard(cfg.params.alpha_min, cfg.params.bandwidth)?;
    log::info!("fit residual {:.3e}", profile.fit_residual());
    write_to(out, |w| profile.write_csv(w))
}

fn run(args: &RunArgs) -> Result<(), Error> {
    let mut cfg = load(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.base_seed = seed;
    }
    let schemes = args.scheme.map_or(cfg.schemes.clone(), |s| vec![s]);
    let utilities = args.utility.map_or(cfg.utilities.clone(), |u| vec![u]);
    let params = &cfg.params;
    let profile = PulseOverlapProfile::standard(params.alpha_min, params.bandwidth)?;
    let net = NetworkRealization::generate(params, cfg.base_seed)?;

    let mut rows = Vec::new();
    println!("scheme,utility,utility_value,total,uplink,downlink,mean_alpha,converged");
    for &utility in &utilities {
        let results = run_schemes(
            &schemes,
            &net,
            &profile,
            params,
            utility,
            cfg.n_starts,
            cfg.base_seed,
            cfg.solver,
        )?;
        for r in results {
            println!(
                "{},{},{},{},{},{},{},{}",
                r.kind,
                utility,
                r.utility,
                r.per_user_total_rate_per_b,
                r.per_user_uplink_rate_per_b,
                r.per_user_downlink_rate_per_b,
                r.mean_alpha(),
                r.converged
            );
            rows.push(r);
        }
    }
    if let Some(out) = args.out.as_deref() {
        write_to(Some(out), |w| {
            writeln!(w, "scheme,utility,cell,p_u,p_b,alpha,rate_u,rate_b")?;
            for r in &rows {
                for i in 0..r.x.n_cells() {
                    writeln!(
                        w,
                        "{},{},{},{},{},{},{},{}",
                        r.kind,
                        r.utility_kind,
                        i,
                        r.x.p_u[i],
                        r.x.p_b[i],
                        r.x.alpha[i],
                        r.rate_u[i],
                        r.rate_b[i]
                    )?;
                }
            }
            Ok(())
        })?;
    }
    Ok(())
}

fn sweep_config(args: &SweepArgs, alpha_only: bool) -> Result<ExperimentConfig, Error> {
    let mut cfg = load(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.base_seed = seed;
    }
    if let Some(drops) = args.drops {
        cfg.n_drops = drops;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = Some(out.clone());
    }
    if let Some(s) = args.scheme {
        cfg.schemes = vec![s];
    }
    if alpha_only {
        cfg.schemes = vec![SchemeKind::AlphaDuplexOpt];
    }
    if let Some(u) = args.utility {
        cfg.utilities = vec![u];
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sweep(args: &SweepArgs, hist_only: bool) -> Result<(), Error> {
    let cfg = sweep_config(args, hist_only)?;
    log::info!(
        "{} ratios x {} drops, workers {:?}",
        cfg.ratio_grid.len(),
        cfg.n_drops,
        cfg.workers
    );
    let output = run_sweep(&cfg)?;
    let hists = alpha_histogram(&output.drops, cfg.params.alpha_min, cfg.hist_bins);
    let dir = cfg.output_dir.as_deref();
    if hist_only {
        write_to(dir.map(|d| d.join("alpha_hist.csv")).as_deref(), |w| {
            write_histogram_csv(&hists, w)
        })?;
        return Ok(());
    }
    write_to(dir.map(|d| d.join("sweep.csv")).as_deref(), |w| {
        write_records_csv(&output.records, w)
    })?;
    if let Some(d) = dir {
        write_to(Some(&d.join("drops.csv")), |w| {
            write_drops_csv(&output.drops, w)
        })?;
        write_to(Some(&d.join("alpha_hist.csv")), |w| {
            write_histogram_csv(&hists, w)
        })?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Factors { config, out } => factors(config.as_deref(), out.as_deref()),
        Command::Run(args) => run(args),
        Command::Sweep(args) => sweep(args, false),
        Command::Hist(args) => sweep(args, true),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}
