//! Monte-Carlo experiment driver: ratio sweeps, aggregation, α histograms
//! and CSV output.
//!
//! Work is split into `(ratio, drop)` units that run in parallel; each unit
//! writes into its own pre-assigned slot, so the output is identical for
//! any worker count.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ipm::BarrierSettings;
use crate::link::UtilityKind;
use crate::network::{NetworkRealization, SystemParams};
use crate::schemes::{run_schemes, SchemeKind, DEFAULT_STARTS};
use crate::spectral::PulseOverlapProfile;

/// Header written by [`write_records_csv`].
pub const RECORD_HEADER: &str =
    "ratio,scheme,utility,mean_total,ci_total,mean_ul,ci_ul,mean_dl,ci_dl,mean_alpha,conv_frac";

/// Power-disparity grid `N·p_u_max/p_b_tot`. With the default BS budget this
/// spans user powers of 0.1, 0.2, 0.5, 1 and 2 W.
pub const DEFAULT_RATIOS: [f64; 5] = [0.0025, 0.005, 0.0125, 0.025, 0.05];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: SystemParams,
    pub ratio_grid: Vec<f64>,
    pub n_drops: usize,
    pub base_seed: u64,
    pub utilities: Vec<UtilityKind>,
    pub schemes: Vec<SchemeKind>,
    pub n_starts: usize,
    pub output_dir: Option<PathBuf>,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    pub hist_bins: usize,
    pub solver: BarrierSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            params: SystemParams::default(),
            ratio_grid: DEFAULT_RATIOS.to_vec(),
            n_drops: 100,
            base_seed: 1,
            utilities: UtilityKind::ALL.to_vec(),
            schemes: SchemeKind::ALL.to_vec(),
            n_starts: DEFAULT_STARTS,
            output_dir: None,
            workers: None,
            hist_bins: 10,
            solver: BarrierSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.ratio_grid.is_empty() {
            return Err(Error::Config("ratio_grid is empty".into()));
        }
        if self.ratio_grid.iter().any(|&r| !(r > 0.0 && r.is_finite()))
            || self.ratio_grid.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::Config(
                "ratio_grid must be strictly positive and ascending".into(),
            ));
        }
        if self.n_drops == 0 {
            return Err(Error::Config("n_drops must be at least 1".into()));
        }
        if self.utilities.is_empty() || self.schemes.is_empty() {
            return Err(Error::Config(
                "at least one utility and one scheme are required".into(),
            ));
        }
        if self.n_starts == 0 {
            return Err(Error::Config("n_starts must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.hist_bins == 0 {
            return Err(Error::Config("hist_bins must be at least 1".into()));
        }
        Ok(())
    }

    /// System parameters at one grid point: `p_u_max = ratio·p_b_tot/N`.
    pub fn params_at(&self, ratio: f64) -> SystemParams {
        SystemParams {
            p_u_max: ratio * self.params.p_b_tot / self.params.n_cells as f64,
            ..self.params.clone()
        }
    }
}

/// Seed of drop `index`; the same drops are reused at every ratio.
pub fn drop_seed(base_seed: u64, index: usize) -> u64 {
    base_seed ^ index as u64
}

/// One scheme on one drop.
#[derive(Debug, Clone, PartialEq)]
pub struct DropRecord {
    pub ratio: f64,
    pub drop: usize,
    pub seed: u64,
    pub scheme: SchemeKind,
    pub utility: UtilityKind,
    pub utility_value: f64,
    pub total: f64,
    pub uplink: f64,
    pub downlink: f64,
    pub mean_alpha: f64,
    pub converged: bool,
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub ratio: f64,
    pub scheme: SchemeKind,
    pub utility: UtilityKind,
    pub mean_total: f64,
    pub ci_total: f64,
    pub mean_ul: f64,
    pub ci_ul: f64,
    pub mean_dl: f64,
    pub ci_dl: f64,
    pub mean_alpha: f64,
    pub conv_frac: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub records: Vec<SweepRecord>,
    pub drops: Vec<DropRecord>,
}

impl SweepOutput {
    pub fn record(
        &self,
        ratio: f64,
        scheme: SchemeKind,
        utility: UtilityKind,
    ) -> Option<&SweepRecord> {
        self.records
            .iter()
            .find(|r| r.ratio == ratio && r.scheme == scheme && r.utility == utility)
    }
}

/// Sample mean and 95% half-width `1.96·s/√n`.
pub fn mean_and_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * var.sqrt() / (n as f64).sqrt())
}

fn ensure_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"").map_err(|e| Error::io(&probe, e))?;
    fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))?;
    Ok(())
}

fn run_unit(
    cfg: &ExperimentConfig,
    profile: &PulseOverlapProfile,
    ratio: f64,
    drop: usize,
) -> Result<Vec<DropRecord>> {
    let params = cfg.params_at(ratio);
    let seed = drop_seed(cfg.base_seed, drop);
    let net = NetworkRealization::generate(&params, seed)?;
    let mut out = Vec::with_capacity(cfg.utilities.len() * cfg.schemes.len());
    for &utility in &cfg.utilities {
        let results = run_schemes(
            &cfg.schemes,
            &net,
            profile,
            &params,
            utility,
            cfg.n_starts,
            seed,
            cfg.solver,
        )?;
        for r in results {
            out.push(DropRecord {
                ratio,
                drop,
                seed,
                scheme: r.kind,
                utility,
                utility_value: r.utility,
                total: r.per_user_total_rate_per_b,
                uplink: r.per_user_uplink_rate_per_b,
                downlink: r.per_user_downlink_rate_per_b,
                mean_alpha: r.mean_alpha(),
                converged: r.converged,
                alphas: r.x.alpha,
            });
        }
    }
    Ok(out)
}

/// Means and confidence intervals per `(ratio, utility, scheme)`, in grid,
/// utility and scheme order.
pub fn aggregate(cfg: &ExperimentConfig, drops: &[DropRecord]) -> Vec<SweepRecord> {
    let mut records = Vec::new();
    for &ratio in &cfg.ratio_grid {
        for &utility in &cfg.utilities {
            for &scheme in &cfg.schemes {
                let rows: Vec<&DropRecord> = drops
                    .iter()
                    .filter(|d| d.ratio == ratio && d.utility == utility && d.scheme == scheme)
                    .collect();
                if rows.is_empty() {
                    continue;
                }
                let col = |f: fn(&DropRecord) -> f64| rows.iter().map(|d| f(d)).collect::<Vec<_>>();
                let (mean_total, ci_total) = mean_and_ci(&col(|d| d.total));
                let (mean_ul, ci_ul) = mean_and_ci(&col(|d| d.uplink));
                let (mean_dl, ci_dl) = mean_and_ci(&col(|d| d.downlink));
                let (mean_alpha, _) = mean_and_ci(&col(|d| d.mean_alpha));
                let conv_frac =
                    rows.iter().filter(|d| d.converged).count() as f64 / rows.len() as f64;
                records.push(SweepRecord {
                    ratio,
                    scheme,
                    utility,
                    mean_total,
                    ci_total,
                    mean_ul,
                    ci_ul,
                    mean_dl,
                    ci_dl,
                    mean_alpha,
                    conv_frac,
                });
            }
        }
    }
    records
}

/// Runs every configured scheme and utility on `n_drops` realizations at
/// each ratio.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    if let Some(dir) = &cfg.output_dir {
        ensure_writable(dir)?;
    }
    let profile = PulseOverlapProfile::standard(cfg.params.alpha_min, cfg.params.bandwidth)?;
    let units: Vec<(f64, usize)> = cfg
        .ratio_grid
        .iter()
        .flat_map(|&r| (0..cfg.n_drops).map(move |d| (r, d)))
        .collect();
    let work = || {
        units
            .par_iter()
            .map(|&(ratio, drop)| run_unit(cfg, &profile, ratio, drop))
            .collect::<Result<Vec<_>>>()
    };
    let per_unit = match cfg.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?
            .install(work)?,
        None => work()?,
    };
    let drops: Vec<DropRecord> = per_unit.into_iter().flatten().collect();
    Ok(SweepOutput {
        records: aggregate(cfg, &drops),
        drops,
    })
}

/// Frequencies of the per-cell α chosen by the α-duplex optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaHistogram {
    pub ratio: f64,
    pub utility: UtilityKind,
    /// `bins + 1` ascending edges over `[α_min, 1]`.
    pub edges: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub samples: usize,
}

impl AlphaHistogram {
    /// Mean of the underlying α samples is not kept; this is the
    /// frequency-weighted bin centre.
    pub fn centre_mean(&self) -> f64 {
        self.frequencies
            .iter()
            .enumerate()
            .map(|(k, f)| f * 0.5 * (self.edges[k] + self.edges[k + 1]))
            .sum()
    }
}

/// Per `(ratio, utility)` histogram of α values from α-duplex drops.
/// The last bin is closed on the right so `α = 1` is counted.
pub fn alpha_histogram(drops: &[DropRecord], alpha_min: f64, bins: usize) -> Vec<AlphaHistogram> {
    let bins = bins.max(1);
    let width = (1.0 - alpha_min) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|k| alpha_min + k as f64 * width).collect();
    let mut keys: Vec<(f64, UtilityKind)> = Vec::new();
    for d in drops
        .iter()
        .filter(|d| d.scheme == SchemeKind::AlphaDuplexOpt)
    {
        if !keys.iter().any(|&(r, u)| r == d.ratio && u == d.utility) {
            keys.push((d.ratio, d.utility));
        }
    }
    keys.into_iter()
        .map(|(ratio, utility)| {
            let mut counts = vec![0usize; bins];
            for d in drops.iter().filter(|d| {
                d.scheme == SchemeKind::AlphaDuplexOpt && d.ratio == ratio && d.utility == utility
            }) {
                for &a in &d.alphas {
                    let k = if width > 0.0 {
                        ((a - alpha_min) / width)
                            .floor()
                            .clamp(0.0, (bins - 1) as f64) as usize
                    } else {
                        bins - 1
                    };
                    counts[k] += 1;
                }
            }
            let samples: usize = counts.iter().sum();
            AlphaHistogram {
                ratio,
                utility,
                edges: edges.clone(),
                frequencies: counts
                    .iter()
                    .map(|&c| c as f64 / samples.max(1) as f64)
                    .collect(),
                samples,
            }
        })
        .collect()
}

pub fn write_records_csv<W: Write>(records: &[SweepRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{RECORD_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.ratio,
            r.scheme,
            r.utility,
            r.mean_total,
            r.ci_total,
            r.mean_ul,
            r.ci_ul,
            r.mean_dl,
            r.ci_dl,
            r.mean_alpha,
            r.conv_frac
        )?;
    }
    Ok(())
}

/// Writes the aggregated records to `path`.
pub fn emit_csv(records: &[SweepRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidParameter("no records to write".into()));
    }
    let mut buf = Vec::new();
    write_records_csv(records, &mut buf).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Parses the output of [`write_records_csv`].
pub fn parse_records_csv(text: &str) -> Result<Vec<SweepRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == RECORD_HEADER => {}
        other => {
            return Err(Error::Config(format!("unexpected header {other:?}")));
        }
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 11 {
                return Err(Error::Config(format!("expected 11 columns in '{line}'")));
            }
            let num = |k: usize| {
                cols[k]
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("column {k} in '{line}': {e}")))
            };
            Ok(SweepRecord {
                ratio: num(0)?,
                scheme: cols[1].parse()?,
                utility: cols[2].parse()?,
                mean_total: num(3)?,
                ci_total: num(4)?,
                mean_ul: num(5)?,
                ci_ul: num(6)?,
                mean_dl: num(7)?,
                ci_dl: num(8)?,
                mean_alpha: num(9)?,
                conv_frac: num(10)?,
            })
        })
        .collect()
}

pub fn write_drops_csv<W: Write>(drops: &[DropRecord], mut out: W) -> std::io::Result<()> {
    writeln!(
        out,
        "ratio,drop,seed,scheme,utility,utility_value,total,uplink,downlink,mean_alpha,converged,alphas"
    )?;
    for d in drops {
        let alphas: Vec<String> = d.alphas.iter().map(|a| a.to_string()).collect();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            d.ratio,
            d.drop,
            d.seed,
            d.scheme,
            d.utility,
            d.utility_value,
            d.total,
            d.uplink,
            d.downlink,
            d.mean_alpha,
            d.converged,
            alphas.join(";")
        )?;
    }
    Ok(())
}

pub fn write_histogram_csv<W: Write>(hists: &[AlphaHistogram], mut out: W) -> std::io::Result<()> {
    writeln!(out, "ratio,utility,bin_lo,bin_hi,frequency")?;
    for h in hists {
        for (k, f) in h.frequencies.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{}",
                h.ratio,
                h.utility,
                h.edges[k],
                h.edges[k + 1],
                f
            )?;
        }
    }
    Ok(())
}
