//! The proposed per-cell α-duplex allocation and its three benchmarks.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ipm::{BarrierSettings, OptimizationResult, ProblemSpec};
use crate::link::{DecisionVector, LinkModel, UtilityKind};
use crate::network::{NetworkRealization, SystemParams};
use crate::spectral::PulseOverlapProfile;

/// Overlap used by the fixed-power benchmark (the orthogonality point of the
/// sinc/sinc² pulse pair).
pub const FIXED_SCHEME_ALPHA: f64 = 0.275;

/// Default number of solver starts per optimized scheme.
pub const DEFAULT_STARTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeKind {
    AlphaDuplexOpt,
    HalfDuplexPC,
    FullDuplexPC,
    FixedAlphaFixedPower,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [
        SchemeKind::AlphaDuplexOpt,
        SchemeKind::HalfDuplexPC,
        SchemeKind::FullDuplexPC,
        SchemeKind::FixedAlphaFixedPower,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::AlphaDuplexOpt => "alpha_duplex",
            SchemeKind::HalfDuplexPC => "half_duplex",
            SchemeKind::FullDuplexPC => "full_duplex",
            SchemeKind::FixedAlphaFixedPower => "fixed_alpha",
        }
    }

    /// Overlap fraction pinned by the scheme, if any.
    pub fn pinned_alpha(self) -> Option<f64> {
        match self {
            SchemeKind::AlphaDuplexOpt => None,
            SchemeKind::HalfDuplexPC => Some(0.0),
            SchemeKind::FullDuplexPC => Some(1.0),
            SchemeKind::FixedAlphaFixedPower => Some(FIXED_SCHEME_ALPHA),
        }
    }

    fn seed_salt(self) -> u64 {
        match self {
            SchemeKind::AlphaDuplexOpt => 0x0a1f_a000,
            SchemeKind::HalfDuplexPC => 0x0a1f_a001,
            SchemeKind::FullDuplexPC => 0x0a1f_a002,
            SchemeKind::FixedAlphaFixedPower => 0x0a1f_a003,
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "alpha_duplex" | "alpha" | "ad" => Ok(SchemeKind::AlphaDuplexOpt),
            "half_duplex" | "hd" => Ok(SchemeKind::HalfDuplexPC),
            "full_duplex" | "fd" => Ok(SchemeKind::FullDuplexPC),
            "fixed_alpha" | "fixed" => Ok(SchemeKind::FixedAlphaFixedPower),
            other => Err(Error::Config(format!("unknown scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    pub utility: UtilityKind,
    pub n_starts: usize,
    pub seed: u64,
    pub solver: BarrierSettings,
}

impl SchemeConfig {
    pub fn new(kind: SchemeKind, utility: UtilityKind) -> Self {
        SchemeConfig {
            kind,
            utility,
            n_starts: DEFAULT_STARTS,
            seed: 0,
            solver: BarrierSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeResult {
    pub kind: SchemeKind,
    pub utility_kind: UtilityKind,
    pub x: DecisionVector,
    pub rate_u: Vec<f64>,
    pub rate_b: Vec<f64>,
    pub utility: f64,
    /// `(1/N)·Σ(R_u + R_b)/B`.
    pub per_user_total_rate_per_b: f64,
    pub per_user_uplink_rate_per_b: f64,
    pub per_user_downlink_rate_per_b: f64,
    pub converged: bool,
    pub starts_used: usize,
    /// Fingerprint of the realization the scheme ran on.
    pub realization: u64,
}

impl SchemeResult {
    fn evaluate(
        kind: SchemeKind,
        utility_kind: UtilityKind,
        x: DecisionVector,
        model: &LinkModel<'_>,
    ) -> Result<Self> {
        let metrics = model.metrics(&x);
        let utility =
            crate::link::utility_from_rates(&metrics.rate_u, &metrics.rate_b, utility_kind)?;
        let b = model.params.bandwidth;
        Ok(SchemeResult {
            kind,
            utility_kind,
            per_user_total_rate_per_b: metrics.per_user_total_per_hz(b),
            per_user_uplink_rate_per_b: metrics.per_user_uplink_per_hz(b),
            per_user_downlink_rate_per_b: metrics.per_user_downlink_per_hz(b),
            rate_u: metrics.rate_u,
            rate_b: metrics.rate_b,
            utility,
            x,
            converged: true,
            starts_used: 0,
            realization: model.net.fingerprint(),
        })
    }

    fn from_optimization(
        kind: SchemeKind,
        utility_kind: UtilityKind,
        r: OptimizationResult,
        model: &LinkModel<'_>,
    ) -> Result<Self> {
        let mut out = Self::evaluate(kind, utility_kind, r.x_opt, model)?;
        out.converged = r.converged;
        out.starts_used = r.starts_used;
        Ok(out)
    }

    pub fn mean_alpha(&self) -> f64 {
        self.x.alpha.iter().sum::<f64>() / self.x.alpha.len() as f64
    }
}

fn tag(kind: SchemeKind) -> impl Fn(Error) -> Error {
    move |e| Error::Scheme {
        scheme: kind.name().to_string(),
        source: Box::new(e),
    }
}

/// Runs one scheme in isolation.
pub fn run_scheme(
    cfg: &SchemeConfig,
    net: &NetworkRealization,
    profile: &PulseOverlapProfile,
    params: &SystemParams,
) -> Result<SchemeResult> {
    run_with_candidates(cfg, net, profile, params, &[])
}

/// Like [`run_scheme`], but for [`SchemeKind::AlphaDuplexOpt`] the
/// `candidates` (typically the benchmark solutions) are mapped into the
/// α-duplex box, used as extra solver starts and scored directly, so the
/// returned utility is never below theirs.
pub fn run_with_candidates(
    cfg: &SchemeConfig,
    net: &NetworkRealization,
    profile: &PulseOverlapProfile,
    params: &SystemParams,
    candidates: &[DecisionVector],
) -> Result<SchemeResult> {
    let model = LinkModel::new(params, net, profile);
    let seed = cfg.seed ^ cfg.kind.seed_salt();
    let n = net.n_cells();
    match cfg.kind {
        SchemeKind::FixedAlphaFixedPower => {
            let x = DecisionVector::uniform(
                n,
                params.p_u_max,
                params.p_b_tot / n as f64,
                FIXED_SCHEME_ALPHA,
            );
            SchemeResult::evaluate(cfg.kind, cfg.utility, x, &model).map_err(tag(cfg.kind))
        }
        SchemeKind::HalfDuplexPC | SchemeKind::FullDuplexPC => {
            let alpha = cfg.kind.pinned_alpha().expect("pinned scheme");
            let spec = ProblemSpec::new(params, net, profile, cfg.utility).with_fixed_alpha(alpha);
            let r = spec
                .multi_start_solve(cfg.n_starts, seed, &[], cfg.solver)
                .map_err(tag(cfg.kind))?;
            SchemeResult::from_optimization(cfg.kind, cfg.utility, r, &model).map_err(tag(cfg.kind))
        }
        SchemeKind::AlphaDuplexOpt => {
            let spec = ProblemSpec::new(params, net, profile, cfg.utility);
            let mapped: Vec<DecisionVector> = candidates
                .iter()
                .map(|x| DecisionVector {
                    p_u: x.p_u.clone(),
                    p_b: x.p_b.clone(),
                    alpha: x
                        .alpha
                        .iter()
                        .map(|a| a.clamp(params.alpha_min, 1.0))
                        .collect(),
                })
                .collect();
            let r = spec
                .multi_start_solve(cfg.n_starts, seed, &mapped, cfg.solver)
                .map_err(tag(cfg.kind))?;
            let mut best = SchemeResult::from_optimization(cfg.kind, cfg.utility, r, &model)
                .map_err(tag(cfg.kind))?;
            for x in mapped {
                if !spec.is_feasible(&x, 1e-12) {
                    continue;
                }
                let Ok(candidate) = SchemeResult::evaluate(cfg.kind, cfg.utility, x, &model) else {
                    continue;
                };
                if candidate.utility > best.utility {
                    log::debug!(
                        "boundary candidate beats interior solution: {} > {}",
                        candidate.utility,
                        best.utility
                    );
                    best = SchemeResult {
                        converged: best.converged,
                        starts_used: best.starts_used,
                        ..candidate
                    };
                }
            }
            Ok(best)
        }
    }
}

/// Runs the requested schemes on one realization. Benchmarks run first and
/// their allocations are handed to the α-duplex optimizer as candidates.
/// Results come back in the order of `kinds`.
#[allow(clippy::too_many_arguments)]
pub fn run_schemes(
    kinds: &[SchemeKind],
    net: &NetworkRealization,
    profile: &PulseOverlapProfile,
    params: &SystemParams,
    utility: UtilityKind,
    n_starts: usize,
    seed: u64,
    solver: BarrierSettings,
) -> Result<Vec<SchemeResult>> {
    let cfg = |kind| SchemeConfig {
        kind,
        utility,
        n_starts,
        seed,
        solver,
    };
    let mut done: Vec<SchemeResult> = Vec::with_capacity(kinds.len());
    for &kind in kinds.iter().filter(|&&k| k != SchemeKind::AlphaDuplexOpt) {
        done.push(run_scheme(&cfg(kind), net, profile, params)?);
    }
    if kinds.contains(&SchemeKind::AlphaDuplexOpt) {
        let candidates: Vec<DecisionVector> = done.iter().map(|r| r.x.clone()).collect();
        done.push(run_with_candidates(
            &cfg(SchemeKind::AlphaDuplexOpt),
            net,
            profile,
            params,
            &candidates,
        )?);
    }
    Ok(kinds
        .iter()
        .map(|k| {
            done.iter()
                .find(|r| r.kind == *k)
                .expect("scheme ran")
                .clone()
        })
        .collect())
}

/// All four schemes on the same realization, in [`SchemeKind::ALL`] order.
pub fn compare_all(
    net: &NetworkRealization,
    profile: &PulseOverlapProfile,
    params: &SystemParams,
    utility: UtilityKind,
    n_starts: usize,
    seed: u64,
) -> Result<Vec<SchemeResult>> {
    run_schemes(
        &SchemeKind::ALL,
        net,
        profile,
        params,
        utility,
        n_starts,
        seed,
        BarrierSettings::default(),
    )
}
