//! Acceptance gate. Runs each criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero if any failed.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use alphaduplex::harness::{emit_csv, run_sweep, write_drops_csv, ExperimentConfig, SweepOutput};
use alphaduplex::ipm::{AffineConstraint, BarrierSolver, ConstraintSet, SmoothObjective};
use alphaduplex::schemes::compare_all;
use alphaduplex::spectral::{cross_factor_downlink, cross_factor_uplink, DEFAULT_QUADRATURE_TOL};
use alphaduplex::{
    BarrierSettings, DecisionVector, Error, Fading, LinkModel, NetworkRealization, ProblemSpec,
    PulseOverlapProfile, Result, SchemeKind, SystemParams, UtilityKind,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const ALPHA_MIN: f64 = 0.275;
const B: f64 = 20e6;

type Check = (usize, &'static str, fn() -> Result<Verdict>);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn c1_orthogonality() -> Result<Verdict> {
    let cu = cross_factor_uplink(ALPHA_MIN, B, DEFAULT_QUADRATURE_TOL)?;
    let cu1 = cross_factor_uplink(1.0, B, DEFAULT_QUADRATURE_TOL)?;
    let cb = cross_factor_downlink(ALPHA_MIN, B, DEFAULT_QUADRATURE_TOL)?;
    let limit = 1e-3 * cu1.abs();
    Ok(verdict(
        cu.abs() <= limit && cb > 0.0,
        format!(
            "|C_u(0.275)| = {:.4e} (limit {limit:.4e}), C_b(0.275) = {cb:.5}",
            cu.abs()
        ),
    ))
}

fn c2_monotone() -> Result<Verdict> {
    let grid: Vec<f64> = (0..64)
        .map(|k| ALPHA_MIN + (1.0 - ALPHA_MIN) * k as f64 / 63.0)
        .collect();
    let mut worst = f64::INFINITY;
    let mut prev = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &a in &grid {
        let cu2 = cross_factor_uplink(a, B, DEFAULT_QUADRATURE_TOL)?.powi(2);
        let cb2 = cross_factor_downlink(a, B, DEFAULT_QUADRATURE_TOL)?.powi(2);
        worst = worst.min(cu2 - prev.0).min(cb2 - prev.1);
        prev = (cu2, cb2);
    }
    Ok(verdict(
        worst >= 0.0,
        format!("smallest step in |C|^2 over 64 points = {worst:.3e}"),
    ))
}

fn c3_gradient() -> Result<Verdict> {
    let params = SystemParams {
        n_cells: 3,
        ..SystemParams::default()
    };
    let profile = PulseOverlapProfile::standard(params.alpha_min, params.bandwidth)?;
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for point in 0..20u64 {
        let net = NetworkRealization::generate(&params, 1000 + point)?;
        let model = LinkModel::new(&params, &net, &profile);
        let room = params.p_b_tot / 3.0 - params.p_b_min;
        let x = DecisionVector {
            p_u: (0..3)
                .map(|_| params.p_u_max * rng.random_range(0.05..0.95))
                .collect(),
            p_b: (0..3)
                .map(|_| params.p_b_min + room * rng.random_range(0.05..0.95))
                .collect(),
            alpha: (0..3).map(|_| rng.random_range(0.3..0.98)).collect(),
        };
        for kind in UtilityKind::ALL {
            let g = model.utility_gradient(&x, kind)?;
            let flat = x.to_flat();
            let mut fd = Vec::with_capacity(flat.len());
            for k in 0..flat.len() {
                let h = 1e-5 * flat[k].abs().max(1e-3);
                let (mut p, mut m) = (flat.clone(), flat.clone());
                p[k] += h;
                m[k] -= h;
                fd.push(
                    (model.utility(&DecisionVector::from_flat(&p), kind)?
                        - model.utility(&DecisionVector::from_flat(&m), kind)?)
                        / (2.0 * h),
                );
            }
            let scale = fd.iter().fold(0.0f64, |s, v| s.max(v.abs()));
            for (a, n) in g.iter().zip(&fd) {
                worst = worst.max((a - n).abs() / n.abs().max(1e-3 * scale));
            }
        }
    }
    Ok(verdict(
        worst <= 1e-4,
        format!("max relative gradient error {worst:.2e}"),
    ))
}

/// `−(x − 2)²` on `[0, 1]`; the optimum sits on the boundary `x = 1`.
struct Parabola;

impl SmoothObjective for Parabola {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, z: &[f64]) -> Result<f64> {
        Ok(-(z[0] - 2.0).powi(2))
    }
    fn gradient(&self, z: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![-2.0 * (z[0] - 2.0)])
    }
}

fn c4_solver_sanity() -> Result<Verdict> {
    let bounds = ConstraintSet::new(vec![
        AffineConstraint::single(0, -1.0, 0.0),
        AffineConstraint::single(0, 1.0, -1.0),
    ]);
    let out =
        BarrierSolver::new(&Parabola, &bounds, BarrierSettings::default()).minimize(&[0.5])?;
    let err_1d = (out.z[0] - 1.0).abs();

    let params = SystemParams {
        n_cells: 1,
        fading: Fading::None,
        p_b_tot: 40.0,
        ..SystemParams::default()
    };
    let net = NetworkRealization::generate(&params, 2)?;
    let profile = PulseOverlapProfile::standard(params.alpha_min, params.bandwidth)?;
    let r = ProblemSpec::new(&params, &net, &profile, UtilityKind::SumRate)
        .solve(None, BarrierSettings::default())?;
    let x = &r.x_opt;
    let gaps = [
        1.0 - x.alpha[0],
        1.0 - x.p_u[0] / params.p_u_max,
        1.0 - x.p_b[0] / params.p_b_tot,
    ];
    let worst = gaps.iter().fold(0.0f64, |m, g| m.max(*g));
    Ok(verdict(
        err_1d <= 1e-4 && worst <= r.final_gap_proxy,
        format!(
            "1-D error {err_1d:.2e}; N=1 largest relative gap to upper bound {worst:.2e} (slack {:.2e})",
            r.final_gap_proxy
        ),
    ))
}

fn c5_grid_oracle() -> Result<Verdict> {
    let params = SystemParams {
        n_cells: 2,
        fading: Fading::None,
        ..SystemParams::default()
    };
    let profile = PulseOverlapProfile::standard(params.alpha_min, params.bandwidth)?;
    let mut worst = f64::INFINITY;
    let lin = |lo: f64, hi: f64, k: usize| lo + (hi - lo) * k as f64 / 8.0;
    let p_b_hi = params.p_b_tot - params.p_b_min;
    for seed in 0..3u64 {
        let net = NetworkRealization::generate(&params, seed)?;
        let model = LinkModel::new(&params, &net, &profile);
        let spec = ProblemSpec::new(&params, &net, &profile, UtilityKind::SumRate);
        let solved = spec.multi_start_solve(5, seed, &[], BarrierSettings::default())?;
        let mut best = f64::NEG_INFINITY;
        for idx in 0..9usize.pow(6) {
            let d: Vec<usize> = (0..6).map(|j| idx / 9usize.pow(j) % 9).collect();
            let x = DecisionVector {
                p_u: vec![
                    lin(0.0, params.p_u_max, d[0]),
                    lin(0.0, params.p_u_max, d[1]),
                ],
                p_b: vec![
                    lin(params.p_b_min, p_b_hi, d[2]),
                    lin(params.p_b_min, p_b_hi, d[3]),
                ],
                alpha: vec![
                    lin(params.alpha_min, 1.0, d[4]),
                    lin(params.alpha_min, 1.0, d[5]),
                ],
            };
            if x.p_b.iter().sum::<f64>() <= params.p_b_tot {
                best = best.max(model.utility(&x, UtilityKind::SumRate)?);
            }
        }
        worst = worst.min(solved.utility / best - 1.0);
    }
    Ok(verdict(
        worst >= -1e-3,
        format!("worst (solver / grid best − 1) over 3 realizations = {worst:+.3e}"),
    ))
}

fn c6_dominance() -> Result<Verdict> {
    let params = SystemParams::default();
    let profile = PulseOverlapProfile::standard(params.alpha_min, params.bandwidth)?;
    let mut failures = Vec::new();
    let mut margin = f64::INFINITY;
    for seed in 0..50u64 {
        let net = NetworkRealization::generate(&params, seed)?;
        for kind in UtilityKind::ALL {
            let res = compare_all(&net, &profile, &params, kind, 5, seed)?;
            let ad = res
                .iter()
                .find(|r| r.kind == SchemeKind::AlphaDuplexOpt)
                .unwrap()
                .utility;
            for r in res.iter().filter(|r| r.kind != SchemeKind::AlphaDuplexOpt) {
                margin = margin.min(ad - r.utility);
                if ad < r.utility {
                    failures.push(format!("seed {seed} {kind} vs {}", r.kind));
                }
            }
        }
    }
    Ok(verdict(
        failures.is_empty(),
        format!(
            "50 realizations x 2 utilities, smallest margin {margin:.3e}, violations {:?}",
            failures
        ),
    ))
}

fn sweep_config(workers: usize) -> ExperimentConfig {
    ExperimentConfig {
        workers: Some(workers),
        ..ExperimentConfig::default()
    }
}

fn rec(out: &SweepOutput, r: f64, s: SchemeKind, u: UtilityKind) -> &alphaduplex::SweepRecord {
    out.record(r, s, u).expect("record present")
}

fn c7_sum_rate_ordering(cfg: &ExperimentConfig, out: &SweepOutput) -> Verdict {
    let u = UtilityKind::SumRate;
    let mut ok = true;
    let mut lines = Vec::new();
    for &r in &cfg.ratio_grid {
        let ad = rec(out, r, SchemeKind::AlphaDuplexOpt, u).mean_total;
        let fd = rec(out, r, SchemeKind::FullDuplexPC, u).mean_total;
        let hd = rec(out, r, SchemeKind::HalfDuplexPC, u).mean_total;
        ok &= ad >= fd && fd >= hd;
        lines.push(format!("r={r}: {ad:.3}/{fd:.3}/{hd:.3}"));
    }
    // Upper ratios: the two largest grid points.
    let upper = &cfg.ratio_grid[cfg.ratio_grid.len().saturating_sub(2)..];
    for &r in upper {
        let ad = rec(out, r, SchemeKind::AlphaDuplexOpt, u).mean_total;
        let fd = rec(out, r, SchemeKind::FullDuplexPC, u).mean_total;
        let hd = rec(out, r, SchemeKind::HalfDuplexPC, u).mean_total;
        let (g_hd, g_fd) = (ad / hd - 1.0, ad / fd - 1.0);
        ok &= (0.25..=0.60).contains(&g_hd) && (0.03..=0.20).contains(&g_fd);
        lines.push(format!(
            "r={r}: gain vs HD {:.1}%, vs FD {:.1}%",
            100.0 * g_hd,
            100.0 * g_fd
        ));
    }
    verdict(ok, format!("AD/FD/HD totals {}", lines.join("; ")))
}

fn c8_uplink_vulnerability(cfg: &ExperimentConfig, out: &SweepOutput) -> Verdict {
    let u = UtilityKind::SumRate;
    let r = cfg.ratio_grid[0];
    let hd = rec(out, r, SchemeKind::HalfDuplexPC, u).mean_ul;
    let fd = rec(out, r, SchemeKind::FullDuplexPC, u).mean_ul;
    let ad = rec(out, r, SchemeKind::AlphaDuplexOpt, u).mean_ul;
    let (loss_fd, loss_ad) = (1.0 - fd / hd, 1.0 - ad / hd);
    verdict(
        loss_fd >= 0.40 && loss_ad < loss_fd,
        format!(
            "r={r}: uplink loss vs HD, FD {:.1}%, alpha-duplex {:.1}%",
            100.0 * loss_fd,
            100.0 * loss_ad
        ),
    )
}

fn c9_fairness(cfg: &ExperimentConfig, out: &SweepOutput) -> Verdict {
    let u = UtilityKind::SumLogRate;
    let mut ok = true;
    let mut ul = Vec::new();
    for &r in &cfg.ratio_grid {
        let ad = rec(out, r, SchemeKind::AlphaDuplexOpt, u).mean_ul;
        let hd = rec(out, r, SchemeKind::HalfDuplexPC, u).mean_ul;
        ok &= ad >= hd;
        ul.push(format!("{ad:.3}>={hd:.3}"));
    }
    let mut alphas = Vec::new();
    for target in [0.1, 0.5, 1.0] {
        let r = cfg
            .ratio_grid
            .iter()
            .copied()
            .find(|&r| (cfg.params_at(r).p_u_max - target).abs() < 1e-9)
            .expect("ratio grid covers 0.1, 0.5 and 1 W");
        alphas.push(rec(out, r, SchemeKind::AlphaDuplexOpt, u).mean_alpha);
    }
    ok &= alphas.windows(2).all(|w| w[1] >= w[0]);
    verdict(
        ok,
        format!(
            "uplink AD>=HD per ratio [{}]; mean alpha at 0.1/0.5/1 W = {:.3}/{:.3}/{:.3}",
            ul.join(", "),
            alphas[0],
            alphas[1],
            alphas[2]
        ),
    )
}

fn csv_bytes(out: &SweepOutput, dir: &Path) -> Result<(Vec<u8>, Vec<u8>)> {
    let sweep = dir.join("sweep.csv");
    emit_csv(&out.records, &sweep)?;
    let mut drops = Vec::new();
    write_drops_csv(&out.drops, &mut drops).expect("in-memory write");
    Ok((fs::read(&sweep).expect("just written"), drops))
}

fn c10_determinism(first: &SweepOutput) -> Result<Verdict> {
    let dir = tempfile::tempdir().expect("temp dir");
    let (d1, d8) = (dir.path().join("w1"), dir.path().join("w8"));
    fs::create_dir_all(&d1).expect("create dir");
    fs::create_dir_all(&d8).expect("create dir");
    let one = csv_bytes(first, &d1)?;
    let again = run_sweep(&sweep_config(8))?;
    let eight = csv_bytes(&again, &d8)?;
    Ok(verdict(
        one == eight,
        format!(
            "1 vs 8 workers: sweep.csv {} bytes, drops {} bytes, identical = {}",
            one.0.len(),
            one.1.len(),
            one == eight
        ),
    ))
}

fn report(id: usize, name: &str, started: Instant, v: Result<Verdict>, failed: &mut Vec<usize>) {
    let elapsed = started.elapsed();
    let v = v.unwrap_or_else(|e| verdict(false, format!("error: {e}")));
    if !v.pass {
        failed.push(id);
    }
    println!(
        "criterion {id:>2} {:<4} {name}: {} [{:.1}s]",
        if v.pass { "PASS" } else { "FAIL" },
        v.detail,
        elapsed.as_secs_f64()
    );
}

fn main() -> ExitCode {
    let mut failed = Vec::new();
    let checks: [Check; 6] = [
        (1, "orthogonality point", c1_orthogonality),
        (2, "monotone leakage", c2_monotone),
        (3, "gradient oracle", c3_gradient),
        (4, "solver sanity", c4_solver_sanity),
        (5, "grid oracle", c5_grid_oracle),
        (6, "scheme dominance", c6_dominance),
    ];
    for (id, name, check) in checks {
        let t = Instant::now();
        report(id, name, t, check(), &mut failed);
    }

    let cfg = sweep_config(1);
    let t = Instant::now();
    match run_sweep(&cfg) {
        Ok(out) => {
            let sweep_time = t.elapsed();
            println!(
                "sweep: {} ratios x {} drops x {} utilities in {:.1}s",
                cfg.ratio_grid.len(),
                cfg.n_drops,
                cfg.utilities.len(),
                sweep_time.as_secs_f64()
            );
            report(
                7,
                "sum-rate ordering and gains",
                t,
                Ok(c7_sum_rate_ordering(&cfg, &out)),
                &mut failed,
            );
            report(
                8,
                "uplink vulnerability",
                t,
                Ok(c8_uplink_vulnerability(&cfg, &out)),
                &mut failed,
            );
            report(
                9,
                "log-utility fairness",
                t,
                Ok(c9_fairness(&cfg, &out)),
                &mut failed,
            );
            let t10 = Instant::now();
            report(10, "determinism", t10, c10_determinism(&out), &mut failed);
        }
        Err(e) => {
            let names = [
                (7, "sum-rate ordering and gains"),
                (8, "uplink vulnerability"),
                (9, "log-utility fairness"),
                (10, "determinism"),
            ];
            for (id, name) in names {
                let err = Error::Domain(format!("sweep failed: {e}"));
                report(id, name, t, Err(err), &mut failed);
            }
        }
    }

    println!(
        "acceptance: {} of 10 criteria passed{}",
        10 - failed.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!(", failed {failed:?}")
        }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
