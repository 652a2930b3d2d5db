//! The joint power / overlap allocation problem on one realization.
//!
//! Variables are scaled before they reach the solver: `p_u` by `p_u_max`,
//! `p_b` by `p_b_tot/N`, `α` by 1. The objective handed to the solver is the
//! utility in units of the HD bandwidth: `Σ(R_u+R_b)/B` for the sum rate and
//! `Σ(ln(R_u/B) + ln(R_b/B))` for the sum-log rate. Both differ from the
//! reported utility by a fixed affine map.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::barrier::{
    AffineConstraint, BarrierOutcome, BarrierSettings, BarrierSolver, ConstraintSet, OuterRecord,
    SmoothObjective,
};
use crate::error::{Error, Result};
use crate::link::{DecisionVector, LinkMetrics, LinkModel, UtilityKind};
use crate::network::{NetworkRealization, SystemParams};
use crate::spectral::PulseOverlapProfile;

#[derive(Debug, Clone, Copy)]
pub struct ProblemSpec<'a> {
    pub params: &'a SystemParams,
    pub net: &'a NetworkRealization,
    pub profile: &'a PulseOverlapProfile,
    pub utility: UtilityKind,
    /// Pins every `α_i` to this value and drops the `α` block.
    pub fixed_alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub x_opt: DecisionVector,
    pub utility: f64,
    pub metrics: LinkMetrics,
    pub outer_iterations: usize,
    pub total_newton_steps: usize,
    pub final_gap_proxy: f64,
    pub converged: bool,
    pub starts_used: usize,
    pub trace: Vec<OuterRecord>,
}

impl OptimizationResult {
    /// Writes `tau,inner_steps,utility,best_utility,gap` rows.
    pub fn write_trace_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "tau,inner_steps,utility,best_utility,gap")?;
        for r in &self.trace {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.tau, r.inner_steps, r.utility, r.best_utility, r.gap
            )?;
        }
        Ok(())
    }
}

struct ScaledObjective<'p, 'a> {
    spec: &'p ProblemSpec<'a>,
}

impl SmoothObjective for ScaledObjective<'_, '_> {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn value(&self, z: &[f64]) -> Result<f64> {
        let x = self.spec.unscale(z);
        let u = self.spec.model().utility(&x, self.spec.utility)?;
        Ok(self.spec.normalize_utility(u))
    }

    fn gradient(&self, z: &[f64]) -> Result<Vec<f64>> {
        let spec = self.spec;
        let x = spec.unscale(z);
        let full = spec.model().utility_gradient(&x, spec.utility)?;
        let factor = match spec.utility {
            UtilityKind::SumRate => spec.params.bandwidth.recip(),
            UtilityKind::SumLogRate => 1.0,
        };
        let scales = spec.variable_scales();
        Ok((0..spec.dim())
            .map(|k| full[k] * scales[k] * factor)
            .collect())
    }
}

impl<'a> ProblemSpec<'a> {
    pub fn new(
        params: &'a SystemParams,
        net: &'a NetworkRealization,
        profile: &'a PulseOverlapProfile,
        utility: UtilityKind,
    ) -> Self {
        ProblemSpec {
            params,
            net,
            profile,
            utility,
            fixed_alpha: None,
        }
    }

    pub fn with_fixed_alpha(mut self, alpha: f64) -> Self {
        self.fixed_alpha = Some(alpha);
        self
    }

    pub fn n_cells(&self) -> usize {
        self.net.n_cells()
    }

    pub fn model(&self) -> LinkModel<'a> {
        LinkModel::new(self.params, self.net, self.profile)
    }

    /// Number of optimization variables.
    pub fn dim(&self) -> usize {
        let n = self.n_cells();
        if self.fixed_alpha.is_some() {
            2 * n
        } else {
            3 * n
        }
    }

    fn bs_scale(&self) -> f64 {
        self.params.p_b_tot / self.n_cells() as f64
    }

    fn variable_scales(&self) -> Vec<f64> {
        let n = self.n_cells();
        let mut s = vec![self.params.p_u_max; n];
        s.extend(std::iter::repeat_n(self.bs_scale(), n));
        s.extend(std::iter::repeat_n(1.0, n));
        s
    }

    pub fn scale(&self, x: &DecisionVector) -> Vec<f64> {
        let mut z: Vec<f64> = x.p_u.iter().map(|p| p / self.params.p_u_max).collect();
        z.extend(x.p_b.iter().map(|p| p / self.bs_scale()));
        if self.fixed_alpha.is_none() {
            z.extend_from_slice(&x.alpha);
        }
        z
    }

    pub fn unscale(&self, z: &[f64]) -> DecisionVector {
        let n = self.n_cells();
        let alpha = match self.fixed_alpha {
            Some(a) => vec![a; n],
            None => z[2 * n..3 * n].to_vec(),
        };
        DecisionVector {
            p_u: z[..n].iter().map(|v| v * self.params.p_u_max).collect(),
            p_b: z[n..2 * n].iter().map(|v| v * self.bs_scale()).collect(),
            alpha,
        }
    }

    /// Utility expressed per unit of HD bandwidth.
    pub fn normalize_utility(&self, u: f64) -> f64 {
        let b = self.params.bandwidth;
        match self.utility {
            UtilityKind::SumRate => u / b,
            UtilityKind::SumLogRate => u - 2.0 * self.n_cells() as f64 * b.ln(),
        }
    }

    /// Raw constraints `f_i(x) ≤ 0` expressed over the scaled variables:
    /// `−p_u ≤ 0`, `p_u − p_u_max ≤ 0`, `p_b_min − p_b ≤ 0`,
    /// `Σp_b − p_b_tot ≤ 0`, `α_min − α ≤ 0`, `α − 1 ≤ 0`.
    pub fn constraint_set(&self) -> ConstraintSet {
        let n = self.n_cells();
        let p = self.params;
        let su = p.p_u_max;
        let sb = self.bs_scale();
        let mut set = ConstraintSet::default();
        for i in 0..n {
            set.push(AffineConstraint::single(i, -su, 0.0));
        }
        for i in 0..n {
            set.push(AffineConstraint::single(i, su, -p.p_u_max));
        }
        for i in 0..n {
            set.push(AffineConstraint::single(n + i, -sb, p.p_b_min));
        }
        set.push(AffineConstraint::new(
            (0..n).map(|i| (n + i, sb)).collect(),
            -p.p_b_tot,
        ));
        if self.fixed_alpha.is_none() {
            for i in 0..n {
                set.push(AffineConstraint::single(2 * n + i, -1.0, p.alpha_min));
            }
            for i in 0..n {
                set.push(AffineConstraint::single(2 * n + i, 1.0, -1.0));
            }
        }
        set
    }

    pub fn constraint_values(&self, x: &DecisionVector) -> Vec<f64> {
        self.constraint_set().values(&self.scale(x))
    }

    pub fn is_strictly_feasible(&self, x: &DecisionVector) -> bool {
        x.is_finite() && self.constraint_set().is_strictly_feasible(&self.scale(x))
    }

    /// Feasible for the closed constraint set, allowing `tol` of slack.
    pub fn is_feasible(&self, x: &DecisionVector, tol: f64) -> bool {
        x.is_finite() && self.constraint_values(x).iter().all(|&v| v <= tol)
    }

    fn settings_solver<'s>(
        &self,
        objective: &'s ScaledObjective<'s, 'a>,
        constraints: &'s ConstraintSet,
        settings: BarrierSettings,
    ) -> BarrierSolver<'s, ScaledObjective<'s, 'a>> {
        BarrierSolver::new(objective, constraints, settings)
    }

    /// `−[Ũ(x) + (1/τ)·Σ log(−f_i(x))]` with `Ũ` the bandwidth-normalized
    /// utility.
    pub fn barrier_objective(&self, x: &DecisionVector, tau: f64) -> Result<f64> {
        if !(tau > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tau must be positive, got {tau}"
            )));
        }
        let objective = ScaledObjective { spec: self };
        let constraints = self.constraint_set();
        self.settings_solver(&objective, &constraints, BarrierSettings::default())
            .barrier_value(&self.scale(x), tau)
    }

    /// Box midpoints for `p_u` and `α`; `p_b` halfway between `p_b_min` and
    /// an even split of the budget.
    pub fn find_feasible_start(&self) -> Result<DecisionVector> {
        let n = self.n_cells();
        let p = self.params;
        if p.p_b_min * n as f64 >= p.p_b_tot {
            return Err(Error::InfeasibleSpec(format!(
                "N·p_b_min = {} is not below p_b_tot = {}",
                p.p_b_min * n as f64,
                p.p_b_tot
            )));
        }
        if self.fixed_alpha.is_none() && p.alpha_min >= 1.0 {
            return Err(Error::InfeasibleSpec("alpha_min must be below 1".into()));
        }
        let p_b = p.p_b_min + 0.5 * (p.p_b_tot / n as f64 - p.p_b_min);
        let alpha = self.fixed_alpha.unwrap_or(0.5 * (p.alpha_min + 1.0));
        Ok(DecisionVector::uniform(n, 0.5 * p.p_u_max, p_b, alpha))
    }

    /// Uniformly scattered strictly feasible point.
    pub fn random_start<R: Rng + ?Sized>(&self, rng: &mut R) -> DecisionVector {
        let n = self.n_cells();
        let p = self.params;
        let p_u = (0..n)
            .map(|_| p.p_u_max * rng.random_range(0.02..0.98))
            .collect();
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let wsum: f64 = weights.iter().sum();
        let spare = (p.p_b_tot - n as f64 * p.p_b_min) * rng.random_range(0.05..0.95);
        let p_b = weights
            .iter()
            .map(|w| p.p_b_min + spare * w / wsum + 1e-9 * p.p_b_tot)
            .collect();
        let alpha = match self.fixed_alpha {
            Some(a) => vec![a; n],
            None => (0..n)
                .map(|_| p.alpha_min + (1.0 - p.alpha_min) * rng.random_range(0.02..0.98))
                .collect(),
        };
        let x = DecisionVector { p_u, p_b, alpha };
        self.pull_inside(&x, 1e-3)
    }

    /// Moves a (possibly boundary) point a relative `margin` into the
    /// interior.
    pub fn pull_inside(&self, x: &DecisionVector, margin: f64) -> DecisionVector {
        let n = self.n_cells();
        let p = self.params;
        let clamp = |v: f64, lo: f64, hi: f64| {
            let pad = margin * (hi - lo);
            v.clamp(lo + pad, hi - pad)
        };
        let p_u = x.p_u.iter().map(|&v| clamp(v, 0.0, p.p_u_max)).collect();
        let budget = p.p_b_tot - n as f64 * p.p_b_min;
        let mut p_b: Vec<f64> = x
            .p_b
            .iter()
            .map(|&v| v.max(p.p_b_min + margin * budget / n as f64))
            .collect();
        let limit = p.p_b_tot - margin * budget;
        let total: f64 = p_b.iter().sum();
        if total > limit {
            let excess: f64 = p_b.iter().map(|v| v - p.p_b_min).sum();
            let keep = (limit - n as f64 * p.p_b_min) / excess;
            for v in &mut p_b {
                *v = p.p_b_min + (*v - p.p_b_min) * keep;
            }
        }
        let alpha = match self.fixed_alpha {
            Some(a) => vec![a; n],
            None => x
                .alpha
                .iter()
                .map(|&a| clamp(a, p.alpha_min, 1.0))
                .collect(),
        };
        DecisionVector { p_u, p_b, alpha }
    }

    fn finish(&self, outcome: BarrierOutcome, starts: usize) -> Result<OptimizationResult> {
        let x_opt = self.unscale(&outcome.z);
        let model = self.model();
        let metrics = model.metrics(&x_opt);
        let utility = model.utility(&x_opt, self.utility)?;
        Ok(OptimizationResult {
            x_opt,
            utility,
            metrics,
            outer_iterations: outcome.outer_iterations,
            total_newton_steps: outcome.newton_steps,
            final_gap_proxy: outcome.gap,
            converged: outcome.converged,
            starts_used: starts,
            trace: outcome.trace,
        })
    }

    /// Barrier method from `x0`, or from [`Self::find_feasible_start`].
    pub fn solve(
        &self,
        x0: Option<&DecisionVector>,
        settings: BarrierSettings,
    ) -> Result<OptimizationResult> {
        let start = match x0 {
            Some(x) => x.clone(),
            None => self.find_feasible_start()?,
        };
        if start.n_cells() != self.n_cells() {
            return Err(Error::InvalidParameter(format!(
                "start has {} cells, problem has {}",
                start.n_cells(),
                self.n_cells()
            )));
        }
        let z0 = self.scale(&start);
        let constraints = self.constraint_set();
        if let Some((index, value)) = constraints.first_violation(&z0) {
            return Err(Error::InfeasiblePoint { index, value });
        }
        let objective = ScaledObjective { spec: self };
        let outcome = self
            .settings_solver(&objective, &constraints, settings)
            .minimize(&z0)?;
        self.finish(outcome, 1)
    }

    /// Best of `n_starts` solves (the deterministic start plus random ones),
    /// followed by one solve per extra start in `injected`. Extra starts may
    /// sit on the boundary; they are pulled slightly inside first.
    pub fn multi_start_solve(
        &self,
        n_starts: usize,
        seed: u64,
        injected: &[DecisionVector],
        settings: BarrierSettings,
    ) -> Result<OptimizationResult> {
        let n_starts = n_starts.max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut starts = vec![self.find_feasible_start()?];
        for _ in 1..n_starts {
            starts.push(self.random_start(&mut rng));
        }
        starts.extend(injected.iter().map(|x| self.pull_inside(x, 1e-6)));

        let mut best: Option<OptimizationResult> = None;
        let mut used = 0;
        for start in &starts {
            let r = match self.solve(Some(start), settings) {
                Ok(r) => r,
                Err(e @ Error::Domain(_)) | Err(e @ Error::InfeasiblePoint { .. }) => {
                    log::debug!("start discarded: {e}");
                    continue;
                }
                Err(e) => return Err(e),
            };
            used += 1;
            if best.as_ref().is_none_or(|b| r.utility > b.utility) {
                best = Some(r);
            }
        }
        let mut best = best.ok_or_else(|| Error::Domain("no start produced a solution".into()))?;
        best.starts_used = used;
        Ok(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Fading;
    use crate::spectral::ALPHA_MIN;
    use approx::assert_relative_eq;

    fn setup(n: usize) -> (SystemParams, NetworkRealization, PulseOverlapProfile) {
        let params = SystemParams {
            n_cells: n,
            p_b_min: 1.0,
            p_b_tot: 90.0,
            ..SystemParams::default()
        };
        let net = NetworkRealization::generate(&params, 17).unwrap();
        let profile = PulseOverlapProfile::standard(ALPHA_MIN, params.bandwidth).unwrap();
        (params, net, profile)
    }

    #[test]
    fn constraint_count() {
        let (params, net, profile) = setup(9);
        let spec = ProblemSpec::new(&params, &net, &profile, UtilityKind::SumRate);
        assert_eq!(spec.constraint_set().len(), 5 * 9 + 1);
        assert_eq!(spec.with_fixed_alpha(0.0).constraint_set().len(), 3 * 9 + 1);
    }

    #[test]
    fn feasible_start_arithmetic() {
        let (params, net, profile) = setup(9);
        let spec = ProblemSpec::new(&params, &net, &profile, UtilityKind::SumRate);
        let x = spec.find_feasible_start().unwrap();
        for &p in &x.p_b {
            assert_relative_eq!(p, 5.5);
        }
        assert_relative_eq!(x.p_b.iter().sum::<f64>(), 49.5);
        assert!(spec.constraint_values(&x).iter().all(|&f| f < 0.0));
    }

    #[test]
    fn degenerate_budget_is_rejected() {
        let (mut params, net, profile) = setup(9);
        params.p_b_tot = 9.0;
        let spec = ProblemSpec::new(&params, &net, &profile, UtilityKind::SumRate);
        assert!(matches!(
            spec.find_feasible_start(),
            Err(Error::InfeasibleSpec(_))
        ));
    }

    #[test]
    fn scaling_round_trip() {
        let (params, net, profile) = setup(3);
        let spec = ProblemSpec::new(&params, &net, &profile, UtilityKind::SumRate);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = spec.random_start(&mut rng);
        let back = spec.unscale(&spec.scale(&x));
        for (a, b) in x.to_flat().iter().zip(back.to_flat()) {
            assert_relative_eq!(*a, b, max_relative = 1e-14);
        }
        assert!(spec.is_strictly_feasible(&x));
    }

    #[test]
    fn barrier_objective_tends_to_negative_utility() {
        let (params, net, profile) = setup(3);
        let spec = ProblemSpec::new(&params, &net, &profile, UtilityKind::SumRate);
        let x = spec.find_feasible_start().unwrap();
        let u = spec.normalize_utility(spec.model().utility(&x, UtilityKind::SumRate).unwrap());
        let v = spec.barrier_objective(&x, 1e12).unwrap();
        assert_relative_eq!(v, -u, max_relative = 1e-9);
        let mut edge = x.clone();
        edge.p_u[0] = 1e-200;
        assert!(
            spec.barrier_objective(&edge, 1.0).unwrap()
                > spec.barrier_objective(&x, 1.0).unwrap() + 100.0
        );
        edge.p_u[0] = 0.0;
        assert!(spec.barrier_objective(&edge, 1.0).is_err());
    }

    #[test]
    fn pull_inside_reaches_interior() {
        let (params, net, profile) = setup(3);
        let spec = ProblemSpec::new(&params, &net, &profile, UtilityKind::SumRate);
        let corner = DecisionVector::uniform(3, params.p_u_max, params.p_b_tot / 3.0, 1.0);
        assert!(!spec.is_strictly_feasible(&corner));
        assert!(spec.is_feasible(&corner, 1e-12));
        let inside = spec.pull_inside(&corner, 1e-6);
        assert!(spec.is_strictly_feasible(&inside));
        assert_relative_eq!(inside.alpha[0], 1.0, epsilon = 1e-5);
    }

    #[test]
    fn single_cell_sum_rate_hits_upper_bounds() {
        let params = SystemParams {
            n_cells: 1,
            fading: Fading::None,
            p_b_tot: 40.0,
            ..SystemParams::default()
        };
        let net = NetworkRealization::generate(&params, 2).unwrap();
        let profile = PulseOverlapProfile::standard(ALPHA_MIN, params.bandwidth).unwrap();
        let spec = ProblemSpec::new(&params, &net, &profile, UtilityKind::SumRate);
        let r = spec.solve(None, BarrierSettings::default()).unwrap();
        assert!(r.converged);
        let slack = r.final_gap_proxy;
        assert!(1.0 - r.x_opt.alpha[0] <= slack, "{:?}", r.x_opt);
        assert!(1.0 - r.x_opt.p_u[0] / params.p_u_max <= slack);
        assert!(1.0 - r.x_opt.p_b[0] / params.p_b_tot <= slack);
    }
}
