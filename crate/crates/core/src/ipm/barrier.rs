//! Log-barrier interior-point method for maximizing a smooth objective
//! subject to affine inequalities `f_i(z) ≤ 0`.
//!
//! For a fixed barrier weight `τ` the inner loop minimizes
//! `φ(z) = −[U(z) + (1/τ)·Σ log(−f_i(z))]` with damped Newton steps; the
//! outer loop multiplies `τ` by `μ` until `m/τ` drops below tolerance.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `Σ_k a_k·z_k + offset ≤ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineConstraint {
    pub terms: Vec<(usize, f64)>,
    pub offset: f64,
}

impl AffineConstraint {
    pub fn new(terms: Vec<(usize, f64)>, offset: f64) -> Self {
        AffineConstraint { terms, offset }
    }

    /// `coeff·z_k + offset ≤ 0`.
    pub fn single(k: usize, coeff: f64, offset: f64) -> Self {
        AffineConstraint {
            terms: vec![(k, coeff)],
            offset,
        }
    }

    #[inline]
    pub fn value(&self, z: &[f64]) -> f64 {
        self.terms.iter().map(|&(k, a)| a * z[k]).sum::<f64>() + self.offset
    }

    #[inline]
    pub fn directional(&self, d: &[f64]) -> f64 {
        self.terms.iter().map(|&(k, a)| a * d[k]).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintSet {
    constraints: Vec<AffineConstraint>,
}

impl ConstraintSet {
    pub fn new(constraints: Vec<AffineConstraint>) -> Self {
        ConstraintSet { constraints }
    }

    pub fn push(&mut self, c: AffineConstraint) {
        self.constraints.push(c);
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &AffineConstraint> {
        self.constraints.iter()
    }

    pub fn values(&self, z: &[f64]) -> Vec<f64> {
        self.constraints.iter().map(|c| c.value(z)).collect()
    }

    /// First constraint with `f_i(z) ≥ 0`, if any.
    pub fn first_violation(&self, z: &[f64]) -> Option<(usize, f64)> {
        self.constraints
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.value(z)))
            .find(|&(_, v)| !(v < 0.0))
    }

    pub fn is_strictly_feasible(&self, z: &[f64]) -> bool {
        self.first_violation(z).is_none()
    }

    /// `Σ log(−f_i(z))`.
    pub fn log_barrier(&self, z: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for (index, c) in self.constraints.iter().enumerate() {
            let value = c.value(z);
            if !(value < 0.0) {
                return Err(Error::InfeasiblePoint { index, value });
            }
            total += (-value).ln();
        }
        Ok(total)
    }

    /// Adds `scale·∇Σ log(−f_i)` to `grad`.
    fn add_log_barrier_gradient(&self, z: &[f64], scale: f64, grad: &mut [f64]) {
        for c in &self.constraints {
            let inv = 1.0 / c.value(z);
            for &(k, a) in &c.terms {
                // ∂ log(−f)/∂z_k = a/f
                grad[k] += scale * a * inv;
            }
        }
    }

    /// Adds `scale·∇² Σ log(−f_i)` to `hess`.
    fn add_log_barrier_hessian(&self, z: &[f64], scale: f64, hess: &mut DMatrix<f64>) {
        for c in &self.constraints {
            let f = c.value(z);
            let w = -scale / (f * f);
            for &(k, a) in &c.terms {
                for &(l, b) in &c.terms {
                    hess[(k, l)] += w * a * b;
                }
            }
        }
    }

    /// Largest `t` with `z + t·d` on the boundary, or infinity.
    pub fn max_step(&self, z: &[f64], d: &[f64]) -> f64 {
        self.constraints
            .iter()
            .filter_map(|c| {
                let rate = c.directional(d);
                (rate > 0.0).then(|| -c.value(z) / rate)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest `h` such that `z ± h·e_k` stays strictly feasible.
    fn coordinate_room(&self, z: &[f64], k: usize) -> f64 {
        self.constraints
            .iter()
            .filter_map(|c| {
                let a = c
                    .terms
                    .iter()
                    .filter(|&&(j, _)| j == k)
                    .map(|&(_, a)| a)
                    .sum::<f64>();
                (a != 0.0).then(|| -c.value(z) / a.abs())
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// A smooth objective to be maximized.
pub trait SmoothObjective {
    fn dim(&self) -> usize;

    fn value(&self, z: &[f64]) -> Result<f64>;

    fn gradient(&self, z: &[f64]) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierSettings {
    pub tau0: f64,
    pub mu: f64,
    pub eps_outer: f64,
    pub eps_inner: f64,
    pub max_inner: usize,
    pub rho: f64,
    pub armijo_c: f64,
    pub boundary_fraction: f64,
    pub min_step: f64,
    /// Relative finite-difference step for the Hessian.
    pub fd_step: f64,
}

impl Default for BarrierSettings {
    fn default() -> Self {
        BarrierSettings {
            tau0: 1.0,
            mu: 10.0,
            eps_outer: 1e-6,
            eps_inner: 1e-8,
            max_inner: 100,
            rho: 0.5,
            armijo_c: 1e-4,
            boundary_fraction: 0.99,
            min_step: 1e-12,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonStep {
    pub direction: Vec<f64>,
    /// `∇φᵀ H̃⁻¹ ∇φ`.
    pub decrement: f64,
    pub gradient: Vec<f64>,
    /// Shift `λ` added to the Hessian diagonal.
    pub shift: f64,
    /// Set when no shift made the Hessian factorizable.
    pub steepest_descent: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterRecord {
    pub tau: f64,
    pub inner_steps: usize,
    pub utility: f64,
    pub best_utility: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierOutcome {
    /// Best interior iterate seen (by objective value).
    pub z: Vec<f64>,
    pub objective: f64,
    pub outer_iterations: usize,
    pub newton_steps: usize,
    /// `m/τ` at the last completed centering.
    pub gap: f64,
    pub gradient_norm: f64,
    pub converged: bool,
    pub trace: Vec<OuterRecord>,
}

pub struct BarrierSolver<'a, O: SmoothObjective + ?Sized> {
    objective: &'a O,
    constraints: &'a ConstraintSet,
    settings: BarrierSettings,
}

impl<'a, O: SmoothObjective + ?Sized> BarrierSolver<'a, O> {
    pub fn new(
        objective: &'a O,
        constraints: &'a ConstraintSet,
        settings: BarrierSettings,
    ) -> Self {
        BarrierSolver {
            objective,
            constraints,
            settings,
        }
    }

    pub fn settings(&self) -> &BarrierSettings {
        &self.settings
    }

    /// `−[U(z) + (1/τ)·Σ log(−f_i(z))]`.
    pub fn barrier_value(&self, z: &[f64], tau: f64) -> Result<f64> {
        let barrier = self.constraints.log_barrier(z)?;
        Ok(-(self.objective.value(z)? + barrier / tau))
    }

    pub fn barrier_gradient(&self, z: &[f64], tau: f64) -> Result<Vec<f64>> {
        let mut g: Vec<f64> = self
            .objective
            .gradient(z)?
            .into_iter()
            .map(|v| -v)
            .collect();
        self.constraints
            .add_log_barrier_gradient(z, -1.0 / tau, &mut g);
        Ok(g)
    }

    /// Hessian of `φ`: central differences of `−∇U` plus the exact barrier
    /// Hessian. Each coordinate's step is capped so both probes remain
    /// strictly feasible.
    fn barrier_hessian(&self, z: &[f64], tau: f64) -> Result<DMatrix<f64>> {
        let n = z.len();
        let mut h = DMatrix::zeros(n, n);
        let mut probe = z.to_vec();
        for k in 0..n {
            let room = self.constraints.coordinate_room(z, k);
            let step = (self.settings.fd_step * (1.0 + z[k].abs())).min(0.5 * room);
            probe[k] = z[k] + step;
            let plus = self.objective.gradient(&probe)?;
            probe[k] = z[k] - step;
            let minus = self.objective.gradient(&probe)?;
            probe[k] = z[k];
            for r in 0..n {
                h[(r, k)] = -(plus[r] - minus[r]) / (2.0 * step);
            }
        }
        let sym = 0.5 * (&h + h.transpose());
        let mut sym = sym;
        self.constraints
            .add_log_barrier_hessian(z, -1.0 / tau, &mut sym);
        Ok(sym)
    }

    pub fn newton_step(&self, z: &[f64], tau: f64) -> Result<NewtonStep> {
        let gradient = self.barrier_gradient(z, tau)?;
        let hess = self.barrier_hessian(z, tau)?;
        Ok(shifted_newton(hess, gradient))
    }

    /// Fraction-to-boundary cap followed by Armijo backtracking.
    pub fn line_search(&self, z: &[f64], direction: &[f64], slope: f64, tau: f64) -> Result<f64> {
        let s = &self.settings;
        let t_max = self.constraints.max_step(z, direction);
        let mut t = if t_max.is_finite() {
            (s.boundary_fraction * t_max).min(1.0)
        } else {
            1.0
        };
        let phi0 = self.barrier_value(z, tau)?;
        let mut trial = vec![0.0; z.len()];
        while t >= s.min_step {
            for (k, v) in trial.iter_mut().enumerate() {
                *v = z[k] + t * direction[k];
            }
            if self.constraints.is_strictly_feasible(&trial) {
                if let Ok(phi) = self.barrier_value(&trial, tau) {
                    if phi.is_finite() && phi <= phi0 + s.armijo_c * t * slope {
                        return Ok(t);
                    }
                }
            }
            t *= s.rho;
        }
        Err(Error::LineSearchStalled { step: t })
    }

    /// Runs the outer/inner barrier loops from a strictly feasible `z0`.
    pub fn minimize(&self, z0: &[f64]) -> Result<BarrierOutcome> {
        if let Some((index, value)) = self.constraints.first_violation(z0) {
            return Err(Error::InfeasiblePoint { index, value });
        }
        let s = self.settings;
        let m = self.constraints.len() as f64;
        let mut z = z0.to_vec();
        let mut best_z = z.clone();
        let mut best_u = self.objective.value(&z)?;
        let mut tau = s.tau0;
        let mut trace = Vec::new();
        let mut newton_steps = 0;
        let mut gradient_norm = f64::INFINITY;
        let mut converged = true;

        loop {
            let mut inner = 0;
            let mut stalled = false;
            while inner < s.max_inner {
                let step = self.newton_step(&z, tau)?;
                gradient_norm = step.gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
                if step.decrement <= s.eps_inner {
                    break;
                }
                let slope: f64 = step
                    .gradient
                    .iter()
                    .zip(&step.direction)
                    .map(|(g, d)| g * d)
                    .sum();
                let t = match self.line_search(&z, &step.direction, slope, tau) {
                    Ok(t) => t,
                    Err(Error::LineSearchStalled { step }) => {
                        log::debug!("line search stalled at τ={tau:e}, t={step:e}");
                        stalled = true;
                        break;
                    }
                    Err(e) => return Err(e),
                };
                for (zk, dk) in z.iter_mut().zip(&step.direction) {
                    *zk += t * dk;
                }
                inner += 1;
                newton_steps += 1;
                let u = self.objective.value(&z)?;
                if u > best_u {
                    best_u = u;
                    best_z.clone_from(&z);
                }
            }
            let utility = self.objective.value(&z)?;
            trace.push(OuterRecord {
                tau,
                inner_steps: inner,
                utility,
                best_utility: best_u,
                gap: m / tau,
            });
            if stalled {
                converged = false;
                break;
            }
            if m / tau < s.eps_outer || m == 0.0 {
                break;
            }
            tau *= s.mu;
        }

        Ok(BarrierOutcome {
            z: best_z,
            objective: best_u,
            outer_iterations: trace.len(),
            newton_steps,
            gap: m / tau,
            gradient_norm,
            converged,
            trace,
        })
    }
}

/// Solves `(H + λI)d = −g` for the smallest `λ` in
/// `{0, 1e-8, 1e-6, …, 1e8}·scale` giving a Cholesky factorization.
pub fn shifted_newton(hess: DMatrix<f64>, gradient: Vec<f64>) -> NewtonStep {
    let n = gradient.len();
    let g = DVector::from_column_slice(&gradient);
    let scale = hess
        .diagonal()
        .iter()
        .fold(1.0f64, |acc, v| acc.max(v.abs()));
    let shifts = std::iter::once(0.0).chain((-8..=8).step_by(2).map(|e| 10f64.powi(e) * scale));
    for shift in shifts {
        let mut shifted = hess.clone();
        for k in 0..n {
            shifted[(k, k)] += shift;
        }
        if let Some(chol) = shifted.cholesky() {
            let d = -chol.solve(&g);
            let decrement = -g.dot(&d);
            return NewtonStep {
                direction: d.iter().copied().collect(),
                decrement,
                gradient,
                shift,
                steepest_descent: false,
            };
        }
    }
    log::warn!("Hessian not factorizable after maximum shift, using steepest descent");
    let decrement = g.dot(&g);
    NewtonStep {
        direction: gradient.iter().map(|v| -v).collect(),
        decrement,
        gradient,
        shift: f64::INFINITY,
        steepest_descent: true,
    }
}
