//! Uplink/downlink pulse spectra and the cross-mode leakage factors between
//! them.
//!
//! Uplink transmissions use a unit-energy `sinc²` spectrum, downlink
//! transmissions a unit-energy `sinc` spectrum, both of width `(1+α)B`.
//! When the two channels overlap by `2αB` their centres sit `(1−α)B` apart,
//! and a receiver's matched filter picks up a fraction of the other
//! direction's pulse:
//!
//! ```text
//! C_u(α) = ∫_{-(1+α)B/2}^{(1+α)B/2} S_u(f) · S_d(f − (1−α)B) df
//! C_b(α) = ∫_{-(1+α)B/2}^{(1+α)B/2} S_d(f) · S_u(f − (1−α)B) df
//! ```
//!
//! Both factors are dimensionless and independent of `B`. The optimizer uses
//! a least-squares polynomial of each factor on `[α_min, 1]`; values below
//! `α_min` come straight from quadrature on the grid.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadratureOptions};

/// Default lower bound on the overlap fraction.
pub const ALPHA_MIN: f64 = 0.275;

/// Largest tolerated gap between the polynomial cache and quadrature.
pub const FIT_RESIDUAL_LIMIT: f64 = 1e-4;

pub const DEFAULT_POLY_DEGREE: usize = 8;
pub const DEFAULT_QUADRATURE_TOL: f64 = 1e-11;

/// Normalized sinc, `sin(πx)/(πx)`.
pub fn sinc(x: f64) -> f64 {
    let px = std::f64::consts::PI * x;
    if px.abs() < 1e-6 {
        1.0 - px * px / 6.0
    } else {
        px.sin() / px
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PulseKind {
    /// `sinc²` spectrum used by uplink transmissions.
    UplinkSinc2,
    /// `sinc` spectrum used by downlink transmissions.
    DownlinkSinc,
}

impl PulseKind {
    fn power(self) -> i32 {
        match self {
            PulseKind::UplinkSinc2 => 2,
            PulseKind::DownlinkSinc => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    pub kind: PulseKind,
    pub alpha: f64,
    /// Half-duplex channel bandwidth `B` in Hz.
    pub bandwidth: f64,
}

impl PulseSpec {
    pub fn new(kind: PulseKind, alpha: f64, bandwidth: f64) -> Result<Self> {
        let spec = PulseSpec {
            kind,
            alpha,
            bandwidth,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bandwidth must be positive, got {}",
                self.bandwidth
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter(format!(
                "overlap fraction must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// Occupied width `(1+α)B`.
    pub fn width(&self) -> f64 {
        (1.0 + self.alpha) * self.bandwidth
    }

    /// Un-normalized spectral shape at frequency `f`.
    pub fn shape(&self, f: f64) -> f64 {
        sinc(2.0 * f / self.width()).powi(self.kind.power())
    }

    /// `∫ shape(f)² df` in closed form: `∫sinc⁴ = 2/3` and `∫sinc² = 1` over
    /// the normalized argument `u = 2f/((1+α)B)`.
    pub fn energy_closed_form(&self) -> f64 {
        let half_width = 0.5 * self.width();
        match self.kind {
            PulseKind::UplinkSinc2 => half_width * 2.0 / 3.0,
            PulseKind::DownlinkSinc => half_width,
        }
    }

    /// `∫ shape(f)² df` by quadrature over `|u| ≤ 128` with the analytic
    /// tail of the envelope added back.
    pub fn energy_by_quadrature(&self, tol: f64) -> Result<f64> {
        const CUTOFF: f64 = 128.0;
        let power = 2 * self.kind.power();
        let breaks: Vec<f64> = (1..CUTOFF as usize).map(|k| k as f64).collect();
        let half = integrate(
            |u| sinc(u).powi(power),
            0.0,
            CUTOFF,
            &breaks,
            QuadratureOptions::with_tol(tol),
        )?;
        // Tail ∫_L^∞ sin^p(πu)/(πu)^p du using the mean of sin^p over a period.
        let pi = std::f64::consts::PI;
        let tail = match power {
            2 => 0.5 / (pi * pi * CUTOFF),
            _ => 0.375 / (3.0 * pi.powi(4) * CUTOFF.powi(3)),
        };
        Ok(2.0 * (half.value + tail) * 0.5 * self.width())
    }
}

/// A pulse with its normalization constant resolved.
#[derive(Debug, Clone, Copy)]
pub struct Pulse {
    spec: PulseSpec,
    scale: f64,
}

impl Pulse {
    pub fn new(spec: PulseSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Pulse {
            spec,
            scale: spec.energy_closed_form().sqrt().recip(),
        })
    }

    pub fn spec(&self) -> &PulseSpec {
        &self.spec
    }

    /// Unit-energy amplitude in 1/√Hz.
    #[inline]
    pub fn amplitude(&self, f: f64) -> f64 {
        self.scale * self.spec.shape(f)
    }
}

/// `S_u(f)` or `S_d(f)` for the given spec.
pub fn pulse_amplitude(spec: PulseSpec, f: f64) -> Result<f64> {
    Ok(Pulse::new(spec)?.amplitude(f))
}

fn cross_factor(
    receiver: PulseKind,
    interferer: PulseKind,
    alpha: f64,
    bandwidth: f64,
    tol: f64,
) -> Result<f64> {
    let rx = Pulse::new(PulseSpec::new(receiver, alpha, bandwidth)?)?;
    let tx = Pulse::new(PulseSpec::new(interferer, alpha, bandwidth)?)?;
    let shift = (1.0 - alpha) * bandwidth;
    let half = 0.5 * rx.spec().width();
    // Split at the interferer's zero crossings inside the window.
    let step = half;
    let mut breaks = Vec::new();
    let mut k = ((-half - shift) / step).ceil() as i64;
    loop {
        let z = shift + k as f64 * step;
        if z >= half {
            break;
        }
        if z > -half {
            breaks.push(z);
        }
        k += 1;
    }
    let est = integrate(
        |f| rx.amplitude(f) * tx.amplitude(f - shift),
        -half,
        half,
        &breaks,
        QuadratureOptions::with_tol(tol),
    )?;
    Ok(est.value)
}

/// Leakage of the downlink pulse into an uplink (base-station) receiver.
pub fn cross_factor_uplink(alpha: f64, bandwidth: f64, tol: f64) -> Result<f64> {
    cross_factor(
        PulseKind::UplinkSinc2,
        PulseKind::DownlinkSinc,
        alpha,
        bandwidth,
        tol,
    )
}

/// Leakage of the uplink pulse into a downlink (user) receiver.
pub fn cross_factor_downlink(alpha: f64, bandwidth: f64, tol: f64) -> Result<f64> {
    cross_factor(
        PulseKind::DownlinkSinc,
        PulseKind::UplinkSinc2,
        alpha,
        bandwidth,
        tol,
    )
}

/// Least-squares polynomial on `[lo, hi]`, stored in the mapped variable
/// `t = 2(α − lo)/(hi − lo) − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeakagePolynomial {
    lo: f64,
    hi: f64,
    coeffs: Vec<f64>,
}

impl LeakagePolynomial {
    pub fn fit(xs: &[f64], ys: &[f64], lo: f64, hi: f64, degree: usize) -> Result<Self> {
        if xs.len() <= degree {
            return Err(Error::InvalidParameter(format!(
                "{} samples cannot determine a degree-{degree} fit",
                xs.len()
            )));
        }
        let map = |x: f64| 2.0 * (x - lo) / (hi - lo) - 1.0;
        let vander = DMatrix::from_fn(xs.len(), degree + 1, |r, c| map(xs[r]).powi(c as i32));
        let rhs = DVector::from_column_slice(ys);
        let coeffs = vander
            .svd(true, true)
            .solve(&rhs, 1e-14)
            .map_err(|e| Error::InvalidParameter(format!("polynomial fit failed: {e}")))?;
        Ok(LeakagePolynomial {
            lo,
            hi,
            coeffs: coeffs.iter().copied().collect(),
        })
    }

    pub fn zero(lo: f64, hi: f64) -> Self {
        LeakagePolynomial {
            lo,
            hi,
            coeffs: vec![0.0],
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Value and derivative with respect to `α`.
    pub fn eval_with_derivative(&self, alpha: f64) -> (f64, f64) {
        let dt = 2.0 / (self.hi - self.lo);
        let t = (alpha - self.lo) * dt - 1.0;
        let mut value = 0.0;
        let mut deriv = 0.0;
        for &c in self.coeffs.iter().rev() {
            deriv = deriv * t + value;
            value = value * t + c;
        }
        (value, deriv * dt)
    }

    pub fn eval(&self, alpha: f64) -> f64 {
        self.eval_with_derivative(alpha).0
    }
}

/// Tabulated leakage factors over `α` with a polynomial cache on
/// `[α_min, 1]`. Immutable once built.
#[derive(Debug, Clone)]
pub struct PulseOverlapProfile {
    alpha_min: f64,
    alpha_grid: Vec<f64>,
    cu_values: Vec<f64>,
    cb_values: Vec<f64>,
    cu_sq: Vec<f64>,
    cb_sq: Vec<f64>,
    cu_poly: LeakagePolynomial,
    cb_poly: LeakagePolynomial,
    quadrature_tol: f64,
    fit_residual: f64,
}

/// Leakage amplitude and its squared magnitude with derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leakage {
    pub amplitude: f64,
    pub power: f64,
    pub power_derivative: f64,
}

impl PulseOverlapProfile {
    /// 64 uniform samples on `[0, 1]` plus `alpha_min` itself.
    pub fn default_grid(alpha_min: f64) -> Vec<f64> {
        let mut grid: Vec<f64> = (0..64).map(|k| k as f64 / 63.0).collect();
        grid.push(alpha_min);
        grid.sort_by(f64::total_cmp);
        grid.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        grid
    }

    pub fn build(
        alpha_grid: &[f64],
        alpha_min: f64,
        bandwidth: f64,
        tol: f64,
        degree: usize,
    ) -> Result<Self> {
        if alpha_grid.len() < 30 {
            return Err(Error::InvalidParameter(format!(
                "alpha grid needs at least 30 points, got {}",
                alpha_grid.len()
            )));
        }
        if alpha_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "alpha grid must be strictly ascending".into(),
            ));
        }
        if alpha_grid[0] != 0.0 || *alpha_grid.last().unwrap() != 1.0 {
            return Err(Error::InvalidParameter(
                "alpha grid must span [0, 1] including both endpoints".into(),
            ));
        }
        if degree < 4 {
            return Err(Error::InvalidParameter(format!(
                "polynomial degree must be at least 4, got {degree}"
            )));
        }
        if !(0.0..1.0).contains(&alpha_min) {
            return Err(Error::InvalidParameter(format!(
                "alpha_min must lie in [0, 1), got {alpha_min}"
            )));
        }

        let mut cu_values = Vec::with_capacity(alpha_grid.len());
        let mut cb_values = Vec::with_capacity(alpha_grid.len());
        for &a in alpha_grid {
            cu_values.push(cross_factor_uplink(a, bandwidth, tol)?);
            cb_values.push(cross_factor_downlink(a, bandwidth, tol)?);
        }

        let fit_idx: Vec<usize> = (0..alpha_grid.len())
            .filter(|&k| alpha_grid[k] >= alpha_min - 1e-12)
            .collect();
        let xs: Vec<f64> = fit_idx.iter().map(|&k| alpha_grid[k]).collect();
        let yu: Vec<f64> = fit_idx.iter().map(|&k| cu_values[k]).collect();
        let yb: Vec<f64> = fit_idx.iter().map(|&k| cb_values[k]).collect();
        let cu_poly = LeakagePolynomial::fit(&xs, &yu, alpha_min, 1.0, degree)?;
        let cb_poly = LeakagePolynomial::fit(&xs, &yb, alpha_min, 1.0, degree)?;

        let fit_residual = xs
            .iter()
            .zip(yu.iter().zip(&yb))
            .map(|(&x, (&u, &b))| (cu_poly.eval(x) - u).abs().max((cb_poly.eval(x) - b).abs()))
            .fold(0.0, f64::max);
        if fit_residual > FIT_RESIDUAL_LIMIT {
            return Err(Error::DegreeInsufficient {
                degree,
                residual: fit_residual,
                limit: FIT_RESIDUAL_LIMIT,
            });
        }

        Ok(PulseOverlapProfile {
            alpha_min,
            alpha_grid: alpha_grid.to_vec(),
            cu_sq: cu_values.iter().map(|c| c * c).collect(),
            cb_sq: cb_values.iter().map(|c| c * c).collect(),
            cu_values,
            cb_values,
            cu_poly,
            cb_poly,
            quadrature_tol: tol,
            fit_residual,
        })
    }

    /// Profile on the default grid with the default degree and tolerance.
    pub fn standard(alpha_min: f64, bandwidth: f64) -> Result<Self> {
        Self::build(
            &Self::default_grid(alpha_min),
            alpha_min,
            bandwidth,
            DEFAULT_QUADRATURE_TOL,
            DEFAULT_POLY_DEGREE,
        )
    }

    /// Copy with every leakage factor forced to zero.
    pub fn zeroed(&self) -> Self {
        let zeros = vec![0.0; self.alpha_grid.len()];
        PulseOverlapProfile {
            cu_values: zeros.clone(),
            cb_values: zeros.clone(),
            cu_sq: zeros.clone(),
            cb_sq: zeros,
            cu_poly: LeakagePolynomial::zero(self.alpha_min, 1.0),
            cb_poly: LeakagePolynomial::zero(self.alpha_min, 1.0),
            fit_residual: 0.0,
            ..self.clone()
        }
    }

    pub fn alpha_min(&self) -> f64 {
        self.alpha_min
    }

    pub fn alpha_grid(&self) -> &[f64] {
        &self.alpha_grid
    }

    pub fn cu_values(&self) -> &[f64] {
        &self.cu_values
    }

    pub fn cb_values(&self) -> &[f64] {
        &self.cb_values
    }

    pub fn cu_squared(&self) -> &[f64] {
        &self.cu_sq
    }

    pub fn cb_squared(&self) -> &[f64] {
        &self.cb_sq
    }

    pub fn cu_poly(&self) -> &LeakagePolynomial {
        &self.cu_poly
    }

    pub fn cb_poly(&self) -> &LeakagePolynomial {
        &self.cb_poly
    }

    pub fn quadrature_tol(&self) -> f64 {
        self.quadrature_tol
    }

    /// Largest polynomial-vs-quadrature gap over grid points in the fit range.
    pub fn fit_residual(&self) -> f64 {
        self.fit_residual
    }

    fn lookup(&self, values: &[f64], poly: &LeakagePolynomial, alpha: f64) -> (f64, f64) {
        let alpha = alpha.clamp(0.0, 1.0);
        if alpha >= self.alpha_min {
            return poly.eval_with_derivative(alpha);
        }
        // Piecewise-linear interpolation of the quadrature samples below α_min.
        let grid = &self.alpha_grid;
        let k = grid
            .partition_point(|&g| g <= alpha)
            .clamp(1, grid.len() - 1);
        let (x0, x1) = (grid[k - 1], grid[k]);
        let slope = (values[k] - values[k - 1]) / (x1 - x0);
        (values[k - 1] + slope * (alpha - x0), slope)
    }

    fn leakage(&self, values: &[f64], poly: &LeakagePolynomial, alpha: f64) -> Leakage {
        let (c, dc) = self.lookup(values, poly, alpha);
        Leakage {
            amplitude: c,
            power: c * c,
            power_derivative: 2.0 * c * dc,
        }
    }

    /// `C_u(α)`, leakage into base-station (uplink) receivers.
    pub fn uplink(&self, alpha: f64) -> Leakage {
        self.leakage(&self.cu_values, &self.cu_poly, alpha)
    }

    /// `C_b(α)`, leakage into user (downlink) receivers.
    pub fn downlink(&self, alpha: f64) -> Leakage {
        self.leakage(&self.cb_values, &self.cb_poly, alpha)
    }

    /// Sampled check that `|C_u|²` and `|C_b|²` never decrease over the grid
    /// points in `[α_min, 1]`.
    pub fn is_monotone(&self) -> bool {
        let idx: Vec<usize> = (0..self.alpha_grid.len())
            .filter(|&k| self.alpha_grid[k] >= self.alpha_min - 1e-12)
            .collect();
        idx.windows(2)
            .all(|w| self.cu_sq[w[1]] >= self.cu_sq[w[0]] && self.cb_sq[w[1]] >= self.cb_sq[w[0]])
    }

    /// Writes `alpha,c_u,c_b,c_u_sq,c_b_sq` rows for every grid point.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "alpha,c_u,c_b,c_u_sq,c_b_sq")?;
        for k in 0..self.alpha_grid.len() {
            writeln!(
                out,
                "{},{},{},{},{}",
                self.alpha_grid[k],
                self.cu_values[k],
                self.cb_values[k],
                self.cu_sq[k],
                self.cb_sq[k]
            )?;
        }
        Ok(())
    }
}
