//! SINR, rates and network utilities, with analytic gradients.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::network::{NetworkRealization, SystemParams};
use crate::spectral::PulseOverlapProfile;

/// Per-cell transmit powers and overlap fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionVector {
    pub p_u: Vec<f64>,
    pub p_b: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl DecisionVector {
    pub fn uniform(n: usize, p_u: f64, p_b: f64, alpha: f64) -> Self {
        DecisionVector {
            p_u: vec![p_u; n],
            p_b: vec![p_b; n],
            alpha: vec![alpha; n],
        }
    }

    pub fn n_cells(&self) -> usize {
        self.p_u.len()
    }

    pub fn is_finite(&self) -> bool {
        self.p_u
            .iter()
            .chain(&self.p_b)
            .chain(&self.alpha)
            .all(|v| v.is_finite())
    }

    /// Flattened as `[p_u..., p_b..., alpha...]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(3 * self.n_cells());
        v.extend_from_slice(&self.p_u);
        v.extend_from_slice(&self.p_b);
        v.extend_from_slice(&self.alpha);
        v
    }

    pub fn from_flat(v: &[f64]) -> Self {
        let n = v.len() / 3;
        DecisionVector {
            p_u: v[..n].to_vec(),
            p_b: v[n..2 * n].to_vec(),
            alpha: v[2 * n..3 * n].to_vec(),
        }
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        DecisionVector {
            p_u: perm.iter().map(|&k| self.p_u[k]).collect(),
            p_b: perm.iter().map(|&k| self.p_b[k]).collect(),
            alpha: perm.iter().map(|&k| self.alpha[k]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Uplink,
    Downlink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UtilityKind {
    SumRate,
    SumLogRate,
}

impl UtilityKind {
    pub const ALL: [UtilityKind; 2] = [UtilityKind::SumRate, UtilityKind::SumLogRate];

    pub fn name(self) -> &'static str {
        match self {
            UtilityKind::SumRate => "sum_rate",
            UtilityKind::SumLogRate => "sum_log_rate",
        }
    }
}

impl fmt::Display for UtilityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for UtilityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "sum_rate" | "sumrate" | "rate" => Ok(UtilityKind::SumRate),
            "sum_log_rate" | "sumlograte" | "log" | "log_rate" => Ok(UtilityKind::SumLogRate),
            other => Err(Error::Config(format!("unknown utility '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkMetrics {
    pub gamma_u: Vec<f64>,
    pub gamma_b: Vec<f64>,
    /// Bits per second.
    pub rate_u: Vec<f64>,
    pub rate_b: Vec<f64>,
    /// Noise power at each BS receiver, W.
    pub noise_b: Vec<f64>,
    /// Noise power at each user receiver, W.
    pub noise_u: Vec<f64>,
}

impl LinkMetrics {
    pub fn n_cells(&self) -> usize {
        self.rate_u.len()
    }

    /// `(1/N)·Σ(R_u + R_b)/B`.
    pub fn per_user_total_per_hz(&self, bandwidth: f64) -> f64 {
        self.per_user_uplink_per_hz(bandwidth) + self.per_user_downlink_per_hz(bandwidth)
    }

    pub fn per_user_uplink_per_hz(&self, bandwidth: f64) -> f64 {
        self.rate_u.iter().sum::<f64>() / (self.n_cells() as f64 * bandwidth)
    }

    pub fn per_user_downlink_per_hz(&self, bandwidth: f64) -> f64 {
        self.rate_b.iter().sum::<f64>() / (self.n_cells() as f64 * bandwidth)
    }
}

/// `Σ(R_u + R_b)` or `Σ(ln R_u + ln R_b)`.
pub fn utility_from_rates(rate_u: &[f64], rate_b: &[f64], kind: UtilityKind) -> Result<f64> {
    match kind {
        UtilityKind::SumRate => Ok(rate_u.iter().chain(rate_b).sum()),
        UtilityKind::SumLogRate => {
            let mut total = 0.0;
            for (k, &r) in rate_u.iter().chain(rate_b).enumerate() {
                if !(r > 0.0) {
                    return Err(Error::Domain(format!(
                        "log utility needs positive rates, rate #{k} is {r}"
                    )));
                }
                total += r.ln();
            }
            Ok(total)
        }
    }
}

/// Rate in bits/s on a channel of width `(1+α)B`.
#[inline]
pub fn shannon_rate(alpha: f64, bandwidth: f64, sinr: f64) -> f64 {
    (1.0 + alpha) * bandwidth * sinr.ln_1p() * std::f64::consts::LOG2_E
}

#[derive(Debug, Clone, Copy)]
struct CellLeakage {
    cu2: f64,
    dcu2: f64,
    cb2: f64,
    dcb2: f64,
}

/// Evaluates link quantities for one realization and leakage profile.
#[derive(Debug, Clone, Copy)]
pub struct LinkModel<'a> {
    pub params: &'a SystemParams,
    pub net: &'a NetworkRealization,
    pub profile: &'a PulseOverlapProfile,
}

struct Denominators {
    up: Vec<f64>,
    down: Vec<f64>,
    noise_b: Vec<f64>,
    noise_u: Vec<f64>,
}

impl<'a> LinkModel<'a> {
    pub fn new(
        params: &'a SystemParams,
        net: &'a NetworkRealization,
        profile: &'a PulseOverlapProfile,
    ) -> Self {
        LinkModel {
            params,
            net,
            profile,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.net.n_cells()
    }

    fn leakage(&self, x: &DecisionVector) -> Vec<CellLeakage> {
        x.alpha
            .iter()
            .map(|&a| {
                let u = self.profile.uplink(a);
                let b = self.profile.downlink(a);
                CellLeakage {
                    cu2: u.power,
                    dcu2: u.power_derivative,
                    cb2: b.power,
                    dcb2: b.power_derivative,
                }
            })
            .collect()
    }

    fn denominators(&self, x: &DecisionVector, leak: &[CellLeakage]) -> Denominators {
        let n = self.n_cells();
        let net = self.net;
        let b = self.params.bandwidth;
        let mut d = Denominators {
            up: vec![0.0; n],
            down: vec![0.0; n],
            noise_b: vec![0.0; n],
            noise_u: vec![0.0; n],
        };
        for i in 0..n {
            let width = (1.0 + x.alpha[i]) * b;
            d.noise_b[i] = width * self.params.noise_density;
            d.noise_u[i] = width * self.params.noise_density_user;
            let mut up = d.noise_b[i];
            let mut down = d.noise_u[i];
            for j in (0..n).filter(|&j| j != i) {
                // Cross-mode: BS j into BS i, user j into user i.
                up += x.p_b[j] * net.g_bb[(j, i)] * leak[j].cu2;
                down += x.p_u[j] * net.g_uu[(j, i)] * leak[j].cb2;
                // Intra-mode: user j into BS i, BS j into user i.
                up += x.p_u[j] * net.g_bu[(i, j)];
                down += x.p_b[j] * net.g_bu[(j, i)];
            }
            d.up[i] = up;
            d.down[i] = down;
        }
        d
    }

    /// `γ_u^i`.
    pub fn uplink_sinr(&self, i: usize, x: &DecisionVector) -> f64 {
        self.metrics(x).gamma_u[i]
    }

    /// `γ_b^i`.
    pub fn downlink_sinr(&self, i: usize, x: &DecisionVector) -> f64 {
        self.metrics(x).gamma_b[i]
    }

    pub fn link_rate(&self, i: usize, direction: Direction, x: &DecisionVector) -> f64 {
        let m = self.metrics(x);
        match direction {
            Direction::Uplink => m.rate_u[i],
            Direction::Downlink => m.rate_b[i],
        }
    }

    pub fn metrics(&self, x: &DecisionVector) -> LinkMetrics {
        let n = self.n_cells();
        debug_assert_eq!(x.n_cells(), n);
        let leak = self.leakage(x);
        let d = self.denominators(x, &leak);
        let bw = self.params.bandwidth;
        let mut m = LinkMetrics {
            gamma_u: vec![0.0; n],
            gamma_b: vec![0.0; n],
            rate_u: vec![0.0; n],
            rate_b: vec![0.0; n],
            noise_b: d.noise_b,
            noise_u: d.noise_u,
        };
        for i in 0..n {
            let g = self.net.desired_gain(i);
            m.gamma_u[i] = x.p_u[i] * g / d.up[i];
            m.gamma_b[i] = x.p_b[i] * g / d.down[i];
            m.rate_u[i] = shannon_rate(x.alpha[i], bw, m.gamma_u[i]);
            m.rate_b[i] = shannon_rate(x.alpha[i], bw, m.gamma_b[i]);
        }
        m
    }

    pub fn utility(&self, x: &DecisionVector, kind: UtilityKind) -> Result<f64> {
        let m = self.metrics(x);
        utility_from_rates(&m.rate_u, &m.rate_b, kind)
    }

    /// Gradient of the utility as `[∂p_u..., ∂p_b..., ∂α...]`.
    pub fn utility_gradient(&self, x: &DecisionVector, kind: UtilityKind) -> Result<Vec<f64>> {
        let n = self.n_cells();
        let net = self.net;
        let bw = self.params.bandwidth;
        let leak = self.leakage(x);
        let d = self.denominators(x, &leak);
        let mut grad = vec![0.0; 3 * n];
        let (pu, rest) = grad.split_at_mut(n);
        let (pb, al) = rest.split_at_mut(n);
        let ln2 = std::f64::consts::LN_2;

        for i in 0..n {
            let g = net.desired_gain(i);
            let width = (1.0 + x.alpha[i]) * bw;
            for dir in [Direction::Uplink, Direction::Downlink] {
                let (signal_power, den, n0) = match dir {
                    Direction::Uplink => (x.p_u[i], d.up[i], self.params.noise_density),
                    Direction::Downlink => (x.p_b[i], d.down[i], self.params.noise_density_user),
                };
                let gamma = signal_power * g / den;
                let rate = width * gamma.ln_1p() / ln2;
                let weight = match kind {
                    UtilityKind::SumRate => 1.0,
                    UtilityKind::SumLogRate => {
                        if !(rate > 0.0) {
                            return Err(Error::Domain(format!(
                                "log utility needs positive rates, cell {i} {dir:?} rate is {rate}"
                            )));
                        }
                        rate.recip()
                    }
                };
                // dR/dγ and dR/dDen.
                let dr_dgamma = weight * width / ((1.0 + gamma) * ln2);
                let dr_dden = -dr_dgamma * gamma / den;

                // Own-cell terms: signal power, bandwidth prefactor, noise.
                match dir {
                    Direction::Uplink => pu[i] += dr_dgamma * g / den,
                    Direction::Downlink => pb[i] += dr_dgamma * g / den,
                }
                al[i] += weight * bw * gamma.ln_1p() / ln2 + dr_dden * bw * n0;

                for j in (0..n).filter(|&j| j != i) {
                    match dir {
                        Direction::Uplink => {
                            pb[j] += dr_dden * net.g_bb[(j, i)] * leak[j].cu2;
                            al[j] += dr_dden * x.p_b[j] * net.g_bb[(j, i)] * leak[j].dcu2;
                            pu[j] += dr_dden * net.g_bu[(i, j)];
                        }
                        Direction::Downlink => {
                            pu[j] += dr_dden * net.g_uu[(j, i)] * leak[j].cb2;
                            al[j] += dr_dden * x.p_u[j] * net.g_uu[(j, i)] * leak[j].dcb2;
                            pb[j] += dr_dden * net.g_bu[(j, i)];
                        }
                    }
                }
            }
        }
        Ok(grad)
    }
}
