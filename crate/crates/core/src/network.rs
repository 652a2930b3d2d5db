//! Network layout, user drops, pathloss and fading.
//!
//! Gain matrices are stored as `g[(source, destination)]` for the
//! BS→BS and user→user cross-mode links. The BS↔user matrix is indexed
//! `g_bu[(bs, user)]`; the link is reciprocal, so the same entry serves the
//! uplink (user → BS) and downlink (BS → user) directions.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::spectral::ALPHA_MIN;

/// Thermal noise density in dBm/Hz.
pub const THERMAL_NOISE_DBM_HZ: f64 = -174.0;
pub const DEFAULT_NOISE_FIGURE_DB: f64 = 9.0;

/// Converts a density in dBm/Hz into W/Hz.
pub fn dbm_per_hz_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Fading {
    None,
    RayleighUnitMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Layout {
    /// Square grid when `N` is a perfect square, otherwise a line.
    Auto,
    Grid,
    Line,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    pub n_cells: usize,
    /// Inter-site distance in metres.
    pub isd: f64,
    /// Half-duplex bandwidth `B` per direction, Hz.
    pub bandwidth: f64,
    /// Carrier frequency in GHz.
    pub carrier_ghz: f64,
    /// Noise density at base-station receivers, W/Hz.
    pub noise_density: f64,
    /// Noise density at user receivers, W/Hz.
    pub noise_density_user: f64,
    pub p_u_max: f64,
    pub p_b_min: f64,
    pub p_b_tot: f64,
    pub alpha_min: f64,
    pub fading: Fading,
    pub layout: Layout,
    /// Minimum user distance from its serving BS, metres.
    pub d_min: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        let n0 = dbm_per_hz_to_watts(THERMAL_NOISE_DBM_HZ + DEFAULT_NOISE_FIGURE_DB);
        SystemParams {
            n_cells: 9,
            isd: 500.0,
            bandwidth: 20e6,
            carrier_ghz: 2.0,
            noise_density: n0,
            noise_density_user: n0,
            p_u_max: 0.5,
            p_b_min: 1.0,
            p_b_tot: 9.0 * 40.0,
            alpha_min: ALPHA_MIN,
            fading: Fading::RayleighUnitMean,
            layout: Layout::Auto,
            d_min: 10.0,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.n_cells == 0 {
            return bad("n_cells must be at least 1".into());
        }
        if !(self.isd > 0.0) {
            return bad(format!("isd must be positive, got {}", self.isd));
        }
        if !(self.bandwidth > 0.0) {
            return bad(format!(
                "bandwidth must be positive, got {}",
                self.bandwidth
            ));
        }
        if !(self.carrier_ghz > 0.0) {
            return bad(format!(
                "carrier_ghz must be positive, got {}",
                self.carrier_ghz
            ));
        }
        if !(self.noise_density > 0.0 && self.noise_density_user > 0.0) {
            return bad("noise densities must be positive".into());
        }
        if !(self.p_u_max > 0.0) {
            return bad(format!("p_u_max must be positive, got {}", self.p_u_max));
        }
        if !(self.p_b_tot > 0.0) {
            return bad(format!("p_b_tot must be positive, got {}", self.p_b_tot));
        }
        if !(self.p_b_min >= 0.0) {
            return bad(format!(
                "p_b_min must be non-negative, got {}",
                self.p_b_min
            ));
        }
        if !(0.0..=1.0).contains(&self.alpha_min) {
            return bad(format!(
                "alpha_min must lie in [0, 1], got {}",
                self.alpha_min
            ));
        }
        if !(self.d_min >= 0.0 && self.d_min < self.isd / 2.0) {
            return bad(format!(
                "d_min must lie in [0, isd/2), got {} with isd {}",
                self.d_min, self.isd
            ));
        }
        Ok(())
    }

    /// Radius of each cell's coverage disk.
    pub fn coverage_radius(&self) -> f64 {
        self.isd / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Base-station positions. Nearest-neighbour spacing equals `isd`.
pub fn generate_topology(params: &SystemParams) -> Result<Vec<Point>> {
    params.validate()?;
    let n = params.n_cells;
    let side = (n as f64).sqrt().round() as usize;
    let square = side * side == n;
    let grid = match params.layout {
        Layout::Grid if !square => {
            return Err(Error::Config(format!(
                "grid layout needs a square cell count, got {n}"
            )))
        }
        Layout::Grid => true,
        Layout::Line => false,
        Layout::Auto => square,
    };
    let isd = params.isd;
    Ok(if grid {
        (0..n)
            .map(|k| Point::new((k % side) as f64 * isd, (k / side) as f64 * isd))
            .collect()
    } else {
        (0..n).map(|k| Point::new(k as f64 * isd, 0.0)).collect()
    })
}

/// Drops one user per cell, uniformly over the annulus
/// `d_min ≤ r ≤ isd/2` around its BS.
pub fn drop_users<R: Rng + ?Sized>(bs: &[Point], params: &SystemParams, rng: &mut R) -> Vec<Point> {
    let r_max = params.coverage_radius();
    let r_min = params.d_min;
    bs.iter()
        .map(|b| {
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            let u: f64 = rng.random();
            let r = (r_min * r_min + u * (r_max * r_max - r_min * r_min)).sqrt();
            Point::new(b.x + r * theta.cos(), b.y + r * theta.sin())
        })
        .collect()
}

/// Pathloss in dB, `22·log10(d) + 28 + 20·log10(fc)`.
pub fn pathloss_db(distance: f64, carrier_ghz: f64) -> f64 {
    22.0 * distance.log10() + 28.0 + 20.0 * carrier_ghz.log10()
}

/// Linear power gain `10^(−L/10)`. Distances below 1 m are clamped.
pub fn pathloss_gain(distance: f64, carrier_ghz: f64) -> f64 {
    let d = if distance < 1.0 {
        log::warn!("pathloss distance {distance} m below 1 m, clamping");
        1.0
    } else {
        distance
    };
    10f64.powf(-pathloss_db(d, carrier_ghz) / 10.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkRealization {
    pub bs_positions: Vec<Point>,
    pub user_positions: Vec<Point>,
    /// `r_bu[(b, u)]`: BS `b` to user `u`.
    pub r_bu: DMatrix<f64>,
    pub r_bb: DMatrix<f64>,
    pub r_uu: DMatrix<f64>,
    pub g_bu: DMatrix<f64>,
    pub g_bb: DMatrix<f64>,
    pub g_uu: DMatrix<f64>,
    pub seed: u64,
}

fn fading_draw<R: Rng + ?Sized>(fading: Fading, rng: &mut R) -> f64 {
    match fading {
        Fading::None => 1.0,
        Fading::RayleighUnitMean => loop {
            let h: f64 = rng.sample(Exp1);
            if h > 0.0 {
                break h;
            }
        },
    }
}

/// Builds distance and gain matrices for fixed positions. Fading draws use
/// their own stream so they never perturb the user drop.
pub fn realize_channels(
    bs: &[Point],
    users: &[Point],
    params: &SystemParams,
    seed: u64,
) -> Result<NetworkRealization> {
    let n = bs.len();
    if users.len() != n {
        return Err(Error::InvalidParameter(format!(
            "{} base stations but {} users",
            n,
            users.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let fc = params.carrier_ghz;
    let self_gain = pathloss_gain(1.0, fc);

    let r_bu = DMatrix::from_fn(n, n, |b, u| bs[b].distance(&users[u]));
    let r_bb = DMatrix::from_fn(n, n, |j, i| bs[j].distance(&bs[i]));
    let r_uu = DMatrix::from_fn(n, n, |j, i| users[j].distance(&users[i]));

    let mut g_bu = DMatrix::zeros(n, n);
    for b in 0..n {
        for u in 0..n {
            g_bu[(b, u)] = fading_draw(params.fading, &mut rng) * pathloss_gain(r_bu[(b, u)], fc);
        }
    }
    // Diagonals of the cross-mode matrices are self-interference, assumed
    // fully cancelled; they hold the 1 m reference gain so every entry stays
    // positive.
    let mut symmetric = |dist: &DMatrix<f64>| {
        let mut g = DMatrix::from_element(n, n, self_gain);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = fading_draw(params.fading, &mut rng) * pathloss_gain(dist[(i, j)], fc);
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    };
    let g_bb = symmetric(&r_bb);
    let g_uu = symmetric(&r_uu);

    Ok(NetworkRealization {
        bs_positions: bs.to_vec(),
        user_positions: users.to_vec(),
        r_bu,
        r_bb,
        r_uu,
        g_bu,
        g_bb,
        g_uu,
        seed,
    })
}

impl NetworkRealization {
    /// Full drop: layout, users and channels from `(params, seed)`.
    pub fn generate(params: &SystemParams, seed: u64) -> Result<Self> {
        let bs = generate_topology(params)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let users = drop_users(&bs, params, &mut rng);
        realize_channels(&bs, &users, params, seed)
    }

    pub fn n_cells(&self) -> usize {
        self.bs_positions.len()
    }

    /// Serving-link gain of cell `i`, shared by uplink and downlink.
    #[inline]
    pub fn desired_gain(&self, i: usize) -> f64 {
        self.g_bu[(i, i)]
    }

    /// Hash of every position and gain bit pattern.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.seed.hash(&mut h);
        for p in self.bs_positions.iter().chain(&self.user_positions) {
            p.x.to_bits().hash(&mut h);
            p.y.to_bits().hash(&mut h);
        }
        for m in [&self.g_bu, &self.g_bb, &self.g_uu] {
            for v in m.iter() {
                v.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }

    /// Relabels cells: new cell `k` is old cell `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n_cells();
        let pm = |m: &DMatrix<f64>| DMatrix::from_fn(n, n, |a, b| m[(perm[a], perm[b])]);
        NetworkRealization {
            bs_positions: perm.iter().map(|&k| self.bs_positions[k]).collect(),
            user_positions: perm.iter().map(|&k| self.user_positions[k]).collect(),
            r_bu: pm(&self.r_bu),
            r_bb: pm(&self.r_bb),
            r_uu: pm(&self.r_uu),
            g_bu: pm(&self.g_bu),
            g_bb: pm(&self.g_bb),
            g_uu: pm(&self.g_uu),
            seed: self.seed,
        }
    }

    /// Dumps positions and the per-pair matrices, one row per ordered pair.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# seed={}", self.seed)?;
        writeln!(out, "cell,bs_x,bs_y,user_x,user_y")?;
        for (k, (b, u)) in self
            .bs_positions
            .iter()
            .zip(&self.user_positions)
            .enumerate()
        {
            writeln!(out, "{k},{},{},{},{}", b.x, b.y, u.x, u.y)?;
        }
        writeln!(out, "j,i,r_bu,r_bb,r_uu,g_bu,g_bb,g_uu")?;
        let n = self.n_cells();
        for j in 0..n {
            for i in 0..n {
                writeln!(
                    out,
                    "{j},{i},{},{},{},{},{},{}",
                    self.r_bu[(j, i)],
                    self.r_bb[(j, i)],
                    self.r_uu[(j, i)],
                    self.g_bu[(j, i)],
                    self.g_bb[(j, i)],
                    self.g_uu[(j, i)]
                )?;
            }
        }
        Ok(())
    }
}
