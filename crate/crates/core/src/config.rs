//! Plain-text experiment configuration.
//!
//! One `key = value` pair per line; `#` starts a comment. Lists are comma
//! separated. Keys not present keep their defaults.
//!
//! ```text
//! n_cells = 4
//! ratio_grid = 0.005, 0.05
//! utilities = sum_rate
//! noise_density_dbm = -165
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::harness::ExperimentConfig;
use crate::network::{dbm_per_hz_to_watts, Fading, Layout};

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse::<T>()
        .map_err(|e| Error::Config(format!("invalid value '{value}' for '{key}': {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect()
}

fn parse_fading(value: &str) -> Result<Fading> {
    match value.trim().to_ascii_lowercase().as_str() {
        "none" | "off" => Ok(Fading::None),
        "rayleigh" => Ok(Fading::RayleighUnitMean),
        other => Err(Error::Config(format!("unknown fading '{other}'"))),
    }
}

fn parse_layout(value: &str) -> Result<Layout> {
    match value.trim().to_ascii_lowercase().as_str() {
        "auto" => Ok(Layout::Auto),
        "grid" => Ok(Layout::Grid),
        "line" => Ok(Layout::Line),
        other => Err(Error::Config(format!("unknown layout '{other}'"))),
    }
}

fn parse_workers(key: &str, value: &str) -> Result<Option<usize>> {
    if value.trim().eq_ignore_ascii_case("auto") {
        Ok(None)
    } else {
        parse_value(key, value).map(Some)
    }
}

/// Applies one key to `cfg`.
pub fn apply_key(cfg: &mut ExperimentConfig, key: &str, value: &str) -> Result<()> {
    let p = &mut cfg.params;
    match key {
        "n_cells" => p.n_cells = parse_value(key, value)?,
        "isd" => p.isd = parse_value(key, value)?,
        "bandwidth" => p.bandwidth = parse_value(key, value)?,
        "carrier_ghz" => p.carrier_ghz = parse_value(key, value)?,
        "noise_density" => {
            let n0 = parse_value(key, value)?;
            p.noise_density = n0;
            p.noise_density_user = n0;
        }
        "noise_density_user" => p.noise_density_user = parse_value(key, value)?,
        "noise_density_dbm" => {
            let n0 = dbm_per_hz_to_watts(parse_value(key, value)?);
            p.noise_density = n0;
            p.noise_density_user = n0;
        }
        "p_u_max" => p.p_u_max = parse_value(key, value)?,
        "p_b_min" => p.p_b_min = parse_value(key, value)?,
        "p_b_tot" => p.p_b_tot = parse_value(key, value)?,
        "alpha_min" => p.alpha_min = parse_value(key, value)?,
        "fading" => p.fading = parse_fading(value)?,
        "layout" => p.layout = parse_layout(value)?,
        "d_min" => p.d_min = parse_value(key, value)?,
        "ratio_grid" => cfg.ratio_grid = parse_list(key, value)?,
        "n_drops" => cfg.n_drops = parse_value(key, value)?,
        "base_seed" | "seed" => cfg.base_seed = parse_value(key, value)?,
        "utilities" => cfg.utilities = parse_list(key, value)?,
        "schemes" => cfg.schemes = parse_list(key, value)?,
        "n_starts" => cfg.n_starts = parse_value(key, value)?,
        "output_dir" => {
            let v = value.trim();
            cfg.output_dir = (!v.is_empty()).then(|| PathBuf::from(v));
        }
        "workers" => cfg.workers = parse_workers(key, value)?,
        "hist_bins" => cfg.hist_bins = parse_value(key, value)?,
        _ => return Err(Error::Config(format!("unknown key '{key}'"))),
    }
    Ok(())
}

/// Parses configuration text on top of the defaults and validates the result.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
        apply_key(&mut cfg, key.trim(), value)
            .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Serializes `cfg` in the format read by [`parse_config`]. Solver settings
/// are not part of the file format.
pub fn render_config(cfg: &ExperimentConfig) -> String {
    let p = &cfg.params;
    let join = |v: Vec<String>| v.join(", ");
    let mut s = String::new();
    let _ = writeln!(s, "n_cells = {}", p.n_cells);
    let _ = writeln!(s, "isd = {}", p.isd);
    let _ = writeln!(s, "bandwidth = {}", p.bandwidth);
    let _ = writeln!(s, "carrier_ghz = {}", p.carrier_ghz);
    let _ = writeln!(s, "noise_density = {}", p.noise_density);
    let _ = writeln!(s, "noise_density_user = {}", p.noise_density_user);
    let _ = writeln!(s, "p_u_max = {}", p.p_u_max);
    let _ = writeln!(s, "p_b_min = {}", p.p_b_min);
    let _ = writeln!(s, "p_b_tot = {}", p.p_b_tot);
    let _ = writeln!(s, "alpha_min = {}", p.alpha_min);
    let fading = match p.fading {
        Fading::None => "none",
        Fading::RayleighUnitMean => "rayleigh",
    };
    let _ = writeln!(s, "fading = {fading}");
    let layout = match p.layout {
        Layout::Auto => "auto",
        Layout::Grid => "grid",
        Layout::Line => "line",
    };
    let _ = writeln!(s, "layout = {layout}");
    let _ = writeln!(s, "d_min = {}", p.d_min);
    let _ = writeln!(
        s,
        "ratio_grid = {}",
        join(cfg.ratio_grid.iter().map(|r| r.to_string()).collect())
    );
    let _ = writeln!(s, "n_drops = {}", cfg.n_drops);
    let _ = writeln!(s, "base_seed = {}", cfg.base_seed);
    let _ = writeln!(
        s,
        "utilities = {}",
        join(cfg.utilities.iter().map(|u| u.to_string()).collect())
    );
    let _ = writeln!(
        s,
        "schemes = {}",
        join(cfg.schemes.iter().map(|k| k.to_string()).collect())
    );
    let _ = writeln!(s, "n_starts = {}", cfg.n_starts);
    if let Some(dir) = &cfg.output_dir {
        let _ = writeln!(s, "output_dir = {}", dir.display());
    }
    match cfg.workers {
        Some(w) => {
            let _ = writeln!(s, "workers = {w}");
        }
        None => {
            let _ = writeln!(s, "workers = auto");
        }
    }
    let _ = writeln!(s, "hist_bins = {}", cfg.hist_bins);
    s
}
