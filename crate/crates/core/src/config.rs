//! Scenario configuration and the flat `key=value` file format.
//!
//! Every key is optional; missing keys take the reference simulation values
//! (six antennas serving six clusters of three users at 40 dBm). Powers are
//! given in dBm in the file and converted to watts once, at load time.

use std::fs;
use std::path::Path;

use crate::error::ConfigError;

/// System, channel, constraint and solver parameters for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n_antennas: usize,
    pub n_clusters: usize,
    pub users_per_cluster: usize,
    /// Total transmit power in watts.
    pub tx_power: f64,
    /// Receiver noise power in watts.
    pub noise_power: f64,
    pub pathloss_exp: f64,
    /// One `(d_min, d_max)` range in meters per user position.
    pub distance_ranges: Vec<(f64, f64)>,
    /// Whether `distance_ranges` was set explicitly (otherwise it follows `K`).
    pub explicit_ranges: bool,
    pub eve_distance: f64,
    /// Target secrecy outage probability.
    pub sop_threshold: f64,
    /// Linear SINR threshold per QU position `k = 2..=K` (length `K - 1`).
    pub qos_thresholds: Vec<f64>,
    /// Correlation coefficient used when synthesizing QU channels.
    pub correlation: f64,
    /// Scheduling threshold on the correlation statistic; defaults to `correlation`.
    pub corr_threshold: Option<f64>,
    pub tolerance: f64,
    pub max_iters: usize,
    pub realizations: usize,
    pub rng_seed: u64,
    /// Draw distances once from `rng_seed` instead of per realization.
    pub freeze_distances: bool,
    /// Calibration tolerance on the achieved SOP; defaults to `sop_threshold / 10`.
    pub calibration_tol: Option<f64>,
    /// Scheduling redraws per cluster before a realization is declared unschedulable.
    pub retry_cap: usize,
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Reference distance ranges for `k` users per cluster: 50-100 m, 100-200 m,
/// then 100 m wide bands further out.
pub fn default_ranges(k: usize) -> Vec<(f64, f64)> {
    (0..k)
        .map(|i| match i {
            0 => (50.0, 100.0),
            i => (100.0 * i as f64, 100.0 * (i + 1) as f64),
        })
        .collect()
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_antennas: 6,
            n_clusters: 6,
            users_per_cluster: 3,
            tx_power: dbm_to_watts(40.0),
            noise_power: dbm_to_watts(-90.0),
            pathloss_exp: 4.0,
            distance_ranges: default_ranges(3),
            explicit_ranges: false,
            eve_distance: 200.0,
            sop_threshold: 1e-2,
            qos_thresholds: vec![2.0; 2],
            correlation: 0.9,
            corr_threshold: None,
            tolerance: 1e-2,
            max_iters: 50,
            realizations: 100,
            rng_seed: 0,
            freeze_distances: false,
            calibration_tol: None,
            retry_cap: 100,
        }
    }
}

impl ScenarioConfig {
    /// Transmit SNR `P / sigma_N^2`.
    pub fn rho(&self) -> f64 {
        self.tx_power / self.noise_power
    }

    /// Eavesdropper channel variance `d_e^{-a}`.
    pub fn gamma_e(&self) -> f64 {
        self.eve_distance.powf(-self.pathloss_exp)
    }

    pub fn corr_threshold(&self) -> f64 {
        self.corr_threshold.unwrap_or(self.correlation)
    }

    pub fn calibration_tol(&self) -> f64 {
        self.calibration_tol.unwrap_or(self.sop_threshold / 10.0)
    }

    /// Changes `K`, resizing the per-position tables that depend on it.
    pub fn set_users_per_cluster(&mut self, k: usize) {
        self.users_per_cluster = k;
        if !self.explicit_ranges {
            self.distance_ranges = default_ranges(k);
        }
        let fill = self.qos_thresholds.last().copied().unwrap_or(2.0);
        self.qos_thresholds.resize(k.saturating_sub(1), fill);
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Validation(msg));
        if self.n_antennas == 0 || self.n_clusters == 0 {
            return fail("N and G must be positive".into());
        }
        if self.n_clusters != self.n_antennas {
            return fail(format!(
                "G must equal N (got G = {}, N = {})",
                self.n_clusters, self.n_antennas
            ));
        }
        if self.users_per_cluster < 1 {
            return fail("K must be at least 1".into());
        }
        if self.distance_ranges.len() != self.users_per_cluster {
            return fail(format!(
                "distance_ranges has {} entries but K = {}",
                self.distance_ranges.len(),
                self.users_per_cluster
            ));
        }
        for &(lo, hi) in &self.distance_ranges {
            if !(lo > 0.0 && lo < hi && hi.is_finite()) {
                return fail(format!("distance range ({lo}, {hi}) must satisfy 0 < d_min < d_max"));
            }
        }
        if self.qos_thresholds.len() != self.users_per_cluster - 1 {
            return fail(format!(
                "expected {} QoS thresholds, got {}",
                self.users_per_cluster - 1,
                self.qos_thresholds.len()
            ));
        }
        if self.qos_thresholds.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return fail("QoS thresholds must be finite and nonnegative".into());
        }
        if !(self.sop_threshold > 0.0 && self.sop_threshold < 1.0) {
            return fail(format!("sop_threshold must lie in (0, 1), got {}", self.sop_threshold));
        }
        if !(0.0..=1.0).contains(&self.correlation) {
            return fail(format!("phi must lie in [0, 1], got {}", self.correlation));
        }
        if !(self.tolerance > 0.0) {
            return fail("delta must be positive".into());
        }
        if !(self.tx_power > 0.0 && self.tx_power.is_finite()) {
            return fail("transmit power must be positive".into());
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return fail("noise power must be positive".into());
        }
        if !(self.pathloss_exp >= 0.0) || !(self.eve_distance > 0.0) {
            return fail("path-loss exponent and Eve distance must be positive".into());
        }
        if self.max_iters == 0 || self.realizations == 0 {
            return fail("max_iters and realizations must be positive".into());
        }
        if let Some(tol) = self.calibration_tol {
            if !(tol > 0.0) {
                return fail("calibration_tol must be positive".into());
            }
        }
        Ok(())
    }
}

/// Reads a scenario file from disk. See [`parse_config_str`] for the format.
pub fn parse_config(path: impl AsRef<Path>) -> Result<ScenarioConfig, ConfigError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text)
}

/// Parses flat `key=value` lines; `#` starts a comment. Unknown keys are
/// rejected. `K` is applied before the per-position keys regardless of order.
pub fn parse_config_str(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Parse {
            line: line_no,
            message: format!("expected key=value, found {line:?}"),
        })?;
        entries.push((line_no, key.trim().to_string(), value.trim().to_string()));
    }

    let mut cfg = ScenarioConfig::default();
    let mut seen_ranges = None;
    let mut seen_qos = None;
    // K first, so that defaults for the per-position tables follow it.
    for (line, key, value) in &entries {
        if key == "K" {
            cfg.set_users_per_cluster(parse_num(*line, key, value)?);
        }
    }
    for (line, key, value) in &entries {
        let line = *line;
        match key.as_str() {
            "K" => {}
            "N" => cfg.n_antennas = parse_num(line, key, value)?,
            "G" => cfg.n_clusters = parse_num(line, key, value)?,
            "P_dBm" => cfg.tx_power = dbm_to_watts(parse_num(line, key, value)?),
            "noise_dBm" => cfg.noise_power = dbm_to_watts(parse_num(line, key, value)?),
            "pathloss_exp" => cfg.pathloss_exp = parse_num(line, key, value)?,
            "distance_ranges" => seen_ranges = Some((line, value.clone())),
            "eve_distance" => cfg.eve_distance = parse_num(line, key, value)?,
            "sop_threshold" => cfg.sop_threshold = parse_num(line, key, value)?,
            "qos_threshold" => seen_qos = Some((line, value.clone())),
            "phi" => cfg.correlation = parse_num(line, key, value)?,
            "phi_threshold" => cfg.corr_threshold = Some(parse_num(line, key, value)?),
            "delta" => cfg.tolerance = parse_num(line, key, value)?,
            "max_iters" => cfg.max_iters = parse_num(line, key, value)?,
            "realizations" => cfg.realizations = parse_num(line, key, value)?,
            "seed" => cfg.rng_seed = parse_num(line, key, value)?,
            "freeze_distances" => cfg.freeze_distances = parse_bool(line, value)?,
            "calibration_tol" => cfg.calibration_tol = Some(parse_num(line, key, value)?),
            "retry_cap" => cfg.retry_cap = parse_num(line, key, value)?,
            other => {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("unknown key {other:?}"),
                })
            }
        }
    }
    if let Some((line, value)) = seen_ranges {
        cfg.distance_ranges = parse_ranges(line, &value)?;
        cfg.explicit_ranges = true;
    }
    if let Some((line, value)) = seen_qos {
        let values = parse_list(line, "qos_threshold", &value)?;
        cfg.qos_thresholds = if values.len() == 1 {
            vec![values[0]; cfg.users_per_cluster.saturating_sub(1)]
        } else {
            values
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::Parse {
        line,
        message: format!("invalid value {value:?} for {key}"),
    })
}

fn parse_bool(line: usize, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(ConfigError::Parse {
            line,
            message: format!("expected a boolean, found {value:?}"),
        }),
    }
}

fn parse_list(line: usize, key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    value.split(',').map(|v| parse_num(line, key, v.trim())).collect()
}

/// `50-100,100-200,200-300`
fn parse_ranges(line: usize, value: &str) -> Result<Vec<(f64, f64)>, ConfigError> {
    value
        .split(',')
        .map(|part| {
            let (lo, hi) = part.trim().split_once('-').ok_or_else(|| ConfigError::Parse {
                line,
                message: format!("range {part:?} must look like lo-hi"),
            })?;
            Ok((
                parse_num(line, "distance_ranges", lo.trim())?,
                parse_num(line, "distance_ranges", hi.trim())?,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_reference_defaults() {
        let cfg = parse_config_str("").unwrap();
        assert_eq!(cfg.n_antennas, 6);
        assert_eq!(cfg.n_clusters, 6);
        assert_eq!(cfg.users_per_cluster, 3);
        assert_eq!(cfg.pathloss_exp, 4.0);
        assert!((cfg.noise_power - 1e-12).abs() < 1e-24);
        assert!((cfg.tx_power - 10.0).abs() < 1e-12);
        assert_eq!(cfg.eve_distance, 200.0);
        assert_eq!(cfg.sop_threshold, 1e-2);
        assert_eq!(cfg.qos_thresholds, vec![2.0, 2.0]);
        assert_eq!(cfg.correlation, 0.9);
        assert_eq!(cfg.tolerance, 1e-2);
        assert_eq!(cfg.max_iters, 50);
        assert_eq!(cfg.realizations, 100);
        assert_eq!(cfg.distance_ranges, vec![(50.0, 100.0), (100.0, 200.0), (200.0, 300.0)]);
    }

    #[test]
    fn zero_users_is_rejected() {
        match parse_config_str("K=0") {
            Err(ConfigError::Validation(msg)) => assert!(msg.contains("K"), "{msg}"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn dbm_converts_to_watts() {
        let cfg = parse_config_str("P_dBm=40").unwrap();
        assert!((cfg.tx_power - 10.0).abs() < 1e-12);
        assert!((watts_to_dbm(cfg.tx_power) - 40.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_key_reports_line() {
        match parse_config_str("# comment\nphi=0.5\nbogus=1\n") {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line() {
        match parse_config_str("phi=0.5\nnot a pair") {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn k_resizes_dependent_tables() {
        let cfg = parse_config_str("qos_threshold=4\nK=4").unwrap();
        assert_eq!(cfg.distance_ranges.len(), 4);
        assert_eq!(cfg.distance_ranges[3], (300.0, 400.0));
        assert_eq!(cfg.qos_thresholds, vec![4.0; 3]);
        let cfg = parse_config_str("K=2").unwrap();
        assert_eq!(cfg.distance_ranges, vec![(50.0, 100.0), (100.0, 200.0)]);
    }

    #[test]
    fn explicit_ranges_and_qos_list() {
        let cfg = parse_config_str("distance_ranges=10-20, 20-40,40-80\nqos_threshold=1,3").unwrap();
        assert_eq!(cfg.distance_ranges, vec![(10.0, 20.0), (20.0, 40.0), (40.0, 80.0)]);
        assert_eq!(cfg.qos_thresholds, vec![1.0, 3.0]);
    }

    #[test]
    fn invariants_are_checked() {
        assert!(parse_config_str("G=5").is_err());
        assert!(parse_config_str("sop_threshold=1").is_err());
        assert!(parse_config_str("phi=1.5").is_err());
        assert!(parse_config_str("distance_ranges=20-10,1-2,2-3").is_err());
        assert!(parse_config_str("delta=0").is_err());
    }

    #[test]
    fn gamma_e_from_distance() {
        let cfg = ScenarioConfig::default();
        assert!((cfg.gamma_e() - 6.25e-10).abs() < 1e-22);
        assert!((cfg.rho() - 1e13).abs() / 1e13 < 1e-12);
    }
}
