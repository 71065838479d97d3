//! Monte Carlo sweeps over channel realizations and CSV output.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::config::{dbm_to_watts, ScenarioConfig};
use crate::error::{ConfigError, ExperimentError, Result, SolveError};
use crate::mmsr::{init_power, mmsr_lower, mmsr_upper};
use crate::mssr::{mssr_lower, mssr_upper};
use crate::oma::{self, oma_baseline, oma_qu_qos_met};
use crate::scenario::{EveCase, Scenario};
use crate::scheduling::schedule_realization;
use crate::solution::{SolveResult, SolverOptions};
use crate::sop::{calibrate_epsilon0, BernsteinParams, Calibration};

pub const SUMMARY_HEADER: [&str; 10] = [
    "sweep_var",
    "sweep_value",
    "case",
    "metric",
    "mean_rate_bps_hz",
    "mean_actual_sop",
    "infeasible_frac",
    "mean_iters",
    "n_realizations",
    "master_seed",
];

pub const DETAIL_HEADER: [&str; 14] = [
    "sweep_var",
    "sweep_value",
    "case",
    "metric",
    "realization",
    "seed",
    "status",
    "raw_rate_bps_hz",
    "rate_bps_hz",
    "actual_sop",
    "eps0",
    "iterations",
    "gap",
    "qu_qos_met",
];

macro_rules! string_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s.trim() {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!("unknown {} '{}'", stringify!($name).to_lowercase(), other)),
                }
            }
        }
    };
}

string_enum!(Case {
    Lower => "lower",
    Upper => "upper",
    Oma => "oma",
});

string_enum!(Metric {
    Mmsr => "mmsr",
    Mssr => "mssr",
});

string_enum!(SweepVar {
    TxPower => "tx_power",
    SopThreshold => "sop_threshold",
    Correlation => "correlation",
    QosThreshold => "qos_threshold",
    UsersPerCluster => "users_per_cluster",
    Epsilon0 => "epsilon0",
});

/// Parses a comma-separated list.
pub fn parse_list<T: FromStr<Err = String>>(text: &str) -> std::result::Result<Vec<T>, String> {
    text.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub sweep: SweepVar,
    pub values: Vec<f64>,
    pub cases: Vec<Case>,
    pub metrics: Vec<Metric>,
    pub n_realizations: usize,
    pub base: ScenarioConfig,
    pub master_seed: u64,
}

impl ExperimentSpec {
    pub const PRESETS: &'static [&'static str] = &["eps0", "power", "sop", "correlation", "qos", "users"];

    /// Built-in sweeps over the default scenario.
    pub fn preset(name: &str, base: ScenarioConfig) -> Option<Self> {
        let (sweep, values, cases): (SweepVar, Vec<f64>, &[Case]) = match name {
            "eps0" => (SweepVar::Epsilon0, vec![0.01, 0.1, 0.5, 1.0], &[Case::Lower, Case::Upper]),
            "power" => (SweepVar::TxPower, vec![20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0], Case::ALL),
            "sop" => (SweepVar::SopThreshold, vec![1e-3, 1e-2, 1e-1], Case::ALL),
            "correlation" => (SweepVar::Correlation, vec![0.5, 0.7, 0.9], Case::ALL),
            "qos" => (SweepVar::QosThreshold, vec![1.0, 2.0, 4.0], Case::ALL),
            "users" => (SweepVar::UsersPerCluster, vec![2.0, 3.0, 4.0], Case::ALL),
            _ => return None,
        };
        Some(Self {
            name: name.to_string(),
            sweep,
            values,
            cases: cases.to_vec(),
            metrics: Metric::ALL.to_vec(),
            n_realizations: base.realizations,
            master_seed: base.rng_seed,
            base,
        })
    }

    /// Parses `key=value` lines: `sweep`, `values`, `cases`, `metrics`,
    /// `realizations` and `name`. `sweep` and `values` are required.
    pub fn parse(text: &str, base: ScenarioConfig) -> std::result::Result<Self, ConfigError> {
        let mut spec = Self {
            name: "custom".into(),
            sweep: SweepVar::TxPower,
            values: Vec::new(),
            cases: Case::ALL.to_vec(),
            metrics: Metric::ALL.to_vec(),
            n_realizations: base.realizations,
            master_seed: base.rng_seed,
            base,
        };
        let mut have_sweep = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| ConfigError::Parse { line: i + 1, message };
            let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected key=value, got '{line}'")))?;
            let value = value.trim();
            match key.trim() {
                "name" => spec.name = value.to_string(),
                "sweep" => {
                    spec.sweep = value.parse().map_err(err)?;
                    have_sweep = true;
                }
                "values" => {
                    spec.values = value
                        .split(',')
                        .map(|v| v.trim().parse::<f64>().map_err(|e| err(format!("bad value '{v}': {e}"))))
                        .collect::<std::result::Result<_, _>>()?;
                }
                "cases" => spec.cases = parse_list(value).map_err(err)?,
                "metrics" => spec.metrics = parse_list(value).map_err(err)?,
                "realizations" => spec.n_realizations = value.parse().map_err(|e| err(format!("bad realizations: {e}")))?,
                other => return Err(err(format!("unknown key '{other}'"))),
            }
        }
        if !have_sweep {
            return Err(ConfigError::Validation("experiment needs a sweep".into()));
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        if self.values.is_empty() {
            return Err(ConfigError::Validation("sweep values must be nonempty".into()));
        }
        if self.n_realizations == 0 {
            return Err(ConfigError::Validation("realizations must be at least 1".into()));
        }
        if self.cases.is_empty() || self.metrics.is_empty() {
            return Err(ConfigError::Validation("cases and metrics must be nonempty".into()));
        }
        for &v in &self.values {
            self.config_for(v)?;
        }
        Ok(())
    }

    /// Scenario at one sweep point; for `epsilon0` the config is unchanged.
    pub fn config_for(&self, value: f64) -> std::result::Result<ScenarioConfig, ConfigError> {
        let mut cfg = self.base.clone();
        match self.sweep {
            SweepVar::TxPower => cfg.tx_power = dbm_to_watts(value),
            SweepVar::SopThreshold => cfg.sop_threshold = value,
            SweepVar::Correlation => cfg.correlation = value,
            SweepVar::QosThreshold => {
                let n = cfg.users_per_cluster.saturating_sub(1);
                cfg.qos_thresholds = vec![value; n];
            }
            SweepVar::UsersPerCluster => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(ConfigError::Validation(format!("users_per_cluster must be a positive integer, got {value}")));
                }
                cfg.set_users_per_cluster(value as usize);
            }
            SweepVar::Epsilon0 => {
                if !(value > 0.0 && value <= 1.0) {
                    return Err(ConfigError::Validation(format!("epsilon0 must lie in (0, 1], got {value}")));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Solves one case and metric at fixed surrogate parameters.
pub fn solve(scn: &Scenario, case: Case, metric: Metric, params: BernsteinParams, opts: SolverOptions) -> Result<SolveResult> {
    match (case, metric) {
        (Case::Lower, Metric::Mmsr) => mmsr_lower(scn, params, opts),
        (Case::Lower, Metric::Mssr) => mssr_lower(scn, params, opts),
        (Case::Upper, Metric::Mmsr) => mmsr_upper(scn, params, init_power(scn, params)?, opts),
        (Case::Upper, Metric::Mssr) => mssr_upper(scn, params, init_power(scn, params)?, opts),
        (Case::Oma, Metric::Mmsr) => oma_baseline(scn, EveCase::Lower, oma::Objective::MaxMin, params, opts),
        (Case::Oma, Metric::Mssr) => oma_baseline(scn, EveCase::Lower, oma::Objective::MaxSum, params, opts),
    }
}

/// Solves with `eps0` tuned so the worst actual SOP meets `eps` within `tol`.
pub fn solve_calibrated(scn: &Scenario, case: Case, metric: Metric, eps: f64, tol: f64, opts: SolverOptions) -> Result<Calibration<SolveResult>> {
    calibrate_epsilon0(
        |params| {
            let res = solve(scn, case, metric, params, opts)?;
            let sop = res.max_actual_sop();
            Ok((res, sop))
        },
        eps,
        tol,
    )
}

/// Secrecy objective with each SU rate clamped at zero.
pub fn clamped_objective(res: &SolveResult, metric: Metric) -> f64 {
    match metric {
        Metric::Mmsr => res.objective.max(0.0),
        Metric::Mssr => res.per_su_rate.iter().map(|r| r.max(0.0)).sum(),
    }
}

fn error_status(e: &SolveError) -> &'static str {
    match e {
        SolveError::Infeasible(_) => "infeasible",
        SolveError::Unschedulable { .. } => "unschedulable",
        SolveError::SingularChannel { .. } => "singular_channel",
        SolveError::ZeroVector | SolveError::DegenerateSpectrum(..) | SolveError::Numerical(_) => "numerical_error",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetailRow {
    pub sweep_var: SweepVar,
    pub sweep_value: f64,
    pub case: Case,
    pub metric: Metric,
    pub realization: usize,
    pub seed: u64,
    pub status: String,
    /// Unclamped objective; zero when no solution exists.
    pub raw_rate: f64,
    pub rate: f64,
    pub actual_sop: f64,
    pub eps0: Option<f64>,
    pub iterations: usize,
    pub gap: Option<f64>,
    /// OMA only.
    pub qu_qos_met: Option<bool>,
}

impl DetailRow {
    pub fn solved(&self) -> bool {
        matches!(self.status.as_str(), "optimal" | "stationary" | "iteration_cap")
    }

    fn record(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![
            self.sweep_var.to_string(),
            self.sweep_value.to_string(),
            self.case.to_string(),
            self.metric.to_string(),
            self.realization.to_string(),
            self.seed.to_string(),
            self.status.clone(),
            self.raw_rate.to_string(),
            self.rate.to_string(),
            self.actual_sop.to_string(),
            opt(self.eps0),
            self.iterations.to_string(),
            opt(self.gap),
            self.qu_qos_met.map(|b| b.to_string()).unwrap_or_default(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub sweep_var: SweepVar,
    pub sweep_value: f64,
    pub case: Case,
    pub metric: Metric,
    pub mean_rate: f64,
    pub mean_actual_sop: f64,
    pub infeasible_frac: f64,
    pub mean_iters: f64,
    pub n_realizations: usize,
    pub master_seed: u64,
}

impl SummaryRow {
    /// Aggregates the detail rows of one (sweep value, case, metric) cell.
    /// Unsolved realizations count as zero rate and zero SOP; iterations are
    /// averaged over solved ones.
    pub fn from_details(rows: &[&DetailRow], master_seed: u64) -> Self {
        let first = rows[0];
        let n = rows.len();
        let solved: Vec<_> = rows.iter().filter(|r| r.solved()).collect();
        let mean = |f: &dyn Fn(&DetailRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n as f64;
        Self {
            sweep_var: first.sweep_var,
            sweep_value: first.sweep_value,
            case: first.case,
            metric: first.metric,
            mean_rate: mean(&|r| r.rate),
            mean_actual_sop: mean(&|r| r.actual_sop),
            infeasible_frac: (n - solved.len()) as f64 / n as f64,
            mean_iters: if solved.is_empty() {
                0.0
            } else {
                solved.iter().map(|r| r.iterations as f64).sum::<f64>() / solved.len() as f64
            },
            n_realizations: n,
            master_seed,
        }
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.sweep_var.to_string(),
            self.sweep_value.to_string(),
            self.case.to_string(),
            self.metric.to_string(),
            self.mean_rate.to_string(),
            self.mean_actual_sop.to_string(),
            self.infeasible_frac.to_string(),
            self.mean_iters.to_string(),
            self.n_realizations.to_string(),
            self.master_seed.to_string(),
        ]
    }
}

/// All case and metric combinations of one realization at one sweep point.
fn run_realization(spec: &ExperimentSpec, cfg: &ScenarioConfig, value: f64, index: usize) -> Vec<DetailRow> {
    let seed = spec.master_seed.wrapping_add(index as u64);
    let opts = SolverOptions::from_config(cfg);
    let realization = schedule_realization(cfg, seed);
    let mut rows = Vec::new();
    for &case in &spec.cases {
        for &metric in &spec.metrics {
            let mut row = DetailRow {
                sweep_var: spec.sweep,
                sweep_value: value,
                case,
                metric,
                realization: index,
                seed,
                status: String::new(),
                raw_rate: 0.0,
                rate: 0.0,
                actual_sop: 0.0,
                eps0: None,
                iterations: 0,
                gap: None,
                qu_qos_met: None,
            };
            let outcome = realization.as_ref().map_err(Clone::clone).and_then(|r| {
                let scn = Scenario::from_realization(r, &cfg.qos_thresholds);
                if case == Case::Oma {
                    row.qu_qos_met = Some(oma_qu_qos_met(&scn));
                }
                if spec.sweep == SweepVar::Epsilon0 {
                    solve(&scn, case, metric, BernsteinParams::from_eps0(value), opts).map(|res| (value, res))
                } else {
                    solve_calibrated(&scn, case, metric, cfg.sop_threshold, cfg.calibration_tol(), opts)
                        .map(|c| (c.params.eps0, c.solution))
                }
            });
            match outcome {
                Ok((eps0, res)) => {
                    row.status = res.status.to_string();
                    row.raw_rate = res.objective;
                    row.rate = clamped_objective(&res, metric);
                    row.actual_sop = res.max_actual_sop();
                    row.eps0 = Some(eps0);
                    row.iterations = res.iterations;
                    row.gap = res.gap;
                }
                Err(e) => row.status = error_status(&e).to_string(),
            }
            rows.push(row);
        }
    }
    rows
}

/// Runs every sweep point and realization. Detail rows are ordered by sweep
/// value, case, metric and realization regardless of scheduling.
pub fn run_sweep(spec: &ExperimentSpec) -> std::result::Result<(Vec<SummaryRow>, Vec<DetailRow>), ConfigError> {
    spec.validate()?;
    let mut summary = Vec::new();
    let mut details = Vec::new();
    for &value in &spec.values {
        let cfg = spec.config_for(value)?;
        let per_realization: Vec<Vec<DetailRow>> = (0..spec.n_realizations)
            .into_par_iter()
            .map(|i| run_realization(spec, &cfg, value, i))
            .collect();
        for &case in &spec.cases {
            for &metric in &spec.metrics {
                let cell: Vec<&DetailRow> = per_realization
                    .iter()
                    .flatten()
                    .filter(|r| r.case == case && r.metric == metric)
                    .collect();
                summary.push(SummaryRow::from_details(&cell, spec.master_seed));
                details.extend(cell.into_iter().cloned());
            }
        }
    }
    Ok((summary, details))
}

/// `<stem>_detail.csv` next to `out`.
pub fn detail_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    out.with_file_name(format!("{stem}_detail.csv"))
}

fn write_csv<'a>(path: &Path, header: &[&str], records: impl Iterator<Item = Vec<String>> + 'a) -> std::result::Result<(), ExperimentError> {
    let wrap = |source| ExperimentError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    w.write_record(header).map_err(wrap)?;
    for rec in records {
        w.write_record(&rec).map_err(wrap)?;
    }
    w.flush().map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> std::result::Result<(), ExperimentError> {
    write_csv(path, &SUMMARY_HEADER, rows.iter().map(SummaryRow::record))
}

pub fn write_details(path: &Path, rows: &[DetailRow]) -> std::result::Result<(), ExperimentError> {
    write_csv(path, &DETAIL_HEADER, rows.iter().map(DetailRow::record))
}

/// Runs the sweep and writes the summary CSV to `out`, plus the detail CSV
/// when `detail` is set.
pub fn run_experiment(spec: &ExperimentSpec, out: &Path, detail: bool) -> std::result::Result<Vec<SummaryRow>, ExperimentError> {
    let (summary, details) = run_sweep(spec)?;
    write_summary(out, &summary)?;
    if detail {
        write_details(&detail_path(out), &details)?;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(sweep: SweepVar, values: Vec<f64>) -> ExperimentSpec {
        ExperimentSpec {
            name: "t".into(),
            sweep,
            values,
            cases: vec![Case::Lower],
            metrics: vec![Metric::Mmsr],
            n_realizations: 2,
            base: ScenarioConfig::default(),
            master_seed: 11,
        }
    }

    #[test]
    fn names_round_trip() {
        for c in Case::ALL {
            assert_eq!(c.as_str().parse::<Case>().unwrap(), *c);
        }
        for s in SweepVar::ALL {
            assert_eq!(s.as_str().parse::<SweepVar>().unwrap(), *s);
        }
        assert!("middle".parse::<Case>().is_err());
        assert_eq!(parse_list::<Metric>("mmsr, mssr").unwrap(), vec![Metric::Mmsr, Metric::Mssr]);
    }

    #[test]
    fn presets_are_valid() {
        for name in ExperimentSpec::PRESETS {
            let spec = ExperimentSpec::preset(name, ScenarioConfig::default()).unwrap();
            spec.validate().unwrap();
        }
        assert!(ExperimentSpec::preset("nope", ScenarioConfig::default()).is_none());
    }

    #[test]
    fn parse_experiment_file() {
        let text = "# trend\nsweep = qos_threshold\nvalues = 1, 2\ncases = lower,oma\nrealizations = 3\n";
        let spec = ExperimentSpec::parse(text, ScenarioConfig::default()).unwrap();
        assert_eq!(spec.sweep, SweepVar::QosThreshold);
        assert_eq!(spec.values, vec![1.0, 2.0]);
        assert_eq!(spec.cases, vec![Case::Lower, Case::Oma]);
        assert_eq!(spec.n_realizations, 3);
        match ExperimentSpec::parse("sweep=sop_threshold\nvalues=0.1\nbogus=1\n", ScenarioConfig::default()) {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(ExperimentSpec::parse("values=1\n", ScenarioConfig::default()).is_err());
        assert!(ExperimentSpec::parse("sweep=epsilon0\nvalues=2\n", ScenarioConfig::default()).is_err());
    }

    #[test]
    fn sweep_points_modify_config() {
        let spec = tiny(SweepVar::UsersPerCluster, vec![4.0]);
        let cfg = spec.config_for(4.0).unwrap();
        assert_eq!(cfg.users_per_cluster, 4);
        assert_eq!(cfg.distance_ranges.last(), Some(&(300.0, 400.0)));
        assert_eq!(cfg.qos_thresholds.len(), 3);
        let spec = tiny(SweepVar::TxPower, vec![30.0]);
        assert!((spec.config_for(30.0).unwrap().tx_power - 1.0).abs() < 1e-12);
    }

    #[test]
    fn summary_shape_and_aggregation() {
        let spec = ExperimentSpec {
            n_realizations: 1,
            ..tiny(SweepVar::SopThreshold, vec![0.01])
        };
        let (summary, details) = run_sweep(&spec).unwrap();
        assert_eq!(summary.len(), 1);
        assert_eq!(details.len(), 1);
        let spec = tiny(SweepVar::QosThreshold, vec![0.5, 2.0]);
        let (summary, details) = run_sweep(&spec).unwrap();
        assert_eq!(summary.len(), 2);
        for s in &summary {
            let cell: Vec<_> = details.iter().filter(|d| d.sweep_value == s.sweep_value).collect();
            let mean = cell.iter().map(|d| d.rate).sum::<f64>() / cell.len() as f64;
            assert!((mean - s.mean_rate).abs() < 1e-12);
        }
    }

    #[test]
    fn detail_path_is_sibling() {
        assert_eq!(detail_path(Path::new("/tmp/run/out.csv")), PathBuf::from("/tmp/run/out_detail.csv"));
    }
}
