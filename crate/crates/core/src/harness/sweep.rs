//! Parameter sweeps and their summary statistics.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::channel::NetworkConfig;
use crate::harness::seed::{child_seed, stream_rng, Purpose};
use crate::harness::trial::{run_trial, run_trial_with_symbols, TrialRecord};
use crate::harness::HarnessError;
use crate::oia::Scheme;
use crate::theory::{
    corrected_tail_fit, empirical_tail_fit, predicted_exponent, predicted_slope, sample_user_metrics, scaling_slope,
    DEFAULT_TAIL_WINDOW,
};

/// Largest tolerated fraction of failed trials at a sweep point.
pub const FAILURE_BUDGET: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    SumLifVsN,
    SumLifVsL,
    RateVsSnr,
    RateVsN,
    SerVsN,
    Tail,
    Slope,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::SumLifVsN,
        ExperimentKind::SumLifVsL,
        ExperimentKind::RateVsSnr,
        ExperimentKind::RateVsN,
        ExperimentKind::SerVsN,
        ExperimentKind::Tail,
        ExperimentKind::Slope,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SumLifVsN => "sum-lif-vs-N",
            ExperimentKind::SumLifVsL => "sum-lif-vs-L",
            ExperimentKind::RateVsSnr => "rate-vs-snr",
            ExperimentKind::RateVsN => "rate-vs-N",
            ExperimentKind::SerVsN => "ser-vs-N",
            ExperimentKind::Tail => "tail",
            ExperimentKind::Slope => "slope",
        }
    }

    /// Which configuration field the sweep value replaces.
    pub fn swept_field(self) -> &'static str {
        match self {
            ExperimentKind::SumLifVsL | ExperimentKind::Tail => "L",
            ExperimentKind::RateVsSnr => "snr_db",
            _ => "N",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|k| k.name()).collect();
            format!("unknown experiment '{s}'; expected one of {}", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// Base configuration; the swept field is overwritten per point.
    pub config: NetworkConfig,
    pub sweep: Vec<f64>,
    pub schemes: Vec<Scheme>,
    /// Trials per point, or leakage samples per point for `tail`.
    pub trials: usize,
    pub master_seed: u64,
    /// QPSK symbols per stream and trial for `ser-vs-N`.
    pub block_length: usize,
    /// Quantile window of the `tail` fit.
    pub tail_window: (f64, f64),
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, config: NetworkConfig, sweep: Vec<f64>, schemes: Vec<Scheme>) -> Self {
        ExperimentSpec {
            kind,
            config,
            sweep,
            schemes,
            trials: 1000,
            master_seed: 42,
            block_length: 50,
            tail_window: DEFAULT_TAIL_WINDOW,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::Invalid("trials must be at least 1".into()));
        }
        if self.sweep.is_empty() {
            return Err(HarnessError::Invalid("sweep is empty".into()));
        }
        if self.schemes.is_empty() {
            return Err(HarnessError::Invalid("no schemes requested".into()));
        }
        if self.sweep.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(HarnessError::Invalid(
                "sweep values must be strictly increasing".into(),
            ));
        }
        if self.kind == ExperimentKind::SerVsN && self.block_length == 0 {
            return Err(HarnessError::Invalid("block length must be at least 1".into()));
        }
        if self.kind == ExperimentKind::Slope && self.sweep.len() < 4 {
            return Err(HarnessError::Invalid(
                "slope needs at least 4 sweep values".into(),
            ));
        }
        for &v in &self.sweep {
            self.config_at(v)?;
        }
        Ok(())
    }

    /// Configuration at sweep value `value`.
    pub fn config_at(&self, value: f64) -> Result<NetworkConfig, HarnessError> {
        let mut c = self.config.clone();
        let count = || {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(HarnessError::Invalid(format!(
                    "{} must be a positive integer, got {value}",
                    self.kind.swept_field()
                )))
            }
        };
        match self.kind.swept_field() {
            "L" => c.antennas_user = vec![count()?; c.cells],
            "snr_db" => c.snr_db = value,
            _ => c.num_users = vec![count()?; c.cells],
        }
        c.validate()?;
        Ok(c)
    }
}

/// One aggregated statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub scheme: String,
    pub sweep: f64,
    pub stat: String,
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    /// Zero-forcing redraws spent over the whole run.
    pub zf_retries: u64,
}

impl ResultTable {
    pub fn find(&self, scheme: &str, sweep: f64, stat: &str) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.scheme == scheme && r.sweep == sweep && r.stat == stat)
    }

    /// `(sweep, mean)` pairs of one scheme and statistic, in sweep order.
    pub fn series(&self, scheme: &str, stat: &str) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.scheme == scheme && r.stat == stat)
            .map(|r| (r.sweep, r.mean))
            .collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn run_point(
    spec: &ExperimentSpec,
    config: &NetworkConfig,
    index: usize,
    sweep: f64,
    execution: Execution,
) -> Result<(Vec<TrialRecord>, u64), HarnessError> {
    let one = |t: usize| {
        let seed = child_seed(spec.master_seed, index, t);
        if spec.kind == ExperimentKind::SerVsN {
            run_trial_with_symbols(config, &spec.schemes, seed, spec.block_length)
        } else {
            run_trial(config, &spec.schemes, seed)
        }
    };
    let outcomes: Vec<Result<TrialRecord, HarnessError>> = match execution {
        Execution::Serial => (0..spec.trials).map(one).collect(),
        Execution::Parallel => (0..spec.trials).into_par_iter().map(one).collect(),
    };
    let mut records = Vec::with_capacity(outcomes.len());
    let mut failed = 0;
    let mut retries = 0u64;
    for o in outcomes {
        match o {
            Ok(r) => {
                retries += u64::from(r.retries);
                records.push(r);
            }
            Err(HarnessError::TrialFailed { retries: r, .. }) => {
                failed += 1;
                retries += u64::from(r);
            }
            Err(e) => return Err(e),
        }
    }
    if failed as f64 > FAILURE_BUDGET * spec.trials as f64 {
        return Err(HarnessError::FailureBudget {
            failed,
            trials: spec.trials,
            sweep,
        });
    }
    Ok((records, retries))
}

fn stats_for(kind: ExperimentKind) -> &'static [&'static str] {
    match kind {
        ExperimentKind::RateVsSnr | ExperimentKind::RateVsN => &["sum_lif", "sum_rate"],
        ExperimentKind::SerVsN => &["ser", "sum_lif"],
        _ => &["sum_lif"],
    }
}

fn stat_value(stat: &str, record: &crate::harness::trial::SchemeRecord) -> f64 {
    match stat {
        "sum_rate" => record.sum_rate(),
        "ser" => record.symbol_errors.map_or(f64::NAN, |e| e.rate()),
        _ => record.sum_lif,
    }
}

/// Runs every sweep point of `spec`.
///
/// Results are identical for serial and parallel execution: trial seeds
/// depend only on `(master_seed, point index, trial index)` and trials are
/// reduced in index order.
pub fn run_sweep(spec: &ExperimentSpec, execution: Execution) -> Result<ResultTable, HarnessError> {
    spec.validate()?;
    if spec.kind == ExperimentKind::Tail {
        return run_tail(spec, execution);
    }
    let mut table = ResultTable::default();
    let row = |scheme: Scheme, sweep: f64, stat: &str, mean: f64, stderr: f64, trials: usize| ResultRow {
        experiment: spec.kind.name().to_string(),
        scheme: scheme.name().to_string(),
        sweep,
        stat: stat.to_string(),
        mean,
        stderr,
        trials,
        seed: spec.master_seed,
    };
    for (index, &sweep) in spec.sweep.iter().enumerate() {
        let config = spec.config_at(sweep)?;
        let (records, retries) = run_point(spec, &config, index, sweep, execution)?;
        table.zf_retries += retries;
        for &scheme in &spec.schemes {
            for stat in stats_for(spec.kind) {
                let values: Vec<f64> = records
                    .iter()
                    .filter_map(|r| r.get(scheme))
                    .map(|r| stat_value(stat, r))
                    .collect();
                let (mean, stderr) = mean_stderr(&values);
                table.rows.push(row(scheme, sweep, stat, mean, stderr, values.len()));
            }
        }
    }
    if spec.kind == ExperimentKind::Slope {
        let last = *spec.sweep.last().expect("validated non-empty");
        for &scheme in &spec.schemes {
            let points = table.series(scheme.name(), "sum_lif");
            let fit = scaling_slope(&points)?;
            table.rows.push(row(scheme, last, "slope", fit.slope, fit.stderr, spec.trials));
            let exponent = predicted_exponent(
                scheme,
                &spec.config.num_selected,
                spec.config.antennas_user[0],
                0,
            );
            table.rows.push(row(scheme, last, "predicted_slope", predicted_slope(exponent), 0.0, 0));
        }
    }
    Ok(table)
}

fn run_tail(spec: &ExperimentSpec, execution: Execution) -> Result<ResultTable, HarnessError> {
    let mut jobs = Vec::new();
    for (index, &sweep) in spec.sweep.iter().enumerate() {
        for &scheme in &spec.schemes {
            jobs.push((index, sweep, scheme));
        }
    }
    let one = |&(index, sweep, scheme): &(usize, f64, Scheme)| -> Result<Vec<ResultRow>, HarnessError> {
        let config = spec.config_at(sweep)?;
        let seed = child_seed(spec.master_seed, index, 0);
        let mut rng = stream_rng(seed, Purpose::Channel, 0, scheme.tag());
        let samples = sample_user_metrics(&config, scheme, 0, spec.trials, &mut rng)?;
        let fit = empirical_tail_fit(&samples, spec.tail_window)?;
        let corrected = corrected_tail_fit(&samples, spec.tail_window)?;
        let predicted =
            predicted_exponent(scheme, &config.num_selected, config.antennas_user[0], 0)
                .map_or(f64::NAN, |m| m as f64);
        let make = |stat: &str, mean: f64, stderr: f64, trials: usize| ResultRow {
            experiment: spec.kind.name().to_string(),
            scheme: scheme.name().to_string(),
            sweep,
            stat: stat.to_string(),
            mean,
            stderr,
            trials,
            seed: spec.master_seed,
        };
        Ok(vec![
            make("tail_exponent", fit.exponent, fit.stderr, samples.len()),
            make("tail_coefficient", fit.coefficient, 0.0, samples.len()),
            make("tail_exponent_corrected", corrected.exponent, corrected.stderr, samples.len()),
            make("predicted_exponent", predicted, 0.0, 0),
        ])
    };
    let rows: Vec<Result<Vec<ResultRow>, HarnessError>> = match execution {
        Execution::Serial => jobs.iter().map(one).collect(),
        Execution::Parallel => jobs.par_iter().map(one).collect(),
    };
    let mut table = ResultTable::default();
    for r in rows {
        table.rows.extend(r?);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> NetworkConfig {
        NetworkConfig::homogeneous(3, 2, 2, 20, 1, 10.0).unwrap()
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ExperimentKind::ALL {
            assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
        }
        let err = "fig9".parse::<ExperimentKind>().unwrap_err();
        assert!(err.contains("sum-lif-vs-N"));
    }

    #[test]
    fn validation_rejects_bad_sweeps() {
        let mut spec = ExperimentSpec::new(ExperimentKind::SumLifVsN, base(), vec![4.0, 4.0], vec![Scheme::AsOia]);
        assert!(spec.validate().is_err());
        spec.sweep = vec![];
        assert!(spec.validate().is_err());
        spec.sweep = vec![0.5];
        assert!(spec.validate().is_err());
        spec.sweep = vec![4.0, 8.0];
        spec.trials = 0;
        assert!(spec.validate().is_err());
        spec.trials = 1;
        assert!(spec.validate().is_ok());
    }

    #[test]
    fn sweep_value_sets_field() {
        let spec = ExperimentSpec::new(ExperimentKind::RateVsSnr, base(), vec![3.0], vec![Scheme::AsOia]);
        assert_eq!(spec.config_at(3.0).unwrap().snr_db, 3.0);
        let spec = ExperimentSpec::new(ExperimentKind::SumLifVsL, base(), vec![3.0], vec![Scheme::AsOia]);
        assert_eq!(spec.config_at(3.0).unwrap().antennas_user, vec![3; 3]);
    }

    #[test]
    fn mean_and_stderr() {
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - ((5.0 / 3.0) / 4.0f64).sqrt()).abs() < 1e-15);
        assert_eq!(mean_stderr(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn serial_and_parallel_agree() {
        let mut spec = ExperimentSpec::new(
            ExperimentKind::RateVsN,
            base(),
            vec![4.0, 10.0],
            vec![Scheme::AsOia, Scheme::MaxSnr],
        );
        spec.trials = 40;
        let a = run_sweep(&spec, Execution::Serial).unwrap();
        let b = run_sweep(&spec, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 2 * 2 * 2);
    }
}
