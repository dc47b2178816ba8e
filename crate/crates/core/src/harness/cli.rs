//! Command-line front end of `oia-sim`.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::Parser;

use crate::channel::{ConfigBuilder, NetworkConfig, PerCell};
use crate::harness::csv::{to_csv_string, write_csv};
use crate::harness::sweep::{run_sweep, Execution, ExperimentKind, ExperimentSpec};
use crate::oia::Scheme;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "oia-sim",
    version,
    about = "Monte-Carlo simulator for opportunistic interference alignment in MIMO uplinks"
)]
pub struct Cli {
    /// sum-lif-vs-N, sum-lif-vs-L, rate-vs-snr, rate-vs-N, ser-vs-N, tail or slope
    #[arg(long)]
    pub experiment: ExperimentKind,
    /// key=value network file; inline flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated scheme names
    #[arg(long, value_delimiter = ',')]
    pub schemes: Option<Vec<String>>,
    /// Comma-separated, strictly increasing sweep values
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub sweep: Option<Vec<f64>>,
    /// Trials per sweep point (leakage samples for `tail`)
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Output CSV path; standard output when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// QPSK symbols per stream and trial for ser-vs-N
    #[arg(long, default_value_t = 50)]
    pub block_length: usize,
    /// Quantile window of the tail fit, as lo,hi
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub tail_window: Option<Vec<f64>>,
    #[arg(long = "K")]
    pub cells: Option<usize>,
    #[arg(long = "M")]
    pub antennas_bs: Option<usize>,
    #[arg(long = "L")]
    pub antennas_user: Option<usize>,
    #[arg(long = "N")]
    pub num_users: Option<usize>,
    #[arg(long = "S")]
    pub num_selected: Option<usize>,
    #[arg(long = "snr-db", allow_hyphen_values = true)]
    pub snr_db: Option<f64>,
    /// Run trials on one thread (output is identical either way)
    #[arg(long)]
    pub serial: bool,
}

/// Network used when neither a file nor inline flags set a field.
pub fn default_config() -> ConfigBuilder {
    ConfigBuilder {
        cells: Some(3),
        antennas_bs: Some(PerCell::Scalar(2)),
        antennas_user: Some(PerCell::Scalar(2)),
        num_users: Some(PerCell::Scalar(20)),
        num_selected: Some(PerCell::Scalar(1)),
        snr_db: Some(10.0),
    }
}

pub fn default_sweep(kind: ExperimentKind, config: &NetworkConfig) -> Vec<f64> {
    match kind {
        ExperimentKind::SumLifVsL => (1..=6).map(f64::from).collect(),
        ExperimentKind::RateVsSnr => (0..=10).map(|i| f64::from(2 * i)).collect(),
        ExperimentKind::Tail => vec![config.antennas_user[0] as f64],
        _ => vec![4.0, 6.0, 10.0, 16.0, 25.0, 40.0, 63.0, 100.0],
    }
}

pub fn default_schemes(kind: ExperimentKind) -> Vec<Scheme> {
    match kind {
        ExperimentKind::Tail => vec![Scheme::AsOia, Scheme::SvdOia, Scheme::SimoOia],
        ExperimentKind::SerVsN => vec![
            Scheme::AsOia,
            Scheme::SvdOia,
            Scheme::SimoOia,
            Scheme::MaxSnr,
            Scheme::IntFree,
        ],
        _ => vec![Scheme::AsOia, Scheme::SvdOia, Scheme::SimoOia, Scheme::MaxSnr],
    }
}

impl Cli {
    fn network(&self) -> Result<NetworkConfig, String> {
        let inline = ConfigBuilder {
            cells: self.cells,
            antennas_bs: self.antennas_bs.map(PerCell::Scalar),
            antennas_user: self.antennas_user.map(PerCell::Scalar),
            num_users: self.num_users.map(PerCell::Scalar),
            num_selected: self.num_selected.map(PerCell::Scalar),
            snr_db: self.snr_db,
        };
        let file = match &self.config {
            Some(path) => ConfigBuilder::from_file(path).map_err(|e| e.to_string())?,
            None => ConfigBuilder::default(),
        };
        inline
            .or(file)
            .or(default_config())
            .build()
            .map_err(|e| e.to_string())
    }

    /// Resolves flags, config file and defaults into a validated spec.
    pub fn spec(&self) -> Result<ExperimentSpec, String> {
        let config = self.network()?;
        let schemes = match &self.schemes {
            Some(names) => names
                .iter()
                .map(|n| n.trim().parse::<Scheme>().map_err(|e| e.to_string()))
                .collect::<Result<Vec<_>, _>>()?,
            None => default_schemes(self.experiment),
        };
        let sweep = self
            .sweep
            .clone()
            .unwrap_or_else(|| default_sweep(self.experiment, &config));
        let mut spec = ExperimentSpec::new(self.experiment, config, sweep, schemes);
        spec.trials = self.trials;
        spec.master_seed = self.seed;
        spec.block_length = self.block_length;
        if let Some(w) = &self.tail_window {
            spec.tail_window = (w[0], w[1]);
        }
        spec.validate().map_err(|e| e.to_string())?;
        Ok(spec)
    }
}

/// Parses `args` (program name first), runs the experiment and returns the
/// process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{e}");
                    EXIT_USAGE
                }
            }
        }
    };
    let spec = match cli.spec() {
        Ok(s) => s,
        Err(msg) => {
            let _ = writeln!(stderr, "error: {msg}");
            return EXIT_USAGE;
        }
    };
    let execution = if cli.serial {
        Execution::Serial
    } else {
        Execution::Parallel
    };
    let table = match run_sweep(&spec, execution) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_RUNTIME;
        }
    };
    let written = match &cli.out {
        Some(path) => write_csv(&table, path),
        None => stdout
            .write_all(to_csv_string(&table).as_bytes())
            .map_err(|e| crate::harness::HarnessError::Io {
                path: "<stdout>".into(),
                message: e.to_string(),
            }),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: {e}");
        return EXIT_RUNTIME;
    }
    let _ = writeln!(
        stderr,
        "{}: {} rows, {} zero-forcing redraws",
        spec.kind,
        table.rows.len(),
        table.zf_retries
    );
    EXIT_OK
}
