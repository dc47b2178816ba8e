//! One Monte-Carlo trial: a shared fading and basis draw evaluated under
//! every requested scheme.

use crate::baselines::{interference_free_stats, max_snr_weight, select_max_metric, simo_weight};
use crate::channel::{draw_network, ChannelRealization, NetworkConfig};
use crate::harness::seed::{stream_rng, Purpose};
use crate::harness::ser::{simulate_block, BlockSettings, SymbolErrors};
use crate::harness::HarnessError;
use crate::linalg::{basis_vector, norm_sqr};
use crate::oia::{
    antenna_selection, cell_equalizer, general_antenna_selection, generate_bases,
    network_sum_lif, select_min_metric, stack_cross_channels, stream_stats, svd_weight,
    Equalizer, InterferenceBasis, OiaError, ScheduledStream, Scheme, StackedCrossChannel,
    StreamStats, WeightAux, WeightChoice, WeightScheme,
};

/// Redraws allowed after a zero-forcing failure before the trial counts as failed.
pub const MAX_RETRIES: u32 = 3;

/// Scheduled streams per cell under one scheme.
pub type Schedule = Vec<Vec<ScheduledStream>>;

/// Per-scheme outcome of a trial.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeRecord {
    pub scheme: Scheme,
    pub sum_lif: f64,
    /// Per-stream rates, cell-major.
    pub rates: Vec<f64>,
    pub sinrs: Vec<f64>,
    pub symbol_errors: Option<SymbolErrors>,
}

impl SchemeRecord {
    pub fn sum_rate(&self) -> f64 {
        self.rates.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    /// In the order the schemes were requested.
    pub records: Vec<SchemeRecord>,
    /// Zero-forcing redraws spent on this trial.
    pub retries: u32,
}

impl TrialRecord {
    pub fn get(&self, scheme: Scheme) -> Option<&SchemeRecord> {
        self.records.iter().find(|r| r.scheme == scheme)
    }
}

/// Everything a trial decided, kept for inspection.
#[derive(Debug, Clone)]
pub struct TrialArtifacts {
    pub channels: ChannelRealization,
    pub bases: InterferenceBasis,
    pub schedules: Vec<(Scheme, Schedule)>,
    pub stats: Vec<(Scheme, Vec<Vec<StreamStats>>)>,
    pub equalizers: Vec<(Scheme, Vec<Equalizer>)>,
}

/// Stacked cross-link matrices of every user, `[cell][user]`.
pub fn stack_all(
    config: &NetworkConfig,
    channels: &ChannelRealization,
    bases: &InterferenceBasis,
) -> Result<Vec<Vec<StackedCrossChannel>>, OiaError> {
    (0..config.cells)
        .map(|i| {
            (0..config.num_users[i])
                .map(|j| stack_cross_channels(channels, bases, i, j))
                .collect()
        })
        .collect()
}

fn leakage(g: &StackedCrossChannel, w: &WeightChoice) -> Result<f64, OiaError> {
    Ok(norm_sqr(&g.matrix.mul_vec(&w.w)?))
}

fn streams_from(
    choices: Vec<WeightChoice>,
    lifs: &[f64],
    users: Vec<usize>,
) -> Vec<ScheduledStream> {
    users
        .into_iter()
        .map(|j| ScheduledStream {
            user: j,
            weight: choices[j].clone(),
            lif: lifs[j],
        })
        .collect()
}

/// Weight design and scheduling of one scheme over all cells.
///
/// The interference-free reference needs `selection_rng` for its random
/// scheduling; the other schemes are deterministic.
pub fn schedule_scheme<R: rand::Rng + ?Sized>(
    scheme: Scheme,
    config: &NetworkConfig,
    channels: &ChannelRealization,
    bases: &InterferenceBasis,
    stacks: &[Vec<StackedCrossChannel>],
    selection_rng: &mut R,
) -> Result<Schedule, OiaError> {
    let mut schedule = Vec::with_capacity(config.cells);
    match scheme {
        Scheme::AsOia | Scheme::SvdOia | Scheme::SimoOia => {
            for (i, cell_stacks) in stacks.iter().enumerate() {
                let choices: Vec<WeightChoice> = cell_stacks
                    .iter()
                    .map(|g| match scheme {
                        Scheme::AsOia => Ok(antenna_selection(g)),
                        Scheme::SvdOia => Ok(svd_weight(g)),
                        _ => {
                            let mut w = simo_weight(g.antennas());
                            w.metric = leakage(g, &w)?;
                            Ok(w)
                        }
                    })
                    .collect::<Result<_, OiaError>>()?;
                let metrics: Vec<f64> = choices.iter().map(|c| c.metric).collect();
                let sel = select_min_metric(&metrics, config.num_selected[i])?;
                schedule.push(streams_from(choices, &metrics, sel.users));
            }
        }
        Scheme::MaxSnr => {
            for (i, cell_stacks) in stacks.iter().enumerate() {
                let choices: Vec<WeightChoice> = (0..config.num_users[i])
                    .map(|j| max_snr_weight(channels.link(i, i, j)))
                    .collect();
                let lifs = cell_stacks
                    .iter()
                    .zip(&choices)
                    .map(|(g, w)| leakage(g, w))
                    .collect::<Result<Vec<_>, _>>()?;
                let metrics: Vec<f64> = choices.iter().map(|c| c.metric).collect();
                let sel = select_max_metric(&metrics, config.num_selected[i])?;
                schedule.push(streams_from(choices, &lifs, sel.users));
            }
        }
        Scheme::GasOia => {
            for (i, cell_stacks) in stacks.iter().enumerate() {
                let per_antenna: Vec<Vec<f64>> = cell_stacks
                    .iter()
                    .map(|g| g.matrix.column_norms_sqr())
                    .collect();
                let picks = general_antenna_selection(&per_antenna, config.num_selected[i])?;
                schedule.push(
                    picks
                        .into_iter()
                        .map(|(j, l)| ScheduledStream {
                            user: j,
                            lif: per_antenna[j][l],
                            weight: WeightChoice {
                                w: basis_vector(config.antennas_user[i], l),
                                metric: per_antenna[j][l],
                                scheme: WeightScheme::AntennaSelection,
                                aux: Some(WeightAux::Antenna(l)),
                            },
                        })
                        .collect(),
                );
            }
        }
        Scheme::IntFree => {
            let candidates = int_free_candidates(stacks)?;
            return Ok(interference_free_stats(config, channels, bases, &candidates, selection_rng)?
                .schedule);
        }
    }
    Ok(schedule)
}

fn int_free_candidates(stacks: &[Vec<StackedCrossChannel>]) -> Result<Schedule, OiaError> {
    stacks
        .iter()
        .map(|cell_stacks| {
            cell_stacks
                .iter()
                .enumerate()
                .map(|(j, g)| {
                    let mut w = simo_weight(g.antennas());
                    w.metric = leakage(g, &w)?;
                    Ok(ScheduledStream {
                        user: j,
                        lif: w.metric,
                        weight: w,
                    })
                })
                .collect()
        })
        .collect()
}

/// Builds every artifact of a trial for one retry index.
pub fn realize_trial(
    config: &NetworkConfig,
    schemes: &[Scheme],
    trial_seed: u64,
    retry: u32,
) -> Result<TrialArtifacts, OiaError> {
    let channels = draw_network(config, &mut stream_rng(trial_seed, Purpose::Channel, retry, 0))
        .map_err(|e| OiaError::DimensionMismatch(e.to_string()))?;
    let bases = generate_bases(config, &mut stream_rng(trial_seed, Purpose::Basis, retry, 0))?;
    let stacks = stack_all(config, &channels, &bases)?;
    let snr = config.snr_linear();

    let mut schedules = Vec::with_capacity(schemes.len());
    let mut stats = Vec::with_capacity(schemes.len());
    let mut equalizers = Vec::with_capacity(schemes.len());
    for &scheme in schemes {
        let mut sel_rng = stream_rng(trial_seed, Purpose::Selection, retry, scheme.tag());
        let schedule = schedule_scheme(scheme, config, &channels, &bases, &stacks, &mut sel_rng)?;
        let eqs = (0..config.cells)
            .map(|i| cell_equalizer(i, &bases, &channels, &schedule[i]))
            .collect::<Result<Vec<_>, _>>()?;
        let cell_stats = eqs
            .iter()
            .map(|eq| {
                if scheme == Scheme::IntFree {
                    Ok(crate::oia::interference_free_stream_stats(eq, snr))
                } else {
                    stream_stats(eq, &bases, &channels, &schedule, snr)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        schedules.push((scheme, schedule));
        stats.push((scheme, cell_stats));
        equalizers.push((scheme, eqs));
    }
    Ok(TrialArtifacts {
        channels,
        bases,
        schedules,
        stats,
        equalizers,
    })
}

fn realize_with_retries(
    config: &NetworkConfig,
    schemes: &[Scheme],
    trial_seed: u64,
) -> Result<(TrialArtifacts, u32), HarnessError> {
    let mut retry = 0;
    loop {
        match realize_trial(config, schemes, trial_seed, retry) {
            Ok(a) => return Ok((a, retry)),
            Err(OiaError::ZfFailure { .. }) if retry < MAX_RETRIES => retry += 1,
            Err(OiaError::ZfFailure { cell, condition }) => {
                return Err(HarnessError::TrialFailed {
                    retries: retry,
                    reason: format!("zero-forcing failure at cell {cell} (condition {condition:.3e})"),
                })
            }
            Err(e) => return Err(e.into()),
        }
    }
}

fn summarize(artifacts: &TrialArtifacts) -> Vec<SchemeRecord> {
    artifacts
        .schedules
        .iter()
        .zip(&artifacts.stats)
        .map(|((scheme, schedule), (_, stats))| {
            let flat: Vec<&StreamStats> = stats.iter().flatten().collect();
            SchemeRecord {
                scheme: *scheme,
                sum_lif: network_sum_lif(schedule),
                rates: flat.iter().map(|s| s.rate).collect(),
                sinrs: flat.iter().map(|s| s.sinr).collect(),
                symbol_errors: None,
            }
        })
        .collect()
}

/// Runs one trial for every scheme on a shared fading and basis draw.
///
/// Deterministic in `(config, schemes, trial_seed)`; each scheme's values do
/// not depend on which other schemes are requested.
pub fn run_trial(
    config: &NetworkConfig,
    schemes: &[Scheme],
    trial_seed: u64,
) -> Result<TrialRecord, HarnessError> {
    let (artifacts, retries) = realize_with_retries(config, schemes, trial_seed)?;
    Ok(TrialRecord {
        records: summarize(&artifacts),
        retries,
    })
}

/// [`run_trial`] plus a QPSK block per scheme for symbol error counting.
pub fn run_trial_with_symbols(
    config: &NetworkConfig,
    schemes: &[Scheme],
    trial_seed: u64,
    block_length: usize,
) -> Result<TrialRecord, HarnessError> {
    let (artifacts, retries) = realize_with_retries(config, schemes, trial_seed)?;
    let mut records = summarize(&artifacts);
    for (record, ((scheme, schedule), (_, eqs))) in records
        .iter_mut()
        .zip(artifacts.schedules.iter().zip(&artifacts.equalizers))
    {
        let mut noise_rng = stream_rng(trial_seed, Purpose::Noise, retries, scheme.tag());
        let errors = simulate_block(
            &artifacts.channels,
            &artifacts.bases,
            schedule,
            eqs,
            BlockSettings {
                snr: Some(config.snr_linear()),
                inter_cell: *scheme != Scheme::IntFree,
                block_length,
            },
            &mut noise_rng,
        )?;
        record.symbol_errors = Some(errors);
    }
    Ok(TrialRecord { records, retries })
}

/// Artifacts of a trial after the same retry policy as [`run_trial`].
pub fn trial_artifacts(
    config: &NetworkConfig,
    schemes: &[Scheme],
    trial_seed: u64,
) -> Result<TrialArtifacts, HarnessError> {
    Ok(realize_with_retries(config, schemes, trial_seed)?.0)
}
