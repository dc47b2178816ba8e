//! Reference schemes: max-SNR eigen-beamforming, fixed-weight SIMO OIA and
//! the interference-free network with random scheduling.

use rand::seq::index::sample;
use rand::Rng;

use crate::channel::{ChannelRealization, NetworkConfig};
use crate::linalg::{basis_vector, normalize_phase, svd, ComplexMatrix};
use crate::oia::{
    cell_equalizer, interference_free_stream_stats, CellSelection, InterferenceBasis, OiaError,
    Result, ScheduledStream, StreamStats, WeightAux, WeightChoice, WeightScheme,
};

/// Dominant right singular vector of the home link; metric `σ_max²`.
pub fn max_snr_weight(home: &ComplexMatrix) -> WeightChoice {
    let dec = svd(home);
    let mut w = dec.right.column(0);
    normalize_phase(&mut w);
    let sigma = dec.singular_values[0];
    WeightChoice {
        w,
        metric: sigma * sigma,
        scheme: WeightScheme::MaxSnr,
        aux: Some(WeightAux::LargestSingular(sigma)),
    }
}

/// Indices of the `count` largest metrics; ties go to the lower index.
pub fn select_max_metric(metrics: &[f64], count: usize) -> Result<CellSelection> {
    if count > metrics.len() {
        return Err(OiaError::SelectionTooLarge {
            requested: count,
            available: metrics.len(),
        });
    }
    let mut order: Vec<usize> = (0..metrics.len()).collect();
    order.sort_by(|&a, &b| metrics[b].total_cmp(&metrics[a]).then(a.cmp(&b)));
    order.truncate(count);
    Ok(CellSelection { users: order })
}

/// Fixed weight `e_1`. The metric is filled in by the caller from the LIF.
pub fn simo_weight(antennas: usize) -> WeightChoice {
    WeightChoice {
        w: basis_vector(antennas, 0),
        metric: 0.0,
        scheme: WeightScheme::Simo,
        aux: Some(WeightAux::Antenna(0)),
    }
}

/// Outcome of the interference-free reference for the whole network.
#[derive(Debug, Clone)]
pub struct InterferenceFreeOutcome {
    pub schedule: Vec<Vec<ScheduledStream>>,
    pub stats: Vec<Vec<StreamStats>>,
}

/// Uniformly random scheduling of `S_i` users per cell, evaluated with the
/// inter-cell interference term removed.
///
/// `candidates[i][j]` carries user `j`'s weight (and LIF) in cell `i`.
pub fn interference_free_stats<R: Rng + ?Sized>(
    config: &NetworkConfig,
    channels: &ChannelRealization,
    bases: &InterferenceBasis,
    candidates: &[Vec<ScheduledStream>],
    rng: &mut R,
) -> Result<InterferenceFreeOutcome> {
    let snr = config.snr_linear();
    let mut schedule = Vec::with_capacity(config.cells);
    for (i, cell_candidates) in candidates.iter().enumerate() {
        let mut chosen = sample(rng, cell_candidates.len(), config.num_selected[i]).into_vec();
        chosen.sort_unstable();
        schedule.push(
            chosen
                .into_iter()
                .map(|j| cell_candidates[j].clone())
                .collect::<Vec<_>>(),
        );
    }
    let stats = schedule
        .iter()
        .enumerate()
        .map(|(i, streams)| {
            let eq = cell_equalizer(i, bases, channels, streams)?;
            Ok(interference_free_stream_stats(&eq, snr))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InterferenceFreeOutcome { schedule, stats })
}
