//! Opportunistic interference alignment pipeline.
//!
//! Each base station fixes an interference subspace `Q_k` and its orthogonal
//! complement `U_k`. Every user measures how much of its transmit signal
//! leaks outside the foreign interference subspaces (the LIF metric), picks a
//! transmit weight that makes this leakage small, and each base station
//! schedules the users with the smallest leakage. Scheduled streams are
//! separated at the home base station by a zero-forcing equalizer applied
//! after projecting onto `U_i`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::channel::{ChannelRealization, NetworkConfig};
use crate::linalg::{
    basis_vector, invert, norm_sqr, normalize_phase, projected_leakage, random_unitary, svd,
    ComplexMatrix, LinalgError, C64,
};

/// Tolerance on `‖w‖² = 1` for weights handed to [`lif_metric`].
pub const UNIT_NORM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OiaError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("zero-forcing failed at cell {cell}: effective channel is singular (condition {condition:.3e})")]
    ZfFailure { cell: usize, condition: f64 },
    #[error("weight vector is not unit norm (‖w‖² = {norm_sqr})")]
    NotUnitNorm { norm_sqr: f64 },
    #[error("cannot select {requested} entries out of {available}")]
    SelectionTooLarge { requested: usize, available: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, OiaError>;

/// Scheduling schemes exposed on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// Antenna-selection OIA.
    AsOia,
    /// SVD-based OIA.
    SvdOia,
    /// OIA with the fixed weight `e_1`.
    SimoOia,
    /// Eigen-beamforming on the home link with max-SNR scheduling.
    MaxSnr,
    /// Random scheduling with inter-cell interference removed.
    IntFree,
    /// Per-antenna scheduling: several antennas of one user may be picked.
    GasOia,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::AsOia,
        Scheme::SvdOia,
        Scheme::SimoOia,
        Scheme::MaxSnr,
        Scheme::IntFree,
        Scheme::GasOia,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::AsOia => "as-oia",
            Scheme::SvdOia => "svd-oia",
            Scheme::SimoOia => "simo-oia",
            Scheme::MaxSnr => "max-snr",
            Scheme::IntFree => "int-free",
            Scheme::GasOia => "gas-oia",
        }
    }

    /// Small stable integer used to separate per-scheme random streams.
    pub fn tag(self) -> u64 {
        match self {
            Scheme::AsOia => 1,
            Scheme::SvdOia => 2,
            Scheme::SimoOia => 3,
            Scheme::MaxSnr => 4,
            Scheme::IntFree => 5,
            Scheme::GasOia => 6,
        }
    }

    pub fn valid_names() -> String {
        Scheme::ALL
            .iter()
            .map(|s| s.name())
            .collect::<Vec<_>>()
            .join(", ")
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("unknown scheme {name:?}; valid schemes are: {valid}")]
pub struct UnknownScheme {
    pub name: String,
    pub valid: String,
}

impl FromStr for Scheme {
    type Err = UnknownScheme;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| UnknownScheme {
                name: s.to_string(),
                valid: Scheme::valid_names(),
            })
    }
}

/// Interference subspace `Q_k` and its complement `U_k` at one base station.
#[derive(Debug, Clone, PartialEq)]
pub struct CellBasis {
    /// `M_k × (M_k − S_k)`.
    pub interference: ComplexMatrix,
    /// `M_k × S_k`.
    pub null: ComplexMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceBasis {
    pub cells: Vec<CellBasis>,
}

impl InterferenceBasis {
    pub fn null(&self, cell: usize) -> &ComplexMatrix {
        &self.cells[cell].null
    }

    pub fn interference(&self, cell: usize) -> &ComplexMatrix {
        &self.cells[cell].interference
    }
}

/// Draws an isotropic basis per cell: a Haar unitary split into `U_k` (first
/// `S_k` columns) and `Q_k` (remaining `M_k − S_k` columns).
pub fn generate_bases<R: Rng + ?Sized>(
    config: &NetworkConfig,
    rng: &mut R,
) -> Result<InterferenceBasis> {
    let cells = (0..config.cells)
        .map(|k| {
            let m = config.antennas_bs[k];
            let s = config.num_selected[k];
            let full = random_unitary(m, rng)?;
            Ok(CellBasis {
                interference: full.columns(s..m),
                null: full.columns(0..s),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InterferenceBasis { cells })
}

/// `G^[i,j]`: the blocks `U_k^H · H_k^[i,j]` for `k ≠ i`, stacked in ascending `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedCrossChannel {
    pub cell: usize,
    pub user: usize,
    pub matrix: ComplexMatrix,
    /// `(k, first row)` for each block.
    pub blocks: Vec<(usize, usize)>,
}

impl StackedCrossChannel {
    pub fn antennas(&self) -> usize {
        self.matrix.cols()
    }
}

pub fn stack_cross_channels(
    channels: &ChannelRealization,
    bases: &InterferenceBasis,
    cell: usize,
    user: usize,
) -> Result<StackedCrossChannel> {
    let k_total = bases.cells.len();
    if channels.cells() != k_total {
        return Err(OiaError::DimensionMismatch(format!(
            "realization has {} cells but bases have {k_total}",
            channels.cells()
        )));
    }
    if cell >= k_total || user >= channels.users_in(cell) {
        return Err(OiaError::DimensionMismatch(format!(
            "no user {user} in cell {cell}"
        )));
    }
    let mut pieces = Vec::with_capacity(k_total - 1);
    let mut blocks = Vec::with_capacity(k_total - 1);
    let mut row = 0;
    for k in (0..k_total).filter(|&k| k != cell) {
        let block = bases.null(k).adjoint_mul(channels.link(k, cell, user))?;
        blocks.push((k, row));
        row += block.rows();
        pieces.push(block);
    }
    let refs: Vec<&ComplexMatrix> = pieces.iter().collect();
    Ok(StackedCrossChannel {
        cell,
        user,
        matrix: ComplexMatrix::vstack(&refs)?,
        blocks,
    })
}

/// Sum of leakage `‖G·w‖²` over all foreign base stations.
pub fn lif_metric(g: &StackedCrossChannel, w: &[C64]) -> Result<f64> {
    let n = norm_sqr(w);
    if (n - 1.0).abs() > UNIT_NORM_TOLERANCE {
        return Err(OiaError::NotUnitNorm { norm_sqr: n });
    }
    Ok(norm_sqr(&g.matrix.mul_vec(w)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightScheme {
    AntennaSelection,
    Svd,
    Simo,
    MaxSnr,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightAux {
    /// Zero-based index of the chosen transmit antenna.
    Antenna(usize),
    /// Smallest singular value of the stacked cross-link matrix.
    SmallestSingular(f64),
    /// Largest singular value of the home link.
    LargestSingular(f64),
}

/// A unit-norm transmit weight together with its scheduling metric.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightChoice {
    pub w: Vec<C64>,
    pub metric: f64,
    pub scheme: WeightScheme,
    pub aux: Option<WeightAux>,
}

/// Transmit from the antenna whose column of `G` has the least energy.
pub fn antenna_selection(g: &StackedCrossChannel) -> WeightChoice {
    let norms = g.matrix.column_norms_sqr();
    let (best, metric) = norms
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (l, v)| if v < acc.1 { (l, v) } else { acc });
    WeightChoice {
        w: basis_vector(g.antennas(), best),
        metric,
        scheme: WeightScheme::AntennaSelection,
        aux: Some(WeightAux::Antenna(best)),
    }
}

/// Beamform along the right singular vector of the smallest singular value of `G`.
pub fn svd_weight(g: &StackedCrossChannel) -> WeightChoice {
    let dec = svd(&g.matrix);
    let mut w = dec.smallest_right_vector();
    normalize_phase(&mut w);
    let sigma = *dec
        .singular_values
        .last()
        .expect("stacked channel has at least one column");
    WeightChoice {
        w,
        metric: sigma * sigma,
        scheme: WeightScheme::Svd,
        aux: Some(WeightAux::SmallestSingular(sigma)),
    }
}

/// Chosen users of one cell, in order of increasing (or, for max-metric
/// scheduling, decreasing) metric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellSelection {
    pub users: Vec<usize>,
}

fn check_selectable(requested: usize, available: usize) -> Result<()> {
    if requested > available {
        Err(OiaError::SelectionTooLarge {
            requested,
            available,
        })
    } else {
        Ok(())
    }
}

/// Indices of the `count` smallest metrics; ties go to the lower index.
pub fn select_min_metric(metrics: &[f64], count: usize) -> Result<CellSelection> {
    check_selectable(count, metrics.len())?;
    let mut order: Vec<usize> = (0..metrics.len()).collect();
    order.sort_by(|&a, &b| metrics[a].total_cmp(&metrics[b]).then(a.cmp(&b)));
    order.truncate(count);
    Ok(CellSelection { users: order })
}

/// Picks the `count` smallest per-antenna leakages over a whole cell.
///
/// `per_antenna[j][l]` is user `j`'s leakage when transmitting from antenna
/// `l` alone. Returns `(user, antenna)` pairs in increasing metric order;
/// ties go to the lower user, then the lower antenna.
pub fn general_antenna_selection(
    per_antenna: &[Vec<f64>],
    count: usize,
) -> Result<Vec<(usize, usize)>> {
    let mut pairs: Vec<(usize, usize, f64)> = per_antenna
        .iter()
        .enumerate()
        .flat_map(|(j, row)| row.iter().enumerate().map(move |(l, &v)| (j, l, v)))
        .collect();
    check_selectable(count, pairs.len())?;
    pairs.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    Ok(pairs.into_iter().take(count).map(|(j, l, _)| (j, l)).collect())
}

/// Zero-forcing receiver of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Equalizer {
    pub cell: usize,
    /// `F_i = (effective^{-1})^H`.
    pub f: ComplexMatrix,
    /// Columns `U_i^H · H_i^[i,j] · w^[i,j]` of the scheduled streams.
    pub effective: ComplexMatrix,
}

impl Equalizer {
    pub fn from_effective(cell: usize, effective: ComplexMatrix) -> Result<Self> {
        let inv = invert(&effective).map_err(|e| match e {
            LinalgError::Singular { condition } => OiaError::ZfFailure { cell, condition },
            LinalgError::NotSquare { rows, cols } => OiaError::DimensionMismatch(format!(
                "cell {cell}: {cols} scheduled streams for {rows} post-projection dimensions"
            )),
            other => OiaError::Linalg(other),
        })?;
        Ok(Self {
            cell,
            f: inv.adjoint(),
            effective,
        })
    }

    /// `f_{i,j}`.
    pub fn stream_filter(&self, stream: usize) -> Vec<C64> {
        self.f.column(stream)
    }
}

pub fn zf_equalizer(
    cell: usize,
    null_basis: &ComplexMatrix,
    home_channels: &[&ComplexMatrix],
    weights: &[&[C64]],
) -> Result<Equalizer> {
    if home_channels.len() != weights.len() {
        return Err(OiaError::DimensionMismatch(format!(
            "{} home channels but {} weights",
            home_channels.len(),
            weights.len()
        )));
    }
    let columns = home_channels
        .iter()
        .zip(weights)
        .map(|(h, w)| Ok(null_basis.adjoint_mul_vec(&h.mul_vec(w)?)?))
        .collect::<Result<Vec<_>>>()?;
    Equalizer::from_effective(cell, ComplexMatrix::from_columns(&columns)?)
}

/// A scheduled stream: the transmitting user, its weight and its LIF.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledStream {
    pub user: usize,
    pub weight: WeightChoice,
    /// `‖G·w‖²` for this stream's weight.
    pub lif: f64,
}

/// Builds the cell's equalizer from its scheduled streams.
pub fn cell_equalizer(
    cell: usize,
    bases: &InterferenceBasis,
    channels: &ChannelRealization,
    streams: &[ScheduledStream],
) -> Result<Equalizer> {
    let homes: Vec<&ComplexMatrix> = streams
        .iter()
        .map(|s| channels.link(cell, cell, s.user))
        .collect();
    let weights: Vec<&[C64]> = streams.iter().map(|s| s.weight.w.as_slice()).collect();
    zf_equalizer(cell, bases.null(cell), &homes, &weights)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamStats {
    pub cell: usize,
    pub stream: usize,
    /// `‖f_{i,j}‖²`.
    pub zf_noise_gain: f64,
    /// Residual inter-cell interference, already multiplied by the SNR.
    pub interference: f64,
    pub sinr: f64,
    /// `log2(1 + sinr)` bits per channel use.
    pub rate: f64,
}

/// Post-equalization SINR and rate of every stream of `eq.cell`.
///
/// `schedule[k]` lists the streams transmitted in cell `k`.
pub fn stream_stats(
    eq: &Equalizer,
    bases: &InterferenceBasis,
    channels: &ChannelRealization,
    schedule: &[Vec<ScheduledStream>],
    snr: f64,
) -> Result<Vec<StreamStats>> {
    let cell = eq.cell;
    let u = bases.null(cell);
    // Post-projection interference vectors U_i^H H_i^[k,m] w^[k,m].
    let mut foreign = Vec::new();
    for (k, streams) in schedule.iter().enumerate().filter(|&(k, _)| k != cell) {
        for s in streams {
            let received = channels.link(cell, k, s.user).mul_vec(&s.weight.w)?;
            foreign.push(u.adjoint_mul_vec(&received)?);
        }
    }
    Ok(finalize_stats(eq, &foreign, snr))
}

/// Stats with the inter-cell interference term forced to zero.
pub(crate) fn interference_free_stream_stats(eq: &Equalizer, snr: f64) -> Vec<StreamStats> {
    finalize_stats(eq, &[], snr)
}

fn finalize_stats(eq: &Equalizer, foreign: &[Vec<C64>], snr: f64) -> Vec<StreamStats> {
    (0..eq.f.cols())
        .map(|j| {
            let f = eq.stream_filter(j);
            let zf_noise_gain = norm_sqr(&f);
            let interference = foreign
                .iter()
                .map(|v| crate::linalg::inner(&f, v).norm_sqr())
                .sum::<f64>()
                * snr;
            let sinr = snr / (zf_noise_gain + interference);
            StreamStats {
                cell: eq.cell,
                stream: j,
                zf_noise_gain,
                interference,
                sinr,
                rate: (1.0 + sinr).log2(),
            }
        })
        .collect()
}

/// Transmitter-side sum-LIF: the LIF of every scheduled stream in the network.
pub fn network_sum_lif(schedule: &[Vec<ScheduledStream>]) -> f64 {
    schedule.iter().flatten().map(|s| s.lif).sum()
}

/// Receiver-side sum-LIF: leakage observed at each base station from every
/// foreign scheduled stream, `Σ_i Σ_{k≠i} Σ_m ‖U_i^H H_i^[k,m] w^[k,m]‖²`.
pub fn receiver_side_sum_lif(
    bases: &InterferenceBasis,
    channels: &ChannelRealization,
    schedule: &[Vec<ScheduledStream>],
) -> Result<f64> {
    let mut total = 0.0;
    for bs in 0..bases.cells.len() {
        for (k, streams) in schedule.iter().enumerate().filter(|&(k, _)| k != bs) {
            for s in streams {
                let received = channels.link(bs, k, s.user).mul_vec(&s.weight.w)?;
                total += projected_leakage(bases.null(bs), &received)?;
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::draw_network;
    use crate::linalg::{draw_gaussian_matrix, inner};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn stacked(matrix: ComplexMatrix) -> StackedCrossChannel {
        StackedCrossChannel {
            cell: 0,
            user: 0,
            matrix,
            blocks: vec![(1, 0)],
        }
    }

    fn random_unit(len: usize, r: &mut ChaCha8Rng) -> Vec<C64> {
        let mut v = draw_gaussian_matrix(len, 1, r).unwrap().column(0);
        let n = norm_sqr(&v).sqrt();
        v.iter_mut().for_each(|z| *z /= n);
        v
    }

    #[test]
    fn bases_with_full_stream_count_have_empty_interference_space() {
        let cfg = NetworkConfig::homogeneous(2, 2, 2, 3, 2, 0.0).unwrap();
        let b = generate_bases(&cfg, &mut rng(1)).unwrap();
        for cb in &b.cells {
            assert_eq!(cb.interference.shape(), (2, 0));
            assert!(cb.null.gram_deviation() < 1e-12);
        }
    }

    #[test]
    fn bases_are_orthogonal_pairs() {
        let cfg = NetworkConfig::homogeneous(3, 3, 2, 3, 2, 0.0).unwrap();
        let b = generate_bases(&cfg, &mut rng(2)).unwrap();
        for cb in &b.cells {
            assert_eq!(cb.interference.shape(), (3, 1));
            assert_eq!(cb.null.shape(), (3, 2));
            assert!(cb.null.adjoint_mul(&cb.interference).unwrap().max_abs() < 1e-10);
            assert!(cb.null.gram_deviation() < 1e-10);
            assert!(cb.interference.gram_deviation() < 1e-10);
        }
        assert_eq!(b, generate_bases(&cfg, &mut rng(2)).unwrap());
    }

    #[test]
    fn null_basis_spans_complement_of_interference_space() {
        let cfg = NetworkConfig::homogeneous(2, 4, 1, 2, 2, 0.0).unwrap();
        let b = generate_bases(&cfg, &mut rng(3)).unwrap();
        let q = b.interference(0);
        let complement = crate::linalg::null_space(q, &mut rng(4)).unwrap();
        // Same subspace: the projectors agree.
        let p1 = b.null(0).matmul(&b.null(0).adjoint()).unwrap();
        let p2 = complement.matmul(&complement.adjoint()).unwrap();
        assert!(p1.sub(&p2).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn two_cell_stack_is_single_block() {
        let cfg = NetworkConfig::homogeneous(2, 2, 2, 2, 1, 0.0).unwrap();
        let ch = draw_network(&cfg, &mut rng(5)).unwrap();
        let b = generate_bases(&cfg, &mut rng(6)).unwrap();
        let g = stack_cross_channels(&ch, &b, 0, 1).unwrap();
        let expected = b.null(1).adjoint_mul(ch.link(1, 0, 1)).unwrap();
        assert_eq!(g.matrix, expected);
        assert_eq!(g.blocks, vec![(1, 0)]);
    }

    #[test]
    fn three_cell_stack_skips_home_cell() {
        let cfg = NetworkConfig::homogeneous(3, 2, 2, 2, 2, 0.0).unwrap();
        let ch = draw_network(&cfg, &mut rng(7)).unwrap();
        let b = generate_bases(&cfg, &mut rng(8)).unwrap();
        let g = stack_cross_channels(&ch, &b, 1, 0).unwrap();
        assert_eq!(g.matrix.shape(), (4, 2));
        assert_eq!(g.blocks, vec![(0, 0), (2, 2)]);
        let top = b.null(0).adjoint_mul(ch.link(0, 1, 0)).unwrap();
        let bottom = b.null(2).adjoint_mul(ch.link(2, 1, 0)).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                assert_eq!(g.matrix[(r, c)], top[(r, c)]);
                assert_eq!(g.matrix[(r + 2, c)], bottom[(r, c)]);
            }
        }
    }

    #[test]
    fn lif_metric_decomposes_over_foreign_cells() {
        let cfg = NetworkConfig::homogeneous(3, 3, 2, 4, 2, 0.0).unwrap();
        let mut r = rng(9);
        let ch = draw_network(&cfg, &mut r).unwrap();
        let b = generate_bases(&cfg, &mut r).unwrap();
        for user in 0..4 {
            let g = stack_cross_channels(&ch, &b, 2, user).unwrap();
            let w = random_unit(2, &mut r);
            let direct = lif_metric(&g, &w).unwrap();
            let per_cell: f64 = (0..2)
                .map(|k| {
                    projected_leakage(b.null(k), &ch.link(k, 2, user).mul_vec(&w).unwrap())
                        .unwrap()
                })
                .sum();
            assert!((direct - per_cell).abs() < 1e-10);
        }
    }

    #[test]
    fn lif_metric_special_cases() {
        // Null-space weight of a wide G leaks nothing.
        let mut r = rng(10);
        let g = stacked(draw_gaussian_matrix(2, 3, &mut r).unwrap());
        let w = svd(&g.matrix).smallest_right_vector();
        assert!(lif_metric(&g, &w).unwrap() < 1e-28);
        // Orthonormal columns: isometry.
        let iso = stacked(crate::linalg::random_unitary(3, &mut r).unwrap().columns(0..2));
        let w = random_unit(2, &mut r);
        assert!((lif_metric(&iso, &w).unwrap() - 1.0).abs() < 1e-12);
        // Non-unit weights are rejected.
        assert!(matches!(
            lif_metric(&iso, &[C64::new(2.0, 0.0), C64::new(0.0, 0.0)]),
            Err(OiaError::NotUnitNorm { .. })
        ));
    }

    #[test]
    fn antenna_selection_single_antenna() {
        let g = stacked(ComplexMatrix::from_real(2, 1, &[3.0, 4.0]).unwrap());
        let wc = antenna_selection(&g);
        assert_eq!(wc.aux, Some(WeightAux::Antenna(0)));
        assert_eq!(wc.metric, 25.0);
    }

    #[test]
    fn antenna_selection_picks_zero_column() {
        let g = stacked(ComplexMatrix::from_real(2, 3, &[1.0, 0.0, 2.0, 1.0, 0.0, 0.5]).unwrap());
        let wc = antenna_selection(&g);
        assert_eq!(wc.aux, Some(WeightAux::Antenna(1)));
        assert_eq!(wc.metric, 0.0);
        assert_eq!(wc.w, basis_vector(3, 1));
    }

    #[test]
    fn antenna_selection_matches_exhaustive_scan() {
        let mut r = rng(11);
        for _ in 0..200 {
            let g = stacked(draw_gaussian_matrix(4, 4, &mut r).unwrap());
            let wc = antenna_selection(&g);
            let scan: Vec<f64> = (0..4)
                .map(|l| lif_metric(&g, &basis_vector(4, l)).unwrap())
                .collect();
            let best = (0..4)
                .min_by(|&a, &b| scan[a].total_cmp(&scan[b]).then(a.cmp(&b)))
                .unwrap();
            assert_eq!(wc.aux, Some(WeightAux::Antenna(best)));
            assert!((wc.metric - scan[best]).abs() < 1e-12);
        }
    }

    #[test]
    fn svd_weight_on_wide_matrix_is_exact_null() {
        let mut r = rng(12);
        for _ in 0..100 {
            let g = stacked(draw_gaussian_matrix(4, 5, &mut r).unwrap());
            let wc = svd_weight(&g);
            assert!(wc.metric < 1e-16, "metric {}", wc.metric);
        }
    }

    #[test]
    fn svd_weight_on_padded_diagonal() {
        let g = stacked(
            ComplexMatrix::from_real(4, 2, &[2.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]).unwrap(),
        );
        let wc = svd_weight(&g);
        assert!((wc.w[1] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(wc.w[0].norm() < 1e-15);
        assert!((wc.metric - 1.0).abs() < 1e-15);
    }

    #[test]
    fn svd_weight_is_phase_normalized_and_consistent() {
        let mut r = rng(13);
        for _ in 0..200 {
            let g = stacked(draw_gaussian_matrix(4, 3, &mut r).unwrap());
            let wc = svd_weight(&g);
            assert!((norm_sqr(&wc.w) - 1.0).abs() < 1e-12);
            let lead = wc.w.iter().find(|z| z.norm() > 1e-12).unwrap();
            assert!(lead.im.abs() < 1e-14 && lead.re > 0.0);
            assert!((lif_metric(&g, &wc.w).unwrap() - wc.metric).abs() < 1e-10);
        }
    }

    #[test]
    fn min_metric_selection() {
        assert_eq!(
            select_min_metric(&[3.0, 1.0, 2.0], 2).unwrap().users,
            vec![1, 2]
        );
        assert_eq!(
            select_min_metric(&[5.0, 5.0, 5.0], 2).unwrap().users,
            vec![0, 1]
        );
        assert!(matches!(
            select_min_metric(&[1.0], 2),
            Err(OiaError::SelectionTooLarge { .. })
        ));
    }

    #[test]
    fn min_metric_selection_matches_sort_oracle() {
        use rand::Rng;
        let mut r = rng(14);
        for _ in 0..100 {
            let metrics: Vec<f64> = (0..100).map(|_| r.random::<f64>()).collect();
            let mut sorted: Vec<(f64, usize)> =
                metrics.iter().copied().zip(0..).collect();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let oracle: Vec<usize> = sorted.iter().take(5).map(|p| p.1).collect();
            assert_eq!(select_min_metric(&metrics, 5).unwrap().users, oracle);
        }
    }

    #[test]
    fn general_antenna_selection_cases() {
        let single: Vec<Vec<f64>> = vec![vec![3.0], vec![1.0], vec![2.0]];
        assert_eq!(
            general_antenna_selection(&single, 2).unwrap(),
            vec![(1, 0), (2, 0)]
        );
        let grid = vec![vec![1.0, 2.0], vec![3.0, 0.5]];
        let all = general_antenna_selection(&grid, 4).unwrap();
        assert_eq!(all, vec![(1, 1), (0, 0), (0, 1), (1, 0)]);
        assert!(general_antenna_selection(&grid, 5).is_err());
        let ties = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert_eq!(
            general_antenna_selection(&ties, 3).unwrap(),
            vec![(0, 0), (0, 1), (1, 0)]
        );
    }

    #[test]
    fn general_antenna_selection_matches_flatten_and_sort() {
        use rand::Rng;
        let mut r = rng(15);
        for _ in 0..100 {
            let grid: Vec<Vec<f64>> = (0..10)
                .map(|_| (0..3).map(|_| r.random::<f64>()).collect())
                .collect();
            let mut flat: Vec<(f64, usize, usize)> = grid
                .iter()
                .enumerate()
                .flat_map(|(j, row)| row.iter().enumerate().map(move |(l, &v)| (v, j, l)))
                .collect();
            flat.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let oracle: Vec<(usize, usize)> = flat.iter().take(4).map(|t| (t.1, t.2)).collect();
            assert_eq!(general_antenna_selection(&grid, 4).unwrap(), oracle);
        }
    }

    #[test]
    fn equalizer_of_identity_and_diagonal() {
        let eq = Equalizer::from_effective(0, ComplexMatrix::identity(2)).unwrap();
        assert!(eq.f.sub(&ComplexMatrix::identity(2)).unwrap().max_abs() < 1e-15);
        let d = ComplexMatrix::from_real(2, 2, &[2.0, 0.0, 0.0, 0.5]).unwrap();
        let eq = Equalizer::from_effective(0, d).unwrap();
        let expected = ComplexMatrix::from_real(2, 2, &[0.5, 0.0, 0.0, 2.0]).unwrap();
        assert!(eq.f.sub(&expected).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn equalizer_inverts_effective_channel() {
        let mut r = rng(16);
        for _ in 0..100 {
            let e = draw_gaussian_matrix(3, 3, &mut r).unwrap();
            let eq = Equalizer::from_effective(1, e.clone()).unwrap();
            let res = eq
                .f
                .adjoint_mul(&e)
                .unwrap()
                .sub(&ComplexMatrix::identity(3))
                .unwrap();
            assert!(res.max_abs() < 1e-8);
        }
    }

    #[test]
    fn singular_effective_channel_is_zf_failure() {
        let e = ComplexMatrix::from_real(2, 2, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(
            Equalizer::from_effective(2, e),
            Err(OiaError::ZfFailure { cell: 2, .. })
        ));
    }

    fn schedule_min(
        cfg: &NetworkConfig,
        ch: &ChannelRealization,
        b: &InterferenceBasis,
        pick: fn(&StackedCrossChannel) -> WeightChoice,
    ) -> Vec<Vec<ScheduledStream>> {
        (0..cfg.cells)
            .map(|i| {
                let choices: Vec<WeightChoice> = (0..cfg.num_users[i])
                    .map(|j| pick(&stack_cross_channels(ch, b, i, j).unwrap()))
                    .collect();
                let metrics: Vec<f64> = choices.iter().map(|c| c.metric).collect();
                select_min_metric(&metrics, cfg.num_selected[i])
                    .unwrap()
                    .users
                    .into_iter()
                    .map(|j| ScheduledStream {
                        user: j,
                        lif: choices[j].metric,
                        weight: choices[j].clone(),
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn interference_free_limit_of_stream_stats() {
        let cfg = NetworkConfig::homogeneous(3, 2, 2, 6, 2, 10.0).unwrap();
        let mut r = rng(17);
        let mut ch = draw_network(&cfg, &mut r).unwrap();
        ch.zero_cross_links();
        let b = generate_bases(&cfg, &mut r).unwrap();
        let sched = schedule_min(&cfg, &ch, &b, antenna_selection);
        let snr = cfg.snr_linear();
        for i in 0..3 {
            let eq = cell_equalizer(i, &b, &ch, &sched[i]).unwrap();
            for st in stream_stats(&eq, &b, &ch, &sched, snr).unwrap() {
                assert_eq!(st.interference, 0.0);
                assert!((st.sinr - snr / st.zf_noise_gain).abs() < 1e-12 * st.sinr);
            }
        }
        let eq = Equalizer::from_effective(0, ComplexMatrix::identity(2)).unwrap();
        for st in stream_stats(&eq, &b, &ch, &sched, snr).unwrap() {
            assert!((st.rate - (1.0 + snr).log2()).abs() < 1e-12);
        }
    }

    #[test]
    fn sum_lif_identity_small_instances() {
        for (k, s, m, n, seed) in [(2, 1, 2, 5, 18), (3, 2, 3, 10, 19)] {
            let cfg = NetworkConfig::homogeneous(k, m, 2, n, s, 10.0).unwrap();
            let mut r = rng(seed);
            let ch = draw_network(&cfg, &mut r).unwrap();
            let b = generate_bases(&cfg, &mut r).unwrap();
            for pick in [antenna_selection as fn(&_) -> _, svd_weight] {
                let sched = schedule_min(&cfg, &ch, &b, pick);
                let tx = network_sum_lif(&sched);
                let rx = receiver_side_sum_lif(&b, &ch, &sched).unwrap();
                assert!((tx - rx).abs() < 1e-10, "tx {tx} rx {rx}");
            }
        }
    }

    #[test]
    fn sum_lif_vanishes_for_wide_stacks() {
        let cfg = NetworkConfig::homogeneous(3, 3, 5, 4, 2, 10.0).unwrap();
        let mut r = rng(20);
        let ch = draw_network(&cfg, &mut r).unwrap();
        let b = generate_bases(&cfg, &mut r).unwrap();
        let sched = schedule_min(&cfg, &ch, &b, svd_weight);
        assert!(network_sum_lif(&sched) < 1e-15);
    }

    #[test]
    fn stream_stats_match_symbol_level_simulation() {
        // Push unit-power QPSK symbols through the received-signal model and
        // measure the post-equalizer error power per stream.
        use crate::linalg::draw_cn;
        let cfg = NetworkConfig::homogeneous(3, 2, 2, 8, 2, 10.0).unwrap();
        let mut r = rng(21);
        let ch = draw_network(&cfg, &mut r).unwrap();
        let b = generate_bases(&cfg, &mut r).unwrap();
        let sched = schedule_min(&cfg, &ch, &b, svd_weight);
        let snr = cfg.snr_linear();
        let cell = 0;
        let eq = cell_equalizer(cell, &b, &ch, &sched[cell]).unwrap();
        let stats = stream_stats(&eq, &b, &ch, &sched, snr).unwrap();

        let symbols = 100_000;
        let mut err_power = [0.0f64; 2];
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let noise_std = (1.0 / snr).sqrt();
        use rand::Rng as _;
        for _ in 0..symbols {
            let mut y = vec![C64::new(0.0, 0.0); 2];
            let mut own = Vec::new();
            for (k, streams) in sched.iter().enumerate() {
                for s in streams {
                    let x = C64::new(
                        if r.random::<bool>() { h } else { -h },
                        if r.random::<bool>() { h } else { -h },
                    );
                    if k == cell {
                        own.push(x);
                    }
                    let rx = ch.link(cell, k, s.user).mul_vec(&s.weight.w).unwrap();
                    for (yi, v) in y.iter_mut().zip(rx) {
                        *yi += v * x;
                    }
                }
            }
            for yi in y.iter_mut() {
                *yi += draw_cn(&mut r) * noise_std;
            }
            let projected = b.null(cell).adjoint_mul_vec(&y).unwrap();
            for (j, ep) in err_power.iter_mut().enumerate() {
                let rj = inner(&eq.stream_filter(j), &projected);
                *ep += (rj - own[j]).norm_sqr();
            }
        }
        for j in 0..2 {
            let empirical = symbols as f64 / err_power[j];
            let rel = (empirical - stats[j].sinr).abs() / stats[j].sinr;
            assert!(rel < 0.03, "stream {j}: empirical {empirical} formula {}", stats[j].sinr);
        }
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        let err = "nosuch".parse::<Scheme>().unwrap_err();
        assert!(err.to_string().contains("svd-oia"));
    }
}
