//! Gray-mapped QPSK over the post-projection ZF receiver.

use rand::Rng;
use statrs::function::erf::erfc;

use crate::channel::ChannelRealization;
use crate::linalg::{draw_cn, inner, C64};
use crate::oia::{Equalizer, InterferenceBasis, Result, ScheduledStream};

const AMPLITUDE: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Unit-energy Gray QPSK: the first bit sets the in-phase sign, the second
/// the quadrature sign (0 → +).
pub fn qpsk_modulate(bits: (bool, bool)) -> C64 {
    C64::new(
        if bits.0 { -AMPLITUDE } else { AMPLITUDE },
        if bits.1 { -AMPLITUDE } else { AMPLITUDE },
    )
}

pub fn qpsk_random_symbol<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    qpsk_modulate((rng.random(), rng.random()))
}

/// Nearest constellation point (quadrant decision).
pub fn qpsk_slice(r: C64) -> C64 {
    qpsk_modulate((r.re < 0.0, r.im < 0.0))
}

/// Symbol error probability of Gray QPSK on AWGN at `Es/N0 = snr`:
/// `2p − p²` with `p = Q(√snr)`.
pub fn qpsk_awgn_ser(snr: f64) -> f64 {
    let p = 0.5 * erfc((snr / 2.0).sqrt());
    2.0 * p - p * p
}

/// Symbol error count and symbol total.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SymbolErrors {
    pub errors: u64,
    pub symbols: u64,
}

impl SymbolErrors {
    pub fn rate(&self) -> f64 {
        if self.symbols == 0 {
            0.0
        } else {
            self.errors as f64 / self.symbols as f64
        }
    }

    pub fn add(&mut self, other: SymbolErrors) {
        self.errors += other.errors;
        self.symbols += other.symbols;
    }
}

/// Unit-gain scalar link `r = x + z`, `z ~ CN(0, 1/snr)`.
pub fn simulate_scalar_awgn<R: Rng + ?Sized>(snr: f64, symbols: u64, rng: &mut R) -> SymbolErrors {
    let noise_std = (1.0 / snr).sqrt();
    let mut out = SymbolErrors::default();
    for _ in 0..symbols {
        let x = qpsk_random_symbol(rng);
        let r = x + draw_cn(rng) * noise_std;
        out.errors += u64::from(qpsk_slice(r) != x);
        out.symbols += 1;
    }
    out
}

/// Transmission settings of a block simulation.
#[derive(Debug, Clone, Copy)]
pub struct BlockSettings {
    /// Linear SNR; `None` transmits without noise.
    pub snr: Option<f64>,
    /// Whether foreign-cell streams reach each base station.
    pub inter_cell: bool,
    pub block_length: usize,
}

/// Sends `block_length` symbols on every scheduled stream and counts
/// decision errors on the home streams of every base station.
///
/// Each symbol period draws one symbol per stream in the network; every
/// base station observes its own noisy superposition, projects onto its
/// null basis and applies its ZF filters.
pub fn simulate_block<R: Rng + ?Sized>(
    channels: &ChannelRealization,
    bases: &InterferenceBasis,
    schedule: &[Vec<ScheduledStream>],
    equalizers: &[Equalizer],
    settings: BlockSettings,
    rng: &mut R,
) -> Result<SymbolErrors> {
    let cells = schedule.len();
    // Received contribution of every stream at every base station.
    let mut footprints: Vec<Vec<Vec<Vec<C64>>>> = Vec::with_capacity(cells);
    for bs in 0..cells {
        let per_cell = schedule
            .iter()
            .enumerate()
            .map(|(k, streams)| {
                streams
                    .iter()
                    .map(|s| Ok(channels.link(bs, k, s.user).mul_vec(&s.weight.w)?))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        footprints.push(per_cell);
    }
    let noise_std = settings.snr.map(|snr| (1.0 / snr).sqrt());
    let mut out = SymbolErrors::default();
    let mut symbols: Vec<Vec<C64>> = schedule.iter().map(|s| vec![C64::new(0.0, 0.0); s.len()]).collect();
    for _ in 0..settings.block_length {
        for cell_symbols in symbols.iter_mut() {
            for x in cell_symbols.iter_mut() {
                *x = qpsk_random_symbol(rng);
            }
        }
        for bs in 0..cells {
            let mut y = vec![C64::new(0.0, 0.0); bases.null(bs).rows()];
            for (k, cell_fp) in footprints[bs].iter().enumerate() {
                if k != bs && !settings.inter_cell {
                    continue;
                }
                for (fp, &x) in cell_fp.iter().zip(&symbols[k]) {
                    for (yi, h) in y.iter_mut().zip(fp) {
                        *yi += h * x;
                    }
                }
            }
            if let Some(std) = noise_std {
                for yi in y.iter_mut() {
                    *yi += draw_cn(rng) * std;
                }
            }
            let projected = bases.null(bs).adjoint_mul_vec(&y)?;
            let eq = &equalizers[bs];
            for (j, &x) in symbols[bs].iter().enumerate() {
                let r = inner(&eq.stream_filter(j), &projected);
                out.errors += u64::from(qpsk_slice(r) != x);
                out.symbols += 1;
            }
        }
    }
    Ok(out)
}
