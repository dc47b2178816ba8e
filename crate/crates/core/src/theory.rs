//! Tail exponents, leading CDF coefficients and user-scaling slopes.
//!
//! The scheduling metric of every OIA scheme has a CDF that behaves like
//! `α·x^m` near zero. The minimum of `N` such metrics concentrates around
//! `N^{-1/m}`, so the mean scheduled leakage decays with slope `−1/m` on a
//! log-log plot against `N`. This module predicts `m` and `α` and fits both
//! from samples.

use rand::Rng;
use thiserror::Error;

use crate::channel::{draw_network, NetworkConfig};
use crate::linalg::basis_vector;
use crate::oia::{
    antenna_selection, generate_bases, lif_metric, stack_cross_channels, svd_weight, OiaError,
    Scheme,
};

/// Default tail-fit window in quantiles.
pub const DEFAULT_TAIL_WINDOW: (f64, f64) = (0.001, 0.02);
/// Minimum number of samples handed to a tail fit.
pub const MIN_TAIL_SAMPLES: usize = 10_000;
/// Minimum number of order statistics inside the fit window.
pub const MIN_WINDOW_SAMPLES: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error("outside the formula's domain: {0}")]
    Domain(String),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("invalid quantile window ({0}, {1}); need 0 < lower < upper <= 0.1")]
    InvalidWindow(f64, f64),
    #[error("insufficient sweep span: {0}")]
    InsufficientSpan(String),
    #[error("degenerate fit: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Oia(#[from] OiaError),
}

pub type Result<T> = std::result::Result<T, TheoryError>;

/// Polynomial order of the scheduling metric's CDF at zero for cell `cell`.
///
/// `None` for schemes that do not schedule on leakage. The SVD exponent is
/// clamped at zero once the stacked cross-link matrix becomes wide, where the
/// metric is identically zero.
pub fn predicted_exponent(
    scheme: Scheme,
    selected: &[usize],
    antennas_user: usize,
    cell: usize,
) -> Option<usize> {
    let foreign: usize = selected
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != cell)
        .map(|(_, &s)| s)
        .sum();
    match scheme {
        Scheme::AsOia | Scheme::SimoOia | Scheme::GasOia => Some(foreign),
        Scheme::SvdOia => Some((foreign + 1).saturating_sub(antennas_user)),
        Scheme::MaxSnr | Scheme::IntFree => None,
    }
}

/// Log-log slope of the mean scheduled leakage against `N`: `−1/m`, or 0
/// when scheduling ignores leakage.
pub fn predicted_slope(exponent: Option<usize>) -> f64 {
    match exponent {
        Some(m) if m > 0 => -1.0 / m as f64,
        _ => 0.0,
    }
}

fn factorial(n: u64) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// `Γ_s(t) = Π_{i=1}^{s} (t − i)!`, defined for integer `t ≥ s`.
pub fn normalized_multivariate_gamma(s: u64, t: i64) -> Result<f64> {
    (1..=s as i64)
        .map(|i| {
            let arg = t - i;
            if arg < 0 {
                Err(TheoryError::Domain(format!(
                    "Γ_{s}({t}) needs the factorial of {arg}"
                )))
            } else {
                Ok(factorial(arg as u64))
            }
        })
        .product()
}

/// The `L×L` matrix Ξ entering the closed-form coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct XiMatrix {
    pub size: usize,
    pub free_symbol: u64,
    /// Row-major entries.
    pub entries: Vec<f64>,
}

impl XiMatrix {
    /// Rows `i < L` carry binomials `C(L−i, j−i)` on and above the diagonal;
    /// the remaining lower entries (and the whole last row) carry
    /// `(−1)^{i−j} (L−j)! / (n−j)!`.
    pub fn new(size: usize, free_symbol: u64) -> Result<Self> {
        let l = size as u64;
        if free_symbol < l {
            return Err(TheoryError::Domain(format!(
                "Ξ needs n >= L, got n = {free_symbol}, L = {size}"
            )));
        }
        let mut entries = vec![0.0; size * size];
        for i in 1..=l {
            for j in 1..=l {
                let v = if i < l && j >= i {
                    binomial(l - i, j - i)
                } else if j <= i {
                    let sign = if (i - j) % 2 == 0 { 1.0 } else { -1.0 };
                    sign * factorial(l - j) / factorial(free_symbol - j)
                } else {
                    0.0
                };
                entries[((i - 1) * l + (j - 1)) as usize] = v;
            }
        }
        Ok(Self {
            size,
            free_symbol,
            entries,
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    pub fn determinant(&self) -> f64 {
        let n = self.size;
        let mut a = self.entries.clone();
        let mut det = 1.0;
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| a[x * n + col].abs().total_cmp(&a[y * n + col].abs()))
                .expect("non-empty range");
            if a[pivot * n + col] == 0.0 {
                return 0.0;
            }
            if pivot != col {
                for c in 0..n {
                    a.swap(pivot * n + c, col * n + c);
                }
                det = -det;
            }
            let d = a[col * n + col];
            det *= d;
            for r in (col + 1)..n {
                let factor = a[r * n + col] / d;
                for c in col..n {
                    a[r * n + c] -= factor * a[col * n + c];
                }
            }
        }
        det
    }
}

/// Closed-form leading coefficient of the SVD metric's CDF,
/// `Γ_{L−1}(1) / (((K−1)S − L + 1)! Γ_L(L)) · |det Ξ|`, with Ξ's free
/// symbol set to the stacked row count `(K−1)S`.
///
/// `Γ_{L−1}(1)` needs factorials of negative integers once `L ≥ 3`, so the
/// formula is only evaluated for `L ≤ 2`.
pub fn alpha_coefficient(cells: usize, selected: usize, antennas: usize) -> Result<f64> {
    let rows = ((cells.saturating_sub(1)) * selected) as u64;
    let l = antennas as u64;
    if cells < 2 || selected == 0 || l == 0 || l > rows {
        return Err(TheoryError::Domain(format!(
            "need 1 <= L < (K-1)S + 1, got K={cells}, S={selected}, L={antennas}"
        )));
    }
    let gamma_top = normalized_multivariate_gamma(l - 1, 1)?;
    let gamma_bottom = normalized_multivariate_gamma(l, l as i64)?;
    let xi = XiMatrix::new(antennas, rows)?;
    Ok(gamma_top / (factorial(rows - l + 1) * gamma_bottom) * xi.determinant().abs())
}

/// `∫ Π x_i^a e^{−x_i} Π_{i<j}(x_i − x_j)² dx` over `n` variables, i.e.
/// `Π_{j<n} (j+1)! (a+j)!`.
fn laguerre_ensemble_norm(n: u64, a: u64) -> f64 {
    (0..n).map(|j| factorial(j + 1) * factorial(a + j)).product()
}

/// Exact leading coefficient of `P(λ_min(G^H G) ≤ x)` for a `rows × cols`
/// i.i.d. CN(0,1) matrix `G` with `rows ≥ cols`.
///
/// Obtained by integrating the unordered eigenvalue density of the complex
/// Wishart (Laguerre) ensemble with one eigenvalue pinned near zero.
pub fn laguerre_alpha(rows: usize, cols: usize) -> Result<f64> {
    if cols == 0 || rows < cols {
        return Err(TheoryError::Domain(format!(
            "need rows >= cols >= 1, got {rows}x{cols}"
        )));
    }
    let (m, l) = (rows as u64, cols as u64);
    let a = m - l;
    Ok(l as f64 * laguerre_ensemble_norm(l - 1, a + 2)
        / ((a + 1) as f64 * laguerre_ensemble_norm(l, a)))
}

/// Power-law fit `F(x) ≈ coefficient · x^exponent` of a lower tail.
#[derive(Debug, Clone, PartialEq)]
pub struct TailFit {
    pub exponent: f64,
    pub coefficient: f64,
    pub fit_window: (f64, f64),
    /// Regression standard error of the exponent. Neighbouring empirical
    /// CDF points are strongly correlated, so this understates the spread
    /// across independent sample sets.
    pub stderr: f64,
    pub window_samples: usize,
}

struct Ols {
    slope: f64,
    intercept: f64,
    slope_stderr: f64,
    intercept_stderr: f64,
}

fn ols(xs: &[f64], ys: &[f64]) -> Ols {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let sigma2 = if xs.len() > 2 { rss / (n - 2.0) } else { 0.0 };
    let slope_stderr = (sigma2 / sxx).sqrt();
    let intercept_stderr = (sigma2 * (1.0 / n + mx * mx / sxx)).sqrt();
    Ols {
        slope,
        intercept,
        slope_stderr,
        intercept_stderr,
    }
}

/// `(x_(r), r/n)` pairs of the empirical CDF over the quantile window.
fn window_points(samples: &[f64], window: (f64, f64)) -> Result<(Vec<f64>, Vec<f64>)> {
    let (lo, hi) = window;
    if !(lo > 0.0 && lo < hi && hi <= 0.1) {
        return Err(TheoryError::InvalidWindow(lo, hi));
    }
    if samples.len() < MIN_TAIL_SAMPLES {
        return Err(TheoryError::TooFewSamples {
            needed: MIN_TAIL_SAMPLES,
            got: samples.len(),
        });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let first = ((lo * n as f64).ceil() as usize).max(1);
    let last = (hi * n as f64).floor() as usize;
    let mut xs = Vec::new();
    let mut fs = Vec::new();
    for rank in first..=last {
        let x = sorted[rank - 1];
        if x > 0.0 {
            xs.push(x);
            fs.push(rank as f64 / n as f64);
        }
    }
    if xs.len() < MIN_WINDOW_SAMPLES {
        return Err(TheoryError::TooFewSamples {
            needed: MIN_WINDOW_SAMPLES,
            got: xs.len(),
        });
    }
    Ok((xs, fs))
}

/// Least-squares line through `(ln x, ln F̂(x))` over the quantile window.
pub fn empirical_tail_fit(samples: &[f64], window: (f64, f64)) -> Result<TailFit> {
    let (xs, fs) = window_points(samples, window)?;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let lf: Vec<f64> = fs.iter().map(|f| f.ln()).collect();
    let fit = ols(&lx, &lf);
    if !(fit.slope > 0.0) {
        return Err(TheoryError::Degenerate(format!(
            "fitted exponent {} is not positive",
            fit.slope
        )));
    }
    Ok(TailFit {
        exponent: fit.slope,
        coefficient: fit.intercept.exp(),
        fit_window: window,
        stderr: fit.slope_stderr,
        window_samples: xs.len(),
    })
}

/// Tail fit with a first-order correction, `ln F̂ = ln α + m ln x + c x`.
///
/// For exponents of 3 and above the plain log-log line is visibly bent by
/// the `(1 + O(x))` factor inside the usual quantile windows; the extra
/// regressor absorbs it at the price of a wider standard error.
pub fn corrected_tail_fit(samples: &[f64], window: (f64, f64)) -> Result<TailFit> {
    let (xs, fs) = window_points(samples, window)?;
    let n = xs.len() as f64;
    let rows: Vec<[f64; 3]> = xs.iter().map(|&x| [1.0, x.ln(), x]).collect();
    let ys: Vec<f64> = fs.iter().map(|f| f.ln()).collect();
    let mut ata = [[0.0; 3]; 3];
    let mut aty = [0.0; 3];
    for (r, y) in rows.iter().zip(&ys) {
        for i in 0..3 {
            aty[i] += r[i] * y;
            for j in 0..3 {
                ata[i][j] += r[i] * r[j];
            }
        }
    }
    let inv = invert3(&ata).ok_or_else(|| {
        TheoryError::Degenerate("window points do not determine a corrected fit".into())
    })?;
    let beta: Vec<f64> = (0..3)
        .map(|i| (0..3).map(|j| inv[i][j] * aty[j]).sum())
        .collect();
    if !(beta[1] > 0.0) {
        return Err(TheoryError::Degenerate(format!(
            "fitted exponent {} is not positive",
            beta[1]
        )));
    }
    let rss: f64 = rows
        .iter()
        .zip(&ys)
        .map(|(r, y)| (y - beta[0] - beta[1] * r[1] - beta[2] * r[2]).powi(2))
        .sum();
    let sigma2 = rss / (n - 3.0);
    Ok(TailFit {
        exponent: beta[1],
        coefficient: beta[0].exp(),
        fit_window: window,
        stderr: (sigma2 * inv[1][1]).sqrt(),
        window_samples: xs.len(),
    })
}

fn invert3(a: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let cof = |r0: usize, r1: usize, c0: usize, c1: usize| a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0];
    let c = [
        [cof(1, 2, 1, 2), -cof(1, 2, 0, 2), cof(1, 2, 0, 1)],
        [-cof(0, 2, 1, 2), cof(0, 2, 0, 2), -cof(0, 2, 0, 1)],
        [cof(0, 1, 1, 2), -cof(0, 1, 0, 2), cof(0, 1, 0, 1)],
    ];
    let det = a[0][0] * c[0][0] + a[0][1] * c[0][1] + a[0][2] * c[0][2];
    let scale = a.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
    if !(det.abs() > 1e-300 && det.abs() > 1e-14 * scale.powi(3)) {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            inv[i][j] = c[j][i] / det;
        }
    }
    Some(inv)
}

/// Leading coefficient with the exponent held fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientFit {
    pub coefficient: f64,
    /// Relative standard error of the coefficient.
    pub relative_stderr: f64,
    /// Fitted first-order correction `c` in `F(x) ≈ α x^m e^{c x}`.
    pub correction: f64,
}

/// Estimates `α` in `F(x) = α x^m (1 + O(x))` with `m` known.
///
/// Regresses `ln F̂(x) − m ln x` on `x` so the first-order correction does
/// not bias the intercept.
pub fn fixed_exponent_coefficient(
    samples: &[f64],
    exponent: f64,
    window: (f64, f64),
) -> Result<CoefficientFit> {
    let (xs, fs) = window_points(samples, window)?;
    let ys: Vec<f64> = xs
        .iter()
        .zip(&fs)
        .map(|(x, f)| f.ln() - exponent * x.ln())
        .collect();
    let fit = ols(&xs, &ys);
    Ok(CoefficientFit {
        coefficient: fit.intercept.exp(),
        relative_stderr: fit.intercept_stderr,
        correction: fit.slope,
    })
}

/// Log-log regression of mean scheduled leakage against user count.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
}

pub fn scaling_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 4 {
        return Err(TheoryError::InsufficientSpan(format!(
            "need at least 4 points, got {}",
            points.len()
        )));
    }
    let min_n = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let max_n = points.iter().map(|p| p.0).fold(0.0, f64::max);
    if !(min_n > 0.0 && max_n >= 10.0 * min_n) {
        return Err(TheoryError::InsufficientSpan(format!(
            "N must span a decade, got {min_n}..{max_n}"
        )));
    }
    if points.iter().any(|p| !(p.1 > 0.0)) {
        return Err(TheoryError::Degenerate(
            "mean metrics must be positive for a log-log fit".into(),
        ));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let fit = ols(&xs, &ys);
    Ok(SlopeFit {
        slope: fit.slope,
        intercept: fit.intercept,
        stderr: fit.slope_stderr,
    })
}

/// Samples one user's scheduling metric with the bases fixed and fresh
/// channels per sample.
///
/// The user is user 0 of `cell`; only the leakage-based schemes apply.
pub fn sample_user_metrics<R: Rng + ?Sized>(
    config: &NetworkConfig,
    scheme: Scheme,
    cell: usize,
    count: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !matches!(
        scheme,
        Scheme::AsOia | Scheme::SvdOia | Scheme::SimoOia | Scheme::GasOia
    ) {
        return Err(TheoryError::Domain(format!(
            "{scheme} does not schedule on leakage"
        )));
    }
    // One user per cell is enough to draw the links of interest.
    let mut for_draws = config.clone();
    for_draws.num_users = vec![1; config.cells];
    for_draws.num_selected = vec![1; config.cells];
    let bases = generate_bases(config, rng)?;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let channels = draw_network(&for_draws, rng)
            .map_err(|e| TheoryError::Domain(e.to_string()))?;
        let g = stack_cross_channels(&channels, &bases, cell, 0)?;
        let metric = match scheme {
            Scheme::SvdOia => svd_weight(&g).metric,
            Scheme::AsOia => antenna_selection(&g).metric,
            Scheme::SimoOia => lif_metric(&g, &basis_vector(g.antennas(), 0))?,
            // Single-antenna leakage, the quantity pooled by per-antenna scheduling.
            Scheme::GasOia => g.matrix.column_norms_sqr()[0],
            Scheme::MaxSnr | Scheme::IntFree => unreachable!("rejected above"),
        };
        out.push(metric);
    }
    Ok(out)
}

/// One configuration of the closed-form versus empirical coefficient check.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaCheck {
    pub cells: usize,
    pub selected: usize,
    pub antennas: usize,
    pub closed_form: f64,
    pub empirical: f64,
    /// `max(a/b, b/a)`.
    pub ratio: f64,
}

/// Outcome of cross-checking the closed-form coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaValidation {
    pub checks: Vec<AlphaCheck>,
    /// Set when any configuration disagrees by more than [`ALPHA_AGREEMENT_FACTOR`].
    pub closed_form_flagged: bool,
}

pub const ALPHA_AGREEMENT_FACTOR: f64 = 2.0;

impl AlphaValidation {
    pub fn new(checks: Vec<AlphaCheck>) -> Self {
        let closed_form_flagged = checks.iter().any(|c| !(c.ratio <= ALPHA_AGREEMENT_FACTOR));
        Self {
            checks,
            closed_form_flagged,
        }
    }

    /// The coefficient downstream checks should rely on: the empirical
    /// estimate once the closed form is flagged.
    pub fn trusted(&self, cells: usize, selected: usize, antennas: usize) -> Option<f64> {
        self.checks
            .iter()
            .find(|c| c.cells == cells && c.selected == selected && c.antennas == antennas)
            .map(|c| {
                if self.closed_form_flagged {
                    c.empirical
                } else {
                    c.closed_form
                }
            })
    }
}

impl AlphaCheck {
    pub fn new(cells: usize, selected: usize, antennas: usize, empirical: f64) -> Result<Self> {
        let closed_form = alpha_coefficient(cells, selected, antennas)?;
        let ratio = (closed_form / empirical).max(empirical / closed_form);
        Ok(Self {
            cells,
            selected,
            antennas,
            closed_form,
            empirical,
            ratio,
        })
    }
}
