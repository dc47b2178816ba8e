//! Network scenarios and i.i.d. block-fading channel draws.

use std::fmt;
use std::path::Path;

use rand::Rng;
use thiserror::Error;

use crate::linalg::{draw_gaussian_matrix, ComplexMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid network configuration: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("cannot read config file {path}: {message}")]
    Io { path: String, message: String },
}

/// Cell layout of a K-cell uplink network.
///
/// All per-cell vectors have length `cells`. Indices are zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub cells: usize,
    /// Receive antennas `M_i` at each base station.
    pub antennas_bs: Vec<usize>,
    /// Transmit antennas `L_i` at each user of cell `i`.
    pub antennas_user: Vec<usize>,
    /// Users `N_i` per cell.
    pub num_users: Vec<usize>,
    /// Scheduled users (spatial streams) `S_i` per cell.
    pub num_selected: Vec<usize>,
    pub snr_db: f64,
}

impl NetworkConfig {
    /// Every cell shares the same `M, L, N, S`.
    pub fn homogeneous(
        cells: usize,
        antennas_bs: usize,
        antennas_user: usize,
        num_users: usize,
        num_selected: usize,
        snr_db: f64,
    ) -> Result<Self, ConfigError> {
        let cfg = Self {
            cells,
            antennas_bs: vec![antennas_bs; cells],
            antennas_user: vec![antennas_user; cells],
            num_users: vec![num_users; cells],
            num_selected: vec![num_selected; cells],
            snr_db,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut problems = Vec::new();
        if self.cells < 2 {
            problems.push(format!("K must be at least 2, got {}", self.cells));
        }
        for (name, list) in [
            ("M", &self.antennas_bs),
            ("L", &self.antennas_user),
            ("N", &self.num_users),
            ("S", &self.num_selected),
        ] {
            if list.len() != self.cells {
                problems.push(format!(
                    "{name} has {} entries but K = {}",
                    list.len(),
                    self.cells
                ));
            }
        }
        if problems.iter().any(|p| p.contains("entries")) {
            return Err(ConfigError::Invalid(problems));
        }
        for i in 0..self.cells {
            let (m, l, n, s) = (
                self.antennas_bs[i],
                self.antennas_user[i],
                self.num_users[i],
                self.num_selected[i],
            );
            if m == 0 {
                problems.push(format!("cell {}: M must be positive", i + 1));
            }
            if l == 0 {
                problems.push(format!("cell {}: L must be positive", i + 1));
            }
            if s == 0 || s > m {
                problems.push(format!(
                    "cell {}: S = {s} must satisfy 1 <= S <= M = {m}",
                    i + 1
                ));
            }
            if n < s {
                problems.push(format!("cell {}: N = {n} is smaller than S = {s}", i + 1));
            }
        }
        if !self.snr_db.is_finite() {
            problems.push(format!("snr_db must be finite, got {}", self.snr_db));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(problems))
        }
    }

    pub fn snr_linear(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }

    /// Total streams `S'_i = Σ_{k≠i} S_k` that cell `i`'s users must align against.
    pub fn foreign_streams(&self, cell: usize) -> usize {
        self.num_selected
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != cell)
            .map(|(_, &s)| s)
            .sum()
    }

    pub fn is_homogeneous(&self) -> bool {
        [
            &self.antennas_bs,
            &self.antennas_user,
            &self.num_users,
            &self.num_selected,
        ]
        .iter()
        .all(|l| l.windows(2).all(|w| w[0] == w[1]))
    }

    /// Parses the flat `key=value` config format.
    ///
    /// Scalar keys `K, M, L, N, S, snr_db` set every cell; the list keys
    /// `M_list, L_list, N_list, S_list` override per cell. Blank lines and
    /// lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        ConfigBuilder::parse(text)?.build()
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        ConfigBuilder::from_file(path)?.build()
    }
}

impl ConfigBuilder {
    /// Reads settings without requiring every key to be present.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut builder = ConfigBuilder::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Parse {
                line: idx + 1,
                message: format!("expected key=value, got {line:?}"),
            })?;
            builder
                .set(key.trim(), value.trim())
                .map_err(|message| ConfigError::Parse {
                    line: idx + 1,
                    message,
                })?;
        }
        Ok(builder)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }
}

impl fmt::Display for NetworkConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "K={}", self.cells)?;
        let join = |v: &[usize]| {
            v.iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(",")
        };
        if self.is_homogeneous() {
            writeln!(f, "M={}", self.antennas_bs[0])?;
            writeln!(f, "L={}", self.antennas_user[0])?;
            writeln!(f, "N={}", self.num_users[0])?;
            writeln!(f, "S={}", self.num_selected[0])?;
        } else {
            writeln!(f, "M_list={}", join(&self.antennas_bs))?;
            writeln!(f, "L_list={}", join(&self.antennas_user))?;
            writeln!(f, "N_list={}", join(&self.num_users))?;
            writeln!(f, "S_list={}", join(&self.num_selected))?;
        }
        writeln!(f, "snr_db={}", self.snr_db)
    }
}

/// Accumulates `key=value` settings; scalars and per-cell lists may be mixed.
#[derive(Debug, Clone, Default)]
pub struct ConfigBuilder {
    pub cells: Option<usize>,
    pub antennas_bs: Option<PerCell>,
    pub antennas_user: Option<PerCell>,
    pub num_users: Option<PerCell>,
    pub num_selected: Option<PerCell>,
    pub snr_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PerCell {
    Scalar(usize),
    List(Vec<usize>),
}

impl PerCell {
    fn expand(&self, cells: usize) -> Vec<usize> {
        match self {
            PerCell::Scalar(v) => vec![*v; cells],
            PerCell::List(l) => l.clone(),
        }
    }
}

fn parse_usize(key: &str, value: &str) -> Result<usize, String> {
    value
        .parse()
        .map_err(|_| format!("{key}: expected a non-negative integer, got {value:?}"))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>, String> {
    value
        .split(',')
        .map(|v| parse_usize(key, v.trim()))
        .collect()
}

impl ConfigBuilder {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "K" => self.cells = Some(parse_usize(key, value)?),
            "M" => self.antennas_bs = Some(PerCell::Scalar(parse_usize(key, value)?)),
            "L" => self.antennas_user = Some(PerCell::Scalar(parse_usize(key, value)?)),
            "N" => self.num_users = Some(PerCell::Scalar(parse_usize(key, value)?)),
            "S" => self.num_selected = Some(PerCell::Scalar(parse_usize(key, value)?)),
            "M_list" => self.antennas_bs = Some(PerCell::List(parse_list(key, value)?)),
            "L_list" => self.antennas_user = Some(PerCell::List(parse_list(key, value)?)),
            "N_list" => self.num_users = Some(PerCell::List(parse_list(key, value)?)),
            "S_list" => self.num_selected = Some(PerCell::List(parse_list(key, value)?)),
            "snr_db" => {
                self.snr_db = Some(
                    value
                        .parse()
                        .map_err(|_| format!("snr_db: expected a number, got {value:?}"))?,
                )
            }
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Fills unset fields from `defaults`.
    pub fn or(self, defaults: ConfigBuilder) -> ConfigBuilder {
        ConfigBuilder {
            cells: self.cells.or(defaults.cells),
            antennas_bs: self.antennas_bs.or(defaults.antennas_bs),
            antennas_user: self.antennas_user.or(defaults.antennas_user),
            num_users: self.num_users.or(defaults.num_users),
            num_selected: self.num_selected.or(defaults.num_selected),
            snr_db: self.snr_db.or(defaults.snr_db),
        }
    }

    pub fn build(&self) -> Result<NetworkConfig, ConfigError> {
        let mut missing = Vec::new();
        if self.cells.is_none() {
            missing.push("K".to_string());
        }
        for (name, field) in [
            ("M", &self.antennas_bs),
            ("L", &self.antennas_user),
            ("N", &self.num_users),
            ("S", &self.num_selected),
        ] {
            if field.is_none() {
                missing.push(name.to_string());
            }
        }
        if self.snr_db.is_none() {
            missing.push("snr_db".to_string());
        }
        if !missing.is_empty() {
            return Err(ConfigError::Invalid(
                missing.into_iter().map(|m| format!("{m} is not set")).collect(),
            ));
        }
        let cells = self.cells.expect("checked above");
        let cfg = NetworkConfig {
            cells,
            antennas_bs: self.antennas_bs.as_ref().expect("checked").expand(cells),
            antennas_user: self.antennas_user.as_ref().expect("checked").expand(cells),
            num_users: self.num_users.as_ref().expect("checked").expand(cells),
            num_selected: self.num_selected.as_ref().expect("checked").expand(cells),
            snr_db: self.snr_db.expect("checked"),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One block-fading draw of every link `H_k^[i,j]` (BS `k`, user `j` of cell `i`).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    cells: usize,
    /// Offset of user `(i, 0)` in the per-BS user enumeration.
    user_offsets: Vec<usize>,
    total_users: usize,
    matrices: Vec<ComplexMatrix>,
}

impl ChannelRealization {
    #[inline]
    fn slot(&self, bs: usize, cell: usize, user: usize) -> usize {
        bs * self.total_users + self.user_offsets[cell] + user
    }

    /// `H_bs^[cell, user]`, of shape `M_bs × L_cell`.
    #[inline]
    pub fn link(&self, bs: usize, cell: usize, user: usize) -> &ComplexMatrix {
        &self.matrices[self.slot(bs, cell, user)]
    }

    pub fn link_mut(&mut self, bs: usize, cell: usize, user: usize) -> &mut ComplexMatrix {
        let s = self.slot(bs, cell, user);
        &mut self.matrices[s]
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn matrix_count(&self) -> usize {
        self.matrices.len()
    }

    pub fn users_in(&self, cell: usize) -> usize {
        let end = self
            .user_offsets
            .get(cell + 1)
            .copied()
            .unwrap_or(self.total_users);
        end - self.user_offsets[cell]
    }

    /// Replaces every inter-cell link (`bs ≠ cell`) by the zero matrix.
    pub fn zero_cross_links(&mut self) {
        for bs in 0..self.cells {
            for cell in (0..self.cells).filter(|&c| c != bs) {
                for user in 0..self.users_in(cell) {
                    let m = self.link_mut(bs, cell, user);
                    *m = ComplexMatrix::zeros(m.rows(), m.cols());
                }
            }
        }
    }
}

/// Draws all `K · Σ_i N_i` link matrices with i.i.d. CN(0,1) entries.
///
/// Matrices are generated BS-major, then cell, then user, so the draw is a
/// deterministic function of the generator state.
pub fn draw_network<R: Rng + ?Sized>(
    config: &NetworkConfig,
    rng: &mut R,
) -> Result<ChannelRealization, ConfigError> {
    config.validate()?;
    let mut user_offsets = Vec::with_capacity(config.cells);
    let mut total_users = 0;
    for &n in &config.num_users {
        user_offsets.push(total_users);
        total_users += n;
    }
    let mut matrices = Vec::with_capacity(config.cells * total_users);
    for bs in 0..config.cells {
        for cell in 0..config.cells {
            for _ in 0..config.num_users[cell] {
                matrices.push(
                    draw_gaussian_matrix(
                        config.antennas_bs[bs],
                        config.antennas_user[cell],
                        rng,
                    )
                    .expect("validated config has positive dimensions"),
                );
            }
        }
    }
    Ok(ChannelRealization {
        cells: config.cells,
        user_offsets,
        total_users,
        matrices,
    })
}
