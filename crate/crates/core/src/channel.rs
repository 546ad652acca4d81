//! System configuration and seeded Rayleigh channel generation.
//!
//! Nodes sit on a line: the base station, the relay and the users each have a
//! scalar position. Every channel entry is circularly-symmetric complex
//! Gaussian with total variance `1 / ℓ^τ`, where `ℓ` is the distance between
//! the two end points of the link.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{all_finite, ComplexMatrix, C64};

/// Antenna counts, budgets, priorities and geometry of one relaying broadcast channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Antennas at the source and at the relay.
    pub antennas: usize,
    /// Receive antennas (and streams) per user; its length is the user count.
    pub user_antennas: Vec<usize>,
    /// Source power budget, noise-normalized.
    #[serde(default = "unit_power")]
    pub source_power: f64,
    /// Relay power budget, noise-normalized.
    #[serde(default = "unit_power")]
    pub relay_power: f64,
    /// Rate weights, one per user. Empty means all ones.
    #[serde(default)]
    pub weights: Vec<f64>,
    #[serde(default = "default_path_loss")]
    pub path_loss_exponent: f64,
    #[serde(default)]
    pub bs_position: f64,
    #[serde(default = "default_relay_position")]
    pub relay_position: f64,
    /// Position of each user. Empty means all users at 1.0.
    #[serde(default)]
    pub user_positions: Vec<f64>,
    /// Halve every rate to account for the two-slot protocol.
    #[serde(default)]
    pub half_duplex_rate_factor: bool,
}

fn unit_power() -> f64 {
    1.0
}

fn default_path_loss() -> f64 {
    3.0
}

fn default_relay_position() -> f64 {
    0.5
}

impl SystemConfig {
    /// `users` users with `streams` antennas each, unit weights, users at 1.0,
    /// base station at 0 and path-loss exponent 3.
    pub fn symmetric(antennas: usize, users: usize, streams: usize, snr_db: f64, relay_position: f64) -> Self {
        let (ps, pr) = snr_to_powers(snr_db);
        SystemConfig {
            antennas,
            user_antennas: vec![streams; users],
            source_power: ps,
            relay_power: pr,
            weights: vec![1.0; users],
            path_loss_exponent: 3.0,
            bs_position: 0.0,
            relay_position,
            user_positions: vec![1.0; users],
            half_duplex_rate_factor: false,
        }
    }

    pub fn num_users(&self) -> usize {
        self.user_antennas.len()
    }

    /// Total number of streams `Σ N_k`.
    pub fn total_streams(&self) -> usize {
        self.user_antennas.iter().sum()
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weights.get(k).copied().unwrap_or(1.0)
    }

    /// Rate weights with the all-ones default filled in.
    pub fn weight_vector(&self) -> Vec<f64> {
        (0..self.num_users()).map(|k| self.weight(k)).collect()
    }

    pub fn user_position(&self, k: usize) -> f64 {
        self.user_positions.get(k).copied().unwrap_or(1.0)
    }

    /// Sets both budgets from a transmit SNR in dB.
    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        let (ps, pr) = snr_to_powers(snr_db);
        self.source_power = ps;
        self.relay_power = pr;
        self
    }

    pub fn with_relay_position(mut self, position: f64) -> Self {
        self.relay_position = position;
        self
    }

    /// Source-relay distance.
    pub fn relay_distance(&self) -> f64 {
        (self.relay_position - self.bs_position).abs()
    }

    /// Source-user distance for user `k`.
    pub fn direct_distance(&self, k: usize) -> f64 {
        (self.user_position(k) - self.bs_position).abs()
    }

    /// Relay-user distance for user `k`.
    pub fn relay_user_distance(&self, k: usize) -> f64 {
        (self.user_position(k) - self.relay_position).abs()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.antennas == 0 {
            return bad("antenna count must be at least 1".into());
        }
        if self.user_antennas.is_empty() {
            return bad("at least one user is required".into());
        }
        if self.user_antennas.contains(&0) {
            return bad("every user needs at least one antenna".into());
        }
        if self.total_streams() > self.antennas {
            return bad(format!(
                "total user antennas {} exceed the {} source antennas",
                self.total_streams(),
                self.antennas
            ));
        }
        if !(self.source_power > 0.0 && self.source_power.is_finite()) {
            return bad(format!("source power must be positive, got {}", self.source_power));
        }
        if !(self.relay_power > 0.0 && self.relay_power.is_finite()) {
            return bad(format!("relay power must be positive, got {}", self.relay_power));
        }
        if !self.weights.is_empty() && self.weights.len() != self.num_users() {
            return bad(format!(
                "{} weights given for {} users",
                self.weights.len(),
                self.num_users()
            ));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return bad("weights must be finite and non-negative".into());
        }
        if !self.user_positions.is_empty() && self.user_positions.len() != self.num_users() {
            return bad(format!(
                "{} user positions given for {} users",
                self.user_positions.len(),
                self.num_users()
            ));
        }
        if !(self.path_loss_exponent > 0.0 && self.path_loss_exponent.is_finite()) {
            return bad("path-loss exponent must be positive".into());
        }
        self.check_geometry()
    }

    fn check_geometry(&self) -> Result<()> {
        let mut links = vec![("relay-source", self.relay_distance())];
        for k in 0..self.num_users() {
            links.push(("user-source", self.direct_distance(k)));
            links.push(("user-relay", self.relay_user_distance(k)));
        }
        for (name, d) in links {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::Geometry(format!("{name} distance must be positive, got {d}")));
            }
        }
        Ok(())
    }
}

/// `P_s = P_r = 10^(snr/10)` with unit noise variance.
pub fn snr_to_powers(snr_db: f64) -> (f64, f64) {
    let p = 10f64.powf(snr_db / 10.0);
    (p, p)
}

/// One realization of every channel in the network.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet {
    /// Source to relay, `M × M`.
    pub h_rb: ComplexMatrix,
    /// Source to user k (direct links), `N_k × M`.
    pub h_kb: Vec<ComplexMatrix>,
    /// Relay to user k, `N_k × M`.
    pub h_kr: Vec<ComplexMatrix>,
}

impl ChannelSet {
    /// Assembles a channel set, checking that the shapes agree.
    pub fn new(h_rb: ComplexMatrix, h_kb: Vec<ComplexMatrix>, h_kr: Vec<ComplexMatrix>) -> Result<Self> {
        let m = h_rb.nrows();
        let mismatch = |msg: String| Err(Error::DimensionMismatch(msg));
        if m == 0 || h_rb.ncols() != m {
            return mismatch(format!("H_rb must be square, got {}x{}", h_rb.nrows(), h_rb.ncols()));
        }
        if h_kb.is_empty() || h_kb.len() != h_kr.len() {
            return mismatch(format!("{} direct links for {} relay links", h_kb.len(), h_kr.len()));
        }
        for (k, (kb, kr)) in h_kb.iter().zip(&h_kr).enumerate() {
            if kb.ncols() != m || kr.ncols() != m || kb.nrows() != kr.nrows() || kb.nrows() == 0 {
                return mismatch(format!(
                    "user {k}: H_kb is {}x{}, H_kr is {}x{}, expected N_k x {m}",
                    kb.nrows(),
                    kb.ncols(),
                    kr.nrows(),
                    kr.ncols()
                ));
            }
        }
        let set = ChannelSet { h_rb, h_kb, h_kr };
        if !set.matrices().all(all_finite) {
            return Err(Error::InvalidConfig("channel entries must be finite".into()));
        }
        Ok(set)
    }

    pub fn antennas(&self) -> usize {
        self.h_rb.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.h_kb.len()
    }

    pub fn user_antennas(&self, k: usize) -> usize {
        self.h_kb[k].nrows()
    }

    pub fn matrices(&self) -> impl Iterator<Item = &ComplexMatrix> {
        std::iter::once(&self.h_rb).chain(&self.h_kb).chain(&self.h_kr)
    }
}

/// Draws one channel realization.
///
/// The generator is ChaCha20 keyed by `seed` alone, so a realization depends
/// only on `(config, seed)`. Draw order: `H_rb`, then every `H_kb`, then every
/// `H_kr`, each row-major with the real part before the imaginary part.
pub fn generate_channels(config: &SystemConfig, seed: u64) -> Result<ChannelSet> {
    config.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let m = config.antennas;
    let tau = config.path_loss_exponent;
    let h_rb = rayleigh(&mut rng, m, m, config.relay_distance(), tau);
    let h_kb = (0..config.num_users())
        .map(|k| rayleigh(&mut rng, config.user_antennas[k], m, config.direct_distance(k), tau))
        .collect();
    let h_kr = (0..config.num_users())
        .map(|k| rayleigh(&mut rng, config.user_antennas[k], m, config.relay_user_distance(k), tau))
        .collect();
    Ok(ChannelSet { h_rb, h_kb, h_kr })
}

/// `rows × cols` matrix of i.i.d. `CN(0, 1/ℓ^τ)` entries.
pub fn rayleigh<R: Rng>(rng: &mut R, rows: usize, cols: usize, distance: f64, tau: f64) -> ComplexMatrix {
    let sigma = (0.5 * distance.powf(-tau)).sqrt();
    let mut entries = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        entries.push(C64::new(sigma * re, sigma * im));
    }
    ComplexMatrix::from_row_iterator(rows, cols, entries)
}
