//! Non-iterative relay beamformers for a given source precoder, and the
//! starting point of the alternating optimization.

use crate::error::{Error, Result};
use crate::numerics::{real, ComplexMatrix, HpdMatrix};
use crate::wmmse::{mmse_receivers, relay_input_covariance, relay_power, split_precoder, stack_precoders, DesignState};
use crate::{ChannelSet, SystemConfig};

/// Vertical stack `H_ur = [H_1r ; … ; H_Kr]`, `Σ N_k × M`.
pub fn stacked_user_channel(ch: &ChannelSet) -> ComplexMatrix {
    let rows: usize = ch.h_kr.iter().map(|h| h.nrows()).sum();
    let mut stacked = ComplexMatrix::zeros(rows, ch.antennas());
    let mut offset = 0;
    for h in &ch.h_kr {
        stacked.rows_mut(offset, h.nrows()).copy_from(h);
        offset += h.nrows();
    }
    stacked
}

/// Scales `f0` so that `Tr(F (Π + I) F^H) = budget`.
pub fn scale_to_relay_budget(f0: ComplexMatrix, pi: &ComplexMatrix, budget: f64) -> Result<ComplexMatrix> {
    let power = relay_power(&f0, pi);
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::DegenerateChannel(format!(
            "unnormalized relay beamformer has power {power}"
        )));
    }
    Ok(f0 * real((budget / power).sqrt()))
}

/// Maximum-ratio combining and transmission: `F = ρ₁ H_ur^H P^H H_rb^H`.
pub fn mrc_mrt(ch: &ChannelSet, precoders: &[ComplexMatrix], relay_budget: f64) -> Result<ComplexMatrix> {
    let p = stack_precoders(precoders);
    check_stream_count(ch, &p)?;
    let f0 = stacked_user_channel(ch).adjoint() * p.adjoint() * ch.h_rb.adjoint();
    scale_to_relay_budget(f0, &relay_input_covariance(ch, precoders), relay_budget)
}

/// Maximum-ratio combining with regularized zero-forcing transmission:
/// `F = ρ₂ H_ur^H (H_ur H_ur^H + (M / P_r) I)^{-1} P^H H_rb^H`.
pub fn mrc_rzf(ch: &ChannelSet, precoders: &[ComplexMatrix], relay_budget: f64, antennas: usize) -> Result<ComplexMatrix> {
    if !(relay_budget > 0.0) {
        return Err(Error::InvalidConfig(format!("relay budget must be positive, got {relay_budget}")));
    }
    let p = stack_precoders(precoders);
    check_stream_count(ch, &p)?;
    let h_ur = stacked_user_channel(ch);
    let s = h_ur.nrows();
    let regularized = &h_ur * h_ur.adjoint() + ComplexMatrix::identity(s, s) * real(antennas as f64 / relay_budget);
    let inner = HpdMatrix::symmetrized(regularized)?.solve(&(p.adjoint() * ch.h_rb.adjoint()))?;
    let f0 = h_ur.adjoint() * inner;
    scale_to_relay_budget(f0, &relay_input_covariance(ch, precoders), relay_budget)
}

fn check_stream_count(ch: &ChannelSet, p: &ComplexMatrix) -> Result<()> {
    let streams: usize = (0..ch.num_users()).map(|k| ch.user_antennas(k)).sum();
    if p.nrows() != ch.antennas() || p.ncols() != streams {
        return Err(Error::DimensionMismatch(format!(
            "precoder is {}x{}, expected {}x{streams}",
            p.nrows(),
            p.ncols(),
            ch.antennas()
        )));
    }
    Ok(())
}

/// `√(P_s / M)` times the first `Σ N_k` columns of the `M × M` identity, split per user.
pub fn scaled_identity_precoder(config: &SystemConfig) -> Vec<ComplexMatrix> {
    let m = config.antennas;
    let scale = (config.source_power / m as f64).sqrt();
    let p = ComplexMatrix::identity(m, config.total_streams()) * real(scale);
    split_precoder(&p, &config.user_antennas)
}

/// Starting point of the alternating optimization.
///
/// `P` is the scaled rectangular identity, `F = ρI` meets the relay budget
/// with equality, `A_k` are the MMSE filters at that `(P, F)` and `W_k = I`.
pub fn algorithm1_init(config: &SystemConfig, ch: &ChannelSet) -> Result<DesignState> {
    config.validate()?;
    if ch.antennas() != config.antennas || ch.num_users() != config.num_users() {
        return Err(Error::DimensionMismatch(format!(
            "channels for {} antennas and {} users, config has {} and {}",
            ch.antennas(),
            ch.num_users(),
            config.antennas,
            config.num_users()
        )));
    }
    let precoders = scaled_identity_precoder(config);
    let m = config.antennas;
    let pi = relay_input_covariance(ch, &precoders);
    let rho = (config.relay_power / (pi.trace().re + m as f64)).sqrt();
    let relay = ComplexMatrix::identity(m, m) * real(rho);
    let receivers = mmse_receivers(ch, &precoders, &relay)?;
    let weight_matrices = config.user_antennas.iter().map(|&n| HpdMatrix::identity(n)).collect();
    Ok(DesignState {
        precoders,
        relay,
        receivers,
        weight_matrices,
    })
}
