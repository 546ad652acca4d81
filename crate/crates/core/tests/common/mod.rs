#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use relay_wmmse::channel::rayleigh;
use relay_wmmse::numerics::frobenius_sq;
use relay_wmmse::wmmse::{mmse_receivers, mse_matrix, relay_input_covariance, relay_power, source_power, stack_precoders};
use relay_wmmse::{generate_channels, ChannelSet, ComplexMatrix, DesignState, HpdMatrix, SystemConfig, C64};

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Entries i.i.d. CN(0, 1).
pub fn gaussian(rng: &mut ChaCha20Rng, rows: usize, cols: usize) -> ComplexMatrix {
    rayleigh(rng, rows, cols, 1.0, 0.0)
}

pub fn random_hpd(rng: &mut ChaCha20Rng, n: usize) -> ComplexMatrix {
    let x = gaussian(rng, n, n);
    &x * x.adjoint() + ComplexMatrix::identity(n, n) * C64::new(0.5, 0.0)
}

pub fn scale(m: ComplexMatrix, s: f64) -> ComplexMatrix {
    m * C64::new(s, 0.0)
}

/// A feasible mid-iteration state: random `P` using 80% of the source
/// budget, random `F` at 90% of the relay budget, MMSE receivers and
/// `W_k = E_k^{-1}`.
pub fn random_state(config: &SystemConfig, ch: &ChannelSet, seed: u64) -> DesignState {
    let mut r = rng(seed ^ 0x5eed);
    let m = config.antennas;
    let precoders: Vec<ComplexMatrix> = config.user_antennas.iter().map(|&n| gaussian(&mut r, m, n)).collect();
    let s = (0.8 * config.source_power / source_power(&precoders)).sqrt();
    let precoders: Vec<ComplexMatrix> = precoders.into_iter().map(|p| scale(p, s)).collect();
    let f = gaussian(&mut r, m, m);
    let pi = relay_input_covariance(ch, &precoders);
    let relay = scale(f.clone(), (0.9 * config.relay_power / relay_power(&f, &pi)).sqrt());
    let receivers = mmse_receivers(ch, &precoders, &relay).unwrap();
    let weight_matrices = (0..ch.num_users())
        .map(|k| mse_matrix(ch, &precoders, &relay, &receivers[k], k).unwrap().inverse().unwrap())
        .collect();
    DesignState {
        precoders,
        relay,
        receivers,
        weight_matrices,
    }
}

/// Small random system with `M ≤ 4`, its channels and a random state.
pub fn random_instance(seed: u64) -> (SystemConfig, ChannelSet, DesignState) {
    let m = 2 + (seed % 3) as usize;
    let users = 1 + (seed % 2) as usize;
    let n = if users * 2 <= m && seed % 4 == 0 { 2 } else { 1 };
    let snr = [0.0, 10.0, 20.0][(seed % 3) as usize];
    let relay_position = 0.3 + 0.1 * (seed % 5) as f64;
    let mut config = SystemConfig::symmetric(m, users, n, snr, relay_position);
    config.weights = (0..users).map(|k| 0.5 + k as f64).collect();
    let ch = generate_channels(&config, 10_000 + seed).unwrap();
    let state = random_state(&config, &ch, seed);
    (config, ch, state)
}

/// Central finite differences of `f` over the real and imaginary part of
/// every entry of `blocks`, returned as one gradient norm.
pub fn fd_gradient_norm(blocks: &[ComplexMatrix], step: f64, f: impl Fn(&[ComplexMatrix]) -> f64) -> f64 {
    let mut sq = 0.0;
    let mut work: Vec<ComplexMatrix> = blocks.to_vec();
    for b in 0..blocks.len() {
        for idx in 0..blocks[b].len() {
            for dir in [C64::new(step, 0.0), C64::new(0.0, step)] {
                let orig = work[b][idx];
                work[b][idx] = orig + dir;
                let plus = f(&work);
                work[b][idx] = orig - dir;
                let minus = f(&work);
                work[b][idx] = orig;
                let g = (plus - minus) / (2.0 * step);
                sq += g * g;
            }
        }
    }
    sq.sqrt()
}

pub fn frobenius_norm(blocks: &[ComplexMatrix]) -> f64 {
    blocks.iter().map(frobenius_sq).sum::<f64>().sqrt()
}

pub fn hpd(m: ComplexMatrix) -> HpdMatrix {
    HpdMatrix::symmetrized(m).unwrap()
}

/// `H̃_k = A_k H_k` built by explicit products.
pub fn filtered_channel(ch: &ChannelSet, relay: &ComplexMatrix, receiver: &ComplexMatrix, k: usize) -> ComplexMatrix {
    let n = ch.user_antennas(k);
    let a1 = receiver.columns(0, n);
    let a2 = receiver.columns(n, n);
    a1 * &ch.h_kb[k] + a2 * &ch.h_kr[k] * relay * &ch.h_rb
}

/// `P_k(λ) = w_k (Σ_j w_j H̃_j^H W_j H̃_j + λI)^{-1} H̃_k^H W_k` evaluated
/// directly in antenna space (requires an invertible bracket).
pub fn direct_precoder(ch: &ChannelSet, state: &DesignState, weights: &[f64], lambda: f64) -> Vec<ComplexMatrix> {
    let m = ch.antennas();
    let mut bracket = ComplexMatrix::identity(m, m) * C64::new(lambda, 0.0);
    let mut filtered = Vec::new();
    for k in 0..ch.num_users() {
        let ht = filtered_channel(ch, &state.relay, &state.receivers[k], k);
        bracket += scale(ht.adjoint() * state.weight_matrices[k].as_matrix() * &ht, weights[k]);
        filtered.push(ht);
    }
    let inv = bracket.try_inverse().unwrap();
    (0..ch.num_users())
        .map(|k| scale(&inv * filtered[k].adjoint() * state.weight_matrices[k].as_matrix(), weights[k]))
        .collect()
}

/// `(Σ w_k Θ_k + μI, Σ w_k Δ_k, Π + I)` with `Θ_k`, `Δ_k` written out term by
/// term, so that `F(μ)` solves `(Σ w_k Θ_k + μI) F (Π + I) = −Σ w_k Δ_k`.
pub fn relay_kkt_terms(ch: &ChannelSet, state: &DesignState, weights: &[f64], mu: f64) -> (ComplexMatrix, ComplexMatrix, ComplexMatrix) {
    let m = ch.antennas();
    let p = stack_precoders(&state.precoders);
    let pph = &p * p.adjoint();
    let pi = &ch.h_rb * &pph * ch.h_rb.adjoint();
    let mut theta = ComplexMatrix::identity(m, m) * C64::new(mu, 0.0);
    let mut delta = ComplexMatrix::zeros(m, m);
    for k in 0..ch.num_users() {
        let n = ch.user_antennas(k);
        let a1 = state.receivers[k].columns(0, n);
        let a2 = state.receivers[k].columns(n, n);
        let w = state.weight_matrices[k].as_matrix();
        let hkr_a2h_w = ch.h_kr[k].adjoint() * a2.adjoint() * w;
        theta += scale(&hkr_a2h_w * a2 * &ch.h_kr[k], weights[k]);
        let d = &hkr_a2h_w * a1 * &ch.h_kb[k] * &pph * ch.h_rb.adjoint()
            - &hkr_a2h_w * state.precoders[k].adjoint() * ch.h_rb.adjoint();
        delta += scale(d, weights[k]);
    }
    (theta, delta, pi + ComplexMatrix::identity(m, m))
}
