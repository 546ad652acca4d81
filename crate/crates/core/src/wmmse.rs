//! Closed-form block updates of the weighted-MMSE alternating optimization.
//!
//! User `k` observes the stacked two-slot signal
//!
//! ```text
//! y_k = H_k P s + [n_1k ; H_kr F n_r + n_2k],   H_k = [H_kb ; H_kr F H_rb]
//! ```
//!
//! and estimates its own streams with a linear filter `A_k = [A_1k A_2k]`.
//! With `A`, `W` and one of `P`, `F` held fixed, the weighted sum-MSE
//! `Σ_k w_k Tr(W_k E_k)` is a convex quadratic in the other one, and its
//! power-constrained minimizer is a ridge-type solve whose multiplier is
//! found by bisection on the (monotone) transmit power.

use crate::error::{Error, Result};
use nalgebra::SymmetricEigen;

use crate::numerics::{all_finite, frobenius_sq, hermitian_part, real, trace_product, ComplexMatrix, HpdMatrix, C64};
use crate::ChannelSet;

/// Relative slack allowed on a power budget, and the accuracy an active
/// budget must be met with.
pub const BUDGET_TOL: f64 = 1e-6;

/// Relative accuracy the multiplier searches aim for. Much tighter than
/// [`BUDGET_TOL`] so that an inexact multiplier cannot make a block update
/// measurably suboptimal.
pub const SEARCH_TOL: f64 = 1e-12;

/// Upper limit on bisection halvings once the multiplier is bracketed.
pub const MAX_BISECTION_STEPS: usize = 200;

const MAX_BRACKET_DOUBLINGS: usize = 1000;

/// Current iterate of the alternating optimization.
#[derive(Clone, Debug)]
pub struct DesignState {
    /// Source precoder blocks `P_k`, each `M × N_k`.
    pub precoders: Vec<ComplexMatrix>,
    /// Relay beamformer `F`, `M × M`.
    pub relay: ComplexMatrix,
    /// Receive filters `A_k = [A_1k A_2k]`, each `N_k × 2N_k`.
    pub receivers: Vec<ComplexMatrix>,
    /// MSE weight matrices `W_k`, each `N_k × N_k`.
    pub weight_matrices: Vec<HpdMatrix>,
}

impl DesignState {
    /// `P = [P_1 … P_K]`.
    pub fn stacked_precoder(&self) -> ComplexMatrix {
        stack_precoders(&self.precoders)
    }

    pub fn source_power(&self) -> f64 {
        source_power(&self.precoders)
    }

    pub fn relay_power(&self, ch: &ChannelSet) -> f64 {
        relay_power(&self.relay, &relay_input_covariance(ch, &self.precoders))
    }
}

/// Per-user MSE matrices and rates at a given design.
#[derive(Clone, Debug)]
pub struct MseReport {
    pub mse: Vec<HpdMatrix>,
    /// Bits per channel use.
    pub rates: Vec<f64>,
    pub weighted_sum_rate: f64,
    /// `Σ_k w_k (Tr(W_k E_k) − log2 det W_k)`.
    pub wmmse_objective: f64,
}

/// A multiplier together with the update it produces and that update's power.
#[derive(Clone, Debug)]
pub struct MultiplierSolution<T> {
    pub multiplier: f64,
    pub value: T,
    pub power: f64,
}

/// Horizontal concatenation of the precoder blocks.
pub fn stack_precoders(blocks: &[ComplexMatrix]) -> ComplexMatrix {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut p = ComplexMatrix::zeros(rows, cols);
    let mut offset = 0;
    for b in blocks {
        p.columns_mut(offset, b.ncols()).copy_from(b);
        offset += b.ncols();
    }
    p
}

/// Splits a stacked precoder back into blocks of the given widths.
pub fn split_precoder(p: &ComplexMatrix, widths: &[usize]) -> Vec<ComplexMatrix> {
    let mut offset = 0;
    widths
        .iter()
        .map(|&w| {
            let block = p.columns(offset, w).into_owned();
            offset += w;
            block
        })
        .collect()
}

fn check_user(ch: &ChannelSet, k: usize) -> Result<()> {
    if k >= ch.num_users() {
        return Err(Error::DimensionMismatch(format!(
            "user index {k} out of range for {} users",
            ch.num_users()
        )));
    }
    Ok(())
}

fn check_relay(ch: &ChannelSet, relay: &ComplexMatrix) -> Result<()> {
    let m = ch.antennas();
    if relay.shape() != (m, m) {
        return Err(Error::DimensionMismatch(format!(
            "relay beamformer is {}x{}, expected {m}x{m}",
            relay.nrows(),
            relay.ncols()
        )));
    }
    Ok(())
}

fn check_precoders(ch: &ChannelSet, precoders: &[ComplexMatrix]) -> Result<()> {
    if precoders.len() != ch.num_users() {
        return Err(Error::DimensionMismatch(format!(
            "{} precoder blocks for {} users",
            precoders.len(),
            ch.num_users()
        )));
    }
    for (k, p) in precoders.iter().enumerate() {
        if p.nrows() != ch.antennas() || p.ncols() != ch.user_antennas(k) {
            return Err(Error::DimensionMismatch(format!(
                "precoder block {k} is {}x{}, expected {}x{}",
                p.nrows(),
                p.ncols(),
                ch.antennas(),
                ch.user_antennas(k)
            )));
        }
    }
    Ok(())
}

fn check_receivers(ch: &ChannelSet, receivers: &[ComplexMatrix], weight_matrices: &[HpdMatrix], weights: &[f64]) -> Result<()> {
    let k = ch.num_users();
    if receivers.len() != k || weight_matrices.len() != k || weights.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "{} receivers, {} weight matrices and {} weights for {k} users",
            receivers.len(),
            weight_matrices.len(),
            weights.len()
        )));
    }
    for (u, (a, w)) in receivers.iter().zip(weight_matrices).enumerate() {
        let n = ch.user_antennas(u);
        if a.shape() != (n, 2 * n) || w.dim() != n {
            return Err(Error::DimensionMismatch(format!(
                "user {u}: receiver {}x{} and weight {}x{}, expected {n}x{} and {n}x{n}",
                a.nrows(),
                a.ncols(),
                w.dim(),
                w.dim(),
                2 * n
            )));
        }
    }
    Ok(())
}

/// `H_k = [H_kb ; H_kr F H_rb]`, a `2N_k × M` matrix.
pub fn effective_channel(ch: &ChannelSet, relay: &ComplexMatrix, k: usize) -> Result<ComplexMatrix> {
    check_user(ch, k)?;
    check_relay(ch, relay)?;
    let n = ch.user_antennas(k);
    let mut h = ComplexMatrix::zeros(2 * n, ch.antennas());
    h.rows_mut(0, n).copy_from(&ch.h_kb[k]);
    h.rows_mut(n, n).copy_from(&(&ch.h_kr[k] * relay * &ch.h_rb));
    Ok(h)
}

/// `G_k G_k^H = diag(I, I + H_kr F F^H H_kr^H)`.
pub fn noise_covariance(ch: &ChannelSet, relay: &ComplexMatrix, k: usize) -> Result<HpdMatrix> {
    HpdMatrix::symmetrized(noise_covariance_matrix(ch, relay, k)?)
}

fn noise_covariance_matrix(ch: &ChannelSet, relay: &ComplexMatrix, k: usize) -> Result<ComplexMatrix> {
    check_user(ch, k)?;
    check_relay(ch, relay)?;
    let n = ch.user_antennas(k);
    let hf = &ch.h_kr[k] * relay;
    let mut g = ComplexMatrix::identity(2 * n, 2 * n);
    let amplified = ComplexMatrix::identity(n, n) + &hf * hf.adjoint();
    g.view_mut((n, n), (n, n)).copy_from(&amplified);
    Ok(g)
}

/// `A_k = P_k^H H_k^H (H_k P P^H H_k^H + G_k G_k^H)^{-1}`.
pub fn mmse_receiver(ch: &ChannelSet, precoders: &[ComplexMatrix], relay: &ComplexMatrix, k: usize) -> Result<ComplexMatrix> {
    check_precoders(ch, precoders)?;
    let h = effective_channel(ch, relay, k)?;
    let hp = &h * stack_precoders(precoders);
    let cov = &hp * hp.adjoint() + noise_covariance_matrix(ch, relay, k)?;
    let cov = HpdMatrix::symmetrized(cov)?;
    // cov is Hermitian, so A_k^H = cov^{-1} H_k P_k.
    Ok(cov.solve(&(&h * &precoders[k]))?.adjoint())
}

/// Receivers for every user.
pub fn mmse_receivers(ch: &ChannelSet, precoders: &[ComplexMatrix], relay: &ComplexMatrix) -> Result<Vec<ComplexMatrix>> {
    (0..ch.num_users()).map(|k| mmse_receiver(ch, precoders, relay, k)).collect()
}

/// `E_k = (I − A_k H_k P_k)(·)^H + Σ_{i≠k} A_k H_k P_i P_i^H H_k^H A_k^H + A_k G_k G_k^H A_k^H`.
pub fn mse_matrix(
    ch: &ChannelSet,
    precoders: &[ComplexMatrix],
    relay: &ComplexMatrix,
    receiver: &ComplexMatrix,
    k: usize,
) -> Result<HpdMatrix> {
    HpdMatrix::symmetrized(mse_matrix_raw(ch, precoders, relay, receiver, k)?)
}

/// The MSE matrix without symmetrization or a definiteness check.
pub fn mse_matrix_raw(
    ch: &ChannelSet,
    precoders: &[ComplexMatrix],
    relay: &ComplexMatrix,
    receiver: &ComplexMatrix,
    k: usize,
) -> Result<ComplexMatrix> {
    check_precoders(ch, precoders)?;
    let n = ch.user_antennas(k);
    if receiver.shape() != (n, 2 * n) {
        return Err(Error::DimensionMismatch(format!(
            "receiver for user {k} is {}x{}, expected {n}x{}",
            receiver.nrows(),
            receiver.ncols(),
            2 * n
        )));
    }
    let h = effective_channel(ch, relay, k)?;
    let ah = receiver * &h;
    let own = ComplexMatrix::identity(n, n) - &ah * &precoders[k];
    let mut e = &own * own.adjoint();
    for (i, p) in precoders.iter().enumerate() {
        if i != k {
            let leak = &ah * p;
            e += &leak * leak.adjoint();
        }
    }
    let g = noise_covariance_matrix(ch, relay, k)?;
    e += receiver * g * receiver.adjoint();
    Ok(e)
}

/// `−log2 det E_k`, halved when the two-slot pre-log factor is enabled.
pub fn rate_from_mse(mse: &HpdMatrix, half_duplex: bool) -> f64 {
    let r = -mse.logdet2();
    if half_duplex {
        0.5 * r
    } else {
        r
    }
}

/// Rate of user `k` for the given design.
pub fn user_rate(
    ch: &ChannelSet,
    precoders: &[ComplexMatrix],
    relay: &ComplexMatrix,
    receiver: &ComplexMatrix,
    k: usize,
    half_duplex: bool,
) -> Result<f64> {
    Ok(rate_from_mse(&mse_matrix(ch, precoders, relay, receiver, k)?, half_duplex))
}

/// `W_k = E_k^{-1}`.
pub fn weight_update(mse: &HpdMatrix) -> Result<HpdMatrix> {
    mse.inverse()
}

/// `Tr(P P^H)`.
pub fn source_power(precoders: &[ComplexMatrix]) -> f64 {
    precoders.iter().map(frobenius_sq).sum()
}

/// `Π = H_rb P P^H H_rb^H`, the covariance of the relay's received signal minus noise.
pub fn relay_input_covariance(ch: &ChannelSet, precoders: &[ComplexMatrix]) -> ComplexMatrix {
    let hp = &ch.h_rb * stack_precoders(precoders);
    &hp * hp.adjoint()
}

/// `Tr(F (Π + I) F^H)`.
pub fn relay_power(relay: &ComplexMatrix, pi: &ComplexMatrix) -> f64 {
    let fp = relay * pi;
    let signal = trace_product(&fp, &relay.adjoint()).map(|t| t.re).unwrap_or(f64::NAN);
    signal + frobenius_sq(relay)
}

/// `Σ_k w_k (Tr(W_k E_k) − log2 det W_k)`.
pub fn wmmse_objective(mse: &[HpdMatrix], weight_matrices: &[HpdMatrix], weights: &[f64]) -> Result<f64> {
    if mse.len() != weight_matrices.len() || mse.len() != weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} MSE matrices, {} weight matrices, {} weights",
            mse.len(),
            weight_matrices.len(),
            weights.len()
        )));
    }
    let mut total = 0.0;
    for ((e, w), &wk) in mse.iter().zip(weight_matrices).zip(weights) {
        let tr = trace_product(w.as_matrix(), e.as_matrix())?.re;
        total += wk * (tr - w.logdet2());
    }
    Ok(total)
}

/// MSE matrices, rates and both objectives for a design.
pub fn mse_report(ch: &ChannelSet, state: &DesignState, weights: &[f64], half_duplex: bool) -> Result<MseReport> {
    check_receivers(ch, &state.receivers, &state.weight_matrices, weights)?;
    let mse = (0..ch.num_users())
        .map(|k| mse_matrix(ch, &state.precoders, &state.relay, &state.receivers[k], k))
        .collect::<Result<Vec<_>>>()?;
    let rates: Vec<f64> = mse.iter().map(|e| rate_from_mse(e, half_duplex)).collect();
    let weighted_sum_rate = rates.iter().zip(weights).map(|(r, w)| r * w).sum();
    let wmmse_objective = wmmse_objective(&mse, &state.weight_matrices, weights)?;
    Ok(MseReport {
        mse,
        rates,
        weighted_sum_rate,
        wmmse_objective,
    })
}

/// Eigenvalues below this fraction of the largest are treated as zero.
const NULL_SPACE_TOL: f64 = 1e-12;

/// `G = U diag(σ) U^H` for a Hermitian PSD `G`, so that `(G + tI)^{-1}` and
/// the power of the resulting update can be evaluated for many `t` after a
/// single factorization.
#[derive(Clone, Debug)]
struct Spectrum {
    values: Vec<f64>,
    vectors: ComplexMatrix,
    cutoff: f64,
}

impl Spectrum {
    fn new(g: &ComplexMatrix) -> Result<Self> {
        if !all_finite(g) {
            return Err(Error::FactorizationFailure("non-finite entries in a multiplier system".into()));
        }
        let eig = SymmetricEigen::new(hermitian_part(g));
        let values: Vec<f64> = eig.eigenvalues.iter().map(|&s| s.max(0.0)).collect();
        let top = values.iter().copied().fold(0.0, f64::max);
        Ok(Spectrum {
            values,
            vectors: eig.eigenvectors,
            cutoff: top * NULL_SPACE_TOL,
        })
    }

    /// `1 / (σ_i + t)`, with 0 on the numerical null space (pseudo-inverse at `t = 0`).
    fn inverse_diag(&self, t: f64) -> Vec<f64> {
        self.values
            .iter()
            .map(|&s| if s + t > self.cutoff { 1.0 / (s + t) } else { 0.0 })
            .collect()
    }

    /// `Σ_i a_i / (σ_i + t)^2`.
    fn power(&self, coefficients: &[f64], t: f64) -> f64 {
        self.inverse_diag(t).iter().zip(coefficients).map(|(d, a)| a * d * d).sum()
    }
}

fn scale_rows(m: &ComplexMatrix, d: &[f64]) -> ComplexMatrix {
    let mut out = m.clone();
    for (i, &di) in d.iter().enumerate() {
        out.row_mut(i).scale_mut(di);
    }
    out
}

/// Solves `(V^H V + t I)^{-1} V^H R` as `V^H (V V^H + t I)^{-1} R`.
///
/// `V` has one row per stream, so the Hermitian system is `Σ N_k × Σ N_k`
/// rather than `M × M`. For `t > 0` both forms agree; at `t = 0` this is the
/// minimum-norm solution even when `V^H V` is singular (`Σ N_k < M`).
#[derive(Clone, Debug)]
struct StreamSpaceSolve {
    v: ComplexMatrix,
    rhs: ComplexMatrix,
    spectrum: Spectrum,
    /// `V^H U`
    vu: ComplexMatrix,
    /// `U^H R`
    c: ComplexMatrix,
}

impl StreamSpaceSolve {
    fn new(v: ComplexMatrix, rhs: ComplexMatrix) -> Result<Self> {
        let spectrum = Spectrum::new(&(&v * v.adjoint()))?;
        let vu = v.adjoint() * &spectrum.vectors;
        let c = spectrum.vectors.adjoint() * &rhs;
        Ok(StreamSpaceSolve { v, rhs, spectrum, vu, c })
    }

    fn solve(&self, multiplier: f64) -> ComplexMatrix {
        &self.vu * scale_rows(&self.c, &self.spectrum.inverse_diag(multiplier))
    }

    /// Coefficients `a_i` with `Tr(X(t) M X(t)^H) = Σ_i a_i / (σ_i + t)^2`
    /// for the solution `X(t)`; `M = I` when `metric` is `None`.
    ///
    /// Follows from `U^H V V^H U = diag(σ)`.
    fn power_coefficients(&self, metric: Option<&ComplexMatrix>) -> Vec<f64> {
        let weighted = match metric {
            Some(m) => &self.c * m,
            None => self.c.clone(),
        };
        (0..self.c.nrows())
            .map(|i| {
                let q: C64 = weighted.row(i).iter().zip(self.c.row(i).iter()).map(|(a, b)| a * b.conj()).sum();
                self.spectrum.values[i] * q.re.max(0.0)
            })
            .collect()
    }

    /// Smallest multiplier whose solution fits `budget`; the search runs on
    /// the scalar power function and `power_of` measures the final solution.
    fn search(
        &self,
        budget: f64,
        coefficients: &[f64],
        power_of: impl Fn(&ComplexMatrix) -> f64,
    ) -> Result<MultiplierSolution<ComplexMatrix>> {
        let sol = bisect_multiplier(budget, |t| Ok(((), self.spectrum.power(coefficients, t))))?;
        let value = self.solve(sol.multiplier);
        Ok(MultiplierSolution {
            multiplier: sol.multiplier,
            power: power_of(&value),
            value,
        })
    }
}

/// `√w_k L_k^H` where `W_k = L_k L_k^H`.
fn weighted_factor(w: &HpdMatrix, weight: f64) -> ComplexMatrix {
    w.cholesky_factor().adjoint() * real(weight.sqrt())
}

fn stack_rows(blocks: &[ComplexMatrix]) -> ComplexMatrix {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = ComplexMatrix::zeros(rows, cols);
    let mut offset = 0;
    for b in blocks {
        out.rows_mut(offset, b.nrows()).copy_from(b);
        offset += b.nrows();
    }
    out
}

/// The source-precoder subproblem with `F`, `A` and `W` fixed:
/// `P_k(λ) = w_k (Σ_j w_j H̃_j^H W_j H̃_j + λI)^{-1} H̃_k^H W_k` with `H̃_j = A_j H_j`.
///
/// With `V_j = √w_j L_j^H H̃_j` the bracket is `V^H V + λI` and the right-hand
/// side is `V^H blkdiag(√w_k L_k^H)`, so it is evaluated in stream space.
#[derive(Clone, Debug)]
pub struct PrecoderSubproblem {
    system: StreamSpaceSolve,
    widths: Vec<usize>,
}

impl PrecoderSubproblem {
    pub fn new(
        ch: &ChannelSet,
        relay: &ComplexMatrix,
        receivers: &[ComplexMatrix],
        weight_matrices: &[HpdMatrix],
        weights: &[f64],
    ) -> Result<Self> {
        check_receivers(ch, receivers, weight_matrices, weights)?;
        let widths: Vec<usize> = (0..ch.num_users()).map(|k| ch.user_antennas(k)).collect();
        let streams: usize = widths.iter().sum();
        let mut rows = Vec::with_capacity(widths.len());
        let mut rhs = ComplexMatrix::zeros(streams, streams);
        let mut offset = 0;
        for k in 0..ch.num_users() {
            let factor = weighted_factor(&weight_matrices[k], weights[k]);
            let filtered = &receivers[k] * effective_channel(ch, relay, k)?;
            rows.push(&factor * filtered);
            rhs.view_mut((offset, offset), (widths[k], widths[k])).copy_from(&factor);
            offset += widths[k];
        }
        Ok(PrecoderSubproblem {
            system: StreamSpaceSolve::new(stack_rows(&rows), rhs)?,
            widths,
        })
    }

    /// Stacked `P(λ)`.
    pub fn solve_stacked(&self, lambda: f64) -> Result<ComplexMatrix> {
        Ok(self.system.solve(lambda))
    }

    pub fn solve(&self, lambda: f64) -> Result<Vec<ComplexMatrix>> {
        Ok(split_precoder(&self.solve_stacked(lambda)?, &self.widths))
    }

    /// Smallest λ ≥ 0 whose solution fits the source budget.
    pub fn search(&self, budget: f64) -> Result<MultiplierSolution<Vec<ComplexMatrix>>> {
        let sol = self.system_search(budget)?;
        Ok(MultiplierSolution {
            multiplier: sol.multiplier,
            value: split_precoder(&sol.value, &self.widths),
            power: sol.power,
        })
    }
}

/// Precoder update that keeps both budgets, with the multipliers that achieve it.
#[derive(Clone, Debug)]
pub struct JointPrecoderSolution {
    pub precoders: Vec<ComplexMatrix>,
    pub source_multiplier: f64,
    pub relay_multiplier: f64,
    pub source_power: f64,
    pub relay_power: f64,
}

impl PrecoderSubproblem {
    /// Minimizes the weighted sum-MSE over `P` subject to the source budget
    /// and to the relay budget evaluated with the current `F`.
    ///
    /// Stationarity gives `P(λ, ν) = (Σ_j w_j H̃_j^H W_j H̃_j + λI + νQ)^{-1} [w_k H̃_k^H W_k]_k`
    /// with `Q = H_rb^H F^H F H_rb`. For each `ν` the source multiplier `λ(ν)`
    /// is found by bisection; the relay power along that path is
    /// non-increasing in `ν` (it is the derivative of a concave dual), so `ν`
    /// is bisected on the outside. `ν = 0` reduces to [`PrecoderSubproblem::search`].
    pub fn search_with_relay_budget(
        &self,
        ch: &ChannelSet,
        relay: &ComplexMatrix,
        source_budget: f64,
        relay_budget: f64,
    ) -> Result<JointPrecoderSolution> {
        check_relay(ch, relay)?;
        let y = relay * &ch.h_rb;
        let q = y.adjoint() * &y;
        let relay_noise = frobenius_sq(relay);
        let v = &self.system.v;
        let gram = v.adjoint() * v;
        let rhs = v.adjoint() * &self.system.rhs;
        let relay_power_of = |p: &ComplexMatrix| frobenius_sq(&(&y * p)) + relay_noise;

        let outer = bisect_multiplier(relay_budget, |nu| {
            let inner = if nu == 0.0 {
                let sol = self.system_search(source_budget)?;
                (sol.value, sol.multiplier)
            } else {
                let spectrum = Spectrum::new(&(&gram + &q * real(nu)))?;
                let b = spectrum.vectors.adjoint() * &rhs;
                let coefficients: Vec<f64> = b.row_iter().map(|row| row.norm_squared()).collect();
                let sol = bisect_multiplier(source_budget, |lambda| Ok(((), spectrum.power(&coefficients, lambda))))?;
                let p = &spectrum.vectors * scale_rows(&b, &spectrum.inverse_diag(sol.multiplier));
                (p, sol.multiplier)
            };
            let power = relay_power_of(&inner.0);
            Ok((inner, power))
        })?;
        let (p, lambda) = outer.value;
        Ok(JointPrecoderSolution {
            source_power: frobenius_sq(&p),
            precoders: split_precoder(&p, &self.widths),
            source_multiplier: lambda,
            relay_multiplier: outer.multiplier,
            relay_power: outer.power,
        })
    }

    fn system_search(&self, budget: f64) -> Result<MultiplierSolution<ComplexMatrix>> {
        self.system
            .search(budget, &self.system.power_coefficients(None), frobenius_sq)
    }
}

/// Closed-form precoder blocks `P_k(λ)` for a fixed multiplier.
pub fn precoder_update(
    ch: &ChannelSet,
    relay: &ComplexMatrix,
    receivers: &[ComplexMatrix],
    weight_matrices: &[HpdMatrix],
    weights: &[f64],
    lambda: f64,
) -> Result<Vec<ComplexMatrix>> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidConfig(format!("multiplier must be non-negative, got {lambda}")));
    }
    PrecoderSubproblem::new(ch, relay, receivers, weight_matrices, weights)?.solve(lambda)
}

/// Precoder blocks satisfying the source budget with complementary slackness.
pub fn precoder_multiplier_search(
    ch: &ChannelSet,
    relay: &ComplexMatrix,
    receivers: &[ComplexMatrix],
    weight_matrices: &[HpdMatrix],
    weights: &[f64],
    source_budget: f64,
) -> Result<MultiplierSolution<Vec<ComplexMatrix>>> {
    PrecoderSubproblem::new(ch, relay, receivers, weight_matrices, weights)?.search(source_budget)
}

/// The relay subproblem with `P`, `A` and `W` fixed:
/// `F(μ) = (Σ_k w_k Θ_k + μI)^{-1} (−Σ_k w_k Δ_k) (Π + I)^{-1}`, where
/// `Θ_k = H_kr^H A_2k^H W_k A_2k H_kr`,
/// `Δ_k = H_kr^H A_2k^H W_k (A_1k H_kb P P^H − P_k^H) H_rb^H` and
/// `Π = H_rb P P^H H_rb^H`.
///
/// Both `Σ w_k Θ_k` and `Σ w_k Δ_k` factor through `V_k = √w_k L_k^H A_2k H_kr`,
/// so the left inverse is taken in stream space as for the precoder.
#[derive(Clone, Debug)]
pub struct RelaySubproblem {
    system: StreamSpaceSolve,
    pi: ComplexMatrix,
}

impl RelaySubproblem {
    pub fn new(
        ch: &ChannelSet,
        precoders: &[ComplexMatrix],
        receivers: &[ComplexMatrix],
        weight_matrices: &[HpdMatrix],
        weights: &[f64],
    ) -> Result<Self> {
        check_precoders(ch, precoders)?;
        check_receivers(ch, receivers, weight_matrices, weights)?;
        let m = ch.antennas();
        let p = stack_precoders(precoders);
        let pph = &p * p.adjoint();
        let pi = &ch.h_rb * &pph * ch.h_rb.adjoint();
        let h_rb_adj = ch.h_rb.adjoint();

        let mut v_rows = Vec::with_capacity(ch.num_users());
        let mut z_rows = Vec::with_capacity(ch.num_users());
        for k in 0..ch.num_users() {
            let n = ch.user_antennas(k);
            let a1 = receivers[k].columns(0, n);
            let a2 = receivers[k].columns(n, n);
            let factor = weighted_factor(&weight_matrices[k], weights[k]);
            v_rows.push(&factor * a2 * &ch.h_kr[k]);
            // w_k Δ_k = V_k^H Z_k
            let inner = a1 * &ch.h_kb[k] * &pph - precoders[k].adjoint();
            z_rows.push(&factor * inner * &h_rb_adj);
        }
        let neg_z = -stack_rows(&z_rows);

        let pi_plus_i = HpdMatrix::symmetrized(&pi + ComplexMatrix::identity(m, m))?;
        // (−Z)(Π + I)^{-1} = (solve(Π + I, −Z^H))^H since Π + I is Hermitian.
        let rhs = pi_plus_i.solve(&neg_z.adjoint())?.adjoint();
        Ok(RelaySubproblem {
            system: StreamSpaceSolve::new(stack_rows(&v_rows), rhs)?,
            pi,
        })
    }

    /// `Π` for the precoder this subproblem was built from.
    pub fn relay_input_covariance(&self) -> &ComplexMatrix {
        &self.pi
    }

    pub fn solve(&self, mu: f64) -> Result<ComplexMatrix> {
        Ok(self.system.solve(mu))
    }

    pub fn search(&self, budget: f64) -> Result<MultiplierSolution<ComplexMatrix>> {
        let metric = &self.pi + ComplexMatrix::identity(self.pi.nrows(), self.pi.nrows());
        let coefficients = self.system.power_coefficients(Some(&metric));
        self.system.search(budget, &coefficients, |f| relay_power(f, &self.pi))
    }
}

/// Closed-form relay beamformer `F(μ)` for a fixed multiplier.
pub fn relay_update(
    ch: &ChannelSet,
    precoders: &[ComplexMatrix],
    receivers: &[ComplexMatrix],
    weight_matrices: &[HpdMatrix],
    weights: &[f64],
    mu: f64,
) -> Result<ComplexMatrix> {
    if !(mu >= 0.0) {
        return Err(Error::InvalidConfig(format!("multiplier must be non-negative, got {mu}")));
    }
    RelaySubproblem::new(ch, precoders, receivers, weight_matrices, weights)?.solve(mu)
}

/// Relay beamformer satisfying the relay budget with complementary slackness.
pub fn relay_multiplier_search(
    ch: &ChannelSet,
    precoders: &[ComplexMatrix],
    receivers: &[ComplexMatrix],
    weight_matrices: &[HpdMatrix],
    weights: &[f64],
    relay_budget: f64,
) -> Result<MultiplierSolution<ComplexMatrix>> {
    RelaySubproblem::new(ch, precoders, receivers, weight_matrices, weights)?.search(relay_budget)
}

/// Finds the smallest multiplier whose update respects `budget`.
///
/// `eval` maps a multiplier to an update and its power, which must be
/// non-increasing in the multiplier. Returns multiplier 0 when the
/// unconstrained update already fits. Otherwise doubles an upper bracket from
/// 1, then shrinks the bracket until the power is within [`SEARCH_TOL`] of the
/// budget (or the bracket cannot shrink further), returning the last feasible
/// point.
///
/// The bracket is shrunk by false position (Illinois variant) on
/// `1/√power`, which is close to linear in the multiplier for the ridge-type
/// updates here; a plain halving step is taken whenever that stalls.
pub fn bisect_multiplier<T>(budget: f64, mut eval: impl FnMut(f64) -> Result<(T, f64)>) -> Result<MultiplierSolution<T>> {
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(Error::InvalidConfig(format!("power budget must be positive, got {budget}")));
    }
    let mut checked = |t: f64| -> Result<(T, f64)> {
        let (value, power) = eval(t)?;
        if !power.is_finite() {
            return Err(Error::BracketFailure(format!("power at multiplier {t:e} is {power}")));
        }
        Ok((value, power))
    };
    let (value, power) = checked(0.0)?;
    if power <= budget {
        return Ok(MultiplierSolution {
            multiplier: 0.0,
            value,
            power,
        });
    }
    let within = |p: f64| (p - budget).abs() <= SEARCH_TOL * budget;
    // Increasing in the multiplier, negative where the budget is exceeded.
    let phi = |p: f64| if p > 0.0 { 1.0 / p.sqrt() - 1.0 / budget.sqrt() } else { f64::INFINITY };

    let mut lo = 0.0;
    let mut phi_lo = phi(power);
    let mut hi = 1.0;
    let mut upper = None;
    for _ in 0..MAX_BRACKET_DOUBLINGS {
        let (value, power) = checked(hi)?;
        if power <= budget {
            upper = Some(MultiplierSolution {
                multiplier: hi,
                value,
                power,
            });
            break;
        }
        lo = hi;
        phi_lo = phi(power);
        hi *= 2.0;
    }
    let mut best = upper.ok_or_else(|| Error::BracketFailure(format!("power still above {budget:e} at multiplier {hi:e}")))?;
    if within(best.power) {
        return Ok(best);
    }
    let mut phi_hi = phi(best.power);

    // Side of the bracket moved by the previous step: -1 low, +1 high.
    let mut last_side = 0;
    let mut width_before = hi - lo;
    for step in 0..MAX_BISECTION_STEPS {
        let halve = step % 3 == 2 && hi - lo > 0.5 * width_before;
        if step % 3 == 2 {
            width_before = hi - lo;
        }
        let secant = if phi_hi.is_finite() { hi - phi_hi * (hi - lo) / (phi_hi - phi_lo) } else { f64::NAN };
        let mid = 0.5 * (lo + hi);
        let t = if !halve && secant > lo && secant < hi { secant } else { mid };
        if t <= lo || t >= hi {
            break;
        }
        let (value, power) = checked(t)?;
        if power > budget {
            lo = t;
            phi_lo = phi(power);
            if last_side == -1 {
                phi_hi *= 0.5;
            }
            last_side = -1;
        } else {
            hi = t;
            phi_hi = phi(power);
            if last_side == 1 {
                phi_lo *= 0.5;
            }
            last_side = 1;
            best = MultiplierSolution {
                multiplier: t,
                value,
                power,
            };
            if within(power) {
                break;
            }
        }
    }
    Ok(best)
}

/// `Σ_k w_k Tr(W_k E_k)` for arbitrary (not necessarily MMSE) receivers.
pub fn weighted_mse_sum(
    ch: &ChannelSet,
    precoders: &[ComplexMatrix],
    relay: &ComplexMatrix,
    receivers: &[ComplexMatrix],
    weight_matrices: &[HpdMatrix],
    weights: &[f64],
) -> Result<f64> {
    check_receivers(ch, receivers, weight_matrices, weights)?;
    let mut total = 0.0;
    for k in 0..ch.num_users() {
        let e = mse_matrix_raw(ch, precoders, relay, &receivers[k], k)?;
        total += weights[k] * trace_product(weight_matrices[k].as_matrix(), &e)?.re;
    }
    Ok(total)
}
