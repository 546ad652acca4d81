//! The alternating optimization loop and the one-shot baseline runs.

use serde::{Deserialize, Serialize};

use crate::baselines::{algorithm1_init, mrc_mrt, mrc_rzf};
use crate::error::{Error, Result, Step};
use crate::numerics::HpdMatrix;
use crate::wmmse::{
    mmse_receivers, mse_matrix, rate_from_mse, source_power, wmmse_objective, DesignState, MseReport, PrecoderSubproblem,
    RelaySubproblem,
};
use crate::{ChannelSet, SystemConfig};

/// Budgets enforced by the precoder step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecoderConstraints {
    /// Source and relay budgets, the relay budget evaluated with the current
    /// `F`. Every block update is then optimal over the feasible set, so the
    /// objective cannot increase between iterations.
    #[default]
    SourceAndRelay,
    /// Source budget only; the relay budget is left to the following relay
    /// update. The objective may rise when that update has to pull the relay
    /// power back under budget.
    SourceOnly,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Stop once the relative objective decrease between two consecutive
    /// iterations falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub precoder_constraints: PrecoderConstraints,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-6,
            max_iterations: 500,
            precoder_constraints: PrecoderConstraints::default(),
        }
    }
}

/// State of the objective and constraints at the end of one full iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub wmmse_objective: f64,
    pub weighted_sum_rate: f64,
    pub source_power: f64,
    pub relay_power: f64,
    /// Multiplier of the source budget in this iteration's precoder update.
    pub source_multiplier: f64,
    /// Multiplier of the relay budget in this iteration's relay update.
    pub relay_multiplier: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    /// Largest increase of the objective between consecutive iterations (0 if none).
    pub fn max_objective_increase(&self) -> f64 {
        self.records
            .windows(2)
            .map(|w| w[1].wmmse_objective - w[0].wmmse_objective)
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct SolverResult {
    pub state: DesignState,
    pub report: MseReport,
    pub trace: IterationTrace,
    pub iterations_used: usize,
    pub converged: bool,
}

/// Runs the alternating optimization from [`algorithm1_init`].
///
/// Each iteration updates, in order, the precoder (under the budgets chosen
/// by [`SolverOptions::precoder_constraints`]), the relay beamformer, the
/// receive filters and the weight matrices. The run stops once the relative
/// objective decrease between consecutive iterations drops below the
/// tolerance, which can first happen at iteration 2.
pub fn run_algorithm1(config: &SystemConfig, ch: &ChannelSet, options: SolverOptions) -> Result<SolverResult> {
    if !(options.tolerance > 0.0) || options.max_iterations == 0 {
        return Err(Error::InvalidConfig(format!(
            "tolerance must be positive and max_iterations at least 1, got {} and {}",
            options.tolerance, options.max_iterations
        )));
    }
    let weights = config.weight_vector();
    let mut state = algorithm1_init(config, ch)?;
    let mut trace = IterationTrace::default();
    let mut converged = false;
    let mut report = None;

    for t in 1..=options.max_iterations {
        let sub = PrecoderSubproblem::new(ch, &state.relay, &state.receivers, &state.weight_matrices, &weights)
            .map_err(|e| e.at(t, Step::Precoder))?;
        let (precoders, source_multiplier) = match options.precoder_constraints {
            PrecoderConstraints::SourceOnly => {
                let sol = sub.search(config.source_power).map_err(|e| e.at(t, Step::Precoder))?;
                (sol.value, sol.multiplier)
            }
            PrecoderConstraints::SourceAndRelay => {
                let sol = sub
                    .search_with_relay_budget(ch, &state.relay, config.source_power, config.relay_power)
                    .map_err(|e| e.at(t, Step::Precoder))?;
                (sol.precoders, sol.source_multiplier)
            }
        };
        state.precoders = precoders;

        let relay_sub = RelaySubproblem::new(ch, &state.precoders, &state.receivers, &state.weight_matrices, &weights)
            .map_err(|e| e.at(t, Step::Relay))?;
        let relay = relay_sub.search(config.relay_power).map_err(|e| e.at(t, Step::Relay))?;
        state.relay = relay.value;

        state.receivers = mmse_receivers(ch, &state.precoders, &state.relay).map_err(|e| e.at(t, Step::Receiver))?;

        let mse = (0..ch.num_users())
            .map(|k| mse_matrix(ch, &state.precoders, &state.relay, &state.receivers[k], k))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.at(t, Step::Weight))?;
        state.weight_matrices = mse
            .iter()
            .map(HpdMatrix::inverse)
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.at(t, Step::Weight))?;

        let current = assemble_report(mse, &state.weight_matrices, &weights, config.half_duplex_rate_factor)
            .map_err(|e| e.at(t, Step::Weight))?;
        trace.records.push(IterationRecord {
            iteration: t,
            wmmse_objective: current.wmmse_objective,
            weighted_sum_rate: current.weighted_sum_rate,
            source_power: source_power(&state.precoders),
            relay_power: relay.power,
            source_multiplier,
            relay_multiplier: relay.multiplier,
        });

        let records = &trace.records;
        if records.len() >= 2 {
            let prev = records[records.len() - 2].wmmse_objective;
            let decrease = prev - current.wmmse_objective;
            let scale = if prev != 0.0 { prev.abs() } else { 1.0 };
            if decrease < options.tolerance * scale {
                converged = true;
            }
        }
        report = Some(current);
        if converged {
            break;
        }
    }

    let iterations_used = trace.len();
    Ok(SolverResult {
        state,
        report: report.expect("at least one iteration runs"),
        trace,
        iterations_used,
        converged,
    })
}

fn assemble_report(mse: Vec<HpdMatrix>, weight_matrices: &[HpdMatrix], weights: &[f64], half_duplex: bool) -> Result<MseReport> {
    let rates: Vec<f64> = mse.iter().map(|e| rate_from_mse(e, half_duplex)).collect();
    let weighted_sum_rate = rates.iter().zip(weights).map(|(r, w)| r * w).sum();
    let wmmse_objective = wmmse_objective(&mse, weight_matrices, weights)?;
    Ok(MseReport {
        mse,
        rates,
        weighted_sum_rate,
        wmmse_objective,
    })
}

/// Transmission strategies compared by the experiment harness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Jointly optimized precoder and relay beamformer.
    Wmmse,
    MrcMrt,
    MrcRzf,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Wmmse, Scheme::MrcMrt, Scheme::MrcRzf];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Wmmse => "wmmse",
            Scheme::MrcMrt => "mrc_mrt",
            Scheme::MrcRzf => "mrc_rzf",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|scheme| scheme.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown scheme {s:?}")))
    }
}

/// Closed-form relay designs evaluated with a fixed source precoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Baseline {
    MrcMrt,
    MrcRzf,
}

#[derive(Clone, Debug)]
pub struct BaselineResult {
    pub state: DesignState,
    pub report: MseReport,
}

/// Evaluates a closed-form relay design on the scaled-identity source precoder.
///
/// Receivers are the MMSE filters for the resulting `(P, F)` and the weight
/// matrices are set to `E_k^{-1}`.
pub fn run_baseline(config: &SystemConfig, ch: &ChannelSet, baseline: Baseline) -> Result<BaselineResult> {
    let init = algorithm1_init(config, ch)?;
    let precoders = init.precoders;
    let relay = match baseline {
        Baseline::MrcMrt => mrc_mrt(ch, &precoders, config.relay_power)?,
        Baseline::MrcRzf => mrc_rzf(ch, &precoders, config.relay_power, config.antennas)?,
    };
    let receivers = mmse_receivers(ch, &precoders, &relay)?;
    let mse = (0..ch.num_users())
        .map(|k| mse_matrix(ch, &precoders, &relay, &receivers[k], k))
        .collect::<Result<Vec<_>>>()?;
    let weight_matrices = mse.iter().map(HpdMatrix::inverse).collect::<Result<Vec<_>>>()?;
    let report = assemble_report(mse, &weight_matrices, &config.weight_vector(), config.half_duplex_rate_factor)?;
    Ok(BaselineResult {
        state: DesignState {
            precoders,
            relay,
            receivers,
            weight_matrices,
        },
        report,
    })
}

/// Outcome of running one scheme on one channel realization.
#[derive(Clone, Debug)]
pub struct SchemeOutcome {
    pub weighted_sum_rate: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Option<IterationTrace>,
}

pub fn run_scheme(config: &SystemConfig, ch: &ChannelSet, scheme: Scheme, options: SolverOptions) -> Result<SchemeOutcome> {
    match scheme {
        Scheme::Wmmse => {
            let res = run_algorithm1(config, ch, options)?;
            Ok(SchemeOutcome {
                weighted_sum_rate: res.report.weighted_sum_rate,
                iterations: res.iterations_used,
                converged: res.converged,
                trace: Some(res.trace),
            })
        }
        Scheme::MrcMrt | Scheme::MrcRzf => {
            let baseline = if scheme == Scheme::MrcMrt {
                Baseline::MrcMrt
            } else {
                Baseline::MrcRzf
            };
            let res = run_baseline(config, ch, baseline)?;
            Ok(SchemeOutcome {
                weighted_sum_rate: res.report.weighted_sum_rate,
                iterations: 0,
                converged: true,
                trace: None,
            })
        }
    }
}
