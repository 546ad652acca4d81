//! Seeded Monte-Carlo experiments over many channel realizations.
//!
//! An [`ExperimentSpec`] names a sweep (transmit SNR or relay position), a
//! system template, the schemes to compare and how many realizations to
//! average. Realization `r` always uses seed `base_seed + r`, so a row's
//! value does not depend on which thread computed it or in what order.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::driver::{run_scheme, PrecoderConstraints, Scheme, SolverOptions};
use crate::error::{Error, Result};
use crate::{generate_channels, SystemConfig};

pub mod presets;

/// Relay positions accepted by a position sweep.
pub const RELAY_POSITION_RANGE: (f64, f64) = (0.1, 0.9);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Per-iteration traces of the alternating optimization.
    Convergence,
    SnrSweep,
    PositionSweep,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::SnrSweep => "snr_sweep",
            ExperimentKind::PositionSweep => "position_sweep",
        }
    }
}

/// Termination and constraint settings for the iterative scheme.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub precoder_constraints: PrecoderConstraints,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let o = SolverOptions::default();
        SolverSettings {
            tolerance: o.tolerance,
            max_iterations: o.max_iterations,
            precoder_constraints: o.precoder_constraints,
        }
    }
}

impl From<SolverSettings> for SolverOptions {
    fn from(s: SolverSettings) -> Self {
        SolverOptions {
            tolerance: s.tolerance,
            max_iterations: s.max_iterations,
            precoder_constraints: s.precoder_constraints,
        }
    }
}

fn all_schemes() -> Vec<Scheme> {
    Scheme::ALL.to_vec()
}

/// One experiment, usually read from a TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub kind: ExperimentKind,
    /// Template; budgets and relay position are overwritten by the sweep.
    pub system: SystemConfig,
    /// Swept for `snr_sweep`; a single value otherwise.
    #[serde(default)]
    pub snr_db: Vec<f64>,
    /// Swept for `position_sweep`; at most one value otherwise (default: the template's).
    #[serde(default)]
    pub relay_positions: Vec<f64>,
    pub realizations: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "all_schemes")]
    pub schemes: Vec<Scheme>,
    /// Rows CSV path; summary and metadata files are written next to it.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub solver: SolverSettings,
}

/// One point of the sweep: its abscissa and the system it describes.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub value: f64,
    pub config: SystemConfig,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.realizations == 0 {
            return bad("realizations must be at least 1".into());
        }
        if self.schemes.is_empty() {
            return bad("at least one scheme is required".into());
        }
        for (i, s) in self.schemes.iter().enumerate() {
            if self.schemes[..i].contains(s) {
                return bad(format!("scheme {s} listed twice"));
            }
        }
        if !(self.solver.tolerance > 0.0) || self.solver.max_iterations == 0 {
            return bad("solver tolerance must be positive and max_iterations at least 1".into());
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            return bad("SNR values must be finite".into());
        }
        match self.kind {
            ExperimentKind::SnrSweep => {
                if self.snr_db.is_empty() {
                    return bad("snr_sweep needs at least one snr_db value".into());
                }
                if self.relay_positions.len() > 1 {
                    return bad("snr_sweep takes at most one relay position".into());
                }
            }
            ExperimentKind::PositionSweep => {
                if self.snr_db.len() != 1 {
                    return bad("position_sweep needs exactly one snr_db value".into());
                }
                if self.relay_positions.is_empty() {
                    return bad("position_sweep needs at least one relay position".into());
                }
                let (lo, hi) = RELAY_POSITION_RANGE;
                if let Some(p) = self.relay_positions.iter().find(|p| !(**p >= lo && **p <= hi)) {
                    return bad(format!("relay position {p} outside [{lo}, {hi}]"));
                }
            }
            ExperimentKind::Convergence => {
                if self.snr_db.is_empty() {
                    return bad("convergence needs at least one snr_db value".into());
                }
                if self.relay_positions.len() > 1 {
                    return bad("convergence takes at most one relay position".into());
                }
            }
        }
        for point in self.sweep_points() {
            point.config.validate()?;
        }
        Ok(())
    }

    /// The systems to simulate, in sweep order.
    pub fn sweep_points(&self) -> Vec<SweepPoint> {
        match self.kind {
            ExperimentKind::SnrSweep | ExperimentKind::Convergence => {
                let base = match self.relay_positions.first() {
                    Some(&p) => self.system.clone().with_relay_position(p),
                    None => self.system.clone(),
                };
                self.snr_db
                    .iter()
                    .map(|&snr| SweepPoint {
                        value: snr,
                        config: base.clone().with_snr_db(snr),
                    })
                    .collect()
            }
            ExperimentKind::PositionSweep => {
                let base = self.system.clone().with_snr_db(self.snr_db[0]);
                self.relay_positions
                    .iter()
                    .map(|&pos| SweepPoint {
                        value: pos,
                        config: base.clone().with_relay_position(pos),
                    })
                    .collect()
            }
        }
    }

    pub fn seed(&self, realization: usize) -> u64 {
        self.base_seed.wrapping_add(realization as u64)
    }
}

/// Result of one scheme on one realization at one sweep point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment: ExperimentKind,
    pub sweep_value: f64,
    pub scheme: Scheme,
    pub realization: usize,
    pub seed: u64,
    /// Weighted sum-rate in bits per channel use; NaN for failed rows.
    pub sum_rate: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_s: f64,
    pub failed: bool,
    pub error: String,
}

/// Per-iteration record of the iterative scheme (convergence experiments only).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub sweep_value: f64,
    pub realization: usize,
    pub seed: u64,
    pub iteration: usize,
    pub wmmse_objective: f64,
    pub sum_rate: f64,
    pub source_power: f64,
    pub relay_power: f64,
    pub source_multiplier: f64,
    pub relay_multiplier: f64,
}

#[derive(Clone, Debug, Default)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub traces: Vec<TraceRow>,
}

/// Mean and standard error of the sum-rate for one (sweep value, scheme) cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub experiment: ExperimentKind,
    pub sweep_value: f64,
    pub scheme: Scheme,
    pub successes: usize,
    pub failures: usize,
    /// NaN when the cell has no successful realization.
    pub mean_sum_rate: f64,
    pub std_error: f64,
    pub mean_iterations: f64,
    pub converged_fraction: f64,
}

/// How realizations are scheduled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Rayon thread pool; `None` uses the global pool. Falls back to
    /// sequential when the `parallel` feature is off.
    #[default]
    Parallel,
    ParallelWith(usize),
}

impl Execution {
    /// `1` means sequential, `0` the default pool, anything else that many threads.
    pub fn from_threads(threads: usize) -> Self {
        match threads {
            0 => Execution::Parallel,
            1 => Execution::Sequential,
            n => Execution::ParallelWith(n),
        }
    }
}

#[cfg(feature = "parallel")]
fn map_jobs<J, R, F>(jobs: &[J], execution: Execution, f: F) -> Result<Vec<R>>
where
    J: Sync,
    R: Send,
    F: Fn(&J) -> R + Sync + Send,
{
    use rayon::prelude::*;
    match execution {
        Execution::Sequential => Ok(jobs.iter().map(f).collect()),
        Execution::Parallel => Ok(jobs.par_iter().map(f).collect()),
        Execution::ParallelWith(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("cannot build a {n}-thread pool: {e}")))?;
            Ok(pool.install(|| jobs.par_iter().map(f).collect()))
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn map_jobs<J, R, F>(jobs: &[J], _execution: Execution, f: F) -> Result<Vec<R>>
where
    F: Fn(&J) -> R,
{
    Ok(jobs.iter().map(f).collect())
}

/// Runs every (sweep point, realization, scheme) combination.
///
/// Failures are recorded in their row and never abort the sweep. Rows come
/// back ordered by sweep point, then scheme (in spec order), then realization.
pub fn run_experiment(spec: &ExperimentSpec, execution: Execution) -> Result<ExperimentOutput> {
    spec.validate()?;
    let points = spec.sweep_points();
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..spec.realizations).map(move |r| (p, r)))
        .collect();
    let options = SolverOptions::from(spec.solver);

    let per_job = map_jobs(&jobs, execution, |&(p, r)| run_realization(spec, &points[p], r, options))?;

    let mut rows = Vec::with_capacity(jobs.len() * spec.schemes.len());
    let mut traces = Vec::new();
    let mut keyed = Vec::with_capacity(rows.capacity());
    for (&(p, _), (job_rows, job_traces)) in jobs.iter().zip(per_job) {
        for row in job_rows {
            let scheme_index = spec.schemes.iter().position(|s| *s == row.scheme).unwrap_or(usize::MAX);
            keyed.push(((p, scheme_index, row.realization), row));
        }
        traces.extend(job_traces);
    }
    keyed.sort_by_key(|(key, _)| *key);
    rows.extend(keyed.into_iter().map(|(_, row)| row));
    Ok(ExperimentOutput { rows, traces })
}

fn run_realization(
    spec: &ExperimentSpec,
    point: &SweepPoint,
    realization: usize,
    options: SolverOptions,
) -> (Vec<ResultRow>, Vec<TraceRow>) {
    let seed = spec.seed(realization);
    let row = |scheme: Scheme| ResultRow {
        experiment: spec.kind,
        sweep_value: point.value,
        scheme,
        realization,
        seed,
        sum_rate: f64::NAN,
        iterations: 0,
        converged: false,
        wall_time_s: 0.0,
        failed: true,
        error: String::new(),
    };
    let channels = match generate_channels(&point.config, seed) {
        Ok(ch) => ch,
        Err(e) => {
            let rows = spec
                .schemes
                .iter()
                .map(|&s| ResultRow {
                    error: e.to_string(),
                    ..row(s)
                })
                .collect();
            return (rows, Vec::new());
        }
    };

    let mut rows = Vec::with_capacity(spec.schemes.len());
    let mut traces = Vec::new();
    for &scheme in &spec.schemes {
        let start = Instant::now();
        let outcome = run_scheme(&point.config, &channels, scheme, options);
        let wall_time_s = start.elapsed().as_secs_f64();
        match outcome {
            Ok(out) => {
                if spec.kind == ExperimentKind::Convergence {
                    if let Some(trace) = &out.trace {
                        traces.extend(trace.records.iter().map(|r| TraceRow {
                            sweep_value: point.value,
                            realization,
                            seed,
                            iteration: r.iteration,
                            wmmse_objective: r.wmmse_objective,
                            sum_rate: r.weighted_sum_rate,
                            source_power: r.source_power,
                            relay_power: r.relay_power,
                            source_multiplier: r.source_multiplier,
                            relay_multiplier: r.relay_multiplier,
                        }));
                    }
                }
                rows.push(ResultRow {
                    sum_rate: out.weighted_sum_rate,
                    iterations: out.iterations,
                    converged: out.converged,
                    wall_time_s,
                    failed: false,
                    ..row(scheme)
                });
            }
            Err(e) => rows.push(ResultRow {
                wall_time_s,
                error: e.to_string(),
                ..row(scheme)
            }),
        }
    }
    (rows, traces)
}

/// Mean sum-rate and its standard error per (sweep value, scheme), in first-seen order.
///
/// Failed rows are excluded from the statistics and counted separately.
pub fn summarize(rows: &[ResultRow]) -> Result<Vec<SummaryRow>> {
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut order: Vec<(u64, Scheme)> = Vec::new();
    let mut cells: HashMap<(u64, Scheme), Vec<&ResultRow>> = HashMap::new();
    for row in rows {
        let key = (row.sweep_value.to_bits(), row.scheme);
        cells
            .entry(key)
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(row);
    }
    Ok(order
        .into_iter()
        .map(|key| {
            let cell = &cells[&key];
            let ok: Vec<&ResultRow> = cell.iter().copied().filter(|r| !r.failed).collect();
            let rates: Vec<f64> = ok.iter().map(|r| r.sum_rate).collect();
            let (mean, std_error) = mean_and_std_error(&rates);
            let n = ok.len().max(1) as f64;
            SummaryRow {
                experiment: cell[0].experiment,
                sweep_value: cell[0].sweep_value,
                scheme: key.1,
                successes: ok.len(),
                failures: cell.len() - ok.len(),
                mean_sum_rate: mean,
                std_error,
                mean_iterations: ok.iter().map(|r| r.iterations as f64).sum::<f64>() / n,
                converged_fraction: ok.iter().filter(|r| r.converged).count() as f64 / n,
            }
        })
        .collect())
}

/// Sample mean and `s / √n` with the `n − 1` sample variance (0 for one sample).
pub fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    // Welford keeps the mean exact for a constant sample, so its spread is zero.
    let (mut mean, mut m2) = (0.0, 0.0);
    for (i, &v) in values.iter().enumerate() {
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    if n == 1 {
        return (mean, 0.0);
    }
    let var = m2 / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// `x` with 12 significant digits in plain decimal notation.
pub fn format_sig12(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-6..=15).contains(&magnitude) {
        return format!("{x:.11e}");
    }
    let decimals = (11 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub const ROW_HEADER: [&str; 11] = [
    "experiment",
    "sweep_value",
    "scheme",
    "realization",
    "seed",
    "sum_rate",
    "iterations",
    "converged",
    "wall_time_s",
    "failed",
    "error",
];

pub const SUMMARY_HEADER: [&str; 9] = [
    "experiment",
    "sweep_value",
    "scheme",
    "successes",
    "failures",
    "mean_sum_rate",
    "std_error",
    "mean_iterations",
    "converged_fraction",
];

pub const TRACE_HEADER: [&str; 10] = [
    "sweep_value",
    "realization",
    "seed",
    "iteration",
    "wmmse_objective",
    "sum_rate",
    "source_power",
    "relay_power",
    "source_multiplier",
    "relay_multiplier",
];

pub fn write_rows_csv<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ROW_HEADER)?;
    for r in rows {
        w.write_record([
            r.experiment.name().to_string(),
            format_sig12(r.sweep_value),
            r.scheme.name().to_string(),
            r.realization.to_string(),
            r.seed.to_string(),
            format_sig12(r.sum_rate),
            r.iterations.to_string(),
            r.converged.to_string(),
            format_sig12(r.wall_time_s),
            r.failed.to_string(),
            r.error.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(out: W, summary: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for s in summary {
        w.write_record([
            s.experiment.name().to_string(),
            format_sig12(s.sweep_value),
            s.scheme.name().to_string(),
            s.successes.to_string(),
            s.failures.to_string(),
            format_sig12(s.mean_sum_rate),
            format_sig12(s.std_error),
            format_sig12(s.mean_iterations),
            format_sig12(s.converged_fraction),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_traces_csv<W: Write>(out: W, traces: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for t in traces {
        w.write_record([
            format_sig12(t.sweep_value),
            t.realization.to_string(),
            t.seed.to_string(),
            t.iteration.to_string(),
            format_sig12(t.wmmse_objective),
            format_sig12(t.sum_rate),
            format_sig12(t.source_power),
            format_sig12(t.relay_power),
            format_sig12(t.source_multiplier),
            format_sig12(t.relay_multiplier),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Paths of everything [`write_outputs`] produces.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputPaths {
    pub rows: PathBuf,
    pub summary: PathBuf,
    pub traces: Option<PathBuf>,
    pub metadata: PathBuf,
}

impl OutputPaths {
    /// `results.csv` → `results_summary.csv`, `results_trace.csv`, `results_meta.toml`.
    pub fn for_rows(rows: &Path, with_traces: bool) -> Self {
        let stem = rows.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
        let sibling = |suffix: &str| rows.with_file_name(format!("{stem}{suffix}"));
        OutputPaths {
            rows: rows.to_path_buf(),
            summary: sibling("_summary.csv"),
            traces: with_traces.then(|| sibling("_trace.csv")),
            metadata: sibling("_meta.toml"),
        }
    }
}

/// Settings that shape the results without appearing in the rows.
#[derive(Clone, Debug, Serialize)]
struct Metadata<'a> {
    generator: String,
    baseline_source_precoder: &'static str,
    seed_rule: &'static str,
    spec: &'a ExperimentSpec,
}

/// Writes rows, summary, traces (convergence only) and a metadata file.
pub fn write_outputs(spec: &ExperimentSpec, output: &ExperimentOutput, rows_path: &Path) -> Result<(OutputPaths, Vec<SummaryRow>)> {
    let paths = OutputPaths::for_rows(rows_path, spec.kind == ExperimentKind::Convergence);
    if let Some(dir) = rows_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let summary = summarize(&output.rows)?;
    write_rows_csv(std::fs::File::create(&paths.rows)?, &output.rows)?;
    write_summary_csv(std::fs::File::create(&paths.summary)?, &summary)?;
    if let Some(trace_path) = &paths.traces {
        write_traces_csv(std::fs::File::create(trace_path)?, &output.traces)?;
    }
    let meta = Metadata {
        generator: format!("relay-wmmse {}", env!("CARGO_PKG_VERSION")),
        baseline_source_precoder: "scaled_identity",
        seed_rule: "base_seed + realization",
        spec,
    };
    let text = toml::to_string(&meta).map_err(|e| Error::InvalidConfig(format!("cannot serialize metadata: {e}")))?;
    std::fs::write(&paths.metadata, text)?;
    Ok((paths, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(value: f64, scheme: Scheme, realization: usize, rate: f64) -> ResultRow {
        ResultRow {
            experiment: ExperimentKind::SnrSweep,
            sweep_value: value,
            scheme,
            realization,
            seed: realization as u64,
            sum_rate: rate,
            iterations: 3,
            converged: true,
            wall_time_s: 0.0,
            failed: false,
            error: String::new(),
        }
    }

    fn small_spec() -> ExperimentSpec {
        ExperimentSpec {
            name: "small".into(),
            kind: ExperimentKind::SnrSweep,
            system: SystemConfig::symmetric(2, 2, 1, 0.0, 0.5),
            snr_db: vec![5.0],
            relay_positions: vec![],
            realizations: 1,
            base_seed: 42,
            schemes: vec![Scheme::Wmmse],
            output: None,
            solver: SolverSettings::default(),
        }
    }

    #[test]
    fn single_row_summary() {
        let s = summarize(&[row(0.0, Scheme::Wmmse, 0, 3.0)]).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].mean_sum_rate, 3.0);
        assert_eq!(s[0].std_error, 0.0);
    }

    #[test]
    fn two_row_summary() {
        let s = summarize(&[row(0.0, Scheme::Wmmse, 0, 2.0), row(0.0, Scheme::Wmmse, 1, 4.0)]).unwrap();
        assert_eq!(s[0].mean_sum_rate, 3.0);
        assert!((s[0].std_error - 1.0).abs() < 1e-15);
    }

    #[test]
    fn summary_rejects_empty_input() {
        assert!(matches!(summarize(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn failed_rows_are_counted_not_averaged() {
        let mut bad = row(0.0, Scheme::MrcMrt, 1, f64::NAN);
        bad.failed = true;
        let s = summarize(&[row(0.0, Scheme::MrcMrt, 0, 2.0), bad]).unwrap();
        assert_eq!((s[0].successes, s[0].failures), (1, 1));
        assert_eq!(s[0].mean_sum_rate, 2.0);
    }

    #[test]
    fn summary_is_order_invariant() {
        let rows: Vec<ResultRow> = (0..7).map(|r| row(1.0, Scheme::Wmmse, r, (r * r) as f64 * 0.37)).collect();
        let mut reversed = rows.clone();
        reversed.reverse();
        let a = summarize(&rows).unwrap();
        let b = summarize(&reversed).unwrap();
        assert!((a[0].mean_sum_rate - b[0].mean_sum_rate).abs() < 1e-12);
        assert!((a[0].std_error - b[0].std_error).abs() < 1e-12);
    }

    #[test]
    fn sig12_formatting() {
        assert_eq!(format_sig12(3.0), "3");
        assert_eq!(format_sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_sig12(630.957344480193), "630.95734448");
        assert_eq!(format_sig12(-12.5), "-12.5");
        assert_eq!(format_sig12(f64::NAN), "NaN");
        assert_eq!(format_sig12(1e-9), "1.00000000000e-9");
    }

    #[test]
    fn minimal_sweep_yields_one_row() {
        let out = run_experiment(&small_spec(), Execution::Sequential).unwrap();
        assert_eq!(out.rows.len(), 1);
        assert!(!out.rows[0].failed);
        assert_eq!(out.rows[0].seed, 42);
        assert!(out.traces.is_empty());
    }

    #[test]
    fn convergence_kind_records_traces() {
        let spec = ExperimentSpec {
            kind: ExperimentKind::Convergence,
            ..small_spec()
        };
        let out = run_experiment(&spec, Execution::Sequential).unwrap();
        assert_eq!(out.traces.len(), out.rows[0].iterations);
        assert_eq!(out.traces[0].iteration, 1);
    }

    #[test]
    fn spec_validation() {
        let mut spec = small_spec();
        spec.realizations = 0;
        assert!(spec.validate().is_err());

        let mut spec = small_spec();
        spec.kind = ExperimentKind::PositionSweep;
        spec.relay_positions = vec![0.05];
        assert!(spec.validate().is_err());
        spec.relay_positions = vec![0.1, 0.9];
        assert!(spec.validate().is_ok());
        spec.snr_db = vec![0.0, 1.0];
        assert!(spec.validate().is_err());

        let mut spec = small_spec();
        spec.schemes = vec![Scheme::Wmmse, Scheme::Wmmse];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn output_paths_derive_from_rows_path() {
        let p = OutputPaths::for_rows(Path::new("out/snr.csv"), false);
        assert_eq!(p.summary, Path::new("out/snr_summary.csv"));
        assert_eq!(p.metadata, Path::new("out/snr_meta.toml"));
        assert!(p.traces.is_none());
    }

    #[test]
    fn toml_round_trip_of_spec() {
        let spec = small_spec();
        let text = toml::to_string(&spec).unwrap();
        assert_eq!(ExperimentSpec::from_toml(&text).unwrap(), spec);
    }
}
