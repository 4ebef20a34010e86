//! Event-by-event likelihood counters for sampled output streams.
//!
//! * Uniform test: `P = Π_i Σ_j |U_ij|²` over detected outputs `i` and
//!   designated inputs `j`; the counter `W` steps `+1` when `P ≥ (n/m)ⁿ`.
//! * Distinguishable test: `L = q/d` with `q` and `d` the indistinguishable
//!   and distinguishable probabilities of the event; the counter `C` steps
//!   `+1` when `L ≥ 1`.
//!
//! Counters start at zero, so each trace entry is the running value after
//! one accepted event. Positive slopes favour genuine boson sampling.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::haarstats::{haar_unitary, Histogram};
use crate::interference::{branch_input, permanent, permanent_real, Branch, FockPattern, SampleEvent, SourceWeights, SPDC_BRANCHES};
use crate::linalg::{CMatrix, UnitaryMatrix};
use crate::rng::member_seed;
use crate::stats::{binomial_half_lower_tail, mean, ols_slope, std_dev};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    Uniform,
    Distinguishable,
}

impl std::str::FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(TestKind::Uniform),
            "distinguishable" => Ok(TestKind::Distinguishable),
            other => Err(Error::Config(format!("unknown test '{other}'"))),
        }
    }
}

/// How mixed-source events are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchScoring {
    /// Use the input of the branch recorded with each event.
    Recorded,
    /// Weight `q` and `d` over all branches, as an experiment must.
    Marginalized,
}

/// The input state the stream was produced from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InputModel {
    /// One photon in each listed mode.
    Fixed(Vec<usize>),
    /// Four-photon SPDC mixture on four designated inputs.
    Spdc { inputs: Vec<usize>, weights: SourceWeights, scoring: BranchScoring },
}

impl InputModel {
    pub fn modes(&self) -> &[usize] {
        match self {
            InputModel::Fixed(m) => m,
            InputModel::Spdc { inputs, .. } => inputs,
        }
    }

    pub fn photons(&self) -> usize {
        self.modes().len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationTrace {
    pub test_kind: TestKind,
    /// Counter after each accepted event (the initial zero is implicit).
    pub counter_values: Vec<i64>,
    /// Least-squares slope of the counter against the event number.
    pub slope: f64,
    /// `slope / |reference slope|` when a reference was supplied.
    pub normalized_slope: Option<f64>,
    /// Events with the wrong photon count or outside the circuit.
    pub rejected: usize,
    /// Events the model gives zero probability to.
    pub skipped: usize,
}

impl ValidationTrace {
    fn from_steps(test_kind: TestKind, steps: &[i64], rejected: usize, skipped: usize) -> Result<Self> {
        let mut acc = 0i64;
        let counter_values: Vec<i64> = steps
            .iter()
            .map(|s| {
                acc += s;
                acc
            })
            .collect();
        let ys: Vec<f64> = counter_values.iter().map(|&c| c as f64).collect();
        let slope = ols_slope(&ys).map_err(|_| {
            Error::Domain(format!("{} accepted events; a slope needs at least 2", counter_values.len()))
        })?;
        Ok(Self { test_kind, counter_values, slope, normalized_slope: None, rejected, skipped })
    }

    pub fn with_reference(mut self, reference_slope: f64) -> Result<Self> {
        if !(reference_slope.abs() > 0.0) {
            return Err(Error::Domain("reference slope must be non-zero".into()));
        }
        self.normalized_slope = Some(self.slope / reference_slope.abs());
        Ok(self)
    }

    pub fn plus_steps(&self) -> u64 {
        let mut prev = 0;
        self.counter_values
            .iter()
            .filter(|&&c| {
                let up = c > prev;
                prev = c;
                up
            })
            .count() as u64
    }

    /// One-sided binomial p-value of the step signs under a fair-coin null:
    /// small when the counter rises (`positive`) or falls consistently.
    pub fn sign_p_value(&self, positive: bool) -> Result<f64> {
        let n = self.counter_values.len() as u64;
        let k = self.plus_steps();
        binomial_half_lower_tail(if positive { n - k } else { k }, n)
    }
}

fn check_event(u: &UnitaryMatrix, ev: &SampleEvent, n: usize) -> bool {
    ev.output.len() == n && ev.output.iter().all(|&i| i < u.m())
}

/// `(q, d)`: indistinguishable and distinguishable probabilities of
/// detecting `output` from `input`.
fn q_and_d(u: &UnitaryMatrix, input: &FockPattern, output_modes: &[usize]) -> Result<(f64, f64)> {
    let output = FockPattern::from_modes(u.m(), output_modes)?;
    let cols = input.modes();
    let sub = CMatrix::from_fn(output_modes.len(), cols.len(), |r, c| u.amp(output_modes[r], cols[c]));
    let q = permanent(&sub)?.norm_sqr() / (input.factorial_product() * output.factorial_product());
    let abs2 = DMatrix::from_fn(sub.nrows(), sub.ncols(), |r, c| sub[(r, c)].norm_sqr());
    let d = permanent_real(&abs2)? / output.factorial_product();
    Ok((q, d))
}

/// Uniform-sampler test over `m` effective modes.
pub fn run_uniform_test(events: &[SampleEvent], u: &UnitaryMatrix, inputs: &[usize], n: usize, m: usize) -> Result<ValidationTrace> {
    run_uniform_test_with(events, u, inputs, n, m, Execution::default())
}

pub fn run_uniform_test_with(
    events: &[SampleEvent],
    u: &UnitaryMatrix,
    inputs: &[usize],
    n: usize,
    m: usize,
    exec: Execution,
) -> Result<ValidationTrace> {
    if let Some(&bad) = inputs.iter().find(|&&j| j >= u.m()) {
        return Err(Error::Domain(format!("input mode {bad} outside the circuit")));
    }
    if n == 0 || m == 0 {
        return Err(Error::Domain("need n >= 1 photons and m >= 1 modes".into()));
    }
    let threshold = (n as f64 / m as f64).powi(n as i32);
    let steps: Vec<Option<i64>> = exec.map_slice(events, |ev| {
        if !check_event(u, ev, n) {
            return None;
        }
        let p: f64 = ev.output.iter().map(|&i| inputs.iter().map(|&j| u.amp(i, j).norm_sqr()).sum::<f64>()).product();
        Some(if p >= threshold { 1 } else { -1 })
    });
    let rejected = steps.iter().filter(|s| s.is_none()).count();
    let accepted: Vec<i64> = steps.into_iter().flatten().collect();
    ValidationTrace::from_steps(TestKind::Uniform, &accepted, rejected, 0)
}

/// Distinguishable-particle test.
pub fn run_distinguishable_test(events: &[SampleEvent], u: &UnitaryMatrix, input: &InputModel) -> Result<ValidationTrace> {
    run_distinguishable_test_with(events, u, input, Execution::default())
}

enum Step {
    Counted(i64),
    Rejected,
    Skipped,
}

pub fn run_distinguishable_test_with(
    events: &[SampleEvent],
    u: &UnitaryMatrix,
    input: &InputModel,
    exec: Execution,
) -> Result<ValidationTrace> {
    let m = u.m();
    let n = input.photons();
    let fixed = match input {
        InputModel::Fixed(modes) => Some(FockPattern::from_modes(m, modes)?),
        InputModel::Spdc { inputs, .. } => {
            branch_input(m, inputs, Branch::B1111)?;
            None
        }
    };
    let steps: Vec<Result<Step>> = exec.map_slice(events, |ev| {
        if !check_event(u, ev, n) {
            return Ok(Step::Rejected);
        }
        let (q, d) = match input {
            InputModel::Fixed(_) => q_and_d(u, fixed.as_ref().expect("fixed pattern built above"), &ev.output)?,
            InputModel::Spdc { inputs, scoring: BranchScoring::Recorded, .. } => {
                if ev.branch == Branch::Fixed {
                    return Ok(Step::Rejected);
                }
                q_and_d(u, &branch_input(m, inputs, ev.branch)?, &ev.output)?
            }
            InputModel::Spdc { inputs, weights, .. } => {
                let mut acc = (0.0, 0.0);
                for b in SPDC_BRANCHES {
                    let w = weights.weight(b);
                    if w > 0.0 {
                        let (q, d) = q_and_d(u, &branch_input(m, inputs, b)?, &ev.output)?;
                        acc = (acc.0 + w * q, acc.1 + w * d);
                    }
                }
                acc
            }
        };
        if !(d > 0.0) {
            return Ok(Step::Skipped);
        }
        Ok(Step::Counted(if q / d >= 1.0 { 1 } else { -1 }))
    });
    let (mut counted, mut rejected, mut skipped) = (Vec::with_capacity(events.len()), 0, 0);
    for s in steps {
        match s? {
            Step::Counted(v) => counted.push(v),
            Step::Rejected => rejected += 1,
            Step::Skipped => skipped += 1,
        }
    }
    ValidationTrace::from_steps(TestKind::Distinguishable, &counted, rejected, skipped)
}

/// A configured test that can score the same stream against any circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Validator {
    pub kind: TestKind,
    pub input: InputModel,
    /// Effective mode count in the uniform-test threshold.
    pub modes: usize,
}

impl Validator {
    pub fn score(&self, events: &[SampleEvent], u: &UnitaryMatrix, exec: Execution) -> Result<ValidationTrace> {
        match self.kind {
            TestKind::Uniform => run_uniform_test_with(events, u, self.input.modes(), self.input.photons(), self.modes, exec),
            TestKind::Distinguishable => run_distinguishable_test_with(events, u, &self.input, exec),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WrongUnitaryReport {
    pub true_slope: f64,
    /// Slopes of the stream re-scored against each ensemble member.
    pub ensemble_slopes: Vec<f64>,
    /// Normalisation applied to all slopes (`|reference slope|`, or 1).
    pub scale: f64,
    pub histogram: Histogram,
    /// Mean and standard deviation of the normalised ensemble slopes.
    pub mean: f64,
    pub std_dev: f64,
    /// `(true − mean)/std_dev` on normalised slopes.
    pub z_score: f64,
}

pub const SLOPE_BINS: usize = 25;

/// Re-scores `events` against `ensemble_size` Haar-random unitaries of the
/// same size as `true_u` and locates the true-circuit slope in that
/// ensemble. All slopes are divided by `|reference_slope|` when given.
pub fn wrong_unitary_slope_histogram(
    events: &[SampleEvent],
    validator: &Validator,
    true_u: &UnitaryMatrix,
    ensemble_size: usize,
    rng_seed: u64,
    reference_slope: Option<f64>,
    exec: Execution,
) -> Result<WrongUnitaryReport> {
    let members: Vec<Result<UnitaryMatrix>> = exec.map_range(ensemble_size, |k| haar_unitary(true_u.m(), member_seed(rng_seed, k as u64)));
    let members = members.into_iter().collect::<Result<Vec<_>>>()?;
    slope_report(events, validator, true_u, &members, reference_slope, exec)
}

/// As [`wrong_unitary_slope_histogram`] with an explicit ensemble.
pub fn slope_report(
    events: &[SampleEvent],
    validator: &Validator,
    true_u: &UnitaryMatrix,
    ensemble: &[UnitaryMatrix],
    reference_slope: Option<f64>,
    exec: Execution,
) -> Result<WrongUnitaryReport> {
    if ensemble.len() < 2 {
        return Err(Error::Domain(format!("a z-score needs at least 2 ensemble members, got {}", ensemble.len())));
    }
    let scale = match reference_slope {
        Some(r) if r.abs() > 0.0 => r.abs(),
        Some(_) => return Err(Error::Domain("reference slope must be non-zero".into())),
        None => 1.0,
    };
    let true_slope = validator.score(events, true_u, exec)?.slope;
    let ensemble_slopes = exec
        .map_slice(ensemble, |w| validator.score(events, w, Execution::Sequential).map(|t| t.slope))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let normalized: Vec<f64> = ensemble_slopes.iter().map(|s| s / scale).collect();
    let (mu, sd) = (mean(&normalized), std_dev(&normalized));
    if !(sd > 0.0) {
        return Err(Error::Domain("ensemble slopes have zero spread; z-score undefined".into()));
    }
    let lo = normalized.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = normalized.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let histogram = Histogram::from_samples(&normalized, Histogram::uniform_edges(lo, hi, SLOPE_BINS))?;
    Ok(WrongUnitaryReport {
        true_slope,
        ensemble_slopes,
        scale,
        histogram,
        mean: mu,
        std_dev: sd,
        z_score: (true_slope / scale - mu) / sd,
    })
}
