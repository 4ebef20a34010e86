//! Exact multi-photon output statistics of a linear-optical circuit.
//!
//! Convention: `U[(out, in)]` is the amplitude from input mode `in` to output
//! mode `out`, so a single photon entering `j` exits `i` with probability
//! `|U_ij|²`.

mod fock;
mod permanent;
mod sampling;
mod spdc;

pub use fock::{binomial, enumerate_on, enumerate_patterns, FockPattern};
pub use permanent::{permanent, permanent_real, MAX_PERMANENT_SIZE};
pub use sampling::{sample, Branch, SampleEvent};
pub use spdc::{branch_input, spdc_branch_inputs, spdc_distribution, spdc_sample, spdc_tables, spdc_weights, SourceWeights, SPDC_BRANCHES};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::{CMatrix, UnitaryMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistics {
    Indistinguishable,
    Distinguishable,
}

impl std::str::FromStr for Statistics {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "indistinguishable" => Ok(Statistics::Indistinguishable),
            "distinguishable" => Ok(Statistics::Distinguishable),
            other => Err(Error::Config(format!("unknown statistics '{other}'"))),
        }
    }
}

fn check_pair(u: &UnitaryMatrix, input: &FockPattern, output: &FockPattern) -> Result<()> {
    if input.m() != u.m() || output.m() != u.m() {
        return Err(Error::Domain(format!(
            "patterns on {}/{} modes for a {}-mode circuit",
            input.m(),
            output.m(),
            u.m()
        )));
    }
    if input.n() != output.n() {
        return Err(Error::Domain(format!(
            "photon number mismatch: {} in, {} out",
            input.n(),
            output.n()
        )));
    }
    Ok(())
}

/// The `n×n` matrix whose permanent gives the transition amplitude: row `i`
/// of `U` repeated `t_i` times, column `j` repeated `s_j` times.
pub fn scattering_submatrix(u: &UnitaryMatrix, input: &FockPattern, output: &FockPattern) -> Result<CMatrix> {
    check_pair(u, input, output)?;
    Ok(submatrix_by_modes(u.matrix(), &output.modes(), &input.modes()))
}

pub(crate) fn submatrix_by_modes(u: &CMatrix, rows: &[usize], cols: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), cols.len(), |r, c| u[(rows[r], cols[c])])
}

pub fn output_probability(
    u: &UnitaryMatrix,
    input: &FockPattern,
    output: &FockPattern,
    statistics: Statistics,
) -> Result<f64> {
    let m = scattering_submatrix(u, input, output)?;
    if m.nrows() == 0 {
        return Ok(1.0);
    }
    let p = match statistics {
        Statistics::Indistinguishable => {
            permanent(&m)?.norm_sqr() / (input.factorial_product() * output.factorial_product())
        }
        // Photons are labelled, so only identical output slots are overcounted.
        Statistics::Distinguishable => {
            let abs2 = DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)].norm_sqr());
            permanent_real(&abs2)? / output.factorial_product()
        }
    };
    Ok(p.clamp(0.0, 1.0))
}

/// Output probabilities over an enumerated pattern set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTable {
    pub input: FockPattern,
    pub statistics: Statistics,
    pub collision_free: bool,
    pub patterns: Vec<FockPattern>,
    pub probabilities: Vec<f64>,
    /// Sum of `probabilities`; below 1 when collision events are excluded.
    pub total_mass: f64,
}

impl ProbabilityTable {
    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn probability_of(&self, pattern: &FockPattern) -> Option<f64> {
        self.patterns.iter().position(|p| p == pattern).map(|k| self.probabilities[k])
    }
}

pub fn distribution(
    u: &UnitaryMatrix,
    input: &FockPattern,
    statistics: Statistics,
    collision_free: bool,
) -> Result<ProbabilityTable> {
    let all: Vec<usize> = (0..u.m()).collect();
    distribution_on(u, input, statistics, collision_free, &all, Execution::default())
}

/// Like [`distribution`], restricted to patterns on the `outputs` modes.
pub fn distribution_on(
    u: &UnitaryMatrix,
    input: &FockPattern,
    statistics: Statistics,
    collision_free: bool,
    outputs: &[usize],
    exec: Execution,
) -> Result<ProbabilityTable> {
    if input.m() != u.m() {
        return Err(Error::Domain(format!("input on {} modes for a {}-mode circuit", input.m(), u.m())));
    }
    if let Some(&bad) = outputs.iter().find(|&&k| k >= u.m()) {
        return Err(Error::Domain(format!("output mode {bad} out of range")));
    }
    if input.n() > MAX_PERMANENT_SIZE {
        return Err(Error::Capacity { size: input.n(), max: MAX_PERMANENT_SIZE });
    }
    let patterns = enumerate_on(u.m(), outputs, input.n(), collision_free);
    let probabilities = exec
        .map_slice(&patterns, |p| output_probability(u, input, p, statistics))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let total_mass = probabilities.iter().sum();
    Ok(ProbabilityTable {
        input: input.clone(),
        statistics,
        collision_free,
        patterns,
        probabilities,
        total_mass,
    })
}
