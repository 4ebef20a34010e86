//! Post-selected four-photon state of two SPDC pair sources.
//!
//! The four source modes, in the order `(4, 1, 2, 3)` of the occupation
//! kets, are routed to four designated input waveguides. After four-fold
//! post-selection the input is the mixture
//! `α|1111⟩⟨1111| + β|2002⟩⟨2002| + γ|0220⟩⟨0220|` with
//! `(α, β, γ) = (R, R², 1)`, `R` being the ratio of the two pair rates.

use serde::{Deserialize, Serialize};

use super::sampling::Inverter;
use super::{distribution_on, Branch, FockPattern, ProbabilityTable, SampleEvent, Statistics};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::UnitaryMatrix;
use crate::rng::{mix64, rng_from_seed};

pub const SPDC_BRANCHES: [Branch; 3] = [Branch::B1111, Branch::B2002, Branch::B0220];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceWeights {
    pub r: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// `(α, β, γ) / (α + β + γ)`, in branch order `1111, 2002, 0220`.
    pub normalized: [f64; 3],
}

impl SourceWeights {
    pub fn from_ratio(r: f64) -> Result<Self> {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::Domain(format!("pair-rate ratio must be finite and >= 0, got {r}")));
        }
        let (alpha, beta, gamma) = (r, r * r, 1.0);
        let sum = alpha + beta + gamma;
        Ok(Self { r, alpha, beta, gamma, normalized: [alpha / sum, beta / sum, gamma / sum] })
    }

    /// Arbitrary branch weights, for runs that pin the mixture directly.
    pub fn explicit(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let sum = alpha + beta + gamma;
        if [alpha, beta, gamma].iter().any(|w| !(*w >= 0.0)) || !(sum > 0.0) {
            return Err(Error::Domain("branch weights must be >= 0 with a positive sum".into()));
        }
        Ok(Self { r: f64::NAN, alpha, beta, gamma, normalized: [alpha / sum, beta / sum, gamma / sum] })
    }

    pub fn weight(&self, branch: Branch) -> f64 {
        match branch {
            Branch::B1111 => self.normalized[0],
            Branch::B2002 => self.normalized[1],
            Branch::B0220 => self.normalized[2],
            Branch::Fixed => 0.0,
        }
    }
}

pub fn spdc_weights(r: f64) -> Result<SourceWeights> {
    SourceWeights::from_ratio(r)
}

/// Input patterns of the three branches for source modes mapped to `inputs`.
pub fn spdc_branch_inputs(m: usize, inputs: &[usize]) -> Result<[FockPattern; 3]> {
    if inputs.len() != 4 {
        return Err(Error::Config(format!(
            "the four-photon source needs exactly 4 designated inputs, got {}",
            inputs.len()
        )));
    }
    let mut sorted = inputs.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != 4 {
        return Err(Error::Config("designated inputs must be distinct".into()));
    }
    let [a, b, c, d] = [inputs[0], inputs[1], inputs[2], inputs[3]];
    Ok([
        FockPattern::from_modes(m, &[a, b, c, d])?,
        FockPattern::from_modes(m, &[a, a, d, d])?,
        FockPattern::from_modes(m, &[b, b, c, c])?,
    ])
}

pub fn branch_input(m: usize, inputs: &[usize], branch: Branch) -> Result<FockPattern> {
    let [p1111, p2002, p0220] = spdc_branch_inputs(m, inputs)?;
    match branch {
        Branch::B1111 => Ok(p1111),
        Branch::B2002 => Ok(p2002),
        Branch::B0220 => Ok(p0220),
        Branch::Fixed => Err(Error::Domain("the fixed branch has no SPDC input".into())),
    }
}

/// Collision-free output tables of the three branches.
pub fn spdc_tables(
    u: &UnitaryMatrix,
    inputs: &[usize],
    outputs: &[usize],
    statistics: Statistics,
    exec: Execution,
) -> Result<[ProbabilityTable; 3]> {
    let [p0, p1, p2] = spdc_branch_inputs(u.m(), inputs)?;
    Ok([
        distribution_on(u, &p0, statistics, true, outputs, exec)?,
        distribution_on(u, &p1, statistics, true, outputs, exec)?,
        distribution_on(u, &p2, statistics, true, outputs, exec)?,
    ])
}

/// Weighted mixture of branch tables, pattern by pattern.
pub fn spdc_distribution(weights: &SourceWeights, tables: &[ProbabilityTable; 3]) -> Result<ProbabilityTable> {
    let patterns = &tables[0].patterns;
    if tables.iter().any(|t| &t.patterns != patterns) {
        return Err(Error::Domain("branch tables are over different pattern sets".into()));
    }
    let probabilities: Vec<f64> = (0..patterns.len())
        .map(|k| (0..3).map(|b| weights.normalized[b] * tables[b].probabilities[k]).sum())
        .collect();
    Ok(ProbabilityTable {
        input: tables[0].input.clone(),
        statistics: tables[0].statistics,
        collision_free: true,
        patterns: patterns.clone(),
        total_mass: probabilities.iter().sum(),
        probabilities,
    })
}

/// Per event: draw the branch from the normalised weights, then a
/// collision-free output from that branch's table.
///
/// Output draws use the stream of `rng_seed` exactly as [`super::sample`]
/// does, and branch draws an independent stream, so a single-branch mixture
/// reproduces fixed-input sampling event for event.
pub fn spdc_sample(
    tables: &[ProbabilityTable; 3],
    weights: &SourceWeights,
    rng_seed: u64,
    count: usize,
) -> Result<Vec<SampleEvent>> {
    let branch_inv = Inverter::new(&weights.normalized)?;
    let inverters: Vec<Option<Inverter>> = tables
        .iter()
        .zip(weights.normalized)
        .map(|(t, w)| if w > 0.0 { Inverter::new(&t.probabilities).map(Some) } else { Ok(None) })
        .collect::<Result<_>>()?;
    let mut out_rng = rng_from_seed(rng_seed);
    let mut branch_rng = rng_from_seed(mix64(rng_seed ^ 0x6272_616e_6368_0000));
    let distinguishable = tables[0].statistics == Statistics::Distinguishable;
    Ok((0..count)
        .map(|index| {
            let b = branch_inv.draw(&mut branch_rng);
            let inv = inverters[b].as_ref().expect("drawn branches have positive weight");
            SampleEvent {
                index,
                branch: SPDC_BRANCHES[b],
                output: tables[b].patterns[inv.draw(&mut out_rng)].modes(),
                distinguishable,
            }
        })
        .collect())
}
