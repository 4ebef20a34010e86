//! Exact inversion sampling from probability tables.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ProbabilityTable, Statistics};
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, StreamRng};

/// Which input state produced an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    #[serde(rename = "fixed")]
    Fixed,
    #[serde(rename = "1111")]
    B1111,
    #[serde(rename = "2002")]
    B2002,
    #[serde(rename = "0220")]
    B0220,
}

impl Branch {
    pub fn label(self) -> &'static str {
        match self {
            Branch::Fixed => "fixed",
            Branch::B1111 => "1111",
            Branch::B2002 => "2002",
            Branch::B0220 => "0220",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleEvent {
    pub index: usize,
    pub branch: Branch,
    /// Detected output modes, sorted, repeated for bunched detections.
    pub output: Vec<usize>,
    pub distinguishable: bool,
}

/// Cumulative sums over a table, for `O(log K)` inversion.
pub(crate) struct Inverter {
    cumulative: Vec<f64>,
}

impl Inverter {
    pub(crate) fn new(weights: &[f64]) -> Result<Self> {
        let mut acc = 0.0;
        let cumulative: Vec<f64> = weights
            .iter()
            .map(|&w| {
                acc += w.max(0.0);
                acc
            })
            .collect();
        if !(acc > 0.0) {
            return Err(Error::Domain("cannot sample from a table with zero total mass".into()));
        }
        Ok(Self { cumulative })
    }

    pub(crate) fn draw(&self, rng: &mut StreamRng) -> usize {
        let total = *self.cumulative.last().expect("non-empty");
        let u = rng.random::<f64>() * total;
        let k = self.cumulative.partition_point(|&c| c <= u);
        if k < self.cumulative.len() {
            return k;
        }
        // u rounded up to the total: fall back to the last positive entry
        self.cumulative.partition_point(|&c| c < total)
    }
}

/// `count` i.i.d. draws from `table` (renormalised by its total mass).
pub fn sample(table: &ProbabilityTable, rng_seed: u64, count: usize) -> Result<Vec<SampleEvent>> {
    let inv = Inverter::new(&table.probabilities)?;
    let mut rng = rng_from_seed(rng_seed);
    let distinguishable = table.statistics == Statistics::Distinguishable;
    Ok((0..count)
        .map(|index| SampleEvent {
            index,
            branch: Branch::Fixed,
            output: table.patterns[inv.draw(&mut rng)].modes(),
            distinguishable,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interference::FockPattern;

    fn table(probs: &[f64]) -> ProbabilityTable {
        let patterns: Vec<FockPattern> =
            (0..probs.len()).map(|k| FockPattern::from_modes(probs.len(), &[k]).unwrap()).collect();
        ProbabilityTable {
            input: FockPattern::from_modes(probs.len(), &[0]).unwrap(),
            statistics: Statistics::Indistinguishable,
            collision_free: true,
            patterns,
            probabilities: probs.to_vec(),
            total_mass: probs.iter().sum(),
        }
    }

    #[test]
    fn degenerate_table() {
        let ev = sample(&table(&[0.0, 1.0, 0.0]), 5, 1000).unwrap();
        assert!(ev.iter().all(|e| e.output == vec![1]));
    }

    #[test]
    fn uniform_frequencies() {
        let ev = sample(&table(&[0.25; 4]), 17, 100_000).unwrap();
        let mut counts = [0usize; 4];
        for e in &ev {
            counts[e.output[0]] += 1;
        }
        for c in counts {
            assert!((c as f64 / 1e5 - 0.25).abs() < 0.01);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let t = table(&[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(sample(&t, 3, 500).unwrap(), sample(&t, 3, 500).unwrap());
        assert_ne!(sample(&t, 3, 500).unwrap(), sample(&t, 4, 500).unwrap());
    }

    #[test]
    fn zero_mass_rejected() {
        assert!(sample(&table(&[0.0, 0.0]), 1, 3).is_err());
    }

    #[test]
    fn never_draws_zero_weight() {
        let ev = sample(&table(&[0.5, 0.0, 0.5, 0.0]), 9, 20_000).unwrap();
        assert!(ev.iter().all(|e| e.output[0] == 0 || e.output[0] == 2));
    }
}
