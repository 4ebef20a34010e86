//! Occupation-number patterns and their enumeration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FockPattern {
    occupations: Vec<u32>,
}

impl FockPattern {
    pub fn new(occupations: Vec<u32>) -> Self {
        Self { occupations }
    }

    /// Pattern on `m` modes with one photon per entry of `modes`
    /// (repeated entries stack).
    pub fn from_modes(m: usize, modes: &[usize]) -> Result<Self> {
        let mut occ = vec![0u32; m];
        for &k in modes {
            if k >= m {
                return Err(Error::Domain(format!("mode {k} out of range for {m} modes")));
            }
            occ[k] += 1;
        }
        Ok(Self { occupations: occ })
    }

    pub fn m(&self) -> usize {
        self.occupations.len()
    }

    pub fn n(&self) -> usize {
        self.occupations.iter().map(|&o| o as usize).sum()
    }

    pub fn occupations(&self) -> &[u32] {
        &self.occupations
    }

    pub fn is_collision_free(&self) -> bool {
        self.occupations.iter().all(|&o| o <= 1)
    }

    /// Occupied modes in increasing order, each repeated by its occupation.
    pub fn modes(&self) -> Vec<usize> {
        self.occupations
            .iter()
            .enumerate()
            .flat_map(|(k, &o)| std::iter::repeat_n(k, o as usize))
            .collect()
    }

    /// `Π_k occ_k!`
    pub fn factorial_product(&self) -> f64 {
        self.occupations.iter().map(|&o| (1..=o).map(f64::from).product::<f64>()).product()
    }
}

/// Number of `n`-subsets of `m` items.
pub fn binomial(m: usize, n: usize) -> u128 {
    if n > m {
        return 0;
    }
    let n = n.min(m - n);
    (0..n).fold(1u128, |acc, k| acc * (m - k) as u128 / (k + 1) as u128)
}

/// All `n`-photon patterns on the given output modes, in lexicographic order
/// of their sorted mode lists.
pub fn enumerate_on(m: usize, allowed: &[usize], n: usize, collision_free: bool) -> Vec<FockPattern> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(n);
    fn rec(
        m: usize,
        allowed: &[usize],
        start: usize,
        n: usize,
        collision_free: bool,
        current: &mut Vec<usize>,
        out: &mut Vec<FockPattern>,
    ) {
        if current.len() == n {
            out.push(FockPattern::from_modes(m, current).expect("allowed modes are in range"));
            return;
        }
        for idx in start..allowed.len() {
            current.push(allowed[idx]);
            let next = if collision_free { idx + 1 } else { idx };
            rec(m, allowed, next, n, collision_free, current, out);
            current.pop();
        }
    }
    rec(m, allowed, 0, n, collision_free, &mut current, &mut out);
    out
}

/// All `n`-photon patterns on `m` modes: the `C(m, n)` subsets when
/// `collision_free`, otherwise the `C(m+n−1, n)` multisets.
pub fn enumerate_patterns(m: usize, n: usize, collision_free: bool) -> Vec<FockPattern> {
    let all: Vec<usize> = (0..m).collect();
    enumerate_on(m, &all, n, collision_free)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(enumerate_patterns(32, 3, true).len(), 4960);
        assert_eq!(enumerate_patterns(32, 4, true).len(), 35960);
        assert_eq!(enumerate_patterns(6, 3, false).len(), 56);
        assert_eq!(binomial(32, 4), 35960);
        assert_eq!(binomial(8, 3), 56);
    }

    #[test]
    fn two_modes_two_photons() {
        let p = enumerate_patterns(2, 2, false);
        let occ: Vec<Vec<u32>> = p.iter().map(|f| f.occupations().to_vec()).collect();
        assert_eq!(occ, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
    }

    #[test]
    fn lexicographic_subsets() {
        let p = enumerate_patterns(4, 2, true);
        let modes: Vec<Vec<usize>> = p.iter().map(|f| f.modes()).collect();
        assert_eq!(modes, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
    }

    #[test]
    fn pattern_basics() {
        let f = FockPattern::from_modes(4, &[3, 0, 3]).unwrap();
        assert_eq!(f.occupations(), &[1, 0, 0, 2]);
        assert_eq!(f.n(), 3);
        assert!(!f.is_collision_free());
        assert_eq!(f.modes(), vec![0, 3, 3]);
        assert_eq!(f.factorial_product(), 2.0);
        assert!(FockPattern::from_modes(2, &[2]).is_err());
    }

    #[test]
    fn restricted_outputs() {
        let allowed: Vec<usize> = (0..31).collect();
        let p = enumerate_on(32, &allowed, 3, true);
        assert_eq!(p.len(), 4495);
        assert!(p.iter().all(|f| f.occupations()[31] == 0));
    }
}
