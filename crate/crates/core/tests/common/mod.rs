//! Independent reference computations for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use ccbs_core::interference::FockPattern;
use ccbs_core::linalg::{CMatrix, UnitaryMatrix};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Permanent as the plain sum over all `n!` permutations.
pub fn naive_permanent(a: &CMatrix) -> Complex64 {
    fn go(a: &CMatrix, row: usize, used: &mut Vec<bool>) -> Complex64 {
        let n = a.nrows();
        if row == n {
            return Complex64::new(1.0, 0.0);
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for c in 0..n {
            if !used[c] {
                used[c] = true;
                acc += a[(row, c)] * go(a, row + 1, used);
                used[c] = false;
            }
        }
        acc
    }
    go(a, 0, &mut vec![false; a.nrows()])
}

pub fn random_complex(n: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// Output state of `|input⟩` under `U`, expanded in the Fock basis: each
/// creation operator `a†_j` maps to `Σ_i U_ij a†_i`, the product is
/// multiplied out monomial by monomial, and monomials are normalised to
/// basis states. Returns the amplitude of every reachable occupation vector.
pub fn fock_evolve(u: &UnitaryMatrix, input: &FockPattern) -> BTreeMap<Vec<u32>, Complex64> {
    let m = u.m();
    let mut poly: BTreeMap<Vec<u32>, Complex64> = BTreeMap::new();
    poly.insert(vec![0; m], Complex64::new(1.0, 0.0));
    for j in input.modes() {
        let mut next = BTreeMap::new();
        for (mono, c) in &poly {
            for i in 0..m {
                let mut k = mono.clone();
                k[i] += 1;
                *next.entry(k).or_insert(Complex64::new(0.0, 0.0)) += c * u.amp(i, j);
            }
        }
        poly = next;
    }
    let norm_in: f64 = input.occupations().iter().map(|&s| factorial(s)).product::<f64>().sqrt();
    poly.into_iter()
        .map(|(occ, c)| {
            let norm_out: f64 = occ.iter().map(|&t| factorial(t)).product::<f64>().sqrt();
            (occ, c * norm_out / norm_in)
        })
        .collect()
}

/// Distinguishable-photon probability by summing over every assignment of
/// the labelled photons to output modes.
pub fn distinguishable_brute(u: &UnitaryMatrix, input: &FockPattern, output: &FockPattern) -> f64 {
    let ins = input.modes();
    let n = ins.len();
    let m = u.m();
    let mut total = 0.0;
    for code in 0..m.pow(n as u32) {
        let mut occ = vec![0u32; m];
        let mut c = code;
        let mut p = 1.0;
        for &j in &ins {
            let i = c % m;
            c /= m;
            occ[i] += 1;
            p *= u.amp(i, j).norm_sqr();
        }
        if occ.as_slice() == output.occupations() {
            total += p;
        }
    }
    total
}
