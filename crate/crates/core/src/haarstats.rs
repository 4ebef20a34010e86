//! Haar-random unitaries and the histogram comparisons used to judge how
//! Haar-like a family of device transformations is.

use std::f64::consts::PI;

use nalgebra::QR;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{Device, PropagationOptions};
use crate::exec::Execution;
use crate::linalg::{CMatrix, UnitaryMatrix};
use crate::rng::{member_seed, rng_from_seed, StreamRng};

pub const DEFAULT_BINS: usize = 25;

fn ginibre(m: usize, rng: &mut StreamRng) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(m, m, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * s, im * s)
    })
}

/// Haar-distributed `m×m` unitary: QR of a complex Ginibre matrix with the
/// phases of `R`'s diagonal moved into `Q`.
pub fn haar_unitary(m: usize, rng_seed: u64) -> Result<UnitaryMatrix> {
    if m == 0 {
        return Err(Error::Domain("Haar unitary needs m >= 1".into()));
    }
    let mut rng = rng_from_seed(rng_seed);
    let qr = QR::new(ginibre(m, &mut rng));
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..m {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for z in q.column_mut(k).iter_mut() {
            *z *= phase;
        }
    }
    UnitaryMatrix::new(q)
}

/// Squared-moduli vector of a Haar-random column (a normalised complex
/// Gaussian vector has the same law as any fixed column of a Haar unitary).
pub fn haar_column_intensities(m: usize, rng: &mut StreamRng) -> Vec<f64> {
    let v: Vec<f64> = (0..m)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            re * re + im * im
        })
        .collect();
    let total: f64 = v.iter().sum();
    v.into_iter().map(|x| x / total).collect()
}

/// Similarity `(Σ_i √(p_i q_i))²` of two distributions (each normalised
/// here to unit sum).
pub fn similarity(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() || p.is_empty() {
        return Err(Error::Domain(format!("similarity of vectors of length {} and {}", p.len(), q.len())));
    }
    let norm = |v: &[f64]| -> Result<f64> {
        if v.iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::Domain("distributions must be non-negative".into()));
        }
        let s: f64 = v.iter().sum();
        if !(s > 0.0) {
            return Err(Error::Domain("distribution has zero mass".into()));
        }
        Ok(s)
    };
    let (sp, sq) = (norm(p)?, norm(q)?);
    let bc: f64 = p.iter().zip(q).map(|(a, b)| (a / sp * b / sq).sqrt()).sum();
    Ok((bc * bc).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub masses: Vec<f64>,
}

impl Histogram {
    pub fn uniform_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
        (0..=bins).map(|k| if k == bins { hi } else { lo + (hi - lo) * k as f64 / bins as f64 }).collect()
    }

    /// Normalised histogram of `samples`. Values on the last edge fall in the
    /// last bin; values outside `[first, last]` are an error.
    pub fn from_samples(samples: &[f64], bin_edges: Vec<f64>) -> Result<Self> {
        if bin_edges.len() < 2 || bin_edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("bin edges must be strictly increasing".into()));
        }
        if samples.is_empty() {
            return Err(Error::Domain("histogram of no samples".into()));
        }
        let counts = bin_counts(samples, &bin_edges)?;
        let n = samples.len() as f64;
        Ok(Self { masses: counts.into_iter().map(|c| c / n).collect(), bin_edges })
    }

    pub fn bins(&self) -> usize {
        self.masses.len()
    }
}

/// Raw counts per bin; the last bin is closed on the right.
pub fn bin_counts(samples: &[f64], edges: &[f64]) -> Result<Vec<f64>> {
    let bins = edges.len() - 1;
    let (lo, hi) = (edges[0], edges[bins]);
    let mut counts = vec![0.0; bins];
    for &x in samples {
        if !(x >= lo && x <= hi) {
            return Err(Error::Domain(format!("sample {x} outside [{lo}, {hi}]")));
        }
        let k = edges.partition_point(|&e| e <= x).saturating_sub(1).min(bins - 1);
        counts[k] += 1.0;
    }
    Ok(counts)
}

/// Shared area `Σ_bins min(mass₁, mass₂)`.
pub fn histogram_overlap(h1: &Histogram, h2: &Histogram) -> Result<f64> {
    if h1.bin_edges != h2.bin_edges {
        return Err(Error::Domain("histograms have different bin edges".into()));
    }
    Ok(h1.masses.iter().zip(&h2.masses).map(|(a, b)| a.min(*b)).sum())
}

/// Similarities between intensity vectors of independent Haar columns.
pub fn haar_column_similarities(m: usize, pairs: usize, rng_seed: u64, exec: Execution) -> Vec<f64> {
    exec.map_range(pairs, |k| {
        let mut rng = rng_from_seed(member_seed(rng_seed, k as u64));
        let a = haar_column_intensities(m, &mut rng);
        let b = haar_column_intensities(m, &mut rng);
        similarity(&a, &b).expect("Haar columns are valid distributions")
    })
}

pub fn column_similarity_distribution(m: usize, ensemble_size: usize, rng_seed: u64) -> Result<Histogram> {
    if m == 0 || ensemble_size == 0 {
        return Err(Error::Domain("need m >= 1 and at least one pair".into()));
    }
    let s = haar_column_similarities(m, ensemble_size, rng_seed, Execution::default());
    Histogram::from_samples(&s, Histogram::uniform_edges(0.0, 1.0, DEFAULT_BINS))
}

/// Similarities between intensity vectors of distinct members of a column
/// ensemble (all unordered pairs).
pub fn pairwise_similarities(columns: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(columns.len() * columns.len().saturating_sub(1) / 2);
    for a in 0..columns.len() {
        for b in (a + 1)..columns.len() {
            out.push(similarity(&columns[a], &columns[b])?);
        }
    }
    Ok(out)
}

/// Rows of `U` seen from the given inputs: entry `(l, i) = U[(i, inputs[l])]`.
pub fn input_rows(u: &UnitaryMatrix, inputs: &[usize]) -> Result<CMatrix> {
    if let Some(&bad) = inputs.iter().find(|&&k| k >= u.m()) {
        return Err(Error::Domain(format!("input mode {bad} out of range")));
    }
    Ok(CMatrix::from_fn(inputs.len(), u.m(), |l, i| u.amp(i, inputs[l])))
}

/// Phases with the first row and first column rotated to zero; the
/// gauge-free entries `(l ≥ 1, i ≥ 1)` in row-major order.
pub fn gauge_fixed_phases(sub: &CMatrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(sub.nrows().saturating_sub(1) * sub.ncols().saturating_sub(1));
    for l in 1..sub.nrows() {
        for i in 1..sub.ncols() {
            let z = sub[(l, i)] * sub[(0, 0)] * sub[(0, i)].conj() * sub[(l, 0)].conj();
            out.push(wrap_phase(z.arg()));
        }
    }
    out
}

/// Map an angle into `(−π, π]`.
pub fn wrap_phase(theta: f64) -> f64 {
    let mut t = theta % (2.0 * PI);
    if t <= -PI {
        t += 2.0 * PI;
    } else if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// Pooled squared-moduli and gauge-fixed phase histograms over a family of
/// submatrices (rows = inputs).
pub fn ensemble_moduli_phase_histograms(submatrices: &[CMatrix]) -> Result<(Histogram, Histogram)> {
    let moduli: Vec<f64> = submatrices.iter().flat_map(|s| s.iter().map(|z| z.norm_sqr().min(1.0))).collect();
    let phases: Vec<f64> = submatrices.iter().flat_map(gauge_fixed_phases).collect();
    Ok((
        Histogram::from_samples(&moduli, Histogram::uniform_edges(0.0, 1.0, DEFAULT_BINS))?,
        Histogram::from_samples(&phases, Histogram::uniform_edges(-PI, PI, DEFAULT_BINS))?,
    ))
}

/// Haar marginal CDF of one squared modulus, `1 − (1 − x)^(m−1)`.
pub fn haar_modulus_cdf(x: f64, m: usize) -> f64 {
    if m == 1 {
        return if x >= 1.0 { 1.0 } else { 0.0 };
    }
    1.0 - (1.0 - x.clamp(0.0, 1.0)).powi(m as i32 - 1)
}

/// Edges splitting `[0, 1]` into `bins` equiprobable bins of the Haar
/// squared-modulus marginal.
pub fn haar_modulus_quantile_edges(m: usize, bins: usize) -> Vec<f64> {
    (0..=bins)
        .map(|k| {
            let u = k as f64 / bins as f64;
            if k == bins {
                1.0
            } else {
                1.0 - (1.0 - u).powf(1.0 / (m as f64 - 1.0))
            }
        })
        .collect()
}

/// Device unitaries at `count` heater settings drawn uniformly from
/// `[0, max_power)`; member `k` uses power seed `member_seed(rng_seed, k)`.
pub fn device_ensemble(
    device: &Device,
    max_power: f64,
    count: usize,
    rng_seed: u64,
    opts: &PropagationOptions,
    exec: Execution,
) -> Result<Vec<UnitaryMatrix>> {
    // members run concurrently, so each propagation stays sequential inside
    let inner = PropagationOptions { execution: Execution::Sequential, ..*opts };
    exec.map_range(count, |k| {
        let powers = device.random_powers(max_power, member_seed(rng_seed, k as u64));
        device.clone().with_powers(powers)?.unitary(&inner)
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_is_unitary() {
        for m in [1, 2, 5, 32] {
            let u = haar_unitary(m, m as u64).unwrap();
            assert!(u.unitarity_defect() < 1e-12, "m={m}: {}", u.unitarity_defect());
        }
    }

    #[test]
    fn one_mode_is_a_phase() {
        let u = haar_unitary(1, 3).unwrap();
        assert!((u.amp(0, 0).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn similarity_cases() {
        assert!((similarity(&[0.2, 0.3, 0.5], &[0.2, 0.3, 0.5]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((similarity(&[0.5, 0.5], &[1.0, 0.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(similarity(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn overlap_cases() {
        let edges = Histogram::uniform_edges(0.0, 1.0, 2);
        let a = Histogram { bin_edges: edges.clone(), masses: vec![0.5, 0.5] };
        let b = Histogram { bin_edges: edges.clone(), masses: vec![1.0, 0.0] };
        let c = Histogram { bin_edges: edges, masses: vec![0.0, 1.0] };
        assert_eq!(histogram_overlap(&a, &a).unwrap(), 1.0);
        assert_eq!(histogram_overlap(&a, &b).unwrap(), 0.5);
        assert_eq!(histogram_overlap(&b, &c).unwrap(), 0.0);
        let d = Histogram { bin_edges: Histogram::uniform_edges(0.0, 2.0, 2), masses: vec![1.0, 0.0] };
        assert!(histogram_overlap(&a, &d).is_err());
    }

    #[test]
    fn single_mode_columns_are_identical() {
        let h = column_similarity_distribution(1, 100, 4).unwrap();
        assert_eq!(h.masses[DEFAULT_BINS - 1], 1.0);
    }

    #[test]
    fn histogram_mass_sums_to_one() {
        let h = column_similarity_distribution(32, 2000, 8).unwrap();
        assert!((h.masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gauge_fixed_phase_is_gauge_invariant() {
        let u = haar_unitary(6, 1).unwrap();
        let sub = input_rows(&u, &[0, 2, 4]).unwrap();
        let mut regauged = sub.clone();
        for l in 0..3 {
            for i in 0..6 {
                regauged[(l, i)] *= Complex64::from_polar(1.0, 0.3 * l as f64 - 1.1 * i as f64);
            }
        }
        let a = gauge_fixed_phases(&sub);
        let b = gauge_fixed_phases(&regauged);
        for (x, y) in a.iter().zip(&b) {
            assert!(wrap_phase(x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn quantile_edges_are_equiprobable() {
        let e = haar_modulus_quantile_edges(32, 25);
        for w in e.windows(2) {
            let p = haar_modulus_cdf(w[1], 32) - haar_modulus_cdf(w[0], 32);
            assert!((p - 0.04).abs() < 1e-12);
        }
    }
}
