//! Two-photon HOM characterisation of a few rows of the circuit and their
//! recovery from plateau and visibility data.
//!
//! A submatrix is stored with one row per injected input mode: entry
//! `(l, i)` is the amplitude `U[(i, inputs[l])]`. For inputs `h, k` and
//! outputs `i < j` the plateau is `a = ρ_ih²ρ_jk² + ρ_jh²ρ_ik²`, the
//! indistinguishable coincidence probability is
//! `q = |U_ih U_jk + U_jh U_ik|²`, and the visibility is `V = (a − q)/a`.

mod dip;
mod solve;

pub use dip::{dip_profile, fit_dip, fit_dip_fixed, scan_positions, simulate_dip_scan, DipFit, DipShape, MIN_SCAN_POINTS};
pub use solve::{
    chi2, gauge_distance, orthogonality_defect, reconstruct, reconstruct_moduli, reconstruct_phases, refine_chi2,
    Gauge, ReconstructedSubmatrix, ReconstructionOptions,
};

use rand::Rng;
use rand_distr::Poisson;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::{CMatrix, UnitaryMatrix};
use crate::rng::{member_seed, rng_from_seed};

/// Plateaus below this are treated as zero and leave the visibility undefined.
pub const PLATEAU_FLOOR: f64 = 1e-300;
/// Relative floor on uncertainties.
pub const EPS_FLOOR: f64 = 1e-6;

fn check_modes(u: &UnitaryMatrix, modes: &[usize]) -> Result<()> {
    match modes.iter().find(|&&k| k >= u.m()) {
        Some(bad) => Err(Error::Domain(format!("mode {bad} out of range for {} modes", u.m()))),
        None => Ok(()),
    }
}

pub fn hom_plateau(u: &UnitaryMatrix, h: usize, k: usize, i: usize, j: usize) -> Result<f64> {
    check_modes(u, &[h, k, i, j])?;
    let r = |o, s| u.amp(o, s).norm_sqr();
    Ok(r(i, h) * r(j, k) + r(j, h) * r(i, k))
}

/// `|U_ih U_jk + U_jh U_ik|²`.
pub fn hom_coincidence(u: &UnitaryMatrix, h: usize, k: usize, i: usize, j: usize) -> Result<f64> {
    check_modes(u, &[h, k, i, j])?;
    Ok((u.amp(i, h) * u.amp(j, k) + u.amp(j, h) * u.amp(i, k)).norm_sqr())
}

/// `V = (a − |U_ih U_jk + U_jh U_ik|²)/a`.
pub fn hom_visibility(u: &UnitaryMatrix, h: usize, k: usize, i: usize, j: usize) -> Result<f64> {
    let a = hom_plateau(u, h, k, i, j)?;
    if a <= PLATEAU_FLOOR {
        return Err(Error::UndefinedVisibility { i, j });
    }
    Ok((a - hom_coincidence(u, h, k, i, j)?) / a)
}

/// `V = −(2ρ_ih ρ_jk ρ_jh ρ_ik / a)·cos(θ_ih + θ_jk − θ_jh − θ_ik)`.
pub fn hom_visibility_polar(u: &UnitaryMatrix, h: usize, k: usize, i: usize, j: usize) -> Result<f64> {
    let a = hom_plateau(u, h, k, i, j)?;
    if a <= PLATEAU_FLOOR {
        return Err(Error::UndefinedVisibility { i, j });
    }
    let (ih, jk, jh, ik) = (u.amp(i, h), u.amp(j, k), u.amp(j, h), u.amp(i, k));
    let rho = ih.norm() * jk.norm() * jh.norm() * ik.norm();
    Ok(-2.0 * rho / a * (ih.arg() + jk.arg() - jh.arg() - ik.arg()).cos())
}

/// One output pair `i < j` measured with one input pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomEntry {
    pub i: usize,
    pub j: usize,
    pub a: f64,
    /// `None` where the plateau vanishes.
    pub visibility: Option<f64>,
    /// Uncertainty of `a`.
    pub eps_a: f64,
    /// Uncertainty of the coincidence level `a(1 − V)`.
    pub eps: f64,
}

impl HomEntry {
    /// Measured indistinguishable coincidence level `a(1 − V)`.
    pub fn coincidence(&self) -> Option<f64> {
        self.visibility.map(|v| self.a * (1.0 - v))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomDataset {
    /// Device input mode of each submatrix row.
    pub inputs: Vec<usize>,
    /// Number of output modes.
    pub outputs: usize,
    /// Row pairs `(l1, l2)` into `inputs`.
    pub input_pairs: Vec<(usize, usize)>,
    /// Per input pair, all `C(outputs, 2)` output pairs in lexicographic order.
    pub entries: Vec<Vec<HomEntry>>,
    /// Single-photon output distribution of each row, when measured.
    pub intensities: Option<Vec<Vec<f64>>>,
}

/// Pairs `(0, l)` for `l = 1..rows`: every row interferes with the first.
pub fn default_input_pairs(rows: usize) -> Vec<(usize, usize)> {
    (1..rows).map(|l| (0, l)).collect()
}

fn output_pairs(m: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..m).flat_map(move |i| ((i + 1)..m).map(move |j| (i, j)))
}

impl HomDataset {
    fn check_shape(inputs: &[usize], pairs: &[(usize, usize)]) -> Result<()> {
        for &(p, q) in pairs {
            if p == q || p >= inputs.len() || q >= inputs.len() {
                return Err(Error::Domain(format!("input pair ({p}, {q}) invalid for {} rows", inputs.len())));
            }
        }
        Ok(())
    }

    /// Exact plateaus and visibilities of `u`, with nominal relative
    /// uncertainties `EPS_FLOOR`.
    pub fn from_unitary(u: &UnitaryMatrix, inputs: &[usize], pairs: &[(usize, usize)]) -> Result<Self> {
        check_modes(u, inputs)?;
        Self::check_shape(inputs, pairs)?;
        let m = u.m();
        let mut entries = Vec::with_capacity(pairs.len());
        for &(p, q) in pairs {
            let (h, k) = (inputs[p], inputs[q]);
            let mut row = Vec::with_capacity(m * (m - 1) / 2);
            for (i, j) in output_pairs(m) {
                let a = hom_plateau(u, h, k, i, j)?;
                let visibility = if a > PLATEAU_FLOOR { Some(hom_visibility(u, h, k, i, j)?) } else { None };
                let q = visibility.map_or(0.0, |v| a * (1.0 - v));
                row.push(HomEntry { i, j, a, visibility, eps_a: EPS_FLOOR * a, eps: EPS_FLOOR * a.max(q) });
            }
            entries.push(row);
        }
        let intensities = inputs.iter().map(|&h| (0..m).map(|i| u.amp(i, h).norm_sqr()).collect()).collect();
        Ok(Self { inputs: inputs.to_vec(), outputs: m, input_pairs: pairs.to_vec(), entries, intensities: Some(intensities) })
    }

    /// Same dataset measured with Poisson counting: every plateau collects
    /// `plateau_counts` expected counts, so its relative noise is
    /// `1/√plateau_counts`; the dip level and the intensity rows are counted
    /// at the same exposure.
    pub fn with_poisson_noise(&self, plateau_counts: f64, rng_seed: u64) -> Result<Self> {
        if !(plateau_counts > 0.0) {
            return Err(Error::Domain("plateau_counts must be positive".into()));
        }
        let draw = |mu: f64, rng: &mut crate::rng::StreamRng| -> Result<f64> {
            if mu <= 0.0 {
                return Ok(0.0);
            }
            Ok(rng.sample(Poisson::new(mu).map_err(|e| Error::Numerical(e.to_string()))?))
        };
        let mut out = self.clone();
        for (p, row) in out.entries.iter_mut().enumerate() {
            let mut rng = rng_from_seed(member_seed(rng_seed, p as u64));
            for e in row.iter_mut() {
                let Some(q) = e.coincidence() else { continue };
                let a = e.a;
                let ka = draw(plateau_counts, &mut rng)?;
                let kq = draw(plateau_counts * q / a, &mut rng)?;
                let scale = a / plateau_counts;
                e.a = ka * scale;
                e.eps_a = (ka.max(1.0).sqrt() * scale).max(EPS_FLOOR * a);
                e.eps = (kq.max(1.0).sqrt() * scale).max(EPS_FLOOR * a);
                e.visibility = if e.a > PLATEAU_FLOOR { Some((1.0 - kq * scale / e.a).clamp(-1.0, 1.0)) } else { None };
            }
        }
        if let Some(rows) = out.intensities.as_mut() {
            let mut rng = rng_from_seed(member_seed(rng_seed, u64::MAX));
            for row in rows.iter_mut() {
                let counts: Vec<f64> = row.iter().map(|&x| draw(x * plateau_counts, &mut rng)).collect::<Result<_>>()?;
                let total: f64 = counts.iter().sum();
                if total > 0.0 {
                    *row = counts.into_iter().map(|c| c / total).collect();
                }
            }
        }
        Ok(out)
    }

    /// Dataset obtained by scanning every dip and fitting it. Returns the
    /// per-dip fits alongside (`None` where the plateau vanishes). A dip whose
    /// full fit fails is refitted with the nominal `x0` and `σ` of the scan.
    pub fn from_dip_scans(
        u: &UnitaryMatrix,
        inputs: &[usize],
        pairs: &[(usize, usize)],
        scan: &ScanSettings,
        rng_seed: u64,
        exec: Execution,
    ) -> Result<(Self, Vec<Vec<Option<DipFit>>>)> {
        let exact = Self::from_unitary(u, inputs, pairs)?;
        let positions = scan_positions(scan.x0, scan.sigma, scan.points, scan.half_width_sigmas);
        let mut out = exact.clone();
        let mut fits = Vec::with_capacity(pairs.len());
        for (p, row) in exact.entries.iter().enumerate() {
            let pair_seed = member_seed(rng_seed, p as u64);
            let fitted = exec.map_range(row.len(), |k| -> Result<Option<(HomEntry, DipFit)>> {
                let e = &row[k];
                let Some(vis) = e.visibility else { return Ok(None) };
                // every dip is exposed for the same plateau count
                let mean_counts = scan.plateau_counts / e.a;
                let shape = DipShape { a: e.a, v: -vis, x0: scan.x0, sigma: scan.sigma };
                let counts = simulate_dip_scan(&shape, &positions, mean_counts, scan.noiseless, member_seed(pair_seed, k as u64))?;
                let fit = match fit_dip(&positions, &counts) {
                    Err(Error::FitFailed { .. }) => fit_dip_fixed(&positions, &counts, scan.x0, scan.sigma)?,
                    r => r?,
                };
                let a = fit.a / mean_counts;
                let visibility = (-fit.v).clamp(-1.0, 1.0);
                let [sa, sv, _, _] = fit.uncertainties;
                // q = a(1 + v): propagate the (a, v) covariance, in count units
                let var_q = (1.0 + fit.v).powi(2) * sa * sa + fit.a * fit.a * sv * sv + 2.0 * (1.0 + fit.v) * fit.a * fit.cov_av;
                let entry = HomEntry {
                    i: e.i,
                    j: e.j,
                    a,
                    visibility: Some(visibility),
                    eps_a: (sa / mean_counts).max(EPS_FLOOR * a),
                    eps: (var_q.max(0.0).sqrt() / mean_counts).max(EPS_FLOOR * a),
                };
                Ok(Some((entry, fit)))
            });
            let mut pair_fits = Vec::with_capacity(row.len());
            for (k, f) in fitted.into_iter().enumerate() {
                match f? {
                    Some((entry, fit)) => {
                        out.entries[p][k] = entry;
                        pair_fits.push(Some(fit));
                    }
                    None => pair_fits.push(None),
                }
            }
            fits.push(pair_fits);
        }
        Ok((out, fits))
    }

    pub fn rows(&self) -> usize {
        self.inputs.len()
    }
}

/// Delay-line scan used by [`HomDataset::from_dip_scans`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanSettings {
    pub x0: f64,
    pub sigma: f64,
    pub points: usize,
    pub half_width_sigmas: f64,
    /// Expected counts on the plateau of every dip.
    pub plateau_counts: f64,
    pub noiseless: bool,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self { x0: 0.0, sigma: 100.0, points: 21, half_width_sigmas: 3.0, plateau_counts: 1e4, noiseless: false }
    }
}

/// Submatrix of `u` seen from `inputs`, rows = inputs.
pub fn target_rows(u: &UnitaryMatrix, inputs: &[usize]) -> Result<CMatrix> {
    crate::haarstats::input_rows(u, inputs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::haarstats::haar_unitary;
    use crate::interference::{output_probability, FockPattern, Statistics};
    use crate::linalg::I;
    use num_complex::Complex64;

    #[test]
    fn identity_plateaus() {
        let u = UnitaryMatrix::identity(6);
        assert_eq!(hom_plateau(&u, 0, 1, 0, 1).unwrap(), 1.0);
        assert_eq!(hom_plateau(&u, 0, 1, 2, 3).unwrap(), 0.0);
        assert!(matches!(hom_visibility(&u, 0, 1, 2, 3), Err(Error::UndefinedVisibility { i: 2, j: 3 })));
    }

    #[test]
    fn balanced_coupler_full_dip() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let u = UnitaryMatrix::new(CMatrix::from_row_slice(2, 2, &[Complex64::new(s, 0.0), I * s, I * s, Complex64::new(s, 0.0)])).unwrap();
        assert!((hom_visibility(&u, 0, 1, 0, 1).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn formulas_agree_and_match_interference() {
        let u = haar_unitary(8, 5).unwrap();
        for (i, j) in output_pairs(8) {
            let v1 = hom_visibility(&u, 2, 5, i, j).unwrap();
            let v2 = hom_visibility_polar(&u, 2, 5, i, j).unwrap();
            assert!((v1 - v2).abs() < 1e-12);
            let input = FockPattern::from_modes(8, &[2, 5]).unwrap();
            let output = FockPattern::from_modes(8, &[i, j]).unwrap();
            let d = output_probability(&u, &input, &output, Statistics::Distinguishable).unwrap();
            assert!((d - hom_plateau(&u, 2, 5, i, j).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn dataset_shape() {
        let u = haar_unitary(32, 1).unwrap();
        let d = HomDataset::from_unitary(&u, &[3, 7, 11], &default_input_pairs(3)).unwrap();
        assert_eq!(d.entries.len(), 2);
        assert!(d.entries.iter().all(|r| r.len() == 496));
        assert!(d.entries.iter().flatten().all(|e| e.a >= 0.0 && e.visibility.is_some_and(|v| (-1.0..=1.0).contains(&v))));
        assert!(HomDataset::from_unitary(&u, &[3, 7], &[(0, 0)]).is_err());
    }

    #[test]
    fn noise_is_seeded_and_bounded() {
        let u = haar_unitary(12, 2).unwrap();
        let d = HomDataset::from_unitary(&u, &[0, 1, 2], &default_input_pairs(3)).unwrap();
        let n1 = d.with_poisson_noise(1e4, 3).unwrap();
        assert_eq!(n1, d.with_poisson_noise(1e4, 3).unwrap());
        for (x, y) in d.entries.iter().flatten().zip(n1.entries.iter().flatten()) {
            assert!((x.a - y.a).abs() < 6.0 * y.eps_a);
        }
    }
}
