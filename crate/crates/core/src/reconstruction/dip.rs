//! HOM dip scans: the Gaussian profile `f(x) = a·(1 + v·exp(−(x−x0)²/2σ²))`,
//! Poisson scan simulation and weighted least-squares fits.
//!
//! `v` is the coefficient of the Gaussian as it appears in `f`; a dip has
//! `v < 0`, and the HOM visibility of the pair is `−v`.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::Rng;
use rand_distr::Poisson;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{levenberg_marquardt, LmOptions};
use crate::rng::rng_from_seed;

pub const MIN_SCAN_POINTS: usize = 8;

pub fn dip_profile(x: f64, a: f64, v: f64, x0: f64, sigma: f64) -> f64 {
    a * (1.0 + v * gaussian(x, x0, sigma))
}

fn gaussian(x: f64, x0: f64, sigma: f64) -> f64 {
    (-(x - x0).powi(2) / (2.0 * sigma * sigma)).exp()
}

/// Evenly spaced delay positions over `x0 ± half_width_sigmas·σ`.
pub fn scan_positions(x0: f64, sigma: f64, points: usize, half_width_sigmas: f64) -> Vec<f64> {
    let lo = x0 - half_width_sigmas * sigma;
    let step = 2.0 * half_width_sigmas * sigma / (points.max(2) - 1) as f64;
    (0..points).map(|k| lo + step * k as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipShape {
    pub a: f64,
    pub v: f64,
    pub x0: f64,
    pub sigma: f64,
}

impl DipShape {
    pub fn at(&self, x: f64) -> f64 {
        dip_profile(x, self.a, self.v, self.x0, self.sigma)
    }
}

/// Counts at each position: `mean_counts·f(x)`, Poisson-distributed unless
/// `noiseless`.
pub fn simulate_dip_scan(
    shape: &DipShape,
    positions: &[f64],
    mean_counts: f64,
    noiseless: bool,
    rng_seed: u64,
) -> Result<Vec<f64>> {
    let DipShape { a, v, sigma, .. } = *shape;
    if !(a >= 0.0) || !(sigma > 0.0) || !(mean_counts >= 0.0) || !(-1.0..=1.0).contains(&v) {
        return Err(Error::Domain(format!("bad scan parameters a={a}, v={v}, sigma={sigma}, mean={mean_counts}")));
    }
    let mut rng = rng_from_seed(rng_seed);
    positions
        .iter()
        .map(|&x| {
            let mu = mean_counts * shape.at(x);
            if noiseless || mu <= 0.0 {
                return Ok(mu.max(0.0));
            }
            let p = Poisson::new(mu).map_err(|e| Error::Numerical(e.to_string()))?;
            Ok(rng.sample(p))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipFit {
    pub a: f64,
    pub v: f64,
    pub x0: f64,
    pub sigma: f64,
    /// Standard errors of `(a, v, x0, sigma)`.
    pub uncertainties: [f64; 4],
    pub cov_av: f64,
    pub chi2: f64,
    pub iterations: usize,
}

fn initial_guess(positions: &[f64], counts: &[f64]) -> [f64; 4] {
    let n = positions.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&p, &q| positions[p].total_cmp(&positions[q]));
    let tail = n.div_ceil(8);
    let outer: Vec<f64> = order[..tail].iter().chain(&order[n - tail..]).map(|&k| counts[k]).collect();
    let a0 = outer.iter().sum::<f64>() / outer.len() as f64;
    let ext = (0..n).max_by(|&p, &q| (counts[p] - a0).abs().total_cmp(&(counts[q] - a0).abs())).unwrap_or(0);
    let depth = counts[ext] - a0;
    let v0 = if a0 > 0.0 { (depth / a0).clamp(-1.0, 1.0) } else { 0.0 };
    let half: Vec<f64> = (0..n).filter(|&k| (counts[k] - a0).abs() >= depth.abs() / 2.0).map(|k| positions[k]).collect();
    let lo = half.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = half.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = positions[order[n - 1]] - positions[order[0]];
    let spacing = span / (n - 1) as f64;
    // FWHM = 2√(2 ln 2)·σ
    let sigma0 = ((hi - lo).max(spacing) / 2.354_820_045).max(spacing / 2.0);
    [a0, v0, positions[ext], sigma0]
}

/// Weighted least-squares fit of `f(x)` with Poisson weights `1/√max(c, 1)`;
/// uncertainties come from the inverse normal matrix.
pub fn fit_dip(positions: &[f64], counts: &[f64]) -> Result<DipFit> {
    let n = positions.len();
    if n != counts.len() {
        return Err(Error::Domain("positions and counts differ in length".into()));
    }
    if n < MIN_SCAN_POINTS {
        return Err(Error::Domain(format!("need at least {MIN_SCAN_POINTS} scan points, got {n}")));
    }
    if counts.iter().any(|c| !(*c >= 0.0)) {
        return Err(Error::Domain("counts must be non-negative".into()));
    }
    if counts.iter().all(|&c| c == 0.0) {
        return Err(Error::FitFailed { iterations: 0, reason: "scan has no counts".into() });
    }
    let w: Vec<f64> = counts.iter().map(|c| 1.0 / c.max(1.0).sqrt()).collect();
    let res = |p: &DVector<f64>| {
        DVector::from_iterator(n, (0..n).map(|k| (dip_profile(positions[k], p[0], p[1], p[2], p[3]) - counts[k]) * w[k]))
    };
    let jac = |p: &DVector<f64>| {
        let mut j = DMatrix::zeros(n, 4);
        for k in 0..n {
            let dx = positions[k] - p[2];
            let g = gaussian(positions[k], p[2], p[3]);
            j[(k, 0)] = (1.0 + p[1] * g) * w[k];
            j[(k, 1)] = p[0] * g * w[k];
            j[(k, 2)] = p[0] * p[1] * g * dx / (p[3] * p[3]) * w[k];
            j[(k, 3)] = p[0] * p[1] * g * dx * dx / p[3].powi(3) * w[k];
        }
        j
    };
    let x0 = DVector::from_row_slice(&initial_guess(positions, counts));
    let opts = LmOptions { max_iterations: 500, ..LmOptions::default() };
    let rep = levenberg_marquardt(x0, res, jac, &opts);
    let p = &rep.x;
    if !rep.converged || !p.iter().all(|v| v.is_finite()) {
        return Err(Error::FitFailed { iterations: rep.iterations, reason: format!("cost {:.3e}", rep.cost) });
    }
    let sigma = p[3].abs();
    let jm = jac(p);
    let normal = jm.tr_mul(&jm);
    // x0 and σ are unidentified on a flat scan; report (a, v) from the reduced normal matrix then
    let (unc, cov_av) = match normal.clone().try_inverse() {
        Some(cov) if cov.iter().all(|c| c.is_finite()) && cov[(1, 1)] >= 0.0 => (
            [cov[(0, 0)].max(0.0).sqrt(), cov[(1, 1)].sqrt(), cov[(2, 2)].max(0.0).sqrt(), cov[(3, 3)].max(0.0).sqrt()],
            cov[(0, 1)],
        ),
        _ => {
            let reduced = normal.view((0, 0), (2, 2)).into_owned().try_inverse().ok_or_else(|| Error::FitFailed {
                iterations: rep.iterations,
                reason: "singular normal matrix".into(),
            })?;
            ([reduced[(0, 0)].sqrt(), reduced[(1, 1)].sqrt(), f64::INFINITY, f64::INFINITY], reduced[(0, 1)])
        }
    };
    Ok(DipFit { a: p[0], v: p[1], x0: p[2], sigma, uncertainties: unc, cov_av, chi2: 2.0 * rep.cost, iterations: rep.iterations })
}

/// Weighted linear fit of `a` and `v` with `x0` and `σ` held fixed, for scans
/// too shallow to locate the dip. The fixed parameters report infinite
/// uncertainty.
pub fn fit_dip_fixed(positions: &[f64], counts: &[f64], x0: f64, sigma: f64) -> Result<DipFit> {
    let n = positions.len();
    if n != counts.len() {
        return Err(Error::Domain("positions and counts differ in length".into()));
    }
    if n < 2 || !(sigma > 0.0) || !x0.is_finite() {
        return Err(Error::Domain(format!("bad fixed dip shape x0={x0}, sigma={sigma} for {n} points")));
    }
    // f = a + b·g with b = a·v
    let mut normal = Matrix2::<f64>::zeros();
    let mut rhs = Vector2::<f64>::zeros();
    for (&x, &c) in positions.iter().zip(counts) {
        let w2 = 1.0 / c.max(1.0);
        let row = Vector2::new(1.0, gaussian(x, x0, sigma));
        normal += row * row.transpose() * w2;
        rhs += row * c * w2;
    }
    let cov = normal
        .try_inverse()
        .ok_or_else(|| Error::FitFailed { iterations: 0, reason: "singular normal matrix".into() })?;
    let ab = cov * rhs;
    let (a, b) = (ab[0], ab[1]);
    if !(a > 0.0) {
        return Err(Error::FitFailed { iterations: 0, reason: format!("non-positive plateau {a:.3e}") });
    }
    let v = b / a;
    // (a, b) -> (a, v): dv/da = −b/a², dv/db = 1/a
    let (da, db) = (-b / (a * a), 1.0 / a);
    let var_v = da * da * cov[(0, 0)] + 2.0 * da * db * cov[(0, 1)] + db * db * cov[(1, 1)];
    let cov_av = da * cov[(0, 0)] + db * cov[(0, 1)];
    let chi2 = positions
        .iter()
        .zip(counts)
        .map(|(&x, &c)| (dip_profile(x, a, v, x0, sigma) - c).powi(2) / c.max(1.0))
        .sum();
    Ok(DipFit {
        a,
        v,
        x0,
        sigma,
        uncertainties: [cov[(0, 0)].max(0.0).sqrt(), var_v.max(0.0).sqrt(), f64::INFINITY, f64::INFINITY],
        cov_av,
        chi2,
        iterations: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(a: f64, v: f64, x0: f64, sigma: f64) -> DipShape {
        DipShape { a, v, x0, sigma }
    }

    #[test]
    fn fixed_shape_fit_recovers_plateau_and_visibility() {
        let xs = scan_positions(0.0, 100.0, 21, 3.0);
        let c = simulate_dip_scan(&shape(2.0, -0.3, 0.0, 100.0), &xs, 1.0, true, 0).unwrap();
        let f = fit_dip_fixed(&xs, &c, 0.0, 100.0).unwrap();
        assert!((f.a - 2.0).abs() < 1e-12 && (f.v + 0.3).abs() < 1e-12, "{f:?}");
        assert!(f.chi2 < 1e-20);
    }

    #[test]
    fn noiseless_round_trip() {
        let xs = scan_positions(0.0, 100.0, 21, 3.0);
        let c = simulate_dip_scan(&shape(0.5, -0.8, 0.0, 100.0), &xs, 1.0, true, 0).unwrap();
        let f = fit_dip(&xs, &c).unwrap();
        assert!((f.a - 0.5).abs() < 1e-6 && (f.v + 0.8).abs() < 1e-6, "{f:?}");
    }

    #[test]
    fn flat_scan() {
        let xs = scan_positions(10.0, 50.0, 21, 3.0);
        let c = simulate_dip_scan(&shape(0.3, 0.0, 10.0, 50.0), &xs, 1000.0, true, 0).unwrap();
        assert!(c.iter().all(|&v| (v - 300.0).abs() < 1e-9));
        let f = fit_dip(&xs, &c).unwrap();
        assert!(f.v.abs() < 1e-6 && (f.a - 300.0).abs() < 1e-6);
    }

    #[test]
    fn tails_sit_on_the_plateau() {
        let xs = [-1000.0, 1000.0];
        let c = simulate_dip_scan(&shape(1.0, -1.0, 0.0, 100.0), &xs, 1e6, true, 0).unwrap();
        assert!(c.iter().all(|&v| (v - 1e6).abs() < 1e-3));
    }

    #[test]
    fn poisson_scan_is_seeded() {
        let xs = scan_positions(0.0, 100.0, 21, 3.0);
        let a = simulate_dip_scan(&shape(0.5, -0.5, 0.0, 100.0), &xs, 1e4, false, 9).unwrap();
        let b = simulate_dip_scan(&shape(0.5, -0.5, 0.0, 100.0), &xs, 1e4, false, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|c| c.fract() == 0.0));
    }

    #[test]
    fn too_few_points() {
        let xs = scan_positions(0.0, 1.0, 5, 3.0);
        assert!(matches!(fit_dip(&xs, &[1.0; 5]), Err(Error::Domain(_))));
    }
}
