//! Moduli and phase recovery from a [`HomDataset`].

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{HomDataset, HomEntry};
use crate::error::{Error, Result};
use crate::haarstats::wrap_phase;
use crate::linalg::{CMatrix, RMatrix};
use crate::optim::{levenberg_marquardt, LmOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconstructionOptions {
    /// Slack on `|cos| ≤ 1` before data are declared inconsistent, on top
    /// of five propagated standard errors.
    pub cos_tolerance: f64,
    /// Cosines with a larger propagated standard error do not steer the
    /// sign chain.
    pub reliability_sigma: f64,
    /// Uncertainty assigned to each row-normalisation residual.
    pub normalisation_eps: f64,
    pub max_iterations: usize,
}

impl Default for ReconstructionOptions {
    fn default() -> Self {
        Self { cos_tolerance: 0.05, reliability_sigma: 0.25, normalisation_eps: 1e-3, max_iterations: 500 }
    }
}

/// Phase reference: row `reference_row` and column `reference_column`
/// carry zero phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gauge {
    pub reference_row: usize,
    pub reference_column: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructedSubmatrix {
    pub inputs: Vec<usize>,
    pub rows: usize,
    pub cols: usize,
    pub moduli: Vec<Vec<f64>>,
    /// In `(−π, π]`.
    pub phases: Vec<Vec<f64>>,
    pub gauge: Gauge,
    /// Phase objective at the returned point.
    pub chi2: f64,
    /// Set when the phase refinement stopped on its iteration limit.
    pub stagnated: bool,
}

impl ReconstructedSubmatrix {
    pub fn matrix(&self) -> CMatrix {
        CMatrix::from_fn(self.rows, self.cols, |l, i| Complex64::from_polar(self.moduli[l][i], self.phases[l][i]))
    }

    fn from_parts(inputs: &[usize], rho: &RMatrix, phi: &RMatrix, gauge: Gauge, chi2: f64, stagnated: bool) -> Self {
        let rows = rho.nrows();
        let cols = rho.ncols();
        Self {
            inputs: inputs.to_vec(),
            rows,
            cols,
            moduli: (0..rows).map(|l| (0..cols).map(|i| rho[(l, i)]).collect()).collect(),
            phases: (0..rows).map(|l| (0..cols).map(|i| wrap_phase(phi[(l, i)])).collect()).collect(),
            gauge,
            chi2,
            stagnated,
        }
    }
}

fn pair_index(m: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    i * m - i * (i + 1) / 2 + (j - i - 1)
}

fn validate_dataset(ds: &HomDataset) -> Result<()> {
    let m = ds.outputs;
    if ds.entries.len() != ds.input_pairs.len() {
        return Err(Error::Domain("one entry list per input pair required".into()));
    }
    for row in &ds.entries {
        if row.len() != m * (m - 1) / 2 {
            return Err(Error::Domain(format!("expected {} output pairs, got {}", m * (m - 1) / 2, row.len())));
        }
        for (k, e) in row.iter().enumerate() {
            if e.i >= e.j || e.j >= m || pair_index(m, e.i, e.j) != k {
                return Err(Error::Domain(format!("output pair ({}, {}) out of order", e.i, e.j)));
            }
            if !(e.a >= 0.0) || e.visibility.is_some_and(|v| !(-1.0..=1.0).contains(&v)) {
                return Err(Error::Domain(format!("invalid plateau/visibility at ({}, {})", e.i, e.j)));
            }
        }
    }
    for &(p, q) in &ds.input_pairs {
        if p == q || p >= ds.rows() || q >= ds.rows() {
            return Err(Error::Domain(format!("input pair ({p}, {q}) invalid for {} rows", ds.rows())));
        }
    }
    Ok(())
}

fn rows_connected(rows: usize, pairs: &[(usize, usize)]) -> bool {
    let mut seen = vec![false; rows];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(r) = stack.pop() {
        for &(p, q) in pairs {
            for (a, b) in [(p, q), (q, p)] {
                if a == r && !seen[b] {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Absolute floor for uncertainties of one input pair's entries.
fn eps_floor(row: &[HomEntry]) -> f64 {
    row.iter().map(|e| e.a).fold(0.0, f64::max).max(1e-300) * 1e-12
}

const INIT_FLOOR: f64 = 1e-6;

/// Least-squares moduli from the plateaus, with each row's squared moduli
/// constrained to sum to one.
pub fn reconstruct_moduli(ds: &HomDataset, opts: &ReconstructionOptions) -> Result<RMatrix> {
    validate_dataset(ds)?;
    let (rows, m) = (ds.rows(), ds.outputs);
    if rows < 2 || ds.input_pairs.len() < rows - 1 || !rows_connected(rows, &ds.input_pairs) {
        return Err(Error::UnderDetermined(format!(
            "{} input pair(s) do not connect {rows} rows",
            ds.input_pairs.len()
        )));
    }
    let weights: Vec<Vec<f64>> = ds
        .entries
        .iter()
        .map(|row| {
            let floor = eps_floor(row);
            row.iter().map(|e| 1.0 / e.eps_a.max(floor)).collect()
        })
        .collect();
    let n_res = ds.entries.iter().map(Vec::len).sum::<usize>() + rows;
    let np = rows * m;
    let wn = 1.0 / opts.normalisation_eps;

    let res = |x: &DVector<f64>| {
        let mut r = DVector::zeros(n_res);
        let mut k = 0;
        for ((&(h, kk), row), w) in ds.input_pairs.iter().zip(&ds.entries).zip(&weights) {
            for (e, we) in row.iter().zip(w) {
                let (hi, hj, ki, kj) = (x[h * m + e.i], x[h * m + e.j], x[kk * m + e.i], x[kk * m + e.j]);
                r[k] = (hi * hi * kj * kj + hj * hj * ki * ki - e.a) * we;
                k += 1;
            }
        }
        for l in 0..rows {
            r[k] = ((l * m..(l + 1) * m).map(|p| x[p] * x[p]).sum::<f64>() - 1.0) * wn;
            k += 1;
        }
        r
    };
    let jac = |x: &DVector<f64>| {
        let mut jm = DMatrix::zeros(n_res, np);
        let mut k = 0;
        for ((&(h, kk), row), w) in ds.input_pairs.iter().zip(&ds.entries).zip(&weights) {
            for (e, we) in row.iter().zip(w) {
                let (phi, phj, pki, pkj) = (h * m + e.i, h * m + e.j, kk * m + e.i, kk * m + e.j);
                let (hi, hj, ki, kj) = (x[phi], x[phj], x[pki], x[pkj]);
                jm[(k, phi)] += 2.0 * hi * kj * kj * we;
                jm[(k, pkj)] += 2.0 * kj * hi * hi * we;
                jm[(k, phj)] += 2.0 * hj * ki * ki * we;
                jm[(k, pki)] += 2.0 * ki * hj * hj * we;
                k += 1;
            }
        }
        for l in 0..rows {
            for p in l * m..(l + 1) * m {
                jm[(k, p)] = 2.0 * x[p] * wn;
            }
            k += 1;
        }
        jm
    };

    let lm = LmOptions { max_iterations: opts.max_iterations, ..LmOptions::default() };
    let starts: Vec<DVector<f64>> = match &ds.intensities {
        Some(rows_i) if rows_i.len() == rows && rows_i.iter().all(|r| r.len() == m) => {
            let raw = DVector::from_iterator(np, rows_i.iter().flat_map(|r| r.iter().map(|v| v.max(0.0).sqrt())));
            if raw.iter().any(|&v| v == 0.0) {
                // ρ = 0 is a stationary point of the plateau model: also try a start lifted off it
                let lifted = raw.map(|v| v.max(INIT_FLOOR.sqrt()));
                vec![raw, lifted]
            } else {
                vec![raw]
            }
        }
        // uniform rows with a small row-dependent tilt so no two rows coincide
        _ => vec![DVector::from_fn(np, |p, _| {
            let (l, i) = (p / m, p % m);
            ((1.0 + 0.1 * ((l + 1) as f64 * (i + 1) as f64).sin()) / m as f64).sqrt()
        })],
    };
    let rep = starts
        .into_iter()
        .map(|x0| levenberg_marquardt(x0, res, jac, &lm))
        .filter(|r| r.converged)
        .min_by(|a, b| a.cost.total_cmp(&b.cost))
        .ok_or_else(|| Error::FitFailed { iterations: opts.max_iterations, reason: "moduli fit did not converge".into() })?;
    Ok(RMatrix::from_fn(rows, m, |l, i| rep.x[l * m + i].abs()))
}

/// Measured coincidence levels and their weights, per input pair.
struct PhaseData<'a> {
    ds: &'a HomDataset,
    /// `(pair, entry, q, 1/ε)` for entries with a defined visibility.
    terms: Vec<(usize, usize, f64, f64)>,
}

impl<'a> PhaseData<'a> {
    fn new(ds: &'a HomDataset) -> Self {
        let mut terms = Vec::new();
        for (p, row) in ds.entries.iter().enumerate() {
            let floor = eps_floor(row);
            for (k, e) in row.iter().enumerate() {
                if let Some(q) = e.coincidence() {
                    terms.push((p, k, q, 1.0 / e.eps.max(floor)));
                }
            }
        }
        Self { ds, terms }
    }

    fn amplitude(&self, s: &CMatrix, p: usize, k: usize) -> (Complex64, [(usize, usize, Complex64); 4]) {
        let (h, kk) = self.ds.input_pairs[p];
        let e = &self.ds.entries[p][k];
        let t1 = s[(h, e.i)] * s[(kk, e.j)];
        let t2 = s[(h, e.j)] * s[(kk, e.i)];
        (t1 + t2, [(h, e.i, t1), (kk, e.j, t1), (h, e.j, t2), (kk, e.i, t2)])
    }

    fn residuals(&self, s: &CMatrix) -> DVector<f64> {
        DVector::from_iterator(
            self.terms.len(),
            self.terms.iter().map(|&(p, k, q, w)| (self.amplitude(s, p, k).0.norm_sqr() - q) * w),
        )
    }
}

/// The phase objective `Σ [a(1 − V) − |U_ih U_jk + U_jh U_ik|²]²/ε²` of a
/// candidate submatrix.
pub fn chi2(candidate: &ReconstructedSubmatrix, ds: &HomDataset) -> Result<f64> {
    validate_dataset(ds)?;
    if candidate.rows != ds.rows() || candidate.cols != ds.outputs {
        return Err(Error::Domain("candidate shape does not match the dataset".into()));
    }
    Ok(PhaseData::new(ds).residuals(&candidate.matrix()).norm_squared())
}

fn polar(rho: &RMatrix, phi: &RMatrix) -> CMatrix {
    CMatrix::from_fn(rho.nrows(), rho.ncols(), |l, i| Complex64::from_polar(rho[(l, i)], phi[(l, i)]))
}

/// Free phases: every entry off the reference row and column.
struct PhaseParams {
    rows: usize,
    cols: usize,
    gauge: Gauge,
}

impl PhaseParams {
    fn index(&self, l: usize, i: usize) -> Option<usize> {
        if l == self.gauge.reference_row || i == self.gauge.reference_column {
            return None;
        }
        let lr = if l > self.gauge.reference_row { l - 1 } else { l };
        let ic = if i > self.gauge.reference_column { i - 1 } else { i };
        Some(lr * (self.cols - 1) + ic)
    }

    fn len(&self) -> usize {
        (self.rows - 1) * (self.cols - 1)
    }

    fn pack(&self, phi: &RMatrix) -> DVector<f64> {
        let mut x = DVector::zeros(self.len());
        for l in 0..self.rows {
            for i in 0..self.cols {
                if let Some(p) = self.index(l, i) {
                    x[p] = phi[(l, i)];
                }
            }
        }
        x
    }

    fn unpack(&self, x: &DVector<f64>) -> RMatrix {
        RMatrix::from_fn(self.rows, self.cols, |l, i| self.index(l, i).map_or(0.0, |p| x[p]))
    }
}

/// Local least-squares polish of the phases with the moduli held fixed.
/// The objective never increases; `stagnated` flags an iteration cap.
pub fn refine_chi2(candidate: &ReconstructedSubmatrix, ds: &HomDataset) -> Result<ReconstructedSubmatrix> {
    refine_with(candidate, ds, &ReconstructionOptions::default())
}

fn refine_with(candidate: &ReconstructedSubmatrix, ds: &HomDataset, opts: &ReconstructionOptions) -> Result<ReconstructedSubmatrix> {
    validate_dataset(ds)?;
    if candidate.rows != ds.rows() || candidate.cols != ds.outputs || candidate.rows < 2 {
        return Err(Error::Domain("candidate shape does not match the dataset".into()));
    }
    let rho = RMatrix::from_fn(candidate.rows, candidate.cols, |l, i| candidate.moduli[l][i]);
    let phi0 = RMatrix::from_fn(candidate.rows, candidate.cols, |l, i| candidate.phases[l][i]);
    let params = PhaseParams { rows: candidate.rows, cols: candidate.cols, gauge: candidate.gauge };
    let data = PhaseData::new(ds);
    let (phi, cost, stagnated) = refine_phases(&data, &rho, &phi0, &params, opts.max_iterations);
    Ok(ReconstructedSubmatrix::from_parts(&candidate.inputs, &rho, &phi, candidate.gauge, 2.0 * cost, stagnated))
}

fn refine_phases(data: &PhaseData, rho: &RMatrix, phi0: &RMatrix, params: &PhaseParams, max_iterations: usize) -> (RMatrix, f64, bool) {
    let res = |x: &DVector<f64>| data.residuals(&polar(rho, &params.unpack(x)));
    let jac = |x: &DVector<f64>| {
        let s = polar(rho, &params.unpack(x));
        let mut jm = DMatrix::zeros(data.terms.len(), params.len());
        for (row, &(p, k, _, w)) in data.terms.iter().enumerate() {
            let (amp, terms) = data.amplitude(&s, p, k);
            for (l, i, t) in terms {
                if let Some(c) = params.index(l, i) {
                    // ∂|A|²/∂φ = 2 Re(Ā · i t)
                    jm[(row, c)] += -2.0 * (amp.conj() * t).im * w;
                }
            }
        }
        jm
    };
    let lm = LmOptions { max_iterations, ..LmOptions::default() };
    let rep = levenberg_marquardt(params.pack(phi0), res, jac, &lm);
    (params.unpack(&rep.x), rep.cost, !rep.converged)
}

/// `√Σ_{l<l'} |⟨row_l, row_l'⟩|²`; zero for rows of a unitary seen on all
/// outputs.
pub fn orthogonality_defect(sub: &CMatrix) -> f64 {
    let mut acc = 0.0;
    for l in 0..sub.nrows() {
        for r in (l + 1)..sub.nrows() {
            let ip: Complex64 = (0..sub.ncols()).map(|i| sub[(l, i)].conj() * sub[(r, i)]).sum();
            acc += ip.norm_sqr();
        }
    }
    acc.sqrt()
}

/// Analytic phases from the visibility relation followed by `χ²`
/// refinement.
///
/// Every row must be paired with row 0. Row 0 and the output with the
/// largest minimum modulus are the phase references. Each row's phase
/// magnitudes come from dips against the reference column and its relative
/// signs from dips against a pivot column; entries whose sign lowers `χ²`
/// when flipped are then flipped. Conjugating any subset of rows `≥ 1`
/// leaves every measured quantity unchanged when all pairs involve row 0,
/// so among those equal-`χ²` candidates the one whose rows are closest to
/// orthogonal is returned.
pub fn reconstruct_phases(ds: &HomDataset, moduli: &RMatrix, opts: &ReconstructionOptions) -> Result<ReconstructedSubmatrix> {
    validate_dataset(ds)?;
    let (rows, m) = (ds.rows(), ds.outputs);
    if moduli.nrows() != rows || moduli.ncols() != m {
        return Err(Error::Domain("moduli shape does not match the dataset".into()));
    }
    if rows < 2 {
        return Err(Error::UnderDetermined("phase recovery needs at least two rows".into()));
    }
    let mut pair_of_row = vec![None; rows];
    for (p, &(a, b)) in ds.input_pairs.iter().enumerate() {
        match (a, b) {
            (0, l) | (l, 0) => pair_of_row[l] = pair_of_row[l].or(Some(p)),
            _ => {}
        }
    }
    if let Some(l) = (1..rows).find(|&l| pair_of_row[l].is_none()) {
        return Err(Error::UnderDetermined(format!("row {l} is not paired with reference row 0")));
    }
    let reference_column = (0..m)
        .max_by(|&a, &b| {
            let ma = (0..rows).map(|l| moduli[(l, a)]).fold(f64::INFINITY, f64::min);
            let mb = (0..rows).map(|l| moduli[(l, b)]).fold(f64::INFINITY, f64::min);
            ma.total_cmp(&mb).then(b.cmp(&a))
        })
        .unwrap_or(0);
    let gauge = Gauge { reference_row: 0, reference_column };
    let r = reference_column;

    // cos Δ with its propagated standard error, for pair p and outputs (i, j)
    let cosine = |p: usize, l: usize, i: usize, j: usize| -> Option<(f64, f64)> {
        let e = &ds.entries[p][pair_index(m, i, j)];
        let q = e.coincidence()?;
        let den = 2.0 * moduli[(0, i)] * moduli[(l, j)] * moduli[(0, j)] * moduli[(l, i)];
        if !(den > 0.0) {
            return None;
        }
        Some(((q - e.a) / den, e.eps / den))
    };

    let mut phi = RMatrix::zeros(rows, m);
    for l in 1..rows {
        let p = pair_of_row[l].expect("checked above");
        let mut mag = vec![0.0; m];
        let mut reliable = vec![false; m];
        for j in (0..m).filter(|&j| j != r) {
            let Some((c, sd)) = cosine(p, l, r, j) else { continue };
            if c.abs() > 1.0 + opts.cos_tolerance + 5.0 * sd {
                return Err(Error::InconsistentData(format!(
                    "row {l}, outputs ({r}, {j}): |cos| = {:.4} exceeds 1",
                    c.abs()
                )));
            }
            mag[j] = c.clamp(-1.0, 1.0).acos();
            reliable[j] = sd < opts.reliability_sigma;
        }
        let pivot = (0..m)
            .filter(|&j| j != r && reliable[j])
            .max_by(|&a, &b| (mag[a].sin() * moduli[(l, a)]).total_cmp(&(mag[b].sin() * moduli[(l, b)])));
        for j in (0..m).filter(|&j| j != r) {
            phi[(l, j)] = mag[j];
        }
        let Some(piv) = pivot else { continue };
        for j in (0..m).filter(|&j| j != r && j != piv) {
            let Some((c, _)) = cosine(p, l, piv, j) else { continue };
            let same = (mag[j] - mag[piv]).cos();
            let opposite = (mag[j] + mag[piv]).cos();
            if (c - opposite).abs() < (c - same).abs() {
                phi[(l, j)] = -mag[j];
            }
        }
    }

    let params = PhaseParams { rows, cols: m, gauge };
    let data = PhaseData::new(ds);
    let (mut phi, mut cost, mut stagnated) = refine_phases(&data, moduli, &phi, &params, opts.max_iterations);
    // single-entry sign flips the local refinement cannot reach
    for _ in 0..4 {
        let mut improved = false;
        for l in 1..rows {
            for i in (0..m).filter(|&i| i != r) {
                let mut trial = phi.clone();
                trial[(l, i)] = -trial[(l, i)];
                let c = 0.5 * data.residuals(&polar(moduli, &trial)).norm_squared();
                if c < cost * (1.0 - 1e-12) {
                    phi = trial;
                    cost = c;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
        (phi, cost, stagnated) = refine_phases(&data, moduli, &phi, &params, opts.max_iterations);
    }

    let mut best: Option<(f64, RMatrix)> = None;
    for mask in 0..(1usize << (rows - 2)) {
        let mut cand = phi.clone();
        for l in 2..rows {
            if mask >> (l - 2) & 1 == 1 {
                for i in 0..m {
                    cand[(l, i)] = -cand[(l, i)];
                }
            }
        }
        let defect = orthogonality_defect(&polar(moduli, &cand));
        if best.as_ref().is_none_or(|(d, _)| defect < *d) {
            best = Some((defect, cand));
        }
    }
    let (_, phi) = best.expect("at least one candidate");
    Ok(ReconstructedSubmatrix::from_parts(&ds.inputs, moduli, &phi, gauge, 2.0 * cost, stagnated))
}

/// Moduli, then phases.
pub fn reconstruct(ds: &HomDataset, opts: &ReconstructionOptions) -> Result<ReconstructedSubmatrix> {
    let moduli = reconstruct_moduli(ds, opts)?;
    reconstruct_phases(ds, &moduli, opts)
}

fn quadruple(s: &CMatrix, l: usize, r: usize, i: usize, j: usize) -> Complex64 {
    s[(l, i)] * s[(r, j)] * s[(l, j)].conj() * s[(r, i)].conj()
}

/// `(moduli RMSE, RMSE of the gauge-invariant phase quadruples)` between a
/// reconstruction and the true rows. The quadruple comparison is taken as
/// the better of `a` and its complex conjugate, which produce identical
/// two-photon statistics.
pub fn gauge_distance(a: &ReconstructedSubmatrix, truth: &CMatrix) -> Result<(f64, f64)> {
    if a.rows != truth.nrows() || a.cols != truth.ncols() {
        return Err(Error::Domain(format!(
            "shape {}x{} vs {}x{}",
            a.rows,
            a.cols,
            truth.nrows(),
            truth.ncols()
        )));
    }
    let s = a.matrix();
    let n = (a.rows * a.cols) as f64;
    let moduli = (s.iter().zip(truth.iter()).map(|(x, y)| (x.norm() - y.norm()).powi(2)).sum::<f64>() / n).sqrt();
    let (mut direct, mut conj, mut count) = (0.0, 0.0, 0usize);
    for l in 0..a.rows {
        for r in (l + 1)..a.rows {
            for i in 0..a.cols {
                for j in (i + 1)..a.cols {
                    let qa = quadruple(&s, l, r, i, j).arg();
                    let qt = quadruple(truth, l, r, i, j).arg();
                    direct += wrap_phase(qa - qt).powi(2);
                    conj += wrap_phase(-qa - qt).powi(2);
                    count += 1;
                }
            }
        }
    }
    if count == 0 {
        return Ok((moduli, 0.0));
    }
    Ok((moduli, (direct.min(conj) / count as f64).sqrt().min(PI)))
}
