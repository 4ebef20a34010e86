//! Randomly modulated waveguide lattice, evanescent coupling law and the
//! thermo-optic heater model.
//!
//! Transverse coordinates are in µm, the propagation coordinate `z` in mm and
//! rates (couplings, detunings) in mm⁻¹.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LatticeKind {
    Linear,
    Square,
    #[default]
    Triangular,
}

impl std::str::FromStr for LatticeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(LatticeKind::Linear),
            "square" => Ok(LatticeKind::Square),
            "triangular" => Ok(LatticeKind::Triangular),
            other => Err(Error::Config(format!("unknown lattice kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatticeSpec {
    pub rows: usize,
    pub cols: usize,
    /// Nearest-neighbour spacing of the ideal lattice, µm.
    pub pitch: f64,
    /// Upper bound on the random displacement of each knot, µm.
    pub max_shift: f64,
    /// Length of the coupling region, mm.
    pub coupling_length: f64,
    pub n_modulation_knots: usize,
    pub seed: u64,
    pub kind: LatticeKind,
}

impl Default for LatticeSpec {
    fn default() -> Self {
        Self {
            rows: 4,
            cols: 8,
            pitch: 11.0,
            max_shift: 2.0,
            coupling_length: 36.0,
            n_modulation_knots: 8,
            seed: 0,
            kind: LatticeKind::Triangular,
        }
    }
}

impl LatticeSpec {
    pub fn m(&self) -> usize {
        self.rows * self.cols
    }

    pub fn validate(&self) -> Result<()> {
        if self.m() < 2 {
            return Err(Error::Config(format!("lattice needs at least 2 sites, got {}", self.m())));
        }
        if !(self.pitch > 0.0) || !self.pitch.is_finite() {
            return Err(Error::Config(format!("pitch must be positive, got {}", self.pitch)));
        }
        if !(self.max_shift >= 0.0) || self.max_shift >= self.pitch / 2.0 {
            return Err(Error::Config(format!(
                "max_shift must lie in [0, pitch/2), got {} with pitch {}",
                self.max_shift, self.pitch
            )));
        }
        if !(self.coupling_length > 0.0) || !self.coupling_length.is_finite() {
            return Err(Error::Config(format!(
                "coupling_length must be positive, got {}",
                self.coupling_length
            )));
        }
        if self.n_modulation_knots < 2 {
            return Err(Error::Config("n_modulation_knots must be at least 2".into()));
        }
        if self.kind == LatticeKind::Linear && self.rows != 1 && self.cols != 1 {
            return Err(Error::Config("a linear lattice needs rows == 1 or cols == 1".into()));
        }
        Ok(())
    }
}

/// Waveguide trajectories through the coupling region.
///
/// Each waveguide `i` follows `site[i] + displacement_i(z)` where the
/// displacement is piecewise linear between uniformly spaced knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveguideLayout {
    pub kind: LatticeKind,
    pub rows: usize,
    pub cols: usize,
    pub pitch: f64,
    pub length: f64,
    pub knot_z: Vec<f64>,
    pub sites: Vec<(f64, f64)>,
    /// `displacements[i][k]` is the offset of waveguide `i` at knot `k`.
    pub displacements: Vec<Vec<(f64, f64)>>,
}

impl WaveguideLayout {
    pub fn m(&self) -> usize {
        self.sites.len()
    }

    pub fn position(&self, i: usize, z: f64) -> (f64, f64) {
        let (sx, sy) = self.sites[i];
        let (dx, dy) = self.displacement(i, z);
        (sx + dx, sy + dy)
    }

    pub fn displacement(&self, i: usize, z: f64) -> (f64, f64) {
        let knots = &self.knot_z;
        let d = &self.displacements[i];
        let last = knots.len() - 1;
        let z = z.clamp(0.0, self.length);
        // uniform knots: locate the interval directly
        let h = self.length / last as f64;
        let k = ((z / h).floor() as usize).min(last - 1);
        let t = ((z - knots[k]) / (knots[k + 1] - knots[k])).clamp(0.0, 1.0);
        let (x0, y0) = d[k];
        let (x1, y1) = d[k + 1];
        (x0 + t * (x1 - x0), y0 + t * (y1 - y0))
    }

    pub fn distance(&self, i: usize, j: usize, z: f64) -> f64 {
        let (xi, yi) = self.position(i, z);
        let (xj, yj) = self.position(j, z);
        (xi - xj).hypot(yi - yj)
    }

    /// Pairs `(i, j)`, `i < j`, that are nearest neighbours on the ideal lattice.
    pub fn neighbor_pairs(&self) -> Vec<(usize, usize)> {
        let tol = 1e-6 * self.pitch;
        let mut pairs = Vec::new();
        for i in 0..self.m() {
            for j in (i + 1)..self.m() {
                let (xi, yi) = self.sites[i];
                let (xj, yj) = self.sites[j];
                if ((xi - xj).hypot(yi - yj) - self.pitch).abs() <= tol {
                    pairs.push((i, j));
                }
            }
        }
        pairs
    }

    /// Interior z-positions where the trajectories change slope.
    pub fn breakpoints(&self) -> Vec<f64> {
        let n = self.knot_z.len();
        self.knot_z[1..n - 1].to_vec()
    }

    /// Site permutation of the ideal lattice's point inversion through its
    /// centre, i.e. the 180° rotation of the cross-section. An isometry of the
    /// ideal sites for square and linear lattices, and for triangular ones with
    /// an even number of rows.
    pub fn inversion_permutation(&self) -> Vec<usize> {
        let m = self.m();
        (0..m).map(|i| m - 1 - i).collect()
    }

    /// Bounding box of the ideal sites, `(x_min, x_max, y_min, y_max)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        let xs = self.sites.iter().map(|s| s.0);
        let ys = self.sites.iter().map(|s| s.1);
        (
            xs.clone().fold(f64::INFINITY, f64::min),
            xs.fold(f64::NEG_INFINITY, f64::max),
            ys.clone().fold(f64::INFINITY, f64::min),
            ys.fold(f64::NEG_INFINITY, f64::max),
        )
    }
}

fn ideal_sites(spec: &LatticeSpec) -> Vec<(f64, f64)> {
    let p = spec.pitch;
    let mut sites = Vec::with_capacity(spec.m());
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            let site = match spec.kind {
                LatticeKind::Linear => ((r * spec.cols + c) as f64 * p, 0.0),
                LatticeKind::Square => (c as f64 * p, r as f64 * p),
                LatticeKind::Triangular => {
                    let offset = if r % 2 == 1 { 0.5 * p } else { 0.0 };
                    (c as f64 * p + offset, r as f64 * p * 3f64.sqrt() / 2.0)
                }
            };
            sites.push(site);
        }
    }
    sites
}

pub fn build_lattice(spec: &LatticeSpec) -> Result<WaveguideLayout> {
    spec.validate()?;
    let sites = ideal_sites(spec);
    let n_knots = spec.n_modulation_knots;
    let knot_z: Vec<f64> = (0..n_knots)
        .map(|k| spec.coupling_length * k as f64 / (n_knots - 1) as f64)
        .collect();

    let mut rng = rng_from_seed(spec.seed);
    let displacements = sites
        .iter()
        .map(|_| {
            (0..n_knots)
                .map(|_| {
                    let radius: f64 = rng.random_range(0.0..=1.0) * spec.max_shift;
                    let angle: f64 = rng.random_range(0.0..2.0 * PI);
                    (radius * angle.cos(), radius * angle.sin())
                })
                .collect()
        })
        .collect();

    Ok(WaveguideLayout {
        kind: spec.kind,
        rows: spec.rows,
        cols: spec.cols,
        pitch: spec.pitch,
        length: spec.coupling_length,
        knot_z,
        sites,
        displacements,
    })
}

/// Evanescent coupling law `c(d) = c0·exp(−(d − d0)/kappa)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CouplingModel {
    /// Coupling at the reference distance, mm⁻¹.
    pub c0: f64,
    /// Reference distance, µm.
    pub d0: f64,
    /// Decay length, µm.
    pub kappa: f64,
    /// Couplings below this value are dropped, mm⁻¹.
    pub truncation: f64,
}

impl Default for CouplingModel {
    fn default() -> Self {
        Self { c0: 0.2, d0: 11.0, kappa: 3.0, truncation: 1e-4 }
    }
}

impl CouplingModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.c0 > 0.0) || !(self.kappa > 0.0) {
            return Err(Error::Config(format!(
                "coupling model needs c0 > 0 and kappa > 0, got c0={} kappa={}",
                self.c0, self.kappa
            )));
        }
        if !(self.truncation >= 0.0) {
            return Err(Error::Config("coupling truncation must be non-negative".into()));
        }
        Ok(())
    }
}

pub fn coupling_coefficient(d: f64, model: &CouplingModel) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!("waveguide distance must be positive, got {d}")));
    }
    Ok(model.c0 * (-(d - model.d0) / model.kappa).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Heater {
    /// Transverse position, µm.
    pub x: f64,
    pub y: f64,
    /// Longitudinal extent `[z_start, z_end)`, mm.
    pub z_start: f64,
    pub z_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeaterBank {
    pub heaters: Vec<Heater>,
    /// Dissipated power per heater, mW.
    pub powers: Vec<f64>,
    /// Width of the Gaussian transverse kernel, µm.
    pub kernel_width: f64,
    /// Detuning per unit power at zero distance, mm⁻¹·mW⁻¹.
    pub alpha_t: f64,
}

/// Geometry of the default heater arrangement.
pub const DEVICE_HEATERS: usize = 16;
pub const HEATER_LENGTH_MM: f64 = 3.0;
const HEATER_LATERAL_GAP_UM: f64 = 15.0;
const HEATER_DEPTH_UM: f64 = 30.0;
const HEATER_KERNEL_UM: f64 = 40.0;
const CALIBRATION_POWER_MW: f64 = 500.0;

impl HeaterBank {
    /// Two rows of resistors running along the sides of the coupling region,
    /// `n_heaters / 2` per row, on the chip surface above the array.
    ///
    /// `alpha_t` is calibrated so that one heater at 500 mW imprints a phase
    /// of 2π on the waveguide closest to it over its 3 mm length.
    pub fn two_rows(layout: &WaveguideLayout, n_heaters: usize) -> Result<Self> {
        if n_heaters == 0 || !n_heaters.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "heaters come in two equal rows, got {n_heaters}"
            )));
        }
        let per_row = n_heaters / 2;
        let pitch_z = layout.length / per_row as f64;
        if pitch_z < HEATER_LENGTH_MM {
            return Err(Error::Config(format!(
                "{per_row} heaters of {HEATER_LENGTH_MM} mm do not fit in {} mm",
                layout.length
            )));
        }
        let (x_min, x_max, _, y_max) = layout.bounds();
        let y = y_max + HEATER_DEPTH_UM;
        let mut heaters = Vec::with_capacity(n_heaters);
        for x in [x_min - HEATER_LATERAL_GAP_UM, x_max + HEATER_LATERAL_GAP_UM] {
            for k in 0..per_row {
                let centre = (k as f64 + 0.5) * pitch_z;
                heaters.push(Heater {
                    x,
                    y,
                    z_start: centre - HEATER_LENGTH_MM / 2.0,
                    z_end: centre + HEATER_LENGTH_MM / 2.0,
                });
            }
        }
        let nearest = layout
            .sites
            .iter()
            .map(|&(sx, sy)| (sx - heaters[0].x).hypot(sy - heaters[0].y))
            .fold(f64::INFINITY, f64::min);
        let kernel = (-nearest * nearest / (2.0 * HEATER_KERNEL_UM * HEATER_KERNEL_UM)).exp();
        let alpha_t = 2.0 * PI / (CALIBRATION_POWER_MW * HEATER_LENGTH_MM * kernel);
        Ok(Self { heaters, powers: vec![0.0; n_heaters], kernel_width: HEATER_KERNEL_UM, alpha_t })
    }

    /// The 16-heater arrangement of the reference device.
    pub fn device(layout: &WaveguideLayout) -> Result<Self> {
        Self::two_rows(layout, DEVICE_HEATERS)
    }

    pub fn with_powers(mut self, powers: Vec<f64>) -> Result<Self> {
        self.powers = powers;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.powers.len() != self.heaters.len() {
            return Err(Error::Config(format!(
                "{} heaters but {} power values",
                self.heaters.len(),
                self.powers.len()
            )));
        }
        if let Some(p) = self.powers.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(Error::Config(format!("heater powers must be finite and >= 0, got {p}")));
        }
        if !(self.kernel_width > 0.0) {
            return Err(Error::Config("heater kernel width must be positive".into()));
        }
        Ok(())
    }

    /// Heater edges strictly inside `(0, length)`, sorted and deduplicated.
    pub fn breakpoints(&self, length: f64) -> Vec<f64> {
        let mut z: Vec<f64> = self
            .heaters
            .iter()
            .zip(&self.powers)
            .filter(|(_, &p)| p > 0.0)
            .flat_map(|(h, _)| [h.z_start, h.z_end])
            .filter(|&z| z > 0.0 && z < length)
            .collect();
        z.sort_by(f64::total_cmp);
        z.dedup();
        z
    }
}

/// Propagation-constant shifts `Δk_i(z)` induced by the heaters, mm⁻¹.
pub fn heater_detunings(bank: &HeaterBank, layout: &WaveguideLayout, z: f64) -> Result<Vec<f64>> {
    if !(0.0..=layout.length).contains(&z) {
        return Err(Error::Domain(format!("z = {z} outside [0, {}]", layout.length)));
    }
    bank.validate()?;
    let two_w2 = 2.0 * bank.kernel_width * bank.kernel_width;
    let positions: Vec<(f64, f64)> = (0..layout.m()).map(|i| layout.position(i, z)).collect();
    let mut out = vec![0.0; layout.m()];
    for (heater, &power) in bank.heaters.iter().zip(&bank.powers) {
        if power == 0.0 || z < heater.z_start || z >= heater.z_end {
            continue;
        }
        for (dk, &(x, y)) in out.iter_mut().zip(&positions) {
            let r2 = (x - heater.x).powi(2) + (y - heater.y).powi(2);
            *dk += bank.alpha_t * power * (-r2 / two_w2).exp();
        }
    }
    Ok(out)
}
