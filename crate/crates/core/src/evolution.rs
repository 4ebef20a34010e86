//! Coupled-mode Hamiltonian and its z-ordered integration into the circuit
//! unitary.
//!
//! Light in the array obeys `da/dz = i·H(z)·a`, so the circuit is the ordered
//! product `U = … exp(i·H(z₂)Δz)·exp(i·H(z₁)Δz)` with later slices on the
//! left. `H(z)` is real symmetric: couplings on the ideal-lattice nearest
//! neighbour bonds and heater detunings on the diagonal.
//!
//! The integration grid is cut at every point where `H(z)` or its slope
//! jumps (modulation knots, heater edges) so each slice sees a smooth
//! generator and the scheme keeps its nominal order.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::lattice::{
    build_lattice, coupling_coefficient, heater_detunings, CouplingModel, HeaterBank, LatticeSpec, WaveguideLayout,
};
use crate::linalg::{complex_mul, expi_symmetric, CMatrix, HermitianMatrix, RMatrix, UnitaryMatrix};
use crate::rng::{derive_seed, rng_from_seed, Stream};

pub const DEFAULT_STEPS: usize = 1024;
pub const UNITARITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// One exponential per slice, generator sampled at the slice midpoint.
    /// Second order in the slice length.
    Midpoint,
    /// Commutator-free fourth-order Magnus scheme: two exponentials per slice
    /// built from the generator at the two Gauss–Legendre nodes.
    #[default]
    Magnus4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationOptions {
    pub n_steps: usize,
    pub integrator: Integrator,
    /// Common propagation constant; only contributes a global phase.
    pub k0: f64,
    pub execution: Execution,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self { n_steps: DEFAULT_STEPS, integrator: Integrator::default(), k0: 0.0, execution: Execution::default() }
    }
}

impl PropagationOptions {
    pub fn steps(n_steps: usize) -> Self {
        Self { n_steps, ..Self::default() }
    }
}

/// Reusable assembler: the neighbour list is fixed by the ideal lattice.
struct Assembler<'a> {
    layout: &'a WaveguideLayout,
    model: &'a CouplingModel,
    bank: &'a HeaterBank,
    pairs: Vec<(usize, usize)>,
    k0: f64,
}

impl<'a> Assembler<'a> {
    fn new(layout: &'a WaveguideLayout, model: &'a CouplingModel, bank: &'a HeaterBank, k0: f64) -> Result<Self> {
        model.validate()?;
        bank.validate()?;
        Ok(Self { layout, model, bank, pairs: layout.neighbor_pairs(), k0 })
    }

    fn at(&self, z: f64) -> Result<HermitianMatrix> {
        let m = self.layout.m();
        let detune = heater_detunings(self.bank, self.layout, z)?;
        let mut h = HermitianMatrix::zeros(m);
        for (i, dk) in detune.iter().enumerate() {
            h.set_diagonal(i, self.k0 + dk);
        }
        for &(i, j) in &self.pairs {
            let c = coupling_coefficient(self.layout.distance(i, j, z), self.model)?;
            if c >= self.model.truncation {
                h.set_coupling(i, j, c);
            }
        }
        Ok(h)
    }
}

pub fn assemble_hamiltonian(
    layout: &WaveguideLayout,
    model: &CouplingModel,
    bank: &HeaterBank,
    z: f64,
) -> Result<HermitianMatrix> {
    Assembler::new(layout, model, bank, 0.0)?.at(z)
}

/// Slices `(z_start, dz)` covering `[0, length]`, cut at every breakpoint.
///
/// Each smooth segment of length `ℓ` gets `max(1, round(n_steps·ℓ/length))`
/// equal slices, so the total is `n_steps` up to rounding.
pub fn slice_grid(length: f64, breakpoints: &[f64], n_steps: usize) -> Vec<(f64, f64)> {
    let mut edges: Vec<f64> = std::iter::once(0.0)
        .chain(breakpoints.iter().copied().filter(|&z| z > 0.0 && z < length))
        .chain(std::iter::once(length))
        .collect();
    edges.sort_by(f64::total_cmp);
    edges.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * length);
    let mut slices = Vec::with_capacity(n_steps + edges.len());
    for w in edges.windows(2) {
        let seg = w[1] - w[0];
        let k = ((n_steps as f64 * seg / length).round() as usize).max(1);
        let dz = seg / k as f64;
        for s in 0..k {
            slices.push((w[0] + s as f64 * dz, dz));
        }
    }
    slices
}

fn slice_propagator(asm: &Assembler<'_>, integrator: Integrator, z0: f64, dz: f64) -> Result<CMatrix> {
    match integrator {
        Integrator::Midpoint => {
            let h = asm.at(z0 + 0.5 * dz)?;
            Ok(expi_symmetric(h.real(), dz))
        }
        Integrator::Magnus4 => {
            let r = 3f64.sqrt() / 6.0;
            let h1 = asm.at(z0 + (0.5 - r) * dz)?;
            let h2 = asm.at(z0 + (0.5 + r) * dz)?;
            let (a1, a2) = (0.25 - r, 0.25 + r);
            let first: RMatrix = h1.real() * a2 + h2.real() * a1;
            let second: RMatrix = h1.real() * a1 + h2.real() * a2;
            Ok(complex_mul(&expi_symmetric(&second, dz), &expi_symmetric(&first, dz)))
        }
    }
}

pub fn propagate_with(
    layout: &WaveguideLayout,
    model: &CouplingModel,
    bank: &HeaterBank,
    opts: &PropagationOptions,
) -> Result<UnitaryMatrix> {
    if opts.n_steps == 0 {
        return Err(Error::Config("n_steps must be at least 1".into()));
    }
    if bank.heaters.len() != bank.powers.len() {
        return Err(Error::Config("heater bank dimension mismatch".into()));
    }
    let asm = Assembler::new(layout, model, bank, opts.k0)?;
    let mut cuts = layout.breakpoints();
    cuts.extend(bank.breakpoints(layout.length));
    let slices = slice_grid(layout.length, &cuts, opts.n_steps);

    let factors = opts
        .execution
        .map_slice(&slices, |&(z0, dz)| slice_propagator(&asm, opts.integrator, z0, dz));
    let m = layout.m();
    let mut u = CMatrix::identity(m, m);
    for f in factors {
        u = complex_mul(&f?, &u);
    }
    let out = UnitaryMatrix::new(u)?;
    if out.unitarity_defect() > UNITARITY_TOLERANCE {
        return Err(Error::Numerical(format!(
            "propagated matrix has unitarity defect {:.3e}",
            out.unitarity_defect()
        )));
    }
    Ok(out)
}

pub fn propagate(
    layout: &WaveguideLayout,
    model: &CouplingModel,
    bank: &HeaterBank,
    n_steps: usize,
) -> Result<UnitaryMatrix> {
    propagate_with(layout, model, bank, &PropagationOptions::steps(n_steps))
}

/// A complete device: geometry, coupling law and heater settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Device {
    pub layout: WaveguideLayout,
    pub model: CouplingModel,
    pub bank: HeaterBank,
}

/// Heater powers are drawn uniformly from `[0, DEFAULT_MAX_POWER)` mW for
/// random device configurations.
pub const DEFAULT_MAX_POWER: f64 = 500.0;

/// Input waveguides fed by the four source modes: the central 2×2 block of
/// the default 4×8 lattice.
pub const DEFAULT_INPUTS: [usize; 4] = [11, 12, 19, 20];

impl Device {
    /// The reference 32-mode device (default lattice with `lattice_seed`,
    /// 16 heaters, all off).
    pub fn reference(lattice_seed: u64) -> Result<Self> {
        let spec = LatticeSpec { seed: lattice_seed, ..LatticeSpec::default() };
        let layout = build_lattice(&spec)?;
        let bank = HeaterBank::device(&layout)?;
        Ok(Self { layout, model: CouplingModel::default(), bank })
    }

    /// Reference device with heater powers drawn uniformly in `[0, max_power)`.
    pub fn random(seed: u64, max_power: f64) -> Result<Self> {
        let dev = Self::reference(derive_seed(seed, Stream::Lattice))?;
        let powers = dev.random_powers(max_power, derive_seed(seed, Stream::Heaters));
        dev.with_powers(powers)
    }

    pub fn with_powers(mut self, powers: Vec<f64>) -> Result<Self> {
        self.bank = self.bank.with_powers(powers)?;
        Ok(self)
    }

    pub fn random_powers(&self, max_power: f64, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        (0..self.bank.heaters.len()).map(|_| rng.random::<f64>() * max_power).collect()
    }

    pub fn m(&self) -> usize {
        self.layout.m()
    }

    pub fn unitary(&self, opts: &PropagationOptions) -> Result<UnitaryMatrix> {
        propagate_with(&self.layout, &self.model, &self.bank, opts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeKind;
    use crate::linalg::max_abs_diff;
    use num_complex::Complex64;

    fn pair_layout(d: f64, length: f64) -> WaveguideLayout {
        let spec = LatticeSpec {
            rows: 1,
            cols: 2,
            pitch: d,
            max_shift: 0.0,
            coupling_length: length,
            n_modulation_knots: 2,
            seed: 0,
            kind: LatticeKind::Linear,
        };
        build_lattice(&spec).unwrap()
    }

    fn no_heaters() -> HeaterBank {
        HeaterBank { heaters: vec![], powers: vec![], kernel_width: 1.0, alpha_t: 0.0 }
    }

    #[test]
    fn two_mode_hamiltonian() {
        let model = CouplingModel::default();
        let layout = pair_layout(model.d0, 10.0);
        let h = assemble_hamiltonian(&layout, &model, &no_heaters(), 3.0).unwrap();
        assert_eq!(h.get(0, 1), model.c0);
        assert_eq!(h.get(1, 0), model.c0);
        assert_eq!(h.get(0, 0), 0.0);
    }

    #[test]
    fn directional_coupler_matches_analytic() {
        let model = CouplingModel::default();
        let length = 7.3;
        let layout = pair_layout(model.d0, length);
        let u = propagate(&layout, &model, &no_heaters(), 16).unwrap();
        let want = (model.c0 * length).sin().powi(2);
        assert!((u.amp(1, 0).norm_sqr() - want).abs() < 1e-10);
    }

    #[test]
    fn zero_coupling_is_identity() {
        let model = CouplingModel { c0: 1e-300, ..CouplingModel::default() };
        let spec = LatticeSpec { max_shift: 0.0, ..LatticeSpec::default() };
        let layout = build_lattice(&spec).unwrap();
        let bank = HeaterBank::device(&layout).unwrap();
        let u = propagate(&layout, &model, &bank, 8).unwrap();
        assert_eq!(u.matrix(), &CMatrix::identity(32, 32));
    }

    #[test]
    fn ideal_lattice_hamiltonian_is_z_independent() {
        let spec = LatticeSpec { max_shift: 0.0, ..LatticeSpec::default() };
        let layout = build_lattice(&spec).unwrap();
        let model = CouplingModel::default();
        let bank = HeaterBank::device(&layout).unwrap();
        let a = assemble_hamiltonian(&layout, &model, &bank, 1.0).unwrap();
        let b = assemble_hamiltonian(&layout, &model, &bank, 30.0).unwrap();
        assert_eq!(a, b);
        for i in 0..32 {
            for j in 0..32 {
                let v = a.get(i, j);
                assert!(v == 0.0 || (v - model.c0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn device_hamiltonian_sparsity() {
        let layout = build_lattice(&LatticeSpec { seed: 11, ..LatticeSpec::default() }).unwrap();
        let model = CouplingModel::default();
        let bank = HeaterBank::device(&layout).unwrap().with_powers(vec![100.0; 16]).unwrap();
        let h = assemble_hamiltonian(&layout, &model, &bank, 12.0).unwrap();
        assert_eq!(h.m(), 32);
        // bond count from the ideal geometry
        let mut degree = vec![0usize; 32];
        for (i, j) in layout.neighbor_pairs() {
            degree[i] += 1;
            degree[j] += 1;
        }
        for (i, &d) in degree.iter().enumerate() {
            assert_eq!(h.degree(i), d);
            assert!(h.degree(i) <= 6);
            for j in 0..32 {
                assert_eq!(h.get(i, j), h.get(j, i));
            }
        }
    }

    #[test]
    fn slice_grid_respects_breakpoints() {
        let g = slice_grid(36.0, &[5.0, 12.5], 100);
        let total: f64 = g.iter().map(|s| s.1).sum();
        assert!((total - 36.0).abs() < 1e-12);
        assert!(g.iter().any(|s| (s.0 - 5.0).abs() < 1e-12));
        assert!(g.iter().any(|s| (s.0 - 12.5).abs() < 1e-12));
        assert!((g.len() as i64 - 100).abs() <= 3);
    }

    #[test]
    fn zero_steps_rejected() {
        let model = CouplingModel::default();
        let layout = pair_layout(model.d0, 1.0);
        assert!(propagate(&layout, &model, &no_heaters(), 0).is_err());
    }

    #[test]
    fn k0_is_a_global_phase() {
        let layout = build_lattice(&LatticeSpec { seed: 2, ..LatticeSpec::default() }).unwrap();
        let model = CouplingModel::default();
        let bank = HeaterBank::device(&layout).unwrap();
        let base = propagate_with(&layout, &model, &bank, &PropagationOptions::steps(64)).unwrap();
        let opts = PropagationOptions { k0: 0.7, ..PropagationOptions::steps(64) };
        let shifted = propagate_with(&layout, &model, &bank, &opts).unwrap();
        let phase = Complex64::from_polar(1.0, 0.7 * layout.length);
        let scaled = base.matrix().map(|z| z * phase);
        assert!(max_abs_diff(&scaled, shifted.matrix()) < 1e-10);
    }

    fn step_change(dev: &Device, integrator: Integrator, n: usize) -> f64 {
        let coarse = dev.unitary(&PropagationOptions { integrator, ..PropagationOptions::steps(n) }).unwrap();
        let fine = dev.unitary(&PropagationOptions { integrator, ..PropagationOptions::steps(2 * n) }).unwrap();
        max_abs_diff(coarse.matrix(), fine.matrix())
    }

    #[test]
    fn integrator_orders() {
        let dev = Device::random(5, DEFAULT_MAX_POWER).unwrap();
        let mid = step_change(&dev, Integrator::Midpoint, 256) / step_change(&dev, Integrator::Midpoint, 512);
        assert!((mid - 4.0).abs() < 0.3, "midpoint ratio {mid}");
        let m4 = step_change(&dev, Integrator::Magnus4, 256) / step_change(&dev, Integrator::Magnus4, 512);
        // at least fourth order
        assert!(m4.log2() > 3.8, "magnus ratio {m4}");
    }

    #[test]
    fn ideal_lattice_commutes_with_inversion() {
        let layout = build_lattice(&LatticeSpec { max_shift: 0.0, ..LatticeSpec::default() }).unwrap();
        let bank = HeaterBank::device(&layout).unwrap();
        let u = propagate(&layout, &CouplingModel::default(), &bank, 32).unwrap();
        let perm = layout.inversion_permutation();
        let permuted = CMatrix::from_fn(32, 32, |i, j| u.amp(perm[i], perm[j]));
        assert!(max_abs_diff(&permuted, u.matrix()) < 1e-12);
    }

    #[test]
    fn propagation_preserves_norm() {
        let dev = Device::random(9, DEFAULT_MAX_POWER).unwrap();
        let u = dev.unitary(&PropagationOptions::steps(128)).unwrap();
        assert!(u.unitarity_defect() < 1e-12);
        for j in 0..32 {
            let norm: f64 = (0..32).map(|i| u.amp(i, j).norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }
}
