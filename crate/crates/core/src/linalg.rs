//! Dense complex matrix types shared across the crate.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type RMatrix = DMatrix<f64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Maximum entrywise magnitude of `U†U − I`.
pub fn unitarity_defect(u: &CMatrix) -> Result<f64> {
    if u.nrows() != u.ncols() {
        return Err(Error::Domain(format!(
            "unitarity defect needs a square matrix, got {}x{}",
            u.nrows(),
            u.ncols()
        )));
    }
    let g = u.adjoint() * u;
    let n = g.nrows();
    let mut worst = 0.0f64;
    for c in 0..n {
        for r in 0..n {
            let target = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((g[(r, c)] - Complex64::new(target, 0.0)).norm());
        }
    }
    Ok(worst)
}

/// Largest entrywise modulus of `a − b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `exp(i·t·H)` for real symmetric `H`, via its eigendecomposition. The
/// eigenvectors are real, so the real and imaginary parts are
/// `V·cos(λt)·Vᵀ` and `V·sin(λt)·Vᵀ`.
pub fn expi_symmetric(h: &RMatrix, t: f64) -> CMatrix {
    let eig = SymmetricEigen::new(h.clone());
    let v = &eig.eigenvectors;
    let mut vc = v.clone();
    let mut vs = v.clone();
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        let (s, c) = (l * t).sin_cos();
        vc.column_mut(k).scale_mut(c);
        vs.column_mut(k).scale_mut(s);
    }
    let vt = v.transpose();
    join_complex(&(vc * &vt), &(vs * &vt))
}

fn join_complex(re: &RMatrix, im: &RMatrix) -> CMatrix {
    re.zip_map(im, Complex64::new)
}

/// `a·b` through real matrix products, which take the optimised f64 kernel.
pub fn complex_mul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ai) = (a.map(|z| z.re), a.map(|z| z.im));
    let (br, bi) = (b.map(|z| z.re), b.map(|z| z.im));
    join_complex(&(&ar * &br - &ai * &bi), &(&ar * &bi + &ai * &br))
}

/// Real symmetric generator `H` of the coupled-mode equations at one `z`.
///
/// Couplings are real and non-negative and every entry is written to both
/// triangles from the same value, so `H[(i, j)] == H[(j, i)]` holds exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    entries: RMatrix,
}

impl HermitianMatrix {
    pub fn zeros(m: usize) -> Self {
        Self { entries: RMatrix::zeros(m, m) }
    }

    pub fn m(&self) -> usize {
        self.entries.nrows()
    }

    pub fn set_diagonal(&mut self, i: usize, value: f64) {
        self.entries[(i, i)] = value;
    }

    pub fn set_coupling(&mut self, i: usize, j: usize, value: f64) {
        self.entries[(i, j)] = value;
        self.entries[(j, i)] = value;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn real(&self) -> &RMatrix {
        &self.entries
    }

    pub fn to_complex(&self) -> CMatrix {
        self.entries.map(|v| Complex64::new(v, 0.0))
    }

    /// Number of non-zero off-diagonal entries in row `i`.
    pub fn degree(&self, i: usize) -> usize {
        (0..self.m()).filter(|&j| j != i && self.entries[(i, j)] != 0.0).count()
    }
}

/// An `m×m` complex matrix together with its measured unitarity defect.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix {
    entries: CMatrix,
    defect: f64,
}

impl UnitaryMatrix {
    pub fn new(entries: CMatrix) -> Result<Self> {
        let defect = unitarity_defect(&entries)?;
        Ok(Self { entries, defect })
    }

    pub fn identity(m: usize) -> Self {
        Self { entries: CMatrix::identity(m, m), defect: 0.0 }
    }

    pub fn m(&self) -> usize {
        self.entries.nrows()
    }

    pub fn unitarity_defect(&self) -> f64 {
        self.defect
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix {
        self.entries
    }

    /// Amplitude from input mode `input` to output mode `output`.
    pub fn amp(&self, output: usize, input: usize) -> Complex64 {
        self.entries[(output, input)]
    }

    pub fn conj(&self) -> Self {
        Self { entries: self.entries.map(|z| z.conj()), defect: self.defect }
    }
}

#[derive(Serialize, Deserialize)]
struct UnitaryRepr {
    m: usize,
    entries: Vec<Vec<[f64; 2]>>,
}

impl Serialize for UnitaryMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let m = self.m();
        let entries = (0..m)
            .map(|r| (0..m).map(|c| [self.entries[(r, c)].re, self.entries[(r, c)].im]).collect())
            .collect();
        UnitaryRepr { m, entries }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for UnitaryMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = UnitaryRepr::deserialize(d)?;
        if repr.entries.len() != repr.m || repr.entries.iter().any(|row| row.len() != repr.m) {
            return Err(D::Error::custom(format!("entries must be {0}x{0}", repr.m)));
        }
        let mat = CMatrix::from_fn(repr.m, repr.m, |r, c| {
            let [re, im] = repr.entries[r][c];
            Complex64::new(re, im)
        });
        UnitaryMatrix::new(mat).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_has_zero_defect() {
        assert_eq!(unitarity_defect(&CMatrix::identity(5, 5)).unwrap(), 0.0);
    }

    #[test]
    fn doubled_identity_defect_is_three() {
        let u = CMatrix::identity(3, 3) * Complex64::new(2.0, 0.0);
        assert_eq!(unitarity_defect(&u).unwrap(), 3.0);
    }

    #[test]
    fn non_square_is_domain_error() {
        let u = CMatrix::zeros(2, 3);
        assert!(matches!(unitarity_defect(&u), Err(Error::Domain(_))));
    }

    #[test]
    fn split_product_matches_complex_product() {
        let a = CMatrix::from_fn(4, 3, |i, j| Complex64::new(i as f64 - 1.5, 0.5 * j as f64 + 0.25));
        let b = CMatrix::from_fn(3, 5, |i, j| Complex64::new((i * j) as f64 * 0.1, 1.0 - j as f64));
        assert!(max_abs_diff(&complex_mul(&a, &b), &(&a * &b)) < 1e-14);
    }

    #[test]
    fn expi_of_pauli_x() {
        let c = 0.37;
        let h = RMatrix::from_row_slice(2, 2, &[0.0, c, c, 0.0]);
        let u = expi_symmetric(&h, 1.3);
        let want = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new((c * 1.3f64).cos(), 0.0),
                I * (c * 1.3f64).sin(),
                I * (c * 1.3f64).sin(),
                Complex64::new((c * 1.3f64).cos(), 0.0),
            ],
        );
        assert!(max_abs_diff(&u, &want) < 1e-14);
    }

    #[test]
    fn hermitian_entries_are_mirrored() {
        let mut h = HermitianMatrix::zeros(3);
        h.set_coupling(0, 2, 0.123456789);
        assert_eq!(h.get(0, 2), h.get(2, 0));
        assert_eq!(h.degree(0), 1);
        assert_eq!(h.degree(1), 0);
    }
}
