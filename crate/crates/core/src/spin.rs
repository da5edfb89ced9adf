//! Spin operators, irreducible tensor operators and the Bloch-tensor
//! expansion of a density matrix.
//!
//! Basis index 0 is the state with projection m = S; indices increase as the
//! projection decreases. Projections are passed around doubled (`two_m`) so
//! half-integer values stay exact.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Tolerance for hermiticity / trace / positivity checks on user input.
pub const VALIDATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct SpinValue {
    two_s: u32,
}

impl SpinValue {
    pub const MAX_TWO_S: u32 = 102;

    pub fn new(two_s: u32) -> Result<Self> {
        if two_s == 0 || two_s > Self::MAX_TWO_S {
            return Err(Error::Domain(format!(
                "2S must lie in 1..={}, got {two_s}",
                Self::MAX_TWO_S
            )));
        }
        Ok(Self { two_s })
    }

    /// Parses a spin given as a real number (0.5, 1, 1.5, ...).
    pub fn from_f64(s: f64) -> Result<Self> {
        let doubled = 2.0 * s;
        if !doubled.is_finite() || (doubled - doubled.round()).abs() > 1e-12 || doubled < 0.5 {
            return Err(Error::Domain(format!("spin must be a positive half-integer, got {s}")));
        }
        Self::new(doubled.round() as u32)
    }

    pub fn two_s(self) -> u32 {
        self.two_s
    }

    pub fn s(self) -> f64 {
        self.two_s as f64 / 2.0
    }

    pub fn dim(self) -> usize {
        self.two_s as usize + 1
    }

    /// Doubled projection of basis state `index`.
    pub fn two_m(self, index: usize) -> i32 {
        self.two_s as i32 - 2 * index as i32
    }

    /// Basis index of the doubled projection `two_m`.
    pub fn index(self, two_m: i32) -> Result<usize> {
        let ts = self.two_s as i32;
        if two_m.abs() > ts || (ts - two_m) % 2 != 0 {
            return Err(Error::Domain(format!(
                "projection {} is not valid for spin {}",
                two_m as f64 / 2.0,
                self.s()
            )));
        }
        Ok(((ts - two_m) / 2) as usize)
    }

    /// Doubled projections in basis order (descending).
    pub fn projections(self) -> impl Iterator<Item = i32> {
        let ts = self.two_s as i32;
        (0..=self.two_s as i32).map(move |k| ts - 2 * k)
    }
}

impl TryFrom<u32> for SpinValue {
    type Error = Error;
    fn try_from(v: u32) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SpinValue> for u32 {
    fn from(v: SpinValue) -> u32 {
        v.two_s
    }
}

impl std::fmt::Display for SpinValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.two_s.is_multiple_of(2) {
            write!(f, "{}", self.two_s / 2)
        } else {
            write!(f, "{}/2", self.two_s)
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub sz: CMatrix,
    pub s_plus: CMatrix,
    pub s_minus: CMatrix,
    pub sx: CMatrix,
    pub sy: CMatrix,
}

/// Matrix element ⟨m+1|S_+|m⟩ between basis indices `r` (row) and `r+1`.
pub(crate) fn raising_coefficient(spin: SpinValue, r: usize) -> f64 {
    ((r + 1) as f64 * (spin.two_s as usize - r) as f64).sqrt()
}

pub fn build_spin_operators(spin: SpinValue) -> SpinOperators {
    let d = spin.dim();
    let mut sz = CMatrix::zeros(d, d);
    let mut s_plus = CMatrix::zeros(d, d);
    for r in 0..d {
        sz[(r, r)] = Complex64::new(spin.two_m(r) as f64 / 2.0, 0.0);
        if r + 1 < d {
            s_plus[(r, r + 1)] = Complex64::new(raising_coefficient(spin, r), 0.0);
        }
    }
    let s_minus = s_plus.adjoint();
    let half = Complex64::new(0.5, 0.0);
    let sx = (&s_plus + &s_minus) * half;
    let sy = (&s_plus - &s_minus) * Complex64::new(0.0, -0.5);
    SpinOperators {
        sz,
        s_plus,
        s_minus,
        sx,
        sy,
    }
}

/// A tensor operator T_{s,m}: its only nonzero entries sit at (r, r+m).
/// Entries are real in the standard basis.
#[derive(Debug, Clone, PartialEq)]
pub struct BandOperator {
    pub m: i32,
    first_row: usize,
    band: Vec<f64>,
}

impl BandOperator {
    /// Entry at (row, row + m), zero outside the matrix.
    pub fn entry(&self, row: isize) -> f64 {
        if row < self.first_row as isize {
            return 0.0;
        }
        self.band
            .get((row - self.first_row as isize) as usize)
            .copied()
            .unwrap_or(0.0)
    }

    /// (row, value) pairs of the nonzero band.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.band.iter().enumerate().map(move |(k, &v)| (self.first_row + k, v))
    }

    pub fn hs_norm(&self) -> f64 {
        self.band.iter().map(|v| v * v).sum()
    }

    pub fn to_dense(&self, dim: usize) -> CMatrix {
        let mut out = CMatrix::zeros(dim, dim);
        for (r, v) in self.iter() {
            out[(r, (r as i32 + self.m) as usize)] = Complex64::new(v, 0.0);
        }
        out
    }
}

/// All T_{s,m} for one rank s, lowered from 2^{-s/2} S_+^s.
fn tensor_chain(spin: SpinValue, s: u32) -> Vec<BandOperator> {
    let d = spin.dim();
    let si = s as i32;
    // seed: product of consecutive raising coefficients along the s-th superdiagonal
    let scale = 2f64.powf(-(s as f64) / 2.0);
    let seed: Vec<f64> = (0..d - s as usize)
        .map(|r| {
            scale
                * (0..s as usize)
                    .map(|k| raising_coefficient(spin, r + k))
                    .product::<f64>()
        })
        .collect();
    let mut chain = vec![BandOperator {
        m: si,
        first_row: 0,
        band: seed,
    }];
    // lowering coefficient ⟨r+1|S_-|r⟩ equals the raising coefficient at r
    let lower = |r: isize| -> f64 {
        if r < 0 || r as usize + 1 >= d {
            0.0
        } else {
            raising_coefficient(spin, r as usize)
        }
    };
    for m in (-si + 1..=si).rev() {
        let prev = chain.last().unwrap();
        let new_m = m - 1;
        let first_row = (-new_m).max(0) as usize;
        let len = d - new_m.unsigned_abs() as usize;
        let norm = (((si + m) * (si - m + 1)) as f64).sqrt();
        let band = (0..len)
            .map(|k| {
                let r = (first_row + k) as isize;
                let c = r + new_m as isize;
                // [S_-, T]_{r,c} = S_-(r, r-1) T(r-1, c) - T(r, c+1) S_-(c+1, c)
                let comm = lower(r - 1) * prev.entry(r - 1) - prev.entry(r) * lower(c);
                -comm / norm
            })
            .collect();
        chain.push(BandOperator {
            m: new_m,
            first_row,
            band,
        });
    }
    chain.reverse();
    chain
}

fn check_rank(spin: SpinValue, s: u32, m: i32) -> Result<()> {
    if s == 0 || s > spin.two_s || m.unsigned_abs() > s {
        return Err(Error::Domain(format!(
            "tensor rank/projection (s={s}, m={m}) out of range for spin {spin}"
        )));
    }
    Ok(())
}

/// Dense matrix of T_{s,m} for the given spin.
pub fn tensor_operator(spin: SpinValue, s: u32, m: i32) -> Result<CMatrix> {
    check_rank(spin, s, m)?;
    let chain = tensor_chain(spin, s);
    Ok(chain[(m + s as i32) as usize].to_dense(spin.dim()))
}

/// Every tensor operator of a spin together with its Hilbert-Schmidt norm
/// Tr(T†T), which does not depend on m.
#[derive(Debug, Clone)]
pub struct TensorBasis {
    spin: SpinValue,
    ops: Vec<Vec<BandOperator>>,
    norms: Vec<f64>,
}

impl TensorBasis {
    pub fn new(spin: SpinValue) -> Self {
        let ops: Vec<Vec<BandOperator>> = (1..=spin.two_s).map(|s| tensor_chain(spin, s)).collect();
        let norms = ops.iter().map(|chain| chain[0].hs_norm()).collect();
        Self { spin, ops, norms }
    }

    pub fn spin(&self) -> SpinValue {
        self.spin
    }

    pub fn operator(&self, s: u32, m: i32) -> &BandOperator {
        &self.ops[s as usize - 1][(m + s as i32) as usize]
    }

    pub fn norm(&self, s: u32) -> f64 {
        self.norms[s as usize - 1]
    }

    /// Diagonal of T_{s,0}.
    pub fn diagonal(&self, s: u32) -> Vec<f64> {
        self.operator(s, 0).band.clone()
    }
}

/// Coefficients g_{s,m} of ρ = I/d + Σ g_{s,m} T_{s,m}†, with
/// g_{s,m} = Tr(ρ T_{s,m}) / Tr(T_{s,m}† T_{s,m}).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlochTensorSet {
    spin: SpinValue,
    g: Vec<Vec<Complex64>>,
}

impl BlochTensorSet {
    pub fn zeros(spin: SpinValue) -> Self {
        let g = (1..=spin.two_s)
            .map(|s| vec![Complex64::new(0.0, 0.0); 2 * s as usize + 1])
            .collect();
        Self { spin, g }
    }

    pub fn spin(&self) -> SpinValue {
        self.spin
    }

    pub fn get(&self, s: u32, m: i32) -> Complex64 {
        self.g[s as usize - 1][(m + s as i32) as usize]
    }

    pub fn set(&mut self, s: u32, m: i32, value: Complex64) {
        self.g[s as usize - 1][(m + s as i32) as usize] = value;
    }

    /// Components of rank s ordered m = -s..=s.
    pub fn rank(&self, s: u32) -> &[Complex64] {
        &self.g[s as usize - 1]
    }

    pub fn rank_mut(&mut self, s: u32) -> &mut [Complex64] {
        &mut self.g[s as usize - 1]
    }

    /// Largest violation of g_{s,-m} = (-1)^m conj(g_{s,m}).
    pub fn pairing_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for s in 1..=self.spin.two_s {
            for m in 0..=s as i32 {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                let diff = self.get(s, -m) - self.get(s, m).conj() * sign;
                worst = worst.max(diff.norm());
            }
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    spin: SpinValue,
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Validates hermiticity, unit trace and positivity.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let rho = Self::hermitian_unit_trace(matrix)?;
        let eig = nalgebra::SymmetricEigen::new(rho.matrix.clone());
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -VALIDATION_TOL {
            return Err(Error::Validation(format!(
                "density matrix has negative eigenvalue {min:e}"
            )));
        }
        Ok(rho)
    }

    /// Hermiticity and trace are checked; positivity is not.
    pub fn hermitian_unit_trace(matrix: CMatrix) -> Result<Self> {
        let d = matrix.nrows();
        if d != matrix.ncols() || d < 2 {
            return Err(Error::Validation(format!(
                "density matrix must be square with dimension >= 2, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let spin = SpinValue::new(d as u32 - 1)?;
        let herm = (&matrix - matrix.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if herm > VALIDATION_TOL {
            return Err(Error::Validation(format!(
                "density matrix is not Hermitian (defect {herm:e})"
            )));
        }
        let tr = matrix.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > VALIDATION_TOL {
            return Err(Error::Validation(format!("density matrix trace is {tr}, expected 1")));
        }
        Ok(Self { spin, matrix })
    }

    /// Pure diabatic basis state with doubled projection `two_m`.
    pub fn basis_state(spin: SpinValue, two_m: i32) -> Result<Self> {
        let k = spin.index(two_m)?;
        let mut matrix = CMatrix::zeros(spin.dim(), spin.dim());
        matrix[(k, k)] = Complex64::new(1.0, 0.0);
        Ok(Self { spin, matrix })
    }

    pub fn spin(&self) -> SpinValue {
        self.spin
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }
}

pub fn decompose_density(rho: &DensityMatrix) -> BlochTensorSet {
    decompose_with(&TensorBasis::new(rho.spin), rho.matrix())
}

/// Bloch coefficients of a matrix with a precomputed basis; the matrix is not validated.
pub fn decompose_with(basis: &TensorBasis, rho: &CMatrix) -> BlochTensorSet {
    let spin = basis.spin;
    let mut out = BlochTensorSet::zeros(spin);
    for s in 1..=spin.two_s {
        let norm = basis.norm(s);
        for m in -(s as i32)..=s as i32 {
            // Tr(ρ T) = Σ_r ρ(r+m, r) T(r, r+m)
            let op = basis.operator(s, m);
            let acc: Complex64 = op.iter().map(|(r, v)| rho[((r as i32 + m) as usize, r)] * v).sum();
            out.set(s, m, acc / norm);
        }
    }
    out
}

pub fn reconstruct_density(bloch: &BlochTensorSet) -> Result<DensityMatrix> {
    let defect = bloch.pairing_defect();
    if defect > VALIDATION_TOL {
        return Err(Error::Validation(format!(
            "Bloch coefficients violate g(s,-m) = (-1)^m conj g(s,m) (defect {defect:e})"
        )));
    }
    let matrix = reconstruct_with(&TensorBasis::new(bloch.spin), bloch);
    Ok(DensityMatrix {
        spin: bloch.spin,
        matrix,
    })
}

/// I/d + Σ g_{s,m} T_{s,m}† without validation.
pub fn reconstruct_with(basis: &TensorBasis, bloch: &BlochTensorSet) -> CMatrix {
    let spin = basis.spin;
    let d = spin.dim();
    let mut rho = CMatrix::identity(d, d) * Complex64::new(1.0 / d as f64, 0.0);
    for s in 1..=spin.two_s {
        for m in -(s as i32)..=s as i32 {
            let g = bloch.get(s, m);
            for (r, v) in basis.operator(s, m).iter() {
                rho[((r as i32 + m) as usize, r)] += g * v;
            }
        }
    }
    rho
}

/// Σ_m |g_{s,m}|² for s = 1..=2S.
pub fn invariant_norms(bloch: &BlochTensorSet) -> Vec<f64> {
    bloch
        .g
        .iter()
        .map(|rank| rank.iter().map(|z| z.norm_sqr()).sum())
        .collect()
}
