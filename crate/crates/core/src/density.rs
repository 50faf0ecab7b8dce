//! Dense density matrices for states that are not diagonal in the energy basis.

use alloc::vec::Vec;

use crate::error::{contract, Result};
use crate::linalg::{hermitian_eigenvalues, CMatrix, C64};
use crate::math::{self, xlogx, KahanSum};
use crate::model::{DiagonalState, Spectrum, ThermalContext};

/// Eigenvalues below this are treated as zero in `p ln p`.
pub const EIGENVALUE_FLOOR: f64 = 1e-14;

/// Hermitian, trace-one, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity (1e-12), unit trace (1e-12) and eigenvalues ≥ −1e-10.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.rows() != matrix.cols() || matrix.rows() == 0 {
            return Err(contract!("density matrix must be square and non-empty"));
        }
        let herm = matrix.hermiticity_defect();
        if herm > 1e-12 {
            return Err(contract!("matrix is not Hermitian (defect {herm:e})"));
        }
        let tr = matrix.trace();
        if math::fabs(tr.re - 1.0) > 1e-12 || math::fabs(tr.im) > 1e-12 {
            return Err(contract!("trace is {tr}, expected 1"));
        }
        let min = hermitian_eigenvalues(&matrix).first().copied().unwrap_or(0.0);
        if min < -1e-10 {
            return Err(contract!("matrix has negative eigenvalue {min:e}"));
        }
        Ok(DensityMatrix { matrix })
    }

    /// Skips validation; for internally constructed states.
    pub(crate) fn new_unchecked(matrix: CMatrix) -> Self {
        DensityMatrix { matrix }
    }

    pub fn from_diagonal(state: &DiagonalState) -> Self {
        DensityMatrix { matrix: CMatrix::from_diagonal(state.populations()) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.matrix[(r, c)]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).collect()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// Largest off-diagonal modulus.
    pub fn max_off_diagonal(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for c in 0..n {
            for r in 0..n {
                if r != c {
                    worst = worst.max(self.matrix[(r, c)].norm());
                }
            }
        }
        worst
    }

    /// Diagonal state when every off-diagonal entry is below `tol`.
    pub fn as_diagonal(&self, tol: f64) -> Option<DiagonalState> {
        if self.max_off_diagonal() > tol {
            return None;
        }
        let mut d = self.diagonal();
        let total: f64 = d.iter().sum();
        d.iter_mut().for_each(|x| *x = x.max(0.0) / total);
        DiagonalState::from_populations(d).ok()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    /// Von Neumann entropy in nats.
    pub fn entropy(&self) -> f64 {
        let mut s = KahanSum::default();
        for p in self.eigenvalues() {
            if p > EIGENVALUE_FLOOR {
                s.add(-xlogx(p));
            }
        }
        s.value()
    }

    /// `tr[H ρ]` for a Hamiltonian diagonal in `spectrum`'s basis.
    pub fn mean_energy(&self, spectrum: &Spectrum) -> Result<f64> {
        if spectrum.dimension() != self.dim() {
            return Err(contract!(
                "density matrix of dimension {} on a spectrum of dimension {}",
                self.dim(),
                spectrum.dimension()
            ));
        }
        let mut u = KahanSum::default();
        for (i, s) in spectrum.basis().enumerate() {
            u.add(self.matrix[(i, i)].re * spectrum.energy_of(s.energy));
        }
        Ok(u.value())
    }

    pub fn free_energy(&self, spectrum: &Spectrum, ctx: ThermalContext) -> Result<f64> {
        Ok(self.mean_energy(spectrum)? - self.entropy() / ctx.beta())
    }

    /// Trace distance `½ Σ |eig(a − b)|`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(contract!("trace distance between dimensions {} and {}", self.dim(), other.dim()));
        }
        let n = self.dim();
        let mut diff = CMatrix::zeros(n, n);
        for c in 0..n {
            for r in 0..n {
                diff[(r, c)] = self.matrix[(r, c)] - other.matrix[(r, c)];
            }
        }
        Ok(0.5 * hermitian_eigenvalues(&diff).iter().map(|x| math::fabs(*x)).sum::<f64>())
    }

    /// Reduces a state on `dims[0] ⊗ dims[1] ⊗ …` (row-major index, last factor fastest)
    /// to factor `keep`.
    pub fn partial_trace(&self, dims: &[usize], keep: usize) -> Result<DensityMatrix> {
        let total: usize = dims.iter().product();
        if total != self.dim() || keep >= dims.len() {
            return Err(contract!("factor dims {dims:?} do not match dimension {}", self.dim()));
        }
        let inner: usize = dims[keep + 1..].iter().product();
        let outer: usize = dims[..keep].iter().product();
        let dk = dims[keep];
        let mut out = CMatrix::zeros(dk, dk);
        for o in 0..outer {
            for i in 0..inner {
                for a in 0..dk {
                    let ra = (o * dk + a) * inner + i;
                    for b in 0..dk {
                        let rb = (o * dk + b) * inner + i;
                        out[(a, b)] += self.matrix[(ra, rb)];
                    }
                }
            }
        }
        Ok(DensityMatrix { matrix: out })
    }
}
