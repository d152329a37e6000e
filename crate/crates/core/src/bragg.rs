//! Four-mode Bragg subspace: momenta −2ħk and +2ħk, each with a z-quantized spin.
//!
//! Component order is (c₋₂↑, c₋₂↓, c₊₂↑, c₊₂↓) throughout.

use nalgebra::{Matrix2, Matrix4, SymmetricEigen, Vector2, Vector4};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type Mat4 = Matrix4<C64>;
pub type Vec4 = Vector4<C64>;

/// Which of the two Bragg-coupled momentum modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentumBlock {
    /// p_z = −2ħk (indices 0, 1).
    Minus,
    /// p_z = +2ħk (indices 2, 3).
    Plus,
}

impl MomentumBlock {
    fn offset(self) -> usize {
        match self {
            MomentumBlock::Minus => 0,
            MomentumBlock::Plus => 2,
        }
    }
}

/// Pure state in the Bragg subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct BraggState {
    amplitudes: Vec4,
}

impl BraggState {
    /// Normalized state from raw amplitudes; rejects the zero vector.
    pub fn new(amplitudes: [C64; 4]) -> Result<Self> {
        let v = Vec4::from(amplitudes);
        let n = v.norm();
        if !(n > 0.0) {
            return Err(Error::ZeroNorm);
        }
        Ok(Self { amplitudes: v / C64::new(n, 0.0) })
    }

    /// State `(0, spin)` or `(spin, 0)` depending on `block`.
    pub fn in_block(block: MomentumBlock, spin: [C64; 2]) -> Result<Self> {
        let mut a = [C64::default(); 4];
        a[block.offset()] = spin[0];
        a[block.offset() + 1] = spin[1];
        Self::new(a)
    }

    pub(crate) fn from_vector_unchecked(amplitudes: Vec4) -> Self {
        Self { amplitudes }
    }

    pub fn amplitudes(&self) -> &Vec4 {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn spinor(&self, block: MomentumBlock) -> [C64; 2] {
        let o = block.offset();
        [self.amplitudes[o], self.amplitudes[o + 1]]
    }

    pub fn population(&self, block: MomentumBlock) -> f64 {
        let s = self.spinor(block);
        s[0].norm_sqr() + s[1].norm_sqr()
    }

    pub fn density(&self) -> BraggDensity {
        BraggDensity { matrix: self.amplitudes * self.amplitudes.adjoint() }
    }

    /// Von Neumann entropy (bits) of the spin state after tracing out momentum.
    pub fn spin_entanglement_entropy(&self) -> f64 {
        let m = self.spinor(MomentumBlock::Minus);
        let p = self.spinor(MomentumBlock::Plus);
        let mut rho = Matrix2::<C64>::zeros();
        for s in [m, p] {
            let v = Vector2::new(s[0], s[1]);
            rho += v * v.adjoint();
        }
        entropy_bits(&rho)
    }
}

/// 4×4 density matrix on the Bragg subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct BraggDensity {
    matrix: Mat4,
}

impl BraggDensity {
    /// Validates Hermiticity (1e-12), unit trace (1e-12) and positivity (eigenvalues ≥ −1e-10).
    pub fn new(matrix: Mat4) -> Result<Self> {
        let herm = (matrix - matrix.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max);
        if herm > 1e-12 {
            return Err(Error::InvalidDensity(format!("not Hermitian (deviation {herm:.2e})")));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > 1e-12 || tr.im.abs() > 1e-12 {
            return Err(Error::InvalidDensity(format!("trace {tr} ≠ 1")));
        }
        let eig = SymmetricEigen::new(matrix).eigenvalues;
        if let Some(min) = eig.iter().copied().reduce(f64::min) {
            if min < -1e-10 {
                return Err(Error::InvalidDensity(format!("negative eigenvalue {min:.3e}")));
            }
        }
        Ok(Self { matrix })
    }

    /// Unpolarized spin ensemble in one momentum block: ½𝟙 on that block.
    pub fn unpolarized(block: MomentumBlock) -> Self {
        let mut m = Mat4::zeros();
        let o = block.offset();
        m[(o, o)] = C64::new(0.5, 0.0);
        m[(o + 1, o + 1)] = C64::new(0.5, 0.0);
        Self { matrix: m }
    }

    pub(crate) fn from_matrix_unchecked(matrix: Mat4) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn eigenvalues(&self) -> [f64; 4] {
        let e = SymmetricEigen::new(self.matrix).eigenvalues;
        [e[0], e[1], e[2], e[3]]
    }

    /// 2×2 spin block of one momentum mode (not renormalized).
    pub fn block(&self, block: MomentumBlock) -> Matrix2<C64> {
        let o = block.offset();
        self.matrix.fixed_view::<2, 2>(o, o).into_owned()
    }

    /// Off-diagonal (momentum coherence) block ρ(−, +).
    pub fn coherence(&self) -> Matrix2<C64> {
        self.matrix.fixed_view::<2, 2>(0, 2).into_owned()
    }

    pub fn population(&self, block: MomentumBlock) -> f64 {
        self.block(block).trace().re
    }

    /// Bloch vector of the spin within one momentum mode.
    pub fn bloch(&self, block: MomentumBlock) -> [f64; 3] {
        let b = self.block(block);
        let n = b.trace().re;
        // ⟨σ⟩ = tr(ρσ): σx → 2 Re ρ↓↑, σy → 2 Im ρ↓↑, σz → ρ↑↑ − ρ↓↓
        [2.0 * b[(1, 0)].re / n, 2.0 * b[(1, 0)].im / n, (b[(0, 0)].re - b[(1, 1)].re) / n]
    }
}

/// Von Neumann entropy (base 2) of a 2×2 density matrix, normalized by its trace.
pub(crate) fn entropy_bits(rho: &Matrix2<C64>) -> f64 {
    let tr = rho.trace().re;
    let eig = SymmetricEigen::new(*rho / C64::new(tr, 0.0)).eigenvalues;
    eig.iter()
        .filter(|&&l| l > 1e-300)
        .map(|&l| -l * l.log2())
        .sum::<f64>()
        .max(0.0)
}
