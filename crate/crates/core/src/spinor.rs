use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;

/// Two-component Pauli spinor sampled on a periodic grid.
///
/// Components are quantized along z: `up[j]` and `down[j]` are ψ↑(z_j), ψ↓(z_j).
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorWavefunction {
    grid: SpatialGrid,
    pub(crate) up: Vec<C64>,
    pub(crate) down: Vec<C64>,
}

/// Spin state along +y: (|↑⟩ + i|↓⟩)/√2.
pub fn spin_plus_y() -> [C64; 2] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [C64::new(s, 0.0), C64::new(0.0, s)]
}

/// Spin state along −y: (|↑⟩ − i|↓⟩)/√2.
pub fn spin_minus_y() -> [C64; 2] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [C64::new(s, 0.0), C64::new(0.0, -s)]
}

/// Bloch vector (⟨σx⟩, ⟨σy⟩, ⟨σz⟩) of the unnormalized 2×2 spin density
/// `[[uu, ud], [ud*, dd]]` with `ud = Σ ψ↑* ψ↓`.
pub(crate) fn bloch_from_moments(uu: f64, dd: f64, ud: C64) -> [f64; 3] {
    let n = uu + dd;
    [2.0 * ud.re / n, 2.0 * ud.im / n, (uu - dd) / n]
}

impl SpinorWavefunction {
    pub fn new(grid: SpatialGrid, up: Vec<C64>, down: Vec<C64>) -> Result<Self> {
        if up.len() != grid.points() || down.len() != grid.points() {
            return Err(Error::InvalidGrid(format!(
                "component lengths {}/{} do not match {} grid points",
                up.len(),
                down.len(),
                grid.points()
            )));
        }
        Ok(Self { grid, up, down })
    }

    pub fn zeros(grid: SpatialGrid) -> Self {
        let n = grid.points();
        Self { grid, up: vec![C64::default(); n], down: vec![C64::default(); n] }
    }

    /// Normalized Gaussian packet ψ ∝ exp(−(z−z₀)²/(4σ²)) e^{ipz} ⊗ spin.
    ///
    /// `width` is the standard deviation σ of the position density. The envelope is
    /// evaluated with the periodic distance to `center`.
    pub fn gaussian_packet(
        grid: &SpatialGrid,
        center: f64,
        width: f64,
        central_momentum: f64,
        spin: [C64; 2],
    ) -> Result<Self> {
        let min = 4.0 * grid.spacing();
        if !(width >= min) {
            return Err(Error::PacketTooNarrow { width, min });
        }
        let tail = (-(0.5 * grid.length()).powi(2) / (4.0 * width * width)).exp();
        if tail >= 1e-10 {
            return Err(Error::PacketOverlapsBoundary { tail });
        }
        let spin_norm = (spin[0].norm_sqr() + spin[1].norm_sqr()).sqrt();
        if spin_norm == 0.0 {
            return Err(Error::ZeroNorm);
        }
        let s = [spin[0] / spin_norm, spin[1] / spin_norm];

        let mut up = Vec::with_capacity(grid.points());
        let mut down = Vec::with_capacity(grid.points());
        for z in grid.positions() {
            let d = (z - center + 0.5 * grid.length()).rem_euclid(grid.length()) - 0.5 * grid.length();
            let env = (-d * d / (4.0 * width * width)).exp();
            let amp = C64::from_polar(env, central_momentum * z);
            up.push(amp * s[0]);
            down.push(amp * s[1]);
        }
        let mut psi = Self { grid: grid.clone(), up, down };
        psi.normalize()?;
        Ok(psi)
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn up(&self) -> &[C64] {
        &self.up
    }

    pub fn down(&self) -> &[C64] {
        &self.down
    }

    pub fn norm(&self) -> f64 {
        let s: f64 = self
            .up
            .iter()
            .zip(&self.down)
            .map(|(u, d)| u.norm_sqr() + d.norm_sqr())
            .sum();
        s * self.grid.spacing()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::ZeroNorm);
        }
        let f = 1.0 / n.sqrt();
        self.up.iter_mut().chain(self.down.iter_mut()).for_each(|c| *c *= f);
        Ok(())
    }

    /// ⟨ψ|φ⟩ on the grid.
    pub fn inner(&self, other: &Self) -> C64 {
        let s: C64 = self
            .up
            .iter()
            .zip(&other.up)
            .chain(self.down.iter().zip(&other.down))
            .map(|(a, b)| a.conj() * b)
            .sum();
        s * self.grid.spacing()
    }

    /// (⟨σx⟩, ⟨σy⟩, ⟨σz⟩) normalized by ⟨ψ|ψ⟩.
    pub fn spin_expectations(&self) -> Result<[f64; 3]> {
        let (mut uu, mut dd, mut ud) = (0.0, 0.0, C64::default());
        for (u, d) in self.up.iter().zip(&self.down) {
            uu += u.norm_sqr();
            dd += d.norm_sqr();
            ud += u.conj() * d;
        }
        if !(uu + dd > 0.0) {
            return Err(Error::ZeroNorm);
        }
        Ok(bloch_from_moments(uu, dd, ud))
    }

    /// Spin density matrix with the spatial degree of freedom traced out, normalized to unit trace.
    pub fn reduced_spin_density(&self) -> Result<[[C64; 2]; 2]> {
        let (mut uu, mut dd, mut ud) = (0.0, 0.0, C64::default());
        for (u, d) in self.up.iter().zip(&self.down) {
            uu += u.norm_sqr();
            dd += d.norm_sqr();
            ud += u * d.conj();
        }
        let n = uu + dd;
        if !(n > 0.0) {
            return Err(Error::ZeroNorm);
        }
        Ok([[C64::new(uu / n, 0.0), ud / n], [ud.conj() / n, C64::new(dd / n, 0.0)]])
    }

    pub fn position_expectation(&self) -> f64 {
        let (mut w, mut s) = (0.0, 0.0);
        for (j, (u, d)) in self.up.iter().zip(&self.down).enumerate() {
            let p = u.norm_sqr() + d.norm_sqr();
            w += p;
            s += p * self.grid.position(j);
        }
        s / w
    }

    /// Position variance about the mean (no periodic unwrapping; packets sit away from edges).
    pub fn position_variance(&self) -> f64 {
        let mean = self.position_expectation();
        let (mut w, mut s) = (0.0, 0.0);
        for (j, (u, d)) in self.up.iter().zip(&self.down).enumerate() {
            let p = u.norm_sqr() + d.norm_sqr();
            let z = self.grid.position(j) - mean;
            w += p;
            s += p * z * z;
        }
        s / w
    }

    /// Continuum-normalized momentum amplitudes φ(p_j) in FFT order.
    ///
    /// Σ (|φ↑|² + |φ↓|²) Δp equals the spatial norm (Parseval).
    pub fn momentum_amplitudes(&self) -> (Vec<C64>, Vec<C64>) {
        let n = self.grid.points();
        let fft = FftPlanner::new().plan_fft_forward(n);
        let scale = self.grid.spacing() / (2.0 * PI).sqrt();
        let origin = self.grid.origin();
        let phases: Vec<C64> = (0..n)
            .map(|j| C64::from_polar(scale, -self.grid.momentum(j) * origin))
            .collect();
        let mut up = self.up.clone();
        let mut down = self.down.clone();
        fft.process(&mut up);
        fft.process(&mut down);
        for ((u, d), ph) in up.iter_mut().zip(down.iter_mut()).zip(&phases) {
            *u *= ph;
            *d *= ph;
        }
        (up, down)
    }

    pub fn momentum_norm(&self) -> f64 {
        let (u, d) = self.momentum_amplitudes();
        let s: f64 = u.iter().zip(&d).map(|(a, b)| a.norm_sqr() + b.norm_sqr()).sum();
        s * self.grid.momentum_spacing()
    }

    pub fn momentum_expectation(&self) -> f64 {
        let (u, d) = self.momentum_amplitudes();
        let (mut w, mut s) = (0.0, 0.0);
        for (j, (a, b)) in u.iter().zip(&d).enumerate() {
            let p = a.norm_sqr() + b.norm_sqr();
            w += p;
            s += p * self.grid.momentum(j);
        }
        s / w
    }

    pub fn momentum_variance(&self) -> f64 {
        let mean = self.momentum_expectation();
        let (u, d) = self.momentum_amplitudes();
        let (mut w, mut s) = (0.0, 0.0);
        for (j, (a, b)) in u.iter().zip(&d).enumerate() {
            let p = a.norm_sqr() + b.norm_sqr();
            let x = self.grid.momentum(j) - mean;
            w += p;
            s += p * x * x;
        }
        s / w
    }

    /// Projection amplitudes onto the σy eigenstates |+⟩, |−⟩ at each grid point.
    pub fn y_projections(&self) -> (Vec<C64>, Vec<C64>) {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let i = C64::i();
        self.up
            .iter()
            .zip(&self.down)
            .map(|(u, d)| ((u - i * d) * s, (u + i * d) * s))
            .unzip()
    }

    /// Multiply by a global phase.
    pub fn with_global_phase(mut self, phase: f64) -> Self {
        let f = C64::from_polar(1.0, phase);
        self.up.iter_mut().chain(self.down.iter_mut()).for_each(|c| *c *= f);
        self
    }

    /// Cyclic translation by `shift` grid points.
    pub fn translated(mut self, shift: isize) -> Self {
        let n = self.grid.points() as isize;
        let s = shift.rem_euclid(n) as usize;
        self.up.rotate_right(s);
        self.down.rotate_right(s);
        self
    }

    /// Apply a constant 2×2 spin matrix at every point.
    pub fn apply_spin_matrix(&mut self, m: [[C64; 2]; 2]) {
        for (u, d) in self.up.iter_mut().zip(self.down.iter_mut()) {
            let (a, b) = (*u, *d);
            *u = m[0][0] * a + m[0][1] * b;
            *d = m[1][0] * a + m[1][1] * b;
        }
    }

    /// Time-reversal Θ = iσy K: (ψ↑, ψ↓) → (ψ↓*, −ψ↑*).
    pub fn time_reversed(&self) -> Self {
        let up = self.down.iter().map(|d| d.conj()).collect();
        let down = self.up.iter().map(|u| -u.conj()).collect();
        Self { grid: self.grid.clone(), up, down }
    }

    /// Inverse of [`SpinorWavefunction::time_reversed`].
    pub fn time_reversed_inverse(&self) -> Self {
        let up = self.down.iter().map(|d| -d.conj()).collect();
        let down = self.up.iter().map(|u| u.conj()).collect();
        Self { grid: self.grid.clone(), up, down }
    }

    pub fn is_finite(&self) -> bool {
        self.up.iter().chain(&self.down).all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::UnitSystem;

    fn reference_grid() -> SpatialGrid {
        SpatialGrid::centered(UnitSystem::um_to_length(3.0), 16384).unwrap()
    }

    fn up() -> [C64; 2] {
        [C64::new(1.0, 0.0), C64::default()]
    }

    #[test]
    fn packet_at_reference_parameters() {
        let g = reference_grid();
        let sigma = UnitSystem::um_to_length(0.11);
        let psi = SpinorWavefunction::gaussian_packet(&g, 0.0, sigma, 400.0, up()).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-12);
        assert!((psi.momentum_expectation() - 400.0).abs() < g.momentum_spacing());
        assert!(psi.position_expectation().abs() < g.spacing());
        let s = psi.spin_expectations().unwrap();
        assert!((s[2] - 1.0).abs() < 1e-12);
        // σ_p = ħ/(2σ_z) = 197.327 nm·eV / 220 nm
        let sigma_p = psi.momentum_variance().sqrt();
        assert!((sigma_p - 0.897).abs() < 0.005, "{sigma_p}");
        assert!((sigma_p - 0.5 / sigma).abs() / sigma_p < 1e-6);
    }

    #[test]
    fn resting_packet_is_symmetric() {
        let g = reference_grid();
        let psi = SpinorWavefunction::gaussian_packet(&g, 0.0, 0.4, 0.0, up()).unwrap();
        assert!(psi.momentum_expectation().abs() < 1e-9);
        assert!(psi.spin_expectations().unwrap()[1].abs() < 1e-15);
    }

    #[test]
    fn bloch_vectors_of_basis_spins() {
        let g = SpatialGrid::centered(40.0, 1024).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let cases = [
            (up(), [0.0, 0.0, 1.0]),
            (spin_plus_y(), [0.0, 1.0, 0.0]),
            ([C64::new(s, 0.0), C64::new(s, 0.0)], [1.0, 0.0, 0.0]),
        ];
        for (spin, expect) in cases {
            let psi = SpinorWavefunction::gaussian_packet(&g, 1.0, 2.0, 0.3, spin).unwrap();
            let b = psi.spin_expectations().unwrap();
            for i in 0..3 {
                assert!((b[i] - expect[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn packet_preconditions() {
        let g = SpatialGrid::centered(40.0, 1024).unwrap();
        assert!(matches!(
            SpinorWavefunction::gaussian_packet(&g, 0.0, 0.1, 0.0, up()),
            Err(Error::PacketTooNarrow { .. })
        ));
        assert!(matches!(
            SpinorWavefunction::gaussian_packet(&g, 0.0, 8.0, 0.0, up()),
            Err(Error::PacketOverlapsBoundary { .. })
        ));
    }

    #[test]
    fn zero_state_has_no_spin() {
        let g = SpatialGrid::centered(40.0, 64).unwrap();
        assert_eq!(SpinorWavefunction::zeros(g).spin_expectations(), Err(Error::ZeroNorm));
    }

    #[test]
    fn parseval() {
        let g = SpatialGrid::new(30.0, 512, -11.0).unwrap();
        let mut psi =
            SpinorWavefunction::gaussian_packet(&g, 2.0, 1.5, 3.0, spin_minus_y()).unwrap();
        psi.up[17] += C64::new(0.3, -0.2);
        let a = psi.norm();
        let b = psi.momentum_norm();
        assert!(((a - b) / a).abs() < 1e-10);
    }

    #[test]
    fn time_reversal_inverts() {
        let g = SpatialGrid::centered(40.0, 256).unwrap();
        let psi = SpinorWavefunction::gaussian_packet(&g, 1.0, 2.0, 0.7, spin_plus_y()).unwrap();
        let back = psi.time_reversed().time_reversed_inverse();
        assert!((back.inner(&psi).norm() - 1.0).abs() < 1e-14);
    }
}
