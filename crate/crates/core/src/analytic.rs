//! Closed-form Bragg-subspace model of the three-stage beam splitter.
//!
//! In the interaction picture the ±2ħk modes are degenerate, so each stage acts through a
//! constant coupling `H = (ħΩ/2)·M` with `M² = 𝟙`, and the stage unitary for pulse area
//! θ = ΩT is `cos(θ/2)𝟙 − i sin(θ/2)M`. Field-induced detuning is not modelled here.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64 as C64;

use crate::bragg::{BraggDensity, BraggState, Mat4};
use crate::error::{Error, Result};
use crate::fields::{FieldKind, FieldStage};
use crate::units::ELECTRON_REST_ENERGY_EV as MC2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageKind {
    Mono,
    Bichromatic,
}

/// ħΩ_m = (e·a₀)²/(8mc²) for a standing wave of amplitude e·a₀ (eV).
pub fn rabi_frequency_mono(standing_amplitude: f64) -> f64 {
    standing_amplitude * standing_amplitude / (8.0 * MC2)
}

/// ħΩ_b = (e·a₁)²(e·a₂)ħω / (2(mc²)³).
pub fn rabi_frequency_bi(a1: f64, a2: f64, photon_energy: f64) -> f64 {
    a1 * a1 * a2 * photon_energy / (2.0 * MC2 * MC2 * MC2)
}

/// Ponderomotive potential of one stage in the Bragg regime.
///
/// Mono: `V(z) = V₀ cos(4kz + χ) 𝟙`; bichromatic: `V(z) = −V₀ sin(4kz) σ_y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectivePotential {
    pub kind: StageKind,
    /// V₀ = ħΩ in eV.
    pub strength: f64,
    /// Fundamental wavenumber k; the potential has period π/(2k).
    pub k: f64,
    /// Grating phase (mono only).
    pub chi: f64,
}

impl EffectivePotential {
    pub fn from_stage(stage: &FieldStage) -> Self {
        match &stage.kind {
            FieldKind::Mono(w) => Self {
                kind: StageKind::Mono,
                strength: rabi_frequency_mono(w.standing_amplitude()),
                k: w.photon_energy,
                chi: w.chi,
            },
            FieldKind::Bichromatic(w) => Self {
                kind: StageKind::Bichromatic,
                strength: rabi_frequency_bi(
                    w.amplitude_fundamental,
                    w.amplitude_harmonic,
                    w.photon_energy,
                ),
                k: w.photon_energy,
                chi: 0.0,
            },
        }
    }

    pub fn period(&self) -> f64 {
        FRAC_PI_2 / self.k
    }

    /// Power of the field envelope that scales the potential (A² → 2, a₁²a₂ → 3).
    pub fn envelope_power(&self) -> u32 {
        match self.kind {
            StageKind::Mono => 2,
            StageKind::Bichromatic => 3,
        }
    }

    /// Scalar part `a` and σ_y part `b` of V(z) = a𝟙 + bσ_y.
    pub fn components(&self, z: f64) -> (f64, f64) {
        match self.kind {
            StageKind::Mono => (self.strength * (4.0 * self.k * z + self.chi).cos(), 0.0),
            StageKind::Bichromatic => (0.0, -self.strength * (4.0 * self.k * z).sin()),
        }
    }

    /// V(z) as a 2×2 Hermitian matrix in the (↑, ↓) basis.
    pub fn value(&self, z: f64) -> [[C64; 2]; 2] {
        let (a, b) = self.components(z);
        // σ_y = [[0, −i], [i, 0]]
        [[C64::new(a, 0.0), C64::new(0.0, -b)], [C64::new(0.0, b), C64::new(a, 0.0)]]
    }
}

/// Pulse area θ = ∫Ω(t)dt of a stage, with Ω following the envelope power of its potential.
pub fn pulse_area(stage: &FieldStage) -> f64 {
    let pot = EffectivePotential::from_stage(stage);
    pot.strength * stage.envelope().power_integral(pot.envelope_power())
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// The involutory coupling matrix M (H = ħΩ/2 · M) in the order (c₋₂↑, c₋₂↓, c₊₂↑, c₊₂↓).
///
/// Mono: `[[0, e^{−iχ}𝟙], [e^{iχ}𝟙, 0]]`; bichromatic: `i[[0, −σ_y], [σ_y, 0]]`.
pub fn coupling_matrix(kind: StageKind, chi: f64) -> Mat4 {
    let mut m = Mat4::zeros();
    match kind {
        StageKind::Mono => {
            let e = C64::from_polar(1.0, -chi);
            for s in 0..2 {
                m[(s, 2 + s)] = e;
                m[(2 + s, s)] = e.conj();
            }
        }
        StageKind::Bichromatic => {
            // −iσ_y = [[0, −1], [1, 0]], iσ_y = [[0, 1], [−1, 0]]
            m[(0, 3)] = c(-1.0, 0.0);
            m[(1, 2)] = c(1.0, 0.0);
            m[(2, 1)] = c(1.0, 0.0);
            m[(3, 0)] = c(-1.0, 0.0);
        }
    }
    m
}

/// A 4×4 unitary on the Bragg subspace with provenance metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct StageUnitary {
    pub matrix: Mat4,
    pub kind: Option<StageKind>,
    pub area: f64,
    pub chi: f64,
}

impl StageUnitary {
    pub fn identity() -> Self {
        Self { matrix: Mat4::identity(), kind: None, area: 0.0, chi: 0.0 }
    }

    /// `self` applied after `first`.
    pub fn after(&self, first: &StageUnitary) -> StageUnitary {
        StageUnitary { matrix: self.matrix * first.matrix, kind: None, area: f64::NAN, chi: f64::NAN }
    }

    /// max |U†U − 𝟙|.
    pub fn unitarity_defect(&self) -> f64 {
        (self.matrix.adjoint() * self.matrix - Mat4::identity())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    pub fn apply(&self, state: &BraggState) -> BraggState {
        BraggState::from_vector_unchecked(self.matrix * state.amplitudes())
    }

    pub fn adjoint(&self) -> StageUnitary {
        StageUnitary { matrix: self.matrix.adjoint(), ..self.clone() }
    }
}

/// exp(−iθ/2 · M) for the stage coupling, in closed form.
pub fn stage_unitary(kind: StageKind, area: f64, chi: f64) -> StageUnitary {
    let (s, co) = (0.5 * area).sin_cos();
    let m = coupling_matrix(kind, chi);
    let matrix = Mat4::identity() * c(co, 0.0) - m * c(0.0, s);
    StageUnitary { matrix, kind: Some(kind), area, chi }
}

/// U = U₃U₂U₁: bichromatic π/2, mono π, mono π/2 (ideal pulse areas).
pub fn total_evolution(chi: f64) -> StageUnitary {
    let u1 = stage_unitary(StageKind::Bichromatic, FRAC_PI_2, 0.0);
    let u2 = stage_unitary(StageKind::Mono, PI, chi);
    let u3 = stage_unitary(StageKind::Mono, FRAC_PI_2, chi);
    let mut u = u3.after(&u2.after(&u1));
    u.chi = chi;
    u
}

/// Composite unitary of an ordered stage list, each stage at its envelope-weighted area.
pub fn sequence_unitary(stages: &[FieldStage]) -> StageUnitary {
    stages.iter().fold(StageUnitary::identity(), |acc, stage| {
        let pot = EffectivePotential::from_stage(stage);
        stage_unitary(pot.kind, pulse_area(stage), pot.chi).after(&acc)
    })
}

/// ρ → UρU†.
pub fn evolve_density(u: &StageUnitary, rho: &BraggDensity) -> Result<BraggDensity> {
    let m = rho.matrix();
    let herm = (m - m.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max);
    if herm > 1e-12 {
        return Err(Error::InvalidDensity(format!("not Hermitian (deviation {herm:.2e})")));
    }
    Ok(BraggDensity::from_matrix_unchecked(u.matrix * m * u.matrix.adjoint()))
}

/// The operator diag(σ_y, σ_y) on the Bragg subspace.
pub fn sigma_y_both_blocks() -> Mat4 {
    let mut m = Mat4::zeros();
    for o in [0, 2] {
        m[(o, o + 1)] = c(0.0, -1.0);
        m[(o + 1, o)] = c(0.0, 1.0);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bragg::MomentumBlock;
    use crate::fields::{AmplitudeConvention, BichromaticWave, Envelope, MonoStandingWave};
    use crate::spinor::{spin_minus_y, spin_plus_y};
    use crate::units::UnitSystem;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn max_dev(a: &Mat4, b: &Mat4) -> f64 {
        (a - b).iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    fn block_matrix(b: [[[[C64; 2]; 2]; 2]; 2]) -> Mat4 {
        let mut m = Mat4::zeros();
        for (bi, row) in b.iter().enumerate() {
            for (bj, blk) in row.iter().enumerate() {
                for i in 0..2 {
                    for j in 0..2 {
                        m[(2 * bi + i, 2 * bj + j)] = blk[i][j];
                    }
                }
            }
        }
        m
    }

    fn id2() -> [[C64; 2]; 2] {
        [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]]
    }
    fn sy() -> [[C64; 2]; 2] {
        [[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]]
    }
    fn zero2() -> [[C64; 2]; 2] {
        [[c(0.0, 0.0); 2]; 2]
    }
    fn lin(a: C64, x: [[C64; 2]; 2], b: C64, y: [[C64; 2]; 2]) -> [[C64; 2]; 2] {
        let mut r = zero2();
        for i in 0..2 {
            for j in 0..2 {
                r[i][j] = a * x[i][j] + b * y[i][j];
            }
        }
        r
    }

    #[test]
    fn rabi_frequency_values() {
        assert_eq!(rabi_frequency_mono(0.0), 0.0);
        assert!((rabi_frequency_mono(100.0) - 2.446e-3).abs() < 5e-7);
        let om = rabi_frequency_mono(200.0);
        assert!((om - 9.78e-3).abs() < 5e-6);
        // π-pulse time π/Ω_m ≈ 212 fs
        assert!((UnitSystem::time_to_fs(PI / om) - 212.0).abs() < 1.0);
        let ob = rabi_frequency_bi(2.35e4, 2.35e4, 200.0);
        assert!((ob - 9.73e-3).abs() < 5e-6, "{ob}");
        assert_eq!(rabi_frequency_bi(2.35e4, 0.0, 200.0), 0.0);
        // ½ħω ξ₁²ξ₂
        let xi = 2.35e4 / MC2;
        assert!(((0.5 * 200.0 * xi * xi * xi) - ob).abs() / ob < 1e-12);
    }

    #[test]
    fn stage_unitaries_at_named_areas() {
        let s = c(FRAC_1_SQRT_2, 0.0);
        let u1 = stage_unitary(StageKind::Bichromatic, FRAC_PI_2, 0.0);
        let expect1 = block_matrix([
            [lin(s, id2(), c(0.0, 0.0), id2()), lin(-s, sy(), c(0.0, 0.0), id2())],
            [lin(s, sy(), c(0.0, 0.0), id2()), lin(s, id2(), c(0.0, 0.0), id2())],
        ]);
        assert!(max_dev(&u1.matrix, &expect1) < 1e-15);

        let u2 = stage_unitary(StageKind::Mono, PI, FRAC_PI_2);
        let expect2 = block_matrix([
            [zero2(), lin(c(-1.0, 0.0), id2(), c(0.0, 0.0), id2())],
            [id2(), zero2()],
        ]);
        assert!(max_dev(&u2.matrix, &expect2) < 1e-15);

        for kind in [StageKind::Mono, StageKind::Bichromatic] {
            assert!(max_dev(&stage_unitary(kind, 0.0, 0.3).matrix, &Mat4::identity()) < 1e-15);
        }
    }

    #[test]
    fn eq10_general_chi() {
        let chi = -0.31;
        let u3 = stage_unitary(StageKind::Mono, FRAC_PI_2, chi);
        let s = FRAC_1_SQRT_2;
        let em = C64::from_polar(1.0, -chi) * c(0.0, -s);
        let ep = C64::from_polar(1.0, chi) * c(0.0, -s);
        let expect = block_matrix([
            [lin(c(s, 0.0), id2(), c(0.0, 0.0), id2()), lin(em, id2(), c(0.0, 0.0), id2())],
            [lin(ep, id2(), c(0.0, 0.0), id2()), lin(c(s, 0.0), id2(), c(0.0, 0.0), id2())],
        ]);
        assert!(max_dev(&u3.matrix, &expect) < 1e-15);
    }

    #[test]
    fn composition_and_unitarity() {
        for kind in [StageKind::Mono, StageKind::Bichromatic] {
            for &(a, b, chi) in &[(0.3, 1.1, 0.2), (PI, FRAC_PI_2, -1.0), (2.0, -0.7, 2.5)] {
                let lhs = stage_unitary(kind, a, chi).after(&stage_unitary(kind, b, chi));
                let rhs = stage_unitary(kind, a + b, chi);
                assert!(max_dev(&lhs.matrix, &rhs.matrix) < 1e-12);
                assert!(rhs.unitarity_defect() < 1e-12);
            }
        }
    }

    #[test]
    fn total_evolution_commutes_with_sigma_y() {
        let sy4 = sigma_y_both_blocks();
        for chi in [0.0, 0.4, FRAC_PI_2, -PI / 10.0] {
            let u = total_evolution(chi).matrix;
            assert!(max_dev(&(u * sy4), &(sy4 * u)) < 1e-12);
        }
    }

    #[test]
    fn spin_filter_on_y_states() {
        let u = total_evolution(FRAC_PI_2);
        let plus = BraggState::in_block(MomentumBlock::Plus, spin_plus_y()).unwrap();
        let out = u.apply(&plus);
        let target = BraggState::in_block(MomentumBlock::Plus, spin_plus_y()).unwrap();
        assert!((out.amplitudes() + target.amplitudes()).norm() < 1e-12);

        let minus = BraggState::in_block(MomentumBlock::Plus, spin_minus_y()).unwrap();
        let out = u.apply(&minus);
        let target = BraggState::in_block(MomentumBlock::Minus, spin_minus_y()).unwrap();
        assert!((out.amplitudes() + target.amplitudes()).norm() < 1e-12);
    }

    #[test]
    fn evolve_density_identities() {
        let rho = BraggDensity::unpolarized(MomentumBlock::Plus);
        let same = evolve_density(&StageUnitary::identity(), &rho).unwrap();
        assert!(max_dev(same.matrix(), rho.matrix()) < 1e-15);

        let v = BraggState::new([c(0.3, 0.1), c(-0.2, 0.5), c(0.7, 0.0), c(0.1, -0.4)]).unwrap();
        let u = stage_unitary(StageKind::Bichromatic, 0.77, 0.0)
            .after(&stage_unitary(StageKind::Mono, 1.3, 0.5));
        let lhs = evolve_density(&u, &v.density()).unwrap();
        let rhs = u.apply(&v).density();
        assert!(max_dev(lhs.matrix(), rhs.matrix()) < 1e-14);

        let mut bad = Mat4::identity() / c(4.0, 0.0);
        bad[(0, 2)] = c(0.0, 0.1);
        assert!(evolve_density(&u, &BraggDensity::from_matrix_unchecked(bad)).is_err());
    }

    #[test]
    fn effective_potential_values() {
        let mono = EffectivePotential { kind: StageKind::Mono, strength: 2.0, k: 200.0, chi: 0.0 };
        let v = mono.value(0.0);
        assert_eq!(v[0][0], c(2.0, 0.0));
        assert_eq!(v[0][1], c(0.0, 0.0));
        let bi = EffectivePotential { kind: StageKind::Bichromatic, strength: 3.0, k: 200.0, chi: 0.0 };
        let z = FRAC_PI_2 / (4.0 * 200.0);
        let v = bi.value(z);
        // −V₀σ_y
        assert!((v[0][1] - c(0.0, 3.0)).norm() < 1e-12 && (v[1][0] - c(0.0, -3.0)).norm() < 1e-12);

        let stage = FieldStage::mono(
            "m",
            MonoStandingWave {
                amplitude: 100.0,
                photon_energy: 200.0,
                chi: 0.0,
                envelope: Envelope::flat(1.0),
                start: 0.0,
                convention: AmplitudeConvention::Standing,
            },
        );
        assert!((EffectivePotential::from_stage(&stage).strength - 2.446e-3).abs() < 5e-7);
    }

    #[test]
    fn pulse_area_counts_edges() {
        let stage = FieldStage::bichromatic(
            "b",
            BichromaticWave {
                amplitude_fundamental: 2.35e4,
                amplitude_harmonic: 2.35e4,
                photon_energy: 200.0,
                envelope: Envelope::new(10.0, 100.0, 10.0).unwrap(),
                start: 0.0,
            },
        );
        let om = rabi_frequency_bi(2.35e4, 2.35e4, 200.0);
        assert!((pulse_area(&stage) - om * (100.0 + 20.0 * 0.3125)).abs() < 1e-12);
    }
}
