use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use proptest::prelude::*;

use spinsplit_core::analysis::{channel_report, spin_momentum_entanglement};
use spinsplit_core::analytic::{
    evolve_density, rabi_frequency_bi, stage_unitary, total_evolution, sigma_y_both_blocks, StageKind,
};
use spinsplit_core::bragg::{BraggDensity, BraggState, Mat4, MomentumBlock};
use spinsplit_core::design::{full_design_report, rabi_frequency_bi_xi, DesignInputs, ToleranceBudget};
use spinsplit_core::fields::{AmplitudeConvention, BichromaticWave, Envelope, FieldStage, MonoStandingWave};
use spinsplit_core::grid::SpatialGrid;
use spinsplit_core::spinor::SpinorWavefunction;
use spinsplit_core::units::ELECTRON_REST_ENERGY_EV as MC2;

fn max_abs(m: &Mat4) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

fn kind() -> impl Strategy<Value = StageKind> {
    prop_oneof![Just(StageKind::Mono), Just(StageKind::Bichromatic)]
}

fn spinor(theta: f64, phi: f64) -> [C64; 2] {
    [C64::new((theta / 2.0).cos(), 0.0), C64::from_polar((theta / 2.0).sin(), phi)]
}

fn stage(mono: bool, amp: f64, hw: f64, chi: f64, env: Envelope) -> FieldStage {
    if mono {
        FieldStage::mono(
            "m",
            MonoStandingWave {
                amplitude: amp,
                photon_energy: hw,
                chi,
                envelope: env,
                start: 0.0,
                convention: AmplitudeConvention::Traveling,
            },
        )
    } else {
        FieldStage::bichromatic(
            "b",
            BichromaticWave {
                amplitude_fundamental: amp,
                amplitude_harmonic: 0.7 * amp,
                photon_energy: hw,
                envelope: env,
                start: 0.0,
            },
        )
    }
}

/// A two-channel superposition around ±k on a small grid.
fn split_packet(k: f64, weight: f64, s1: [C64; 2], s2: [C64; 2]) -> SpinorWavefunction {
    let grid = SpatialGrid::centered(200.0, 2048).unwrap();
    let a = SpinorWavefunction::gaussian_packet(&grid, 0.0, 8.0, k, s1).unwrap();
    let b = SpinorWavefunction::gaussian_packet(&grid, 0.0, 8.0, -k, s2).unwrap();
    let (wa, wb) = (weight.sqrt(), (1.0 - weight).sqrt());
    let up = a.up().iter().zip(b.up()).map(|(x, y)| x * wa + y * wb).collect();
    let down = a.down().iter().zip(b.down()).map(|(x, y)| x * wa + y * wb).collect();
    let mut psi = SpinorWavefunction::new(grid, up, down).unwrap();
    psi.normalize().unwrap();
    psi
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stage_unitaries_are_unitary(k in kind(), area in -10.0f64..10.0, chi in -PI..PI) {
        let u = stage_unitary(k, area, chi);
        prop_assert!(max_abs(&(u.matrix.adjoint() * u.matrix - Mat4::identity())) < 1e-12);
    }

    #[test]
    fn areas_compose(k in kind(), a1 in -5.0f64..5.0, a2 in -5.0f64..5.0, chi in -PI..PI) {
        let lhs = stage_unitary(k, a1, chi).matrix * stage_unitary(k, a2, chi).matrix;
        let rhs = stage_unitary(k, a1 + a2, chi).matrix;
        prop_assert!(max_abs(&(lhs - rhs)) < 1e-12);
    }

    #[test]
    fn total_evolution_conserves_sigma_y(chi in -PI..PI) {
        let u = total_evolution(chi).matrix;
        let s = sigma_y_both_blocks();
        prop_assert!(max_abs(&(u * s - s * u)) < 1e-12);
    }

    #[test]
    fn density_evolution_stays_physical(chi in -PI..PI, theta in 0.0..PI, phi in 0.0..2.0 * PI, p in 0.0f64..1.0) {
        let pure = BraggState::in_block(MomentumBlock::Plus, spinor(theta, phi)).unwrap().density();
        let mixed = BraggDensity::new(
            pure.matrix() * C64::new(p, 0.0)
                + BraggDensity::unpolarized(MomentumBlock::Plus).matrix() * C64::new(1.0 - p, 0.0),
        )
        .unwrap();
        let rho = evolve_density(&total_evolution(chi), &mixed).unwrap();
        prop_assert!((rho.trace() - 1.0).norm() < 1e-12);
        prop_assert!(max_abs(&(rho.matrix() - rho.matrix().adjoint())) < 1e-12);
        prop_assert!(rho.eigenvalues().iter().all(|&e| e > -1e-10));
    }

    #[test]
    fn envelope_is_bounded_and_continuous(rise in 0.1f64..20.0, plateau in 0.0f64..50.0, fall in 0.1f64..20.0, u in 0.0f64..1.0) {
        let e = Envelope::new(rise, plateau, fall).unwrap();
        let t = u * e.total();
        let f = e.value(t);
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert_eq!(e.value(-1e-9), 0.0);
        prop_assert_eq!(e.value(e.total() + 1e-9), 0.0);
        if t >= rise && t <= rise + plateau {
            prop_assert_eq!(f, 1.0);
        }
        let h = 1e-7 * e.total();
        prop_assert!((e.value(t + h) - f).abs() < 1e-5);
    }

    #[test]
    fn vector_potential_is_periodic_and_curl_matches(
        mono in any::<bool>(), amp in 10.0f64..1e4, hw in 50.0f64..500.0, chi in -PI..PI,
        t in 0.0f64..100.0, u in 0.0f64..1.0,
    ) {
        let s = stage(mono, amp, hw, chi, Envelope::flat(200.0));
        let k = s.wavenumber();
        let z = u * 2.0 * PI / k;
        let a = s.vector_potential(t, z);
        let scale = s.vector_potential(t, 0.0).abs().max(amp);
        prop_assert!((s.vector_potential(t, z + 2.0 * PI / k) - a).abs() <= 1e-9 * scale);

        let dz = 1e-4 * 2.0 * PI / k;
        let fd = (s.vector_potential(t, z + dz) - s.vector_potential(t, z - dz)) / (2.0 * dz);
        let b = s.magnetic_field(t, z);
        prop_assert!((fd - b).abs() <= 1e-6 * (amp * 2.0 * k));
    }

    #[test]
    fn packets_carry_the_requested_spin(theta in 0.0..PI, phi in 0.0..2.0 * PI, p in -2.0f64..2.0) {
        let grid = SpatialGrid::centered(200.0, 1024).unwrap();
        let psi = SpinorWavefunction::gaussian_packet(&grid, 3.0, 10.0, p, spinor(theta, phi)).unwrap();
        let s = psi.spin_expectations().unwrap();
        let want = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
        for (a, b) in s.iter().zip(want) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        prop_assert!((psi.momentum_norm() / psi.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn channel_populations_ignore_phase_and_translation(
        w in 0.05f64..0.95, t1 in 0.0..PI, t2 in 0.0..PI, phase in -PI..PI, shift in -300isize..300,
    ) {
        let k = 1.0;
        let psi = split_packet(2.0 * k, w, spinor(t1, 0.3), spinor(t2, 1.1));
        let r0 = channel_report(&psi, k, k).unwrap();
        let r1 = channel_report(&psi.clone().with_global_phase(phase).translated(shift), k, k).unwrap();
        prop_assert!((r0.plus.population - r1.plus.population).abs() < 1e-10);
        prop_assert!((r0.minus.population - r1.minus.population).abs() < 1e-10);
        prop_assert!((r0.total() - 1.0).abs() < 1e-9);
        for c in [&r0.plus, &r0.minus] {
            let d = c.polarization_degree().unwrap();
            prop_assert!((0.0..=1.0).contains(&d));
            prop_assert_eq!(d, c.bloch[1].abs().min(1.0));
        }
    }

    #[test]
    fn entanglement_is_invariant_under_local_spin_rotation(w in 0.05f64..0.95, t1 in 0.0..PI, t2 in 0.0..PI, theta in -PI..PI) {
        let psi = split_packet(2.0, w, spinor(t1, 0.0), spinor(t2, 2.0));
        let s0 = spin_momentum_entanglement(&psi).unwrap();
        // e^{iθσ_y/2} = cos(θ/2) + i sin(θ/2) σ_y
        let (s, c) = (0.5 * theta).sin_cos();
        let mut rotated = psi.clone();
        rotated.apply_spin_matrix([[C64::new(c, 0.0), C64::new(s, 0.0)], [C64::new(-s, 0.0), C64::new(c, 0.0)]]);
        prop_assert!((spin_momentum_entanglement(&rotated).unwrap() - s0).abs() < 1e-10);
    }

    #[test]
    fn rabi_forms_agree(a1 in 1e3f64..5e4, a2 in 1e3f64..5e4, hw in 10.0f64..1e3) {
        let direct = rabi_frequency_bi(a1, a2, hw);
        let via_xi = rabi_frequency_bi_xi(a1 / MC2, a2 / MC2, hw);
        prop_assert!((via_xi / direct - 1.0).abs() < 1e-12);
    }

    #[test]
    fn design_reports_are_positive_and_pure(scale in 0.5f64..2.0, tol in 1e-4f64..0.05, dpx in 0.1f64..10.0) {
        let mut inputs = DesignInputs::example();
        inputs.amplitude_fundamental *= scale;
        inputs.amplitude_harmonic *= scale;
        inputs.tolerances = ToleranceBudget { dpz_over_pz: tol, dpy_over_py: tol, dpx, dl_over_l: 0.5 * tol };
        let r = full_design_report(&inputs).unwrap();
        let values = [
            r.intensity_fundamental, r.intensity_harmonic, r.intensity_mono, r.rabi_bi, r.rabi_mono,
            r.t_bi_fs, r.t_mono_fs, r.beam_width_um, r.pulse_energy_mj, r.momentum_acceptance,
            r.scatter_uncertainty, r.rabi_no_flip,
        ];
        prop_assert!(values.iter().all(|v| v.is_finite() && *v > 0.0));
        prop_assert_eq!(full_design_report(&inputs).unwrap(), r);
    }
}
