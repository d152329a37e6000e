//! Experiment-design formulas: intensities, interaction geometry, pulse energy and tolerances.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::analytic::{rabi_frequency_bi, rabi_frequency_mono};
use crate::error::{Error, Result};
use crate::units::{
    UnitSystem, ELECTRON_REST_ENERGY_EV as MC2, HBAR_C_EV_M, SPEED_OF_LIGHT_M_S, VACUUM_PERMITTIVITY,
};

/// ξ above which the nonrelativistic treatment is flagged.
pub const XI_LIMIT: f64 = 0.2;
/// v/c above which nonrelativistic kinematics are flagged.
pub const VELOCITY_LIMIT: f64 = 0.05;
/// Upper bound on the longitudinal momentum acceptance quoted for the example parameters.
pub const MOMENTUM_ACCEPTANCE_BOUND: f64 = 0.04;

/// One laser beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserSpec {
    /// ħω in eV.
    pub photon_energy: f64,
    /// ξ = e·a/mc².
    pub xi: f64,
    /// Beam widths Δx, Δy in μm.
    pub waist_x_um: f64,
    pub waist_y_um: f64,
    /// Pulse duration in fs.
    pub duration_fs: f64,
}

impl LaserSpec {
    pub fn from_amplitude(photon_energy: f64, amplitude: f64) -> Self {
        Self { photon_energy, xi: amplitude / MC2, waist_x_um: 0.0, waist_y_um: 0.0, duration_fs: 0.0 }
    }

    /// e·a in eV.
    pub fn amplitude(&self) -> f64 {
        self.xi * MC2
    }

    pub fn is_nonrelativistic(&self) -> bool {
        self.xi < XI_LIMIT
    }

    pub fn intensity(&self) -> f64 {
        intensity_from_xi(self.xi, self.photon_energy)
    }
}

/// Spread of the incident electron beam.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ToleranceBudget {
    pub dpz_over_pz: f64,
    pub dpy_over_py: f64,
    /// Δp_x in eV/c.
    pub dpx: f64,
    pub dl_over_l: f64,
}

impl ToleranceBudget {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("Δp_z/p_z", self.dpz_over_pz),
            ("Δp_y/p_y", self.dpy_over_py),
            ("Δp_x", self.dpx),
            ("ΔL/L", self.dl_over_l),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be ≥ 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Peak intensity (W/cm²) of a linearly polarized wave with E = ξ·mcω/e.
pub fn intensity_from_xi(xi: f64, photon_energy: f64) -> f64 {
    // mcω/e in V/m: (mc² in V)·(k in 1/m)
    let k = photon_energy / HBAR_C_EV_M;
    let e_field = xi * MC2 * k;
    0.5 * VACUUM_PERMITTIVITY * SPEED_OF_LIGHT_M_S * e_field * e_field * 1e-4
}

/// ħΩ_b = ½ħω ξ₁²ξ₂.
pub fn rabi_frequency_bi_xi(xi1: f64, xi2: f64, photon_energy: f64) -> f64 {
    0.5 * photon_energy * xi1 * xi1 * xi2
}

/// Interaction time (fs) for a π/2 pulse and the beam width (μm) crossed in that time by an
/// electron of the given (transverse) kinetic energy.
pub fn interaction_geometry(rabi_bi: f64, kinetic_energy: f64) -> Result<(f64, f64)> {
    if !(rabi_bi > 0.0 && kinetic_energy > 0.0) {
        return Err(Error::InvalidParameter("Rabi frequency and kinetic energy must be positive".into()));
    }
    let t = FRAC_PI_2 / rabi_bi;
    let v = UnitSystem::velocity_from_kinetic_energy(kinetic_energy);
    Ok((UnitSystem::time_to_fs(t), UnitSystem::length_to_um(v * t)))
}

/// Top-hat estimate E = I·Δx·Δy·τ in mJ (intensity in W/cm², widths in μm, duration in fs).
pub fn pulse_energy(intensity: f64, dx_um: f64, dy_um: f64, duration_fs: f64) -> f64 {
    intensity * (dx_um * 1e-4) * (dy_um * 1e-4) * (duration_fs * 1e-15) * 1e3
}

/// Δp_z/p_z = mΩ_b/(4ħk²) with ħk in eV/c.
pub fn momentum_acceptance(rabi_bi: f64, hbar_k: f64) -> f64 {
    MC2 * rabi_bi / (4.0 * hbar_k * hbar_k)
}

/// ΔP/P = (π/2)(Δp_y/p_y + ΔL/L).
pub fn scatter_probability_uncertainty(dpy_over_py: f64, dl_over_l: f64) -> f64 {
    FRAC_PI_2 * (dpy_over_py + dl_over_l)
}

/// ħΩ_no-flip = (5Δp_x/2ħk)·ħΩ_b.
pub fn no_flip_rabi(dpx: f64, hbar_k: f64, rabi_bi: f64) -> f64 {
    2.5 * dpx / hbar_k * rabi_bi
}

/// Inputs of a full design evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignInputs {
    /// Fundamental ħω of the bichromatic stage (eV).
    pub photon_energy: f64,
    pub amplitude_fundamental: f64,
    pub amplitude_harmonic: f64,
    /// e·a₀ of the monochromatic stages (per traveling wave, eV).
    pub amplitude_mono: f64,
    /// Kinetic energy of the transverse motion (eV).
    pub electron_energy: f64,
    pub tolerances: ToleranceBudget,
}

impl DesignInputs {
    /// The numerical example: e·a₁ = e·a₂ = 2.35e4 eV, ħω = 200 eV, e·a₀ = 100 eV, 30 eV electrons.
    pub fn example() -> Self {
        Self {
            photon_energy: 200.0,
            amplitude_fundamental: 2.35e4,
            amplitude_harmonic: 2.35e4,
            amplitude_mono: 100.0,
            electron_energy: 30.0,
            tolerances: ToleranceBudget::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignReport {
    pub xi1: f64,
    pub xi2: f64,
    /// W/cm².
    pub intensity_fundamental: f64,
    pub intensity_harmonic: f64,
    /// Per traveling wave of the monochromatic stages.
    pub intensity_mono: f64,
    /// eV.
    pub rabi_bi: f64,
    pub rabi_mono: f64,
    /// rad/s.
    pub rabi_bi_angular: f64,
    /// π/2 time of the bichromatic stage and π time of the monochromatic stage (fs).
    pub t_bi_fs: f64,
    pub t_mono_fs: f64,
    pub velocity_over_c: f64,
    pub beam_width_um: f64,
    /// Both bichromatic beams, Δx = Δy = beam width, τ = T_b (mJ).
    pub pulse_energy_mj: f64,
    pub hbar_k: f64,
    pub bragg_momentum: f64,
    pub momentum_acceptance: f64,
    pub scatter_uncertainty: f64,
    pub rabi_no_flip: f64,
    pub flags: Vec<String>,
}

pub fn full_design_report(inputs: &DesignInputs) -> Result<DesignReport> {
    let i = inputs;
    if !(i.photon_energy > 0.0 && i.amplitude_fundamental > 0.0 && i.amplitude_harmonic > 0.0) {
        return Err(Error::InvalidParameter("photon energy and bichromatic amplitudes must be positive".into()));
    }
    if !(i.amplitude_mono >= 0.0) {
        return Err(Error::InvalidParameter("monochromatic amplitude must be ≥ 0".into()));
    }
    i.tolerances.validate()?;
    let l1 = LaserSpec::from_amplitude(i.photon_energy, i.amplitude_fundamental);
    let l2 = LaserSpec::from_amplitude(2.0 * i.photon_energy, i.amplitude_harmonic);
    let lm = LaserSpec::from_amplitude(2.0 * i.photon_energy, i.amplitude_mono);
    let rabi_bi = rabi_frequency_bi(i.amplitude_fundamental, i.amplitude_harmonic, i.photon_energy);
    let rabi_mono = rabi_frequency_mono(2.0 * i.amplitude_mono);
    let (t_bi_fs, beam_width_um) = interaction_geometry(rabi_bi, i.electron_energy)?;
    let t_mono_fs = if rabi_mono > 0.0 { UnitSystem::time_to_fs(PI / rabi_mono) } else { f64::INFINITY };
    let velocity_over_c = UnitSystem::velocity_from_kinetic_energy(i.electron_energy);
    let pulse_energy_mj = pulse_energy(l1.intensity() + l2.intensity(), beam_width_um, beam_width_um, t_bi_fs);
    let hbar_k = i.photon_energy;
    let acceptance = momentum_acceptance(rabi_bi, hbar_k);

    let mut flags = Vec::new();
    for (name, l) in [("ξ₁", &l1), ("ξ₂", &l2)] {
        if !l.is_nonrelativistic() {
            flags.push(format!("{name} = {:.3} exceeds the nonrelativistic limit {XI_LIMIT}", l.xi));
        }
    }
    if velocity_over_c > VELOCITY_LIMIT {
        flags.push(format!("v/c = {velocity_over_c:.3} exceeds {VELOCITY_LIMIT}; nonrelativistic kinematics inaccurate"));
    }
    if acceptance > MOMENTUM_ACCEPTANCE_BOUND {
        flags.push(format!("Δp_z/p_z acceptance {acceptance:.3} exceeds {MOMENTUM_ACCEPTANCE_BOUND}"));
    }
    if i.tolerances.dpz_over_pz > acceptance {
        flags.push(format!(
            "incident Δp_z/p_z = {:.3} exceeds the Bragg acceptance {acceptance:.3}",
            i.tolerances.dpz_over_pz
        ));
    }
    if i.tolerances.dpx >= 0.1 * hbar_k {
        flags.push(format!("Δp_x = {:.3} eV/c is not ≪ ħk = {hbar_k} eV/c; spin-preserving scattering not suppressed", i.tolerances.dpx));
    }

    Ok(DesignReport {
        xi1: l1.xi,
        xi2: l2.xi,
        intensity_fundamental: l1.intensity(),
        intensity_harmonic: l2.intensity(),
        intensity_mono: lm.intensity(),
        rabi_bi,
        rabi_mono,
        rabi_bi_angular: UnitSystem::energy_to_rad_per_s(rabi_bi),
        t_bi_fs,
        t_mono_fs,
        velocity_over_c,
        beam_width_um,
        pulse_energy_mj,
        hbar_k,
        bragg_momentum: 2.0 * hbar_k,
        momentum_acceptance: acceptance,
        scatter_uncertainty: scatter_probability_uncertainty(i.tolerances.dpy_over_py, i.tolerances.dl_over_l),
        rabi_no_flip: no_flip_rabi(i.tolerances.dpx, hbar_k, rabi_bi),
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn intensity_of_example_beam() {
        let i = intensity_from_xi(0.046, 200.0);
        assert!((i / 7.6e19 - 1.0).abs() < 0.03, "{i:e}");
        assert_eq!(intensity_from_xi(0.0, 200.0), 0.0);
    }

    #[test]
    fn rabi_forms_agree() {
        let (a1, a2, w) = (2.35e4, 1.7e4, 200.0);
        let direct = rabi_frequency_bi(a1, a2, w);
        let xi = rabi_frequency_bi_xi(a1 / MC2, a2 / MC2, w);
        assert!((direct / xi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn geometry_scaling() {
        let (t1, y1) = interaction_geometry(9.73e-3, 30.0).unwrap();
        let (t2, y2) = interaction_geometry(2.0 * 9.73e-3, 30.0).unwrap();
        assert!((t1 / t2 - 2.0).abs() < 1e-12 && (y1 / y2 - 2.0).abs() < 1e-12);
        assert!((t1 - 106.3).abs() < 0.2);
        assert!(interaction_geometry(0.0, 30.0).is_err());
    }

    #[test]
    fn pulse_energy_scaling() {
        let e = pulse_energy(7.6e19, 0.3, 0.3, 100.0);
        assert!((e - 6.84).abs() < 1e-9);
        assert_eq!(pulse_energy(7.6e19, 0.3, 0.3, 0.0), 0.0);
        assert!((pulse_energy(7.6e19, 0.6, 0.6, 100.0) / e - 4.0).abs() < 1e-12);
    }

    #[test]
    fn acceptance_forms_agree() {
        let w = 200.0;
        let (x1, x2) = (2.35e4 / MC2, 2.35e4 / MC2);
        let direct = momentum_acceptance(rabi_frequency_bi_xi(x1, x2, w), w);
        // ξ₁²ξ₂mc/(8ħk)
        let xi_form = x1 * x1 * x2 * MC2 / (8.0 * w);
        assert!((direct / xi_form - 1.0).abs() < 1e-12);
        assert!((direct - 0.031).abs() < 5e-4);
    }

    #[test]
    fn tolerance_formulas() {
        assert!((scatter_probability_uncertainty(0.01, 0.01) - 0.0314159).abs() < 1e-6);
        assert!((scatter_probability_uncertainty(0.02, 0.0) - PI / 100.0).abs() < 1e-15);
        assert_eq!(no_flip_rabi(0.0, 200.0, 1.0), 0.0);
        assert!((no_flip_rabi(20.0, 200.0, 1.0) - 0.25).abs() < 1e-15);
        assert!((no_flip_rabi(200.0, 200.0, 1.0) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn example_report() {
        let r = full_design_report(&DesignInputs::example()).unwrap();
        assert!((r.intensity_harmonic / r.intensity_fundamental - 4.0).abs() < 1e-12);
        assert!((r.rabi_bi - 9.726e-3).abs() < 1e-5);
        assert!((r.velocity_over_c - 0.0108).abs() < 1e-3);
        assert!(r.flags.is_empty(), "{:?}", r.flags);
        assert!(r.intensity_mono > 1e15 && r.intensity_mono < 1e17);
        let mut inputs = DesignInputs::example();
        inputs.tolerances.dpx = 200.0;
        assert!(!full_design_report(&inputs).unwrap().flags.is_empty());
    }

    proptest! {
        #[test]
        fn intensity_is_quadratic(xi in 1e-4f64..0.2, w in 1.0f64..1e4, s in 0.1f64..10.0) {
            let base = intensity_from_xi(xi, w);
            prop_assert!((intensity_from_xi(s * xi, w) / base - s * s).abs() < 1e-10 * s * s);
            prop_assert!((intensity_from_xi(xi, s * w) / base - s * s).abs() < 1e-10 * s * s);
        }
    }
}
