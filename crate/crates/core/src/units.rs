//! Internal unit convention and SI conversions.
//!
//! Everything inside the crate is expressed with ħ = c = 1 and the electronvolt as the
//! base unit:
//!
//! | quantity | internal unit |
//! |----------|---------------|
//! | energy   | eV            |
//! | momentum | eV / c        |
//! | time     | ħ / eV  (≈ 0.6582 fs) |
//! | length   | ħc / eV (≈ 197.3 nm)  |
//!
//! Field amplitudes are stored as the energies `e·a` (charge times vector potential), so
//! the relativistic parameter is simply `e·a / mc²`.

/// Electron rest energy mc² in eV.
pub const ELECTRON_REST_ENERGY_EV: f64 = 510_998.95;

/// ħ in eV·s.
pub const HBAR_EV_S: f64 = 6.582_119_569e-16;

/// ħc in eV·m.
pub const HBAR_C_EV_M: f64 = 197.326_980_4e-9;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

/// Vacuum permittivity in F/m.
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;

/// Elementary charge in C (also J per eV).
pub const ELEMENTARY_CHARGE_C: f64 = 1.602_176_634e-19;

/// One internal time unit (ħ/eV) in femtoseconds.
pub const TIME_UNIT_FS: f64 = HBAR_EV_S * 1e15;

/// One internal length unit (ħc/eV) in micrometres.
pub const LENGTH_UNIT_UM: f64 = HBAR_C_EV_M * 1e6;

/// Fixed unit convention plus conversion helpers.
///
/// Carries no data; the convention is global to the crate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UnitSystem;

impl UnitSystem {
    pub const fn electron_mass() -> f64 {
        ELECTRON_REST_ENERGY_EV
    }

    pub fn fs_to_time(fs: f64) -> f64 {
        fs / TIME_UNIT_FS
    }

    pub fn time_to_fs(t: f64) -> f64 {
        t * TIME_UNIT_FS
    }

    pub fn as_to_time(attoseconds: f64) -> f64 {
        Self::fs_to_time(attoseconds * 1e-3)
    }

    pub fn time_to_as(t: f64) -> f64 {
        Self::time_to_fs(t) * 1e3
    }

    pub fn um_to_length(um: f64) -> f64 {
        um / LENGTH_UNIT_UM
    }

    pub fn length_to_um(z: f64) -> f64 {
        z * LENGTH_UNIT_UM
    }

    pub fn nm_to_length(nm: f64) -> f64 {
        Self::um_to_length(nm * 1e-3)
    }

    pub fn length_to_nm(z: f64) -> f64 {
        Self::length_to_um(z) * 1e3
    }

    /// Angular frequency in rad/s of an energy ħω given in eV.
    pub fn energy_to_rad_per_s(ev: f64) -> f64 {
        ev / HBAR_EV_S
    }

    pub fn rad_per_s_to_energy(omega: f64) -> f64 {
        omega * HBAR_EV_S
    }

    /// Wavenumber (internal inverse length) of a photon with energy ħω.
    pub fn photon_wavenumber(photon_energy_ev: f64) -> f64 {
        photon_energy_ev
    }

    /// Intensity in W/cm² to an internal energy flux (eV per time-unit per length-unit²).
    pub fn w_per_cm2_to_internal(w_cm2: f64) -> f64 {
        let w_m2 = w_cm2 * 1e4;
        let ev_per_s_m2 = w_m2 / ELEMENTARY_CHARGE_C;
        ev_per_s_m2 * HBAR_EV_S * HBAR_C_EV_M * HBAR_C_EV_M
    }

    pub fn internal_to_w_per_cm2(flux: f64) -> f64 {
        let ev_per_s_m2 = flux / (HBAR_EV_S * HBAR_C_EV_M * HBAR_C_EV_M);
        ev_per_s_m2 * ELEMENTARY_CHARGE_C * 1e-4
    }

    /// Velocity (in units of c) of a nonrelativistic electron with kinetic energy `ev`.
    pub fn velocity_from_kinetic_energy(ev: f64) -> f64 {
        (2.0 * ev / ELECTRON_REST_ENERGY_EV).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn reference_values() {
        assert!((TIME_UNIT_FS - 0.6582).abs() < 1e-4);
        assert!((UnitSystem::length_to_nm(1.0) - 197.3).abs() < 0.05);
        // 400 eV/c is 2ħk for 200 eV photons
        assert_eq!(UnitSystem::photon_wavenumber(200.0) * 2.0, 400.0);
    }

    proptest! {
        #[test]
        fn round_trips(x in 1e-6f64..1e6) {
            prop_assert!(rel(UnitSystem::time_to_fs(UnitSystem::fs_to_time(x)), x) < 1e-12);
            prop_assert!(rel(UnitSystem::time_to_as(UnitSystem::as_to_time(x)), x) < 1e-12);
            prop_assert!(rel(UnitSystem::length_to_um(UnitSystem::um_to_length(x)), x) < 1e-12);
            prop_assert!(rel(UnitSystem::length_to_nm(UnitSystem::nm_to_length(x)), x) < 1e-12);
            prop_assert!(rel(UnitSystem::rad_per_s_to_energy(UnitSystem::energy_to_rad_per_s(x)), x) < 1e-12);
            let i = x * 1e14;
            prop_assert!(rel(UnitSystem::internal_to_w_per_cm2(UnitSystem::w_per_cm2_to_internal(i)), i) < 1e-12);
        }
    }
}
