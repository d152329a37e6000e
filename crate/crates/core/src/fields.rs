//! Laser vector potentials, their magnetic fields and pulse envelopes.
//!
//! All amplitudes are stored as energies `e·a` in eV and all fields point along x, so
//! `vector_potential` returns `e·A_x(t, z)` and `magnetic_field` returns
//! `e·B_y = ∂_z(e·A_x)`. The envelope is treated as z-independent and its time derivative
//! does not enter B.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// sin²-edged flat-top envelope. Times are relative to the owning stage's start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub rise: f64,
    pub plateau: f64,
    pub fall: f64,
}

impl Envelope {
    pub fn new(rise: f64, plateau: f64, fall: f64) -> Result<Self> {
        for (name, v) in [("rise", rise), ("plateau", plateau), ("fall", fall)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!("envelope {name} must be ≥ 0, got {v}")));
            }
        }
        Ok(Self { rise, plateau, fall })
    }

    /// Rectangular pulse of length `plateau`.
    pub fn flat(plateau: f64) -> Self {
        Self { rise: 0.0, plateau, fall: 0.0 }
    }

    pub fn total(&self) -> f64 {
        self.rise + self.plateau + self.fall
    }

    /// f(t) ∈ [0, 1].
    pub fn value(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.total() {
            return 0.0;
        }
        if t < self.rise {
            let s = (0.5 * PI * t / self.rise).sin();
            s * s
        } else if t <= self.rise + self.plateau {
            1.0
        } else {
            let s = (0.5 * PI * (self.total() - t) / self.fall).sin();
            s * s
        }
    }

    /// ∫ f(t)^p dt in closed form. Each sin² edge contributes (2p−1)!!/(2p)!! of its length.
    pub fn power_integral(&self, p: u32) -> f64 {
        self.plateau + (self.rise + self.fall) * edge_fraction(p)
    }
}

/// ∫₀¹ sin^{2p}(πx/2) dx = (2p−1)!!/(2p)!!.
pub(crate) fn edge_fraction(p: u32) -> f64 {
    (1..=p).map(|i| (2 * i - 1) as f64 / (2 * i) as f64).product()
}

/// How the monochromatic amplitude `e·a₀` is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AmplitudeConvention {
    /// `a₀` multiplies cos(2ωt)cos(2kz + χ/2) directly.
    Standing,
    /// `a₀` is the amplitude of each counterpropagating wave; the standing wave has 2a₀.
    #[default]
    Traveling,
}

/// Standing wave of frequency 2ω and wavenumber 2k:
/// `e·A = f(t) A₀ cos(2ωt) cos(2kz + χ/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonoStandingWave {
    /// e·a₀ in eV.
    pub amplitude: f64,
    /// Fundamental photon energy ħω; the wave itself oscillates at 2ω.
    pub photon_energy: f64,
    pub chi: f64,
    pub envelope: Envelope,
    pub start: f64,
    pub convention: AmplitudeConvention,
}

impl MonoStandingWave {
    /// Amplitude A₀ that multiplies the cos·cos product.
    pub fn standing_amplitude(&self) -> f64 {
        match self.convention {
            AmplitudeConvention::Standing => self.amplitude,
            AmplitudeConvention::Traveling => 2.0 * self.amplitude,
        }
    }
}

/// Counterpropagating ω and 2ω waves:
/// `e·A = f(t) [a₁ cos(ωt − kz) + a₂ cos(2ωt + 2kz)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BichromaticWave {
    /// e·a₁ in eV (ω wave, travels toward +z).
    pub amplitude_fundamental: f64,
    /// e·a₂ in eV (2ω wave, travels toward −z).
    pub amplitude_harmonic: f64,
    pub photon_energy: f64,
    pub envelope: Envelope,
    pub start: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldKind {
    Mono(MonoStandingWave),
    Bichromatic(BichromaticWave),
}

/// One laser interaction of the beam splitter.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldStage {
    pub label: String,
    pub kind: FieldKind,
}

/// Spatial Fourier coefficients of `e·A(t, ·)`:
/// `e·A = Σ_{j=-2..2} α_j e^{ijkz}` with α_{−j} = α_j*.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldHarmonics {
    pub k: f64,
    /// α₀, α₁, α₂.
    pub alpha: [C64; 3],
}

impl FieldHarmonics {
    pub fn zero(k: f64) -> Self {
        Self { k, alpha: [C64::default(); 3] }
    }

    pub fn coefficient(&self, j: i32) -> C64 {
        match j {
            0..=2 => self.alpha[j as usize],
            -2..=-1 => self.alpha[(-j) as usize].conj(),
            _ => C64::default(),
        }
    }

    pub fn add(&mut self, other: &FieldHarmonics) {
        for (a, b) in self.alpha.iter_mut().zip(&other.alpha) {
            *a += b;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.alpha.iter().all(|a| *a == C64::default())
    }
}

impl FieldStage {
    pub fn mono(label: impl Into<String>, wave: MonoStandingWave) -> Self {
        Self { label: label.into(), kind: FieldKind::Mono(wave) }
    }

    pub fn bichromatic(label: impl Into<String>, wave: BichromaticWave) -> Self {
        Self { label: label.into(), kind: FieldKind::Bichromatic(wave) }
    }

    pub fn envelope(&self) -> &Envelope {
        match &self.kind {
            FieldKind::Mono(w) => &w.envelope,
            FieldKind::Bichromatic(w) => &w.envelope,
        }
    }

    pub fn start(&self) -> f64 {
        match &self.kind {
            FieldKind::Mono(w) => w.start,
            FieldKind::Bichromatic(w) => w.start,
        }
    }

    pub fn end(&self) -> f64 {
        self.start() + self.envelope().total()
    }

    pub fn photon_energy(&self) -> f64 {
        match &self.kind {
            FieldKind::Mono(w) => w.photon_energy,
            FieldKind::Bichromatic(w) => w.photon_energy,
        }
    }

    /// Fundamental wavenumber k = ω/c (internal units: equal to ħω in eV).
    pub fn wavenumber(&self) -> f64 {
        self.photon_energy()
    }

    /// Highest carrier angular frequency present in A (2ω for both kinds).
    pub fn highest_carrier(&self) -> f64 {
        2.0 * self.photon_energy()
    }

    pub fn envelope_value(&self, t: f64) -> f64 {
        self.envelope().value(t - self.start())
    }

    pub fn is_active(&self, t: f64) -> bool {
        t >= self.start() && t <= self.end()
    }

    /// e·A_x(t, z) evaluated from the closed form.
    pub fn vector_potential(&self, t: f64, z: f64) -> f64 {
        let f = self.envelope_value(t);
        match &self.kind {
            FieldKind::Mono(w) => {
                let (om, k) = (w.photon_energy, w.photon_energy);
                f * w.standing_amplitude() * (2.0 * om * t).cos() * (2.0 * k * z + 0.5 * w.chi).cos()
            }
            FieldKind::Bichromatic(w) => {
                let (om, k) = (w.photon_energy, w.photon_energy);
                f * (w.amplitude_fundamental * (om * t - k * z).cos()
                    + w.amplitude_harmonic * (2.0 * om * t + 2.0 * k * z).cos())
            }
        }
    }

    /// e·B_y(t, z) = ∂_z(e·A_x), evaluated from the closed form.
    pub fn magnetic_field(&self, t: f64, z: f64) -> f64 {
        let f = self.envelope_value(t);
        match &self.kind {
            FieldKind::Mono(w) => {
                let (om, k) = (w.photon_energy, w.photon_energy);
                -f * w.standing_amplitude()
                    * (2.0 * om * t).cos()
                    * 2.0
                    * k
                    * (2.0 * k * z + 0.5 * w.chi).sin()
            }
            FieldKind::Bichromatic(w) => {
                let (om, k) = (w.photon_energy, w.photon_energy);
                f * (w.amplitude_fundamental * k * (om * t - k * z).sin()
                    - 2.0 * k * w.amplitude_harmonic * (2.0 * om * t + 2.0 * k * z).sin())
            }
        }
    }

    /// Spatial harmonics of e·A at time t, envelope included.
    pub fn harmonics(&self, t: f64) -> FieldHarmonics {
        let f = self.envelope_value(t);
        let k = self.wavenumber();
        let mut h = FieldHarmonics::zero(k);
        if f == 0.0 {
            return h;
        }
        match &self.kind {
            FieldKind::Mono(w) => {
                // cos(2kz + χ/2) = ½(e^{iχ/2} e^{2ikz} + c.c.)
                let amp = 0.5 * f * w.standing_amplitude() * (2.0 * w.photon_energy * t).cos();
                h.alpha[2] = C64::from_polar(amp, 0.5 * w.chi);
            }
            FieldKind::Bichromatic(w) => {
                let om = w.photon_energy;
                // cos(ωt − kz) → ½e^{−iωt} e^{ikz};  cos(2ωt + 2kz) → ½e^{2iωt} e^{2ikz}
                h.alpha[1] = C64::from_polar(0.5 * f * w.amplitude_fundamental, -om * t);
                h.alpha[2] = C64::from_polar(0.5 * f * w.amplitude_harmonic, 2.0 * om * t);
            }
        }
        h
    }
}

/// Checks that stages are ordered by start time and share one fundamental photon energy.
pub fn validate_stage_sequence(stages: &[FieldStage]) -> Result<()> {
    for pair in stages.windows(2) {
        if pair[1].start() < pair[0].start() {
            return Err(Error::InvalidScenario(format!(
                "stage '{}' starts before stage '{}'",
                pair[1].label, pair[0].label
            )));
        }
    }
    if let Some(first) = stages.first() {
        let e = first.photon_energy();
        if !(e > 0.0) {
            return Err(Error::InvalidScenario("photon energy must be positive".into()));
        }
        if let Some(other) = stages.iter().find(|s| (s.photon_energy() - e).abs() > 1e-12 * e) {
            return Err(Error::InvalidScenario(format!(
                "stage '{}' uses photon energy {} eV but all stages must share {} eV",
                other.label,
                other.photon_energy(),
                e
            )));
        }
    }
    Ok(())
}
