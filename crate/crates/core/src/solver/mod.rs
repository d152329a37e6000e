//! Time evolution of the electron spinor under the Pauli Hamiltonian
//!
//! `H = p_z²/2m + (eA_x)²/2m + σ_y ∂_z(eA_x)/2m`
//!
//! (ħ = c = 1; the p·A term vanishes for zero momentum along the polarization). Three
//! backends share one field description:
//!
//! * [`Backend::FullField`]: split-operator on a spatial grid with the real carriers,
//! * [`Backend::Effective`]: same stepper with the cycle-averaged ponderomotive potentials,
//! * [`Backend::ModeLattice`]: momentum modes n·ħk + q, |n| ≤ N, integrated in time with a
//!   fourth-order scheme.

pub mod lattice;
pub mod scenario;
pub mod split;

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::analytic::{EffectivePotential, StageKind};
use crate::error::{Error, Result};
use crate::fields::{FieldHarmonics, FieldStage};

pub use lattice::{decompose_packet, step_mode_lattice, LatticeIntegrator, ModeLattice, ModeState};
pub use scenario::{
    lattice_channel_report, lattice_entanglement, run_scenario, run_scenario_with, FinalState,
    LatticeSampling, PacketSpec, RunResult, Scenario, Snapshot, StateView, TimeSeriesRow,
};
pub use split::{step_effective, step_full_field, SplitStepper};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    FullField,
    Effective,
    ModeLattice,
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::FullField => "full-field",
            Backend::Effective => "effective",
            Backend::ModeLattice => "mode-lattice",
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full-field" | "full" => Ok(Backend::FullField),
            "effective" => Ok(Backend::Effective),
            "mode-lattice" | "lattice" => Ok(Backend::ModeLattice),
            other => Err(Error::InvalidParameter(format!("unknown backend '{other}'"))),
        }
    }
}

/// Which Hamiltonian the mode lattice integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatticeCouplings {
    /// Exact Fourier components of A² and ∂_zA.
    FullField,
    /// Only the ±4k couplings of the effective potentials.
    Effective,
}

/// Backend choice and numerical parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationConfig {
    pub backend: Backend,
    /// Time step (internal units).
    pub timestep: f64,
    /// Interval between snapshots (internal units).
    pub snapshot_every: f64,
    /// Mode-lattice half-width N: modes n ∈ [−N, N].
    pub lattice_half_width: usize,
    pub lattice_couplings: LatticeCouplings,
    pub lattice_integrator: LatticeIntegrator,
    pub lattice_sampling: LatticeSampling,
    /// Momentum bin half-width for channel reports; defaults to ħk.
    pub channel_half_width: Option<f64>,
}

impl PropagationConfig {
    pub fn new(backend: Backend, timestep: f64, snapshot_every: f64) -> Self {
        Self {
            backend,
            timestep,
            snapshot_every,
            lattice_half_width: 24,
            lattice_couplings: LatticeCouplings::FullField,
            lattice_integrator: LatticeIntegrator::GaussLegendre4,
            lattice_sampling: LatticeSampling::Central,
            channel_half_width: None,
        }
    }

    /// Largest admissible timestep for the given stages under this configuration.
    pub fn timestep_limit(&self, stages: &[FieldStage]) -> f64 {
        let resolves_carrier = match self.backend {
            Backend::FullField => true,
            Backend::Effective => false,
            Backend::ModeLattice => self.lattice_couplings == LatticeCouplings::FullField,
        };
        if resolves_carrier {
            stages
                .iter()
                .map(|s| 2.0 * PI / s.highest_carrier() / 40.0)
                .fold(f64::INFINITY, f64::min)
        } else {
            stages
                .iter()
                .map(|s| 0.01 / EffectivePotential::from_stage(s).strength)
                .fold(f64::INFINITY, f64::min)
        }
    }

    pub fn validate(&self, stages: &[FieldStage]) -> Result<()> {
        if !(self.timestep > 0.0 && self.timestep.is_finite()) {
            return Err(Error::InvalidParameter(format!("timestep must be positive, got {}", self.timestep)));
        }
        if !(self.snapshot_every > 0.0) {
            return Err(Error::InvalidParameter("snapshot interval must be positive".into()));
        }
        let limit = self.timestep_limit(stages);
        if self.timestep > limit * (1.0 + 1e-9) {
            return Err(Error::InvalidParameter(format!(
                "timestep {:.4e} exceeds the {} limit {:.4e}",
                self.timestep,
                self.backend.name(),
                limit
            )));
        }
        if self.backend == Backend::ModeLattice && self.lattice_half_width < 4 {
            return Err(Error::InvalidParameter(format!(
                "mode-lattice half-width must be ≥ 4, got {}",
                self.lattice_half_width
            )));
        }
        Ok(())
    }
}

/// Effective potential switched by its stage's envelope: V(t) = f(t)^p V₀(z).
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveTerm {
    pub potential: EffectivePotential,
    /// Stage start and envelope; `None` means always on at full strength.
    pub window: Option<(f64, crate::fields::Envelope)>,
}

impl EffectiveTerm {
    pub fn constant(potential: EffectivePotential) -> Self {
        Self { potential, window: None }
    }

    pub fn from_stage(stage: &FieldStage) -> Self {
        Self {
            potential: EffectivePotential::from_stage(stage),
            window: Some((stage.start(), *stage.envelope())),
        }
    }

    /// Current strength V₀ f(t)^p.
    pub fn strength(&self, t: f64) -> f64 {
        match &self.window {
            None => self.potential.strength,
            Some((start, env)) => {
                let f = env.value(t - start);
                self.potential.strength * f.powi(self.potential.envelope_power() as i32)
            }
        }
    }
}

/// Field description shared by the grid and lattice backends.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldModel {
    Full(Vec<FieldStage>),
    Effective(Vec<EffectiveTerm>),
}

impl FieldModel {
    pub fn effective_from_stages(stages: &[FieldStage]) -> Self {
        FieldModel::Effective(stages.iter().map(EffectiveTerm::from_stage).collect())
    }

    /// Common fundamental wavenumber, if any term is present.
    pub fn wavenumber(&self) -> Option<f64> {
        match self {
            FieldModel::Full(s) => s.first().map(|s| s.wavenumber()),
            FieldModel::Effective(t) => t.first().map(|t| t.potential.k),
        }
    }

    /// Summed harmonics of e·A at time t (full model only).
    pub(crate) fn harmonics(&self, t: f64) -> Option<FieldHarmonics> {
        let FieldModel::Full(stages) = self else { return None };
        let k = stages.first()?.wavenumber();
        let mut h = FieldHarmonics::zero(k);
        for s in stages.iter().filter(|s| s.is_active(t)) {
            h.add(&s.harmonics(t));
        }
        Some(h)
    }

    /// Coefficients of the effective potential at time t:
    /// scalar part `Re(u e^{4ikz})·2` with `u` returned, and σ_y part `−b sin(4kz)`.
    pub(crate) fn effective_coefficients(&self, t: f64) -> (C64, f64) {
        let FieldModel::Effective(terms) = self else { return (C64::default(), 0.0) };
        let mut mono = C64::default();
        let mut bi = 0.0;
        for term in terms {
            let s = term.strength(t);
            if s == 0.0 {
                continue;
            }
            match term.potential.kind {
                // V₀ cos(4kz + χ) = Re(V₀ e^{iχ} e^{4ikz})
                StageKind::Mono => mono += C64::from_polar(s, term.potential.chi),
                StageKind::Bichromatic => bi += s,
            }
        }
        (mono, bi)
    }
}

/// sin and cos of x, via a Taylor polynomial (accurate to rounding) for small |x|.
#[inline]
pub(crate) fn sin_cos(x: f64) -> (f64, f64) {
    if x.abs() < 0.3 {
        let x2 = x * x;
        let s = x
            * (1.0
                - x2 / 6.0
                    * (1.0
                        - x2 / 20.0
                            * (1.0
                                - x2 / 42.0
                                    * (1.0 - x2 / 72.0 * (1.0 - x2 / 110.0 * (1.0 - x2 / 156.0 * (1.0 - x2 / 210.0)))))));
        let c = 1.0
            - x2 / 2.0
                * (1.0
                    - x2 / 12.0
                        * (1.0
                            - x2 / 30.0
                                * (1.0
                                    - x2 / 56.0
                                        * (1.0 - x2 / 90.0 * (1.0 - x2 / 132.0 * (1.0 - x2 / 182.0 * (1.0 - x2 / 240.0)))))));
        (s, c)
    } else {
        x.sin_cos()
    }
}
