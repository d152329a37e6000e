//! Strang split-operator stepper on the periodic grid.
//!
//! One step is `K(dt/2) V(t + dt/2) K(dt/2)`; consecutive kinetic half-steps are fused so a
//! run of `n` steps costs `n + 1` forward/inverse transform pairs per spin component.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use super::{sin_cos, EffectiveTerm, FieldModel};
use crate::error::{Error, Result};
use crate::fields::FieldStage;
use crate::grid::SpatialGrid;
use crate::spinor::SpinorWavefunction;
use crate::units::ELECTRON_REST_ENERGY_EV as MC2;

pub struct SplitStepper {
    grid: SpatialGrid,
    dt: f64,
    model: FieldModel,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<C64>,
    kin_half: Vec<C64>,
    kin_full: Vec<C64>,
    /// e^{ikz_j} and e^{2ikz_j} (full field) or e^{4ikz_j} (effective).
    basis1: Vec<C64>,
    basis2: Vec<C64>,
    /// `Some(t_end)` runs the time-reversed Hamiltonian: fields at t_end − t, spin coupling negated.
    reversed_from: Option<f64>,
}

impl std::fmt::Debug for SplitStepper {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SplitStepper")
            .field("grid", &self.grid)
            .field("dt", &self.dt)
            .field("model", &self.model)
            .field("reversed_from", &self.reversed_from)
            .finish()
    }
}

fn check_commensurate(grid: &SpatialGrid, period: f64) -> Result<()> {
    let cells = grid.length() / period;
    if (cells - cells.round()).abs() > 1e-6 * cells.max(1.0) {
        return Err(Error::InvalidGrid(format!(
            "grid length {} is not a multiple of the field period {period}",
            grid.length()
        )));
    }
    Ok(())
}

impl SplitStepper {
    pub fn new(grid: &SpatialGrid, dt: f64, model: FieldModel) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("timestep must be positive, got {dt}")));
        }
        let n = grid.points();
        let k = model.wavenumber().unwrap_or(0.0);
        let (basis1, basis2) = if k > 0.0 {
            grid.check_resolves(k)?;
            let z: Vec<f64> = grid.positions().collect();
            match model {
                FieldModel::Full(_) => {
                    check_commensurate(grid, 2.0 * PI / k)?;
                    (
                        z.iter().map(|&z| C64::from_polar(1.0, k * z)).collect(),
                        z.iter().map(|&z| C64::from_polar(1.0, 2.0 * k * z)).collect(),
                    )
                }
                FieldModel::Effective(_) => {
                    check_commensurate(grid, 0.5 * PI / k)?;
                    (Vec::new(), z.iter().map(|&z| C64::from_polar(1.0, 4.0 * k * z)).collect())
                }
            }
        } else {
            (Vec::new(), Vec::new())
        };

        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        let inv_n = 1.0 / n as f64;
        let kinetic = |tau: f64| -> Vec<C64> {
            grid.momenta()
                .iter()
                .map(|p| C64::from_polar(inv_n, -p * p / (2.0 * MC2) * tau))
                .collect()
        };
        Ok(Self {
            grid: grid.clone(),
            dt,
            kin_half: kinetic(0.5 * dt),
            kin_full: kinetic(dt),
            model,
            forward,
            inverse,
            scratch: vec![C64::default(); scratch_len],
            basis1,
            basis2,
            reversed_from: None,
        })
    }

    /// Stepper for the time-reversed problem: evolving Θψ(t_end) for a duration τ with this
    /// stepper yields Θψ(t_end − τ), where Θ = iσ_y K.
    pub fn reversed(mut self, t_end: f64) -> Self {
        self.reversed_from = Some(t_end);
        self
    }

    pub fn timestep(&self) -> f64 {
        self.dt
    }

    pub fn model(&self) -> &FieldModel {
        &self.model
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    fn kinetic(&mut self, psi: &mut SpinorWavefunction, full: bool) {
        let factors = if full { &self.kin_full } else { &self.kin_half };
        for comp in [&mut psi.up, &mut psi.down] {
            self.forward.process_with_scratch(comp, &mut self.scratch);
            for (c, f) in comp.iter_mut().zip(factors) {
                *c *= f;
            }
            self.inverse.process_with_scratch(comp, &mut self.scratch);
        }
    }

    /// Applies exp(−i(a𝟙 + bσ_y)dt) at the field time `t`. Returns false if no field is present.
    fn potential(&self, psi: &mut SpinorWavefunction, t: f64) -> bool {
        let dt = self.dt;
        let (t_field, spin_sign) = match self.reversed_from {
            Some(end) => (end - t, -1.0),
            None => (t, 1.0),
        };
        let inv2m = 1.0 / (2.0 * MC2);
        let apply = |psi: &mut SpinorWavefunction, coeffs: &mut dyn FnMut(usize) -> (f64, f64)| {
            for (j, (u, d)) in psi.up.iter_mut().zip(psi.down.iter_mut()).enumerate() {
                let (a, b) = coeffs(j);
                let (sa, ca) = sin_cos(-a * dt);
                let (s, c) = sin_cos(spin_sign * b * dt);
                let ph = C64::new(ca, sa);
                let (uu, dd) = (*u, *d);
                *u = ph * (uu * c - dd * s);
                *d = ph * (uu * s + dd * c);
            }
        };
        match &self.model {
            FieldModel::Full(_) => {
                let Some(h) = self.model.harmonics(t_field) else { return false };
                if h.is_zero() {
                    return false;
                }
                let k = h.k;
                let [a0, a1, a2] = h.alpha;
                let mut coeffs = |j: usize| {
                    let e1 = a1 * self.basis1[j];
                    let e2 = a2 * self.basis2[j];
                    let field = a0.re + 2.0 * (e1.re + e2.re);
                    // ∂_z: e^{ijkz} → ijk e^{ijkz}; 2 Re(i x) = −2 Im x
                    let bfield = -2.0 * k * (e1.im + 2.0 * e2.im);
                    (field * field * inv2m, bfield * inv2m)
                };
                apply(psi, &mut coeffs);
                true
            }
            FieldModel::Effective(_) => {
                let (mono, bi) = self.model.effective_coefficients(t_field);
                if mono == C64::default() && bi == 0.0 {
                    return false;
                }
                let mut coeffs = |j: usize| {
                    let e4 = self.basis2[j];
                    ((mono * e4).re, -bi * e4.im)
                };
                apply(psi, &mut coeffs);
                true
            }
        }
    }

    /// Advances `psi` from time `t` by `steps` steps and returns the final time.
    pub fn advance(&mut self, psi: &mut SpinorWavefunction, t: f64, steps: usize) -> Result<f64> {
        if psi.grid() != &self.grid {
            return Err(Error::InvalidGrid("wave function lives on a different grid".into()));
        }
        if steps == 0 {
            return Ok(t);
        }
        self.kinetic(psi, false);
        for i in 0..steps {
            let mid = t + (i as f64 + 0.5) * self.dt;
            self.potential(psi, mid);
            if i + 1 < steps {
                self.kinetic(psi, true);
            }
        }
        self.kinetic(psi, false);
        let t_end = t + steps as f64 * self.dt;
        if !psi.is_finite() {
            return Err(Error::Diverged { time: t_end, reason: "non-finite amplitude".into() });
        }
        Ok(t_end)
    }
}

/// One Strang step under the full laser fields of `stages`.
pub fn step_full_field(
    psi: &mut SpinorWavefunction,
    stages: &[FieldStage],
    t: f64,
    dt: f64,
) -> Result<()> {
    let mut s = SplitStepper::new(psi.grid(), dt, FieldModel::Full(stages.to_vec()))?;
    s.advance(psi, t, 1).map(|_| ())
}

/// One Strang step under the effective potentials `terms`.
pub fn step_effective(
    psi: &mut SpinorWavefunction,
    terms: &[EffectiveTerm],
    t: f64,
    dt: f64,
) -> Result<()> {
    let mut s = SplitStepper::new(psi.grid(), dt, FieldModel::Effective(terms.to_vec()))?;
    s.advance(psi, t, 1).map(|_| ())
}
