//! Scenario orchestration: initial packet, stage sequence, backend, snapshots.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use num_complex::Complex64 as C64;

use super::lattice::{decompose_packet, ModeLattice, ModeState};
use super::split::SplitStepper;
use super::{Backend, FieldModel, LatticeCouplings, PropagationConfig};
use crate::analysis::{channel_report, spin_momentum_entanglement, ChannelAccumulator, ChannelReport};
use crate::bragg::entropy_bits;
use crate::error::{Error, Result};
use crate::fields::{validate_stage_sequence, FieldStage};
use crate::grid::SpatialGrid;
use crate::spinor::SpinorWavefunction;
use crate::units::UnitSystem;

/// Edge population of the mode lattice above which a truncation warning is raised.
pub const LATTICE_EDGE_WARNING: f64 = 1e-6;

/// Initial Gaussian packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketSpec {
    pub center: f64,
    /// Position standard deviation σ.
    pub width: f64,
    pub momentum: f64,
    pub spin: [C64; 2],
}

/// How the mode-lattice backend samples the initial packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatticeSampling {
    /// Plane wave at the packet's central momentum.
    Central,
    /// Every Bloch class of the packet's momentum distribution.
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub packet: PacketSpec,
    pub stages: Vec<FieldStage>,
    /// The run covers [0, duration].
    pub duration: f64,
    pub grid_points: usize,
    /// Requested grid length; rounded up to a whole number of field periods 2π/k.
    pub grid_length: f64,
    pub config: PropagationConfig,
}

impl Scenario {
    /// Fundamental wavenumber of the stages, or half the packet momentum for a field-free run.
    pub fn reference_wavenumber(&self) -> Option<f64> {
        match self.stages.first() {
            Some(s) => Some(s.wavenumber()),
            None => (self.packet.momentum != 0.0).then(|| 0.5 * self.packet.momentum.abs()),
        }
    }

    /// Centred grid whose length is a whole number of periods 2π/k.
    pub fn grid(&self) -> Result<SpatialGrid> {
        let length = match self.stages.first() {
            Some(s) => {
                let period = 2.0 * PI / s.wavenumber();
                (self.grid_length / period - 1e-9).ceil().max(1.0) * period
            }
            None => self.grid_length,
        };
        let grid = SpatialGrid::centered(length, self.grid_points)?;
        if let Some(s) = self.stages.first() {
            grid.check_resolves(s.wavenumber())?;
        }
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidScenario(format!("duration must be ≥ 0, got {}", self.duration)));
        }
        validate_stage_sequence(&self.stages)?;
        for s in &self.stages {
            if s.start() < 0.0 || s.end() > self.duration * (1.0 + 1e-12) {
                return Err(Error::InvalidScenario(format!(
                    "stage '{}' ([{:.3}, {:.3}] fs) does not fit in the run duration {:.3} fs",
                    s.label,
                    UnitSystem::time_to_fs(s.start()),
                    UnitSystem::time_to_fs(s.end()),
                    UnitSystem::time_to_fs(self.duration)
                )));
            }
        }
        self.config.validate(&self.stages)
    }

    /// Number of steps and the (possibly slightly reduced) step that tiles the duration.
    pub fn step_plan(&self) -> (usize, f64) {
        if self.duration == 0.0 {
            return (0, self.config.timestep);
        }
        let n = (self.duration / self.config.timestep - 1e-9).ceil().max(1.0) as usize;
        (n, self.duration / n as f64)
    }

    pub fn initial_state(&self) -> Result<SpinorWavefunction> {
        let p = &self.packet;
        SpinorWavefunction::gaussian_packet(&self.grid()?, p.center, p.width, p.momentum, p.spin)
    }
}

/// One row of the analysis time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSeriesRow {
    pub t_fs: f64,
    pub pop_plus: f64,
    pub pop_minus: f64,
    pub unassigned: f64,
    pub bloch_plus: [f64; 3],
    pub bloch_minus: [f64; 3],
    /// NaN when the channel is empty.
    pub poldeg_plus: f64,
    pub poldeg_minus: f64,
    pub entropy: f64,
    pub norm_drift: f64,
    pub sigma_y_drift: f64,
}

impl TimeSeriesRow {
    pub fn sy_plus(&self) -> f64 {
        self.bloch_plus[1]
    }

    pub fn sy_minus(&self) -> f64 {
        self.bloch_minus[1]
    }
}

/// Borrowed view of the propagated state at a snapshot.
#[derive(Debug, Clone, Copy)]
pub enum StateView<'a> {
    Grid(&'a SpinorWavefunction),
    Lattice(&'a [ModeState]),
}

#[derive(Debug, Clone, Copy)]
pub struct Snapshot<'a> {
    /// Internal time units.
    pub time: f64,
    pub row: &'a TimeSeriesRow,
    pub state: StateView<'a>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FinalState {
    Grid(SpinorWavefunction),
    Lattice(Vec<ModeState>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub rows: Vec<TimeSeriesRow>,
    pub final_state: FinalState,
    pub final_report: Option<ChannelReport>,
    pub max_norm_drift: f64,
    pub max_sigma_y_drift: f64,
    pub warnings: Vec<String>,
}

pub fn run_scenario(s: &Scenario) -> Result<RunResult> {
    run_scenario_with(s, |_| Ok(()))
}

/// Runs `s`, calling `on_snapshot` at t = 0, at the configured cadence and at the end.
pub fn run_scenario_with<F>(s: &Scenario, mut on_snapshot: F) -> Result<RunResult>
where
    F: FnMut(&Snapshot<'_>) -> Result<()>,
{
    s.validate()?;
    let (steps, dt) = s.step_plan();
    let per_snap = ((s.config.snapshot_every / dt).round() as usize).max(1);
    let k_ref = s.reference_wavenumber();
    let half_width = s.config.channel_half_width.or(k_ref);
    let psi0 = s.initial_state()?;
    let mut warnings = Vec::new();

    let mut state = match s.config.backend {
        Backend::FullField | Backend::Effective => Propagated::Grid(psi0),
        Backend::ModeLattice => {
            let k = k_ref.ok_or_else(|| {
                Error::InvalidScenario("mode lattice needs a field or a non-zero packet momentum".into())
            })?;
            let n = s.config.lattice_half_width;
            let classes = match s.config.lattice_sampling {
                super::LatticeSampling::Central => {
                    let n0 = (s.packet.momentum / k).round();
                    let q = s.packet.momentum - n0 * k;
                    vec![ModeState::plane_wave(k, q, n, n0 as i64, s.packet.spin)?]
                }
                super::LatticeSampling::Full => {
                    let (classes, lost) = decompose_packet(&psi0, k, n, 1e-14)?;
                    if lost > 1e-10 {
                        warnings.push(format!("mode lattice drops {lost:.2e} of the initial norm"));
                    }
                    classes
                }
            };
            Propagated::Lattice(classes)
        }
    };

    let mut stepper = match (&mut state, s.config.backend) {
        (Propagated::Grid(psi), Backend::FullField) => {
            Stepper::Split(SplitStepper::new(psi.grid(), dt, FieldModel::Full(s.stages.clone()))?)
        }
        (Propagated::Grid(psi), _) => {
            Stepper::Split(SplitStepper::new(psi.grid(), dt, FieldModel::effective_from_stages(&s.stages))?)
        }
        (Propagated::Lattice(_), _) => {
            let model = match s.config.lattice_couplings {
                LatticeCouplings::FullField => FieldModel::Full(s.stages.clone()),
                LatticeCouplings::Effective => FieldModel::effective_from_stages(&s.stages),
            };
            Stepper::Lattice(ModeLattice::new(model, dt, s.config.lattice_integrator)?)
        }
    };

    let (norm0, sy0) = state.norm_and_sigma_y();
    let mut rows = Vec::new();
    let mut max_norm_drift: f64 = 0.0;
    let mut max_sy_drift: f64 = 0.0;
    let mut edge_warned = false;
    let mut t = 0.0;
    let mut done = 0usize;
    loop {
        let (norm, sy) = state.norm_and_sigma_y();
        let norm_drift = (norm - norm0).abs() / norm0;
        let sy_drift = (sy - sy0).abs() / norm0;
        max_norm_drift = max_norm_drift.max(norm_drift);
        max_sy_drift = max_sy_drift.max(sy_drift);
        let row = state.row(t, k_ref, half_width, norm_drift, sy_drift)?;
        if let Propagated::Lattice(classes) = &state {
            let edge: f64 = classes.iter().map(|c| c.edge_population()).sum::<f64>() / norm;
            if edge > LATTICE_EDGE_WARNING && !edge_warned {
                edge_warned = true;
                warnings.push(format!(
                    "mode-lattice edge population {edge:.2e} at t = {:.2} fs exceeds {LATTICE_EDGE_WARNING:.0e}; increase N",
                    UnitSystem::time_to_fs(t)
                ));
            }
        }
        on_snapshot(&Snapshot { time: t, row: &row, state: state.view() })?;
        rows.push(row);
        if done >= steps {
            break;
        }
        let n = per_snap.min(steps - done);
        let t_next = dt * (done + n) as f64;
        match (&mut stepper, &mut state) {
            (Stepper::Split(st), Propagated::Grid(psi)) => {
                st.advance(psi, t, n)?;
            }
            (Stepper::Lattice(lat), Propagated::Lattice(classes)) => {
                for c in classes.iter_mut() {
                    lat.advance(c, t, n)?;
                }
            }
            _ => unreachable!("stepper and state kinds always match"),
        }
        done += n;
        t = t_next;
    }

    let final_report = rows.last().and(state.report(k_ref, half_width).ok());
    Ok(RunResult {
        rows,
        final_state: match state {
            Propagated::Grid(psi) => FinalState::Grid(psi),
            Propagated::Lattice(c) => FinalState::Lattice(c),
        },
        final_report,
        max_norm_drift,
        max_sigma_y_drift: max_sy_drift,
        warnings,
    })
}

enum Stepper {
    Split(SplitStepper),
    Lattice(ModeLattice),
}

enum Propagated {
    Grid(SpinorWavefunction),
    Lattice(Vec<ModeState>),
}

impl Propagated {
    fn view(&self) -> StateView<'_> {
        match self {
            Propagated::Grid(psi) => StateView::Grid(psi),
            Propagated::Lattice(c) => StateView::Lattice(c),
        }
    }

    fn norm_and_sigma_y(&self) -> (f64, f64) {
        match self {
            Propagated::Grid(psi) => {
                let n = psi.norm();
                let sy = psi.spin_expectations().map(|b| b[1]).unwrap_or(0.0);
                (n, sy * n)
            }
            Propagated::Lattice(classes) => (
                classes.iter().map(ModeState::norm).sum(),
                classes.iter().map(ModeState::sigma_y).sum(),
            ),
        }
    }

    fn report(&self, k: Option<f64>, half_width: Option<f64>) -> Result<ChannelReport> {
        let (Some(k), Some(w)) = (k, half_width) else {
            return Err(Error::InvalidParameter("no reference wavenumber for channel bins".into()));
        };
        match self {
            Propagated::Grid(psi) => channel_report(psi, k, w),
            Propagated::Lattice(classes) => lattice_channel_report(classes, w),
        }
    }

    fn entropy(&self) -> Result<f64> {
        match self {
            Propagated::Grid(psi) => spin_momentum_entanglement(psi),
            Propagated::Lattice(classes) => lattice_entanglement(classes),
        }
    }

    fn row(
        &self,
        t: f64,
        k: Option<f64>,
        half_width: Option<f64>,
        norm_drift: f64,
        sigma_y_drift: f64,
    ) -> Result<TimeSeriesRow> {
        let nan3 = [f64::NAN; 3];
        let (pop_plus, pop_minus, unassigned, bloch_plus, bloch_minus, pd_plus, pd_minus) =
            match self.report(k, half_width) {
                Ok(r) => (
                    r.plus.population,
                    r.minus.population,
                    r.unassigned,
                    r.plus.bloch,
                    r.minus.bloch,
                    r.plus.polarization_degree().unwrap_or(f64::NAN),
                    r.minus.polarization_degree().unwrap_or(f64::NAN),
                ),
                Err(_) => (f64::NAN, f64::NAN, f64::NAN, nan3, nan3, f64::NAN, f64::NAN),
            };
        Ok(TimeSeriesRow {
            t_fs: UnitSystem::time_to_fs(t),
            pop_plus,
            pop_minus,
            unassigned,
            bloch_plus: if pop_plus > 0.0 { bloch_plus } else { nan3 },
            bloch_minus: if pop_minus > 0.0 { bloch_minus } else { nan3 },
            poldeg_plus: pd_plus,
            poldeg_minus: pd_minus,
            entropy: self.entropy()?,
            norm_drift,
            sigma_y_drift,
        })
    }
}

/// Channel report of a set of lattice classes (discrete amplitudes, no quadrature weight).
pub fn lattice_channel_report(classes: &[ModeState], half_width: f64) -> Result<ChannelReport> {
    let k = classes.first().ok_or(Error::ZeroNorm)?.k();
    let mut acc = ChannelAccumulator::new(k, half_width)?;
    for c in classes {
        for n in c.modes() {
            let [u, d] = c.amplitude(n);
            acc.add(c.momentum(n), u, d);
        }
    }
    acc.finish()
}

/// Spin entropy (bits) of the lattice state after tracing out momentum.
pub fn lattice_entanglement(classes: &[ModeState]) -> Result<f64> {
    let mut rho = Matrix2::<C64>::zeros();
    for c in classes {
        for n in c.modes() {
            let [u, d] = c.amplitude(n);
            rho[(0, 0)] += u * u.conj();
            rho[(0, 1)] += u * d.conj();
            rho[(1, 0)] += d * u.conj();
            rho[(1, 1)] += d * d.conj();
        }
    }
    if !(rho.trace().re > 0.0) {
        return Err(Error::ZeroNorm);
    }
    Ok(entropy_bits(&rho))
}
