//! Subcommands: `simulate`, `analytic`, `design`, `compare` and `dump`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use spinsplit_core::analytic::{evolve_density, pulse_area, sequence_unitary, EffectivePotential, StageKind};
use spinsplit_core::bragg::{BraggDensity, BraggState, MomentumBlock};
use spinsplit_core::design::{full_design_report, DesignReport};
use spinsplit_core::solver::{run_scenario, run_scenario_with, Backend, ModeState, RunResult, StateView, TimeSeriesRow};
use spinsplit_core::spinor::SpinorWavefunction;
use spinsplit_core::units::UnitSystem;

use crate::output::{num, time_series_row, write_snapshot_text, write_time_series, Header, SnapshotKind, SnapshotRecord, SnapshotWriter, TIME_SERIES_COLUMNS};
use crate::scenario_file::{OutputFormat, ScenarioSpec};

pub fn header(spec: &ScenarioSpec, command: &str) -> Header {
    let mut h = Header {
        command: command.to_string(),
        scenario: spec.name.clone(),
        scenario_sha256: spec.sha256.clone(),
        units: spec.units.declaration(),
        extra: Vec::new(),
    };
    let o = spec.overrides.describe();
    if !o.is_empty() {
        h = h.with("overrides", o.join(" "));
    }
    h
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn out_dir(spec: &ScenarioSpec) -> Result<PathBuf> {
    let dir = PathBuf::from(&spec.outputs.dir);
    fs::create_dir_all(&dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    Ok(dir)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn grid_record(t_fs: f64, psi: &SpinorWavefunction) -> SnapshotRecord {
    let rows = psi
        .grid()
        .positions()
        .zip(psi.up().iter().zip(psi.down()))
        .map(|(z, (u, d))| [UnitSystem::length_to_um(z), u.re, u.im, d.re, d.im])
        .collect();
    SnapshotRecord { kind: SnapshotKind::Position, t_fs, norm: psi.norm(), rows }
}

fn lattice_record(t_fs: f64, classes: &[ModeState]) -> SnapshotRecord {
    let mut rows = Vec::new();
    for c in classes {
        for n in c.modes() {
            let [u, d] = c.amplitude(n);
            rows.push([c.momentum(n), u.re, u.im, d.re, d.im]);
        }
    }
    let norm = classes.iter().map(ModeState::norm).sum();
    SnapshotRecord { kind: SnapshotKind::Momentum, t_fs, norm, rows }
}

enum SnapshotSink {
    None,
    Binary(SnapshotWriter<BufWriter<File>>),
    Text(BufWriter<File>),
}

pub struct SimulateOutcome {
    pub result: RunResult,
    pub files: Vec<PathBuf>,
}

/// Runs the scenario and writes the time series, summary and snapshots.
pub fn simulate(spec: &ScenarioSpec) -> Result<SimulateOutcome> {
    let dir = out_dir(spec)?;
    let scenario = spec.scenario();
    let (steps, dt) = scenario.step_plan();
    let h = header(spec, "simulate")
        .with("backend", spec.backend.name())
        .with("timestep_as", num(UnitSystem::time_to_as(dt)))
        .with("steps", steps.to_string());

    let mut files = Vec::new();
    let mut sink = if spec.outputs.snapshots {
        match spec.outputs.format {
            OutputFormat::Binary => {
                files.push(dir.join("snapshots.bin"));
                SnapshotSink::Binary(SnapshotWriter::new(create(&dir, "snapshots.bin")?, &h)?)
            }
            OutputFormat::Csv => {
                files.push(dir.join("snapshots.txt"));
                let mut w = create(&dir, "snapshots.txt")?;
                h.write_text(&mut w)?;
                SnapshotSink::Text(w)
            }
        }
    } else {
        SnapshotSink::None
    };

    let mut io_error: Option<std::io::Error> = None;
    let result = run_scenario_with(&scenario, |snap| {
        if io_error.is_some() || matches!(sink, SnapshotSink::None) {
            return Ok(());
        }
        let t_fs = UnitSystem::time_to_fs(snap.time);
        let rec = match snap.state {
            StateView::Grid(psi) => grid_record(t_fs, psi),
            StateView::Lattice(c) => lattice_record(t_fs, c),
        };
        let r = match &mut sink {
            SnapshotSink::Binary(w) => w.write(&rec),
            SnapshotSink::Text(w) => write_snapshot_text(w, &rec),
            SnapshotSink::None => Ok(()),
        };
        if let Err(e) = r {
            io_error = Some(e);
        }
        Ok(())
    })
    .with_context(|| format!("simulation of {} failed", spec.name))?;
    if let Some(e) = io_error {
        return Err(e).context("writing snapshots");
    }
    match sink {
        SnapshotSink::Binary(w) => {
            w.finish()?;
        }
        SnapshotSink::Text(mut w) => w.flush()?,
        SnapshotSink::None => {}
    }

    let mut w = create(&dir, &spec.outputs.time_series)?;
    write_time_series(&mut w, &h, &result.rows)?;
    w.flush()?;
    files.push(dir.join(&spec.outputs.time_series));

    let mut w = create(&dir, &spec.outputs.summary)?;
    write_summary(&mut w, &h, &result)?;
    w.flush()?;
    files.push(dir.join(&spec.outputs.summary));

    Ok(SimulateOutcome { result, files })
}

/// Key-value report of the final state followed by a one-row table.
pub fn write_summary(w: &mut dyn Write, h: &Header, r: &RunResult) -> std::io::Result<()> {
    h.write_text(w)?;
    let last = r.rows.last();
    let get = |f: fn(&TimeSeriesRow) -> f64| last.map_or(f64::NAN, f);
    let kv = [
        ("t_final_fs", get(|r| r.t_fs)),
        ("pop_plus", get(|r| r.pop_plus)),
        ("pop_minus", get(|r| r.pop_minus)),
        ("unassigned", get(|r| r.unassigned)),
        ("sy_plus", get(|r| r.sy_plus())),
        ("sy_minus", get(|r| r.sy_minus())),
        ("poldeg_plus", get(|r| r.poldeg_plus)),
        ("poldeg_minus", get(|r| r.poldeg_minus)),
        ("entropy_bits", get(|r| r.entropy)),
        ("max_norm_drift", r.max_norm_drift),
        ("max_sigma_y_drift", r.max_sigma_y_drift),
    ];
    for (k, v) in kv {
        writeln!(w, "{k} = {}", num(v))?;
    }
    writeln!(w, "warnings = {}", r.warnings.len())?;
    for msg in &r.warnings {
        writeln!(w, "warning = {msg}")?;
    }
    writeln!(w)?;
    writeln!(w, "{}", TIME_SERIES_COLUMNS.join(","))?;
    if let Some(row) = last {
        writeln!(w, "{}", time_series_row(row))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// analytic
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelPrediction {
    pub population: f64,
    pub bloch: [f64; 3],
}

impl ChannelPrediction {
    fn from_density(rho: &BraggDensity, block: MomentumBlock) -> Self {
        let population = rho.population(block);
        let bloch = if population > 1e-14 { rho.bloch(block) } else { [f64::NAN; 3] };
        Self { population, bloch }
    }

    pub fn polarization_degree(&self) -> f64 {
        self.bloch[1].abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageSummary {
    pub label: String,
    pub kind: StageKind,
    pub area: f64,
    pub chi: f64,
}

/// Bragg-subspace predictions for the scenario's stage sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticReport {
    pub stages: Vec<StageSummary>,
    pub unitary: spinsplit_core::bragg::Mat4,
    pub input_block: MomentumBlock,
    /// (+2ħk, −2ħk) channels for the scenario's pure input spin.
    pub pure: [ChannelPrediction; 2],
    /// Same for an unpolarized input.
    pub unpolarized: [ChannelPrediction; 2],
    /// Spin–momentum entanglement (bits) after the first stage for the pure input.
    pub entanglement_after_first: f64,
}

pub fn analytic(spec: &ScenarioSpec) -> Result<AnalyticReport> {
    let stages: Vec<StageSummary> = spec
        .stages
        .iter()
        .map(|s| {
            let pot = EffectivePotential::from_stage(s);
            StageSummary { label: s.label.clone(), kind: pot.kind, area: pulse_area(s), chi: pot.chi }
        })
        .collect();
    let u = sequence_unitary(&spec.stages);
    let block = if spec.packet.momentum >= 0.0 { MomentumBlock::Plus } else { MomentumBlock::Minus };
    let input = BraggState::in_block(block, spec.packet.spin)?;
    let pure = u.apply(&input).density();
    let unpol = evolve_density(&u, &BraggDensity::unpolarized(block))?;
    let entanglement_after_first = match spec.stages.first() {
        Some(s) => sequence_unitary(std::slice::from_ref(s)).apply(&input).spin_entanglement_entropy(),
        None => 0.0,
    };
    let pair = |rho: &BraggDensity| {
        [
            ChannelPrediction::from_density(rho, MomentumBlock::Plus),
            ChannelPrediction::from_density(rho, MomentumBlock::Minus),
        ]
    };
    Ok(AnalyticReport {
        stages,
        unitary: u.matrix,
        input_block: block,
        pure: pair(&pure),
        unpolarized: pair(&unpol),
        entanglement_after_first,
    })
}

fn kind_name(k: StageKind) -> &'static str {
    match k {
        StageKind::Mono => "mono",
        StageKind::Bichromatic => "bichromatic",
    }
}

pub fn write_analytic(w: &mut dyn Write, h: &Header, r: &AnalyticReport) -> std::io::Result<()> {
    h.write_text(w)?;
    writeln!(w, "# basis: (-2hk up, -2hk down, +2hk up, +2hk down)")?;
    writeln!(w, "[stages]")?;
    writeln!(w, "index,label,kind,area_over_pi,chi_over_pi")?;
    for (i, s) in r.stages.iter().enumerate() {
        writeln!(
            w,
            "{i},{},{},{},{}",
            s.label,
            kind_name(s.kind),
            num(s.area / std::f64::consts::PI),
            num(s.chi / std::f64::consts::PI)
        )?;
    }
    writeln!(w)?;
    writeln!(w, "[unitary]")?;
    writeln!(w, "row,re0,im0,re1,im1,re2,im2,re3,im3")?;
    for i in 0..4 {
        let cols: Vec<String> = (0..4)
            .flat_map(|j| {
                let c = r.unitary[(i, j)];
                [num(c.re), num(c.im)]
            })
            .collect();
        writeln!(w, "{i},{}", cols.join(","))?;
    }
    writeln!(w)?;
    writeln!(w, "[prediction]")?;
    writeln!(w, "input,channel,population,sx,sy,sz,poldeg")?;
    for (input, preds) in [("pure", &r.pure), ("unpolarized", &r.unpolarized)] {
        for (ch, p) in ["plus", "minus"].iter().zip(preds.iter()) {
            writeln!(
                w,
                "{input},{ch},{},{},{},{},{}",
                num(p.population),
                num(p.bloch[0]),
                num(p.bloch[1]),
                num(p.bloch[2]),
                num(p.polarization_degree())
            )?;
        }
    }
    writeln!(w)?;
    writeln!(w, "entanglement_after_first_stage_bits = {}", num(r.entanglement_after_first))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// design
// ---------------------------------------------------------------------------

pub fn design(spec: &ScenarioSpec) -> Result<DesignReport> {
    Ok(full_design_report(&spec.design)?)
}

pub fn write_design(w: &mut dyn Write, h: &Header, spec: &ScenarioSpec, r: &DesignReport) -> std::io::Result<()> {
    h.write_text(w)?;
    let d = &spec.design;
    let inputs = [
        ("photon_energy", d.photon_energy, "eV"),
        ("amplitude_fundamental", d.amplitude_fundamental, "eV"),
        ("amplitude_harmonic", d.amplitude_harmonic, "eV"),
        ("amplitude_mono", d.amplitude_mono, "eV"),
        ("electron_kinetic_energy", d.electron_energy, "eV"),
        ("dpz_over_pz", d.tolerances.dpz_over_pz, "1"),
        ("dpy_over_py", d.tolerances.dpy_over_py, "1"),
        ("dpx", d.tolerances.dpx, "eV/c"),
        ("dl_over_l", d.tolerances.dl_over_l, "1"),
    ];
    let outputs = [
        ("xi1", r.xi1, "1"),
        ("xi2", r.xi2, "1"),
        ("intensity_fundamental", r.intensity_fundamental, "W/cm2"),
        ("intensity_harmonic", r.intensity_harmonic, "W/cm2"),
        ("intensity_mono", r.intensity_mono, "W/cm2"),
        ("rabi_bi", r.rabi_bi, "eV"),
        ("rabi_bi_angular", r.rabi_bi_angular, "rad/s"),
        ("rabi_mono", r.rabi_mono, "eV"),
        ("t_bi", r.t_bi_fs, "fs"),
        ("t_mono", r.t_mono_fs, "fs"),
        ("velocity_over_c", r.velocity_over_c, "1"),
        ("beam_width", r.beam_width_um, "um"),
        ("pulse_energy", r.pulse_energy_mj, "mJ"),
        ("hbar_k", r.hbar_k, "eV/c"),
        ("bragg_momentum", r.bragg_momentum, "eV/c"),
        ("momentum_acceptance", r.momentum_acceptance, "1"),
        ("scatter_uncertainty", r.scatter_uncertainty, "1"),
        ("rabi_no_flip", r.rabi_no_flip, "eV"),
    ];
    writeln!(w, "section,quantity,value,unit")?;
    for (section, rows) in [("input", &inputs[..]), ("output", &outputs[..])] {
        for (k, v, u) in rows {
            writeln!(w, "{section},{k},{},{u}", num(*v))?;
        }
    }
    for f in &r.flags {
        writeln!(w, "# flag: {f}")?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct BackendRun {
    pub backend: Backend,
    pub rows: Vec<TimeSeriesRow>,
    pub max_norm_drift: f64,
    pub max_sigma_y_drift: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub timestep: f64,
    pub analytic: [ChannelPrediction; 2],
    pub runs: Vec<BackendRun>,
}

impl CompareReport {
    /// Largest |Δpop| between two backends over all shared snapshot times.
    pub fn max_population_gap(&self, a: usize, b: usize) -> f64 {
        self.runs[a]
            .rows
            .iter()
            .zip(&self.runs[b].rows)
            .map(|(x, y)| (x.pop_plus - y.pop_plus).abs().max((x.pop_minus - y.pop_minus).abs()))
            .fold(0.0, f64::max)
    }

    /// Largest |Δpop| between any pair of backends at any snapshot.
    pub fn max_cross_backend_gap(&self) -> f64 {
        let n = self.runs.len();
        (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .map(|(a, b)| self.max_population_gap(a, b))
            .fold(0.0, f64::max)
    }

    /// |Δpop| of one backend's final channels against the analytic prediction.
    pub fn analytic_gap(&self, run: usize) -> f64 {
        let last = self.runs[run].rows.last().expect("runs have at least one row");
        (last.pop_plus - self.analytic[0].population)
            .abs()
            .max((last.pop_minus - self.analytic[1].population).abs())
    }
}

/// Runs `backends` on a shared timestep (the smallest default, unless given) so their
/// snapshot times coincide, and predicts the final channels analytically.
pub fn compare(spec: &ScenarioSpec, backends: &[Backend]) -> Result<CompareReport> {
    let dt = spec
        .timestep
        .unwrap_or_else(|| backends.iter().map(|&b| spec.default_timestep(b)).fold(f64::INFINITY, f64::min));
    let runs: Vec<Result<BackendRun>> = std::thread::scope(|scope| {
        let handles: Vec<_> = backends
            .iter()
            .map(|&b| {
                scope.spawn(move || -> Result<BackendRun> {
                    let s = spec.scenario_for(b, Some(dt));
                    let r = run_scenario(&s)
                        .with_context(|| format!("{} backend failed", b.name()))?;
                    Ok(BackendRun {
                        backend: b,
                        rows: r.rows,
                        max_norm_drift: r.max_norm_drift,
                        max_sigma_y_drift: r.max_sigma_y_drift,
                        warnings: r.warnings,
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("backend thread panicked")).collect()
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let a = analytic(spec)?;
    Ok(CompareReport { timestep: dt, analytic: a.pure, runs })
}

fn rel(x: f64, reference: f64) -> f64 {
    if reference.abs() > 1e-12 {
        (x - reference) / reference
    } else {
        f64::NAN
    }
}

pub fn write_compare(w: &mut dyn Write, h: &Header, r: &CompareReport) -> std::io::Result<()> {
    h.write_text(w)?;
    writeln!(w, "# timestep_as: {}", num(UnitSystem::time_to_as(r.timestep)))?;
    writeln!(
        w,
        "source,pop_plus,pop_minus,sy_plus,sy_minus,poldeg_plus,poldeg_minus,rel_dev_pop_plus,rel_dev_pop_minus,max_norm_drift,max_sigma_y_drift"
    )?;
    let [ap, am] = r.analytic;
    writeln!(
        w,
        "analytic,{},{},{},{},{},{},{},{},{},{}",
        num(ap.population),
        num(am.population),
        num(ap.bloch[1]),
        num(am.bloch[1]),
        num(ap.polarization_degree()),
        num(am.polarization_degree()),
        num(0.0),
        num(0.0),
        num(0.0),
        num(0.0)
    )?;
    for run in &r.runs {
        let l = run.rows.last().expect("runs have at least one row");
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            run.backend.name(),
            num(l.pop_plus),
            num(l.pop_minus),
            num(l.sy_plus()),
            num(l.sy_minus()),
            num(l.poldeg_plus),
            num(l.poldeg_minus),
            num(rel(l.pop_plus, ap.population)),
            num(rel(l.pop_minus, am.population)),
            num(run.max_norm_drift),
            num(run.max_sigma_y_drift)
        )?;
    }
    writeln!(w)?;
    writeln!(w, "backend_a,backend_b,max_abs_pop_gap_over_time")?;
    for a in 0..r.runs.len() {
        for b in a + 1..r.runs.len() {
            writeln!(w, "{},{},{}", r.runs[a].backend.name(), r.runs[b].backend.name(), num(r.max_population_gap(a, b)))?;
        }
    }
    for run in &r.runs {
        for msg in &run.warnings {
            writeln!(w, "# warning ({}): {msg}", run.backend.name())?;
        }
    }
    Ok(())
}

/// Writes `name` inside the scenario's output directory and returns its path.
pub fn write_in_out_dir(
    spec: &ScenarioSpec,
    name: &str,
    body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<PathBuf> {
    let dir = out_dir(spec)?;
    let mut w = create(&dir, name)?;
    body(&mut w)?;
    w.flush()?;
    Ok(dir.join(name))
}
