//! Scenario files.
//!
//! A scenario is a TOML document with the sections `[units]`, `[electron]`, `[[stages]]`,
//! `[propagation]`, `[outputs]` and an optional `[design]`. Dimensioned values are either
//! bare numbers in the declared unit or strings carrying their own unit (`"106 fs"`,
//! `"0.11 um"`, `"400 eV/c"`). Unknown keys are rejected and every problem found is reported
//! with its line and column.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Range;
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use toml::Spanned;

use spinsplit_core::design::{DesignInputs, ToleranceBudget};
use spinsplit_core::fields::{AmplitudeConvention, BichromaticWave, Envelope, FieldStage, MonoStandingWave};
use spinsplit_core::solver::{
    Backend, LatticeCouplings, LatticeIntegrator, LatticeSampling, PacketSpec, PropagationConfig, Scenario,
};
use spinsplit_core::spinor::{spin_minus_y, spin_plus_y};
use spinsplit_core::units::UnitSystem;

/// One schema or validation problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaError {
    /// 1-based; 0 when the problem has no location in the file.
    pub line: usize,
    pub column: usize,
    /// Dotted key path, e.g. `stages[2].plateau`.
    pub field: String,
    pub message: String,
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}, column {}: ", self.line, self.column)?;
        }
        if self.field.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.field, self.message)
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {} schema error(s):\n{}", .errors.len(), join_errors(.errors))]
    Schema { path: String, errors: Vec<SchemaError> },
}

impl ScenarioError {
    pub fn schema_errors(&self) -> &[SchemaError] {
        match self {
            ScenarioError::Schema { errors, .. } => errors,
            ScenarioError::Io { .. } => &[],
        }
    }
}

fn join_errors(errors: &[SchemaError]) -> String {
    errors.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n")
}

// ---------------------------------------------------------------------------
// Raw document
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
pub enum TimeUnit {
    #[default]
    #[serde(rename = "fs")]
    Femtosecond,
    #[serde(rename = "as")]
    Attosecond,
    #[serde(rename = "internal")]
    Internal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
pub enum LengthUnit {
    #[default]
    #[serde(rename = "um")]
    Micrometre,
    #[serde(rename = "nm")]
    Nanometre,
    #[serde(rename = "internal")]
    Internal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
pub enum EnergyUnit {
    #[default]
    #[serde(rename = "eV")]
    ElectronVolt,
    #[serde(rename = "keV")]
    KiloElectronVolt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitsSection {
    #[serde(default)]
    pub time: TimeUnit,
    #[serde(default)]
    pub length: LengthUnit,
    #[serde(default)]
    pub energy: EnergyUnit,
}

impl UnitsSection {
    pub fn time_name(&self) -> &'static str {
        match self.time {
            TimeUnit::Femtosecond => "fs",
            TimeUnit::Attosecond => "as",
            TimeUnit::Internal => "internal",
        }
    }

    pub fn length_name(&self) -> &'static str {
        match self.length {
            LengthUnit::Micrometre => "um",
            LengthUnit::Nanometre => "nm",
            LengthUnit::Internal => "internal",
        }
    }

    pub fn energy_name(&self) -> &'static str {
        match self.energy {
            EnergyUnit::ElectronVolt => "eV",
            EnergyUnit::KiloElectronVolt => "keV",
        }
    }

    /// One-line declaration used in output headers.
    pub fn declaration(&self) -> String {
        format!(
            "input time={} length={} energy={} momentum={}/c; output time=fs length=um energy=eV momentum=eV/c",
            self.time_name(),
            self.length_name(),
            self.energy_name(),
            self.energy_name()
        )
    }
}

/// A number in the section's declared unit, or a string with an explicit unit.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Number(f64),
    Text(String),
}

type Q = Spanned<Quantity>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum SpinName {
    #[serde(rename = "up")]
    Up,
    #[serde(rename = "down")]
    Down,
    #[serde(rename = "+y")]
    PlusY,
    #[serde(rename = "-y")]
    MinusY,
}

impl SpinName {
    pub fn spinor(self) -> [C64; 2] {
        match self {
            SpinName::Up => [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            SpinName::Down => [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
            SpinName::PlusY => spin_plus_y(),
            SpinName::MinusY => spin_minus_y(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ElectronSection {
    momentum: Q,
    width: Q,
    center: Option<Q>,
    spin: Option<SpinName>,
    /// Kinetic energy of the transverse motion, used by the design report.
    kinetic_energy: Option<Q>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum StageKindName {
    Mono,
    Bichromatic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConventionName {
    Standing,
    Traveling,
}

impl From<ConventionName> for AmplitudeConvention {
    fn from(c: ConventionName) -> Self {
        match c {
            ConventionName::Standing => AmplitudeConvention::Standing,
            ConventionName::Traveling => AmplitudeConvention::Traveling,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StageSection {
    label: Option<String>,
    kind: StageKindName,
    amplitude: Option<Q>,
    amplitude_fundamental: Option<Q>,
    amplitude_harmonic: Option<Q>,
    photon_energy: Q,
    chi: Option<Spanned<f64>>,
    chi_over_pi: Option<Spanned<f64>>,
    convention: Option<ConventionName>,
    rise: Option<Q>,
    plateau: Q,
    fall: Option<Q>,
    start: Option<Q>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum BackendName {
    FullField,
    Effective,
    ModeLattice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum CouplingsName {
    FullField,
    Effective,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum IntegratorName {
    Gl4,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum SamplingName {
    Central,
    Full,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PropagationSection {
    backend: Option<BackendName>,
    dt: Option<Q>,
    duration: Option<Q>,
    /// Spacing inserted before a stage without an explicit start.
    stage_gap: Option<Q>,
    /// Field-free time after the last stage when no duration is given.
    tail: Option<Q>,
    grid_points: Option<Spanned<i64>>,
    grid_length: Option<Q>,
    snapshot_every: Option<Q>,
    lattice_half_width: Option<Spanned<i64>>,
    lattice_couplings: Option<CouplingsName>,
    lattice_integrator: Option<IntegratorName>,
    lattice_sampling: Option<SamplingName>,
    channel_half_width: Option<Q>,
    max_concurrent_stages: Option<Spanned<i64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Binary,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputsSection {
    dir: Option<String>,
    format: Option<OutputFormat>,
    time_series: Option<String>,
    summary: Option<String>,
    snapshots: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DesignSection {
    dpz_over_pz: Option<Spanned<f64>>,
    dpy_over_py: Option<Spanned<f64>>,
    dpx: Option<Q>,
    dl_over_l: Option<Spanned<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default)]
    units: UnitsSection,
    electron: ElectronSection,
    #[serde(default)]
    stages: Vec<Spanned<StageSection>>,
    #[serde(default)]
    propagation: PropagationSection,
    #[serde(default)]
    outputs: OutputsSection,
    #[serde(default)]
    design: DesignSection,
}

// ---------------------------------------------------------------------------
// Validated scenario
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSettings {
    pub dir: String,
    pub format: OutputFormat,
    pub time_series: String,
    pub summary: String,
    pub snapshots: bool,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub backend: Option<Backend>,
    pub out: Option<String>,
    pub snapshot_every_fs: Option<f64>,
    pub grid_points: Option<usize>,
    pub dt_as: Option<f64>,
    pub convention: Option<AmplitudeConvention>,
    pub format: Option<OutputFormat>,
}

impl Overrides {
    /// Canonical description for output headers; empty when nothing is overridden.
    pub fn describe(&self) -> Vec<String> {
        let mut v = Vec::new();
        if let Some(b) = self.backend {
            v.push(format!("backend={}", b.name()));
        }
        if let Some(s) = self.snapshot_every_fs {
            v.push(format!("snapshot_every_fs={s:e}"));
        }
        if let Some(n) = self.grid_points {
            v.push(format!("grid_points={n}"));
        }
        if let Some(dt) = self.dt_as {
            v.push(format!("dt_as={dt:e}"));
        }
        if let Some(c) = self.convention {
            v.push(format!("convention={}", convention_name(c)));
        }
        v
    }
}

pub fn convention_name(c: AmplitudeConvention) -> &'static str {
    match c {
        AmplitudeConvention::Standing => "standing",
        AmplitudeConvention::Traveling => "traveling",
    }
}

/// A parsed and validated scenario in internal units.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    /// Hex SHA-256 of the file contents.
    pub sha256: String,
    pub units: UnitsSection,
    pub packet: PacketSpec,
    pub stages: Vec<FieldStage>,
    pub duration: f64,
    pub grid_points: usize,
    pub grid_length: f64,
    pub backend: Backend,
    /// Explicit timestep; `None` picks the backend default.
    pub timestep: Option<f64>,
    pub snapshot_every: f64,
    pub lattice_half_width: usize,
    pub lattice_couplings: LatticeCouplings,
    pub lattice_integrator: LatticeIntegrator,
    pub lattice_sampling: LatticeSampling,
    pub channel_half_width: Option<f64>,
    pub design: DesignInputs,
    pub outputs: OutputSettings,
    pub overrides: Overrides,
}

impl ScenarioSpec {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(b) = o.backend {
            self.backend = b;
        }
        if let Some(dir) = &o.out {
            self.outputs.dir = dir.clone();
        }
        if let Some(s) = o.snapshot_every_fs {
            self.snapshot_every = UnitSystem::fs_to_time(s);
        }
        if let Some(n) = o.grid_points {
            self.grid_points = n;
        }
        if let Some(dt) = o.dt_as {
            self.timestep = Some(UnitSystem::as_to_time(dt));
        }
        if let Some(c) = o.convention {
            for s in &mut self.stages {
                if let spinsplit_core::fields::FieldKind::Mono(m) = &mut s.kind {
                    m.convention = c;
                }
            }
        }
        if let Some(f) = o.format {
            self.outputs.format = f;
        }
        self.overrides = o.clone();
    }

    fn config_base(&self, backend: Backend, timestep: f64) -> PropagationConfig {
        let mut c = PropagationConfig::new(backend, timestep, self.snapshot_every);
        c.lattice_half_width = self.lattice_half_width;
        c.lattice_couplings = self.lattice_couplings;
        c.lattice_integrator = self.lattice_integrator;
        c.lattice_sampling = self.lattice_sampling;
        c.channel_half_width = self.channel_half_width;
        c
    }

    /// Default timestep: carrier/64 when the carrier is resolved, the effective limit
    /// otherwise, and a quarter of the snapshot interval for field-free runs.
    pub fn default_timestep(&self, backend: Backend) -> f64 {
        if self.stages.is_empty() {
            return 0.25 * self.snapshot_every;
        }
        let limit = self.config_base(backend, 1.0).timestep_limit(&self.stages);
        match backend {
            Backend::FullField => limit * 40.0 / 64.0,
            _ => limit,
        }
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario_for(self.backend, self.timestep)
    }

    pub fn scenario_for(&self, backend: Backend, timestep: Option<f64>) -> Scenario {
        let dt = timestep.unwrap_or_else(|| self.default_timestep(backend));
        Scenario {
            packet: self.packet,
            stages: self.stages.clone(),
            duration: self.duration,
            grid_points: self.grid_points,
            grid_length: self.grid_length,
            config: self.config_base(backend, dt),
        }
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq)]
enum Dim {
    Time,
    Length,
    Energy,
    Momentum,
}

impl Dim {
    fn name(self) -> &'static str {
        match self {
            Dim::Time => "time",
            Dim::Length => "length",
            Dim::Energy => "energy",
            Dim::Momentum => "momentum",
        }
    }
}

struct Ctx<'a> {
    src: &'a str,
    units: UnitsSection,
    errors: Vec<SchemaError>,
}

impl Ctx<'_> {
    fn position(&self, span: Range<usize>) -> (usize, usize) {
        let start = span.start.min(self.src.len());
        let before = &self.src[..start];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        (line, column)
    }

    fn error(&mut self, span: Option<Range<usize>>, field: impl Into<String>, message: impl Into<String>) {
        let (line, column) = span.map_or((0, 0), |s| self.position(s));
        self.errors.push(SchemaError { line, column, field: field.into(), message: message.into() });
    }

    fn default_factor(&self, dim: Dim) -> f64 {
        match dim {
            Dim::Time => match self.units.time {
                TimeUnit::Femtosecond => UnitSystem::fs_to_time(1.0),
                TimeUnit::Attosecond => UnitSystem::as_to_time(1.0),
                TimeUnit::Internal => 1.0,
            },
            Dim::Length => match self.units.length {
                LengthUnit::Micrometre => UnitSystem::um_to_length(1.0),
                LengthUnit::Nanometre => UnitSystem::nm_to_length(1.0),
                LengthUnit::Internal => 1.0,
            },
            Dim::Energy | Dim::Momentum => match self.units.energy {
                EnergyUnit::ElectronVolt => 1.0,
                EnergyUnit::KiloElectronVolt => 1e3,
            },
        }
    }

    /// Converts to internal units; records an error and returns `None` on failure.
    fn quantity(&mut self, q: &Q, field: &str, dim: Dim) -> Option<f64> {
        let span = q.span();
        match q.get_ref() {
            Quantity::Number(x) => {
                if !x.is_finite() {
                    self.error(Some(span), field, "must be finite");
                    return None;
                }
                Some(x * self.default_factor(dim))
            }
            Quantity::Text(s) => match parse_with_unit(s) {
                Ok((value, unit)) => match unit_factor(unit) {
                    Some((d, f)) if d == dim => Some(value * f),
                    Some((d, _)) => {
                        self.error(
                            Some(span),
                            field,
                            format!("unit mismatch: '{unit}' is a {} unit but a {} is expected", d.name(), dim.name()),
                        );
                        None
                    }
                    None => {
                        self.error(Some(span), field, format!("unknown unit '{unit}'"));
                        None
                    }
                },
                Err(msg) => {
                    self.error(Some(span), field, msg);
                    None
                }
            },
        }
    }

    fn opt_quantity(&mut self, q: &Option<Q>, field: &str, dim: Dim) -> Option<Option<f64>> {
        match q {
            None => Some(None),
            Some(q) => self.quantity(q, field, dim).map(Some),
        }
    }

    fn positive(&mut self, q: &Q, field: &str, dim: Dim) -> Option<f64> {
        let v = self.quantity(q, field, dim)?;
        if v > 0.0 {
            Some(v)
        } else {
            self.error(Some(q.span()), field, "must be positive");
            None
        }
    }

    fn non_negative(&mut self, q: &Q, field: &str, dim: Dim) -> Option<f64> {
        let v = self.quantity(q, field, dim)?;
        if v >= 0.0 {
            Some(v)
        } else {
            self.error(Some(q.span()), field, "must be ≥ 0");
            None
        }
    }

    fn opt_non_negative(&mut self, q: &Option<Q>, field: &str, dim: Dim, default: f64) -> Option<f64> {
        match q {
            None => Some(default),
            Some(q) => self.non_negative(q, field, dim),
        }
    }

    fn opt_positive(&mut self, q: &Option<Q>, field: &str, dim: Dim, default: f64) -> Option<f64> {
        match q {
            None => Some(default),
            Some(q) => self.positive(q, field, dim),
        }
    }

    fn fraction(&mut self, v: &Option<Spanned<f64>>, field: &str) -> f64 {
        match v {
            None => 0.0,
            Some(s) if *s.get_ref() >= 0.0 && s.get_ref().is_finite() => *s.get_ref(),
            Some(s) => {
                self.error(Some(s.span()), field, "must be ≥ 0");
                0.0
            }
        }
    }
}

fn parse_with_unit(s: &str) -> Result<(f64, &str), String> {
    let s = s.trim();
    let split = s.find(|c: char| c.is_whitespace()).ok_or_else(|| {
        format!("'{s}' needs a value and a unit separated by a space, e.g. \"106 fs\"")
    })?;
    let (num, unit) = s.split_at(split);
    let value: f64 = num.parse().map_err(|_| format!("'{num}' is not a number"))?;
    if !value.is_finite() {
        return Err("must be finite".into());
    }
    Ok((value, unit.trim()))
}

fn unit_factor(unit: &str) -> Option<(Dim, f64)> {
    Some(match unit {
        "fs" => (Dim::Time, UnitSystem::fs_to_time(1.0)),
        "as" => (Dim::Time, UnitSystem::as_to_time(1.0)),
        "ps" => (Dim::Time, UnitSystem::fs_to_time(1e3)),
        "um" | "µm" => (Dim::Length, UnitSystem::um_to_length(1.0)),
        "nm" => (Dim::Length, UnitSystem::nm_to_length(1.0)),
        "eV" => (Dim::Energy, 1.0),
        "keV" => (Dim::Energy, 1e3),
        "eV/c" => (Dim::Momentum, 1.0),
        "keV/c" => (Dim::Momentum, 1e3),
        _ => return None,
    })
}

const DEFAULT_STAGE_GAP_FS: f64 = 10.0;
const DEFAULT_TAIL_FS: f64 = 5.0;
const DEFAULT_GRID_POINTS: usize = 16384;
const DEFAULT_GRID_LENGTH_UM: f64 = 3.0;
const DEFAULT_SNAPSHOT_FS: f64 = 5.0;
const DEFAULT_KINETIC_ENERGY_EV: f64 = 30.0;

pub fn parse_scenario(path: impl AsRef<Path>) -> Result<ScenarioSpec, ScenarioError> {
    let path = path.as_ref();
    let src = std::fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    parse_scenario_str(&src, &path.display().to_string())
}

pub fn parse_scenario_str(src: &str, name: &str) -> Result<ScenarioSpec, ScenarioError> {
    let schema = |errors| ScenarioError::Schema { path: name.to_string(), errors };
    let raw: RawScenario = toml::from_str(src).map_err(|e| {
        let mut ctx = Ctx { src, units: UnitsSection::default(), errors: Vec::new() };
        ctx.error(e.span(), "", e.message().trim().to_string());
        schema(ctx.errors)
    })?;
    let mut ctx = Ctx { src, units: raw.units, errors: Vec::new() };
    let spec = build(&mut ctx, &raw, name, src);
    match spec {
        Some(spec) if ctx.errors.is_empty() => Ok(spec),
        _ => {
            if ctx.errors.is_empty() {
                ctx.error(None, "", "invalid scenario");
            }
            Err(schema(ctx.errors))
        }
    }
}

fn build(ctx: &mut Ctx<'_>, raw: &RawScenario, name: &str, src: &str) -> Option<ScenarioSpec> {
    let e = &raw.electron;
    let momentum = ctx.quantity(&e.momentum, "electron.momentum", Dim::Momentum);
    let width = ctx.positive(&e.width, "electron.width", Dim::Length);
    let center = ctx.opt_quantity(&e.center, "electron.center", Dim::Length).map(|c| c.unwrap_or(0.0));
    let kinetic = ctx.opt_positive(&e.kinetic_energy, "electron.kinetic_energy", Dim::Energy, DEFAULT_KINETIC_ENERGY_EV);
    let spin = e.spin.unwrap_or(SpinName::Up).spinor();

    let p = &raw.propagation;
    let gap = ctx.opt_non_negative(&p.stage_gap, "propagation.stage_gap", Dim::Time, UnitSystem::fs_to_time(DEFAULT_STAGE_GAP_FS));
    let tail = ctx.opt_non_negative(&p.tail, "propagation.tail", Dim::Time, UnitSystem::fs_to_time(DEFAULT_TAIL_FS));

    // Stages
    let mut stages = Vec::new();
    let mut stage_spans = Vec::new();
    let mut cursor: Option<f64> = None;
    for (i, st) in raw.stages.iter().enumerate() {
        let span = st.span();
        let st = st.get_ref();
        let f = |k: &str| format!("stages[{i}].{k}");
        let label = st.label.clone().unwrap_or_else(|| format!("stage{}", i + 1));
        let photon = ctx.positive(&st.photon_energy, &f("photon_energy"), Dim::Energy);
        let rise = ctx.opt_non_negative(&st.rise, &f("rise"), Dim::Time, 0.0);
        let plateau = ctx.non_negative(&st.plateau, &f("plateau"), Dim::Time);
        let fall = ctx.opt_non_negative(&st.fall, &f("fall"), Dim::Time, 0.0);
        let start = ctx.opt_quantity(&st.start, &f("start"), Dim::Time);
        if let Some(Some(s)) = start {
            if s < 0.0 {
                ctx.error(st.start.as_ref().map(|q| q.span()), f("start"), "must be ≥ 0");
            }
        }
        let envelope = match (rise, plateau, fall) {
            (Some(r), Some(p), Some(fl)) => match Envelope::new(r, p, fl) {
                Ok(env) if env.total() > 0.0 => Some(env),
                Ok(_) => {
                    ctx.error(Some(st.plateau.span()), f("plateau"), "stage has zero duration");
                    None
                }
                Err(err) => {
                    ctx.error(Some(span.clone()), f("plateau"), err.to_string());
                    None
                }
            },
            _ => None,
        };
        let start = match (start, gap) {
            (Some(Some(s)), _) => Some(s),
            (Some(None), Some(g)) => Some(cursor.map_or(0.0, |c| c + g)),
            _ => None,
        };

        let forbid = |ctx: &mut Ctx<'_>, present: bool, key: &str, kind: &str| {
            if present {
                ctx.error(Some(span.clone()), f(key), format!("not valid for {kind} stages"));
            }
        };
        let stage = match st.kind {
            StageKindName::Mono => {
                forbid(ctx, st.amplitude_fundamental.is_some(), "amplitude_fundamental", "mono");
                forbid(ctx, st.amplitude_harmonic.is_some(), "amplitude_harmonic", "mono");
                let amp = match &st.amplitude {
                    Some(a) => ctx.positive(a, &f("amplitude"), Dim::Energy),
                    None => {
                        ctx.error(Some(span.clone()), f("amplitude"), "missing field");
                        None
                    }
                };
                let chi = match (&st.chi, &st.chi_over_pi) {
                    (Some(_), Some(b)) => {
                        ctx.error(Some(b.span()), f("chi_over_pi"), "give either chi or chi_over_pi, not both");
                        None
                    }
                    (Some(c), None) => Some(*c.get_ref()),
                    (None, Some(c)) => Some(*c.get_ref() * PI),
                    (None, None) => Some(0.0),
                };
                let convention = st.convention.map(AmplitudeConvention::from).unwrap_or_default();
                match (amp, photon, chi, envelope, start) {
                    (Some(amplitude), Some(photon_energy), Some(chi), Some(envelope), Some(start)) => {
                        Some(FieldStage::mono(
                            label,
                            MonoStandingWave { amplitude, photon_energy, chi, envelope, start, convention },
                        ))
                    }
                    _ => None,
                }
            }
            StageKindName::Bichromatic => {
                forbid(ctx, st.amplitude.is_some(), "amplitude", "bichromatic");
                forbid(ctx, st.chi.is_some(), "chi", "bichromatic");
                forbid(ctx, st.chi_over_pi.is_some(), "chi_over_pi", "bichromatic");
                forbid(ctx, st.convention.is_some(), "convention", "bichromatic");
                let amp = |ctx: &mut Ctx<'_>, q: &Option<Q>, key: &str| match q {
                    Some(a) => ctx.positive(a, &f(key), Dim::Energy),
                    None => {
                        ctx.error(Some(span.clone()), f(key), "missing field");
                        None
                    }
                };
                let a1 = amp(ctx, &st.amplitude_fundamental, "amplitude_fundamental");
                let a2 = amp(ctx, &st.amplitude_harmonic, "amplitude_harmonic");
                match (a1, a2, photon, envelope, start) {
                    (Some(a1), Some(a2), Some(photon_energy), Some(envelope), Some(start)) => {
                        Some(FieldStage::bichromatic(
                            label,
                            BichromaticWave {
                                amplitude_fundamental: a1,
                                amplitude_harmonic: a2,
                                photon_energy,
                                envelope,
                                start,
                            },
                        ))
                    }
                    _ => None,
                }
            }
        };
        match stage {
            Some(s) => {
                cursor = Some(s.end());
                stages.push(s);
                stage_spans.push(span);
            }
            None => cursor = None,
        }
    }
    let stages_ok = stages.len() == raw.stages.len();

    if stages_ok {
        check_stage_sequence(ctx, &stages, &stage_spans, &raw.propagation.max_concurrent_stages);
    }

    let last_end = stages.iter().map(FieldStage::end).fold(0.0, f64::max);
    let duration = match &p.duration {
        Some(d) => ctx.non_negative(d, "propagation.duration", Dim::Time),
        None => tail.map(|t| if stages.is_empty() { t } else { last_end + t }),
    };
    if let (Some(d), true) = (duration, stages_ok) {
        for (i, (s, span)) in stages.iter().zip(&stage_spans).enumerate() {
            if s.end() > d * (1.0 + 1e-12) {
                ctx.error(
                    Some(span.clone()),
                    format!("stages[{i}]"),
                    format!(
                        "stage '{}' ends at {:.3} fs, after the run duration {:.3} fs",
                        s.label,
                        UnitSystem::time_to_fs(s.end()),
                        UnitSystem::time_to_fs(d)
                    ),
                );
            }
        }
    }

    let grid_points = match &p.grid_points {
        None => Some(DEFAULT_GRID_POINTS),
        Some(n) if *n.get_ref() >= 16 => Some(*n.get_ref() as usize),
        Some(n) => {
            ctx.error(Some(n.span()), "propagation.grid_points", "must be ≥ 16");
            None
        }
    };
    let grid_length = ctx.opt_positive(&p.grid_length, "propagation.grid_length", Dim::Length, UnitSystem::um_to_length(DEFAULT_GRID_LENGTH_UM));
    let snapshot_every = ctx.opt_positive(&p.snapshot_every, "propagation.snapshot_every", Dim::Time, UnitSystem::fs_to_time(DEFAULT_SNAPSHOT_FS));
    let timestep = match &p.dt {
        None => Some(None),
        Some(q) => ctx.positive(q, "propagation.dt", Dim::Time).map(Some),
    };
    let lattice_half_width = match &p.lattice_half_width {
        None => Some(24),
        Some(n) if *n.get_ref() >= 4 => Some(*n.get_ref() as usize),
        Some(n) => {
            ctx.error(Some(n.span()), "propagation.lattice_half_width", "must be ≥ 4");
            None
        }
    };
    let channel_half_width = match &p.channel_half_width {
        None => Some(None),
        Some(q) => ctx.positive(q, "propagation.channel_half_width", Dim::Momentum).map(Some),
    };

    let d = &raw.design;
    let dpx = ctx.opt_non_negative(&d.dpx, "design.dpx", Dim::Momentum, 0.0);
    let tolerances = ToleranceBudget {
        dpz_over_pz: ctx.fraction(&d.dpz_over_pz, "design.dpz_over_pz"),
        dpy_over_py: ctx.fraction(&d.dpy_over_py, "design.dpy_over_py"),
        dpx: dpx.unwrap_or(0.0),
        dl_over_l: ctx.fraction(&d.dl_over_l, "design.dl_over_l"),
    };

    let o = &raw.outputs;
    let outputs = OutputSettings {
        dir: o.dir.clone().unwrap_or_else(|| "out".into()),
        format: o.format.unwrap_or_default(),
        time_series: o.time_series.clone().unwrap_or_else(|| "timeseries.csv".into()),
        summary: o.summary.clone().unwrap_or_else(|| "summary.txt".into()),
        snapshots: o.snapshots.unwrap_or(true),
    };
    for (key, file) in [("outputs.time_series", &outputs.time_series), ("outputs.summary", &outputs.summary)] {
        if file.is_empty() || file.contains('/') || file.contains('\\') {
            ctx.error(None, key, "must be a plain file name inside the output directory");
        }
    }

    let spec = ScenarioSpec {
        name: name.to_string(),
        sha256: hex::encode(Sha256::digest(src.as_bytes())),
        units: raw.units,
        packet: PacketSpec { center: center?, width: width?, momentum: momentum?, spin },
        design: design_inputs(&stages, kinetic?, tolerances),
        stages,
        duration: duration?,
        grid_points: grid_points?,
        grid_length: grid_length?,
        backend: match p.backend.unwrap_or(BackendName::FullField) {
            BackendName::FullField => Backend::FullField,
            BackendName::Effective => Backend::Effective,
            BackendName::ModeLattice => Backend::ModeLattice,
        },
        timestep: timestep?,
        snapshot_every: snapshot_every?,
        lattice_half_width: lattice_half_width?,
        lattice_couplings: match p.lattice_couplings.unwrap_or(CouplingsName::FullField) {
            CouplingsName::FullField => LatticeCouplings::FullField,
            CouplingsName::Effective => LatticeCouplings::Effective,
        },
        lattice_integrator: match p.lattice_integrator.unwrap_or(IntegratorName::Gl4) {
            IntegratorName::Gl4 => LatticeIntegrator::GaussLegendre4,
            IntegratorName::Rk4 => LatticeIntegrator::RungeKutta4,
        },
        lattice_sampling: match p.lattice_sampling.unwrap_or(SamplingName::Central) {
            SamplingName::Central => LatticeSampling::Central,
            SamplingName::Full => LatticeSampling::Full,
        },
        channel_half_width: channel_half_width?,
        outputs,
        overrides: Overrides::default(),
    };
    if !stages_ok || !ctx.errors.is_empty() {
        return None;
    }
    check_numerics(ctx, &spec, p);
    Some(spec)
}

fn check_stage_sequence(
    ctx: &mut Ctx<'_>,
    stages: &[FieldStage],
    spans: &[Range<usize>],
    max_concurrent: &Option<Spanned<i64>>,
) {
    let limit = match max_concurrent {
        None => 1,
        Some(n) if *n.get_ref() >= 1 => *n.get_ref() as usize,
        Some(n) => {
            ctx.error(Some(n.span()), "propagation.max_concurrent_stages", "must be ≥ 1");
            return;
        }
    };
    for i in 1..stages.len() {
        if stages[i].start() < stages[i - 1].start() {
            ctx.error(
                Some(spans[i].clone()),
                format!("stages[{i}].start"),
                format!("stage '{}' starts before the preceding stage '{}'", stages[i].label, stages[i - 1].label),
            );
        }
    }
    if let Some(first) = stages.first() {
        let e = first.photon_energy();
        for (i, s) in stages.iter().enumerate().skip(1) {
            if (s.photon_energy() - e).abs() > 1e-12 * e {
                ctx.error(
                    Some(spans[i].clone()),
                    format!("stages[{i}].photon_energy"),
                    format!("{} eV differs from the first stage's {} eV; all stages share one ħω", s.photon_energy(), e),
                );
            }
        }
    }
    for (i, s) in stages.iter().enumerate() {
        let active = stages
            .iter()
            .filter(|o| o.start() <= s.start() && s.start() < o.end())
            .count();
        if active > limit {
            ctx.error(
                Some(spans[i].clone()),
                format!("stages[{i}].start"),
                format!(
                    "stage '{}' overlaps {} other stage(s); at most {limit} may be active at once",
                    s.label,
                    active - 1
                ),
            );
        }
    }
}

/// Checks that need the assembled scenario: grid resolution, packet fit, timestep bound.
fn check_numerics(ctx: &mut Ctx<'_>, spec: &ScenarioSpec, p: &PropagationSection) {
    let s = spec.scenario();
    let grid_span = p.grid_points.as_ref().map(|n| n.span()).or(p.grid_length.as_ref().map(|q| q.span()));
    match s.grid() {
        Err(e) => ctx.error(grid_span, "propagation.grid_points", e.to_string()),
        Ok(_) => {
            if let Err(e) = s.initial_state() {
                ctx.error(Some(spec_electron_span(ctx.src)), "electron.width", e.to_string());
            }
        }
    }
    if let Err(e) = s.validate() {
        let span = p.dt.as_ref().map(|q| q.span());
        ctx.error(span, "propagation", e.to_string());
    }
}

fn spec_electron_span(src: &str) -> Range<usize> {
    let start = src.find("[electron]").unwrap_or(0);
    start..start
}

fn design_inputs(stages: &[FieldStage], kinetic: f64, tolerances: ToleranceBudget) -> DesignInputs {
    use spinsplit_core::fields::FieldKind;
    let mut d = DesignInputs { electron_energy: kinetic, tolerances, ..DesignInputs::example() };
    if let Some(b) = stages.iter().find_map(|s| match s.kind {
        FieldKind::Bichromatic(b) => Some(b),
        _ => None,
    }) {
        d.photon_energy = b.photon_energy;
        d.amplitude_fundamental = b.amplitude_fundamental;
        d.amplitude_harmonic = b.amplitude_harmonic;
    }
    if let Some(m) = stages.iter().find_map(|s| match s.kind {
        FieldKind::Mono(m) => Some(m),
        _ => None,
    }) {
        d.amplitude_mono = 0.5 * m.standing_amplitude();
        if !stages.iter().any(|s| matches!(s.kind, FieldKind::Bichromatic(_))) {
            d.photon_energy = m.photon_energy;
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[electron]
momentum = 400
width = 0.11
"#;

    #[test]
    fn quantities_with_units() {
        assert_eq!(parse_with_unit("106 fs").unwrap(), (106.0, "fs"));
        assert_eq!(parse_with_unit(" 2.35e4  eV ").unwrap(), (2.35e4, "eV"));
        assert!(parse_with_unit("106fs").is_err());
        assert!(parse_with_unit("abc fs").is_err());
    }

    #[test]
    fn minimal_file_is_free_propagation() {
        let s = parse_scenario_str(MINIMAL, "m").unwrap();
        assert!(s.stages.is_empty());
        assert!((UnitSystem::time_to_fs(s.duration) - DEFAULT_TAIL_FS).abs() < 1e-12);
        assert_eq!(s.grid_points, DEFAULT_GRID_POINTS);
    }

    #[test]
    fn error_positions_are_one_based() {
        let src = "[electron]\nmomentum = 400\nwidth = -1\n";
        let err = parse_scenario_str(src, "m").unwrap_err();
        let e = &err.schema_errors()[0];
        assert_eq!((e.line, e.column), (3, 9));
        assert_eq!(e.field, "electron.width");
    }
}
