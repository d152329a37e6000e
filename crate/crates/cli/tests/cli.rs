use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;

use spinsplit::commands::{analytic, design};
use spinsplit::output::{read_snapshots, read_time_series, SnapshotKind};
use spinsplit::{bundled_scenario, parse_scenario, parse_scenario_str, ScenarioError};
use spinsplit_core::fields::FieldKind;
use spinsplit_core::solver::Backend;
use spinsplit_core::units::UnitSystem;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spinsplit"))
}

fn run_ok(args: &[&str]) -> String {
    let out = bin().args(args).output().expect("binary runs");
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// A short effective-backend scenario that exercises a full stage.
const SMALL: &str = r#"
[units]
time = "as"
length = "nm"

[electron]
momentum = 8000
width = 3
center = 0

[[stages]]
kind = "mono"
amplitude = 4520
convention = "traveling"
photon_energy = 4000
rise = 20
plateau = 40
fall = 20

[propagation]
backend = "effective"
tail = 10
grid_points = 4096
grid_length = 78
snapshot_every = 20
"#;

fn write_small(dir: &Path, format: &str) -> std::path::PathBuf {
    let p = dir.join("small.scenario");
    fs::write(&p, format!("{SMALL}\n[outputs]\nformat = \"{format}\"\n")).unwrap();
    p
}

#[test]
fn fig2_scenario_carries_the_three_stage_parameters() {
    let spec = parse_scenario(bundled_scenario("fig2")).unwrap();
    assert_eq!(spec.backend, Backend::FullField);
    assert_eq!(spec.stages.len(), 3);
    assert!((spec.packet.momentum - 400.0).abs() < 1e-12);
    assert!((UnitSystem::length_to_um(spec.packet.width) - 0.11).abs() < 1e-12);
    assert_eq!(spec.grid_points, 16384);

    let FieldKind::Bichromatic(b) = &spec.stages[0].kind else { panic!("first stage must be bichromatic") };
    assert_eq!((b.amplitude_fundamental, b.amplitude_harmonic, b.photon_energy), (2.35e4, 2.35e4, 200.0));
    assert!((UnitSystem::time_to_fs(b.envelope.total()) - 116.0).abs() < 1e-9);
    for (stage, plateau) in spec.stages[1..].iter().zip([212.0, 106.0]) {
        let FieldKind::Mono(m) = &stage.kind else { panic!("mono stage expected") };
        assert_eq!(m.standing_amplitude(), 200.0);
        assert!((m.chi + PI / 10.0).abs() < 1e-15);
        assert!((UnitSystem::time_to_fs(m.envelope.total()) - plateau - 10.0).abs() < 1e-9);
    }
    // Stages follow each other after 10 fs gaps.
    let gap = UnitSystem::time_to_fs(spec.stages[1].start() - spec.stages[0].end());
    assert!((gap - 10.0).abs() < 1e-9);
}

#[test]
fn empty_stage_list_is_free_propagation() {
    let spec = parse_scenario_str("[electron]\nmomentum = 0\nwidth = 0.1\n", "free").unwrap();
    assert!(spec.stages.is_empty());
    let r = spinsplit_core::solver::run_scenario(&spec.scenario()).unwrap();
    assert!(r.max_norm_drift < 1e-12);
}

#[test]
fn negative_duration_names_the_field() {
    let src = "[electron]\nmomentum = 0\nwidth = 0.1\n[propagation]\nduration = -5\n";
    let err = parse_scenario_str(src, "neg").unwrap_err();
    let ScenarioError::Schema { errors, .. } = &err else { panic!("schema error expected, got {err}") };
    assert!(errors.iter().any(|e| e.field.contains("duration")), "{err}");
    assert!(errors.iter().all(|e| e.line == 5), "{err}");
}

#[test]
fn unknown_key_reports_its_line() {
    let src = "[electron]\nmomentum = 0\nwidth = 0.1\nspinn = \"up\"\n";
    let err = parse_scenario_str(src, "typo").unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("spinn"), "{msg}");
    assert!(msg.contains("line 4") || err.schema_errors().iter().any(|e| e.line == 4), "{msg}");
}

#[test]
fn missing_file_is_an_error_with_nonzero_exit() {
    let out = bin().args(["simulate", "--scenario", "/nonexistent/x.scenario"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn simulate_output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let scen = write_small(dir.path(), "csv");
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();
    let read_all = || {
        ["timeseries.csv", "summary.txt", "snapshots.txt"]
            .map(|f| fs::read(out.join(f)).unwrap_or_else(|e| panic!("{f}: {e}")))
    };
    run_ok(&["simulate", "--scenario", scen.to_str().unwrap(), "--out", out_s]);
    let first = read_all();
    run_ok(&["simulate", "--scenario", scen.to_str().unwrap(), "--out", out_s]);
    assert_eq!(first, read_all());

    let text = String::from_utf8(first[0].clone()).unwrap();
    assert!(text.starts_with("# tool: spinsplit "));
    assert!(text.contains("# scenario_sha256: "));
    let rows = read_time_series(text.as_bytes()).unwrap();
    assert!(rows.len() >= 5);
    let last = rows.last().unwrap();
    // A single π-ish mono pulse transfers most of the population.
    assert!(last[1] + last[2] > 0.99);
}

#[test]
fn binary_snapshots_dump_to_text() {
    let dir = tempfile::tempdir().unwrap();
    let scen = write_small(dir.path(), "binary");
    let out = dir.path().join("out");
    run_ok(&["simulate", "--scenario", scen.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let bin_path = out.join("snapshots.bin");
    let (header, records) = read_snapshots(fs::File::open(&bin_path).unwrap()).unwrap();
    assert!(header.iter().any(|l| l == "command: simulate"));
    assert!(records.len() >= 5);
    for r in &records {
        assert_eq!(r.kind, SnapshotKind::Position);
        assert_eq!(r.rows.len(), 4096);
        assert!((r.norm - 1.0).abs() < 1e-10);
    }

    let text_path = dir.path().join("dump.txt");
    run_ok(&["dump", bin_path.to_str().unwrap(), "--out", text_path.to_str().unwrap()]);
    let text = fs::read_to_string(&text_path).unwrap();
    assert_eq!(text.matches("# snapshot t_fs=").count(), records.len());
    // Values survive the text round trip to the printed precision.
    let first_row = text.lines().find(|l| !l.starts_with('#') && !l.starts_with("z_um")).unwrap();
    let vals: Vec<f64> = first_row.split(',').map(|s| s.parse().unwrap()).collect();
    for (a, b) in vals.iter().zip(records[0].rows[0]) {
        assert!((a - b).abs() <= 1e-11 * b.abs().max(1e-300));
    }
}

#[test]
fn analytic_on_ideal_areas_gives_the_splitter_table() {
    let spec = parse_scenario(bundled_scenario("fig2-ideal")).unwrap();
    let r = analytic(&spec).unwrap();
    let [plus, minus] = &r.unpolarized;
    assert!((plus.population - 0.5).abs() < 1e-9);
    assert!((minus.population - 0.5).abs() < 1e-9);
    assert!((plus.bloch[1] - 1.0).abs() < 1e-9, "{:?}", plus.bloch);
    assert!((minus.bloch[1] + 1.0).abs() < 1e-9, "{:?}", minus.bloch);

    let dir = tempfile::tempdir().unwrap();
    let text = run_ok(&[
        "analytic",
        "--scenario",
        bundled_scenario("fig2-ideal").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(text.contains("# command: analytic"));
    assert_eq!(fs::read_to_string(dir.path().join("analytic.txt")).unwrap(), text);
}

#[test]
fn design_table_lists_the_example_numbers() {
    let spec = parse_scenario(bundled_scenario("fig2")).unwrap();
    let r = design(&spec).unwrap();
    assert!((r.intensity_fundamental / 7.6e19 - 1.0).abs() < 0.03);
    assert!((r.momentum_acceptance - 0.031).abs() < 5e-4);

    let dir = tempfile::tempdir().unwrap();
    let text = run_ok(&[
        "design",
        "--scenario",
        bundled_scenario("fig2").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let row = |q: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(&format!("output,{q},"))).unwrap_or_else(|| panic!("{q}"));
        line.split(',').nth(2).unwrap().parse().unwrap()
    };
    assert!((row("intensity_fundamental") / r.intensity_fundamental - 1.0).abs() < 1e-11);
    assert!((row("t_bi") - 106.3).abs() < 0.05);
    assert!((row("pulse_energy") - r.pulse_energy_mj).abs() < 1e-9 * r.pulse_energy_mj);
}
