use std::path::Path;
use std::process::Command;

fn relay_sim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_relay-sim"))
}

fn write_spec(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("spec.toml");
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL: &str = r#"
name = "small"
kind = "snr_sweep"
snr_db = [0.0, 10.0]
realizations = 3
schemes = ["wmmse", "mrc_mrt"]

[system]
antennas = 2
user_antennas = [1, 1]
"#;

#[test]
fn presets_list_names_every_preset() {
    let out = relay_sim().args(["presets", "list"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["convergence", "snr_sweep", "position_sweep", "snr_sweep_desk"] {
        assert!(text.lines().any(|l| l == name), "missing {name}");
    }
}

#[test]
fn presets_show_prints_toml() {
    let out = relay_sim().args(["presets", "show", "snr_sweep"]).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("kind = \"snr_sweep\""));
    assert!(!relay_sim().args(["presets", "show", "nope"]).status().unwrap().success());
}

#[test]
fn run_writes_rows_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), SMALL);
    let rows = dir.path().join("out/rows.csv");
    let status = relay_sim()
        .args(["run", spec.to_str().unwrap(), "--out", rows.to_str().unwrap(), "--parallelism", "1", "--quiet"])
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&rows).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "experiment,sweep_value,scheme,realization,seed,sum_rate,iterations,converged,wall_time_s,failed,error"
    );
    assert_eq!(lines.len(), 1 + 2 * 2 * 3);
    let summary = std::fs::read_to_string(dir.path().join("out/rows_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2 * 2);
    assert!(dir.path().join("out/rows_meta.toml").exists());
}

#[test]
fn flags_override_the_spec() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), SMALL);
    let rows = dir.path().join("rows.csv");
    let status = relay_sim()
        .args([
            "run",
            spec.to_str().unwrap(),
            "--out",
            rows.to_str().unwrap(),
            "--seed",
            "500",
            "--realizations",
            "2",
            "--schemes",
            "mrc_rzf",
            "--quiet",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&rows).unwrap();
    let data: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(data.len(), 2 * 2);
    assert!(data.iter().all(|r| r[2] == "mrc_rzf"));
    assert_eq!(data[0][4], "500");
    assert_eq!(data[1][4], "501");
}

#[test]
fn sequential_and_parallel_runs_match() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), SMALL);
    let read_rates = |threads: &str| {
        let rows = dir.path().join(format!("rows_{threads}.csv"));
        let status = relay_sim()
            .args(["run", spec.to_str().unwrap(), "--out", rows.to_str().unwrap(), "--parallelism", threads, "--quiet"])
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read_to_string(&rows)
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(5).unwrap().to_string())
            .collect::<Vec<_>>()
    };
    assert_eq!(read_rates("1"), read_rates("3"));
}

#[test]
fn empty_cell_gives_nonzero_exit() {
    // Distances above 1 with a huge path-loss exponent underflow every channel
    // to zero, which MRC-MRT cannot normalize.
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        r#"
name = "broken"
kind = "snr_sweep"
snr_db = [0.0]
realizations = 2
schemes = ["mrc_mrt"]

[system]
antennas = 2
user_antennas = [1]
user_positions = [10.0]
relay_position = 5.0
path_loss_exponent = 2000.0
"#,
    );
    let rows = dir.path().join("rows.csv");
    let out = relay_sim()
        .args(["run", spec.to_str().unwrap(), "--out", rows.to_str().unwrap(), "--quiet"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = std::fs::read_to_string(&rows).unwrap();
    assert!(rows.lines().skip(1).all(|l| l.contains(",true,")));
}

#[test]
fn bad_inputs_are_reported() {
    let out = relay_sim().args(["run", "no-such-spec"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("neither a spec file nor a preset"));

    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), SMALL);
    let out = relay_sim().args(["run", spec.to_str().unwrap(), "--schemes", "zf"]).output().unwrap();
    assert!(!out.status.success());
}
