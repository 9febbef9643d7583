use std::path::Path;
use std::process::{Command, Output};

fn xpsram(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xpsram"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn all_presets_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, p) in [
        ("bitcell", "fig3"),
        ("bitcell", "fig4"),
        ("sweep-dl", "fig5"),
        ("array", "fig6"),
        ("energy", "table1"),
        ("array", "identity"),
        ("array", "random"),
    ] {
        let o = xpsram(&[cmd, "--preset", p], dir.path());
        assert_eq!(o.status.code(), Some(0), "{cmd} {p}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn fig6_prints_decoded_word() {
    let dir = tempfile::tempdir().unwrap();
    let o = xpsram(&["array", "--preset", "fig6"], dir.path());
    let s = stdout(&o);
    assert!(s.contains("Z=01011001"), "{s}");
    let csv = std::fs::read_to_string(dir.path().join("fig6_spectrum.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("channel,wavelength_nm,power_uW,decoded_bit"));
    let bits: String = lines.map(|l| l.rsplit(',').next().unwrap().to_string()).collect();
    assert_eq!(bits, "01011001");
}

#[test]
fn identity_is_all_dark() {
    let dir = tempfile::tempdir().unwrap();
    let o = xpsram(&["array", "--preset", "identity"], dir.path());
    assert!(stdout(&o).contains("Z=00000000"));
}

#[test]
fn fig4_truth_table_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = xpsram(&["bitcell", "--preset", "fig4"], dir.path());
    let s = stdout(&o);
    for row in ["xor 0 0 -> 0", "xor 0 1 -> 1", "xor 1 0 -> 1", "xor 1 1 -> 0"] {
        assert!(s.contains(row), "{s}");
    }
    let csv = std::fs::read_to_string(dir.path().join("fig4_waveforms.csv")).unwrap();
    assert!(csv.starts_with("# units: ps,V,V,W"));
    assert_eq!(csv.lines().nth(1).unwrap().split(',').next(), Some("time_ps"));
}

#[test]
fn sweep_dl_rows_and_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let o = xpsram(&["sweep-dl", "--start-nm", "0", "--stop-nm", "272", "--step-nm", "34"], dir.path());
    let s = stdout(&o);
    let rows: Vec<&str> = s.lines().skip(1).collect();
    assert_eq!(rows.len(), 9);
    let first: f64 = rows[0].split(',').nth(1).unwrap().parse().unwrap();
    let last: f64 = rows[8].split(',').nth(1).unwrap().parse().unwrap();
    assert!((last - first - 9.1114).abs() < 1e-3, "{}", last - first);

    let o = xpsram(&["sweep-dl", "--start-nm", "10", "--stop-nm", "0"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "dL_nm,lambda_nm\n");

    let o = xpsram(&["sweep-dl", "--step-nm", "-34"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn energy_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = xpsram(&["energy", "--preset", "table1"], dir.path());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let ops = v.as_array().unwrap();
    let get = |op: &str, k: &str| {
        ops.iter().find(|r| r["op"] == op).unwrap()[k].as_f64().unwrap()
    };
    assert_eq!(get("xor", "optical_fJ"), 11.0);
    assert!((get("xor", "total_fJ") - 13.2).abs() <= 1.32);
    assert!((get("write", "optical_fJ") - 51.0).abs() < 1e-9);
    assert!((get("hold", "optical_fJ") - 10.0).abs() < 1e-9);

    let o = xpsram(&["energy", "--preset", "table1", "--compare"], dir.path());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let refs = v["reference"].as_array().unwrap();
    assert!(refs.iter().any(|r| r["energy_fJ_per_bit"] == 7960.0));
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "name = \"x\"\n[device]\nvdd_volts = 1.0\n").unwrap();
    let o = xpsram(&["bitcell", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("vdd_volts") && err.contains("line 3"), "{err}");

    let o = xpsram(&["bitcell", "--preset", "nope"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = xpsram(&["bitcell", "--bogus-flag"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn diagnostics_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("weak.toml");
    // A write pulse barely above bias cannot flip the latch.
    std::fs::write(
        &cfg,
        "[device]\nwrite_power_uw = 11.0\n[[script]]\nop = \"write\"\nbit = 1\n",
    )
    .unwrap();
    let o = xpsram(&["bitcell", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn effective_config_reproduces_run() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    xpsram(&["bitcell", "--preset", "fig3", "--dt-ps", "0.5"], &a);
    let eff = a.join("fig3_effective.toml");
    let o = xpsram(&["bitcell", "--config", eff.to_str().unwrap()], &b);
    assert_eq!(o.status.code(), Some(0));
    let wa = std::fs::read(a.join("fig3_waveforms.csv")).unwrap();
    let wb = std::fs::read(b.join("fig3_waveforms.csv")).unwrap();
    assert_eq!(wa, wb);
}

#[test]
fn seeded_random_runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = xpsram(&["array", "--preset", "random", "--seed", "9"], dir.path());
    let b = xpsram(&["array", "--preset", "random", "--seed", "9"], dir.path());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}
