use std::path::Path;
use std::process::{Command, Output};

fn nucspin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nucspin"))
        .args(args)
        .env_remove("NUCSPIN_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn zero_trials_is_a_validation_error() {
    let o = nucspin(&["ramsey", "--trials", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("trials must be ≥ 1"), "{}", stderr(&o));
    // Rejected before any work, also under --dry-run.
    assert_eq!(nucspin(&["ramsey", "--trials", "0", "--dry-run"]).status.code(), Some(1));
}

#[test]
fn readout_scan_peaks_at_26_shots() {
    let o = nucspin(&["readout-fidelity", "--scan-m", "1..50"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut r = csv::Reader::from_reader(&o.stdout[..]);
    assert_eq!(r.headers().unwrap(), vec!["m", "f_t1", "f_shot", "f_n"]);
    let rows: Vec<(u32, f64)> = r
        .records()
        .map(|rec| {
            let rec = rec.unwrap();
            (rec[0].parse().unwrap(), rec[3].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 50);
    let best = rows.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    assert_eq!(best.0, 26);
}

/// Every file under `dir`, sorted by name.
fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn config(name: &str) -> String {
    format!("{}/configs/{name}.toml", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn outputs_are_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let ramsey = config("2g-j");
    let cases: [(&str, Vec<&str>); 4] = [
        ("bell", vec!["bell", "--trials", "300"]),
        ("budget", vec!["error-budget", "--trials", "100"]),
        ("hf", vec!["hyperfine-mc", "--mode", "curves", "--trials", "200"]),
        ("ramsey", vec!["ramsey", "--trials", "200", "--config", &ramsey]),
    ];
    for (tag, args) in cases {
        let outs: Vec<_> = [("1", "a"), ("4", "b"), ("4", "c")]
            .iter()
            .map(|(threads, k)| {
                let out = dir.path().join(format!("{tag}_{k}"));
                let mut a = args.clone();
                a.extend(["--seed", "11", "--threads", threads, "--out", out.to_str().unwrap()]);
                let o = nucspin(&a);
                assert!(o.status.success(), "{tag}: {}", stderr(&o));
                if out.is_dir() { files(&out) } else { vec![(String::new(), std::fs::read(&out).unwrap())] }
            })
            .collect();
        assert!(!outs[0].is_empty());
        assert_eq!(outs[0], outs[1], "{tag}: thread count changed the output");
        assert_eq!(outs[1], outs[2], "{tag}: repeat changed the output");
    }
}

#[test]
fn seed_changes_noisy_output() {
    let a = nucspin(&["bell", "--trials", "200", "--seed", "1"]);
    let b = nucspin(&["bell", "--trials", "200", "--seed", "2"]);
    assert!(a.status.success() && b.status.success());
    assert_ne!(a.stdout, b.stdout);
}

const SUBCOMMANDS: [&str; 12] = [
    "spectrum", "chevron", "rabi", "ramsey", "hahn", "bell", "error-budget", "shuttle",
    "readout-fidelity", "hyperfine-mc", "vanvleck", "fit",
];

#[test]
fn dry_run_validates_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in SUBCOMMANDS {
        let out = dir.path().join(cmd);
        let mut args = vec![cmd, "--dry-run", "--out", out.to_str().unwrap()];
        if cmd == "fit" {
            args.extend(["esr", "--input", "missing.csv"]);
        }
        let o = nucspin(&args);
        assert!(o.status.success(), "{cmd}: {}", stderr(&o));
        let plan: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(plan[0]["experiment"], cmd);
        assert!(plan[0]["config_sha256"].as_str().unwrap().len() == 64);
        assert!(!out.exists(), "{cmd} wrote output under --dry-run");
    }
}

#[test]
fn every_bundled_figure_resolves() {
    let list = nucspin(&["reproduce", "--list"]);
    assert!(list.status.success());
    let ids: Vec<String> = String::from_utf8(list.stdout)
        .unwrap()
        .lines()
        .map(|l| l.split_whitespace().next().unwrap().to_string())
        .collect();
    for id in ["2e", "2f", "2g-j", "3c-e", "4b", "4d", "4f", "ext1", "s1", "s2"] {
        assert!(ids.iter().any(|i| i == id), "{id} missing");
    }
    for id in &ids {
        let o = nucspin(&["reproduce", id, "--dry-run"]);
        assert!(o.status.success(), "{id}: {}", stderr(&o));
    }
    assert_eq!(nucspin(&["reproduce", "9z"]).status.code(), Some(1));
}

#[test]
fn malformed_config_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "seed = 1\n\n[[run]]\nname = \"r\"\nexperiment = \"ramsey\"\nbogus = 3\n").unwrap();
    let o = nucspin(&["ramsey", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(e.contains("line 6") && e.contains("bogus"), "{e}");

    std::fs::write(&path, "[[run]]\nname = \"r\"\nexperiment = \"ramsey\"\n[run.ramsey]\ntau_us = { start = 0.0 }\n").unwrap();
    let o = nucspin(&["ramsey", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("tau_us"), "{}", stderr(&o));

    // A section for another experiment is rejected.
    std::fs::write(&path, "[[run]]\nname = \"r\"\nexperiment = \"ramsey\"\n[run.hahn]\n").unwrap();
    assert_eq!(nucspin(&["ramsey", "--config", path.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn bad_flags_exit_with_validation_code() {
    assert_eq!(nucspin(&["ramsey", "--trials", "many"]).status.code(), Some(1));
    assert_eq!(nucspin(&["teleport"]).status.code(), Some(1));
    assert_eq!(nucspin(&["readout-fidelity", "--scan-m", "9..3"]).status.code(), Some(1));
    assert!(nucspin(&["--help"]).status.success());
}

#[test]
fn figure_2f_lines_sit_at_half_the_hyperfine_coupling() {
    let dir = tempfile::tempdir().unwrap();
    let o = nucspin(&["reproduce", "2f", "--out", dir.path().to_str().unwrap(), "--trials", "20"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let f_n0 = 8.458 * 1.42;
    for (file, sign) in [("fig2f_down.csv", 1.0), ("fig2f_up.csv", -1.0)] {
        let mut r = csv::Reader::from_path(dir.path().join(file)).unwrap();
        let mut best = (0.0, f64::MIN);
        for rec in r.records() {
            let rec = rec.unwrap();
            let (f, p): (f64, f64) = (rec[0].parse().unwrap(), rec[2].parse().unwrap());
            if p > best.1 {
                best = (f, p);
            }
        }
        let offset = (best.0 - f_n0) * 1e3;
        assert!((offset - sign * 224.25).abs() <= 2.5, "{file}: line at {offset} kHz");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn json_results_carry_provenance() {
    let o = nucspin(&["spectrum"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["provenance"]["experiment"], "spectrum");
    assert!((v["result"]["f_n_el_down"].as_f64().unwrap() - v["result"]["f_n_el_up"].as_f64().unwrap() - 0.4485).abs() < 1e-9);
    let csv = nucspin(&["spectrum", "--format", "csv"]);
    assert!(String::from_utf8(csv.stdout).unwrap().starts_with("quantity,value"));
}

#[test]
fn out_dir_variable_sets_the_default_location() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_nucspin"))
        .args(["vanvleck"])
        .env("NUCSPIN_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    assert!(dir.path().join("vanvleck.csv").exists());
}

#[test]
fn fit_reads_simulated_csv() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("decay.csv");
    let o = nucspin(&["reproduce", "4d", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    std::fs::rename(dir.path().join("fig4d.csv"), &data).unwrap();
    let o = nucspin(&["fit", "coherence-decay", "--input", data.to_str().unwrap(), "--y-column", "p_coherence"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let p = v["result"]["parameters"].as_array().unwrap().iter().find(|p| p["name"] == "p_err").unwrap()["value"].as_f64().unwrap();
    assert!((p - 0.0045).abs() < 2e-4, "{p}");

    let o = nucspin(&["fit", "ramsey", "--input", dir.path().join("nope.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}
