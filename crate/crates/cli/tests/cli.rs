//! End-to-end command-line tests driving the `mfx` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn mfx() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mfx"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    mfx()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(path: PathBuf) -> String {
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn make_cascade(dir: &Path, id: &str) {
    let out = run(
        &[
            "synth", "--kind", "cascade", "--multiplier", "0.7", "--depth", "13", "--seed", "5",
            "--id", id, "--out", ".",
        ],
        dir,
    );
    assert_ok(&out);
}

fn make_coupled(dir: &Path, id: &str, length: &str, seed: &str, coupling: &str) {
    let out = run(
        &[
            "synth", "--kind", "coupled", "--coupling", coupling, "--length", length, "--seed",
            seed, "--id", id, "--out", ".",
        ],
        dir,
    );
    assert_ok(&out);
}

#[test]
fn mfdfa_smoke_produces_four_files() {
    let tmp = tempfile::tempdir().unwrap();
    make_cascade(tmp.path(), "casc");
    let out = run(&["mfdfa", "--input", "casc.csv", "--out", "run"], tmp.path());
    assert_ok(&out);
    let files: Vec<_> = std::fs::read_dir(tmp.path().join("run"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(files.len(), 4, "{files:?}");
    for want in [
        "casc_fq.csv",
        "casc_scaling.json",
        "casc_spectrum.json",
        "casc_spectrum_curve.csv",
    ] {
        assert!(files.contains(&want.to_string()), "missing {want}");
    }
}

#[test]
fn mfdfa_validates_before_compute() {
    let tmp = tempfile::tempdir().unwrap();
    make_cascade(tmp.path(), "casc");
    let out = run(
        &["mfdfa", "--input", "casc.csv", "--s-min", "3", "--out", "bad"],
        tmp.path(),
    );
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("s_min"), "stderr: {stderr}");
    assert!(!tmp.path().join("bad").exists(), "no outputs on failure");
}

#[test]
fn mfdfa_pair_flag_adds_cross_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    make_coupled(tmp.path(), "cp", "8192", "3", "0.8");
    let out = run(
        &[
            "mfdfa", "--input", "cp_x.csv", "--input", "cp_y.csv", "--pair", "--surrogates", "3",
            "--out", "run",
        ],
        tmp.path(),
    );
    assert_ok(&out);
    let run_dir = tmp.path().join("run");
    for want in [
        "cp_x_fq.csv",
        "cp_y_fq.csv",
        "cp_x__cp_y_cross_fq.csv",
        "cp_x__cp_y_cross_report.json",
        "cp_x__cp_y_rho.csv",
        "cp_x__cp_y_rho_lags.csv",
    ] {
        assert!(run_dir.join(want).exists(), "missing {want}");
    }
}

#[test]
fn pair_identity_gives_rho_one() {
    let tmp = tempfile::tempdir().unwrap();
    make_cascade(tmp.path(), "casc");
    std::fs::copy(tmp.path().join("casc.csv"), tmp.path().join("same.csv")).unwrap();
    let out = run(
        &[
            "pair", "--input", "casc.csv", "--input", "same.csv", "--surrogates", "0", "--out",
            "run",
        ],
        tmp.path(),
    );
    assert_ok(&out);
    let rho_csv = read(tmp.path().join("run/casc__same_rho.csv"));
    for line in rho_csv.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let rho: f64 = line.split(',').nth(4).unwrap().parse().unwrap();
        assert_eq!(rho, 1.0, "line: {line}");
    }
}

#[test]
fn pair_missing_second_input_fails() {
    let tmp = tempfile::tempdir().unwrap();
    make_cascade(tmp.path(), "casc");
    let out = run(&["pair", "--input", "casc.csv", "--out", "run"], tmp.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("exactly 2"));
}

#[test]
fn pair_reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    make_coupled(tmp.path(), "cp", "8192", "9", "0.6");
    for dir in ["a", "b"] {
        let out = run(
            &[
                "pair", "--input", "cp_x.csv", "--input", "cp_y.csv", "--seed", "17",
                "--surrogates", "5", "--lags=-1,0,1", "--out", dir,
            ],
            tmp.path(),
        );
        assert_ok(&out);
    }
    for f in [
        "cp_x__cp_y_cross_fq.csv",
        "cp_x__cp_y_cross_report.json",
        "cp_x__cp_y_rho.csv",
        "cp_x__cp_y_rho_lags.csv",
    ] {
        let a = read(tmp.path().join("a").join(f));
        let b = read(tmp.path().join("b").join(f));
        assert_eq!(a, b, "{f} differs between reruns");
    }
}

#[test]
fn tails_reports_gamma_and_flags_empty_side() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "synth", "--kind", "pareto", "--gamma", "3.0", "--length", "60000", "--seed", "2",
            "--id", "par", "--out", ".",
        ],
        tmp.path(),
    );
    assert_ok(&out);
    let out = run(
        &[
            "tails", "--input", "par.csv", "--tail-quantile", "0.02", "--out", "run",
        ],
        tmp.path(),
    );
    assert_ok(&out);
    let json: serde_json::Value =
        serde_json::from_str(&read(tmp.path().join("run/par_tails.json"))).unwrap();
    let fits = json["data"]["fits"].as_array().unwrap();
    assert_eq!(fits.len(), 4); // 2 sides x 2 methods
    for f in fits {
        let gamma = f["gamma"].as_f64().unwrap();
        assert!((gamma - 3.0).abs() < 0.5, "gamma = {gamma}");
    }
    assert!(!json["data"]["sensitivity"].as_array().unwrap().is_empty());

    // A side too thin to fit is flagged on stderr while the command still
    // succeeds and writes the usable outputs.
    let mut csv = String::from("timestamp,price\n");
    for i in 0..4000 {
        csv.push_str(&format!("{},{}\n", i * 300, 100.0 + i as f64));
    }
    std::fs::write(tmp.path().join("up.csv"), csv).unwrap();
    let out = run(
        &["tails", "--input", "up.csv", "--tail-quantile", "0.05", "--out", "run2"],
        tmp.path(),
    );
    assert_ok(&out);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("skipped"), "stderr: {stderr}");
    assert!(tmp.path().join("run2/up_ccdf.csv").exists());
}

#[test]
fn tails_symmetric_input_has_identical_sides() {
    let tmp = tempfile::tempdir().unwrap();
    // Alternate distinct up/down moves so returns come in +/- pairs with
    // several magnitudes; positive and negative CCDFs coincide.
    let mut csv = String::from("timestamp,price\n");
    let mut price = 100.0f64;
    csv.push_str(&format!("0,{price}\n"));
    for i in 0..20000 {
        let factor = 1.01 + 0.005 * ((i / 2) % 7) as f64;
        price = if i % 2 == 0 { price * factor } else { price / factor };
        csv.push_str(&format!("{},{}\n", (i + 1) * 300, price));
    }
    std::fs::write(tmp.path().join("sym.csv"), csv).unwrap();
    let out = run(&["tails", "--input", "sym.csv", "--out", "run"], tmp.path());
    assert_ok(&out);
    let ccdf = read(tmp.path().join("run/sym_ccdf.csv"));
    let side = |name: &str| -> Vec<String> {
        ccdf.lines()
            .filter(|l| l.starts_with(name))
            .map(|l| l[name.len()..].to_string())
            .collect()
    };
    let pos = side("positive,");
    let neg = side("negative,");
    assert!(!pos.is_empty());
    assert_eq!(pos, neg);
}

#[test]
fn panel_needs_two_instruments() {
    let tmp = tempfile::tempdir().unwrap();
    make_cascade(tmp.path(), "casc");
    let out = run(&["panel", "--input", "casc.csv", "--out", "run"], tmp.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("at least 2"));
}

#[test]
fn panel_writes_summary_rows_per_window() {
    let tmp = tempfile::tempdir().unwrap();
    make_coupled(tmp.path(), "a", "16384", "4", "0.8");
    make_coupled(tmp.path(), "b", "16384", "4", "0.3");
    let out = run(
        &[
            "panel", "--input", "a_x.csv", "--input", "a_y.csv", "--input", "b_y.csv",
            "--windows", "4", "--s-max", "400", "--out", "run",
        ],
        tmp.path(),
    );
    assert_ok(&out);
    let csv = read(tmp.path().join("run/panel_rho_summary.csv"));
    let rows: Vec<&str> = csv
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("pair,"))
        .collect();
    // 2 pairs x 4 windows x 4 q values.
    assert_eq!(rows.len(), 32, "{csv}");
    assert!(tmp.path().join("run/panel_rho_summary.json").exists());
}

#[test]
fn panel_regime_switch_shows_coupling_drop() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "synth", "--kind", "regime-switch", "--coupling", "0.9", "--length", "16384",
            "--switch-index", "8192", "--seed", "6", "--id", "rs", "--out", ".",
        ],
        tmp.path(),
    );
    assert_ok(&out);
    let out = run(
        &[
            "panel", "--input", "rs_x.csv", "--input", "rs_y.csv", "--windows", "4", "--s-max",
            "256", "--out", "run",
        ],
        tmp.path(),
    );
    assert_ok(&out);
    let csv = read(tmp.path().join("run/panel_rho_summary.csv"));
    let q1_bars: Vec<f64> = csv
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("pair,"))
        .filter(|l| l.split(',').nth(3) == Some("1"))
        .map(|l| l.split(',').nth(4).unwrap().parse().unwrap())
        .collect();
    assert_eq!(q1_bars.len(), 4);
    // Coupled first half, decoupled second half.
    assert!(q1_bars[0] > 0.5 && q1_bars[1] > 0.5, "{q1_bars:?}");
    assert!(q1_bars[2] < 0.2 && q1_bars[3] < 0.2, "{q1_bars:?}");
}

#[test]
fn out_dir_env_var_sets_default() {
    let tmp = tempfile::tempdir().unwrap();
    make_cascade(tmp.path(), "casc");
    let out = mfx()
        .args(["mfdfa", "--input", "casc.csv"])
        .env("MFX_OUT_DIR", "env_out")
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert_ok(&out);
    assert!(tmp.path().join("env_out/casc_fq.csv").exists());
}

#[test]
fn config_file_sets_defaults_and_flags_override() {
    let tmp = tempfile::tempdir().unwrap();
    make_cascade(tmp.path(), "casc");
    std::fs::write(
        tmp.path().join("mfx.toml"),
        r#"
s_points = 8
poly_order = 1
out_dir = "from_config"

[[input]]
id = "renamed"
path = "casc.csv"
"#,
    )
    .unwrap();
    let out = run(&["mfdfa", "--config", "mfx.toml"], tmp.path());
    assert_ok(&out);
    assert!(tmp.path().join("from_config/renamed_fq.csv").exists());

    // Flag overrides the config's output directory.
    let out = run(
        &["mfdfa", "--config", "mfx.toml", "--out", "flagged"],
        tmp.path(),
    );
    assert_ok(&out);
    assert!(tmp.path().join("flagged/renamed_fq.csv").exists());
}

#[test]
fn synth_is_reproducible_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    for dir in ["s1", "s2"] {
        let out = run(
            &[
                "synth", "--kind", "fgn", "--hurst", "0.7", "--length", "4096", "--seed", "21",
                "--id", "f", "--out", dir,
            ],
            tmp.path(),
        );
        assert_ok(&out);
    }
    assert_eq!(
        read(tmp.path().join("s1/f.csv")),
        read(tmp.path().join("s2/f.csv"))
    );
}

#[test]
fn outputs_embed_metadata() {
    let tmp = tempfile::tempdir().unwrap();
    make_cascade(tmp.path(), "casc");
    let out = run(
        &["mfdfa", "--input", "casc.csv", "--seed", "77", "--out", "run"],
        tmp.path(),
    );
    assert_ok(&out);
    let fq = read(tmp.path().join("run/casc_fq.csv"));
    assert!(fq.starts_with("# mfx "));
    assert!(fq.contains("# generator: rand_chacha::ChaCha8Rng"));
    assert!(fq.contains("# seed: 77"));
    assert!(fq.contains("\"s_points\":25"));
    let scaling: serde_json::Value =
        serde_json::from_str(&read(tmp.path().join("run/casc_scaling.json"))).unwrap();
    assert_eq!(scaling["meta"]["seed"], 77);
    assert!(scaling["meta"]["config"]["q_max"].as_f64().unwrap() == 4.0);
}
