use std::process::{Command, Output};

use serde_json::Value;

fn exwkb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exwkb")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

#[test]
fn quantize_with_verify_embeds_oracle_and_difference() {
    let out = exwkb(&["quantize", "--potential", "double-hump", "--hbar", "0.5", "--window", "-1,0", "--verify"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let levels = v["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 1);
    let e = f(&levels[0]["energy"]);
    let o = f(&levels[0]["oracle"]);
    assert!((e - (-0.395757590168771)).abs() < 1e-10);
    assert!((f(&levels[0]["abs_diff"]) - (e - o).abs()).abs() < 1e-15);
    assert!(f(&levels[0]["abs_diff"]) <= 1e-6);
}

#[test]
fn scatter_reports_amplitudes_and_unitarity() {
    let out = exwkb(&["scatter", "--potential", "double-hump", "--hbar", "0.1", "--E", "0.05"]);
    assert_eq!(out.status.code(), Some(0));
    let r = &json(&out)["results"][0];
    assert!(f(&r["unitarity_defect"]) <= 1e-6);
    assert!((f(&r["T2"]) / 1.0090773607e-9 - 1.0).abs() < 1e-6);
    assert_eq!(r["regime"], "tunneling");
    assert!(r.get("oracle").is_none());
}

#[test]
fn coulomb_levels_match_hydrogen_like_spectrum() {
    let out = exwkb(&["coulomb", "--alpha", "2", "--l", "0", "--hbar", "1", "--levels", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let got: Vec<f64> = v["levels"].as_array().unwrap().iter().map(|l| f(&l["energy"])).collect();
    for (g, w) in got.iter().zip([-1.0, -0.25, -1.0 / 9.0]) {
        assert!((g - w).abs() < 1e-12, "{g} vs {w}");
    }
}

#[test]
fn coulomb_phase_is_unitary() {
    let out = exwkb(&["coulomb", "--alpha", "2", "--l", "0", "--hbar", "1", "--E", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(f(&json(&out)["phase"]["unitarity_defect"]) < 1e-8);
}

#[test]
fn graph_svg_shows_four_sectors_in_the_bound_regime() {
    let out = exwkb(&["graph", "--potential", "double-hump", "--E", "-0.5", "--hbar", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let svg = String::from_utf8(out.stdout).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<text").count(), 4);
    for label in ["S1 ", "S2 ", "S3 ", "S3b "] {
        assert!(svg.contains(label), "missing {label}");
    }
    assert_eq!(svg.matches("<circle").count(), 4);
}

#[test]
fn graph_csv_over_the_barrier_has_conjugate_turning_points() {
    let out = exwkb(&["graph", "--E", "0.5", "--hbar", "0.1", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let tps: Vec<(f64, f64)> = text
        .lines()
        .filter(|l| l.starts_with("turning_point"))
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            (c[2].parse().unwrap(), c[3].parse().unwrap())
        })
        .collect();
    assert_eq!(tps.len(), 4);
    for (re, im) in &tps {
        assert!(im.abs() > 0.5);
        assert!(tps.iter().any(|(r2, i2)| (r2 - re).abs() < 1e-12 && (i2 + im).abs() < 1e-12));
    }
    assert_eq!(text.lines().filter(|l| l.starts_with("sector")).count(), 6);
}

#[test]
fn output_is_byte_identical_across_runs() {
    let args = ["scatter", "--hbar", "0.1", "--E", "0.02,0.3"];
    let a = exwkb(&args);
    let b = exwkb(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let svg = ["graph", "--E", "0.05", "--hbar", "0.1"];
    assert_eq!(exwkb(&svg).stdout, exwkb(&svg).stdout);
}

#[test]
fn parallel_sweep_matches_serial_sweep() {
    let serial = exwkb(&["scatter", "--hbar", "0.1", "--E", "0.01,0.03,0.2,0.5", "--format", "csv"]);
    let parallel = exwkb(&["scatter", "--hbar", "0.1", "--E", "0.01,0.03,0.2,0.5", "--format", "csv", "--jobs", "4"]);
    assert_eq!(serial.status.code(), Some(0));
    assert_eq!(serial.stdout, parallel.stdout);
    let text = String::from_utf8(serial.stdout).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.starts_with("E,R_re,R_im,T_re,T_im,T2,unitarity_defect\n"));
}

#[test]
fn floats_carry_fifteen_significant_digits() {
    let out = exwkb(&["scatter", "--hbar", "0.1", "--E", "0.3", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let row = text.lines().nth(1).unwrap();
    for cell in row.split(',') {
        let mantissa = cell.trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.replace('.', "").len(), 15, "{cell}");
    }
}

#[test]
fn solver_errors_exit_with_two_and_json() {
    let out = exwkb(&["scatter", "--hbar", "0.1", "--E", "-0.5"]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["error"]["kind"], "Unsupported");
    assert!(v["error"]["message"].as_str().unwrap().contains("V(±∞)"));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(exwkb(&["quantize", "--hbar", "0.5", "--window", "1"]).status.code(), Some(1));
    assert_eq!(exwkb(&["scatter", "--hbar", "0.1", "--E", "0.05", "--format", "svg"]).status.code(), Some(1));
    assert_eq!(exwkb(&["quantize", "--hbar", "0.5", "--window", "-1,0", "--format", "csv"]).status.code(), Some(1));
    assert_eq!(exwkb(&["graph", "--potential", "square-well", "--E", "0.1", "--hbar", "0.1"]).status.code(), Some(1));
    assert_eq!(exwkb(&["graph", "--E", "0.1", "--hbar", "-1"]).status.code(), Some(1));
    assert_eq!(exwkb(&["resonance"]).status.code(), Some(1));
    assert_eq!(exwkb(&["--help"]).status.code(), Some(0));
}

#[test]
fn tolerance_override_from_environment() {
    let run = |rtol: &str| {
        Command::new(env!("CARGO_BIN_EXE_exwkb"))
            .args(["scatter", "--hbar", "0.1", "--E", "0.3"])
            .env("EXWKB_RTOL", rtol)
            .output()
            .unwrap()
    };
    assert_eq!(run("-1").status.code(), Some(1));
    let loose = run("1e-6");
    assert_eq!(loose.status.code(), Some(0));
    let tight = exwkb(&["scatter", "--hbar", "0.1", "--E", "0.3"]);
    let (a, b) = (json(&loose), json(&tight));
    let d = (f(&a["results"][0]["T2"]) - f(&b["results"][0]["T2"])).abs();
    assert!(d < 1e-5);
}

#[test]
fn json_potential_and_output_file() {
    let dir = std::env::temp_dir().join(format!("exwkb-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("levels.json");
    let desc = r#"{"num": [-1, 0, 1], "den": [1, 0, 2, 0, 1], "label": "custom"}"#;
    let out = exwkb(&["quantize", "--potential", desc, "--hbar", "0.5", "--window", "-1,0", "-o", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["potential"], "custom");
    assert!((f(&v["levels"][0]["energy"]) + 0.395757590168771).abs() < 1e-10);
    std::fs::remove_dir_all(&dir).unwrap();
    let bad = exwkb(&["quantize", "--potential", "{\"num\": [1]}", "--hbar", "0.5", "--window", "-1,0"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn resonance_verify_agrees_with_breit_wigner_fit() {
    let out = exwkb(&["resonance", "--hbar", "0.1", "--window", "0,0.125", "--verify"]);
    assert_eq!(out.status.code(), Some(0));
    let r = &json(&out)["resonances"][0];
    let g = f(&r["gamma"]);
    assert!(f(&r["abs_diff_gamma"]) / g < 0.1);
    assert!((g / 6.30112e-8 - 1.0).abs() < 1e-4);
}

#[test]
fn coulomb_builtin_and_complex_coefficients() {
    let out = exwkb(&["graph", "--potential", "coulomb:alpha=2,l=0", "--hbar", "1", "--E", "-1", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let g = &json(&out)["graph"];
    assert_eq!(g["turning_points"].as_array().unwrap().len(), 2);
    assert_eq!(g["poles"].as_array().unwrap().len(), 1);

    let desc = r#"{"num": [[-1, 0], 0, [1, 0]], "den": [1, 0, 2, 0, 1]}"#;
    let out = exwkb(&["quantize", "--potential", desc, "--hbar", "0.5", "--window", "-1,0"]);
    assert_eq!(out.status.code(), Some(0));
    assert!((f(&json(&out)["levels"][0]["energy"]) + 0.395757590168771).abs() < 1e-10);

    assert_eq!(exwkb(&["graph", "--potential", "coulomb:l=1", "--hbar", "1", "--E", "-1"]).status.code(), Some(1));
}
