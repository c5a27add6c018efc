use std::f64::consts::{FRAC_PI_2, PI};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use maslov_core::exterior::{index_one_loop, psi, standard_forms};
use serde_json::Value;
use tempfile::TempDir;

fn maslov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maslov")).args(args).output().expect("run maslov")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn stderr_error(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().unwrap_or("");
    serde_json::from_str::<Value>(line).unwrap()["error"].clone()
}

const DIAG: &str = r#"{"length": 2.0, "diffusion": [1.0, 1.0], "potential": {"type": "constant", "matrix": [[9.0, 0.0], [0.0, 1.0]]}}"#;

#[test]
fn analyze_diagonal_problem() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "diag.json", DIAG);
    let r = json(&maslov(&["analyze", "--quiet", "--config", cfg.to_str().unwrap()]));
    assert_eq!(r["conjugate_points"].as_array().unwrap().len(), 1);
    assert!((r["conjugate_points"][0]["x"].as_f64().unwrap() - PI / 3.0).abs() < 1e-8);
    assert_eq!(r["eigenvalues"].as_array().unwrap().len(), 1);
    assert!((r["eigenvalues"][0].as_f64().unwrap() - (9.0 - PI * PI / 4.0)).abs() < 1e-8);
    assert_eq!(r["m_index"], 0);
    assert_eq!(r["morse"]["equality"], true);
    assert_eq!(r["genericity"]["generic"], true);
    assert!(r["turing"].is_null());
}

#[test]
fn analyze_is_byte_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "diag.json", DIAG);
    let a = maslov(&["analyze", "--quiet", "--config", cfg.to_str().unwrap()]);
    let b = maslov(&["analyze", "--quiet", "--config", cfg.to_str().unwrap()]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn analyze_turing_box_from_toml_with_tables() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "turing.toml",
        "length = 10.0\ndiffusion = [1.0, 15.5]\n[potential]\ntype = \"turing-example\"\n\
         [sweep]\nlambdas = [0.0]\nx_samples = 40\n",
    );
    let csv = dir.path().join("tables");
    let out = dir.path().join("report.json");
    let run = maslov(&[
        "analyze",
        "--quiet",
        "--config",
        cfg.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(run.stdout.is_empty());
    let r: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r["m_index"], 2);
    let lp = &r["leave_points"][0];
    assert!((lp["x"].as_f64().unwrap() - 5.2131).abs() < 1e-3);
    assert!((lp["lambda"].as_f64().unwrap() - 0.014669).abs() < 1e-6);
    assert_eq!(lp["local_index"], 2);
    assert_eq!(r["turing"]["regime"], "above");
    assert!((r["turing"]["d_star"].as_f64().unwrap() - (8.0 + 4.0 * 3f64.sqrt())).abs() < 1e-10);
    for name in [
        "sides.csv",
        "crossings.csv",
        "leave_points.csv",
        "conjugate_points.csv",
        "eigenvalues.csv",
        "psi_lambda_000.csv",
    ] {
        let text = fs::read_to_string(csv.join(name)).unwrap();
        assert!(!text.contains('\r'), "{name} has CR");
        assert!(text.ends_with('\n'));
    }
    let leave = fs::read_to_string(csv.join("leave_points.csv")).unwrap();
    assert_eq!(leave.lines().count(), 2);
    assert!(leave.starts_with("x,lambda,i_minus,i_plus,local_index,loop_index,kind,residual\n"));
}

#[test]
fn analyze_rejects_neumann_bc1() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "bad.json",
        r#"{"length": 2, "diffusion": [1, 1], "potential": {"type": "turing-example"}, "bc1": "neumann"}"#,
    );
    let out = maslov(&["analyze", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let e = stderr_error(&out);
    assert_eq!(e["kind"], "config");
    assert_eq!(e["exit_code"], 3);
}

#[test]
fn analyze_rejects_unknown_keys() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "bad.json", &DIAG.replace("\"length\"", "\"lenght\": 1, \"length\""));
    assert_eq!(maslov(&["analyze", "--config", cfg.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn analyze_double_root_on_boundary_exits_2() {
    // Both components vanish at x = 1 on the bottom edge.
    let dir = TempDir::new().unwrap();
    let body = format!(
        r#"{{"length": 2.0, "diffusion": [1.0, 1.0], "scan_interior": false,
            "potential": {{"type": "constant", "matrix": [[{}, 0.0], [0.0, {}]]}}}}"#,
        4.0 * PI * PI,
        PI * PI
    );
    let cfg = write(dir.path(), "double.json", &body);
    let out = maslov(&["analyze", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let e = stderr_error(&out);
    assert_eq!(e["kind"], "left_ma_space");
    assert_eq!(e["side"], "bottom");
    assert!((e["x"].as_f64().unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn analyze_lambda_max_override() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "diag.json", &DIAG.replace("}}", "}, \"scan_interior\": false}"));
    let r = json(&maslov(&["analyze", "--quiet", "--config", cfg.to_str().unwrap(), "--lambda-max", "5"]));
    assert_eq!(r["lambda_infinity"], 5.0);
    // The eigenvalue 9 - pi^2/4 lies above the lowered top edge.
    assert_eq!(r["eigenvalues"].as_array().unwrap().len(), 0);
    assert!(r["warnings"]
        .as_array()
        .unwrap()
        .iter()
        .any(|w| w.as_str().unwrap().contains("below the eigenvalue bound")));
}

#[test]
fn turing_single_value() {
    let r = json(&maslov(&["turing", "--quiet", "--d", "15.5"]));
    let row = &r["rows"][0];
    assert_eq!(row["diagnostics"]["regime"], "above");
    assert!((r["d_star"].as_f64().unwrap() - 14.93).abs() < 5e-3);
    assert!((row["diagnostics"]["lambda_c"].as_f64().unwrap() - 0.014669).abs() < 1e-6);
    assert!(row["m_closed_form"].is_null());
}

#[test]
fn turing_sweep_flips_once_at_threshold() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("sweep.csv");
    let r = json(&maslov(&[
        "turing",
        "--quiet",
        "--d-sweep",
        "5:20:0.5",
        "--length",
        "10",
        "--csv",
        csv.to_str().unwrap(),
    ]));
    assert_eq!(r["rows"].as_array().unwrap().len(), 31);
    let changes = r["regime_changes"].as_array().unwrap();
    assert_eq!(changes.len(), 1);
    let ds = r["d_star"].as_f64().unwrap();
    assert!(changes[0]["d_from"].as_f64().unwrap() < ds && ds < changes[0]["d_to"].as_f64().unwrap());
    let m: Vec<i64> = r["rows"].as_array().unwrap().iter().map(|row| row["m_closed_form"].as_i64().unwrap()).collect();
    assert_eq!(m[..19], [0; 19]);
    assert_eq!(m[21], 2);
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 32);
    assert!(text.lines().nth(22).unwrap().starts_with("1.5500000000000000e1,1.0000000000000000e1,above,"));
}

#[test]
fn turing_box_check_agrees_with_closed_form() {
    let r = json(&maslov(&["turing", "--quiet", "--d", "15.5", "--length-sweep", "5:10:5", "--box"]));
    for row in r["rows"].as_array().unwrap() {
        assert_eq!(row["m_box"], row["m_closed_form"], "{row}");
    }
    assert_eq!(r["rows"][1]["m_box"], 2);
}

#[test]
fn turing_rejects_unstable_kinetics() {
    let out = maslov(&["turing", "--a11", "1", "--a22", "4", "--d", "15.5"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_error(&out)["kind"], "not_turing");
}

fn arc_csv(dir: &Path, name: &str, s: f64, a: f64, b: f64) -> PathBuf {
    let mut body = String::from("t,x,y\n");
    for k in 0..=64 {
        let t = a + (b - a) * k as f64 / 64.0;
        body.push_str(&format!("{t},{},{}\n", (t / 2.0).cos(), s * (t / 2.0).sin()));
    }
    write(dir, name, &body)
}

fn wind_of(path: &Path) -> i64 {
    json(&maslov(&["wind", "--quiet", path.to_str().unwrap()]))["wind"].as_i64().unwrap()
}

#[test]
fn wind_of_reference_arcs() {
    let dir = TempDir::new().unwrap();
    let h = FRAC_PI_2;
    let arcs = [(-1.0, h, PI), (-1.0, PI, 3.0 * h), (1.0, h, PI), (1.0, PI, 3.0 * h)];
    let got: Vec<i64> = arcs
        .iter()
        .enumerate()
        .map(|(k, &(s, a, b))| wind_of(&arc_csv(dir.path(), &format!("arc{k}.csv"), s, a, b)))
        .collect();
    assert_eq!(got, [1, 0, 0, -1]);
}

#[test]
fn wind_of_constant_path_and_index_one_loop() {
    let dir = TempDir::new().unwrap();
    let constant = write(dir.path(), "c.csv", "t,x,y\n0,0.3,1\n1,0.3,1\n2,0.3,1\n");
    assert_eq!(wind_of(&constant), 0);

    let forms = standard_forms(2, &[1.0, 1.0]).unwrap();
    let lp = index_one_loop(&forms.omega1, &forms.omega2, 400).unwrap();
    let mut body = String::from("t,x,y\n");
    for (t, f) in lp.params.iter().zip(&lp.frames) {
        body.push_str(&format!(
            "{t:.17e},{:.17e},{:.17e}\n",
            psi(&forms.omega1, f).unwrap(),
            psi(&forms.omega2, f).unwrap()
        ));
    }
    let lifted = dir.path().join("lifted.csv");
    let out = maslov(&[
        "wind",
        "--quiet",
        write(dir.path(), "loop.csv", &body).to_str().unwrap(),
        "--csv",
        lifted.to_str().unwrap(),
    ]);
    assert_eq!(json(&out)["wind"], 1);
    assert!(fs::read_to_string(lifted).unwrap().starts_with("t,x,y,theta\n"));
}

#[test]
fn wind_undersampled_exits_4() {
    let dir = TempDir::new().unwrap();
    let p = write(dir.path(), "u.csv", "t,x,y\n0,1,0\n1,0.7,0.7\n");
    let out = maslov(&["wind", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(stderr_error(&out)["kind"], "undersampled");
}

#[test]
fn curves_emit_csv() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "diag.json", DIAG);
    let eig = maslov(&[
        "curves",
        "--quiet",
        "--config",
        cfg.to_str().unwrap(),
        "--kind",
        "eigencurve",
        "--samples",
        "4",
        "--n-max",
        "2",
    ]);
    assert!(eig.status.success());
    let text = String::from_utf8(eig.stdout).unwrap();
    assert!(text.starts_with("kind,x,lambda,value\n"));
    // Branch 9 - (pi/x)^2 at x = L.
    let row = text.lines().find(|l| l.starts_with("eigencurve_k1_b1,2.0000000000000000e0,")).unwrap();
    let lam: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
    assert!((lam - (9.0 - PI * PI / 4.0)).abs() < 1e-12);

    let out = dir.path().join("detx.csv");
    let det = maslov(&[
        "curves",
        "--quiet",
        "--config",
        cfg.to_str().unwrap(),
        "--kind",
        "detx",
        "--samples",
        "5",
        "--lambdas",
        "0:1:0.5",
        "--csv",
        out.to_str().unwrap(),
    ]);
    assert!(det.status.success());
    assert_eq!(fs::read_to_string(out).unwrap().lines().count(), 16);
}
