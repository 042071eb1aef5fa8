use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use welander_cli::{config_from_header, ExperimentConfig};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_welander"));
    c.env_remove("WELANDER_OUT");
    c
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).arg("--out").arg(dir).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Data rows below the header and column line.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn zones_at_zero_epsilon_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["zones", "--epsilon", "0", "--eta", "-0.17"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("rho_minus = -0.17\n"), "{out}");
    assert!(out.contains("rho_plus = -0.17\n"), "{out}");
    assert!(out.contains("l_minus = 0.1\n"), "{out}");
    assert!(out.contains("l_plus = 1.0\n"), "{out}");
    let csv = fs::read_to_string(dir.path().join("zones.csv")).unwrap();
    assert!(csv.starts_with("# schema = welander/zones\n# schema_version = 1\n"));
    assert_eq!(rows(&csv), vec![vec!["0", "-0.17", "-0.17", "-0.17", "0.1", "1"]]);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["bogus"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["figure", "10"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["figure", "1"], dir.path()).status.code(), Some(2));
    let o = run(&["zones", "--epsilon", "-0.1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("epsilon"));
    let o = run(&["scan", "--mu-min", "0.3", "--mu-max", "0.1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("empty range"));
    let o = run(&["zones", "--rel-tol", "0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_errors_exit_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[model]\nmu = 0.1\n\n[scan]\nn_mu = 5\nspacing = 3\n").unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "zones"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("line 6"), "{err}");
    assert!(err.contains("spacing"), "{err}");

    let o = run(&["--config", dir.path().join("missing.toml").to_str().unwrap(), "zones"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_1() {
    // The P_S orbit never reaches L+.
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["orbit", "--mu", "0.32", "--eta", "-0.05", "--anchor", "L+"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("does not cross"), "{}", stderr(&o));
}

#[test]
fn flag_overrides_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[model]\nepsilon = 0.05\neta = -0.3\n").unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "zones", "--epsilon", "0"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("rho_minus = -0.3\n"));
    let echoed = config_from_header(&fs::read_to_string(dir.path().join("zones.csv")).unwrap()).unwrap();
    assert_eq!(echoed.model.epsilon, 0.0);
    assert_eq!(echoed.model.eta, -0.3);
}

#[test]
fn echoed_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[drift]\nwindows = [[1.5, 2.5]]\n\n[simulate]\nx0 = 0.8\ny0 = 0.6\n").unwrap();
    let o = run(
        &["--config", cfg.to_str().unwrap(), "simulate", "--t-end", "3", "--mu", "0.14", "--eta", "-0.3"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let echoed = config_from_header(&text).unwrap();
    assert_eq!(echoed.command, "simulate");
    assert_eq!(echoed.simulate.t_end, 3.0);
    assert_eq!(echoed.drift.windows, vec![[1.5, 2.5]]);

    // Feeding the echo back in reproduces the same resolved configuration
    // and the same file.
    let cfg2 = dir.path().join("echo.toml");
    fs::write(&cfg2, echoed.to_toml()).unwrap();
    let dir2 = tempfile::tempdir().unwrap();
    let o = run(&["--config", cfg2.to_str().unwrap(), "simulate"], dir2.path());
    assert!(o.status.success());
    let text2 = fs::read_to_string(dir2.path().join("trajectory.csv")).unwrap();
    assert_eq!(config_from_header(&text2).unwrap(), echoed);
    assert_eq!(text, text2);
    let first = &rows(&text)[0];
    assert_eq!(first[1], "0.8");
    assert_eq!(first[2], "0.6");
}

#[test]
fn empty_config_is_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.toml");
    fs::write(&cfg, "").unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "zones"], dir.path());
    assert!(o.status.success());
    let mut expected = ExperimentConfig::default();
    expected.command = "zones".into();
    let echoed = config_from_header(&fs::read_to_string(dir.path().join("zones.csv")).unwrap()).unwrap();
    assert_eq!(echoed, expected);
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["zones"])
        .env("WELANDER_OUT", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("zones.csv").exists());
}

#[test]
fn simulate_writes_events_at_zone_boundaries() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--mu", "0.14", "--eta", "-0.3", "--t-end", "30"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let traj = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(traj.contains("\nt,x,y,rho,kappa,zone\n"));
    let zones: std::collections::BTreeSet<String> = rows(&traj).into_iter().map(|r| r[5].clone()).collect();
    assert_eq!(zones.into_iter().collect::<Vec<_>>(), vec!["R1", "R2", "S"]);
    let events = fs::read_to_string(dir.path().join("events.csv")).unwrap();
    assert!(rows(&events).len() >= 4);
}

#[test]
fn orbit_reports_class() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["orbit", "--mu", "0.14", "--eta", "-0.3"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("class = W"));
    let text = fs::read_to_string(dir.path().join("orbit.csv")).unwrap();
    assert!(text.contains("\ntau,t,x,y,rho,kappa,zone\n"));
    let r = rows(&text);
    let tau_last: f64 = r.last().unwrap()[0].parse().unwrap();
    assert_eq!(tau_last, 1.0);

    let o = run(&["orbit", "--epsilon", "0", "--mu", "0.219"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("period = 3.2288"));
}

#[test]
fn equilibria_branch_has_two_hopf_markers() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["equilibria", "--eta", "-0.17"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let markers = fs::read_to_string(dir.path().join("branch_markers.csv")).unwrap();
    let hopf: Vec<f64> = rows(&markers)
        .into_iter()
        .filter(|r| r[0] == "hopf")
        .map(|r| r[1].parse().unwrap())
        .collect();
    assert_eq!(hopf.len(), 2);
    assert!(hopf[0] < 0.1616 && hopf[1] > 0.3092, "{hopf:?}");
}

#[test]
fn scan_at_intermediate_epsilon_shows_all_classes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "scan", "--epsilon", "0.041", "--mu-min", "0.04", "--mu-max", "0.145", "--eta-min", "-0.6", "--eta-max", "-0.38",
            "--n-mu", "22", "--n-eta", "23",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let scan = fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    let r = rows(&scan);
    assert_eq!(r.len(), 22 * 23);
    for tag in ["P_S", "P_1", "P_2", "W"] {
        assert!(r.iter().any(|row| row[2] == tag), "no {tag} node");
    }
    let b = fs::read_to_string(dir.path().join("boundaries.csv")).unwrap();
    assert!(b.contains("\ntag,polyline,mu,eta\n"));
    assert!(!rows(&b).is_empty());
}

#[test]
fn figure_output_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = run(&["figure", "5"], d.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for name in ["fig5_tplus_orbit.csv", "fig5_tminus_orbit.csv"] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
    let text = fs::read_to_string(a.path().join("fig5_tplus_orbit.csv")).unwrap();
    let mu: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("# orbit.mu = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((mu - 0.1616).abs() < 2e-3);
}

#[test]
fn quick_figures_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    for n in ["2", "3", "4", "7"] {
        let o = run(&["figure", n], dir.path());
        assert!(o.status.success(), "figure {n}: {}", stderr(&o));
    }
    for name in [
        "fig2_orbit.csv",
        "fig2_timeseries.csv",
        "fig2_sweep.csv",
        "fig3_exchange.csv",
        "fig3_zones.csv",
        "fig4_orbit.csv",
        "fig4_timeseries.csv",
        "fig7a_orbit.csv",
        "fig7b_orbit.csv",
        "fig7c_orbit.csv",
    ] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let z = fs::read_to_string(dir.path().join("fig3_zones.csv")).unwrap();
    let first = &rows(&z)[0];
    assert_eq!(first[0], "0");
    assert_eq!(first[1], first[2]);
}

#[test]
fn drift_figure_windows() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["figure", "8"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let w = fs::read_to_string(dir.path().join("fig8_windows.csv")).unwrap();
    let tags: Vec<String> = rows(&w).into_iter().map(|r| r[2].clone()).collect();
    assert_eq!(tags, vec!["P_2", "W", "P_1"]);
    let d = fs::read_to_string(dir.path().join("fig8_drift.csv")).unwrap();
    assert!(d.contains("\nt,x,y,rho,kappa,zone,mu\n"));
}
