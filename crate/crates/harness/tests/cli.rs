use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_adaug"));
    c.env_remove("AA_OUT_DIR");
    c
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn run(c: &mut Command) -> Output {
    c.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn lines(p: &Path) -> Vec<String> {
    std::fs::read_to_string(p)
        .unwrap()
        .lines()
        .map(String::from)
        .collect()
}

#[test]
fn gamma_table_writes_five_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(bin().args(["gamma-table", "--out"]).arg(dir.path()));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = lines(&dir.path().join("gamma_table.csv"));
    assert_eq!(rows[0], "t_s,gamma");
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[5], "0,0");
}

#[test]
fn sweep_writes_summary_and_episodes_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = |sub: &str| {
        let o = run(bin()
            .args(["sweep", "--jobs", "2", "--config"])
            .arg(config("pendubot_robustness.toml"))
            .arg("--out")
            .arg(dir.path().join(sub)));
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(dir.path().join(sub).join("summary.csv")).unwrap()
    };
    let first = sweep("a");
    assert_eq!(first, sweep("b"));
    let episodes = dir.path().join("a/episodes");
    let traj = lines(&episodes.join("g0000_baseline+l1.csv"));
    assert!(traj[0].starts_with("t,x0,x1,x2,x3,u_rl0,u_l10,u0,sighat0"));
    assert_eq!(traj.len(), 10_001);
    assert!(episodes.join("g0000_baseline.csv").exists());
}

#[test]
fn no_l1_and_variant_flags_select_variants() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(bin()
        .args(["sweep", "--no-l1", "--config"])
        .arg(config("pendubot_robustness.toml"))
        .arg("--out")
        .arg(dir.path()));
    // the un-augmented run does not diverge numerically, it only falls over
    assert_eq!(code(&o), 0);
    assert_eq!(lines(&dir.path().join("summary.csv")).len(), 2);
    let o = run(bin()
        .args(["simulate", "--variant", "baseline+l1", "--config"])
        .arg(config("pendubot_robustness.toml"))
        .arg("--out")
        .arg(dir.path().join("sim")));
    assert_eq!(code(&o), 0);
    let files: Vec<_> = std::fs::read_dir(dir.path().join("sim")).unwrap().collect();
    assert_eq!(files.len(), 1);
}

#[test]
fn out_dir_defaults_to_env() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(bin().arg("gamma-table").env("AA_OUT_DIR", dir.path()));
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("gamma_table.csv").exists());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "plant = \"pendubot\"\nepisodez = 3\n").unwrap();
    let o = run(bin()
        .args(["sweep", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(dir.path()));
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("episodez"));
    let o = run(bin().args(["sweep", "--out"]).arg(dir.path()));
    assert_eq!(code(&o), 2);
    let o = run(bin()
        .args(["simulate", "--variant", "pid", "--config"])
        .arg(config("cartpole.toml")));
    assert_eq!(code(&o), 2);
}

#[test]
fn diverging_episode_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("coarse.toml");
    // a 0.5 s explicit step is far outside the stable range of the closed loop
    std::fs::write(
        &cfg,
        "plant = \"pendubot\"\nx0_offset = [0.3, -0.3, 0.0, 0.0]\n\n[l1]\nenabled = false\nt_s = 0.5\n\n\
         [sim]\nt_ctrl = 0.5\ndt_int = 0.5\nduration = 200.0\nclamp_inputs = false\n",
    )
    .unwrap();
    let o = run(bin()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path()));
    assert_eq!(code(&o), 1);
    let summary = lines(&dir.path().join("summary.csv"));
    let header: Vec<&str> = summary[0].split(',').collect();
    let row: Vec<&str> = summary[1].split(',').collect();
    let col = header.iter().position(|h| *h == "failure_time").unwrap();
    assert!(!row[col].is_empty());
}

#[test]
fn acc_and_plot_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(bin()
        .args(["acc", "--variant", "adaptive", "--config"])
        .arg(config("acc.toml"))
        .arg("--out")
        .arg(dir.path()));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = dir.path().join("acc_adaptive.csv");
    assert!(lines(&csv)[0].ends_with("reward,h,V,psi_h_active,qp_status"));
    let svg = dir.path().join("plots/sigma.svg");
    let o = run(bin()
        .arg("plot")
        .arg(&csv)
        .args(["--y", "sighat1,sigtrue1", "--title", "estimate", "--out"])
        .arg(&svg));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("<polyline").count(), 2);
    assert!(text.contains("sigtrue1"));

    let bad = dir.path().join("ragged.csv");
    std::fs::write(&bad, "t,x\n0,1\n1,2,3\n").unwrap();
    let o = run(bin()
        .arg("plot")
        .arg(&bad)
        .arg("--out")
        .arg(dir.path().join("r.svg")));
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("ragged.csv:3"));
}
