use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_tcvdp");

fn tcvdp(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("TCVDP_WORKERS")
        .output()
        .expect("binary runs")
}

const SMALL: [&str; 8] = [
    "--set",
    "ensemble.n_traj=100",
    "--set",
    "ensemble.t_final=200",
    "--set",
    "sweep.n_list=[2,3]",
    "--set",
    "sweep.t_eval=200",
];

fn args<'a>(head: &[&'a str], out: &'a str) -> Vec<&'a str> {
    let mut v = head.to_vec();
    v.extend(["--out", out]);
    v.extend(SMALL);
    v
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn dry_run_writes_nothing() {
    let root = tempfile::tempdir().unwrap();
    let out = root.path().join("run");
    let o = tcvdp(&args(&["langevin-decay", "--dry-run"], out.to_str().unwrap()));
    assert!(o.status.success());
    let plan: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(plan["cells"].as_array().unwrap().len(), 2);
    assert_eq!(std::fs::read_dir(root.path()).unwrap().count(), 0);
}

#[test]
fn decay_run_writes_schema_and_manifest() {
    let root = tempfile::tempdir().unwrap();
    let out = root.path().join("run");
    let o = tcvdp(&args(&["langevin-decay"], out.to_str().unwrap()));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for n in [2, 3] {
        let op = read(&out.join(format!("N{n}/order_parameter.csv")));
        assert!(op.starts_with("t,re_r,im_r,abs_r\n"));
        assert!(read(&out.join(format!("N{n}/phase_fluctuation.csv"))).starts_with("t,delta2_theta,stderr\n"));
    }
    assert!(read(&out.join("gamma_fits.csv")).starts_with("N,gamma,gamma_over_kappa1,r_squared\n"));
    let m: serde_json::Value = serde_json::from_str(&read(&out.join("manifest.json"))).unwrap();
    assert_eq!(m["kind"], "langevin-decay");
    assert_eq!(m["config"]["ensemble"]["n_traj"], 100);
    assert_eq!(m["seed"], 0x5eedc7a1u64);
}

#[test]
fn existing_output_needs_force() {
    let root = tempfile::tempdir().unwrap();
    let out = root.path().join("run");
    std::fs::create_dir(&out).unwrap();
    std::fs::write(out.join("keep.txt"), "x").unwrap();
    let o = tcvdp(&args(&["spectrum"], out.to_str().unwrap()));
    assert_eq!(o.status.code(), Some(2));
    assert!(out.join("keep.txt").exists());

    let o = tcvdp(&args(&["spectrum", "--force"], out.to_str().unwrap()));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.join("keep.txt").exists());
    assert!(out.join("N3/spectrum.csv").exists());
}

#[test]
fn configuration_errors_exit_with_code_two() {
    let root = tempfile::tempdir().unwrap();
    let out = root.path().join("run");
    let out = out.to_str().unwrap();
    for bad in ["nope.key=1", "oscillator.kappa2=-1", "ensemble.dt=0"] {
        let o = tcvdp(&["spectrum", "--out", out, "--set", bad]);
        assert_eq!(o.status.code(), Some(2), "{bad}");
    }
    let o = tcvdp(&["langevin-decay", "--out", out, "--set", "ensemble.n_traj=10"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!Path::new(out).exists());
}

#[test]
fn manifest_reruns_reproduce_files_bitwise() {
    let root = tempfile::tempdir().unwrap();
    let first = root.path().join("a");
    let second = root.path().join("b");
    let o = tcvdp(&args(&["spectrum", "--workers", "1"], first.to_str().unwrap()));
    assert!(o.status.success());
    let manifest = first.join("manifest.json");
    let o = tcvdp(&[
        "spectrum",
        "--config",
        manifest.to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
        "--workers",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["N2/order_parameter.csv", "N3/spectrum.csv"] {
        assert_eq!(read(&first.join(f)), read(&second.join(f)), "{f}");
    }
}

#[test]
fn sync_sweep_skips_a_single_oscillator() {
    let root = tempfile::tempdir().unwrap();
    let out = root.path().join("run");
    let mut a = args(&["sync-sweep"], out.to_str().unwrap());
    a.extend(["--set", "sweep.n_list=[1,2,3]"]);
    let o = tcvdp(&a);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = read(&out.join("sync.csv"));
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "N,t,s_c");
    assert_eq!(rows.len(), 3);
    let m: serde_json::Value = serde_json::from_str(&read(&out.join("manifest.json"))).unwrap();
    assert_eq!(m["warnings"].as_array().unwrap().len(), 1);
}

#[test]
fn histograms_and_snapshots() {
    let root = tempfile::tempdir().unwrap();
    let out = root.path().join("run");
    let mut a = args(&["histograms", "--snapshot-times", "100,200"], out.to_str().unwrap());
    a.extend(["--set", "sweep.hist_bins=16"]);
    let o = tcvdp(&a);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let h = read(&out.join("N2/hist_error_mode.csv"));
    assert_eq!(h.lines().count(), 1 + 16 * 16);
    let s = read(&out.join("N3/snapshots.csv"));
    assert!(s.starts_with("traj,t,n,re_a,im_a\n"));
    assert_eq!(s.lines().count(), 1 + 2 * 100 * 3);
}

#[test]
fn liouville_dry_run_reports_sizes_and_budget() {
    let o = tcvdp(&[
        "liouville-spectrum",
        "--dry-run",
        "--set",
        "oscillator.kappa2=0.2",
        "--set",
        "fock.memory_budget_mb=1",
    ]);
    assert!(o.status.success());
    let plan: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let cells = plan["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 3);
    assert_eq!(cells[0]["sizing"]["cutoff"], 11);
    assert_eq!(cells[0]["fits_budget"], true);
    assert_eq!(cells[2]["fits_budget"], false);
}

#[test]
fn liouville_budget_lists_every_offending_size() {
    let root = tempfile::tempdir().unwrap();
    let out = root.path().join("run");
    let o = tcvdp(&[
        "liouville-spectrum",
        "--out",
        out.to_str().unwrap(),
        "--set",
        "oscillator.kappa2=0.2",
        "--set",
        "fock.memory_budget_mb=1",
        "--set",
        "fock.cutoff=20",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("N = 2") && err.contains("N = 3"), "{err}");
    assert!(!out.exists());
}

#[test]
fn liouville_single_oscillator() {
    let root = tempfile::tempdir().unwrap();
    let out = root.path().join("run");
    let o = tcvdp(&[
        "liouville-spectrum",
        "--out",
        out.to_str().unwrap(),
        "--set",
        "oscillator.kappa2=0.2",
        "--set",
        "fock.n_list=[1]",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["cells"][0]["zero_eigenvalues"], 1);
    assert!(read(&out.join("N1/eigenvalues.csv")).starts_with("index,re_lambda,im_lambda,residual\n"));
    assert!(read(&out.join("N1/steady_state.csv")).starts_with("row,col,re,im\n"));
}
