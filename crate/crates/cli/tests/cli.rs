use schrostrip_cli::cli_main;
use std::path::Path;

fn small_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let path = dir.join("small.cfg");
    let text = format!(
        "[domain]\nstrip = \"infinite\"\n\n[mesh]\nj = 60\nk = 8\nm = 20\nt_end = 0.01\n\n\
         [barrier]\na = 1.5\nb = 1.6\nc = 0.7\nd = 2.1\nq = 800.0\n\n\
         [output]\ndir = \"{}\"\nformat = \"both\"\nsnapshots = [10, 20]\n{extra}",
        dir.join("out").display()
    );
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> i32 {
    let mut v = vec!["schrostrip"];
    v.extend_from_slice(args);
    cli_main(v)
}

#[test]
fn run_writes_snapshots_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    assert_eq!(run(&["run", "--config", cfg.to_str().unwrap()]), 0);
    let out = dir.path().join("out");
    for f in ["snapshot_000010.csv", "snapshot_000020.qstr", "trace.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let (psi, meta) = harness::export::read_raw(&out.join("snapshot_000020.qstr")).unwrap();
    assert_eq!((meta.j, meta.k, meta.m_total, meta.m), (60, 8, 20, 20));
    assert_eq!(psi.dim(), (61, 9));
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 22);
}

#[test]
fn overrides_change_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let target = dir.path().join("other");
    let set = format!("output.dir={}", target.display());
    assert_eq!(
        run(&["run", "-c", cfg.to_str().unwrap(), "--set", &set, "--set", "output.format=raw"]),
        0
    );
    assert!(target.join("snapshot_000020.qstr").exists());
    assert!(!target.join("snapshot_000020.csv").exists());
}

#[test]
fn input_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["run", "--config", dir.path().join("missing.cfg").to_str().unwrap()]), 2);
    let cfg = small_config(dir.path(), "colour = 3\n");
    assert_eq!(run(&["run", "--config", cfg.to_str().unwrap()]), 2);
    let cfg = small_config(dir.path(), "");
    assert_eq!(run(&["run", "-c", cfg.to_str().unwrap(), "--set", "mesh.k=1"]), 2);
    assert_eq!(run(&["converge", "-c", cfg.to_str().unwrap(), "--axis", "Q"]), 2);
    assert_eq!(run(&["frobnicate"]), 2);
    assert_eq!(run(&[]), 2);
}

#[test]
fn verify_passes_on_small_problem() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    assert_eq!(run(&["verify", "-c", cfg.to_str().unwrap()]), 0);
}

#[test]
fn kernels_and_convergence_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let k = dir.path().join("k.qkrn");
    assert_eq!(
        run(&["kernels", "-c", cfg.to_str().unwrap(), "--format", "raw", "--out", k.to_str().unwrap()]),
        0
    );
    let set = schrostrip::tbc::read_kernels_binary(&k).unwrap();
    assert_eq!((set.modes(), set.m_max), (7, 20));
    assert_eq!(run(&["converge", "-c", cfg.to_str().unwrap(), "--axis", "K", "--levels", "2"]), 0);
    let csv = std::fs::read_to_string(dir.path().join("out/convergence_K.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn shipped_configs_parse_and_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["default.cfg", "exampleA.cfg", "exampleB.cfg", "exampleC.cfg"] {
        let c = harness::SolverConfig::load(&root.join(name), &[]).unwrap();
        c.build().unwrap();
    }
}
