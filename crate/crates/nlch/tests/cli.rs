use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nlch::config::RunConfig;
use nlch::io::{read_diagnostics, FieldSet};

fn nlch(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlch"))
        .args(args)
        .env("NLCH_OUTPUT_ROOT", root)
        .output()
        .expect("spawn nlch")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn zero_steps_write_exactly_the_initial_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "z.conf", "mesh.level = 2\nrun.n_steps = 0\nrun.output = z\n");
    let out = nlch(dir.path(), &["run", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = read_diagnostics(&dir.path().join("z/diagnostics.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].step, 0);
    assert_eq!(rows[0].t, 0.0);
    for f in ["mesh.txt", "config.echo", "admissibility.csv", "checkpoint.txt", "run.log"] {
        assert!(dir.path().join("z").join(f).exists(), "{f}");
    }
}

#[test]
fn same_seed_is_byte_identical_and_seed_flag_matters() {
    let dir = tempfile::tempdir().unwrap();
    let text = "mesh.level = 2\nrun.n_steps = 5\nrun.output = a\n";
    let a = write_config(dir.path(), "a.conf", text);
    let b = write_config(dir.path(), "b.conf", &text.replace("= a", "= b"));
    let c = write_config(dir.path(), "c.conf", &text.replace("= a", "= c"));
    assert!(nlch(dir.path(), &["run", a.to_str().unwrap()]).status.success());
    assert!(nlch(dir.path(), &["run", b.to_str().unwrap()]).status.success());
    assert!(nlch(dir.path(), &["run", c.to_str().unwrap(), "--seed", "7"]).status.success());
    let read = |d: &str| fs::read(dir.path().join(d).join("diagnostics.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}

#[test]
fn resume_continues_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let full = write_config(dir.path(), "full.conf", "mesh.level = 2\nrun.n_steps = 8\nrun.output = full\n");
    let part = write_config(dir.path(), "part.conf", "mesh.level = 2\nrun.n_steps = 3\nrun.output = part\n");
    let rest = write_config(dir.path(), "rest.conf", "mesh.level = 2\nrun.n_steps = 8\nrun.output = part\n");
    assert!(nlch(dir.path(), &["run", full.to_str().unwrap()]).status.success());
    assert!(nlch(dir.path(), &["run", part.to_str().unwrap()]).status.success());
    let ck = dir.path().join("part/checkpoint.txt");
    let out = nlch(dir.path(), &["run", rest.to_str().unwrap(), "--resume", ck.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(
        fs::read(dir.path().join("full/diagnostics.csv")).unwrap(),
        fs::read(dir.path().join("part/diagnostics.csv")).unwrap()
    );
    // the embedded config echoes differ in run.output only
    let a = nlch::io::Checkpoint::read(&dir.path().join("full/checkpoint.txt")).unwrap();
    let b = nlch::io::Checkpoint::read(&ck).unwrap();
    assert_eq!((a.step, a.state.t.to_bits()), (b.step, b.state.t.to_bits()));
    let bits = |s: &nlch_core::stepper::State| s.phi.iter().chain(&s.psi).map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.state), bits(&b.state));
}

#[test]
fn resume_rejects_a_different_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_config(dir.path(), "a.conf", "mesh.level = 2\nrun.n_steps = 2\nrun.output = a\n");
    let b = write_config(dir.path(), "b.conf", "mesh.level = 2\nrun.n_steps = 4\nrun.output = b\nmodel.L = 2\n");
    assert!(nlch(dir.path(), &["run", a.to_str().unwrap()]).status.success());
    let ck = dir.path().join("a/checkpoint.txt");
    let out = nlch(dir.path(), &["run", b.to_str().unwrap(), "--resume", ck.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("different configuration"));
}

#[test]
fn oversized_well_weight_is_rejected_with_key_and_tag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.conf", "mesh.level = 3\npotential.f = 0.7\n");
    let out = nlch(dir.path(), &["check", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("potential.f") && err.contains("A3"), "{err}");
}

#[test]
fn unknown_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.conf", "mesh.levels = 3\n");
    let out = nlch(dir.path(), &["check", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("mesh.levels"));
}

#[test]
fn check_passes_on_the_demo_config() {
    let dir = tempfile::tempdir().unwrap();
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/demo.conf");
    let out = nlch(dir.path(), &["check", demo.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8_lossy(&out.stdout);
    for tag in ["A1,", "A2,", "A3,", "A4,", "A5,", "A7,", "A8,"] {
        assert!(text.contains(tag), "missing {tag}");
    }
    assert!(!text.contains(",false"));
}

#[test]
fn echo_reparses_to_an_equal_config() {
    let dir = tempfile::tempdir().unwrap();
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/demo.conf");
    let cfg = RunConfig::load(&demo).unwrap();
    let echo = write_config(dir.path(), "echo.conf", &cfg.echo());
    assert_eq!(RunConfig::load(&echo).unwrap(), cfg);
}

#[test]
fn field_files_feed_initial_data_and_counts_are_checked() {
    let dir = tempfile::tempdir().unwrap();
    // a level-2 mesh has 61 bulk nodes
    let mut good = FieldSet::default();
    good.push("phi", vec![0.25; 61]);
    fs::write(dir.path().join("phi.txt"), good.to_text()).unwrap();
    let cfg = write_config(
        dir.path(),
        "f.conf",
        "mesh.level = 2\nrun.n_steps = 0\nrun.output = f\ninit.phi = phi.txt\ninit.psi = constant\ninit.psi.mean = 0.5\n",
    );
    let out = nlch(dir.path(), &["run", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let ck = nlch::io::Checkpoint::read(&dir.path().join("f/checkpoint.txt")).unwrap();
    assert!(ck.state.phi.iter().all(|&v| v == 0.25));
    assert!(ck.state.psi.iter().all(|&v| v == 0.5));

    let mut short = FieldSet::default();
    short.push("phi", vec![0.25; 60]);
    fs::write(dir.path().join("phi.txt"), short.to_text()).unwrap();
    let out = nlch(dir.path(), &["run", cfg.to_str().unwrap()]);
    let err = stderr(&out);
    assert!(!out.status.success());
    assert!(err.contains("60") && err.contains("61"), "{err}");
}

#[test]
fn sweep_with_a_single_l_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.conf", "mesh.level = 2\nrun.n_steps = 2\n");
    let out = nlch(dir.path(), &["sweep", cfg.to_str().unwrap(), "--L", "1"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("at least 4"));
}

#[test]
fn small_sweep_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "s.conf",
        "mesh.level = 2\nrun.n_steps = 5\nrun.output = sw\ninit.phi.gradient = 0.3, 0\n",
    );
    let out = nlch(dir.path(), &["sweep", cfg.to_str().unwrap(), "--L", "1000,1,10,100", "--threads", "2"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let table = fs::read_to_string(dir.path().join("sw/sweep.csv")).unwrap();
    let ls: Vec<&str> = table.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ls, ["1e0", "1e1", "1e2", "1e3"]);
    let slopes = fs::read_to_string(dir.path().join("sw/sweep_slopes.csv")).unwrap();
    assert!(slopes.contains("empirical"));
    for member in ["dirichlet", "decoupled", "L_1e0", "L_1e3"] {
        assert!(dir.path().join("sw").join(member).join("diagnostics.csv").exists(), "{member}");
    }
}

#[test]
fn demo_run_dissipates_and_both_energy_forms_agree() {
    let dir = tempfile::tempdir().unwrap();
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/demo.conf");
    let out = nlch(dir.path(), &["run", demo.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = read_diagnostics(&dir.path().join("demo/diagnostics.csv")).unwrap();
    assert_eq!(rows.len(), 201);
    for w in rows.windows(2) {
        assert!(w[1].energy <= w[0].energy, "energy rose at step {}", w[1].step);
    }
    for r in &rows {
        let rel = (r.energy - r.energy_difference_form).abs() / r.energy.abs().max(1e-300);
        assert!(rel < 1e-12, "step {}: {rel:e}", r.step);
    }
    assert!(dir.path().join("demo/fields_000200.txt").exists());
}
