use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn cfrep(args: &[&str]) -> Output {
    cfrep_env(args, &[])
}

fn cfrep_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cfrep"));
    cmd.args(args);
    for var in ["CFREP_CONFIG", "CFREP_OUT", "CFREP_IN", "CFREP_JOBS", "CFREP_FORCE", "CFREP_FORMAT", "CFREP_N", "CFREP_SEED"] {
        cmd.env_remove(var);
    }
    cmd.envs(env.iter().copied());
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = r#"
format = 1
seeds = [1, 2]

[dataset]
kind = "synthetic"
n = 400

[backend]
kind = "scm"
builtin = "synthetic"

[[method]]
name = "uf"

[[method]]
name = "ours"
"#;

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("exp.cfg");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn synth_writes_data_and_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("data/synthetic.csv");
    let o = cfrep(&["synth", "--n", "50", "--seed", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let data = fs::read_to_string(&out).unwrap();
    assert_eq!(data.lines().count(), 51);
    let others: Vec<_> = fs::read_dir(out.parent().unwrap()).unwrap().collect();
    assert_eq!(others.len(), 2);
}

#[test]
fn run_report_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("run");
    let out_s = out.to_str().unwrap();

    let o = cfrep(&["run", "--config", &cfg, "--out", out_s]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("OURS"));
    for f in ["report.csv", "report.md", "config.resolved", "run.log", "density_uf.csv", "density_ours.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }

    let csv = cfrep(&["report", "--in", out_s, "--format", "csv"]);
    assert!(csv.status.success());
    assert_eq!(stdout(&csv), fs::read_to_string(out.join("report.csv")).unwrap());
    let table = cfrep(&["report", "--in", out.join("report.csv").to_str().unwrap()]);
    assert!(table.status.success());
    assert_eq!(stdout(&table), fs::read_to_string(out.join("report.md")).unwrap());

    let again = cfrep(&["run", "--config", &cfg, "--out", out_s]);
    assert_eq!(again.status.code(), Some(3));
    let forced = cfrep(&["run", "--config", &cfg, "--out", out_s, "--force", "--jobs", "2"]);
    assert!(forced.status.success(), "{}", stderr(&forced));

    let v = cfrep(&["verify", "--config", &cfg]);
    assert!(v.status.success(), "{}", stderr(&v));
    let lines: Vec<String> = stdout(&v).lines().map(str::to_string).collect();
    assert_eq!(lines.len(), 6);
    assert!(lines.iter().all(|l| l.starts_with("PASS ")));
}

#[test]
fn environment_variables_stand_in_for_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("env-run");
    let o = cfrep_env(&["run"], &[("CFREP_CONFIG", &cfg), ("CFREP_OUT", out.to_str().unwrap())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = cfrep_env(&["report"], &[("CFREP_IN", out.to_str().unwrap()), ("CFREP_FORMAT", "csv")]);
    assert!(r.status.success());
    assert!(stdout(&r).starts_with("method,"));
}

#[test]
fn config_errors_exit_2_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("\"ours\"", "\"magic\""));
    let out = dir.path().join("bad");
    let o = cfrep(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains("method[1].name"), "{err}");
    assert!(!out.exists());

    let missing = cfrep(&["verify", "--config", dir.path().join("nope.cfg").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));

    let usage = cfrep(&["run"]);
    assert_eq!(usage.status.code(), Some(2));

    let scm_backend = cfrep(&["train-backend", "--config", &write_config(dir.path(), SMALL), "--out", "x"]);
    assert_eq!(scm_backend.status.code(), Some(2));
    assert!(stderr(&scm_backend).contains("backend.kind"));
}

#[test]
fn runtime_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        r#"
format = 1
seeds = [1]

[dataset]
kind = "csv"
path = "{}"
schema = "{}"

[backend]
kind = "cvae"

[[method]]
name = "uf"
"#,
        dir.path().join("absent.csv").display(),
        root().join("schemas/law_school.toml").display()
    );
    let cfg = write_config(dir.path(), &text);
    let o = cfrep(&["run", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("error: "));
}

#[test]
fn train_backend_writes_both_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        r#"
format = 1
seeds = [4]

[dataset]
kind = "csv"
path = "{}"
schema = "{}"

[backend]
kind = "dcevae"
preset = "law_school"

[backend.train]
max_epochs = 2
hidden = [8]

[backend.train_no_label]
max_epochs = 2
hidden = [8]

[[method]]
name = "ours"
"#,
        root().join("fixtures/law_school.csv").display(),
        root().join("schemas/law_school.toml").display()
    );
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("ck");
    let o = cfrep(&["train-backend", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names, ["dcevae-noY.json", "dcevae.json"]);
    for n in names {
        assert!(fs::read_to_string(out.join(n)).unwrap().contains("cfrep-vae/1"));
    }
}
