use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spikelearn"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

#[test]
fn invalid_configs_exit_with_one() {
    assert_eq!(run(&["experiment", "no-such"]).status.code(), Some(1));
    assert_eq!(run(&["experiment", "derivative", "--theta", "-1"]).status.code(), Some(1));
    assert_eq!(run(&["experiment", "derivative", "--bogus-flag", "3"]).status.code(), Some(1));
    assert_eq!(run(&["experiment", "classify", "--rules", "STDP"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "experiment = \"multicat\"\nunknown_key = 1\n").unwrap();
    assert_eq!(run(&["experiment", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(run(&["gen", "--rate-hz", "-3"]).status.code(), Some(1));
}

#[test]
fn zero_converged_runs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "experiment",
        "efficiency",
        "--runs",
        "1",
        "--targets",
        "20",
        "--max-epochs",
        "1",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    // results are still written
    assert!(files(dir.path()).iter().any(|p| p.to_string_lossy().ends_with("-epochs.csv")));
}

#[test]
fn config_file_overrides_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        format!(
            "experiment = \"classify\"\nruns = 1\nn_synapses = 50\ntrain_epochs = 2\ntest_per_class = 2\n\
             jitter_levels = []\ndeletion_levels = []\nrules = [\"EML\"]\nout_dir = \"{}\"\n",
            out_dir.display()
        ),
    )
    .unwrap();
    let out = run(&["experiment", "--config", cfg.to_str().unwrap(), "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let written = files(&out_dir);
    let acc = written.iter().find(|p| p.to_string_lossy().ends_with("-accuracy.csv")).unwrap();
    assert_eq!(fs::read_to_string(acc).unwrap(), "noise,level,rule,runs,accuracy,pattern_accuracy\n");
    let manifest = written.iter().find(|p| p.to_string_lossy().ends_with("-manifest.json")).unwrap();
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(manifest).unwrap()).unwrap();
    assert_eq!(m["config"]["seed"], 7);
    assert_eq!(m["config"]["n_synapses"], 50);
    assert_eq!(m["master_seed"], 7);
    assert_eq!(m["runs"][0]["seed"], 7);
    let fields = m["config"].as_object().unwrap();
    let preset = spikelearn_harness::ExperimentConfig::preset(spikelearn_harness::Experiment::Classify);
    for key in serde_json::to_value(&preset).unwrap().as_object().unwrap().keys() {
        assert!(fields.contains_key(key), "manifest lacks {key}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let out = run(&[
            "experiment",
            "derivative",
            "--runs",
            "2",
            "--n-synapses",
            "60",
            "--k-max",
            "3",
            "--out-dir",
            d.path().to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    let (a, b) = (files(dirs[0].path()), files(dirs[1].path()));
    assert_eq!(a.len(), 3);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.file_name(), y.file_name());
        if x.extension().unwrap() == "csv" {
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
        }
    }
}

#[test]
fn gen_sim_sts_train_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let pat = dir.path().join("p.csv");
    let out = run(&["gen", "--n-synapses", "100", "--duration-ms", "300", "--rate-hz", "6", "--seed", "3", "--out", pat.to_str().unwrap()]);
    assert!(out.status.success());

    let sim = run(&["sim", "--pattern", pat.to_str().unwrap(), "--w-mean", "0.05", "--w-std", "0.02"]);
    assert!(sim.status.success());
    let ev: serde_json::Value = serde_json::from_slice(&sim.stdout).unwrap();
    let clock = run(&["sim", "--pattern", pat.to_str().unwrap(), "--w-mean", "0.05", "--w-std", "0.02", "--clock-dt", "0.01"]);
    let ck: serde_json::Value = serde_json::from_slice(&clock.stdout).unwrap();
    assert!(ev["n_out"].as_u64().unwrap() > 0);
    assert_eq!(ev["n_out"], ck["n_out"]);

    let sts = run(&["sts", "--pattern", pat.to_str().unwrap(), "--w-mean", "0.05", "--w-std", "0.02", "--k-max", "3"]);
    let text = String::from_utf8(sts.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k,theta_star,t_star,cosine_vs_fd");
    assert_eq!(lines.len(), 4);
    for l in &lines[1..] {
        let cos: f64 = l.rsplit(',').next().unwrap().parse().unwrap();
        assert!(cos > 0.999);
    }

    let train_dir = dir.path().join("train");
    let tr = run(&[
        "train",
        "--pattern",
        pat.to_str().unwrap(),
        "--targets",
        "4",
        "--lambda",
        "1e-3",
        "--out-dir",
        train_dir.to_str().unwrap(),
    ]);
    assert!(tr.status.success(), "{}", String::from_utf8_lossy(&tr.stderr));
    let w = fs::read_to_string(train_dir.join("train-weights.csv")).unwrap();
    let weights = dir.path().join("w.csv");
    fs::write(&weights, w).unwrap();
    let check = run(&["sim", "--pattern", pat.to_str().unwrap(), "--weights", weights.to_str().unwrap()]);
    let r: serde_json::Value = serde_json::from_slice(&check.stdout).unwrap();
    assert_eq!(r["n_out"], 4);
}
