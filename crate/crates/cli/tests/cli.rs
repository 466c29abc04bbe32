use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use parafis::analysis::model;

fn parafis(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parafis")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Six well separated classes on a line, 40 rows each.
fn toy_dataset(dir: &Path) -> PathBuf {
    let mut text = String::new();
    for i in 0..240 {
        let class = i % 6;
        let wobble = ((i * 7) % 11) as f64 / 11.0;
        text.push_str(&format!("{},{},c{class}\n", class as f64 * 3.0 + wobble, wobble * 2.0 - class as f64));
    }
    let path = dir.join("toy.csv");
    std::fs::write(&path, text).unwrap();
    path
}

fn toy_config(dir: &Path, data: &str, repeats: usize) -> PathBuf {
    let path = dir.join("exp.toml");
    std::fs::write(
        &path,
        format!(
            "seed = 3\nrepeats = {repeats}\noutput = \"out\"\n[dataset]\npath = \"{data}\"\n\
             [protocol]\nt1 = 60\nt2 = 100\nt3 = 140\nn1 = 2\nn2 = 2\nn3 = 2\n\
             [[models]]\nname = \"Para1\"\n\
             [[models]]\nname = \"G\"\ncreation_rule = \"gefs_star\"\ninit_method = \"i2\"\n\
             [[models]]\nname = \"R\"\ninit_method = \"i3\"\nreplay_from = \"Para1\"\n"
        ),
    )
    .unwrap();
    path
}

#[test]
fn run_emits_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    toy_dataset(tmp.path());
    let cfg = toy_config(tmp.path(), "toy.csv", 2);
    let o = parafis(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = tmp.path().join("out");
    for f in ["summary.csv", "fits.csv", "accuracy.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    for m in ["Para1", "G", "R"] {
        for f in ["repeat_0.csv", "repeat_1.csv", "repeat_0.trace", "repeat_1.trace", "mean.csv", "plot.csv"] {
            assert!(out.join(m).join(f).is_file(), "{m}/{f}");
        }
    }
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with("config,mean_S_plus_smin,mean_tau,mean_acc\n"));
    assert_eq!(summary.lines().count(), 4);
    let fits = std::fs::read_to_string(out.join("fits.csv")).unwrap();
    assert!(fits.starts_with("config,phase,S_plus_smin,tau,residual\n"));
    assert_eq!(fits.lines().count(), 1 + 3 * 3);

    // replayed traces line up with their source run
    let para = std::fs::read_to_string(out.join("Para1/repeat_0.trace")).unwrap();
    let replayed = std::fs::read_to_string(out.join("R/repeat_0.trace")).unwrap();
    let kinds = |t: &str| t.lines().map(|l| l.split(',').next().unwrap().to_string()).collect::<Vec<_>>();
    assert_eq!(kinds(&para), kinds(&replayed));

    // every output is consumable by fit
    let o = parafis(&["fit", out.join("Para1/mean.csv").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = parafis(&["fit", out.join("G/repeat_1.csv").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = parafis(&["fit", out.join("G/plot.csv").to_str().unwrap(), "--boundaries", "60,100,140"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn flags_override_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    toy_dataset(tmp.path());
    let cfg = toy_config(tmp.path(), "toy.csv", 2);
    let other = tmp.path().join("elsewhere");
    let o = parafis(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        other.to_str().unwrap(),
        "--repeats",
        "1",
        "--seed",
        "99",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(other.join("Para1/repeat_0.csv").is_file());
    assert!(!other.join("Para1/repeat_1.csv").exists());
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn missing_dataset_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = toy_config(tmp.path(), "nowhere/missing.csv", 1);
    let o = parafis(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing.csv"), "{}", stderr(&o));
}

#[test]
fn invalid_config_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    toy_dataset(tmp.path());
    let cfg = toy_config(tmp.path(), "toy.csv", 1);
    let text = std::fs::read_to_string(&cfg).unwrap().replace("seed = 3\n", "").replace("name = \"G\"", "name = \"G\"\nalpha2 = 2.0");
    std::fs::write(&cfg, text).unwrap();
    let o = parafis(&["run", "--config", cfg.to_str().unwrap(), "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("models[1]"), "{}", stderr(&o));

    let o = parafis(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = parafis(&["run"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seed_is_required() {
    let tmp = tempfile::tempdir().unwrap();
    toy_dataset(tmp.path());
    let cfg = toy_config(tmp.path(), "toy.csv", 1);
    let text = std::fs::read_to_string(&cfg).unwrap().replace("seed = 3\n", "");
    std::fs::write(&cfg, text).unwrap();
    let o = parafis(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed"));
}

#[test]
fn replay_reproduces_its_recording_run() {
    let tmp = tempfile::tempdir().unwrap();
    toy_dataset(tmp.path());
    let cfg = toy_config(tmp.path(), "toy.csv", 2);
    assert!(parafis(&["run", "--config", cfg.to_str().unwrap()]).status.success());
    let traces = tmp.path().join("out/Para1");
    let o = parafis(&["replay", "--config", cfg.to_str().unwrap(), "--trace", traces.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for r in 0..2 {
        let a = std::fs::read(traces.join(format!("repeat_{r}.csv"))).unwrap();
        let b = std::fs::read(tmp.path().join(format!("out/replay/Para1/repeat_{r}.csv"))).unwrap();
        assert_eq!(a, b, "repeat {r}");
    }

    // a single file needs a single repeat
    let one = traces.join("repeat_0.trace");
    let o = parafis(&["replay", "--config", cfg.to_str().unwrap(), "--trace", one.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = parafis(&["replay", "--config", cfg.to_str().unwrap(), "--trace", one.to_str().unwrap(), "--repeats", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn broken_traces_fail() {
    let tmp = tempfile::tempdir().unwrap();
    toy_dataset(tmp.path());
    let cfg = toy_config(tmp.path(), "toy.csv", 1);
    let trace = tmp.path().join("t.trace");

    std::fs::write(&trace, "0,0,NewClass\n1,1,NewClass\n20,0").unwrap();
    let o = parafis(&["replay", "--config", cfg.to_str().unwrap(), "--trace", trace.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    std::fs::write(&trace, "0,0,NewClass\n5000,0,DriftSplit\n").unwrap();
    let o = parafis(&["replay", "--config", cfg.to_str().unwrap(), "--trace", trace.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("beyond the stream"), "{}", stderr(&o));

    let o = parafis(&["replay", "--config", cfg.to_str().unwrap(), "--trace", "/no/such/trace"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fit_recovers_a_synthetic_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let params = [(0.2, 0.75, 300.0), (0.1, 0.6, 45.0), (0.3, 0.5, 800.0)];
    let mut text = String::from("step,smoothed_score\n");
    let mut step = 0;
    for (s, s_min, tau) in params {
        for t in 0..2000 {
            text.push_str(&format!("{step},{}\n", model(s, s_min, tau, t as f64)));
            step += 1;
        }
    }
    let csv = tmp.path().join("curve.csv");
    std::fs::write(&csv, text).unwrap();
    let o = parafis(&["fit", csv.to_str().unwrap(), "--boundaries", "2000,4000,6000"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let fits = std::fs::read_to_string(tmp.path().join("curve_fits.csv")).unwrap();
    let rows: Vec<Vec<f64>> = fits
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(2).map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    for (row, (s, s_min, tau)) in rows.iter().zip(params) {
        assert!((row[0] - (s + s_min)).abs() / (s + s_min) < 1e-4, "{row:?}");
        assert!((row[1] - tau).abs() / tau < 1e-4, "{row:?}");
    }
    assert!(String::from_utf8_lossy(&o.stdout).contains("phase"));
}

#[test]
fn fit_rejects_bad_input() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("bad.csv");
    std::fs::write(&csv, "step,smoothed\n0,0.5\n1,abc\n").unwrap();
    let o = parafis(&["fit", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    // a phase shorter than ten points cannot be fitted
    std::fs::write(&csv, "step,smoothed\n0,0.5\n1,0.6\n2,0.7\n").unwrap();
    let o = parafis(&["fit", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    let o = parafis(&["fit", tmp.path().join("absent.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
