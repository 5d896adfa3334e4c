use std::fs;
use std::process::{Command, Output};

fn ldp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ldp")).args(args).output().expect("run ldp")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn regime_at_zero_central_charge() {
    let o = ldp(&["regime", "--gamma", "0.40824829"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[2], "STABLE");
    assert!(row[4].parse::<f64>().unwrap().abs() < 1e-6, "c = {}", row[4]);
}

#[test]
fn majority_spectrum_has_four_weights() {
    let o = ldp(&["spectrum", "--function", "maj3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows: Vec<(u32, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let (m, w) = l.split_once(',').unwrap();
            (m.parse().unwrap(), w.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 4);
    for (mask, w) in rows {
        assert!([1, 2, 4, 7].contains(&mask));
        assert!((w - 0.25).abs() < 1e-12);
    }
}

#[test]
fn gamma_out_of_range_is_one_line_error() {
    let o = ldp(&["mixing", "--gamma", "2.5"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    let mut lines = err.lines();
    assert!(lines.next().unwrap().contains("gamma out of [0,2)"), "{err}");
    assert!(lines.next().unwrap().starts_with("hint:"));
    assert!(o.stdout.is_empty());
}

#[test]
fn unknown_flag_and_bad_type_exit_one() {
    for args in [&["regime", "--gama", "1"][..], &["regime", "--gamma", "abc"][..]] {
        let o = ldp(args);
        assert_eq!(o.status.code(), Some(1));
        assert!(stderr(&o).starts_with("error[usage]"));
    }
}

#[test]
fn config_keys_are_checked_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"gamma": 0.3, "bogus": 1}"#).unwrap();
    let o = ldp(&["regime", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bogus"));

    fs::write(&cfg, r#"{"gamma": 0.3, "d": 0.75}"#).unwrap();
    let out = dir.path().join("r.csv");
    let o = ldp(&["regime", "--config", cfg.to_str().unwrap(), "--gamma", "1.0", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    assert!(fs::read_to_string(&out).unwrap().contains("INTERMEDIATE"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("r.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "regime");
    assert_eq!(manifest["config"]["gamma"], 1.0);
    assert_eq!(manifest["config"]["d"], 0.75);
}

#[test]
fn same_seed_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = ldp(&[
            "mixing", "--gamma", "0.5", "--eta", "0.0625", "--replicas", "20", "--tmax", "10", "--alpha4-exponent", "1.25",
            "--seed", "7", "--out", out.to_str().unwrap(),
        ]);
        assert!(matches!(o.status.code(), Some(0) | Some(2)), "{}", stderr(&o));
        fs::read(out).unwrap()
    };
    let a = run("a.csv");
    assert_eq!(a, run("b.csv"));
    assert!(String::from_utf8(a).unwrap().starts_with("gamma,eta,mode,t,est_cov,se,n\n"));
}

#[test]
fn out_of_band_exponent_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = ldp(&[
        "calibrate", "--eta", "0.015625", "--radii", "0.25,0.125", "--samples", "20", "--cache", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 3);
}

#[test]
fn simulate_writes_samples_and_events() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let events = dir.path().join("e.csv");
    let o = ldp(&[
        "simulate", "--gamma", "0.5", "--eta", "0.125", "--tmax", "2", "--alpha4-exponent", "1.25", "--out",
        out.to_str().unwrap(), "--events", events.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let samples = fs::read_to_string(&out).unwrap();
    assert_eq!(samples.lines().count(), 12);
    assert!(fs::read_to_string(&events).unwrap().starts_with("time,site,new_color"));
}

#[test]
fn field_and_gmc_tables() {
    let o = ldp(&["field", "--eta", "0.25", "--kernel", "exact_log"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("site_index,x,y,h,variance"));
    let n = text.lines().count() - 1;

    let o = ldp(&["gmc", "--gamma", "1", "--eta", "0.25", "--kernel", "exact_log"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count() - 1, n);
    assert!(stdout(&o).lines().skip(1).all(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap() > 0.0));
}
