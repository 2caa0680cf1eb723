use std::process::Command;

fn scclab(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_scclab")).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "scclab {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn params_of_poisson_are_unit() {
    let v: serde_json::Value = serde_json::from_str(&scclab(&["params", "--law", "poisson:1"])).unwrap();
    assert!((v["params"]["mu"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert!((v["params"]["sigma_plus"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert_eq!(v["critical"], true);
}

#[test]
fn sampled_graph_round_trips_through_explore() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.txt");
    let gs = g.to_str().unwrap();
    scclab(&["sample-graph", "--law", "table:1/1/1", "--n", "7", "--seed", "3", "--out", gs]);
    let text = std::fs::read_to_string(&g).unwrap();
    assert!(text.starts_with("7 7\n"));
    let trace = scclab(&["explore", "--graph", gs, "--seed", "1"]);
    let mut lines = trace.lines();
    assert_eq!(lines.next().unwrap(), "k,kind,vertex,outcome,s_minus,s_plus,height,length_height");
    assert!(lines.count() >= 7);
}

#[test]
fn staged_emits_component_records() {
    for mode in ["exact", "iidz"] {
        let out = scclab(&["staged", "--law", "poisson:1", "--n", "2000", "--mode", mode, "--seed", "5"]);
        for line in out.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            for key in ["l", "sigma", "tails", "heads", "scc_lengths", "kernel_codes"] {
                assert!(v.get(key).is_some(), "missing {key} in {line}");
            }
            assert_eq!(v["tails"].as_array().unwrap().len(), v["heads"].as_array().unwrap().len());
        }
    }
}

#[test]
fn continuum_pads_to_prefix() {
    let out = scclab(&["continuum", "--T", "2", "--dt", "1e-3", "--seed", "1", "--prefix", "3"]);
    let rows: Vec<serde_json::Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(rows.len() >= 3);
    let lengths: Vec<f64> = rows.iter().map(|r| r["length"].as_f64().unwrap()).collect();
    assert!(lengths.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn llt_check_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("llt.csv");
    scclab(&["llt-check", "--law", "poisson:1", "--n-list", "50,100", "--out", p.to_str().unwrap()]);
    let text = std::fs::read_to_string(&p).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "n,y,exact,predicted,rel_error");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert!(rows.iter().any(|r| r[0] == 50.0) && rows.iter().any(|r| r[0] == 100.0));
    let at_zero = rows.iter().find(|r| r[0] == 100.0 && r[1] == 0.0).unwrap();
    assert!(at_zero[4] < 0.05);
}

#[test]
fn measure_change_reports_exact_and_estimate() {
    let out = scclab(&[
        "measure-change",
        "--law",
        "table:0/1/0.25;1/0/0.25;1/2/0.25;2/1/0.25",
        "--n",
        "8",
        "--prefix",
        "1/0,2/1,1/2",
        "--mc-budget",
        "20000",
    ]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let exact = v["exact"].as_f64().unwrap();
    let est = v["estimate"]["value"].as_f64().unwrap();
    let se = v["estimate"]["mc_std_error"].as_f64().unwrap();
    assert!((exact - est).abs() <= 4.0 * se, "exact {exact}, estimate {est} ± {se}");
}

#[test]
fn experiment_writes_reports_and_compare_runs() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let jsonl = dir.path().join("out.jsonl");
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        format!(
            r#"n_list = [500, 1000]
runs_per_n = 4
seed = 9
horizon_rule = "10*n^(2/3)"

[law]
kind = "poisson_product"
lambda_minus = 1.0
lambda_plus = 1.0

[continuum]
horizon = 2.0
dt = 0.001
runs = 4

[outputs]
csv = "{}"
jsonl = "{}"
"#,
            csv.display(),
            jsonl.display()
        ),
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    let summary = scclab(&["experiment", "--config", c]);
    assert_eq!(summary.lines().count(), 2);
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("n,seed,rank,length,size,kernel_code"));
    assert_eq!(std::fs::read_to_string(&jsonl).unwrap().lines().count(), 8);

    let cmp = scclab(&["compare", "--config", c, "--er"]);
    for line in cmp.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let ks = v["ks_continuum"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&ks));
        assert!(v["ks_er"].as_f64().is_some());
    }
}

#[test]
fn bad_law_is_reported() {
    let out = Command::new(env!("CARGO_BIN_EXE_scclab"))
        .args(["params", "--law", "zipf:2"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown law kind"));
}
