use jbdp::experiment::{run_experiment, ExperimentSpec, InitMode, Scenario};
use jbdp::report::{self, median_row, Row};

fn golden(name: &str) -> String {
    std::fs::read_to_string(format!(
        "{}/tests/golden/{name}",
        env!("CARGO_MANIFEST_DIR")
    ))
    .unwrap()
}

fn sample_row(holds: bool) -> Row {
    Row {
        scenario: "single".into(),
        x: 0.0,
        trial: Some(0),
        seed: Some(1),
        tau: "3,3,3".into(),
        n: 9,
        t: 3,
        m: 16,
        xi: 1e-12,
        init: "warm".into(),
        converged: true,
        stop: "converged".into(),
        iterations: 3,
        objective: 1e-22,
        omega_uniq: 7.0,
        omega_robu: f64::INFINITY,
        delta: 1e-10,
        ratio: if holds { 0.1 } else { 3.0 },
        eps_berr: 1e-11,
        cond_a: 1e3,
        eps_ub: holds.then_some(1e-10),
        error: 1e-13,
        g: 2.0,
        r_tilde: 1e-11,
        delta_a: 3e-11,
        kappa_q: 1.0,
        condition_holds: holds,
        instance_sha256: "00".into(),
    }
}

#[test]
fn csv_columns_match_golden_file() {
    let mut out = Vec::new();
    report::write_csv(&mut out, &[]).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), golden("columns.csv"));
    let mut out = Vec::new();
    report::write_plot(&mut out, &[]).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), golden("plot_columns.csv"));
    assert_eq!(
        sample_row(true).csv_record().len(),
        report::CSV_COLUMNS.len()
    );
}

#[test]
fn bound_cell_is_empty_when_condition_fails() {
    let mut out = Vec::new();
    report::write_csv(&mut out, &[sample_row(true), sample_row(false)]).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let idx = report::CSV_COLUMNS
        .iter()
        .position(|&c| c == "eps_ub")
        .unwrap();
    let cells: Vec<String> = rd.records().map(|r| r.unwrap()[idx].to_string()).collect();
    assert_eq!(cells, vec!["1e-10".to_string(), String::new()]);
    let inf_idx = report::CSV_COLUMNS
        .iter()
        .position(|&c| c == "omega_robu")
        .unwrap();
    assert!(
        text.lines().nth(1).unwrap().split(',').any(|c| c == "inf"),
        "{inf_idx}"
    );
}

#[test]
fn jsonl_rows_are_valid_json() {
    let mut out = Vec::new();
    report::write_jsonl(&mut out, &[sample_row(true), sample_row(false)]).unwrap();
    let lines: Vec<serde_json::Value> = String::from_utf8(out)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["omega_robu"], "inf");
    assert_eq!(lines[0]["eps_ub"], 1e-10);
    assert!(lines[1]["eps_ub"].is_null());
}

#[test]
fn median_row_keeps_bound_only_when_all_hold() {
    let rows = vec![sample_row(true), sample_row(true), sample_row(false)];
    let med = median_row(&rows).unwrap();
    assert!(!med.condition_holds);
    assert_eq!(med.eps_ub, None);
    assert_eq!(med.trial, None);
    let med = median_row(&rows[..2]).unwrap();
    assert_eq!(med.eps_ub, Some(1e-10));
    assert!(median_row(&[]).is_none());
}

#[test]
fn experiment_rows_are_deterministic_and_ordered() {
    let mut spec = ExperimentSpec::new(Scenario::VaryM);
    spec.grid = vec![4.0, 8.0];
    spec.trials = 3;
    spec.seed = 11;
    spec.init = InitMode::Warm;
    spec.gamma_samples = 5;
    let a = run_experiment(&spec).unwrap();
    let b = run_experiment(&spec).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 6);
    assert_eq!(
        a.iter()
            .map(|r| (r.m, r.trial.unwrap()))
            .collect::<Vec<_>>(),
        vec![(4, 0), (4, 1), (4, 2), (8, 0), (8, 1), (8, 2)]
    );
    for r in &a {
        assert!(r.eps_ub.is_some() == r.condition_holds);
        assert!(r.eps_ub.is_none_or(|e| e >= 0.0));
    }
    spec.median = true;
    assert_eq!(run_experiment(&spec).unwrap().len(), 2);
}

#[test]
fn scenario_settings() {
    let mut spec = ExperimentSpec::new(Scenario::VaryT);
    spec.grid = vec![3.0, 5.0];
    spec.gamma_samples = 2;
    spec.init = InitMode::Warm;
    let rows = run_experiment(&spec).unwrap();
    assert_eq!(rows[0].t, 3);
    assert_eq!(rows[1].t, 5);
    for r in &rows {
        assert!(r
            .tau
            .split(',')
            .all(|s| (1..=5).contains(&s.parse::<usize>().unwrap())));
    }
    let mut spec = ExperimentSpec::new(Scenario::VaryN);
    spec.grid = vec![2.0];
    spec.tau = jbdp::parse_tau("1,2").unwrap();
    spec.gamma_samples = 0;
    spec.init = InitMode::Warm;
    let rows = run_experiment(&spec).unwrap();
    assert_eq!((rows[0].n, rows[0].tau.as_str()), (6, "1,2,1,2"));

    let mut spec = ExperimentSpec::new(Scenario::VaryCond);
    spec.trials = 2;
    spec.gamma_samples = 0;
    spec.init = InitMode::Warm;
    let rows = run_experiment(&spec).unwrap();
    assert!(rows.iter().all(|r| r.x == r.cond_a));

    let mut bad = ExperimentSpec::new(Scenario::VaryM);
    bad.grid = vec![2.5];
    assert!(run_experiment(&bad).is_err());
    bad.grid = vec![];
    assert!(run_experiment(&bad).is_err());
    let mut bad = ExperimentSpec::new(Scenario::Single);
    bad.trials = 0;
    assert!(run_experiment(&bad).is_err());
}
