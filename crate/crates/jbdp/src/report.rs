//! Result rows and their CSV, JSON-lines and plot-data encodings.

use std::io::Write;

use serde_json::{json, Map, Value};

use crate::error::Result;

/// Column order of the CSV table. Changing it breaks downstream consumers.
pub const CSV_COLUMNS: &[&str] = &[
    "scenario",
    "x",
    "trial",
    "seed",
    "tau",
    "n",
    "t",
    "m",
    "xi",
    "init",
    "converged",
    "stop",
    "iterations",
    "objective",
    "omega_uniq",
    "omega_robu",
    "delta",
    "ratio",
    "eps_berr",
    "cond_a",
    "eps_ub",
    "error",
    "g",
    "r_tilde",
    "delta_a",
    "kappa_q",
    "condition_holds",
    "instance_sha256",
];

pub const PLOT_COLUMNS: &[&str] = &["x", "error", "eps_ub", "eps_berr"];

/// One experiment row: a single trial, or the median over the trials of a grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub scenario: String,
    pub x: f64,
    /// Trial index, or `None` for an aggregated row.
    pub trial: Option<usize>,
    pub seed: Option<u64>,
    pub tau: String,
    pub n: usize,
    pub t: usize,
    pub m: usize,
    pub xi: f64,
    pub init: String,
    pub converged: bool,
    pub stop: String,
    pub iterations: usize,
    pub objective: f64,
    pub omega_uniq: f64,
    pub omega_robu: f64,
    pub delta: f64,
    pub ratio: f64,
    pub eps_berr: f64,
    pub cond_a: f64,
    pub eps_ub: Option<f64>,
    pub error: f64,
    pub g: f64,
    pub r_tilde: f64,
    pub delta_a: f64,
    pub kappa_q: f64,
    pub condition_holds: bool,
    pub instance_sha256: String,
}

pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:e}")
    }
}

/// JSON number, or a string for values JSON cannot represent.
pub fn json_f64(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::String(fmt_f64(x))
    }
}

impl Row {
    pub fn csv_record(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        vec![
            self.scenario.clone(),
            fmt_f64(self.x),
            self.trial
                .map(|t| t.to_string())
                .unwrap_or_else(|| "median".into()),
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
            self.tau.clone(),
            self.n.to_string(),
            self.t.to_string(),
            self.m.to_string(),
            fmt_f64(self.xi),
            self.init.clone(),
            self.converged.to_string(),
            self.stop.clone(),
            self.iterations.to_string(),
            fmt_f64(self.objective),
            fmt_f64(self.omega_uniq),
            fmt_f64(self.omega_robu),
            fmt_f64(self.delta),
            fmt_f64(self.ratio),
            fmt_f64(self.eps_berr),
            fmt_f64(self.cond_a),
            opt(self.eps_ub),
            fmt_f64(self.error),
            fmt_f64(self.g),
            fmt_f64(self.r_tilde),
            fmt_f64(self.delta_a),
            fmt_f64(self.kappa_q),
            self.condition_holds.to_string(),
            self.instance_sha256.clone(),
        ]
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("scenario".into(), json!(self.scenario));
        m.insert("x".into(), json_f64(self.x));
        m.insert(
            "trial".into(),
            self.trial.map_or(json!("median"), |t| json!(t)),
        );
        m.insert("seed".into(), json!(self.seed));
        m.insert("tau".into(), json!(self.tau));
        m.insert("n".into(), json!(self.n));
        m.insert("t".into(), json!(self.t));
        m.insert("m".into(), json!(self.m));
        m.insert("xi".into(), json_f64(self.xi));
        m.insert("init".into(), json!(self.init));
        m.insert("converged".into(), json!(self.converged));
        m.insert("stop".into(), json!(self.stop));
        m.insert("iterations".into(), json!(self.iterations));
        for (k, v) in [
            ("objective", self.objective),
            ("omega_uniq", self.omega_uniq),
            ("omega_robu", self.omega_robu),
            ("delta", self.delta),
            ("ratio", self.ratio),
            ("eps_berr", self.eps_berr),
            ("cond_a", self.cond_a),
        ] {
            m.insert(k.into(), json_f64(v));
        }
        m.insert("eps_ub".into(), self.eps_ub.map_or(Value::Null, json_f64));
        for (k, v) in [
            ("error", self.error),
            ("g", self.g),
            ("r_tilde", self.r_tilde),
            ("delta_a", self.delta_a),
            ("kappa_q", self.kappa_q),
        ] {
            m.insert(k.into(), json_f64(v));
        }
        m.insert("condition_holds".into(), json!(self.condition_holds));
        m.insert("instance_sha256".into(), json!(self.instance_sha256));
        Value::Object(m)
    }
}

pub fn write_csv<W: Write>(out: W, rows: &[Row]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.write_record(r.csv_record())?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_jsonl<W: Write>(mut out: W, rows: &[Row]) -> Result<()> {
    for r in rows {
        serde_json::to_writer(&mut out, &r.to_json())?;
        out.write_all(b"\n").map_err(serde_json::Error::io)?;
    }
    out.flush().map_err(serde_json::Error::io)?;
    Ok(())
}

/// `x, error, eps_ub, eps_berr`; for the condition-number scenario `x` is `cond_a`.
pub fn write_plot<W: Write>(out: W, rows: &[Row]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PLOT_COLUMNS)?;
    for r in rows {
        w.write_record([
            fmt_f64(r.x),
            fmt_f64(r.error),
            r.eps_ub.map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.eps_berr),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Entrywise median over `rows` (all from one grid point). `eps_ub` is
/// reported only when the condition held in every trial.
pub fn median_row(rows: &[Row]) -> Option<Row> {
    let first = rows.first()?;
    let med = |f: fn(&Row) -> f64| median(rows.iter().map(f).collect());
    let all_hold = rows.iter().all(|r| r.condition_holds);
    let same_tau = rows.iter().all(|r| r.tau == first.tau);
    Some(Row {
        scenario: first.scenario.clone(),
        x: med(|r| r.x),
        trial: None,
        seed: None,
        tau: if same_tau {
            first.tau.clone()
        } else {
            "mixed".into()
        },
        n: med(|r| r.n as f64) as usize,
        t: med(|r| r.t as f64) as usize,
        m: first.m,
        xi: first.xi,
        init: first.init.clone(),
        converged: rows.iter().all(|r| r.converged),
        stop: if rows.iter().all(|r| r.stop == first.stop) {
            first.stop.clone()
        } else {
            "mixed".into()
        },
        iterations: med(|r| r.iterations as f64) as usize,
        objective: med(|r| r.objective),
        omega_uniq: med(|r| r.omega_uniq),
        omega_robu: med(|r| r.omega_robu),
        delta: med(|r| r.delta),
        ratio: med(|r| r.ratio),
        eps_berr: med(|r| r.eps_berr),
        cond_a: med(|r| r.cond_a),
        eps_ub: if all_hold {
            Some(median(rows.iter().filter_map(|r| r.eps_ub).collect()))
        } else {
            None
        },
        error: med(|r| r.error),
        g: med(|r| r.g),
        r_tilde: med(|r| r.r_tilde),
        delta_a: med(|r| r.delta_a),
        kappa_q: med(|r| r.kappa_q),
        condition_holds: all_hold,
        instance_sha256: String::new(),
    })
}
