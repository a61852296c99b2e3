//! Per-cell median and interquartile summaries of estimate/truth ratios.

use std::io::Read;

use anyhow::{bail, Result};
use serde::Serialize;

/// Columns that identify a group, in output order, when present.
const KEY_COLUMNS: [&str; 7] = ["cell", "model", "family", "N", "q", "B", "size"];

/// `(name, estimate column, truth column)`.
const RATIOS: [(&str, &str, &str); 15] = [
    ("N", "N_hat", "true_N"),
    ("q", "q_hat", "q"),
    ("Ks", "Ks_hat", "true_Ks"),
    ("Kw", "Kw_hat", "true_Kw"),
    ("Kss", "Kss_hat", "true_Kss"),
    ("Ksw", "Ksw_hat", "true_Ksw"),
    ("Kww", "Kww_hat", "true_Kww"),
    ("cc", "cc_hat", "true_cc"),
    ("cc_crude", "cc_crude", "true_cc"),
    ("Y", "Y_hat", "Y"),
    ("jk_N", "N_mean", "true_N"),
    ("jk_Ks", "Ks_mean", "true_Ks"),
    ("jk_Kw", "Kw_mean", "true_Kw"),
    ("jk_Kss", "Kss_mean", "true_Kss"),
    ("jk_Kww", "Kww_mean", "true_Kww"),
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

/// Linear-interpolation quantile of sorted data (`(n - 1) p` rank).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let rank = p * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (rank - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quartiles(values: &[f64]) -> Option<Quartiles> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(Quartiles { q1: quantile(&v, 0.25), median: quantile(&v, 0.5), q3: quantile(&v, 0.75) })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupSummary {
    pub key: Vec<(String, String)>,
    pub rows: usize,
    pub failures: usize,
    pub ratios: Vec<(String, Option<Quartiles>)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub key_columns: Vec<String>,
    pub ratio_names: Vec<String>,
    pub groups: Vec<GroupSummary>,
}

/// Groups a trial CSV by its key columns (first-appearance order) and
/// summarizes every estimate/truth ratio whose columns are present.
pub fn aggregate<R: Read>(input: R) -> Result<Report> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let keys: Vec<(String, usize)> =
        KEY_COLUMNS.iter().filter_map(|&k| col(k).map(|i| (k.to_string(), i))).collect();
    if keys.is_empty() {
        bail!("input has none of the grouping columns {KEY_COLUMNS:?}");
    }
    let ratios: Vec<(String, usize, usize)> = RATIOS
        .iter()
        .filter_map(|&(name, est, truth)| Some((name.to_string(), col(est)?, col(truth)?)))
        .collect();
    let error_col = col("error");

    struct Acc {
        key: Vec<String>,
        rows: usize,
        failures: usize,
        values: Vec<Vec<f64>>,
    }
    let mut groups: Vec<Acc> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let key: Vec<String> = keys.iter().map(|(_, i)| record[*i].to_string()).collect();
        let pos = match groups.iter().position(|g| g.key == key) {
            Some(p) => p,
            None => {
                groups.push(Acc { key, rows: 0, failures: 0, values: vec![Vec::new(); ratios.len()] });
                groups.len() - 1
            }
        };
        let acc = &mut groups[pos];
        acc.rows += 1;
        if error_col.is_some_and(|i| !record[i].is_empty()) {
            acc.failures += 1;
            continue;
        }
        for (slot, (_, est, truth)) in acc.values.iter_mut().zip(&ratios) {
            if let (Ok(e), Ok(t)) = (record[*est].parse::<f64>(), record[*truth].parse::<f64>()) {
                if t != 0.0 {
                    slot.push(e / t);
                }
            }
        }
    }

    Ok(Report {
        key_columns: keys.iter().map(|(k, _)| k.clone()).collect(),
        ratio_names: ratios.iter().map(|(n, _, _)| n.clone()).collect(),
        groups: groups
            .into_iter()
            .map(|acc| GroupSummary {
                key: keys.iter().map(|(k, _)| k.clone()).zip(acc.key).collect(),
                rows: acc.rows,
                failures: acc.failures,
                ratios: ratios.iter().map(|(n, _, _)| n.clone()).zip(acc.values.iter().map(|v| quartiles(v))).collect(),
            })
            .collect(),
    })
}

impl Report {
    pub fn header(&self) -> Vec<String> {
        let mut h = self.key_columns.clone();
        h.push("rows".into());
        h.push("failures".into());
        for name in &self.ratio_names {
            for stat in ["median", "q1", "q3"] {
                h.push(format!("{name}_{stat}"));
            }
        }
        h
    }

    pub fn rows(&self) -> Vec<Vec<String>> {
        self.groups
            .iter()
            .map(|g| {
                let mut r: Vec<String> = g.key.iter().map(|(_, v)| v.clone()).collect();
                r.push(g.rows.to_string());
                r.push(g.failures.to_string());
                for (_, q) in &g.ratios {
                    match q {
                        Some(q) => r.extend([q.median, q.q1, q.q3].iter().map(f64::to_string)),
                        None => r.extend(std::iter::repeat_n(String::new(), 3)),
                    }
                }
                r
            })
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let groups = self
            .groups
            .iter()
            .map(|g| {
                let mut obj = serde_json::Map::new();
                for (k, v) in &g.key {
                    obj.insert(k.clone(), serde_json::Value::String(v.clone()));
                }
                obj.insert("rows".into(), g.rows.into());
                obj.insert("failures".into(), g.failures.into());
                let ratios: serde_json::Map<String, serde_json::Value> = g
                    .ratios
                    .iter()
                    .map(|(n, q)| (n.clone(), serde_json::to_value(q).expect("plain numbers")))
                    .collect();
                obj.insert("ratios".into(), ratios.into());
                serde_json::Value::Object(obj)
            })
            .collect();
        serde_json::Value::Array(groups)
    }
}
