//! Datasets, group splits, the toy hiring generator and CSV ingestion.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Model, ModelSpec};
use crate::rng::child;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub rows: Vec<Vec<f64>>,
    pub target: Vec<u8>,
    pub feature_names: Vec<String>,
    pub sensitive_index: usize,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, target: Vec<u8>, feature_names: Vec<String>, sensitive_index: usize) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Data("dataset has no rows".into()));
        }
        let d = feature_names.len();
        if sensitive_index >= d {
            return Err(Error::Index {
                index: sensitive_index,
                len: d,
            });
        }
        if target.len() != rows.len() {
            return Err(Error::Dimension {
                expected: rows.len(),
                got: target.len(),
            });
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Data(format!("row {r} has {} values, expected {d}", row.len())));
            }
            if let Some(c) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::Data(format!("row {r}, column {}: non-finite value", feature_names[c])));
            }
            let s = row[sensitive_index];
            if s != 0.0 && s != 1.0 {
                return Err(Error::Data(format!(
                    "row {r}: sensitive column {} must be 0 or 1, got {s}",
                    feature_names[sensitive_index]
                )));
            }
        }
        if let Some(r) = target.iter().position(|&y| y > 1) {
            return Err(Error::Data(format!("row {r}: target must be 0 or 1")));
        }
        Ok(Self {
            rows,
            target,
            feature_names,
            sensitive_index,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn d(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn select(&self, ids: &[usize]) -> Vec<Vec<f64>> {
        ids.iter().map(|&i| self.rows[i].clone()).collect()
    }

    /// Appends independent standard-normal columns `noise_{k}`.
    pub fn with_noise_columns(&self, extra: usize, seed: u64) -> Dataset {
        let mut rng = child(seed, 0xA11CE);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut out = self.clone();
        let base = self.d();
        for row in &mut out.rows {
            row.extend((0..extra).map(|_| normal.sample(&mut rng)));
        }
        out.feature_names
            .extend((0..extra).map(|k| format!("noise_{}", base + k)));
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, target_name: &str) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = self.feature_names.clone();
        header.push(target_name.to_string());
        w.write_record(&header)?;
        for (row, y) in self.rows.iter().zip(&self.target) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(y.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSplit {
    pub d0: Vec<usize>,
    pub d1: Vec<usize>,
}

impl GroupSplit {
    pub fn sizes(&self) -> (usize, usize) {
        (self.d0.len(), self.d1.len())
    }
}

pub fn split_by_sensitive(ds: &Dataset) -> Result<GroupSplit> {
    let s = ds.sensitive_index;
    let mut split = GroupSplit {
        d0: Vec::new(),
        d1: Vec::new(),
    };
    for (i, row) in ds.rows.iter().enumerate() {
        match row[s] {
            v if v == 0.0 => split.d0.push(i),
            v if v == 1.0 => split.d1.push(i),
            v => {
                return Err(Error::Data(format!(
                    "row {i}: sensitive value {v} is not binary"
                )))
            }
        }
    }
    Ok(split)
}

/// `mean f(D0) − mean f(D1)`.
pub fn demographic_parity<M: Model + ?Sized>(f: &M, split: &GroupSplit, ds: &Dataset) -> Result<f64> {
    if split.d0.is_empty() || split.d1.is_empty() {
        return Err(Error::arg("demographic parity needs both groups to be non-empty"));
    }
    let mean = |ids: &[usize]| ids.iter().map(|&i| f.predict(&ds.rows[i])).sum::<f64>() / ids.len() as f64;
    Ok(mean(&split.d0) - mean(&split.d1))
}

pub const TOY_FEATURES: [&str; 5] = ["S", "H", "M", "N1", "N2"];
pub const TOY_TARGET: &str = "Y";
const TOY_BLOCK: usize = 1024;

/// Toy hiring data: `S ~ Bernoulli(0.5)` (1 = man), height with mean 177
/// (men) or 163 (women) and standard deviation 7, muscle mass
/// `0.186h + 5ε` (men) or `0.128h + 4ε` (women), two independent standard
/// normal noise columns, and `Y ~ Bernoulli(P(H, M))` with
/// `P = [1 + exp(100·1(H < 160) − 0.3(M − 28))]⁻¹`.
///
/// Rows are generated in blocks of 1024 with per-block seeds.
pub fn generate_toy(n: usize, seed: u64) -> Result<Dataset> {
    if n < 1 {
        return Err(Error::arg("toy dataset needs at least one row"));
    }
    let rule = crate::model::ThresholdToy::new(1, 2);
    let blocks: Vec<(Vec<Vec<f64>>, Vec<u8>)> = (0..n.div_ceil(TOY_BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut rng = child(seed, b as u64);
            let rows_here = TOY_BLOCK.min(n - b * TOY_BLOCK);
            let coin = Bernoulli::new(0.5).unwrap();
            let std_normal = Normal::new(0.0, 1.0).unwrap();
            let mut rows = Vec::with_capacity(rows_here);
            let mut ys = Vec::with_capacity(rows_here);
            for _ in 0..rows_here {
                let man = coin.sample(&mut rng);
                let height = if man { 177.0 } else { 163.0 } + 7.0 * std_normal.sample(&mut rng);
                let eps: f64 = std_normal.sample(&mut rng);
                let mass = if man {
                    0.186 * height + 5.0 * eps
                } else {
                    0.128 * height + 4.0 * eps
                };
                let n1 = std_normal.sample(&mut rng);
                let n2 = std_normal.sample(&mut rng);
                let p = rule.probability(height, mass);
                let y = rng.gen::<f64>() < p;
                rows.push(vec![f64::from(u8::from(man)), height, mass, n1, n2]);
                ys.push(u8::from(y));
            }
            (rows, ys)
        })
        .collect();
    let mut rows = Vec::with_capacity(n);
    let mut target = Vec::with_capacity(n);
    for (r, y) in blocks {
        rows.extend(r);
        target.extend(y);
    }
    Dataset::new(rows, target, TOY_FEATURES.iter().map(|s| s.to_string()).collect(), 0)
}

/// Logistic regression by Newton's method on standardized columns, with a
/// small ridge term for stability. Returned weights are on the raw scale.
pub fn fit_logistic(rows: &[Vec<f64>], target: &[u8], columns: &[usize], d: usize) -> Result<ModelSpec> {
    if rows.is_empty() || rows.len() != target.len() {
        return Err(Error::arg("logistic fit needs matching, non-empty rows and targets"));
    }
    let n = rows.len() as f64;
    let p = columns.len();
    let mut mean = vec![0.0; p];
    let mut sd = vec![0.0; p];
    for (c, &col) in columns.iter().enumerate() {
        if col >= d {
            return Err(Error::Index { index: col, len: d });
        }
        mean[c] = rows.iter().map(|r| r[col]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[col] - mean[c]).powi(2)).sum::<f64>() / n;
        sd[c] = if var > 0.0 { var.sqrt() } else { 1.0 };
    }
    let design: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let mut v = Vec::with_capacity(p + 1);
            v.push(1.0);
            v.extend(columns.iter().enumerate().map(|(c, &col)| (r[col] - mean[c]) / sd[c]));
            v
        })
        .collect();
    let k = p + 1;
    let mut beta = vec![0.0; k];
    let ridge = 1e-6;
    for _ in 0..100 {
        let mut grad = vec![0.0; k];
        let mut hess = vec![vec![0.0; k]; k];
        for (x, &y) in design.iter().zip(target) {
            let t: f64 = x.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let prob = 1.0 / (1.0 + (-t).exp());
            let w = (prob * (1.0 - prob)).max(1e-12);
            let resid = f64::from(y) - prob;
            for a in 0..k {
                grad[a] += x[a] * resid;
                for b in 0..=a {
                    hess[a][b] += w * x[a] * x[b];
                }
            }
        }
        for a in 0..k {
            grad[a] -= ridge * beta[a];
            hess[a][a] += ridge;
            for b in 0..a {
                hess[b][a] = hess[a][b];
            }
        }
        let step = solve_spd(hess, grad)?;
        let size = step.iter().map(|s| s.abs()).fold(0.0, f64::max);
        for (b, s) in beta.iter_mut().zip(&step) {
            *b += s;
        }
        if size < 1e-10 {
            break;
        }
    }
    let mut weights = vec![0.0; d];
    let mut bias = beta[0];
    for (c, &col) in columns.iter().enumerate() {
        weights[col] = beta[c + 1] / sd[c];
        bias -= beta[c + 1] * mean[c] / sd[c];
    }
    Ok(ModelSpec::Logistic { weights, bias })
}

/// Cholesky solve of `A x = b` for symmetric positive definite `A`.
fn solve_spd(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for j in 0..n {
        let mut diag = a[j][j];
        for k in 0..j {
            diag -= a[j][k] * a[j][k];
        }
        if !(diag > 0.0) {
            return Err(Error::Invariant("Hessian is not positive definite".into()));
        }
        let diag = diag.sqrt();
        a[j][j] = diag;
        for i in j + 1..n {
            let mut v = a[i][j];
            for k in 0..j {
                v -= a[i][k] * a[j][k];
            }
            a[i][j] = v / diag;
        }
    }
    for i in 0..n {
        for k in 0..i {
            b[i] -= a[i][k] * b[k];
        }
        b[i] /= a[i][i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            b[i] -= a[k][i] * b[k];
        }
        b[i] /= a[i][i];
    }
    Ok(b)
}

/// The logistic model used for toy attacks, fitted on every toy column.
pub fn fit_toy_model(ds: &Dataset) -> Result<ModelSpec> {
    let columns: Vec<usize> = (0..ds.d()).collect();
    fit_logistic(&ds.rows, &ds.target, &columns, ds.d())
}

/// Sidecar describing how a CSV maps onto a [`Dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub sensitive: String,
    #[serde(default)]
    pub categorical: Vec<String>,
    pub target: String,
}

impl Schema {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| {
            Error::parse(
                format!("{} line {} column {}", path.display(), e.line(), e.column()),
                e.to_string(),
            )
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}

/// Reads a CSV with a header row. Categorical columns are one-hot encoded
/// into `name=value` columns, categories in lexicographic order, placed
/// where the original column was.
pub fn load_dataset_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let ctx = |line: usize, field: &str| format!("{} line {line}, field {field}", path.display());
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse(format!("{} header", path.display()), format!("missing column `{name}`")))
    };
    let target_col = find(&schema.target)?;
    find(&schema.sensitive)?;
    for c in &schema.categorical {
        find(c)?;
        if c == &schema.sensitive {
            return Err(Error::parse("schema", "the sensitive column cannot be categorical"));
        }
    }

    let mut records = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::parse(
                ctx(k + 2, "*"),
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        records.push(rec.iter().map(|s| s.trim().to_string()).collect::<Vec<_>>());
    }
    if records.is_empty() {
        return Err(Error::Data(format!("{} has no data rows", path.display())));
    }

    // column plan: numeric columns map to one output, categorical ones to
    // one output per observed level
    enum Plan {
        Numeric(usize),
        OneHot(usize, Vec<String>),
    }
    let mut plans = Vec::new();
    let mut names = Vec::new();
    for (c, h) in header.iter().enumerate() {
        if c == target_col {
            continue;
        }
        if schema.categorical.contains(h) {
            let levels: BTreeSet<&str> = records.iter().map(|r| r[c].as_str()).collect();
            let levels: Vec<String> = levels.into_iter().map(str::to_string).collect();
            names.extend(levels.iter().map(|l| format!("{h}={l}")));
            plans.push(Plan::OneHot(c, levels));
        } else {
            names.push(h.clone());
            plans.push(Plan::Numeric(c));
        }
    }
    let sensitive_index = names
        .iter()
        .position(|n| n == &schema.sensitive)
        .expect("sensitive column is numeric and present");

    let mut rows = Vec::with_capacity(records.len());
    let mut target = Vec::with_capacity(records.len());
    for (k, rec) in records.iter().enumerate() {
        let line = k + 2;
        let mut row = Vec::with_capacity(names.len());
        for plan in &plans {
            match plan {
                Plan::Numeric(c) => {
                    let v: f64 = rec[*c]
                        .parse()
                        .map_err(|_| Error::parse(ctx(line, &header[*c]), format!("`{}` is not a number", rec[*c])))?;
                    if !v.is_finite() {
                        return Err(Error::parse(ctx(line, &header[*c]), "non-finite value"));
                    }
                    row.push(v);
                }
                Plan::OneHot(c, levels) => {
                    row.extend(levels.iter().map(|l| if *l == rec[*c] { 1.0 } else { 0.0 }));
                }
            }
        }
        let s = row[sensitive_index];
        if s != 0.0 && s != 1.0 {
            return Err(Error::parse(
                ctx(line, &schema.sensitive),
                format!("sensitive value {s} is not 0 or 1"),
            ));
        }
        let y = match rec[target_col].as_str() {
            "0" | "0.0" => 0,
            "1" | "1.0" => 1,
            other => {
                return Err(Error::parse(
                    ctx(line, &schema.target),
                    format!("target `{other}` is not 0 or 1"),
                ))
            }
        };
        rows.push(row);
        target.push(y);
    }
    Dataset::new(rows, target, names, sensitive_index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FnModel;

    #[test]
    fn toy_is_deterministic() {
        let a = generate_toy(300, 9).unwrap();
        let b = generate_toy(300, 9).unwrap();
        assert_eq!(a, b);
        let c = generate_toy(300, 10).unwrap();
        assert_ne!(a.rows, c.rows);
        assert!(generate_toy(0, 1).is_err());
    }

    #[test]
    fn split_examples() {
        let rows = vec![vec![0.0, 1.0], vec![1.0, 2.0], vec![0.0, 3.0], vec![1.0, 4.0]];
        let ds = Dataset::new(rows, vec![0, 1, 0, 1], vec!["s".into(), "a".into()], 0).unwrap();
        let split = split_by_sensitive(&ds).unwrap();
        assert_eq!(split.sizes(), (2, 2));
        assert_eq!(split.d0, vec![0, 2]);

        let all0 = Dataset::new(vec![vec![0.0], vec![0.0]], vec![0, 0], vec!["s".into()], 0).unwrap();
        let split = split_by_sensitive(&all0).unwrap();
        assert!(split.d1.is_empty());
        let f = FnModel::new(|_: &[f64]| 0.5);
        assert!(demographic_parity(&f, &split, &all0).is_err());
    }

    #[test]
    fn non_binary_sensitive_rejected() {
        let err = Dataset::new(vec![vec![0.5]], vec![0], vec!["s".into()], 0).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn parity_examples() {
        let rows = vec![vec![0.0, 1.0], vec![1.0, 2.0], vec![0.0, 3.0], vec![1.0, 4.0]];
        let ds = Dataset::new(rows, vec![0, 1, 0, 1], vec!["s".into(), "a".into()], 0).unwrap();
        let split = split_by_sensitive(&ds).unwrap();
        let c = FnModel::new(|_: &[f64]| 0.4);
        assert_eq!(demographic_parity(&c, &split, &ds).unwrap(), 0.0);
        let proj = FnModel::new(|v: &[f64]| v[0]);
        assert_eq!(demographic_parity(&proj, &split, &ds).unwrap(), -1.0);
    }

    #[test]
    fn logistic_fit_recovers_direction() {
        let ds = generate_toy(2000, 3).unwrap();
        let spec = fit_toy_model(&ds).unwrap();
        let ModelSpec::Logistic { weights, .. } = &spec else {
            panic!("expected logistic")
        };
        // muscle mass drives hiring
        assert!(weights[2] > 0.1, "{weights:?}");
        let preds: Vec<f64> = ds.rows.iter().map(|r| spec.predict(r)).collect();
        let acc = preds
            .iter()
            .zip(&ds.target)
            .filter(|(p, y)| (**p > 0.5) == (**y == 1))
            .count() as f64
            / ds.len() as f64;
        assert!(acc > 0.75, "accuracy {acc}");
    }

    #[test]
    fn csv_two_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        fs::write(&p, "age,sex,job,y\n30,1,a,1\n41,0,b,0\n").unwrap();
        let schema = Schema {
            sensitive: "sex".into(),
            categorical: vec!["job".into()],
            target: "y".into(),
        };
        let ds = load_dataset_csv(&p, &schema).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.feature_names, vec!["age", "sex", "job=a", "job=b"]);
        assert_eq!(ds.rows[1], vec![41.0, 0.0, 0.0, 1.0]);
        assert_eq!(ds.sensitive_index, 1);
        assert_eq!(ds.target, vec![1, 0]);
    }

    #[test]
    fn csv_errors_carry_context() {
        let dir = tempfile::tempdir().unwrap();
        let schema = Schema {
            sensitive: "sex".into(),
            categorical: vec![],
            target: "y".into(),
        };
        let p = dir.path().join("a.csv");
        fs::write(&p, "age,y\n30,1\n").unwrap();
        let err = load_dataset_csv(&p, &schema).unwrap_err().to_string();
        assert!(err.contains("missing column `sex`"), "{err}");

        fs::write(&p, "age,sex,y\n30,1,1\n31,2,0\n").unwrap();
        let err = load_dataset_csv(&p, &schema).unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("sex"), "{err}");

        fs::write(&p, "age,sex,y\nabc,1,1\n").unwrap();
        let err = load_dataset_csv(&p, &schema).unwrap_err().to_string();
        assert!(err.contains("line 2, field age"), "{err}");
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = generate_toy(50, 1).unwrap();
        let p = dir.path().join("toy.csv");
        ds.write_csv(&p, TOY_TARGET).unwrap();
        let schema = Schema {
            sensitive: "S".into(),
            categorical: vec![],
            target: TOY_TARGET.into(),
        };
        let back = load_dataset_csv(&p, &schema).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn noise_columns_extend_width() {
        let ds = generate_toy(10, 1).unwrap();
        let wide = ds.with_noise_columns(16, 2);
        assert_eq!(wide.d(), 21);
        assert_eq!(wide.rows[3][..5], ds.rows[3][..]);
        assert_eq!(wide.feature_names[20], "noise_20");
    }
}
