//! Balanced multivariate longitudinal binary panels.
//!
//! Input is long format: one CSV row per (subject, time, response) cell with
//! the binary outcome and the covariates named in a [`ModelSpec`]. Baseline
//! covariates are read from `time = 1` rows, main-model and transition
//! covariates from `time >= 2` rows. Every design gets a leading intercept
//! column; covariates are otherwise used exactly as given. For binary
//! covariates a -1/+1 coding tends to converge more reliably than 0/1.

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const INTERCEPT: &str = "(Intercept)";

/// Binds CSV columns to the model designs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default = "default_subject")]
    pub subject: String,
    #[serde(default = "default_time")]
    pub time: String,
    #[serde(default = "default_response")]
    pub response: String,
    #[serde(default = "default_outcome")]
    pub outcome: String,
    /// Baseline marginal covariates (intercept implied).
    #[serde(default)]
    pub baseline: Vec<String>,
    /// Main-model marginal covariates (intercept implied).
    #[serde(default)]
    pub main: Vec<String>,
    /// Transition covariates interacting with the lagged response (intercept implied).
    #[serde(default)]
    pub transition: Vec<String>,
    #[serde(default = "default_order")]
    pub quadrature_order: usize,
}

fn default_subject() -> String {
    "subject".into()
}
fn default_time() -> String {
    "time".into()
}
fn default_response() -> String {
    "response".into()
}
fn default_outcome() -> String {
    "y".into()
}
fn default_order() -> usize {
    20
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            subject: default_subject(),
            time: default_time(),
            response: default_response(),
            outcome: default_outcome(),
            baseline: Vec::new(),
            main: Vec::new(),
            transition: Vec::new(),
            quadrature_order: default_order(),
        }
    }
}

impl ModelSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.check()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model spec serializes")
    }

    fn check(&self) -> Result<()> {
        if self.quadrature_order < 2 || self.quadrature_order > crate::kernels::MAX_QUADRATURE_ORDER {
            return Err(Error::Config(format!(
                "quadrature_order must lie in 2..=100, got {}",
                self.quadrature_order
            )));
        }
        let ids = [&self.subject, &self.time, &self.response, &self.outcome];
        for list in [&self.baseline, &self.main, &self.transition] {
            let mut seen = BTreeSet::new();
            for c in list {
                if ids.contains(&c) || c == INTERCEPT {
                    return Err(Error::Config(format!("{c:?} cannot be used as a covariate")));
                }
                if !seen.insert(c) {
                    return Err(Error::Config(format!("covariate {c:?} listed twice")));
                }
            }
        }
        Ok(())
    }
}

/// Named design values; `names[0]` is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl Design {
    pub fn width(&self) -> usize {
        self.names.len()
    }
}

/// A validated, fully balanced panel. Times are zero-based: `t = 0` is the
/// baseline occasion.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelData {
    subject_ids: Vec<String>,
    n_times: usize,
    n_responses: usize,
    y: Vec<u8>,
    baseline: Design,
    main: Design,
    transition: Design,
}

impl PanelData {
    /// Assembles a panel from flat arrays.
    ///
    /// Layouts: `y[(i·T + t)·k + j]`; baseline `[(i·k + j)·p₁ + c]`;
    /// main and transition `[((i·(T−1) + t−1)·k + j)·p + c]` for `t >= 1`.
    pub fn new(
        subject_ids: Vec<String>,
        n_times: usize,
        n_responses: usize,
        y: Vec<u8>,
        baseline: Design,
        main: Design,
        transition: Design,
    ) -> Result<Self> {
        let n = subject_ids.len();
        if n == 0 {
            return Err(Error::InvalidPanel("no subjects".into()));
        }
        if n_times < 2 {
            return Err(Error::InvalidPanel(format!("need at least 2 times, got {n_times}")));
        }
        if n_responses == 0 {
            return Err(Error::InvalidPanel("no responses".into()));
        }
        if y.len() != n * n_times * n_responses {
            return Err(Error::InvalidPanel("response array has wrong length".into()));
        }
        if let Some(pos) = y.iter().position(|&v| v > 1) {
            return Err(Error::InvalidResponse {
                row: pos,
                value: y[pos].to_string(),
            });
        }
        let cells = [
            ("baseline", &baseline, n * n_responses),
            ("main", &main, n * (n_times - 1) * n_responses),
            ("transition", &transition, n * (n_times - 1) * n_responses),
        ];
        for (what, d, rows) in cells {
            if d.width() == 0 || d.names[0] != INTERCEPT {
                return Err(Error::InvalidPanel(format!("{what} design lacks an intercept column")));
            }
            if d.values.len() != rows * d.width() {
                return Err(Error::InvalidPanel(format!("{what} design has wrong length")));
            }
            if d.values.chunks(d.width()).any(|r| r[0] != 1.0) {
                return Err(Error::InvalidPanel(format!(
                    "{what} design's leading column is not all ones"
                )));
            }
            if d.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidPanel(format!("{what} design has non-finite values")));
            }
        }
        Ok(Self {
            subject_ids,
            n_times,
            n_responses,
            y,
            baseline,
            main,
            transition,
        })
    }

    pub fn n_subjects(&self) -> usize {
        self.subject_ids.len()
    }
    pub fn n_times(&self) -> usize {
        self.n_times
    }
    pub fn n_responses(&self) -> usize {
        self.n_responses
    }
    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }
    pub fn baseline_design(&self) -> &Design {
        &self.baseline
    }
    pub fn main_design(&self) -> &Design {
        &self.main
    }
    pub fn transition_design(&self) -> &Design {
        &self.transition
    }
    pub fn n_baseline_covariates(&self) -> usize {
        self.baseline.width()
    }
    pub fn n_main_covariates(&self) -> usize {
        self.main.width()
    }
    pub fn n_transition_covariates(&self) -> usize {
        self.transition.width()
    }

    #[inline]
    pub fn y(&self, i: usize, t: usize, j: usize) -> u8 {
        self.y[(i * self.n_times + t) * self.n_responses + j]
    }

    /// `y_{i,t-1,j}` for `t >= 1`.
    #[inline]
    pub fn y_lag(&self, i: usize, t: usize, j: usize) -> u8 {
        debug_assert!(t >= 1);
        self.y(i, t - 1, j)
    }

    pub fn responses(&self) -> &[u8] {
        &self.y
    }

    #[inline]
    pub fn x_baseline(&self, i: usize, j: usize) -> &[f64] {
        let p = self.baseline.width();
        let r = i * self.n_responses + j;
        &self.baseline.values[r * p..(r + 1) * p]
    }

    #[inline]
    fn main_row(&self, i: usize, t: usize, j: usize) -> usize {
        debug_assert!(t >= 1 && t < self.n_times);
        (i * (self.n_times - 1) + t - 1) * self.n_responses + j
    }

    /// Main-model design row for `t >= 1`.
    #[inline]
    pub fn x_main(&self, i: usize, t: usize, j: usize) -> &[f64] {
        let p = self.main.width();
        let r = self.main_row(i, t, j);
        &self.main.values[r * p..(r + 1) * p]
    }

    /// Transition design row for `t >= 1`.
    #[inline]
    pub fn z_transition(&self, i: usize, t: usize, j: usize) -> &[f64] {
        let l = self.transition.width();
        let r = self.main_row(i, t, j);
        &self.transition.values[r * l..(r + 1) * l]
    }

    /// Copy of the panel restricted to the given subjects, in the given order.
    pub fn select_subjects(&self, idx: &[usize]) -> Self {
        let (t, k) = (self.n_times, self.n_responses);
        let take = |d: &Design, per_subject: usize| Design {
            names: d.names.clone(),
            values: idx
                .iter()
                .flat_map(|&i| {
                    d.values[i * per_subject * d.width()..(i + 1) * per_subject * d.width()]
                        .iter()
                        .copied()
                })
                .collect(),
        };
        Self {
            subject_ids: idx.iter().map(|&i| self.subject_ids[i].clone()).collect(),
            n_times: t,
            n_responses: k,
            y: idx
                .iter()
                .flat_map(|&i| self.y[i * t * k..(i + 1) * t * k].iter().copied())
                .collect(),
            baseline: take(&self.baseline, k),
            main: take(&self.main, (t - 1) * k),
            transition: take(&self.transition, (t - 1) * k),
        }
    }

    /// A spec that reads back what [`export`] writes.
    pub fn spec(&self) -> ModelSpec {
        let tail = |d: &Design| d.names[1..].to_vec();
        ModelSpec {
            baseline: tail(&self.baseline),
            main: tail(&self.main),
            transition: tail(&self.transition),
            ..ModelSpec::default()
        }
    }

    fn covariate_columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = Vec::new();
        for d in [&self.baseline, &self.main, &self.transition] {
            for n in &d.names[1..] {
                if !cols.contains(n) {
                    cols.push(n.clone());
                }
            }
        }
        cols
    }
}

fn subject_order(ids: &mut [String]) {
    if ids.iter().all(|s| s.parse::<i64>().is_ok()) {
        ids.sort_by_key(|s| s.parse::<i64>().unwrap());
    } else {
        ids.sort();
    }
}

struct Cell {
    y: u8,
    record: csv::StringRecord,
    row: usize,
}

/// Reads a long-format CSV into a validated panel.
pub fn ingest<R: Read>(source: R, spec: &ModelSpec) -> Result<PanelData> {
    spec.check()?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::SpecMismatch(format!("column {name:?} not found in header")))
    };
    let (c_subj, c_time, c_resp, c_y) = (
        col(&spec.subject)?,
        col(&spec.time)?,
        col(&spec.response)?,
        col(&spec.outcome)?,
    );
    let c_base: Vec<usize> = spec.baseline.iter().map(|n| col(n)).collect::<Result<_>>()?;
    let c_main: Vec<usize> = spec.main.iter().map(|n| col(n)).collect::<Result<_>>()?;
    let c_trans: Vec<usize> = spec.transition.iter().map(|n| col(n)).collect::<Result<_>>()?;

    let mut cells: HashMap<(String, i64, i64), Cell> = HashMap::new();
    let mut subjects = BTreeSet::new();
    let mut times = BTreeSet::new();
    let mut responses = BTreeSet::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        // header is line 1
        let row = rec.position().map_or(idx + 2, |p| p.line() as usize);
        let field = |c: usize, name: &str| -> Result<&str> {
            rec.get(c).ok_or_else(|| Error::InvalidValue {
                row,
                column: name.to_string(),
                value: String::new(),
            })
        };
        let int = |c: usize, name: &str| -> Result<i64> {
            let s = field(c, name)?;
            s.parse::<i64>().map_err(|_| Error::InvalidValue {
                row,
                column: name.to_string(),
                value: s.to_string(),
            })
        };
        let subject = field(c_subj, &spec.subject)?.to_string();
        let time = int(c_time, &spec.time)?;
        let response = int(c_resp, &spec.response)?;
        let ys = field(c_y, &spec.outcome)?;
        let y = match ys.parse::<f64>() {
            Ok(v) if v == 0.0 => 0,
            Ok(v) if v == 1.0 => 1,
            _ => {
                return Err(Error::InvalidResponse {
                    row,
                    value: ys.to_string(),
                })
            }
        };
        let key = (subject.clone(), time, response);
        if cells.contains_key(&key) {
            return Err(Error::DuplicateCell {
                subject,
                time,
                response,
                row,
            });
        }
        subjects.insert(subject);
        times.insert(time);
        responses.insert(response);
        cells.insert(key, Cell { y, record: rec, row });
    }

    if cells.is_empty() {
        return Err(Error::InvalidPanel("no data rows".into()));
    }
    let times: Vec<i64> = times.into_iter().collect();
    if times[0] != 1 || times.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(Error::SpecMismatch(format!(
            "times must be consecutive integers starting at 1, found {times:?}"
        )));
    }
    let responses: Vec<i64> = responses.into_iter().collect();
    if responses[0] != 1 || responses.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(Error::SpecMismatch(format!(
            "response indices must be 1..k, found {responses:?}"
        )));
    }
    let mut ids: Vec<String> = subjects.into_iter().collect();
    subject_order(&mut ids);
    let (n, nt, k) = (ids.len(), times.len(), responses.len());

    let parse_cols = |cell: &Cell, cols: &[usize], names: &[String], out: &mut Vec<f64>| -> Result<()> {
        out.push(1.0);
        for (&c, name) in cols.iter().zip(names) {
            let s = cell.record.get(c).unwrap_or("");
            let v = s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                Error::InvalidValue {
                    row: cell.row,
                    column: name.clone(),
                    value: s.to_string(),
                }
            })?;
            out.push(v);
        }
        Ok(())
    };

    let mut y = Vec::with_capacity(n * nt * k);
    let mut xb = Vec::with_capacity(n * k * (c_base.len() + 1));
    let mut xm = Vec::with_capacity(n * (nt - 1) * k * (c_main.len() + 1));
    let mut zt = Vec::with_capacity(n * (nt - 1) * k * (c_trans.len() + 1));
    for id in &ids {
        for &time in &times {
            for &resp in &responses {
                let cell = cells.get(&(id.clone(), time, resp)).ok_or_else(|| {
                    Error::UnbalancedPanel {
                        subject: id.clone(),
                        time,
                        response: resp,
                    }
                })?;
                y.push(cell.y);
                if time == 1 {
                    parse_cols(cell, &c_base, &spec.baseline, &mut xb)?;
                } else {
                    parse_cols(cell, &c_main, &spec.main, &mut xm)?;
                    parse_cols(cell, &c_trans, &spec.transition, &mut zt)?;
                }
            }
        }
    }
    let names = |list: &[String]| {
        std::iter::once(INTERCEPT.to_string())
            .chain(list.iter().cloned())
            .collect::<Vec<_>>()
    };
    PanelData::new(
        ids,
        nt,
        k,
        y,
        Design {
            names: names(&spec.baseline),
            values: xb,
        },
        Design {
            names: names(&spec.main),
            values: xm,
        },
        Design {
            names: names(&spec.transition),
            values: zt,
        },
    )
}

pub fn ingest_path(path: impl AsRef<Path>, spec: &ModelSpec) -> Result<PanelData> {
    ingest(std::fs::File::open(path)?, spec)
}

/// Writes the panel in the long format accepted by [`ingest`] with
/// [`PanelData::spec`]. Covariates that do not apply to a row's occasion
/// are left empty.
pub fn export<W: Write>(data: &PanelData, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let cols = data.covariate_columns();
    let mut header = vec!["subject", "time", "response", "y"];
    header.extend(cols.iter().map(String::as_str));
    w.write_record(&header)?;
    let lookup = |d: &crate::data::Design, row: &[f64], name: &str| {
        d.names.iter().position(|n| n == name).map(|c| row[c])
    };
    let mut rec: Vec<String> = Vec::with_capacity(header.len());
    for (i, id) in data.subject_ids.iter().enumerate() {
        for t in 0..data.n_times {
            for j in 0..data.n_responses {
                rec.clear();
                rec.push(id.clone());
                rec.push((t + 1).to_string());
                rec.push((j + 1).to_string());
                rec.push(data.y(i, t, j).to_string());
                for name in &cols {
                    let v = if t == 0 {
                        lookup(&data.baseline, data.x_baseline(i, j), name)
                    } else {
                        lookup(&data.main, data.x_main(i, t, j), name)
                            .or_else(|| lookup(&data.transition, data.z_transition(i, t, j), name))
                    };
                    rec.push(v.map(|v| v.to_string()).unwrap_or_default());
                }
                w.write_record(&rec)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Subjects whose answers never change.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StayerCounts {
    /// Per response: subjects answering 0 at every time.
    pub always_zero: Vec<usize>,
    /// Per response: subjects answering 1 at every time.
    pub always_one: Vec<usize>,
    /// Subjects answering 0 for every response at every time.
    pub all_zero: usize,
    /// Subjects answering 1 for every response at every time.
    pub all_one: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Success proportion indexed `[time][response]`.
    pub prevalence: Vec<Vec<f64>>,
    pub stayers: StayerCounts,
    pub flags: Vec<String>,
}

/// Descriptive checks on a panel. Never fails and never mutates.
pub fn validate(data: &PanelData) -> Diagnostics {
    let (n, nt, k) = (data.n_subjects(), data.n_times(), data.n_responses());
    let mut flags = Vec::new();
    let prevalence: Vec<Vec<f64>> = (0..nt)
        .map(|t| {
            (0..k)
                .map(|j| (0..n).map(|i| data.y(i, t, j) as f64).sum::<f64>() / n as f64)
                .collect()
        })
        .collect();
    for j in 0..k {
        let total: f64 = (0..nt).map(|t| prevalence[t][j]).sum::<f64>() / nt as f64;
        if total == 0.0 || total == 1.0 {
            flags.push(format!("degenerate response {}: constant at {}", j + 1, total));
            continue;
        }
        for (t, row) in prevalence.iter().enumerate() {
            if row[j] == 0.0 || row[j] == 1.0 {
                flags.push(format!(
                    "degenerate response {} at time {}: constant at {}",
                    j + 1,
                    t + 1,
                    row[j]
                ));
            }
        }
    }
    for (what, d) in [
        ("baseline", &data.baseline),
        ("main", &data.main),
        ("transition", &data.transition),
    ] {
        let p = d.width();
        for c in 1..p {
            let first = d.values[c];
            if d.values.chunks(p).all(|r| r[c] == first) {
                flags.push(format!("constant {what} covariate {:?}", d.names[c]));
            }
        }
    }
    let mut always_zero = vec![0; k];
    let mut always_one = vec![0; k];
    let (mut all_zero, mut all_one) = (0, 0);
    for i in 0..n {
        let mut every0 = true;
        let mut every1 = true;
        for j in 0..k {
            let ones = (0..nt).filter(|&t| data.y(i, t, j) == 1).count();
            if ones == 0 {
                always_zero[j] += 1;
                every1 = false;
            } else if ones == nt {
                always_one[j] += 1;
                every0 = false;
            } else {
                every0 = false;
                every1 = false;
            }
        }
        all_zero += every0 as usize;
        all_one += every1 as usize;
    }
    Diagnostics {
        prevalence,
        stayers: StayerCounts {
            always_zero,
            always_one,
            all_zero,
            all_one,
        },
        flags,
    }
}
