//! Run configuration, structured reports and their on-disk artifacts.
//!
//! A run writes `config.json` (the [`RunConfig`] it was given), one CSV per
//! table with a header row, a matplotlib script per table and a single
//! `report.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Non-finite floats are written as `null`; read them back as NaN.
fn nan_from_null<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

fn nan_map_from_null<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<BTreeMap<String, f64>, D::Error> {
    let m = BTreeMap::<String, Option<f64>>::deserialize(d)?;
    Ok(m.into_iter().map(|(k, v)| (k, v.unwrap_or(f64::NAN))).collect())
}

fn nan_vec_from_null<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    let v = Vec::<Option<f64>>::deserialize(d)?;
    Ok(v.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
}

/// One pass/fail assertion with the measured value and its bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    #[serde(deserialize_with = "nan_from_null")]
    pub value: f64,
    pub bound: String,
    pub passed: bool,
}

impl Check {
    pub fn le(name: &str, value: f64, limit: f64) -> Self {
        Self::new(name, value, format!("<= {limit:e}"), value <= limit)
    }

    pub fn lt(name: &str, value: f64, limit: f64) -> Self {
        Self::new(name, value, format!("< {limit}"), value < limit)
    }

    pub fn gt(name: &str, value: f64, limit: f64) -> Self {
        Self::new(name, value, format!("> {limit}"), value > limit)
    }

    pub fn within(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Self::new(name, value, format!("in [{lo}, {hi}]"), (lo..=hi).contains(&value))
    }

    /// A boolean property; `value` is 1 or 0.
    pub fn holds(name: &str, ok: bool) -> Self {
        Self::new(name, if ok { 1.0 } else { 0.0 }, "true".into(), ok)
    }

    fn new(name: &str, value: f64, bound: String, passed: bool) -> Self {
        Self {
            name: name.into(),
            value,
            bound,
            passed: passed && !value.is_nan(),
        }
    }
}

/// A fitted exponent with its acceptance window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exponent {
    pub name: String,
    #[serde(deserialize_with = "nan_from_null")]
    pub measured: f64,
    pub expected: f64,
    pub window: [f64; 2],
    pub passed: bool,
}

impl Exponent {
    /// Window `expected ± tol`.
    pub fn abs(name: &str, measured: f64, expected: f64, tol: f64) -> Self {
        Self::window(name, measured, expected, expected - tol, expected + tol)
    }

    /// Window `expected (1 ± rel)`.
    pub fn rel(name: &str, measured: f64, expected: f64, rel: f64) -> Self {
        let d = rel * expected.abs();
        Self::window(name, measured, expected, expected - d, expected + d)
    }

    pub fn window(name: &str, measured: f64, expected: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            expected,
            window: [lo, hi],
            passed: (lo..=hi).contains(&measured),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionLog {
    pub name: String,
    #[serde(deserialize_with = "nan_vec_from_null")]
    pub distances: Vec<f64>,
    #[serde(deserialize_with = "nan_vec_from_null")]
    pub ratios: Vec<f64>,
    #[serde(deserialize_with = "nan_from_null")]
    pub lipschitz: f64,
}

/// Column data destined for a CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub log_x: bool,
    pub log_y: bool,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            log_x: false,
            log_y: false,
        }
    }

    pub fn log_scales(mut self, x: bool, y: bool) -> Self {
        self.log_x = x;
        self.log_y = y;
        self
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(name: &str, path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let columns = r.headers()?.iter().map(String::from).collect();
        let rows = r.deserialize().collect::<std::result::Result<Vec<Vec<f64>>, _>>()?;
        Ok(Self {
            name: name.into(),
            columns,
            rows,
            log_x: false,
            log_y: false,
        })
    }

    /// A matplotlib script plotting every column against the first.
    pub fn plot_script(&self) -> String {
        let mut s = String::new();
        s.push_str("import csv\nimport matplotlib.pyplot as plt\n\n");
        s.push_str(&format!("with open({:?}) as fh:\n", self.file_name()));
        s.push_str("    rows = list(csv.reader(fh))\n");
        s.push_str("head, data = rows[0], [[float(v) for v in r] for r in rows[1:]]\n");
        s.push_str("fig, ax = plt.subplots()\n");
        s.push_str("for k in range(1, len(head)):\n");
        let y = if self.log_y { "abs(r[k])" } else { "r[k]" };
        s.push_str(&format!("    ax.plot([r[0] for r in data], [{y} for r in data], marker='.', label=head[k])\n"));
        if self.log_x {
            s.push_str("ax.set_xscale('log')\n");
        }
        if self.log_y {
            s.push_str("ax.set_yscale('log')\n");
        }
        s.push_str(&format!(
            "ax.set_xlabel(head[0])\nax.legend()\nax.set_title({:?})\nfig.savefig({:?})\n",
            self.name,
            format!("{}.png", self.name)
        ));
        s
    }
}

/// Results of one named unit of work (a cell construction or an acceptance
/// criterion).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub id: String,
    pub title: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub exponents: Vec<Exponent>,
    pub contraction: Vec<ContractionLog>,
    #[serde(deserialize_with = "nan_map_from_null")]
    pub scalars: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    /// CSV files written for this section.
    pub tables: Vec<String>,
    /// Wall-clock budget in seconds.
    pub time_limit: Option<f64>,
    #[serde(skip)]
    pub data: Vec<Table>,
}

impl Section {
    pub fn new(id: &str, title: &str, time_limit: Option<f64>) -> Self {
        Self {
            id: id.into(),
            title: title.into(),
            passed: false,
            checks: Vec::new(),
            exponents: Vec::new(),
            contraction: Vec::new(),
            scalars: BTreeMap::new(),
            notes: Vec::new(),
            tables: Vec::new(),
            time_limit,
            data: Vec::new(),
        }
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn exponent(&mut self, e: Exponent) {
        self.exponents.push(e);
    }

    pub fn scalar(&mut self, name: &str, v: f64) {
        self.scalars.insert(name.into(), v);
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn table(&mut self, t: Table) {
        self.tables.push(t.file_name());
        self.data.push(t);
    }

    /// Fixes `passed`; a section without assertions fails.
    pub fn finish(mut self) -> Self {
        let any = !self.checks.is_empty() || !self.exponents.is_empty();
        self.passed = any && self.checks.iter().all(|c| c.passed) && self.exponents.iter().all(|e| e.passed);
        self
    }

    /// Sections are run through this so a solver error becomes a failed
    /// section rather than a missing one.
    pub fn from_result(id: &str, title: &str, time_limit: Option<f64>, r: Result<Section>) -> Section {
        match r {
            Ok(s) => s.finish(),
            Err(e) => {
                let mut s = Section::new(id, title, time_limit);
                s.check(Check::holds("completed without error", false));
                s.note(e.to_string());
                s.finish()
            }
        }
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{} = {} (want {})", c.name, c.value, c.bound))
            .collect();
        out.extend(self.exponents.iter().filter(|e| !e.passed).map(|e| {
            format!("{} = {} (want [{}, {}])", e.name, e.measured, e.window[0], e.window[1])
        }));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub seconds: f64,
    pub limit: Option<f64>,
    pub within: bool,
}

/// Runs `f`, converting errors into a failed section, and records its time.
pub fn timed(id: &str, title: &str, limit: Option<f64>, f: impl FnOnce() -> Result<Section>) -> (Section, Timing) {
    let start = Instant::now();
    let section = Section::from_result(id, title, limit, f());
    let seconds = start.elapsed().as_secs_f64();
    (
        section,
        Timing {
            seconds,
            limit,
            within: limit.map_or(true, |l| seconds < l),
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Effort {
    Full,
    Quick,
}

/// What a run computes; serialised with a `subcommand` tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Task {
    CellSeparable {
        dim: usize,
        p: f64,
        tol: f64,
        /// Also check the trivial extension to `N + k` dimensions.
        extension_k: Option<usize>,
        extension_samples: usize,
    },
    CellCritical {
        dim: usize,
        sigma: f64,
        mu: f64,
        t_star: Option<f64>,
        dt: f64,
        n_alpha: usize,
        tol: f64,
        consistent: bool,
    },
    CellConnection {
        dim: usize,
        p: f64,
        delta: Option<f64>,
        delta_prime: Option<f64>,
        ds: f64,
        n_alpha: usize,
        tol: f64,
    },
    Glue {
        domain: crate::glue::Domain,
        p: f64,
        points: Vec<f64>,
        eps: f64,
        radius: f64,
        delta: Option<f64>,
        /// Mesh levels `0..levels` for the refinement study (single-stage runs).
        levels: u32,
        /// Run the finite-stage construction with this many stages instead.
        stages: Option<usize>,
        tol: f64,
    },
    Verify {
        criteria: Vec<u8>,
        effort: Effort,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub task: Task,
    /// Seed for randomised sampling.
    pub seed: u64,
    pub out_dir: PathBuf,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be strictly positive, got {v}")))
    }
}

impl RunConfig {
    pub fn new(task: Task, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            task,
            seed: 0,
            out_dir: out_dir.into(),
        }
    }

    /// Checks every tolerance and parameter window before any work starts.
    pub fn validate(&self) -> Result<()> {
        use crate::params::{critical_exponent, ExponentParams};
        match &self.task {
            Task::CellSeparable {
                dim,
                p,
                tol,
                extension_k,
                extension_samples,
            } => {
                positive("tol", *tol)?;
                ExponentParams::new(*dim, *p)?.require_supercritical()?;
                if extension_k.is_some() && *extension_samples == 0 {
                    return Err(Error::Config("extension_samples must be positive".into()));
                }
            }
            Task::CellCritical {
                dim,
                sigma,
                mu,
                dt,
                n_alpha,
                tol,
                ..
            } => {
                positive("tol", *tol)?;
                positive("dt", *dt)?;
                ExponentParams::critical(*dim)?;
                let n = *dim as f64;
                if !(*sigma > (n - 1.0) / 2.0 && *sigma < (n + 1.0) / 2.0) {
                    return Err(Error::Window(format!(
                        "σ must satisfy (N-1)/2 < σ < (N+1)/2 = ({}, {}), got {sigma}",
                        (n - 1.0) / 2.0,
                        (n + 1.0) / 2.0
                    )));
                }
                if !(*mu > 0.0 && *mu < 1.0) {
                    return Err(Error::Window(format!("μ must satisfy 0 < μ < 1, got {mu}")));
                }
                if *n_alpha < 5 {
                    return Err(Error::Config(format!("n_alpha must be at least 5, got {n_alpha}")));
                }
            }
            Task::CellConnection {
                dim,
                p,
                delta,
                delta_prime,
                ds,
                n_alpha,
                tol,
            } => {
                positive("tol", *tol)?;
                positive("ds", *ds)?;
                let params = ExponentParams::new(*dim, *p)?;
                let (d0, dp0) = crate::connection::default_weights(*dim, *p);
                crate::connection::check_connection_windows(
                    &params,
                    delta.unwrap_or(d0),
                    delta_prime.unwrap_or(dp0),
                )?;
                if *n_alpha < 5 {
                    return Err(Error::Config(format!("n_alpha must be at least 5, got {n_alpha}")));
                }
            }
            Task::Glue { tol, levels, stages, .. } => {
                positive("tol", *tol)?;
                let cfg = self.glue_config().expect("glue task");
                cfg.validate()?;
                let pc = critical_exponent(cfg.domain.dim());
                if cfg.p < pc {
                    return Err(Error::Window(format!(
                        "gluing needs p >= (N+1)/(N-1) = {pc}, got {}",
                        cfg.p
                    )));
                }
                if *levels == 0 {
                    return Err(Error::Config("levels must be at least 1".into()));
                }
                if let Some(k) = stages {
                    if *k == 0 || *k > cfg.points.len() {
                        return Err(Error::Config(format!(
                            "stages must lie in 1..={} (one point per stage), got {k}",
                            cfg.points.len()
                        )));
                    }
                }
            }
            Task::Verify { criteria, .. } => {
                if let Some(c) = criteria.iter().find(|c| !(1..=8).contains(*c)) {
                    return Err(Error::Config(format!("acceptance criteria are numbered 1 to 8, got {c}")));
                }
            }
        }
        Ok(())
    }

    pub fn glue_config(&self) -> Option<crate::glue::GlueConfig> {
        match &self.task {
            Task::Glue {
                domain,
                p,
                points,
                eps,
                radius,
                delta,
                tol,
                ..
            } => {
                let mut cfg = crate::glue::GlueConfig::new(*domain, *p, points.clone(), *eps);
                cfg.radius = *radius;
                cfg.delta = *delta;
                cfg.tol = *tol;
                Some(cfg)
            }
            _ => None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub passed: bool,
    pub sections: Vec<Section>,
    pub timings: BTreeMap<String, Timing>,
}

impl RunReport {
    pub fn new(config: RunConfig, parts: Vec<(Section, Timing)>) -> Self {
        let mut sections = Vec::new();
        let mut timings = BTreeMap::new();
        for (s, t) in parts {
            timings.insert(s.id.clone(), t);
            sections.push(s);
        }
        Self {
            passed: !sections.is_empty() && sections.iter().all(|s| s.passed),
            config,
            sections,
            timings,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// The report with wall-clock timings removed; identical across runs with
    /// the same configuration.
    pub fn deterministic_json(&self) -> Result<String> {
        let mut r = self.clone();
        r.timings.clear();
        r.to_json()
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for sec in &self.sections {
            let t = self.timings.get(&sec.id).map(|t| t.seconds).unwrap_or(f64::NAN);
            s.push_str(&format!(
                "{} {} ({}) [{t:.1} s]\n",
                if sec.passed { "PASS" } else { "FAIL" },
                sec.id,
                sec.title
            ));
            for f in sec.failures() {
                s.push_str(&format!("    {f}\n"));
            }
            for n in &sec.notes {
                s.push_str(&format!("    note: {n}\n"));
            }
        }
        s
    }

    /// Writes `config.json`, `report.json`, CSV tables and plot scripts.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("config.json"), self.config.to_json()?)?;
        for sec in &self.sections {
            for t in &sec.data {
                t.write_csv(&dir.join(t.file_name()))?;
                fs::write(dir.join(format!("plot_{}.py", t.name)), t.plot_script())?;
            }
        }
        fs::write(dir.join("report.json"), self.to_json()?)?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(dir.join("report.json"))?)?)
    }
}
