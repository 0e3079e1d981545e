use std::fmt;
use std::io::{self, Write};
use std::time::Duration;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// Diagnostic only; never fails a run.
    Info,
}

impl Verdict {
    pub fn from_check(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Info => "info",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One measured quantity of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    /// Row size, absent for experiments on the limit process itself.
    pub n: Option<usize>,
    pub metric: String,
    /// Free-form qualifier such as `t=0.5` or `box=2`.
    pub param: String,
    pub value: f64,
    pub reference: Option<f64>,
    pub se: Option<f64>,
    pub threshold: Option<f64>,
    pub verdict: Verdict,
}

impl MetricRow {
    pub fn new(n: Option<usize>, metric: &str, value: f64) -> Self {
        Self {
            n,
            metric: metric.to_string(),
            param: String::new(),
            value,
            reference: None,
            se: None,
            threshold: None,
            verdict: Verdict::Info,
        }
    }

    pub fn param(mut self, param: impl Into<String>) -> Self {
        self.param = param.into();
        self
    }

    pub fn reference(mut self, reference: f64) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn se(mut self, se: f64) -> Self {
        self.se = Some(se);
        self
    }

    pub fn threshold(mut self, threshold: f64) -> Self {
        self.threshold = Some(threshold);
        self
    }

    pub fn verdict(mut self, verdict: Verdict) -> Self {
        self.verdict = verdict;
        self
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub name: String,
    pub kind: &'static str,
    pub seed: u64,
    pub replicates: usize,
    pub rows: Vec<MetricRow>,
    /// Argmax ties over all replicates and row sizes.
    pub ties: u64,
    /// Wall-clock time; kept out of every file so reruns are byte-identical.
    pub elapsed: Duration,
}

pub const CSV_HEADER: &str = "seed,experiment,kind,n,metric,param,value,reference,se,threshold,verdict";

/// Reals are written with 17 significant digits, which round-trips `f64`.
pub fn format_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

fn format_opt(v: Option<f64>) -> String {
    v.map(format_real).unwrap_or_default()
}

/// Quotes a CSV field when it contains a separator, quote or line break.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.verdict != Verdict::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &MetricRow> {
        self.rows.iter().filter(|r| r.verdict == Verdict::Fail)
    }

    pub fn rows_for<'a>(&'a self, metric: &'a str) -> impl Iterator<Item = &'a MetricRow> + 'a {
        self.rows.iter().filter(move |r| r.metric == metric)
    }

    /// Rows without header, one per metric, CRLF-free.
    pub fn write_csv_rows<W: Write>(&self, w: &mut W) -> io::Result<()> {
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                self.seed,
                csv_field(&self.name),
                self.kind,
                r.n.map(|n| n.to_string()).unwrap_or_default(),
                csv_field(&r.metric),
                csv_field(&r.param),
                format_real(r.value),
                format_opt(r.reference),
                format_opt(r.se),
                format_opt(r.threshold),
                r.verdict,
            )?;
        }
        Ok(())
    }
}
