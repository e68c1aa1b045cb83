use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::ingest::{fmt17, fmt17_list, row_major};

/// State of one kept sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub pi: Vec<f64>,
    /// Natural parameters `F_c = M_c D_c V_c^T`.
    pub f: Vec<DMatrix<f64>>,
    pub z: Option<Vec<usize>>,
    /// `-2 Σ_i log Σ_c π_c f(X_i | θ_c)`.
    pub deviance: f64,
    /// `Σ_i log π_{z_i} f(X_i | θ_{z_i})`.
    pub complete_loglik: f64,
    /// Complete-data log likelihood plus the unnormalized log prior.
    pub log_posterior: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainTrace {
    pub n: usize,
    pub p: usize,
    pub c: usize,
    pub records: Vec<TraceRecord>,
}

#[derive(Deserialize)]
struct Line {
    iter: usize,
    n: usize,
    p: usize,
    pi: Vec<f64>,
    #[serde(rename = "F")]
    f: Vec<Vec<f64>>,
    #[serde(default)]
    z: Option<Vec<usize>>,
    deviance: f64,
    complete_loglik: f64,
    log_posterior: f64,
}

impl ChainTrace {
    pub fn new(n: usize, p: usize, c: usize) -> Self {
        Self { n, p, c, records: Vec::new() }
    }

    pub fn deviances(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.deviance).collect()
    }

    /// One JSON object per kept sweep, `F_c` row-major, 17 significant digits.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for r in &self.records {
            let fs: Vec<String> = r.f.iter().map(|f| fmt17_list(row_major(f))).collect();
            let z = match &r.z {
                Some(z) => {
                    let s: Vec<String> = z.iter().map(|v| v.to_string()).collect();
                    format!(",\"z\":[{}]", s.join(","))
                }
                None => String::new(),
            };
            writeln!(
                w,
                "{{\"iter\":{},\"n\":{},\"p\":{},\"pi\":{},\"F\":[{}]{z},\"deviance\":{},\"complete_loglik\":{},\"log_posterior\":{}}}",
                r.iter,
                self.n,
                self.p,
                fmt17_list(r.pi.iter().copied()),
                fs.join(","),
                fmt17(r.deviance),
                fmt17(r.complete_loglik),
                fmt17(r.log_posterior),
            )?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut trace: Option<ChainTrace> = None;
        for (k, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| Error::Parse { line: k + 1, message };
            let rec: Line = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
            let t = trace.get_or_insert_with(|| ChainTrace::new(rec.n, rec.p, rec.pi.len()));
            if (rec.n, rec.p, rec.pi.len(), rec.f.len()) != (t.n, t.p, t.c, t.c) {
                return Err(bad("record shape differs from the first record".into()));
            }
            if rec.f.iter().any(|f| f.len() != t.n * t.p) {
                return Err(bad(format!("each F needs {} entries", t.n * t.p)));
            }
            t.records.push(TraceRecord {
                iter: rec.iter,
                pi: rec.pi,
                f: rec.f.iter().map(|f| DMatrix::from_row_slice(t.n, t.p, f)).collect(),
                z: rec.z,
                deviance: rec.deviance,
                complete_loglik: rec.complete_loglik,
                log_posterior: rec.log_posterior,
            });
        }
        trace.ok_or_else(|| Error::Parse { line: 0, message: "empty trace".into() })
    }
}
