//! Per-iteration optimizer records and their JSON-lines encoding.

use std::io::{BufRead, Write};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Keys of one JSONL trace line, in emission order.
pub const TRACE_KEYS: [&str; 8] = [
    "t",
    "f",
    "grad_norm",
    "step",
    "lam_r1",
    "lam_p",
    "dist",
    "elapsed_s",
];

/// One iterate. Record `t` holds θ^t; `step`, `lam_r1` and `lam_p` describe
/// the update that produced it and are absent at t = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub t: usize,
    pub theta: DVector<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub step: Option<f64>,
    pub lam_r1: Option<f64>,
    pub lam_p: Option<f64>,
    /// ‖θ^t − θ*‖₂ when a reference solution was supplied.
    pub dist: Option<f64>,
    pub elapsed_s: f64,
}

/// Serialized form of a [`Record`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceLine {
    pub t: usize,
    pub f: f64,
    pub grad_norm: f64,
    pub step: Option<f64>,
    pub lam_r1: Option<f64>,
    pub lam_p: Option<f64>,
    pub dist: Option<f64>,
    pub elapsed_s: f64,
}

impl From<&Record> for TraceLine {
    fn from(r: &Record) -> Self {
        TraceLine {
            t: r.t,
            f: r.f,
            grad_norm: r.grad_norm,
            step: r.step,
            lam_r1: r.lam_r1,
            lam_p: r.lam_p,
            dist: r.dist,
            elapsed_s: r.elapsed_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    /// ‖θ^{t+1} − θ^t‖₂ ≤ ε.
    EpsReached,
    /// ‖θ^t − θ*‖₂ fell to the configured target distance.
    TargetReached,
    MaxIters,
    Failed(Error),
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::EpsReached => "eps-reached",
            Termination::TargetReached => "target-reached",
            Termination::MaxIters => "max-iters",
            Termination::Failed(_) => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub method: String,
    pub records: Vec<Record>,
    pub termination: Termination,
}

impl Trace {
    pub fn new(method: impl Into<String>) -> Self {
        Self {
            method: method.into(),
            records: Vec::new(),
            termination: Termination::MaxIters,
        }
    }

    pub fn last(&self) -> Option<&Record> {
        self.records.last()
    }

    pub fn final_theta(&self) -> Option<&DVector<f64>> {
        self.records.last().map(|r| &r.theta)
    }

    /// Number of updates performed.
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.t)
    }

    pub fn failed(&self) -> Option<&Error> {
        match &self.termination {
            Termination::Failed(e) => Some(e),
            _ => None,
        }
    }

    /// Distances ‖θ^t − θ*‖₂ for the records that carry one.
    pub fn distances(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.dist).collect()
    }

    /// First t with dist ≤ tol.
    pub fn iterations_to(&self, tol: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.dist.is_some_and(|d| d <= tol))
            .map(|r| r.t)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            let line = serde_json::to_string(&TraceLine::from(r))
                .map_err(|e| Error::Io(e.to_string()))?;
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<TraceLine>> {
        let mut out = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TraceLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            out.push(rec);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_schema_is_stable() {
        let mut tr = Trace::new("x");
        tr.records.push(Record {
            t: 0,
            theta: DVector::zeros(2),
            f: 1.5,
            grad_norm: 0.25,
            step: None,
            lam_r1: None,
            lam_p: None,
            dist: Some(3.0),
            elapsed_s: 0.0,
        });
        let mut buf = Vec::new();
        tr.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let v: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        let mut want = TRACE_KEYS.to_vec();
        want.sort_unstable();
        let mut got = keys.clone();
        got.sort_unstable();
        assert_eq!(got, want);
        let back = Trace::read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(back[0], TraceLine::from(&tr.records[0]));
        assert!(Trace::read_jsonl(&b"{\"t\":0,\"extra\":1}\n"[..]).is_err());
    }
}
