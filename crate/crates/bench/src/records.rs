//! One CSV row per stage run.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Column order is the field order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub state_family: String,
    pub n: usize,
    pub k: u64,
    pub state_seed: u64,
    pub run_seed: u64,
    pub epsilon: f64,
    pub mu: f64,
    pub stage: u8,
    /// `v1`, `v2`, or `-` for Stage 1.
    pub variant: String,
    /// `M_1` or `M_3`; empty for Stage 2.
    pub samples_used: Option<u64>,
    pub iterations: Option<u64>,
    /// Step-size adaptations beyond one Gibbs evaluation per update.
    pub substeps: Option<u64>,
    /// Stage 1: Jaccard target met. Stage 2: certified mimicking state.
    /// Stage 3: agreement target met.
    pub feasible: bool,
    pub jaccard_final: Option<f64>,
    pub mse_final: Option<f64>,
    pub agreement_final: Option<f64>,
    pub support_size: Option<u64>,
    pub wall_time_ms: f64,
    pub error: Option<String>,
}

pub const COLUMNS: [&str; 19] = [
    "state_family",
    "n",
    "k",
    "state_seed",
    "run_seed",
    "epsilon",
    "mu",
    "stage",
    "variant",
    "samples_used",
    "iterations",
    "substeps",
    "feasible",
    "jaccard_final",
    "mse_final",
    "agreement_final",
    "support_size",
    "wall_time_ms",
    "error",
];

impl ExperimentRecord {
    /// Points usable in a scaling fit: finished without error and not censored.
    pub fn is_clean(&self) -> bool {
        self.error.is_none() && self.feasible
    }
}

pub struct RecordWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> RecordWriter<W> {
    /// Writes the header immediately.
    pub fn new(w: W) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        inner.write_record(COLUMNS)?;
        inner.flush()?;
        Ok(Self { inner })
    }

    /// Appends to a file that already has a header.
    pub fn append(w: W) -> Self {
        Self {
            inner: csv::WriterBuilder::new().has_headers(false).from_writer(w),
        }
    }

    pub fn write(&mut self, r: &ExperimentRecord) -> Result<()> {
        self.inner.serialize(r)?;
        Ok(())
    }

    pub fn write_all(&mut self, rs: &[ExperimentRecord]) -> Result<()> {
        for r in rs {
            self.write(r)?;
        }
        self.inner.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W> {
        self.inner
            .into_inner()
            .map_err(|e| std::io::Error::other(e.to_string()).into())
    }
}

/// Reads every newline-terminated row; an unterminated final row (from an
/// interrupted write) is dropped.
pub fn read_records<R: Read>(mut r: R) -> Result<Vec<ExperimentRecord>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    bytes.truncate(keep);
    let mut rdr = csv::Reader::from_reader(bytes.as_slice());
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

pub fn read_records_file(path: &std::path::Path) -> Result<Vec<ExperimentRecord>> {
    read_records(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample() -> ExperimentRecord {
        ExperimentRecord {
            state_family: "Gibbs".into(),
            n: 4,
            k: 8,
            state_seed: 3,
            run_seed: 99,
            epsilon: 0.2,
            mu: 0.15000000000000002,
            stage: 3,
            variant: "v2".into(),
            samples_used: Some(15),
            iterations: None,
            substeps: None,
            feasible: true,
            jaccard_final: None,
            mse_final: Some(0.0123),
            agreement_final: Some(1.0),
            support_size: Some(12),
            wall_time_ms: 1.5,
            error: None,
        }
    }

    #[test]
    fn empty_set_is_header_only() {
        let w = RecordWriter::new(Vec::new()).unwrap();
        let bytes = w.into_inner().unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap(), COLUMNS.join(",") + "\n");
    }

    #[test]
    fn round_trip() {
        let mut w = RecordWriter::new(Vec::new()).unwrap();
        let mut bad = sample();
        bad.error = Some("eigensolver failed, twice".into());
        bad.samples_used = None;
        w.write_all(&[sample(), bad.clone()]).unwrap();
        let bytes = w.into_inner().unwrap();
        let back = read_records(bytes.as_slice()).unwrap();
        assert_eq!(back, vec![sample(), bad]);
    }

    #[test]
    fn truncated_tail_is_dropped() {
        let mut w = RecordWriter::new(Vec::new()).unwrap();
        w.write_all(&[sample(), sample()]).unwrap();
        let mut bytes = w.into_inner().unwrap();
        bytes.truncate(bytes.len() - 20);
        assert_eq!(read_records(bytes.as_slice()).unwrap().len(), 1);
    }
}
