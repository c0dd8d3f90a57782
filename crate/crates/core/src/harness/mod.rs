//! Verification experiments, the Schlicht catalog, the lemma constant chain
//! and the command-line front end.

pub mod cli;
pub mod lemma;
pub mod schlicht;
pub mod verify;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capacity::CapacityError;
use crate::geometry::GeometryError;
use crate::pde::PdeError;
use crate::sampler::{fmt_f64, SamplerError};

pub use lemma::{lemma1_bound, Lemma1Constants, LemmaError};
pub use schlicht::{catalog, SchlichtEntry};
pub use verify::{
    run_experiment, verify_fast_exit, verify_hardy_tails, verify_lemma1, verify_long_stay, ExperimentSpec,
    FastExitSpec, HardySpec, Lemma1Spec, LongStaySpec,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Capacity(#[from] CapacityError),
    #[error(transparent)]
    Lemma(#[from] LemmaError),
    #[error("{0}")]
    Precondition(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// One pass/fail decision and the tolerance it was judged against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: &str, passed: bool, value: f64, tolerance: f64, detail: String) -> Self {
        Verdict { name: name.into(), passed, value, tolerance, detail }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Values print in shortest round-trip form, so files are reproducible
    /// bit for bit. NaN marks a missing value and prints empty.
    pub fn write_csv(&self, path: &Path) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|v| cell(*v)))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn cell(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        fmt_f64(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub theorem: String,
    pub spec: ExperimentSpec,
    pub seed: u64,
    pub table: Table,
    pub verdicts: Vec<Verdict>,
    /// Engine names, grid parameters and sample counts.
    pub provenance: BTreeMap<String, String>,
    pub notes: Vec<String>,
}

impl ExperimentResult {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }
}

/// SplitMix64 of `seed ^ tag`: independent seeds for the batches of one run.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = (seed ^ tag).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
