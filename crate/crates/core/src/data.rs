//! Trial records, dataset validation and delimited-text ingestion.
//!
//! On disk all categorical columns are 1-based. In memory every index
//! (subject, block, trial, stimulus, response) is 0-based.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub subject: usize,
    pub block: usize,
    pub trial: usize,
    pub stimulus: usize,
    pub response: usize,
    /// Response time in seconds.
    pub rt: f64,
}

/// Design sizes. Any field left `None` in an override is inferred from the data.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignOverride {
    pub subjects: Option<usize>,
    pub blocks: Option<usize>,
    pub trials: Option<usize>,
    pub categories: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub subject: String,
    pub block: String,
    pub trial: String,
    pub stimulus: String,
    pub response: String,
    pub rt: String,
    pub delimiter: u8,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        Self {
            subject: "subject".into(),
            block: "block".into(),
            trial: "trial".into(),
            stimulus: "stimulus".into(),
            response: "response".into(),
            rt: "rt".into(),
            delimiter: b',',
        }
    }
}

/// Validated, immutable collection of trials with lookup indexes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<TrialRecord>,
    n_subjects: usize,
    n_blocks: usize,
    n_trials: usize,
    n_categories: usize,
    min_rt: Vec<f64>,
    by_subject: Vec<Vec<usize>>,
    by_subject_stimulus: Vec<Vec<usize>>,
    by_block_stimulus: Vec<Vec<usize>>,
}

impl Dataset {
    /// Validates `records` and builds the indexes. Sizes not fixed by `sizes`
    /// are taken as the largest index seen plus one.
    pub fn new(records: Vec<TrialRecord>, sizes: DesignOverride) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let infer = |f: fn(&TrialRecord) -> usize| records.iter().map(f).max().unwrap_or(0) + 1;
        let n = sizes.subjects.unwrap_or_else(|| infer(|r| r.subject));
        let t = sizes.blocks.unwrap_or_else(|| infer(|r| r.block));
        let l = sizes.trials.unwrap_or_else(|| infer(|r| r.trial));
        let d0 = sizes
            .categories
            .unwrap_or_else(|| infer(|r| r.stimulus.max(r.response)));
        if d0 < 2 {
            return Err(Error::Config(format!("need at least 2 categories, found {d0}")));
        }

        for (row, r) in records.iter().enumerate() {
            let row = row + 1;
            let check = |field: &'static str, v: usize, max: usize| {
                if v >= max {
                    Err(Error::CategoryOutOfRange {
                        row,
                        field,
                        value: v as i64 + 1,
                        max,
                    })
                } else {
                    Ok(())
                }
            };
            check("subject", r.subject, n)?;
            check("block", r.block, t)?;
            check("trial", r.trial, l)?;
            check("stimulus", r.stimulus, d0)?;
            check("response", r.response, d0)?;
            if !(r.rt > 0.0) || !r.rt.is_finite() {
                return Err(Error::NonpositiveRt { row });
            }
        }

        let mut by_subject = vec![Vec::new(); n];
        let mut by_subject_stimulus = vec![Vec::new(); n * d0];
        let mut by_block_stimulus = vec![Vec::new(); t * d0];
        let mut min_rt = vec![f64::INFINITY; n * d0];
        for (idx, r) in records.iter().enumerate() {
            by_subject[r.subject].push(idx);
            by_subject_stimulus[r.subject * d0 + r.stimulus].push(idx);
            by_block_stimulus[r.block * d0 + r.stimulus].push(idx);
            let m = &mut min_rt[r.subject * d0 + r.stimulus];
            *m = m.min(r.rt);
        }
        for i in 0..n {
            for s in 0..d0 {
                if by_subject_stimulus[i * d0 + s].is_empty() {
                    return Err(Error::MissingPair {
                        subject: i + 1,
                        stimulus: s + 1,
                    });
                }
            }
        }

        Ok(Self {
            records,
            n_subjects: n,
            n_blocks: t,
            n_trials: l,
            n_categories: d0,
            min_rt,
            by_subject,
            by_subject_stimulus,
            by_block_stimulus,
        })
    }

    /// A dataset without trials, for prior-only runs. Every offset is bounded
    /// above by `offset_bound`.
    pub fn empty(n_subjects: usize, n_blocks: usize, n_categories: usize, offset_bound: f64) -> Result<Self> {
        if n_subjects == 0 || n_blocks == 0 || n_categories < 2 || !(offset_bound > 0.0) {
            return Err(Error::InvalidArgument(
                "empty dataset needs n >= 1, T >= 1, d0 >= 2 and a positive offset bound".into(),
            ));
        }
        let d0 = n_categories;
        Ok(Self {
            records: Vec::new(),
            n_subjects,
            n_blocks,
            n_trials: 0,
            n_categories,
            min_rt: vec![offset_bound; n_subjects * d0],
            by_subject: vec![Vec::new(); n_subjects],
            by_subject_stimulus: vec![Vec::new(); n_subjects * d0],
            by_block_stimulus: vec![Vec::new(); n_blocks * d0],
        })
    }

    pub fn records(&self) -> &[TrialRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_subjects(&self) -> usize {
        self.n_subjects
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    pub fn n_trials(&self) -> usize {
        self.n_trials
    }

    pub fn n_categories(&self) -> usize {
        self.n_categories
    }

    /// Smallest response time of `subject` under `stimulus` (0-based). This
    /// is the upper bound of the offset prior.
    pub fn min_rt(&self, subject: usize, stimulus: usize) -> Result<f64> {
        if subject >= self.n_subjects || stimulus >= self.n_categories {
            return Err(Error::MissingPair {
                subject: subject + 1,
                stimulus: stimulus + 1,
            });
        }
        Ok(self.min_rt[subject * self.n_categories + stimulus])
    }

    pub fn trials_of_subject(&self, subject: usize) -> &[usize] {
        &self.by_subject[subject]
    }

    pub fn trials_of_subject_stimulus(&self, subject: usize, stimulus: usize) -> &[usize] {
        &self.by_subject_stimulus[subject * self.n_categories + stimulus]
    }

    pub fn trials_of_block_stimulus(&self, block: usize, stimulus: usize) -> &[usize] {
        &self.by_block_stimulus[block * self.n_categories + stimulus]
    }

    /// Writes the dataset with the default schema, 1-based categories.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "subject,block,trial,stimulus,response,rt").map_err(io)?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.subject + 1,
                r.block + 1,
                r.trial + 1,
                r.stimulus + 1,
                r.response + 1,
                r.rt
            )
            .map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

pub fn load_dataset(path: &Path, schema: &ColumnSchema) -> Result<Dataset> {
    load_dataset_with_sizes(path, schema, DesignOverride::default())
}

pub fn load_dataset_with_sizes(path: &Path, schema: &ColumnSchema, sizes: DesignOverride) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(file, schema, sizes)
}

/// Parses delimited text with a header row from any reader.
pub fn read_dataset<R: std::io::Read>(reader: R, schema: &ColumnSchema, sizes: DesignOverride) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::MalformedRow {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::MalformedRow {
            row: 0,
            message: format!("missing column '{name}'"),
        })
    };
    let cols = [
        column(&schema.subject)?,
        column(&schema.block)?,
        column(&schema.trial)?,
        column(&schema.stimulus)?,
        column(&schema.response)?,
    ];
    let names = ["subject", "block", "trial", "stimulus", "response"];
    let rt_col = column(&schema.rt)?;

    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::MalformedRow {
            row,
            message: e.to_string(),
        })?;
        let mut idx = [0usize; 5];
        for (slot, (&c, &name)) in cols.iter().zip(&names).enumerate() {
            let raw = rec.get(c).unwrap_or("");
            let v: i64 = raw.parse().map_err(|_| Error::MalformedRow {
                row,
                message: format!("{name} '{raw}' is not an integer"),
            })?;
            if v < 1 {
                return Err(Error::MalformedRow {
                    row,
                    message: format!("{name} must be a positive integer, got {v}"),
                });
            }
            idx[slot] = (v - 1) as usize;
        }
        let raw_rt = rec.get(rt_col).unwrap_or("");
        let rt: f64 = raw_rt.parse().map_err(|_| Error::MalformedRow {
            row,
            message: format!("rt '{raw_rt}' is not a number"),
        })?;
        if !(rt > 0.0) {
            return Err(Error::NonpositiveRt { row });
        }
        records.push(TrialRecord {
            subject: idx[0],
            block: idx[1],
            trial: idx[2],
            stimulus: idx[3],
            response: idx[4],
            rt,
        });
    }
    Dataset::new(records, sizes)
}
