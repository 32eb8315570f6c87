use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One row per epoch (ISA) or per round (alternation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub predictor_loss: f64,
    pub selector_loss: f64,
    /// Empirical weighted 0-1 selector risk, mean-normalized.
    pub selector_risk: f64,
    /// Selector AP against oracle regions, when those are known.
    pub ap: Option<f64>,
    /// Fraction of samples with selector score above 0.5.
    pub coverage: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<EpochRecord>,
}

impl TrainTrace {
    pub fn push(&mut self, r: EpochRecord) {
        self.records.push(r);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn selector_risks(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.selector_risk).collect()
    }

    /// Columns `epoch,predictor_loss,selector_loss,selector_risk,ap,coverage`;
    /// a missing AP is an empty cell.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        if self.records.is_empty() {
            w.write_record(["epoch", "predictor_loss", "selector_loss", "selector_risk", "ap", "coverage"])?;
        }
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let records = rdr.deserialize().collect::<std::result::Result<Vec<EpochRecord>, _>>()?;
        Ok(TrainTrace { records })
    }
}
