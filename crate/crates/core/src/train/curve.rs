use std::io::Write;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Regularized negative log-likelihood of the training set.
    pub objective: f64,
    /// `None` when no held-out set was given or this epoch was not evaluated.
    pub heldout_metric: Option<f64>,
    pub w_complexity: f64,
    /// Wall time of the sample loop.
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainCurve {
    pub records: Vec<EpochRecord>,
}

impl TrainCurve {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    /// Record for a 1-based epoch.
    pub fn epoch(&self, epoch: usize) -> Option<&EpochRecord> {
        self.records.iter().find(|r| r.epoch == epoch)
    }

    /// Writes `epoch,objective,heldout_metric,w_complexity,epoch_seconds`.
    /// Without `include_timing` the seconds column is left empty so the file
    /// depends only on the inputs.
    pub fn write_csv<W: Write>(&self, out: W, include_timing: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "objective", "heldout_metric", "w_complexity", "epoch_seconds"])?;
        for r in &self.records {
            w.write_record([
                r.epoch.to_string(),
                r.objective.to_string(),
                r.heldout_metric.map(|m| m.to_string()).unwrap_or_default(),
                r.w_complexity.to_string(),
                if include_timing {
                    r.seconds.to_string()
                } else {
                    String::new()
                },
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let curve = TrainCurve {
            records: vec![EpochRecord {
                epoch: 1,
                objective: 2.5,
                heldout_metric: None,
                w_complexity: 0.125,
                seconds: 0.3,
            }],
        };
        let mut buf = Vec::new();
        curve.write_csv(&mut buf, false).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "epoch,objective,heldout_metric,w_complexity,epoch_seconds\n1,2.5,,0.125,\n"
        );
        let mut buf = Vec::new();
        curve.write_csv(&mut buf, true).unwrap();
        assert!(String::from_utf8(buf).unwrap().ends_with("1,2.5,,0.125,0.3\n"));
    }
}
