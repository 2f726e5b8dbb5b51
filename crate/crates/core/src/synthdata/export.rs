use std::io::Write;

use super::DatasetSplit;
use crate::error::{Error, Result};

/// One row per sample: `client_id,split,label,x0,...`. Pool rows have an
/// empty label.
pub fn write_splits_csv<W: Write>(out: W, splits: &[DatasetSplit]) -> Result<()> {
    let dim = splits.iter().find_map(|s| s.feature_dim()).unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(format!("csv write failed: {e}"));

    let mut header = vec!["client_id".to_string(), "split".into(), "label".into()];
    header.extend((0..dim).map(|i| format!("x{i}")));
    w.write_record(&header).map_err(io)?;

    for s in splits {
        let id = s.client_id.to_string();
        let mut row = |split: &str, label: String, x: &[f64]| -> Result<()> {
            let mut rec = vec![id.clone(), split.to_string(), label];
            rec.extend(x.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(io)
        };
        for t in &s.train {
            row("train", t.label.to_string(), &t.features)?;
        }
        for x in &s.test_pool {
            row("test_pool", String::new(), x)?;
        }
        for t in &s.test_eval {
            row("test_eval", t.label.to_string(), &t.features)?;
        }
    }
    w.flush().map_err(|e| Error::Io(format!("csv flush failed: {e}")))
}
