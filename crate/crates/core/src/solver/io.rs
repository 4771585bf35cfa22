//! CSV export of fields and iteration histories.

use std::io::Write;

use super::{GridFunction, IterationRecord};
use crate::error::Result;

/// Long-format table with columns `x,t,u`, one row per node and level.
pub fn write_field_csv<W: Write>(field: &GridFunction, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "t", "u"])?;
    let g = &field.grid;
    for (k, &t) in g.times.iter().enumerate() {
        for (i, &x) in g.xs.iter().enumerate() {
            w.write_record([x.to_string(), t.to_string(), field.get(k, i).to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Columns `iteration,sup,weighted_l1,sup_change,max_decrease`.
pub fn write_history_csv<W: Write>(history: &[IterationRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in history {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
