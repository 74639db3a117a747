use std::sync::Arc;

use crate::data::{ColumnSchema, Dataset};
use crate::error::{Error, Result};

/// Replaces every categorical non-label column with its smoothed in-category
/// label mean, estimated on `train`:
///
/// `enc(c) = (n_c * m_c + smoothing * g) / (n_c + smoothing)`
///
/// where `g` is the global training label mean. Categories never seen in
/// `train` encode to `g`.
pub fn target_encode(train: &Dataset, apply_to: &Dataset, smoothing: f64) -> Result<Dataset> {
    if !(smoothing > 0.0) || !smoothing.is_finite() {
        return Err(Error::config(format!("smoothing must be positive, got {smoothing}")));
    }
    if train.schema() != apply_to.schema() {
        return Err(Error::schema("target_encode requires identical schemas"));
    }
    if train.is_empty() {
        return Err(Error::data("cannot compute encoding statistics from an empty train set"));
    }
    let schema = train.schema();
    let label = schema.label_index();
    let labels = train.labels();
    let global = labels.iter().map(|&y| y as f64).sum::<f64>() / labels.len() as f64;

    let mut tables: Vec<Option<Vec<f64>>> = vec![None; schema.n_cols()];
    for (j, col) in schema.columns().iter().enumerate() {
        if j == label || !col.is_categorical() {
            continue;
        }
        let k = col.n_categories();
        let mut count = vec![0.0; k];
        let mut pos = vec![0.0; k];
        for (row, &y) in train.rows().zip(&labels) {
            let c = row[j] as usize;
            count[c] += 1.0;
            pos[c] += y as f64;
        }
        // n_c * m_c is just the positive count
        let table = count
            .iter()
            .zip(&pos)
            .map(|(&n_c, &p_c)| (p_c + smoothing * global) / (n_c + smoothing))
            .collect();
        tables[j] = Some(table);
    }

    let columns: Vec<ColumnSchema> = schema
        .columns()
        .iter()
        .enumerate()
        .map(|(j, c)| match tables[j] {
            Some(_) => ColumnSchema::continuous(c.name.clone()),
            None => c.clone(),
        })
        .collect();
    let out_schema = Arc::new(schema.with_columns(columns)?);
    let cells = apply_to
        .rows()
        .flat_map(|row| {
            row.iter()
                .enumerate()
                .map(|(j, &v)| match &tables[j] {
                    Some(t) => t[v as usize],
                    None => v,
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(Dataset::from_cells_unchecked(out_schema, cells))
}
