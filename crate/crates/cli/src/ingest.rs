//! CSV ingestion and series transforms.
//!
//! Comma delimiter, `.` decimal, optional header (auto-detected). Errors
//! name 1-based file rows.

use std::path::Path;

use crate::CliError;

/// Column selector: a 0-based index or a header name.
#[derive(Debug, Clone)]
pub enum Column {
    Index(usize),
    Name(String),
}

impl Column {
    pub fn parse(spec: &str) -> Column {
        match spec.parse::<usize>() {
            Ok(idx) => Column::Index(idx),
            Err(_) => Column::Name(spec.to_string()),
        }
    }
}

/// An ingested series plus the 1-based file row of its first value, so
/// downstream errors can point back at the file.
pub struct Ingested {
    pub series: Vec<f64>,
    pub first_row: usize,
}

pub fn read_series(path: &Path, column: &Column) -> Result<Ingested, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::io(format!("cannot open {}: {e}", path.display())))?;

    let mut rows: Vec<csv::StringRecord> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| CliError::parse(format!("row {}: {e}", i + 1)))?;
        rows.push(record);
    }
    if rows.is_empty() {
        return Err(CliError::parse(format!("{} is empty", path.display())));
    }

    let (index, first_data) = match column {
        Column::Index(idx) => {
            // a non-numeric first cell in the selected column means a header
            let has_header = rows[0]
                .get(*idx)
                .map(|cell| cell.parse::<f64>().is_err())
                .unwrap_or(false);
            (*idx, usize::from(has_header))
        }
        Column::Name(name) => {
            let position = rows[0].iter().position(|cell| cell == name);
            match position {
                Some(idx) => (idx, 1),
                None => {
                    return Err(CliError::parse(format!(
                        "no column named {name:?} in the header row of {}",
                        path.display()
                    )))
                }
            }
        }
    };

    let mut series = Vec::with_capacity(rows.len() - first_data);
    for (offset, record) in rows.iter().enumerate().skip(first_data) {
        let row = offset + 1; // 1-based file rows
        let cell = record.get(index).ok_or_else(|| {
            CliError::parse(format!("row {row}: no column {index}"))
        })?;
        if cell.is_empty() {
            return Err(CliError::parse(format!("row {row}: empty cell")));
        }
        let value: f64 = cell.parse().map_err(|_| {
            CliError::parse(format!("row {row}: {cell:?} is not numeric"))
        })?;
        series.push(value);
    }
    if series.is_empty() {
        return Err(CliError::parse(format!(
            "no data rows in column {index} of {}",
            path.display()
        )));
    }
    Ok(Ingested {
        series,
        first_row: first_data + 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[clap(rename_all = "lowercase")]
pub enum TransformKind {
    None,
    Diff,
    LogDiff,
}

impl TransformKind {
    pub fn name(&self) -> &'static str {
        match self {
            TransformKind::None => "none",
            TransformKind::Diff => "diff",
            TransformKind::LogDiff => "logdiff",
        }
    }
}

/// Apply the configured transform. `first_row` is the file row of
/// `series[0]`, used in error messages.
pub fn transform(
    series: &[f64],
    kind: TransformKind,
    first_row: usize,
) -> Result<Vec<f64>, CliError> {
    match kind {
        TransformKind::None => Ok(series.to_vec()),
        TransformKind::Diff => {
            if series.len() < 2 {
                return Err(CliError::parse(
                    "diff needs at least two samples".into(),
                ));
            }
            Ok(series.windows(2).map(|w| w[1] - w[0]).collect())
        }
        TransformKind::LogDiff => {
            if series.len() < 2 {
                return Err(CliError::parse(
                    "logdiff needs at least two samples".into(),
                ));
            }
            for (i, &x) in series.iter().enumerate() {
                if x <= 0.0 {
                    return Err(CliError::parse(format!(
                        "logdiff requires positive values; row {} holds {x}",
                        first_row + i
                    )));
                }
            }
            Ok(series.windows(2).map(|w| w[1].ln() - w[0].ln()).collect())
        }
    }
}

/// Map a forecast on the transformed scale back to the level scale, given
/// the last observed level.
pub fn invert_step(kind: TransformKind, last_level: f64, forecast: f64) -> f64 {
    match kind {
        TransformKind::None => forecast,
        TransformKind::Diff => last_level + forecast,
        TransformKind::LogDiff => last_level * forecast.exp(),
    }
}
