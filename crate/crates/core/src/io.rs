//! CSV input and output.
//!
//! Data files hold one sample per row: the 0/1 label in column 0, then the
//! `p` feature values. Reals are written with 17 significant digits so a
//! save/load round trip is exact.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::data::{LabeledMatrix, Ranking};
use crate::error::{Error, Result};

/// Formats a real with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_error(path: &Path, line: usize, msg: String) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a labeled matrix. Line numbers in errors count from 1 and include
/// the header line.
pub fn load_csv(path: &Path, has_header: bool) -> Result<LabeledMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() < 2 {
            return Err(parse_error(
                path,
                line,
                "expected a label and at least one feature".into(),
            ));
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(parse_error(
                    path,
                    line,
                    format!("ragged row: {} fields, expected {w}", record.len()),
                ));
            }
            _ => {}
        }
        let label = match &record[0] {
            "0" => 0,
            "1" => 1,
            other => return Err(parse_error(path, line, format!("label {other:?} is not 0 or 1"))),
        };
        let values = record
            .iter()
            .skip(1)
            .enumerate()
            .map(|(j, field)| {
                field
                    .parse::<f64>()
                    .map_err(|_| parse_error(path, line, format!("column {}: cannot parse {field:?}", j + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        labels.push(label);
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(parse_error(path, 0, "no data rows".into()));
    }
    LabeledMatrix::from_rows(&rows, labels)
}

/// Writes `matrix` in the [`load_csv`] format, without a header.
pub fn save_csv(path: &Path, matrix: &LabeledMatrix) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for i in 0..matrix.n() {
        let mut fields = Vec::with_capacity(matrix.p() + 1);
        fields.push(matrix.labels()[i].to_string());
        fields.extend((0..matrix.p()).map(|j| fmt_real(matrix.get(i, j))));
        writer.write_record(&fields)?;
    }
    writer.flush()?;
    Ok(())
}

/// Per-feature scores in rank order:
/// `feature_index,rank,ell_hat,alpha_hat,beta_hat,s_hat` (rank from 1).
pub fn write_scores(out: &mut impl Write, ranking: &Ranking) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["feature_index", "rank", "ell_hat", "alpha_hat", "beta_hat", "s_hat"])?;
    for (k, s) in ranking.scores().iter().enumerate() {
        writer.write_record([
            s.feature_index.to_string(),
            (k + 1).to_string(),
            fmt_real(s.ell_hat),
            fmt_real(s.alpha_hat),
            fmt_real(s.beta_hat),
            fmt_real(s.s_hat),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Creates `path` and writes `contents` to it.
pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    File::create(path)?.write_all(contents.as_bytes())?;
    Ok(())
}
