//! Minimal CSV emission: UTF-8, header row, LF line endings, '.' decimal
//! point, floats at 17 significant digits so parsing them back is bitwise.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// A rectangular table of pre-rendered cells.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: Vec<S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, cells: Vec<String>) -> Result<()> {
        if cells.len() != self.columns.len() {
            return Err(Error::RaggedTable {
                row: self.rows.len(),
                expected: self.columns.len(),
                actual: cells.len(),
            });
        }
        self.rows.push(cells);
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }
}

/// Full-precision rendering: 17 significant digits round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `table` to `path` (UTF-8, LF endings, header first).
pub fn emit_csv(table: &Table, path: &Path) -> Result<()> {
    let wrap = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(wrap)?);
    w.write_all(table.columns.join(",").as_bytes())
        .map_err(wrap)?;
    w.write_all(b"\n").map_err(wrap)?;
    for row in &table.rows {
        w.write_all(row.join(",").as_bytes()).map_err(wrap)?;
        w.write_all(b"\n").map_err(wrap)?;
    }
    w.flush().map_err(wrap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn temp_path(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("maxsplit-csv-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn empty_table_emits_header_only() {
        let table = Table::new(vec!["t", "H"]);
        let path = temp_path("empty.csv");
        emit_csv(&table, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "t,H\n");
    }

    #[test]
    fn two_row_trace_is_three_lines() {
        let mut table = Table::new(vec!["t", "H"]);
        table.push_row(vec![fmt_f64(0.0), fmt_f64(0.75)]).unwrap();
        table
            .push_row(vec![fmt_f64(0.03125), fmt_f64(0.75)])
            .unwrap();
        let path = temp_path("trace.csv");
        emit_csv(&table, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.ends_with('\n'));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn ragged_rows_rejected() {
        let mut table = Table::new(vec!["a", "b", "c"]);
        assert!(table.push_row(vec!["1".into(), "2".into()]).is_err());
    }

    #[test]
    fn formatted_floats_parse_back_bitwise() {
        let mut rng = StdRng::seed_from_u64(1);
        let mut values: Vec<f64> = (0..200)
            .map(|_| rng.random_range(-1e3..1e3) * 10f64.powi(rng.random_range(-12..12)))
            .collect();
        values.extend([0.0, 0.75, 1.0 / 3.0, f64::MIN_POSITIVE, 1e-300]);
        for v in values {
            let parsed: f64 = fmt_f64(v).parse().unwrap();
            assert_eq!(parsed.to_bits(), v.to_bits(), "{v:e}");
        }
    }

    #[test]
    fn round_trip_of_emitted_file_is_bitwise() {
        let mut rng = StdRng::seed_from_u64(2);
        let values: Vec<(f64, f64)> = (0..50)
            .map(|_| (rng.random::<f64>(), rng.random_range(-1e9..1e9)))
            .collect();
        let mut table = Table::new(vec!["x", "y"]);
        for &(x, y) in &values {
            table.push_row(vec![fmt_f64(x), fmt_f64(y)]).unwrap();
        }
        let path = temp_path("roundtrip.csv");
        emit_csv(&table, &path).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        for (line, &(x, y)) in text.lines().skip(1).zip(&values) {
            let mut cells = line.split(',');
            let px: f64 = cells.next().unwrap().parse().unwrap();
            let py: f64 = cells.next().unwrap().parse().unwrap();
            assert_eq!(px.to_bits(), x.to_bits());
            assert_eq!(py.to_bits(), y.to_bits());
        }
    }
}
