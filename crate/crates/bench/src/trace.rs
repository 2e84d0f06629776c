//! CSV traces and the metadata sidecar.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const CSV_HEADER: &str = "rep,stage,oracle_calls,wall_ms,objective,stationarity";

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub rep: usize,
    pub stage: usize,
    pub oracle_calls: u64,
    pub wall_ms: f64,
    pub objective: Option<f64>,
    pub stationarity: Option<f64>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Header plus one line per row; missing values are empty fields.
pub fn to_csv(rows: &[Row]) -> String {
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{:.3},{},{}",
            r.rep,
            r.stage,
            r.oracle_calls,
            r.wall_ms,
            opt(r.objective),
            opt(r.stationarity)
        );
    }
    s
}

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("line {0}: {1}")]
    Parse(usize, String),
    #[error("unexpected header `{0}`")]
    Header(String),
}

/// Reads back a trace written by [`to_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<Row>, CsvError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => return Err(CsvError::Header(other.unwrap_or("").into())),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let bad = |m: &str| CsvError::Parse(i + 2, m.to_string());
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad("expected 6 fields"));
        }
        let num = |s: &str| -> Result<Option<f64>, CsvError> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(s))
            }
        };
        rows.push(Row {
            rep: f[0].parse().map_err(|_| bad(f[0]))?,
            stage: f[1].parse().map_err(|_| bad(f[1]))?,
            oracle_calls: f[2].parse().map_err(|_| bad(f[2]))?,
            wall_ms: f[3].parse().map_err(|_| bad(f[3]))?,
            objective: num(f[4])?,
            stationarity: num(f[5])?,
        });
    }
    Ok(rows)
}

/// `<out>.meta.txt`
pub fn meta_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.txt");
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_missing_fields() {
        let rows = vec![
            Row { rep: 0, stage: 0, oracle_calls: 0, wall_ms: 0.0, objective: Some(1.5), stationarity: None },
            Row { rep: 1, stage: 3, oracle_calls: 129, wall_ms: 2.25, objective: None, stationarity: Some(1e-3) },
        ];
        let text = to_csv(&rows);
        assert!(text.starts_with("rep,stage,oracle_calls,wall_ms,objective,stationarity\n"));
        assert!(text.contains("\n0,0,0,0.000,1.5,\n"));
        assert_eq!(parse_csv(&text).unwrap(), rows);
    }

    #[test]
    fn meta_path_appends_suffix() {
        assert_eq!(meta_path(Path::new("/tmp/run.csv")), PathBuf::from("/tmp/run.csv.meta.txt"));
    }
}
