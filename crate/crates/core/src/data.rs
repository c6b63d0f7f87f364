//! Reading observations from text files.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Reads observations from `path`.
///
/// Without `column` the file holds one value per line; blank lines and lines
/// starting with `#` are skipped. With `column` the file is a headed CSV and
/// the column is picked by name, or by 0-based position if no header matches.
pub fn read_sample(path: &Path, column: Option<&str>) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let shown = path.display().to_string();
    let bad = |line: usize, msg: String| Error::Parse {
        path: shown.clone(),
        line,
        msg,
    };
    let values = match column {
        None => {
            let mut out = Vec::new();
            for (i, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                out.push(parse_value(line).map_err(|m| bad(i + 1, m))?);
            }
            out
        }
        Some(col) => {
            let mut reader = csv::ReaderBuilder::new()
                .trim(csv::Trim::All)
                .comment(Some(b'#'))
                .from_reader(text.as_bytes());
            let headers = reader.headers()?.clone();
            let idx = match headers.iter().position(|h| h == col) {
                Some(i) => i,
                None => col
                    .parse::<usize>()
                    .ok()
                    .filter(|&i| i < headers.len())
                    .ok_or_else(|| bad(1, format!("no column named or numbered '{col}'")))?,
            };
            let mut out = Vec::new();
            for record in reader.records() {
                let record = record?;
                let line = record.position().map_or(0, |p| p.line() as usize);
                let field = record
                    .get(idx)
                    .ok_or_else(|| bad(line, format!("row has no column {idx}")))?;
                if field.is_empty() {
                    continue;
                }
                out.push(parse_value(field).map_err(|m| bad(line, m))?);
            }
            out
        }
    };
    if values.is_empty() {
        return Err(bad(0, "no observations found".into()));
    }
    Ok(values)
}

fn parse_value(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(format!("non-finite value '{s}'")),
        Err(_) => Err(format!("cannot parse '{s}' as a number")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        fs::write(f.path(), contents).unwrap();
        f
    }

    #[test]
    fn plain_lines() {
        let f = file("# header\n1.5\n\n-2\n3e-1\n");
        assert_eq!(read_sample(f.path(), None).unwrap(), vec![1.5, -2.0, 0.3]);
    }

    #[test]
    fn reports_bad_line() {
        let f = file("1\n2\nabc\n");
        match read_sample(f.path(), None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let f = file("1\nNaN\n");
        assert!(read_sample(f.path(), None).is_err());
        let f = file("\n# nothing\n");
        assert!(read_sample(f.path(), None).is_err());
    }

    #[test]
    fn csv_columns() {
        let f = file("id,x,y\n1,0.5,9\n2,-1.25,8\n");
        assert_eq!(read_sample(f.path(), Some("x")).unwrap(), vec![0.5, -1.25]);
        assert_eq!(read_sample(f.path(), Some("2")).unwrap(), vec![9.0, 8.0]);
        assert!(read_sample(f.path(), Some("z")).is_err());
        let f = file("x\n1\nfoo\n");
        match read_sample(f.path(), Some("x")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
