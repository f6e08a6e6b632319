//! Data files: one value per line, or binned counts as `lower,upper,count`.

use std::fs;
use std::path::Path;

use chisqalt_core::binning::BinnedData;

use crate::CliError;

pub const BINNED_HEADER: [&str; 3] = ["lower", "upper", "count"];

#[derive(Debug, Clone, PartialEq)]
pub enum DataInput {
    Values(Vec<f64>),
    Binned(BinnedData),
}

/// Reads a data file, choosing the format from its first non-blank line: the
/// `lower,upper,count` header means binned counts, anything else raw values.
/// Blank lines and lines starting with `#` are skipped in value files.
pub fn read_data(path: &Path) -> Result<DataInput, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_data(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_data(text: &str) -> Result<DataInput, CliError> {
    let first = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'));
    let Some(first) = first else {
        return Err(CliError::Config("data file is empty".into()));
    };
    let header: Vec<String> = first.split(',').map(|f| f.trim().to_ascii_lowercase()).collect();
    if header == BINNED_HEADER {
        parse_binned(text).map(DataInput::Binned)
    } else {
        parse_values(text).map(DataInput::Values)
    }
}

fn parse_values(text: &str) -> Result<Vec<f64>, CliError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let x: f64 = line
            .parse()
            .map_err(|_| CliError::Config(format!("line {}: '{line}' is not a number", i + 1)))?;
        if !x.is_finite() {
            return Err(CliError::Config(format!("line {}: value {line} is not finite", i + 1)));
        }
        out.push(x);
    }
    if out.is_empty() {
        return Err(CliError::Config("data file holds no values".into()));
    }
    Ok(out)
}

fn parse_binned(text: &str) -> Result<BinnedData, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut edges: Vec<f64> = Vec::new();
    let mut counts = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Config(format!("binned data: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(CliError::Config(format!("line {line}: expected lower,upper,count")));
        }
        let num = |j: usize| -> Result<f64, CliError> {
            record[j]
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("line {line}: '{}' is not a number", &record[j])))
        };
        let (lower, upper) = (num(0)?, num(1)?);
        let count: u64 = record[2]
            .parse()
            .map_err(|_| CliError::Config(format!("line {line}: count '{}' is not a whole number", &record[2])))?;
        match edges.last() {
            None => edges.push(lower),
            Some(&prev) if prev != lower => {
                return Err(CliError::Config(format!(
                    "line {line}: bin starts at {lower} but the previous bin ends at {prev}"
                )))
            }
            _ => {}
        }
        edges.push(upper);
        counts.push(count);
    }
    if counts.is_empty() {
        return Err(CliError::Config("binned data file has no bins".into()));
    }
    BinnedData::new(edges, counts).map_err(|e| CliError::Config(format!("binned data: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values() {
        assert_eq!(parse_data("1.0\n2.5\n").unwrap(), DataInput::Values(vec![1.0, 2.5]));
        assert_eq!(parse_data("# x\n\n 3\n").unwrap(), DataInput::Values(vec![3.0]));
    }

    #[test]
    fn bad_value_names_its_line() {
        let e = parse_data("1\n2\nabc\n").unwrap_err().to_string();
        assert!(e.contains("line 3"), "{e}");
        assert!(parse_data("").is_err());
        assert!(parse_data("\n# only a comment\n").is_err());
    }

    #[test]
    fn binned() {
        let d = parse_data("lower,upper,count\n0,0.5,3\n0.5,1,7\n").unwrap();
        let DataInput::Binned(b) = d else { panic!("expected bins") };
        assert_eq!(b.edges(), &[0.0, 0.5, 1.0]);
        assert_eq!(b.counts(), &[3, 7]);
        let e = parse_data("lower,upper,count\n0,0.5,3\n0.6,1,7\n").unwrap_err().to_string();
        assert!(e.contains("line 3"), "{e}");
        let e = parse_data("lower,upper,count\n0,0.5,x\n").unwrap_err().to_string();
        assert!(e.contains("line 2"), "{e}");
        assert!(parse_data("lower,upper,count\n").is_err());
    }
}
