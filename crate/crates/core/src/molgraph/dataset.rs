//! One-SMILES-per-line dataset files. `#` comments and blank lines are
//! skipped; anything after the first whitespace on a line is a title.

use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{parse_smiles, MolecularGraph, SmilesError};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetLine {
    /// 1-based line number in the source text.
    pub line: usize,
    pub smiles: String,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: SmilesError,
    },
}

/// Non-comment, non-blank entries of a dataset text.
pub fn dataset_lines(text: &str) -> Vec<DatasetLine> {
    text.lines()
        .enumerate()
        .filter_map(|(i, raw)| {
            let t = raw.trim();
            if t.is_empty() || t.starts_with('#') {
                return None;
            }
            let smiles = t.split_whitespace().next().unwrap_or("").to_string();
            Some(DatasetLine { line: i + 1, smiles })
        })
        .collect()
}

/// Parses every entry; the first failure aborts with its line number.
pub fn parse_dataset(text: &str) -> Result<Vec<MolecularGraph>, DatasetError> {
    dataset_lines(text)
        .into_iter()
        .map(|l| parse_smiles(&l.smiles).map_err(|source| DatasetError::Parse { line: l.line, source }))
        .collect()
}

pub fn read_dataset(path: &Path) -> Result<Vec<MolecularGraph>, DatasetError> {
    let text = read_text(path)?;
    parse_dataset(&text)
}

pub fn read_text(path: &Path) -> Result<String, DatasetError> {
    std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skips_comments_and_blanks() {
        let text = "# header\n\nCCO ethanol\n  \nc1ccccc1\n";
        let lines = dataset_lines(text);
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], DatasetLine { line: 3, smiles: "CCO".into() });
        assert_eq!(lines[1].line, 5);
        assert_eq!(parse_dataset(text).unwrap().len(), 2);
    }

    #[test]
    fn reports_line_of_failure() {
        match parse_dataset("C\nC(\n") {
            Err(DatasetError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
