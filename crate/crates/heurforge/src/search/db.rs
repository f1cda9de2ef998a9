//! Append-only JSON-lines store for candidate records.

use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{CandidateRecord, SearchError};

/// Append one record as a single JSON line.
pub fn db_append(path: &Path, record: &CandidateRecord) -> Result<(), SearchError> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    let line = serde_json::to_string(record).expect("record serializes");
    writeln!(f, "{line}")?;
    Ok(())
}

/// Load all records. A trailing partial line (crash mid-append) is dropped
/// and reported in the second return value; a malformed line anywhere else
/// is an error.
pub fn db_load(path: &Path) -> Result<(Vec<CandidateRecord>, Option<String>), SearchError> {
    let f = std::fs::File::open(path)?;
    let reader = BufReader::new(f);
    let lines: Vec<String> = reader.lines().collect::<Result<_, _>>()?;
    let mut records = Vec::with_capacity(lines.len());
    let mut warning = None;
    let last = lines.len().saturating_sub(1);
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<CandidateRecord>(line) {
            Ok(r) => records.push(r),
            Err(e) if i == last => {
                warning = Some(format!("dropped truncated final record: {e}"));
            }
            Err(e) => {
                return Err(SearchError::Db(format!("corrupt record at line {}: {e}", i + 1)));
            }
        }
    }
    Ok((records, warning))
}

/// Atomically replace the file contents with exactly these records, used
/// when resuming discards a truncated or incomplete tail.
pub fn db_rewrite(path: &Path, records: &[CandidateRecord]) -> Result<(), SearchError> {
    let mut buf = String::new();
    for r in records {
        buf.push_str(&serde_json::to_string(r).expect("record serializes"));
        buf.push('\n');
    }
    std::fs::write(path, buf)?;
    Ok(())
}
