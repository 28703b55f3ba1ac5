//! Output files. Every file is written to a temporary sibling and renamed into
//! place, so a failed run never leaves a partial file behind.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticePoint, QuotientPath};

/// Provenance carried by every output.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub config_hash: String,
    pub master_seed: u64,
}

impl Header {
    /// `# key = value` comment lines for text formats.
    pub fn comment_lines(&self) -> String {
        format!("# config_hash = {}\n# master_seed = {}\n", self.config_hash, self.master_seed)
    }
}

pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    header: &'a Header,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty JSON object with a `header` field followed by the fields of `body`.
pub fn json_document<T: Serialize>(header: &Header, body: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Document { header, body })?;
    s.push('\n');
    Ok(s)
}

/// CSV with columns `x1, ..., xd, value`, preceded by header comment lines.
pub fn csv_field(header: &Header, dim: usize, rows: impl IntoIterator<Item = (LatticePoint, f64)>) -> String {
    let mut s = header.comment_lines();
    let cols: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    s.push_str(&cols.join(","));
    s.push_str(",value\n");
    for (p, v) in rows {
        for c in p.coords() {
            let _ = write!(s, "{c},");
        }
        let _ = writeln!(s, "{v}");
    }
    s
}

/// Parses a file written by [`csv_field`]; comment lines are skipped.
pub fn read_csv_field(text: &str) -> Result<Vec<(LatticePoint, f64)>> {
    let mut rows = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let bad = || Error::config("csv", format!("malformed row {line:?}"));
        let (value, coords) = fields.split_last().ok_or_else(bad)?;
        let coords = coords.iter().map(|c| c.trim().parse::<i32>()).collect::<std::result::Result<Vec<_>, _>>().map_err(|_| bad())?;
        rows.push((LatticePoint::new(&coords), value.trim().parse::<f64>().map_err(|_| bad())?));
    }
    Ok(rows)
}

/// One line `t x1 ... xd` per stored time; a `# gap` line marks each unstored excursion.
pub fn path_dump(header: &Header, stream: &str, policy: &str, q: &QuotientPath) -> String {
    let seg = q.segment();
    let mut s = header.comment_lines();
    let _ = writeln!(s, "# streams = {stream}");
    let _ = writeln!(s, "# policy = {policy}");
    let _ = writeln!(s, "# past_end = {:?}", seg.past_end());
    let _ = writeln!(s, "# future_end = {:?}", seg.future_end());
    let mut gaps = seg.gaps().iter().peekable();
    for (i, p) in seg.points().iter().enumerate() {
        if gaps.peek() == Some(&&i) {
            gaps.next();
            s.push_str("# gap\n");
        }
        let _ = write!(s, "{}", seg.time_of(i));
        for c in p.coords() {
            let _ = write!(s, " {c}");
        }
        s.push('\n');
    }
    s
}
