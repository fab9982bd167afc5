use std::fmt::Write;

use super::eval::{ConfusionMatrix, EvalReport, Protocol, CLASSES};
use super::HarnessError;
use crate::codec::ClassLabel;

fn class_names() -> impl Iterator<Item = &'static str> {
    ClassLabel::ALL.into_iter().map(ClassLabel::name)
}

/// Confusion matrix as CSV: a header row, then one row per true class.
pub fn confusion_csv(m: &ConfusionMatrix) -> String {
    let mut out = String::from("truth");
    for name in class_names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (name, row) in class_names().zip(&m.0) {
        out.push_str(name);
        for v in row {
            write!(out, ",{v}").expect("writing to a string");
        }
        out.push('\n');
    }
    out
}

pub fn parse_confusion_csv(text: &str) -> Result<ConfusionMatrix, HarnessError> {
    let bad = |m: String| HarnessError::Report(m);
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| bad("empty CSV".into()))?;
    let expected: Vec<&str> = std::iter::once("truth").chain(class_names()).collect();
    if header.split(',').map(str::trim).collect::<Vec<_>>() != expected {
        return Err(bad(format!("header must be {}", expected.join(","))));
    }
    let mut m = ConfusionMatrix::default();
    for (i, name) in class_names().enumerate() {
        let line = lines.next().ok_or_else(|| bad(format!("missing row {name}")))?;
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != CLASSES + 1 || cells[0] != name {
            return Err(bad(format!("row {} must start with {name} and have {} cells", i + 2, CLASSES + 1)));
        }
        for (j, cell) in cells[1..].iter().enumerate() {
            m.0[i][j] = cell.parse().map_err(|_| bad(format!("row {name}: bad count {cell:?}")))?;
        }
    }
    if let Some(extra) = lines.next() {
        return Err(bad(format!("unexpected trailing row {extra:?}")));
    }
    Ok(m)
}

/// Human-readable summary with the protocol's confusion matrix.
pub fn render_report(r: &EvalReport) -> String {
    let mut out = String::new();
    let protocol = match r.protocol {
        Protocol::Chunk => "chunk",
        Protocol::Track => "track",
    };
    let m = r.confusion();
    writeln!(out, "protocol        {protocol}").unwrap();
    writeln!(out, "chunk accuracy  {:.4}  ({} chunks)", r.chunk_accuracy, r.chunks).unwrap();
    writeln!(out, "track accuracy  {:.4}  ({} tracks)", r.track_accuracy, r.tracks).unwrap();
    writeln!(out, "dropped chunks  {}", r.dropped_chunks).unwrap();
    writeln!(out, "tie-broken      {}", r.tied_tracks).unwrap();
    writeln!(out).unwrap();
    write!(out, "{:<12}", "truth\\pred").unwrap();
    for name in class_names() {
        write!(out, "{name:>12}").unwrap();
    }
    writeln!(out, "{:>10}", "recall").unwrap();
    for (c, name) in class_names().enumerate() {
        write!(out, "{name:<12}").unwrap();
        for v in &m.0[c] {
            write!(out, "{v:>12}").unwrap();
        }
        match r.per_class_recall[c] {
            Some(v) => writeln!(out, "{v:>10.4}").unwrap(),
            None => writeln!(out, "{:>10}", "-").unwrap(),
        }
    }
    out
}
