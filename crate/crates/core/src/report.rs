//! Bit-stable output: JSON with 17 significant digits and `#`-annotated CSV.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};

/// Fixed scientific format with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Pretty JSON formatter that writes every float through [`fmt_f64`].
struct FixedFloat<'a> {
    inner: PrettyFormatter<'a>,
}

impl Formatter for FixedFloat<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

/// Serializes with sorted keys and fixed float formatting.
///
/// Going through `serde_json::Value` sorts object keys (BTreeMap backing),
/// so output depends only on the data.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let tree = serde_json::to_value(value)?;
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(
        &mut buf,
        FixedFloat {
            inner: PrettyFormatter::with_indent(b"  "),
        },
    );
    tree.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Single-line variant for embedding.
pub fn to_json_compact<T: Serialize>(value: &T) -> Result<String> {
    let tree = serde_json::to_value(value)?;
    let mut buf = Vec::new();
    struct Compact;
    impl Formatter for Compact {
        fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
            writer.write_all(fmt_f64(value).as_bytes())
        }
    }
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Compact);
    tree.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json_string(value)?)?;
    Ok(())
}

/// CSV with `# key: value` metadata lines above a header row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    pub metadata: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            metadata: Vec::new(),
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.metadata.push((key.into(), value.to_string()));
        self
    }

    pub fn push_numbers(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row.iter().map(|&x| fmt_f64(x)).collect());
    }

    pub fn push_strings(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Column by name, parsed as floats.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("CSV has no column {name:?}")))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| parse_number(&row[idx], i))
            .collect()
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::parse(io::BufReader::new(file))
    }

    pub fn parse(reader: impl BufRead) -> Result<Self> {
        let mut table = CsvTable::default();
        let mut have_header = false;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let (k, v) = rest.split_once(':').ok_or_else(|| Error::Parse {
                    line: lineno + 1,
                    column: 1,
                    message: "metadata line needs `# key: value`".into(),
                })?;
                table.metadata.push((k.trim().to_string(), v.trim().to_string()));
                continue;
            }
            let cells: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
            if !have_header {
                table.header = cells;
                have_header = true;
            } else {
                if cells.len() != table.header.len() {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        column: 1,
                        message: format!(
                            "row has {} fields, header has {}",
                            cells.len(),
                            table.header.len()
                        ),
                    });
                }
                table.rows.push(cells);
            }
        }
        if !have_header {
            return Err(Error::Parse {
                line: 0,
                column: 0,
                message: "CSV has no header row".into(),
            });
        }
        Ok(table)
    }

    pub fn metadata_map(&self) -> BTreeMap<String, String> {
        self.metadata.iter().cloned().collect()
    }
}

fn parse_number(s: &str, row: usize) -> Result<f64> {
    match s {
        "nan" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s.parse().map_err(|_| Error::Parse {
            line: row + 1,
            column: 0,
            message: format!("not a number: {s:?}"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Sample {
        zeta: f64,
        alpha: Vec<f64>,
        label: &'static str,
        none: Option<f64>,
    }

    #[test]
    fn json_is_sorted_and_fixed_precision() {
        let s = Sample {
            zeta: 0.1,
            alpha: vec![1.0, -2.5e-300, f64::INFINITY],
            label: "x",
            none: None,
        };
        let out = to_json_string(&s).unwrap();
        assert!(out.find("\"alpha\"").unwrap() < out.find("\"zeta\"").unwrap());
        assert!(out.contains("1.0000000000000001e-1"));
        assert!(out.contains("1.0000000000000000e0"));
        assert!(out.contains("-2.5000000000000000e-300"));
        assert!(out.contains("null"));
        // Every printed float round-trips exactly.
        let back: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(back["zeta"].as_f64().unwrap(), 0.1);
        assert_eq!(to_json_compact(&s).unwrap().lines().count(), 1);
    }

    #[test]
    fn csv_round_trip() {
        let mut t = CsvTable::new(["r", "u"]);
        t.meta("n", 3).meta("t", fmt_f64(0.5));
        t.push_numbers(&[0.25, 1.0 / 3.0]);
        t.push_numbers(&[0.75, 2.0]);
        let text = t.render();
        assert!(text.starts_with("# n: 3\n# t: 5.0000000000000000e-1\nr,u\n"));
        let back = CsvTable::parse(text.as_bytes()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.column("u").unwrap()[0], 1.0 / 3.0);
        assert!(back.column("v").is_err());
    }

    #[test]
    fn ragged_csv_is_rejected() {
        let err = CsvTable::parse("a,b\n1,2\n3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }
}
