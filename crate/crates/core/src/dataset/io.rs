//! Text formats for labeled datasets.
//!
//! `dense-csv`: header `g,s,y,x0,...,x{d-1}` (the `y` column may be omitted),
//! one row per line, unknown `y` written as `?`.
//!
//! `sparse-pu`: first line `#sparse d=<dims>`, then one row per line as
//! `<g> <s> <y|?> <i>:<v> ...` with strictly ascending indices.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use super::{FeatureMatrix, LabeledDataset, SparseBuilder};
use crate::error::{PurpleError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    DenseCsv,
    SparsePu,
}

impl DataFormat {
    /// `.csv` files are dense; anything else is sparse-pu.
    pub fn from_path(path: &Path) -> DataFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => DataFormat::DenseCsv,
            _ => DataFormat::SparsePu,
        }
    }
}

impl FromStr for DataFormat {
    type Err = PurpleError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense-csv" | "csv" => Ok(DataFormat::DenseCsv),
            "sparse-pu" | "sparse" => Ok(DataFormat::SparsePu),
            other => Err(PurpleError::InvalidInput(format!("unknown data format `{other}`"))),
        }
    }
}

pub fn load_dataset(path: &Path, format: DataFormat) -> Result<LabeledDataset> {
    let text = fs::read_to_string(path).map_err(|e| PurpleError::io(path, e))?;
    match format {
        DataFormat::DenseCsv => parse_dense_csv(&text),
        DataFormat::SparsePu => parse_sparse_pu(&text),
    }
}

pub fn write_dataset(data: &LabeledDataset, path: &Path, format: DataFormat) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| PurpleError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let res = match format {
        DataFormat::DenseCsv => write_dense_csv(data, &mut out),
        DataFormat::SparsePu => write_sparse_pu(data, &mut out),
    };
    res.and_then(|_| out.flush()).map_err(|e| PurpleError::io(path, e))
}

fn parse_binary(tok: &str, what: &str, line: usize) -> Result<bool> {
    match tok {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(PurpleError::parse(line, format!("{what} must be 0 or 1, got `{tok}`"))),
    }
}

fn parse_maybe_binary(tok: &str, line: usize) -> Result<Option<bool>> {
    if tok == "?" {
        Ok(None)
    } else {
        parse_binary(tok, "y", line).map(Some)
    }
}

struct Columns {
    groups: Vec<String>,
    s: Vec<bool>,
    y: Vec<Option<bool>>,
    y_lines: Vec<usize>,
}

impl Columns {
    fn new() -> Self {
        Columns {
            groups: Vec::new(),
            s: Vec::new(),
            y: Vec::new(),
            y_lines: Vec::new(),
        }
    }

    fn finish(self, features: FeatureMatrix) -> Result<LabeledDataset> {
        let known = self.y.iter().filter(|v| v.is_some()).count();
        let y = if known == 0 {
            None
        } else if known == self.y.len() {
            Some(self.y.iter().map(|v| v.unwrap()).collect::<Vec<_>>())
        } else {
            let k = self.y.iter().position(|v| v.is_none()).unwrap();
            return Err(PurpleError::parse(
                self.y_lines[k],
                "y is unknown on this row but known on others",
            ));
        };
        if let Some(y) = &y {
            if let Some(k) = (0..y.len()).find(|&k| self.s[k] && !y[k]) {
                return Err(PurpleError::parse(
                    self.y_lines[k],
                    "s=1 with y=0 violates no-false-positives",
                ));
            }
        }
        LabeledDataset::from_named_groups(features, &self.groups, self.s, y, None)
    }
}

fn parse_dense_csv(text: &str) -> Result<LabeledDataset> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| PurpleError::parse(1, "empty file"))?;
    let cols: Vec<&str> = header.trim_end_matches('\r').split(',').map(str::trim).collect();
    if cols.len() < 2 || cols[0] != "g" || cols[1] != "s" {
        return Err(PurpleError::parse(1, "header must start with `g,s`"));
    }
    let has_y = cols.get(2) == Some(&"y");
    let first_x = if has_y { 3 } else { 2 };
    for (k, c) in cols[first_x..].iter().enumerate() {
        if *c != format!("x{k}") {
            return Err(PurpleError::parse(1, format!("expected column `x{k}`, got `{c}`")));
        }
    }
    let n_dims = cols.len() - first_x;
    let mut columns = Columns::new();
    let mut values = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let raw = raw.trim_end_matches('\r');
        if raw.trim().is_empty() {
            continue;
        }
        let toks: Vec<&str> = raw.split(',').map(str::trim).collect();
        if toks.len() != cols.len() {
            return Err(PurpleError::parse(
                line_no,
                format!("expected {} fields, got {}", cols.len(), toks.len()),
            ));
        }
        columns.groups.push(toks[0].to_string());
        columns.s.push(parse_binary(toks[1], "s", line_no)?);
        columns.y.push(if has_y { parse_maybe_binary(toks[2], line_no)? } else { None });
        columns.y_lines.push(line_no);
        for t in &toks[first_x..] {
            let v: f64 = t
                .parse()
                .map_err(|_| PurpleError::parse(line_no, format!("bad feature value `{t}`")))?;
            values.push(v);
        }
    }
    let n = columns.s.len();
    let features = FeatureMatrix::dense(n, n_dims, values)?;
    columns.finish(features)
}

fn parse_sparse_pu(text: &str) -> Result<LabeledDataset> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| PurpleError::parse(1, "empty file"))?;
    let n_dims: usize = header
        .trim()
        .strip_prefix("#sparse d=")
        .and_then(|d| d.trim().parse().ok())
        .ok_or_else(|| PurpleError::parse(1, "header must be `#sparse d=<dims>`"))?;
    let mut columns = Columns::new();
    let mut builder = SparseBuilder::new(n_dims);
    let mut entries = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let raw = raw.trim_end_matches('\r');
        if raw.trim().is_empty() {
            continue;
        }
        let mut toks = raw.split(' ').filter(|t| !t.is_empty());
        let (g, s, y) = match (toks.next(), toks.next(), toks.next()) {
            (Some(g), Some(s), Some(y)) => (g, s, y),
            _ => return Err(PurpleError::parse(line_no, "expected `<g> <s> <y|?>` prefix")),
        };
        columns.groups.push(g.to_string());
        columns.s.push(parse_binary(s, "s", line_no)?);
        columns.y.push(parse_maybe_binary(y, line_no)?);
        columns.y_lines.push(line_no);
        entries.clear();
        for t in toks {
            let (i, v) = t
                .split_once(':')
                .ok_or_else(|| PurpleError::parse(line_no, format!("bad entry `{t}`")))?;
            let i: usize = i
                .parse()
                .map_err(|_| PurpleError::parse(line_no, format!("bad index `{i}`")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| PurpleError::parse(line_no, format!("bad value `{v}`")))?;
            entries.push((i, v));
        }
        builder
            .push_row(&entries)
            .map_err(|e| PurpleError::parse(line_no, e.to_string()))?;
    }
    columns.finish(builder.finish())
}

fn y_token(data: &LabeledDataset, i: usize) -> &'static str {
    match data.y() {
        Some(y) if y[i] => "1",
        Some(_) => "0",
        None => "?",
    }
}

fn write_dense_csv(data: &LabeledDataset, out: &mut impl Write) -> std::io::Result<()> {
    write!(out, "g,s,y")?;
    for k in 0..data.n_dims() {
        write!(out, ",x{k}")?;
    }
    writeln!(out)?;
    for i in 0..data.len() {
        write!(
            out,
            "{},{},{}",
            data.group_name(data.groups()[i]),
            data.s()[i] as u8,
            y_token(data, i)
        )?;
        for v in data.features().row(i).to_dense(data.n_dims()) {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

fn write_sparse_pu(data: &LabeledDataset, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "#sparse d={}", data.n_dims())?;
    for i in 0..data.len() {
        write!(
            out,
            "{} {} {}",
            data.group_name(data.groups()[i]),
            data.s()[i] as u8,
            y_token(data, i)
        )?;
        let mut err = Ok(());
        data.features().row(i).for_each_nonzero(|j, v| {
            if err.is_ok() {
                err = write!(out, " {j}:{v}");
            }
        });
        err?;
        writeln!(out)?;
    }
    Ok(())
}
