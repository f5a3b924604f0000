//! Delimited text formats: expression matrices, group labels and per-gene
//! result tables.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;
use crate::onesample::{GeneTestResult, TestStatus};

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn read_err(e: std::io::Error) -> Error {
    Error::Io {
        path: "<input>".into(),
        source: e,
    }
}

/// Tab if the line contains one, else comma if it contains one, else tab.
fn detect_delimiter(header: &str) -> char {
    if header.contains('\t') {
        '\t'
    } else if header.contains(',') {
        ','
    } else {
        '\t'
    }
}

/// Non-blank lines with their 1-based line numbers.
fn content_lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    reader
        .lines()
        .enumerate()
        .filter_map(|(i, line)| match line {
            Ok(l) if l.trim().is_empty() => None,
            Ok(l) => Some(Ok((i + 1, l.trim_end_matches('\r').to_string()))),
            Err(e) => Some(Err(read_err(e))),
        })
}

fn parse_cell(cell: &str, line: usize, column: usize) -> Result<f64> {
    let v: f64 = cell
        .trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("column {column}: `{cell}` is not a number")))?;
    if !v.is_finite() {
        return Err(Error::parse(
            line,
            format!("column {column}: non-finite value `{cell}`"),
        ));
    }
    Ok(v)
}

/// Reads a genes × arrays matrix. The header row holds a corner label and the
/// array ids; each following row holds a gene id and one value per array.
pub fn read_matrix<R: BufRead>(reader: R) -> Result<DataMatrix> {
    let mut lines = content_lines(reader);
    let (header_line, header) = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::parse(1, "empty matrix file"))?;
    let delim = detect_delimiter(&header);
    let array_ids: Vec<String> = header
        .split(delim)
        .skip(1)
        .map(|s| s.trim().to_string())
        .collect();
    if array_ids.is_empty() {
        return Err(Error::parse(header_line, "header has no array columns"));
    }

    let mut gene_ids = Vec::new();
    let mut values = Vec::new();
    for item in lines {
        let (line, text) = item?;
        let mut cells = text.split(delim);
        let id = cells.next().unwrap_or("").trim().to_string();
        let start = values.len();
        for (c, cell) in cells.enumerate() {
            values.push(parse_cell(cell, line, c + 2)?);
        }
        let got = values.len() - start;
        if got != array_ids.len() {
            return Err(Error::parse(
                line,
                format!("expected {} values, found {got}", array_ids.len()),
            ));
        }
        gene_ids.push(id);
    }
    if gene_ids.is_empty() {
        return Err(Error::parse(header_line, "matrix has no gene rows"));
    }
    DataMatrix::new(gene_ids.len(), array_ids.len(), values)?.with_ids(gene_ids, array_ids)
}

pub fn read_matrix_path(path: &Path) -> Result<DataMatrix> {
    read_matrix(open(path)?).map_err(|e| e.with_path(path))
}

/// Array id → group (1 or 2).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GroupLabels {
    labels: HashMap<String, u8>,
}

impl GroupLabels {
    pub fn new(pairs: impl IntoIterator<Item = (String, u8)>) -> Result<Self> {
        let mut labels = HashMap::new();
        for (id, g) in pairs {
            if g != 1 && g != 2 {
                return Err(Error::domain(format!(
                    "array `{id}` has group {g}; groups are 1 and 2"
                )));
            }
            if labels.insert(id.clone(), g).is_some() {
                return Err(Error::domain(format!("array `{id}` labeled twice")));
            }
        }
        Ok(GroupLabels { labels })
    }

    pub fn get(&self, array_id: &str) -> Option<u8> {
        self.labels.get(array_id).copied()
    }

    /// Column indices of group 1 and group 2 in `matrix`; every array must be
    /// labeled and both groups must be nonempty.
    pub fn split(&self, matrix: &DataMatrix) -> Result<(Vec<usize>, Vec<usize>)> {
        let (mut g1, mut g2) = (Vec::new(), Vec::new());
        for i in 0..matrix.arrays() {
            let id = matrix.array_id(i);
            match self.get(&id) {
                Some(1) => g1.push(i),
                Some(_) => g2.push(i),
                None => return Err(Error::domain(format!("array `{id}` has no group label"))),
            }
        }
        if g1.is_empty() || g2.is_empty() {
            return Err(Error::domain(format!(
                "both groups need arrays; got {} in group 1 and {} in group 2",
                g1.len(),
                g2.len()
            )));
        }
        Ok((g1, g2))
    }
}

/// Two columns per line, array id and group. A first line whose group field
/// is not a number is taken as a header.
pub fn read_labels<R: BufRead>(reader: R) -> Result<GroupLabels> {
    let mut pairs = Vec::new();
    for (idx, item) in content_lines(reader).enumerate() {
        let (line, text) = item?;
        let delim = detect_delimiter(&text);
        let fields: Vec<&str> = text.split(delim).map(str::trim).collect();
        if fields.len() != 2 {
            return Err(Error::parse(
                line,
                format!("expected 2 fields, found {}", fields.len()),
            ));
        }
        let group = match fields[1].parse::<u8>() {
            Ok(g) => g,
            Err(_) if idx == 0 => continue,
            Err(_) => {
                return Err(Error::parse(
                    line,
                    format!("group `{}` is not 1 or 2", fields[1]),
                ))
            }
        };
        if group != 1 && group != 2 {
            return Err(Error::parse(line, format!("group `{group}` is not 1 or 2")));
        }
        if pairs.iter().any(|(id, _): &(String, u8)| id == fields[0]) {
            return Err(Error::parse(
                line,
                format!("array `{}` labeled twice", fields[0]),
            ));
        }
        pairs.push((fields[0].to_string(), group));
    }
    GroupLabels::new(pairs)
}

pub fn read_labels_path(path: &Path) -> Result<GroupLabels> {
    read_labels(open(path)?).map_err(|e| e.with_path(path))
}

/// Shortest representation that parses back to the same value; `NA` for NaN.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NA".to_string()
    } else {
        format!("{v:?}")
    }
}

fn parse_float(s: &str, line: usize) -> Result<f64> {
    if s == "NA" {
        return Ok(f64::NAN);
    }
    s.parse()
        .map_err(|_| Error::parse(line, format!("`{s}` is not a number")))
}

pub const RESULTS_HEADER: &str = "gene_id\tstatistic\tp_value\trejected\tstatus";

/// One row of a results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub gene_id: String,
    pub result: GeneTestResult,
    pub rejected: bool,
}

pub fn write_results<W: Write>(
    mut out: W,
    gene_ids: &[String],
    results: &[GeneTestResult],
    rejected: &[bool],
) -> std::io::Result<()> {
    assert_eq!(gene_ids.len(), results.len());
    assert_eq!(gene_ids.len(), rejected.len());
    writeln!(out, "{RESULTS_HEADER}")?;
    for ((id, r), &rej) in gene_ids.iter().zip(results).zip(rejected) {
        writeln!(
            out,
            "{id}\t{}\t{}\t{}\t{}",
            format_float(r.statistic),
            format_float(r.p_value),
            u8::from(rej),
            r.status
        )?;
    }
    Ok(())
}

pub fn read_results<R: BufRead>(reader: R) -> Result<Vec<ResultRow>> {
    let mut lines = content_lines(reader);
    match lines.next().transpose()? {
        Some((_, h)) if h == RESULTS_HEADER => {}
        Some((line, _)) => return Err(Error::parse(line, "unexpected results header")),
        None => return Err(Error::parse(1, "empty results file")),
    }
    let mut rows = Vec::new();
    for item in lines {
        let (line, text) = item?;
        let f: Vec<&str> = text.split('\t').collect();
        if f.len() != 5 {
            return Err(Error::parse(
                line,
                format!("expected 5 fields, found {}", f.len()),
            ));
        }
        let status: TestStatus = f[4]
            .parse()
            .map_err(|_| Error::parse(line, format!("unknown status `{}`", f[4])))?;
        let rejected = match f[3] {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::parse(
                    line,
                    format!("rejected flag `{other}` is not 0 or 1"),
                ))
            }
        };
        rows.push(ResultRow {
            gene_id: f[0].to_string(),
            result: GeneTestResult {
                statistic: parse_float(f[1], line)?,
                p_value: parse_float(f[2], line)?,
                status,
            },
            rejected,
        });
    }
    Ok(rows)
}

/// Gene × test p-value table.
pub fn write_pvalue_table<W: Write>(
    mut out: W,
    gene_ids: &[String],
    test_names: &[&str],
    columns: &[Vec<GeneTestResult>],
) -> std::io::Result<()> {
    write!(out, "gene_id")?;
    for name in test_names {
        write!(out, "\t{name}")?;
    }
    writeln!(out)?;
    for (j, id) in gene_ids.iter().enumerate() {
        write!(out, "{id}")?;
        for col in columns {
            write!(out, "\t{}", format_float(col[j].p_value))?;
        }
        writeln!(out)?;
    }
    Ok(())
}
