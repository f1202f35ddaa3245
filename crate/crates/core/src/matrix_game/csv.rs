//! Matrix CSV: a `# rows=<n> cols=<m> convention=u_C` header line followed by
//! `n` comma-separated rows of `m` values. Values are written in shortest
//! round-trip form, so a write/read cycle is lossless.

use std::fmt::Write as _;
use std::path::Path;

use super::PayoffMatrix;
use crate::error::{Error, Result};

pub const CSV_CONVENTION: &str = "u_C";

pub fn to_csv_string(matrix: &PayoffMatrix) -> String {
    let mut out = format!(
        "# rows={} cols={} convention={CSV_CONVENTION}\n",
        matrix.rows(),
        matrix.cols()
    );
    for i in 0..matrix.rows() {
        let cells: Vec<String> = matrix.row(i).iter().map(f64::to_string).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

pub fn write_csv(matrix: &PayoffMatrix, path: &Path) -> Result<()> {
    std::fs::write(path, to_csv_string(matrix)).map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<PayoffMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, path)
}

pub fn parse_csv(text: &str, origin: &Path) -> Result<PayoffMatrix> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(origin, 1, "empty file"))?;
    let (rows, cols) = parse_header(header).map_err(|m| Error::parse(origin, 1, m))?;

    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (ln, line) in lines {
        let line_no = ln + 1;
        if line.trim_start().starts_with('#') {
            continue;
        }
        let before = data.len();
        for cell in line.split(',') {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|e| Error::parse(origin, line_no, format!("bad number {cell:?}: {e}")))?;
            data.push(v);
        }
        if data.len() - before != cols {
            return Err(Error::parse(
                origin,
                line_no,
                format!("expected {cols} values, found {}", data.len() - before),
            ));
        }
        seen += 1;
    }
    if seen != rows {
        return Err(Error::parse(origin, 1, format!("header says {rows} rows, found {seen}")));
    }
    Ok(PayoffMatrix::from_flat(rows, cols, data)?)
}

fn parse_header(line: &str) -> std::result::Result<(usize, usize), String> {
    let body = line
        .trim()
        .strip_prefix('#')
        .ok_or("missing '# rows=<n> cols=<m> convention=u_C' header")?;
    let (mut rows, mut cols, mut conv) = (None, None, None);
    for field in body.split_whitespace() {
        let (k, v) = field.split_once('=').ok_or(format!("malformed header field {field:?}"))?;
        match k {
            "rows" => rows = Some(v.parse::<usize>().map_err(|e| format!("rows: {e}"))?),
            "cols" => cols = Some(v.parse::<usize>().map_err(|e| format!("cols: {e}"))?),
            "convention" => conv = Some(v.to_string()),
            other => return Err(format!("unknown header field {other:?}")),
        }
    }
    match (rows, cols, conv.as_deref()) {
        (Some(r), Some(c), Some(CSV_CONVENTION)) => Ok((r, c)),
        (_, _, Some(other)) if other != CSV_CONVENTION => {
            Err(format!("unsupported convention {other:?}, expected {CSV_CONVENTION}"))
        }
        _ => Err("header needs rows, cols and convention".into()),
    }
}
