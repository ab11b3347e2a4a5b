//! ESRI ASCII grid import and export.
//!
//! Cell values are taken as node elevations: the centre of the lower-left
//! cell becomes the heightfield origin. Export writes `xllcenter` /
//! `yllcenter` so that a round trip reproduces the origin bit for bit.

use std::fmt::Write as _;

use super::{HeightField, MAX_NODES};
use crate::error::{Error, Result};

#[derive(Default)]
struct Header {
    ncols: Option<usize>,
    nrows: Option<usize>,
    x: Option<(f64, bool)>,
    y: Option<(f64, bool)>,
    cellsize: Option<f64>,
    nodata: Option<f64>,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_number(token: &str, line: usize) -> Result<f64> {
    token
        .parse::<f64>()
        .map_err(|_| parse_err(line, format!("`{token}` is not a number")))
}

fn parse_count(token: &str, line: usize, key: &str) -> Result<usize> {
    token.parse::<usize>().map_err(|_| {
        parse_err(
            line,
            format!("{key} must be a non-negative integer, got `{token}`"),
        )
    })
}

/// Parses an ESRI ASCII grid, filling NODATA cells from their nearest valid
/// neighbour.
pub fn load_ascii_grid(text: &str) -> Result<HeightField> {
    let mut header = Header::default();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).peekable();

    // Header: `key value` lines until the first line starting with a number.
    while let Some(&(line_no, line)) = lines.peek() {
        let mut tokens = line.split_whitespace();
        let Some(key) = tokens.next() else {
            lines.next();
            continue;
        };
        if key.parse::<f64>().is_ok() {
            break;
        }
        lines.next();
        let value = tokens
            .next()
            .ok_or_else(|| parse_err(line_no, format!("header key `{key}` has no value")))?;
        if tokens.next().is_some() {
            return Err(parse_err(line_no, format!("trailing tokens after `{key}`")));
        }
        let lower = key.to_ascii_lowercase();
        let duplicate = match lower.as_str() {
            "ncols" => header
                .ncols
                .replace(parse_count(value, line_no, "ncols")?)
                .is_some(),
            "nrows" => header
                .nrows
                .replace(parse_count(value, line_no, "nrows")?)
                .is_some(),
            "xllcorner" | "xllcenter" => {
                let v = (parse_number(value, line_no)?, lower == "xllcenter");
                header.x.replace(v).is_some()
            }
            "yllcorner" | "yllcenter" => {
                let v = (parse_number(value, line_no)?, lower == "yllcenter");
                header.y.replace(v).is_some()
            }
            "cellsize" => header
                .cellsize
                .replace(parse_number(value, line_no)?)
                .is_some(),
            "nodata_value" => header
                .nodata
                .replace(parse_number(value, line_no)?)
                .is_some(),
            _ => return Err(parse_err(line_no, format!("unknown header key `{key}`"))),
        };
        if duplicate {
            return Err(parse_err(line_no, format!("duplicate header key `{key}`")));
        }
    }

    let header_line = lines.peek().map_or(1, |(n, _)| *n);
    let missing = |name: &str| parse_err(header_line, format!("header is missing `{name}`"));
    let ncols = header.ncols.ok_or_else(|| missing("ncols"))?;
    let nrows = header.nrows.ok_or_else(|| missing("nrows"))?;
    let (x, x_center) = header.x.ok_or_else(|| missing("xllcorner"))?;
    let (y, y_center) = header.y.ok_or_else(|| missing("yllcorner"))?;
    let cellsize = header.cellsize.ok_or_else(|| missing("cellsize"))?;

    if !(cellsize > 0.0 && cellsize.is_finite()) {
        return Err(parse_err(
            header_line,
            format!("cellsize must be positive, got {cellsize}"),
        ));
    }
    if !x.is_finite() || !y.is_finite() {
        return Err(parse_err(
            header_line,
            "lower-left coordinates must be finite",
        ));
    }
    if ncols < 2 || nrows < 2 {
        return Err(parse_err(
            header_line,
            format!("grid needs at least 2x2 cells, got {ncols}x{nrows}"),
        ));
    }
    let n = ncols
        .checked_mul(nrows)
        .filter(|&n| n <= MAX_NODES)
        .ok_or_else(|| {
            parse_err(
                header_line,
                format!("{ncols}x{nrows} grid exceeds size limit"),
            )
        })?;

    // Values in file order: north row first.
    let mut values: Vec<Option<f64>> = Vec::with_capacity(n.min(1 << 20));
    for (line_no, line) in lines {
        for token in line.split_whitespace() {
            if values.len() == n {
                return Err(parse_err(line_no, format!("more than {n} values")));
            }
            let v = parse_number(token, line_no)?;
            if header.nodata == Some(v) {
                values.push(None);
            } else if v.is_finite() {
                values.push(Some(v));
            } else {
                return Err(parse_err(line_no, format!("non-finite value `{token}`")));
            }
        }
    }
    if values.len() != n {
        return Err(parse_err(
            text.lines().count().max(1),
            format!("expected {n} values, found {}", values.len()),
        ));
    }
    if values.iter().all(Option::is_none) {
        return Err(parse_err(header_line, "every cell is NODATA"));
    }

    let filled = fill_nodata(&values, nrows, ncols);
    // Flip so that row 0 is the southern row.
    let mut elevations = Vec::with_capacity(n);
    for file_row in (0..nrows).rev() {
        elevations.extend_from_slice(&filled[file_row * ncols..(file_row + 1) * ncols]);
    }
    let half = 0.5 * cellsize;
    let origin = [
        if x_center { x } else { x + half },
        if y_center { y } else { y + half },
    ];
    HeightField::new(origin, cellsize, nrows, ncols, elevations)
}

/// Nearest valid cell by Euclidean index distance; ties go to the lowest index.
fn fill_nodata(values: &[Option<f64>], nrows: usize, ncols: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    for (i, v) in values.iter().enumerate() {
        if let Some(v) = v {
            out.push(*v);
            continue;
        }
        let (r0, c0) = ((i / ncols) as i64, (i % ncols) as i64);
        let mut best: Option<(i64, usize)> = None;
        let max_radius = nrows.max(ncols) as i64;
        for radius in 1..=max_radius {
            if let Some((d2, _)) = best {
                if radius * radius > d2 {
                    break;
                }
            }
            for dr in -radius..=radius {
                for dc in -radius..=radius {
                    if dr.abs() != radius && dc.abs() != radius {
                        continue;
                    }
                    let (r, c) = (r0 + dr, c0 + dc);
                    if r < 0 || c < 0 || r >= nrows as i64 || c >= ncols as i64 {
                        continue;
                    }
                    let j = r as usize * ncols + c as usize;
                    if values[j].is_none() {
                        continue;
                    }
                    let d2 = dr * dr + dc * dc;
                    if best.is_none_or(|(bd, bj)| d2 < bd || (d2 == bd && j < bj)) {
                        best = Some((d2, j));
                    }
                }
            }
        }
        let (_, j) = best.expect("at least one valid cell");
        out.push(values[j].expect("valid"));
    }
    out
}

/// Serializes `hf` as an ESRI ASCII grid with shortest round-trip decimals.
pub fn write_ascii_grid(hf: &HeightField) -> String {
    let mut nodata = -9999.0_f64;
    while hf.elevations().contains(&nodata) {
        nodata *= 10.0;
    }
    let mut out = String::new();
    let [ox, oy] = hf.origin();
    let _ = writeln!(out, "ncols {}", hf.n_cols());
    let _ = writeln!(out, "nrows {}", hf.n_rows());
    let _ = writeln!(out, "xllcenter {ox:?}");
    let _ = writeln!(out, "yllcenter {oy:?}");
    let _ = writeln!(out, "cellsize {:?}", hf.cell_size());
    let _ = writeln!(out, "NODATA_value {nodata:?}");
    for row in (0..hf.n_rows()).rev() {
        let line: Vec<String> = (0..hf.n_cols())
            .map(|col| format!("{:?}", hf.node(row, col)))
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_two_by_two() {
        let hf = load_ascii_grid(
            "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 10\nNODATA_value -9999\n0 0\n0 0\n",
        )
        .unwrap();
        assert_eq!(hf.extent(), (10.0, 10.0));
        assert!(hf.elevations().iter().all(|&z| z == 0.0));
    }

    #[test]
    fn header_keys_are_case_insensitive() {
        let hf = load_ascii_grid("NCOLS 2\nNRows 2\nXLLCENTER 5\nyllCenter 6\nCellSize 1\n1 2 3 4")
            .unwrap();
        assert_eq!(hf.origin(), [5.0, 6.0]);
        // First file row is the northern one.
        assert_eq!(hf.node(1, 0), 1.0);
        assert_eq!(hf.node(0, 1), 4.0);
    }

    #[test]
    fn nodata_takes_nearest_value() {
        let text = "ncols 3\nnrows 3\nxllcorner 0\nyllcorner 0\ncellsize 1\nnodata_value -1\n\
                    5 5 5\n5 -1 5\n5 5 5\n";
        let hf = load_ascii_grid(text).unwrap();
        assert_eq!(hf.node(1, 1), 5.0);

        let text = "ncols 3\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nnodata_value -1\n\
                    -1 -1 7\n1 -1 -1\n";
        let hf = load_ascii_grid(text).unwrap();
        // File row 0 -> internal row 1.
        assert_eq!(hf.node(1, 0), 1.0);
        assert_eq!(hf.node(1, 1), 7.0);
        assert_eq!(hf.node(0, 2), 7.0);
    }

    #[test]
    fn malformed_inputs_are_parse_errors() {
        let cases = [
            "",
            "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\n0 0 0 0",
            "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n0 0 0",
            "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n0 0 0 0 0",
            "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nnodata_value 0\n0 0 0 0",
            "ncols 2\nncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n0 0 0 0",
            "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nbogus 3\n0 0 0 0",
            "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize -1\n0 0 0 0",
            "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n0 0 x 0",
            "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n0 0 inf 0",
            "ncols 99999999\nnrows 99999999\nxllcorner 0\nyllcorner 0\ncellsize 1\n0",
        ];
        for text in cases {
            assert!(
                matches!(load_ascii_grid(text), Err(Error::Parse { .. })),
                "accepted: {text:?}"
            );
        }
    }

    #[test]
    fn export_reimport_is_exact() {
        let z: Vec<f64> = (0..12).map(|i| (i as f64).sqrt() * 0.1 - 1e-7).collect();
        let hf = HeightField::new([123.456, -7.1], 0.3, 3, 4, z).unwrap();
        let back = load_ascii_grid(&write_ascii_grid(&hf)).unwrap();
        assert_eq!(back, hf);
    }
}
