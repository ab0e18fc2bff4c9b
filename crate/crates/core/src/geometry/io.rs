use std::fs;
use std::io::Write;
use std::path::Path;

use super::PointCloud;
use crate::error::{Error, Result};

/// Parses the whitespace-separated point format: `x y [z]` with optional
/// trailing normal components; `#` starts a comment line.
///
/// Column counts map to layouts as 2 → 2D, 3 → 3D, 4 → 2D with normals,
/// 6 → 3D with normals. Every data line must use the same layout.
pub fn parse_point_cloud(text: &str) -> Result<PointCloud> {
    let mut columns = None;
    let mut values: Vec<f64> = Vec::new();
    let mut first_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        line: line_no,
                        message: format!("'{tok}' is not a finite number"),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        match columns {
            None => {
                if ![2, 3, 4, 6].contains(&row.len()) {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("expected 2, 3, 4 or 6 columns, found {}", row.len()),
                    });
                }
                columns = Some(row.len());
                first_line = line_no;
            }
            Some(c) if c != row.len() => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("found {} columns but line {first_line} has {c}", row.len()),
                });
            }
            _ => {}
        }
        values.extend(row);
    }
    let columns = columns.ok_or(Error::Parse {
        line: 0,
        message: "no points".into(),
    })?;
    let (dim, with_normals) = match columns {
        2 => (2, false),
        3 => (3, false),
        4 => (2, true),
        _ => (3, true),
    };
    if !with_normals {
        return PointCloud::new(dim, values, None);
    }
    let mut points = Vec::with_capacity(values.len() / 2);
    let mut normals = Vec::with_capacity(values.len() / 2);
    for row in values.chunks_exact(2 * dim) {
        points.extend_from_slice(&row[..dim]);
        normals.extend_from_slice(&row[dim..]);
    }
    // normalize near-unit normals written with limited precision; the
    // constructor still rejects anything far from unit length
    for n in normals.chunks_exact_mut(dim) {
        let norm = n.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() < 1e-3 {
            n.iter_mut().for_each(|v| *v /= norm);
        }
    }
    PointCloud::new(dim, points, Some(normals))
}

pub fn read_point_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    parse_point_cloud(&fs::read_to_string(path)?)
}

pub fn write_point_cloud(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let mut out = String::new();
    for i in 0..cloud.len() {
        let mut fields: Vec<String> = cloud.point(i).iter().map(|v| v.to_string()).collect();
        if let Some(n) = cloud.normal(i) {
            fields.extend(n.iter().map(|v| v.to_string()));
        }
        out.push_str(&fields.join(" "));
        out.push('\n');
    }
    fs::File::create(path)?.write_all(out.as_bytes())?;
    Ok(())
}
