use std::io::Write;

use super::{Mesh, Polyline2D};
use crate::error::Result;

/// Wavefront OBJ: `v x y z` lines, then 1-based `f i j k` lines.
pub fn write_obj(mut out: impl Write, mesh: &Mesh) -> Result<()> {
    for v in &mesh.vertices {
        writeln!(out, "v {} {} {}", v[0], v[1], v[2])?;
    }
    for t in &mesh.triangles {
        writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}

/// One `x0,y0,x1,y1` row per segment, after a header line.
pub fn write_contour_csv(mut out: impl Write, contour: &Polyline2D) -> Result<()> {
    writeln!(out, "x0,y0,x1,y1")?;
    for s in 0..contour.segments.len() {
        let (a, b) = contour.segment(s);
        writeln!(out, "{},{},{},{}", a[0], a[1], b[0], b[1])?;
    }
    Ok(())
}

/// SVG drawing of the chained contour over the box `[min, max]`, y up.
pub fn write_contour_svg(
    mut out: impl Write,
    contour: &Polyline2D,
    points: Option<&[f64]>,
    min: [f64; 2],
    max: [f64; 2],
) -> Result<()> {
    let size = 512.0;
    let scale = size / (max[0] - min[0]).max(max[1] - min[1]);
    let map = |p: [f64; 2]| ((p[0] - min[0]) * scale, size - (p[1] - min[1]) * scale);
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    )?;
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
    for (chain, closed) in contour.loops() {
        let pts: Vec<String> = chain
            .iter()
            .map(|&v| {
                let (x, y) = map(contour.vertices[v]);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let tag = if closed { "polygon" } else { "polyline" };
        writeln!(
            out,
            r#"<{tag} points="{}" fill="none" stroke="black" stroke-width="1.5"/>"#,
            pts.join(" ")
        )?;
    }
    if let Some(points) = points {
        for p in points.chunks(2) {
            let (x, y) = map([p[0], p[1]]);
            writeln!(out, r#"<circle cx="{x:.3}" cy="{y:.3}" r="1.5" fill="red"/>"#)?;
        }
    }
    writeln!(out, "</svg>")?;
    Ok(())
}
