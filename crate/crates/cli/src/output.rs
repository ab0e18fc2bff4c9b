use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use sdfit_core::geometry::{Aabb, Similarity};
use sdfit_core::levelset::{
    evaluate_grid, marching_cubes, marching_squares, write_contour_csv, write_contour_svg, write_obj, GridSpec,
};
use sdfit_core::network::Network;
use sdfit_core::training::{write_loss_trace, LossReport};

use crate::CliError;

pub const LOCK_NAME: &str = ".sdfit.lock";

/// An output directory held exclusively for one run through a lockfile.
#[derive(Debug)]
pub struct OutDir {
    root: PathBuf,
    lock: PathBuf,
}

impl OutDir {
    pub fn acquire(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", root.display())))?;
        let lock = root.join(LOCK_NAME);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(CliError::Usage(format!(
                    "{} is in use by another run (remove {} if that run is gone)",
                    root.display(),
                    lock.display()
                )));
            }
            Err(e) => return Err(e.into()),
        }
        Ok(Self {
            root: root.to_path_buf(),
            lock,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Writes a file through a buffered writer.
    pub fn write(
        &self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> Result<(), CliError>,
    ) -> Result<(), CliError> {
        let path = self.path(name);
        let file = File::create(&path).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
        let mut out = BufWriter::new(file);
        body(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn write_json(&self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).expect("report serializes");
        self.write(name, |out| Ok(writeln!(out, "{text}")?))
    }

    pub fn write_trace(&self, name: &str, trace: &[LossReport]) -> Result<(), CliError> {
        self.write(name, |out| Ok(write_loss_trace(out, trace)?))
    }
}

impl Drop for OutDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}

/// Size of the extracted geometry, for run reports.
#[derive(Debug, Clone, Serialize)]
pub struct GeometrySummary {
    pub file: String,
    pub vertices: usize,
    pub elements: usize,
    /// Grid spacing in input coordinates.
    pub cell_size: f64,
    pub grid_min: Vec<f64>,
    pub grid_max: Vec<f64>,
}

/// Evaluates the network on `grid` (normalized coordinates), extracts the
/// zero level set, maps it back through `norm` and writes `{stem}.obj`, or
/// `{stem}.csv` plus `{stem}.svg` in 2D.
pub fn extract_and_write(
    out: &OutDir,
    stem: &str,
    net: &Network,
    latent: Option<&[f64]>,
    grid: &GridSpec,
    norm: Option<&Similarity>,
    points: Option<&[f64]>,
) -> Result<GeometrySummary, CliError> {
    let field = evaluate_grid(net, latent, grid)?;
    let to_input = |p: &[f64]| norm.map_or_else(|| p.to_vec(), |s| s.inverse(p));
    let scale = norm.map_or(1.0, |s| s.scale);
    let bbox = Aabb::new(to_input(&grid.bbox.min), to_input(&grid.bbox.max))?;
    let summary = |file: String, vertices, elements| GeometrySummary {
        file,
        vertices,
        elements,
        cell_size: grid.cell_size() / scale,
        grid_min: bbox.min.clone(),
        grid_max: bbox.max.clone(),
    };
    if grid.dim() == 2 {
        let mut contour = marching_squares(&field, 0.0)?;
        for v in contour.vertices.iter_mut() {
            let p = to_input(v);
            *v = [p[0], p[1]];
        }
        let name = format!("{stem}.csv");
        out.write(&name, |w| Ok(write_contour_csv(w, &contour)?))?;
        out.write(&format!("{stem}.svg"), |w| {
            Ok(write_contour_svg(
                w,
                &contour,
                points,
                [bbox.min[0], bbox.min[1]],
                [bbox.max[0], bbox.max[1]],
            )?)
        })?;
        Ok(summary(name, contour.vertices.len(), contour.segments.len()))
    } else {
        let mut mesh = marching_cubes(&field, 0.0)?;
        for v in mesh.vertices.iter_mut() {
            let p = to_input(v);
            *v = [p[0], p[1], p[2]];
        }
        let name = format!("{stem}.obj");
        out.write(&name, |w| Ok(write_obj(w, &mesh)?))?;
        Ok(summary(name, mesh.vertices.len(), mesh.triangles.len()))
    }
}
