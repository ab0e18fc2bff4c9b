use rand::Rng;
use rand_distr::StandardNormal;

use sdfit_core::geometry::PointCloud;
use sdfit_core::training::SurfaceBatch;

use crate::config::ProbeConfig;
use crate::CliError;

const MAX_REJECTIONS: usize = 1000;

/// Shapes with closed-form signed distance and surface samples.
#[derive(Debug, Clone, PartialEq)]
pub enum Analytic {
    Plane {
        normal: Vec<f64>,
        offset: f64,
        half_width: f64,
    },
    Sphere {
        center: Vec<f64>,
        radius: f64,
    },
}

impl Analytic {
    pub fn from_config(cfg: &ProbeConfig) -> Result<Self, CliError> {
        let d = cfg.dim;
        match cfg.shape.as_deref() {
            Some("plane") => {
                let mut normal = cfg.normal.clone().unwrap_or_else(|| {
                    let mut n = vec![0.0; d];
                    n[0] = 1.0;
                    n
                });
                let norm = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
                normal.iter_mut().for_each(|v| *v /= norm);
                let reach: f64 = normal.iter().map(|v| v.abs()).sum::<f64>() * cfg.half_width;
                if cfg.offset.abs() >= reach {
                    return Err(CliError::Usage(
                        "config key sdf_probe.offset: plane misses the box".into(),
                    ));
                }
                Ok(Analytic::Plane {
                    normal,
                    offset: cfg.offset,
                    half_width: cfg.half_width,
                })
            }
            Some("sphere") => Ok(Analytic::Sphere {
                center: cfg.center.clone().unwrap_or_else(|| vec![0.0; d]),
                radius: cfg.radius,
            }),
            Some(other) => Err(CliError::Usage(format!(
                "unknown shape '{other}' (expected plane or sphere)"
            ))),
            None => Err(CliError::Usage("sdf-probe needs a shape: plane or sphere".into())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Analytic::Plane { .. } => "plane",
            Analytic::Sphere { .. } => "sphere",
        }
    }

    pub fn sdf(&self, x: &[f64]) -> f64 {
        match self {
            Analytic::Plane { normal, offset, .. } => dot(normal, x) - offset,
            Analytic::Sphere { center, radius } => {
                x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt() - radius
            }
        }
    }

    /// `n` surface points with unit outward normals. Plane samples are
    /// uniform over the patch inside the box.
    pub fn sample(&self, rng: &mut impl Rng, n: usize) -> SurfaceBatch {
        let mut points = Vec::new();
        let mut normals = Vec::new();
        match self {
            Analytic::Plane {
                normal,
                offset,
                half_width,
            } => {
                let mut accepted = 0;
                let mut tries = 0;
                while accepted < n {
                    let x: Vec<f64> = normal
                        .iter()
                        .map(|_| rng.random_range(-half_width..=*half_width))
                        .collect();
                    let t = dot(normal, &x) - offset;
                    let p: Vec<f64> = x.iter().zip(normal).map(|(a, b)| a - t * b).collect();
                    tries += 1;
                    if p.iter().all(|v| v.abs() <= *half_width) || tries > MAX_REJECTIONS * n {
                        points.extend(p);
                        normals.extend_from_slice(normal);
                        accepted += 1;
                    }
                }
            }
            Analytic::Sphere { center, radius } => {
                for _ in 0..n {
                    let u = unit(center.len(), rng);
                    points.extend(u.iter().zip(center).map(|(a, c)| c + radius * a));
                    normals.extend(u);
                }
            }
        }
        SurfaceBatch {
            points,
            normals: Some(normals),
        }
    }

    pub fn reference_cloud(&self, rng: &mut impl Rng, n: usize) -> Result<PointCloud, CliError> {
        let b = self.sample(rng, n);
        let d = match self {
            Analytic::Plane { normal, .. } => normal.len(),
            Analytic::Sphere { center, .. } => center.len(),
        };
        Ok(PointCloud::new(d, b.points, b.normals)?)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn unit(d: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-9 {
            return v.into_iter().map(|c| c / norm).collect();
        }
    }
}
