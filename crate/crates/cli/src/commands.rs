use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use sdfit_core::geometry::{bounding_box, read_point_cloud, Aabb, PointCloud, Similarity};
use sdfit_core::levelset::{sdf_relative_error, ErrorStats, GridSpec};
use sdfit_core::network::{load_checkpoint, save_checkpoint, Checkpoint, Network};
use sdfit_core::training::{
    average_latents, infer_latent, loss_report, rng_stream, train_auto_decoder, train_single_shape, train_with_source,
    LatentTable, LossParams, LossReport, SamplerD, DEFAULT_BOX_MARGIN,
};

use crate::analytic::Analytic;
use crate::config::RunConfig;
use crate::output::{extract_and_write, GeometrySummary, OutDir};
use crate::CliError;

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const LATENTS_FILE: &str = "latents.csv";
pub const LOSS_FILE: &str = "loss.csv";
pub const REPORT_FILE: &str = "report.json";

fn read_cloud(path: &Path) -> Result<PointCloud, CliError> {
    read_point_cloud(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn require_normals(cloud: &PointCloud, params: &LossParams, path: &Path) -> Result<(), CliError> {
    if params.tau == 1.0 && !cloud.has_normals() {
        return Err(CliError::Usage(format!(
            "{} has no normals but loss.tau = 1; add normal columns or set tau = 0",
            path.display()
        )));
    }
    Ok(())
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "shape".into(), |s| s.to_string_lossy().into_owned())
}

fn normalizer(cloud: &PointCloud, normalize: bool) -> Option<Similarity> {
    normalize.then(|| Similarity::normalizing(cloud))
}

fn apply(cloud: &PointCloud, norm: Option<&Similarity>) -> PointCloud {
    norm.map_or_else(|| cloud.clone(), |s| cloud.transformed(s))
}

fn cube_grid(dim: usize, half: f64, resolution: usize) -> Result<GridSpec, CliError> {
    Ok(GridSpec::new(Aabb::symmetric(dim, half), resolution)?)
}

fn final_report(trace: &[LossReport]) -> Option<LossReport> {
    trace.last().copied()
}

#[derive(Serialize)]
struct ReconstructReport {
    input: String,
    points: usize,
    iters: usize,
    final_loss: Option<LossReport>,
    geometry: GeometrySummary,
}

/// Single-shape fit, extraction, loss trace and checkpoint.
pub fn reconstruct(cfg: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    let rc = &cfg.reconstruct;
    let input = rc
        .input
        .as_ref()
        .ok_or_else(|| CliError::Usage("reconstruct needs an input point cloud".into()))?;
    let cloud = read_cloud(input)?;
    require_normals(&cloud, &cfg.loss, input)?;
    let norm = normalizer(&cloud, rc.normalize);
    let local = apply(&cloud, norm.as_ref());
    let grid = GridSpec::new(bounding_box(&local, rc.grid_margin)?.cube_hull(), rc.resolution)?;

    let out = OutDir::acquire(out_dir)?;
    let spec = cfg.network.spec(cloud.dim(), 0);
    let (net, trace) = train_single_shape(&local, &spec, &cfg.loss, &rc.schedule)?;
    out.write_trace(LOSS_FILE, &trace)?;
    save_checkpoint(
        out.path(CHECKPOINT_FILE),
        &Checkpoint {
            network: net.clone(),
            normalization: norm.clone(),
        },
    )?;
    let stem = if cloud.dim() == 2 { "contour" } else { "mesh" };
    let geometry = extract_and_write(&out, stem, &net, None, &grid, norm.as_ref(), Some(cloud.points()))?;
    let report = ReconstructReport {
        input: input.display().to_string(),
        points: cloud.len(),
        iters: trace.len(),
        final_loss: final_report(&trace),
        geometry,
    };
    out.write_json(REPORT_FILE, &report)?;
    println!(
        "reconstruct: {} iterations, {} -> {}",
        report.iters,
        report.input,
        out.path(&report.geometry.file).display()
    );
    Ok(())
}

#[derive(Serialize)]
struct ProbeReport {
    shape: &'static str,
    dim: usize,
    iters: usize,
    final_loss: Option<LossReport>,
    error: ErrorStats,
}

/// Fits an analytic shape from fresh surface samples every iteration and
/// reports the relative SDF error away from the surface.
pub fn sdf_probe(cfg: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    let pc = &cfg.sdf_probe;
    let shape = Analytic::from_config(pc)?;
    let sched = &pc.schedule;
    let out = OutDir::acquire(out_dir)?;
    let reference = shape.reference_cloud(&mut rng_stream(sched.seed, 2), pc.reference_points)?;
    let mut sampler = SamplerD::new(&reference, sched.knn_k, DEFAULT_BOX_MARGIN, rng_stream(sched.seed, 1))?;
    let spec = cfg.network.spec(pc.dim, 0);
    let net = Network::geometric_init(spec, sched.init_radius, sched.seed)?;
    let (net, trace) = train_with_source(net, &mut sampler, |rng, n| shape.sample(rng, n), &cfg.loss, sched)?;
    let bbox = Aabb::symmetric(pc.dim, pc.half_width);
    let error = sdf_relative_error(&net, None, |x| shape.sdf(x), &bbox, pc.samples, sched.seed, pc.band)?;

    out.write_trace(LOSS_FILE, &trace)?;
    save_checkpoint(
        out.path(CHECKPOINT_FILE),
        &Checkpoint {
            network: net,
            normalization: None,
        },
    )?;
    out.write("error.csv", |w| {
        writeln!(w, "shape,mean,std,count")?;
        writeln!(w, "{},{},{},{}", shape.name(), error.mean, error.std, error.count)?;
        Ok(())
    })?;
    let report = ProbeReport {
        shape: shape.name(),
        dim: pc.dim,
        iters: trace.len(),
        final_loss: final_report(&trace),
        error,
    };
    out.write_json(REPORT_FILE, &report)?;
    println!(
        "sdf-probe {}: relative error {:.4} +- {:.4} over {} samples",
        report.shape, error.mean, error.std, error.count
    );
    Ok(())
}

/// Per-shape loss at the end of shape-space training, over the whole cloud.
#[derive(Serialize)]
struct ShapeRow {
    id: String,
    report: LossReport,
    geometry: GeometrySummary,
}

#[derive(Serialize)]
struct ShapeSpaceReport {
    shapes: Vec<ShapeRow>,
    steps: usize,
    final_loss: Option<LossReport>,
}

fn load_clouds(paths: &[PathBuf], params: &LossParams) -> Result<Vec<PointCloud>, CliError> {
    paths
        .iter()
        .map(|p| {
            let c = read_cloud(p)?;
            require_normals(&c, params, p)?;
            Ok(c)
        })
        .collect()
}

fn union(clouds: &[PointCloud]) -> Result<PointCloud, CliError> {
    let pts: Vec<f64> = clouds.iter().flat_map(|c| c.points().iter().copied()).collect();
    Ok(PointCloud::new(clouds[0].dim(), pts, None)?)
}

/// Whole-cloud loss of one shape with a fresh draw from its 𝒟.
fn shape_loss(
    net: &Network,
    z: &[f64],
    cloud: &PointCloud,
    params: &LossParams,
    knn_k: usize,
    seed: u64,
) -> Result<LossReport, CliError> {
    let mut sampler = SamplerD::new(cloud, knn_k, DEFAULT_BOX_MARGIN, rng_stream(seed, 1))?;
    let global = sampler.sample(cloud.len());
    Ok(loss_report(
        net,
        Some(z),
        cloud.points(),
        cloud.normals(),
        &global,
        params,
    )?)
}

/// Auto-decoder training over several clouds sharing one normalization.
pub fn shape_space(cfg: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    let sc = &cfg.shape_space;
    if sc.inputs.len() < 2 {
        return Err(CliError::Usage("shape-space needs at least 2 input clouds".into()));
    }
    let ids: Vec<String> = if sc.ids.is_empty() {
        sc.inputs.iter().map(|p| stem(p)).collect()
    } else {
        sc.ids.clone()
    };
    if ids.len() != sc.inputs.len() {
        return Err(CliError::Usage(
            "config key shape_space.ids: need one id per input".into(),
        ));
    }
    if ids.iter().collect::<HashSet<_>>().len() != ids.len() || ids.iter().any(|i| i.contains(',') || i.is_empty()) {
        return Err(CliError::Usage(
            "shape ids must be unique, non-empty and comma-free".into(),
        ));
    }
    let clouds = load_clouds(&sc.inputs, &cfg.loss)?;
    let dim = clouds[0].dim();
    if clouds.iter().any(|c| c.dim() != dim) {
        return Err(CliError::Usage(
            "all shape-space inputs must share one dimension".into(),
        ));
    }
    let norm = normalizer(&union(&clouds)?, sc.normalize);
    let local: Vec<PointCloud> = clouds.iter().map(|c| apply(c, norm.as_ref())).collect();
    let grid = cube_grid(dim, sc.grid_half_width, sc.resolution)?;

    let out = OutDir::acquire(out_dir)?;
    let spec = cfg.network.spec(dim, sc.latent_dim);
    let run = train_auto_decoder(&local, ids.clone(), &spec, &cfg.loss, &sc.schedule)?;
    out.write_trace(LOSS_FILE, &run.trace)?;
    save_checkpoint(
        out.path(CHECKPOINT_FILE),
        &Checkpoint {
            network: run.network.clone(),
            normalization: norm.clone(),
        },
    )?;
    out.write(LATENTS_FILE, |w| Ok(run.latents.write_csv(w)?))?;

    let mut shapes = Vec::new();
    for (j, id) in ids.iter().enumerate() {
        let z = run.latents.code(j);
        let report = shape_loss(
            &run.network,
            z,
            &local[j],
            &cfg.loss,
            sc.schedule.knn_k,
            sc.schedule.seed,
        )?;
        let geometry = extract_and_write(
            &out,
            &format!("shape_{id}"),
            &run.network,
            Some(z),
            &grid,
            norm.as_ref(),
            Some(clouds[j].points()),
        )?;
        shapes.push(ShapeRow {
            id: id.clone(),
            report,
            geometry,
        });
    }
    out.write("shapes.csv", |w| {
        writeln!(w, "shape,data,normal,eikonal,latent,total")?;
        for s in &shapes {
            let r = &s.report;
            writeln!(
                w,
                "{},{},{},{},{},{}",
                s.id, r.data_term, r.normal_term, r.eikonal_term, r.latent_term, r.total
            )?;
        }
        Ok(())
    })?;
    let report = ShapeSpaceReport {
        steps: run.trace.len(),
        final_loss: final_report(&run.trace),
        shapes,
    };
    out.write_json(REPORT_FILE, &report)?;
    for s in &report.shapes {
        println!("shape-space {}: data term {:.5}", s.id, s.report.data_term);
    }
    Ok(())
}

fn load_latent_checkpoint(path: Option<&PathBuf>, command: &str) -> Result<Checkpoint, CliError> {
    let path = path.ok_or_else(|| CliError::Usage(format!("{command} needs --checkpoint")))?;
    let ck = load_checkpoint(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if ck.network.spec().latent_dim == 0 {
        return Err(CliError::Usage(format!(
            "{}: network has no latent input",
            path.display()
        )));
    }
    Ok(ck)
}

#[derive(Serialize)]
struct InferReport {
    id: String,
    report: LossReport,
    geometry: GeometrySummary,
}

/// Latent optimization for a new cloud against a frozen network.
pub fn infer(cfg: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    let ic = &cfg.infer;
    let ck = load_latent_checkpoint(ic.checkpoint.as_ref(), "infer")?;
    let input = ic
        .input
        .as_ref()
        .ok_or_else(|| CliError::Usage("infer needs an input point cloud".into()))?;
    let cloud = read_cloud(input)?;
    require_normals(&cloud, &cfg.loss, input)?;
    let spec = ck.network.spec();
    if cloud.dim() != spec.input_dim {
        return Err(CliError::Usage(format!(
            "{} is {}-D but the checkpoint expects {}-D input",
            input.display(),
            cloud.dim(),
            spec.input_dim
        )));
    }
    let id = ic.id.clone().unwrap_or_else(|| stem(input));
    let local = apply(&cloud, ck.normalization.as_ref());
    let grid = cube_grid(cloud.dim(), ic.grid_half_width, ic.resolution)?;

    let out = OutDir::acquire(out_dir)?;
    let (z, report) = infer_latent(&ck.network, &local, &cfg.loss, &ic.schedule)?;
    let table = LatentTable::new(z.len(), vec![id.clone()], vec![z.clone()])?;
    out.write(LATENTS_FILE, |w| Ok(table.write_csv(w)?))?;
    let geometry = extract_and_write(
        &out,
        &format!("shape_{id}"),
        &ck.network,
        Some(&z),
        &grid,
        ck.normalization.as_ref(),
        Some(cloud.points()),
    )?;
    out.write_json(
        REPORT_FILE,
        &InferReport {
            id: id.clone(),
            report,
            geometry,
        },
    )?;
    println!("infer {id}: data term {:.5}", report.data_term);
    Ok(())
}

/// Extraction at a convex combination of stored latent codes.
pub fn interpolate(cfg: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    let ip = &cfg.interpolate;
    let ck = load_latent_checkpoint(ip.checkpoint.as_ref(), "interpolate")?;
    let path = ip
        .latents
        .as_ref()
        .ok_or_else(|| CliError::Usage("interpolate needs --latents".into()))?;
    let file = File::open(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let table =
        LatentTable::read_csv(BufReader::new(file)).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let l = ck.network.spec().latent_dim;
    if table.dim() != l {
        return Err(CliError::Usage(format!(
            "latent table has dimension {} but the checkpoint expects {l}",
            table.dim()
        )));
    }
    if ip.ids.is_empty() || ip.ids.len() != ip.weights.len() {
        return Err(CliError::Usage("interpolate needs matching --ids and --weights".into()));
    }
    let codes = ip
        .ids
        .iter()
        .map(|id| {
            table
                .get(id)
                .ok_or_else(|| CliError::Usage(format!("shape id '{id}' is not in the latent table")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let z = average_latents(&codes, &ip.weights)?;
    let grid = cube_grid(ck.network.spec().input_dim, ip.grid_half_width, ip.resolution)?;

    let out = OutDir::acquire(out_dir)?;
    let blend = LatentTable::new(l, vec!["blend".into()], vec![z.clone()])?;
    out.write("blend.csv", |w| Ok(blend.write_csv(w)?))?;
    let geometry = extract_and_write(
        &out,
        "blend",
        &ck.network,
        Some(&z),
        &grid,
        ck.normalization.as_ref(),
        None,
    )?;
    out.write_json(REPORT_FILE, &geometry)?;
    println!(
        "interpolate: {} -> {}",
        ip.ids.join("+"),
        out.path(&geometry.file).display()
    );
    Ok(())
}
