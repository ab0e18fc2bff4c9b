//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `SDFIT_ACCEPTANCE=1,2,9` restricts the run to the listed criteria.
//! Criterion 11 reruns 6-10 and needs their first-run outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use sdfit_cli::{run, Cli};
use sdfit_core::geometry::{read_point_cloud, set_distances, Aabb, PointCloud};
use sdfit_core::levelset::{marching_cubes, marching_squares, write_contour_csv, write_obj, GridField, GridSpec};
use sdfit_core::network::{load_checkpoint, Network, NetworkSpec, Upstream};
use sdfit_core::theory::{
    critical_points, gradient_descent, liapunov_check, perturbation_sweep, CriticalKind, LinearProblem, PlanarSample,
};
use sdfit_core::training::{loss_report, rng_stream, LossParams, SamplerD, DEFAULT_BOX_MARGIN};

const FD_STEP: f64 = 1e-5;
/// Gradient magnitude below which central differences at `FD_STEP` are
/// dominated by round-off, so the comparison falls back to absolute error.
const FD_FLOOR: f64 = 1e-5;
const SEED: u64 = 0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

struct Ctx {
    root: PathBuf,
    fixtures: PathBuf,
}

impl Ctx {
    fn dir(&self, run: &str, name: &str) -> PathBuf {
        self.root.join(run).join(name)
    }
}

fn cli(args: &[&str]) -> Result<(), String> {
    let mut full = vec!["sdfit"];
    full.extend_from_slice(args);
    let parsed = Cli::try_parse_from(full).map_err(|e| e.to_string())?;
    run(parsed).map_err(|e| e.to_string())
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    fs::create_dir_all(dir).unwrap();
    let path = dir.join("config.toml");
    fs::write(&path, body).unwrap();
    path
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(FD_FLOOR)
}

fn normal_vec(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Segments `[x0, y0, x1, y1]` of a contour CSV.
fn read_segments(path: &Path) -> Vec<[f64; 4]> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|t| t.parse().unwrap()).collect();
            [v[0], v[1], v[2], v[3]]
        })
        .collect()
}

fn segment_distance(p: [f64; 2], s: &[f64; 4]) -> f64 {
    let (ax, ay, bx, by) = (s[0], s[1], s[2], s[3]);
    let (dx, dy) = (bx - ax, by - ay);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - ax) * dx + (p[1] - ay) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    ((p[0] - ax - t * dx).powi(2) + (p[1] - ay - t * dy).powi(2)).sqrt()
}

/// Mean distance from each point to the nearest contour segment.
fn one_sided_chamfer(points: &[f64], segments: &[[f64; 4]]) -> f64 {
    let d: Vec<f64> = points
        .chunks(2)
        .map(|p| {
            segments
                .iter()
                .map(|s| segment_distance([p[0], p[1]], s))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    d.iter().sum::<f64>() / d.len() as f64
}

fn obj_vertices(path: &Path) -> Vec<[f64; 3]> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter_map(|l| l.strip_prefix("v "))
        .map(|l| {
            let v: Vec<f64> = l.split(' ').map(|t| t.parse().unwrap()).collect();
            [v[0], v[1], v[2]]
        })
        .collect()
}

fn circle_file(path: &Path, radius: f64, n: usize) {
    let mut text = String::new();
    for i in 0..n {
        let t = std::f64::consts::TAU * i as f64 / n as f64;
        text.push_str(&format!(
            "{} {} {} {}\n",
            radius * t.cos(),
            radius * t.sin(),
            t.cos(),
            t.sin()
        ));
    }
    fs::write(path, text).unwrap();
}

/// Adds `delta` to weight `(r, c)` of layer `li`, or to bias `r` when `c` is the column count.
fn bump(net: &mut Network, li: usize, r: usize, c: usize, delta: f64) {
    let l = &mut net.layers_mut()[li];
    if c < l.weight.ncols() {
        l.weight[[r, c]] += delta;
    } else {
        l.bias[r] += delta;
    }
}

fn c1_gradients(_: &Ctx) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut worst_x, mut worst_theta) = (0.0f64, 0.0f64);
    for k in 0..50u64 {
        let latent_dim = if k % 2 == 0 { 0 } else { 4 };
        let spec = NetworkSpec::uniform(3, latent_dim, 32, 4);
        let mut net = Network::geometric_init(spec, 1.0, k).unwrap();
        for layer in net.layers_mut() {
            layer
                .weight
                .iter_mut()
                .for_each(|w| *w += 0.1 * rng.sample::<f64, _>(StandardNormal));
            layer
                .bias
                .iter_mut()
                .for_each(|b| *b += 0.1 * rng.sample::<f64, _>(StandardNormal));
        }
        let z: Option<Vec<f64>> = (latent_dim > 0).then(|| normal_vec(latent_dim, &mut rng));
        let z = z.as_deref();
        let pts: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();

        for x in pts.chunks(3) {
            let e = net.forward_dual(x, z).unwrap();
            for a in 0..3 {
                let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
                xp[a] += FD_STEP;
                xm[a] -= FD_STEP;
                let fd = (net.eval(&xp, z).unwrap()[0] - net.eval(&xm, z).unwrap()[0]) / (2.0 * FD_STEP);
                worst_x = worst_x.max(rel_err(e.input_gradient[a], fd));
            }
        }

        let b = pts.len() / 3;
        let up = Upstream::new(
            (0..b).map(|_| rng.random_range(-1.0..1.0)).collect(),
            (0..3 * b).map(|_| rng.random_range(-1.0..1.0)).collect(),
        );
        let objective = |n: &Network, z: Option<&[f64]>| -> f64 {
            let tape = n.forward(&pts, z, true).unwrap();
            let g = up.gradient.as_ref().unwrap();
            (0..b)
                .map(|i| up.value[i] * tape.value(i) + (0..3).map(|a| g[3 * i + a] * tape.gradient(i)[a]).sum::<f64>())
                .sum()
        };
        let grad = net.backward(&pts, z, &up).unwrap();
        for li in 0..net.layers().len() {
            let (rows, cols) = net.layers()[li].weight.dim();
            for r in 0..rows {
                for c in 0..=cols {
                    bump(&mut net, li, r, c, FD_STEP);
                    let fp = objective(&net, z);
                    bump(&mut net, li, r, c, -2.0 * FD_STEP);
                    let fm = objective(&net, z);
                    bump(&mut net, li, r, c, FD_STEP);
                    let an = if c < cols {
                        grad.layers[li].weight[[r, c]]
                    } else {
                        grad.layers[li].bias[r]
                    };
                    worst_theta = worst_theta.max(rel_err(an, (fp - fm) / (2.0 * FD_STEP)));
                }
            }
        }
        if let (Some(z), Some(gz)) = (z, &grad.latent) {
            for j in 0..latent_dim {
                let (mut zp, mut zm) = (z.to_vec(), z.to_vec());
                zp[j] += FD_STEP;
                zm[j] -= FD_STEP;
                let fd = (objective(&net, Some(&zp)) - objective(&net, Some(&zm))) / (2.0 * FD_STEP);
                worst_theta = worst_theta.max(rel_err(gz[j], fd));
            }
        }
    }
    outcome(
        worst_x < 1e-4 && worst_theta < 1e-4,
        format!("max rel err: input gradient {worst_x:.2e}, parameter gradient {worst_theta:.2e} (bar 1e-4)"),
    )
}

fn c2_enumeration(_: &Ctx) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut failures = Vec::new();
    let mut worst_grad = 0.0f64;
    let mut worst_value = 0.0f64;
    for k in 0..200 {
        let d = rng.random_range(2..=6);
        let mut ev: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..2.0)).collect();
        ev.sort_by(f64::total_cmp);
        let lambda = ev[0] / 2.0 + rng.random_range(1e-3..1.0);
        let prob = LinearProblem::from_diagonal(&ev, lambda).unwrap();
        let set = critical_points(&prob);
        let count = set.points.len();
        if !(3..=2 * d + 1).contains(&count) {
            failures.push(format!("draw {k}: {count} points"));
        }
        for c in &set.points {
            let (_, g, _) = sdfit_core::theory::linear_loss_grad_hess(&c.location, &prob);
            worst_grad = worst_grad.max(norm(&g));
        }
        let mins: Vec<_> = set.global_minima().collect();
        let pair = mins.len() == 2
            && mins
                .iter()
                .all(|c| c.location[0] != 0.0 && c.location[1..].iter().all(|v| *v == 0.0));
        if !pair {
            failures.push(format!("draw {k}: global minima are not exactly the q1 pair"));
        }
        for c in mins {
            worst_value = worst_value.max((c.value - prob.global_min_value()).abs());
        }
    }
    let pass = failures.is_empty() && worst_grad < 1e-9 && worst_value <= 1e-9;
    outcome(
        pass,
        format!(
            "{} failing draws; max |grad| {worst_grad:.1e}; max |value - closed form| {worst_value:.1e}",
            failures.len()
        ),
    )
}

fn c3_saddle_avoidance(_: &Ctx) -> Outcome {
    let prob = LinearProblem::from_diagonal(&[0.0, 0.5, 1.0], 0.1).unwrap();
    let q1 = prob.global_min().unwrap();
    let tol = 1e-8;
    let mut good = 0;
    for s in 0..100 {
        let q0 = normal_vec(3, &mut rng_stream(SEED, s));
        let r = gradient_descent(&prob, &q0, 0.01, 1_000_000, tol).unwrap();
        let last = r.last();
        let dist = norm(&[last[0] - q1[0], last[1], last[2]]).min(norm(&[last[0] + q1[0], last[1], last[2]]));
        if dist <= 10.0 * tol && r.label() == "global-min" {
            good += 1;
        }
    }
    let engineered = gradient_descent(&prob, &[0.0, 0.8, 0.0], 0.01, 1_000_000, tol).unwrap();
    let elsewhere = engineered.terminal == Some(CriticalKind::Origin);
    outcome(
        good == 100 && elsewhere,
        format!(
            "{good}/100 random starts at +-q1; start on the saddle's stable set ended at '{}'",
            engineered.label()
        ),
    )
}

fn c4_liapunov(_: &Ctx) -> Outcome {
    let prob = LinearProblem::from_diagonal(&[0.0, 0.5, 1.0], 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let samples: Vec<Vec<f64>> = (0..1000)
        .map(|_| loop {
            let mut q = normal_vec(3, &mut rng);
            q[0] = q[0].abs();
            if q[0] > 0.0 {
                break q;
            }
        })
        .collect();
    let checks = liapunov_check(&prob, &[1.0, 0.0, 0.0], &samples).unwrap();
    let mut worst_rel = 0.0f64;
    let mut max_deriv = f64::NEG_INFINITY;
    let mut h_ok = true;
    for c in &checks {
        let scale = c.dhdt_closed.abs().max(c.dhdt_chain.abs());
        if scale > 0.0 {
            worst_rel = worst_rel.max((c.dhdt_closed - c.dhdt_chain).abs() / scale);
        }
        max_deriv = max_deriv.max(c.dhdt_closed).max(c.dhdt_chain);
        h_ok &= (0.0..1.0).contains(&c.h);
    }
    outcome(
        worst_rel <= 1e-9 && max_deriv <= 1e-12 && h_ok,
        format!("max rel disagreement {worst_rel:.1e}; max derivative {max_deriv:.2e}; h in [0,1): {h_ok}"),
    )
}

fn c5_perturbation(_: &Ctx) -> Outcome {
    let sample = PlanarSample::random(500, 3, SEED).unwrap();
    let rows = perturbation_sweep(&sample, &[0.1, 0.05, 0.025], 0.1).unwrap();
    let lam_dec = rows.windows(2).all(|w| w[1].lambda1 < w[0].lambda1);
    let dev_dec = rows.windows(2).all(|w| w[1].u1_deviation < w[0].u1_deviation);
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let spread = ratios.iter().copied().fold(0.0, f64::max) / ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let table: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "eps {}: lambda1 {:.3e}, |u1-n| {:.3e}, lambda1/eps {:.3}",
                r.eps, r.lambda1, r.u1_deviation, r.ratio
            )
        })
        .collect();
    outcome(
        lam_dec && dev_dec && spread < 3.0,
        format!(
            "decreasing lambda1 {lam_dec}, |u1-n| {dev_dec}; ratio spread {spread:.2}x (bar 3x); {}",
            table.join("; ")
        ),
    )
}

const PROBE_CONFIG: &str = "[network]\nprofile = \"reduced\"\n[sdf_probe]\ndim = 3\nradius = 0.5\nhalf_width = 1.0\nband = 0.1\n[sdf_probe.schedule]\niters = 10000\nbatch_size = 512\n";

fn probe_run(ctx: &Ctx, run: &str, shape: &str) -> Result<f64, String> {
    let dir = ctx.dir(run, &format!("c6_{shape}"));
    let cfg = write_config(&ctx.root.join(run).join("c6_config"), PROBE_CONFIG);
    cli(&[
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "0",
        "--out",
        dir.to_str().unwrap(),
        "sdf-probe",
        shape,
    ])?;
    Ok(report(&dir)["error"]["mean"].as_f64().unwrap())
}

fn c6_sdf(ctx: &Ctx, run: &str) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for shape in ["plane", "sphere"] {
        let t = Instant::now();
        match probe_run(ctx, run, shape) {
            Ok(mean) => {
                let secs = t.elapsed().as_secs_f64();
                pass &= mean < 0.05 && secs < 600.0;
                parts.push(format!("{shape} mean rel err {mean:.4} in {secs:.0} s"));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{shape} failed: {e}"));
            }
        }
    }
    outcome(pass, format!("{} (bars: 0.05, 600 s each)", parts.join("; ")))
}

/// Whole-cloud data and Eikonal terms of a saved single-shape checkpoint.
fn fitted_terms(dir: &Path, cloud: &PointCloud) -> (f64, f64, f64) {
    let ck = load_checkpoint(dir.join("checkpoint.json")).unwrap();
    let local = ck
        .normalization
        .as_ref()
        .map_or_else(|| cloud.clone(), |s| cloud.transformed(s));
    let mut sampler = SamplerD::new(&local, 50, DEFAULT_BOX_MARGIN, rng_stream(SEED, 99)).unwrap();
    let global = sampler.sample(4096);
    let r = loss_report(
        &ck.network,
        None,
        local.points(),
        local.normals(),
        &global,
        &LossParams::default(),
    )
    .unwrap();
    let tape = ck.network.forward(&global, None, true).unwrap();
    let abs_resid = (0..tape.batch())
        .map(|i| (tape.gradient(i).dot(&tape.gradient(i)).sqrt() - 1.0).abs())
        .sum::<f64>()
        / tape.batch() as f64;
    (r.data_term, r.eikonal_term, abs_resid)
}

fn c7_fidelity(ctx: &Ctx, run: &str) -> Outcome {
    let cfg_dir = ctx.root.join(run).join("c7_config");
    let cfg = write_config(
        &cfg_dir,
        "[reconstruct]\nresolution = 128\n[reconstruct.schedule]\niters = 5000\nbatch_size = 256\n",
    );
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["circle", "lshape"] {
        let input = ctx.fixtures.join(format!("{name}.xyn"));
        let dir = ctx.dir(run, &format!("c7_{name}"));
        let t = Instant::now();
        if let Err(e) = cli(&[
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "0",
            "--out",
            dir.to_str().unwrap(),
            "reconstruct",
            input.to_str().unwrap(),
        ]) {
            pass = false;
            parts.push(format!("{name} failed: {e}"));
            continue;
        }
        let secs = t.elapsed().as_secs_f64();
        let cloud = read_point_cloud(&input).unwrap();
        let (data, eik, abs_resid) = fitted_terms(&dir, &cloud);
        let cell = report(&dir)["geometry"]["cell_size"].as_f64().unwrap();
        let chamfer = one_sided_chamfer(cloud.points(), &read_segments(&dir.join("contour.csv")));
        pass &= data < 0.01 && eik < 0.01 && chamfer < cell && secs < 300.0;
        parts.push(format!(
            "{name}: data {data:.4}, eikonal {eik:.4} (mean |grad|-1 {abs_resid:.4}), chamfer {chamfer:.4} vs cell {cell:.4}, {secs:.0} s"
        ));
    }
    outcome(
        pass,
        format!("{} (bars: 0.01, 0.01, one cell, 300 s)", parts.join("; ")),
    )
}

fn c8_plane(ctx: &Ctx, run: &str) -> Outcome {
    let dir = ctx.dir(run, "c8_plane");
    let base = ctx.root.join("c8_config");
    fs::create_dir_all(&base).unwrap();
    let normal = [1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0];
    let (e1, e2) = ([2.0 / 3.0, 1.0 / 3.0, -2.0 / 3.0], [2.0 / 3.0, -2.0 / 3.0, 1.0 / 3.0]);
    let offset = 0.2;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut text = String::new();
    let mut uv = Vec::new();
    for _ in 0..500 {
        let (u, v): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        uv.push((u, v));
        let p: Vec<f64> = (0..3).map(|a| offset * normal[a] + u * e1[a] + v * e2[a]).collect();
        text.push_str(&format!(
            "{} {} {} {} {} {}\n",
            p[0], p[1], p[2], normal[0], normal[1], normal[2]
        ));
    }
    let input = base.join("plane.xyzn");
    fs::write(&input, text).unwrap();
    let cfg = write_config(
        &base,
        "[reconstruct]\nresolution = 64\n[reconstruct.schedule]\niters = 2000\nbatch_size = 256\ninit_radius = 3.0\n",
    );
    let t = Instant::now();
    if let Err(e) = cli(&[
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "0",
        "--out",
        dir.to_str().unwrap(),
        "reconstruct",
        input.to_str().unwrap(),
    ]) {
        return outcome(false, format!("run failed: {e}"));
    }
    let secs = t.elapsed().as_secs_f64();
    let cell = report(&dir)["geometry"]["cell_size"].as_f64().unwrap();
    let inside: Vec<f64> = obj_vertices(&dir.join("mesh.obj"))
        .iter()
        .filter(|p| {
            let u: f64 = (0..3).map(|a| p[a] * e1[a]).sum();
            let v: f64 = (0..3).map(|a| p[a] * e2[a]).sum();
            u.abs() <= 1.0 && v.abs() <= 1.0
        })
        .map(|p| ((0..3).map(|a| p[a] * normal[a]).sum::<f64>() - offset).abs())
        .collect();
    let hausdorff = inside.iter().copied().fold(0.0, f64::max);
    outcome(
        !inside.is_empty() && hausdorff < 2.0 * cell && secs < 300.0,
        format!(
            "{} vertices inside the patch, one-sided Hausdorff {hausdorff:.4} vs 2 cells {:.4}; {secs:.0} s (bar 300 s)",
            inside.len(),
            2.0 * cell
        ),
    )
}

fn c9_extraction(ctx: &Ctx, run: &str) -> Outcome {
    let dir = ctx.dir(run, "c9");
    fs::create_dir_all(&dir).unwrap();
    let spec3 = GridSpec::new(Aabb::symmetric(3, 1.0), 64).unwrap();
    let sphere = GridField::from_fn(spec3.clone(), |p| norm(p) - 0.6).unwrap();
    let mesh = marching_cubes(&sphere, 0.0).unwrap();
    let euler = mesh.euler_characteristic();
    let haus = mesh.vertices.iter().map(|v| (norm(v) - 0.6).abs()).fold(0.0, f64::max);
    write_obj(fs::File::create(dir.join("sphere.obj")).unwrap(), &mesh).unwrap();

    let spec2 = GridSpec::new(Aabb::symmetric(2, 1.0), 64).unwrap();
    let circle = GridField::from_fn(spec2.clone(), |p| norm(p) - 0.6).unwrap();
    let contour = marching_squares(&circle, 0.0).unwrap();
    let radial = contour
        .vertices
        .iter()
        .map(|v| (norm(v) - 0.6).abs())
        .fold(0.0, f64::max);
    write_contour_csv(fs::File::create(dir.join("circle.csv")).unwrap(), &contour).unwrap();
    outcome(
        euler == 2 && haus < 2.0 * spec3.cell_size() && radial < spec2.cell_diagonal() && !contour.is_empty(),
        format!(
            "sphere: Euler {euler}, Hausdorff {haus:.2e} vs 2 cells {:.4}; circle: max radial deviation {radial:.2e} vs diagonal {:.4}",
            2.0 * spec3.cell_size(),
            spec2.cell_diagonal()
        ),
    )
}

const RADII: [f64; 5] = [0.3, 0.4, 0.6, 0.7, 0.8];

fn c10_shape_space(ctx: &Ctx, run: &str) -> Outcome {
    let base = ctx.root.join(run).join("c10_data");
    fs::create_dir_all(&base).unwrap();
    let mut inputs = Vec::new();
    for r in RADII {
        let p = base.join(format!("r{:02}.xyn", (r * 10.0).round() as i32));
        circle_file(&p, r, 200);
        inputs.push(p.to_str().unwrap().to_string());
    }
    let held_out = base.join("r05.xyn");
    circle_file(&held_out, 0.5, 200);
    let cfg = write_config(
        &base,
        "[shape_space]\nlatent_dim = 8\nresolution = 128\n[shape_space.schedule]\nepochs = 2000\nshapes_per_batch = 5\npoints_per_shape = 256\nlr_halving_interval = 1000\n[infer]\nresolution = 128\n[infer.schedule]\niters = 800\n[interpolate]\nresolution = 128\n",
    );
    let cfg = cfg.to_str().unwrap();
    let t = Instant::now();
    let train = ctx.dir(run, "c10_train");
    let infer = ctx.dir(run, "c10_infer");
    let blend = ctx.dir(run, "c10_blend");
    let mut args = vec![
        "--config",
        cfg,
        "--seed",
        "0",
        "--out",
        train.to_str().unwrap(),
        "shape-space",
    ];
    args.extend(inputs.iter().map(String::as_str));
    let steps = cli(&args)
        .and_then(|_| {
            cli(&[
                "--config",
                cfg,
                "--seed",
                "0",
                "--out",
                infer.to_str().unwrap(),
                "infer",
                "--checkpoint",
                train.join("checkpoint.json").to_str().unwrap(),
                held_out.to_str().unwrap(),
            ])
        })
        .and_then(|_| {
            cli(&[
                "--config",
                cfg,
                "--out",
                blend.to_str().unwrap(),
                "interpolate",
                "--checkpoint",
                train.join("checkpoint.json").to_str().unwrap(),
                "--latents",
                train.join("latents.csv").to_str().unwrap(),
                "--ids",
                "r03,r07",
                "--weights",
                "0.5,0.5",
            ])
        });
    if let Err(e) = steps {
        return outcome(false, format!("run failed: {e}"));
    }
    let secs = t.elapsed().as_secs_f64();

    let shapes = fs::read_to_string(train.join("shapes.csv")).unwrap();
    let data: Vec<(String, f64)> = shapes
        .lines()
        .skip(1)
        .map(|l| {
            let v: Vec<&str> = l.split(',').collect();
            (v[0].to_string(), v[1].parse().unwrap())
        })
        .collect();
    let worst = data.iter().map(|(_, d)| *d).fold(0.0, f64::max);

    let segs = read_segments(&infer.join("shape_r05.csv"));
    let verts: Vec<f64> = segs.iter().flat_map(|s| [s[0], s[1]]).collect();
    let truth: Vec<f64> = (0..1000)
        .flat_map(|i| {
            let t = std::f64::consts::TAU * i as f64 / 1000.0;
            [0.5 * t.cos(), 0.5 * t.sin()]
        })
        .collect();
    let chamfer = if verts.is_empty() {
        f64::INFINITY
    } else {
        let a = PointCloud::new(2, verts, None).unwrap();
        let b = PointCloud::new(2, truth, None).unwrap();
        set_distances(&a, &b).unwrap().chamfer
    };

    let bsegs = read_segments(&blend.join("blend.csv"));
    let mean_radius = if bsegs.is_empty() {
        f64::NAN
    } else {
        bsegs.iter().map(|s| norm(&[s[0], s[1]])).sum::<f64>() / bsegs.len() as f64
    };
    let pass = worst < 0.02 && chamfer < 0.05 && (0.35..=0.65).contains(&mean_radius) && secs < 900.0;
    let per_shape: Vec<String> = data.iter().map(|(id, d)| format!("{id} {d:.4}")).collect();
    outcome(
        pass,
        format!(
            "data terms [{}] (bar 0.02); held-out r=0.5 chamfer {chamfer:.4} (bar 0.05); blend mean radius {mean_radius:.3} (bar [0.35,0.65]); {secs:.0} s (bar 900 s)",
            per_shape.join(", ")
        ),
    )
}

fn files_under(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let Ok(entries) = fs::read_dir(&d) else { continue };
        for e in entries.flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else if matches!(
                p.extension().and_then(|x| x.to_str()),
                Some("csv" | "obj" | "svg" | "json")
            ) {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn c11_determinism(ctx: &Ctx, first: &[u32]) -> Outcome {
    let heavy: Vec<u32> = (6..=10).collect();
    if !heavy.iter().all(|c| first.contains(c)) {
        return outcome(false, "criteria 6-10 must run first in the same invocation");
    }
    c6_sdf(ctx, "b");
    c7_fidelity(ctx, "b");
    c8_plane(ctx, "b");
    c9_extraction(ctx, "b");
    c10_shape_space(ctx, "b");
    let a = files_under(&ctx.root.join("a"));
    let b = files_under(&ctx.root.join("b"));
    let differing: Vec<String> = a
        .iter()
        .filter(|(k, v)| b.get(*k) != Some(*v))
        .map(|(k, _)| k.display().to_string())
        .chain(
            b.keys()
                .filter(|k| !a.contains_key(*k))
                .map(|k| k.display().to_string()),
        )
        .collect();
    outcome(
        differing.is_empty() && !a.is_empty(),
        format!(
            "{} output files compared, {} differ{}",
            a.len(),
            differing.len(),
            if differing.is_empty() {
                String::new()
            } else {
                format!(": {}", differing.join(", "))
            }
        ),
    )
}

fn main() -> ExitCode {
    let selected: Vec<u32> = match std::env::var("SDFIT_ACCEPTANCE") {
        Ok(s) if !s.trim().is_empty() => s.split(',').filter_map(|t| t.trim().parse().ok()).collect(),
        _ => (1..=11).collect(),
    };
    let tmp = tempfile::tempdir().unwrap();
    let ctx = Ctx {
        root: tmp.path().to_path_buf(),
        fixtures: Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures"),
    };
    let names = [
        "",
        "gradient exactness",
        "critical point enumeration",
        "saddle avoidance",
        "Liapunov certificate",
        "planar perturbation trend",
        "SDF reproduction",
        "2D reconstruction fidelity",
        "plane reproduction",
        "extraction correctness",
        "shape space",
        "determinism",
    ];
    let budgets = [
        0.0,
        30.0,
        5.0,
        10.0,
        2.0,
        5.0,
        1200.0,
        600.0,
        300.0,
        5.0,
        900.0,
        f64::INFINITY,
    ];
    let mut failed = 0;
    let mut done = Vec::new();
    for &c in &selected {
        let t = Instant::now();
        let o = match c {
            1 => c1_gradients(&ctx),
            2 => c2_enumeration(&ctx),
            3 => c3_saddle_avoidance(&ctx),
            4 => c4_liapunov(&ctx),
            5 => c5_perturbation(&ctx),
            6 => c6_sdf(&ctx, "a"),
            7 => c7_fidelity(&ctx, "a"),
            8 => c8_plane(&ctx, "a"),
            9 => c9_extraction(&ctx, "a"),
            10 => c10_shape_space(&ctx, "a"),
            11 => c11_determinism(&ctx, &done),
            _ => continue,
        };
        let secs = t.elapsed().as_secs_f64();
        let pass = o.pass && secs < budgets[c as usize];
        if !pass {
            failed += 1;
        }
        let budget = if budgets[c as usize].is_finite() {
            format!(", limit {} s", budgets[c as usize])
        } else {
            String::new()
        };
        println!(
            "criterion {c} [{}]: {} - {} ({secs:.1} s{budget})",
            names[c as usize],
            if pass { "PASS" } else { "FAIL" },
            o.detail
        );
        done.push(c);
    }
    println!(
        "acceptance: {} of {} criteria passed",
        selected.len() - failed,
        selected.len()
    );
    let strict = std::env::var("SDFIT_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if failed == 0 || !strict {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
