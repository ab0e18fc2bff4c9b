use rayon::prelude::*;

use super::{LossParams, LossReport};
use crate::error::{invalid, Error, Result};
use crate::network::{Network, ParamGradient, Upstream};

/// Points per parallel work item. Fixed, so results do not depend on the
/// thread count.
pub const LOSS_CHUNK: usize = 128;

#[derive(Clone, Copy)]
enum Job {
    Surface(usize, usize),
    Global(usize, usize),
}

struct Partial {
    data: f64,
    normal: f64,
    eikonal: f64,
    grad: Option<ParamGradient>,
}

/// Evaluates the loss on a surface batch (with optional normals) and a set
/// of global samples, and its gradient with respect to the parameters and
/// the latent vector.
pub fn loss_eval(
    net: &Network,
    latent: Option<&[f64]>,
    points: &[f64],
    normals: Option<&[f64]>,
    global: &[f64],
    params: &LossParams,
) -> Result<(LossReport, ParamGradient)> {
    let (report, grad) = evaluate(net, latent, points, normals, global, params, true)?;
    Ok((report, grad.expect("gradient requested")))
}

/// Loss terms only, without the backward pass.
pub fn loss_report(
    net: &Network,
    latent: Option<&[f64]>,
    points: &[f64],
    normals: Option<&[f64]>,
    global: &[f64],
    params: &LossParams,
) -> Result<LossReport> {
    Ok(evaluate(net, latent, points, normals, global, params, false)?.0)
}

fn evaluate(
    net: &Network,
    latent: Option<&[f64]>,
    points: &[f64],
    normals: Option<&[f64]>,
    global: &[f64],
    params: &LossParams,
    want_grad: bool,
) -> Result<(LossReport, Option<ParamGradient>)> {
    params.validate()?;
    let d = net.spec().input_dim;
    let n = net.check_inputs(points, latent)?;
    let m = net.check_inputs(global, latent)?;
    let normals = match (params.tau == 1.0, normals) {
        (true, None) => return invalid("tau = 1 requires normals"),
        (true, Some(nr)) if nr.len() != points.len() => return invalid("normals must match the surface batch"),
        (true, nr) => nr,
        (false, _) => None,
    };

    let mut jobs = Vec::new();
    jobs.extend(
        (0..n)
            .step_by(LOSS_CHUNK)
            .map(|s| Job::Surface(s, (s + LOSS_CHUNK).min(n))),
    );
    jobs.extend(
        (0..m)
            .step_by(LOSS_CHUNK)
            .map(|s| Job::Global(s, (s + LOSS_CHUNK).min(m))),
    );
    let partials: Vec<Result<Partial>> = jobs
        .par_iter()
        .map(|job| match *job {
            Job::Surface(a, b) => surface_chunk(
                net,
                latent,
                &points[a * d..b * d],
                normals.map(|nr| &nr[a * d..b * d]),
                n,
                params,
                want_grad,
            ),
            Job::Global(a, b) => global_chunk(net, latent, &global[a * d..b * d], m, params, want_grad),
        })
        .collect();

    let (mut data, mut normal, mut eikonal) = (0.0, 0.0, 0.0);
    let mut grad = want_grad.then(|| ParamGradient::zeros_like(net));
    for p in partials {
        let p = p?;
        data += p.data;
        normal += p.normal;
        eikonal += p.eikonal;
        if let (Some(g), Some(pg)) = (grad.as_mut(), p.grad.as_ref()) {
            g.add_scaled(pg, 1.0);
        }
    }
    data /= n as f64;
    normal /= n as f64;
    eikonal /= m as f64;

    let latent_norm = latent.map_or(0.0, |z| z.iter().map(|v| v * v).sum::<f64>().sqrt());
    if let (Some(g), Some(z)) = (grad.as_mut(), latent) {
        if latent_norm > 0.0 {
            let gz = g.latent.as_mut().expect("latent gradient");
            for (a, v) in gz.iter_mut().zip(z) {
                *a += params.latent_reg * v / latent_norm;
            }
        }
    }

    let report = LossReport::from_terms(params, data, normal, eikonal, latent_norm);
    for (name, v) in [
        ("data term", report.data_term),
        ("normal term", report.normal_term),
        ("eikonal term", report.eikonal_term),
        ("latent term", report.latent_term),
    ] {
        if !v.is_finite() {
            return Err(Error::NonFinite { term: name.into() });
        }
    }
    Ok((report, grad))
}

fn surface_chunk(
    net: &Network,
    latent: Option<&[f64]>,
    points: &[f64],
    normals: Option<&[f64]>,
    n_total: usize,
    params: &LossParams,
    want_grad: bool,
) -> Result<Partial> {
    let d = net.spec().input_dim;
    let tape = net.forward(points, latent, normals.is_some())?;
    let b = tape.batch();
    let scale = 1.0 / n_total as f64;
    let mut data = 0.0;
    let mut w_value = vec![0.0; b];
    for (i, w) in w_value.iter_mut().enumerate() {
        let f = tape.value(i);
        data += f.abs();
        *w = scale * sign(f);
    }
    let mut normal = 0.0;
    let mut w_grad = None;
    if let Some(nr) = normals {
        let mut wg = vec![0.0; b * d];
        for i in 0..b {
            let g = tape.gradient(i);
            let r: Vec<f64> = (0..d).map(|a| g[a] - nr[i * d + a]).collect();
            let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            normal += norm;
            if norm > 0.0 {
                for a in 0..d {
                    wg[i * d + a] = params.tau * scale * r[a] / norm;
                }
            }
        }
        w_grad = Some(wg);
    }
    let grad = if want_grad {
        let up = match w_grad {
            Some(wg) => Upstream::new(w_value, wg),
            None => Upstream::value_only(w_value),
        };
        Some(net.backward_tape(&tape, &up)?)
    } else {
        None
    };
    Ok(Partial {
        data,
        normal,
        eikonal: 0.0,
        grad,
    })
}

fn global_chunk(
    net: &Network,
    latent: Option<&[f64]>,
    points: &[f64],
    m_total: usize,
    params: &LossParams,
    want_grad: bool,
) -> Result<Partial> {
    let d = net.spec().input_dim;
    let tape = net.forward(points, latent, true)?;
    let b = tape.batch();
    let scale = 1.0 / m_total as f64;
    let mut eikonal = 0.0;
    let mut wg = vec![0.0; b * d];
    for i in 0..b {
        let g = tape.gradient(i);
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        eikonal += (norm - 1.0) * (norm - 1.0);
        if norm > 0.0 {
            let c = params.lambda * scale * 2.0 * (norm - 1.0) / norm;
            for a in 0..d {
                wg[i * d + a] = c * g[a];
            }
        }
    }
    let grad = if want_grad {
        Some(net.backward_tape(&tape, &Upstream::new(vec![0.0; b], wg))?)
    } else {
        None
    };
    Ok(Partial {
        data: 0.0,
        normal: 0.0,
        eikonal,
        grad,
    })
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}
