use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use sdfit_core::theory::{
    critical_points, default_alpha, diagonalize, gradient_descent, liapunov_check, perturbation_sweep, Descent,
    LinearProblem, PlanarSample,
};
use sdfit_core::training::rng_stream;

use crate::config::RunConfig;
use crate::output::OutDir;
use crate::CliError;

pub const SUMMARY_FILE: &str = "summary.txt";

/// Counts from a verification run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Summary {
    pub runs: usize,
    pub global: usize,
    pub warn: bool,
    pub degenerate: bool,
    pub non_monotone: usize,
    pub liapunov_violations: usize,
}

impl Summary {
    pub fn headline(&self) -> String {
        format!("{}/{} runs reached a global minimum", self.global, self.runs)
    }

    pub fn flags(&self) -> String {
        format!(
            "flags: warn={} degenerate={} non_monotone={} liapunov_violations={}",
            u8::from(self.warn),
            u8::from(self.degenerate),
            self.non_monotone,
            self.liapunov_violations
        )
    }
}

fn normal_vec(d: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn columns(prefix: &str, d: usize) -> String {
    (0..d).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>().join(",")
}

/// Critical points, seeded gradient descent, the Liapunov certificate and
/// the planar ε sweep. Writes CSVs and prints the summary line.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    let tc = &cfg.theory;
    let sample = PlanarSample::random(tc.points, tc.dim, tc.seed)?;
    let prob = match &tc.eigvals {
        Some(ev) => LinearProblem::from_diagonal(ev, tc.lambda)?,
        None => diagonalize(&sample.points(tc.eps), tc.lambda)?,
    };
    let d = prob.dim();
    let out = OutDir::acquire(out_dir)?;

    let crit = critical_points(&prob);
    if let Some(w) = &crit.warning {
        println!("warning: {w}");
    }
    if crit.degenerate {
        println!("warning: repeated eigenvalues; axis critical points depend on the chosen basis");
    }
    out.write("critical_points.csv", |w| {
        writeln!(w, "kind,value,{},{}", columns("q", d), columns("hess_eig", d))?;
        for c in &crit.points {
            writeln!(
                w,
                "{},{},{},{}",
                c.kind.label(),
                c.value,
                join(&c.location),
                join(&c.hessian_eigs)
            )?;
        }
        Ok(())
    })?;

    let runs: Vec<(u64, Descent)> = (0..tc.runs as u64)
        .into_par_iter()
        .map(|s| {
            let q0 = normal_vec(d, &mut rng_stream(tc.seed, s));
            let alpha = tc.alpha.unwrap_or_else(|| default_alpha(&prob, &q0));
            gradient_descent(&prob, &q0, alpha, tc.max_iters, tc.tol).map(|r| (s, r))
        })
        .collect::<Result<_, _>>()?;
    out.write("runs.csv", |w| {
        writeln!(w, "seed,label,iterations,final_loss")?;
        for (s, r) in &runs {
            writeln!(w, "{s},{},{},{}", r.label(), r.iterations(), r.final_loss())?;
        }
        Ok(())
    })?;

    let mut liapunov_violations = 0;
    let planar = prob.eigvals[0] <= 1e-12 * prob.eigvals[d - 1].max(1.0) && prob.has_global_pair();
    if planar && tc.liapunov_samples > 0 {
        let mut v = vec![0.0; d];
        v[0] = 1.0;
        let mut rng = rng_stream(tc.seed, tc.runs as u64);
        let samples: Vec<Vec<f64>> = (0..tc.liapunov_samples)
            .map(|_| loop {
                let mut q = normal_vec(d, &mut rng);
                q[0] = q[0].abs();
                if q[0] > 0.0 {
                    break q;
                }
            })
            .collect();
        let checks = liapunov_check(&prob, &v, &samples)?;
        out.write("liapunov.csv", |w| {
            writeln!(w, "{},h,dhdt_closed,dhdt_chain", columns("q", d))?;
            for (q, c) in samples.iter().zip(&checks) {
                writeln!(w, "{},{},{},{}", join(q), c.h, c.dhdt_closed, c.dhdt_chain)?;
            }
            Ok(())
        })?;
        liapunov_violations = checks
            .iter()
            .filter(|c| {
                let scale = c.dhdt_closed.abs().max(c.dhdt_chain.abs());
                c.dhdt_closed > 1e-12
                    || c.dhdt_chain > 1e-12
                    || (c.dhdt_closed - c.dhdt_chain).abs() > 1e-9 * scale
                    || !(0.0..1.0).contains(&c.h)
            })
            .count();
    } else {
        println!(
            "liapunov check skipped: it needs lambda_1 = 0 (got {})",
            prob.eigvals[0]
        );
    }

    if !tc.eps_sweep.is_empty() {
        let rows = perturbation_sweep(&sample, &tc.eps_sweep, tc.lambda)?;
        out.write("perturbation.csv", |w| {
            writeln!(w, "eps,lambda1,u1_deviation,ratio")?;
            for r in &rows {
                writeln!(w, "{},{},{},{}", r.eps, r.lambda1, r.u1_deviation, r.ratio)?;
            }
            Ok(())
        })?;
    }

    let summary = Summary {
        runs: runs.len(),
        global: runs.iter().filter(|(_, r)| r.label() == "global-min").count(),
        warn: crit.warning.is_some(),
        degenerate: crit.degenerate,
        non_monotone: runs.iter().filter(|(_, r)| r.alpha_ok && !r.monotone).count(),
        liapunov_violations,
    };
    out.write(SUMMARY_FILE, |w| {
        writeln!(w, "{}", summary.headline())?;
        writeln!(w, "{}", summary.flags())?;
        Ok(())
    })?;
    println!("{}", summary.headline());
    println!("{}", summary.flags());
    Ok(())
}
