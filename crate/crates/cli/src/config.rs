use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use sdfit_core::levelset::{DEFAULT_EXCLUSION_BAND, DEFAULT_RESOLUTION, MAX_RESOLUTION};
use sdfit_core::network::{NetworkSpec, DEFAULT_BETA};
use sdfit_core::training::{AutoDecoderSchedule, InferSchedule, LossParams, Schedule};

use crate::CliError;

/// Everything a run reads from the TOML config. Every section is optional;
/// unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Overrides every schedule seed when set.
    pub seed: Option<u64>,
    pub network: NetworkConfig,
    pub loss: LossParams,
    pub reconstruct: ReconstructConfig,
    pub sdf_probe: ProbeConfig,
    pub shape_space: ShapeSpaceConfig,
    pub infer: InferConfig,
    pub interpolate: InterpolateConfig,
    pub theory: TheoryConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Reduced,
    Full,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub profile: Profile,
    /// Override the profile's hidden width.
    pub width: Option<usize>,
    /// Override the profile's hidden depth.
    pub depth: Option<usize>,
    pub beta: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            profile: Profile::Reduced,
            width: None,
            depth: None,
            beta: DEFAULT_BETA,
        }
    }
}

impl NetworkConfig {
    pub fn spec(&self, input_dim: usize, latent_dim: usize) -> NetworkSpec {
        let (w, d) = match self.profile {
            Profile::Reduced => (128, 4),
            Profile::Full => (512, 8),
        };
        NetworkSpec::uniform(input_dim, latent_dim, self.width.unwrap_or(w), self.depth.unwrap_or(d))
            .with_beta(self.beta)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructConfig {
    pub input: Option<PathBuf>,
    /// Center at the centroid and scale the long side to 2.
    pub normalize: bool,
    pub resolution: usize,
    /// Grid box padding as a fraction of the cloud's bounding box.
    pub grid_margin: f64,
    pub schedule: Schedule,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        Self {
            input: None,
            normalize: true,
            resolution: DEFAULT_RESOLUTION,
            grid_margin: 0.2,
            schedule: Schedule::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub shape: Option<String>,
    pub dim: usize,
    /// Sphere radius.
    pub radius: f64,
    pub center: Option<Vec<f64>>,
    /// Plane normal; normalized on use.
    pub normal: Option<Vec<f64>>,
    /// Signed offset of the plane along its normal.
    pub offset: f64,
    /// Half-width of the cube the shape and the probe live in.
    pub half_width: f64,
    /// Size of the analytic reference cloud that sets the sampler's sigmas.
    pub reference_points: usize,
    pub samples: usize,
    pub band: f64,
    pub schedule: Schedule,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            shape: None,
            dim: 3,
            radius: 0.5,
            center: None,
            normal: None,
            offset: 0.0,
            half_width: 1.0,
            reference_points: 4096,
            samples: 10_000,
            band: DEFAULT_EXCLUSION_BAND,
            schedule: Schedule {
                iters: 10_000,
                ..Schedule::default()
            },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapeSpaceConfig {
    pub inputs: Vec<PathBuf>,
    /// Shape ids; defaults to the input file stems.
    pub ids: Vec<String>,
    pub latent_dim: usize,
    /// Normalize with one transform fitted to the union of all inputs.
    pub normalize: bool,
    pub resolution: usize,
    /// Half-width of the extraction cube in normalized coordinates.
    pub grid_half_width: f64,
    pub schedule: AutoDecoderSchedule,
}

impl Default for ShapeSpaceConfig {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            ids: Vec::new(),
            latent_dim: 8,
            normalize: true,
            resolution: DEFAULT_RESOLUTION,
            grid_half_width: 1.5,
            schedule: AutoDecoderSchedule::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferConfig {
    pub checkpoint: Option<PathBuf>,
    pub input: Option<PathBuf>,
    /// Row label in the written latent table.
    pub id: Option<String>,
    pub resolution: usize,
    pub grid_half_width: f64,
    pub schedule: InferSchedule,
}

impl Default for InferConfig {
    fn default() -> Self {
        Self {
            checkpoint: None,
            input: None,
            id: None,
            resolution: DEFAULT_RESOLUTION,
            grid_half_width: 1.5,
            schedule: InferSchedule::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterpolateConfig {
    pub checkpoint: Option<PathBuf>,
    pub latents: Option<PathBuf>,
    pub ids: Vec<String>,
    pub weights: Vec<f64>,
    pub resolution: usize,
    pub grid_half_width: f64,
}

impl Default for InterpolateConfig {
    fn default() -> Self {
        Self {
            checkpoint: None,
            latents: None,
            ids: Vec::new(),
            weights: Vec::new(),
            resolution: DEFAULT_RESOLUTION,
            grid_half_width: 1.5,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheoryConfig {
    pub dim: usize,
    pub lambda: f64,
    /// Deviation size of the planar sample.
    pub eps: f64,
    pub points: usize,
    /// Use `diag(eigvals)` instead of a planar sample.
    pub eigvals: Option<Vec<f64>>,
    pub runs: usize,
    /// Defaults to `0.5 / L` per start.
    pub alpha: Option<f64>,
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub liapunov_samples: usize,
    pub eps_sweep: Vec<f64>,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        Self {
            dim: 3,
            lambda: 0.1,
            eps: 0.0,
            points: 500,
            eigvals: None,
            runs: 100,
            alpha: None,
            tol: 1e-8,
            max_iters: 1_000_000,
            seed: 0,
            liapunov_samples: 1000,
            eps_sweep: vec![0.1, 0.05, 0.025],
        }
    }
}

impl RunConfig {
    /// Reads a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config error: {e}")))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.reconstruct.input.as_mut().map(fix);
        self.shape_space.inputs.iter_mut().for_each(fix);
        self.infer.checkpoint.as_mut().map(fix);
        self.infer.input.as_mut().map(fix);
        self.interpolate.checkpoint.as_mut().map(fix);
        self.interpolate.latents.as_mut().map(fix);
    }

    /// Applies `--seed` / the top-level `seed` to every schedule.
    pub fn apply_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.reconstruct.schedule.seed = seed;
        self.sdf_probe.schedule.seed = seed;
        self.shape_space.schedule.seed = seed;
        self.infer.schedule.seed = seed;
        self.theory.seed = seed;
    }

    /// Checks every numeric parameter, naming the first offending key.
    pub fn validate(&self) -> Result<(), CliError> {
        let net = &self.network;
        check(net.width.is_none_or(|w| w >= 1), "network.width", "must be positive")?;
        check(net.depth.is_none_or(|d| d >= 1), "network.depth", "must be positive")?;
        check(positive(net.beta), "network.beta", "must be positive")?;
        check(positive(self.loss.lambda), "loss.lambda", "must be positive")?;
        check(
            self.loss.tau == 0.0 || self.loss.tau == 1.0,
            "loss.tau",
            "must be 0 or 1",
        )?;
        check(
            self.loss.latent_reg >= 0.0 && self.loss.latent_reg.is_finite(),
            "loss.latent_reg",
            "must be non-negative",
        )?;

        let r = &self.reconstruct;
        resolution(r.resolution, "reconstruct.resolution")?;
        check(
            r.grid_margin >= 0.0 && r.grid_margin.is_finite(),
            "reconstruct.grid_margin",
            "must be non-negative",
        )?;
        schedule(&r.schedule, "reconstruct.schedule")?;

        let p = &self.sdf_probe;
        check(p.dim == 2 || p.dim == 3, "sdf_probe.dim", "must be 2 or 3")?;
        check(positive(p.radius), "sdf_probe.radius", "must be positive")?;
        check(positive(p.half_width), "sdf_probe.half_width", "must be positive")?;
        check(p.offset.is_finite(), "sdf_probe.offset", "must be finite")?;
        check(
            p.reference_points >= 2,
            "sdf_probe.reference_points",
            "must be at least 2",
        )?;
        check(p.samples >= 1, "sdf_probe.samples", "must be positive")?;
        check(
            p.band >= 0.0 && p.band.is_finite(),
            "sdf_probe.band",
            "must be non-negative",
        )?;
        if let Some(c) = &p.center {
            check(
                c.len() == p.dim && c.iter().all(|v| v.is_finite()),
                "sdf_probe.center",
                "must be a finite dim-vector",
            )?;
        }
        if let Some(n) = &p.normal {
            let norm = n.iter().map(|v| v * v).sum::<f64>().sqrt();
            check(
                n.len() == p.dim && positive(norm),
                "sdf_probe.normal",
                "must be a nonzero dim-vector",
            )?;
        }
        schedule(&p.schedule, "sdf_probe.schedule")?;

        let s = &self.shape_space;
        check(s.latent_dim >= 1, "shape_space.latent_dim", "must be positive")?;
        resolution(s.resolution, "shape_space.resolution")?;
        check(
            positive(s.grid_half_width),
            "shape_space.grid_half_width",
            "must be positive",
        )?;
        let d = &s.schedule;
        check(
            d.shapes_per_batch >= 1,
            "shape_space.schedule.shapes_per_batch",
            "must be positive",
        )?;
        check(
            d.points_per_shape >= 1,
            "shape_space.schedule.points_per_shape",
            "must be positive",
        )?;
        check(positive(d.lr), "shape_space.schedule.lr", "must be positive")?;
        check(
            positive(d.init_radius),
            "shape_space.schedule.init_radius",
            "must be positive",
        )?;
        check(d.knn_k >= 1, "shape_space.schedule.knn_k", "must be positive")?;

        let i = &self.infer;
        resolution(i.resolution, "infer.resolution")?;
        check(positive(i.grid_half_width), "infer.grid_half_width", "must be positive")?;
        check(
            i.schedule.batch_size >= 1,
            "infer.schedule.batch_size",
            "must be positive",
        )?;
        check(positive(i.schedule.lr), "infer.schedule.lr", "must be positive")?;
        check(i.schedule.knn_k >= 1, "infer.schedule.knn_k", "must be positive")?;

        let ip = &self.interpolate;
        resolution(ip.resolution, "interpolate.resolution")?;
        check(
            positive(ip.grid_half_width),
            "interpolate.grid_half_width",
            "must be positive",
        )?;
        check(
            ip.weights.iter().all(|w| *w >= 0.0 && w.is_finite()),
            "interpolate.weights",
            "must be non-negative",
        )?;

        let t = &self.theory;
        check(t.dim >= 2, "theory.dim", "must be at least 2")?;
        check(positive(t.lambda), "theory.lambda", "must be positive")?;
        check(t.eps >= 0.0 && t.eps.is_finite(), "theory.eps", "must be non-negative")?;
        check(t.points >= 1, "theory.points", "must be positive")?;
        check(t.runs >= 1, "theory.runs", "must be positive")?;
        check(t.alpha.is_none_or(positive), "theory.alpha", "must be positive")?;
        check(positive(t.tol), "theory.tol", "must be positive")?;
        check(
            t.eps_sweep.iter().all(|e| positive(*e)),
            "theory.eps_sweep",
            "entries must be positive",
        )?;
        if let Some(ev) = &t.eigvals {
            check(ev.len() >= 2, "theory.eigvals", "needs at least 2 entries")?;
            check(
                ev.iter().all(|v| *v >= 0.0 && v.is_finite()) && ev.windows(2).all(|w| w[0] <= w[1]),
                "theory.eigvals",
                "must be non-negative and ascending",
            )?;
        }
        Ok(())
    }
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

fn check(ok: bool, key: &str, msg: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Usage(format!("config key {key}: {msg}")))
    }
}

fn resolution(v: usize, key: &str) -> Result<(), CliError> {
    check(
        (2..=MAX_RESOLUTION).contains(&v),
        key,
        &format!("must be in 2..={MAX_RESOLUTION}"),
    )
}

fn schedule(s: &Schedule, key: &str) -> Result<(), CliError> {
    check(s.batch_size >= 1, &format!("{key}.batch_size"), "must be positive")?;
    check(positive(s.lr), &format!("{key}.lr"), "must be positive")?;
    check(
        positive(s.init_radius),
        &format!("{key}.init_radius"),
        "must be positive",
    )?;
    check(s.knn_k >= 1, &format!("{key}.knn_k"), "must be positive")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn usage(r: Result<impl std::fmt::Debug, CliError>) -> String {
        match r {
            Err(CliError::Usage(m)) => m,
            other => panic!("expected a usage error, got {other:?}"),
        }
    }

    #[test]
    fn empty_config_is_default_and_valid() {
        let cfg = RunConfig::parse("").unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.network.profile, Profile::Reduced);
        assert_eq!(cfg.theory.runs, 100);
        assert_eq!(cfg.sdf_probe.schedule.iters, 10_000);
    }

    #[test]
    fn nested_sections_parse() {
        let cfg = RunConfig::parse(
            "seed = 7\n[network]\nprofile = \"full\"\nwidth = 64\n[loss]\nlambda = 0.2\n[reconstruct.schedule]\niters = 12\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, Some(7));
        assert_eq!(cfg.network.profile, Profile::Full);
        assert_eq!(cfg.network.spec(3, 0), NetworkSpec::uniform(3, 0, 64, 8));
        assert_eq!(cfg.loss.lambda, 0.2);
        assert_eq!(cfg.reconstruct.schedule.iters, 12);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(usage(RunConfig::parse("bogus = 1")).contains("bogus"));
        assert!(usage(RunConfig::parse("[reconstruct]\nresolutoin = 3")).contains("resolutoin"));
        assert!(usage(RunConfig::parse("[loss]\neta = 1")).contains("eta"));
    }

    #[test]
    fn validation_names_the_key() {
        let mut cfg = RunConfig::default();
        cfg.loss.lambda = 0.0;
        assert!(usage(cfg.validate()).contains("loss.lambda"));

        let mut cfg = RunConfig::default();
        cfg.reconstruct.resolution = 1;
        assert!(usage(cfg.validate()).contains("reconstruct.resolution"));

        let mut cfg = RunConfig::default();
        cfg.theory.eigvals = Some(vec![1.0, 0.5]);
        assert!(usage(cfg.validate()).contains("theory.eigvals"));

        let mut cfg = RunConfig::default();
        cfg.loss.tau = 0.5;
        assert!(usage(cfg.validate()).contains("loss.tau"));
    }

    #[test]
    fn seed_reaches_every_schedule() {
        let mut cfg = RunConfig::default();
        cfg.apply_seed(42);
        assert_eq!(cfg.reconstruct.schedule.seed, 42);
        assert_eq!(cfg.sdf_probe.schedule.seed, 42);
        assert_eq!(cfg.shape_space.schedule.seed, 42);
        assert_eq!(cfg.infer.schedule.seed, 42);
        assert_eq!(cfg.theory.seed, 42);
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(
            &path,
            "[reconstruct]\ninput = \"data/a.xy\"\n[shape_space]\ninputs = [\"/abs/b.xy\"]\n",
        )
        .unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.reconstruct.input.unwrap(), dir.path().join("data/a.xy"));
        assert_eq!(cfg.shape_space.inputs, vec![PathBuf::from("/abs/b.xy")]);
    }
}
