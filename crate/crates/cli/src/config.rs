//! Experiment configuration: a flat `key = value` file with dotted keys.
//!
//! ```text
//! # Figure 1 setting
//! model.lambda = 0.05
//! model.law = pareto
//! model.alpha = 2.5
//! model.kernel = all
//! window.core = 256
//! ```
//!
//! Blank lines and `#` comments are ignored. Unknown keys, repeated keys and
//! keys that do not apply to the chosen radius law are errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use hcthin_core::simulate::DEFAULT_BIAS_TARGET;
use hcthin_core::{Accuracy, Dim, ModelSpec, RadiusLaw, TabulatedLaw, WeightKernel, Window};
use sha2::{Digest, Sha256};

/// A grid of lags or radii.
#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    List(Vec<f64>),
    /// `count` geometrically spaced points from `lo` to `hi`.
    Log {
        lo: f64,
        hi: f64,
        count: usize,
    },
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        match self {
            Self::List(v) => v.clone(),
            Self::Log { lo, hi, count } => {
                if *count == 1 {
                    return vec![*lo];
                }
                let step = (hi / lo).ln() / (*count - 1) as f64;
                (0..*count)
                    .map(|i| {
                        if i + 1 == *count {
                            *hi
                        } else {
                            lo * (step * i as f64).exp()
                        }
                    })
                    .collect()
            }
        }
    }

    fn parse(s: &str) -> Result<Self> {
        if let Some(rest) = s.strip_prefix("log:") {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 {
                bail!("expected log:<lo>:<hi>:<count>, got {s:?}");
            }
            let lo: f64 = parse_num(parts[0])?;
            let hi: f64 = parse_num(parts[1])?;
            let count: usize = parse_num(parts[2])?;
            if !(lo > 0.0 && hi > lo && count >= 1) {
                bail!("log grid needs 0 < lo < hi and count >= 1, got {s:?}");
            }
            return Ok(Self::Log { lo, hi, count });
        }
        let v = parse_list(s)?;
        if v.is_empty() || v.windows(2).any(|w| w[1] <= w[0]) || v[0] < 0.0 {
            bail!("grid must be non-negative and strictly increasing, got {s:?}");
        }
        Ok(Self::List(v))
    }

    fn emit(&self) -> String {
        match self {
            Self::List(v) => join(v),
            Self::Log { lo, hi, count } => format!("log:{lo}:{hi}:{count}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LawConfig {
    Pareto { alpha: f64, scale: f64 },
    Deterministic { radius: f64 },
    Tabulated { table: PathBuf },
}

impl LawConfig {
    pub fn build(&self) -> Result<RadiusLaw> {
        Ok(match self {
            Self::Pareto { alpha, scale } => RadiusLaw::pareto(*alpha, *scale)?,
            Self::Deterministic { radius } => RadiusLaw::deterministic(*radius)?,
            Self::Tabulated { table } => RadiusLaw::Tabulated(
                TabulatedLaw::from_path(table)
                    .with_context(|| format!("model.table: reading {}", table.display()))?,
            ),
        })
    }
}

/// One kernel or all four.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelChoice {
    One(WeightKernel),
    All,
}

impl KernelChoice {
    pub fn kernels(self) -> Vec<WeightKernel> {
        match self {
            Self::One(k) => vec![k],
            Self::All => WeightKernel::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub lambda: f64,
    pub law: LawConfig,
    pub kernel: KernelChoice,
    pub dim: u32,
    /// Core side lengths; a single value means a cube.
    pub core: Vec<f64>,
    /// `None` picks the default margin from `bias_target`.
    pub margin: Option<f64>,
    pub bias_target: f64,
    pub replications: u64,
    pub seed: u64,
    /// Jittered probes per axis for the volume fraction.
    pub volume_probes: usize,
    pub covariance_probes: usize,
    pub pair_half_width: f64,
    /// Lags at which simulation and analytics are compared.
    pub lags: Grid,
    /// Radii for tail and retention curves.
    pub radii: Grid,
    /// Long-range grid for analytic curves.
    pub curve: Grid,
    pub fit_range: (f64, f64),
    pub sigma: f64,
    pub slope_tolerance: f64,
    pub accuracy: Accuracy,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            lambda: 0.05,
            law: LawConfig::Pareto {
                alpha: 2.5,
                scale: 1.0,
            },
            kernel: KernelChoice::All,
            dim: 2,
            core: vec![256.0],
            margin: None,
            bias_target: DEFAULT_BIAS_TARGET,
            replications: 50,
            seed: 1,
            volume_probes: 128,
            covariance_probes: 4096,
            pair_half_width: 1.0,
            lags: Grid::List(vec![4.0, 8.0, 16.0, 32.0]),
            radii: Grid::Log {
                lo: 1.0,
                hi: 100.0,
                count: 9,
            },
            curve: Grid::Log {
                lo: 100.0,
                hi: 10_000.0,
                count: 9,
            },
            fit_range: (100.0, 10_000.0),
            sigma: 3.0,
            slope_tolerance: 0.15,
            accuracy: Accuracy::default(),
            output: PathBuf::from("out"),
        }
    }
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.trim()
        .parse::<T>()
        .map_err(|e| anyhow!("{:?}: {e}", s.trim()))
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(parse_num).collect()
}

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        let mut law_name = "pareto".to_string();
        let mut alpha = None;
        let mut scale = None;
        let mut radius = None;
        let mut table = None;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", n + 1))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                bail!("line {}: {key} given twice", n + 1);
            }
            let ctx = || format!("line {}: {key}", n + 1);
            match key {
                "model.lambda" => cfg.lambda = parse_num(value).with_context(ctx)?,
                "model.law" => law_name = value.to_string(),
                "model.alpha" => alpha = Some(parse_num(value).with_context(ctx)?),
                "model.scale" => scale = Some(parse_num(value).with_context(ctx)?),
                "model.radius" => radius = Some(parse_num(value).with_context(ctx)?),
                "model.table" => table = Some(PathBuf::from(value)),
                "model.kernel" => {
                    cfg.kernel = if value == "all" {
                        KernelChoice::All
                    } else {
                        KernelChoice::One(WeightKernel::from_name(value).with_context(ctx)?)
                    }
                }
                "model.dim" => cfg.dim = parse_num(value).with_context(ctx)?,
                "window.core" => cfg.core = parse_list(value).with_context(ctx)?,
                "window.margin" => {
                    cfg.margin = if value == "auto" {
                        None
                    } else {
                        Some(parse_num(value).with_context(ctx)?)
                    }
                }
                "window.bias_target" => cfg.bias_target = parse_num(value).with_context(ctx)?,
                "sim.replications" => cfg.replications = parse_num(value).with_context(ctx)?,
                "sim.seed" => cfg.seed = parse_num(value).with_context(ctx)?,
                "sim.volume_probes" => cfg.volume_probes = parse_num(value).with_context(ctx)?,
                "sim.covariance_probes" => {
                    cfg.covariance_probes = parse_num(value).with_context(ctx)?
                }
                "sim.pair_half_width" => {
                    cfg.pair_half_width = parse_num(value).with_context(ctx)?
                }
                "grid.lags" => cfg.lags = Grid::parse(value).with_context(ctx)?,
                "grid.radii" => cfg.radii = Grid::parse(value).with_context(ctx)?,
                "grid.curve" => cfg.curve = Grid::parse(value).with_context(ctx)?,
                "fit.range" => {
                    let v = parse_list(value).with_context(ctx)?;
                    if v.len() != 2 {
                        bail!("{}: expected lo,hi", ctx());
                    }
                    cfg.fit_range = (v[0], v[1]);
                }
                "compare.sigma" => cfg.sigma = parse_num(value).with_context(ctx)?,
                "compare.slope_tolerance" => {
                    cfg.slope_tolerance = parse_num(value).with_context(ctx)?
                }
                "accuracy.single" => cfg.accuracy.single = parse_num(value).with_context(ctx)?,
                "accuracy.nested" => cfg.accuracy.nested = parse_num(value).with_context(ctx)?,
                "output.dir" => cfg.output = PathBuf::from(value),
                _ => bail!("line {}: unknown key {key}", n + 1),
            }
        }
        let stray = |name: &str, present: bool| -> Result<()> {
            if present {
                bail!("model.{name} does not apply to the {law_name} law");
            }
            Ok(())
        };
        cfg.law = match law_name.as_str() {
            "pareto" => {
                stray("radius", radius.is_some())?;
                stray("table", table.is_some())?;
                LawConfig::Pareto {
                    alpha: alpha.unwrap_or(2.5),
                    scale: scale.unwrap_or(1.0),
                }
            }
            "deterministic" => {
                stray("alpha", alpha.is_some())?;
                stray("scale", scale.is_some())?;
                stray("table", table.is_some())?;
                LawConfig::Deterministic {
                    radius: radius.unwrap_or(1.0),
                }
            }
            "tabulated" => {
                stray("alpha", alpha.is_some())?;
                stray("scale", scale.is_some())?;
                stray("radius", radius.is_some())?;
                LawConfig::Tabulated {
                    table: table.ok_or_else(|| anyhow!("model.table is required"))?,
                }
            }
            other => bail!("model.law: unknown law {other:?}"),
        };
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Canonical text form; `parse(emit(c)) == c`.
    pub fn emit(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("model.lambda", self.lambda.to_string());
        match &self.law {
            LawConfig::Pareto { alpha, scale } => {
                put("model.law", "pareto".into());
                put("model.alpha", alpha.to_string());
                put("model.scale", scale.to_string());
            }
            LawConfig::Deterministic { radius } => {
                put("model.law", "deterministic".into());
                put("model.radius", radius.to_string());
            }
            LawConfig::Tabulated { table } => {
                put("model.law", "tabulated".into());
                put("model.table", table.display().to_string());
            }
        }
        put(
            "model.kernel",
            match self.kernel {
                KernelChoice::All => "all".into(),
                KernelChoice::One(k) => k.name().into(),
            },
        );
        put("model.dim", self.dim.to_string());
        put("window.core", join(&self.core));
        put(
            "window.margin",
            self.margin.map_or("auto".into(), |m| m.to_string()),
        );
        put("window.bias_target", self.bias_target.to_string());
        put("sim.replications", self.replications.to_string());
        put("sim.seed", self.seed.to_string());
        put("sim.volume_probes", self.volume_probes.to_string());
        put("sim.covariance_probes", self.covariance_probes.to_string());
        put("sim.pair_half_width", self.pair_half_width.to_string());
        put("grid.lags", self.lags.emit());
        put("grid.radii", self.radii.emit());
        put("grid.curve", self.curve.emit());
        put("fit.range", join(&[self.fit_range.0, self.fit_range.1]));
        put("compare.sigma", self.sigma.to_string());
        put("compare.slope_tolerance", self.slope_tolerance.to_string());
        put("accuracy.single", self.accuracy.single.to_string());
        put("accuracy.nested", self.accuracy.nested.to_string());
        put("output.dir", self.output.display().to_string());
        s
    }

    /// First 16 hex digits of the SHA-256 of [`ExperimentConfig::emit`],
    /// leaving out the output directory.
    pub fn hash(&self) -> String {
        let text: String = self
            .emit()
            .lines()
            .filter(|l| !l.starts_with("output.dir"))
            .map(|l| format!("{l}\n"))
            .collect();
        let digest = Sha256::digest(text.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Ten times fewer replications (at least two) and a ten times smaller
    /// core.
    pub fn quick(&mut self) {
        self.replications = self.replications.div_ceil(10).max(2);
        for side in &mut self.core {
            *side /= 10.0;
        }
    }

    /// Checks every field before any work starts.
    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, ok: bool, what: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(anyhow!("invalid {name}: {what}"))
            }
        };
        field(
            "model.lambda",
            self.lambda > 0.0 && self.lambda.is_finite(),
            "must be positive",
        )?;
        field(
            "model.dim",
            (1..=Dim::MAX_SIMULATION).contains(&self.dim),
            "must be 1, 2 or 3",
        )?;
        let law = self.law.build()?;
        law.check_dimension(self.dim)?;
        field(
            "window.core",
            self.core.len() == 1 || self.core.len() == self.dim as usize,
            "give one side or one per dimension",
        )?;
        field(
            "window.core",
            self.core.iter().all(|s| *s > 0.0 && s.is_finite()),
            "sides must be positive",
        )?;
        if let Some(m) = self.margin {
            field("window.margin", m >= 0.0 && m.is_finite(), "must be >= 0")?;
        }
        field(
            "window.bias_target",
            self.bias_target > 0.0,
            "must be positive",
        )?;
        field(
            "sim.replications",
            self.replications >= 1,
            "must be at least 1",
        )?;
        field(
            "sim.volume_probes",
            self.volume_probes >= 1,
            "must be at least 1",
        )?;
        field(
            "sim.covariance_probes",
            self.covariance_probes >= 1,
            "must be at least 1",
        )?;
        field(
            "sim.pair_half_width",
            self.pair_half_width > 0.0,
            "must be positive",
        )?;
        field(
            "fit.range",
            self.fit_range.0 > 0.0 && self.fit_range.1 > self.fit_range.0,
            "need 0 < lo < hi",
        )?;
        field("compare.sigma", self.sigma > 0.0, "must be positive")?;
        field(
            "compare.slope_tolerance",
            self.slope_tolerance > 0.0,
            "must be positive",
        )?;
        field(
            "accuracy.single",
            self.accuracy.single > 0.0 && self.accuracy.single < 1.0,
            "must be in (0, 1)",
        )?;
        field(
            "accuracy.nested",
            self.accuracy.nested > 0.0 && self.accuracy.nested < 1.0,
            "must be in (0, 1)",
        )?;
        Ok(())
    }

    pub fn dimension(&self) -> Result<Dim> {
        Ok(Dim::new(self.dim)?)
    }

    pub fn spec(&self, kernel: WeightKernel) -> Result<ModelSpec> {
        Ok(
            ModelSpec::new(self.lambda, self.law.build()?, kernel, self.dimension()?)?
                .with_accuracy(self.accuracy),
        )
    }

    /// The core `[0, side_i]` with the configured or default margin.
    pub fn window(&self) -> Result<Window> {
        let d = self.dim as usize;
        let sides = if self.core.len() == 1 {
            vec![self.core[0]; d]
        } else {
            self.core.clone()
        };
        let core = Window::new(self.dimension()?, &vec![0.0; d], &sides, 0.0)?;
        let margin = match self.margin {
            Some(m) => m,
            None => core.default_margin(self.lambda, &self.law.build()?, self.bias_target)?,
        };
        Ok(core.with_margin(margin)?)
    }

    /// Header lines carried by every output file.
    pub fn header(&self) -> Vec<String> {
        vec![format!("config_hash={}", self.hash())]
    }
}
