//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # comments start with '#'
//! experiment   = invariance          # verify | invariance | concentration | jacobian
//! dim          = 3                   # matrix size d of SO(d)
//! n_list       = 8, 32, 128          # partition counts; each a multiple of g_partition
//! alpha        = 0.75                # radius exponent, R_N = scale * N^alpha
//! scale        = 1.0
//! radius       = 5.0                 # optional fixed radius (verify, jacobian)
//! g_partition  = 8                   # coarse partition g is authored on
//! g_coords     = 0.1, -0.2, ...      # optional, algebra_dim(d) * g_partition isometric coordinates
//! g_norm       = 1.0                 # g is rescaled to this L2 norm
//! samples      = 256
//! seed         = 20240601
//! refine       = 4                   # star_discretized refinement M
//! quad_points  = 32
//! output       = results.csv         # optional
//! ```
//!
//! Unknown or repeated keys are errors.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lie::{algebra_dim, AlgebraVector};
use crate::path::{refine, StepPath};
use crate::sampling::RadiusSchedule;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Verify,
    Invariance,
    Concentration,
    Jacobian,
}

impl ExperimentKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "verify" => Some(Self::Verify),
            "invariance" => Some(Self::Invariance),
            "concentration" => Some(Self::Concentration),
            "jacobian" => Some(Self::Jacobian),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Verify => "verify",
            Self::Invariance => "invariance",
            Self::Concentration => "concentration",
            Self::Jacobian => "jacobian",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub dim: usize,
    pub n_list: Vec<usize>,
    pub schedule: RadiusSchedule,
    pub radius: Option<f64>,
    pub g_partition: usize,
    pub g_coords: Option<Vec<f64>>,
    pub g_norm: f64,
    pub samples: usize,
    pub seed: u64,
    pub refine: usize,
    pub quad_points: usize,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Defaults for each experiment.
    pub fn default_for(experiment: ExperimentKind) -> Self {
        let (n_list, samples, radius) = match experiment {
            ExperimentKind::Verify => (vec![8], 100, Some(5.0)),
            ExperimentKind::Invariance => (vec![8, 32, 128], 256, None),
            ExperimentKind::Concentration => (vec![16, 64, 256], 2000, None),
            ExperimentKind::Jacobian => (vec![4], 20, Some(5.0)),
        };
        let g_partition = if experiment == ExperimentKind::Jacobian {
            4
        } else {
            8
        };
        Self {
            experiment,
            dim: 3,
            n_list,
            schedule: RadiusSchedule::default(),
            radius,
            g_partition,
            g_coords: None,
            g_norm: 1.0,
            samples,
            seed: 20240601,
            refine: 4,
            quad_points: 32,
            output: None,
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Parses the textual format. `experiment` must appear before other keys
    /// are applied, since it selects the defaults; it may be on any line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<(usize, &str, &str)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if let Some((first, _, _)) = entries.iter().find(|(_, k, _)| *k == key) {
                return Err(Error::Config {
                    line,
                    message: format!("duplicate key `{key}` (first set on line {first})"),
                });
            }
            entries.push((line, key, value));
        }

        let experiment = match entries.iter().find(|(_, k, _)| *k == "experiment") {
            Some((line, _, v)) => ExperimentKind::parse(v).ok_or_else(|| Error::Config {
                line: *line,
                message: format!("unknown experiment `{v}`"),
            })?,
            None => {
                return Err(Error::Config {
                    line: 0,
                    message: "missing required key `experiment`".into(),
                })
            }
        };
        let mut cfg = Self::default_for(experiment);
        let mut alpha = cfg.schedule.exponent();
        let mut scale = cfg.schedule.scale();
        let mut schedule_line = 0;

        for (line, key, value) in entries {
            let err = |message: String| Error::Config { line, message };
            match key {
                "experiment" => {}
                "dim" => cfg.dim = parse_num(value, line)?,
                "n_list" => cfg.n_list = parse_list(value, line)?,
                "alpha" => {
                    alpha = parse_num(value, line)?;
                    schedule_line = line;
                }
                "scale" => {
                    scale = parse_num(value, line)?;
                    schedule_line = line;
                }
                "radius" => {
                    let r: f64 = parse_num(value, line)?;
                    if !(r > 0.0 && r.is_finite()) {
                        return Err(err(format!("radius must be positive, got {r}")));
                    }
                    cfg.radius = Some(r);
                }
                "g_partition" => cfg.g_partition = parse_num(value, line)?,
                "g_coords" => cfg.g_coords = Some(parse_list(value, line)?),
                "g_norm" => cfg.g_norm = parse_num(value, line)?,
                "samples" => cfg.samples = parse_num(value, line)?,
                "seed" => cfg.seed = parse_num(value, line)?,
                "refine" => cfg.refine = parse_num(value, line)?,
                "quad_points" => cfg.quad_points = parse_num(value, line)?,
                "output" => cfg.output = Some(PathBuf::from(value)),
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        cfg.schedule = RadiusSchedule::new(alpha, scale).map_err(|e| Error::Config {
            line: schedule_line,
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |message: String| Err(Error::Config { line: 0, message });
        if self.dim < 2 {
            return fail(format!("dim must be at least 2, got {}", self.dim));
        }
        if self.n_list.is_empty() {
            return fail("n_list must not be empty".into());
        }
        if self.samples == 0 {
            return fail("samples must be at least 1".into());
        }
        if self.g_partition == 0 {
            return fail("g_partition must be at least 1".into());
        }
        if self.refine == 0 || self.quad_points == 0 {
            return fail("refine and quad_points must be at least 1".into());
        }
        if !(self.g_norm >= 0.0 && self.g_norm.is_finite()) {
            return fail(format!("g_norm must be nonnegative, got {}", self.g_norm));
        }
        if let Some(c) = &self.g_coords {
            let expected = algebra_dim(self.dim) * self.g_partition;
            if c.len() != expected {
                return fail(format!(
                    "g_coords needs {expected} values for dim {} and g_partition {}, got {}",
                    self.dim,
                    self.g_partition,
                    c.len()
                ));
            }
        }
        for &n in &self.n_list {
            if n == 0 || !n.is_multiple_of(self.g_partition) {
                return fail(format!(
                    "g on partition {} is not representable on N = {n}",
                    self.g_partition
                ));
            }
        }
        Ok(())
    }

    /// The coarse `g`, scaled to `g_norm`. Without explicit coordinates every
    /// interval carries a different direction of unit HS norm, so that
    /// `|g|_2 = |g|_inf = g_norm`.
    pub fn coarse_g(&self) -> Result<StepPath> {
        let g = match &self.g_coords {
            Some(c) => StepPath::from_coords(self.dim, self.g_partition, c)?,
            None => default_g(self.dim, self.g_partition)?,
        };
        let norm = g.l2_norm();
        if norm == 0.0 {
            return Ok(g);
        }
        Ok(g.scale(self.g_norm / norm))
    }

    /// `g` refined onto `V_N`.
    pub fn g_on(&self, n: usize) -> Result<StepPath> {
        if !n.is_multiple_of(self.g_partition) {
            return Err(Error::InvalidParameter(format!(
                "g on partition {} is not representable on N = {n}",
                self.g_partition
            )));
        }
        refine(&self.coarse_g()?, n / self.g_partition)
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

fn default_g(dim: usize, partition: usize) -> Result<StepPath> {
    let k = algebra_dim(dim);
    let values = (0..partition)
        .map(|i| {
            let c: Vec<f64> = (0..k)
                .map(|j| (1.7 * (j + 1) as f64 + 0.9 * i as f64 + 0.3).sin())
                .collect();
            let x = AlgebraVector::from_coords(dim, &c)?;
            Ok(x.scale(1.0 / x.hs_norm()))
        })
        .collect::<Result<Vec<_>>>()?;
    StepPath::new(values)
}

fn parse_num<T: std::str::FromStr>(value: &str, line: usize) -> Result<T> {
    value.parse().map_err(|_| Error::Config {
        line,
        message: format!("cannot parse `{value}` as a number"),
    })
}

fn parse_list<T: std::str::FromStr>(value: &str, line: usize) -> Result<Vec<T>> {
    let items: Vec<&str> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        return Err(Error::Config {
            line,
            message: "list must not be empty".into(),
        });
    }
    items.into_iter().map(|s| parse_num(s, line)).collect()
}
