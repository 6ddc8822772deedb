//! Run configuration: a JSON config file with per-flag overrides, flags
//! winning. The resolved configuration is echoed into every output manifest.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use xsom_core::ingest::SchemaId;
use xsom_core::render::Colormap;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    pub train_csv: Option<PathBuf>,
    pub test_csv: Option<PathBuf>,
    /// Feature-significance selection threshold.
    pub threshold: f64,
    pub map_rows: usize,
    pub map_cols: usize,
    /// Explicit training-step count; wins over `epochs` when set.
    pub steps: Option<usize>,
    /// Passes over the dataset; converted to steps and capped at `max_steps`.
    pub epochs: Option<usize>,
    pub max_steps: usize,
    pub lr0: f64,
    /// Initial neighborhood radius; defaults to max(map_rows, map_cols) / 2.
    pub radius0: Option<f64>,
    pub seed: u64,
    /// Cluster count for the K-means view.
    pub k: usize,
    pub out_dir: PathBuf,
    /// Stratified subsample size applied to the training CSV.
    pub sample: Option<usize>,
    pub trace_every: usize,
    /// Confidence level for the embedding-accuracy tests.
    pub confidence: f64,
    /// U-Matrix neighbor set: 4 (grid) or 8 (diagonals included).
    pub umatrix_neighbors: u8,
    pub render_width: u32,
    pub render_height: u32,
    pub colormap: Colormap,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema: "generic".into(),
            train_csv: None,
            test_csv: None,
            threshold: 0.01,
            map_rows: 18,
            map_cols: 18,
            steps: None,
            epochs: None,
            max_steps: 200_000,
            lr0: 0.7,
            radius0: None,
            seed: 42,
            k: 2,
            out_dir: PathBuf::from("out"),
            sample: None,
            trace_every: 0,
            confidence: 0.95,
            umatrix_neighbors: 4,
            render_width: 640,
            render_height: 640,
            colormap: Colormap::Grayscale,
        }
    }
}

impl RunConfig {
    pub fn schema_id(&self) -> Result<SchemaId> {
        SchemaId::parse(&self.schema)
            .with_context(|| format!("unknown schema '{}'", self.schema))
    }

    pub fn radius0(&self) -> f64 {
        self.radius0
            .unwrap_or_else(|| self.map_rows.max(self.map_cols) as f64 / 2.0)
    }

    /// Total training steps: explicit steps win, otherwise epochs scaled by
    /// the dataset size and capped at `max_steps`, otherwise 1000 epochs
    /// under the same cap.
    pub fn total_steps(&self, num_samples: usize) -> Result<usize> {
        let steps = match (self.steps, self.epochs) {
            (Some(s), _) => s,
            (None, Some(e)) => (e * num_samples).min(self.max_steps),
            (None, None) => (1000 * num_samples).min(self.max_steps),
        };
        if steps == 0 {
            bail!("training step count is 0; set --steps or --epochs");
        }
        Ok(steps)
    }
}

/// Command-line overrides shared by every subcommand.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// JSON config file; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Dataset schema: nsl-kdd, cic-ids-2017, or generic.
    #[arg(long)]
    pub schema: Option<String>,
    /// Raw training CSV.
    #[arg(long)]
    pub train_csv: Option<PathBuf>,
    /// Raw test CSV.
    #[arg(long)]
    pub test_csv: Option<PathBuf>,
    /// Feature-significance selection threshold in [0, 1].
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Map size as N or ROWSxCOLS, e.g. 18 or 18x12.
    #[arg(long)]
    pub map_size: Option<String>,
    /// Total training steps (sample presentations).
    #[arg(long)]
    pub steps: Option<usize>,
    /// Passes over the dataset; steps = epochs * samples, capped.
    #[arg(long, conflicts_with = "steps")]
    pub epochs: Option<usize>,
    /// Cap on steps derived from --epochs.
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Initial learning rate in (0, 1].
    #[arg(long)]
    pub lr0: Option<f64>,
    /// Initial neighborhood radius in grid units.
    #[arg(long)]
    pub radius0: Option<f64>,
    /// RNG seed for init, training, subsampling, and clustering.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Cluster count for the K-means view.
    #[arg(long)]
    pub k: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Stratified subsample size for the training CSV.
    #[arg(long)]
    pub sample: Option<usize>,
    /// Trace cadence in steps (0 disables).
    #[arg(long)]
    pub trace_every: Option<usize>,
    /// Confidence level for embedding tests.
    #[arg(long)]
    pub confidence: Option<f64>,
    /// U-Matrix neighbor set: 4 or 8.
    #[arg(long)]
    pub umatrix_neighbors: Option<u8>,
    /// Rendered SVG width in pixels.
    #[arg(long)]
    pub width: Option<u32>,
    /// Rendered SVG height in pixels.
    #[arg(long)]
    pub height: Option<u32>,
    /// Colormap: grayscale or blues.
    #[arg(long)]
    pub colormap: Option<String>,
}

/// Load the config file (when given) and apply flag overrides.
pub fn resolve(overrides: &Overrides) -> Result<RunConfig> {
    let mut config = match &overrides.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config {}", path.display()))?;
            serde_json::from_str::<RunConfig>(&text)
                .with_context(|| format!("bad config {}", path.display()))?
        }
        None => RunConfig::default(),
    };

    if let Some(v) = &overrides.schema {
        config.schema = v.clone();
    }
    if let Some(v) = &overrides.train_csv {
        config.train_csv = Some(v.clone());
    }
    if let Some(v) = &overrides.test_csv {
        config.test_csv = Some(v.clone());
    }
    if let Some(v) = overrides.threshold {
        config.threshold = v;
    }
    if let Some(v) = &overrides.map_size {
        let (rows, cols) = parse_map_size(v)?;
        config.map_rows = rows;
        config.map_cols = cols;
    }
    if overrides.steps.is_some() {
        config.steps = overrides.steps;
        config.epochs = None;
    }
    if overrides.epochs.is_some() {
        config.epochs = overrides.epochs;
        config.steps = None;
    }
    if let Some(v) = overrides.max_steps {
        config.max_steps = v;
    }
    if let Some(v) = overrides.lr0 {
        config.lr0 = v;
    }
    if overrides.radius0.is_some() {
        config.radius0 = overrides.radius0;
    }
    if let Some(v) = overrides.seed {
        config.seed = v;
    }
    if let Some(v) = overrides.k {
        config.k = v;
    }
    if let Some(v) = &overrides.out {
        config.out_dir = v.clone();
    }
    if overrides.sample.is_some() {
        config.sample = overrides.sample;
    }
    if let Some(v) = overrides.trace_every {
        config.trace_every = v;
    }
    if let Some(v) = overrides.confidence {
        config.confidence = v;
    }
    if let Some(v) = overrides.umatrix_neighbors {
        config.umatrix_neighbors = v;
    }
    if let Some(v) = overrides.width {
        config.render_width = v;
    }
    if let Some(v) = overrides.height {
        config.render_height = v;
    }
    if let Some(v) = &overrides.colormap {
        config.colormap = match v.to_ascii_lowercase().as_str() {
            "grayscale" | "gray" | "grey" => Colormap::Grayscale,
            "blues" | "blue" => Colormap::Blues,
            other => bail!("unknown colormap '{other}' (use grayscale or blues)"),
        };
    }
    if !matches!(config.umatrix_neighbors, 4 | 8) {
        bail!("umatrix_neighbors must be 4 or 8");
    }

    Ok(config)
}

fn parse_map_size(s: &str) -> Result<(usize, usize)> {
    let s = s.trim().to_ascii_lowercase();
    if let Some((r, c)) = s.split_once('x') {
        let rows: usize = r.trim().parse().context("bad map rows")?;
        let cols: usize = c.trim().parse().context("bad map cols")?;
        if rows == 0 || cols == 0 {
            bail!("map size must be positive");
        }
        return Ok((rows, cols));
    }
    let n: usize = s.parse().context("bad map size")?;
    if n == 0 {
        bail!("map size must be positive");
    }
    Ok((n, n))
}

pub fn ensure_out_dir(config: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&config.out_dir).with_context(|| {
        format!("cannot create output directory {}", config.out_dir.display())
    })
}

pub fn out_path(config: &RunConfig, name: &str) -> PathBuf {
    config.out_dir.join(name)
}
