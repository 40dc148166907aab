//! Flat, namespaced pipeline configuration.
//!
//! Values come from three layers: built-in defaults (the library defaults of
//! each stage), an optional TOML file with dotted keys, and `--set key=value`
//! flags. Later layers win. Unknown keys are rejected in every layer.

use deadwood::evalkit::AugmentConfig;
use deadwood::features::FeatureOptions;
use deadwood::forest::{ClassWeight, MaxFeatures, RfConfig};
use deadwood::projection::CanvasSpec;
use deadwood::segmentation::SegParams;
use deadwood::terrain::PtdParams;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{key}`: cannot parse `{value}` as {expected}")]
    BadValue { key: String, value: String, expected: &'static str },
    #[error("config file: {0}")]
    Syntax(String),
    #[error("`--set` expects key=value, got `{0}`")]
    Assignment(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Root of every random stream: synthesis, augmentation, folds, forest.
    pub seed: u64,
    pub terrain: PtdParams,
    pub dtm_cell: f64,
    pub seg: SegParams,
    pub canvas: CanvasSpec,
    /// Size the render canvas to the trees being projected instead of using
    /// `proj.world_width`/`proj.world_height`.
    pub fit_canvas: bool,
    pub features: FeatureOptions,
    pub rf: RfConfig,
    pub grid_n_estimators: Vec<usize>,
    pub grid_max_depth: Vec<usize>,
    pub cv_k: usize,
    /// Keep all views of a tree in one fold.
    pub cv_grouped: bool,
    pub augment: bool,
    pub aug: AugmentConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            terrain: PtdParams::default(),
            dtm_cell: 1.0,
            seg: SegParams::default(),
            canvas: CanvasSpec::default(),
            fit_canvas: true,
            features: FeatureOptions::default(),
            rf: RfConfig::default(),
            grid_n_estimators: vec![200, 400, 800],
            grid_max_depth: vec![16, 32, 64],
            cv_k: 5,
            cv_grouped: true,
            augment: true,
            aug: AugmentConfig::default(),
        }
    }
}

/// Every key with a one-line description, in listing order.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "root random seed"),
    ("terrain.seed_cell", "ground seed grid cell, m"),
    ("terrain.max_angle", "ground classification angle limit, degrees"),
    ("terrain.max_dist", "ground classification distance limit, m"),
    ("terrain.densify_angle", "TIN insertion angle limit, degrees"),
    ("terrain.densify_dist", "TIN insertion distance limit, m"),
    ("terrain.max_iterations", "densification iteration cap"),
    ("terrain.dtm_cell", "terrain model cell size, m"),
    ("seg.threshold", "horizontal join distance, m"),
    ("seg.min_height", "lowest admissible tree top, m"),
    ("seg.min_points", "smallest kept segment"),
    ("proj.fit_canvas", "size the canvas to the trees (true) or use world_width/height"),
    ("proj.world_width", "canvas width, m"),
    ("proj.world_height", "canvas height, m"),
    ("proj.px_per_m", "render resolution, pixels per m"),
    ("proj.downscale", "downscale factor (1/k)"),
    ("proj.final_width", "final image width, px"),
    ("proj.final_height", "final image height, px"),
    ("feat.glcm_levels", "gray levels for co-occurrence matrices"),
    ("feat.hsv_bins", "HSV histogram bins per channel"),
    ("feat.extended", "append HOG and Harris blocks"),
    ("rf.n_estimators", "number of trees"),
    ("rf.max_depth", "maximum tree depth"),
    ("rf.class_weight", "balanced | uniform"),
    ("rf.max_features", "features tried per split: sqrt | all | <n>"),
    ("rf.min_samples_leaf", "minimum samples per leaf"),
    ("rf.grid_n_estimators", "grid search values for n_estimators"),
    ("rf.grid_max_depth", "grid search values for max_depth"),
    ("cv.k", "number of folds"),
    ("cv.grouped", "keep the four views of a tree in one fold"),
    ("aug.enabled", "augment training trees (dataset input only)"),
    ("aug.rotation", "random rotation about the vertical axis"),
    ("aug.removal_fraction", "probability of dropping each point"),
    ("aug.jitter_sigma", "Gaussian jitter, m"),
];

fn num<T: std::str::FromStr>(key: &str, value: &str, expected: &'static str) -> Result<T, ConfigError> {
    value.trim().parse().map_err(|_| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        expected,
    })
}

fn list(key: &str, value: &str) -> Result<Vec<usize>, ConfigError> {
    let v: Vec<usize> = value
        .split(',')
        .map(|s| num(key, s, "a comma-separated list of positive integers"))
        .collect::<Result<_, _>>()?;
    if v.is_empty() || v.contains(&0) {
        return Err(ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
            expected: "a comma-separated list of positive integers",
        });
    }
    Ok(v)
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

impl PipelineConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let f = |v: &str| num::<f64>(key, v, "a number");
        let u = |v: &str| num::<usize>(key, v, "a non-negative integer");
        let b = |v: &str| num::<bool>(key, v, "true or false");
        match key {
            "seed" => self.seed = num(key, value, "an unsigned integer")?,
            "terrain.seed_cell" => self.terrain.seed_cell = f(value)?,
            "terrain.max_angle" => self.terrain.max_angle = f(value)?,
            "terrain.max_dist" => self.terrain.max_dist = f(value)?,
            "terrain.densify_angle" => self.terrain.densify_angle = f(value)?,
            "terrain.densify_dist" => self.terrain.densify_dist = f(value)?,
            "terrain.max_iterations" => self.terrain.max_iterations = u(value)?,
            "terrain.dtm_cell" => self.dtm_cell = f(value)?,
            "seg.threshold" => self.seg.threshold = f(value)?,
            "seg.min_height" => self.seg.min_height = f(value)?,
            "seg.min_points" => self.seg.min_points = u(value)?,
            "proj.fit_canvas" => self.fit_canvas = b(value)?,
            "proj.world_width" => self.canvas.world_width = f(value)?,
            "proj.world_height" => self.canvas.world_height = f(value)?,
            "proj.px_per_m" => self.canvas.px_per_m = f(value)?,
            "proj.downscale" => self.canvas.downscale = f(value)?,
            "proj.final_width" => self.canvas.final_width = u(value)?,
            "proj.final_height" => self.canvas.final_height = u(value)?,
            "feat.glcm_levels" => self.features.glcm_levels = u(value)?,
            "feat.hsv_bins" => self.features.hsv_bins = u(value)?,
            "feat.extended" => self.features.extended = b(value)?,
            "rf.n_estimators" => self.rf.n_estimators = u(value)?,
            "rf.max_depth" => self.rf.max_depth = u(value)?,
            "rf.class_weight" => {
                self.rf.class_weight = match value.trim() {
                    "balanced" => ClassWeight::Balanced,
                    "uniform" => ClassWeight::Uniform,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.into(),
                            value: value.into(),
                            expected: "balanced or uniform",
                        })
                    }
                }
            }
            "rf.max_features" => {
                self.rf.max_features = match value.trim() {
                    "sqrt" => MaxFeatures::Sqrt,
                    "all" => MaxFeatures::All,
                    v => MaxFeatures::Fixed(num(key, v, "sqrt, all or a positive integer")?),
                }
            }
            "rf.min_samples_leaf" => self.rf.min_samples_leaf = u(value)?,
            "rf.grid_n_estimators" => self.grid_n_estimators = list(key, value)?,
            "rf.grid_max_depth" => self.grid_max_depth = list(key, value)?,
            "cv.k" => self.cv_k = u(value)?,
            "cv.grouped" => self.cv_grouped = b(value)?,
            "aug.enabled" => self.augment = b(value)?,
            "aug.rotation" => self.aug.rotation = b(value)?,
            "aug.removal_fraction" => self.aug.removal_fraction = f(value)?,
            "aug.jitter_sigma" => self.aug.jitter_sigma = f(value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Current value of a key, in the syntax [`set`](Self::set) accepts.
    pub fn get(&self, key: &str) -> Result<String, ConfigError> {
        Ok(match key {
            "seed" => self.seed.to_string(),
            "terrain.seed_cell" => self.terrain.seed_cell.to_string(),
            "terrain.max_angle" => self.terrain.max_angle.to_string(),
            "terrain.max_dist" => self.terrain.max_dist.to_string(),
            "terrain.densify_angle" => self.terrain.densify_angle.to_string(),
            "terrain.densify_dist" => self.terrain.densify_dist.to_string(),
            "terrain.max_iterations" => self.terrain.max_iterations.to_string(),
            "terrain.dtm_cell" => self.dtm_cell.to_string(),
            "seg.threshold" => self.seg.threshold.to_string(),
            "seg.min_height" => self.seg.min_height.to_string(),
            "seg.min_points" => self.seg.min_points.to_string(),
            "proj.fit_canvas" => self.fit_canvas.to_string(),
            "proj.world_width" => self.canvas.world_width.to_string(),
            "proj.world_height" => self.canvas.world_height.to_string(),
            "proj.px_per_m" => self.canvas.px_per_m.to_string(),
            "proj.downscale" => self.canvas.downscale.to_string(),
            "proj.final_width" => self.canvas.final_width.to_string(),
            "proj.final_height" => self.canvas.final_height.to_string(),
            "feat.glcm_levels" => self.features.glcm_levels.to_string(),
            "feat.hsv_bins" => self.features.hsv_bins.to_string(),
            "feat.extended" => self.features.extended.to_string(),
            "rf.n_estimators" => self.rf.n_estimators.to_string(),
            "rf.max_depth" => self.rf.max_depth.to_string(),
            "rf.class_weight" => match self.rf.class_weight {
                ClassWeight::Balanced => "balanced".into(),
                ClassWeight::Uniform => "uniform".into(),
            },
            "rf.max_features" => match self.rf.max_features {
                MaxFeatures::Sqrt => "sqrt".into(),
                MaxFeatures::All => "all".into(),
                MaxFeatures::Fixed(m) => m.to_string(),
            },
            "rf.min_samples_leaf" => self.rf.min_samples_leaf.to_string(),
            "rf.grid_n_estimators" => join(&self.grid_n_estimators),
            "rf.grid_max_depth" => join(&self.grid_max_depth),
            "cv.k" => self.cv_k.to_string(),
            "cv.grouped" => self.cv_grouped.to_string(),
            "aug.enabled" => self.augment.to_string(),
            "aug.rotation" => self.aug.rotation.to_string(),
            "aug.removal_fraction" => self.aug.removal_fraction.to_string(),
            "aug.jitter_sigma" => self.aug.jitter_sigma.to_string(),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        })
    }

    /// Applies a TOML document whose (possibly dotted or nested) keys name
    /// config keys.
    pub fn apply_toml(&mut self, text: &str) -> Result<(), ConfigError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.message().to_string()))?;
        let mut flat = Vec::new();
        flatten("", &table, &mut flat)?;
        for (k, v) in flat {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    /// Applies `key=value` assignments in order.
    pub fn apply_sets<S: AsRef<str>>(&mut self, sets: &[S]) -> Result<(), ConfigError> {
        for s in sets {
            let s = s.as_ref();
            let (k, v) = s.split_once('=').ok_or_else(|| ConfigError::Assignment(s.to_string()))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    /// Defaults, then the config file, then `--set` assignments, then `seed`
    /// from a dedicated flag.
    pub fn layered<S: AsRef<str>>(file: Option<&str>, sets: &[S], seed: Option<u64>) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        if let Some(text) = file {
            c.apply_toml(text)?;
        }
        c.apply_sets(sets)?;
        if let Some(s) = seed {
            c.seed = s;
        }
        Ok(c)
    }

    /// Forest config with the root seed as its random state.
    pub fn forest(&self) -> RfConfig {
        RfConfig { random_state: self.seed, ..self.rf }
    }

    /// Grid of forest configs (n_estimators major).
    pub fn grid(&self) -> Vec<RfConfig> {
        let base = self.forest();
        self.grid_n_estimators
            .iter()
            .flat_map(|&n| self.grid_max_depth.iter().map(move |&d| RfConfig { n_estimators: n, max_depth: d, ..base }))
            .collect()
    }

    /// Every key and value as a TOML document that [`apply_toml`](Self::apply_toml) reads back.
    pub fn to_toml(&self) -> String {
        let mut s = String::new();
        for (k, doc) in KEYS {
            let v = self.get(k).expect("listed key");
            let quoted = match *k {
                "rf.class_weight" | "rf.max_features" | "rf.grid_n_estimators" | "rf.grid_max_depth" => format!("\"{v}\""),
                _ => v,
            };
            s.push_str(&format!("# {doc}\n{k} = {quoted}\n"));
        }
        s
    }
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, String)>) -> Result<(), ConfigError> {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        let text = match v {
            toml::Value::Table(t) => {
                flatten(&key, t, out)?;
                continue;
            }
            toml::Value::String(s) => s.clone(),
            toml::Value::Integer(i) => i.to_string(),
            toml::Value::Float(f) => f.to_string(),
            toml::Value::Boolean(b) => b.to_string(),
            toml::Value::Array(items) => items
                .iter()
                .map(|i| match i {
                    toml::Value::Integer(n) => Ok(n.to_string()),
                    other => Err(ConfigError::Syntax(format!("`{key}`: unsupported array element {other}"))),
                })
                .collect::<Result<Vec<_>, _>>()?
                .join(","),
            other => return Err(ConfigError::Syntax(format!("`{key}`: unsupported value {other}"))),
        };
        out.push((key, text));
    }
    Ok(())
}
