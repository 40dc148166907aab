//! The `deadwood` command-line tool: synthetic data generation, the per-tree
//! pipeline from raw plot data to feature tables, and cross-validated
//! random-forest evaluation.

pub mod config;
pub mod error;
pub mod io;
pub mod plot;
pub mod stages;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use deadwood::dataset::{generate_dataset, parse_counts, SyntheticSpec, DEFAULT_COUNTS};
use deadwood::evalkit::{crossval_run, ConfusionMatrix, CrossvalReport};
use deadwood::features::pca::pca_2d;
use deadwood::forest::{block_importance, fit_forest, grid_search, GridRow, Matrix, RfConfig};
use deadwood::model::{write_las, write_ppm, write_text_cloud, write_world_file};
use deadwood::num::derive_seed;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::io::{fmt_f64, is_manifest, load_dataset, manifest_csv, write_file, FeatureTable, ManifestRow};
use crate::stages::{canvas_for, feature_table, AugmentedForest, FeatureForest};

#[derive(Debug, Parser)]
#[command(name = "deadwood", version, about = "Decay-stage classification of conifers from LiDAR and CIR imagery")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Root random seed; overrides `seed` from the config file and `--set`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML file with dotted configuration keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set rf.n_estimators=200`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled synthetic tree dataset (manifest + one cloud per tree).
    Synth(SynthArgs),
    /// Run the per-tree pipeline on a plot or on a dataset manifest.
    Pipeline(PipelineArgs),
    /// Cross-validate the random forest on a feature table or a dataset manifest.
    Crossval(CrossvalArgs),
    /// Print the effective configuration as TOML.
    Config,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Trees per decay level, five comma-separated counts.
    #[arg(long)]
    pub counts: Option<String>,
    /// Also lay the trees out on terrain and write `plot/plot.las` with a
    /// matching CIR orthophoto (`plot/plot.ppm`, `plot/plot.wld`).
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Plot point cloud (`.las` or whitespace text).
    #[arg(long, requires = "raster", conflicts_with = "dataset")]
    pub cloud: Option<PathBuf>,
    /// Color-infrared orthophoto (binary PPM, bands NIR, R, G).
    #[arg(long, requires = "cloud")]
    pub raster: Option<PathBuf>,
    /// World file of the raster (default: raster path with `.wld`).
    #[arg(long, requires = "raster")]
    pub world: Option<PathBuf>,
    /// Dataset manifest of single-tree clouds, instead of a plot.
    #[arg(long, required_unless_present = "cloud")]
    pub dataset: Option<PathBuf>,
    /// Skip writing the view images.
    #[arg(long)]
    pub no_images: bool,
}

#[derive(Debug, Args)]
pub struct CrossvalArgs {
    /// Feature table from `pipeline`, or a dataset manifest (enables augmentation).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Grid-search n_estimators × max_depth first and cross-validate the best.
    #[arg(long)]
    pub grid: bool,
    /// Permute labels across trees (a chance-level control).
    #[arg(long)]
    pub shuffle_labels: bool,
    /// Also write block-level feature importance of a forest fit on all rows.
    #[arg(long)]
    pub importance: bool,
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => Some(io::read_string("config", p)?),
        None => None,
    };
    let config = PipelineConfig::layered(file.as_deref(), &cli.sets, cli.seed)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| CliError::stage("startup", e))?;
    pool.install(|| match &cli.command {
        Command::Synth(a) => synth(&config, a),
        Command::Pipeline(a) => pipeline(&config, a),
        Command::Crossval(a) => crossval(&config, a),
        Command::Config => {
            print!("{}", config.to_toml());
            Ok(())
        }
    })
}

fn synth(config: &PipelineConfig, args: &SynthArgs) -> Result<(), CliError> {
    let counts = match &args.counts {
        Some(s) => parse_counts(s).map_err(|e| CliError::Usage(format!("--counts: {e}")))?,
        None => DEFAULT_COUNTS,
    };
    let spec = SyntheticSpec { seed: config.seed, ..SyntheticSpec::default() };
    let samples = generate_dataset::<f64>(&spec, &counts).map_err(|e| CliError::stage("synth", e))?;
    let mut rows = Vec::with_capacity(samples.len());
    for s in &samples {
        let file = format!("clouds/sample_{:04}.txt", s.tree.id);
        write_file("synth", &args.out.join(&file), write_text_cloud(&s.tree.points))?;
        rows.push(ManifestRow {
            sample_id: s.tree.id,
            label: s.label,
            source: s.source,
            group: s.group,
            points: s.tree.points.len(),
            file,
        });
    }
    write_file("synth", &args.out.join("manifest.csv"), manifest_csv(&rows))?;
    if args.plot {
        let (cloud, raster) = plot::synthetic_plot(&samples, derive_seed(config.seed, u64::MAX - 1));
        let las = write_las(&cloud).map_err(|e| CliError::stage("synth", e))?;
        let dir = args.out.join("plot");
        write_file("synth", &dir.join("plot.las"), las)?;
        let mut rgb = Vec::with_capacity(raster.width() * raster.height() * 3);
        for row in 0..raster.height() {
            for col in 0..raster.width() {
                rgb.extend_from_slice(&raster.pixel(col, row));
            }
        }
        write_file("synth", &dir.join("plot.ppm"), write_ppm(raster.width(), raster.height(), &rgb))?;
        write_file("synth", &dir.join("plot.wld"), write_world_file(raster.transform()))?;
    }
    println!("synth: {} trees -> {}", rows.len(), args.out.display());
    Ok(())
}

fn pipeline(config: &PipelineConfig, args: &PipelineArgs) -> Result<(), CliError> {
    let images = !args.no_images;
    if let Some(manifest) = &args.dataset {
        let samples = load_dataset(manifest)?;
        let table = stages::run_dataset(&samples, config, &args.out, images)?;
        println!("pipeline: {} trees, {} views -> {}", samples.len(), table.rows.len(), args.out.display());
        return Ok(());
    }
    let (Some(cloud), Some(raster)) = (&args.cloud, &args.raster) else {
        return Err(CliError::Usage("pipeline needs --cloud and --raster, or --dataset".into()));
    };
    let cloud = io::read_cloud(cloud)?;
    let raster = io::read_raster(raster, args.world.as_deref())?;
    let s = stages::run_plot(&cloud, &raster, config, &args.out, images)?;
    println!(
        "pipeline: {} points ({} outside raster, {} ground), {} trees kept, {} rejected -> {}",
        s.points,
        s.outside_raster,
        s.ground,
        s.segments,
        s.rejected_segments,
        args.out.display()
    );
    Ok(())
}

/// Feature rows prepared for cross-validation.
struct Prepared {
    table: FeatureTable,
    x: Matrix<f64>,
    labels: Vec<u32>,
    groups: Vec<usize>,
}

fn prepare(table: FeatureTable, grouped: bool, path: &Path) -> Result<Prepared, CliError> {
    let labels = table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| r.label.ok_or_else(|| CliError::format("crossval", path, format!("row {} has no label", i + 2))))
        .collect::<Result<Vec<_>, _>>()?;
    let groups = if grouped {
        table.rows.iter().map(|r| r.group).collect()
    } else {
        (0..table.rows.len()).collect()
    };
    let x = Matrix::from_rows(&table.values).map_err(|e| CliError::format("crossval", path, e))?;
    Ok(Prepared { table, x, labels, groups })
}

/// Permutes labels across groups so every group keeps a single label.
fn shuffle_group_labels(labels: &mut [u32], groups: &[usize], seed: u64) {
    let mut order: Vec<usize> = groups.to_vec();
    order.sort_unstable();
    order.dedup();
    let first_label = |g: usize| labels[groups.iter().position(|&x| x == g).expect("group present")];
    let mut pool: Vec<u32> = order.iter().map(|&g| first_label(g)).collect();
    pool.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    for (l, g) in labels.iter_mut().zip(groups) {
        *l = pool[order.binary_search(g).expect("group present")];
    }
}

fn grid_csv(rows: &[GridRow]) -> String {
    let k = rows.first().map_or(0, |r| r.fold_oa.len());
    let mut s = String::from("n_estimators,max_depth");
    for i in 1..=k {
        s.push_str(&format!(",oa_fold{i}"));
    }
    s.push_str(",mean_oa\n");
    for r in rows {
        s.push_str(&format!("{},{}", r.config.n_estimators, r.config.max_depth));
        for oa in &r.fold_oa {
            s.push_str(&format!(",{oa:.6}"));
        }
        s.push_str(&format!(",{:.6}\n", r.mean_oa));
    }
    s
}

fn confusion_csv(report: &CrossvalReport) -> String {
    let k = report.classes.len();
    let mut total = ConfusionMatrix::new(k);
    let mut counts = vec![0u64; k * k];
    for f in &report.folds {
        for i in 0..k {
            for j in 0..k {
                counts[i * k + j] += f.confusion.get(i, j);
            }
        }
    }
    if !report.folds.is_empty() {
        total = ConfusionMatrix::from_counts(k, counts);
    }
    let mut s = String::from("truth");
    for c in &report.classes {
        s.push_str(&format!(",pred_{c}"));
    }
    s.push('\n');
    for (i, c) in report.classes.iter().enumerate() {
        s.push_str(&c.to_string());
        for j in 0..k {
            s.push_str(&format!(",{}", total.get(i, j)));
        }
        s.push('\n');
    }
    s
}

/// Two leading principal components of the z-scored feature rows.
fn pca_csv(p: &Prepared) -> Result<String, CliError> {
    let (n, d) = (p.x.rows(), p.x.cols());
    let mut mean = vec![0.0; d];
    let mut sd = vec![0.0; d];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(p.x.row(i)) {
            *m += v / n as f64;
        }
    }
    for i in 0..n {
        for ((s, v), m) in sd.iter_mut().zip(p.x.row(i)).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let sd: Vec<f64> = sd.iter().map(|s| (s / (n.max(2) - 1) as f64).sqrt()).collect();
    let z: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            p.x.row(i)
                .iter()
                .zip(&mean)
                .zip(&sd)
                .map(|((v, m), s)| if *s > 0.0 { (v - m) / s } else { 0.0 })
                .collect()
        })
        .collect();
    let pca = pca_2d(&z).map_err(|e| CliError::stage("pca", e))?;
    let mut s = String::from("sample_id,label,pc1,pc2\n");
    for ((r, l), [a, b]) in p.table.rows.iter().zip(&p.labels).zip(&pca.projected) {
        s.push_str(&format!("{},{},{},{}\n", r.sample_id, l, fmt_f64(*a), fmt_f64(*b)));
    }
    Ok(s)
}

/// Feature blocks named by column prefix (text before the first `_`).
fn column_blocks(names: &[String]) -> Vec<(String, usize)> {
    let mut blocks: Vec<(String, usize)> = Vec::new();
    for n in names {
        let prefix = n.split('_').next().unwrap_or(n);
        match blocks.last_mut() {
            Some((b, len)) if b == prefix => *len += 1,
            _ => blocks.push((prefix.to_string(), 1)),
        }
    }
    blocks
}

fn crossval(config: &PipelineConfig, args: &CrossvalArgs) -> Result<(), CliError> {
    let stage_err = |e: deadwood::evalkit::EvalError| CliError::stage("crossval", e);
    let manifest = is_manifest(&args.input)?;
    let samples = if manifest { Some(load_dataset(&args.input)?) } else { None };
    let (table, canvas) = match &samples {
        Some(samples) => {
            let canvas = canvas_for(config, samples.iter().map(|s| &s.tree.points));
            let trees: Vec<_> = samples.iter().map(|s| (s.tree.id, &s.tree.points, Some(s.label), s.group)).collect();
            // row 4·s + a must be view a of sample s
            let trees: Vec<_> = {
                let mut t = trees;
                t.sort_by_key(|t| t.0);
                if t.iter().enumerate().any(|(i, t)| t.0 != i) {
                    return Err(CliError::format("crossval", &args.input, "sample ids must be 0..n"));
                }
                t
            };
            (feature_table(&trees, &canvas, &config.features, None)?.0, Some(canvas))
        }
        None => (FeatureTable::read(&args.input)?, None),
    };
    let mut p = prepare(table, config.cv_grouped, &args.input)?;
    if args.shuffle_labels {
        let groups: Vec<usize> = p.table.rows.iter().map(|r| r.group).collect();
        shuffle_group_labels(&mut p.labels, &groups, derive_seed(config.seed, u64::MAX));
    }

    let mut rf: RfConfig = config.forest();
    if args.grid {
        let (best, rows) = grid_search(&p.x, &p.labels, Some(&p.groups), &config.grid(), config.cv_k, config.seed)
            .map_err(|e| CliError::stage("grid", e))?;
        write_file("grid", &args.out.join("grid.csv"), grid_csv(&rows))?;
        println!("grid: best n_estimators={} max_depth={}", best.n_estimators, best.max_depth);
        rf = best;
    }

    let report = match (&samples, canvas) {
        (Some(samples), Some(canvas)) if config.augment => {
            let mut order: Vec<_> = samples.iter().collect();
            order.sort_by_key(|s| s.tree.id);
            let ordered: Vec<_> = order.into_iter().cloned().collect();
            let exp = AugmentedForest {
                samples: &ordered,
                x: &p.x,
                labels: &p.labels,
                canvas,
                features: config.features,
                rf,
                augment: config.aug,
            };
            crossval_run(&p.labels, &p.groups, config.cv_k, config.seed, &exp).map_err(stage_err)?
        }
        _ => {
            let exp = FeatureForest { x: &p.x, labels: &p.labels, rf };
            crossval_run(&p.labels, &p.groups, config.cv_k, config.seed, &exp).map_err(stage_err)?
        }
    };
    write_file("crossval", &args.out.join("metrics.csv"), report.to_csv())?;
    write_file("crossval", &args.out.join("confusion.csv"), confusion_csv(&report))?;
    write_file("crossval", &args.out.join("pca.csv"), pca_csv(&p)?)?;

    if args.importance {
        let model = fit_forest(&p.x, &p.labels, &rf).map_err(|e| CliError::stage("forest", e))?;
        let blocks = block_importance(&model.feature_importance(), &column_blocks(&p.table.names));
        let mut s = String::from("block,importance\n");
        for (b, v) in blocks {
            s.push_str(&format!("{b},{v:.6}\n"));
        }
        write_file("forest", &args.out.join("importance.csv"), s)?;
    }
    println!("crossval: mean OA {:.4}, mean kappa {:.4} -> {}", report.mean_oa, report.mean_kappa, args.out.display());
    Ok(())
}
