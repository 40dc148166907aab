//! Pipeline stages shared by the commands.

use std::path::Path;

use deadwood::dataset::LabeledSample;
use deadwood::evalkit::{augment, AugmentConfig, Fold, FoldExperiment};
use deadwood::features::{feature_names, global_feature_vector, FeatureOptions};
use deadwood::forest::{fit_forest, Matrix, RfConfig};
use deadwood::fusion::{colorize, normalize_channels};
use deadwood::num::derive_seed;
use deadwood::projection::{project_views, views_manifest_csv, CanvasSpec, AZIMUTHS};
use deadwood::segmentation::{filter_segments, segment_manifest_csv, segment_trees};
use deadwood::terrain::{build_dtm, filter_ground, normalize_heights};
use deadwood::{DecayLevel, GeoRaster, PointCloud, TreeSegment};
use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::io::{write_file, FeatureRow, FeatureTable};

/// Canvas used to project `trees`: fitted to them, or the configured one.
pub fn canvas_for<'a>(config: &PipelineConfig, trees: impl IntoIterator<Item = &'a PointCloud>) -> CanvasSpec {
    if config.fit_canvas {
        let fit = CanvasSpec::fit_trees(trees);
        CanvasSpec { world_width: fit.world_width, world_height: fit.world_height, ..config.canvas }
    } else {
        config.canvas
    }
}

/// Projects one tree and extracts the feature vector of each view. When
/// `image_path` is given, each view is also written as a PPM file.
pub fn tree_features(
    tree: &PointCloud,
    canvas: &CanvasSpec,
    opts: &FeatureOptions,
    image_path: Option<&dyn Fn(u16) -> std::path::PathBuf>,
) -> Result<Vec<Vec<f64>>, CliError> {
    let views = project_views(tree, canvas).map_err(|e| CliError::stage("projection", e))?;
    views
        .iter()
        .map(|v| {
            if let Some(path) = image_path {
                write_file("projection", &path(v.azimuth), v.to_ppm())?;
            }
            global_feature_vector(v, opts)
                .map(|f| f.into_values())
                .map_err(|e| CliError::stage("features", format!("view {}°: {e}", v.azimuth)))
        })
        .collect()
}

fn image_file(tree: usize, azimuth: u16) -> String {
    format!("images/tree_{tree:04}_az{azimuth:03}.ppm")
}

/// Features of every view of every tree (rows tree-major, azimuth-minor)
/// plus the views manifest; images go under `out/images` when `out` is set.
pub fn feature_table(
    trees: &[(usize, &PointCloud, Option<DecayLevel>, usize)],
    canvas: &CanvasSpec,
    opts: &FeatureOptions,
    out: Option<&Path>,
) -> Result<(FeatureTable, String), CliError> {
    let per_tree: Vec<Vec<Vec<f64>>> = trees
        .par_iter()
        .map(|&(id, cloud, _, _)| {
            let path = |az: u16| out.expect("checked by caller").join(image_file(id, az));
            tree_features(cloud, canvas, opts, out.map(|_| &path as &dyn Fn(u16) -> std::path::PathBuf))
                .map_err(|e| match e {
                    CliError::Stage { stage, message } => CliError::Stage { stage, message: format!("tree {id}: {message}") },
                    other => other,
                })
        })
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::with_capacity(trees.len() * 4);
    let mut values = Vec::with_capacity(trees.len() * 4);
    let mut files = Vec::with_capacity(trees.len() * 4);
    for (&(id, _, label, group), feats) in trees.iter().zip(per_tree) {
        for (az, v) in AZIMUTHS.iter().zip(feats) {
            rows.push(FeatureRow {
                sample_id: rows.len(),
                tree_id: id,
                azimuth: *az,
                label: label.map(|l| l.get() as u32),
                group,
            });
            values.push(v);
            files.push((id, *az, label, image_file(id, *az)));
        }
    }
    let manifest = views_manifest_csv(files.iter().map(|(id, az, l, f)| (*id, *az, *l, f.as_str())));
    let names = feature_names(opts, canvas.final_width, canvas.final_height);
    Ok((FeatureTable { names, rows, values }, manifest))
}

/// Outcome of the plot pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSummary {
    pub points: usize,
    pub outside_raster: usize,
    pub ground: usize,
    pub segments: usize,
    pub rejected_segments: usize,
}

/// colorize → ground filter → height normalization → channel normalization
/// → segmentation → projection → features, writing every artifact to `out`.
pub fn run_plot(
    cloud: &PointCloud,
    raster: &GeoRaster,
    config: &PipelineConfig,
    out: &Path,
    write_images: bool,
) -> Result<PlotSummary, CliError> {
    let colored = colorize(cloud, raster).map_err(|e| CliError::stage("fusion", e))?;
    let ground = filter_ground(&colored.cloud, &config.terrain).map_err(|e| CliError::stage("terrain", e))?;
    let dtm = build_dtm(&colored.cloud, &ground, config.dtm_cell).map_err(|e| CliError::stage("terrain", e))?;
    let heights = normalize_heights(&colored.cloud, &dtm).map_err(|e| CliError::stage("terrain", e))?;
    let normalized = normalize_channels(&heights).map_err(|e| CliError::stage("fusion", e))?;
    write_file("terrain", &out.join("dtm.txt"), dtm.to_text())?;

    let above: Vec<usize> = (0..normalized.len()).filter(|&i| !ground[i]).collect();
    if above.is_empty() {
        return Err(CliError::stage("segmentation", "every point was classified as ground"));
    }
    let vegetation = normalized.select(&above);
    let segments = segment_trees(&vegetation, &config.seg).map_err(|e| CliError::stage("segmentation", e))?;
    let (kept, rejected) = filter_segments(segments, &config.seg);
    if kept.is_empty() {
        return Err(CliError::stage("segmentation", "no tree segment passed the size and height filters"));
    }
    // ids index the kept list so files and rows line up
    let kept: Vec<TreeSegment> = kept.into_iter().enumerate().map(|(i, s)| TreeSegment { id: i, ..s }).collect();
    write_file("segmentation", &out.join("segments.csv"), segment_manifest_csv(&kept))?;
    for s in &kept {
        let path = out.join(format!("trees/tree_{:04}.txt", s.id));
        write_file("segmentation", &path, deadwood::model::write_text_cloud(&s.points))?;
    }

    let canvas = canvas_for(config, kept.iter().map(|s| &s.points));
    let trees: Vec<_> = kept.iter().map(|s| (s.id, &s.points, None, s.id)).collect();
    let (table, views) = feature_table(&trees, &canvas, &config.features, write_images.then_some(out))?;
    write_file("projection", &out.join("views.csv"), views)?;
    write_file("features", &out.join("features.csv"), table.to_csv())?;
    Ok(PlotSummary {
        points: cloud.len(),
        outside_raster: colored.outside,
        ground: ground.iter().filter(|&&g| g).count(),
        segments: kept.len(),
        rejected_segments: rejected.len(),
    })
}

/// Projects labeled dataset trees and writes their feature table.
pub fn run_dataset(
    samples: &[LabeledSample<f64>],
    config: &PipelineConfig,
    out: &Path,
    write_images: bool,
) -> Result<FeatureTable, CliError> {
    let canvas = canvas_for(config, samples.iter().map(|s| &s.tree.points));
    let trees: Vec<_> = samples.iter().map(|s| (s.tree.id, &s.tree.points, Some(s.label), s.group)).collect();
    let (table, views) = feature_table(&trees, &canvas, &config.features, write_images.then_some(out))?;
    write_file("projection", &out.join("views.csv"), views)?;
    write_file("features", &out.join("features.csv"), table.to_csv())?;
    Ok(table)
}

/// Forest on a fixed feature matrix.
pub struct FeatureForest<'a> {
    pub x: &'a Matrix<f64>,
    pub labels: &'a [u32],
    pub rf: RfConfig,
}

impl FoldExperiment for FeatureForest<'_> {
    type Error = CliError;

    fn run_fold(&self, fold: &Fold<'_>) -> Result<Vec<u32>, CliError> {
        let y: Vec<u32> = fold.train.iter().map(|&i| self.labels[i]).collect();
        let model = fit_forest(&self.x.select(fold.train), &y, &self.rf).map_err(|e| CliError::stage("forest", e))?;
        model.predict_all(&self.x.select(fold.test)).map_err(|e| CliError::stage("forest", e))
    }
}

/// Forest on dataset trees whose training side is re-projected from augmented
/// clouds in every fold. Rows are views: row `4·s + a` is azimuth `a` of
/// sample `s`.
pub struct AugmentedForest<'a> {
    pub samples: &'a [LabeledSample<f64>],
    /// Features of the unaugmented views, one row per view.
    pub x: &'a Matrix<f64>,
    pub labels: &'a [u32],
    pub canvas: CanvasSpec,
    pub features: FeatureOptions,
    pub rf: RfConfig,
    pub augment: AugmentConfig,
}

impl FoldExperiment for AugmentedForest<'_> {
    type Error = CliError;

    fn run_fold(&self, fold: &Fold<'_>) -> Result<Vec<u32>, CliError> {
        let mut trees: Vec<usize> = fold.train.iter().map(|&r| r / 4).collect();
        trees.dedup();
        let augmented: Vec<(usize, Vec<Vec<f64>>)> = trees
            .par_iter()
            .map(|&s| {
                let cfg = AugmentConfig { seed: derive_seed(fold.seed, s as u64), ..self.augment };
                let cloud = augment(&self.samples[s].tree.points, &cfg).map_err(|e| CliError::stage("evalkit", e))?;
                Ok((s, tree_features(&cloud, &self.canvas, &self.features, None)?))
            })
            .collect::<Result<_, CliError>>()?;
        let mut rows = Vec::with_capacity(fold.train.len() * self.x.cols());
        let mut cursor = 0;
        for &r in fold.train {
            while augmented[cursor].0 != r / 4 {
                cursor += 1;
            }
            rows.extend_from_slice(&augmented[cursor].1[r % 4]);
        }
        let x = Matrix::new(fold.train.len(), self.x.cols(), rows);
        let y: Vec<u32> = fold.train.iter().map(|&i| self.labels[i]).collect();
        let model = fit_forest(&x, &y, &self.rf).map_err(|e| CliError::stage("forest", e))?;
        model.predict_all(&self.x.select(fold.test)).map_err(|e| CliError::stage("forest", e))
    }
}
