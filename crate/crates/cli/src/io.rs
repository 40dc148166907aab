//! File formats owned by the command-line tool: dataset manifests and
//! feature tables (CSV), plus thin wrappers over the library readers.

use std::path::{Path, PathBuf};

use deadwood::dataset::{LabeledSample, Source};
use deadwood::model::{read_geo_raster, read_las, read_text_cloud, ChannelState};
use deadwood::segmentation::TreeSegment;
use deadwood::{DecayLevel, GeoRaster, PointCloud};
use rayon::prelude::*;

use crate::error::CliError;

pub fn read_bytes(stage: &'static str, path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::io(stage, path, e))
}

pub fn read_string(stage: &'static str, path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(stage, path, e))
}

/// Writes a file, creating parent directories.
pub fn write_file(stage: &'static str, path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(stage, dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(stage, path, e))
}

/// LAS (`.las`) or whitespace text, chosen by extension.
pub fn read_cloud(path: &Path) -> Result<PointCloud, CliError> {
    let bytes = read_bytes("ingest", path)?;
    let is_las = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("las"));
    let cloud = if is_las {
        read_las(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|e| CliError::format("ingest", path, e))?;
        read_text_cloud(&text)
    };
    cloud.map_err(|e| CliError::format("ingest", path, e))
}

/// PPM raster plus its six-line world file (default: same stem, `.wld`).
pub fn read_raster(path: &Path, world: Option<&Path>) -> Result<GeoRaster, CliError> {
    let world: PathBuf = world.map_or_else(|| path.with_extension("wld"), Path::to_path_buf);
    let ppm = read_bytes("fusion", path)?;
    let wld = read_string("fusion", &world)?;
    read_geo_raster(&ppm, &wld).map_err(|e| CliError::format("fusion", path, e))
}

fn csv_bytes(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Shortest text that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    let s = v.to_string();
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub sample_id: usize,
    pub label: DecayLevel,
    pub source: Source,
    pub group: usize,
    pub points: usize,
    /// Cloud file relative to the manifest's directory.
    pub file: String,
}

pub const MANIFEST_HEADER: [&str; 6] = ["sample_id", "label", "source", "group", "points", "file"];

pub fn manifest_csv(rows: &[ManifestRow]) -> Vec<u8> {
    let header: Vec<String> = MANIFEST_HEADER.iter().map(|s| s.to_string()).collect();
    csv_bytes(
        &header,
        rows.iter().map(|r| {
            vec![
                r.sample_id.to_string(),
                r.label.to_string(),
                r.source.to_string(),
                r.group.to_string(),
                r.points.to_string(),
                r.file.clone(),
            ]
        }),
    )
}

fn field<T: std::str::FromStr>(path: &Path, rec: &csv::StringRecord, row: usize, col: usize, name: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    let raw = rec.get(col).ok_or_else(|| CliError::format("dataset", path, format!("row {row}: missing column `{name}`")))?;
    raw.trim()
        .parse()
        .map_err(|e| CliError::format("dataset", path, format!("row {row}, column {} (`{name}`): `{raw}`: {e}", col + 1)))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>, CliError> {
    let text = read_string("dataset", path)?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| CliError::format("dataset", path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != MANIFEST_HEADER {
        return Err(CliError::format(
            "dataset",
            path,
            format!("header must be `{}`", MANIFEST_HEADER.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| CliError::format("dataset", path, format!("row {row}: {e}")))?;
        let level: u8 = field(path, &rec, row, 1, "label")?;
        rows.push(ManifestRow {
            sample_id: field(path, &rec, row, 0, "sample_id")?,
            label: DecayLevel::new(level).map_err(|e| CliError::format("dataset", path, format!("row {row}: {e}")))?,
            source: field(path, &rec, row, 2, "source")?,
            group: field(path, &rec, row, 3, "group")?,
            points: field(path, &rec, row, 4, "points")?,
            file: field(path, &rec, row, 5, "file")?,
        });
    }
    Ok(rows)
}

/// Loads every cloud named in a manifest. Dataset clouds hold single,
/// height-normalized trees with channels already in `[0, 1]`.
pub fn load_dataset(manifest: &Path) -> Result<Vec<LabeledSample<f64>>, CliError> {
    let rows = read_manifest(manifest)?;
    let dir = manifest.parent().unwrap_or(Path::new("."));
    rows.par_iter()
        .map(|row| {
            let path = dir.join(&row.file);
            let text = read_string("dataset", &path)?;
            let cloud: PointCloud = read_text_cloud(&text)
                .map_err(|e| CliError::format("dataset", &path, e))?
                .with_channel_state(ChannelState::Normalized);
            if cloud.len() != row.points {
                return Err(CliError::format(
                    "dataset",
                    &path,
                    format!("manifest lists {} points, file holds {}", row.points, cloud.len()),
                ));
            }
            let apex = *cloud
                .points()
                .iter()
                .max_by(|a, b| a.z.total_cmp(&b.z))
                .ok_or_else(|| CliError::format("dataset", &path, "empty cloud"))?;
            Ok(LabeledSample {
                tree: TreeSegment { id: row.sample_id, indices: (0..cloud.len()).collect(), points: cloud, apex },
                label: row.label,
                source: row.source,
                group: row.group,
            })
        })
        .collect()
}

/// One view's identifying columns in a feature table.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub sample_id: usize,
    pub tree_id: usize,
    pub azimuth: u16,
    pub label: Option<u32>,
    pub group: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub rows: Vec<FeatureRow>,
    pub values: Vec<Vec<f64>>,
}

pub const FEATURE_ID_COLUMNS: [&str; 5] = ["sample_id", "tree_id", "azimuth", "label", "group"];

impl FeatureTable {
    pub fn to_csv(&self) -> Vec<u8> {
        let header: Vec<String> = FEATURE_ID_COLUMNS
            .iter()
            .map(|s| s.to_string())
            .chain(self.names.iter().cloned())
            .collect();
        csv_bytes(
            &header,
            self.rows.iter().zip(&self.values).map(|(r, v)| {
                let mut rec = vec![
                    r.sample_id.to_string(),
                    r.tree_id.to_string(),
                    r.azimuth.to_string(),
                    r.label.map_or_else(String::new, |l| l.to_string()),
                    r.group.to_string(),
                ];
                rec.extend(v.iter().map(|&x| fmt_f64(x)));
                rec
            }),
        )
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let stage = "features";
        let text = read_string(stage, path)?;
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| CliError::format(stage, path, e))?.clone();
        if header.len() <= FEATURE_ID_COLUMNS.len() || header.iter().take(5).ne(FEATURE_ID_COLUMNS) {
            return Err(CliError::format(
                stage,
                path,
                format!("header must start with `{}` followed by feature columns", FEATURE_ID_COLUMNS.join(",")),
            ));
        }
        let names: Vec<String> = header.iter().skip(5).map(String::from).collect();
        let mut rows = Vec::new();
        let mut values = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let row = i + 2;
            let rec = rec.map_err(|e| CliError::format(stage, path, format!("row {row}: {e}")))?;
            let bad = |col: usize, msg: String| CliError::format(stage, path, format!("row {row}, column {}: {msg}", col + 1));
            let int = |col: usize| -> Result<usize, CliError> {
                rec[col].trim().parse().map_err(|_| bad(col, format!("`{}` is not a non-negative integer", &rec[col])))
            };
            let label = match rec[3].trim() {
                "" => None,
                s => Some(s.parse::<u32>().map_err(|_| bad(3, format!("`{s}` is not a class label")))?),
            };
            let azimuth = int(2)?;
            rows.push(FeatureRow {
                sample_id: int(0)?,
                tree_id: int(1)?,
                azimuth: u16::try_from(azimuth).map_err(|_| bad(2, format!("azimuth {azimuth} out of range")))?,
                label,
                group: int(4)?,
            });
            let v: Vec<f64> = (5..rec.len())
                .map(|c| {
                    rec[c]
                        .trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| bad(c, format!("`{}` is not a finite number", &rec[c])))
                })
                .collect::<Result<_, _>>()?;
            values.push(v);
        }
        Ok(Self { names, rows, values })
    }
}

/// `true` when the CSV at `path` starts with the dataset manifest header.
pub fn is_manifest(path: &Path) -> Result<bool, CliError> {
    use std::io::BufRead;
    let file = std::fs::File::open(path).map_err(|e| CliError::io("crossval", path, e))?;
    let mut first = String::new();
    std::io::BufReader::new(file)
        .read_line(&mut first)
        .map_err(|e| CliError::io("crossval", path, e))?;
    Ok(first.trim() == MANIFEST_HEADER.join(","))
}
