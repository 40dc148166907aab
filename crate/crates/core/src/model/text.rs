//! Whitespace-separated point text: `x y z i` or `x y z i nir r g` per line.

use std::fmt::Write;

use super::{ModelError, MultispectralPoint, PointCloud};
use crate::num::Real;

pub fn read_text_cloud<T: Real>(text: &str) -> Result<PointCloud<T>, ModelError> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 4 && fields.len() != 7 {
            return Err(ModelError::TextFieldCount {
                line: line_no,
                found: fields.len(),
            });
        }
        let mut v = [0.0f64; 7];
        for (slot, tok) in v.iter_mut().zip(&fields) {
            *slot = tok
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| ModelError::TextParse {
                    line: line_no,
                    token: tok.to_string(),
                })?;
        }
        points.push(
            MultispectralPoint::new(T::of(v[0]), T::of(v[1]), T::of(v[2]), T::of(v[3]))
                .with_color(T::of(v[4]), T::of(v[5]), T::of(v[6])),
        );
    }
    Ok(PointCloud::from_points(points))
}

/// Seven fields per point, six decimal places each.
pub fn write_text_cloud<T: Real>(cloud: &PointCloud<T>) -> String {
    let mut s = String::with_capacity(cloud.len() * 64);
    for p in cloud.points() {
        let _ = writeln!(
            s,
            "{:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6}",
            p.x.f64(),
            p.y.f64(),
            p.z.f64(),
            p.intensity.f64(),
            p.nir.f64(),
            p.r.f64(),
            p.g.f64()
        );
    }
    s
}
