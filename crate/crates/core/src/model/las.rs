//! Uncompressed LAS 1.2 reader and writer (point formats 0 and 1).

use super::{ModelError, MultispectralPoint, PointCloud};
use crate::num::Real;

pub const LAS_HEADER_SIZE: usize = 227;
/// Coordinate quantum used by the writer.
pub const LAS_SCALE: f64 = 0.001;

const SIGNATURE: &[u8; 4] = b"LASF";
const FORMAT0_LEN: usize = 20;
const FORMAT1_LEN: usize = 28;

fn need(bytes: &[u8], offset: usize, len: usize) -> Result<&[u8], ModelError> {
    bytes
        .get(offset..offset + len)
        .ok_or(ModelError::LasTruncated {
            offset,
            needed: len,
            available: bytes.len().saturating_sub(offset),
        })
}

fn u8_at(b: &[u8], o: usize) -> Result<u8, ModelError> {
    Ok(need(b, o, 1)?[0])
}

fn u16_at(b: &[u8], o: usize) -> Result<u16, ModelError> {
    Ok(u16::from_le_bytes(need(b, o, 2)?.try_into().unwrap()))
}

fn u32_at(b: &[u8], o: usize) -> Result<u32, ModelError> {
    Ok(u32::from_le_bytes(need(b, o, 4)?.try_into().unwrap()))
}

fn i32_at(b: &[u8], o: usize) -> Result<i32, ModelError> {
    Ok(i32::from_le_bytes(need(b, o, 4)?.try_into().unwrap()))
}

fn f64_at(b: &[u8], o: usize) -> Result<f64, ModelError> {
    Ok(f64::from_le_bytes(need(b, o, 8)?.try_into().unwrap()))
}

/// Decodes an uncompressed LAS 1.2 file.
///
/// Coordinates are `record * scale + offset`; intensity is copied and the
/// color channels start at zero.
pub fn read_las<T: Real>(bytes: &[u8]) -> Result<PointCloud<T>, ModelError> {
    if need(bytes, 0, 4)? != SIGNATURE {
        return Err(ModelError::LasSignature { offset: 0 });
    }
    let (major, minor) = (u8_at(bytes, 24)?, u8_at(bytes, 25)?);
    if (major, minor) != (1, 2) {
        return Err(ModelError::LasVersion {
            major,
            minor,
            offset: 24,
        });
    }
    let data_offset = u32_at(bytes, 96)? as usize;
    let format = u8_at(bytes, 104)?;
    let min_len = match format {
        0 => FORMAT0_LEN,
        1 => FORMAT1_LEN,
        _ => return Err(ModelError::LasFormat { format, offset: 104 }),
    };
    let record_len = u16_at(bytes, 105)? as usize;
    if record_len < min_len {
        return Err(ModelError::LasFormat { format, offset: 105 });
    }
    let count = u32_at(bytes, 107)? as usize;
    let scale = [f64_at(bytes, 131)?, f64_at(bytes, 139)?, f64_at(bytes, 147)?];
    let offset = [f64_at(bytes, 155)?, f64_at(bytes, 163)?, f64_at(bytes, 171)?];
    need(bytes, 0, LAS_HEADER_SIZE)?;

    let block = need(bytes, data_offset, count * record_len)?;
    let points = block
        .chunks_exact(record_len)
        .map(|rec| {
            let raw = [
                i32_at(rec, 0).unwrap(),
                i32_at(rec, 4).unwrap(),
                i32_at(rec, 8).unwrap(),
            ];
            let coord = |k: usize| T::of(raw[k] as f64 * scale[k] + offset[k]);
            let intensity = u16_at(rec, 12).unwrap();
            MultispectralPoint::new(coord(0), coord(1), coord(2), T::of(intensity as f64))
        })
        .collect();
    Ok(PointCloud::from_points(points))
}

fn scaled(value: f64, offset: f64, axis: char) -> Result<i32, ModelError> {
    let q = ((value - offset) / LAS_SCALE).round();
    if q.is_finite() && q >= i32::MIN as f64 && q <= i32::MAX as f64 {
        Ok(q as i32)
    } else {
        Err(ModelError::LasCoordinateRange { axis, value })
    }
}

/// Encodes a cloud as LAS 1.2, point format 0, scale 0.001 and offsets at the
/// floor of the bounding-box minimum. Only x, y, z and intensity are stored.
pub fn write_las<T: Real>(cloud: &PointCloud<T>) -> Result<Vec<u8>, ModelError> {
    let (offset, min, max) = match cloud.bounds() {
        Ok(b) => {
            let min = b.min.map(|v| v.f64());
            let max = b.max.map(|v| v.f64());
            (min.map(f64::floor), min, max)
        }
        Err(_) => ([0.0; 3], [0.0; 3], [0.0; 3]),
    };
    let n = cloud.len();
    let count = u32::try_from(n).map_err(|_| ModelError::LasCoordinateRange {
        axis: 'n',
        value: n as f64,
    })?;

    let mut out = Vec::with_capacity(LAS_HEADER_SIZE + n * FORMAT0_LEN);
    out.extend_from_slice(SIGNATURE);
    out.extend_from_slice(&0u16.to_le_bytes()); // file source id
    out.extend_from_slice(&0u16.to_le_bytes()); // global encoding
    out.extend_from_slice(&[0u8; 16]); // project GUID
    out.extend_from_slice(&[1, 2]);
    let mut ident = [0u8; 32];
    ident[..5].copy_from_slice(b"OTHER");
    out.extend_from_slice(&ident);
    let mut software = [0u8; 32];
    software[..8].copy_from_slice(b"deadwood");
    out.extend_from_slice(&software);
    out.extend_from_slice(&0u16.to_le_bytes()); // creation day
    out.extend_from_slice(&0u16.to_le_bytes()); // creation year
    out.extend_from_slice(&(LAS_HEADER_SIZE as u16).to_le_bytes());
    out.extend_from_slice(&(LAS_HEADER_SIZE as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes()); // VLR count
    out.push(0);
    out.extend_from_slice(&(FORMAT0_LEN as u16).to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    for _ in 0..4 {
        out.extend_from_slice(&0u32.to_le_bytes());
    }
    for _ in 0..3 {
        out.extend_from_slice(&LAS_SCALE.to_le_bytes());
    }
    for o in offset {
        out.extend_from_slice(&o.to_le_bytes());
    }
    // extents as they decode after quantization
    let axes = ['x', 'y', 'z'];
    for k in 0..3 {
        let hi = scaled(max[k], offset[k], axes[k])? as f64 * LAS_SCALE + offset[k];
        let lo = scaled(min[k], offset[k], axes[k])? as f64 * LAS_SCALE + offset[k];
        out.extend_from_slice(&hi.to_le_bytes());
        out.extend_from_slice(&lo.to_le_bytes());
    }
    debug_assert_eq!(out.len(), LAS_HEADER_SIZE);

    for (i, p) in cloud.points().iter().enumerate() {
        for (k, (v, axis)) in [(p.x, 'x'), (p.y, 'y'), (p.z, 'z')].into_iter().enumerate() {
            out.extend_from_slice(&scaled(v.f64(), offset[k], axis)?.to_le_bytes());
        }
        let inten = p.intensity.f64().round();
        if !(0.0..=u16::MAX as f64).contains(&inten) {
            return Err(ModelError::LasIntensityRange {
                index: i,
                value: p.intensity.f64(),
            });
        }
        out.extend_from_slice(&(inten as u16).to_le_bytes());
        out.push(0x09); // return 1 of 1
        out.push(0); // classification
        out.push(0); // scan angle rank
        out.push(0); // user data
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Header assembled field by field from the LAS 1.2 layout.
    fn hand_header(count: u32, scale: f64, format: u8, record_len: u16) -> Vec<u8> {
        let mut h = vec![0u8; LAS_HEADER_SIZE];
        h[0..4].copy_from_slice(b"LASF");
        h[24] = 1;
        h[25] = 2;
        h[94..96].copy_from_slice(&227u16.to_le_bytes());
        h[96..100].copy_from_slice(&227u32.to_le_bytes());
        h[104] = format;
        h[105..107].copy_from_slice(&record_len.to_le_bytes());
        h[107..111].copy_from_slice(&count.to_le_bytes());
        for k in 0..3 {
            let o = 131 + 8 * k;
            h[o..o + 8].copy_from_slice(&scale.to_le_bytes());
        }
        h
    }

    fn hand_record(raw: [i32; 3], intensity: u16) -> Vec<u8> {
        let mut r = Vec::new();
        for v in raw {
            r.extend_from_slice(&v.to_le_bytes());
        }
        r.extend_from_slice(&intensity.to_le_bytes());
        r.extend_from_slice(&[0u8; 6]);
        r
    }

    #[test]
    fn decodes_hand_assembled_point() {
        let mut b = hand_header(1, 0.01, 0, 20);
        b.extend(hand_record([100, 200, 300], 7));
        let c: PointCloud<f64> = read_las(&b).unwrap();
        assert_eq!(c.len(), 1);
        let p = c.points()[0];
        assert!((p.x - 1.0).abs() < 1e-12);
        assert!((p.y - 2.0).abs() < 1e-12);
        assert!((p.z - 3.0).abs() < 1e-12);
        assert_eq!(p.intensity, 7.0);
        assert_eq!((p.nir, p.r, p.g), (0.0, 0.0, 0.0));
    }

    #[test]
    fn format_one_records_are_accepted() {
        let mut b = hand_header(1, 0.01, 1, 28);
        b.extend(hand_record([100, 200, 300], 7));
        b.extend_from_slice(&12.5f64.to_le_bytes());
        let c: PointCloud<f64> = read_las(&b).unwrap();
        assert!((c.points()[0].z - 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_points_is_empty_cloud() {
        let b = hand_header(0, 0.01, 0, 20);
        let c: PointCloud<f64> = read_las(&b).unwrap();
        assert!(c.is_empty());
    }

    #[test]
    fn distinct_errors() {
        let mut b = hand_header(1, 0.01, 0, 20);
        b.extend(hand_record([1, 2, 3], 0));

        let mut bad = b.clone();
        bad[0] = b'X';
        assert_eq!(read_las::<f64>(&bad), Err(ModelError::LasSignature { offset: 0 }));

        let mut bad = b.clone();
        bad[25] = 4;
        assert!(matches!(read_las::<f64>(&bad), Err(ModelError::LasVersion { minor: 4, .. })));

        let mut bad = b.clone();
        bad[104] = 3;
        assert!(matches!(read_las::<f64>(&bad), Err(ModelError::LasFormat { format: 3, .. })));

        let bad = &b[..b.len() - 5];
        assert_eq!(
            read_las::<f64>(bad),
            Err(ModelError::LasTruncated {
                offset: 227,
                needed: 20,
                available: 15
            })
        );
    }

    #[test]
    fn empty_cloud_writes_header_only() {
        let b = write_las(&PointCloud::<f64>::new()).unwrap();
        assert_eq!(b.len(), LAS_HEADER_SIZE);
        assert_eq!(u32::from_le_bytes(b[107..111].try_into().unwrap()), 0);
        assert!(read_las::<f64>(&b).unwrap().is_empty());
    }

    #[test]
    fn single_point_round_trip() {
        let c = PointCloud::from_points(vec![MultispectralPoint::new(1.0, 2.0, 3.0, 7.0)]);
        let back: PointCloud<f64> = read_las(&write_las(&c).unwrap()).unwrap();
        let p = back.points()[0];
        assert!((p.x - 1.0).abs() <= LAS_SCALE);
        assert!((p.y - 2.0).abs() <= LAS_SCALE);
        assert!((p.z - 3.0).abs() <= LAS_SCALE);
        assert_eq!(p.intensity, 7.0);
    }

    #[test]
    fn ten_km_extent_uses_offsets() {
        // 4.5e6 m northing with a 10 km span: (x - floor(min)) / 0.001 <= 1e7 < 2^31.
        let c = PointCloud::from_points(vec![
            MultispectralPoint::new(4_500_000.25, 5_400_000.5, 600.0, 1.0),
            MultispectralPoint::new(4_510_000.75, 5_410_000.125, 1435.0, 2.0),
        ]);
        let bytes = write_las(&c).unwrap();
        let back: PointCloud<f64> = read_las(&bytes).unwrap();
        for (a, b) in c.points().iter().zip(back.points()) {
            assert!((a.x - b.x).abs() <= LAS_SCALE);
            assert!((a.y - b.y).abs() <= LAS_SCALE);
        }
        let far = PointCloud::from_points(vec![
            MultispectralPoint::new(0.0, 0.0, 0.0, 0.0),
            MultispectralPoint::new(3.0e6, 0.0, 0.0, 0.0),
        ]);
        assert!(matches!(
            write_las(&far),
            Err(ModelError::LasCoordinateRange { axis: 'x', .. })
        ));
    }

    #[test]
    fn rewrite_is_byte_identical() {
        let c = PointCloud::from_points(
            (0..50)
                .map(|i| {
                    let t = i as f64;
                    MultispectralPoint::new(100.0 + t * 0.37, 200.0 - t * 0.11, t.sin(), t)
                })
                .collect(),
        );
        let b = write_las(&c).unwrap();
        let again = write_las(&read_las::<f64>(&b).unwrap()).unwrap();
        assert_eq!(b, again);
    }

    #[test]
    fn intensity_out_of_range() {
        let c = PointCloud::from_points(vec![MultispectralPoint::new(0.0, 0.0, 0.0, 70000.0)]);
        assert!(matches!(write_las(&c), Err(ModelError::LasIntensityRange { .. })));
    }
}
