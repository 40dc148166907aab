//! Binary PPM (P6) rasters and ESRI-style six-line world files.

use std::fmt::Write;

use super::{AffineTransform, GeoRaster, ModelError};

struct Header {
    width: usize,
    height: usize,
    data_start: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header, ModelError> {
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        return Err(ModelError::PpmMagic);
    }
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(ModelError::PpmHeader("unexpected end of header".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        let tok = std::str::from_utf8(&bytes[start..pos]).unwrap_or("");
        *field = tok
            .parse()
            .map_err(|_| ModelError::PpmHeader(format!("bad number at byte {start}")))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(ModelError::PpmHeader("missing separator before pixel data".into()));
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(ModelError::PpmMaxval(maxval));
    }
    if width == 0 || height == 0 {
        return Err(ModelError::PpmHeader("zero dimension".into()));
    }
    Ok(Header {
        width: width as usize,
        height: height as usize,
        data_start: pos + 1,
    })
}

/// Decodes a P6 image into `(width, height, interleaved RGB bytes)`.
pub fn read_ppm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>), ModelError> {
    let h = parse_header(bytes)?;
    let expected = h.width * h.height * 3;
    let data = &bytes[h.data_start..];
    if data.len() < expected {
        return Err(ModelError::PpmTruncated {
            expected,
            found: data.len(),
        });
    }
    Ok((h.width, h.height, data[..expected].to_vec()))
}

pub fn write_ppm(width: usize, height: usize, rgb: &[u8]) -> Vec<u8> {
    assert_eq!(rgb.len(), width * height * 3, "pixel buffer size");
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(rgb);
    out
}

pub fn read_world_file(text: &str) -> Result<AffineTransform, ModelError> {
    let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    if lines.len() != 6 {
        return Err(ModelError::WorldFileLines(lines.len()));
    }
    let mut v = [0.0; 6];
    for (i, (slot, line)) in v.iter_mut().zip(&lines).enumerate() {
        *slot = line
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| ModelError::WorldFileParse {
                line: i + 1,
                token: line.to_string(),
            })?;
    }
    Ok(AffineTransform::from_world_file_order(v))
}

pub fn write_world_file(t: &AffineTransform) -> String {
    let mut s = String::new();
    for v in t.to_world_file_order() {
        let _ = writeln!(s, "{v}");
    }
    s
}

/// PPM red/green/blue bytes become the NIR/R/G planes.
pub fn read_geo_raster(ppm: &[u8], world_file: &str) -> Result<GeoRaster, ModelError> {
    let (width, height, rgb) = read_ppm(ppm)?;
    let transform = read_world_file(world_file)?;
    let mut planes = [
        Vec::with_capacity(width * height),
        Vec::with_capacity(width * height),
        Vec::with_capacity(width * height),
    ];
    for px in rgb.chunks_exact(3) {
        for (plane, &v) in planes.iter_mut().zip(px) {
            plane.push(v);
        }
    }
    GeoRaster::new(width, height, planes, transform)
}

#[cfg(test)]
mod tests {
    use super::*;

    const WORLD: &str = "0.2\n0\n0\n-0.2\n100.1\n200.1\n";

    #[test]
    fn single_white_pixel() {
        let r = read_geo_raster(&write_ppm(1, 1, &[255, 255, 255]), WORLD).unwrap();
        assert_eq!(r.pixel(0, 0), [255, 255, 255]);
        assert_eq!(r.transform().a, 0.2);
        assert_eq!(r.transform().e, -0.2);
        assert_eq!(r.transform().c, 100.1);
    }

    #[test]
    fn planes_keep_row_major_order() {
        let rgb = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12];
        let r = read_geo_raster(&write_ppm(2, 2, &rgb), WORLD).unwrap();
        assert_eq!(r.plane(0), &[1, 4, 7, 10]);
        assert_eq!(r.plane(1), &[2, 5, 8, 11]);
        assert_eq!(r.plane(2), &[3, 6, 9, 12]);
        assert_eq!(r.pixel(1, 0), [4, 5, 6]);
        assert_eq!(r.pixel(0, 1), [7, 8, 9]);
    }

    #[test]
    fn header_comments_allowed() {
        let mut b = b"P6\n# made by hand\n1 1\n255\n".to_vec();
        b.extend_from_slice(&[9, 8, 7]);
        assert_eq!(read_ppm(&b).unwrap().2, vec![9, 8, 7]);
    }

    #[test]
    fn malformed_inputs() {
        let good = write_ppm(2, 2, &[0; 12]);
        let truncated = &good[..good.len() - 1];
        assert_eq!(
            read_geo_raster(truncated, WORLD),
            Err(ModelError::PpmTruncated {
                expected: 12,
                found: 11
            })
        );
        let mut p3 = good.clone();
        p3[1] = b'3';
        assert_eq!(read_geo_raster(&p3, WORLD), Err(ModelError::PpmMagic));
        let mut b = b"P6\n1 1\n65535\n".to_vec();
        b.extend_from_slice(&[0; 6]);
        assert_eq!(read_geo_raster(&b, WORLD), Err(ModelError::PpmMaxval(65535)));
        assert_eq!(
            read_geo_raster(&good, "1\n0\n0\n-1\n0\n"),
            Err(ModelError::WorldFileLines(5))
        );
    }

    #[test]
    fn world_file_round_trip() {
        let t = read_world_file(WORLD).unwrap();
        assert_eq!(read_world_file(&write_world_file(&t)).unwrap(), t);
    }
}
