//! Readers and writers for KITTI velodyne scans, SemanticKITTI labels, PCD
//! files and 16-bit range PNGs.

use std::fmt::Write as _;
use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::rangeview::{Point, PointCloud, ProjectionConfig, RangeImage};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("truncated file: {len} bytes is not a multiple of {record}")]
    Truncated { len: usize, record: usize },
    #[error("non-finite value in record {index}")]
    NonFinite { index: usize },
    #[error("malformed PCD: {0}")]
    Pcd(String),
    #[error("unsupported format: {0}")]
    Unsupported(String),
    #[error("png: {0}")]
    Png(String),
    #[error("range {value} m at pixel {index} cannot be stored in centimeter PNG")]
    OutOfRange { index: usize, value: f64 },
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    Shape { expected: (usize, usize), got: (usize, usize) },
    #[error("{0} labels for {1} points")]
    LabelCount(usize, usize),
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, IoError> {
    fs::read(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    fs::write(path, bytes).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Little-endian `f32` quadruples `(x, y, z, intensity)`.
pub fn decode_kitti_bin(bytes: &[u8]) -> Result<PointCloud, IoError> {
    if !bytes.len().is_multiple_of(16) {
        return Err(IoError::Truncated {
            len: bytes.len(),
            record: 16,
        });
    }
    let mut points = Vec::with_capacity(bytes.len() / 16);
    for (index, rec) in bytes.chunks_exact(16).enumerate() {
        let f = |k: usize| f32::from_le_bytes([rec[4 * k], rec[4 * k + 1], rec[4 * k + 2], rec[4 * k + 3]]);
        let (x, y, z, i) = (f(0), f(1), f(2), f(3));
        if !(x.is_finite() && y.is_finite() && z.is_finite() && i.is_finite()) {
            return Err(IoError::NonFinite { index });
        }
        points.push(Point::new(x.into(), y.into(), z.into(), i.into()));
    }
    Ok(PointCloud::new(points))
}

/// Coordinates are narrowed to `f32`.
pub fn encode_kitti_bin(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.points.len() * 16);
    for p in &cloud.points {
        for v in [p.x, p.y, p.z, p.intensity] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn read_kitti_bin(path: impl AsRef<Path>) -> Result<PointCloud, IoError> {
    decode_kitti_bin(&read_bytes(path.as_ref())?)
}

pub fn write_kitti_bin(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<(), IoError> {
    write_bytes(path.as_ref(), &encode_kitti_bin(cloud))
}

/// Class id of a packed SemanticKITTI label.
pub fn label_class(raw: u32) -> u16 {
    (raw & 0xffff) as u16
}

/// Instance id of a packed SemanticKITTI label.
pub fn label_instance(raw: u32) -> u16 {
    (raw >> 16) as u16
}

pub fn pack_label(class: u16, instance: u16) -> u32 {
    (u32::from(instance) << 16) | u32::from(class)
}

pub fn decode_labels(bytes: &[u8]) -> Result<Vec<u32>, IoError> {
    if !bytes.len().is_multiple_of(4) {
        return Err(IoError::Truncated {
            len: bytes.len(),
            record: 4,
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub fn encode_labels(ids: &[u32]) -> Vec<u8> {
    ids.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<u32>, IoError> {
    decode_labels(&read_bytes(path.as_ref())?)
}

pub fn write_labels(ids: &[u32], path: impl AsRef<Path>) -> Result<(), IoError> {
    write_bytes(path.as_ref(), &encode_labels(ids))
}

/// A scan with optional per-point labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRecord {
    pub cloud: PointCloud,
    pub labels: Option<Vec<u32>>,
    pub source_path: String,
}

/// Reads a `.bin` scan and, when present, its labels from either
/// `<stem>.label` beside it or `../labels/<stem>.label`.
pub fn read_scan(path: impl AsRef<Path>) -> Result<ScanRecord, IoError> {
    let path = path.as_ref();
    let cloud = read_kitti_bin(path)?;
    let mut candidates = vec![path.with_extension("label")];
    if let (Some(dir), Some(stem)) = (path.parent().and_then(Path::parent), path.file_stem()) {
        candidates.push(dir.join("labels").join(stem).with_extension("label"));
    }
    let labels = match candidates.into_iter().find(|p| p.is_file()) {
        Some(p) => {
            let l = read_labels(&p)?;
            if l.len() != cloud.len() {
                return Err(IoError::LabelCount(l.len(), cloud.len()));
            }
            Some(l)
        }
        None => None,
    };
    Ok(ScanRecord {
        cloud,
        labels,
        source_path: path.display().to_string(),
    })
}

/// Sorted `.bin` files of a directory.
pub fn list_scans(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, IoError> {
    let dir = dir.as_ref();
    let entries = fs::read_dir(dir).map_err(|source| IoError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut out: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "bin"))
        .collect();
    out.sort();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcdData {
    Ascii,
    Binary,
}

/// PCD v0.7 with fields `x y z intensity`, all `F 4 1`.
pub fn encode_pcd(cloud: &PointCloud, data: PcdData) -> Vec<u8> {
    let n = cloud.points.len();
    let mut header = String::new();
    header.push_str("# .PCD v0.7 - Point Cloud Data file format\n");
    header.push_str("VERSION 0.7\nFIELDS x y z intensity\nSIZE 4 4 4 4\nTYPE F F F F\nCOUNT 1 1 1 1\n");
    let _ = write!(header, "WIDTH {n}\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\nPOINTS {n}\n");
    let mut out = header.into_bytes();
    match data {
        PcdData::Ascii => {
            out.extend_from_slice(b"DATA ascii\n");
            let mut body = String::with_capacity(n * 40);
            for p in &cloud.points {
                // shortest representation that round-trips f32 (<= 9 digits)
                let _ = writeln!(body, "{} {} {} {}", p.x as f32, p.y as f32, p.z as f32, p.intensity as f32);
            }
            out.extend_from_slice(body.as_bytes());
        }
        PcdData::Binary => {
            out.extend_from_slice(b"DATA binary\n");
            out.extend_from_slice(&encode_kitti_bin(cloud));
        }
    }
    out
}

pub fn write_pcd(cloud: &PointCloud, path: impl AsRef<Path>, ascii: bool) -> Result<(), IoError> {
    let data = if ascii { PcdData::Ascii } else { PcdData::Binary };
    write_bytes(path.as_ref(), &encode_pcd(cloud, data))
}

pub fn read_pcd(path: impl AsRef<Path>) -> Result<PointCloud, IoError> {
    decode_pcd(&read_bytes(path.as_ref())?)
}

#[derive(Default)]
struct PcdHeader {
    fields: Option<Vec<String>>,
    size: Option<Vec<String>>,
    kind: Option<Vec<String>>,
    count: Option<Vec<String>>,
    width: Option<usize>,
    height: Option<usize>,
    points: Option<usize>,
}

fn parse_usize(key: &str, rest: &[&str]) -> Result<usize, IoError> {
    match rest {
        [v] => v.parse().map_err(|_| IoError::Pcd(format!("bad {key} value {v:?}"))),
        _ => Err(IoError::Pcd(format!("{key} takes one value"))),
    }
}

pub fn decode_pcd(bytes: &[u8]) -> Result<PointCloud, IoError> {
    let mut header = PcdHeader::default();
    let mut pos = 0;
    let data = loop {
        let Some(nl) = bytes[pos..].iter().position(|&b| b == b'\n') else {
            return Err(IoError::Pcd("missing DATA line".into()));
        };
        let line = std::str::from_utf8(&bytes[pos..pos + nl])
            .map_err(|_| IoError::Pcd("header is not UTF-8".into()))?
            .trim();
        pos += nl + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap_or_default().to_ascii_uppercase();
        let rest: Vec<&str> = parts.collect();
        let owned = || rest.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        match key.as_str() {
            "VERSION" | "VIEWPOINT" => {}
            "FIELDS" => header.fields = Some(owned()),
            "SIZE" => header.size = Some(owned()),
            "TYPE" => header.kind = Some(owned()),
            "COUNT" => header.count = Some(owned()),
            "WIDTH" => header.width = Some(parse_usize("WIDTH", &rest)?),
            "HEIGHT" => header.height = Some(parse_usize("HEIGHT", &rest)?),
            "POINTS" => header.points = Some(parse_usize("POINTS", &rest)?),
            "DATA" => match rest.as_slice() {
                ["ascii"] => break PcdData::Ascii,
                ["binary"] => break PcdData::Binary,
                [other] => return Err(IoError::Unsupported(format!("PCD DATA {other}"))),
                _ => return Err(IoError::Pcd("DATA takes one value".into())),
            },
            other => return Err(IoError::Pcd(format!("unknown header key {other:?}"))),
        }
    };

    let fields = header.fields.ok_or_else(|| IoError::Pcd("missing FIELDS".into()))?;
    let nf = fields.len();
    let has_intensity = match fields.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["x", "y", "z"] => false,
        ["x", "y", "z", "intensity"] => true,
        _ => {
            return Err(IoError::Unsupported(format!(
                "PCD fields {:?} (expected x y z [intensity])",
                fields
            )))
        }
    };
    for (name, vals, want) in [
        ("SIZE", header.size.unwrap_or_else(|| vec!["4".into(); nf]), "4"),
        ("TYPE", header.kind.unwrap_or_else(|| vec!["F".into(); nf]), "F"),
        ("COUNT", header.count.unwrap_or_else(|| vec!["1".into(); nf]), "1"),
    ] {
        if vals.len() != nf {
            return Err(IoError::Pcd(format!("{name} has {} entries for {nf} fields", vals.len())));
        }
        if vals.iter().any(|v| v != want) {
            return Err(IoError::Unsupported(format!("PCD {name} {vals:?} (only {want} supported)")));
        }
    }
    let points = header.points.ok_or_else(|| IoError::Pcd("missing POINTS".into()))?;
    if let (Some(w), Some(h)) = (header.width, header.height) {
        if w.checked_mul(h) != Some(points) {
            return Err(IoError::Pcd(format!("WIDTH*HEIGHT = {w}*{h} disagrees with POINTS {points}")));
        }
    }

    let body = &bytes[pos..];
    let mut out = Vec::new();
    match data {
        PcdData::Binary => {
            let stride = 4 * nf;
            let need = points
                .checked_mul(stride)
                .ok_or_else(|| IoError::Pcd("POINTS overflows".into()))?;
            if body.len() != need {
                return Err(IoError::Pcd(format!("binary body has {} bytes, expected {need}", body.len())));
            }
            out.reserve(points);
            for (index, rec) in body.chunks_exact(stride).enumerate() {
                let f = |k: usize| f32::from_le_bytes([rec[4 * k], rec[4 * k + 1], rec[4 * k + 2], rec[4 * k + 3]]);
                let vals = [f(0), f(1), f(2), if has_intensity { f(3) } else { 0.0 }];
                if vals.iter().any(|v| !v.is_finite()) {
                    return Err(IoError::NonFinite { index });
                }
                out.push(Point::new(vals[0].into(), vals[1].into(), vals[2].into(), vals[3].into()));
            }
        }
        PcdData::Ascii => {
            let text = std::str::from_utf8(body).map_err(|_| IoError::Pcd("ascii body is not UTF-8".into()))?;
            for (index, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
                if index >= points {
                    return Err(IoError::Pcd(format!("more than POINTS={points} rows")));
                }
                let vals: Vec<f32> = line
                    .split_whitespace()
                    .map(|t| t.parse::<f32>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| IoError::Pcd(format!("bad number in row {index}")))?;
                if vals.len() != nf {
                    return Err(IoError::Pcd(format!("row {index} has {} values, expected {nf}", vals.len())));
                }
                if vals.iter().any(|v| !v.is_finite()) {
                    return Err(IoError::NonFinite { index });
                }
                let inten = if has_intensity { vals[3] } else { 0.0 };
                out.push(Point::new(vals[0].into(), vals[1].into(), vals[2].into(), inten.into()));
            }
            if out.len() != points {
                return Err(IoError::Pcd(format!("{} rows, POINTS says {points}", out.len())));
            }
        }
    }
    Ok(PointCloud::new(out))
}

/// Largest range representable in centimeter PNG.
pub const PNG_MAX_RANGE: f64 = 655.35;

/// 16-bit grayscale, `round(range * 100)`; invalid pixels are 0.
pub fn encode_range_png(img: &RangeImage) -> Result<Vec<u8>, IoError> {
    let (h, w) = (img.height(), img.width());
    let (Ok(w32), Ok(h32)) = (u32::try_from(w), u32::try_from(h)) else {
        return Err(IoError::Png("image too large".into()));
    };
    let mut data = Vec::with_capacity(h * w * 2);
    for (index, (&r, &v)) in img.ranges().iter().zip(img.mask()).enumerate() {
        let q = if v {
            let q = (r * 100.0).round();
            if !(1.0..=65535.0).contains(&q) {
                return Err(IoError::OutOfRange { index, value: r });
            }
            q as u16
        } else {
            0
        };
        data.extend_from_slice(&q.to_be_bytes());
    }
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, w32, h32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Sixteen);
        let mut writer = enc.write_header().map_err(|e| IoError::Png(e.to_string()))?;
        writer.write_image_data(&data).map_err(|e| IoError::Png(e.to_string()))?;
        writer.finish().map_err(|e| IoError::Png(e.to_string()))?;
    }
    Ok(out)
}

/// Height and width stored in a PNG header.
pub fn range_png_size(bytes: &[u8]) -> Result<(usize, usize), IoError> {
    let reader = png::Decoder::new(Cursor::new(bytes))
        .read_info()
        .map_err(|e| IoError::Png(e.to_string()))?;
    let info = reader.info();
    Ok((info.height as usize, info.width as usize))
}

pub fn decode_range_png(bytes: &[u8], cfg: &ProjectionConfig) -> Result<RangeImage, IoError> {
    let limits = png::Limits {
        bytes: cfg.len().saturating_mul(4).max(1 << 20),
    };
    let decoder = png::Decoder::new_with_limits(Cursor::new(bytes), limits);
    let mut reader = decoder.read_info().map_err(|e| IoError::Png(e.to_string()))?;
    let info = reader.info();
    let (w, h) = (info.width as usize, info.height as usize);
    if (h, w) != (cfg.height, cfg.width) {
        return Err(IoError::Shape {
            expected: (cfg.height, cfg.width),
            got: (h, w),
        });
    }
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Sixteen {
        return Err(IoError::Unsupported(format!(
            "range PNG must be 16-bit grayscale, got {:?} {:?}",
            info.color_type, info.bit_depth
        )));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| IoError::Png("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let frame = reader.next_frame(&mut buf).map_err(|e| IoError::Png(e.to_string()))?;
    let buf = &buf[..frame.buffer_size()];
    if buf.len() != h * w * 2 {
        return Err(IoError::Png("unexpected frame size".into()));
    }
    let mut range = Vec::with_capacity(h * w);
    let mut valid = Vec::with_capacity(h * w);
    for px in buf.chunks_exact(2) {
        let q = u16::from_be_bytes([px[0], px[1]]);
        valid.push(q != 0);
        range.push(f64::from(q) / 100.0);
    }
    RangeImage::from_parts(*cfg, range, valid, None).map_err(|e| IoError::Png(e.to_string()))
}

pub fn export_range_png(img: &RangeImage, path: impl AsRef<Path>) -> Result<(), IoError> {
    write_bytes(path.as_ref(), &encode_range_png(img)?)
}

pub fn import_range_png(path: impl AsRef<Path>, cfg: &ProjectionConfig) -> Result<RangeImage, IoError> {
    decode_range_png(&read_bytes(path.as_ref())?, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kitti_empty_and_single() {
        assert!(decode_kitti_bin(&[]).unwrap().is_empty());
        let mut bytes = Vec::new();
        for v in [1.0f32, 2.0, 3.0, 0.5] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let cloud = decode_kitti_bin(&bytes).unwrap();
        assert_eq!(cloud.points, vec![Point::new(1.0, 2.0, 3.0, 0.5)]);
        assert_eq!(encode_kitti_bin(&cloud), bytes);
    }

    #[test]
    fn kitti_truncated() {
        assert!(matches!(
            decode_kitti_bin(&[0u8; 17]),
            Err(IoError::Truncated { len: 17, record: 16 })
        ));
    }

    #[test]
    fn kitti_non_finite() {
        let mut bytes = vec![0u8; 32];
        bytes[16..20].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode_kitti_bin(&bytes), Err(IoError::NonFinite { index: 1 })));
    }

    #[test]
    fn label_bit_layout() {
        assert_eq!(label_class(0x0002_0001), 1);
        assert_eq!(label_instance(0x0002_0001), 2);
        assert_eq!(pack_label(1, 2), 0x0002_0001);
        assert_eq!(decode_labels(&[]).unwrap(), Vec::<u32>::new());
        assert_eq!(decode_labels(&0x0002_0001u32.to_le_bytes()).unwrap(), vec![0x0002_0001]);
        assert!(matches!(decode_labels(&[1, 2, 3]), Err(IoError::Truncated { .. })));
    }

    #[test]
    fn pcd_empty_cloud_header() {
        let bytes = encode_pcd(&PointCloud::default(), PcdData::Binary);
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.contains("POINTS 0\n"));
        assert!(decode_pcd(&bytes).unwrap().is_empty());
        assert!(decode_pcd(&encode_pcd(&PointCloud::default(), PcdData::Ascii)).unwrap().is_empty());
    }

    #[test]
    fn pcd_round_trips() {
        let cloud = PointCloud::new(vec![
            Point::new(1.5, -2.25, 0.125, 0.75),
            Point::new(f32::MAX.into(), f32::MIN_POSITIVE.into(), f64::from(-0.1f32), 0.3f32.into()),
        ]);
        assert_eq!(decode_pcd(&encode_pcd(&cloud, PcdData::Binary)).unwrap(), cloud);
        assert_eq!(decode_pcd(&encode_pcd(&cloud, PcdData::Ascii)).unwrap(), cloud);
    }

    #[test]
    fn pcd_xyz_only_is_accepted() {
        let text = "VERSION .7\nFIELDS x y z\nSIZE 4 4 4\nTYPE F F F\nCOUNT 1 1 1\nWIDTH 1\nHEIGHT 1\nPOINTS 1\nDATA ascii\n1 2 3\n";
        let c = decode_pcd(text.as_bytes()).unwrap();
        assert_eq!(c.points, vec![Point::new(1.0, 2.0, 3.0, 0.0)]);
    }

    #[test]
    fn pcd_unsupported() {
        let rgb = "FIELDS x y z rgb\nSIZE 4 4 4 4\nTYPE F F F F\nCOUNT 1 1 1 1\nPOINTS 0\nDATA ascii\n";
        assert!(matches!(decode_pcd(rgb.as_bytes()), Err(IoError::Unsupported(_))));
        let dbl = "FIELDS x y z\nSIZE 8 8 8\nTYPE F F F\nCOUNT 1 1 1\nPOINTS 0\nDATA ascii\n";
        assert!(matches!(decode_pcd(dbl.as_bytes()), Err(IoError::Unsupported(_))));
        let comp = "FIELDS x y z\nPOINTS 0\nDATA binary_compressed\n";
        assert!(matches!(decode_pcd(comp.as_bytes()), Err(IoError::Unsupported(_))));
    }

    #[test]
    fn png_scale_and_invalid() {
        let cfg = ProjectionConfig::new(1, 3, 15.0, -15.0).unwrap();
        let img = RangeImage::from_parts(cfg, vec![10.0, 0.0, 655.349], vec![true, false, true], None).unwrap();
        let bytes = encode_range_png(&img).unwrap();
        let back = decode_range_png(&bytes, &cfg).unwrap();
        assert_eq!(back.get(0, 0), Some(10.0));
        assert_eq!(back.get(0, 1), None);
        assert!((back.get(0, 2).unwrap() - 655.349).abs() <= 0.005);
        let wrong = ProjectionConfig::new(3, 1, 15.0, -15.0).unwrap();
        assert!(matches!(decode_range_png(&bytes, &wrong), Err(IoError::Shape { .. })));
    }

    #[test]
    fn png_pixel_value() {
        let cfg = ProjectionConfig::new(1, 1, 15.0, -15.0).unwrap();
        let img = RangeImage::from_ranges(cfg, vec![10.0]).unwrap();
        let bytes = encode_range_png(&img).unwrap();
        let mut reader = png::Decoder::new(Cursor::new(bytes)).read_info().unwrap();
        let mut buf = vec![0; reader.output_buffer_size().unwrap()];
        reader.next_frame(&mut buf).unwrap();
        assert_eq!(u16::from_be_bytes([buf[0], buf[1]]), 1000);
    }

    #[test]
    fn png_out_of_range() {
        let cfg = ProjectionConfig::new(1, 2, 15.0, -15.0).unwrap();
        for r in [655.36, 700.0, 0.001] {
            let img = RangeImage::from_ranges(cfg, vec![1.0, r]).unwrap();
            assert!(matches!(encode_range_png(&img), Err(IoError::OutOfRange { index: 1, .. })));
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(read_kitti_bin("/nonexistent/x.bin"), Err(IoError::Io { .. })));
    }

    #[test]
    fn scan_with_sibling_labels() {
        let dir = tempfile::tempdir().unwrap();
        let bin = dir.path().join("000000.bin");
        let cloud = PointCloud::new(vec![Point::new(1.0, 0.0, 0.0, 0.0); 3]);
        write_kitti_bin(&cloud, &bin).unwrap();
        assert!(read_scan(&bin).unwrap().labels.is_none());
        write_labels(&[1, 2, 3], dir.path().join("000000.label")).unwrap();
        assert_eq!(read_scan(&bin).unwrap().labels, Some(vec![1, 2, 3]));
        write_labels(&[1], dir.path().join("000000.label")).unwrap();
        assert!(matches!(read_scan(&bin), Err(IoError::LabelCount(1, 3))));
        assert_eq!(list_scans(dir.path()).unwrap(), vec![bin]);
    }
}
